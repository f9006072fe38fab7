//! Dataset importers and the canonical JSONL exporter.
//!
//! Two on-disk formats are understood:
//! - benchmark TSV: `user \t\t product \t\t rating \t\t text`, with the
//!   two-character separator tab-tab and `<sssss>` sentence markers inside
//!   the text;
//! - canonical JSONL: one object per line with keys `user_id`, `product_id`,
//!   `label` (1-based integer) and `text`.
//!
//! Both store 1-based ratings; samples come out 0-based.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DataError, TextSample, TextSplit};

const SENTENCE_MARKER: &str = "<sssss>";

fn io_err(path: &Path, source: std::io::Error) -> DataError {
    DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn shift_label(
    raw: i64,
    num_classes: Option<usize>,
    path: &Path,
    line: usize,
) -> Result<usize, DataError> {
    let upper = num_classes.map(|n| n as i64).unwrap_or(i64::MAX);
    if raw < 1 || raw > upper {
        return Err(DataError::LabelOutOfRange {
            path: path.display().to_string(),
            line,
            label: raw,
            num_classes: num_classes.unwrap_or(0),
        });
    }
    Ok((raw - 1) as usize)
}

fn finish_split(
    samples: Vec<TextSample>,
    num_classes: Option<usize>,
    split_name: &str,
    path: &Path,
) -> Result<TextSplit, DataError> {
    if samples.is_empty() {
        return Err(DataError::EmptyCorpus {
            context: path.display().to_string(),
        });
    }
    let num_classes =
        num_classes.unwrap_or_else(|| samples.iter().map(|s| s.label + 1).max().unwrap_or(1));
    Ok(TextSplit {
        samples,
        split_name: split_name.to_string(),
        num_classes,
    })
}

/// Import a benchmark-format TSV file.
///
/// `num_classes = None` infers the class count from the highest rating seen;
/// passing `Some(n)` instead validates every rating against `1..=n`.
pub fn import_tang_tsv(
    path: impl AsRef<Path>,
    num_classes: Option<usize>,
    split_name: &str,
) -> Result<TextSplit, DataError> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path).map_err(|e| io_err(path, e))?);
    let mut samples = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split("\t\t").collect();
        if fields.len() != 4 {
            return Err(DataError::BadRecord {
                path: path.display().to_string(),
                line: line_no,
                expected: "4 double-tab separated fields".to_string(),
                got: format!("{} fields", fields.len()),
            });
        }
        let raw_label: i64 = fields[2].trim().parse().map_err(|_| DataError::BadRecord {
            path: path.display().to_string(),
            line: line_no,
            expected: "integer rating".to_string(),
            got: fields[2].trim().to_string(),
        })?;
        let label = shift_label(raw_label, num_classes, path, line_no)?;
        samples.push(TextSample {
            user_id: fields[0].to_string(),
            product_id: fields[1].to_string(),
            label,
            text: fields[3].replace(SENTENCE_MARKER, " "),
        });
    }
    finish_split(samples, num_classes, split_name, path)
}

#[derive(Serialize, Deserialize)]
struct JsonlRecord {
    user_id: String,
    product_id: String,
    label: i64,
    text: String,
}

/// Import the canonical JSONL format. Duplicate lines stay distinct samples.
pub fn import_jsonl(
    path: impl AsRef<Path>,
    num_classes: Option<usize>,
    split_name: &str,
) -> Result<TextSplit, DataError> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path).map_err(|e| io_err(path, e))?);
    let mut samples = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: JsonlRecord = serde_json::from_str(&line).map_err(|e| {
            // distinguish a missing key from malformed JSON for the caller
            let msg = e.to_string();
            if let Some(key) = ["user_id", "product_id", "label", "text"]
                .iter()
                .find(|k| msg.contains(&format!("missing field `{k}`")))
            {
                DataError::MissingKey {
                    path: path.display().to_string(),
                    line: line_no,
                    key: key.to_string(),
                }
            } else {
                DataError::BadRecord {
                    path: path.display().to_string(),
                    line: line_no,
                    expected: "JSON object with user_id/product_id/label/text".to_string(),
                    got: msg,
                }
            }
        })?;
        let label = shift_label(record.label, num_classes, path, line_no)?;
        samples.push(TextSample {
            user_id: record.user_id,
            product_id: record.product_id,
            label,
            text: record.text,
        });
    }
    finish_split(samples, num_classes, split_name, path)
}

/// Write a split as canonical JSONL (labels back to 1-based).
pub fn export_jsonl(split: &TextSplit, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut writer = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    for s in &split.samples {
        let record = JsonlRecord {
            user_id: s.user_id.clone(),
            product_id: s.product_id.clone(),
            label: s.label as i64 + 1,
            text: s.text.clone(),
        };
        let line = serde_json::to_string(&record).expect("record serialization cannot fail");
        writeln!(writer, "{line}").map_err(|e| io_err(path, e))?;
    }
    writer.flush().map_err(|e| io_err(path, e))
}
