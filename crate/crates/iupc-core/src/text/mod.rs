//! Text pipeline: tokenization, vocabulary, dataset import/export, and the
//! attribute statistics behind the low-resource analysis.

mod io;
mod vocab;

pub use io::{export_jsonl, import_jsonl, import_tang_tsv};
pub use vocab::{build_vocab, tokenize, Vocab, CLS_ID, PAD_ID, UNK_ID};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: expected {expected}, got {got}")]
    BadRecord {
        path: String,
        line: usize,
        expected: String,
        got: String,
    },
    #[error("{path}:{line}: missing key '{key}'")]
    MissingKey {
        path: String,
        line: usize,
        key: String,
    },
    #[error("{path}:{line}: label {label} outside 1..={num_classes}")]
    LabelOutOfRange {
        path: String,
        line: usize,
        label: i64,
        num_classes: usize,
    },
    #[error("empty corpus: {context}")]
    EmptyCorpus { context: String },
    #[error("sample {index}: text is empty after normalization")]
    EmptyText { index: usize },
    #[error("vocabulary max size {max_size} cannot hold the {reserved} reserved ids")]
    VocabTooSmall { max_size: usize, reserved: usize },
    #[error("max_len must be at least 2 (CLS plus one content token), got {max_len}")]
    MaxLenTooSmall { max_len: usize },
}

/// One review with raw text, before tokenization. Labels are stored 0-based;
/// the importers own the 1-based shift used at every file boundary.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextSample {
    pub user_id: String,
    pub product_id: String,
    pub label: usize,
    pub text: String,
}

/// An ordered split of raw-text reviews.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TextSplit {
    pub samples: Vec<TextSample>,
    pub split_name: String,
    pub num_classes: usize,
}

/// One tokenized training/eval unit. `tokens[0]` is always CLS.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReviewSample {
    pub user_id: String,
    pub product_id: String,
    pub label: usize,
    pub tokens: Vec<u32>,
}

/// An ordered split of tokenized reviews. Importers never produce an empty
/// split; the low-resource filter may.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetSplit {
    pub samples: Vec<ReviewSample>,
    pub split_name: String,
    pub num_classes: usize,
}

impl DatasetSplit {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Tokenize every sample of a raw split with a fixed vocabulary.
pub fn tokenize_split(
    split: &TextSplit,
    vocab: &Vocab,
    max_len: usize,
) -> Result<DatasetSplit, DataError> {
    let mut samples = Vec::with_capacity(split.samples.len());
    for (index, s) in split.samples.iter().enumerate() {
        let tokens = tokenize(&s.text, vocab, max_len).map_err(|e| match e {
            DataError::EmptyText { .. } => DataError::EmptyText { index },
            other => other,
        })?;
        samples.push(ReviewSample {
            user_id: s.user_id.clone(),
            product_id: s.product_id.clone(),
            label: s.label,
            tokens,
        });
    }
    Ok(DatasetSplit {
        samples,
        split_name: split.split_name.clone(),
        num_classes: split.num_classes,
    })
}

/// Review counts per user and per product over a training split.
#[derive(Clone, Debug)]
pub struct AttributeStats {
    pub user_counts: HashMap<String, usize>,
    pub product_counts: HashMap<String, usize>,
    pub avg_docs_per_user: f64,
    pub avg_docs_per_product: f64,
}

impl AttributeStats {
    pub fn user_count(&self, id: &str) -> usize {
        self.user_counts.get(id).copied().unwrap_or(0)
    }

    pub fn product_count(&self, id: &str) -> usize {
        self.product_counts.get(id).copied().unwrap_or(0)
    }
}

/// Exact per-attribute counts and averages (total docs / distinct attributes).
pub fn compute_attribute_stats(train: &DatasetSplit) -> AttributeStats {
    let mut user_counts: HashMap<String, usize> = HashMap::new();
    let mut product_counts: HashMap<String, usize> = HashMap::new();
    for s in &train.samples {
        *user_counts.entry(s.user_id.clone()).or_insert(0) += 1;
        *product_counts.entry(s.product_id.clone()).or_insert(0) += 1;
    }
    let total = train.samples.len() as f64;
    let avg_docs_per_user = total / user_counts.len().max(1) as f64;
    let avg_docs_per_product = total / product_counts.len().max(1) as f64;
    AttributeStats {
        user_counts,
        product_counts,
        avg_docs_per_user,
        avg_docs_per_product,
    }
}

/// How the user and product conditions combine in the low-resource filter.
/// The prose around the analysis is ambiguous; OR is the default reading.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FilterMode {
    Or,
    And,
}

/// Keep samples whose user or product (per `mode`) has fewer training
/// reviews than `theta` times the respective average. Attributes unseen in
/// training count as zero, so they are always kept under OR.
///
/// An empty result is valid; callers render it as an empty subset rather
/// than an error.
pub fn filter_low_resource(
    split: &DatasetSplit,
    stats: &AttributeStats,
    theta: f64,
    mode: FilterMode,
) -> DatasetSplit {
    assert!(theta > 0.0, "theta must be positive");
    let user_cap = theta * stats.avg_docs_per_user;
    let product_cap = theta * stats.avg_docs_per_product;
    let samples = split
        .samples
        .iter()
        .filter(|s| {
            let user_low = (stats.user_count(&s.user_id) as f64) < user_cap;
            let product_low = (stats.product_count(&s.product_id) as f64) < product_cap;
            match mode {
                FilterMode::Or => user_low || product_low,
                FilterMode::And => user_low && product_low,
            }
        })
        .cloned()
        .collect();
    DatasetSplit {
        samples,
        split_name: split.split_name.clone(),
        num_classes: split.num_classes,
    }
}
