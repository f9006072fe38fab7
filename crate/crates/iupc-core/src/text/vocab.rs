//! Vocabulary construction and whitespace/punctuation tokenization.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{DataError, TextSplit};

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const CLS_ID: u32 = 2;

const RESERVED: [&str; 3] = ["<pad>", "<unk>", "<cls>"];

/// Token <-> id mapping with fixed reserved ids PAD=0, UNK=1, CLS=2.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    id_to_token: Vec<String>,
    #[serde(skip)]
    token_to_id: HashMap<String, u32>,
}

impl Vocab {
    fn from_tokens(id_to_token: Vec<String>) -> Vocab {
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocab {
            id_to_token,
            token_to_id,
        }
    }

    /// Rebuild the lookup map after deserialization.
    pub fn rebuild_index(&mut self) {
        self.token_to_id = self
            .id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.id_to_token.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }
}

/// Split a text into lowercase word tokens. Pieces are separated by
/// whitespace; leading and trailing punctuation is stripped from each piece
/// while interior punctuation ("don't", "so-so") stays part of the word.
pub(crate) fn word_tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|piece| {
            let trimmed = piece.trim_matches(|c: char| !c.is_alphanumeric());
            if trimmed.is_empty() {
                None
            } else {
                Some(trimmed.to_lowercase())
            }
        })
        .collect()
}

/// Build a frequency-ranked vocabulary from the training split.
///
/// Tokens below `min_freq` are dropped; the rest are ranked by descending
/// count with lexicographic tie-break, and truncated so the total size
/// (reserved ids included) stays within `max_size`.
pub fn build_vocab(train: &TextSplit, max_size: usize, min_freq: usize) -> Result<Vocab, DataError> {
    if max_size < RESERVED.len() {
        return Err(DataError::VocabTooSmall {
            max_size,
            reserved: RESERVED.len(),
        });
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    for sample in &train.samples {
        for token in word_tokens(&sample.text) {
            *counts.entry(token).or_insert(0) += 1;
        }
    }
    if counts.is_empty() {
        return Err(DataError::EmptyCorpus {
            context: format!("no tokens in split '{}'", train.split_name),
        });
    }
    let mut ranked: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|(_, c)| *c >= min_freq)
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let capacity = max_size - RESERVED.len();
    let mut id_to_token: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
    id_to_token.extend(ranked.into_iter().take(capacity).map(|(t, _)| t));
    Ok(Vocab::from_tokens(id_to_token))
}

/// Tokenize one text: lowercased word tokens, CLS prepended, truncated to
/// `max_len`, unknown words mapped to UNK. PAD never appears in a sample.
pub fn tokenize(text: &str, vocab: &Vocab, max_len: usize) -> Result<Vec<u32>, DataError> {
    if max_len < 2 {
        return Err(DataError::MaxLenTooSmall { max_len });
    }
    let words = word_tokens(text);
    if words.is_empty() {
        return Err(DataError::EmptyText { index: 0 });
    }
    let mut ids = Vec::with_capacity((words.len() + 1).min(max_len));
    ids.push(CLS_ID);
    for word in words {
        if ids.len() == max_len {
            break;
        }
        ids.push(vocab.id(&word).unwrap_or(UNK_ID));
    }
    Ok(ids)
}

#[cfg(test)]
mod tests {
    use super::super::{TextSample, TextSplit};
    use super::*;

    fn corpus(text: &str) -> TextSplit {
        TextSplit {
            samples: vec![TextSample {
                user_id: "u".into(),
                product_id: "p".into(),
                label: 0,
                text: text.into(),
            }],
            split_name: "train".into(),
            num_classes: 5,
        }
    }

    #[test]
    fn frequency_then_lexicographic_order() {
        let vocab = build_vocab(&corpus("a a b"), 10, 1).unwrap();
        assert_eq!(vocab.id("a"), Some(3));
        assert_eq!(vocab.id("b"), Some(4));
        assert_eq!(vocab.len(), 5);
    }

    #[test]
    fn equal_counts_break_ties_lexicographically() {
        let vocab = build_vocab(&corpus("b a"), 4, 1).unwrap();
        assert_eq!(vocab.id("a"), Some(3));
        // max_size 4 leaves room for one content token; "a" wins the tie
        assert_eq!(vocab.id("b"), None);
        assert_eq!(vocab.len(), 4);
    }

    #[test]
    fn min_freq_drops_rare_tokens() {
        let vocab = build_vocab(&corpus("a a b"), 10, 2).unwrap();
        assert_eq!(vocab.id("a"), Some(3));
        assert_eq!(vocab.id("b"), None);
        let ids = tokenize("b", &vocab, 16).unwrap();
        assert_eq!(ids, vec![CLS_ID, UNK_ID]);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(
            build_vocab(&corpus("  ... !!"), 10, 1),
            Err(DataError::EmptyCorpus { .. })
        ));
    }

    #[test]
    fn tokenize_known_words() {
        let vocab = build_vocab(&corpus("good food good"), 16, 1).unwrap();
        let ids = tokenize("Good food", &vocab, 16).unwrap();
        assert_eq!(ids, vec![CLS_ID, vocab.id("good").unwrap(), vocab.id("food").unwrap()]);
    }

    #[test]
    fn long_text_truncates_to_max_len() {
        let vocab = build_vocab(&corpus("w"), 16, 1).unwrap();
        let text = vec!["w"; 600].join(" ");
        let ids = tokenize(&text, &vocab, 512).unwrap();
        assert_eq!(ids.len(), 512);
        assert_eq!(ids[0], CLS_ID);
    }

    #[test]
    fn unseen_hyphenated_word_is_single_unk() {
        let vocab = build_vocab(&corpus("hello"), 16, 1).unwrap();
        let ids = tokenize("zzz-unseen", &vocab, 16).unwrap();
        assert_eq!(ids, vec![CLS_ID, UNK_ID]);
    }

    #[test]
    fn empty_after_normalization_is_an_error() {
        let vocab = build_vocab(&corpus("hello"), 16, 1).unwrap();
        assert!(matches!(
            tokenize("?!, --", &vocab, 16),
            Err(DataError::EmptyText { .. })
        ));
    }

    #[test]
    fn surrounding_punctuation_is_stripped() {
        let vocab = build_vocab(&corpus("great pizza"), 16, 1).unwrap();
        let ids = tokenize("(Great), pizza!", &vocab, 16).unwrap();
        assert_eq!(
            ids,
            vec![CLS_ID, vocab.id("great").unwrap(), vocab.id("pizza").unwrap()]
        );
    }
}
