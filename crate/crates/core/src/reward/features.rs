//! Deterministic response features for the linear scorer.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::curation::{detect_repetition, word_count, CurationConfig, ResponseCandidate};
use crate::decontam::normalize_text;

/// Dense feature vector of fixed dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for FeatureVector {
    fn from(v: Vec<f64>) -> Self {
        FeatureVector(v)
    }
}

pub trait FeatureExtractor: Send + Sync {
    /// Recorded in checkpoints so scores are only reused with the same extractor.
    fn version(&self) -> &str;
    fn dim(&self) -> usize;
    fn extract(&self, prompt: &str, candidate: &ResponseCandidate) -> FeatureVector;
}

/// Ten surface statistics of a response:
///
/// | idx | feature |
/// |-----|---------|
/// | 0 | `ln(1 + words)` |
/// | 1 | has a boxed answer |
/// | 2 | number of `\boxed` occurrences |
/// | 3 | share of distinct prompt tokens that appear in the response |
/// | 4 | `ln(1 + lines)` |
/// | 5 | mean word length in chars |
/// | 6 | digit share of non-space chars |
/// | 7 | repetition detected |
/// | 8 | distinct-word ratio |
/// | 9 | relative position of the last `\boxed` |
#[derive(Debug, Clone, Copy, Default)]
pub struct BasicFeatures;

pub const BASIC_FEATURES_VERSION: &str = "basic-v1";
pub const BASIC_FEATURES_DIM: usize = 10;

impl FeatureExtractor for BasicFeatures {
    fn version(&self) -> &str {
        BASIC_FEATURES_VERSION
    }

    fn dim(&self) -> usize {
        BASIC_FEATURES_DIM
    }

    fn extract(&self, prompt: &str, candidate: &ResponseCandidate) -> FeatureVector {
        let text = &candidate.text;
        let words: Vec<&str> = text.split_whitespace().collect();
        let n_words = word_count(text);
        let boxed_count = text.matches("\\boxed").count();
        let prompt_tokens: HashSet<String> = normalize_text(prompt).into_iter().collect();
        let response_tokens: HashSet<String> = normalize_text(text).into_iter().collect();
        let overlap = if prompt_tokens.is_empty() {
            0.0
        } else {
            prompt_tokens.intersection(&response_tokens).count() as f64 / prompt_tokens.len() as f64
        };
        let chars: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
        let digit_share = if chars.is_empty() {
            0.0
        } else {
            chars.iter().filter(|c| c.is_ascii_digit()).count() as f64 / chars.len() as f64
        };
        let mean_word_len = if words.is_empty() {
            0.0
        } else {
            chars.len() as f64 / words.len() as f64
        };
        let distinct = words.iter().collect::<HashSet<_>>().len();
        let distinct_ratio = if words.is_empty() {
            0.0
        } else {
            distinct as f64 / words.len() as f64
        };
        let box_position = text
            .rfind("\\boxed")
            .map(|p| p as f64 / text.len().max(1) as f64)
            .unwrap_or(0.0);
        FeatureVector(vec![
            (1.0 + n_words as f64).ln(),
            f64::from(u8::from(candidate.boxed_answer.is_some())),
            boxed_count as f64,
            overlap,
            (1.0 + text.lines().count() as f64).ln(),
            mean_word_len,
            digit_share,
            f64::from(u8::from(detect_repetition(text, &CurationConfig::default()))),
            distinct_ratio,
            box_position,
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_dimension_and_values() {
        let cand = ResponseCandidate::new("p", "m", "add 2 and 3\nso \\boxed{5}");
        let f = BasicFeatures.extract("add 2 and 3", &cand);
        assert_eq!(f.dim(), BASIC_FEATURES_DIM);
        assert_eq!(f.0[1], 1.0);
        assert_eq!(f.0[2], 1.0);
        assert_eq!(f.0[3], 1.0);
        assert!(f.0.iter().all(|v| v.is_finite()));
        let empty = BasicFeatures.extract("", &ResponseCandidate::new("p", "m", ""));
        assert_eq!(empty.dim(), BASIC_FEATURES_DIM);
        assert!(empty.0.iter().all(|v| v.is_finite()));
    }
}
