//! Test-set decontamination by word n-gram overlap and subsequence length.
//!
//! A prompt is checked by looking up each of its word n-grams in an index
//! built over the test items. In math mode a hit is only contamination when
//! the longest common subsequence with the hit item also covers more than
//! `lcs_threshold` of the prompt; in general mode any hit is enough.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::curation::{Domain, PromptRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecontamMode {
    Math,
    General,
}

impl DecontamMode {
    pub fn for_domain(domain: Domain) -> Self {
        match domain {
            Domain::Math => DecontamMode::Math,
            Domain::Code | Domain::General => DecontamMode::General,
        }
    }
}

/// Which sequence length divides the LCS length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LcsDenominator {
    #[default]
    Prompt,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecontamConfig {
    pub ngram_size: usize,
    pub lcs_threshold: f64,
    pub mode: DecontamMode,
    pub lcs_denominator: LcsDenominator,
}

impl Default for DecontamConfig {
    fn default() -> Self {
        DecontamConfig {
            ngram_size: 13,
            lcs_threshold: 0.60,
            mode: DecontamMode::Math,
            lcs_denominator: LcsDenominator::Prompt,
        }
    }
}

impl DecontamConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.ngram_size == 0 {
            return Err("decontamination.ngram_size must be at least 1".into());
        }
        if !(self.lcs_threshold > 0.0 && self.lcs_threshold <= 1.0) {
            return Err("decontamination.lcs_threshold must lie in (0, 1]".into());
        }
        Ok(())
    }
}

/// One benchmark item, as read from a test-set JSON-Lines file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestItem {
    pub test_set: String,
    pub id: String,
    pub text: String,
}

/// NFKC, lowercase, every non-alphanumeric character to a space, then split.
pub fn normalize_text(text: &str) -> Vec<String> {
    let folded: String = text.nfkc().collect::<String>().to_lowercase().nfkc().collect();
    let mapped: String = folded
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    mapped.split_whitespace().map(str::to_owned).collect()
}

/// Word-level LCS length divided by the prompt length (0 for an empty prompt).
pub fn lcs_fraction<T: PartialEq>(prompt_tokens: &[T], test_tokens: &[T]) -> f64 {
    if prompt_tokens.is_empty() {
        return 0.0;
    }
    lcs_len(prompt_tokens, test_tokens) as f64 / prompt_tokens.len() as f64
}

/// Two-row dynamic program over the shorter sequence.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let mut prev = vec![0usize; short.len() + 1];
    let mut cur = vec![0usize; short.len() + 1];
    for x in long {
        for (j, y) in short.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[short.len()]
}

/// Indexed reference to a test item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemRef {
    pub test_set: String,
    pub id: String,
}

/// Word n-gram index over tokenized test items. Immutable once built.
#[derive(Debug, Clone)]
pub struct NgramIndex {
    ngram_size: usize,
    vocab: HashMap<String, u32>,
    items: Vec<ItemRef>,
    item_tokens: Vec<Vec<u32>>,
    entries: HashMap<Box<[u32]>, Vec<u32>>,
}

const UNKNOWN: u32 = u32::MAX;

impl NgramIndex {
    pub fn ngram_size(&self) -> usize {
        self.ngram_size
    }

    pub fn num_keys(&self) -> usize {
        self.entries.len()
    }

    pub fn items(&self) -> &[ItemRef] {
        &self.items
    }

    /// Test items containing `ngram` (already normalized tokens).
    pub fn lookup(&self, ngram: &[&str]) -> Vec<&ItemRef> {
        let key: Vec<u32> = ngram.iter().map(|t| self.token_id(t)).collect();
        self.entries
            .get(key.as_slice())
            .map(|hits| hits.iter().map(|&i| &self.items[i as usize]).collect())
            .unwrap_or_default()
    }

    fn token_id(&self, token: &str) -> u32 {
        self.vocab.get(token).copied().unwrap_or(UNKNOWN)
    }

    fn encode(&self, tokens: &[String]) -> Vec<u32> {
        tokens.iter().map(|t| self.token_id(t)).collect()
    }
}

/// Indexes every contiguous `ngram_size`-token window of every item.
pub fn build_ngram_index(test_items: &[TestItem], config: &DecontamConfig) -> NgramIndex {
    let n = config.ngram_size.max(1);
    let mut vocab: HashMap<String, u32> = HashMap::new();
    let mut items = Vec::with_capacity(test_items.len());
    let mut item_tokens = Vec::with_capacity(test_items.len());
    let mut entries: HashMap<Box<[u32]>, Vec<u32>> = HashMap::new();
    for (idx, item) in test_items.iter().enumerate() {
        let ids: Vec<u32> = normalize_text(&item.text)
            .into_iter()
            .map(|t| {
                let next = vocab.len() as u32;
                *vocab.entry(t).or_insert(next)
            })
            .collect();
        for window in ids.windows(n) {
            let hits = entries.entry(window.into()).or_default();
            if hits.last() != Some(&(idx as u32)) {
                hits.push(idx as u32);
            }
        }
        items.push(ItemRef {
            test_set: item.test_set.clone(),
            id: item.id.clone(),
        });
        item_tokens.push(ids);
    }
    NgramIndex {
        ngram_size: n,
        vocab,
        items,
        item_tokens,
        entries,
    }
}

/// A test item implicated in a contamination decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub test_set: String,
    pub id: String,
    pub lcs_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationDecision {
    pub prompt_id: String,
    pub contaminated: bool,
    /// Items satisfying the mode's criterion, in test-file order.
    pub matches: Vec<Match>,
}

/// Decides contamination for one prompt under `config.mode`.
pub fn is_contaminated(
    prompt: &PromptRecord,
    index: &NgramIndex,
    config: &DecontamConfig,
) -> ContaminationDecision {
    check_tokens(&prompt.id, &normalize_text(&prompt.text), index, config)
}

/// As [`is_contaminated`], on pre-normalized tokens.
pub fn check_tokens(
    prompt_id: &str,
    tokens: &[String],
    index: &NgramIndex,
    config: &DecontamConfig,
) -> ContaminationDecision {
    let ids = index.encode(tokens);
    let mut hit_items: Vec<u32> = ids
        .windows(index.ngram_size)
        .filter(|w| !w.contains(&UNKNOWN))
        .filter_map(|w| index.entries.get(w))
        .flatten()
        .copied()
        .collect();
    hit_items.sort_unstable();
    hit_items.dedup();

    let mut matches = Vec::new();
    for item_idx in hit_items {
        let test_tokens = &index.item_tokens[item_idx as usize];
        let fraction = match config.lcs_denominator {
            LcsDenominator::Prompt => lcs_fraction(&ids, test_tokens),
            LcsDenominator::Test => lcs_fraction(test_tokens, &ids),
        };
        let counts = match config.mode {
            DecontamMode::General => true,
            DecontamMode::Math => fraction > config.lcs_threshold,
        };
        if counts {
            let item = &index.items[item_idx as usize];
            matches.push(Match {
                test_set: item.test_set.clone(),
                id: item.id.clone(),
                lcs_fraction: fraction,
            });
        }
    }
    ContaminationDecision {
        prompt_id: prompt_id.to_string(),
        contaminated: !matches.is_empty(),
        matches,
    }
}
