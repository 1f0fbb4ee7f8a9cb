//! Corpus records and the prompt/response quality filters.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::seq::index;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::answer::extract_boxed;
use crate::seeding::derive_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Math,
    Code,
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Seed,
    SyntheticBreadth,
    SyntheticDepth,
}

impl Origin {
    pub fn is_synthetic(self) -> bool {
        self != Origin::Seed
    }
}

/// One prompt in a corpus. Fields not modeled here survive a read/write
/// cycle through `extra`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub id: String,
    pub text: String,
    pub source: String,
    pub domain: Domain,
    pub origin: Origin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style_tag: Option<String>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl PromptRecord {
    pub fn new(id: impl Into<String>, text: impl Into<String>, source: impl Into<String>) -> Self {
        PromptRecord {
            id: id.into(),
            text: text.into(),
            source: source.into(),
            domain: Domain::Math,
            origin: Origin::Seed,
            style_tag: None,
            extra: Map::new(),
        }
    }

    pub fn with_origin(mut self, origin: Origin) -> Self {
        self.origin = origin;
        self
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }
}

/// A generated response to one prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseCandidate {
    pub problem_id: String,
    pub model_id: String,
    pub text: String,
    #[serde(default)]
    pub boxed_answer: Option<String>,
    #[serde(default)]
    pub filter_verdicts: BTreeMap<String, bool>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl ResponseCandidate {
    pub fn new(
        problem_id: impl Into<String>,
        model_id: impl Into<String>,
        text: impl Into<String>,
    ) -> Self {
        let text = text.into();
        ResponseCandidate {
            problem_id: problem_id.into(),
            model_id: model_id.into(),
            boxed_answer: extract_boxed(&text),
            text,
            filter_verdicts: BTreeMap::new(),
            extra: Map::new(),
        }
    }

    /// Recomputes `boxed_answer` from `text`.
    pub fn refresh_boxed(&mut self) {
        self.boxed_answer = extract_boxed(&self.text);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurationConfig {
    pub max_prompt_words: usize,
    pub max_response_words: usize,
    pub repetition_block_min: usize,
    pub repetition_block_max: usize,
    pub repetition_min_repeats: usize,
}

impl Default for CurationConfig {
    fn default() -> Self {
        CurationConfig {
            max_prompt_words: 300,
            max_response_words: 2500,
            repetition_block_min: 3,
            repetition_block_max: 50,
            repetition_min_repeats: 10,
        }
    }
}

impl CurationConfig {
    pub fn validate(&self) -> Result<(), String> {
        let counts = [
            ("max_prompt_words", self.max_prompt_words),
            ("max_response_words", self.max_response_words),
            ("repetition_block_min", self.repetition_block_min),
            ("repetition_block_max", self.repetition_block_max),
            ("repetition_min_repeats", self.repetition_min_repeats),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(format!("curation.{name} must be positive"));
        }
        if self.repetition_block_min > self.repetition_block_max {
            return Err("curation.repetition_block_min exceeds repetition_block_max".into());
        }
        Ok(())
    }
}

/// Keeps the first record of every group whose lowercased text is identical.
pub fn dedup_prompts(records: &[PromptRecord]) -> Vec<PromptRecord> {
    let mut seen = HashSet::new();
    records
        .iter()
        .filter(|r| seen.insert(r.text.to_lowercase()))
        .cloned()
        .collect()
}

/// Number of maximal non-whitespace runs.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Length cap for synthetic prompts; seed prompts always pass.
pub fn filter_prompt_length(record: &PromptRecord, config: &CurationConfig) -> bool {
    !record.origin.is_synthetic() || word_count(&record.text) <= config.max_prompt_words
}

/// True when some block of `L` whitespace tokens, with `L` within the
/// configured bounds, repeats back to back at least `repetition_min_repeats`
/// times.
pub fn detect_repetition(text: &str, config: &CurationConfig) -> bool {
    let mut vocab: HashMap<&str, u32> = HashMap::new();
    let tokens: Vec<u32> = text
        .split_whitespace()
        .map(|t| {
            let next = vocab.len() as u32;
            *vocab.entry(t).or_insert(next)
        })
        .collect();
    let n = tokens.len();
    let repeats = config.repetition_min_repeats.max(1);
    for block in config.repetition_block_min.max(1)..=config.repetition_block_max {
        let needed = block * repeats;
        if needed > n {
            break;
        }
        // r back-to-back copies of a block of length L starting at s is the
        // same as tokens[j] == tokens[j + L] for every j in s..s + (r-1)L.
        let span = block * (repeats - 1);
        if span == 0 {
            return true;
        }
        let mut run = 0;
        for j in 0..n - block {
            if tokens[j] == tokens[j + block] {
                run += 1;
                if run >= span {
                    return true;
                }
            } else {
                run = 0;
            }
        }
    }
    false
}

pub const CHECK_LENGTH: &str = "length";
pub const CHECK_FORMAT: &str = "format";
pub const CHECK_REPETITION: &str = "repetition";
pub const CHECK_CROSS: &str = "cross_check";

/// Result of the response filter. `verdicts` maps each check to pass (true)
/// or fail (false).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterOutcome {
    pub passed: bool,
    pub verdicts: BTreeMap<String, bool>,
}

impl FilterOutcome {
    pub fn failed_checks(&self) -> impl Iterator<Item = &str> {
        self.verdicts
            .iter()
            .filter(|(_, ok)| !**ok)
            .map(|(k, _)| k.as_str())
    }
}

pub fn filter_response(candidate: &ResponseCandidate, config: &CurationConfig) -> FilterOutcome {
    let mut verdicts = BTreeMap::new();
    verdicts.insert(
        CHECK_LENGTH.to_string(),
        word_count(&candidate.text) <= config.max_response_words,
    );
    verdicts.insert(
        CHECK_FORMAT.to_string(),
        extract_boxed(&candidate.text).is_some(),
    );
    verdicts.insert(
        CHECK_REPETITION.to_string(),
        !detect_repetition(&candidate.text, config),
    );
    FilterOutcome {
        passed: verdicts.values().all(|ok| *ok),
        verdicts,
    }
}

/// Records that can be mixed into a training blend.
pub trait BlendRecord: Clone {
    fn record_id(&self) -> &str;
    fn cross_checked(&self) -> bool;
}

impl BlendRecord for PromptRecord {
    fn record_id(&self) -> &str {
        &self.id
    }

    fn cross_checked(&self) -> bool {
        self.extra.get(CHECK_CROSS).and_then(Value::as_bool) == Some(true)
    }
}

impl BlendRecord for ResponseCandidate {
    fn record_id(&self) -> &str {
        &self.problem_id
    }

    fn cross_checked(&self) -> bool {
        self.filter_verdicts.get(CHECK_CROSS) == Some(&true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    All,
    CrossCheckedOnly,
    RandomSubset(usize),
}

/// One input to [`compose_blend`]. `target` of `None` takes every record the
/// rule selects; otherwise a seeded subset of exactly `target` records.
#[derive(Debug, Clone)]
pub struct BlendSource<'a, T> {
    pub name: String,
    pub records: &'a [T],
    pub rule: SelectionRule,
    pub target: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BlendError {
    #[error("blend source `{source_name}` has {available} records after selection, {requested} requested")]
    Insufficient {
        source_name: String,
        available: usize,
        requested: usize,
    },
}

/// Draws `count` of `items` uniformly, keeping their original order.
fn ordered_subset<T: Clone>(items: Vec<T>, count: usize, rng: &mut impl rand::Rng) -> Vec<T> {
    if count >= items.len() {
        return items;
    }
    let mut picked = index::sample(rng, items.len(), count).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| items[i].clone()).collect()
}

/// Concatenates the selected records of every source in order, then drops
/// repeated ids (first occurrence wins). Deterministic for a given seed.
pub fn compose_blend<T: BlendRecord>(
    sources: &[BlendSource<'_, T>],
    seed: u64,
) -> Result<Vec<T>, BlendError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (source_idx, source) in sources.iter().enumerate() {
        let mut rng = derive_rng(seed, &[source_idx as u64]);
        let insufficient = |available, requested| BlendError::Insufficient {
            source_name: source.name.clone(),
            available,
            requested,
        };
        let mut selected: Vec<T> = match source.rule {
            SelectionRule::All => source.records.to_vec(),
            SelectionRule::CrossCheckedOnly => source
                .records
                .iter()
                .filter(|r| r.cross_checked())
                .cloned()
                .collect(),
            SelectionRule::RandomSubset(n) => {
                if n > source.records.len() {
                    return Err(insufficient(source.records.len(), n));
                }
                ordered_subset(source.records.to_vec(), n, &mut rng)
            }
        };
        if let Some(target) = source.target {
            if target > selected.len() {
                return Err(insufficient(selected.len(), target));
            }
            selected = ordered_subset(selected, target, &mut rng);
        }
        for record in selected {
            if seen.insert(record.record_id().to_string()) {
                out.push(record);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prompt(id: &str, text: &str) -> PromptRecord {
        PromptRecord::new(id, text, "test")
    }

    fn words(n: usize) -> String {
        (0..n).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn dedup_keeps_first_case_variant() {
        let out = dedup_prompts(&[prompt("a", "Solve x+1=2"), prompt("b", "solve X+1=2")]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].id, "a");
        assert!(dedup_prompts(&[]).is_empty());
        let distinct = dedup_prompts(&[prompt("a", "one"), prompt("b", "two")]);
        assert_eq!(distinct.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(), ["a", "b"]);
    }

    #[test]
    fn word_counts() {
        assert_eq!(word_count("a b  c"), 3);
        assert_eq!(word_count(""), 0);
        assert_eq!(word_count("x+1=2"), 1);
    }

    #[test]
    fn prompt_length_cap_applies_to_synthetic_only() {
        let cfg = CurationConfig::default();
        let long = prompt("s", &words(301)).with_origin(Origin::SyntheticBreadth);
        let edge = prompt("s", &words(300)).with_origin(Origin::SyntheticDepth);
        let seed = prompt("s", &words(400));
        assert!(!filter_prompt_length(&long, &cfg));
        assert!(filter_prompt_length(&edge, &cfg));
        assert!(filter_prompt_length(&seed, &cfg));
    }

    #[test]
    fn repetition_examples() {
        let cfg = CurationConfig::default();
        let looped = format!("the answer is {}", "yes no maybe ".repeat(12));
        assert!(detect_repetition(&looped, &cfg));
        assert!(!detect_repetition("", &cfg));
        let nine = format!("start {}", "yes no maybe ".repeat(9));
        assert!(!detect_repetition(&nine, &cfg));
        let ten = format!("start {} end", "yes no maybe ".repeat(10));
        assert!(detect_repetition(&ten, &cfg));
    }

    #[test]
    fn short_blocks_below_minimum_are_ignored() {
        let cfg = CurationConfig::default();
        // a period-2 loop only counts through its period-4 multiple
        let two = "a b ".repeat(10);
        assert!(!detect_repetition(&two, &cfg));
        let many = "a b ".repeat(40);
        assert!(detect_repetition(&many, &cfg));
    }

    #[test]
    fn response_filter_checks() {
        let cfg = CurationConfig::default();
        let long = ResponseCandidate::new("p", "m", format!("{} \\boxed{{1}}", words(2500)));
        let out = filter_response(&long, &cfg);
        assert!(!out.passed);
        assert_eq!(out.failed_checks().collect::<Vec<_>>(), [CHECK_LENGTH]);

        let unboxed = ResponseCandidate::new("p", "m", "the answer is 4");
        let out = filter_response(&unboxed, &cfg);
        assert_eq!(out.failed_checks().collect::<Vec<_>>(), [CHECK_FORMAT]);

        let good = ResponseCandidate::new("p", "m", format!("{} \\boxed{{4}}", words(49)));
        let out = filter_response(&good, &cfg);
        assert!(out.passed);
        assert_eq!(out.verdicts.len(), 3);
    }

    #[test]
    fn config_validation() {
        assert!(CurationConfig::default().validate().is_ok());
        let bad = CurationConfig {
            repetition_block_min: 60,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let zero = CurationConfig {
            max_prompt_words: 0,
            ..Default::default()
        };
        assert!(zero.validate().is_err());
    }

    #[test]
    fn unknown_fields_survive_round_trip() {
        let line = r#"{"id":"p1","text":"t","source":"s","domain":"math","origin":"seed","answer":"3","meta":{"k":1}}"#;
        let rec: PromptRecord = serde_json::from_str(line).unwrap();
        assert_eq!(rec.extra.len(), 2);
        let back: Value = serde_json::to_value(&rec).unwrap();
        assert_eq!(back["meta"]["k"], 1);
        assert_eq!(back["answer"], "3");
    }

    fn corpus(prefix: &str, n: usize) -> Vec<PromptRecord> {
        (0..n).map(|i| prompt(&format!("{prefix}{i}"), "q")).collect()
    }

    #[test]
    fn blend_rules() {
        let a = corpus("a", 5);
        let all = compose_blend(
            &[BlendSource { name: "a".into(), records: &a, rule: SelectionRule::All, target: None }],
            1,
        )
        .unwrap();
        assert_eq!(all, a);

        let b = vec![prompt("a0", "other"), prompt("b0", "q")];
        let merged = compose_blend(
            &[
                BlendSource { name: "a".into(), records: &a[..1], rule: SelectionRule::All, target: None },
                BlendSource { name: "b".into(), records: &b, rule: SelectionRule::All, target: None },
            ],
            1,
        )
        .unwrap();
        assert_eq!(merged.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(), ["a0", "b0"]);
        assert_eq!(merged[0].text, "q");
    }

    #[test]
    fn random_subset_is_seed_deterministic() {
        let big = corpus("x", 100);
        let run = |seed| {
            compose_blend(
                &[BlendSource {
                    name: "x".into(),
                    records: &big,
                    rule: SelectionRule::RandomSubset(10),
                    target: None,
                }],
                seed,
            )
            .unwrap()
        };
        let first = run(7);
        assert_eq!(first.len(), 10);
        assert_eq!(first, run(7));
        assert_ne!(first, run(8));
    }

    #[test]
    fn cross_checked_rule_and_shortage() {
        let mut recs = corpus("c", 4);
        recs[1].extra.insert(CHECK_CROSS.into(), Value::Bool(true));
        recs[3].extra.insert(CHECK_CROSS.into(), Value::Bool(true));
        let src = |target| BlendSource {
            name: "c".into(),
            records: &recs,
            rule: SelectionRule::CrossCheckedOnly,
            target,
        };
        let picked = compose_blend(&[src(None)], 0).unwrap();
        assert_eq!(picked.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(), ["c1", "c3"]);
        let err = compose_blend(&[src(Some(3))], 0).unwrap_err();
        assert_eq!(
            err,
            BlendError::Insufficient { source_name: "c".into(), available: 2, requested: 3 }
        );
    }
}
