//! Reward-model training data: label candidate pools, drop single-class
//! problems, and draw balanced preference groups.
//!
//! With the score-sorted strategy, positives are drawn only from the
//! `window_k` highest-scored correct responses and negatives only from the
//! `window_k` lowest-scored incorrect ones, which keeps likely mislabeled
//! candidates out of the negative side.

use std::cmp::Ordering;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::answer::{grade_response, CanonicalAnswer, CorrectnessLabel};
use crate::curation::ResponseCandidate;
use crate::reward::features::{FeatureExtractor, FeatureVector};
use crate::seeding::{derive_rng, stable_hash};

/// Source of the score used to rank candidates before sampling.
pub trait PriorScorer {
    fn prior_score(&self, candidate: &ResponseCandidate) -> f64;
}

/// Reads a precomputed `prior_score` (or `score`) field from the candidate.
#[derive(Debug, Clone, Copy, Default)]
pub struct StoredPriorScore;

impl StoredPriorScore {
    pub fn read(candidate: &ResponseCandidate) -> Option<f64> {
        ["prior_score", "score"]
            .iter()
            .find_map(|k| candidate.extra.get(*k).and_then(serde_json::Value::as_f64))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledCandidate {
    pub candidate: ResponseCandidate,
    pub label: CorrectnessLabel,
    #[serde(default)]
    pub prior_score: Option<f64>,
}

impl LabeledCandidate {
    /// Unparseable counts as incorrect for pooling.
    pub fn is_positive(&self) -> bool {
        self.label.is_correct()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledProblem {
    pub problem_id: String,
    #[serde(default)]
    pub prompt: String,
    pub reference: CanonicalAnswer,
    pub candidates: Vec<LabeledCandidate>,
}

impl LabeledProblem {
    pub fn positive_indices(&self) -> Vec<usize> {
        self.pool(true)
    }

    pub fn negative_indices(&self) -> Vec<usize> {
        self.pool(false)
    }

    fn pool(&self, positive: bool) -> Vec<usize> {
        self.candidates
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_positive() == positive)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn count(&self, label: CorrectnessLabel) -> usize {
        self.candidates.iter().filter(|c| c.label == label).count()
    }
}

/// Grades every candidate against `reference`.
pub fn label_candidates(
    problem_id: &str,
    prompt: &str,
    reference: &CanonicalAnswer,
    candidates: Vec<(ResponseCandidate, Option<f64>)>,
) -> LabeledProblem {
    let candidates = candidates
        .into_iter()
        .map(|(candidate, prior_score)| LabeledCandidate {
            label: grade_response(&candidate.text, reference),
            candidate,
            prior_score,
        })
        .collect();
    LabeledProblem {
        problem_id: problem_id.to_string(),
        prompt: prompt.to_string(),
        reference: reference.clone(),
        candidates,
    }
}

/// Keep a problem only if both its correct and incorrect pools are non-empty.
pub fn filter_degenerate(labeled: &LabeledProblem) -> bool {
    let positives = labeled.candidates.iter().filter(|c| c.is_positive()).count();
    positives > 0 && positives < labeled.candidates.len()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleStrategy {
    ScoreSorted,
    Random,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub group_size: usize,
    pub window_k: usize,
    pub strategy: SampleStrategy,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            group_size: 6,
            window_k: 14,
            strategy: SampleStrategy::ScoreSorted,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.group_size < 2 {
            return Err("sampler.group_size must be at least 2".into());
        }
        if 2 * self.window_k < self.group_size {
            return Err("sampler.window_k must be at least group_size / 2".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SampleError {
    #[error("problem `{problem_id}` candidate {index} has no prior score")]
    MissingPriorScore { problem_id: String, index: usize },
    #[error("sampler configuration: {0}")]
    Config(String),
    #[error("problem `{problem_id}`: unknown response id `{id}`")]
    UnknownResponse { problem_id: String, id: String },
}

/// Candidate indices chosen for one group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupSelection {
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
}

/// Stable reference to a candidate within a labeled problem.
pub fn response_id(problem_id: &str, index: usize) -> String {
    format!("{problem_id}#{index}")
}

fn parse_response_id(problem_id: &str, id: &str) -> Option<usize> {
    id.strip_prefix(problem_id)?.strip_prefix('#')?.parse().ok()
}

/// Group size split for the available pool sizes: balanced when possible,
/// otherwise clamped; `None` when either side would be empty.
pub fn group_split(group_size: usize, available_pos: usize, available_neg: usize) -> Option<(usize, usize)> {
    let mut k = (group_size / 2).min(available_pos);
    let mut m = group_size - k;
    if m > available_neg {
        m = available_neg;
        k = (group_size - m).min(available_pos);
    }
    (k > 0 && m > 0).then_some((k, m))
}

fn sorted_window(
    labeled: &LabeledProblem,
    mut pool: Vec<usize>,
    descending: bool,
    window: usize,
) -> Result<Vec<usize>, SampleError> {
    let mut scores = Vec::with_capacity(pool.len());
    for &i in &pool {
        match labeled.candidates[i].prior_score {
            Some(s) => scores.push((i, s)),
            None => {
                return Err(SampleError::MissingPriorScore {
                    problem_id: labeled.problem_id.clone(),
                    index: i,
                })
            }
        }
    }
    scores.sort_by(|a, b| {
        let ord = a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal);
        let ord = if descending { ord.reverse() } else { ord };
        ord.then(a.0.cmp(&b.0))
    });
    pool = scores.into_iter().map(|(i, _)| i).take(window).collect();
    Ok(pool)
}

/// Chooses which candidates form the group for `labeled`.
pub fn select_group(
    labeled: &LabeledProblem,
    config: &SamplerConfig,
) -> Result<Option<GroupSelection>, SampleError> {
    config.validate().map_err(SampleError::Config)?;
    let (pos_pool, neg_pool) = match config.strategy {
        SampleStrategy::ScoreSorted => (
            sorted_window(labeled, labeled.positive_indices(), true, config.window_k)?,
            sorted_window(labeled, labeled.negative_indices(), false, config.window_k)?,
        ),
        SampleStrategy::Random => (labeled.positive_indices(), labeled.negative_indices()),
    };
    let Some((k, m)) = group_split(config.group_size, pos_pool.len(), neg_pool.len()) else {
        return Ok(None);
    };
    let mut rng = derive_rng(config.seed, &[stable_hash(&labeled.problem_id)]);
    let positives = index::sample(&mut rng, pos_pool.len(), k)
        .into_iter()
        .map(|i| pos_pool[i])
        .collect();
    let negatives = index::sample(&mut rng, neg_pool.len(), m)
        .into_iter()
        .map(|i| neg_pool[i])
        .collect();
    Ok(Some(GroupSelection {
        positives,
        negatives,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMember {
    pub response_id: String,
    pub features: FeatureVector,
}

/// One training example: `num_positive` correct and the rest incorrect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceGroup {
    pub problem_id: String,
    pub positives: Vec<GroupMember>,
    pub negatives: Vec<GroupMember>,
    pub num_positive: usize,
}

impl PreferenceGroup {
    pub fn record(&self) -> GroupRecord {
        GroupRecord {
            problem_id: self.problem_id.clone(),
            positive_ids: self.positives.iter().map(|m| m.response_id.clone()).collect(),
            negative_ids: self.negatives.iter().map(|m| m.response_id.clone()).collect(),
            k: self.num_positive,
        }
    }

    pub fn num_pairs(&self) -> usize {
        self.positives.len() * self.negatives.len()
    }
}

/// The JSON-Lines form of a group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupRecord {
    pub problem_id: String,
    pub positive_ids: Vec<String>,
    pub negative_ids: Vec<String>,
    pub k: usize,
}

fn member(
    labeled: &LabeledProblem,
    index: usize,
    extractor: &dyn FeatureExtractor,
) -> GroupMember {
    GroupMember {
        response_id: response_id(&labeled.problem_id, index),
        features: extractor.extract(&labeled.prompt, &labeled.candidates[index].candidate),
    }
}

/// Samples a group and attaches feature vectors.
pub fn score_sorted_sample(
    labeled: &LabeledProblem,
    config: &SamplerConfig,
    extractor: &dyn FeatureExtractor,
) -> Result<Option<PreferenceGroup>, SampleError> {
    Ok(select_group(labeled, config)?.map(|sel| PreferenceGroup {
        problem_id: labeled.problem_id.clone(),
        num_positive: sel.positives.len(),
        positives: sel.positives.iter().map(|&i| member(labeled, i, extractor)).collect(),
        negatives: sel.negatives.iter().map(|&i| member(labeled, i, extractor)).collect(),
    }))
}

/// Rebuilds a feature-carrying group from its JSON-Lines record.
pub fn hydrate_group(
    record: &GroupRecord,
    labeled: &LabeledProblem,
    extractor: &dyn FeatureExtractor,
) -> Result<PreferenceGroup, SampleError> {
    let resolve = |id: &String| {
        parse_response_id(&labeled.problem_id, id)
            .filter(|&i| i < labeled.candidates.len())
            .map(|i| member(labeled, i, extractor))
            .ok_or_else(|| SampleError::UnknownResponse {
                problem_id: labeled.problem_id.clone(),
                id: id.clone(),
            })
    };
    Ok(PreferenceGroup {
        problem_id: record.problem_id.clone(),
        positives: record.positive_ids.iter().map(resolve).collect::<Result<_, _>>()?,
        negatives: record.negative_ids.iter().map(resolve).collect::<Result<_, _>>()?,
        num_positive: record.k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward::features::BasicFeatures;

    fn problem(labels: &[bool], scores: Option<&[f64]>) -> LabeledProblem {
        let candidates = labels
            .iter()
            .enumerate()
            .map(|(i, &ok)| LabeledCandidate {
                candidate: ResponseCandidate::new("p", "m", format!("r{i} \\boxed{{{}}}", if ok { 1 } else { 2 })),
                label: if ok { CorrectnessLabel::Correct } else { CorrectnessLabel::Incorrect },
                prior_score: scores.map(|s| s[i]),
            })
            .collect();
        LabeledProblem {
            problem_id: "p".into(),
            prompt: String::new(),
            reference: CanonicalAnswer::rational(1, 1),
            candidates,
        }
    }

    #[test]
    fn labeling_uses_equivalence() {
        let reference = CanonicalAnswer::rational(1, 2);
        let cands = ["\\boxed{0.5}", "\\boxed{1/2}", "\\boxed{2}", "\\boxed{0.25}"]
            .iter()
            .map(|t| (ResponseCandidate::new("p", "m", *t), None))
            .collect();
        let lp = label_candidates("p", "", &reference, cands);
        assert_eq!(lp.count(CorrectnessLabel::Correct), 2);
        assert_eq!(lp.count(CorrectnessLabel::Incorrect), 2);

        let unparsed = (0..3).map(|_| (ResponseCandidate::new("p", "m", "no box"), None)).collect();
        let lp = label_candidates("p", "", &reference, unparsed);
        assert_eq!(lp.count(CorrectnessLabel::Correct), 0);
        assert_eq!(lp.negative_indices().len(), 3);
        assert!(!filter_degenerate(&lp));

        let empty = label_candidates("p", "", &reference, Vec::new());
        assert!(empty.positive_indices().is_empty() && empty.negative_indices().is_empty());
    }

    #[test]
    fn degenerate_pools() {
        assert!(filter_degenerate(&problem(&[true, true, true, false, false, false], None)));
        assert!(!filter_degenerate(&problem(&[true; 6], None)));
        assert!(!filter_degenerate(&problem(&[false; 6], None)));
    }

    #[test]
    fn split_rules() {
        assert_eq!(group_split(6, 20, 20), Some((3, 3)));
        assert_eq!(group_split(6, 2, 10), Some((2, 4)));
        assert_eq!(group_split(6, 10, 2), Some((4, 2)));
        assert_eq!(group_split(6, 0, 10), None);
        assert_eq!(group_split(6, 5, 0), None);
        assert_eq!(group_split(6, 1, 1), Some((1, 1)));
    }

    #[test]
    fn score_sorted_respects_windows() {
        let labels: Vec<bool> = (0..40).map(|i| i % 2 == 0).collect();
        let scores: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let lp = problem(&labels, Some(&scores));
        let cfg = SamplerConfig::default();
        let sel = select_group(&lp, &cfg).unwrap().unwrap();
        assert_eq!((sel.positives.len(), sel.negatives.len()), (3, 3));
        // positives are even indices; top 14 by score are 12..=38
        assert!(sel.positives.iter().all(|&i| i >= 12 && i % 2 == 0));
        // negatives are odd; bottom 14 are 1..=27
        assert!(sel.negatives.iter().all(|&i| i <= 27 && i % 2 == 1));
        assert_eq!(select_group(&lp, &cfg).unwrap().unwrap(), sel);
    }

    #[test]
    fn clamped_group_membership_by_enumeration() {
        let mut labels = vec![true, true];
        labels.extend([false; 10]);
        let scores: Vec<f64> = (0..12).map(|i| (i * 7 % 12) as f64).collect();
        let lp = problem(&labels, Some(&scores));
        for seed in 0..50 {
            let cfg = SamplerConfig { seed, ..Default::default() };
            let g = score_sorted_sample(&lp, &cfg, &BasicFeatures).unwrap().unwrap();
            assert_eq!(g.num_positive, 2);
            assert_eq!(g.negatives.len(), 4);
            let mut ids: Vec<_> = g.record().positive_ids;
            ids.sort();
            assert_eq!(ids, ["p#0", "p#1"]);
            let neg = g.record().negative_ids;
            let mut dedup = neg.clone();
            dedup.sort();
            dedup.dedup();
            assert_eq!(dedup.len(), 4);
            assert!(neg.iter().all(|id| id.strip_prefix("p#").unwrap().parse::<usize>().unwrap() >= 2));
        }
    }

    #[test]
    fn no_positives_no_group() {
        let lp = problem(&[false; 8], Some(&[0.0; 8]));
        assert_eq!(select_group(&lp, &SamplerConfig::default()).unwrap(), None);
    }

    #[test]
    fn missing_score_is_an_error() {
        let lp = problem(&[true, false], None);
        let err = select_group(&lp, &SamplerConfig::default()).unwrap_err();
        assert!(matches!(err, SampleError::MissingPriorScore { index: 0, .. }));
        let random = SamplerConfig { strategy: SampleStrategy::Random, ..Default::default() };
        assert!(select_group(&lp, &random).unwrap().is_some());
    }

    #[test]
    fn hydrate_round_trip() {
        let lp = problem(&[true, false, true, false], Some(&[0.1, 0.2, 0.3, 0.4]));
        let g = score_sorted_sample(&lp, &SamplerConfig::default(), &BasicFeatures)
            .unwrap()
            .unwrap();
        let back = hydrate_group(&g.record(), &lp, &BasicFeatures).unwrap();
        assert_eq!(back, g);
        let bad = GroupRecord { positive_ids: vec!["p#99".into()], ..g.record() };
        assert!(hydrate_group(&bad, &lp, &BasicFeatures).is_err());
    }
}
