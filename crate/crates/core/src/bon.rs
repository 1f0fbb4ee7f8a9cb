//! Best-of-n evaluation: rm@n, majority@n and pass@n over candidate pools.
//!
//! Sampled estimates draw `n` candidates without replacement per seed; each
//! seed's stream is derived from `(seed_base, dataset, problem, seed index)`
//! so results do not depend on evaluation order or thread count. Exact mode
//! enumerates every `n`-subset and reports rationals.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use num::{BigInt, BigRational, BigUint, One, ToPrimitive, Zero};
use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::answer::{answers_equivalent, extract_boxed, parse_answer, CanonicalAnswer, CorrectnessLabel};
use crate::curation::ResponseCandidate;
use crate::reward::features::FeatureExtractor;
use crate::reward::ScorerParams;
use crate::seeding::{derive_rng, stable_hash};

/// Largest number of subsets the exact enumerators will visit.
pub const MAX_EXACT_SUBSETS: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    Sampled,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Smallest candidate index wins.
    LowestIndex,
    /// Uniform among tied candidates (or tied majority groups).
    Random,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub n: usize,
    pub pool_size: usize,
    pub num_seeds: usize,
    pub seed_base: u64,
    pub mode: EvalMode,
    pub tie_break: TieBreak,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            n: 8,
            pool_size: 64,
            num_seeds: 100,
            seed_base: 0,
            mode: EvalMode::Sampled,
            tie_break: TieBreak::LowestIndex,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.n == 0 {
            return Err(EvalError::Config("eval.n must be positive".into()));
        }
        if self.n > self.pool_size {
            return Err(EvalError::Config(format!(
                "eval.n ({}) exceeds eval.pool_size ({})",
                self.n, self.pool_size
            )));
        }
        if self.num_seeds == 0 {
            return Err(EvalError::Config("eval.num_seeds must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("evaluation configuration: {0}")]
    Config(String),
    #[error("problem `{problem_id}` has {size} candidates, fewer than n = {n}")]
    PoolTooSmall { problem_id: String, size: usize, n: usize },
    #[error("exact enumeration needs C({size}, {n}) subsets, above the limit of {MAX_EXACT_SUBSETS}")]
    TooManySubsets { size: usize, n: usize },
    #[error("pass@n parameters out of range: n_total {n_total}, correct {correct}, k {k}")]
    Bounds { n_total: usize, correct: usize, k: usize },
    #[error("dataset `{0}` has no problems")]
    EmptyDataset(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolCandidate {
    pub model_id: String,
    pub score: f64,
    pub label: CorrectnessLabel,
    /// Parsed final answer, if any; drives majority voting.
    pub answer: Option<CanonicalAnswer>,
    pub text: Option<String>,
}

impl PoolCandidate {
    /// A candidate with a known label and no answer text.
    pub fn labeled(score: f64, correct: bool) -> Self {
        PoolCandidate {
            model_id: String::new(),
            score,
            label: if correct { CorrectnessLabel::Correct } else { CorrectnessLabel::Incorrect },
            answer: None,
            text: None,
        }
    }

    /// Grades `answer` against `reference`; unparseable answers form no vote.
    pub fn with_answer(score: f64, answer: Option<CanonicalAnswer>, reference: &CanonicalAnswer) -> Self {
        let label = match &answer {
            None => CorrectnessLabel::Unparseable,
            Some(a) if answers_equivalent(a, reference) => CorrectnessLabel::Correct,
            Some(_) => CorrectnessLabel::Incorrect,
        };
        PoolCandidate {
            model_id: String::new(),
            score,
            label,
            answer,
            text: None,
        }
    }
}

/// All generated candidates for one benchmark problem.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePool {
    pub dataset: String,
    pub problem_id: String,
    pub prompt: String,
    pub reference: Option<CanonicalAnswer>,
    pub candidates: Vec<PoolCandidate>,
}

impl CandidatePool {
    pub fn new(problem_id: impl Into<String>, candidates: Vec<PoolCandidate>) -> Self {
        CandidatePool {
            dataset: String::new(),
            problem_id: problem_id.into(),
            prompt: String::new(),
            reference: None,
            candidates,
        }
    }

    pub fn num_correct(&self) -> usize {
        self.candidates.iter().filter(|c| c.label.is_correct()).count()
    }

    fn ensure_size(&self, n: usize) -> Result<(), EvalError> {
        if self.candidates.len() < n || n == 0 {
            return Err(EvalError::PoolTooSmall {
                problem_id: self.problem_id.clone(),
                size: self.candidates.len(),
                n,
            });
        }
        Ok(())
    }
}

/// A benchmark: a named list of problem pools.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub pools: Vec<CandidatePool>,
}

/// Fractional credit `num / den` a single subset earns; `den > 1` only
/// under random tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Credit {
    num: u64,
    den: u64,
}

impl Credit {
    fn hit(correct: bool) -> Self {
        Credit { num: u64::from(correct), den: 1 }
    }

    fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn cmp_score(a: f64, b: f64) -> std::cmp::Ordering {
    // NaN ranks below every real score
    match (a.is_nan(), b.is_nan()) {
        (true, true) => std::cmp::Ordering::Equal,
        (true, false) => std::cmp::Ordering::Less,
        (false, true) => std::cmp::Ordering::Greater,
        _ => a.partial_cmp(&b).unwrap(),
    }
}

/// Highest-scored candidate in `subset`; ties go to the smallest index.
pub fn rm_select(pool: &[PoolCandidate], subset: &[usize]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for &i in subset {
        best = match best {
            None => Some(i),
            Some(b) => match cmp_score(pool[i].score, pool[b].score) {
                std::cmp::Ordering::Greater => Some(i),
                std::cmp::Ordering::Equal if i < b => Some(i),
                _ => Some(b),
            },
        };
    }
    best
}

fn rm_credit(pool: &[PoolCandidate], subset: &[usize], ties: TieBreak, rng: Option<&mut ChaCha8Rng>) -> Credit {
    let Some(best) = rm_select(pool, subset) else {
        return Credit::hit(false);
    };
    match ties {
        TieBreak::LowestIndex => Credit::hit(pool[best].label.is_correct()),
        TieBreak::Random => {
            let top = pool[best].score;
            let mut tied: Vec<usize> = subset
                .iter()
                .copied()
                .filter(|&i| cmp_score(pool[i].score, top).is_eq())
                .collect();
            tied.sort_unstable();
            match rng {
                Some(rng) => {
                    let pick = tied[rng.gen_range(0..tied.len())];
                    Credit::hit(pool[pick].label.is_correct())
                }
                None => Credit {
                    num: tied.iter().filter(|&&i| pool[i].label.is_correct()).count() as u64,
                    den: tied.len() as u64,
                },
            }
        }
    }
}

/// Candidate index whose answer wins the vote, if any answer parsed.
/// Groups are formed by answer equivalence; equal-size groups are resolved
/// in favour of the group holding the smallest candidate index.
pub fn majority_select(pool: &[PoolCandidate], subset: &[usize]) -> Option<usize> {
    majority_groups(pool, subset).first().map(|g| g[0])
}

/// Largest groups first, each listed by ascending candidate index.
fn majority_groups(pool: &[PoolCandidate], subset: &[usize]) -> Vec<Vec<usize>> {
    let mut sorted = subset.to_vec();
    sorted.sort_unstable();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in sorted {
        let Some(answer) = &pool[i].answer else { continue };
        let slot = groups.iter_mut().find(|g| {
            pool[g[0]]
                .answer
                .as_ref()
                .is_some_and(|rep| answers_equivalent(rep, answer))
        });
        match slot {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    // stable sort keeps first-appearance order among equal sizes
    groups.sort_by(|a, b| b.len().cmp(&a.len()));
    groups
}

fn majority_credit(
    pool: &[PoolCandidate],
    subset: &[usize],
    ties: TieBreak,
    rng: Option<&mut ChaCha8Rng>,
) -> Credit {
    let groups = majority_groups(pool, subset);
    let Some(first) = groups.first() else {
        return Credit::hit(false);
    };
    let correct = |g: &Vec<usize>| pool[g[0]].label.is_correct();
    match ties {
        TieBreak::LowestIndex => Credit::hit(correct(first)),
        TieBreak::Random => {
            let tied: Vec<&Vec<usize>> = groups.iter().take_while(|g| g.len() == first.len()).collect();
            match rng {
                Some(rng) => Credit::hit(correct(tied[rng.gen_range(0..tied.len())])),
                None => Credit {
                    num: tied.iter().filter(|g| correct(g)).count() as u64,
                    den: tied.len() as u64,
                },
            }
        }
    }
}

/// Mean and population standard deviation over seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std: f64,
    pub num_seeds: usize,
}

impl Estimate {
    fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Estimate {
            mean,
            std: var.sqrt(),
            num_seeds: samples.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Vote {
    Rm,
    Majority,
}

fn credit(pool: &[PoolCandidate], subset: &[usize], vote: Vote, ties: TieBreak, rng: Option<&mut ChaCha8Rng>) -> Credit {
    match vote {
        Vote::Rm => rm_credit(pool, subset, ties, rng),
        Vote::Majority => majority_credit(pool, subset, ties, rng),
    }
}

fn seed_rng(config: &EvalConfig, pool: &CandidatePool, seed: usize) -> ChaCha8Rng {
    derive_rng(
        config.seed_base,
        &[stable_hash(&pool.dataset), stable_hash(&pool.problem_id), seed as u64],
    )
}

fn sampled_credit(pool: &CandidatePool, config: &EvalConfig, vote: Vote, seed: usize) -> f64 {
    let mut rng = seed_rng(config, pool, seed);
    let subset = index::sample(&mut rng, pool.candidates.len(), config.n).into_vec();
    credit(&pool.candidates, &subset, vote, config.tie_break, Some(&mut rng)).value()
}

fn sampled(pool: &CandidatePool, config: &EvalConfig, vote: Vote) -> Result<Estimate, EvalError> {
    if config.num_seeds == 0 {
        return Err(EvalError::Config("eval.num_seeds must be at least 1".into()));
    }
    pool.ensure_size(config.n)?;
    let samples: Vec<f64> = (0..config.num_seeds)
        .into_par_iter()
        .map(|s| sampled_credit(pool, config, vote, s))
        .collect();
    Ok(Estimate::from_samples(&samples))
}

/// Sampled rm@n for one pool: 1 per seed when the top-scored draw is correct.
pub fn rm_at_n(pool: &CandidatePool, config: &EvalConfig) -> Result<Estimate, EvalError> {
    sampled(pool, config, Vote::Rm)
}

/// Sampled majority@n for one pool.
pub fn majority_at_n(pool: &CandidatePool, config: &EvalConfig) -> Result<Estimate, EvalError> {
    sampled(pool, config, Vote::Majority)
}

fn binomial_u128(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// `C(n, k)` as an exact big integer.
pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// Visits every `k`-subset of `0..n` in lexicographic order.
pub fn for_each_subset(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let Some(pos) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return;
        };
        idx[pos] += 1;
        for j in pos + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn exact(pool: &CandidatePool, n: usize, vote: Vote, ties: TieBreak) -> Result<BigRational, EvalError> {
    pool.ensure_size(n)?;
    let size = pool.candidates.len();
    let total = binomial_u128(size, n)
        .filter(|&t| t <= MAX_EXACT_SUBSETS)
        .ok_or(EvalError::TooManySubsets { size, n })?;
    // sum credits grouped by denominator to keep the inner loop integer-only
    let mut by_den: BTreeMap<u64, u64> = BTreeMap::new();
    for_each_subset(size, n, |subset| {
        let c = credit(&pool.candidates, subset, vote, ties, None);
        if c.num > 0 {
            *by_den.entry(c.den).or_default() += c.num;
        }
    });
    let sum = by_den
        .into_iter()
        .fold(BigRational::zero(), |acc, (den, num)| {
            acc + BigRational::new(BigInt::from(num), BigInt::from(den))
        });
    Ok(sum / BigRational::from_integer(BigInt::from(total)))
}

/// Exact rm@n expectation over all `n`-subsets.
pub fn rm_at_n_exact(pool: &CandidatePool, n: usize) -> Result<BigRational, EvalError> {
    exact(pool, n, Vote::Rm, TieBreak::LowestIndex)
}

/// Exact rm@n with the chosen tie rule; random ties earn expected credit.
pub fn rm_at_n_exact_with(pool: &CandidatePool, n: usize, ties: TieBreak) -> Result<BigRational, EvalError> {
    exact(pool, n, Vote::Rm, ties)
}

/// Exact majority@n expectation over all `n`-subsets.
pub fn majority_at_n_exact(pool: &CandidatePool, n: usize) -> Result<BigRational, EvalError> {
    exact(pool, n, Vote::Majority, TieBreak::LowestIndex)
}

pub fn majority_at_n_exact_with(pool: &CandidatePool, n: usize, ties: TieBreak) -> Result<BigRational, EvalError> {
    exact(pool, n, Vote::Majority, ties)
}

/// Probability that a uniform `k`-subset of `n_total` candidates, `correct`
/// of them correct, contains at least one correct: `1 - C(n-c, k) / C(n, k)`.
pub fn pass_at_n(n_total: usize, correct: usize, k: usize) -> Result<BigRational, EvalError> {
    if correct > n_total || k > n_total {
        return Err(EvalError::Bounds { n_total, correct, k });
    }
    let miss = BigRational::new(
        BigInt::from(binomial(n_total - correct, k)),
        BigInt::from(binomial(n_total, k)),
    );
    Ok(BigRational::one() - miss)
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Rm,
    Majority,
    Pass,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Rm, Metric::Majority, Metric::Pass];

    pub fn label(self, n: usize) -> String {
        match self {
            Metric::Rm => format!("rm@{n}"),
            Metric::Majority => format!("majority@{n}"),
            Metric::Pass => format!("pass@{n}"),
        }
    }
}

pub const AVERAGE_LABEL: &str = "Avg.";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub dataset: String,
    pub metric: Metric,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
    pub num_seeds: usize,
    /// Exact value as `p/q`, present in exact mode.
    pub exact: Option<BigRational>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub n: usize,
    pub num_seeds: usize,
    pub datasets: Vec<String>,
    /// Per-dataset rows followed by the aggregate rows.
    pub rows: Vec<ReportRow>,
}

impl EvalReport {
    pub fn get(&self, dataset: &str, metric: Metric) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.dataset == dataset && r.metric == metric)
    }

    pub fn average(&self, metric: Metric) -> Option<&ReportRow> {
        self.get(AVERAGE_LABEL, metric)
    }

    /// Metrics as rows, datasets plus the average as columns, in percent.
    pub fn to_table(&self) -> String {
        let mut columns: Vec<&str> = self.datasets.iter().map(String::as_str).collect();
        columns.push(AVERAGE_LABEL);
        let cell = |row: &ReportRow| match &row.exact {
            Some(r) => format!("{:.2} ({})", 100.0 * row.mean, r),
            None => format!("{:.2}", 100.0 * row.mean),
        };
        let mut grid: Vec<Vec<String>> = Vec::new();
        let mut header = vec!["metric".to_string()];
        header.extend(columns.iter().map(|c| c.to_string()));
        grid.push(header);
        for metric in Metric::ALL {
            let mut line = vec![metric.label(self.n)];
            for c in &columns {
                line.push(self.get(c, metric).map(cell).unwrap_or_default());
            }
            grid.push(line);
        }
        let widths: Vec<usize> = (0..grid[0].len())
            .map(|j| grid.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for line in &grid {
            let mut text = String::new();
            for (j, v) in line.iter().enumerate() {
                if j == 0 {
                    let _ = write!(text, "{v:<w$}", w = widths[j]);
                } else {
                    let _ = write!(text, "  {v:>w$}", w = widths[j]);
                }
            }
            out.push_str(text.trim_end());
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let _ = w.write_record(["dataset", "metric", "n", "num_seeds", "mean", "std", "exact"]);
        for r in &self.rows {
            let _ = w.write_record([
                r.dataset.clone(),
                r.metric.label(r.n),
                r.n.to_string(),
                r.num_seeds.to_string(),
                r.mean.to_string(),
                r.std.to_string(),
                r.exact.as_ref().map(ToString::to_string).unwrap_or_default(),
            ]);
        }
        String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
    }
}

/// Assigns the score each candidate is ranked by.
pub trait PoolScorer: Sync {
    fn score(&self, pool: &CandidatePool, index: usize) -> f64;
}

/// Uses the score already stored on the candidate.
#[derive(Debug, Clone, Copy, Default)]
pub struct StoredScore;

impl PoolScorer for StoredScore {
    fn score(&self, pool: &CandidatePool, index: usize) -> f64 {
        pool.candidates[index].score
    }
}

/// Scores candidate text with a trained linear scorer. Candidates without
/// text, or whose features do not fit, score NaN and rank last.
pub struct LinearPoolScorer<'a> {
    pub params: &'a ScorerParams,
    pub extractor: &'a dyn FeatureExtractor,
}

impl PoolScorer for LinearPoolScorer<'_> {
    fn score(&self, pool: &CandidatePool, index: usize) -> f64 {
        let c = &pool.candidates[index];
        let Some(text) = &c.text else { return f64::NAN };
        let candidate = ResponseCandidate::new(&pool.problem_id, &c.model_id, text.clone());
        let features = self.extractor.extract(&pool.prompt, &candidate);
        self.params.score(&features).unwrap_or(f64::NAN)
    }
}

fn rescored(pool: &CandidatePool, scorer: &dyn PoolScorer) -> CandidatePool {
    let mut out = pool.clone();
    for (i, c) in out.candidates.iter_mut().enumerate() {
        c.score = scorer.score(pool, i);
    }
    out
}

fn mean_rational(values: &[BigRational]) -> BigRational {
    let sum = values.iter().fold(BigRational::zero(), |a, b| a + b);
    sum / BigRational::from_integer(BigInt::from(values.len()))
}

fn dataset_rows(dataset: &Dataset, config: &EvalConfig) -> Result<Vec<ReportRow>, EvalError> {
    if dataset.pools.is_empty() {
        return Err(EvalError::EmptyDataset(dataset.name.clone()));
    }
    for p in &dataset.pools {
        p.ensure_size(config.n)?;
    }
    let pass: Vec<BigRational> = dataset
        .pools
        .iter()
        .map(|p| pass_at_n(p.candidates.len(), p.num_correct(), config.n))
        .collect::<Result<_, _>>()?;
    let pass_mean = mean_rational(&pass);
    let row = |metric, mean: f64, std: f64, exact: Option<BigRational>| ReportRow {
        dataset: dataset.name.clone(),
        metric,
        mean,
        std,
        n: config.n,
        num_seeds: if config.mode == EvalMode::Exact { 0 } else { config.num_seeds },
        exact,
    };
    let mut rows = Vec::with_capacity(3);
    match config.mode {
        EvalMode::Exact => {
            for (metric, vote) in [(Metric::Rm, Vote::Rm), (Metric::Majority, Vote::Majority)] {
                let values: Vec<BigRational> = dataset
                    .pools
                    .par_iter()
                    .map(|p| exact(p, config.n, vote, config.tie_break))
                    .collect::<Result<_, _>>()?;
                let m = mean_rational(&values);
                rows.push(row(metric, rational_to_f64(&m), 0.0, Some(m)));
            }
        }
        EvalMode::Sampled => {
            for (metric, vote) in [(Metric::Rm, Vote::Rm), (Metric::Majority, Vote::Majority)] {
                // per-seed accuracy over the dataset, then spread across seeds
                let per_seed: Vec<f64> = (0..config.num_seeds)
                    .into_par_iter()
                    .map(|s| {
                        let total: f64 = dataset
                            .pools
                            .iter()
                            .map(|p| sampled_credit(p, config, vote, s))
                            .sum();
                        total / dataset.pools.len() as f64
                    })
                    .collect();
                let e = Estimate::from_samples(&per_seed);
                rows.push(row(metric, e.mean, e.std, None));
            }
        }
    }
    let exact_pass = (config.mode == EvalMode::Exact).then(|| pass_mean.clone());
    rows.push(row(Metric::Pass, rational_to_f64(&pass_mean), 0.0, exact_pass));
    Ok(rows)
}

/// Scores every pool with `scorer` and reports rm@n, majority@n and
/// pass@n per dataset plus their unweighted average across datasets.
pub fn evaluate_benchmark(
    datasets: &[Dataset],
    scorer: &dyn PoolScorer,
    config: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    if config.n == 0 || config.num_seeds == 0 {
        return Err(EvalError::Config("eval.n and eval.num_seeds must be positive".into()));
    }
    let mut rows = Vec::new();
    for d in datasets {
        let scored = Dataset {
            name: d.name.clone(),
            pools: d
                .pools
                .iter()
                .map(|p| {
                    let mut p = rescored(p, scorer);
                    p.dataset = d.name.clone();
                    p
                })
                .collect(),
        };
        rows.extend(dataset_rows(&scored, config)?);
    }
    if !datasets.is_empty() {
        for metric in Metric::ALL {
            let per: Vec<&ReportRow> = rows.iter().filter(|r| r.metric == metric).collect();
            let mean = per.iter().map(|r| r.mean).sum::<f64>() / per.len() as f64;
            let exact = per
                .iter()
                .map(|r| r.exact.clone())
                .collect::<Option<Vec<_>>>()
                .map(|v| mean_rational(&v));
            let mean = exact.as_ref().map(rational_to_f64).unwrap_or(mean);
            rows.push(ReportRow {
                dataset: AVERAGE_LABEL.to_string(),
                metric,
                mean,
                std: 0.0,
                n: config.n,
                num_seeds: per[0].num_seeds,
                exact,
            });
        }
    }
    Ok(EvalReport {
        n: config.n,
        num_seeds: if config.mode == EvalMode::Exact { 0 } else { config.num_seeds },
        datasets: datasets.iter().map(|d| d.name.clone()).collect(),
        rows,
    })
}

/// One JSON-Lines row of a candidate pool file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolRow {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    pub problem_id: String,
    #[serde(default)]
    pub model_id: String,
    #[serde(default)]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boxed_answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    pub reference: CanonicalAnswer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
}

pub const DEFAULT_DATASET: &str = "default";

/// Groups rows into datasets and pools, both in first-appearance order.
/// The answer comes from `boxed_answer` when present, else from the last
/// box in `text`. Missing scores read as NaN.
pub fn pools_from_rows(rows: &[PoolRow]) -> Vec<Dataset> {
    let mut datasets: Vec<Dataset> = Vec::new();
    let mut where_: HashMap<(String, String), (usize, usize)> = HashMap::new();
    for row in rows {
        let ds = row.dataset.clone().unwrap_or_else(|| DEFAULT_DATASET.to_string());
        let key = (ds.clone(), row.problem_id.clone());
        let (di, pi) = *where_.entry(key).or_insert_with(|| {
            let di = match datasets.iter().position(|d| d.name == ds) {
                Some(i) => i,
                None => {
                    datasets.push(Dataset { name: ds.clone(), pools: Vec::new() });
                    datasets.len() - 1
                }
            };
            let mut pool = CandidatePool::new(&row.problem_id, Vec::new());
            pool.dataset = ds.clone();
            pool.reference = Some(row.reference.clone());
            pool.prompt = row.prompt.clone().unwrap_or_default();
            datasets[di].pools.push(pool);
            (di, datasets[di].pools.len() - 1)
        });
        let raw = row
            .boxed_answer
            .clone()
            .or_else(|| row.text.as_deref().and_then(extract_boxed));
        let answer = raw.and_then(|r| parse_answer(&r).ok());
        let pool = &mut datasets[di].pools[pi];
        let reference = pool.reference.clone().unwrap_or_else(|| row.reference.clone());
        let mut c = PoolCandidate::with_answer(row.score.unwrap_or(f64::NAN), answer, &reference);
        c.model_id = row.model_id.clone();
        c.text = row.text.clone();
        pool.candidates.push(c);
    }
    datasets
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> CandidatePool {
        let c = [(3.0, false), (1.0, true), (2.0, false), (0.0, true)];
        CandidatePool::new("t2", c.iter().map(|&(s, l)| PoolCandidate::labeled(s, l)).collect())
    }

    fn rat(p: i64, q: i64) -> BigRational {
        BigRational::new(p.into(), q.into())
    }

    #[test]
    fn rm_select_rules() {
        let pool: Vec<_> = [3.0, 1.0, 2.0].iter().map(|&s| PoolCandidate::labeled(s, true)).collect();
        assert_eq!(rm_select(&pool, &[0, 1, 2]), Some(0));
        let tied: Vec<_> = [0.0, 5.0, 5.0].iter().map(|&s| PoolCandidate::labeled(s, true)).collect();
        assert_eq!(rm_select(&tied, &[2, 1, 0]), Some(1));
        assert_eq!(rm_select(&pool, &[2]), Some(2));
        assert_eq!(rm_select(&pool, &[]), None);
    }

    #[test]
    fn exact_fixture_is_one_sixth() {
        let pool = fixture();
        assert_eq!(rm_at_n_exact(&pool, 2).unwrap(), rat(1, 6));
        assert_eq!(pass_at_n(4, 2, 2).unwrap(), rat(5, 6));
        // n = pool size: one subset, top score index 0 is incorrect
        assert_eq!(rm_at_n_exact(&pool, 4).unwrap(), rat(0, 1));
    }

    #[test]
    fn perfect_scorer_matches_pass() {
        let mut pool = fixture();
        for c in &mut pool.candidates {
            c.score = if c.label.is_correct() { 1.0 } else { 0.0 };
        }
        for n in 1..=4 {
            assert_eq!(rm_at_n_exact(&pool, n).unwrap(), pass_at_n(4, 2, n).unwrap());
        }
    }

    #[test]
    fn all_correct_and_all_wrong() {
        let good = CandidatePool::new("g", (0..5).map(|i| PoolCandidate::labeled(i as f64, true)).collect());
        assert_eq!(rm_at_n_exact(&good, 3).unwrap(), rat(1, 1));
        let bad = CandidatePool::new("b", (0..5).map(|i| PoolCandidate::labeled(i as f64, false)).collect());
        let cfg = EvalConfig { n: 3, pool_size: 5, num_seeds: 20, ..Default::default() };
        let e = rm_at_n(&bad, &cfg).unwrap();
        assert_eq!((e.mean, e.std), (0.0, 0.0));
    }

    #[test]
    fn pool_too_small() {
        let cfg = EvalConfig { n: 5, ..Default::default() };
        assert!(matches!(rm_at_n(&fixture(), &cfg), Err(EvalError::PoolTooSmall { .. })));
        assert!(matches!(rm_at_n_exact(&fixture(), 5), Err(EvalError::PoolTooSmall { .. })));
    }

    #[test]
    fn exact_bound_is_enforced() {
        let big = CandidatePool::new("big", (0..64).map(|i| PoolCandidate::labeled(i as f64, i % 2 == 0)).collect());
        assert!(matches!(rm_at_n_exact(&big, 8), Err(EvalError::TooManySubsets { .. })));
    }

    fn answered(answers: &[Option<&str>], reference: &str) -> CandidatePool {
        let reference = parse_answer(reference).unwrap();
        let mut pool = CandidatePool::new(
            "m",
            answers
                .iter()
                .map(|a| PoolCandidate::with_answer(0.0, a.map(|s| parse_answer(s).unwrap()), &reference))
                .collect(),
        );
        pool.reference = Some(reference);
        pool
    }

    #[test]
    fn majority_rules() {
        let pool = answered(&[Some("0.5"), Some("1/2"), Some("3")], "1/2");
        assert_eq!(majority_at_n_exact(&pool, 3).unwrap(), rat(1, 1));
        let tie = answered(&[Some("1"), Some("2")], "2");
        assert_eq!(majority_select(&tie.candidates, &[1, 0]), Some(0));
        assert_eq!(majority_at_n_exact(&tie, 2).unwrap(), rat(0, 1));
        // random tie mode earns expected credit
        assert_eq!(majority_at_n_exact_with(&tie, 2, TieBreak::Random).unwrap(), rat(1, 2));
        let none = answered(&[None, None], "2");
        assert_eq!(majority_at_n_exact(&none, 2).unwrap(), rat(0, 1));
        assert_eq!(majority_select(&none.candidates, &[0, 1]), None);
    }

    #[test]
    fn random_ties_for_rm() {
        let pool = CandidatePool::new(
            "r",
            vec![PoolCandidate::labeled(1.0, false), PoolCandidate::labeled(1.0, true)],
        );
        assert_eq!(rm_at_n_exact_with(&pool, 2, TieBreak::Random).unwrap(), rat(1, 2));
        assert_eq!(rm_at_n_exact(&pool, 2).unwrap(), rat(0, 1));
        let cfg = EvalConfig { n: 2, pool_size: 2, num_seeds: 4000, tie_break: TieBreak::Random, ..Default::default() };
        let e = rm_at_n(&pool, &cfg).unwrap();
        assert!((e.mean - 0.5).abs() < 0.05);
    }

    #[test]
    fn pass_edges_and_bounds() {
        assert_eq!(pass_at_n(7, 0, 3).unwrap(), rat(0, 1));
        assert_eq!(pass_at_n(7, 7, 3).unwrap(), rat(1, 1));
        assert_eq!(pass_at_n(7, 2, 0).unwrap(), rat(0, 1));
        assert!(pass_at_n(3, 4, 1).is_err());
        assert!(pass_at_n(3, 1, 4).is_err());
    }

    #[test]
    fn subsets_enumerate_in_order() {
        let mut seen = Vec::new();
        for_each_subset(4, 2, |s| seen.push(s.to_vec()));
        assert_eq!(seen, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        let mut count = 0;
        for_each_subset(3, 0, |_| count += 1);
        assert_eq!(count, 1);
        assert_eq!(binomial(64, 8), BigUint::from(4_426_165_368u64));
    }

    #[test]
    fn benchmark_average_is_unweighted() {
        let mut p2 = fixture();
        for c in &mut p2.candidates {
            c.score = -c.score;
        }
        // reversed scores: pick the lowest original; exact value 5/6
        assert_eq!(rm_at_n_exact(&p2, 2).unwrap(), rat(5, 6));
        let datasets = vec![
            Dataset { name: "a".into(), pools: vec![fixture()] },
            Dataset { name: "b".into(), pools: vec![p2] },
        ];
        let cfg = EvalConfig { n: 2, pool_size: 4, mode: EvalMode::Exact, ..Default::default() };
        let report = evaluate_benchmark(&datasets, &StoredScore, &cfg).unwrap();
        assert_eq!(report.average(Metric::Rm).unwrap().exact, Some(rat(1, 2)));
        assert_eq!(report.get("a", Metric::Rm).unwrap().exact, Some(rat(1, 6)));
        let table = report.to_table();
        assert!(table.contains("(1/6)"), "{table}");
        assert!(table.lines().next().unwrap().ends_with("Avg."));
        assert!(report.to_csv().starts_with("dataset,metric,n,num_seeds,mean,std,exact\n"));
    }

    #[test]
    fn sampled_benchmark_is_deterministic() {
        let datasets = vec![Dataset { name: "a".into(), pools: vec![fixture()] }];
        let cfg = EvalConfig { n: 2, pool_size: 4, num_seeds: 200, seed_base: 9, ..Default::default() };
        let a = evaluate_benchmark(&datasets, &StoredScore, &cfg).unwrap();
        let b = evaluate_benchmark(&datasets, &StoredScore, &cfg).unwrap();
        assert_eq!(a, b);
        let rm = a.get("a", Metric::Rm).unwrap();
        assert!(rm.mean >= 0.0 && rm.mean <= 1.0 && rm.std > 0.0);
    }

    #[test]
    fn rows_group_into_pools() {
        let row = |ds: Option<&str>, pid: &str, score: f64, ans: &str| PoolRow {
            dataset: ds.map(str::to_string),
            problem_id: pid.into(),
            model_id: "m".into(),
            score: Some(score),
            boxed_answer: Some(ans.into()),
            text: None,
            reference: CanonicalAnswer::rational(1, 2),
            prompt: None,
        };
        let rows = vec![
            row(Some("x"), "p1", 1.0, "0.5"),
            row(None, "p1", 2.0, "3"),
            row(Some("x"), "p1", 0.0, "\\frac{1}{2}"),
        ];
        let ds = pools_from_rows(&rows);
        assert_eq!(ds.len(), 2);
        assert_eq!(ds[0].pools[0].candidates.len(), 2);
        assert_eq!(ds[0].pools[0].num_correct(), 2);
        assert_eq!(ds[1].name, DEFAULT_DATASET);
    }
}
