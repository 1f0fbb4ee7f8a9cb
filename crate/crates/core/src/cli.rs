//! File-driven pipeline stages and the command-line front end.
//!
//! Each stage reads JSON-Lines, writes JSON-Lines, and returns a
//! [`Summary`] whose counts balance: `records_in = records_out + dropped`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::answer::{parse_answer, CanonicalAnswer};
use crate::bon::{self, EvalMode, LinearPoolScorer, PoolRow, StoredScore};
use crate::config::PipelineConfig;
use crate::curation::{
    compose_blend, dedup_prompts, filter_prompt_length, filter_response, BlendSource, Domain,
    PromptRecord, ResponseCandidate, SelectionRule, CHECK_CROSS, CHECK_FORMAT,
    CHECK_LENGTH, CHECK_REPETITION,
};
use crate::decontam::{build_ngram_index, is_contaminated, DecontamConfig, DecontamMode, TestItem};
use crate::error::{Error, Result};
use crate::gateway::{
    cross_check_labels, EvolutionMode, FailedGeneration, Gateway, GeneratorConfig, RequestKind,
    StubBackend, StubQualityScorer,
};
use crate::jsonl;
use crate::pairs::{
    filter_degenerate, hydrate_group, label_candidates, score_sorted_sample, GroupRecord,
    LabeledProblem, PriorScorer, SampleStrategy, StoredPriorScore,
};
use crate::reward::features::{BasicFeatures, FeatureExtractor, BASIC_FEATURES_VERSION};
use crate::reward::train::write_trace_csv;
use crate::reward::{ranking_accuracy, train, Checkpoint, ScorerParams};
use crate::seeding::derive_rng;

/// Record counts for one stage.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Summary {
    pub stage: String,
    pub records_in: usize,
    pub records_out: usize,
    pub dropped: BTreeMap<String, usize>,
    pub notes: Vec<String>,
}

impl Summary {
    pub fn new(stage: &str) -> Self {
        Summary {
            stage: stage.to_string(),
            ..Default::default()
        }
    }

    pub fn drop_one(&mut self, reason: &str) {
        self.drop_n(reason, 1);
    }

    pub fn drop_n(&mut self, reason: &str, n: usize) {
        if n > 0 {
            *self.dropped.entry(reason.to_string()).or_default() += n;
        }
    }

    pub fn total_dropped(&self) -> usize {
        self.dropped.values().sum()
    }

    pub fn is_balanced(&self) -> bool {
        self.records_in == self.records_out + self.total_dropped()
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: in: {}, out: {}, dropped: {}",
            self.stage,
            self.records_in,
            self.records_out,
            self.total_dropped()
        )?;
        match self.dropped.len() {
            0 => {}
            1 => write!(f, " ({})", self.dropped.keys().next().unwrap())?,
            _ => {
                let parts: Vec<String> = self.dropped.iter().map(|(k, v)| format!("{k}: {v}")).collect();
                write!(f, " ({})", parts.join(", "))?;
            }
        }
        for note in &self.notes {
            write!(f, "\n  {note}")?;
        }
        Ok(())
    }
}

/// Shared state for running stages.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: PipelineConfig,
    pub strict: bool,
}

impl Context {
    pub fn new(config: PipelineConfig) -> Self {
        Context { config, strict: false }
    }

    /// Reads records, counting skipped malformed lines as drops.
    fn load<T: DeserializeOwned>(&self, path: &Path, summary: &mut Summary) -> Result<Vec<T>> {
        let loaded = jsonl::read::<T>(path, self.strict)?;
        for m in &loaded.malformed {
            log::warn!("{}:{}: skipped malformed record: {}", path.display(), m.line, m.message);
        }
        summary.records_in += loaded.records.len() + loaded.malformed.len();
        summary.drop_n("malformed", loaded.malformed.len());
        Ok(loaded.records)
    }

    /// Reads auxiliary records that are not the stage's unit of count.
    fn load_aux<T: DeserializeOwned>(&self, path: &Path, summary: &mut Summary) -> Result<Vec<T>> {
        let loaded = jsonl::read::<T>(path, self.strict)?;
        for m in &loaded.malformed {
            log::warn!("{}:{}: skipped malformed record: {}", path.display(), m.line, m.message);
        }
        if !loaded.malformed.is_empty() {
            summary
                .notes
                .push(format!("{}: {} malformed lines skipped", path.display(), loaded.malformed.len()));
        }
        Ok(loaded.records)
    }
}

pub const KIND_PROMPTS: &str = "prompts";
pub const KIND_RESPONSES: &str = "responses";
pub const KIND_TEST_ITEMS: &str = "test_items";
pub const KIND_DECISIONS: &str = "contamination_decisions";
pub const KIND_FAILURES: &str = "failed_generations";
pub const KIND_REFERENCES: &str = "references";
pub const KIND_LABELED: &str = "labeled_problems";
pub const KIND_GROUPS: &str = "preference_groups";
pub const KIND_POOLS: &str = "candidate_pools";

/// Where failed generations are written next to `output`.
pub fn failures_path(output: &Path) -> PathBuf {
    let mut name = output.file_stem().unwrap_or_default().to_os_string();
    name.push(".failed.jsonl");
    output.with_file_name(name)
}

fn write_failures(output: &Path, failed: &[FailedGeneration], summary: &mut Summary) -> Result<()> {
    if !failed.is_empty() {
        let path = failures_path(output);
        jsonl::write(&path, KIND_FAILURES, failed)?;
        summary
            .notes
            .push(format!("{} failed generations written to {}", failed.len(), path.display()));
    }
    Ok(())
}

pub fn dedup(ctx: &Context, input: &Path, output: &Path) -> Result<Summary> {
    let mut s = Summary::new("dedup");
    let records: Vec<PromptRecord> = ctx.load(input, &mut s)?;
    let kept = dedup_prompts(&records);
    s.drop_n("duplicate", records.len() - kept.len());
    s.records_out = kept.len();
    jsonl::write(output, KIND_PROMPTS, &kept)?;
    Ok(s)
}

/// Drops prompts overlapping any test item; math prompts use the LCS gate,
/// other domains the n-gram hit alone. Decisions for dropped prompts go to
/// `report` when given.
pub fn decontaminate(
    ctx: &Context,
    input: &Path,
    test_sets: &Path,
    output: &Path,
    report: Option<&Path>,
) -> Result<Summary> {
    let mut s = Summary::new("decontaminate");
    let records: Vec<PromptRecord> = ctx.load(input, &mut s)?;
    let items: Vec<TestItem> = ctx.load_aux(test_sets, &mut s)?;
    let base = &ctx.config.decontamination;
    let index = build_ngram_index(&items, base);
    let configs: HashMap<DecontamMode, DecontamConfig> = [DecontamMode::Math, DecontamMode::General]
        .into_iter()
        .map(|m| (m, DecontamConfig { mode: m, ..base.clone() }))
        .collect();
    let decisions: Vec<_> = records
        .par_iter()
        .map(|r| is_contaminated(r, &index, &configs[&DecontamMode::for_domain(r.domain)]))
        .collect();
    let mut kept = Vec::new();
    let mut flagged = Vec::new();
    for (r, d) in records.into_iter().zip(decisions) {
        if d.contaminated {
            s.drop_one("contaminated");
            flagged.push(d);
        } else {
            kept.push(r);
        }
    }
    s.records_out = kept.len();
    jsonl::write(output, KIND_PROMPTS, &kept)?;
    if let Some(path) = report {
        jsonl::write(path, KIND_DECISIONS, &flagged)?;
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FilterTarget {
    Prompts,
    Responses,
}

pub fn filter(ctx: &Context, target: FilterTarget, input: &Path, output: &Path) -> Result<Summary> {
    let cfg = &ctx.config.curation;
    match target {
        FilterTarget::Prompts => {
            let mut s = Summary::new("filter prompts");
            let records: Vec<PromptRecord> = ctx.load(input, &mut s)?;
            let kept: Vec<PromptRecord> = records.into_iter().filter(|r| filter_prompt_length(r, cfg)).collect();
            s.drop_n(CHECK_LENGTH, s.records_in - s.total_dropped() - kept.len());
            s.records_out = kept.len();
            jsonl::write(output, KIND_PROMPTS, &kept)?;
            Ok(s)
        }
        FilterTarget::Responses => {
            let mut s = Summary::new("filter responses");
            let records: Vec<ResponseCandidate> = ctx.load(input, &mut s)?;
            let mut kept = Vec::new();
            for mut r in records {
                r.refresh_boxed();
                let outcome = filter_response(&r, cfg);
                r.filter_verdicts.extend(outcome.verdicts.clone());
                if outcome.passed {
                    kept.push(r);
                } else {
                    // attribute each drop to the first failing check
                    let reason = [CHECK_LENGTH, CHECK_FORMAT, CHECK_REPETITION]
                        .into_iter()
                        .find(|c| outcome.verdicts.get(*c) == Some(&false))
                        .unwrap_or(CHECK_FORMAT);
                    s.drop_one(reason);
                }
            }
            s.records_out = kept.len();
            jsonl::write(output, KIND_RESPONSES, &kept)?;
            Ok(s)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Breadth,
    Depth,
    Constraints,
}

impl From<ModeArg> for EvolutionMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Breadth => EvolutionMode::Breadth,
            ModeArg::Depth => EvolutionMode::Depth,
            ModeArg::Constraints => EvolutionMode::Constraints,
        }
    }
}

/// Creates one synthetic prompt per seed and mode; only math seeds evolve.
pub fn evolve(ctx: &Context, input: &Path, output: &Path, modes: &[EvolutionMode]) -> Result<Summary> {
    let mut s = Summary::new("evolve");
    let seeds: Vec<PromptRecord> = ctx.load(input, &mut s)?;
    let math: Vec<PromptRecord> = seeds.iter().filter(|r| r.domain == Domain::Math).cloned().collect();
    s.drop_n("not_math", seeds.len() - math.len());
    let gateway = Gateway::new(ctx.config.generator.clone())?;
    // each math seed yields one record per mode, so count (seed, mode) units
    s.records_in += math.len() * (modes.len().saturating_sub(1));
    let mut created_by_mode = Vec::new();
    let mut failed = Vec::new();
    for &mode in modes {
        let (created, f) = gateway.evolve_prompts(&math, mode)?;
        s.drop_n("generation_failed", f.len());
        failed.extend(f);
        created_by_mode.push(created);
    }
    // interleave so each seed's variants sit together
    let mut out = Vec::new();
    let mut iters: Vec<_> = created_by_mode.into_iter().map(|v| v.into_iter().peekable()).collect();
    for seed in &math {
        for it in iters.iter_mut() {
            while let Some(r) = it.next_if(|r| r.extra.get("seed_id").and_then(|v| v.as_str()) == Some(&seed.id)) {
                out.push(r);
            }
        }
    }
    s.records_out = out.len();
    jsonl::write(output, KIND_PROMPTS, &out)?;
    write_failures(output, &failed, &mut s)?;
    Ok(s)
}

/// Solutions from the primary generator (or `model` override).
pub fn generate(
    ctx: &Context,
    input: &Path,
    output: &Path,
    samples: u32,
    model: Option<&str>,
) -> Result<Summary> {
    let mut cfg = ctx.config.generator.clone();
    if let Some(m) = model {
        cfg.model_name = m.to_string();
    }
    generate_with(ctx, cfg, input, output, samples)
}

/// As [`generate`], with an explicit generator configuration.
pub fn generate_with(
    ctx: &Context,
    cfg: GeneratorConfig,
    input: &Path,
    output: &Path,
    samples: u32,
) -> Result<Summary> {
    let mut s = Summary::new("generate");
    let prompts: Vec<PromptRecord> = ctx.load(input, &mut s)?;
    let samples = samples.max(1);
    s.records_in = s.records_in - prompts.len() + prompts.len() * samples as usize;
    let gateway = Gateway::new(cfg)?;
    let (ok, failed) = gateway.generate_solutions(&prompts, RequestKind::Solution, samples);
    s.drop_n("generation_failed", failed.len());
    s.records_out = ok.len();
    jsonl::write(output, KIND_RESPONSES, &ok)?;
    write_failures(output, &failed, &mut s)?;
    Ok(s)
}

/// Marks each response with the cross-check verdict: two samples from the
/// cross-check generator must agree with each other and with the response.
/// With `only_passing`, failing responses are dropped.
pub fn crosscheck(
    ctx: &Context,
    prompts: &Path,
    input: &Path,
    output: &Path,
    only_passing: bool,
) -> Result<Summary> {
    let mut s = Summary::new("crosscheck");
    let responses: Vec<ResponseCandidate> = ctx.load(input, &mut s)?;
    let prompt_list: Vec<PromptRecord> = ctx.load_aux(prompts, &mut s)?;
    let by_id: HashMap<&str, &PromptRecord> = prompt_list.iter().map(|p| (p.id.as_str(), p)).collect();

    let mut needed: Vec<PromptRecord> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for r in &responses {
        if let Some(p) = by_id.get(r.problem_id.as_str()) {
            if seen.insert(p.id.clone()) {
                needed.push((*p).clone());
            }
        }
    }
    let gateway = Gateway::new(ctx.config.cross_check.clone())?;
    let (second, failed) = gateway.generate_solutions(&needed, RequestKind::CrossCheck, 2);
    let mut opinions: HashMap<&str, Vec<Option<CanonicalAnswer>>> = HashMap::new();
    for c in &second {
        let answer = c.boxed_answer.as_deref().and_then(|a| parse_answer(a).ok());
        opinions.entry(c.problem_id.as_str()).or_default().push(answer);
    }

    let mut out = Vec::new();
    let mut passed = 0usize;
    for mut r in responses {
        if !by_id.contains_key(r.problem_id.as_str()) {
            s.drop_one("unknown_prompt");
            continue;
        }
        r.refresh_boxed();
        let primary = r.boxed_answer.as_deref().and_then(|a| parse_answer(a).ok());
        let verdict = match (primary, opinions.get(r.problem_id.as_str()).map(Vec::as_slice)) {
            (Some(p), Some([Some(a), Some(b)])) => cross_check_labels(&p, [a, b]),
            _ => false,
        };
        r.filter_verdicts.insert(CHECK_CROSS.to_string(), verdict);
        if verdict {
            passed += 1;
        } else if only_passing {
            s.drop_one(CHECK_CROSS);
            continue;
        }
        out.push(r);
    }
    s.records_out = out.len();
    s.notes.push(format!("{passed} responses passed the cross-check"));
    jsonl::write(output, KIND_RESPONSES, &out)?;
    write_failures(output, &failed, &mut s)?;
    Ok(s)
}

/// Reference answer for one problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub problem_id: String,
    pub reference: CanonicalAnswer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
}

/// Where candidate prior scores come from during labeling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PriorSource {
    /// A `prior_score` or `score` field on each response.
    Stored,
    /// The offline generator's hidden quality signal.
    Stub,
    /// A trained checkpoint over the basic features.
    Checkpoint(PathBuf),
}

struct CheckpointPrior {
    params: ScorerParams,
}

impl CheckpointPrior {
    fn score(&self, prompt: &str, c: &ResponseCandidate) -> f64 {
        self.params.score(&BasicFeatures.extract(prompt, c)).unwrap_or(f64::NAN)
    }
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let ckpt = Checkpoint::load(path)?;
    if ckpt.feature_extractor_version != BASIC_FEATURES_VERSION {
        return Err(Error::Config(format!(
            "{}: checkpoint uses feature extractor `{}`, expected `{}`",
            path.display(),
            ckpt.feature_extractor_version,
            BASIC_FEATURES_VERSION
        )));
    }
    Ok(ckpt)
}

/// Groups responses by problem, grades them, and drops single-class
/// problems unless `keep_degenerate`. Counts are per problem.
pub fn label(
    ctx: &Context,
    input: &Path,
    references: &Path,
    output: &Path,
    prior: &PriorSource,
    keep_degenerate: bool,
) -> Result<Summary> {
    let mut s = Summary::new("label");
    let responses: Vec<ResponseCandidate> = ctx.load_aux(input, &mut s)?;
    let refs: Vec<ReferenceRow> = ctx.load_aux(references, &mut s)?;
    let ref_by_id: HashMap<&str, &ReferenceRow> = refs.iter().map(|r| (r.problem_id.as_str(), r)).collect();
    let checkpoint = match prior {
        PriorSource::Checkpoint(p) => Some(CheckpointPrior { params: load_checkpoint(p)?.params() }),
        _ => None,
    };

    let mut order: Vec<String> = Vec::new();
    let mut grouped: HashMap<String, Vec<ResponseCandidate>> = HashMap::new();
    for r in responses {
        if !grouped.contains_key(&r.problem_id) {
            order.push(r.problem_id.clone());
        }
        grouped.entry(r.problem_id.clone()).or_default().push(r);
    }
    s.records_in = order.len();
    let mut out = Vec::new();
    for pid in order {
        let cands = grouped.remove(&pid).unwrap_or_default();
        let Some(reference) = ref_by_id.get(pid.as_str()) else {
            s.drop_one("no_reference");
            continue;
        };
        let prompt = reference.prompt.clone().unwrap_or_default();
        let scored = cands
            .into_iter()
            .map(|c| {
                let score = match prior {
                    PriorSource::Stored => StoredPriorScore::read(&c),
                    PriorSource::Stub => Some(StubQualityScorer.prior_score(&c)),
                    PriorSource::Checkpoint(_) => checkpoint.as_ref().map(|k| k.score(&prompt, &c)),
                };
                (c, score)
            })
            .collect();
        let labeled = label_candidates(&pid, &prompt, &reference.reference, scored);
        if !keep_degenerate && !filter_degenerate(&labeled) {
            s.drop_one("single_class");
            continue;
        }
        out.push(labeled);
    }
    s.records_out = out.len();
    jsonl::write(output, KIND_LABELED, &out)?;
    Ok(s)
}

pub fn sample_pairs(
    ctx: &Context,
    input: &Path,
    output: &Path,
    strategy: Option<SampleStrategy>,
) -> Result<Summary> {
    let mut s = Summary::new("sample-pairs");
    let problems: Vec<LabeledProblem> = ctx.load(input, &mut s)?;
    let mut cfg = ctx.config.sampler.clone();
    if let Some(st) = strategy {
        cfg.strategy = st;
    }
    cfg.validate().map_err(Error::Config)?;
    let groups = problems
        .par_iter()
        .map(|p| score_sorted_sample(p, &cfg, &BasicFeatures))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut out = Vec::new();
    for g in groups {
        match g {
            Some(g) => out.push(g.record()),
            None => s.drop_one("no_group"),
        }
    }
    s.records_out = out.len();
    jsonl::write(output, KIND_GROUPS, &out)?;
    Ok(s)
}

/// Trains the linear scorer on sampled groups over the basic features.
pub fn train_rm(
    ctx: &Context,
    labeled: &Path,
    groups: &Path,
    output: &Path,
    trace: Option<&Path>,
) -> Result<Summary> {
    let mut s = Summary::new("train-rm");
    let records: Vec<GroupRecord> = ctx.load(groups, &mut s)?;
    let problems: Vec<LabeledProblem> = ctx.load_aux(labeled, &mut s)?;
    let by_id: HashMap<&str, &LabeledProblem> = problems.iter().map(|p| (p.problem_id.as_str(), p)).collect();
    let mut hydrated = Vec::new();
    for r in &records {
        match by_id.get(r.problem_id.as_str()) {
            Some(p) => hydrated.push(hydrate_group(r, p, &BasicFeatures)?),
            None => s.drop_one("unknown_problem"),
        }
    }
    let cfg = &ctx.config.trainer;
    let result = train(&hydrated, cfg)?;
    let acc = ranking_accuracy(&result.params, &hydrated).map_err(|e| Error::Data(e.to_string()))?;
    Checkpoint::new(&result.params, BasicFeatures.version(), cfg).save(output)?;
    if let Some(path) = trace {
        write_trace_csv(path, &result.trace)?;
    }
    s.records_out = hydrated.len();
    let last = result.trace.last().map(|r| r.loss).unwrap_or(f64::NAN);
    s.notes.push(format!(
        "{} steps, final batch loss {last:.6}, training pair accuracy {acc:.4}",
        result.trace.len()
    ));
    Ok(s)
}

/// Report destinations for [`eval`].
#[derive(Debug, Clone, Default)]
pub struct EvalOutputs<'a> {
    pub text: Option<&'a Path>,
    pub csv: Option<&'a Path>,
}

/// Scores pools with a checkpoint (or stored scores) and reports rm@n,
/// majority@n and pass@n. Returns the summary and the text report.
pub fn eval(
    ctx: &Context,
    input: &Path,
    checkpoint: Option<&Path>,
    outputs: EvalOutputs<'_>,
) -> Result<(Summary, String)> {
    let mut s = Summary::new("eval");
    let rows: Vec<PoolRow> = ctx.load(input, &mut s)?;
    s.records_out = rows.len();
    let datasets = bon::pools_from_rows(&rows);
    let cfg = &ctx.config.eval;
    let report = match checkpoint {
        Some(path) => {
            let params = load_checkpoint(path)?.params();
            let scorer = LinearPoolScorer { params: &params, extractor: &BasicFeatures };
            bon::evaluate_benchmark(&datasets, &scorer, cfg)?
        }
        None => bon::evaluate_benchmark(&datasets, &StoredScore, cfg)?,
    };
    let problems: usize = datasets.iter().map(|d| d.pools.len()).sum();
    s.notes.push(format!(
        "{} datasets, {problems} problems, n = {}, {}",
        datasets.len(),
        cfg.n,
        match cfg.mode {
            EvalMode::Exact => "exact enumeration".to_string(),
            EvalMode::Sampled => format!("{} seeds", cfg.num_seeds),
        }
    ));
    let text = report.to_table();
    if let Some(p) = outputs.text {
        write_text(p, &text)?;
    }
    if let Some(p) = outputs.csv {
        write_text(p, &report.to_csv())?;
    }
    Ok((s, text))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// offline pipeline

const NOUNS: [&str; 12] = [
    "apples", "marbles", "tickets", "coins", "pencils", "stamps", "books", "shells", "cards",
    "beads", "tiles", "bottles",
];
const NAMES: [&str; 8] = ["Ava", "Ben", "Chen", "Dara", "Eli", "Fatima", "Gus", "Hana"];

fn math_seed_text(rng: &mut impl rand::Rng, i: usize) -> String {
    let a = rng.gen_range(2..90);
    let b = rng.gen_range(2..40);
    let c = rng.gen_range(2..12);
    let noun = NOUNS[rng.gen_range(0..NOUNS.len())];
    let name = NAMES[rng.gen_range(0..NAMES.len())];
    match i % 5 {
        0 => format!("{name} has {a} {noun} and buys {b} more each week. How many {noun} does {name} have after {c} weeks?"),
        1 => format!("Compute the value of {a} times {c} minus {b}."),
        2 => format!("A box holds {c} rows of {a} {noun}. If {b} {noun} are removed, how many remain?"),
        3 => format!("Find the remainder when {a}{b} is divided by {c}."),
        _ => format!("Solve for x: {c}x + {b} = {}.", c * a + b),
    }
}

fn general_seed_text(rng: &mut impl rand::Rng) -> String {
    let topics = ["river ecosystems", "medieval trade", "solar panels", "sleep habits", "jazz history", "city gardens"];
    let readers = ["a new student", "a busy manager", "a curious child", "a visiting scientist", "a local reporter"];
    let t = topics[rng.gen_range(0..topics.len())];
    let r = readers[rng.gen_range(0..readers.len())];
    let k = rng.gen_range(2..6);
    format!("Write a short note with {k} key points about {t} for {r}.")
}

fn test_item_text(i: usize) -> String {
    let n = NOUNS[i % NOUNS.len()];
    let name = NAMES[(i * 3) % NAMES.len()];
    format!(
        "During a school fair {name} arranged {} {n} into equal stacks on each of {} long tables and then gave away {} of them to visiting families; what fraction of the original {n} was left on the tables at the end of the afternoon?",
        40 + 7 * i,
        3 + i % 5,
        5 + i
    )
}

fn general_test_text(i: usize) -> String {
    format!(
        "Describe in plain language how the committee for festival number {i} chose the music, planned the seating, hired the caterers and advertised the event across the whole region."
    )
}

/// Synthetic seed corpus and benchmark items for the offline pipeline.
/// Includes case-variant duplicates and prompts that copy, wrap, or borrow
/// long spans from benchmark items.
pub fn synthetic_corpus(num_prompts: usize, seed: u64) -> (Vec<PromptRecord>, Vec<TestItem>) {
    let math_items = 24;
    let general_items = 6;
    let mut items: Vec<TestItem> = (0..math_items)
        .map(|i| TestItem { test_set: "bench-math".into(), id: format!("m{i}"), text: test_item_text(i) })
        .collect();
    items.extend((0..general_items).map(|i| TestItem {
        test_set: "bench-general".into(),
        id: format!("g{i}"),
        text: general_test_text(i),
    }));

    let mut rng = derive_rng(seed, &[0x5eed]);
    let mut prompts: Vec<PromptRecord> = Vec::with_capacity(num_prompts);
    for i in 0..num_prompts {
        let id = format!("p{i:05}");
        let record = if i % 37 == 5 && !prompts.is_empty() {
            // case variant of the previous prompt
            let prev = prompts.last().unwrap();
            PromptRecord { id, ..prev.clone() }.with_text_case_swapped()
        } else if i % 50 == 7 {
            let k = (i / 50) % math_items;
            let text = match (i / 50) % 4 {
                0 | 1 => test_item_text(k),
                2 => format!("Answer carefully. {}", test_item_text(k)),
                // long borrowed span inside a much longer prompt: n-gram hit, LCS below threshold
                _ => format!(
                    "{} Separately, consider this unrelated setting and explain each step you take: {}",
                    test_item_text(k).split_whitespace().take(16).collect::<Vec<_>>().join(" "),
                    (0..40).map(|w| format!("filler{w}")).collect::<Vec<_>>().join(" ")
                ),
            };
            PromptRecord::new(id, text, "scraped-forum")
        } else if i % 50 == 23 {
            let k = (i / 50) % general_items;
            PromptRecord::new(id, format!("Please help: {}", general_test_text(k)), "chat-logs")
                .with_domain(Domain::General)
        } else if i % 10 == 3 {
            PromptRecord::new(id, general_seed_text(&mut rng), "chat-logs").with_domain(Domain::General)
        } else {
            PromptRecord::new(id, math_seed_text(&mut rng, i), "math-seeds")
        };
        prompts.push(record);
    }
    (prompts, items)
}

trait CaseSwap {
    fn with_text_case_swapped(self) -> Self;
}

impl CaseSwap for PromptRecord {
    fn with_text_case_swapped(mut self) -> Self {
        self.text = self
            .text
            .chars()
            .map(|c| if c.is_uppercase() { c.to_ascii_lowercase() } else { c.to_ascii_uppercase() })
            .collect();
        self
    }
}

/// Sizes of the offline pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOptions {
    pub num_prompts: usize,
    /// Problems used to build reward-model training data.
    pub rm_train_problems: usize,
    /// Candidates per training problem, split across two policy models.
    pub rm_train_candidates: u32,
    /// Held-out problems for best-of-n evaluation.
    pub eval_problems: usize,
    /// Base correct rate of the sampled policy models, spread by problem
    /// difficulty so pools range from easy to hard.
    pub policy_correct_rate: f64,
    pub policy_difficulty_spread: f64,
    /// Trainer batch size and epochs used by the pipeline's training step.
    pub train_batch_size: usize,
    pub train_epochs: usize,
    pub seed: u64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            num_prompts: 1000,
            rm_train_problems: 240,
            rm_train_candidates: 16,
            eval_problems: 60,
            policy_correct_rate: 0.45,
            policy_difficulty_spread: 0.9,
            train_batch_size: 32,
            train_epochs: 30,
            seed: 0,
        }
    }
}

/// Runs every stage on the stub backend, writing all intermediate files to
/// `dir`. Output is a pure function of the options and configuration.
pub fn pipeline(ctx: &Context, dir: &Path, opts: &PipelineOptions) -> Result<Vec<Summary>> {
    let mut ctx = ctx.clone();
    let stub_only = |g: &GeneratorConfig| GeneratorConfig {
        backend: crate::gateway::BackendKind::Stub,
        transcript_path: None,
        ..g.clone()
    };
    ctx.config.generator = stub_only(&ctx.config.generator);
    ctx.config.cross_check = stub_only(&ctx.config.cross_check);
    ctx.config.trainer.batch_size = opts.train_batch_size;
    ctx.config.trainer.epochs = opts.train_epochs;
    let policy = |model: &str| {
        let mut g = ctx.config.generator.clone();
        g.model_name = model.to_string();
        g.temperature = 1.0;
        g.stub.correct_rate = opts.policy_correct_rate;
        g.stub.difficulty_spread = opts.policy_difficulty_spread;
        g
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let p = |name: &str| dir.join(name);
    let mut out = Vec::new();

    let (seeds, items) = synthetic_corpus(opts.num_prompts, opts.seed);
    jsonl::write(p("00_seeds.jsonl"), KIND_PROMPTS, &seeds)?;
    jsonl::write(p("00_test_items.jsonl"), KIND_TEST_ITEMS, &items)?;

    out.push(dedup(&ctx, &p("00_seeds.jsonl"), &p("01_deduped.jsonl"))?);
    out.push(decontaminate(
        &ctx,
        &p("01_deduped.jsonl"),
        &p("00_test_items.jsonl"),
        &p("02_seeds_clean.jsonl"),
        Some(&p("02_contamination.jsonl")),
    )?);
    out.push(evolve(
        &ctx,
        &p("02_seeds_clean.jsonl"),
        &p("03_evolved.jsonl"),
        &[EvolutionMode::Breadth, EvolutionMode::Depth],
    )?);
    out.push(filter(&ctx, FilterTarget::Prompts, &p("03_evolved.jsonl"), &p("04_evolved_filtered.jsonl"))?);
    let mut synth_summary = decontaminate(
        &ctx,
        &p("04_evolved_filtered.jsonl"),
        &p("00_test_items.jsonl"),
        &p("05_synthetic.jsonl"),
        None,
    )?;
    synth_summary.stage = "decontaminate synthetic".into();
    out.push(synth_summary);

    // responses for seeds and synthetic prompts
    out.push(generate(&ctx, &p("02_seeds_clean.jsonl"), &p("06_seed_responses.jsonl"), 1, None)?);
    let mut synth_gen = generate(&ctx, &p("05_synthetic.jsonl"), &p("06_synthetic_responses.jsonl"), 1, None)?;
    synth_gen.stage = "generate synthetic".into();
    out.push(synth_gen);
    let mut f1 = filter(&ctx, FilterTarget::Responses, &p("06_seed_responses.jsonl"), &p("07_seed_responses.jsonl"))?;
    f1.stage = "filter seed responses".into();
    out.push(f1);
    let mut f2 = filter(
        &ctx,
        FilterTarget::Responses,
        &p("06_synthetic_responses.jsonl"),
        &p("07_synthetic_responses.jsonl"),
    )?;
    f2.stage = "filter synthetic responses".into();
    out.push(f2);
    out.push(crosscheck(
        &ctx,
        &p("05_synthetic.jsonl"),
        &p("07_synthetic_responses.jsonl"),
        &p("08_synthetic_checked.jsonl"),
        false,
    )?);

    // fine-tuning blend: every seed response, synthetic ones only if cross-checked
    let seed_resp: Vec<ResponseCandidate> = jsonl::read(p("07_seed_responses.jsonl"), true)?.records;
    let synth_resp: Vec<ResponseCandidate> = jsonl::read(p("08_synthetic_checked.jsonl"), true)?.records;
    let blend = compose_blend(
        &[
            BlendSource { name: "seed".into(), records: &seed_resp, rule: SelectionRule::All, target: None },
            BlendSource {
                name: "synthetic".into(),
                records: &synth_resp,
                rule: SelectionRule::CrossCheckedOnly,
                target: None,
            },
        ],
        opts.seed,
    )?;
    jsonl::write(p("09_sft_blend.jsonl"), KIND_RESPONSES, &blend)?;
    let mut bs = Summary::new("blend");
    bs.records_in = seed_resp.len() + synth_resp.len();
    bs.records_out = blend.len();
    bs.drop_n(CHECK_CROSS, bs.records_in - blend.len());
    out.push(bs);

    // reward-model data: disjoint train and held-out math problems
    let synthetic: Vec<PromptRecord> = jsonl::read(p("05_synthetic.jsonl"), true)?.records;
    let clean_seeds: Vec<PromptRecord> = jsonl::read(p("02_seeds_clean.jsonl"), true)?.records;
    let math: Vec<PromptRecord> = clean_seeds
        .into_iter()
        .chain(synthetic)
        .filter(|r| r.domain == Domain::Math)
        .collect();
    let train_n = opts.rm_train_problems.min(math.len());
    let eval_n = opts.eval_problems.min(math.len() - train_n);
    let train_prompts = &math[..train_n];
    let eval_prompts = &math[train_n..train_n + eval_n];
    jsonl::write(p("10_rm_prompts.jsonl"), KIND_PROMPTS, train_prompts)?;
    jsonl::write(p("10_eval_prompts.jsonl"), KIND_PROMPTS, eval_prompts)?;
    let refs: Vec<ReferenceRow> = math[..train_n + eval_n]
        .iter()
        .map(|r| ReferenceRow {
            problem_id: r.id.clone(),
            reference: StubBackend::truth_answer(&r.id),
            prompt: Some(r.text.clone()),
        })
        .collect();
    jsonl::write(p("10_references.jsonl"), KIND_REFERENCES, &refs)?;

    let half = (opts.rm_train_candidates / 2).max(1);
    let mut policy_files = Vec::new();
    for model in ["stub-policy-a", "stub-policy-b"] {
        let path = p(&format!("11_candidates_{model}.jsonl"));
        let mut sg = generate_with(&ctx, policy(model), &p("10_rm_prompts.jsonl"), &path, half)?;
        sg.stage = format!("generate {model}");
        out.push(sg);
        policy_files.push(path);
    }
    // interleave the two models' candidates per problem
    let mut merged: Vec<ResponseCandidate> = Vec::new();
    let per_model: Vec<Vec<ResponseCandidate>> = policy_files
        .iter()
        .map(|f| jsonl::read(f, true).map(|l| l.records))
        .collect::<Result<_>>()?;
    let mut cursors = vec![0usize; per_model.len()];
    for prompt in train_prompts {
        for (m, list) in per_model.iter().enumerate() {
            while cursors[m] < list.len() && list[cursors[m]].problem_id == prompt.id {
                merged.push(list[cursors[m]].clone());
                cursors[m] += 1;
            }
        }
    }
    jsonl::write(p("11_candidates.jsonl"), KIND_RESPONSES, &merged)?;
    out.push(label(
        &ctx,
        &p("11_candidates.jsonl"),
        &p("10_references.jsonl"),
        &p("12_labeled.jsonl"),
        &PriorSource::Stub,
        false,
    )?);
    out.push(sample_pairs(&ctx, &p("12_labeled.jsonl"), &p("13_groups.jsonl"), None)?);
    out.push(train_rm(
        &ctx,
        &p("12_labeled.jsonl"),
        &p("13_groups.jsonl"),
        &p("14_checkpoint.json"),
        Some(&p("14_trace.csv")),
    )?);

    // held-out pools of pool_size candidates each
    let pool_size = ctx.config.eval.pool_size as u32;
    let mut pg = generate_with(
        &ctx,
        policy("stub-policy-a"),
        &p("10_eval_prompts.jsonl"),
        &p("15_eval_candidates.jsonl"),
        pool_size,
    )?;
    pg.stage = "generate eval pools".into();
    out.push(pg);
    let ref_by_id: HashMap<&str, &ReferenceRow> = refs.iter().map(|r| (r.problem_id.as_str(), r)).collect();
    let cands: Vec<ResponseCandidate> = jsonl::read(p("15_eval_candidates.jsonl"), true)?.records;
    let rows: Vec<PoolRow> = cands
        .iter()
        .map(|c| PoolRow {
            dataset: Some("synthetic-math".into()),
            problem_id: c.problem_id.clone(),
            model_id: c.model_id.clone(),
            score: None,
            boxed_answer: None,
            text: Some(c.text.clone()),
            reference: ref_by_id[c.problem_id.as_str()].reference.clone(),
            prompt: ref_by_id[c.problem_id.as_str()].prompt.clone(),
        })
        .collect();
    jsonl::write(p("15_eval_pools.jsonl"), KIND_POOLS, &rows)?;
    let (es, _) = eval(
        &ctx,
        &p("15_eval_pools.jsonl"),
        Some(&p("14_checkpoint.json")),
        EvalOutputs { text: Some(&p("16_report.txt")), csv: Some(&p("16_report.csv")) },
    )?;
    out.push(es);

    let text: String = out.iter().map(|s| format!("{s}\n")).collect();
    write_text(&p("summary.txt"), &text)?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// command line

#[derive(Debug, Parser)]
#[command(name = "mathcurate", version, about = "Math data curation, reward modelling and best-of-n evaluation")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root seed for every seeded stage.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Fail on the first malformed record instead of skipping it.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Reset every constant to its reference value.
    #[arg(long = "paper-defaults", global = true)]
    pub reference_defaults: bool,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct InOut {
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    ScoreSorted,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PriorArg {
    Stored,
    Stub,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Drop prompts whose lowercased text repeats an earlier one.
    Dedup(InOut),
    /// Drop prompts overlapping benchmark items.
    Decontaminate {
        #[command(flatten)]
        io: InOut,
        /// JSON-Lines of {test_set, id, text}.
        #[arg(long)]
        test_sets: PathBuf,
        /// Write decisions for dropped prompts here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Length cap for synthetic prompts, or structure checks for responses.
    Filter {
        #[arg(long, value_enum)]
        kind: FilterTarget,
        #[command(flatten)]
        io: InOut,
    },
    /// Create synthetic prompts from math seeds.
    Evolve {
        #[command(flatten)]
        io: InOut,
        #[arg(long, value_enum, value_delimiter = ',', default_values = ["breadth", "depth"])]
        modes: Vec<ModeArg>,
    },
    /// Generate solutions with the step-by-step instruction.
    Generate {
        #[command(flatten)]
        io: InOut,
        #[arg(long, default_value_t = 1)]
        samples: u32,
        /// Override the configured generator model name.
        #[arg(long)]
        model: Option<String>,
    },
    /// Mark responses whose answer two cross-check samples agree with.
    Crosscheck {
        #[command(flatten)]
        io: InOut,
        /// Prompts the responses answer.
        #[arg(long)]
        prompts: PathBuf,
        /// Drop responses that fail the check.
        #[arg(long)]
        only_passing: bool,
    },
    /// Grade responses against references and group them by problem.
    Label {
        #[command(flatten)]
        io: InOut,
        /// JSON-Lines of {problem_id, reference, prompt?}.
        #[arg(long)]
        references: PathBuf,
        #[arg(long, value_enum, default_value = "stored")]
        prior: PriorArg,
        /// Score candidates with a trained checkpoint instead.
        #[arg(long, conflicts_with = "prior")]
        prior_checkpoint: Option<PathBuf>,
        #[arg(long)]
        keep_degenerate: bool,
    },
    /// Draw one preference group per labeled problem.
    SamplePairs {
        #[command(flatten)]
        io: InOut,
        #[arg(long, value_enum)]
        strategy: Option<StrategyArg>,
    },
    /// Train the linear reward scorer.
    TrainRm {
        /// Labeled problems the groups refer to.
        #[arg(long)]
        labeled: PathBuf,
        #[arg(long)]
        groups: PathBuf,
        /// Checkpoint path.
        #[arg(long, short)]
        output: PathBuf,
        /// Loss trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Best-of-n evaluation of candidate pools.
    Eval {
        #[arg(long, short)]
        input: PathBuf,
        /// Score candidate text with this checkpoint instead of stored scores.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Enumerate every subset instead of sampling seeds.
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        num_seeds: Option<usize>,
        /// Text report; printed to standard output when omitted.
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run every stage offline on the stub backend.
    Pipeline {
        #[arg(long, short)]
        output: PathBuf,
        #[arg(long, default_value_t = 1000)]
        prompts: usize,
    },
}

/// Builds the effective configuration from flags.
pub fn resolve_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if cli.reference_defaults {
        config.apply_reference_defaults();
    }
    if let Some(seed) = cli.seed {
        config.set_seed(seed);
    }
    Ok(config)
}

/// Executes a parsed command line; returns the stage summaries.
pub fn run(cli: Cli) -> Result<Vec<Summary>> {
    let mut config = resolve_config(&cli)?;
    let strict = cli.strict;
    let seed = cli.seed.unwrap_or(0);
    if let Command::Eval { exact, n, num_seeds, .. } = &cli.command {
        if *exact {
            config.eval.mode = EvalMode::Exact;
        }
        if let Some(n) = n {
            config.eval.n = *n;
            config.eval.pool_size = config.eval.pool_size.max(*n);
        }
        if let Some(s) = num_seeds {
            config.eval.num_seeds = *s;
        }
        config.validate()?;
    }
    let ctx = Context { config, strict };
    let one = |s: Summary| Ok(vec![s]);
    match cli.command {
        Command::Dedup(io) => one(dedup(&ctx, &io.input, &io.output)?),
        Command::Decontaminate { io, test_sets, report } => {
            one(decontaminate(&ctx, &io.input, &test_sets, &io.output, report.as_deref())?)
        }
        Command::Filter { kind, io } => one(filter(&ctx, kind, &io.input, &io.output)?),
        Command::Evolve { io, modes } => {
            let modes: Vec<EvolutionMode> = modes.into_iter().map(Into::into).collect();
            one(evolve(&ctx, &io.input, &io.output, &modes)?)
        }
        Command::Generate { io, samples, model } => {
            one(generate(&ctx, &io.input, &io.output, samples, model.as_deref())?)
        }
        Command::Crosscheck { io, prompts, only_passing } => {
            one(crosscheck(&ctx, &prompts, &io.input, &io.output, only_passing)?)
        }
        Command::Label { io, references, prior, prior_checkpoint, keep_degenerate } => {
            let prior = match (prior_checkpoint, prior) {
                (Some(p), _) => PriorSource::Checkpoint(p),
                (None, PriorArg::Stub) => PriorSource::Stub,
                (None, PriorArg::Stored) => PriorSource::Stored,
            };
            one(label(&ctx, &io.input, &references, &io.output, &prior, keep_degenerate)?)
        }
        Command::SamplePairs { io, strategy } => {
            let strategy = strategy.map(|s| match s {
                StrategyArg::ScoreSorted => SampleStrategy::ScoreSorted,
                StrategyArg::Random => SampleStrategy::Random,
            });
            one(sample_pairs(&ctx, &io.input, &io.output, strategy)?)
        }
        Command::TrainRm { labeled, groups, output, trace } => {
            one(train_rm(&ctx, &labeled, &groups, &output, trace.as_deref())?)
        }
        Command::Eval { input, checkpoint, output, csv, .. } => {
            let (s, text) = eval(
                &ctx,
                &input,
                checkpoint.as_deref(),
                EvalOutputs { text: output.as_deref(), csv: csv.as_deref() },
            )?;
            if output.is_none() {
                print!("{text}");
            }
            one(s)
        }
        Command::Pipeline { output, prompts } => {
            let opts = PipelineOptions { num_prompts: prompts, seed, ..Default::default() };
            pipeline(&ctx, &output, &opts)
        }
    }
}
