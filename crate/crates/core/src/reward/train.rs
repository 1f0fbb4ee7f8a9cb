//! Mini-batch training loop, checkpoints and loss traces.

use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::{
    cross_entropy_loss, loss_gradient, mse_loss, pair_gradient, pairwise_bt_loss,
    point_derivative, Gradient, LossKind,
};
use super::optim::{cosine_lr, AdamW};
use super::{DimensionMismatch, ScorerParams};
use crate::error::{Error, Result as CrateResult};
use crate::pairs::PreferenceGroup;
use crate::reward::features::FeatureVector;
use crate::seeding::derive_rng;

/// Learning rates used for full-size 7B and 72B backbones.
pub const BACKBONE_LEARNING_RATES: [f64; 2] = [5e-6, 2e-6];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    pub loss: LossKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            loss: LossKind::ListwiseBt,
            learning_rate: 1e-2,
            epochs: 2,
            batch_size: 256,
            weight_decay: 0.01,
            seed: 0,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.learning_rate > 0.0) {
            return Err("trainer.learning_rate must be positive".into());
        }
        if self.epochs == 0 {
            return Err("trainer.epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return Err("trainer.batch_size must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("no training groups")]
    Empty,
    #[error("trainer configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
    #[error("non-finite loss at step {step}")]
    NonFinite { step: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub params: ScorerParams,
    pub trace: Vec<TraceRow>,
}

/// The unit a loss is averaged over within a batch.
enum Example<'a> {
    Group(&'a PreferenceGroup),
    Pair(&'a FeatureVector, &'a FeatureVector),
    Point(&'a FeatureVector, f64),
}

fn examples(groups: &[PreferenceGroup], kind: LossKind) -> Vec<Example<'_>> {
    match kind {
        LossKind::ListwiseBt => groups.iter().map(Example::Group).collect(),
        LossKind::PairwiseBt => groups
            .iter()
            .flat_map(|g| {
                g.positives.iter().flat_map(move |p| {
                    g.negatives
                        .iter()
                        .map(move |n| Example::Pair(&p.features, &n.features))
                })
            })
            .collect(),
        LossKind::CrossEntropy | LossKind::Mse => groups
            .iter()
            .flat_map(|g| {
                g.positives
                    .iter()
                    .map(|m| Example::Point(&m.features, 1.0))
                    .chain(g.negatives.iter().map(|m| Example::Point(&m.features, 0.0)))
            })
            .collect(),
    }
}

fn example_loss_grad(
    params: &ScorerParams,
    example: &Example<'_>,
    kind: LossKind,
) -> Result<(f64, Gradient), DimensionMismatch> {
    match example {
        Example::Group(g) => Ok((
            super::loss::group_loss(params, g, kind)?,
            loss_gradient(params, g, kind)?,
        )),
        Example::Pair(p, n) => {
            let (sp, sn) = (params.score(p)?, params.score(n)?);
            let mut grad = Gradient::zeros(params.dim());
            pair_gradient(&mut grad, 1.0, sp, sn, p.as_slice(), n.as_slice());
            Ok((pairwise_bt_loss(sp, sn), grad))
        }
        Example::Point(x, y) => {
            let s = params.score(x)?;
            let loss = match kind {
                LossKind::CrossEntropy => cross_entropy_loss(s, *y),
                _ => mse_loss(s, *y),
            };
            let mut grad = Gradient::zeros(params.dim());
            grad.accumulate(point_derivative(kind, s, *y), x.as_slice());
            Ok((loss, grad))
        }
    }
}

/// Trains from zero-initialized parameters. Each epoch visits every example
/// once in a seeded shuffle; the batch loss is the mean example loss.
/// Results are identical at any thread count.
pub fn train(groups: &[PreferenceGroup], config: &TrainerConfig) -> Result<TrainOutput, TrainError> {
    config.validate().map_err(TrainError::Config)?;
    let dim = groups
        .iter()
        .flat_map(|g| g.positives.iter().chain(&g.negatives))
        .map(|m| m.features.dim())
        .next()
        .ok_or(TrainError::Empty)?;
    let examples = examples(groups, config.loss);
    if examples.is_empty() {
        return Err(TrainError::Empty);
    }
    let steps_per_epoch = examples.len().div_ceil(config.batch_size);
    let total_steps = steps_per_epoch * config.epochs;

    let mut params = ScorerParams::zeros(dim);
    let mut flat = vec![0.0; dim + 1];
    let mut opt = AdamW::new(dim + 1, config.weight_decay);
    let mut trace = Vec::with_capacity(total_steps);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut step = 0;
    for epoch in 0..config.epochs {
        let mut rng = derive_rng(config.seed, &[epoch as u64]);
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let results: Vec<(f64, Gradient)> = batch
                .par_iter()
                .map(|&i| example_loss_grad(&params, &examples[i], config.loss))
                .collect::<Result<_, _>>()?;
            let scale = 1.0 / batch.len() as f64;
            let mut grad = Gradient::zeros(dim);
            let mut loss = 0.0;
            for (l, g) in &results {
                loss += l * scale;
                grad.add_scaled(g, scale);
            }
            if !loss.is_finite() {
                return Err(TrainError::NonFinite { step });
            }
            let lr = cosine_lr(config.learning_rate, step, total_steps);
            trace.push(TraceRow { step, lr, loss });
            opt.step(&mut flat, &grad.flatten(), lr, dim);
            params.weights.copy_from_slice(&flat[..dim]);
            params.bias = flat[dim];
            if !params.is_finite() {
                return Err(TrainError::NonFinite { step });
            }
            step += 1;
        }
    }
    Ok(TrainOutput { params, trace })
}

/// Share of within-group (positive, negative) pairs ranked correctly.
pub fn ranking_accuracy(
    params: &ScorerParams,
    groups: &[PreferenceGroup],
) -> Result<f64, DimensionMismatch> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for g in groups {
        for p in &g.positives {
            let sp = params.score(&p.features)?;
            for n in &g.negatives {
                total += 1;
                if sp > params.score(&n.features)? {
                    correct += 1;
                }
            }
        }
    }
    Ok(if total == 0 { 0.0 } else { correct as f64 / total as f64 })
}

/// Saved scorer plus what is needed to reuse it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub feature_extractor_version: String,
    pub config: TrainerConfig,
}

impl Checkpoint {
    pub fn new(params: &ScorerParams, extractor_version: &str, config: &TrainerConfig) -> Self {
        Checkpoint {
            weights: params.weights.clone(),
            bias: params.bias,
            feature_extractor_version: extractor_version.to_string(),
            config: config.clone(),
        }
    }

    pub fn params(&self) -> ScorerParams {
        ScorerParams {
            weights: self.weights.clone(),
            bias: self.bias,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> CrateResult<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Data(e.to_string()))?;
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> CrateResult<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&raw).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }
}

/// Writes `step,lr,loss` rows.
pub fn write_trace_csv(path: impl AsRef<Path>, trace: &[TraceRow]) -> CrateResult<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Data(e.to_string()))?;
    for row in trace {
        w.serialize(row).map_err(|e| Error::Data(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairs::GroupMember;

    fn member(id: &str, x: Vec<f64>) -> GroupMember {
        GroupMember { response_id: id.into(), features: x.into() }
    }

    fn separable_groups(n: usize) -> Vec<PreferenceGroup> {
        (0..n)
            .map(|i| {
                let t = i as f64 * 0.37;
                PreferenceGroup {
                    problem_id: format!("g{i}"),
                    positives: vec![member("p", vec![1.0 + t.sin() * 0.2, t.cos()])],
                    negatives: vec![member("n", vec![-1.0 + t.cos() * 0.2, t.sin()])],
                    num_positive: 1,
                }
            })
            .collect()
    }

    #[test]
    fn learns_separable_fixture_and_is_deterministic() {
        let groups = separable_groups(40);
        let cfg = TrainerConfig { batch_size: 8, epochs: 10, ..Default::default() };
        let a = train(&groups, &cfg).unwrap();
        assert_eq!(a.trace.len(), 50);
        assert_eq!(ranking_accuracy(&a.params, &groups).unwrap(), 1.0);
        let b = train(&groups, &cfg).unwrap();
        let bits = |t: &[TraceRow]| t.iter().map(|r| r.loss.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.trace), bits(&b.trace));
        assert!(a.trace.last().unwrap().loss < a.trace[0].loss);
        assert_eq!(a.trace[0].lr, cfg.learning_rate);
    }

    #[test]
    fn every_loss_kind_trains() {
        let groups = separable_groups(20);
        for loss in LossKind::ALL {
            let cfg = TrainerConfig { loss, batch_size: 4, epochs: 20, ..Default::default() };
            let out = train(&groups, &cfg).unwrap();
            assert!(ranking_accuracy(&out.params, &groups).unwrap() > 0.9, "{loss:?}");
        }
    }

    #[test]
    fn pair_examples_outnumber_groups() {
        let g = PreferenceGroup {
            problem_id: "g".into(),
            positives: vec![member("a", vec![1.0]), member("b", vec![1.0])],
            negatives: (0..4).map(|i| member(&format!("n{i}"), vec![0.0])).collect(),
            num_positive: 2,
        };
        let groups = [g];
        assert_eq!(examples(&groups, LossKind::ListwiseBt).len(), 1);
        assert_eq!(examples(&groups, LossKind::PairwiseBt).len(), 8);
        assert_eq!(examples(&groups, LossKind::Mse).len(), 6);
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        // identical positive and negative features cancel exactly
        let x = vec![0.3, -0.7];
        let groups: Vec<_> = (0..5)
            .map(|i| PreferenceGroup {
                problem_id: format!("g{i}"),
                positives: vec![member("p", x.clone())],
                negatives: vec![member("n", x.clone())],
                num_positive: 1,
            })
            .collect();
        let cfg = TrainerConfig { weight_decay: 0.0, batch_size: 2, epochs: 30, ..Default::default() };
        let out = train(&groups, &cfg).unwrap();
        assert_eq!(out.params, ScorerParams::zeros(2));
    }

    #[test]
    fn non_finite_features_abort() {
        let mut groups = separable_groups(3);
        groups[1].positives[0].features = vec![f64::NAN, 0.0].into();
        let cfg = TrainerConfig { batch_size: 1, epochs: 1, ..Default::default() };
        assert!(matches!(train(&groups, &cfg), Err(TrainError::NonFinite { .. })));
    }

    #[test]
    fn empty_input_is_rejected() {
        assert_eq!(train(&[], &TrainerConfig::default()), Err(TrainError::Empty));
        let bad = TrainerConfig { epochs: 0, ..Default::default() };
        assert!(matches!(train(&separable_groups(1), &bad), Err(TrainError::Config(_))));
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        let params = ScorerParams { weights: vec![0.25, -1.5], bias: 0.125 };
        let ckpt = Checkpoint::new(&params, "basic-v1", &TrainerConfig::default());
        ckpt.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(back.params(), params);

        let csv_path = dir.path().join("trace.csv");
        write_trace_csv(&csv_path, &[TraceRow { step: 0, lr: 0.01, loss: 0.5 }]).unwrap();
        assert_eq!(std::fs::read_to_string(csv_path).unwrap(), "step,lr,loss\n0,0.01,0.5\n");
    }
}
