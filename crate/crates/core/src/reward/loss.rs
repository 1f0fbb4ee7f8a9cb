//! Ranking and pointwise losses, their gradients through the linear scorer,
//! and a central-difference gradient check.

use serde::{Deserialize, Serialize};

use super::{DimensionMismatch, ScorerParams};
use crate::pairs::PreferenceGroup;

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic function, stable for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    ListwiseBt,
    PairwiseBt,
    CrossEntropy,
    Mse,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [
        LossKind::ListwiseBt,
        LossKind::PairwiseBt,
        LossKind::CrossEntropy,
        LossKind::Mse,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("listwise loss needs at least one positive and one negative score")]
pub struct EmptySide;

/// Mean of `-ln σ(pos - neg)` over every positive/negative pair.
pub fn listwise_bt_loss(pos_scores: &[f64], neg_scores: &[f64]) -> Result<f64, EmptySide> {
    if pos_scores.is_empty() || neg_scores.is_empty() {
        return Err(EmptySide);
    }
    let total: f64 = pos_scores
        .iter()
        .map(|p| neg_scores.iter().map(|n| softplus(n - p)).sum::<f64>())
        .sum();
    Ok(total / (pos_scores.len() * neg_scores.len()) as f64)
}

/// `-ln σ(pos - neg)` for a single pair.
pub fn pairwise_bt_loss(pos_score: f64, neg_score: f64) -> f64 {
    softplus(neg_score - pos_score)
}

/// Binary cross-entropy on the logit `score`.
pub fn cross_entropy_loss(score: f64, label: f64) -> f64 {
    label * softplus(-score) + (1.0 - label) * softplus(score)
}

pub fn mse_loss(score: f64, label: f64) -> f64 {
    (score - label).powi(2)
}

/// Gradient with respect to `(weights, bias)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl Gradient {
    pub fn zeros(dim: usize) -> Self {
        Gradient {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    /// Adds `coef * d score / d params` for a response with `features`.
    pub(crate) fn accumulate(&mut self, coef: f64, features: &[f64]) {
        for (g, x) in self.weights.iter_mut().zip(features) {
            *g += coef * x;
        }
        self.bias += coef;
    }

    pub(crate) fn add_scaled(&mut self, other: &Gradient, scale: f64) {
        for (g, o) in self.weights.iter_mut().zip(&other.weights) {
            *g += scale * o;
        }
        self.bias += scale * other.bias;
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut v = self.weights.clone();
        v.push(self.bias);
        v
    }
}

fn member_scores(
    params: &ScorerParams,
    group: &PreferenceGroup,
) -> Result<(Vec<f64>, Vec<f64>), DimensionMismatch> {
    let score_all = |members: &[crate::pairs::GroupMember]| {
        members
            .iter()
            .map(|m| params.score(&m.features))
            .collect::<Result<Vec<_>, _>>()
    };
    Ok((score_all(&group.positives)?, score_all(&group.negatives)?))
}

/// Loss of one group under `kind`. Pairwise is the mean over the same pair
/// enumeration as listwise; pointwise losses average over every member
/// with label 1 for positives and 0 for negatives.
pub fn group_loss(
    params: &ScorerParams,
    group: &PreferenceGroup,
    kind: LossKind,
) -> Result<f64, DimensionMismatch> {
    let (pos, neg) = member_scores(params, group)?;
    Ok(match kind {
        LossKind::ListwiseBt => listwise_bt_loss(&pos, &neg).unwrap_or(0.0),
        LossKind::PairwiseBt => {
            let pairs: Vec<f64> = pos
                .iter()
                .flat_map(|p| neg.iter().map(move |n| pairwise_bt_loss(*p, *n)))
                .collect();
            if pairs.is_empty() {
                0.0
            } else {
                pairs.iter().sum::<f64>() / pairs.len() as f64
            }
        }
        LossKind::CrossEntropy | LossKind::Mse => {
            let point = |s: f64, y: f64| match kind {
                LossKind::CrossEntropy => cross_entropy_loss(s, y),
                _ => mse_loss(s, y),
            };
            let total: f64 = pos.iter().map(|s| point(*s, 1.0)).sum::<f64>()
                + neg.iter().map(|s| point(*s, 0.0)).sum::<f64>();
            total / (pos.len() + neg.len()).max(1) as f64
        }
    })
}

/// Analytic gradient of [`group_loss`].
pub fn loss_gradient(
    params: &ScorerParams,
    group: &PreferenceGroup,
    kind: LossKind,
) -> Result<Gradient, DimensionMismatch> {
    let (pos, neg) = member_scores(params, group)?;
    let mut grad = Gradient::zeros(params.weights.len());
    match kind {
        LossKind::ListwiseBt => {
            if pos.is_empty() || neg.is_empty() {
                return Ok(grad);
            }
            let norm = 1.0 / (pos.len() * neg.len()) as f64;
            for (p, pm) in pos.iter().zip(&group.positives) {
                for (n, nm) in neg.iter().zip(&group.negatives) {
                    pair_gradient(&mut grad, norm, *p, *n, pm.features.as_slice(), nm.features.as_slice());
                }
            }
        }
        LossKind::PairwiseBt => {
            let pairs = pos.len() * neg.len();
            if pairs == 0 {
                return Ok(grad);
            }
            // one pair at a time, the way a pairwise trainer sees the data
            for (p, pm) in pos.iter().zip(&group.positives) {
                for (n, nm) in neg.iter().zip(&group.negatives) {
                    let mut pair = Gradient::zeros(params.weights.len());
                    pair_gradient(&mut pair, 1.0, *p, *n, pm.features.as_slice(), nm.features.as_slice());
                    grad.add_scaled(&pair, 1.0 / pairs as f64);
                }
            }
        }
        LossKind::CrossEntropy | LossKind::Mse => {
            let count = (pos.len() + neg.len()).max(1) as f64;
            let members = pos
                .iter()
                .zip(&group.positives)
                .map(|(s, m)| (*s, 1.0, m))
                .chain(neg.iter().zip(&group.negatives).map(|(s, m)| (*s, 0.0, m)));
            for (s, y, m) in members {
                let d = point_derivative(kind, s, y);
                grad.accumulate(d / count, m.features.as_slice());
            }
        }
    }
    Ok(grad)
}

/// Adds `scale` times the gradient of `pairwise_bt_loss` for one pair.
/// Scores enter only through `pos - neg`, so the feature difference carries
/// the whole gradient and the bias derivative is identically zero.
pub(crate) fn pair_gradient(
    grad: &mut Gradient,
    scale: f64,
    pos: f64,
    neg: f64,
    pos_x: &[f64],
    neg_x: &[f64],
) {
    let c = -scale * sigmoid(neg - pos);
    for ((g, xp), xn) in grad.weights.iter_mut().zip(pos_x).zip(neg_x) {
        *g += c * (xp - xn);
    }
}

/// d loss / d score for a pointwise loss.
pub(crate) fn point_derivative(kind: LossKind, score: f64, label: f64) -> f64 {
    match kind {
        LossKind::CrossEntropy => sigmoid(score) - label,
        LossKind::Mse => 2.0 * (score - label),
        _ => unreachable!("pointwise derivative requested for a ranking loss"),
    }
}

/// `softplus(u + e) - softplus(u - e)` without cancellation.
fn softplus_delta(u: f64, e: f64) -> f64 {
    ((2.0 * e).exp_m1() * sigmoid(u - e)).ln_1p()
}

/// `L(θ + h·e_j) - L(θ - h·e_j)` for coordinate `j` of (weights, bias).
///
/// Each loss term is differenced on its own in a cancellation-free form,
/// then the differences are averaged the way [`group_loss`] averages terms.
/// Subtracting two rounded totals instead would lose about ten digits at
/// `h = 1e-6`.
fn central_delta(
    params: &ScorerParams,
    group: &PreferenceGroup,
    kind: LossKind,
    j: usize,
    h: f64,
) -> Result<f64, DimensionMismatch> {
    let (pos, neg) = member_scores(params, group)?;
    let dir = |m: &crate::pairs::GroupMember| {
        if j < params.weights.len() {
            m.features.as_slice()[j]
        } else {
            1.0
        }
    };
    Ok(match kind {
        LossKind::ListwiseBt | LossKind::PairwiseBt => {
            let pairs = pos.len() * neg.len();
            if pairs == 0 {
                return Ok(0.0);
            }
            let mut total = 0.0;
            for (p, pm) in pos.iter().zip(&group.positives) {
                for (n, nm) in neg.iter().zip(&group.negatives) {
                    // term is softplus(neg - pos); its argument moves by h·(x_n - x_p)
                    total += softplus_delta(n - p, h * (dir(nm) - dir(pm)));
                }
            }
            total / pairs as f64
        }
        LossKind::CrossEntropy | LossKind::Mse => {
            let members = pos
                .iter()
                .zip(&group.positives)
                .map(|(s, m)| (*s, 1.0, dir(m)))
                .chain(neg.iter().zip(&group.negatives).map(|(s, m)| (*s, 0.0, dir(m))));
            let mut total = 0.0;
            let mut count = 0usize;
            for (s, y, x) in members {
                let e = h * x;
                total += match kind {
                    LossKind::CrossEntropy => {
                        y * softplus_delta(-s, -e) + (1.0 - y) * softplus_delta(s, e)
                    }
                    // (s + e - y)^2 - (s - e - y)^2
                    _ => 4.0 * e * (s - y),
                };
                count += 1;
            }
            total / count.max(1) as f64
        }
    })
}

/// Largest relative gap `|a - fd| / max(|a|, 1e-12)` between the analytic
/// gradient and central differences with the given step, over every weight
/// and the bias.
pub fn finite_diff_check(
    params: &ScorerParams,
    group: &PreferenceGroup,
    kind: LossKind,
    step: f64,
) -> Result<f64, DimensionMismatch> {
    let analytic = loss_gradient(params, group, kind)?.flatten();
    let mut worst: f64 = 0.0;
    for (j, a) in analytic.iter().enumerate() {
        let numeric = central_delta(params, group, kind, j, step)? / (2.0 * step);
        worst = worst.max((a - numeric).abs() / a.abs().max(1e-12));
    }
    Ok(worst)
}

/// Plain central differences of [`group_loss`]: `(L(θ+h) - L(θ-h)) / 2h`
/// per coordinate. Useful as a rough cross-check of [`finite_diff_check`].
pub fn naive_central_difference(
    params: &ScorerParams,
    group: &PreferenceGroup,
    kind: LossKind,
    step: f64,
) -> Result<Vec<f64>, DimensionMismatch> {
    (0..=params.weights.len())
        .map(|j| {
            let mut plus = params.clone();
            let mut minus = params.clone();
            plus.nudge(j, step);
            minus.nudge(j, -step);
            Ok((group_loss(&plus, group, kind)? - group_loss(&minus, group, kind)?) / (2.0 * step))
        })
        .collect()
}
