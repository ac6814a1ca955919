//! Circle loss over pair similarity scores, its analytic gradient, and the
//! scale/margin curriculum.
//!
//! With scale `g`, margin `m`, optima `O_p = 1 + m`, `O_n = -m` and decision
//! margins `D_p = 1 - m`, `D_n = m`, the loss is
//!
//! ```text
//! L = ln(1 + sum_j exp(g * a_n_j * (s_n_j - D_n)) * sum_i exp(-g * a_p_i * (s_p_i - D_p)))
//! a_p = max(0, O_p - s_p)      a_n = max(0, s_n - O_n)
//! ```
//!
//! evaluated as `softplus(lse_n + lse_p)` so large scales do not overflow.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ObjectiveError {
    #[error("invalid circle loss parameters: {0}")]
    InvalidParams(String),
    #[error("similarity score {0} outside [-1, 1]")]
    ScoreOutOfRange(f64),
    #[error("non-finite similarity score")]
    NonFiniteScore,
    #[error("step {step} outside 0..={total}")]
    StepOutOfRange { step: usize, total: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleLossParams {
    pub scale: f64,
    pub margin: f64,
}

impl CircleLossParams {
    pub fn new(scale: f64, margin: f64) -> Result<Self, ObjectiveError> {
        let p = Self { scale, margin };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ObjectiveError> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(ObjectiveError::InvalidParams(format!("scale {} must be > 0", self.scale)));
        }
        if !(self.margin > 0.0 && self.margin < 0.5) {
            return Err(ObjectiveError::InvalidParams(format!(
                "margin {} must lie in (0, 0.5)",
                self.margin
            )));
        }
        Ok(())
    }

    fn optimum_pos(&self) -> f64 {
        1.0 + self.margin
    }
    fn optimum_neg(&self) -> f64 {
        -self.margin
    }
    fn delta_pos(&self) -> f64 {
        1.0 - self.margin
    }
    fn delta_neg(&self) -> f64 {
        self.margin
    }
}

/// Positive-pair and negative-pair similarity scores of one batch.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SimilarityBatch {
    pub positives: Vec<f64>,
    pub negatives: Vec<f64>,
}

impl SimilarityBatch {
    /// Cosine-range batch: every score must lie in `[-1, 1]`.
    pub fn new(positives: Vec<f64>, negatives: Vec<f64>) -> Result<Self, ObjectiveError> {
        for &s in positives.iter().chain(&negatives) {
            if !s.is_finite() {
                return Err(ObjectiveError::NonFiniteScore);
            }
            if !(-1.0..=1.0).contains(&s) {
                return Err(ObjectiveError::ScoreOutOfRange(s));
            }
        }
        Ok(Self { positives, negatives })
    }

    /// Accepts any finite score, e.g. to evaluate the loss at the optimum
    /// `O_p = 1 + m`, which lies outside the cosine range.
    pub fn from_scores(positives: Vec<f64>, negatives: Vec<f64>) -> Result<Self, ObjectiveError> {
        if positives.iter().chain(&negatives).any(|s| !s.is_finite()) {
            return Err(ObjectiveError::NonFiniteScore);
        }
        Ok(Self { positives, negatives })
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

struct Logits {
    pos: Vec<f64>,
    neg: Vec<f64>,
}

fn logits(batch: &SimilarityBatch, p: &CircleLossParams) -> Logits {
    let g = p.scale;
    let pos = batch
        .positives
        .iter()
        .map(|&s| -g * (p.optimum_pos() - s).max(0.0) * (s - p.delta_pos()))
        .collect();
    let neg = batch
        .negatives
        .iter()
        .map(|&s| g * (s - p.optimum_neg()).max(0.0) * (s - p.delta_neg()))
        .collect();
    Logits { pos, neg }
}

/// Circle loss of a batch. Zero when either side of the batch is empty.
pub fn circle_loss(batch: &SimilarityBatch, params: &CircleLossParams) -> Result<f64, ObjectiveError> {
    params.validate()?;
    if batch.positives.is_empty() || batch.negatives.is_empty() {
        return Ok(0.0);
    }
    let l = logits(batch, params);
    Ok(softplus(log_sum_exp(&l.neg) + log_sum_exp(&l.pos)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleLossGrad {
    pub positives: Vec<f64>,
    pub negatives: Vec<f64>,
}

/// Partial derivatives of [`circle_loss`] with respect to every score. The
/// weights `a_p`, `a_n` are differentiated through, with subgradient 0 where
/// the clamp is active.
pub fn circle_loss_grad(
    batch: &SimilarityBatch,
    params: &CircleLossParams,
) -> Result<CircleLossGrad, ObjectiveError> {
    params.validate()?;
    let zeros = CircleLossGrad {
        positives: vec![0.0; batch.positives.len()],
        negatives: vec![0.0; batch.negatives.len()],
    };
    if batch.positives.is_empty() || batch.negatives.is_empty() {
        return Ok(zeros);
    }
    let g = params.scale;
    let l = logits(batch, params);
    let lse_p = log_sum_exp(&l.pos);
    let lse_n = log_sum_exp(&l.neg);
    let outer = sigmoid(lse_n + lse_p);
    let positives = batch
        .positives
        .iter()
        .zip(&l.pos)
        .map(|(&s, &z)| {
            let alpha = params.optimum_pos() - s;
            if alpha <= 0.0 {
                return 0.0;
            }
            // d/ds [-g (O_p - s)(s - D_p)] = -g (O_p + D_p - 2 s)
            let dz = -g * (params.optimum_pos() + params.delta_pos() - 2.0 * s);
            outer * (z - lse_p).exp() * dz
        })
        .collect();
    let negatives = batch
        .negatives
        .iter()
        .zip(&l.neg)
        .map(|(&s, &z)| {
            let alpha = s - params.optimum_neg();
            if alpha <= 0.0 {
                return 0.0;
            }
            // d/ds [g (s - O_n)(s - D_n)] = g (2 s - O_n - D_n)
            let dz = g * (2.0 * s - params.optimum_neg() - params.delta_neg());
            outer * (z - lse_n).exp() * dz
        })
        .collect();
    Ok(CircleLossGrad { positives, negatives })
}

/// Linear interpolation of scale and margin from `start` (step 0) to `end`
/// (step `total_steps`).
pub fn curriculum_schedule(
    step: usize,
    total_steps: usize,
    start: CircleLossParams,
    end: CircleLossParams,
) -> Result<CircleLossParams, ObjectiveError> {
    if total_steps == 0 || step > total_steps {
        return Err(ObjectiveError::StepOutOfRange { step, total: total_steps });
    }
    let t = step as f64 / total_steps as f64;
    let lerp = |a: f64, b: f64| (1.0 - t) * a + t * b;
    CircleLossParams::new(lerp(start.scale, end.scale), lerp(start.margin, end.margin))
}

/// Starting point of the curriculum: scale 5, margin 0.25.
pub const CURRICULUM_START: CircleLossParams = CircleLossParams { scale: 5.0, margin: 0.25 };
/// End point of the curriculum: scale 16, margin 0.1.
pub const CURRICULUM_END: CircleLossParams = CircleLossParams { scale: 16.0, margin: 0.1 };
