//! Segmentation loss and scoring.
//!
//! The training loss is soft Dice plus binary cross-entropy with equal weight.
//! Hard-mask scores (Dice/F1, sensitivity, specificity) come from a confusion
//! count, AUC from a rank statistic, and fold results are summarized as a mean
//! with a 95% confidence half-width.

mod aggregate;
mod auc;

pub use aggregate::{aggregate, student_t_975, AggregateScore, CiMode};
pub use auc::{auc, auc_from_pairs};

use crate::raster::{BinaryMask, ProbabilityMap};

/// Stabilizer in the Dice denominator and the log clamp.
pub const EPSILON: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("shape mismatch: {expected:?} vs {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("threshold must lie strictly between 0 and 1, got {0}")]
    InvalidThreshold(f32),
    #[error("AUC needs at least one positive and one negative pixel")]
    SingleClass,
    #[error("nothing to aggregate")]
    NoValues,
}

pub(crate) fn check_shape(expected: (usize, usize), actual: (usize, usize)) -> Result<(), MetricsError> {
    if expected == actual {
        Ok(())
    } else {
        Err(MetricsError::ShapeMismatch { expected, actual })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub total: f64,
    pub dice_term: f64,
    pub bce_term: f64,
}

/// Soft Dice loss plus mean binary cross-entropy.
///
/// `dice = 1 - 2 sum(y p) / (sum(y + p) + eps)` and
/// `bce = -mean(y ln p' + (1 - y) ln(1 - p'))` with `p' = clamp(p, eps, 1 - eps)`.
pub fn loss(y: &BinaryMask, yhat: &ProbabilityMap) -> Result<LossValue, MetricsError> {
    check_shape(y.dims(), yhat.dims())?;
    let (mut intersection, mut total_mass, mut log_likelihood) = (0.0f64, 0.0f64, 0.0f64);
    for (&label, &p) in y.data().iter().zip(yhat.data()) {
        let p = p as f64;
        let clamped = p.clamp(EPSILON, 1.0 - EPSILON);
        if label {
            intersection += p;
            total_mass += 1.0 + p;
            log_likelihood += libm::log(clamped);
        } else {
            total_mass += p;
            log_likelihood += libm::log(1.0 - clamped);
        }
    }
    let dice_term = 1.0 - 2.0 * intersection / (total_mass + EPSILON);
    let bce_term = -log_likelihood / y.len() as f64;
    Ok(LossValue {
        total: dice_term + bce_term,
        dice_term,
        bce_term,
    })
}

/// Foreground iff the probability is at least `threshold`.
pub fn binarize(yhat: &ProbabilityMap, threshold: f32) -> Result<BinaryMask, MetricsError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(MetricsError::InvalidThreshold(threshold));
    }
    Ok(yhat.grid().map(|&p| p >= threshold))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// `2tp / (2tp + fp + fn)`; equal to F1.
    pub fn dice(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }

    pub fn sensitivity(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn specificity(&self) -> f64 {
        ratio(self.tn, self.tn + self.fp)
    }
}

impl core::ops::Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

impl core::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

// 0/0 counts as perfect agreement on an absent class.
fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

pub fn confusion(y: &BinaryMask, pred: &BinaryMask, fov: Option<&BinaryMask>) -> Result<ConfusionCounts, MetricsError> {
    check_shape(y.dims(), pred.dims())?;
    if let Some(f) = fov {
        check_shape(y.dims(), f.dims())?;
    }
    let mut c = ConfusionCounts::default();
    for (i, (&truth, &guess)) in y.data().iter().zip(pred.data()).enumerate() {
        if fov.is_some_and(|f| !f.data()[i]) {
            continue;
        }
        match (truth, guess) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// `(dice, sensitivity, specificity)`.
pub fn score(counts: &ConfusionCounts) -> (f64, f64, f64) {
    (counts.dice(), counts.sensitivity(), counts.specificity())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreSet {
    pub dice: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub auc: f64,
}

impl ScoreSet {
    pub const PERFECT: Self = Self {
        dice: 1.0,
        sensitivity: 1.0,
        specificity: 1.0,
        auc: 1.0,
    };

    pub fn from_counts(counts: &ConfusionCounts, auc: f64) -> Self {
        let (dice, sensitivity, specificity) = score(counts);
        Self {
            dice,
            sensitivity,
            specificity,
            auc,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.dice, self.sensitivity, self.specificity, self.auc]
    }
}
