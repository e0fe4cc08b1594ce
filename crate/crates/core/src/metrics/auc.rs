use alloc::vec::Vec;

use super::{check_shape, MetricsError};
use crate::raster::{BinaryMask, ProbabilityMap};

/// Area under the ROC curve in its Mann-Whitney form: the probability that a
/// random positive pixel scores above a random negative one, ties counting half.
pub fn auc(y: &BinaryMask, scores: &ProbabilityMap, fov: Option<&BinaryMask>) -> Result<f64, MetricsError> {
    check_shape(y.dims(), scores.dims())?;
    if let Some(f) = fov {
        check_shape(y.dims(), f.dims())?;
    }
    let pairs: Vec<(f32, bool)> = y
        .data()
        .iter()
        .zip(scores.data())
        .enumerate()
        .filter(|(i, _)| fov.is_none_or(|f| f.data()[*i]))
        .map(|(_, (&label, &s))| (s, label))
        .collect();
    auc_from_pairs(pairs)
}

/// [`auc`] over `(score, is_positive)` pairs. Scores must not be NaN.
pub fn auc_from_pairs(mut pairs: Vec<(f32, bool)>) -> Result<f64, MetricsError> {
    pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let positives = pairs.iter().filter(|p| p.1).count() as u128;
    let negatives = pairs.len() as u128 - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricsError::SingleClass);
    }

    // Twice the Mann-Whitney U, kept integral so the ratio is exact.
    let mut twice_u: u128 = 0;
    let mut negatives_below: u128 = 0;
    let mut i = 0;
    while i < pairs.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0u128, 0u128);
        // -0.0 and 0.0 are the same score.
        while j < pairs.len() && pairs[j].0 == pairs[i].0 {
            if pairs[j].1 {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        twice_u += 2 * pos * negatives_below + pos * neg;
        negatives_below += neg;
        i = j;
    }
    Ok(twice_u as f64 / (2 * positives * negatives) as f64)
}
