use std::sync::Arc;

use crate::tape::{Tape, Var};
use crate::{NumError, Result};

/// Inverse-frequency class weights.
///
/// `w_c = N / (C_present · max(count_c, 1))` where `N` is the total count and
/// `C_present` the number of classes that occur at least once. Absent classes
/// get the weight of a class seen once, so they stay finite.
pub fn class_weights(counts: &[usize]) -> Result<Vec<f64>> {
    let total: usize = counts.iter().sum();
    let present = counts.iter().filter(|&&c| c > 0).count();
    if total == 0 {
        return Err(NumError::Weight("all class counts are zero".into()));
    }
    Ok(counts
        .iter()
        .map(|&c| total as f64 / (present as f64 * c.max(1) as f64))
        .collect())
}

/// Mean over rows of `w[y_i] · (−log softmax(logits_i)[y_i])`.
pub fn weighted_cross_entropy(
    tape: &mut Tape<'_>,
    logits: Var,
    targets: &[usize],
    weights: &[f64],
) -> Result<Var> {
    let n = targets.len();
    let coef = vec![1.0 / n.max(1) as f64; n];
    weighted_cross_entropy_scaled(tape, logits, targets, weights, &coef)
}

/// Weighted cross-entropy with an extra per-row coefficient:
/// `Σ_i coef_i · w[y_i] · (−log softmax(logits_i)[y_i])`.
///
/// Used to express per-graph means inside a batch of concatenated graphs.
pub fn weighted_cross_entropy_scaled(
    tape: &mut Tape<'_>,
    logits: Var,
    targets: &[usize],
    weights: &[f64],
    coef: &[f64],
) -> Result<Var> {
    let classes = tape.shape(logits).1;
    if weights.len() != classes {
        return Err(NumError::Shape {
            op: "weighted_cross_entropy",
            lhs: tape.shape(logits),
            rhs: (1, weights.len()),
        });
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
        return Err(NumError::Weight(format!("class weight {w} is not positive")));
    }
    if coef.len() != targets.len() {
        return Err(NumError::Shape {
            op: "weighted_cross_entropy",
            lhs: (targets.len(), 1),
            rhs: (coef.len(), 1),
        });
    }
    let mut row_weight = Vec::with_capacity(targets.len());
    for (&t, &c) in targets.iter().zip(coef) {
        if t >= classes {
            return Err(NumError::Label { label: t, classes });
        }
        row_weight.push(c * weights[t]);
    }
    let targets: Arc<[usize]> = targets.into();
    tape.cross_entropy(logits, targets, row_weight)
}
