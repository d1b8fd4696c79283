use crate::params::{ParamId, ParamStore};
use crate::tape::{Tape, Var};
use crate::Result;

/// Absolute differences at or below this count as agreement.
pub const ABS_FLOOR: f64 = 1e-8;

/// Compares reverse-mode gradients of `f` against central finite differences
/// for every scalar of the listed parameters. Returns the largest relative
/// error `|analytic − numeric| / max(|analytic|, |numeric|)` over entries
/// whose absolute difference exceeds [`ABS_FLOOR`].
///
/// `f` must be deterministic (build it in eval mode or with a fixed dropout
/// stream re-seeded on every call).
pub fn grad_check<F>(store: &mut ParamStore, params: &[ParamId], eps: f64, f: F) -> Result<f64>
where
    F: Fn(&mut Tape<'_>) -> Result<Var>,
{
    let analytic: Vec<_> = {
        let mut tape = Tape::new(store);
        let loss = f(&mut tape)?;
        let grads = tape.backward(loss)?;
        params
            .iter()
            .map(|&id| {
                grads
                    .param(id)
                    .cloned()
                    .unwrap_or_else(|| crate::Tensor::zeros(store.get(id).dim()))
            })
            .collect()
    };

    let eval = |store: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new(store);
        let loss = f(&mut tape)?;
        Ok(tape.scalar(loss))
    };

    let mut worst = 0.0f64;
    for (&id, grad) in params.iter().zip(&analytic) {
        let (rows, cols) = store.get(id).dim();
        for r in 0..rows {
            for c in 0..cols {
                let orig = store.get(id)[[r, c]];
                store.get_mut(id)[[r, c]] = orig + eps;
                let plus = eval(store)?;
                store.get_mut(id)[[r, c]] = orig - eps;
                let minus = eval(store)?;
                store.get_mut(id)[[r, c]] = orig;
                let numeric = (plus - minus) / (2.0 * eps);
                let a = grad[[r, c]];
                let diff = (a - numeric).abs();
                if diff > ABS_FLOOR {
                    worst = worst.max(diff / a.abs().max(numeric.abs()));
                }
            }
        }
    }
    Ok(worst)
}
