//! Confusion counts straight from label vectors.

use funcgnn::metrics::{Averaging, Prf};

pub fn safe_div(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

/// Counts TP/FP/FN per class straight from the label vectors.
pub fn brute_force(t: &[usize], p: &[usize], classes: usize, averaging: Averaging) -> Prf {
    let mut tp = vec![0.0; classes];
    let mut fp = vec![0.0; classes];
    let mut fneg = vec![0.0; classes];
    for c in 0..classes {
        for i in 0..t.len() {
            match (t[i] == c, p[i] == c) {
                (true, true) => tp[c] += 1.0,
                (false, true) => fp[c] += 1.0,
                (true, false) => fneg[c] += 1.0,
                (false, false) => {}
            }
        }
    }
    let f1 = |p: f64, r: f64| safe_div(2.0 * p * r, p + r);
    match averaging {
        Averaging::Micro => {
            let (tp, fp, fneg): (f64, f64, f64) = (tp.iter().sum(), fp.iter().sum(), fneg.iter().sum());
            let p = safe_div(tp, tp + fp);
            let r = safe_div(tp, tp + fneg);
            Prf { precision: p, recall: r, f1: f1(p, r) }
        }
        _ => {
            let mut out = Prf::default();
            let mut norm = 0.0;
            for c in 0..classes {
                let support = tp[c] + fneg[c];
                if support == 0.0 {
                    continue;
                }
                let w = if averaging == Averaging::Macro { 1.0 } else { support };
                let p = safe_div(tp[c], tp[c] + fp[c]);
                let r = safe_div(tp[c], support);
                out.precision += w * p;
                out.recall += w * r;
                out.f1 += w * f1(p, r);
                norm += w;
            }
            Prf {
                precision: safe_div(out.precision, norm),
                recall: safe_div(out.recall, norm),
                f1: safe_div(out.f1, norm),
            }
        }
    }
}
