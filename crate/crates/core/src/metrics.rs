//! Precision, recall and F1 under micro, macro and weighted averaging, plus
//! confusion matrices.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    Micro,
    Macro,
    Weighted,
}

impl Averaging {
    pub const ALL: [Averaging; 3] = [Averaging::Micro, Averaging::Macro, Averaging::Weighted];

    pub fn name(self) -> &'static str {
        match self {
            Averaging::Micro => "micro",
            Averaging::Macro => "macro",
            Averaging::Weighted => "weighted",
        }
    }
}

impl fmt::Display for Averaging {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Averaging {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Averaging::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown averaging `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Rows are ground truth, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: usize,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![vec![0; classes]; classes],
        }
    }

    pub fn from_labels(y_true: &[usize], y_pred: &[usize], classes: usize) -> Result<Self> {
        check(y_true, y_pred, classes)?;
        let mut m = Self::new(classes);
        for (&t, &p) in y_true.iter().zip(y_pred) {
            m.counts[t][p] += 1;
        }
        Ok(m)
    }

    /// Adds the counts of another matrix of the same size.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::Shape(format!(
                "confusion matrices of {} and {} classes",
                self.classes, other.classes
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|c| self.counts[c][c]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        let t = self.total();
        if t == 0 {
            0.0
        } else {
            self.trace() as f64 / t as f64
        }
    }

    /// Each row divided by its sum; empty rows stay zero.
    pub fn normalized(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let s: u64 = row.iter().sum();
                row.iter()
                    .map(|&c| if s == 0 { 0.0 } else { c as f64 / s as f64 })
                    .collect()
            })
            .collect()
    }

    /// Per-class `(precision, recall, f1, support)`.
    pub fn per_class(&self) -> Vec<(Prf, u64)> {
        (0..self.classes)
            .map(|c| {
                let tp = self.counts[c][c] as usize;
                let support: u64 = self.counts[c].iter().sum();
                let predicted: u64 = self.counts.iter().map(|r| r[c]).sum();
                let p = ratio(tp, predicted as usize);
                let r = ratio(tp, support as usize);
                (
                    Prf {
                        precision: p,
                        recall: r,
                        f1: f1(p, r),
                    },
                    support,
                )
            })
            .collect()
    }

    /// Averaged scores. Macro averages only over classes present in the
    /// ground truth; weighted uses ground-truth support.
    pub fn scores(&self, averaging: Averaging) -> Prf {
        match averaging {
            Averaging::Micro => {
                let tp = self.trace() as usize;
                let total = self.total() as usize;
                // Every misprediction is one false positive and one false negative.
                let p = ratio(tp, total);
                let r = ratio(tp, total);
                Prf {
                    precision: p,
                    recall: r,
                    f1: f1(p, r),
                }
            }
            Averaging::Macro | Averaging::Weighted => {
                let rows = self.per_class();
                let mut acc = Prf::default();
                let mut norm = 0.0;
                for (prf, support) in rows {
                    if support == 0 {
                        continue;
                    }
                    let w = if averaging == Averaging::Macro { 1.0 } else { support as f64 };
                    acc.precision += w * prf.precision;
                    acc.recall += w * prf.recall;
                    acc.f1 += w * prf.f1;
                    norm += w;
                }
                if norm > 0.0 {
                    acc.precision /= norm;
                    acc.recall /= norm;
                    acc.f1 /= norm;
                }
                acc
            }
        }
    }

    /// CSV with header `truth,<class names…>`; one row per true class.
    pub fn write_csv<W: std::io::Write>(&self, w: W, names: &[String], normalized: bool) -> Result<()> {
        if names.len() != self.classes {
            return Err(Error::Shape(format!("{} names for {} classes", names.len(), self.classes)));
        }
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["truth".to_string()];
        header.extend(names.iter().cloned());
        wr.write_record(&header)?;
        let norm = self.normalized();
        for c in 0..self.classes {
            let mut rec = vec![names[c].clone()];
            if normalized {
                rec.extend(norm[c].iter().map(|v| format!("{v:.6}")));
            } else {
                rec.extend(self.counts[c].iter().map(u64::to_string));
            }
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn check(y_true: &[usize], y_pred: &[usize], classes: usize) -> Result<()> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Shape(format!(
            "{} true labels vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if let Some(bad) = y_true.iter().chain(y_pred).find(|&&y| y >= classes) {
        return Err(Error::Label(format!("label {bad} outside {classes} classes")));
    }
    Ok(())
}

pub fn metrics(y_true: &[usize], y_pred: &[usize], classes: usize, averaging: Averaging) -> Result<Prf> {
    Ok(ConfusionMatrix::from_labels(y_true, y_pred, classes)?.scores(averaging))
}
