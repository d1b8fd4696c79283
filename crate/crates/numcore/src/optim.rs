use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::params::{ParamStore, TensorRecord};
use crate::{NumError, Result, Tensor};

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

/// Serialized optimizer moments, keyed in parameter-id order.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AdamRecord {
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub first_moment: Vec<TensorRecord>,
    pub second_moment: Vec<TensorRecord>,
}

impl Adam {
    pub fn new(store: &ParamStore) -> Self {
        let zeros: Vec<Tensor> = store.iter().map(|(_, _, t)| Tensor::zeros(t.dim())).collect();
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update. Parameters without a gradient are treated as
    /// having a zero gradient.
    pub fn step(&mut self, store: &mut ParamStore, grads: &[Option<Tensor>], lr: f64) -> Result<()> {
        if grads.len() != store.len() || self.m.len() != store.len() {
            return Err(NumError::Invalid(format!(
                "adam: {} gradients for {} parameters",
                grads.len(),
                store.len()
            )));
        }
        for g in grads.iter().flatten() {
            if g.iter().any(|x| !x.is_finite()) {
                return Err(NumError::NonFinite("adam gradient"));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for (i, id) in store.ids().collect::<Vec<_>>().into_iter().enumerate() {
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            let p = store.get_mut(id);
            match &grads[i] {
                Some(g) => {
                    if g.dim() != p.dim() {
                        return Err(NumError::Shape {
                            op: "adam",
                            lhs: p.dim(),
                            rhs: g.dim(),
                        });
                    }
                    ndarray::Zip::from(&mut *m)
                        .and(&mut *v)
                        .and(g)
                        .for_each(|m, v, &g| {
                            *m = b1 * *m + (1.0 - b1) * g;
                            *v = b2 * *v + (1.0 - b2) * g * g;
                        });
                }
                None => {
                    *m *= b1;
                    *v *= b2;
                }
            }
            ndarray::Zip::from(p).and(&*m).and(&*v).for_each(|p, &m, &v| {
                *p -= lr * (m / c1) / ((v / c2).sqrt() + eps);
            });
        }
        Ok(())
    }

    pub fn record(&self) -> AdamRecord {
        AdamRecord {
            step: self.step,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            first_moment: self.m.iter().map(TensorRecord::from_tensor).collect(),
            second_moment: self.v.iter().map(TensorRecord::from_tensor).collect(),
        }
    }

    pub fn from_record(rec: &AdamRecord) -> Result<Self> {
        let m = rec
            .first_moment
            .iter()
            .map(TensorRecord::to_tensor)
            .collect::<Result<Vec<_>>>()?;
        let v = rec
            .second_moment
            .iter()
            .map(TensorRecord::to_tensor)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            beta1: rec.beta1,
            beta2: rec.beta2,
            eps: rec.eps,
            step: rec.step,
            m,
            v,
        })
    }
}

/// `lr(t) = lr_min + ½(lr_max − lr_min)(1 + cos(π t / T))`, clamped to `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosineSchedule {
    pub lr_max: f64,
    pub lr_min: f64,
    pub total_epochs: usize,
}

impl CosineSchedule {
    pub fn new(lr_max: f64, lr_min: f64, total_epochs: usize) -> Self {
        Self {
            lr_max,
            lr_min,
            total_epochs,
        }
    }

    pub fn lr(&self, epoch: usize) -> f64 {
        if self.total_epochs == 0 {
            return self.lr_max;
        }
        let t = epoch.min(self.total_epochs) as f64 / self.total_epochs as f64;
        self.lr_min + 0.5 * (self.lr_max - self.lr_min) * (1.0 + (PI * t).cos())
    }
}

impl Default for CosineSchedule {
    fn default() -> Self {
        Self::new(1e-3, 1e-5, 500)
    }
}
