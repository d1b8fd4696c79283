use std::collections::HashMap;

use rand::distributions::{Distribution, Open01};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{NumError, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
struct Param {
    name: String,
    value: Tensor,
}

/// Named, ordered collection of trainable tensors.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Param>,
    by_name: HashMap<String, ParamId>,
}

/// Serialized form of one parameter: shape plus row-major values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub shape: (usize, usize),
    pub values: Vec<f64>,
}

impl TensorRecord {
    pub fn from_tensor(t: &Tensor) -> Self {
        Self {
            shape: t.dim(),
            values: t.iter().copied().collect(),
        }
    }

    pub fn to_tensor(&self) -> Result<Tensor> {
        crate::matrix(self.shape.0, self.shape.1, &self.values)
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Registers a parameter. Names must be unique.
    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(NumError::Invalid(format!("duplicate parameter `{name}`")));
        }
        let id = ParamId(self.params.len());
        self.by_name.insert(name.clone(), id);
        self.params.push(Param { name, value });
        Ok(id)
    }

    /// Registers a `fan_in × fan_out` weight drawn from the Xavier uniform
    /// distribution. Samples lie strictly inside `±sqrt(6 / (fan_in + fan_out))`.
    pub fn xavier<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) -> Result<ParamId> {
        let bound = xavier_bound(fan_in, fan_out);
        let values = (0..fan_in * fan_out)
            .map(|_| {
                let u: f64 = Open01.sample(rng);
                bound * (2.0 * u - 1.0)
            })
            .collect::<Vec<_>>();
        self.insert(name, crate::matrix(fan_in, fan_out, &values)?)
    }

    pub fn zeros(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> Result<ParamId> {
        self.insert(name, Tensor::zeros((rows, cols)))
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> + '_ {
        self.params
            .iter()
            .enumerate()
            .map(|(i, p)| (ParamId(i), p.name.as_str(), &p.value))
    }

    /// Total scalar count.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Snapshot of all values, in id order.
    pub fn snapshot(&self) -> Vec<Tensor> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    pub fn restore(&mut self, values: &[Tensor]) -> Result<()> {
        if values.len() != self.params.len() {
            return Err(NumError::Invalid(format!(
                "snapshot has {} tensors, store has {}",
                values.len(),
                self.params.len()
            )));
        }
        for (p, v) in self.params.iter_mut().zip(values) {
            if p.value.dim() != v.dim() {
                return Err(NumError::Shape {
                    op: "restore",
                    lhs: p.value.dim(),
                    rhs: v.dim(),
                });
            }
            p.value.assign(v);
        }
        Ok(())
    }

    /// Serializable `name → tensor` view, in id order.
    pub fn records(&self) -> Vec<(String, TensorRecord)> {
        self.params
            .iter()
            .map(|p| (p.name.clone(), TensorRecord::from_tensor(&p.value)))
            .collect()
    }

    /// Overwrites values from records keyed by name. Every parameter must be
    /// present with a matching shape.
    pub fn load_records<'a>(
        &mut self,
        records: impl IntoIterator<Item = (&'a str, &'a TensorRecord)>,
    ) -> Result<()> {
        let mut seen = vec![false; self.params.len()];
        for (name, rec) in records {
            let id = self
                .id(name)
                .ok_or_else(|| NumError::Invalid(format!("unknown parameter `{name}`")))?;
            let t = rec.to_tensor()?;
            let slot = &mut self.params[id.0].value;
            if slot.dim() != t.dim() {
                return Err(NumError::Shape {
                    op: "load_records",
                    lhs: slot.dim(),
                    rhs: t.dim(),
                });
            }
            *slot = t;
            seen[id.0] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(NumError::Invalid(format!(
                "missing parameter `{}`",
                self.params[missing].name
            )));
        }
        Ok(())
    }
}

pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}
