use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::params::{ParamId, ParamStore};
use crate::tape::{Tape, Var};
use crate::Result;

/// Negative slope used by every LeakyReLU in the model.
pub const LEAKY_SLOPE: f64 = 0.2;
/// Dropout probability applied to hidden activations during training.
pub const DROPOUT_P: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Forward-pass context: train/eval switch plus the dropout random stream.
pub struct Ctx {
    pub mode: Mode,
    pub rng: ChaCha8Rng,
}

impl Ctx {
    pub fn train(rng: ChaCha8Rng) -> Self {
        Self {
            mode: Mode::Train,
            rng,
        }
    }

    /// Evaluation context. The generator is never consulted.
    pub fn eval() -> Self {
        Self {
            mode: Mode::Eval,
            rng: crate::rng::stream(0, 0),
        }
    }

    pub fn is_train(&self) -> bool {
        self.mode == Mode::Train
    }

    pub fn dropout(&mut self, tape: &mut Tape<'_>, x: Var, p: f64) -> Result<Var> {
        let train = self.is_train();
        tape.dropout(x, p, train, &mut self.rng)
    }
}

/// Affine map `x·W + b` with `W: in × out` and optional `b: 1 × out`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    /// Xavier-uniform weight, zero bias.
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        bias: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let weight = store.xavier(format!("{name}.weight"), fan_in, fan_out, rng)?;
        let bias = if bias {
            Some(store.zeros(format!("{name}.bias"), 1, fan_out)?)
        } else {
            None
        };
        Ok(Self {
            weight,
            bias,
            fan_in,
            fan_out,
        })
    }

    pub fn forward(&self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        let w = tape.param(self.weight);
        let y = tape.matmul(x, w)?;
        match self.bias {
            Some(b) => {
                let b = tape.param(b);
                tape.add_row(y, b)
            }
            None => Ok(y),
        }
    }

    pub fn params(&self) -> Vec<ParamId> {
        std::iter::once(self.weight).chain(self.bias).collect()
    }
}

/// Feed-forward stack: LeakyReLU and dropout between layers, raw output.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub slope: f64,
    pub dropout: f64,
}

impl Mlp {
    /// `dims` lists every width from input to output, e.g. `[in, hidden, out]`.
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        dims: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(crate::NumError::Invalid(format!(
                "mlp `{name}` needs at least input and output widths"
            )));
        }
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{name}.{i}"), w[0], w[1], true, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            layers,
            slope: LEAKY_SLOPE,
            dropout: DROPOUT_P,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].fan_in
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out
    }

    pub fn forward(&self, tape: &mut Tape<'_>, x: Var, ctx: &mut Ctx) -> Result<Var> {
        let last = self.layers.len() - 1;
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(tape, h)?;
            if i < last {
                h = tape.leaky_relu(h, self.slope)?;
                h = ctx.dropout(tape, h, self.dropout)?;
            }
        }
        Ok(h)
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.layers.iter().flat_map(Linear::params).collect()
    }
}
