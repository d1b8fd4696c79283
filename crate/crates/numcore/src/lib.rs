//! Small dense numeric core for graph learning.
//!
//! Values are row-major `f64` matrices ([`Tensor`]); vectors are `1 × n`
//! rows. Differentiable computations are recorded on a [`Tape`] and
//! differentiated in reverse mode with [`Tape::backward`]. Trainable values
//! live in a [`ParamStore`] and are bound onto a tape by id.

mod error;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod optim;
pub mod params;
pub mod rng;
pub mod tape;

pub use error::{NumError, Result};
pub use gradcheck::grad_check;
pub use layers::{Ctx, Linear, Mlp, Mode, LEAKY_SLOPE, DROPOUT_P};
pub use loss::{class_weights, weighted_cross_entropy};
pub use optim::{Adam, CosineSchedule};
pub use params::{ParamId, ParamStore};
pub use tape::{Gradients, Tape, Var};

/// Dense row-major matrix. Rank-1 data is stored as a single row.
pub type Tensor = ndarray::Array2<f64>;

/// Builds a `1 × n` row tensor.
pub fn row(values: &[f64]) -> Tensor {
    Tensor::from_shape_vec((1, values.len()), values.to_vec()).expect("row shape")
}

/// Builds a `rows × cols` tensor from row-major values.
pub fn matrix(rows: usize, cols: usize, values: &[f64]) -> Result<Tensor> {
    Tensor::from_shape_vec((rows, cols), values.to_vec()).map_err(|_| NumError::Shape {
        op: "matrix",
        lhs: (rows, cols),
        rhs: (values.len(), 1),
    })
}
