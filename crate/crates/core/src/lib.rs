//! Component-function classification on product assembly-flow graphs.

pub mod checkpoint;
pub mod error;
pub mod experiment;
pub mod gnn;
pub mod graph;
pub mod hiernet;
pub mod ingest;
pub mod metrics;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};
