//! Library side of the `funcgnn` binary: configuration, staged output and
//! one function per subcommand.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{
    cmd_ablate, cmd_experiment, cmd_ingest, cmd_predict, cmd_stats, cmd_train, load_graphs, write_predictions,
    ExperimentReport, IngestReport, NodePrediction, PredictArgs, TrainReport,
};
pub use config::{Config, Overrides};
