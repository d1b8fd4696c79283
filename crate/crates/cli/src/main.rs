use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use funcgnn_cli::{
    cmd_ablate, cmd_experiment, cmd_ingest, cmd_predict, cmd_stats, cmd_train, write_predictions, Config,
    Overrides, PredictArgs,
};

#[derive(Parser)]
#[command(name = "funcgnn", version, about = "Component-function classification on assembly-flow graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a CSV export into graphs, vocabularies and statistics.
    Ingest {
        csv: PathBuf,
        #[arg(long, env = "FUNCGNN_OUTPUT_ROOT")]
        out: PathBuf,
    },
    /// Print corpus statistics.
    Stats {
        dataset: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one model and save its best checkpoint.
    Train(RunArgs),
    /// Repeated runs of every method, wiring comparison and ablation.
    Experiment(RunArgs),
    /// Feature-ablation grid for the configured model.
    Ablate(RunArgs),
    /// Top-k labels per node and tier from a checkpoint.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        graphs: PathBuf,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Write JSON lines here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, env = "FUNCGNN_OUTPUT_ROOT")]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
}

impl RunArgs {
    fn resolve(&self) -> anyhow::Result<Config> {
        Config::resolve(
            self.config.as_deref(),
            &Overrides {
                dataset: self.dataset.clone(),
                output_dir: self.out.clone(),
                seed: self.seed,
                workers: self.workers,
                n_runs: self.runs,
                max_epochs: self.max_epochs,
            },
        )
    }
}

fn report_files(files: &[PathBuf]) {
    for f in files {
        eprintln!("wrote {}", f.display());
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Ingest { csv, out } => {
            let r = cmd_ingest(&csv, &out)?;
            for rej in &r.rejected {
                eprintln!("skipped system `{}`: {}", rej.system, rej.reason);
            }
            println!("{}", r.stats.summary());
            report_files(&r.files);
        }
        Command::Stats { dataset, out } => {
            let s = cmd_stats(&dataset, out.as_deref())?;
            println!("{}", s.summary());
        }
        Command::Train(args) => {
            let cfg = args.resolve()?;
            cfg.validate(true)?;
            let rc = cfg.run_config(&cfg.model.kind)?;
            println!("architecture: {}", rc.model.describe());
            let r = cmd_train(&cfg)?;
            let res = &r.result;
            println!(
                "epochs {}  best epoch {}  val loss {:.6} -> {:.6}",
                res.epochs_run,
                res.best_epoch,
                r.initial_val_loss(),
                res.best_val_loss
            );
            let f1 = res.test.micro_f1();
            println!("test micro F1  tier1 {:.3}  tier2 {:.3}  tier3 {:.3}", f1[0], f1[1], f1[2]);
            report_files(&r.files);
        }
        Command::Experiment(args) => {
            let cfg = args.resolve()?;
            let r = cmd_experiment(&cfg)?;
            print!("{}", r.metrics.summary());
            if let Some(h) = &r.hierarchy {
                print!("{}", h.summary());
            }
            for (section, m, seed, e) in r.failures() {
                eprintln!("{section}: {m} seed {seed} failed: {e}");
            }
            report_files(&r.files);
        }
        Command::Ablate(args) => {
            let cfg = args.resolve()?;
            let t = cmd_ablate(&cfg)?;
            println!("{} ablation rows", t.rows.len());
        }
        Command::Predict {
            checkpoint,
            graphs,
            k,
            vocab,
            out,
        } => {
            let preds = cmd_predict(&PredictArgs {
                checkpoint,
                graphs,
                k,
                vocab,
            })?;
            match out {
                Some(path) => {
                    let partial = path.with_extension("jsonl.partial");
                    let f = fs::File::create(&partial).with_context(|| format!("{}: cannot create", partial.display()))?;
                    write_predictions(io::BufWriter::new(f), &preds)?;
                    fs::rename(&partial, &path)?;
                }
                None => {
                    let stdout = io::stdout();
                    let mut lock = stdout.lock();
                    write_predictions(&mut lock, &preds)?;
                    lock.flush()?;
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
