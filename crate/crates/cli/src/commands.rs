use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use funcgnn::checkpoint::Checkpoint;
use funcgnn::experiment::{
    ablate, compare_wiring, confusion_csvs, default_ablation_grid, pooled_confusion, repeat_runs, train_one,
    write_run_log, AblationTable, Dataset, MetricsTable, RepeatOutcome, RunResult,
};
use funcgnn::graph::{build_vocabularies, encode_graph_masked, RelationalGraph, Vocabularies};
use funcgnn::hiernet::TIERS;
use funcgnn::ingest::{build_corpus, parse_rows, Rejection};
use funcgnn::stats::{graph_stats, StatsReport};
use funcgnn::Error;
use serde::Serialize;

use crate::config::Config;
use crate::output::Staged;

/// Attaches `path` (and `:line` where known) to a library error.
pub fn diagnose(path: &Path, e: Error) -> anyhow::Error {
    let p = path.display();
    match e {
        Error::Parse { line, message } => anyhow!("{p}:{line}: {message}"),
        Error::Qualifier { line, value } => anyhow!("{p}:{line}: unknown flow qualifier `{value}`"),
        Error::Json(j) => anyhow!("{p}:{}:{}: {j}", j.line(), j.column()),
        other => anyhow!("{p}: {other}"),
    }
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Reads a CSV export or a `graphs.json` written by `ingest`.
pub fn load_graphs(path: &Path) -> anyhow::Result<(Vec<RelationalGraph>, Vec<Rejection>)> {
    let file = fs::File::open(path).with_context(|| format!("{}: cannot open", path.display()))?;
    if is_json(path) {
        let graphs: Vec<RelationalGraph> =
            serde_json::from_reader(BufReader::new(file)).map_err(|e| diagnose(path, e.into()))?;
        for g in &graphs {
            g.validate().map_err(|e| diagnose(path, e))?;
        }
        return Ok((graphs, Vec::new()));
    }
    let rows = parse_rows(BufReader::new(file)).map_err(|e| diagnose(path, e))?;
    build_corpus(&rows).map_err(|e| diagnose(path, e))
}

fn load_dataset(cfg: &Config) -> anyhow::Result<(Dataset, Vec<Rejection>)> {
    let path = cfg.dataset_path()?;
    let (graphs, rejected) = load_graphs(path)?;
    let data = Dataset::new(graphs).map_err(|e| diagnose(path, e))?;
    Ok((data, rejected))
}

fn json_bytes<T: Serialize>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut v = serde_json::to_vec(value)?;
    v.push(b'\n');
    Ok(v)
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> funcgnn::Result<()>) -> anyhow::Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

#[derive(Debug)]
pub struct IngestReport {
    pub graphs: usize,
    pub nodes: usize,
    pub rejected: Vec<Rejection>,
    pub stats: StatsReport,
    pub files: Vec<PathBuf>,
}

/// Writes `graphs.json`, `vocab.json` and `stats.csv` into `out`.
pub fn cmd_ingest(csv: &Path, out: &Path) -> anyhow::Result<IngestReport> {
    let (graphs, rejected) = load_graphs(csv)?;
    let vocab = build_vocabularies(&graphs).map_err(|e| diagnose(csv, e))?;
    let stats = graph_stats(&graphs).map_err(|e| diagnose(csv, e))?;
    let mut staged = Staged::new(out)?;
    staged.write("graphs.json", &json_bytes(&graphs)?)?;
    staged.write("vocab.json", &json_bytes(&vocab)?)?;
    staged.write("stats.csv", &csv_bytes(|b| stats.write_csv(b))?)?;
    Ok(IngestReport {
        graphs: graphs.len(),
        nodes: stats.total_nodes,
        rejected,
        stats,
        files: staged.commit()?,
    })
}

/// Corpus statistics; writes `stats.csv` when `out` is given.
pub fn cmd_stats(dataset: &Path, out: Option<&Path>) -> anyhow::Result<StatsReport> {
    let (graphs, _) = load_graphs(dataset)?;
    let stats = graph_stats(&graphs).map_err(|e| diagnose(dataset, e))?;
    if let Some(out) = out {
        let mut staged = Staged::new(out)?;
        staged.write("stats.csv", &csv_bytes(|b| stats.write_csv(b))?)?;
        staged.commit()?;
    }
    Ok(stats)
}

#[derive(Debug)]
pub struct TrainReport {
    pub architecture: String,
    pub result: RunResult,
    pub rejected: Vec<Rejection>,
    pub files: Vec<PathBuf>,
}

impl TrainReport {
    pub fn initial_val_loss(&self) -> f64 {
        self.result.log.first().map_or(f64::NAN, |e| e.val_loss)
    }
}

/// One training run of `model.kind`: checkpoint, epoch log, test metrics
/// and confusion matrices.
pub fn cmd_train(cfg: &Config) -> anyhow::Result<TrainReport> {
    cfg.validate(true)?;
    let rc = cfg.run_config(&cfg.model.kind)?;
    let (data, rejected) = load_dataset(cfg)?;
    let trained = train_one(&rc, &data)?;
    let r = &trained.result;

    let ckpt = Checkpoint::capture(
        &trained.model,
        &data.vocab,
        rc.mask,
        rc.seed,
        r.best_epoch,
        Some(trained.optimizer.clone()),
    );
    let outcome = RepeatOutcome {
        method: cfg.model.kind.clone(),
        results: vec![r.clone()],
        failures: Vec::new(),
    };
    let table = MetricsTable::from_outcome(&outcome);

    let mut staged = Staged::new(&cfg.output_dir)?;
    staged.write("checkpoint.json", ckpt.to_json()?.as_bytes())?;
    staged.write("run_log.jsonl", &csv_bytes(|b| write_run_log(b, std::slice::from_ref(r)))?)?;
    staged.write("metrics.csv", &csv_bytes(|b| table.write_csv(b))?)?;
    staged.write("topk.csv", &csv_bytes(|b| table.write_top_k_csv(b))?)?;
    for (name, bytes) in confusion_csvs(&r.test, &data.vocab)? {
        staged.write(&name, &bytes)?;
    }
    staged.write("config.toml", cfg.to_toml()?.as_bytes())?;
    Ok(TrainReport {
        architecture: rc.model.describe(),
        result: trained.result,
        rejected,
        files: staged.commit()?,
    })
}

#[derive(Debug)]
pub struct ExperimentReport {
    pub metrics: MetricsTable,
    pub hierarchy: Option<MetricsTable>,
    pub ablation: Option<AblationTable>,
    pub rejected: Vec<Rejection>,
    pub files: Vec<PathBuf>,
}

impl ExperimentReport {
    /// `(section, method, seed, error)` for every failed run.
    pub fn failures(&self) -> Vec<(String, String, u64, String)> {
        let mut out = Vec::new();
        for (section, t) in [("metrics", Some(&self.metrics)), ("hierarchy", self.hierarchy.as_ref())] {
            for (m, f) in t.iter().flat_map(|t| &t.failures) {
                out.push((section.to_string(), m.clone(), f.seed, f.error.clone()));
            }
        }
        for (mask, f) in self.ablation.iter().flat_map(|t| &t.failures) {
            out.push(("ablation".to_string(), mask.to_string(), f.seed, f.error.clone()));
        }
        out
    }
}

fn failures_csv(report: &ExperimentReport) -> Vec<u8> {
    let mut s = String::from("section,method,seed,error\n");
    for (section, m, seed, e) in report.failures() {
        s.push_str(&format!("{section},{m},{seed},\"{}\"\n", e.replace('"', "\"\"")));
    }
    s.into_bytes()
}

fn pooled_confusion_files(
    staged: &mut Staged,
    method: &str,
    results: &[RunResult],
    vocab: &Vocabularies,
) -> anyhow::Result<()> {
    let Some(pooled) = pooled_confusion(results)? else { return Ok(()) };
    for (k, cm) in pooled.iter().enumerate().take(TIERS) {
        let names = vocab.tier(k).terms().to_vec();
        for (suffix, normalized) in [("counts", false), ("normalized", true)] {
            let bytes = csv_bytes(|b| cm.write_csv(b, &names, normalized))?;
            staged.write(&format!("confusion_{method}_tier{}_{suffix}.csv", k + 1), &bytes)?;
        }
    }
    Ok(())
}

/// Repeated runs of every configured method, plus the optional wiring
/// comparison and feature ablation.
pub fn cmd_experiment(cfg: &Config) -> anyhow::Result<ExperimentReport> {
    cfg.validate(true)?;
    let (data, rejected) = load_dataset(cfg)?;
    let mut staged = Staged::new(&cfg.output_dir)?;

    let mut metrics = MetricsTable::default();
    let mut log = Vec::new();
    for method in &cfg.experiment.methods {
        let rc = cfg.run_config(method)?;
        let outcome = repeat_runs(&rc, &data, method, cfg.n_runs, cfg.workers)?;
        metrics.add(&outcome);
        pooled_confusion_files(&mut staged, method, &outcome.results, &data.vocab)?;
        for r in &outcome.results {
            for e in &r.log {
                let line = serde_json::json!({
                    "method": method,
                    "seed": r.seed,
                    "epoch": e.epoch,
                    "lr": e.lr,
                    "train_loss": e.train_loss,
                    "val_loss": e.val_loss,
                });
                log.extend(json_bytes(&line)?);
            }
        }
    }
    let base = cfg.run_config(&cfg.model.kind)?;
    let hierarchy = if cfg.experiment.compare_wiring {
        Some(compare_wiring(&base, &data, cfg.n_runs, cfg.workers)?)
    } else {
        None
    };
    let ablation = if cfg.experiment.ablation {
        let runs = cfg.experiment.ablation_runs.unwrap_or(cfg.n_runs);
        Some(ablate(&base, &data, &default_ablation_grid(), runs, cfg.workers)?)
    } else {
        None
    };

    staged.write("metrics.csv", &csv_bytes(|b| metrics.write_csv(b))?)?;
    staged.write("topk.csv", &csv_bytes(|b| metrics.write_top_k_csv(b))?)?;
    if let Some(h) = &hierarchy {
        staged.write("hierarchy.csv", &csv_bytes(|b| h.write_csv(b))?)?;
    }
    if let Some(a) = &ablation {
        staged.write("ablation.csv", &csv_bytes(|b| a.write_csv(b))?)?;
    }
    staged.write("run_log.jsonl", &log)?;
    staged.write("config.toml", cfg.to_toml()?.as_bytes())?;

    let mut report = ExperimentReport {
        metrics,
        hierarchy,
        ablation,
        rejected,
        files: Vec::new(),
    };
    staged.write("failures.csv", &failures_csv(&report))?;
    report.files = staged.commit()?;
    Ok(report)
}

/// Feature ablation of `model.kind` only.
pub fn cmd_ablate(cfg: &Config) -> anyhow::Result<AblationTable> {
    cfg.validate(true)?;
    let (data, _) = load_dataset(cfg)?;
    let base = cfg.run_config(&cfg.model.kind)?;
    let runs = cfg.experiment.ablation_runs.unwrap_or(cfg.n_runs);
    let table = ablate(&base, &data, &default_ablation_grid(), runs, cfg.workers)?;
    let mut staged = Staged::new(&cfg.output_dir)?;
    staged.write("ablation.csv", &csv_bytes(|b| table.write_csv(b))?)?;
    staged.write("config.toml", cfg.to_toml()?.as_bytes())?;
    staged.commit()?;
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodePrediction {
    pub graph_id: String,
    pub node_id: u64,
    pub tier: usize,
    /// `(label, probability)`, most probable first.
    pub ranked: Vec<(String, f64)>,
}

#[derive(Debug, Clone)]
pub struct PredictArgs {
    pub checkpoint: PathBuf,
    pub graphs: PathBuf,
    pub k: usize,
    /// Vocabulary the graphs were ingested with; `vocab.json` beside the
    /// graph file is used when absent.
    pub vocab: Option<PathBuf>,
}

/// Top-`k` labels per node and tier, from a trained checkpoint.
pub fn cmd_predict(args: &PredictArgs) -> anyhow::Result<Vec<NodePrediction>> {
    if args.k == 0 {
        bail!("k must be at least 1");
    }
    let ckpt = Checkpoint::load(&args.checkpoint).map_err(|e| diagnose(&args.checkpoint, e))?;
    let beside = args.graphs.parent().map(|d| d.join("vocab.json"));
    let vocab_path = args.vocab.clone().or(beside.filter(|p| p.exists()));
    if let Some(p) = vocab_path {
        let file = fs::File::open(&p).with_context(|| format!("{}: cannot open", p.display()))?;
        let v: Vocabularies =
            serde_json::from_reader(BufReader::new(file)).map_err(|e| diagnose(&p, e.into()))?;
        ckpt.check_vocab(&v).map_err(|e| diagnose(&p, e))?;
    }
    let model = ckpt.restore().map_err(|e| diagnose(&args.checkpoint, e))?;
    let (graphs, _) = load_graphs(&args.graphs)?;

    let mut out = Vec::new();
    for g in &graphs {
        let enc = encode_graph_masked(g, &ckpt.vocab, ckpt.mask).map_err(|e| diagnose(&args.graphs, e))?;
        let (_, pred) = funcgnn::experiment::predict(&model, &[&enc])?;
        for tier in 0..TIERS {
            let names = ckpt.vocab.tier(tier);
            for (node, ranked) in enc.node_ids.iter().zip(pred.ranked(tier, args.k)) {
                out.push(NodePrediction {
                    graph_id: g.graph_id.clone(),
                    node_id: *node,
                    tier: tier + 1,
                    ranked: ranked.into_iter().map(|(c, p)| (names.term(c).to_string(), p)).collect(),
                });
            }
        }
    }
    Ok(out)
}

/// JSON lines, one per node and tier.
pub fn write_predictions<W: std::io::Write>(mut w: W, preds: &[NodePrediction]) -> anyhow::Result<()> {
    for p in preds {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
