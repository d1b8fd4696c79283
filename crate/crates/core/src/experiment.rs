//! Training loop, repeated-split protocol, ablations and result tables.

use std::io::Write;

use funcgnn_numcore::optim::AdamRecord;
use funcgnn_numcore::rng::{stream, STREAM_INIT, STREAM_TRAIN};
use funcgnn_numcore::{class_weights, Adam, CosineSchedule, Ctx, NumError, Tape, Tensor};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::{EncoderSpec, GraphBatch, LayerKind};
use crate::graph::{build_vocabularies, encode_graph_masked, EdgeMask, EncodedGraph, FeatureMask, NodeMask, RelationalGraph, Vocabularies};
use crate::hiernet::{HierModel, ModelSpec, TierPrediction, Wiring, TIERS};
use crate::ingest::{split_graphs, SplitAssignment, DEFAULT_FRACTIONS};
use crate::metrics::{Averaging, ConfusionMatrix, Prf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub model: ModelSpec,
    pub lr_max: f64,
    pub lr_min: f64,
    pub max_epochs: usize,
    pub patience: usize,
    /// Graphs per optimizer step.
    pub batch_size: usize,
    pub fractions: (f64, f64, f64),
    pub mask: FeatureMask,
    /// Largest `k` reported for top-k hit rates.
    pub top_k: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            model: ModelSpec::tuned(LayerKind::Sage),
            lr_max: 1e-3,
            lr_min: 1e-5,
            max_epochs: 500,
            patience: 50,
            batch_size: 16,
            fractions: DEFAULT_FRACTIONS,
            mask: FeatureMask::FULL,
            top_k: 3,
        }
    }
}

impl RunConfig {
    /// Every violated constraint, not only the first.
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        if let Err(Error::Config(m)) = self.model.validate() {
            p.push(m);
        }
        if !(self.lr_max > 0.0 && self.lr_max.is_finite()) {
            p.push(format!("lr_max must be positive, got {}", self.lr_max));
        }
        if !(self.lr_min >= 0.0 && self.lr_min <= self.lr_max) {
            p.push(format!("lr_min must lie in [0, lr_max], got {}", self.lr_min));
        }
        if self.max_epochs == 0 {
            p.push("max_epochs must be at least 1".into());
        }
        if self.patience == 0 {
            p.push("patience must be at least 1".into());
        }
        if self.batch_size == 0 {
            p.push("batch_size must be at least 1".into());
        }
        let (a, b, c) = self.fractions;
        if [a, b, c].iter().any(|f| !(0.0..=1.0).contains(f)) || (a + b + c - 1.0).abs() > 1e-9 {
            p.push(format!("split fractions {a}/{b}/{c} must be in [0, 1] and sum to 1"));
        }
        if self.top_k == 0 {
            p.push("top_k must be at least 1".into());
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p.join("; ")))
        }
    }

    pub fn schedule(&self) -> CosineSchedule {
        CosineSchedule::new(self.lr_max, self.lr_min, self.max_epochs)
    }
}

/// A corpus with vocabularies fixed over all of its graphs.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub graphs: Vec<RelationalGraph>,
    pub vocab: Vocabularies,
}

impl Dataset {
    pub fn new(graphs: Vec<RelationalGraph>) -> Result<Self> {
        let vocab = build_vocabularies(&graphs)?;
        Ok(Self { graphs, vocab })
    }

    pub fn encode(&self, mask: FeatureMask) -> Result<Vec<EncodedGraph>> {
        self.graphs
            .iter()
            .map(|g| encode_graph_masked(g, &self.vocab, mask))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Scores of one model on one set of graphs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub nodes: usize,
    /// `scores[tier][averaging]` in [`Averaging::ALL`] order.
    pub scores: [[Prf; 3]; TIERS],
    pub confusion: [ConfusionMatrix; TIERS],
    /// `top_k[tier][k - 1]` is the top-`k` hit rate.
    pub top_k: [Vec<f64>; TIERS],
}

impl Evaluation {
    pub fn score(&self, tier: usize, averaging: Averaging) -> Prf {
        self.scores[tier][averaging as usize]
    }

    pub fn micro_f1(&self) -> [f64; TIERS] {
        std::array::from_fn(|k| self.score(k, Averaging::Micro).f1)
    }
}

/// Scores a prediction against the labels of `batch`.
pub fn evaluate_prediction(pred: &TierPrediction, batch: &GraphBatch, classes: [usize; TIERS], top_k: usize) -> Result<Evaluation> {
    let mut scores = [[Prf::default(); 3]; TIERS];
    let mut confusion = Vec::with_capacity(TIERS);
    let mut hits: [Vec<f64>; TIERS] = Default::default();
    for k in 0..TIERS {
        let truth = &batch.labels[k];
        let cm = ConfusionMatrix::from_labels(truth, &pred.predicted(k), classes[k])?;
        for (a, avg) in Averaging::ALL.into_iter().enumerate() {
            scores[k][a] = cm.scores(avg);
        }
        let micro = scores[k][0];
        let acc = cm.accuracy();
        assert!(
            (micro.precision - acc).abs() < 1e-12 && (micro.recall - acc).abs() < 1e-12 && (micro.f1 - acc).abs() < 1e-12,
            "micro scores {micro:?} differ from accuracy {acc}"
        );
        for kk in 1..=top_k {
            hits[k].push(if kk >= classes[k] { 1.0 } else { pred.top_k_rate(k, kk, truth)? });
        }
        confusion.push(cm);
    }
    Ok(Evaluation {
        nodes: batch.num_nodes,
        scores,
        confusion: confusion.try_into().expect("three tiers"),
        top_k: hits,
    })
}

pub fn evaluate(model: &HierModel, graphs: &[&EncodedGraph], top_k: usize) -> Result<Evaluation> {
    let batch = GraphBatch::from_graphs(graphs)?;
    let pred = model.forward_infer(&batch)?;
    evaluate_prediction(&pred, &batch, model.classes, top_k)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub seed: u64,
    pub split: SplitAssignment,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub log: Vec<EpochLog>,
    pub train: Evaluation,
    pub val: Evaluation,
    pub test: Evaluation,
}

/// A finished run together with its best-validation model.
#[derive(Debug, Clone)]
pub struct TrainedRun {
    pub result: RunResult,
    pub model: HierModel,
    pub optimizer: AdamRecord,
}

fn diverged(epoch: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Num(NumError::NonFinite(op)) => Error::Diverged {
            epoch,
            reason: format!("non-finite value in {op}"),
        },
        other => other,
    }
}

/// Per-tier inverse-frequency weights from the labels of `graphs`.
pub fn tier_weights(graphs: &[&EncodedGraph], classes: [usize; TIERS]) -> Result<[Vec<f64>; TIERS]> {
    let mut out: [Vec<f64>; TIERS] = Default::default();
    for k in 0..TIERS {
        let mut counts = vec![0usize; classes[k]];
        for g in graphs {
            for &y in &g.labels[k] {
                counts[y] += 1;
            }
        }
        out[k] = class_weights(&counts)?;
    }
    Ok(out)
}

/// Teacher-forced loss in evaluation mode.
pub fn eval_loss(model: &HierModel, batch: &GraphBatch, weights: &[Vec<f64>; TIERS]) -> Result<f64> {
    let mut tape = Tape::new(&model.store);
    let out = model.forward_train(&mut tape, batch, weights, &mut Ctx::eval())?;
    Ok(tape.scalar(out.loss))
}

/// Trains one model on a fresh split and evaluates it on the test graphs.
pub fn train_one(cfg: &RunConfig, data: &Dataset) -> Result<TrainedRun> {
    cfg.validate()?;
    let encoded = data.encode(cfg.mask)?;
    let split = split_graphs(&data.graphs, cfg.seed, cfg.fractions)?;
    let index: std::collections::HashMap<&str, usize> =
        data.graphs.iter().enumerate().map(|(i, g)| (g.graph_id.as_str(), i)).collect();
    let pick = |ids: &[String]| -> Vec<&EncodedGraph> { ids.iter().map(|id| &encoded[index[id.as_str()]]).collect() };
    let (train, val, test) = (pick(&split.train), pick(&split.val), pick(&split.test));
    train_split(cfg, data, split.clone(), &train, &val, &test)
}

/// Training on an explicit split of already encoded graphs.
pub fn train_split(
    cfg: &RunConfig,
    data: &Dataset,
    split: SplitAssignment,
    train: &[&EncodedGraph],
    val: &[&EncodedGraph],
    test: &[&EncodedGraph],
) -> Result<TrainedRun> {
    cfg.validate()?;
    let classes = data.vocab.class_counts();
    let (d_x, d_e) = (cfg.mask.node_dim(&data.vocab), cfg.mask.edge_dim(&data.vocab));
    let mut model = HierModel::new(cfg.model.clone(), d_x, d_e, classes, &mut stream(cfg.seed, STREAM_INIT))?;
    let weights = tier_weights(train, classes)?;
    let val_batch = GraphBatch::from_graphs(val)?;
    let schedule = cfg.schedule();
    let mut adam = Adam::new(&model.store);
    let mut ctx = Ctx::train(stream(cfg.seed, STREAM_TRAIN));

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = Vec::new();
    let mut best = (f64::INFINITY, 0usize, model.store.snapshot(), adam.record());
    for epoch in 0..cfg.max_epochs {
        let lr = schedule.lr(epoch);
        order.shuffle(&mut ctx.rng);
        let mut total = 0.0;
        let mut steps = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let graphs: Vec<&EncodedGraph> = chunk.iter().map(|&i| train[i]).collect();
            let batch = GraphBatch::from_graphs(&graphs)?;
            let grads = {
                let mut tape = Tape::new(&model.store);
                let out = model
                    .forward_train(&mut tape, &batch, &weights, &mut ctx)
                    .map_err(diverged(epoch))?;
                let loss = tape.scalar(out.loss);
                if !loss.is_finite() {
                    return Err(Error::Diverged {
                        epoch,
                        reason: format!("training loss {loss}"),
                    });
                }
                total += loss;
                steps += 1;
                tape.backward(out.loss)?.into_params()
            };
            adam.step(&mut model.store, &grads, lr).map_err(|e| diverged(epoch)(e.into()))?;
        }
        let val_loss = eval_loss(&model, &val_batch, &weights).map_err(diverged(epoch))?;
        if !val_loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                reason: format!("validation loss {val_loss}"),
            });
        }
        log.push(EpochLog {
            epoch,
            lr,
            train_loss: total / steps.max(1) as f64,
            val_loss,
        });
        if val_loss < best.0 {
            best = (val_loss, epoch, model.store.snapshot(), adam.record());
        } else if epoch - best.1 >= cfg.patience {
            break;
        }
    }
    let epochs_run = log.len();
    let (best_val_loss, best_epoch, params, optimizer) = best;
    model.store.restore(&params)?;

    let result = RunResult {
        seed: cfg.seed,
        split,
        epochs_run,
        best_epoch,
        best_val_loss,
        log,
        train: evaluate(&model, train, cfg.top_k)?,
        val: evaluate(&model, val, cfg.top_k)?,
        test: evaluate(&model, test, cfg.top_k)?,
    };
    Ok(TrainedRun {
        result,
        model,
        optimizer,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunFailure {
    pub seed: u64,
    pub error: String,
}

/// Results of `n` independent runs of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepeatOutcome {
    pub method: String,
    pub results: Vec<RunResult>,
    pub failures: Vec<RunFailure>,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Run `i` uses seed `cfg.seed + i`. Failed runs are reported, not fatal.
/// `workers = 0` uses one thread per core.
pub fn repeat_runs(cfg: &RunConfig, data: &Dataset, method: &str, n_runs: usize, workers: usize) -> Result<RepeatOutcome> {
    if n_runs == 0 {
        return Err(Error::Config("n_runs must be at least 1".into()));
    }
    cfg.validate()?;
    let outcomes: Vec<(u64, Result<RunResult>)> = pool(workers)?.install(|| {
        (0..n_runs as u64)
            .into_par_iter()
            .map(|i| {
                let run = RunConfig {
                    seed: cfg.seed.wrapping_add(i),
                    ..cfg.clone()
                };
                (run.seed, train_one(&run, data).map(|t| t.result))
            })
            .collect()
    });
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (seed, r) in outcomes {
        match r {
            Ok(r) => results.push(r),
            Err(e) => failures.push(RunFailure {
                seed,
                error: e.to_string(),
            }),
        }
    }
    Ok(RepeatOutcome {
        method: method.to_string(),
        results,
        failures,
    })
}

/// Mean and sample standard deviation; the deviation of one value is 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub method: String,
    /// 1-based.
    pub tier: usize,
    pub averaging: Averaging,
    pub runs: Vec<Prf>,
}

impl MetricsRow {
    pub fn precision(&self) -> (f64, f64) {
        mean_std(&self.runs.iter().map(|p| p.precision).collect::<Vec<_>>())
    }

    pub fn recall(&self) -> (f64, f64) {
        mean_std(&self.runs.iter().map(|p| p.recall).collect::<Vec<_>>())
    }

    pub fn f1(&self) -> (f64, f64) {
        mean_std(&self.runs.iter().map(|p| p.f1).collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopKRow {
    pub method: String,
    pub tier: usize,
    pub k: usize,
    pub runs: Vec<f64>,
}

/// Test-set metrics per method × tier × averaging, plus top-k hit rates.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
    pub top_k: Vec<TopKRow>,
    pub completed: Vec<(String, usize)>,
    pub failures: Vec<(String, RunFailure)>,
}

pub const METRICS_HEADER: [&str; 11] = [
    "method",
    "tier",
    "averaging",
    "runs",
    "precision_mean",
    "precision_std",
    "recall_mean",
    "recall_std",
    "f1_mean",
    "f1_std",
    "failed_runs",
];

pub const TOPK_HEADER: [&str; 6] = ["method", "tier", "k", "runs", "hit_rate_mean", "hit_rate_std"];

fn fmt6(x: f64) -> String {
    format!("{x:.6}")
}

impl MetricsTable {
    pub fn add(&mut self, outcome: &RepeatOutcome) {
        let m = &outcome.method;
        for tier in 0..TIERS {
            for (a, avg) in Averaging::ALL.into_iter().enumerate() {
                self.rows.push(MetricsRow {
                    method: m.clone(),
                    tier: tier + 1,
                    averaging: avg,
                    runs: outcome.results.iter().map(|r| r.test.scores[tier][a]).collect(),
                });
            }
            let kmax = outcome.results.first().map_or(0, |r| r.test.top_k[tier].len());
            for k in 1..=kmax {
                self.top_k.push(TopKRow {
                    method: m.clone(),
                    tier: tier + 1,
                    k,
                    runs: outcome.results.iter().map(|r| r.test.top_k[tier][k - 1]).collect(),
                });
            }
        }
        self.completed.push((m.clone(), outcome.results.len()));
        self.failures
            .extend(outcome.failures.iter().map(|f| (m.clone(), f.clone())));
    }

    pub fn from_outcome(outcome: &RepeatOutcome) -> Self {
        let mut t = Self::default();
        t.add(outcome);
        t
    }

    pub fn row(&self, method: &str, tier: usize, averaging: Averaging) -> Option<&MetricsRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.tier == tier && r.averaging == averaging)
    }

    fn failed(&self, method: &str) -> usize {
        self.failures.iter().filter(|(m, _)| m == method).count()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(METRICS_HEADER)?;
        for r in &self.rows {
            let (pm, ps) = r.precision();
            let (rm, rs) = r.recall();
            let (fm, fs) = r.f1();
            wr.write_record([
                r.method.clone(),
                r.tier.to_string(),
                r.averaging.to_string(),
                r.runs.len().to_string(),
                fmt6(pm),
                fmt6(ps),
                fmt6(rm),
                fmt6(rs),
                fmt6(fm),
                fmt6(fs),
                self.failed(&r.method).to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn write_top_k_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(TOPK_HEADER)?;
        for r in &self.top_k {
            let (m, s) = mean_std(&r.runs);
            wr.write_record([
                r.method.clone(),
                r.tier.to_string(),
                r.k.to_string(),
                r.runs.len().to_string(),
                fmt6(m),
                fmt6(s),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Human-readable `mean ± std` F1 summary.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for r in self.rows.iter().filter(|r| r.averaging == Averaging::Micro) {
            let (m, d) = r.f1();
            s.push_str(&format!("{:<14} tier {}  micro F1 {:.3} ± {:.3}  ({} runs)\n", r.method, r.tier, m, d, r.runs.len()));
        }
        s
    }
}

/// The feature-removal grid: each node attribute alone with all edges, all
/// nodes with each edge variant, and the featureless floor.
pub fn default_ablation_grid() -> Vec<FeatureMask> {
    let mut grid = Vec::new();
    for node in [
        NodeMask::COMPONENT,
        NodeMask::SYSTEM_NAME,
        NodeMask::SYSTEM_TYPE,
        NodeMask::MATERIAL,
        NodeMask::NONE,
    ] {
        grid.push(FeatureMask { node, edge: EdgeMask::All });
    }
    for edge in [EdgeMask::FlowOnly, EdgeMask::AssemblyOnly, EdgeMask::Featureless, EdgeMask::MaterialFlowAssembly] {
        grid.push(FeatureMask { node: NodeMask::ALL, edge });
    }
    grid.push(FeatureMask::FULL);
    grid.push(FeatureMask {
        node: NodeMask::NONE,
        edge: EdgeMask::Featureless,
    });
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub mask: FeatureMask,
    pub tier: usize,
    pub averaging: Averaging,
    pub f1_runs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
    pub failures: Vec<(FeatureMask, RunFailure)>,
}

pub const ABLATION_HEADER: [&str; 8] = ["node", "edge", "tier", "averaging", "runs", "f1_mean", "f1_std", "failed_runs"];

impl AblationTable {
    pub fn f1(&self, mask: FeatureMask, tier: usize, averaging: Averaging) -> Option<(f64, f64)> {
        self.rows
            .iter()
            .find(|r| r.mask == mask && r.tier == tier && r.averaging == averaging)
            .map(|r| mean_std(&r.f1_runs))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(ABLATION_HEADER)?;
        for r in &self.rows {
            let (m, s) = mean_std(&r.f1_runs);
            let failed = self.failures.iter().filter(|(mask, _)| *mask == r.mask).count();
            wr.write_record([
                r.mask.node.to_string(),
                r.mask.edge.to_string(),
                r.tier.to_string(),
                r.averaging.to_string(),
                r.f1_runs.len().to_string(),
                fmt6(m),
                fmt6(s),
                failed.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Repeats `cfg` under every mask; feature blocks are removed, not zeroed.
pub fn ablate(cfg: &RunConfig, data: &Dataset, masks: &[FeatureMask], n_runs: usize, workers: usize) -> Result<AblationTable> {
    if masks.is_empty() {
        return Err(Error::Config("ablation grid is empty".into()));
    }
    let mut table = AblationTable::default();
    for &mask in masks {
        let run = RunConfig { mask, ..cfg.clone() };
        let outcome = repeat_runs(&run, data, &mask.to_string(), n_runs, workers)?;
        for tier in 0..TIERS {
            for (a, avg) in Averaging::ALL.into_iter().enumerate() {
                table.rows.push(AblationRow {
                    mask,
                    tier: tier + 1,
                    averaging: avg,
                    f1_runs: outcome.results.iter().map(|r| r.test.scores[tier][a].f1).collect(),
                });
            }
        }
        table.failures.extend(outcome.failures.into_iter().map(|f| (mask, f)));
    }
    Ok(table)
}

/// Hierarchical versus independently trained tiers under the same protocol.
pub fn compare_wiring(cfg: &RunConfig, data: &Dataset, n_runs: usize, workers: usize) -> Result<MetricsTable> {
    let mut table = MetricsTable::default();
    for (name, wiring) in [("hierarchical", Wiring::Hierarchical), ("independent", Wiring::Independent)] {
        let run = RunConfig {
            model: cfg.model.clone().with_wiring(wiring),
            ..cfg.clone()
        };
        table.add(&repeat_runs(&run, data, name, n_runs, workers)?);
    }
    Ok(table)
}

/// All depth × width combinations for the given layer kinds.
pub fn default_sweep_grid(kinds: &[LayerKind]) -> Vec<EncoderSpec> {
    let mut grid = Vec::new();
    for &kind in kinds {
        for num_layers in [1, 2, 3] {
            for hidden_dim in [64, 128, 256] {
                grid.push(EncoderSpec {
                    kind,
                    num_layers,
                    hidden_dim,
                    ..EncoderSpec::tuned(kind)
                });
            }
        }
    }
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub spec: EncoderSpec,
    /// Validation micro-F1 per tier, or the error that ended the run.
    pub val_micro_f1: std::result::Result<[f64; TIERS], String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    /// `(kind, tier (1-based), best spec, its validation micro-F1)`.
    pub best: Vec<(LayerKind, usize, EncoderSpec, f64)>,
}

/// Trains every grid point once on the run's own split and picks, per layer
/// kind and tier, the point with the highest validation micro-F1 (first wins
/// ties).
pub fn hyper_sweep(cfg: &RunConfig, data: &Dataset, grid: &[EncoderSpec], workers: usize) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    let points: Vec<SweepPoint> = pool(workers)?.install(|| {
        grid.par_iter()
            .map(|&spec| {
                let run = RunConfig {
                    model: ModelSpec::uniform(spec, cfg.model.wiring),
                    ..cfg.clone()
                };
                SweepPoint {
                    spec,
                    val_micro_f1: train_one(&run, data)
                        .map(|t| t.result.val.micro_f1())
                        .map_err(|e| e.to_string()),
                }
            })
            .collect()
    });
    let mut best: Vec<(LayerKind, usize, EncoderSpec, f64)> = Vec::new();
    for p in &points {
        let Ok(f1) = &p.val_micro_f1 else { continue };
        for tier in 0..TIERS {
            match best.iter_mut().find(|b| b.0 == p.spec.kind && b.1 == tier + 1) {
                Some(b) if f1[tier] > b.3 => *b = (p.spec.kind, tier + 1, p.spec, f1[tier]),
                Some(_) => {}
                None => best.push((p.spec.kind, tier + 1, p.spec, f1[tier])),
            }
        }
    }
    Ok(SweepResult { points, best })
}

impl SweepResult {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["kind", "num_layers", "hidden_dim", "heads", "tier1_val_micro_f1", "tier2_val_micro_f1", "tier3_val_micro_f1", "error"])?;
        for p in &self.points {
            let mut rec = vec![
                p.spec.kind.to_string(),
                p.spec.num_layers.to_string(),
                p.spec.hidden_dim.to_string(),
                p.spec.heads.to_string(),
            ];
            match &p.val_micro_f1 {
                Ok(f) => {
                    rec.extend(f.iter().map(|&x| fmt6(x)));
                    rec.push(String::new());
                }
                Err(e) => {
                    rec.extend([String::new(), String::new(), String::new()]);
                    rec.push(e.clone());
                }
            }
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Writes the raw and row-normalized confusion matrices of one evaluation.
pub fn confusion_csvs(eval: &Evaluation, vocab: &Vocabularies) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    for k in 0..TIERS {
        let names = vocab.tier(k).terms().to_vec();
        for (suffix, normalized) in [("counts", false), ("normalized", true)] {
            let mut buf = Vec::new();
            eval.confusion[k].write_csv(&mut buf, &names, normalized)?;
            files.push((format!("confusion_tier{}_{suffix}.csv", k + 1), buf));
        }
    }
    Ok(files)
}

/// Sums confusion matrices over runs.
pub fn pooled_confusion(results: &[RunResult]) -> Result<Option<[ConfusionMatrix; TIERS]>> {
    let Some(first) = results.first() else { return Ok(None) };
    let mut acc = first.test.confusion.clone();
    for r in &results[1..] {
        for k in 0..TIERS {
            acc[k].merge(&r.test.confusion[k])?;
        }
    }
    Ok(Some(acc))
}

/// JSON-lines run log: one object per epoch tagged with the run seed.
pub fn write_run_log<W: Write>(mut w: W, results: &[RunResult]) -> Result<()> {
    for r in results {
        for e in &r.log {
            let line = serde_json::json!({
                "seed": r.seed,
                "epoch": e.epoch,
                "lr": e.lr,
                "train_loss": e.train_loss,
                "val_loss": e.val_loss,
            });
            writeln!(w, "{line}")?;
        }
    }
    Ok(())
}

/// Predictions of a batch as a single tensor per tier, for callers that
/// need probabilities rather than scores.
pub fn predict(model: &HierModel, graphs: &[&EncodedGraph]) -> Result<(GraphBatch, TierPrediction)> {
    let batch = GraphBatch::from_graphs(graphs)?;
    let pred = model.forward_infer(&batch)?;
    Ok((batch, pred))
}

/// Entropy of each row of a probability matrix.
pub fn row_entropy(p: &Tensor) -> Vec<f64> {
    p.rows()
        .into_iter()
        .map(|r| -r.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>())
        .collect()
}
