//! Three-tier function classifier.
//!
//! Tier `k` has its own encoder and MLP head. In hierarchical wiring the
//! head of tier `k` reads `[H_k ∥ s_{k-1}]`, where `s_0` is a zero block of
//! width `C_1`, `s_k` is the one-hot ground truth of tier `k` during
//! training and the predicted distribution of tier `k` at inference.

use funcgnn_numcore::loss::weighted_cross_entropy_scaled;
use funcgnn_numcore::tape::softmax_rows;
use funcgnn_numcore::{Ctx, Mlp, ParamId, ParamStore, Tape, Tensor, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::{EncoderSpec, GnnEncoder, GraphBatch, LayerKind, ProjectionEncoder};

pub const TIERS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wiring {
    Hierarchical,
    Independent,
}

/// Per-tier node representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Backbone {
    Gnn(EncoderSpec),
    /// Feed-forward baseline: projected node features plus neighbor products.
    Projection { dim: usize },
}

impl Backbone {
    pub fn out_dim(&self) -> usize {
        match self {
            Backbone::Gnn(s) => s.hidden_dim,
            Backbone::Projection { dim } => *dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TierSpec {
    pub backbone: Backbone,
    /// Hidden widths of the classifier head; empty means a single linear map.
    pub head_hidden: Vec<usize>,
}

impl TierSpec {
    pub fn gnn(spec: EncoderSpec) -> Self {
        Self {
            backbone: Backbone::Gnn(spec),
            head_hidden: vec![spec.hidden_dim],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub wiring: Wiring,
    pub tiers: [TierSpec; TIERS],
}

/// Width of the projection used by the feed-forward baselines.
pub const BASELINE_DIM: usize = 128;

impl ModelSpec {
    pub fn uniform(spec: EncoderSpec, wiring: Wiring) -> Self {
        Self {
            wiring,
            tiers: std::array::from_fn(|_| TierSpec::gnn(spec)),
        }
    }

    /// Hierarchical model with the tuned encoder for `kind` on every tier.
    pub fn tuned(kind: LayerKind) -> Self {
        Self::uniform(EncoderSpec::tuned(kind), Wiring::Hierarchical)
    }

    /// Logistic-regression baseline on projection features.
    pub fn linear_baseline() -> Self {
        Self::projection(Vec::new())
    }

    /// One-hidden-layer MLP baseline on projection features.
    pub fn mlp_baseline() -> Self {
        Self::projection(vec![BASELINE_DIM])
    }

    fn projection(head_hidden: Vec<usize>) -> Self {
        Self {
            wiring: Wiring::Hierarchical,
            tiers: std::array::from_fn(|_| TierSpec {
                backbone: Backbone::Projection { dim: BASELINE_DIM },
                head_hidden: head_hidden.clone(),
            }),
        }
    }

    pub fn with_wiring(mut self, wiring: Wiring) -> Self {
        self.wiring = wiring;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for (k, t) in self.tiers.iter().enumerate() {
            match &t.backbone {
                Backbone::Gnn(s) => {
                    if let Err(Error::Config(m)) = s.validate() {
                        problems.push(format!("tier {}: {m}", k + 1));
                    }
                }
                Backbone::Projection { dim } if *dim == 0 => {
                    problems.push(format!("tier {}: projection dim must be positive", k + 1))
                }
                Backbone::Projection { .. } => {}
            }
            if t.head_hidden.contains(&0) {
                problems.push(format!("tier {}: head widths must be positive", k + 1));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// One line per distinct tier architecture.
    pub fn describe(&self) -> String {
        let parts: Vec<String> = self
            .tiers
            .iter()
            .map(|t| match &t.backbone {
                Backbone::Gnn(s) => s.describe(),
                Backbone::Projection { dim } => {
                    let head = if t.head_hidden.is_empty() { "linear" } else { "mlp" };
                    format!("{head} baseline: projection {dim}")
                }
            })
            .collect();
        let wiring = match self.wiring {
            Wiring::Hierarchical => "hierarchical",
            Wiring::Independent => "independent",
        };
        if parts.iter().all(|p| p == &parts[0]) {
            format!("{wiring} {}", parts[0])
        } else {
            format!("{wiring} [{}]", parts.join(" | "))
        }
    }
}

#[derive(Debug, Clone)]
pub enum TierEncoder {
    Gnn(GnnEncoder),
    Projection(ProjectionEncoder),
}

impl TierEncoder {
    pub fn forward(&self, tape: &mut Tape<'_>, b: &GraphBatch, ctx: &mut Ctx) -> Result<Var> {
        match self {
            TierEncoder::Gnn(e) => e.forward(tape, b, ctx),
            TierEncoder::Projection(p) => p.forward(tape, b),
        }
    }

    pub fn params(&self) -> Vec<ParamId> {
        match self {
            TierEncoder::Gnn(e) => e.params(),
            TierEncoder::Projection(p) => p.params(),
        }
    }
}

/// Trainable three-tier model together with its parameters.
#[derive(Debug, Clone)]
pub struct HierModel {
    pub spec: ModelSpec,
    pub store: ParamStore,
    pub encoders: [TierEncoder; TIERS],
    pub heads: [Mlp; TIERS],
    pub classes: [usize; TIERS],
    pub node_dim: usize,
    pub edge_dim: usize,
}

/// Tape handles produced by a teacher-forced forward pass.
#[derive(Debug, Clone, Copy)]
pub struct TrainOutput {
    /// Sum of the three tier losses.
    pub loss: Var,
    pub tier_losses: [Var; TIERS],
    pub logits: [Var; TIERS],
    pub head_inputs: [Var; TIERS],
}

/// Per-tier logits and softmax probabilities for every node of a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct TierPrediction {
    pub logits: [Tensor; TIERS],
    pub probs: [Tensor; TIERS],
}

impl HierModel {
    pub fn new<R: Rng + ?Sized>(
        spec: ModelSpec,
        node_dim: usize,
        edge_dim: usize,
        classes: [usize; TIERS],
        rng: &mut R,
    ) -> Result<Self> {
        spec.validate()?;
        if classes.contains(&0) {
            return Err(Error::Config(format!("class counts {classes:?} must be positive")));
        }
        let mut store = ParamStore::new();
        let mut encoders = Vec::with_capacity(TIERS);
        let mut heads = Vec::with_capacity(TIERS);
        for (k, tier) in spec.tiers.iter().enumerate() {
            let name = format!("tier{}", k + 1);
            let enc = match tier.backbone {
                Backbone::Gnn(s) => {
                    TierEncoder::Gnn(GnnEncoder::new(&mut store, &format!("{name}.encoder"), s, node_dim, edge_dim, rng)?)
                }
                Backbone::Projection { dim } => TierEncoder::Projection(ProjectionEncoder::new(
                    &mut store,
                    &format!("{name}.encoder"),
                    node_dim,
                    edge_dim,
                    dim,
                    rng,
                )?),
            };
            let slot = match spec.wiring {
                Wiring::Hierarchical if k == 0 => classes[0],
                Wiring::Hierarchical => classes[k - 1],
                Wiring::Independent => 0,
            };
            let mut dims = vec![tier.backbone.out_dim() + slot];
            dims.extend(&tier.head_hidden);
            dims.push(classes[k]);
            heads.push(Mlp::new(&mut store, &format!("{name}.head"), &dims, rng)?);
            encoders.push(enc);
        }
        Ok(Self {
            spec,
            store,
            encoders: encoders.try_into().map_err(|_| Error::Config("tier count".into()))?,
            heads: heads.try_into().map_err(|_| Error::Config("tier count".into()))?,
            classes,
            node_dim,
            edge_dim,
        })
    }

    pub fn is_hierarchical(&self) -> bool {
        self.spec.wiring == Wiring::Hierarchical
    }

    /// Width of the predecessor block appended to the head input of tier `k`.
    pub fn slot_width(&self, k: usize) -> usize {
        match (self.spec.wiring, k) {
            (Wiring::Independent, _) => 0,
            (Wiring::Hierarchical, 0) => self.classes[0],
            (Wiring::Hierarchical, k) => self.classes[k - 1],
        }
    }

    pub fn tier_params(&self, k: usize) -> Vec<ParamId> {
        [self.encoders[k].params(), self.heads[k].params()].concat()
    }

    fn check_batch(&self, b: &GraphBatch) -> Result<()> {
        if b.node_dim() != self.node_dim || b.edge_dim() != self.edge_dim {
            return Err(Error::Shape(format!(
                "model expects feature widths {}/{}, batch has {}/{}",
                self.node_dim,
                self.edge_dim,
                b.node_dim(),
                b.edge_dim()
            )));
        }
        Ok(())
    }

    fn check_labels(&self, b: &GraphBatch) -> Result<()> {
        for k in 0..TIERS {
            if b.labels[k].len() != b.num_nodes {
                return Err(Error::Label(format!(
                    "tier {}: {} labels for {} nodes",
                    k + 1,
                    b.labels[k].len(),
                    b.num_nodes
                )));
            }
            if let Some(&bad) = b.labels[k].iter().find(|&&y| y >= self.classes[k]) {
                return Err(Error::Label(format!(
                    "tier {}: label {bad} outside {} classes",
                    k + 1,
                    self.classes[k]
                )));
            }
        }
        Ok(())
    }

    fn head_input(&self, tape: &mut Tape<'_>, h: Var, slot: Option<Tensor>) -> Result<Var> {
        match slot {
            None => Ok(h),
            Some(s) => {
                let s = tape.constant(s)?;
                Ok(tape.concat_cols(&[h, s])?)
            }
        }
    }

    /// Teacher-forced pass. `weights[k]` are the tier-`k` class weights.
    ///
    /// Each tier loss is `Σ_g (1/G) · mean_{v∈g} w[y_v] · CE_v` over the `G`
    /// graphs of the batch; the returned `loss` is their sum.
    pub fn forward_train(
        &self,
        tape: &mut Tape<'_>,
        b: &GraphBatch,
        weights: &[Vec<f64>; TIERS],
        ctx: &mut Ctx,
    ) -> Result<TrainOutput> {
        self.check_batch(b)?;
        self.check_labels(b)?;
        let coef = graph_mean_coef(b);

        let mut logits = Vec::with_capacity(TIERS);
        let mut inputs = Vec::with_capacity(TIERS);
        let mut losses = Vec::with_capacity(TIERS);
        for k in 0..TIERS {
            let h = self.encoders[k].forward(tape, b, ctx)?;
            let slot = match (self.spec.wiring, k) {
                (Wiring::Independent, _) => None,
                (Wiring::Hierarchical, 0) => Some(Tensor::zeros((b.num_nodes, self.classes[0]))),
                (Wiring::Hierarchical, k) => Some(one_hot(&b.labels[k - 1], self.classes[k - 1])),
            };
            let x = self.head_input(tape, h, slot)?;
            let z = self.heads[k].forward(tape, x, ctx)?;
            let loss = weighted_cross_entropy_scaled(tape, z, &b.labels[k], &weights[k], &coef)?;
            inputs.push(x);
            logits.push(z);
            losses.push(loss);
        }
        let total = tape.add(losses[0], losses[1])?;
        let total = tape.add(total, losses[2])?;
        Ok(TrainOutput {
            loss: total,
            tier_losses: [losses[0], losses[1], losses[2]],
            logits: [logits[0], logits[1], logits[2]],
            head_inputs: [inputs[0], inputs[1], inputs[2]],
        })
    }

    /// Label-free evaluation pass; predecessor blocks carry predicted
    /// distributions. Dropout is off.
    pub fn forward_infer(&self, b: &GraphBatch) -> Result<TierPrediction> {
        self.check_batch(b)?;
        let mut tape = Tape::new(&self.store);
        let mut ctx = Ctx::eval();
        let mut logits: Vec<Tensor> = Vec::with_capacity(TIERS);
        let mut probs: Vec<Tensor> = Vec::with_capacity(TIERS);
        for k in 0..TIERS {
            let h = self.encoders[k].forward(&mut tape, b, &mut ctx)?;
            let slot = match (self.spec.wiring, k) {
                (Wiring::Independent, _) => None,
                (Wiring::Hierarchical, 0) => Some(Tensor::zeros((b.num_nodes, self.classes[0]))),
                (Wiring::Hierarchical, k) => Some(probs[k - 1].clone()),
            };
            let x = self.head_input(&mut tape, h, slot)?;
            let z = self.heads[k].forward(&mut tape, x, &mut ctx)?;
            let value = tape.value(z).clone();
            probs.push(softmax_rows(&value));
            logits.push(value);
        }
        let [l0, l1, l2]: [Tensor; TIERS] = logits.try_into().expect("three tiers");
        let [p0, p1, p2]: [Tensor; TIERS] = probs.try_into().expect("three tiers");
        Ok(TierPrediction {
            logits: [l0, l1, l2],
            probs: [p0, p1, p2],
        })
    }
}

pub fn one_hot(labels: &[usize], classes: usize) -> Tensor {
    let mut t = Tensor::zeros((labels.len(), classes));
    for (i, &y) in labels.iter().enumerate() {
        t[[i, y]] = 1.0;
    }
    t
}

impl TierPrediction {
    pub fn num_nodes(&self) -> usize {
        self.probs[0].nrows()
    }

    /// Row argmax of tier `k`; ties go to the lowest class index.
    pub fn predicted(&self, k: usize) -> Vec<usize> {
        self.probs[k]
            .rows()
            .into_iter()
            .map(|r| crate::graph::argmax(r.iter().copied()))
            .collect()
    }

    /// The `k` most probable classes of every node in tier `tier`, most
    /// probable first; ties broken by lower class index.
    pub fn ranked(&self, tier: usize, k: usize) -> Vec<Vec<(usize, f64)>> {
        self.probs[tier]
            .rows()
            .into_iter()
            .map(|r| {
                let mut idx: Vec<usize> = (0..r.len()).collect();
                idx.sort_by(|&a, &b| r[b].total_cmp(&r[a]).then(a.cmp(&b)));
                idx.into_iter().take(k).map(|c| (c, r[c])).collect()
            })
            .collect()
    }

    /// Whether each node's true tier label is among its `k` most probable classes.
    pub fn top_k(&self, tier: usize, k: usize, truth: &[usize]) -> Result<Vec<bool>> {
        let c = self.probs[tier].ncols();
        if k == 0 || k > c {
            return Err(Error::Config(format!("top-k needs 1 <= k <= {c}, got {k}")));
        }
        if truth.len() != self.num_nodes() {
            return Err(Error::Shape(format!(
                "{} labels for {} predictions",
                truth.len(),
                self.num_nodes()
            )));
        }
        Ok(self
            .ranked(tier, k)
            .iter()
            .zip(truth)
            .map(|(r, y)| r.iter().any(|(c, _)| c == y))
            .collect())
    }

    /// Fraction of nodes whose true label is in the top `k`.
    pub fn top_k_rate(&self, tier: usize, k: usize, truth: &[usize]) -> Result<f64> {
        let hits = self.top_k(tier, k, truth)?;
        Ok(hits.iter().filter(|&&h| h).count() as f64 / hits.len().max(1) as f64)
    }

    /// Rows `[start, start + len)` of every tier.
    pub fn slice(&self, start: usize, len: usize) -> TierPrediction {
        let cut = |t: &Tensor| t.slice(ndarray::s![start..start + len, ..]).to_owned();
        TierPrediction {
            logits: std::array::from_fn(|k| cut(&self.logits[k])),
            probs: std::array::from_fn(|k| cut(&self.probs[k])),
        }
    }
}

/// Per-node loss coefficient `1 / (G · n_g)` for a batch of `G` graphs.
pub fn graph_mean_coef(b: &GraphBatch) -> Vec<f64> {
    let graphs = b.num_graphs() as f64;
    b.sizes
        .iter()
        .flat_map(|&k| std::iter::repeat(1.0 / (graphs * k as f64)).take(k))
        .collect()
}
