//! Message-passing layers over batched encoded graphs.
//!
//! Every layer sees the message `m(u→v) = h_u + e_uv·W_e` along each
//! directed edge. `W_e` has no bias. SAGE, GCN and GIN aggregate linearly,
//! so the edge term is aggregated first and projected once per node.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use funcgnn_numcore::{Ctx, Linear, ParamId, ParamStore, Tape, Tensor, Var, DROPOUT_P, LEAKY_SLOPE};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::EncodedGraph;

/// Disjoint union of encoded graphs with precomputed aggregation operators.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    pub num_nodes: usize,
    /// First node row of each graph.
    pub offsets: Vec<usize>,
    pub sizes: Vec<usize>,
    pub x: Tensor,
    pub edge_attr: Tensor,
    pub src: Arc<[usize]>,
    pub dst: Arc<[usize]>,
    pub in_degree: Vec<usize>,
    pub labels: [Vec<usize>; 3],
    /// `1 / in_degree(dst)` per edge.
    mean_coef: Arc<[f64]>,
    /// In-edge mean, in-edge sum and GCN-normalized sum of edge features.
    e_mean: Tensor,
    e_sum: Tensor,
    e_gcn: Tensor,
    /// Edge list extended with one self-loop per node.
    loop_src: Arc<[usize]>,
    loop_dst: Arc<[usize]>,
    loop_attr: Tensor,
    /// `1 / sqrt(d̂_u d̂_v)` over the extended edge list, `d̂ = in_degree + 1`.
    gcn_coef: Arc<[f64]>,
    /// `0..m + n`, used to scatter per-edge rows.
    loop_ids: Arc<[usize]>,
}

impl GraphBatch {
    pub fn single(g: &EncodedGraph) -> Result<Self> {
        Self::from_graphs(&[g])
    }

    pub fn from_graphs(graphs: &[&EncodedGraph]) -> Result<Self> {
        let first = graphs.first().ok_or_else(|| Error::Shape("empty batch".into()))?;
        let d_x = first.node_features.ncols();
        let d_e = first.edge_features.ncols();
        let n: usize = graphs.iter().map(|g| g.num_nodes()).sum();
        let m: usize = graphs.iter().map(|g| g.num_edges()).sum();

        let mut x = Tensor::zeros((n, d_x));
        let mut edge_attr = Tensor::zeros((m, d_e));
        let mut src = Vec::with_capacity(m);
        let mut dst = Vec::with_capacity(m);
        let mut labels: [Vec<usize>; 3] = Default::default();
        let mut offsets = Vec::with_capacity(graphs.len());
        let mut sizes = Vec::with_capacity(graphs.len());
        let (mut row, mut erow) = (0, 0);
        for g in graphs {
            if g.node_features.ncols() != d_x || g.edge_features.ncols() != d_e {
                return Err(Error::Shape(format!(
                    "graph `{}` has feature widths {}/{}, batch uses {d_x}/{d_e}",
                    g.graph_id,
                    g.node_features.ncols(),
                    g.edge_features.ncols()
                )));
            }
            let k = g.num_nodes();
            x.slice_mut(ndarray::s![row..row + k, ..]).assign(&g.node_features);
            edge_attr
                .slice_mut(ndarray::s![erow..erow + g.num_edges(), ..])
                .assign(&g.edge_features);
            for &(u, v) in &g.edge_index {
                src.push(row + u);
                dst.push(row + v);
            }
            for (t, l) in labels.iter_mut().zip(&g.labels) {
                t.extend_from_slice(l);
            }
            offsets.push(row);
            sizes.push(k);
            row += k;
            erow += g.num_edges();
        }

        let mut in_degree = vec![0usize; n];
        for &v in &dst {
            in_degree[v] += 1;
        }
        let mean_coef: Arc<[f64]> = dst.iter().map(|&v| 1.0 / in_degree[v] as f64).collect();
        let hat = |v: usize| (in_degree[v] + 1) as f64;

        let mut e_mean = Tensor::zeros((n, d_e));
        let mut e_sum = Tensor::zeros((n, d_e));
        let mut e_gcn = Tensor::zeros((n, d_e));
        for e in 0..m {
            let (u, v) = (src[e], dst[e]);
            let er = edge_attr.row(e);
            e_sum.row_mut(v).scaled_add(1.0, &er);
            e_mean.row_mut(v).scaled_add(mean_coef[e], &er);
            e_gcn.row_mut(v).scaled_add(1.0 / (hat(u) * hat(v)).sqrt(), &er);
        }

        let loop_src: Arc<[usize]> = src.iter().copied().chain(0..n).collect();
        let loop_dst: Arc<[usize]> = dst.iter().copied().chain(0..n).collect();
        let gcn_coef: Arc<[f64]> = loop_src
            .iter()
            .zip(loop_dst.iter())
            .map(|(&u, &v)| 1.0 / (hat(u) * hat(v)).sqrt())
            .collect();
        let mut loop_attr = Tensor::zeros((m + n, d_e));
        loop_attr.slice_mut(ndarray::s![..m, ..]).assign(&edge_attr);

        Ok(Self {
            num_nodes: n,
            offsets,
            sizes,
            x,
            edge_attr,
            src: src.into(),
            dst: dst.into(),
            in_degree,
            labels,
            mean_coef,
            e_mean,
            e_sum,
            e_gcn,
            loop_src,
            loop_dst,
            loop_attr,
            gcn_coef,
            loop_ids: (0..m + n).collect(),
        })
    }

    pub fn num_graphs(&self) -> usize {
        self.sizes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.src.len()
    }

    pub fn node_dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn edge_dim(&self) -> usize {
        self.edge_attr.ncols()
    }

    /// Graph index of every node row.
    pub fn graph_of_nodes(&self) -> Vec<usize> {
        self.sizes
            .iter()
            .enumerate()
            .flat_map(|(g, &k)| std::iter::repeat(g).take(k))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Sage,
    Gcn,
    Gat,
    Gin,
}

impl LayerKind {
    pub const ALL: [LayerKind; 4] = [LayerKind::Sage, LayerKind::Gcn, LayerKind::Gat, LayerKind::Gin];

    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Sage => "sage",
            LayerKind::Gcn => "gcn",
            LayerKind::Gat => "gat",
            LayerKind::Gin => "gin",
        }
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LayerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sage" | "graphsage" => Ok(LayerKind::Sage),
            "gcn" => Ok(LayerKind::Gcn),
            "gat" => Ok(LayerKind::Gat),
            "gin" => Ok(LayerKind::Gin),
            other => Err(Error::Config(format!("unknown layer kind `{other}`"))),
        }
    }
}

/// `W_e`: projects edge features into the message space, no bias.
#[derive(Debug, Clone)]
pub struct EdgeAugment {
    pub weight: ParamId,
}

impl EdgeAugment {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, d_e: usize, d_in: usize, rng: &mut R) -> Result<Self> {
        Ok(Self {
            weight: store.xavier(format!("{name}.edge"), d_e, d_in, rng)?,
        })
    }

    /// `E·W_e` for a constant edge-feature block.
    pub fn project(&self, tape: &mut Tape<'_>, edge_block: &Tensor) -> Result<Var> {
        let e = tape.constant(edge_block.clone())?;
        let w = tape.param(self.weight);
        Ok(tape.matmul(e, w)?)
    }
}

/// `h'_v = h_v·W_self + b + mean_{u→v}(m(u→v))·W_nbr`.
#[derive(Debug, Clone)]
pub struct SageLayer {
    pub edge: EdgeAugment,
    pub self_lin: Linear,
    pub nbr_lin: Linear,
}

impl SageLayer {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        d_in: usize,
        d_out: usize,
        d_e: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            edge: EdgeAugment::new(store, name, d_e, d_in, rng)?,
            self_lin: Linear::new(store, &format!("{name}.self"), d_in, d_out, true, rng)?,
            nbr_lin: Linear::new(store, &format!("{name}.nbr"), d_in, d_out, false, rng)?,
        })
    }

    pub fn forward(&self, tape: &mut Tape<'_>, b: &GraphBatch, h: Var) -> Result<Var> {
        let agg = tape.propagate(h, b.src.clone(), b.dst.clone(), Some(b.mean_coef.clone()), b.num_nodes)?;
        let e = self.edge.project(tape, &b.e_mean)?;
        let msg = tape.add(agg, e)?;
        let own = self.self_lin.forward(tape, h)?;
        let nbr = self.nbr_lin.forward(tape, msg)?;
        Ok(tape.add(own, nbr)?)
    }

    pub fn params(&self) -> Vec<ParamId> {
        [vec![self.edge.weight], self.self_lin.params(), self.nbr_lin.params()].concat()
    }
}

/// `h'_v = Σ_{u→v, self-loop incl.} m(u→v) / sqrt(d̂_u d̂_v) · W + b`.
/// The self-loop message is `h_v`.
#[derive(Debug, Clone)]
pub struct GcnLayer {
    pub edge: EdgeAugment,
    pub lin: Linear,
}

impl GcnLayer {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        d_in: usize,
        d_out: usize,
        d_e: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            edge: EdgeAugment::new(store, name, d_e, d_in, rng)?,
            lin: Linear::new(store, &format!("{name}.lin"), d_in, d_out, true, rng)?,
        })
    }

    pub fn forward(&self, tape: &mut Tape<'_>, b: &GraphBatch, h: Var) -> Result<Var> {
        let agg = tape.propagate(
            h,
            b.loop_src.clone(),
            b.loop_dst.clone(),
            Some(b.gcn_coef.clone()),
            b.num_nodes,
        )?;
        let e = self.edge.project(tape, &b.e_gcn)?;
        let msg = tape.add(agg, e)?;
        Ok(self.lin.forward(tape, msg)?)
    }

    pub fn params(&self) -> Vec<ParamId> {
        [vec![self.edge.weight], self.lin.params()].concat()
    }
}

/// One attention head of [`GatLayer`].
#[derive(Debug, Clone)]
pub struct GatHead {
    pub weight: ParamId,
    pub att_dst: ParamId,
    pub att_src: ParamId,
}

/// Attention over in-edges plus a self-loop:
/// `α(u→v) = softmax_v(leaky(h_v W·a_dst + m(u→v) W·a_src))`,
/// `h'_v = Σ α(u→v) · m(u→v) W + b`. Heads are concatenated.
#[derive(Debug, Clone)]
pub struct GatLayer {
    pub edge: EdgeAugment,
    pub heads: Vec<GatHead>,
    pub bias: ParamId,
}

impl GatLayer {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        d_in: usize,
        d_out: usize,
        d_e: usize,
        heads: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if heads == 0 || d_out % heads != 0 {
            return Err(Error::Config(format!("{heads} heads do not divide width {d_out}")));
        }
        let per = d_out / heads;
        let edge = EdgeAugment::new(store, name, d_e, d_in, rng)?;
        let heads = (0..heads)
            .map(|k| {
                Ok(GatHead {
                    weight: store.xavier(format!("{name}.head{k}.weight"), d_in, per, rng)?,
                    att_dst: store.xavier(format!("{name}.head{k}.att_dst"), per, 1, rng)?,
                    att_src: store.xavier(format!("{name}.head{k}.att_src"), per, 1, rng)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            edge,
            heads,
            bias: store.zeros(format!("{name}.bias"), 1, d_out)?,
        })
    }

    fn messages(&self, tape: &mut Tape<'_>, b: &GraphBatch, h: Var) -> Result<Var> {
        let hu = tape.gather_rows(h, b.loop_src.clone())?;
        let e = self.edge.project(tape, &b.loop_attr)?;
        Ok(tape.add(hu, e)?)
    }

    /// Projected messages and attention coefficients of one head.
    fn head(&self, tape: &mut Tape<'_>, b: &GraphBatch, h: Var, msg: Var, head: &GatHead) -> Result<(Var, Var)> {
        let w = tape.param(head.weight);
        let z = tape.matmul(h, w)?;
        let zm = tape.matmul(msg, w)?;
        let a_dst = tape.param(head.att_dst);
        let a_src = tape.param(head.att_src);
        let s_dst = tape.matmul(z, a_dst)?;
        let s_dst = tape.gather_rows(s_dst, b.loop_dst.clone())?;
        let s_src = tape.matmul(zm, a_src)?;
        let score = tape.add(s_dst, s_src)?;
        let score = tape.leaky_relu(score, LEAKY_SLOPE)?;
        let alpha = tape.segment_softmax(score, b.loop_dst.clone())?;
        Ok((zm, alpha))
    }

    pub fn forward(&self, tape: &mut Tape<'_>, b: &GraphBatch, h: Var) -> Result<Var> {
        let msg = self.messages(tape, b, h)?;
        let mut outs = Vec::with_capacity(self.heads.len());
        for head in &self.heads {
            let (zm, alpha) = self.head(tape, b, h, msg, head)?;
            outs.push(tape.propagate_weighted(zm, alpha, b.loop_ids.clone(), b.loop_dst.clone(), b.num_nodes)?);
        }
        let out = if outs.len() == 1 { outs[0] } else { tape.concat_cols(&outs)? };
        let bias = tape.param(self.bias);
        Ok(tape.add_row(out, bias)?)
    }

    /// Attention coefficients (`(m + n) × heads`) over the edge list extended
    /// with one self-loop per node, loops last.
    pub fn attention(&self, tape: &mut Tape<'_>, b: &GraphBatch, h: Var) -> Result<Tensor> {
        let msg = self.messages(tape, b, h)?;
        let mut cols = Vec::with_capacity(self.heads.len());
        for head in &self.heads {
            cols.push(self.head(tape, b, h, msg, head)?.1);
        }
        let all = tape.concat_cols(&cols)?;
        Ok(tape.value(all).clone())
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut p = vec![self.edge.weight];
        for h in &self.heads {
            p.extend([h.weight, h.att_dst, h.att_src]);
        }
        p.push(self.bias);
        p
    }
}

/// `h'_v = MLP₂((1 + ε)·h_v + Σ_{u→v} m(u→v))`, with
/// `MLP₂(x) = leaky(x·W₁ + b₁)·W₂ + b₂`.
#[derive(Debug, Clone)]
pub struct GinLayer {
    pub edge: EdgeAugment,
    pub lin1: Linear,
    pub lin2: Linear,
    /// Learnable `ε` (`1 × 1`); `None` keeps `ε = 0`.
    pub epsilon: Option<ParamId>,
}

impl GinLayer {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        d_in: usize,
        d_out: usize,
        d_e: usize,
        learn_epsilon: bool,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            edge: EdgeAugment::new(store, name, d_e, d_in, rng)?,
            lin1: Linear::new(store, &format!("{name}.mlp.0"), d_in, d_out, true, rng)?,
            lin2: Linear::new(store, &format!("{name}.mlp.1"), d_out, d_out, true, rng)?,
            epsilon: if learn_epsilon {
                Some(store.zeros(format!("{name}.epsilon"), 1, 1)?)
            } else {
                None
            },
        })
    }

    pub fn forward(&self, tape: &mut Tape<'_>, b: &GraphBatch, h: Var) -> Result<Var> {
        let agg = tape.propagate(h, b.src.clone(), b.dst.clone(), None, b.num_nodes)?;
        let e = self.edge.project(tape, &b.e_sum)?;
        let mut s = tape.add(h, agg)?;
        s = tape.add(s, e)?;
        if let Some(eps) = self.epsilon {
            let eps = tape.param(eps);
            let scaled = tape.scale_var(h, eps)?;
            s = tape.add(s, scaled)?;
        }
        let z = self.lin1.forward(tape, s)?;
        let z = tape.leaky_relu(z, LEAKY_SLOPE)?;
        Ok(self.lin2.forward(tape, z)?)
    }

    pub fn params(&self) -> Vec<ParamId> {
        [vec![self.edge.weight], self.lin1.params(), self.lin2.params(), self.epsilon.into_iter().collect()].concat()
    }
}

#[derive(Debug, Clone)]
pub enum GnnLayer {
    Sage(SageLayer),
    Gcn(GcnLayer),
    Gat(GatLayer),
    Gin(GinLayer),
}

impl GnnLayer {
    pub fn forward(&self, tape: &mut Tape<'_>, b: &GraphBatch, h: Var) -> Result<Var> {
        match self {
            GnnLayer::Sage(l) => l.forward(tape, b, h),
            GnnLayer::Gcn(l) => l.forward(tape, b, h),
            GnnLayer::Gat(l) => l.forward(tape, b, h),
            GnnLayer::Gin(l) => l.forward(tape, b, h),
        }
    }

    pub fn params(&self) -> Vec<ParamId> {
        match self {
            GnnLayer::Sage(l) => l.params(),
            GnnLayer::Gcn(l) => l.params(),
            GnnLayer::Gat(l) => l.params(),
            GnnLayer::Gin(l) => l.params(),
        }
    }
}

/// Encoder architecture descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderSpec {
    pub kind: LayerKind,
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub heads: usize,
    pub epsilon_learnable: bool,
}

impl Default for EncoderSpec {
    fn default() -> Self {
        Self::tuned(LayerKind::Sage)
    }
}

impl EncoderSpec {
    /// Best depth and width per layer kind from the published tuning.
    pub fn tuned(kind: LayerKind) -> Self {
        let (num_layers, hidden_dim) = match kind {
            LayerKind::Sage | LayerKind::Gcn => (2, 128),
            LayerKind::Gat => (1, 128),
            LayerKind::Gin => (3, 256),
        };
        Self {
            kind,
            num_layers,
            hidden_dim,
            heads: 1,
            epsilon_learnable: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(1..=3).contains(&self.num_layers) {
            problems.push(format!("num_layers must be 1..=3, got {}", self.num_layers));
        }
        if self.hidden_dim == 0 {
            problems.push("hidden_dim must be positive".to_string());
        }
        if self.heads == 0 || (self.hidden_dim > 0 && self.hidden_dim % self.heads != 0) {
            problems.push(format!("heads ({}) must divide hidden_dim ({})", self.heads, self.hidden_dim));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// Short architecture summary, e.g. `sage: 2 layers, 128 hidden`.
    pub fn describe(&self) -> String {
        let mut s = format!("{}: {} layers, {} hidden", self.kind, self.num_layers, self.hidden_dim);
        if self.kind == LayerKind::Gat {
            s.push_str(&format!(", {} heads", self.heads));
        }
        if self.kind == LayerKind::Gin && self.epsilon_learnable {
            s.push_str(", learnable epsilon");
        }
        s
    }
}

/// Stack of message-passing layers, each followed by LeakyReLU and dropout.
#[derive(Debug, Clone)]
pub struct GnnEncoder {
    pub spec: EncoderSpec,
    pub layers: Vec<GnnLayer>,
    pub in_dim: usize,
    pub edge_dim: usize,
}

impl GnnEncoder {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        spec: EncoderSpec,
        d_x: usize,
        d_e: usize,
        rng: &mut R,
    ) -> Result<Self> {
        spec.validate()?;
        let mut layers = Vec::with_capacity(spec.num_layers);
        let mut d_in = d_x;
        for i in 0..spec.num_layers {
            let lname = format!("{name}.layer{i}");
            let d = spec.hidden_dim;
            layers.push(match spec.kind {
                LayerKind::Sage => GnnLayer::Sage(SageLayer::new(store, &lname, d_in, d, d_e, rng)?),
                LayerKind::Gcn => GnnLayer::Gcn(GcnLayer::new(store, &lname, d_in, d, d_e, rng)?),
                LayerKind::Gat => GnnLayer::Gat(GatLayer::new(store, &lname, d_in, d, d_e, spec.heads, rng)?),
                LayerKind::Gin => {
                    GnnLayer::Gin(GinLayer::new(store, &lname, d_in, d, d_e, spec.epsilon_learnable, rng)?)
                }
            });
            d_in = d;
        }
        Ok(Self {
            spec,
            layers,
            in_dim: d_x,
            edge_dim: d_e,
        })
    }

    pub fn out_dim(&self) -> usize {
        self.spec.hidden_dim
    }

    pub fn forward(&self, tape: &mut Tape<'_>, b: &GraphBatch, ctx: &mut Ctx) -> Result<Var> {
        if b.node_dim() != self.in_dim || b.edge_dim() != self.edge_dim {
            return Err(Error::Shape(format!(
                "encoder expects feature widths {}/{}, batch has {}/{}",
                self.in_dim,
                self.edge_dim,
                b.node_dim(),
                b.edge_dim()
            )));
        }
        let mut h = tape.constant(b.x.clone())?;
        for layer in &self.layers {
            h = layer.forward(tape, b, h)?;
            h = tape.leaky_relu(h, LEAKY_SLOPE)?;
            h = ctx.dropout(tape, h, DROPOUT_P)?;
        }
        Ok(h)
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.layers.iter().flat_map(GnnLayer::params).collect()
    }
}

/// Projection features for the feed-forward baselines:
/// `z_v = x_v·P_n + Σ_{u→v} (x_u·P_n) ⊙ (e_uv·P_e)`.
#[derive(Debug, Clone)]
pub struct ProjectionEncoder {
    pub node_proj: Linear,
    pub edge_proj: Linear,
    pub dim: usize,
}

impl ProjectionEncoder {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        d_x: usize,
        d_e: usize,
        dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            node_proj: Linear::new(store, &format!("{name}.node_proj"), d_x, dim, false, rng)?,
            edge_proj: Linear::new(store, &format!("{name}.edge_proj"), d_e, dim, false, rng)?,
            dim,
        })
    }

    pub fn forward(&self, tape: &mut Tape<'_>, b: &GraphBatch) -> Result<Var> {
        let x = tape.constant(b.x.clone())?;
        let px = self.node_proj.forward(tape, x)?;
        let e = tape.constant(b.edge_attr.clone())?;
        let pe = self.edge_proj.forward(tape, e)?;
        let pu = tape.gather_rows(px, b.src.clone())?;
        let pair = tape.mul(pu, pe)?;
        let ids: Arc<[usize]> = (0..b.num_edges()).collect();
        let agg = tape.propagate(pair, ids, b.dst.clone(), None, b.num_nodes)?;
        Ok(tape.add(px, agg)?)
    }

    pub fn params(&self) -> Vec<ParamId> {
        [self.node_proj.params(), self.edge_proj.params()].concat()
    }
}
