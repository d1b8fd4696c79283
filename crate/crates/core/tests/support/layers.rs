//! Dense brute-force oracles for the message-passing layers.

use funcgnn::gnn::{GatLayer, GcnLayer, GinLayer, GraphBatch, SageLayer};
use funcgnn::graph::EncodedGraph;
use funcgnn_numcore::{ParamId, ParamStore, Tape, Tensor, Var, LEAKY_SLOPE};
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const D_X: usize = 3;
pub const D_E: usize = 2;
pub const D_OUT: usize = 4;

pub fn random_tensor(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
    Array2::from_shape_fn((r, c), |_| rng.gen_range(-1.0..1.0))
}

/// Random directed multigraph with at least one parallel edge when it has edges.
pub fn random_graph(rng: &mut ChaCha8Rng, max_nodes: usize) -> EncodedGraph {
    let n = rng.gen_range(1..=max_nodes);
    let m = rng.gen_range(0..=2 * n);
    let mut edges: Vec<(usize, usize)> = (0..m).map(|_| (rng.gen_range(0..n), rng.gen_range(0..n))).collect();
    if let Some(&e) = edges.first() {
        edges.push(e);
    }
    EncodedGraph {
        graph_id: "g".into(),
        node_ids: (0..n as u64).collect(),
        node_features: random_tensor(rng, n, D_X),
        edge_features: random_tensor(rng, edges.len(), D_E),
        edge_index: edges,
        labels: [vec![0; n], vec![0; n], vec![0; n]],
    }
}

pub fn graph(n: usize, edges: &[(usize, usize)], x: Tensor, e: Tensor) -> EncodedGraph {
    EncodedGraph {
        graph_id: "fixture".into(),
        node_ids: (0..n as u64).collect(),
        node_features: x,
        edge_features: e,
        edge_index: edges.to_vec(),
        labels: [vec![0; n], vec![0; n], vec![0; n]],
    }
}

pub fn leaky(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

pub fn run(store: &ParamStore, g: &EncodedGraph, f: impl Fn(&mut Tape<'_>, &GraphBatch, Var) -> Var) -> Tensor {
    let b = GraphBatch::single(g).unwrap();
    let mut tape = Tape::new(store);
    let h = tape.constant(b.x.clone()).unwrap();
    let out = f(&mut tape, &b, h);
    tape.value(out).clone()
}

pub fn p(store: &ParamStore, id: ParamId) -> Tensor {
    store.get(id).clone()
}

/// Bias row broadcast to `n` rows.
pub fn bias(store: &ParamStore, id: Option<ParamId>, n: usize, d: usize) -> Tensor {
    match id {
        Some(id) => Array2::from_shape_fn((n, d), |(_, j)| store.get(id)[[0, j]]),
        None => Tensor::zeros((n, d)),
    }
}

/// Randomizes every parameter so zero biases do not hide mistakes.
pub fn perturb(store: &mut ParamStore, rng: &mut ChaCha8Rng) {
    let ids: Vec<ParamId> = store.ids().collect();
    for id in ids {
        store.get_mut(id).mapv_inplace(|_| rng.gen_range(-1.0..1.0));
    }
}

/// Message matrix: row `e` is `h_src + e_e·W_e`.
pub fn messages(g: &EncodedGraph, h: &Tensor, we: &Tensor) -> Tensor {
    let mut m = Tensor::zeros((g.edge_index.len(), h.ncols()));
    let proj = g.edge_features.dot(we);
    for (k, &(u, _)) in g.edge_index.iter().enumerate() {
        m.row_mut(k).assign(&(&h.row(u) + &proj.row(k)));
    }
    m
}

pub fn sage_oracle(store: &ParamStore, l: &SageLayer, g: &EncodedGraph) -> Tensor {
    let n = g.num_nodes();
    let h = &g.node_features;
    let msg = messages(g, h, &p(store, l.edge.weight));
    let mut mean = Tensor::zeros((n, D_X));
    for v in 0..n {
        let ins: Vec<usize> = (0..g.edge_index.len()).filter(|&k| g.edge_index[k].1 == v).collect();
        for &k in &ins {
            mean.row_mut(v).scaled_add(1.0 / ins.len() as f64, &msg.row(k));
        }
    }
    h.dot(&p(store, l.self_lin.weight)) + bias(store, l.self_lin.bias, n, D_OUT) + mean.dot(&p(store, l.nbr_lin.weight))
}

pub fn gcn_oracle(store: &ParamStore, l: &GcnLayer, g: &EncodedGraph) -> Tensor {
    let n = g.num_nodes();
    let h = &g.node_features;
    let msg = messages(g, h, &p(store, l.edge.weight));
    let deg: Vec<f64> = (0..n)
        .map(|v| 1.0 + g.edge_index.iter().filter(|e| e.1 == v).count() as f64)
        .collect();
    let mut agg = Tensor::zeros((n, D_X));
    for (k, &(u, v)) in g.edge_index.iter().enumerate() {
        agg.row_mut(v).scaled_add(1.0 / (deg[u] * deg[v]).sqrt(), &msg.row(k));
    }
    for v in 0..n {
        agg.row_mut(v).scaled_add(1.0 / deg[v], &h.row(v));
    }
    agg.dot(&p(store, l.lin.weight)) + bias(store, l.lin.bias, n, D_OUT)
}

/// Attention per extended edge (in-edges then one self-loop per node) and
/// the layer output.
pub fn gat_oracle(store: &ParamStore, l: &GatLayer, g: &EncodedGraph) -> (Tensor, Tensor) {
    let n = g.num_nodes();
    let h = &g.node_features;
    let we = p(store, l.edge.weight);
    let mut edges = g.edge_index.clone();
    edges.extend((0..n).map(|v| (v, v)));
    let mut ext = g.clone();
    ext.edge_index = edges.clone();
    ext.edge_features = ndarray::concatenate![ndarray::Axis(0), g.edge_features, Tensor::zeros((n, D_E))];
    let msg = messages(&ext, h, &we);
    let per = D_OUT / l.heads.len();
    let mut out = Tensor::zeros((n, D_OUT));
    let mut alpha = Tensor::zeros((edges.len(), l.heads.len()));
    for (k, head) in l.heads.iter().enumerate() {
        let w = p(store, head.weight);
        let (ad, asrc) = (p(store, head.att_dst), p(store, head.att_src));
        let z = h.dot(&w);
        let zm = msg.dot(&w);
        let score: Vec<f64> = edges
            .iter()
            .enumerate()
            .map(|(e, &(_, v))| leaky(z.row(v).dot(&ad.column(0)) + zm.row(e).dot(&asrc.column(0))))
            .collect();
        for v in 0..n {
            let ins: Vec<usize> = (0..edges.len()).filter(|&e| edges[e].1 == v).collect();
            let max = ins.iter().map(|&e| score[e]).fold(f64::NEG_INFINITY, f64::max);
            let denom: f64 = ins.iter().map(|&e| (score[e] - max).exp()).sum();
            for &e in &ins {
                let a = (score[e] - max).exp() / denom;
                alpha[[e, k]] = a;
                for j in 0..per {
                    out[[v, k * per + j]] += a * zm[[e, j]];
                }
            }
        }
    }
    (alpha, out + bias(store, Some(l.bias), n, D_OUT))
}

pub fn gin_oracle(store: &ParamStore, l: &GinLayer, g: &EncodedGraph) -> Tensor {
    let n = g.num_nodes();
    let h = &g.node_features;
    let msg = messages(g, h, &p(store, l.edge.weight));
    let eps = l.epsilon.map_or(0.0, |id| store.get(id)[[0, 0]]);
    let mut s = h * (1.0 + eps);
    for (k, &(_, v)) in g.edge_index.iter().enumerate() {
        s.row_mut(v).scaled_add(1.0, &msg.row(k));
    }
    let z = (s.dot(&p(store, l.lin1.weight)) + bias(store, l.lin1.bias, n, D_OUT)).mapv(leaky);
    z.dot(&p(store, l.lin2.weight)) + bias(store, l.lin2.bias, n, D_OUT)
}

pub fn max_diff(a: &Tensor, b: &Tensor) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `Σ out ⊙ R` for a fixed random `R`, so every output entry matters.
pub fn probe(tape: &mut Tape<'_>, out: Var, r: &Tensor) -> Var {
    let r = tape.constant(r.clone()).unwrap();
    let prod = tape.mul(out, r).unwrap();
    tape.sum(prod).unwrap()
}
