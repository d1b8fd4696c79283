//! Small labelled graphs and models for the three-tier checks.

use funcgnn::gnn::{EncoderSpec, GraphBatch, LayerKind};
use funcgnn::graph::EncodedGraph;
use funcgnn::hiernet::{HierModel, ModelSpec, Wiring};
use funcgnn_numcore::rng::stream;
use funcgnn_numcore::Tensor;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CLASSES: [usize; 3] = [3, 4, 2];
pub const D_X: usize = 4;
pub const D_E: usize = 2;

pub fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> EncodedGraph {
    let m = rng.gen_range(0..=2 * n);
    let edges: Vec<(usize, usize)> = (0..m).map(|_| (rng.gen_range(0..n), rng.gen_range(0..n))).collect();
    EncodedGraph {
        graph_id: format!("g{n}"),
        node_ids: (0..n as u64).collect(),
        node_features: Array2::from_shape_fn((n, D_X), |_| rng.gen_range(-1.0..1.0)),
        edge_features: Array2::from_shape_fn((edges.len(), D_E), |_| rng.gen_range(-1.0..1.0)),
        edge_index: edges,
        labels: std::array::from_fn(|k| (0..n).map(|_| rng.gen_range(0..CLASSES[k])).collect()),
    }
}

/// Four nodes on a directed cycle, one-hot features, labels a function of the node.
pub fn toy() -> EncodedGraph {
    EncodedGraph {
        graph_id: "toy".into(),
        node_ids: vec![0, 1, 2, 3],
        node_features: Tensor::eye(D_X),
        edge_index: vec![(0, 1), (1, 2), (2, 3), (3, 0)],
        edge_features: Array2::from_shape_fn((4, D_E), |(i, j)| ((i + j) % 2) as f64),
        labels: [vec![0, 1, 2, 0], vec![3, 1, 0, 2], vec![1, 0, 1, 0]],
    }
}

pub fn small_spec(kind: LayerKind, wiring: Wiring) -> ModelSpec {
    ModelSpec::uniform(
        EncoderSpec {
            kind,
            num_layers: 2,
            hidden_dim: 6,
            ..EncoderSpec::tuned(kind)
        },
        wiring,
    )
}

pub fn model(kind: LayerKind, wiring: Wiring, seed: u64) -> HierModel {
    HierModel::new(small_spec(kind, wiring), D_X, D_E, CLASSES, &mut stream(seed, 2)).unwrap()
}

pub fn unit_weights() -> [Vec<f64>; 3] {
    std::array::from_fn(|k| vec![1.0; CLASSES[k]])
}

pub fn batch(seed: u64) -> (Vec<EncodedGraph>, GraphBatch) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let graphs: Vec<EncodedGraph> = (3..6).map(|n| random_graph(&mut rng, n)).collect();
    let b = GraphBatch::from_graphs(&graphs.iter().collect::<Vec<_>>()).unwrap();
    (graphs, b)
}
