//! Relational assembly-flow graphs, their vocabularies and numeric encoding.
//!
//! A graph holds one node per repository data point (a component performing
//! one function on one pair of flows). Flow edges are directed; assembly
//! edges are stored once and become two directed edges when encoded.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use funcgnn_numcore::Tensor;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Flow slot value for "no flow on this side of the edge".
pub const FLOW_NONE: &str = "none";
/// Label for a missing tier-2 or tier-3 function.
pub const UNSPECIFIED: &str = "unspecified";

/// Flow-basis terms that belong to the "material" branch of the flow taxonomy.
pub const MATERIAL_FLOWS: &[&str] = &[
    "material",
    "human",
    "gas",
    "liquid",
    "solid",
    "object",
    "particulate",
    "composite",
    "plasma",
    "mixture",
    "gas-gas",
    "liquid-liquid",
    "solid-solid",
    "solid-liquid",
    "liquid-gas",
    "solid-gas",
    "solid-liquid-gas",
    "colloidal",
];

/// Sorted list of unique terms with a term → position index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    name: String,
    terms: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new(name: impl Into<String>, terms: impl IntoIterator<Item = String>) -> Self {
        let terms: Vec<String> = terms.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self {
            name: name.into(),
            terms,
            index,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, i: usize) -> &str {
        &self.terms[i]
    }
}

impl Serialize for Vocabulary {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            name: &'a str,
            terms: &'a [String],
        }
        Repr {
            name: &self.name,
            terms: &self.terms,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            name: String,
            terms: Vec<String>,
        }
        let r = Repr::deserialize(d)?;
        if r.terms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(serde::de::Error::custom(format!(
                "vocabulary `{}` is not strictly sorted",
                r.name
            )));
        }
        Ok(Vocabulary::new(r.name, r.terms))
    }
}

/// The categorical dictionaries that fix feature and label dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabularies {
    pub component: Vocabulary,
    pub system_name: Vocabulary,
    pub system_type: Vocabulary,
    pub material: Vocabulary,
    pub flow: Vocabulary,
    pub tier1: Vocabulary,
    pub tier2: Vocabulary,
    pub tier3: Vocabulary,
}

impl Vocabularies {
    /// Label vocabulary of tier `k + 1`.
    pub fn tier(&self, k: usize) -> &Vocabulary {
        match k {
            0 => &self.tier1,
            1 => &self.tier2,
            _ => &self.tier3,
        }
    }

    pub fn class_counts(&self) -> [usize; 3] {
        [self.tier1.len(), self.tier2.len(), self.tier3.len()]
    }

    /// Full node-feature width.
    pub fn node_dim(&self) -> usize {
        self.component.len() + self.system_name.len() + self.system_type.len() + self.material.len()
    }

    /// Full edge-feature width: in-flow one-hot, out-flow one-hot, assembly flag.
    pub fn edge_dim(&self) -> usize {
        2 * self.flow.len() + 1
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("vocabularies serialize");
        hex::encode(Sha256::digest(&json))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub node_id: u64,
    pub component_basis: String,
    pub system_name: String,
    pub system_type: String,
    pub material: String,
    pub label_t1: String,
    /// `None` encodes as the reserved `unspecified` class.
    pub label_t2: Option<String>,
    pub label_t3: Option<String>,
    pub source_component_id: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Flow,
    Assembly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub src: u64,
    pub dst: u64,
    pub kind: EdgeKind,
    /// `None` encodes as the reserved `none` flow.
    pub in_flow: Option<String>,
    pub out_flow: Option<String>,
}

impl EdgeRecord {
    pub fn assembly(src: u64, dst: u64) -> Self {
        Self {
            src,
            dst,
            kind: EdgeKind::Assembly,
            in_flow: None,
            out_flow: None,
        }
    }

    pub fn flow(src: u64, dst: u64, in_flow: Option<String>, out_flow: Option<String>) -> Self {
        Self {
            src,
            dst,
            kind: EdgeKind::Flow,
            in_flow,
            out_flow,
        }
    }

    fn is_material_flow(&self) -> bool {
        [&self.in_flow, &self.out_flow]
            .into_iter()
            .flatten()
            .any(|f| MATERIAL_FLOWS.contains(&f.as_str()))
    }
}

/// Directed attributed multigraph of one product.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationalGraph {
    pub graph_id: String,
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
}

impl RelationalGraph {
    /// Checks node-id uniqueness, edge endpoints and per-kind edge rules.
    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: String| Error::InvalidGraph {
            graph: self.graph_id.clone(),
            reason,
        };
        let mut ids = HashSet::new();
        for n in &self.nodes {
            if !ids.insert(n.node_id) {
                return Err(invalid(format!("duplicate node id {}", n.node_id)));
            }
        }
        for e in &self.edges {
            if !ids.contains(&e.src) || !ids.contains(&e.dst) {
                return Err(Error::DanglingEdge {
                    graph: self.graph_id.clone(),
                    src: e.src,
                    dst: e.dst,
                });
            }
            match e.kind {
                EdgeKind::Assembly => {
                    if e.in_flow.is_some() || e.out_flow.is_some() {
                        return Err(invalid(format!("assembly edge {}->{} carries flows", e.src, e.dst)));
                    }
                    if e.src == e.dst {
                        return Err(invalid(format!("assembly self-loop on node {}", e.src)));
                    }
                }
                EdgeKind::Flow => {
                    if e.in_flow.is_none() && e.out_flow.is_none() {
                        return Err(invalid(format!("flow edge {}->{} has no flow", e.src, e.dst)));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn num_flow_edges(&self) -> usize {
        self.edges.iter().filter(|e| e.kind == EdgeKind::Flow).count()
    }

    pub fn num_assembly_edges(&self) -> usize {
        self.edges.iter().filter(|e| e.kind == EdgeKind::Assembly).count()
    }
}

fn check_term(field: &'static str, term: &str, reserved: &[&str]) -> Result<()> {
    if term.trim().is_empty() {
        return Err(Error::EmptyTerm { field });
    }
    if reserved.contains(&term) {
        return Err(Error::ReservedTermConflict {
            field,
            term: term.to_string(),
        });
    }
    Ok(())
}

/// Collects sorted vocabularies over a corpus. The flow vocabulary always
/// holds `none`; tier-2/3 vocabularies always hold `unspecified`.
pub fn build_vocabularies(graphs: &[RelationalGraph]) -> Result<Vocabularies> {
    if graphs.is_empty() {
        return Err(Error::CorpusEmpty);
    }
    let mut component = BTreeSet::new();
    let mut system_name = BTreeSet::new();
    let mut system_type = BTreeSet::new();
    let mut material = BTreeSet::new();
    let mut flow = BTreeSet::from([FLOW_NONE.to_string()]);
    let mut t1 = BTreeSet::new();
    let mut t2 = BTreeSet::from([UNSPECIFIED.to_string()]);
    let mut t3 = BTreeSet::from([UNSPECIFIED.to_string()]);
    for g in graphs {
        for n in &g.nodes {
            check_term("component_basis", &n.component_basis, &[])?;
            check_term("system_name", &n.system_name, &[])?;
            check_term("system_type", &n.system_type, &[])?;
            check_term("material", &n.material, &[])?;
            check_term("label_t1", &n.label_t1, &[UNSPECIFIED])?;
            component.insert(n.component_basis.clone());
            system_name.insert(n.system_name.clone());
            system_type.insert(n.system_type.clone());
            material.insert(n.material.clone());
            t1.insert(n.label_t1.clone());
            if let Some(l) = &n.label_t2 {
                check_term("label_t2", l, &[UNSPECIFIED])?;
                t2.insert(l.clone());
            }
            if let Some(l) = &n.label_t3 {
                check_term("label_t3", l, &[UNSPECIFIED])?;
                t3.insert(l.clone());
            }
        }
        for e in &g.edges {
            for f in [&e.in_flow, &e.out_flow].into_iter().flatten() {
                check_term("flow", f, &[FLOW_NONE])?;
                flow.insert(f.clone());
            }
        }
    }
    if t1.is_empty() {
        return Err(Error::CorpusEmpty);
    }
    Ok(Vocabularies {
        component: Vocabulary::new("component_basis", component),
        system_name: Vocabulary::new("system_name", system_name),
        system_type: Vocabulary::new("system_type", system_type),
        material: Vocabulary::new("material", material),
        flow: Vocabulary::new("flow", flow),
        tier1: Vocabulary::new("function_tier1", t1),
        tier2: Vocabulary::new("function_tier2", t2),
        tier3: Vocabulary::new("function_tier3", t3),
    })
}

/// Which node attribute blocks survive encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeMask {
    pub component: bool,
    pub system_name: bool,
    pub system_type: bool,
    pub material: bool,
}

impl NodeMask {
    pub const ALL: NodeMask = NodeMask {
        component: true,
        system_name: true,
        system_type: true,
        material: true,
    };
    pub const NONE: NodeMask = NodeMask {
        component: false,
        system_name: false,
        system_type: false,
        material: false,
    };
    pub const COMPONENT: NodeMask = NodeMask {
        component: true,
        ..NodeMask::NONE
    };
    pub const SYSTEM_NAME: NodeMask = NodeMask {
        system_name: true,
        ..NodeMask::NONE
    };
    pub const SYSTEM_TYPE: NodeMask = NodeMask {
        system_type: true,
        ..NodeMask::NONE
    };
    pub const MATERIAL: NodeMask = NodeMask {
        material: true,
        ..NodeMask::NONE
    };

    pub fn is_empty(&self) -> bool {
        *self == Self::NONE
    }
}

impl FromStr for NodeMask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "all" => NodeMask::ALL,
            "none" => NodeMask::NONE,
            "component" => NodeMask::COMPONENT,
            "system-name" => NodeMask::SYSTEM_NAME,
            "system-type" => NodeMask::SYSTEM_TYPE,
            "material" => NodeMask::MATERIAL,
            other => return Err(Error::Config(format!("unknown node mask `{other}`"))),
        })
    }
}

impl fmt::Display for NodeMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match (self.component, self.system_name, self.system_type, self.material) {
            (true, true, true, true) => "all",
            (false, false, false, false) => "none",
            (true, false, false, false) => "component",
            (false, true, false, false) => "system-name",
            (false, false, true, false) => "system-type",
            (false, false, false, true) => "material",
            _ => "custom",
        };
        f.write_str(s)
    }
}

/// Which edges and edge features survive encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeMask {
    /// All edges, full features.
    All,
    /// Flow edges only; the assembly flag column is dropped.
    FlowOnly,
    /// Assembly edges only; the flow one-hot blocks are dropped.
    AssemblyOnly,
    /// All edges, each carrying the constant feature 1.
    Featureless,
    /// Assembly edges plus flow edges carrying a material flow, full features.
    MaterialFlowAssembly,
}

impl FromStr for EdgeMask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "all" => EdgeMask::All,
            "flow" | "flow-only" => EdgeMask::FlowOnly,
            "assembly" | "assembly-only" => EdgeMask::AssemblyOnly,
            "featureless" | "none" => EdgeMask::Featureless,
            "material-flow+assembly" => EdgeMask::MaterialFlowAssembly,
            other => return Err(Error::Config(format!("unknown edge mask `{other}`"))),
        })
    }
}

impl fmt::Display for EdgeMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeMask::All => "all",
            EdgeMask::FlowOnly => "flow",
            EdgeMask::AssemblyOnly => "assembly",
            EdgeMask::Featureless => "featureless",
            EdgeMask::MaterialFlowAssembly => "material-flow+assembly",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureMask {
    pub node: NodeMask,
    pub edge: EdgeMask,
}

impl FeatureMask {
    pub const FULL: FeatureMask = FeatureMask {
        node: NodeMask::ALL,
        edge: EdgeMask::All,
    };

    pub fn node_dim(&self, v: &Vocabularies) -> usize {
        if self.node.is_empty() {
            return 1;
        }
        let m = self.node;
        [
            (m.component, v.component.len()),
            (m.system_name, v.system_name.len()),
            (m.system_type, v.system_type.len()),
            (m.material, v.material.len()),
        ]
        .iter()
        .filter(|(keep, _)| *keep)
        .map(|(_, n)| n)
        .sum()
    }

    pub fn edge_dim(&self, v: &Vocabularies) -> usize {
        match self.edge {
            EdgeMask::All | EdgeMask::MaterialFlowAssembly => v.edge_dim(),
            EdgeMask::FlowOnly => 2 * v.flow.len(),
            EdgeMask::AssemblyOnly | EdgeMask::Featureless => 1,
        }
    }
}

impl Default for FeatureMask {
    fn default() -> Self {
        Self::FULL
    }
}

impl fmt::Display for FeatureMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.node, self.edge)
    }
}

/// Numeric form of a graph, ready for message passing.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedGraph {
    pub graph_id: String,
    pub node_ids: Vec<u64>,
    pub node_features: Tensor,
    /// Directed `(src, dst)` row indices after assembly edges are doubled.
    pub edge_index: Vec<(usize, usize)>,
    pub edge_features: Tensor,
    pub labels: [Vec<usize>; 3],
}

impl EncodedGraph {
    pub fn num_nodes(&self) -> usize {
        self.node_ids.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edge_index.len()
    }
}

fn lookup(v: &Vocabulary, field: &'static str, term: &str) -> Result<usize> {
    v.get(term).ok_or_else(|| Error::UnknownTerm {
        field,
        term: term.to_string(),
    })
}

/// Node labels as class indices for the three tiers.
pub fn encode_labels(n: &NodeRecord, v: &Vocabularies) -> Result<[usize; 3]> {
    Ok([
        lookup(&v.tier1, "label_t1", &n.label_t1)?,
        lookup(&v.tier2, "label_t2", n.label_t2.as_deref().unwrap_or(UNSPECIFIED))?,
        lookup(&v.tier3, "label_t3", n.label_t3.as_deref().unwrap_or(UNSPECIFIED))?,
    ])
}

/// Full encoding: multi-hot nodes, doubled assembly edges, `2F + 1` edge features.
pub fn encode_graph(g: &RelationalGraph, v: &Vocabularies) -> Result<EncodedGraph> {
    encode_graph_masked(g, v, FeatureMask::FULL)
}

/// Encoding with feature blocks and edge kinds removed per `mask`.
pub fn encode_graph_masked(
    g: &RelationalGraph,
    v: &Vocabularies,
    mask: FeatureMask,
) -> Result<EncodedGraph> {
    g.validate()?;
    let n = g.nodes.len();
    let row_of: HashMap<u64, usize> = g.nodes.iter().enumerate().map(|(i, n)| (n.node_id, i)).collect();

    let node_dim = mask.node_dim(v);
    let mut x = Tensor::zeros((n, node_dim));
    let mut labels = [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
    for (i, node) in g.nodes.iter().enumerate() {
        let blocks = [
            (mask.node.component, &v.component, "component_basis", &node.component_basis),
            (mask.node.system_name, &v.system_name, "system_name", &node.system_name),
            (mask.node.system_type, &v.system_type, "system_type", &node.system_type),
            (mask.node.material, &v.material, "material", &node.material),
        ];
        let mut offset = 0;
        for (keep, vocab, field, term) in blocks {
            // Unknown terms are an error even when the block is masked out.
            let idx = lookup(vocab, field, term)?;
            if keep {
                x[[i, offset + idx]] = 1.0;
                offset += vocab.len();
            }
        }
        if mask.node.is_empty() {
            x[[i, 0]] = 1.0;
        }
        let l = encode_labels(node, v)?;
        for k in 0..3 {
            labels[k].push(l[k]);
        }
    }

    let flows = v.flow.len();
    let none = lookup(&v.flow, "flow", FLOW_NONE)?;
    let mut edge_index = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let edge_dim = mask.edge_dim(v);
    for e in &g.edges {
        let keep = match mask.edge {
            EdgeMask::All | EdgeMask::Featureless => true,
            EdgeMask::FlowOnly => e.kind == EdgeKind::Flow,
            EdgeMask::AssemblyOnly => e.kind == EdgeKind::Assembly,
            EdgeMask::MaterialFlowAssembly => e.kind == EdgeKind::Assembly || e.is_material_flow(),
        };
        let in_idx = match &e.in_flow {
            Some(f) => lookup(&v.flow, "flow", f)?,
            None => none,
        };
        let out_idx = match &e.out_flow {
            Some(f) => lookup(&v.flow, "flow", f)?,
            None => none,
        };
        if !keep {
            continue;
        }
        let mut feat = vec![0.0; edge_dim];
        match mask.edge {
            EdgeMask::All | EdgeMask::MaterialFlowAssembly => {
                feat[in_idx] = 1.0;
                feat[flows + out_idx] = 1.0;
                if e.kind == EdgeKind::Assembly {
                    feat[2 * flows] = 1.0;
                }
            }
            EdgeMask::FlowOnly => {
                feat[in_idx] = 1.0;
                feat[flows + out_idx] = 1.0;
            }
            EdgeMask::AssemblyOnly | EdgeMask::Featureless => feat[0] = 1.0,
        }
        let (s, d) = (row_of[&e.src], row_of[&e.dst]);
        edge_index.push((s, d));
        rows.push(feat.clone());
        if e.kind == EdgeKind::Assembly {
            edge_index.push((d, s));
            rows.push(feat);
        }
    }
    let m = edge_index.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let edge_features = Tensor::from_shape_vec((m, edge_dim), flat).expect("edge rows");

    Ok(EncodedGraph {
        graph_id: g.graph_id.clone(),
        node_ids: g.nodes.iter().map(|n| n.node_id).collect(),
        node_features: x,
        edge_index,
        edge_features,
        labels,
    })
}

/// Categorical node attributes recovered from a fully encoded feature row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedNode {
    pub component_basis: String,
    pub system_name: String,
    pub system_type: String,
    pub material: String,
}

/// Inverse of the full node encoding: argmax per one-hot block.
pub fn decode_nodes(features: &Tensor, v: &Vocabularies) -> Result<Vec<DecodedNode>> {
    if features.ncols() != v.node_dim() {
        return Err(Error::Shape(format!(
            "decode expects {} columns, got {}",
            v.node_dim(),
            features.ncols()
        )));
    }
    let blocks = [&v.component, &v.system_name, &v.system_type, &v.material];
    Ok(features
        .rows()
        .into_iter()
        .map(|row| {
            let mut offset = 0;
            let mut out = Vec::with_capacity(4);
            for vocab in blocks {
                let slice = row.slice(ndarray::s![offset..offset + vocab.len()]);
                let best = argmax(slice.iter().copied());
                out.push(vocab.term(best).to_string());
                offset += vocab.len();
            }
            DecodedNode {
                component_basis: out[0].clone(),
                system_name: out[1].clone(),
                system_type: out[2].clone(),
                material: out[3].clone(),
            }
        })
        .collect())
}

/// Index of the first maximum.
pub fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}
