//! Repository-export CSV parsing, per-system graph construction and
//! graph-level dataset splits.

use std::collections::{HashMap, HashSet};
use std::io::Read;

use funcgnn_numcore::rng::{stream, STREAM_SPLIT};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeRecord, NodeRecord, RelationalGraph};

pub const HEADER: [&str; 12] = [
    "system",
    "id",
    "component",
    "child_of",
    "material",
    "input_flow",
    "input_from",
    "output_flow",
    "output_to",
    "func_t1",
    "func_t2",
    "func_t3",
];

/// Optional trailing column carrying the product category.
pub const SYSTEM_TYPE_COLUMN: &str = "system_type";

/// Term used when a data row leaves a categorical field blank.
pub const UNKNOWN: &str = "unknown";

const MISSING: &str = "-";

/// Where a flow comes from or goes to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Endpoint {
    Component(i64),
    Internal,
    External,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowRef {
    pub flow: String,
    pub endpoint: Endpoint,
}

impl FlowRef {
    fn component(&self) -> Option<i64> {
        match self.endpoint {
            Endpoint::Component(c) => Some(c),
            _ => None,
        }
    }

    fn is_boundary(&self) -> bool {
        self.component().is_none()
    }
}

/// One typed CSV row. Text fields are trimmed and lower-cased; `-` becomes
/// `None`. Rows without a tier-1 function declare a component but produce
/// no node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRow {
    /// 1-based line in the source.
    pub line: u64,
    /// As written, after `-` inheritance from the previous row.
    pub system: String,
    pub system_type: Option<String>,
    pub id: i64,
    pub component: Option<String>,
    pub child_of: Option<i64>,
    pub material: Option<String>,
    pub input: Option<FlowRef>,
    pub output: Option<FlowRef>,
    pub function: [Option<String>; 3],
}

impl ArtifactRow {
    pub fn is_data_point(&self) -> bool {
        self.function[0].is_some()
    }
}

fn term(raw: &str) -> Option<String> {
    let t = raw.trim();
    if t.is_empty() || t == MISSING {
        None
    } else {
        Some(t.to_lowercase())
    }
}

fn parse_endpoint(raw: &str, line: u64) -> Result<Option<Endpoint>> {
    let t = raw.trim();
    if t.is_empty() || t == MISSING {
        return Ok(None);
    }
    match t.to_ascii_lowercase().as_str() {
        "int" => Ok(Some(Endpoint::Internal)),
        "ext" => Ok(Some(Endpoint::External)),
        other => other
            .parse::<i64>()
            .map(|c| Some(Endpoint::Component(c)))
            .map_err(|_| Error::Qualifier {
                line,
                value: t.to_string(),
            }),
    }
}

fn parse_flow(flow: &str, from: &str, side: &str, line: u64) -> Result<Option<FlowRef>> {
    let endpoint = parse_endpoint(from, line)?;
    match (term(flow), endpoint) {
        (None, None) => Ok(None),
        (Some(flow), Some(endpoint)) => Ok(Some(FlowRef { flow, endpoint })),
        (Some(_), None) => Err(Error::Parse {
            line,
            message: format!("{side} flow without a qualifier"),
        }),
        (None, Some(_)) => Err(Error::Parse {
            line,
            message: format!("{side} qualifier without a flow"),
        }),
    }
}

fn parse_int(raw: &str, field: &str, line: u64) -> Result<i64> {
    raw.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("{field} `{}` is not an integer", raw.trim()),
    })
}

/// Parses a CSV export. The header must be exactly [`HEADER`], optionally
/// followed by [`SYSTEM_TYPE_COLUMN`].
pub fn parse_rows<R: Read>(source: R) -> Result<Vec<ArtifactRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(source);
    let mut records = reader.records();

    let header = match records.next() {
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "missing header".into(),
            })
        }
        Some(r) => r?,
    };
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    let width = if cols[..] == HEADER[..] {
        12
    } else if cols.len() == 13 && cols[..12] == HEADER[..] && cols[12] == SYSTEM_TYPE_COLUMN {
        13
    } else {
        return Err(Error::Parse {
            line: 1,
            message: format!("unexpected header `{}`", cols.join(",")),
        });
    };

    let mut rows = Vec::new();
    let mut current_system: Option<String> = None;
    for record in records {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        if record.len() != width {
            return Err(Error::Parse {
                line,
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        let f = |i: usize| &record[i];

        let system = match f(0).trim() {
            "" | MISSING => current_system.clone().ok_or_else(|| Error::Parse {
                line,
                message: "first row does not name a system".into(),
            })?,
            s => s.to_string(),
        };
        current_system = Some(system.clone());

        let child_of = match f(3).trim() {
            "" | MISSING => None,
            s => Some(parse_int(s, "child_of", line)?),
        };
        rows.push(ArtifactRow {
            line,
            system,
            system_type: if width == 13 { term(f(12)) } else { None },
            id: parse_int(f(1), "id", line)?,
            component: term(f(2)),
            child_of,
            material: term(f(4)),
            input: parse_flow(f(5), f(6), "input", line)?,
            output: parse_flow(f(7), f(8), "output", line)?,
            function: [term(f(9)), term(f(10)), term(f(11))],
        });
    }
    check_components(&rows)?;
    Ok(rows)
}

/// Rows sharing `(system, id)` describe the same component and must agree on
/// it; `child_of` must name a component of the same system.
fn check_components(rows: &[ArtifactRow]) -> Result<()> {
    let mut seen: HashMap<(&str, i64), &ArtifactRow> = HashMap::new();
    for r in rows {
        if let Some(first) = seen.get(&(r.system.as_str(), r.id)) {
            let conflict = |a: &Option<String>, b: &Option<String>| matches!((a, b), (Some(x), Some(y)) if x != y);
            if conflict(&first.component, &r.component)
                || conflict(&first.material, &r.material)
                || first.child_of != r.child_of
            {
                return Err(Error::Parse {
                    line: r.line,
                    message: format!("component {} disagrees with line {}", r.id, first.line),
                });
            }
        } else {
            seen.insert((r.system.as_str(), r.id), r);
        }
    }
    for r in rows {
        if let Some(p) = r.child_of {
            if !seen.contains_key(&(r.system.as_str(), p)) {
                return Err(Error::Parse {
                    line: r.line,
                    message: format!("child_of {p} references an absent component"),
                });
            }
        }
    }
    Ok(())
}

/// A system dropped from the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejection {
    pub system: String,
    pub reason: String,
}

/// Builds one graph per system, in order of first appearance. Fails if any
/// system has no data point.
pub fn build_graphs(rows: &[ArtifactRow]) -> Result<Vec<RelationalGraph>> {
    group_by_system(rows).into_iter().map(|(s, r)| build_system(s, &r)).collect()
}

/// Like [`build_graphs`] but drops rejected systems and reports them.
pub fn build_corpus(rows: &[ArtifactRow]) -> Result<(Vec<RelationalGraph>, Vec<Rejection>)> {
    let mut graphs = Vec::new();
    let mut rejected = Vec::new();
    for (system, rows) in group_by_system(rows) {
        match build_system(system, &rows) {
            Ok(g) => graphs.push(g),
            Err(e @ Error::SystemRejected(_)) => rejected.push(Rejection {
                system: system.to_string(),
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    Ok((graphs, rejected))
}

fn group_by_system(rows: &[ArtifactRow]) -> Vec<(&str, Vec<&ArtifactRow>)> {
    let mut order: Vec<(&str, Vec<&ArtifactRow>)> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for r in rows {
        let i = *index.entry(r.system.as_str()).or_insert_with(|| {
            order.push((r.system.as_str(), Vec::new()));
            order.len() - 1
        });
        order[i].1.push(r);
    }
    order
}

fn build_system(system: &str, rows: &[&ArtifactRow]) -> Result<RelationalGraph> {
    let points: Vec<&ArtifactRow> = rows.iter().copied().filter(|r| r.is_data_point()).collect();
    if points.is_empty() {
        return Err(Error::SystemRejected(system.to_string()));
    }
    let system_name = system.trim().to_lowercase();
    let system_type = rows
        .iter()
        .find_map(|r| r.system_type.clone())
        .unwrap_or_else(|| UNKNOWN.to_string());

    let nodes: Vec<NodeRecord> = points
        .iter()
        .enumerate()
        .map(|(i, r)| NodeRecord {
            node_id: i as u64,
            component_basis: r.component.clone().unwrap_or_else(|| UNKNOWN.into()),
            system_name: system_name.clone(),
            system_type: system_type.clone(),
            material: r.material.clone().unwrap_or_else(|| UNKNOWN.into()),
            label_t1: r.function[0].clone().unwrap_or_default(),
            label_t2: r.function[1].clone(),
            label_t3: r.function[2].clone(),
            source_component_id: r.id,
        })
        .collect();

    let mut by_component: HashMap<i64, Vec<usize>> = HashMap::new();
    for (i, r) in points.iter().enumerate() {
        by_component.entry(r.id).or_default().push(i);
    }
    let members = |c: i64| by_component.get(&c).map(Vec::as_slice).unwrap_or(&[]);

    let mut edges = Vec::new();
    let mut seen: HashSet<(usize, usize, String)> = HashSet::new();
    let mut add_flow = |edges: &mut Vec<EdgeRecord>, u: usize, v: usize, f: &str| {
        if seen.insert((u, v, f.to_string())) {
            edges.push(EdgeRecord::flow(u as u64, v as u64, Some(f.into()), Some(f.into())));
        }
    };

    for (v, r) in points.iter().enumerate() {
        let boundary_in = r.input.as_ref().filter(|f| f.is_boundary()).map(|f| f.flow.clone());
        let boundary_out = r.output.as_ref().filter(|f| f.is_boundary()).map(|f| f.flow.clone());
        if boundary_in.is_some() || boundary_out.is_some() {
            edges.push(EdgeRecord::flow(v as u64, v as u64, boundary_in, boundary_out));
        }

        // Consumer: pair with producers of the same flow aimed at this component,
        // or with every node of the source component when none is explicit.
        if let Some(input) = &r.input {
            if let Some(a) = input.component() {
                let explicit: Vec<usize> = members(a)
                    .iter()
                    .copied()
                    .filter(|&u| {
                        points[u]
                            .output
                            .as_ref()
                            .is_some_and(|o| o.flow == input.flow && o.endpoint == Endpoint::Component(r.id))
                    })
                    .collect();
                let sources = if explicit.is_empty() { members(a).to_vec() } else { explicit };
                for u in sources {
                    add_flow(&mut edges, u, v, &input.flow);
                }
            }
        }

        if let Some(output) = &r.output {
            if let Some(b) = output.component() {
                let explicit: Vec<usize> = members(b)
                    .iter()
                    .copied()
                    .filter(|&w| {
                        points[w]
                            .input
                            .as_ref()
                            .is_some_and(|i| i.flow == output.flow && i.endpoint == Endpoint::Component(r.id))
                    })
                    .collect();
                let targets = if explicit.is_empty() { members(b).to_vec() } else { explicit };
                for w in targets {
                    add_flow(&mut edges, v, w, &output.flow);
                }
            }
        }
    }

    let mut parent_of: Vec<(i64, i64)> = Vec::new();
    for r in rows {
        if let Some(p) = r.child_of {
            if p != r.id && !parent_of.contains(&(r.id, p)) {
                parent_of.push((r.id, p));
            }
        }
    }
    for (child, parent) in parent_of {
        for &c in members(child) {
            for &p in members(parent) {
                edges.push(EdgeRecord::assembly(c as u64, p as u64));
            }
        }
    }

    let graph = RelationalGraph {
        graph_id: system.to_string(),
        nodes,
        edges,
    };
    graph.validate()?;
    Ok(graph)
}

/// Graph-level train/validation/test partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub seed: u64,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

pub const DEFAULT_FRACTIONS: (f64, f64, f64) = (0.6, 0.1, 0.3);

/// Split sizes: floor for validation and test (at least one each), the
/// remainder to training.
pub fn split_sizes(n: usize, fractions: (f64, f64, f64)) -> Result<(usize, usize, usize)> {
    let (a, b, c) = fractions;
    if [a, b, c].iter().any(|f| !(0.0..=1.0).contains(f)) || ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(Error::Split(format!("fractions {a}/{b}/{c} must be in [0, 1] and sum to 1")));
    }
    if n < 3 {
        return Err(Error::Split(format!("need at least 3 graphs, got {n}")));
    }
    let val = ((n as f64 * b + 1e-9).floor() as usize).max(1);
    let test = ((n as f64 * c + 1e-9).floor() as usize).max(1);
    if val + test >= n {
        return Err(Error::Split(format!("{n} graphs leave no training graph")));
    }
    Ok((n - val - test, val, test))
}

pub fn split_graphs(graphs: &[RelationalGraph], seed: u64, fractions: (f64, f64, f64)) -> Result<SplitAssignment> {
    let ids: Vec<String> = graphs.iter().map(|g| g.graph_id.clone()).collect();
    split_ids(&ids, seed, fractions)
}

pub fn split_ids(ids: &[String], seed: u64, fractions: (f64, f64, f64)) -> Result<SplitAssignment> {
    let unique: HashSet<&String> = ids.iter().collect();
    if unique.len() != ids.len() {
        return Err(Error::Split("duplicate graph ids".into()));
    }
    let (n_train, n_val, _) = split_sizes(ids.len(), fractions)?;
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.shuffle(&mut stream(seed, STREAM_SPLIT));
    let pick = |r: std::ops::Range<usize>| order[r].iter().map(|&i| ids[i].clone()).collect();
    Ok(SplitAssignment {
        seed,
        train: pick(0..n_train),
        val: pick(n_train..n_train + n_val),
        test: pick(n_train + n_val..ids.len()),
    })
}
