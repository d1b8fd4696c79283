//! Corpus statistics in the style of a `describe()` table.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::RelationalGraph;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphStat {
    pub graph_id: String,
    pub nodes: usize,
    /// Stored edges: each assembly edge counts once.
    pub edges: usize,
    pub flow_edges: usize,
    pub assembly_edges: usize,
    /// `edges / (n (n − 1))`; may exceed 1 in a multigraph. Zero for `n < 2`.
    pub density: f64,
    /// `2 · edges / n`.
    pub mean_degree: f64,
}

/// Summary of one per-graph quantity across the corpus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Describe {
    pub mean: f64,
    /// Sample standard deviation (n − 1); zero for a single value.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    /// Adjusted Fisher–Pearson skewness (G1).
    pub skewness: f64,
    /// Adjusted excess kurtosis (G2).
    pub kurtosis: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub graphs: Vec<GraphStat>,
    pub total_nodes: usize,
    pub total_edges: usize,
    pub nodes: Describe,
    pub edges: Describe,
    pub density: Describe,
    pub degree: Describe,
    /// Share of stored edges that are assembly edges, pooled over the corpus.
    pub assembly_fraction: f64,
    pub flow_fraction: f64,
}

impl Describe {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
        let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>();
        let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>();
        let std = if values.len() > 1 { (m2 / (n - 1.0)).sqrt() } else { 0.0 };

        let skewness = if values.len() > 2 && m2 > 0.0 {
            let g1 = (m3 / n) / (m2 / n).powf(1.5);
            g1 * (n * (n - 1.0)).sqrt() / (n - 2.0)
        } else {
            0.0
        };
        let kurtosis = if values.len() > 3 && m2 > 0.0 {
            let g2 = (m4 / n) / (m2 / n).powi(2) - 3.0;
            (n - 1.0) / ((n - 2.0) * (n - 3.0)) * ((n + 1.0) * g2 + 6.0)
        } else {
            0.0
        };

        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        Self {
            mean,
            std,
            min: sorted[0],
            max: sorted[sorted.len() - 1],
            q25: quantile(&sorted, 0.25),
            q50: quantile(&sorted, 0.5),
            q75: quantile(&sorted, 0.75),
            skewness,
            kurtosis,
        }
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn graph_stat(g: &RelationalGraph) -> GraphStat {
    let n = g.nodes.len();
    let flow = g.num_flow_edges();
    let assembly = g.num_assembly_edges();
    let edges = flow + assembly;
    let density = if n > 1 {
        edges as f64 / (n * (n - 1)) as f64
    } else {
        0.0
    };
    let mean_degree = if n > 0 { 2.0 * edges as f64 / n as f64 } else { 0.0 };
    GraphStat {
        graph_id: g.graph_id.clone(),
        nodes: n,
        edges,
        flow_edges: flow,
        assembly_edges: assembly,
        density,
        mean_degree,
    }
}

pub fn graph_stats(graphs: &[RelationalGraph]) -> Result<StatsReport> {
    if graphs.is_empty() {
        return Err(Error::CorpusEmpty);
    }
    let per: Vec<GraphStat> = graphs.iter().map(graph_stat).collect();
    let col = |f: fn(&GraphStat) -> f64| per.iter().map(f).collect::<Vec<_>>();
    let total_edges: usize = per.iter().map(|s| s.edges).sum();
    let assembly: usize = per.iter().map(|s| s.assembly_edges).sum();
    let assembly_fraction = if total_edges > 0 {
        assembly as f64 / total_edges as f64
    } else {
        0.0
    };
    Ok(StatsReport {
        total_nodes: per.iter().map(|s| s.nodes).sum(),
        total_edges,
        nodes: Describe::of(&col(|s| s.nodes as f64)),
        edges: Describe::of(&col(|s| s.edges as f64)),
        density: Describe::of(&col(|s| s.density)),
        degree: Describe::of(&col(|s| s.mean_degree)),
        assembly_fraction,
        flow_fraction: if total_edges > 0 { 1.0 - assembly_fraction } else { 0.0 },
        graphs: per,
    })
}

impl StatsReport {
    /// Human-readable summary table.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "{} graphs, {} nodes, {} edges\n{:<8} {:>9} {:>9} {:>8} {:>9} {:>9} {:>9} {:>9} {:>8} {:>8}\n",
            self.graphs.len(),
            self.total_nodes,
            self.total_edges,
            "",
            "mean",
            "std",
            "min",
            "max",
            "q25",
            "q50",
            "q75",
            "skew",
            "kurt"
        );
        for (name, d) in [
            ("#nodes", &self.nodes),
            ("#edges", &self.edges),
            ("density", &self.density),
            ("degree", &self.degree),
        ] {
            out.push_str(&format!(
                "{:<8} {:>9.2} {:>9.2} {:>8.2} {:>9.2} {:>9.2} {:>9.2} {:>9.2} {:>8.2} {:>8.2}\n",
                name, d.mean, d.std, d.min, d.max, d.q25, d.q50, d.q75, d.skewness, d.kurtosis
            ));
        }
        out.push_str(&format!(
            "{:.2}% of edges are assembly and {:.2}% are flows\n",
            100.0 * self.assembly_fraction,
            100.0 * self.flow_fraction
        ));
        out
    }

    /// Per-graph CSV rows with a fixed header.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            "graph_id",
            "nodes",
            "edges",
            "flow_edges",
            "assembly_edges",
            "density",
            "mean_degree",
        ])?;
        for s in &self.graphs {
            wr.write_record([
                s.graph_id.clone(),
                s.nodes.to_string(),
                s.edges.to_string(),
                s.flow_edges.to_string(),
                s.assembly_edges.to_string(),
                format!("{:.6}", s.density),
                format!("{:.6}", s.mean_degree),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}
