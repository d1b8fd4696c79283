//! Synthetic product corpora in the repository CSV format.
//!
//! Generated data is for tests, demos and smoke runs only. Function labels
//! are a fixed function of the component basis, so every corpus is
//! separable from node features alone.

use std::fmt::Write;

use funcgnn_numcore::rng::stream;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::Result;
use crate::graph::RelationalGraph;
use crate::ingest::{build_graphs, parse_rows, HEADER, SYSTEM_TYPE_COLUMN};

const BASES: &[&str] = &["blade", "handle", "shaft", "gear", "housing", "spring", "screw", "motor"];
const MATERIALS: &[&str] = &["steel", "plastic", "rubber", "aluminum"];
const FLOWS: &[&str] = &["solid", "mechanical energy", "electrical energy", "status", "human"];
const TYPES: &[&str] = &["kitchen", "tool", "appliance"];
const TIER1: &[&str] = &["channel", "support", "convert", "branch"];
const TIER2: &[&str] = &["import", "secure", "guide", "separate", "export"];
const TIER3: &[&str] = &["stabilize", "inhibit", "position"];

/// Generation bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub graphs: usize,
    pub min_components: usize,
    pub max_components: usize,
    pub max_rows_per_component: usize,
}

impl SyntheticSpec {
    pub fn new(graphs: usize) -> Self {
        Self {
            graphs,
            min_components: 2,
            max_components: 4,
            max_rows_per_component: 3,
        }
    }
}

/// Labels of a basis term: `(tier 1, tier 2, tier 3 or "-")`.
pub fn labels_of(basis: usize) -> (&'static str, &'static str, &'static str) {
    (
        TIER1[basis % TIER1.len()],
        TIER2[basis % TIER2.len()],
        if basis % 3 == 0 { "-" } else { TIER3[basis % TIER3.len()] },
    )
}

fn qualifier<R: Rng>(rng: &mut R, own: usize, components: usize) -> String {
    match rng.gen_range(0..4) {
        0 => "Int".into(),
        1 => "Ext".into(),
        _ => {
            let mut other = rng.gen_range(1..=components);
            if other == own {
                other = other % components + 1;
            }
            other.to_string()
        }
    }
}

/// CSV text with the optional system-type column.
pub fn synthetic_csv(spec: SyntheticSpec, seed: u64) -> String {
    let mut rng = stream(seed, 0x5EED);
    let mut out = HEADER.join(",");
    out.push(',');
    out.push_str(SYSTEM_TYPE_COLUMN);
    out.push('\n');
    for g in 0..spec.graphs {
        let system = format!("Synthetic Product {g:03}");
        let kind = TYPES[g % TYPES.len()];
        let k = rng.gen_range(spec.min_components..=spec.max_components.max(spec.min_components));
        let mut bases: Vec<usize> = (0..BASES.len()).collect();
        bases.shuffle(&mut rng);
        let mut first = true;
        for c in 1..=k {
            let basis = bases[(c - 1) % bases.len()];
            let material = MATERIALS[rng.gen_range(0..MATERIALS.len())];
            let parent = if c == 1 { "-".to_string() } else { rng.gen_range(1..c).to_string() };
            let (t1, t2, t3) = labels_of(basis);
            for _ in 0..rng.gen_range(1..=spec.max_rows_per_component) {
                let fin = FLOWS[rng.gen_range(0..FLOWS.len())];
                let fout = FLOWS[rng.gen_range(0..FLOWS.len())];
                let from = qualifier(&mut rng, c, k);
                let to = qualifier(&mut rng, c, k);
                let name = if first { system.as_str() } else { "-" };
                first = false;
                writeln!(
                    out,
                    "{name},{c},{},{parent},{material},{fin},{from},{fout},{to},{t1},{t2},{t3},{kind}",
                    BASES[basis]
                )
                .expect("write to string");
            }
        }
    }
    out
}

/// Parsed and built synthetic corpus.
pub fn synthetic_corpus(spec: SyntheticSpec, seed: u64) -> Result<Vec<RelationalGraph>> {
    build_graphs(&parse_rows(synthetic_csv(spec, seed).as_bytes())?)
}
