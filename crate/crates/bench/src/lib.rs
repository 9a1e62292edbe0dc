//! Shared fixtures for the criterion benchmarks.

use provarc_core::graph::normalize;
use provarc_core::synth::{generate, SynthConfig};
use provarc_core::ProvenanceGraph;

/// A deterministic synthetic graph with `records` edges.
pub fn fixture(records: usize) -> ProvenanceGraph {
    let (nodes, edges) = generate(&SynthConfig { records, ..Default::default() });
    normalize(nodes, edges).expect("synthetic graphs are valid")
}
