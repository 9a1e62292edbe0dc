//! Provenance graph ingestion and normalization.
//!
//! Input is line-delimited JSON with `node` and `edge` records. Nodes get
//! dense internal ids in first-appearance order; edges are re-indexed by the
//! canonical order `(src, dst, input position)`, so an edge's internal id is
//! its position when walking the adjacency lists front to back.

use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeRecord {
    pub external_id: u64,
    pub attr: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeRecord {
    pub external_id: u64,
    pub src: u64,
    pub dst: u64,
    pub attr: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    Node,
    Edge,
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecordKind::Node => "node",
            RecordKind::Edge => "edge",
        })
    }
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: RecordKind, id: u64 },
    #[error("edge {edge_id} references an undeclared node")]
    DanglingEndpoint { edge_id: u64 },
    #[error("graph too large: {0}")]
    TooLarge(&'static str),
    #[error("read failed: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum InputLine {
    Node {
        id: u64,
        #[serde(default)]
        attr: String,
    },
    Edge {
        id: u64,
        src: u64,
        dst: u64,
        #[serde(default)]
        attr: String,
    },
}

/// Parses line-delimited node/edge records, validating ids as it goes.
///
/// Blank lines and lines starting with `#` are skipped. An edge may only
/// reference nodes declared on earlier lines.
pub fn parse_input<R: BufRead>(reader: R) -> Result<(Vec<NodeRecord>, Vec<EdgeRecord>), GraphError> {
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut node_seen = HashMap::new();
    let mut edge_seen = HashMap::new();

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let rec: InputLine = serde_json::from_str(trimmed)
            .map_err(|e| GraphError::MalformedRecord { line: line_no, reason: e.to_string() })?;
        match rec {
            InputLine::Node { id, attr } => {
                if node_seen.insert(id, ()).is_some() {
                    return Err(GraphError::DuplicateId { kind: RecordKind::Node, id });
                }
                nodes.push(NodeRecord { external_id: id, attr: attr.into_bytes() });
            }
            InputLine::Edge { id, src, dst, attr } => {
                if edge_seen.insert(id, ()).is_some() {
                    return Err(GraphError::DuplicateId { kind: RecordKind::Edge, id });
                }
                if !node_seen.contains_key(&src) || !node_seen.contains_key(&dst) {
                    return Err(GraphError::DanglingEndpoint { edge_id: id });
                }
                edges.push(EdgeRecord { external_id: id, src, dst, attr: attr.into_bytes() });
            }
        }
    }
    Ok((nodes, edges))
}

/// Writes records in the line-delimited input format, nodes first.
///
/// Attributes must be valid UTF-8; invalid sequences are replaced.
pub fn write_input<W: std::io::Write>(mut out: W, nodes: &[NodeRecord], edges: &[EdgeRecord]) -> std::io::Result<()> {
    for n in nodes {
        let attr = serde_json::to_string(&String::from_utf8_lossy(&n.attr))?;
        writeln!(out, "{{\"type\":\"node\",\"id\":{},\"attr\":{attr}}}", n.external_id)?;
    }
    for e in edges {
        let attr = serde_json::to_string(&String::from_utf8_lossy(&e.attr))?;
        writeln!(
            out,
            "{{\"type\":\"edge\",\"id\":{},\"src\":{},\"dst\":{},\"attr\":{attr}}}",
            e.external_id, e.src, e.dst
        )?;
    }
    Ok(())
}

/// Normalized graph: dense ids, sorted adjacency, canonical edge order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProvenanceGraph {
    node_attrs: Vec<Vec<u8>>,
    edge_attrs: Vec<Vec<u8>>,
    adjacency: Vec<Vec<usize>>,
    node_ids: Vec<u64>,
    edge_ids: Vec<u64>,
}

/// Builds a [`ProvenanceGraph`] from record lists.
///
/// Ids are validated again here so callers that bypass [`parse_input`] get the
/// same guarantees; nodes may be declared in any order relative to edges.
pub fn normalize(nodes: Vec<NodeRecord>, edges: Vec<EdgeRecord>) -> Result<ProvenanceGraph, GraphError> {
    let mut index: HashMap<u64, usize> = HashMap::with_capacity(nodes.len());
    let mut node_ids = Vec::with_capacity(nodes.len());
    let mut node_attrs = Vec::with_capacity(nodes.len());
    for node in nodes {
        let next = index.len();
        if index.insert(node.external_id, next).is_some() {
            return Err(GraphError::DuplicateId { kind: RecordKind::Node, id: node.external_id });
        }
        node_ids.push(node.external_id);
        node_attrs.push(node.attr);
    }

    let mut seen_edges = HashMap::with_capacity(edges.len());
    let mut keyed = Vec::with_capacity(edges.len());
    for (pos, edge) in edges.into_iter().enumerate() {
        if seen_edges.insert(edge.external_id, ()).is_some() {
            return Err(GraphError::DuplicateId { kind: RecordKind::Edge, id: edge.external_id });
        }
        let (Some(&src), Some(&dst)) = (index.get(&edge.src), index.get(&edge.dst)) else {
            return Err(GraphError::DanglingEndpoint { edge_id: edge.external_id });
        };
        keyed.push((src, dst, pos, edge));
    }
    keyed.sort_unstable_by_key(|&(src, dst, pos, _)| (src, dst, pos));

    let mut adjacency = vec![Vec::new(); node_ids.len()];
    let mut edge_ids = Vec::with_capacity(keyed.len());
    let mut edge_attrs = Vec::with_capacity(keyed.len());
    for (src, dst, _, edge) in keyed {
        adjacency[src].push(dst);
        edge_ids.push(edge.external_id);
        edge_attrs.push(edge.attr);
    }

    Ok(ProvenanceGraph { node_attrs, edge_attrs, adjacency, node_ids, edge_ids })
}

impl ProvenanceGraph {
    pub fn node_count(&self) -> usize {
        self.node_attrs.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_attrs.len()
    }

    pub fn node_attrs(&self) -> &[Vec<u8>] {
        &self.node_attrs
    }

    pub fn edge_attrs(&self) -> &[Vec<u8>] {
        &self.edge_attrs
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    /// External node id for each internal id.
    pub fn node_ids(&self) -> &[u64] {
        &self.node_ids
    }

    /// External edge id for each canonical edge id.
    pub fn edge_ids(&self) -> &[u64] {
        &self.edge_ids
    }

    /// `(edge id, src, dst)` in canonical order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(src, succ)| succ.iter().map(move |&dst| (src, dst)))
            .enumerate()
            .map(|(id, (src, dst))| (id, src, dst))
    }

    pub fn reverse_adjacency(&self) -> Vec<Vec<usize>> {
        reverse_adjacency(&self.adjacency)
    }

    /// Whether external ids already coincide with internal ids.
    pub fn node_ids_are_dense(&self) -> bool {
        is_identity(&self.node_ids)
    }

    pub fn edge_ids_are_dense(&self) -> bool {
        is_identity(&self.edge_ids)
    }
}

pub(crate) fn is_identity(ids: &[u64]) -> bool {
    ids.iter().enumerate().all(|(i, &id)| id == i as u64)
}

/// Predecessor lists: `p` appears `k` times in `out[q]` iff `q` appears `k`
/// times in `adjacency[p]`. Lists come out sorted because sources are visited
/// in ascending order.
pub fn reverse_adjacency(adjacency: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut rev = vec![Vec::new(); adjacency.len()];
    for (src, succ) in adjacency.iter().enumerate() {
        for &dst in succ {
            rev[dst].push(src);
        }
    }
    rev
}
