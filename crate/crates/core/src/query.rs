//! Provenance queries over a stored archive.
//!
//! [`WarmState::warm_up`] replays the predictor once to rebuild the adjacency
//! lists; it does not keep the model, so traces never predict. Traces are
//! breadth-first, visiting neighbours in ascending id order, and stop as soon
//! as the number of returned nodes plus edges reaches the limit. The item that
//! reaches the limit is included.

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use thiserror::Error;

use crate::archive::Archive;
use crate::attr::{recover_attribute, AttrError, AttributeTree, RecoveryCache};
use crate::calibration::{reconstruct_stream, CalibrationError};
use crate::predictor::CountingPredictor;
use crate::structure::{decode_structure_bounded, StructureError};

pub const DEFAULT_LIMIT: usize = 4096;

#[derive(Debug, Error)]
pub enum QueryError {
    #[error("unknown node {0}")]
    UnknownNode(usize),
    #[error("query limit must be at least 1")]
    InvalidLimit,
    #[error(transparent)]
    Attr(#[from] AttrError),
}

#[derive(Debug, Error)]
pub enum WarmUpError {
    #[error("structure reconstruction failed: {0}")]
    Calibration(#[from] CalibrationError),
    #[error("structure decoding failed: {0}")]
    Structure(#[from] StructureError),
    #[error("reconstructed structure has {got} edges, header says {expected}")]
    EdgeCount { expected: u64, got: u64 },
    #[error("archive counts do not fit in memory")]
    TooLarge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryRequest {
    pub start: usize,
    pub direction: Direction,
    pub limit: usize,
}

impl QueryRequest {
    pub fn forward(start: usize) -> Self {
        Self { start, direction: Direction::Forward, limit: DEFAULT_LIMIT }
    }

    pub fn backward(start: usize) -> Self {
        Self { start, direction: Direction::Backward, limit: DEFAULT_LIMIT }
    }

    pub fn with_limit(self, limit: usize) -> Self {
        Self { limit, ..self }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryNode {
    pub id: usize,
    pub attr: Arc<[u8]>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryEdge {
    pub id: usize,
    pub src: usize,
    pub dst: usize,
    pub attr: Arc<[u8]>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QueryResult {
    pub nodes: Vec<QueryNode>,
    pub edges: Vec<QueryEdge>,
    pub truncated: bool,
}

/// Decoded structure plus attribute trees, ready for traces.
#[derive(Debug)]
pub struct WarmState {
    adjacency: Vec<Vec<usize>>,
    /// Canonical id of the first edge leaving each node.
    edge_offsets: Vec<usize>,
    /// `(predecessor, edge id)` per node, built on the first backward trace.
    reverse: OnceLock<Vec<Vec<(usize, usize)>>>,
    node_tree: AttributeTree,
    edge_tree: AttributeTree,
    node_cache: RecoveryCache,
    edge_cache: RecoveryCache,
    node_ids: Option<Vec<u64>>,
    edge_ids: Option<Vec<u64>>,
    node_index: Option<HashMap<u64, usize>>,
    warm_up_predictions: u64,
}

impl WarmState {
    pub fn warm_up(archive: Archive) -> Result<Self, WarmUpError> {
        let h = &archive.header;
        let node_count = usize::try_from(h.node_count).map_err(|_| WarmUpError::TooLarge)?;
        let counting = CountingPredictor::new(&archive.model);
        let stream = reconstruct_stream(&counting, &archive.table, h.pad_symbol)?;
        let adjacency = decode_structure_bounded(stream.as_slice(), node_count, h.edge_count)?;
        let got: usize = adjacency.iter().map(Vec::len).sum();
        if got as u64 != h.edge_count {
            return Err(WarmUpError::EdgeCount { expected: h.edge_count, got: got as u64 });
        }
        let warm_up_predictions = counting.calls();

        let mut edge_offsets = Vec::with_capacity(node_count);
        let mut next = 0;
        for succ in &adjacency {
            edge_offsets.push(next);
            next += succ.len();
        }
        let node_index =
            archive.node_ids.as_ref().map(|ids| ids.iter().enumerate().map(|(i, &ext)| (ext, i)).collect());

        Ok(Self {
            adjacency,
            edge_offsets,
            reverse: OnceLock::new(),
            node_cache: RecoveryCache::new(archive.node_tree.len()),
            edge_cache: RecoveryCache::new(archive.edge_tree.len()),
            node_tree: archive.node_tree,
            edge_tree: archive.edge_tree,
            node_ids: archive.node_ids,
            edge_ids: archive.edge_ids,
            node_index,
            warm_up_predictions,
        })
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_tree.len()
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    /// Predictor calls made while warming up (one per stream symbol).
    pub fn warm_up_predictions(&self) -> u64 {
        self.warm_up_predictions
    }

    pub fn reverse_built(&self) -> bool {
        self.reverse.get().is_some()
    }

    pub fn external_node_id(&self, internal: usize) -> u64 {
        self.node_ids.as_ref().map_or(internal as u64, |ids| ids[internal])
    }

    pub fn external_edge_id(&self, internal: usize) -> u64 {
        self.edge_ids.as_ref().map_or(internal as u64, |ids| ids[internal])
    }

    pub fn internal_node_id(&self, external: u64) -> Option<usize> {
        match &self.node_index {
            Some(map) => map.get(&external).copied(),
            None => usize::try_from(external).ok().filter(|&i| i < self.node_count()),
        }
    }

    pub fn node_attr(&self, id: usize) -> Result<Arc<[u8]>, AttrError> {
        recover_attribute(&self.node_tree, id, Some(&self.node_cache))
    }

    pub fn edge_attr(&self, id: usize) -> Result<Arc<[u8]>, AttrError> {
        recover_attribute(&self.edge_tree, id, Some(&self.edge_cache))
    }

    fn reverse(&self) -> &[Vec<(usize, usize)>] {
        self.reverse.get_or_init(|| {
            let mut rev = vec![Vec::new(); self.adjacency.len()];
            for (src, succ) in self.adjacency.iter().enumerate() {
                for (k, &dst) in succ.iter().enumerate() {
                    rev[dst].push((src, self.edge_offsets[src] + k));
                }
            }
            rev
        })
    }

    /// `(neighbour, edge id, src, dst)` for each edge touching `u` in the
    /// direction of travel.
    fn neighbours(&self, u: usize, direction: Direction) -> Vec<(usize, usize, usize, usize)> {
        match direction {
            Direction::Forward => {
                self.adjacency[u].iter().enumerate().map(|(k, &v)| (v, self.edge_offsets[u] + k, u, v)).collect()
            }
            Direction::Backward => self.reverse()[u].iter().map(|&(p, e)| (p, e, p, u)).collect(),
        }
    }

    pub fn trace(&self, request: &QueryRequest) -> Result<QueryResult, QueryError> {
        if request.limit == 0 {
            return Err(QueryError::InvalidLimit);
        }
        if request.start >= self.node_count() {
            return Err(QueryError::UnknownNode(request.start));
        }

        let mut visited = vec![false; self.node_count()];
        let mut node_ids = vec![request.start];
        let mut edge_ids = Vec::new();
        visited[request.start] = true;
        let mut queue = VecDeque::from([request.start]);
        let mut truncated = request.limit <= 1;

        'bfs: while !truncated {
            let Some(u) = queue.pop_front() else { break };
            for (v, edge, src, dst) in self.neighbours(u, request.direction) {
                edge_ids.push((edge, src, dst));
                if node_ids.len() + edge_ids.len() >= request.limit {
                    truncated = true;
                    break 'bfs;
                }
                if !visited[v] {
                    visited[v] = true;
                    node_ids.push(v);
                    queue.push_back(v);
                    if node_ids.len() + edge_ids.len() >= request.limit {
                        truncated = true;
                        break 'bfs;
                    }
                }
            }
        }

        let nodes = node_ids
            .into_iter()
            .map(|id| Ok(QueryNode { id, attr: self.node_attr(id)? }))
            .collect::<Result<Vec<_>, AttrError>>()?;
        let edges = edge_ids
            .into_iter()
            .map(|(id, src, dst)| Ok(QueryEdge { id, src, dst, attr: self.edge_attr(id)? }))
            .collect::<Result<Vec<_>, AttrError>>()?;
        Ok(QueryResult { nodes, edges, truncated })
    }

    /// Independent traces, in the order of `starts`.
    pub fn batch_trace(
        &self,
        starts: &[usize],
        direction: Direction,
        limit: usize,
    ) -> Vec<Result<QueryResult, QueryError>> {
        starts.par_iter().map(|&start| self.trace(&QueryRequest { start, direction, limit })).collect()
    }
}
