//! Independent reference implementations and generators shared by the
//! integration tests. Nothing here calls into the code under test except to
//! build inputs.

#![allow(dead_code)]

use std::cell::Cell;
use std::collections::VecDeque;

use provarc_core::graph::{normalize, EdgeRecord, NodeRecord, ProvenanceGraph};
use provarc_core::query::Direction;
use provarc_core::SymbolPredictor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_bytes(rng: &mut ChaCha8Rng, max_len: usize) -> Vec<u8> {
    let len = rng.gen_range(0..=max_len);
    // small alphabet half the time so strings share structure
    if rng.gen_bool(0.5) {
        (0..len).map(|_| b"abcd"[rng.gen_range(0..4)]).collect()
    } else {
        (0..len).map(|_| rng.gen()).collect()
    }
}

/// Random records with sparse external ids, multi-edges, self-loops and empty
/// attributes.
pub fn random_records(
    rng: &mut ChaCha8Rng,
    max_v: usize,
    max_e: usize,
    max_attr: usize,
) -> (Vec<NodeRecord>, Vec<EdgeRecord>) {
    let v = rng.gen_range(0..=max_v);
    let e = if v == 0 { 0 } else { rng.gen_range(0..=max_e) };
    let sparse = rng.gen_bool(0.3);
    let mut ids: Vec<u64> = (0..v as u64).map(|i| if sparse { i * 7 + 3 } else { i }).collect();
    if sparse {
        // first-appearance order need not be sorted
        ids.reverse();
    }
    let nodes = ids.iter().map(|&id| NodeRecord { external_id: id, attr: random_bytes(rng, max_attr) }).collect();
    let hub_bias = rng.gen_bool(0.5);
    let edges = (0..e)
        .map(|k| {
            let src = if hub_bias && rng.gen_bool(0.5) { ids[0] } else { ids[rng.gen_range(0..v)] };
            let dst = if rng.gen_bool(0.05) { src } else { ids[rng.gen_range(0..v)] };
            EdgeRecord { external_id: 1000 + k as u64 * 3, src, dst, attr: random_bytes(rng, max_attr) }
        })
        .collect();
    (nodes, edges)
}

pub fn random_graph(rng: &mut ChaCha8Rng, max_v: usize, max_e: usize, max_attr: usize) -> ProvenanceGraph {
    let (nodes, edges) = random_records(rng, max_v, max_e, max_attr);
    normalize(nodes, edges).unwrap()
}

/// Textbook O(nm) Levenshtein distance.
pub fn levenshtein(a: &[u8], b: &[u8]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for i in 1..=a.len() {
        cur[0] = i;
        for j in 1..=b.len() {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn histogram_distance(a: &[u8], b: &[u8]) -> u64 {
    let mut h = [0i64; 256];
    for &x in a {
        h[x as usize] += 1;
    }
    for &x in b {
        h[x as usize] -= 1;
    }
    h.iter().map(|c| c.unsigned_abs()).sum()
}

/// Band graph over `corpus`: every pair closer than `window` positions.
pub fn band_edges(corpus: &[Vec<u8>], window: usize) -> Vec<(usize, usize, u64)> {
    let n = corpus.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n.min(i + window) {
            out.push((i, j, histogram_distance(&corpus[i], &corpus[j])));
        }
    }
    out
}

/// Prim's algorithm on a dense distance table restricted to `edges`;
/// returns the total weight of a minimum spanning forest.
pub fn prim_forest_weight(n: usize, edges: &[(usize, usize, u64)]) -> u64 {
    let mut w = vec![vec![u64::MAX; n]; n];
    for &(a, b, d) in edges {
        w[a][b] = w[a][b].min(d);
        w[b][a] = w[b][a].min(d);
    }
    let mut in_tree = vec![false; n];
    let mut total = 0;
    for start in 0..n {
        if in_tree[start] {
            continue;
        }
        let mut best = vec![u64::MAX; n];
        best[start] = 0;
        loop {
            let next = (0..n).filter(|&v| !in_tree[v] && best[v] != u64::MAX).min_by_key(|&v| best[v]);
            let Some(u) = next else { break };
            in_tree[u] = true;
            total += best[u];
            for v in 0..n {
                if !in_tree[v] && w[u][v] < best[v] {
                    best[v] = w[u][v];
                }
            }
        }
    }
    total
}

/// Minimum spanning-forest weight by trying every edge subset. Only for tiny
/// graphs.
pub fn exhaustive_forest_weight(n: usize, edges: &[(usize, usize, u64)]) -> u64 {
    assert!(edges.len() <= 20);
    let components = |mask: u32| -> (usize, bool) {
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            if p[x] == x {
                x
            } else {
                let r = find(p, p[x]);
                p[x] = r;
                r
            }
        }
        let mut acyclic = true;
        let mut comps = n;
        for (k, &(a, b, _)) in edges.iter().enumerate() {
            if mask >> k & 1 == 1 {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra == rb {
                    acyclic = false;
                } else {
                    parent[ra] = rb;
                    comps -= 1;
                }
            }
        }
        (comps, acyclic)
    };
    let (min_comps, _) = components((1u32 << edges.len()) - 1);
    let mut best = u64::MAX;
    for mask in 0..(1u32 << edges.len()) {
        let (comps, acyclic) = components(mask);
        if acyclic && comps == min_comps {
            let w = edges.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, e)| e.2).sum();
            best = best.min(w);
        }
    }
    best
}

/// Outcome of a reference traversal: node ids in visit order, edge ids in
/// traversal order, and the truncation flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleTrace {
    pub nodes: Vec<usize>,
    pub edges: Vec<usize>,
    pub truncated: bool,
}

/// Breadth-first trace on the uncompressed graph. Every traversed edge and
/// every newly seen node counts towards `limit`; the item that reaches it is
/// kept and nothing after.
pub fn oracle_trace(graph: &ProvenanceGraph, start: usize, direction: Direction, limit: usize) -> OracleTrace {
    let n = graph.node_count();
    // (neighbour, edge id), sorted by neighbour then edge id
    let mut incident: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (id, src, dst) in graph.edges() {
        match direction {
            Direction::Forward => incident[src].push((dst, id)),
            Direction::Backward => incident[dst].push((src, id)),
        }
    }
    for list in &mut incident {
        list.sort_unstable();
    }

    let mut seen = vec![false; n];
    seen[start] = true;
    let mut out = OracleTrace { nodes: vec![start], edges: Vec::new(), truncated: false };
    let full = |o: &OracleTrace| o.nodes.len() + o.edges.len() >= limit;
    if full(&out) {
        out.truncated = true;
        return out;
    }
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        for &(v, e) in &incident[u] {
            out.edges.push(e);
            if full(&out) {
                out.truncated = true;
                return out;
            }
            if !seen[v] {
                seen[v] = true;
                out.nodes.push(v);
                queue.push_back(v);
                if full(&out) {
                    out.truncated = true;
                    return out;
                }
            }
        }
    }
    out
}

/// Predicts from a fixed script, one symbol per call, ignoring context.
/// Calls must happen in stream order, which is how both table construction
/// and reconstruction drive a predictor.
pub struct ScriptedPredictor {
    script: Vec<u8>,
    next: Cell<usize>,
}

impl ScriptedPredictor {
    pub fn new(script: Vec<u8>) -> Self {
        Self { script, next: Cell::new(0) }
    }

    /// Always returns the true symbol.
    pub fn replay(stream: &[u8]) -> Self {
        Self::new(stream.to_vec())
    }

    /// Never returns the true symbol.
    pub fn always_wrong(stream: &[u8]) -> Self {
        Self::new(stream.iter().map(|&s| (s + 1) % 13).collect())
    }
}

impl SymbolPredictor for ScriptedPredictor {
    fn window(&self) -> usize {
        0
    }

    fn predict_symbol(&self, _context: &[u8]) -> u8 {
        let i = self.next.get();
        self.next.set(i + 1);
        self.script.get(i).copied().unwrap_or(0)
    }
}
