use std::sync::{Arc, OnceLock};

use rayon::prelude::*;

use super::{apply_edit_ops, build_mst, get_edit_ops, AttrError, EditOp, SimilarityMatrix};
use crate::varint::{self, Reader};

const OP_INSERT: u8 = 0;
const OP_DELETE: u8 = 1;
const OP_SUBSTITUTE: u8 = 2;

/// One corpus entry. A node whose parent is itself is a root and its ops
/// build the string from empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeTreeNode {
    pub parent: usize,
    pub ops: Vec<EditOp>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AttributeTree {
    nodes: Vec<AttributeTreeNode>,
    max_dis: u64,
}

impl AttributeTree {
    /// Checks parent links (in range, acyclic) before accepting the nodes.
    pub fn from_nodes(nodes: Vec<AttributeTreeNode>, max_dis: u64) -> Result<Self, AttrError> {
        check_forest(&nodes)?;
        Ok(Self { nodes, max_dis })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn max_dis(&self) -> u64 {
        self.max_dis
    }

    pub fn nodes(&self) -> &[AttributeTreeNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> Option<&AttributeTreeNode> {
        self.nodes.get(id)
    }

    pub fn is_root(&self, id: usize) -> bool {
        self.nodes.get(id).is_some_and(|n| n.parent == id)
    }

    pub fn root_count(&self) -> usize {
        (0..self.nodes.len()).filter(|&i| self.is_root(i)).count()
    }
}

fn check_forest(nodes: &[AttributeTreeNode]) -> Result<(), AttrError> {
    const UNSEEN: u8 = 0;
    const ACTIVE: u8 = 1;
    const DONE: u8 = 2;
    let n = nodes.len();
    if nodes.iter().any(|node| node.parent >= n) {
        return Err(AttrError::CorruptTreeSection("parent id out of range"));
    }
    let mut state = vec![UNSEEN; n];
    let mut path = Vec::new();
    for start in 0..n {
        let mut at = start;
        while state[at] == UNSEEN {
            state[at] = ACTIVE;
            path.push(at);
            let p = nodes[at].parent;
            if p == at {
                break;
            }
            at = p;
        }
        if state[at] == ACTIVE && nodes[at].parent != at {
            return Err(AttrError::CorruptTreeSection("parent links form a cycle"));
        }
        for &p in &path {
            state[p] = DONE;
        }
        path.clear();
    }
    Ok(())
}

/// Turns the minimum spanning forest into a tree of edit scripts.
///
/// Forest edges longer than `max_dis` are dropped; their children, and every
/// component root, store the full string instead.
pub fn build_attribute_tree<S: AsRef<[u8]> + Sync>(
    corpus: &[S],
    matrix: &SimilarityMatrix,
    max_dis: u64,
) -> AttributeTree {
    let n = corpus.len();
    assert_eq!(matrix.len(), n, "matrix built over a different corpus");
    let kept: Vec<_> = build_mst(matrix).into_iter().filter(|e| e.distance <= max_dis).collect();
    let linked: Vec<(usize, usize, Vec<EditOp>)> = kept
        .par_iter()
        .map(|e| (e.parent, e.child, get_edit_ops(corpus[e.parent].as_ref(), corpus[e.child].as_ref())))
        .collect();

    let mut nodes: Vec<Option<AttributeTreeNode>> = vec![None; n];
    for (parent, child, ops) in linked {
        nodes[child] = Some(AttributeTreeNode { parent, ops });
    }
    let nodes = nodes
        .into_iter()
        .enumerate()
        .map(|(id, node)| {
            node.unwrap_or_else(|| {
                let s = corpus[id].as_ref();
                let ops = if s.is_empty() { Vec::new() } else { vec![EditOp::Insert { pos: 0, bytes: s.to_vec() }] };
                AttributeTreeNode { parent: id, ops }
            })
        })
        .collect();
    AttributeTree { nodes, max_dis }
}

/// Compute-once store of recovered strings, shareable across threads.
#[derive(Debug)]
pub struct RecoveryCache {
    slots: Vec<OnceLock<Arc<[u8]>>>,
}

impl RecoveryCache {
    pub fn new(len: usize) -> Self {
        Self { slots: (0..len).map(|_| OnceLock::new()).collect() }
    }

    pub fn cached(&self) -> usize {
        self.slots.iter().filter(|s| s.get().is_some()).count()
    }
}

/// Rebuilds string `id` by walking to its root and replaying ops downward.
/// With a cache, the walk stops at the first recovered ancestor and every
/// string on the path is stored.
pub fn recover_attribute(
    tree: &AttributeTree,
    id: usize,
    cache: Option<&RecoveryCache>,
) -> Result<Arc<[u8]>, AttrError> {
    if id >= tree.len() {
        return Err(AttrError::UnknownId(id));
    }
    let cached = |i: usize| cache.and_then(|c| c.slots.get(i)).and_then(|s| s.get()).cloned();

    let mut path = Vec::new();
    let mut at = id;
    let mut current: Option<Arc<[u8]>> = None;
    loop {
        if let Some(s) = cached(at) {
            current = Some(s);
            break;
        }
        path.push(at);
        let parent = tree.nodes[at].parent;
        if parent == at {
            break;
        }
        at = parent;
    }

    let mut s: Arc<[u8]> = current.unwrap_or_else(|| Arc::from(&[][..]));
    for &node in path.iter().rev() {
        let next: Arc<[u8]> = apply_edit_ops(&s, &tree.nodes[node].ops)?.into();
        s = match cache.and_then(|c| c.slots.get(node)) {
            Some(slot) => slot.get_or_init(|| next).clone(),
            None => next,
        };
    }
    Ok(s)
}

/// Section layout: varint N, then per node varint parent, varint op count,
/// and each op as a kind byte (0 insert, 1 delete, 2 substitute) followed by
/// `pos, len, bytes` or `start, stop`.
pub fn serialize_tree(tree: &AttributeTree) -> Vec<u8> {
    let mut out = Vec::new();
    varint::write_u64(&mut out, tree.nodes.len() as u64);
    for node in &tree.nodes {
        varint::write_u64(&mut out, node.parent as u64);
        varint::write_u64(&mut out, node.ops.len() as u64);
        for op in &node.ops {
            match op {
                EditOp::Insert { pos, bytes } | EditOp::Substitute { pos, bytes } => {
                    out.push(if matches!(op, EditOp::Insert { .. }) { OP_INSERT } else { OP_SUBSTITUTE });
                    varint::write_u64(&mut out, *pos as u64);
                    varint::write_u64(&mut out, bytes.len() as u64);
                    out.extend_from_slice(bytes);
                }
                EditOp::Delete { start, stop } => {
                    out.push(OP_DELETE);
                    varint::write_u64(&mut out, *start as u64);
                    varint::write_u64(&mut out, *stop as u64);
                }
            }
        }
    }
    out
}

pub fn deserialize_tree(bytes: &[u8], max_dis: u64) -> Result<AttributeTree, AttrError> {
    let corrupt = |_| AttrError::CorruptTreeSection("truncated");
    let mut r = Reader::new(bytes);
    let n = r.varint_usize(bytes.len()).map_err(corrupt)?;
    let mut nodes = Vec::with_capacity(n);
    for _ in 0..n {
        let parent = r.varint_usize(usize::MAX).map_err(corrupt)?;
        let op_count = r.varint_usize(r.remaining()).map_err(corrupt)?;
        let mut ops = Vec::with_capacity(op_count);
        for _ in 0..op_count {
            let kind = r.u8().map_err(corrupt)?;
            let op = match kind {
                OP_INSERT | OP_SUBSTITUTE => {
                    let pos = r.varint_usize(usize::MAX).map_err(corrupt)?;
                    let len = r.varint_usize(r.remaining()).map_err(corrupt)?;
                    if len == 0 {
                        return Err(AttrError::CorruptTreeSection("empty op string"));
                    }
                    let bytes = r.bytes(len).map_err(corrupt)?.to_vec();
                    if kind == OP_INSERT {
                        EditOp::Insert { pos, bytes }
                    } else {
                        EditOp::Substitute { pos, bytes }
                    }
                }
                OP_DELETE => {
                    let start = r.varint_usize(usize::MAX).map_err(corrupt)?;
                    let stop = r.varint_usize(usize::MAX).map_err(corrupt)?;
                    if stop < start {
                        return Err(AttrError::CorruptTreeSection("deletion range reversed"));
                    }
                    EditOp::Delete { start, stop }
                }
                _ => return Err(AttrError::CorruptTreeSection("unknown op kind")),
            };
            ops.push(op);
        }
        nodes.push(AttributeTreeNode { parent, ops });
    }
    if !r.is_empty() {
        return Err(AttrError::CorruptTreeSection("trailing bytes"));
    }
    AttributeTree::from_nodes(nodes, max_dis)
}
