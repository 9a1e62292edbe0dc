//! Attribute compression with minimum attribute trees.
//!
//! Strings are compared cheaply through byte histograms over a sliding window
//! of `M` neighbours, the resulting band graph is reduced to a minimum
//! spanning forest, and every kept tree edge stores the edit script from the
//! parent's string to the child's. Roots store their full string.

mod edit;
mod mst;
mod similarity;
mod tree;

use thiserror::Error;

pub use edit::{apply_edit_ops, edit_cost, get_edit_ops, EditOp};
pub use mst::{build_mst, TreeEdge};
pub use similarity::{bow_encode, compute_similarity_matrix, manhattan, ByteHistogram, SimilarityMatrix};
pub use tree::{
    build_attribute_tree, deserialize_tree, recover_attribute, serialize_tree, AttributeTree, AttributeTreeNode,
    RecoveryCache,
};

/// Default similarity window `M`.
pub const DEFAULT_WINDOW: usize = 4;
/// Default maximum histogram distance for a tree edge.
pub const DEFAULT_MAX_DISTANCE: u64 = 60;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AttrError {
    #[error("similarity window {0} is below 2")]
    WindowTooSmall(usize),
    #[error("edit op {index} out of bounds")]
    OpOutOfBounds { index: usize },
    #[error("unknown attribute id {0}")]
    UnknownId(usize),
    #[error("corrupt attribute tree section: {0}")]
    CorruptTreeSection(&'static str),
}
