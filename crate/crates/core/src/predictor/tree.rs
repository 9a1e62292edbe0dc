//! Depth-limited trees over categorical context features.
//!
//! Every split tests `context[feature] == value`; rows that match go to the
//! `matched` child. Trees are stored flat in preorder with the root at 0.

use super::{majority, PredictorError, TrainingSet, NUM_CLASSES};
use crate::varint::{self, Reader};

/// Deepest tree accepted from config or a blob.
pub(crate) const MAX_DEPTH: usize = 16;

const TAG_LEAF: u8 = 0;
const TAG_SPLIT: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node<L> {
    Leaf(L),
    Split { feature: u8, value: u8, matched: u32, other: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct FlatTree<L> {
    nodes: Vec<Node<L>>,
}

impl<L: Copy> FlatTree<L> {
    pub(crate) fn from_nodes(nodes: Vec<Node<L>>) -> Self {
        Self { nodes }
    }

    pub(crate) fn eval(&self, context: &[u8]) -> L {
        let mut at = 0usize;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split { feature, value, matched, other } => {
                    at = if context[usize::from(feature)] == value { matched } else { other } as usize;
                }
            }
        }
    }

    pub(crate) fn write(&self, out: &mut Vec<u8>, write_leaf: &impl Fn(&mut Vec<u8>, L)) {
        self.write_node(0, out, write_leaf);
    }

    fn write_node(&self, at: usize, out: &mut Vec<u8>, write_leaf: &impl Fn(&mut Vec<u8>, L)) {
        match self.nodes[at] {
            Node::Leaf(v) => {
                out.push(TAG_LEAF);
                write_leaf(out, v);
            }
            Node::Split { feature, value, matched, other } => {
                out.push(TAG_SPLIT);
                varint::write_u64(out, u64::from(feature));
                out.push(value);
                self.write_node(matched as usize, out, write_leaf);
                self.write_node(other as usize, out, write_leaf);
            }
        }
    }

    pub(crate) fn read(
        r: &mut Reader<'_>,
        window: usize,
        read_leaf: &impl Fn(&mut Reader<'_>) -> Result<L, PredictorError>,
    ) -> Result<Self, PredictorError> {
        let mut nodes = Vec::new();
        read_node(r, window, 0, &mut nodes, read_leaf)?;
        Ok(Self { nodes })
    }
}

fn read_node<L>(
    r: &mut Reader<'_>,
    window: usize,
    depth: usize,
    nodes: &mut Vec<Node<L>>,
    read_leaf: &impl Fn(&mut Reader<'_>) -> Result<L, PredictorError>,
) -> Result<u32, PredictorError> {
    let corrupt = |_| PredictorError::CorruptBlob("truncated tree");
    if depth > MAX_DEPTH {
        return Err(PredictorError::CorruptBlob("tree too deep"));
    }
    let at = nodes.len();
    match r.u8().map_err(corrupt)? {
        TAG_LEAF => nodes.push(Node::Leaf(read_leaf(r)?)),
        TAG_SPLIT => {
            let feature = r
                .varint_usize(window.saturating_sub(1))
                .map_err(|_| PredictorError::CorruptBlob("split feature outside the window"))?;
            let value = r.u8().map_err(corrupt)?;
            nodes.push(Node::Split { feature: feature as u8, value, matched: 0, other: 0 });
            let m = read_node(r, window, depth + 1, nodes, read_leaf)?;
            let o = read_node(r, window, depth + 1, nodes, read_leaf)?;
            nodes[at] = Node::Split { feature: feature as u8, value, matched: m, other: o };
        }
        _ => return Err(PredictorError::CorruptBlob("bad node tag")),
    }
    Ok(at as u32)
}

/// Best `feature == value` split found for a node.
pub(crate) struct SplitChoice {
    pub feature: u8,
    pub value: u8,
}

/// Splits `rows` into (matched, other), preserving order.
pub(crate) fn partition(set: &TrainingSet, rows: &[u32], split: &SplitChoice) -> (Vec<u32>, Vec<u32>) {
    let w = set.window();
    let f = usize::from(split.feature);
    let feats = set.features();
    rows.iter().partition(|&&i| feats[i as usize * w + f] == split.value)
}

/// Single classification tree, Gini impurity.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationTree {
    tree: FlatTree<u8>,
}

impl ClassificationTree {
    pub(crate) fn fit(set: &TrainingSet, max_depth: usize) -> Self {
        let rows: Vec<u32> = (0..set.len() as u32).collect();
        let mut nodes = Vec::new();
        grow_class(set, &rows, max_depth, &mut nodes);
        Self { tree: FlatTree { nodes } }
    }

    pub(crate) fn predict(&self, context: &[u8]) -> u8 {
        self.tree.eval(context)
    }

    pub(crate) fn write(&self, out: &mut Vec<u8>) {
        self.tree.write(out, &|out, class| out.push(class));
    }

    pub(crate) fn read(r: &mut Reader<'_>, window: usize) -> Result<Self, PredictorError> {
        let tree = FlatTree::read(r, window, &|r| {
            let c = r.u8().map_err(|_| PredictorError::CorruptBlob("truncated leaf"))?;
            if usize::from(c) >= NUM_CLASSES {
                return Err(PredictorError::CorruptBlob("leaf class out of range"));
            }
            Ok(c)
        })?;
        Ok(Self { tree })
    }
}

/// `n * gini` for a class histogram: `n - sum(c^2) / n`.
fn weighted_gini(counts: &[u64], n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let sq: u64 = counts.iter().map(|&c| c * c).sum();
    n as f64 - sq as f64 / n as f64
}

fn grow_class(set: &TrainingSet, rows: &[u32], depth_left: usize, nodes: &mut Vec<Node<u8>>) -> u32 {
    let at = nodes.len();
    let labels = set.labels();
    let mut counts = [0u64; NUM_CLASSES];
    for &i in rows {
        counts[usize::from(labels[i as usize])] += 1;
    }
    let leaf = majority(&counts);
    let n = rows.len() as u64;
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    nodes.push(Node::Leaf(leaf));
    if depth_left == 0 || pure {
        return at as u32;
    }

    let w = set.window();
    let feats = set.features();
    // hist[(feature * 13 + value) * 13 + class]
    let mut hist = vec![0u64; w * NUM_CLASSES * NUM_CLASSES];
    for &i in rows {
        let i = i as usize;
        let c = usize::from(labels[i]);
        for f in 0..w {
            let v = usize::from(feats[i * w + f]);
            hist[(f * NUM_CLASSES + v) * NUM_CLASSES + c] += 1;
        }
    }

    let parent = weighted_gini(&counts, n);
    let mut best: Option<(f64, SplitChoice)> = None;
    let mut other = [0u64; NUM_CLASSES];
    for f in 0..w {
        for v in 0..NUM_CLASSES {
            let base = (f * NUM_CLASSES + v) * NUM_CLASSES;
            let matched = &hist[base..base + NUM_CLASSES];
            let nm: u64 = matched.iter().sum();
            if nm == 0 || nm == n {
                continue;
            }
            for k in 0..NUM_CLASSES {
                other[k] = counts[k] - matched[k];
            }
            let score = weighted_gini(matched, nm) + weighted_gini(&other, n - nm);
            if parent - score > 1e-9 && best.as_ref().is_none_or(|(s, _)| score < *s) {
                best = Some((score, SplitChoice { feature: f as u8, value: v as u8 }));
            }
        }
    }

    let Some((_, split)) = best else {
        return at as u32;
    };
    let (m_rows, o_rows) = partition(set, rows, &split);
    let m = grow_class(set, &m_rows, depth_left - 1, nodes);
    let o = grow_class(set, &o_rows, depth_left - 1, nodes);
    nodes[at] = Node::Split { feature: split.feature, value: split.value, matched: m, other: o };
    at as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::make_training_set;

    #[test]
    fn learns_last_symbol_rule() {
        // label = 10 after a digit, 1 after 11
        let stream: Vec<u8> = [1u8, 10, 11].iter().copied().cycle().take(300).collect();
        let set = make_training_set(&stream, 3, 12);
        let tree = ClassificationTree::fit(&set, 3);
        let hits = (0..set.len()).filter(|&i| tree.predict(set.row(i)) == set.labels()[i]).count();
        assert!(hits >= set.len() - 1);
    }

    #[test]
    fn blob_round_trip() {
        let stream: Vec<u8> = (0..200u32).map(|i| ((i * 7 + i / 3) % 13) as u8).collect();
        let set = make_training_set(&stream, 4, 12);
        let tree = ClassificationTree::fit(&set, 4);
        let mut out = Vec::new();
        tree.write(&mut out);
        let back = ClassificationTree::read(&mut Reader::new(&out), 4).unwrap();
        assert_eq!(back, tree);
    }

    #[test]
    fn feature_outside_window_rejected() {
        // split on feature 5 with a window of 4
        let blob = [TAG_SPLIT, 5, 3, TAG_LEAF, 1, TAG_LEAF, 2];
        assert!(ClassificationTree::read(&mut Reader::new(&blob), 4).is_err());
        assert!(ClassificationTree::read(&mut Reader::new(&blob), 6).is_ok());
    }
}
