//! Multiclass gradient boosting with a softmax objective.
//!
//! Each round fits one regression tree per class on the softmax gradient and
//! hessian (second-order leaf weights with L2 penalty). Scores start at the
//! smoothed log class prior, so a model with zero rounds predicts the
//! majority symbol. After training the model keeps the shortest prefix of
//! rounds with the best training accuracy.

use rayon::prelude::*;

use super::tree::{partition, FlatTree, Node, SplitChoice};
use super::{PredictorConfig, PredictorError, TrainingSet, NUM_CLASSES};
use crate::varint::{self, Reader};

#[derive(Debug, Clone, PartialEq)]
pub struct BoostedTrees {
    base: [f64; NUM_CLASSES],
    rounds: Vec<Vec<FlatTree<f32>>>,
}

struct Params {
    eta: f64,
    lambda: f64,
    min_child_weight: f64,
    max_depth: usize,
}

fn argmax(scores: &[f64]) -> u8 {
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = k;
        }
    }
    best as u8
}

impl BoostedTrees {
    pub(crate) fn fit(set: &TrainingSet, config: &PredictorConfig) -> Self {
        let n = set.len();
        let counts = set.class_counts();
        let mut base = [0.0; NUM_CLASSES];
        for k in 0..NUM_CLASSES {
            base[k] = ((counts[k] as f64 + 1.0) / (n as f64 + NUM_CLASSES as f64)).ln();
        }
        let params = Params {
            eta: config.learning_rate,
            lambda: config.lambda,
            min_child_weight: config.min_child_weight,
            max_depth: config.max_depth,
        };

        let labels = set.labels();
        let mut scores: Vec<f64> = (0..n).flat_map(|_| base).collect();
        let correct =
            |scores: &[f64]| scores.chunks_exact(NUM_CLASSES).zip(labels).filter(|(s, &l)| argmax(s) == l).count();

        let mut best_hits = correct(&scores);
        let mut best_rounds = 0;
        let mut rounds = Vec::with_capacity(config.n_estimators);
        let all_rows: Vec<u32> = (0..n as u32).collect();

        for round in 0..config.n_estimators {
            // column-major gradients: grad[k * n + i]
            let mut grad = vec![0.0; n * NUM_CLASSES];
            let mut hess = vec![0.0; n * NUM_CLASSES];
            for (i, row) in scores.chunks_exact(NUM_CLASSES).enumerate() {
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut p = [0.0; NUM_CLASSES];
                let mut z = 0.0;
                for k in 0..NUM_CLASSES {
                    p[k] = (row[k] - max).exp();
                    z += p[k];
                }
                for k in 0..NUM_CLASSES {
                    let pk = p[k] / z;
                    let y = if usize::from(labels[i]) == k { 1.0 } else { 0.0 };
                    grad[k * n + i] = pk - y;
                    hess[k * n + i] = (2.0 * pk * (1.0 - pk)).max(1e-16);
                }
            }

            let trees: Vec<FlatTree<f32>> = (0..NUM_CLASSES)
                .into_par_iter()
                .map(|k| {
                    let g = &grad[k * n..(k + 1) * n];
                    let h = &hess[k * n..(k + 1) * n];
                    let mut nodes = Vec::new();
                    grow_regression(set, &all_rows, g, h, params.max_depth, &params, &mut nodes);
                    FlatTree::from_nodes(nodes)
                })
                .collect();

            for (i, row) in scores.chunks_exact_mut(NUM_CLASSES).enumerate() {
                let ctx = set.row(i);
                for (k, tree) in trees.iter().enumerate() {
                    row[k] += f64::from(tree.eval(ctx));
                }
            }
            rounds.push(trees);

            let hits = correct(&scores);
            if hits > best_hits {
                best_hits = hits;
                best_rounds = round + 1;
            }
        }
        rounds.truncate(best_rounds);
        Self { base, rounds }
    }

    pub(crate) fn rounds(&self) -> usize {
        self.rounds.len()
    }

    pub(crate) fn predict(&self, context: &[u8]) -> u8 {
        let mut scores = self.base;
        for trees in &self.rounds {
            for (k, tree) in trees.iter().enumerate() {
                scores[k] += f64::from(tree.eval(context));
            }
        }
        argmax(&scores)
    }

    pub(crate) fn write(&self, out: &mut Vec<u8>) {
        varint::write_u64(out, self.rounds.len() as u64);
        for b in self.base {
            out.extend_from_slice(&b.to_le_bytes());
        }
        for trees in &self.rounds {
            for tree in trees {
                tree.write(out, &|out, w| out.extend_from_slice(&w.to_le_bytes()));
            }
        }
    }

    pub(crate) fn read(r: &mut Reader<'_>, window: usize) -> Result<Self, PredictorError> {
        let truncated = |_| PredictorError::CorruptBlob("truncated boosted model");
        let n_rounds = r.varint_usize(1 << 16).map_err(truncated)?;
        let mut base = [0.0; NUM_CLASSES];
        for b in &mut base {
            let bytes = r.bytes(8).map_err(truncated)?;
            *b = f64::from_le_bytes(bytes.try_into().expect("8 bytes"));
            if !b.is_finite() {
                return Err(PredictorError::CorruptBlob("non-finite base score"));
            }
        }
        let read_leaf = |r: &mut Reader<'_>| {
            let bytes = r.bytes(4).map_err(|_| PredictorError::CorruptBlob("truncated leaf"))?;
            let w = f32::from_le_bytes(bytes.try_into().expect("4 bytes"));
            if !w.is_finite() {
                return Err(PredictorError::CorruptBlob("non-finite leaf weight"));
            }
            Ok(w)
        };
        let mut rounds = Vec::with_capacity(n_rounds.min(64));
        for _ in 0..n_rounds {
            let trees =
                (0..NUM_CLASSES).map(|_| FlatTree::read(r, window, &read_leaf)).collect::<Result<Vec<_>, _>>()?;
            rounds.push(trees);
        }
        Ok(Self { base, rounds })
    }
}

fn leaf_weight(g: f64, h: f64, p: &Params) -> f32 {
    (-p.eta * g / (h + p.lambda)) as f32
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

fn grow_regression(
    set: &TrainingSet,
    rows: &[u32],
    grad: &[f64],
    hess: &[f64],
    depth_left: usize,
    p: &Params,
    nodes: &mut Vec<Node<f32>>,
) -> u32 {
    let at = nodes.len();
    let (g_sum, h_sum) = rows.iter().fold((0.0, 0.0), |(g, h), &i| (g + grad[i as usize], h + hess[i as usize]));
    nodes.push(Node::Leaf(leaf_weight(g_sum, h_sum, p)));
    if depth_left == 0 || rows.len() < 2 {
        return at as u32;
    }

    let w = set.window();
    let feats = set.features();
    // (g, h, count) per (feature * 13 + value)
    let mut hist = vec![(0.0f64, 0.0f64, 0u32); w * NUM_CLASSES];
    for &i in rows {
        let i = i as usize;
        for f in 0..w {
            let cell = &mut hist[f * NUM_CLASSES + usize::from(feats[i * w + f])];
            cell.0 += grad[i];
            cell.1 += hess[i];
            cell.2 += 1;
        }
    }

    let parent = score(g_sum, h_sum, p.lambda);
    let mut best: Option<(f64, SplitChoice)> = None;
    for f in 0..w {
        for v in 0..NUM_CLASSES {
            let (gl, hl, cl) = hist[f * NUM_CLASSES + v];
            if cl == 0 || cl as usize == rows.len() {
                continue;
            }
            let (gr, hr) = (g_sum - gl, h_sum - hl);
            if hl < p.min_child_weight || hr < p.min_child_weight {
                continue;
            }
            let gain = score(gl, hl, p.lambda) + score(gr, hr, p.lambda) - parent;
            if gain > 1e-12 && best.as_ref().is_none_or(|(b, _)| gain > *b) {
                best = Some((gain, SplitChoice { feature: f as u8, value: v as u8 }));
            }
        }
    }

    let Some((_, split)) = best else {
        return at as u32;
    };
    let (m_rows, o_rows) = partition(set, rows, &split);
    let m = grow_regression(set, &m_rows, grad, hess, depth_left - 1, p, nodes);
    let o = grow_regression(set, &o_rows, grad, hess, depth_left - 1, p, nodes);
    nodes[at] = Node::Split { feature: split.feature, value: split.value, matched: m, other: o };
    at as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::{make_training_set, ModelKind};

    fn hits(model: &BoostedTrees, set: &TrainingSet) -> usize {
        (0..set.len()).filter(|&i| model.predict(set.row(i)) == set.labels()[i]).count()
    }

    #[test]
    fn zero_rounds_predicts_majority() {
        let set = make_training_set(&[4, 4, 4, 9, 9, 1], 2, 12);
        let cfg = PredictorConfig { window: 2, n_estimators: 1, min_child_weight: 100.0, ..Default::default() };
        let model = BoostedTrees::fit(&set, &cfg);
        assert_eq!(model.rounds(), 0);
        assert_eq!(model.predict(&[0, 0]), 4);
        assert_eq!(cfg.kind, ModelKind::BoostedTrees);
    }

    #[test]
    fn kept_rounds_never_lose_to_prior() {
        let stream: Vec<u8> = (0..500u32).map(|i| ((i * i + 3 * i) % 13) as u8).collect();
        let set = make_training_set(&stream, 4, 12);
        let cfg = PredictorConfig { window: 4, n_estimators: 5, ..Default::default() };
        let model = BoostedTrees::fit(&set, &cfg);
        let prior = BoostedTrees { base: model.base, rounds: Vec::new() };
        assert!(hits(&model, &set) >= hits(&prior, &set));
    }

    #[test]
    fn blob_round_trip() {
        let stream: Vec<u8> = [2u8, 10, 5, 10, 11].iter().copied().cycle().take(400).collect();
        let set = make_training_set(&stream, 4, 12);
        let cfg = PredictorConfig { window: 4, ..Default::default() };
        let model = BoostedTrees::fit(&set, &cfg);
        assert!(model.rounds() > 0);
        let mut out = Vec::new();
        model.write(&mut out);
        let back = BoostedTrees::read(&mut Reader::new(&out), 4).unwrap();
        assert_eq!(back, model);
    }
}
