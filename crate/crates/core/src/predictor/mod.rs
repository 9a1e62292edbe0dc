//! Next-symbol predictors over the structure stream.
//!
//! A model sees the `window` symbols preceding a position (left-padded with
//! the pad symbol) and guesses the symbol there. Accuracy only affects the
//! size of the calibration table, never correctness, so every model kind is
//! interchangeable behind [`SymbolPredictor`].

mod boost;
mod tree;

use thiserror::Error;

use crate::structure::{ALPHABET_SIZE, STREAM_END};
use crate::varint::{self, Reader};

pub use boost::BoostedTrees;
pub use tree::ClassificationTree;

/// Number of classes every model predicts over.
pub const NUM_CLASSES: usize = ALPHABET_SIZE;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PredictorError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("context has {got} symbols, model expects {expected}")]
    BadContextLength { expected: usize, got: usize },
    #[error("unknown model kind tag {0}")]
    UnknownModelKind(u8),
    #[error("corrupt model blob: {0}")]
    CorruptBlob(&'static str),
    #[error("invalid predictor config: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Constant,
    DecisionTree,
    BoostedTrees,
}

impl ModelKind {
    pub fn tag(self) -> u8 {
        match self {
            ModelKind::Constant => 0,
            ModelKind::DecisionTree => 1,
            ModelKind::BoostedTrees => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self, PredictorError> {
        match tag {
            0 => Ok(ModelKind::Constant),
            1 => Ok(ModelKind::DecisionTree),
            2 => Ok(ModelKind::BoostedTrees),
            other => Err(PredictorError::UnknownModelKind(other)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Constant => "constant",
            ModelKind::DecisionTree => "tree",
            ModelKind::BoostedTrees => "boosted",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorConfig {
    pub window: usize,
    pub kind: ModelKind,
    pub max_depth: usize,
    pub n_estimators: usize,
    pub learning_rate: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    pub min_child_weight: f64,
    pub pad_symbol: u8,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            window: 8,
            kind: ModelKind::BoostedTrees,
            max_depth: 3,
            n_estimators: 3,
            learning_rate: 0.3,
            lambda: 1.0,
            min_child_weight: 1.0,
            pad_symbol: STREAM_END,
        }
    }
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<(), PredictorError> {
        if self.window == 0 {
            return Err(PredictorError::InvalidConfig("window must be at least 1"));
        }
        if self.window > 255 {
            return Err(PredictorError::InvalidConfig("window must fit a feature index byte"));
        }
        if self.max_depth == 0 || self.max_depth > tree::MAX_DEPTH {
            return Err(PredictorError::InvalidConfig("max_depth out of range"));
        }
        if self.n_estimators == 0 {
            return Err(PredictorError::InvalidConfig("n_estimators must be at least 1"));
        }
        if usize::from(self.pad_symbol) >= NUM_CLASSES {
            return Err(PredictorError::InvalidConfig("pad symbol outside the alphabet"));
        }
        if !(self.learning_rate > 0.0 && self.lambda >= 0.0 && self.min_child_weight >= 0.0) {
            return Err(PredictorError::InvalidConfig("non-positive learning rate or negative penalty"));
        }
        Ok(())
    }
}

/// Anything that can guess the next stream symbol from its left context.
///
/// Implementations must be deterministic functions of the context; the
/// calibration table is only sound under that assumption.
pub trait SymbolPredictor {
    /// Context length; `0` means the predictor ignores context.
    fn window(&self) -> usize;

    /// `context.len()` equals [`window`](Self::window). Returns a symbol in `0..=12`.
    fn predict_symbol(&self, context: &[u8]) -> u8;
}

/// Teacher-forced training rows: row `i` holds stream symbols `[i - W, i)`,
/// left-padded, and its label is symbol `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingSet {
    window: usize,
    features: Vec<u8>,
    labels: Vec<u8>,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.features[i * self.window..(i + 1) * self.window]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub(crate) fn features(&self) -> &[u8] {
        &self.features
    }

    pub(crate) fn class_counts(&self) -> [u64; NUM_CLASSES] {
        let mut counts = [0u64; NUM_CLASSES];
        for &l in &self.labels {
            counts[usize::from(l)] += 1;
        }
        counts
    }
}

pub fn make_training_set(stream: &[u8], window: usize, pad_symbol: u8) -> TrainingSet {
    let mut padded = vec![pad_symbol; window];
    padded.extend_from_slice(stream);
    let mut features = Vec::with_capacity(stream.len() * window);
    for i in 0..stream.len() {
        features.extend_from_slice(&padded[i..i + window]);
    }
    TrainingSet { window, features, labels: stream.to_vec() }
}

/// Majority label, lowest symbol on ties.
pub(crate) fn majority(counts: &[u64; NUM_CLASSES]) -> u8 {
    let mut best = 0;
    for (k, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = k;
        }
    }
    best as u8
}

#[derive(Debug, Clone, PartialEq)]
enum Inner {
    Constant(u8),
    Tree(ClassificationTree),
    Boosted(BoostedTrees),
}

/// A trained predictor. Round-trips through [`PredictorModel::to_bytes`]
/// without changing any prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorModel {
    window: usize,
    inner: Inner,
}

impl PredictorModel {
    pub fn constant(symbol: u8) -> Self {
        Self { window: 0, inner: Inner::Constant(symbol.min(STREAM_END)) }
    }

    pub fn kind(&self) -> ModelKind {
        match self.inner {
            Inner::Constant(_) => ModelKind::Constant,
            Inner::Tree(_) => ModelKind::DecisionTree,
            Inner::Boosted(_) => ModelKind::BoostedTrees,
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn predict(&self, context: &[u8]) -> Result<u8, PredictorError> {
        if self.window != 0 && context.len() != self.window {
            return Err(PredictorError::BadContextLength { expected: self.window, got: context.len() });
        }
        Ok(self.predict_symbol(context))
    }

    /// Number of boosting rounds kept, or trees for the other kinds.
    pub fn tree_count(&self) -> usize {
        match &self.inner {
            Inner::Constant(_) => 0,
            Inner::Tree(_) => 1,
            Inner::Boosted(b) => b.rounds() * NUM_CLASSES,
        }
    }

    pub fn byte_size(&self) -> usize {
        self.to_bytes().len()
    }

    /// Blob layout: kind tag byte, then kind-specific payload.
    ///
    /// * constant: the majority symbol byte.
    /// * tree: varint window, preorder node list.
    /// * boosted: varint window, varint rounds, 13 f64 base scores, then per
    ///   round one preorder tree per class.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![self.kind().tag()];
        match &self.inner {
            Inner::Constant(s) => out.push(*s),
            Inner::Tree(t) => {
                varint::write_u64(&mut out, self.window as u64);
                t.write(&mut out);
            }
            Inner::Boosted(b) => {
                varint::write_u64(&mut out, self.window as u64);
                b.write(&mut out);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PredictorError> {
        let mut r = Reader::new(bytes);
        let tag = r.u8().map_err(|_| PredictorError::CorruptBlob("empty blob"))?;
        let kind = ModelKind::from_tag(tag)?;
        let model = match kind {
            ModelKind::Constant => {
                let s = r.u8().map_err(|_| PredictorError::CorruptBlob("missing symbol"))?;
                if usize::from(s) >= NUM_CLASSES {
                    return Err(PredictorError::CorruptBlob("symbol out of range"));
                }
                PredictorModel::constant(s)
            }
            ModelKind::DecisionTree | ModelKind::BoostedTrees => {
                let window = r.varint_usize(255).map_err(|_| PredictorError::CorruptBlob("bad window"))?;
                if window == 0 {
                    return Err(PredictorError::CorruptBlob("zero window"));
                }
                let inner = if kind == ModelKind::DecisionTree {
                    Inner::Tree(ClassificationTree::read(&mut r, window)?)
                } else {
                    Inner::Boosted(BoostedTrees::read(&mut r, window)?)
                };
                PredictorModel { window, inner }
            }
        };
        if !r.is_empty() {
            return Err(PredictorError::CorruptBlob("trailing bytes"));
        }
        Ok(model)
    }
}

impl SymbolPredictor for PredictorModel {
    fn window(&self) -> usize {
        self.window
    }

    fn predict_symbol(&self, context: &[u8]) -> u8 {
        match &self.inner {
            Inner::Constant(s) => *s,
            Inner::Tree(t) => t.predict(context),
            Inner::Boosted(b) => b.predict(context),
        }
    }
}

/// Wraps a predictor and counts calls.
pub struct CountingPredictor<'a, P: ?Sized> {
    inner: &'a P,
    calls: std::cell::Cell<u64>,
}

impl<'a, P: SymbolPredictor + ?Sized> CountingPredictor<'a, P> {
    pub fn new(inner: &'a P) -> Self {
        Self { inner, calls: std::cell::Cell::new(0) }
    }

    pub fn calls(&self) -> u64 {
        self.calls.get()
    }
}

impl<P: SymbolPredictor + ?Sized> SymbolPredictor for CountingPredictor<'_, P> {
    fn window(&self) -> usize {
        self.inner.window()
    }

    fn predict_symbol(&self, context: &[u8]) -> u8 {
        self.calls.set(self.calls.get() + 1);
        self.inner.predict_symbol(context)
    }
}

/// Fits a model of `config.kind` to the training set.
pub fn train(set: &TrainingSet, config: &PredictorConfig) -> Result<PredictorModel, PredictorError> {
    config.validate()?;
    if set.window() != config.window {
        return Err(PredictorError::InvalidConfig("training set window differs from config"));
    }
    if config.kind == ModelKind::Constant {
        return Ok(PredictorModel::constant(majority(&set.class_counts())));
    }
    if set.is_empty() {
        return Err(PredictorError::EmptyTrainingSet);
    }
    let inner = match config.kind {
        ModelKind::DecisionTree => Inner::Tree(ClassificationTree::fit(set, config.max_depth)),
        ModelKind::BoostedTrees => Inner::Boosted(BoostedTrees::fit(set, config)),
        ModelKind::Constant => unreachable!(),
    };
    Ok(PredictorModel { window: config.window, inner })
}

/// Fraction of rows whose label the model predicts.
pub fn accuracy<P: SymbolPredictor + ?Sized>(model: &P, set: &TrainingSet) -> f64 {
    if set.is_empty() {
        return 1.0;
    }
    let w = model.window();
    let hits = (0..set.len())
        .filter(|&i| {
            let row = set.row(i);
            model.predict_symbol(&row[row.len() - w.min(row.len())..]) == set.labels()[i]
        })
        .count();
    hits as f64 / set.len() as f64
}
