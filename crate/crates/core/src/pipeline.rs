//! End-to-end store: structure stream, predictor, calibration table, and the
//! two attribute trees, bundled into an archive.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::archive::{scan_sections, write_archive, Archive, ArchiveError, ArchiveHeader, SectionId, FORMAT_VERSION};
use crate::attr::{
    build_attribute_tree, compute_similarity_matrix, AttrError, AttributeTree, DEFAULT_MAX_DISTANCE, DEFAULT_WINDOW,
};
use crate::calibration::{build_table, CalibrationError};
use crate::graph::ProvenanceGraph;
use crate::predictor::{self, make_training_set, PredictorConfig, PredictorError};
use crate::structure::encode_structure;

#[derive(Debug, Clone, PartialEq)]
pub struct StoreConfig {
    pub predictor: PredictorConfig,
    /// Similarity window `M` for attribute trees.
    pub similarity_window: usize,
    pub max_dis: u64,
}

impl Default for StoreConfig {
    fn default() -> Self {
        Self { predictor: PredictorConfig::default(), similarity_window: DEFAULT_WINDOW, max_dis: DEFAULT_MAX_DISTANCE }
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Attr(#[from] AttrError),
    #[error(transparent)]
    Archive(#[from] ArchiveError),
}

/// Wall time per storage phase.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimes {
    pub prep: Duration,
    pub vectorize: Duration,
    pub train: Duration,
    pub calibrate: Duration,
    pub similarity: Duration,
    pub tree: Duration,
}

impl PhaseTimes {
    pub fn total(&self) -> Duration {
        self.prep + self.vectorize + self.train + self.calibrate + self.similarity + self.tree
    }
}

/// Sizes and timings of one store run, or sizes read back from a file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StatsReport {
    pub times: PhaseTimes,
    pub model_bytes: usize,
    pub calibration_bytes: usize,
    pub node_tree_bytes: usize,
    pub edge_tree_bytes: usize,
    /// Header, section framing, id maps and checksum.
    pub overhead_bytes: usize,
    pub total_bytes: usize,
    pub stream_length: u64,
    pub training_accuracy: Option<f64>,
    pub calibration_entries: Option<usize>,
    pub raw_attribute_bytes: Option<usize>,
    pub input_bytes: Option<usize>,
}

impl StatsReport {
    /// Section sizes straight from the container, no payload decoding.
    pub fn from_archive_bytes(bytes: &[u8]) -> Result<Self, ArchiveError> {
        let (header, sections) = scan_sections(bytes)?;
        let mut report =
            StatsReport { total_bytes: bytes.len(), stream_length: header.stream_length, ..Default::default() };
        for s in &sections {
            match s.id {
                SectionId::Model => report.model_bytes = s.payload_len,
                SectionId::Calibration => report.calibration_bytes = s.payload_len,
                SectionId::NodeTree => report.node_tree_bytes = s.payload_len,
                SectionId::EdgeTree => report.edge_tree_bytes = s.payload_len,
                _ => {}
            }
        }
        report.overhead_bytes = bytes.len()
            - report.model_bytes
            - report.calibration_bytes
            - report.node_tree_bytes
            - report.edge_tree_bytes;
        Ok(report)
    }

    pub fn attribute_bytes(&self) -> usize {
        self.node_tree_bytes + self.edge_tree_bytes
    }

    pub fn compression_ratio(&self) -> Option<f64> {
        self.input_bytes.filter(|&n| n > 0).map(|n| self.total_bytes as f64 / n as f64)
    }

    /// `key=value` lines for scripting parameter sweeps.
    pub fn to_key_values(&self) -> Vec<(&'static str, String)> {
        let secs = |d: Duration| format!("{:.6}", d.as_secs_f64());
        let mut kv = vec![
            ("time_prep_s", secs(self.times.prep)),
            ("time_vectorize_s", secs(self.times.vectorize)),
            ("time_train_s", secs(self.times.train)),
            ("time_calibrate_s", secs(self.times.calibrate)),
            ("time_similarity_s", secs(self.times.similarity)),
            ("time_tree_s", secs(self.times.tree)),
            ("time_total_s", secs(self.times.total())),
            ("model_bytes", self.model_bytes.to_string()),
            ("calibration_bytes", self.calibration_bytes.to_string()),
            ("node_tree_bytes", self.node_tree_bytes.to_string()),
            ("edge_tree_bytes", self.edge_tree_bytes.to_string()),
            ("overhead_bytes", self.overhead_bytes.to_string()),
            ("total_bytes", self.total_bytes.to_string()),
            ("stream_length", self.stream_length.to_string()),
        ];
        if let Some(a) = self.training_accuracy {
            kv.push(("training_accuracy", format!("{a:.6}")));
        }
        if let Some(n) = self.calibration_entries {
            kv.push(("calibration_entries", n.to_string()));
        }
        if let Some(n) = self.raw_attribute_bytes {
            kv.push(("raw_attribute_bytes", n.to_string()));
        }
        if let Some(n) = self.input_bytes {
            kv.push(("input_bytes", n.to_string()));
        }
        if let Some(r) = self.compression_ratio() {
            kv.push(("compression_ratio", format!("{r:.6}")));
        }
        kv
    }
}

pub struct StoreOutput {
    pub archive: Archive,
    pub bytes: Vec<u8>,
    pub report: StatsReport,
}

/// Attribute tree for one corpus, with (similarity, tree) timings.
pub fn compress_attributes(
    corpus: &[Vec<u8>],
    window: usize,
    max_dis: u64,
) -> Result<(AttributeTree, Duration, Duration), AttrError> {
    let t = Instant::now();
    let matrix = compute_similarity_matrix(corpus, window)?;
    let similarity = t.elapsed();
    let t = Instant::now();
    let tree = build_attribute_tree(corpus, &matrix, max_dis);
    Ok((tree, similarity, t.elapsed()))
}

pub fn store(graph: &ProvenanceGraph, config: &StoreConfig) -> Result<StoreOutput, StoreError> {
    let pc = &config.predictor;
    pc.validate()?;
    let mut times = PhaseTimes::default();

    let t = Instant::now();
    let stream = encode_structure(graph.adjacency());
    times.vectorize = t.elapsed();

    let t = Instant::now();
    let set = make_training_set(stream.as_slice(), pc.window, pc.pad_symbol);
    let model = predictor::train(&set, pc)?;
    times.train = t.elapsed();
    let training_accuracy = predictor::accuracy(&model, &set);

    let t = Instant::now();
    let table = build_table(stream.as_slice(), &model, pc.pad_symbol)?;
    times.calibrate = t.elapsed();

    let (node_tree, s1, t1) = compress_attributes(graph.node_attrs(), config.similarity_window, config.max_dis)?;
    let (edge_tree, s2, t2) = compress_attributes(graph.edge_attrs(), config.similarity_window, config.max_dis)?;
    times.similarity = s1 + s2;
    times.tree = t1 + t2;

    let archive = Archive {
        header: ArchiveHeader {
            format_version: FORMAT_VERSION,
            node_count: graph.node_count() as u64,
            edge_count: graph.edge_count() as u64,
            stream_length: stream.len() as u64,
            predictor_window: pc.window as u64,
            pad_symbol: pc.pad_symbol,
            similarity_window: config.similarity_window as u64,
            max_dis: config.max_dis,
        },
        model,
        table,
        node_tree,
        edge_tree,
        node_ids: (!graph.node_ids_are_dense()).then(|| graph.node_ids().to_vec()),
        edge_ids: (!graph.edge_ids_are_dense()).then(|| graph.edge_ids().to_vec()),
    };
    let bytes = write_archive(&archive);

    let mut report = StatsReport::from_archive_bytes(&bytes)?;
    report.times = times;
    report.training_accuracy = Some(training_accuracy);
    report.calibration_entries = Some(archive.table.entry_count());
    report.raw_attribute_bytes = Some(graph.node_attrs().iter().chain(graph.edge_attrs()).map(Vec::len).sum());
    Ok(StoreOutput { archive, bytes, report })
}
