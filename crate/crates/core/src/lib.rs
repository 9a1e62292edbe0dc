//! Lossless storage for provenance graphs.
//!
//! The graph structure is flattened into a 13-symbol stream, a small
//! classifier learns to predict that stream, and a calibration table records
//! every misprediction so the stream can be replayed exactly. Node and edge
//! attributes are stored as minimum attribute trees: each string is kept as
//! an edit script against a similar neighbour. Stored archives answer forward
//! and backward provenance traces after a one-time structure warm-up.

pub mod archive;
pub mod attr;
pub mod calibration;
pub mod graph;
pub mod pipeline;
pub mod predictor;
pub mod query;
pub mod structure;
pub mod synth;
pub mod varint;

pub use archive::{read_archive, write_archive, Archive, ArchiveError, ArchiveHeader};
pub use attr::{AttrError, AttributeTree, EditOp};
pub use calibration::{CalibrationError, CalibrationTable};
pub use graph::{normalize, parse_input, EdgeRecord, GraphError, NodeRecord, ProvenanceGraph};
pub use pipeline::{store, StatsReport, StoreConfig, StoreError, StoreOutput};
pub use predictor::{ModelKind, PredictorConfig, PredictorError, PredictorModel, SymbolPredictor};
pub use query::{Direction, QueryError, QueryRequest, QueryResult, WarmState, WarmUpError, DEFAULT_LIMIT};
pub use structure::{StructureError, SymbolStream};
pub use synth::SynthConfig;
