//! Single-file container for one stored graph.
//!
//! ```text
//! "LESS" | version u16 LE | varints V E L W pad M max_dis | section count u8
//! sections: id u8 | payload length u64 LE | payload
//! ```
//!
//! Sections appear in ascending id order: 1 model, 2 calibration, 3 node
//! tree, 4 edge tree, then optionally 5 node id map, 6 edge id map, and 7 a
//! CRC32 over every byte before the CRC section.

use thiserror::Error;

use crate::attr::{deserialize_tree, serialize_tree, AttrError, AttributeTree};
use crate::calibration::{decode_table, encode_table, CalibrationError, CalibrationTable};
use crate::predictor::{PredictorError, PredictorModel};
use crate::structure::ALPHABET_SIZE;
use crate::varint::{self, Reader};

pub const MAGIC: &[u8; 4] = b"LESS";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum SectionId {
    Model = 1,
    Calibration = 2,
    NodeTree = 3,
    EdgeTree = 4,
    NodeIdMap = 5,
    EdgeIdMap = 6,
    Crc32 = 7,
}

impl SectionId {
    pub fn from_byte(b: u8) -> Option<Self> {
        Some(match b {
            1 => SectionId::Model,
            2 => SectionId::Calibration,
            3 => SectionId::NodeTree,
            4 => SectionId::EdgeTree,
            5 => SectionId::NodeIdMap,
            6 => SectionId::EdgeIdMap,
            7 => SectionId::Crc32,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            SectionId::Model => "model",
            SectionId::Calibration => "calibration",
            SectionId::NodeTree => "node_tree",
            SectionId::EdgeTree => "edge_tree",
            SectionId::NodeIdMap => "node_id_map",
            SectionId::EdgeIdMap => "edge_id_map",
            SectionId::Crc32 => "crc32",
        }
    }
}

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("not an archive (bad magic)")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("checksum mismatch")]
    CrcMismatch,
    #[error("truncated header")]
    TruncatedHeader,
    #[error("truncated section {id}")]
    TruncatedSection { id: u8 },
    #[error("unknown section id {0}")]
    UnknownSection(u8),
    #[error("section {0} out of order or repeated")]
    SectionOrder(u8),
    #[error("missing section {}", .0.name())]
    MissingSection(SectionId),
    #[error("inconsistent archive: {0}")]
    Inconsistent(&'static str),
    #[error("model section: {0}")]
    Model(#[from] PredictorError),
    #[error("calibration section: {0}")]
    Calibration(#[from] CalibrationError),
    #[error("attribute tree section: {0}")]
    Tree(#[from] AttrError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchiveHeader {
    pub format_version: u16,
    pub node_count: u64,
    pub edge_count: u64,
    pub stream_length: u64,
    pub predictor_window: u64,
    pub pad_symbol: u8,
    pub similarity_window: u64,
    pub max_dis: u64,
}

/// Everything one store run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct Archive {
    pub header: ArchiveHeader,
    pub model: PredictorModel,
    pub table: CalibrationTable,
    pub node_tree: AttributeTree,
    pub edge_tree: AttributeTree,
    /// External node ids by internal id, when they are not already `0..V`.
    pub node_ids: Option<Vec<u64>>,
    pub edge_ids: Option<Vec<u64>>,
}

impl Archive {
    pub fn external_node_id(&self, internal: usize) -> u64 {
        self.node_ids.as_ref().map_or(internal as u64, |ids| ids[internal])
    }

    pub fn external_edge_id(&self, internal: usize) -> u64 {
        self.edge_ids.as_ref().map_or(internal as u64, |ids| ids[internal])
    }
}

/// Location of one section inside an archive file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SectionInfo {
    pub id: SectionId,
    /// Offset of the section's id byte.
    pub offset: usize,
    pub payload_len: usize,
}

impl SectionInfo {
    /// Id byte, length field and payload.
    pub fn framed_len(&self) -> usize {
        FRAME_LEN + self.payload_len
    }
}

const FRAME_LEN: usize = 1 + 8;

fn push_section(out: &mut Vec<u8>, id: SectionId, payload: &[u8]) {
    out.push(id as u8);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
}

fn encode_ids(ids: &[u64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(ids.len() * 2 + 4);
    varint::write_u64(&mut out, ids.len() as u64);
    for &id in ids {
        varint::write_u64(&mut out, id);
    }
    out
}

fn decode_ids(payload: &[u8], id: SectionId) -> Result<Vec<u64>, ArchiveError> {
    let err = |_| ArchiveError::TruncatedSection { id: id as u8 };
    let mut r = Reader::new(payload);
    let n = r.varint_usize(payload.len()).map_err(err)?;
    let ids = (0..n).map(|_| r.varint().map_err(err)).collect::<Result<Vec<_>, _>>()?;
    if !r.is_empty() {
        return Err(ArchiveError::Inconsistent("trailing bytes in id map"));
    }
    Ok(ids)
}

/// Serializes an archive. Identical inputs give identical bytes.
pub fn write_archive(archive: &Archive) -> Vec<u8> {
    let h = &archive.header;
    let mut sections: Vec<(SectionId, Vec<u8>)> = vec![
        (SectionId::Model, archive.model.to_bytes()),
        (SectionId::Calibration, encode_table(&archive.table)),
        (SectionId::NodeTree, serialize_tree(&archive.node_tree)),
        (SectionId::EdgeTree, serialize_tree(&archive.edge_tree)),
    ];
    if let Some(ids) = &archive.node_ids {
        sections.push((SectionId::NodeIdMap, encode_ids(ids)));
    }
    if let Some(ids) = &archive.edge_ids {
        sections.push((SectionId::EdgeIdMap, encode_ids(ids)));
    }

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&h.format_version.to_le_bytes());
    for v in [h.node_count, h.edge_count, h.stream_length, h.predictor_window] {
        varint::write_u64(&mut out, v);
    }
    varint::write_u64(&mut out, u64::from(h.pad_symbol));
    varint::write_u64(&mut out, h.similarity_window);
    varint::write_u64(&mut out, h.max_dis);
    out.push((sections.len() + 1) as u8);
    for (id, payload) in &sections {
        push_section(&mut out, *id, payload);
    }
    let crc = crc32fast::hash(&out);
    push_section(&mut out, SectionId::Crc32, &crc.to_le_bytes());
    out
}

fn read_header(r: &mut Reader<'_>) -> Result<(ArchiveHeader, u8), ArchiveError> {
    let magic = r.bytes(4).map_err(|_| ArchiveError::BadMagic)?;
    if magic != MAGIC {
        return Err(ArchiveError::BadMagic);
    }
    let trunc = |_| ArchiveError::TruncatedHeader;
    let v = r.bytes(2).map_err(trunc)?;
    let format_version = u16::from_le_bytes([v[0], v[1]]);
    if format_version != FORMAT_VERSION {
        return Err(ArchiveError::UnsupportedVersion(format_version));
    }
    let node_count = r.varint().map_err(trunc)?;
    let edge_count = r.varint().map_err(trunc)?;
    let stream_length = r.varint().map_err(trunc)?;
    let predictor_window = r.varint().map_err(trunc)?;
    let pad = r.varint().map_err(trunc)?;
    let pad_symbol = u8::try_from(pad)
        .ok()
        .filter(|&p| usize::from(p) < ALPHABET_SIZE)
        .ok_or(ArchiveError::Inconsistent("pad symbol outside the alphabet"))?;
    let similarity_window = r.varint().map_err(trunc)?;
    let max_dis = r.varint().map_err(trunc)?;
    let section_count = r.u8().map_err(trunc)?;
    let header = ArchiveHeader {
        format_version,
        node_count,
        edge_count,
        stream_length,
        predictor_window,
        pad_symbol,
        similarity_window,
        max_dis,
    };
    Ok((header, section_count))
}

fn trailer_crc_fails(bytes: &[u8]) -> bool {
    let Some(start) = bytes.len().checked_sub(FRAME_LEN + 4) else {
        return false;
    };
    let frame = &bytes[start..];
    if frame[0] != SectionId::Crc32 as u8 || frame[1..9] != 4u64.to_le_bytes() {
        return false;
    }
    let stored = u32::from_le_bytes(frame[9..13].try_into().expect("4 bytes"));
    crc32fast::hash(&bytes[..start]) != stored
}

/// Walks section frames without decoding payloads, checking order and the CRC.
pub fn scan_sections(bytes: &[u8]) -> Result<(ArchiveHeader, Vec<SectionInfo>), ArchiveError> {
    let mut r = Reader::new(bytes);
    let (header, section_count) = read_header(&mut r)?;
    let walked = walk_frames(bytes, r.position(), section_count);
    let sections = match walked {
        Ok(s) => s,
        Err(e) => {
            return Err(if trailer_crc_fails(bytes) { ArchiveError::CrcMismatch } else { e });
        }
    };
    if let Some(crc) = sections.iter().find(|s| s.id == SectionId::Crc32) {
        let stored = &bytes[crc.offset + FRAME_LEN..crc.offset + crc.framed_len()];
        if stored.len() != 4 {
            return Err(ArchiveError::Inconsistent("crc payload is not 4 bytes"));
        }
        let stored = u32::from_le_bytes(stored.try_into().expect("4 bytes"));
        if crc32fast::hash(&bytes[..crc.offset]) != stored {
            return Err(ArchiveError::CrcMismatch);
        }
    }
    Ok((header, sections))
}

fn walk_frames(bytes: &[u8], start: usize, count: u8) -> Result<Vec<SectionInfo>, ArchiveError> {
    let mut r = Reader::new(bytes);
    r.bytes(start).map_err(|_| ArchiveError::TruncatedHeader)?;
    let mut sections: Vec<SectionInfo> = Vec::with_capacity(usize::from(count));
    for _ in 0..count {
        let offset = r.position();
        let raw = r.u8().map_err(|_| ArchiveError::TruncatedSection { id: 0 })?;
        let id = SectionId::from_byte(raw).ok_or(ArchiveError::UnknownSection(raw))?;
        if sections.last().is_some_and(|prev| prev.id >= id) {
            return Err(ArchiveError::SectionOrder(raw));
        }
        let len = r.bytes(8).map_err(|_| ArchiveError::TruncatedSection { id: raw })?;
        let len = u64::from_le_bytes(len.try_into().expect("8 bytes"));
        let payload_len = usize::try_from(len)
            .ok()
            .filter(|&l| l <= r.remaining())
            .ok_or(ArchiveError::TruncatedSection { id: raw })?;
        r.bytes(payload_len).map_err(|_| ArchiveError::TruncatedSection { id: raw })?;
        sections.push(SectionInfo { id, offset, payload_len });
    }
    if !r.is_empty() {
        return Err(ArchiveError::Inconsistent("bytes after the last section"));
    }
    Ok(sections)
}

pub fn read_archive(bytes: &[u8]) -> Result<Archive, ArchiveError> {
    let (header, sections) = scan_sections(bytes)?;
    let payload = |id: SectionId| {
        sections.iter().find(|s| s.id == id).map(|s| &bytes[s.offset + FRAME_LEN..s.offset + s.framed_len()])
    };
    let required = |id| payload(id).ok_or(ArchiveError::MissingSection(id));

    let model = PredictorModel::from_bytes(required(SectionId::Model)?)?;
    let table = decode_table(required(SectionId::Calibration)?)?;
    let node_tree = deserialize_tree(required(SectionId::NodeTree)?, header.max_dis)?;
    let edge_tree = deserialize_tree(required(SectionId::EdgeTree)?, header.max_dis)?;
    let node_ids = payload(SectionId::NodeIdMap).map(|p| decode_ids(p, SectionId::NodeIdMap)).transpose()?;
    let edge_ids = payload(SectionId::EdgeIdMap).map(|p| decode_ids(p, SectionId::EdgeIdMap)).transpose()?;

    if table.stream_length() != header.stream_length {
        return Err(ArchiveError::Inconsistent("calibration length differs from header"));
    }
    if model.window() != 0 && model.window() as u64 != header.predictor_window {
        return Err(ArchiveError::Inconsistent("model window differs from header"));
    }
    if node_tree.len() as u64 != header.node_count || edge_tree.len() as u64 != header.edge_count {
        return Err(ArchiveError::Inconsistent("attribute tree size differs from header"));
    }
    if node_ids.as_ref().is_some_and(|ids| ids.len() as u64 != header.node_count)
        || edge_ids.as_ref().is_some_and(|ids| ids.len() as u64 != header.edge_count)
    {
        return Err(ArchiveError::Inconsistent("id map size differs from header"));
    }

    Ok(Archive { header, model, table, node_tree, edge_tree, node_ids, edge_ids })
}
