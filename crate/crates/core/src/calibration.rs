//! Calibration table: the corrections that turn any deterministic predictor
//! into a lossless codec for the structure stream.
//!
//! Predictions are teacher-forced: position `i` is always predicted from the
//! true symbols `[i - W, i)` (left-padded), both when the table is built and
//! when the stream is reconstructed. A mismatch at position `i` is stored as
//! `(delta, symbol)`, where `delta` is the gap from the previous corrected
//! position (from position 0 for the first entry).
//!
//! Byte layout of one entry: if `delta <= 127`, one byte `0ddddddd`; otherwise
//! three bytes, `1ddddddd` carrying the high 7 of 23 bits followed by the low
//! 16 bits big-endian. Then one byte for the symbol. The section starts with
//! the stream length and entry count as varints.

use thiserror::Error;

use crate::predictor::SymbolPredictor;
use crate::structure::{StructureError, SymbolStream, ALPHABET_SIZE};
use crate::varint::{self, Reader};

/// Largest gap one entry can carry (23 bits).
pub const MAX_DELTA: u32 = (1 << 23) - 1;
const SHORT_DELTA_MAX: u32 = 127;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CalibrationError {
    #[error("calibration table truncated at byte {offset}")]
    TruncatedTable { offset: usize },
    #[error("calibration symbol {0} outside the alphabet")]
    SymbolOutOfRange(u8),
    #[error("calibration entry {index} has a zero gap")]
    ZeroGap { index: usize },
    #[error("corrected position {position} not below stream length {length}")]
    InconsistentLength { position: u64, length: u64 },
    #[error("{0} trailing bytes after calibration table")]
    TrailingBytes(usize),
    #[error("predictor returned symbol {0} outside the alphabet")]
    PredictionOutOfRange(u8),
    #[error(transparent)]
    Stream(#[from] StructureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CalibrationEntry {
    pub delta: u32,
    pub symbol: u8,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CalibrationTable {
    stream_length: u64,
    entries: Vec<CalibrationEntry>,
}

impl CalibrationTable {
    /// Validates gaps, symbols, and that every position lies below `stream_length`.
    pub fn new(stream_length: u64, entries: Vec<CalibrationEntry>) -> Result<Self, CalibrationError> {
        let mut pos: u64 = 0;
        for (index, e) in entries.iter().enumerate() {
            if index > 0 && e.delta == 0 {
                return Err(CalibrationError::ZeroGap { index });
            }
            if e.delta > MAX_DELTA {
                return Err(CalibrationError::InconsistentLength {
                    position: pos + u64::from(e.delta),
                    length: stream_length,
                });
            }
            if usize::from(e.symbol) >= ALPHABET_SIZE {
                return Err(CalibrationError::SymbolOutOfRange(e.symbol));
            }
            pos += u64::from(e.delta);
            if pos >= stream_length {
                return Err(CalibrationError::InconsistentLength { position: pos, length: stream_length });
            }
        }
        Ok(Self { stream_length, entries })
    }

    /// Builds a table from strictly increasing `(position, symbol)` pairs,
    /// inserting pass-through entries where a gap exceeds [`MAX_DELTA`].
    /// `truth` supplies the symbol at an inserted position.
    pub fn from_corrections(
        stream_length: u64,
        corrections: impl IntoIterator<Item = (u64, u8)>,
        truth: impl Fn(u64) -> u8,
    ) -> Result<Self, CalibrationError> {
        let mut entries = Vec::new();
        let mut prev: u64 = 0;
        for (pos, symbol) in corrections {
            let mut gap = pos
                .checked_sub(prev)
                .filter(|&g| g > 0 || entries.is_empty())
                .ok_or(CalibrationError::ZeroGap { index: entries.len() })?;
            while gap > u64::from(MAX_DELTA) {
                prev += u64::from(MAX_DELTA);
                entries.push(CalibrationEntry { delta: MAX_DELTA, symbol: truth(prev) });
                gap -= u64::from(MAX_DELTA);
            }
            entries.push(CalibrationEntry { delta: gap as u32, symbol });
            prev = pos;
        }
        Self::new(stream_length, entries)
    }

    pub fn stream_length(&self) -> u64 {
        self.stream_length
    }

    pub fn entries(&self) -> &[CalibrationEntry] {
        &self.entries
    }

    pub fn entry_count(&self) -> usize {
        self.entries.len()
    }

    /// Absolute `(position, symbol)` of each entry.
    pub fn positions(&self) -> impl Iterator<Item = (u64, u8)> + '_ {
        self.entries.iter().scan(0u64, |pos, e| {
            *pos += u64::from(e.delta);
            Some((*pos, e.symbol))
        })
    }
}

/// Teacher-forced replay. `symbol_at(i, predicted)` returns the true symbol
/// at `i`, which becomes context for later positions.
fn for_each_context<P: SymbolPredictor + ?Sized>(
    model: &P,
    pad_symbol: u8,
    len: usize,
    mut symbol_at: impl FnMut(usize, u8) -> u8,
) -> Result<(), CalibrationError> {
    let w = model.window();
    let mut buf = vec![pad_symbol; w];
    buf.reserve(len);
    for i in 0..len {
        let p = model.predict_symbol(&buf[i..i + w]);
        if usize::from(p) >= ALPHABET_SIZE {
            return Err(CalibrationError::PredictionOutOfRange(p));
        }
        let actual = symbol_at(i, p);
        buf.push(actual);
    }
    Ok(())
}

/// Records every position where the teacher-forced prediction differs from `stream`.
pub fn build_table<P: SymbolPredictor + ?Sized>(
    stream: &[u8],
    model: &P,
    pad_symbol: u8,
) -> Result<CalibrationTable, CalibrationError> {
    let mut corrections = Vec::new();
    for_each_context(model, pad_symbol, stream.len(), |i, predicted| {
        if predicted != stream[i] {
            corrections.push((i as u64, stream[i]));
        }
        stream[i]
    })?;
    CalibrationTable::from_corrections(stream.len() as u64, corrections, |p| stream[p as usize])
}

/// Replays the model over `table.stream_length()` positions, substituting
/// corrections where the table has them.
pub fn reconstruct_stream<P: SymbolPredictor + ?Sized>(
    model: &P,
    table: &CalibrationTable,
    pad_symbol: u8,
) -> Result<SymbolStream, CalibrationError> {
    let len = usize::try_from(table.stream_length()).map_err(|_| CalibrationError::InconsistentLength {
        position: table.stream_length(),
        length: table.stream_length(),
    })?;
    let mut corrections = table.positions().peekable();
    let mut out = Vec::with_capacity(len);
    for_each_context(model, pad_symbol, len, |i, predicted| {
        let sym = match corrections.peek() {
            Some(&(pos, s)) if pos == i as u64 => {
                corrections.next();
                s
            }
            _ => predicted,
        };
        out.push(sym);
        sym
    })?;
    if let Some((position, _)) = corrections.next() {
        return Err(CalibrationError::InconsistentLength { position, length: table.stream_length() });
    }
    Ok(SymbolStream::from_symbols(out)?)
}

/// Encoded size of one entry's gap plus symbol byte.
pub fn encoded_entry_len(delta: u32) -> usize {
    if delta <= SHORT_DELTA_MAX {
        2
    } else {
        4
    }
}

pub fn encode_table(table: &CalibrationTable) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + table.entries.len() * 2);
    varint::write_u64(&mut out, table.stream_length);
    varint::write_u64(&mut out, table.entries.len() as u64);
    for e in &table.entries {
        if e.delta <= SHORT_DELTA_MAX {
            out.push(e.delta as u8);
        } else {
            out.push(0x80 | (e.delta >> 16) as u8);
            out.push((e.delta >> 8) as u8);
            out.push(e.delta as u8);
        }
        out.push(e.symbol);
    }
    out
}

pub fn decode_table(bytes: &[u8]) -> Result<CalibrationTable, CalibrationError> {
    let mut r = Reader::new(bytes);
    let truncated = |e: crate::varint::ReadError| CalibrationError::TruncatedTable { offset: e.offset };
    let stream_length = r.varint().map_err(truncated)?;
    // each entry needs at least two bytes
    let count = r.varint_usize(r.remaining() / 2).map_err(truncated)?;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let b0 = r.u8().map_err(truncated)?;
        let delta = if b0 & 0x80 == 0 {
            u32::from(b0)
        } else {
            let rest = r.bytes(2).map_err(truncated)?;
            (u32::from(b0 & 0x7f) << 16) | (u32::from(rest[0]) << 8) | u32::from(rest[1])
        };
        let symbol = r.u8().map_err(truncated)?;
        if usize::from(symbol) >= ALPHABET_SIZE {
            return Err(CalibrationError::SymbolOutOfRange(symbol));
        }
        entries.push(CalibrationEntry { delta, symbol });
    }
    if !r.is_empty() {
        return Err(CalibrationError::TrailingBytes(r.remaining()));
    }
    CalibrationTable::new(stream_length, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    /// Replays a fixed prediction sequence, one symbol per call.
    struct Scripted {
        outputs: Vec<u8>,
        calls: Cell<usize>,
    }

    impl Scripted {
        fn new(outputs: Vec<u8>) -> Self {
            Self { outputs, calls: Cell::new(0) }
        }
    }

    impl SymbolPredictor for Scripted {
        fn window(&self) -> usize {
            2
        }
        fn predict_symbol(&self, _: &[u8]) -> u8 {
            let i = self.calls.get();
            self.calls.set(i + 1);
            self.outputs[i % self.outputs.len()]
        }
    }

    fn entry(delta: u32, symbol: u8) -> CalibrationEntry {
        CalibrationEntry { delta, symbol }
    }

    #[test]
    fn perfect_model_gives_empty_table() {
        let stream = vec![1, 10, 2, 10, 11, 12];
        let table = build_table(&stream, &Scripted::new(stream.clone()), 12).unwrap();
        assert_eq!(table.entry_count(), 0);
        assert_eq!(table.stream_length(), 6);
        let back = reconstruct_stream(&Scripted::new(stream.clone()), &table, 12).unwrap();
        assert_eq!(back.as_slice(), &stream[..]);
    }

    #[test]
    fn worked_gaps_three_and_three() {
        // errors at positions 3 and 6; the truth there is 10 and 1
        let stream = vec![0, 10, 1, 10, 2, 10, 1, 10, 0, 10, 11, 12];
        let mut predicted = stream.clone();
        predicted[3] = 4;
        predicted[6] = 0;
        let table = build_table(&stream, &Scripted::new(predicted.clone()), 12).unwrap();
        assert_eq!(table.entries(), &[entry(3, 10), entry(3, 1)]);
        assert_eq!(table.positions().collect::<Vec<_>>(), vec![(3, 10), (6, 1)]);
        let back = reconstruct_stream(&Scripted::new(predicted), &table, 12).unwrap();
        assert_eq!(back.as_slice(), &stream[..]);
    }

    #[test]
    fn entry_byte_layout() {
        let t = CalibrationTable::new(500, vec![entry(3, 10)]).unwrap();
        let bytes = encode_table(&t);
        // header: varint 500 = [0xf4, 0x03], count 1
        assert_eq!(bytes, vec![0xf4, 0x03, 0x01, 0x03, 0x0a]);
        assert_eq!(decode_table(&bytes).unwrap(), t);

        let t = CalibrationTable::new(500, vec![entry(130, 1)]).unwrap();
        let bytes = encode_table(&t);
        assert_eq!(&bytes[3..], &[0x80, 0x00, 0x82, 0x01]);
        assert_eq!(decode_table(&bytes).unwrap(), t);

        let empty = CalibrationTable::new(500, vec![]).unwrap();
        assert_eq!(encode_table(&empty), vec![0xf4, 0x03, 0x00]);
        assert_eq!(decode_table(&encode_table(&empty)).unwrap(), empty);
    }

    #[test]
    fn max_delta_layout() {
        let t = CalibrationTable::new(u64::from(MAX_DELTA) + 1, vec![entry(MAX_DELTA, 12)]).unwrap();
        let bytes = encode_table(&t);
        assert_eq!(&bytes[bytes.len() - 4..], &[0xff, 0xff, 0xff, 12]);
        assert_eq!(decode_table(&bytes).unwrap(), t);
    }

    #[test]
    fn decode_errors() {
        assert!(matches!(decode_table(&[]), Err(CalibrationError::TruncatedTable { .. })));
        assert!(matches!(decode_table(&[10, 1, 0x81]), Err(CalibrationError::TruncatedTable { .. })));
        assert_eq!(decode_table(&[10, 1, 2, 13]).unwrap_err(), CalibrationError::SymbolOutOfRange(13));
        assert!(matches!(decode_table(&[3, 1, 5, 1]), Err(CalibrationError::InconsistentLength { .. })));
        assert_eq!(decode_table(&[10, 2, 1, 1, 0, 1]).unwrap_err(), CalibrationError::ZeroGap { index: 1 });
        assert_eq!(decode_table(&[10, 0, 7]).unwrap_err(), CalibrationError::TrailingBytes(1));
    }

    #[test]
    fn long_gap_is_split() {
        let len = 2 * u64::from(MAX_DELTA) + 10;
        let pos = u64::from(MAX_DELTA) + 5;
        let t = CalibrationTable::from_corrections(len, [(pos, 3)], |_| 7).unwrap();
        assert_eq!(t.entries(), &[entry(MAX_DELTA, 7), entry(5, 3)]);
        assert_eq!(t.positions().last(), Some((pos, 3)));
    }

    #[test]
    fn reconstruct_rejects_out_of_range_table() {
        let t = CalibrationTable { stream_length: 3, entries: vec![entry(5, 1)] };
        assert!(matches!(
            reconstruct_stream(&Scripted::new(vec![0]), &t, 12),
            Err(CalibrationError::InconsistentLength { position: 5, length: 3 })
        ));
    }
}
