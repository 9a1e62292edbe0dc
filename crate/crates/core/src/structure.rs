//! Graph structure vectorization.
//!
//! Adjacency lists go through three invertible stages: delta coding of each
//! sorted successor list, run-length grouping of equal deltas into
//! `(count, delta)` pairs, and flattening into a stream over the 13-symbol
//! alphabet `0..=12`. Digits `0..=9` spell decimal numbers, `10` ends a number,
//! `11` ends a record and `12` ends the stream. Deltas are zigzag mapped before
//! spelling since the first delta of a record (`succ[0] - source`) may be
//! negative.

use thiserror::Error;

pub const NUMBER_END: u8 = 10;
pub const RECORD_END: u8 = 11;
pub const STREAM_END: u8 = 12;
pub const ALPHABET_SIZE: usize = 13;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StructureError {
    #[error("malformed symbol stream at position {position}: {reason}")]
    MalformedStream { position: usize, reason: &'static str },
}

fn malformed(position: usize, reason: &'static str) -> StructureError {
    StructureError::MalformedStream { position, reason }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeltaRecord {
    pub source: u64,
    pub deltas: Vec<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Run {
    pub count: u64,
    pub delta: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunLengthRecord {
    pub source: u64,
    pub tuples: Vec<Run>,
}

/// A sequence of symbols from the 13-symbol alphabet.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct SymbolStream(Vec<u8>);

impl SymbolStream {
    /// Wraps raw symbols, rejecting anything outside `0..=12`.
    pub fn from_symbols(symbols: Vec<u8>) -> Result<Self, StructureError> {
        if let Some(pos) = symbols.iter().position(|&s| s as usize >= ALPHABET_SIZE) {
            return Err(malformed(pos, "symbol out of range"));
        }
        Ok(Self(symbols))
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.0
    }
}

pub fn zigzag(z: i64) -> u64 {
    ((z << 1) ^ (z >> 63)) as u64
}

pub fn unzigzag(u: u64) -> i64 {
    ((u >> 1) as i64) ^ -((u & 1) as i64)
}

pub fn delta_encode(source: u64, successors: &[u64]) -> DeltaRecord {
    let mut prev = source as i64;
    let deltas = successors
        .iter()
        .map(|&s| {
            let d = s as i64 - prev;
            prev = s as i64;
            d
        })
        .collect();
    DeltaRecord { source, deltas }
}

/// Prefix-sum inverse of [`delta_encode`]. `None` if a value leaves `u64`.
pub fn delta_decode(record: &DeltaRecord) -> Option<Vec<u64>> {
    let mut cur = i64::try_from(record.source).ok()?;
    record
        .deltas
        .iter()
        .map(|&d| {
            cur = cur.checked_add(d)?;
            u64::try_from(cur).ok()
        })
        .collect()
}

/// Groups maximal runs of equal deltas.
pub fn run_length(deltas: &[i64]) -> Vec<Run> {
    let mut runs: Vec<Run> = Vec::new();
    for &d in deltas {
        match runs.last_mut() {
            Some(run) if run.delta == d => run.count += 1,
            _ => runs.push(Run { count: 1, delta: d }),
        }
    }
    runs
}

pub fn expand_runs(runs: &[Run]) -> Vec<i64> {
    runs.iter().flat_map(|r| std::iter::repeat_n(r.delta, r.count as usize)).collect()
}

fn push_number(out: &mut Vec<u8>, n: u64) {
    let start = out.len();
    let mut n = n;
    loop {
        out.push((n % 10) as u8);
        n /= 10;
        if n == 0 {
            break;
        }
    }
    out[start..].reverse();
    out.push(NUMBER_END);
}

/// Spells records as digit groups. Callers pass records sorted by source and
/// omit sources with no successors.
pub fn flatten(records: &[RunLengthRecord]) -> SymbolStream {
    let mut out = Vec::new();
    for rec in records {
        push_number(&mut out, rec.source);
        for run in &rec.tuples {
            push_number(&mut out, run.count);
            push_number(&mut out, zigzag(run.delta));
        }
        out.push(RECORD_END);
    }
    out.push(STREAM_END);
    SymbolStream(out)
}

/// Parses a symbol stream back into run-length records.
pub fn unflatten(symbols: &[u8]) -> Result<Vec<RunLengthRecord>, StructureError> {
    let mut records = Vec::new();
    // Numbers of the record being read: source, then count/delta pairs.
    let mut numbers: Vec<u64> = Vec::new();
    let mut current: Option<u64> = None;

    for (pos, &sym) in symbols.iter().enumerate() {
        match sym {
            0..=9 => {
                let n = current.unwrap_or(0);
                let n = n
                    .checked_mul(10)
                    .and_then(|n| n.checked_add(u64::from(sym)))
                    .ok_or_else(|| malformed(pos, "number overflows 64 bits"))?;
                current = Some(n);
            }
            NUMBER_END => {
                let n = current.take().ok_or_else(|| malformed(pos, "empty digit group"))?;
                numbers.push(n);
            }
            RECORD_END => {
                if current.is_some() {
                    return Err(malformed(pos, "digit group missing terminator"));
                }
                if numbers.len() < 3 || numbers.len().is_multiple_of(2) {
                    return Err(malformed(pos, "record needs a source and whole (count, delta) pairs"));
                }
                let source = numbers[0];
                let mut tuples = Vec::with_capacity(numbers.len() / 2);
                for pair in numbers[1..].chunks_exact(2) {
                    if pair[0] == 0 {
                        return Err(malformed(pos, "zero run count"));
                    }
                    tuples.push(Run { count: pair[0], delta: unzigzag(pair[1]) });
                }
                records.push(RunLengthRecord { source, tuples });
                numbers.clear();
            }
            STREAM_END => {
                if current.is_some() || !numbers.is_empty() {
                    return Err(malformed(pos, "unterminated record before end marker"));
                }
                if pos + 1 != symbols.len() {
                    return Err(malformed(pos + 1, "symbol after end marker"));
                }
                return Ok(records);
            }
            _ => return Err(malformed(pos, "symbol out of range")),
        }
    }
    Err(malformed(symbols.len(), "missing end marker"))
}

/// Vectorizes an adjacency structure (successor lists sorted ascending).
pub fn encode_structure(adjacency: &[Vec<usize>]) -> SymbolStream {
    let records: Vec<RunLengthRecord> = adjacency
        .iter()
        .enumerate()
        .filter(|(_, succ)| !succ.is_empty())
        .map(|(src, succ)| {
            let succ: Vec<u64> = succ.iter().map(|&s| s as u64).collect();
            let delta = delta_encode(src as u64, &succ);
            RunLengthRecord { source: src as u64, tuples: run_length(&delta.deltas) }
        })
        .collect();
    flatten(&records)
}

/// Rebuilds `node_count` successor lists from a symbol stream.
///
/// Beyond the grammar, checks that sources ascend strictly, ids stay below
/// `node_count`, and successor lists are sorted.
pub fn decode_structure(symbols: &[u8], node_count: usize) -> Result<Vec<Vec<usize>>, StructureError> {
    decode_structure_bounded(symbols, node_count, u64::MAX)
}

/// [`decode_structure`] that also rejects streams expanding to more than
/// `max_edges` successors before allocating them.
pub fn decode_structure_bounded(
    symbols: &[u8],
    node_count: usize,
    max_edges: u64,
) -> Result<Vec<Vec<usize>>, StructureError> {
    let records = unflatten(symbols)?;
    let end = symbols.len().saturating_sub(1);
    let within_bound = records
        .iter()
        .flat_map(|r| r.tuples.iter())
        .try_fold(0u64, |acc, r| acc.checked_add(r.count))
        .is_some_and(|t| t <= max_edges);
    if !within_bound {
        return Err(malformed(end, "more successors than edges"));
    }

    let mut adjacency = vec![Vec::new(); node_count];
    let mut last_source: Option<u64> = None;
    for rec in records {
        if last_source.is_some_and(|s| rec.source <= s) {
            return Err(malformed(end, "record sources not strictly ascending"));
        }
        last_source = Some(rec.source);
        let src = usize::try_from(rec.source)
            .ok()
            .filter(|&s| s < node_count)
            .ok_or_else(|| malformed(end, "source id out of range"))?;
        let deltas = expand_runs(&rec.tuples);
        if deltas.iter().skip(1).any(|&d| d < 0) {
            return Err(malformed(end, "successor list not sorted"));
        }
        let succ = delta_decode(&DeltaRecord { source: rec.source, deltas })
            .ok_or_else(|| malformed(end, "successor id out of range"))?;
        let list = &mut adjacency[src];
        for s in succ {
            let s = usize::try_from(s)
                .ok()
                .filter(|&s| s < node_count)
                .ok_or_else(|| malformed(end, "successor id out of range"))?;
            list.push(s);
        }
    }
    Ok(adjacency)
}
