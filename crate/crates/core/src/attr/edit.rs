//! Levenshtein edit scripts with merged runs.
//!
//! Ops address positions in the parent string and are listed in descending
//! position order, so applying them front to back never shifts a position
//! that a later op refers to. At equal positions a deletion or substitution
//! comes before an insertion.

use super::AttrError;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum EditOp {
    /// Insert `bytes` before position `pos`.
    Insert { pos: usize, bytes: Vec<u8> },
    /// Remove positions `start..=stop`.
    Delete { start: usize, stop: usize },
    /// Overwrite `bytes.len()` bytes starting at `pos`.
    Substitute { pos: usize, bytes: Vec<u8> },
}

impl EditOp {
    /// Unit edits this op stands for.
    pub fn cost(&self) -> usize {
        match self {
            EditOp::Insert { bytes, .. } | EditOp::Substitute { bytes, .. } => bytes.len(),
            EditOp::Delete { start, stop } => stop - start + 1,
        }
    }
}

pub fn edit_cost(ops: &[EditOp]) -> usize {
    ops.iter().map(EditOp::cost).sum()
}

/// Largest banded DP table (in cells) for an exact script. Cores that need a
/// bigger band are replaced wholesale, which stays lossless but is no longer
/// minimal.
const MAX_DP_CELLS: usize = 1 << 26;

/// Builds the ops that turn `parent` into `child`.
pub fn get_edit_ops(parent: &[u8], child: &[u8]) -> Vec<EditOp> {
    let prefix = parent.iter().zip(child).take_while(|(a, b)| a == b).count();
    let max_suffix = parent.len().min(child.len()) - prefix;
    let suffix = parent.iter().rev().zip(child.iter().rev()).take(max_suffix).take_while(|(a, b)| a == b).count();
    let a = &parent[prefix..parent.len() - suffix];
    let b = &child[prefix..child.len() - suffix];

    if a.is_empty() && b.is_empty() {
        return Vec::new();
    }
    let Some(band) = Band::solve(a, b) else {
        return replace_whole(prefix, a, b);
    };

    let mut script = Script::default();
    let (mut i, mut j) = (a.len(), b.len());
    while i > 0 || j > 0 {
        let here = band.get(i, j);
        let diag = if i > 0 && j > 0 { band.get(i - 1, j - 1) } else { INF };
        if i > 0 && j > 0 && a[i - 1] == b[j - 1] && here == diag {
            script.flush();
            i -= 1;
            j -= 1;
        } else if i > 0 && j > 0 && here == diag + 1 {
            script.substitute(prefix + i - 1, b[j - 1]);
            i -= 1;
            j -= 1;
        } else if i > 0 && here == band.get(i - 1, j) + 1 {
            script.delete(prefix + i - 1);
            i -= 1;
        } else {
            script.insert(prefix + i, b[j - 1]);
            j -= 1;
        }
    }
    script.finish()
}

const INF: u32 = u32::MAX / 2;

/// Levenshtein table restricted to the diagonals `|i - j| <= k`.
///
/// Every optimal alignment of cost `d` stays within `|i - j| <= d`, so once
/// the corner value is at most `k` all cells on optimal paths are exact and
/// the backtrace matches the one over the full table.
struct Band {
    k: usize,
    width: usize,
    cells: Vec<u32>,
}

impl Band {
    /// Doubles `k` until the corner fits; `None` past the cell budget.
    fn solve(a: &[u8], b: &[u8]) -> Option<Self> {
        let full = a.len().max(b.len());
        let mut k = a.len().abs_diff(b.len()).max(16).min(full);
        loop {
            let width = 2 * k + 1;
            if (a.len() + 1).saturating_mul(width) > MAX_DP_CELLS {
                return None;
            }
            let band = Self::fill(a, b, k, width);
            if band.get(a.len(), b.len()) as usize <= k || k >= full {
                return Some(band);
            }
            k = (2 * k).min(full);
        }
    }

    fn fill(a: &[u8], b: &[u8], k: usize, width: usize) -> Self {
        let mut cells = vec![INF; (a.len() + 1) * width];
        // cell (i, j) lives at i * width + (j + k - i)
        for j in 0..=b.len().min(k) {
            cells[j + k] = j as u32;
        }
        for i in 1..=a.len() {
            let lo = i.saturating_sub(k);
            let hi = (i + k).min(b.len());
            let row = i * width + k - i;
            let up = row + 1 - width;
            for j in lo..=hi {
                cells[row + j] = if j == 0 {
                    i as u32
                } else {
                    let diag = cells[up + j - 1] + u32::from(a[i - 1] != b[j - 1]);
                    // (i - 1, j) falls off the band's right edge
                    let del = if j + 1 > i + k { INF } else { cells[up + j] + 1 };
                    let ins = if j > lo { cells[row + j - 1] + 1 } else { INF };
                    diag.min(del).min(ins)
                };
            }
        }
        Band { k, width, cells }
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let offset = (j + self.k).checked_sub(i).filter(|&o| o < self.width)?;
        Some(i * self.width + offset)
    }

    fn get(&self, i: usize, j: usize) -> u32 {
        self.slot(i, j).map_or(INF, |s| self.cells[s])
    }
}

fn replace_whole(prefix: usize, a: &[u8], b: &[u8]) -> Vec<EditOp> {
    let mut ops = Vec::new();
    if !a.is_empty() {
        ops.push(EditOp::Delete { start: prefix, stop: prefix + a.len() - 1 });
    }
    if !b.is_empty() {
        ops.push(EditOp::Insert { pos: prefix, bytes: b.to_vec() });
    }
    ops
}

/// Collects single-byte ops emitted end to start and merges adjacent runs.
#[derive(Default)]
struct Script {
    ops: Vec<EditOp>,
    // byte runs are accumulated reversed
    pending: Option<EditOp>,
}

impl Script {
    fn flush(&mut self) {
        if let Some(mut op) = self.pending.take() {
            if let EditOp::Insert { bytes, .. } | EditOp::Substitute { bytes, .. } = &mut op {
                bytes.reverse();
            }
            self.ops.push(op);
        }
    }

    fn substitute(&mut self, pos: usize, byte: u8) {
        if let Some(EditOp::Substitute { pos: p, bytes }) = &mut self.pending {
            if *p == pos + 1 {
                *p = pos;
                bytes.push(byte);
                return;
            }
        }
        self.flush();
        self.pending = Some(EditOp::Substitute { pos, bytes: vec![byte] });
    }

    fn delete(&mut self, pos: usize) {
        if let Some(EditOp::Delete { start, .. }) = &mut self.pending {
            if *start == pos + 1 {
                *start = pos;
                return;
            }
        }
        self.flush();
        self.pending = Some(EditOp::Delete { start: pos, stop: pos });
    }

    fn insert(&mut self, pos: usize, byte: u8) {
        if let Some(EditOp::Insert { pos: p, bytes }) = &mut self.pending {
            if *p == pos {
                bytes.push(byte);
                return;
            }
        }
        self.flush();
        self.pending = Some(EditOp::Insert { pos, bytes: vec![byte] });
    }

    fn finish(mut self) -> Vec<EditOp> {
        self.flush();
        self.ops
    }
}

/// Applies ops in list order, checking each against the current string.
pub fn apply_edit_ops(base: &[u8], ops: &[EditOp]) -> Result<Vec<u8>, AttrError> {
    let mut s = base.to_vec();
    for (index, op) in ops.iter().enumerate() {
        let oob = AttrError::OpOutOfBounds { index };
        match op {
            EditOp::Insert { pos, bytes } => {
                if *pos > s.len() || bytes.is_empty() {
                    return Err(oob);
                }
                s.splice(*pos..*pos, bytes.iter().copied());
            }
            EditOp::Delete { start, stop } => {
                if start > stop || *stop >= s.len() {
                    return Err(oob);
                }
                s.drain(*start..=*stop);
            }
            EditOp::Substitute { pos, bytes } => {
                let end = pos.checked_add(bytes.len()).filter(|&e| e <= s.len());
                match end {
                    Some(end) if !bytes.is_empty() => s[*pos..end].copy_from_slice(bytes),
                    _ => return Err(oob),
                }
            }
        }
    }
    Ok(s)
}
