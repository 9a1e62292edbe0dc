use rayon::prelude::*;

use super::AttrError;

/// Occurrence count of every byte value in a string.
#[derive(Clone, PartialEq, Eq)]
pub struct ByteHistogram([u32; 256]);

impl ByteHistogram {
    pub fn counts(&self) -> &[u32; 256] {
        &self.0
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&c| u64::from(c)).sum()
    }
}

impl std::fmt::Debug for ByteHistogram {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_map().entries(self.0.iter().enumerate().filter(|(_, &c)| c > 0)).finish()
    }
}

pub fn bow_encode(s: &[u8]) -> ByteHistogram {
    let mut counts = [0u32; 256];
    for &b in s {
        counts[usize::from(b)] += 1;
    }
    ByteHistogram(counts)
}

pub fn manhattan(p: &ByteHistogram, q: &ByteHistogram) -> u64 {
    p.0.iter().zip(q.0.iter()).map(|(&a, &b)| u64::from(a.abs_diff(b))).sum()
}

/// Windowed distances: row `i` holds `d(S[i], S[i + j])` for `j in 1..M`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimilarityMatrix {
    n: usize,
    window: usize,
    cells: Vec<u64>,
}

const INFINITE: u64 = u64::MAX;

impl SimilarityMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Distance between `i` and `i + j`; `None` stands for the infinite cell.
    pub fn get(&self, i: usize, j: usize) -> Option<u64> {
        assert!(i < self.n && (1..self.window).contains(&j), "cell ({i}, {j}) outside the matrix");
        let d = self.cells[i * (self.window - 1) + j - 1];
        (d != INFINITE).then_some(d)
    }

    /// Finite cells as `(i, i + j, distance)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        (0..self.n).flat_map(move |i| (1..self.window).filter_map(move |j| self.get(i, j).map(|d| (i, i + j, d))))
    }
}

pub fn compute_similarity_matrix<S: AsRef<[u8]> + Sync>(
    corpus: &[S],
    window: usize,
) -> Result<SimilarityMatrix, AttrError> {
    if window < 2 {
        return Err(AttrError::WindowTooSmall(window));
    }
    let n = corpus.len();
    let hists: Vec<ByteHistogram> = corpus.par_iter().map(|s| bow_encode(s.as_ref())).collect();
    let width = window - 1;
    let mut cells = vec![INFINITE; n * width];
    cells.par_chunks_mut(width.max(1)).enumerate().for_each(|(i, row)| {
        for j in 1..window {
            if i + j < n {
                row[j - 1] = manhattan(&hists[i], &hists[i + j]);
            }
        }
    });
    Ok(SimilarityMatrix { n, window, cells })
}
