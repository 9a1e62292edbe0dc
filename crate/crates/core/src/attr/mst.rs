use super::SimilarityMatrix;

/// Tree edge oriented away from its component's root.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeEdge {
    pub parent: usize,
    pub child: usize,
    pub distance: u64,
}

struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), size: vec![1; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
        true
    }
}

/// Kruskal over the finite band edges, ties broken by `(lower, upper)`
/// endpoint. Each component is rooted at its smallest index; edges come back
/// sorted by child.
pub fn build_mst(matrix: &SimilarityMatrix) -> Vec<TreeEdge> {
    let n = matrix.len();
    let mut edges: Vec<(u64, usize, usize)> = matrix.edges().map(|(a, b, d)| (d, a, b)).collect();
    edges.sort_unstable();

    let mut sets = DisjointSets::new(n);
    let mut neighbours: Vec<Vec<(usize, u64)>> = vec![Vec::new(); n];
    let mut kept = 0;
    for (d, a, b) in edges {
        if kept + 1 >= n {
            break;
        }
        if sets.union(a, b) {
            neighbours[a].push((b, d));
            neighbours[b].push((a, d));
            kept += 1;
        }
    }

    let mut out = Vec::with_capacity(kept);
    let mut visited = vec![false; n];
    let mut stack = Vec::new();
    for root in 0..n {
        if visited[root] {
            continue;
        }
        visited[root] = true;
        stack.push(root);
        while let Some(u) = stack.pop() {
            for &(v, d) in &neighbours[u] {
                if !visited[v] {
                    visited[v] = true;
                    out.push(TreeEdge { parent: u, child: v, distance: d });
                    stack.push(v);
                }
            }
        }
    }
    out.sort_unstable_by_key(|e| e.child);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attr::compute_similarity_matrix;

    #[test]
    fn worked_tree() {
        let corpus = [&b"aaabac"[..], b"ababac", b"baaaba"];
        let m = compute_similarity_matrix(&corpus, 3).unwrap();
        let t = build_mst(&m);
        assert_eq!(
            t,
            vec![TreeEdge { parent: 0, child: 1, distance: 2 }, TreeEdge { parent: 0, child: 2, distance: 2 },]
        );
    }

    #[test]
    fn single_node_has_no_edges() {
        let m = compute_similarity_matrix(&[b"x"], 4).unwrap();
        assert!(build_mst(&m).is_empty());
        let m = compute_similarity_matrix::<&[u8]>(&[], 4).unwrap();
        assert!(build_mst(&m).is_empty());
    }

    #[test]
    fn root_is_smallest_index() {
        // 2 is closest to both neighbours, but 0 still roots the tree
        let corpus = [&b"aaaa"[..], b"bbbb", b"aabb", b"bbbb"];
        let m = compute_similarity_matrix(&corpus, 3).unwrap();
        let t = build_mst(&m);
        assert_eq!(t.len(), 3);
        let parent_of = |c| t.iter().find(|e| e.child == c).unwrap().parent;
        assert_eq!(parent_of(2), 0);
        assert!(t.iter().all(|e| e.child != 0));
    }
}
