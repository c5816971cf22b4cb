//! Exact k-nearest-neighbour search: a kd-tree for low dimensions and a
//! linear scan otherwise. Distance ties resolve toward the smaller index.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::dense::{sq_dist, DenseMatrix};

/// Above this dimension the kd-tree stops paying for itself.
pub const KD_TREE_MAX_DIM: usize = 20;
const LEAF_SIZE: usize = 16;

/// A neighbour of a query point with its squared Euclidean distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub sq_dist: f64,
}

impl Neighbor {
    pub fn dist(&self) -> f64 {
        libm::sqrt(self.sq_dist)
    }
}

impl Eq for Neighbor {}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sq_dist.total_cmp(&other.sq_dist).then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

enum Node {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: f64, left: usize, right: usize },
}

/// Static kd-tree over the rows of a dense matrix.
pub struct KdTree<'a> {
    points: &'a DenseMatrix,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl<'a> KdTree<'a> {
    pub fn new(points: &'a DenseMatrix) -> Self {
        let mut tree = KdTree { points, order: (0..points.rows()).collect(), nodes: Vec::new() };
        if points.rows() > 0 {
            tree.build(0, points.rows());
        }
        tree
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let pts = self.points;
        let dim = (0..pts.cols())
            .map(|d| {
                let (lo, hi) = self.order[start..end].iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                    let v = pts[(i, d)];
                    (lo.min(v), hi.max(v))
                });
                (d, hi - lo)
            })
            .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best })
            .0;
        let mid = start + (end - start) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            pts[(a, dim)].total_cmp(&pts[(b, dim)]).then(a.cmp(&b))
        });
        let value = pts[(self.order[mid], dim)];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split { dim, value, left, right };
        id
    }

    /// The `k` nearest rows to row `query`, excluding `query` itself, sorted
    /// by `(distance, index)`.
    pub fn neighbors_of(&self, query: usize, k: usize) -> Vec<Neighbor> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        if k > 0 && !self.nodes.is_empty() {
            self.search(0, self.points.row(query), Some(query), k, &mut heap);
        }
        heap.into_sorted_vec()
    }

    fn search(&self, node: usize, q: &[f64], skip: Option<usize>, k: usize, heap: &mut BinaryHeap<Neighbor>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if Some(i) == skip {
                        continue;
                    }
                    offer(heap, k, Neighbor { index: i, sq_dist: sq_dist(q, self.points.row(i)) });
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = q[dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, skip, k, heap);
                // equal distances are still explored so index ties resolve correctly
                if heap.len() < k || diff * diff <= heap.peek().map_or(f64::INFINITY, |w| w.sq_dist) {
                    self.search(far, q, skip, k, heap);
                }
            }
        }
    }
}

#[inline]
fn offer(heap: &mut BinaryHeap<Neighbor>, k: usize, cand: Neighbor) {
    if heap.len() < k {
        heap.push(cand);
    } else if let Some(worst) = heap.peek() {
        if cand < *worst {
            heap.pop();
            heap.push(cand);
        }
    }
}

/// Linear-scan neighbours of row `query`.
pub fn brute_force_neighbors(points: &DenseMatrix, query: usize, k: usize) -> Vec<Neighbor> {
    let q = points.row(query);
    let mut all: Vec<Neighbor> = (0..points.rows())
        .filter(|&i| i != query)
        .map(|i| Neighbor { index: i, sq_dist: sq_dist(q, points.row(i)) })
        .collect();
    let k = k.min(all.len());
    if k < all.len() && k > 0 {
        all.select_nth_unstable(k - 1);
    }
    all.truncate(k);
    all.sort_unstable();
    all
}

/// Chooses the kd-tree for `d <= 20` and the linear scan otherwise.
pub enum KnnIndex<'a> {
    Tree(KdTree<'a>),
    Scan(&'a DenseMatrix),
}

impl<'a> KnnIndex<'a> {
    pub fn new(points: &'a DenseMatrix) -> Self {
        if points.cols() <= KD_TREE_MAX_DIM {
            KnnIndex::Tree(KdTree::new(points))
        } else {
            KnnIndex::Scan(points)
        }
    }

    pub fn neighbors_of(&self, query: usize, k: usize) -> Vec<Neighbor> {
        match self {
            KnnIndex::Tree(t) => t.neighbors_of(query, k),
            KnnIndex::Scan(p) => brute_force_neighbors(p, query, k),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kd_tree_matches_scan_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in [1, 2, 3, 7] {
            let data: Vec<f64> = (0..300 * d).map(|_| rng.random::<f64>()).collect();
            let pts = DenseMatrix::from_vec(300, d, data).unwrap();
            let tree = KdTree::new(&pts);
            for q in 0..300 {
                assert_eq!(tree.neighbors_of(q, 7), brute_force_neighbors(&pts, q, 7));
            }
        }
    }

    #[test]
    fn ties_prefer_smaller_index() {
        // points on a grid: many equal distances
        let mut rows = Vec::new();
        for x in 0..10 {
            for y in 0..10 {
                rows.push(vec![x as f64, y as f64]);
            }
        }
        let pts = DenseMatrix::from_rows(&rows).unwrap();
        let tree = KdTree::new(&pts);
        for q in 0..100 {
            assert_eq!(tree.neighbors_of(q, 5), brute_force_neighbors(&pts, q, 5));
        }
        // centre point 55 = (5, 5): distance-1 neighbours are 45, 54, 56, 65
        let idx: Vec<usize> = tree.neighbors_of(55, 3).iter().map(|n| n.index).collect();
        assert_eq!(idx, vec![45, 54, 56]);
    }

    #[test]
    fn duplicates_and_small_inputs() {
        let pts = DenseMatrix::from_rows(&[vec![0.0], vec![0.0], vec![1.0]]).unwrap();
        let tree = KdTree::new(&pts);
        let n = tree.neighbors_of(0, 5);
        assert_eq!(n.len(), 2);
        assert_eq!(n[0], Neighbor { index: 1, sq_dist: 0.0 });
        assert!(tree.neighbors_of(0, 0).is_empty());
    }
}
