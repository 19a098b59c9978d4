use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{dist2, NodeSet};
use crate::{Error, Result};

const LEAF_SIZE: usize = 8;

/// Center node plus its nearest neighbors, closest first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stencil {
    pub center: usize,
    /// Node indices, `neighbors[0] == center`, ascending distance with ties
    /// broken by ascending index.
    pub neighbors: Vec<usize>,
}

impl Stencil {
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Exact k-d tree over the points of a [`NodeSet`].
///
/// Immutable after construction, so queries may run from many threads.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    dim: usize,
    coords: Vec<f64>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

/// Heap entry ordered by (squared distance, rank). The center gets rank 0
/// so it always leads its own stencil.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    d2: f64,
    rank: usize,
    index: usize,
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.rank.cmp(&other.rank))
    }
}

impl NeighborIndex {
    pub fn build(nodes: &NodeSet) -> Self {
        let dim = nodes.dim();
        let mut index = Self {
            dim,
            coords: nodes.coords().to_vec(),
            order: (0..nodes.len()).collect(),
            nodes: Vec::new(),
        };
        if !nodes.is_empty() {
            index.build_rec(0, nodes.len());
        }
        index
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    fn coord(&self, i: usize, axis: usize) -> f64 {
        self.coords[i * self.dim + axis]
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    fn build_rec(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let axis = (0..self.dim)
            .max_by(|&a, &b| self.extent(start, end, a).total_cmp(&self.extent(start, end, b)))
            .unwrap_or(0);
        let mid = start + (end - start) / 2;
        let mut slice = std::mem::take(&mut self.order);
        slice[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            self.coord(a, axis).total_cmp(&self.coord(b, axis))
        });
        self.order = slice;
        let value = self.coord(self.order[mid], axis);
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build_rec(start, mid);
        let right = self.build_rec(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    fn extent(&self, start: usize, end: usize, axis: usize) -> f64 {
        let (lo, hi) = self.order[start..end]
            .iter()
            .map(|&i| self.coord(i, axis))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
        hi - lo
    }

    /// The `k` nearest points to an arbitrary query location, ties broken by
    /// ascending index. `prefer` (if any) sorts first among equal distances.
    fn nearest(&self, query: &[f64], k: usize, prefer: Option<usize>) -> Vec<usize> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        if k > 0 && !self.nodes.is_empty() {
            let mut bounds = vec![0.0; self.dim];
            self.search(0, query, k, prefer, &mut heap, &mut bounds, 0.0);
        }
        heap.into_sorted_vec().into_iter().map(|c| c.index).collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn search(
        &self,
        node: usize,
        query: &[f64],
        k: usize,
        prefer: Option<usize>,
        heap: &mut BinaryHeap<Candidate>,
        offsets: &mut [f64],
        lower: f64,
    ) {
        // Prune only on strict excess so equal-distance ties still compete.
        if heap.len() == k && heap.peek().is_some_and(|w| lower > w.d2) {
            return;
        }
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let cand = Candidate {
                        d2: dist2(query, self.point(i)),
                        rank: if Some(i) == prefer { 0 } else { i + 1 },
                        index: i,
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if heap.peek().is_some_and(|w| cand < *w) {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, query, k, prefer, heap, offsets, lower);
                let old = offsets[axis];
                let far_lower = lower - old * old + diff * diff;
                offsets[axis] = diff;
                self.search(far, query, k, prefer, heap, offsets, far_lower);
                offsets[axis] = old;
            }
        }
    }

    /// Stencil of the `n` nodes closest to node `center`.
    pub fn knn(&self, center: usize, n: usize) -> Result<Stencil> {
        if n == 0 || n > self.len() || center >= self.len() {
            return Err(Error::InvalidStencilSize { n, count: self.len() });
        }
        let neighbors = self.nearest(self.point(center), n, Some(center));
        debug_assert_eq!(neighbors[0], center);
        Ok(Stencil { center, neighbors })
    }

    /// Nearest nodes to an arbitrary location, ties broken by index.
    pub fn query(&self, point: &[f64], k: usize) -> Vec<usize> {
        self.nearest(point, k.min(self.len()), None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{discretize_ball, Kind};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(nodes: &NodeSet, q: &[f64], k: usize, prefer: Option<usize>) -> Vec<usize> {
        let mut all: Vec<(f64, usize, usize)> = (0..nodes.len())
            .map(|i| {
                let rank = if Some(i) == prefer { 0 } else { i + 1 };
                (dist2(q, nodes.point(i)), rank, i)
            })
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.into_iter().take(k).map(|t| t.2).collect()
    }

    fn grid(side: usize, dim: usize) -> NodeSet {
        let mut pts = Vec::new();
        if dim == 2 {
            for i in 0..side {
                for j in 0..side {
                    pts.push(vec![i as f64, j as f64]);
                }
            }
        }
        let kinds = vec![Kind::Interior; pts.len()];
        NodeSet::from_points(&pts, kinds, 1.0, 0).unwrap()
    }

    fn random_set(n: usize, dim: usize, seed: u64) -> NodeSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords: Vec<f64> = (0..n * dim).map(|_| rng.random::<f64>()).collect();
        NodeSet::new(dim, coords, vec![Kind::Interior; n], 0.1, seed).unwrap()
    }

    #[test]
    fn singleton() {
        let nodes = NodeSet::from_points(&[vec![0.3, 0.4]], vec![Kind::Interior], 1.0, 0).unwrap();
        let index = NeighborIndex::build(&nodes);
        assert_eq!(index.knn(0, 1).unwrap().neighbors, vec![0]);
        assert!(index.knn(0, 2).is_err());
    }

    #[test]
    fn n_one_is_center_only() {
        let nodes = random_set(50, 2, 1);
        let index = NeighborIndex::build(&nodes);
        for c in 0..50 {
            assert_eq!(index.knn(c, 1).unwrap().neighbors, vec![c]);
        }
    }

    #[test]
    fn grid_center_gets_axis_neighbors() {
        let nodes = grid(3, 2);
        let index = NeighborIndex::build(&nodes);
        // Node 4 is (1,1); axis neighbors are 1, 3, 5, 7 in index order.
        assert_eq!(index.knn(4, 5).unwrap().neighbors, vec![4, 1, 3, 5, 7]);
        let big = grid(7, 2);
        let index = NeighborIndex::build(&big);
        let c = 3 * 7 + 3;
        let mut st = index.knn(c, 5).unwrap().neighbors;
        assert_eq!(st[0], c);
        st.sort();
        assert_eq!(st, vec![c - 7, c - 1, c, c + 1, c + 7]);
    }

    #[test]
    fn grid_ties_broken_by_index() {
        // Equal distances everywhere: every query must agree with the oracle.
        let nodes = grid(9, 2);
        let index = NeighborIndex::build(&nodes);
        for c in 0..nodes.len() {
            for n in [2, 5, 9, 13, 20] {
                let st = index.knn(c, n).unwrap();
                assert_eq!(st.neighbors, brute_force(&nodes, nodes.point(c), n, Some(c)));
            }
        }
    }

    #[test]
    fn scattered_stencils_match_oracle() {
        let nodes = discretize_ball(2, 200, 11).unwrap();
        let index = NeighborIndex::build(&nodes);
        for c in 0..nodes.len() {
            let st = index.knn(c, 12).unwrap();
            assert_eq!(st.neighbors, brute_force(&nodes, nodes.point(c), 12, Some(c)));
            let d: Vec<f64> = st
                .neighbors
                .iter()
                .map(|&j| dist2(nodes.point(c), nodes.point(j)))
                .collect();
            assert!(d.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn random_queries_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for dim in [2, 3] {
            let nodes = random_set(100, dim, 3);
            let index = NeighborIndex::build(&nodes);
            for _ in 0..100 {
                let q: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 1.4 - 0.2).collect();
                let k = rng.random_range(1..=100);
                assert_eq!(index.query(&q, k), brute_force(&nodes, &q, k, None));
            }
        }
    }

    proptest! {
        #[test]
        fn knn_is_exact(seed in 0u64..1000, n in 1usize..60, dim in 2usize..=3) {
            let nodes = random_set(150, dim, seed);
            let index = NeighborIndex::build(&nodes);
            let c = (seed as usize * 7) % nodes.len();
            prop_assert_eq!(index.knn(c, n).unwrap().neighbors, brute_force(&nodes, nodes.point(c), n, Some(c)));
        }
    }
}
