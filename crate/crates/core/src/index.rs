//! Static kd-tree over 3D points.
//!
//! Queries are exact: a radius query returns every point at Euclidean distance
//! `<= r`, and k-NN results are ordered by `(squared distance, point index)`
//! so equal distances always resolve to the smallest index.

use std::cmp::Ordering;

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: u32,
        end: u32,
    },
    Split {
        axis: u8,
        value: f64,
        left: u32,
        right: u32,
    },
}

/// Read-only spatial index; shareable across threads once built.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<[f64; 3]>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

/// A neighbor returned by a k-NN query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist_sq: f64,
}

#[inline]
pub(crate) fn dist_sq(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

#[inline]
fn closer(a: (f64, u32), b: (f64, u32)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

impl SpatialIndex {
    pub fn new(points: Vec<[f64; 3]>) -> Self {
        assert!(
            points.len() < u32::MAX as usize,
            "too many points for the index"
        );
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1);
        if !points.is_empty() {
            build(&points, &mut order, 0, &mut nodes);
        }
        SpatialIndex {
            points,
            order,
            nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, index: usize) -> [f64; 3] {
        self.points[index]
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    /// Calls `visit` for every point within `radius` of `query`, in tree order.
    pub fn for_each_within(&self, query: &[f64; 3], radius: f64, mut visit: impl FnMut(usize)) {
        if self.nodes.is_empty() {
            return;
        }
        let r2 = radius * radius;
        let mut stack = vec![0u32];
        while let Some(n) = stack.pop() {
            match self.nodes[n as usize] {
                Node::Leaf { start, end } => {
                    for &i in &self.order[start as usize..end as usize] {
                        if dist_sq(query, &self.points[i as usize]) <= r2 {
                            visit(i as usize);
                        }
                    }
                }
                Node::Split {
                    axis,
                    value,
                    left,
                    right,
                } => {
                    let q = query[axis as usize];
                    if q - radius <= value {
                        stack.push(left);
                    }
                    if q + radius >= value {
                        stack.push(right);
                    }
                }
            }
        }
    }

    /// Indices of all points within `radius` of `query`, ascending.
    pub fn within_radius(&self, query: &[f64; 3], radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_within(query, radius, |i| out.push(i));
        out.sort_unstable();
        out
    }

    /// The `k` nearest points to `query`, sorted by distance then index.
    pub fn knn(&self, query: &[f64; 3], k: usize) -> Vec<Neighbor> {
        self.knn_bounded(query, k, f64::INFINITY)
    }

    /// Like [`knn`](Self::knn) but ignores points farther than `max_dist_sq`.
    pub fn knn_bounded(&self, query: &[f64; 3], k: usize, max_dist_sq: f64) -> Vec<Neighbor> {
        if k == 0 || self.nodes.is_empty() {
            return Vec::new();
        }
        let mut best: Vec<(f64, u32)> = Vec::with_capacity(k + 1);
        self.knn_node(0, query, k, max_dist_sq, &mut best);
        best.into_iter()
            .map(|(d, i)| Neighbor {
                index: i as usize,
                dist_sq: d,
            })
            .collect()
    }

    /// Nearest point within `radius` (inclusive); smallest index on ties.
    pub fn nearest_within(&self, query: &[f64; 3], radius: f64) -> Option<Neighbor> {
        self.knn_bounded(query, 1, radius * radius)
            .into_iter()
            .next()
    }

    fn knn_node(
        &self,
        node: u32,
        query: &[f64; 3],
        k: usize,
        max_dist_sq: f64,
        best: &mut Vec<(f64, u32)>,
    ) {
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start as usize..end as usize] {
                    let d = dist_sq(query, &self.points[i as usize]);
                    if d > max_dist_sq {
                        continue;
                    }
                    let cand = (d, i);
                    if best.len() == k {
                        if !closer(cand, best[k - 1]) {
                            continue;
                        }
                        best.pop();
                    }
                    let pos = best.partition_point(|&b| closer(b, cand));
                    best.insert(pos, cand);
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[axis as usize] - value;
                let (near, far) = if diff <= 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.knn_node(near, query, k, max_dist_sq, best);
                let plane = diff * diff;
                let bound = if best.len() == k {
                    best[k - 1].0.min(max_dist_sq)
                } else {
                    max_dist_sq
                };
                // Points on the split plane may live on either side.
                if plane <= bound {
                    self.knn_node(far, query, k, max_dist_sq, best);
                }
            }
        }
    }
}

fn build(points: &[[f64; 3]], order: &mut [u32], offset: usize, nodes: &mut Vec<Node>) -> u32 {
    let id = nodes.len() as u32;
    if order.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: offset as u32,
            end: (offset + order.len()) as u32,
        });
        return id;
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in order.iter() {
        let p = &points[i as usize];
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| {
            (hi[a] - lo[a])
                .partial_cmp(&(hi[b] - lo[b]))
                .unwrap_or(Ordering::Equal)
                .then(b.cmp(&a))
        })
        .unwrap_or(0);
    if hi[axis] == lo[axis] {
        // All points coincide.
        nodes.push(Node::Leaf {
            start: offset as u32,
            end: (offset + order.len()) as u32,
        });
        return id;
    }
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][axis]
            .total_cmp(&points[b as usize][axis])
            .then(a.cmp(&b))
    });
    let value = points[order[mid] as usize][axis];
    nodes.push(Node::Split {
        axis: axis as u8,
        value,
        left: 0,
        right: 0,
    });
    let (lower, upper) = order.split_at_mut(mid);
    let left = build(points, lower, offset, nodes);
    let right = build(points, upper, offset + mid, nodes);
    if let Node::Split {
        left: l, right: r, ..
    } = &mut nodes[id as usize]
    {
        *l = left;
        *r = right;
    }
    id
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(n: usize, seed: u64) -> Vec<[f64; 3]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                [
                    rng.random_range(0.0..10.0),
                    rng.random_range(0.0..10.0),
                    rng.random_range(0.0..5.0),
                ]
            })
            .collect()
    }

    fn brute_radius(points: &[[f64; 3]], q: &[f64; 3], r: f64) -> Vec<usize> {
        (0..points.len())
            .filter(|&i| dist_sq(q, &points[i]) <= r * r)
            .collect()
    }

    fn brute_knn(points: &[[f64; 3]], q: &[f64; 3], k: usize) -> Vec<usize> {
        let mut all: Vec<(f64, usize)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (dist_sq(q, p), i))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.into_iter().take(k).map(|(_, i)| i).collect()
    }

    #[test]
    fn collinear_points_all_found() {
        let pts = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        let index = SpatialIndex::new(pts.clone());
        for p in &pts {
            assert_eq!(index.within_radius(p, 2.0), vec![0, 1, 2]);
        }
    }

    #[test]
    fn radius_queries_match_linear_scan() {
        let pts = random_cloud(1000, 11);
        let index = SpatialIndex::new(pts.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let q = [
                rng.random_range(-1.0..11.0),
                rng.random_range(-1.0..11.0),
                rng.random_range(-1.0..6.0),
            ];
            let r = rng.random_range(0.1..3.0);
            assert_eq!(index.within_radius(&q, r), brute_radius(&pts, &q, r));
        }
    }

    #[test]
    fn knn_with_k_equal_n_returns_everything_sorted() {
        let mut pts = random_cloud(200, 3);
        // Duplicates exercise the index tie-break.
        pts.push(pts[5]);
        pts.push(pts[5]);
        let index = SpatialIndex::new(pts.clone());
        let q = pts[5];
        let got: Vec<usize> = index.knn(&q, pts.len()).iter().map(|n| n.index).collect();
        assert_eq!(got, brute_knn(&pts, &q, pts.len()));
        assert_eq!(&got[..3], &[5, 200, 201]);
    }

    #[test]
    fn knn_matches_linear_scan_on_grid_ties() {
        // Integer lattice: many exactly equal distances.
        let mut pts = Vec::new();
        for x in 0..8 {
            for y in 0..8 {
                for z in 0..3 {
                    pts.push([x as f64, y as f64, z as f64]);
                }
            }
        }
        let index = SpatialIndex::new(pts.clone());
        for (i, q) in pts.iter().enumerate().step_by(7) {
            for k in [1, 4, 7, 19] {
                let got: Vec<usize> = index.knn(q, k).iter().map(|n| n.index).collect();
                assert_eq!(got, brute_knn(&pts, q, k), "query {i} k {k}");
            }
        }
    }

    #[test]
    fn nearest_within_respects_radius() {
        let index = SpatialIndex::new(vec![[0.0, 0.0, 0.0], [0.3, 0.0, 0.0]]);
        assert!(index.nearest_within(&[0.6, 0.0, 0.0], 0.25).is_none());
        let n = index.nearest_within(&[0.5, 0.0, 0.0], 0.25).unwrap();
        assert_eq!(n.index, 1);
        // Equidistant: lowest index wins.
        let n = index.nearest_within(&[0.15, 0.0, 0.0], 0.25).unwrap();
        assert_eq!(n.index, 0);
    }

    #[test]
    fn coincident_points_do_not_recurse_forever() {
        let index = SpatialIndex::new(vec![[1.0, 1.0, 1.0]; 100]);
        assert_eq!(index.within_radius(&[1.0, 1.0, 1.0], 0.0).len(), 100);
        let nn: Vec<usize> = index
            .knn(&[1.0, 1.0, 1.0], 3)
            .iter()
            .map(|n| n.index)
            .collect();
        assert_eq!(nn, vec![0, 1, 2]);
    }
}
