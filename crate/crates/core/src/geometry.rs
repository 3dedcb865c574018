//! Point-set primitives: canonical ordering, farthest point sampling, k-NN,
//! local grouping, ball queries and directed nearest-neighbour distances.
//!
//! Tie rules are part of the contract. k-NN and nearest-neighbour ties go to
//! the smaller index; FPS distance ties go to the smaller index and FPS
//! starts from the canonical-sort minimum. The k-d tree used for larger
//! clouds returns exactly what the exhaustive scan returns.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::cloud::{dist2, sub, Point3, PointCloud};
use crate::error::{Error, Result};

/// Below this many reference points queries use the exhaustive scan.
const TREE_THRESHOLD: usize = 64;
const LEAF_SIZE: usize = 8;

/// `G` local patches around FPS centres, offsets relative to the centre.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedPatches {
    pub centers: Vec<Point3>,
    pub neighbor_indices: Vec<Vec<usize>>,
    pub local_offsets: Vec<Vec<Point3>>,
}

impl GroupedPatches {
    pub fn groups(&self) -> usize {
        self.centers.len()
    }

    pub fn group_size(&self) -> usize {
        self.neighbor_indices.first().map_or(0, |g| g.len())
    }
}

fn lex_cmp(a: &Point3, b: &Point3) -> Ordering {
    a[0].total_cmp(&b[0])
        .then(a[1].total_cmp(&b[1]))
        .then(a[2].total_cmp(&b[2]))
}

/// Permutation sorting the points lexicographically by `(x, y, z)`; equal
/// points keep their original relative order.
pub fn canonical_sort(cloud: &PointCloud) -> Result<Vec<usize>> {
    cloud.ensure_non_empty()?;
    let pts = cloud.points();
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by(|&i, &j| lex_cmp(&pts[i], &pts[j]));
    Ok(order)
}

/// Farthest point sampling of `count` indices.
pub fn fps(cloud: &PointCloud, count: usize) -> Result<Vec<usize>> {
    cloud.ensure_non_empty()?;
    let n = cloud.len();
    if count > n {
        return Err(Error::SampleTooLarge {
            requested: count,
            available: n,
        });
    }
    if count == 0 {
        return Err(Error::invalid("fps count must be at least 1"));
    }
    let pts = cloud.points();
    let start = canonical_sort(cloud)?[0];
    let mut selected = Vec::with_capacity(count);
    let mut min_d2 = vec![f64::INFINITY; n];
    let mut taken = vec![false; n];
    let mut current = start;
    loop {
        selected.push(current);
        taken[current] = true;
        if selected.len() == count {
            break;
        }
        let c = pts[current];
        let mut best = usize::MAX;
        let mut best_d2 = f64::NEG_INFINITY;
        for (i, p) in pts.iter().enumerate() {
            let d = dist2(p, &c);
            if d < min_d2[i] {
                min_d2[i] = d;
            }
            // strict > keeps the smaller index on ties
            if !taken[i] && min_d2[i] > best_d2 {
                best_d2 = min_d2[i];
                best = i;
            }
        }
        current = best;
    }
    Ok(selected)
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    d2: f64,
    index: usize,
}

impl Candidate {
    #[inline]
    fn cmp(&self, other: &Candidate) -> Ordering {
        self.d2
            .total_cmp(&other.d2)
            .then(self.index.cmp(&other.index))
    }
}

/// Bounded best-k list kept sorted ascending by `(d2, index)`.
struct BestK {
    k: usize,
    items: Vec<Candidate>,
}

impl BestK {
    fn new(k: usize) -> Self {
        Self {
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    #[inline]
    fn full(&self) -> bool {
        self.items.len() == self.k
    }

    #[inline]
    fn worst_d2(&self) -> f64 {
        if self.full() {
            self.items[self.k - 1].d2
        } else {
            f64::INFINITY
        }
    }

    #[inline]
    fn offer(&mut self, c: Candidate) {
        if self.full() && c.cmp(&self.items[self.k - 1]) != Ordering::Less {
            return;
        }
        let pos = self.items.partition_point(|x| x.cmp(&c) == Ordering::Less);
        self.items.insert(pos, c);
        self.items.truncate(self.k);
    }
}

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

/// Static k-d tree over a borrowed point slice.
///
/// Pruning skips a subtree only when its axis gap strictly exceeds the
/// current k-th distance, so equal-distance candidates are always visited
/// and the index tie rule matches the exhaustive scan bit for bit.
pub struct KdTree<'a> {
    points: &'a [Point3],
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl<'a> KdTree<'a> {
    pub fn new(points: &'a [Point3]) -> Self {
        let mut tree = KdTree {
            points,
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
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
        let slice = &mut self.order[start..end];
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in slice.iter() {
            for a in 0..3 {
                lo[a] = lo[a].min(pts[i][a]);
                hi[a] = hi[a].max(pts[i][a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0);
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |&i, &j| {
            pts[i][axis].total_cmp(&pts[j][axis]).then(i.cmp(&j))
        });
        let value = pts[slice[mid]][axis];
        self.nodes.push(Node::Split {
            axis,
            value,
            left: 0,
            right: 0,
        });
        let left = self.build(start, start + mid);
        let right = self.build(start + mid, end);
        if let Node::Split {
            left: l, right: r, ..
        } = &mut self.nodes[id]
        {
            *l = left;
            *r = right;
        }
        id
    }

    fn search(&self, node: usize, q: &Point3, best: &mut BestK) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    best.offer(Candidate {
                        d2: dist2(q, &self.points[i]),
                        index: i,
                    });
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, q, best);
                if diff * diff <= best.worst_d2() {
                    self.search(far, q, best);
                }
            }
        }
    }

    /// The `k` nearest indices to `q` with squared distances, ascending.
    pub fn knn(&self, q: &Point3, k: usize) -> Vec<(usize, f64)> {
        let mut best = BestK::new(k.min(self.points.len()));
        if best.k > 0 {
            self.search(0, q, &mut best);
        }
        best.items.iter().map(|c| (c.index, c.d2)).collect()
    }
}

fn brute_knn(points: &[Point3], q: &Point3, k: usize) -> Vec<(usize, f64)> {
    let mut best = BestK::new(k);
    for (i, p) in points.iter().enumerate() {
        best.offer(Candidate {
            d2: dist2(q, p),
            index: i,
        });
    }
    best.items.iter().map(|c| (c.index, c.d2)).collect()
}

/// k nearest neighbours of every query, `(index, squared distance)` pairs.
/// Uses the k-d tree above [`TREE_THRESHOLD`] reference points.
pub fn knn_with_dist2(
    cloud: &PointCloud,
    queries: &[Point3],
    k: usize,
) -> Result<Vec<Vec<(usize, f64)>>> {
    cloud.ensure_non_empty()?;
    if k == 0 || k > cloud.len() {
        return Err(Error::SampleTooLarge {
            requested: k,
            available: cloud.len(),
        });
    }
    let pts = cloud.points();
    if pts.len() < TREE_THRESHOLD {
        return Ok(queries.par_iter().map(|q| brute_knn(pts, q, k)).collect());
    }
    let tree = KdTree::new(pts);
    Ok(queries.par_iter().map(|q| tree.knn(q, k)).collect())
}

/// Indices of the `k` nearest cloud points for each query, ascending by
/// distance then index.
pub fn knn(cloud: &PointCloud, queries: &PointCloud, k: usize) -> Result<Vec<Vec<usize>>> {
    Ok(knn_with_dist2(cloud, queries.points(), k)?
        .into_iter()
        .map(|row| row.into_iter().map(|(i, _)| i).collect())
        .collect())
}

/// Nearest point of `b` for every point of `a`: `(index, squared distance)`.
pub fn nearest(a: &[Point3], b: &PointCloud) -> Result<Vec<(usize, f64)>> {
    Ok(knn_with_dist2(b, a, 1)?
        .into_iter()
        .map(|row| row[0])
        .collect())
}

/// Groups the `k` nearest neighbours of each centre and expresses them as
/// offsets from that centre.
pub fn group_normalize(
    cloud: &PointCloud,
    center_idx: &[usize],
    k: usize,
) -> Result<GroupedPatches> {
    cloud.ensure_non_empty()?;
    if let Some(&bad) = center_idx.iter().find(|&&i| i >= cloud.len()) {
        return Err(Error::invalid(format!(
            "center index {bad} out of range for {} points",
            cloud.len()
        )));
    }
    let centers: Vec<Point3> = center_idx.iter().map(|&i| cloud[i]).collect();
    let neighbor_indices = knn(cloud, &PointCloud::from_vec_unchecked(centers.clone()), k)?;
    let local_offsets = neighbor_indices
        .iter()
        .zip(&centers)
        .map(|(row, c)| row.iter().map(|&j| sub(&cloud[j], c)).collect())
        .collect();
    Ok(GroupedPatches {
        centers,
        neighbor_indices,
        local_offsets,
    })
}

/// All cloud indices within `radius` (inclusive) of each seed, ascending.
pub fn ball_query(cloud: &PointCloud, seeds: &[Point3], radius: f64) -> Result<Vec<Vec<usize>>> {
    if !(radius > 0.0) {
        return Err(Error::invalid(format!(
            "ball radius must be > 0, got {radius}"
        )));
    }
    let pts = cloud.points();
    Ok(seeds
        .par_iter()
        .map(|s| {
            pts.iter()
                .enumerate()
                .filter(|(_, p)| dist2(p, s).sqrt() <= radius)
                .map(|(i, _)| i)
                .collect()
        })
        .collect())
}

/// For each `a` in `A`, the Euclidean distance to its nearest point in `B`.
pub fn directed_nn_dists(a: &PointCloud, b: &PointCloud) -> Result<Vec<f64>> {
    a.ensure_non_empty()?;
    b.ensure_non_empty()?;
    Ok(nearest(a.points(), b)?
        .into_iter()
        .map(|(_, d2)| d2.sqrt())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn pc(v: Vec<Point3>) -> PointCloud {
        PointCloud::new(v).unwrap()
    }

    fn random_cloud(rng: &mut SeededRng, n: usize) -> PointCloud {
        pc((0..n)
            .map(|_| [rng.uniform(), rng.uniform(), rng.uniform()])
            .collect())
    }

    #[test]
    fn canonical_sort_examples() {
        assert_eq!(
            canonical_sort(&pc(vec![[1., 0., 0.], [0., 0., 0.]])).unwrap(),
            vec![1, 0]
        );
        assert_eq!(
            canonical_sort(&pc(vec![[0., 0., 0.], [0., 0., 0.]])).unwrap(),
            vec![0, 1]
        );
        assert!(matches!(
            canonical_sort(&PointCloud::default()),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn canonical_sort_matches_comparison_oracle() {
        let mut rng = SeededRng::new(11);
        // coarse grid so ties on x and y actually happen
        let cloud = pc((0..100)
            .map(|_| [rng.below(4) as f64, rng.below(4) as f64, rng.uniform()])
            .collect());
        let got = canonical_sort(&cloud).unwrap();
        // insertion sort with an explicit comparator, stable by construction
        let mut oracle: Vec<usize> = Vec::new();
        for i in 0..cloud.len() {
            let p = cloud[i];
            let pos = oracle
                .iter()
                .position(|&j| {
                    let q = cloud[j];
                    (p[0], p[1], p[2]) < (q[0], q[1], q[2])
                })
                .unwrap_or(oracle.len());
            oracle.insert(pos, i);
        }
        assert_eq!(got, oracle);
    }

    #[test]
    fn fps_examples() {
        let c = pc(vec![[0., 0., 0.], [0.1, 0., 0.], [1., 0., 0.]]);
        assert_eq!(fps(&c, 2).unwrap(), vec![0, 2]);
        let all = fps(&c, 3).unwrap();
        let mut s = all.clone();
        s.sort();
        assert_eq!(s, vec![0, 1, 2]);
        assert!(matches!(fps(&c, 4), Err(Error::SampleTooLarge { .. })));
    }

    fn fps_oracle(cloud: &PointCloud, count: usize) -> Vec<usize> {
        let pts = cloud.points();
        let mut start = 0;
        for i in 1..pts.len() {
            if lex_cmp(&pts[i], &pts[start]) == Ordering::Less {
                start = i;
            }
        }
        let mut sel = vec![start];
        while sel.len() < count {
            let mut best = None;
            let mut best_d = -1.0;
            for i in 0..pts.len() {
                if sel.contains(&i) {
                    continue;
                }
                let d = sel
                    .iter()
                    .map(|&s| dist2(&pts[i], &pts[s]).sqrt())
                    .fold(f64::INFINITY, f64::min);
                if d > best_d {
                    best_d = d;
                    best = Some(i);
                }
            }
            sel.push(best.unwrap());
        }
        sel
    }

    #[test]
    fn fps_matches_brute_force() {
        let mut rng = SeededRng::new(5);
        for _ in 0..10 {
            let c = random_cloud(&mut rng, 64);
            assert_eq!(fps(&c, 8).unwrap(), fps_oracle(&c, 8));
        }
    }

    #[test]
    fn fps_point_set_is_permutation_invariant() {
        let mut rng = SeededRng::new(8);
        let c = random_cloud(&mut rng, 200);
        let mut perm: Vec<usize> = (0..200).collect();
        rng.shuffle(&mut perm);
        let shuffled = c.select(&perm);
        let a: Vec<Point3> = fps(&c, 20).unwrap().iter().map(|&i| c[i]).collect();
        let b: Vec<Point3> = fps(&shuffled, 20)
            .unwrap()
            .iter()
            .map(|&i| shuffled[i])
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn knn_examples() {
        let c = pc(vec![[0., 0., 0.], [1., 0., 0.], [2., 0., 0.]]);
        let q = pc(vec![[0., 0., 0.]]);
        assert_eq!(knn(&c, &q, 2).unwrap(), vec![vec![0, 1]]);
        let c2 = pc(vec![[1., 0., 0.], [-1., 0., 0.]]);
        assert_eq!(knn(&c2, &q, 1).unwrap(), vec![vec![0]]);
        assert!(knn(&c, &q, 4).is_err());
    }

    fn knn_oracle(cloud: &PointCloud, q: &Point3, k: usize) -> Vec<usize> {
        let mut all: Vec<(f64, usize)> = cloud
            .iter()
            .enumerate()
            .map(|(i, p)| (dist2(q, p), i))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.into_iter().take(k).map(|(_, i)| i).collect()
    }

    #[test]
    fn knn_matches_exhaustive_sort() {
        let mut rng = SeededRng::new(21);
        let c = random_cloud(&mut rng, 256);
        let q = random_cloud(&mut rng, 16);
        let got = knn(&c, &q, 8).unwrap();
        for (row, qp) in got.iter().zip(q.iter()) {
            assert_eq!(row, &knn_oracle(&c, qp, 8));
        }
    }

    #[test]
    fn kd_tree_matches_exhaustive_on_many_instances() {
        let mut rng = SeededRng::new(1234);
        for inst in 0..1000 {
            let n = 65 + rng.below(200) as usize;
            // quantised coordinates on some instances to force exact ties
            let quant = inst % 3 == 0;
            let pts: Vec<Point3> = (0..n)
                .map(|_| {
                    let mut p = [rng.uniform(), rng.uniform(), rng.uniform()];
                    if quant {
                        for c in &mut p {
                            *c = (*c * 4.0).floor();
                        }
                    }
                    p
                })
                .collect();
            let cloud = pc(pts);
            let tree = KdTree::new(cloud.points());
            let k = 1 + rng.below(6) as usize;
            for _ in 0..3 {
                let q = if quant {
                    [
                        rng.below(4) as f64,
                        rng.below(4) as f64,
                        rng.below(4) as f64,
                    ]
                } else {
                    [rng.uniform(), rng.uniform(), rng.uniform()]
                };
                let got: Vec<usize> = tree.knn(&q, k).into_iter().map(|(i, _)| i).collect();
                assert_eq!(got, knn_oracle(&cloud, &q, k), "instance {inst}");
            }
        }
    }

    #[test]
    fn group_normalize_properties() {
        let single = pc(vec![[0.3, 0.2, 0.1]]);
        let g = group_normalize(&single, &[0], 1).unwrap();
        assert_eq!(g.local_offsets, vec![vec![[0.0, 0.0, 0.0]]]);

        let mut rng = SeededRng::new(2);
        let c = random_cloud(&mut rng, 40);
        let centers = fps(&c, 4).unwrap();
        let g = group_normalize(&c, &centers, 4).unwrap();
        for (gi, row) in g.neighbor_indices.iter().enumerate() {
            assert_eq!(row[0], centers[gi]);
            assert_eq!(g.local_offsets[gi][0], [0.0, 0.0, 0.0]);
            for (k, &j) in row.iter().enumerate() {
                let c0 = c[centers[gi]];
                let want = [c[j][0] - c0[0], c[j][1] - c0[1], c[j][2] - c0[2]];
                assert_eq!(g.local_offsets[gi][k], want);
            }
        }
        // integer translation keeps the arithmetic exact
        let moved = c.translated([4.0, -2.0, 8.0]);
        let g2 = group_normalize(&moved, &centers, 4).unwrap();
        assert_eq!(g2.neighbor_indices, g.neighbor_indices);
        for (a, b) in g
            .local_offsets
            .iter()
            .flatten()
            .zip(g2.local_offsets.iter().flatten())
        {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ball_query_examples() {
        let c = pc(vec![[0., 0., 0.], [1., 0., 0.], [2., 0., 0.]]);
        assert_eq!(ball_query(&c, &[[0.0; 3]], 1.5).unwrap(), vec![vec![0, 1]]);
        assert_eq!(
            ball_query(&c, &[[0.5, 0.5, 0.0]], 0.1).unwrap(),
            vec![Vec::<usize>::new()]
        );
        assert_eq!(ball_query(&c, &[[0.0; 3]], 1.0).unwrap(), vec![vec![0, 1]]);
        assert!(ball_query(&c, &[[0.0; 3]], 0.0).is_err());

        let mut rng = SeededRng::new(3);
        let r = random_cloud(&mut rng, 300);
        let seeds = random_cloud(&mut rng, 10);
        let got = ball_query(&r, seeds.points(), 0.2).unwrap();
        for (row, s) in got.iter().zip(seeds.iter()) {
            let want: Vec<usize> = (0..r.len())
                .filter(|&i| {
                    let d = ((r[i][0] - s[0]).powi(2)
                        + (r[i][1] - s[1]).powi(2)
                        + (r[i][2] - s[2]).powi(2))
                    .sqrt();
                    d <= 0.2
                })
                .collect();
            assert_eq!(row, &want);
        }
    }

    #[test]
    fn directed_nn_examples() {
        let a = pc(vec![[0., 0., 0.]]);
        let b = pc(vec![[3., 4., 0.]]);
        assert_eq!(directed_nn_dists(&a, &b).unwrap(), vec![5.0]);
        let mut rng = SeededRng::new(4);
        let a = random_cloud(&mut rng, 50);
        assert!(directed_nn_dists(&a, &a).unwrap().iter().all(|&d| d == 0.0));
        let b = random_cloud(&mut rng, 70);
        let got = directed_nn_dists(&a, &b).unwrap();
        for (d, p) in got.iter().zip(a.iter()) {
            let want = b
                .iter()
                .map(|q| {
                    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            assert!((d - want).abs() < 1e-15);
        }
        assert!(directed_nn_dists(&a, &PointCloud::default()).is_err());
    }
}
