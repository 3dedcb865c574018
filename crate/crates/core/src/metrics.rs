//! Evaluation metrics for completed clouds.
//!
//! Conventions:
//!
//! * `cd_l` is the mean distance from prediction to ground truth, `cd_g` the
//!   mean distance from ground truth to prediction (both non-squared).
//! * `cd_l1 = (cd_l + cd_g) / 2` is the reported Chamfer-L1; the plain sum is
//!   available as [`ChamferBreakdown::sum`].
//! * `cd_l2` is the sum of the two directed mean *squared* distances.
//! * EMD is the mean matched distance of a minimum-cost perfect matching.
//! * DCD defaults to `alpha = 1000`, F-Score to `tau = 0.01`.

use rayon::prelude::*;

use crate::cloud::{dist, Point3, PointCloud};
use crate::error::{Error, Result};
use crate::geometry::{ball_query, fps, knn_with_dist2, nearest};

pub const DEFAULT_ALPHA: f64 = 1000.0;
pub const DEFAULT_TAU: f64 = 0.01;
/// Largest size solved exactly by [`emd`].
pub const EMD_EXACT_LIMIT: usize = 1024;
/// Final auction epsilon, relative to the largest pairwise distance. The
/// auction's mean matched distance is within this of the optimum.
pub const AUCTION_EPSILON_REL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChamferBreakdown {
    pub cd_l: f64,
    pub cd_g: f64,
    pub cd_l1: f64,
    pub cd_l2: f64,
}

impl ChamferBreakdown {
    /// `cd_l + cd_g`, the un-halved bidirectional form.
    pub fn sum(&self) -> f64 {
        self.cd_l + self.cd_g
    }
}

fn check_pair(p: &PointCloud, g: &PointCloud) -> Result<()> {
    p.ensure_non_empty()?;
    g.ensure_non_empty()
}

fn mean(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    v.sum::<f64>() / n as f64
}

pub fn chamfer(pred: &PointCloud, gt: &PointCloud) -> Result<ChamferBreakdown> {
    check_pair(pred, gt)?;
    let pg = nearest(pred.points(), gt)?;
    let gp = nearest(gt.points(), pred)?;
    let cd_l = mean(pg.iter().map(|&(_, d2)| d2.sqrt()), pg.len());
    let cd_g = mean(gp.iter().map(|&(_, d2)| d2.sqrt()), gp.len());
    let cd_l2 =
        mean(pg.iter().map(|&(_, d2)| d2), pg.len()) + mean(gp.iter().map(|&(_, d2)| d2), gp.len());
    Ok(ChamferBreakdown {
        cd_l,
        cd_g,
        cd_l1: (cd_l + cd_g) / 2.0,
        cd_l2,
    })
}

fn dcd_direction(src: &PointCloud, dst: &PointCloud, alpha: f64) -> Result<f64> {
    let nn = nearest(src.points(), dst)?;
    let mut hits = vec![0usize; dst.len()];
    for &(j, _) in &nn {
        hits[j] += 1;
    }
    Ok(mean(
        nn.iter()
            .map(|&(j, d2)| 1.0 - (-alpha * d2).exp() / hits[j] as f64),
        nn.len(),
    ))
}

/// Density-aware Chamfer distance, in `[0, 1]`.
///
/// Each match is discounted by `exp(-alpha * d^2)` and by how many points
/// share the same nearest neighbour.
pub fn dcd(pred: &PointCloud, gt: &PointCloud, alpha: f64) -> Result<f64> {
    check_pair(pred, gt)?;
    if !(alpha > 0.0) {
        return Err(Error::invalid(format!("alpha must be > 0, got {alpha}")));
    }
    Ok(0.5 * (dcd_direction(pred, gt, alpha)? + dcd_direction(gt, pred, alpha)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FScore {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

/// F-Score at threshold `tau`; a point counts when its NN distance is `< tau`.
pub fn fscore(pred: &PointCloud, gt: &PointCloud, tau: f64) -> Result<FScore> {
    check_pair(pred, gt)?;
    if !(tau > 0.0) {
        return Err(Error::invalid(format!("tau must be > 0, got {tau}")));
    }
    let frac = |nn: Vec<(usize, f64)>| {
        let n = nn.len();
        nn.into_iter().filter(|&(_, d2)| d2.sqrt() < tau).count() as f64 / n as f64
    };
    let precision = frac(nearest(pred.points(), gt)?);
    let recall = frac(nearest(gt.points(), pred)?);
    let f = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(FScore {
        precision,
        recall,
        f,
    })
}

/// Mean distance from each input point to its nearest output point.
pub fn fidelity(input: &PointCloud, output: &PointCloud) -> Result<f64> {
    check_pair(input, output)?;
    Ok(chamfer(input, output)?.cd_l)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mmd {
    pub value: f64,
    pub best_index: usize,
}

/// Chamfer-L1 to the closest cloud of `references` (first one wins ties).
pub fn mmd(output: &PointCloud, references: &[PointCloud]) -> Result<Mmd> {
    if references.is_empty() {
        return Err(Error::invalid("reference set is empty"));
    }
    let values: Vec<f64> = references
        .par_iter()
        .map(|r| chamfer(output, r).map(|c| c.cd_l1))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    Ok(Mmd {
        value: values[best],
        best_index: best,
    })
}

/// Mean Chamfer-L1 over consecutive frame pairs.
pub fn consistency(frames: &[PointCloud]) -> Result<f64> {
    if frames.len() < 2 {
        return Err(Error::invalid(format!(
            "consistency needs at least 2 frames, got {}",
            frames.len()
        )));
    }
    let vals: Vec<f64> = frames
        .par_windows(2)
        .map(|w| chamfer(&w[0], &w[1]).map(|c| c.cd_l1))
        .collect::<Result<_>>()?;
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Uniformity at neighbourhood fraction `p` over `seeds` FPS seeds.
///
/// Balls of radius `sqrt(p)` around the seeds are scored by
/// `imbalance * clutter`, where imbalance is `(|S| - n)^2 / n` with
/// `n = p |P|` and clutter is the mean of `(d - d_hat)^2 / d_hat` over each
/// point's in-ball nearest-neighbour distance `d`, with
/// `d_hat = sqrt(2 pi p / (|S| sqrt 3))`. Balls holding at most one point
/// contribute 0. The cloud is used at its given scale.
pub fn uniformity(cloud: &PointCloud, p: f64, seeds: usize) -> Result<f64> {
    cloud.ensure_non_empty()?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("p must lie in (0, 1), got {p}")));
    }
    if seeds == 0 {
        return Err(Error::invalid("seed count must be at least 1"));
    }
    let seed_idx = fps(cloud, seeds)?;
    let seed_pts: Vec<Point3> = seed_idx.iter().map(|&i| cloud[i]).collect();
    let balls = ball_query(cloud, &seed_pts, p.sqrt())?;
    let expected = p * cloud.len() as f64;
    let terms: Vec<f64> = balls
        .par_iter()
        .map(|ball| {
            let n = ball.len();
            if n <= 1 {
                return Ok(0.0);
            }
            let imbalance = (n as f64 - expected).powi(2) / expected;
            let sub = cloud.select(ball);
            let nn = knn_with_dist2(&sub, sub.points(), 2)?;
            let d_hat = (2.0 * std::f64::consts::PI * p / (n as f64 * 3f64.sqrt())).sqrt();
            let clutter = nn
                .iter()
                .map(|row| (row[1].1.sqrt() - d_hat).powi(2) / d_hat)
                .sum::<f64>()
                / n as f64;
            Ok(imbalance * clutter)
        })
        .collect::<Result<_>>()?;
    Ok(terms.iter().sum::<f64>() / seeds as f64)
}

/// Minimum-cost perfect matching between two equal-size clouds.
#[derive(Debug, Clone, PartialEq)]
pub struct EmdSolution {
    /// Mean matched distance.
    pub value: f64,
    /// `assignment[i]` is the ground-truth index matched to prediction `i`.
    pub assignment: Vec<usize>,
    /// Dual potentials (exact solver only): `u[i] + v[j] <= cost(i, j)`.
    pub row_potentials: Vec<f64>,
    pub col_potentials: Vec<f64>,
    pub exact: bool,
    /// Final auction epsilon (0 for the exact solver).
    pub epsilon: f64,
}

impl EmdSolution {
    /// Checks primal feasibility, dual feasibility, complementary slackness
    /// and a zero duality gap against the distance matrix, to `tol`.
    pub fn verify_optimal(&self, pred: &PointCloud, gt: &PointCloud, tol: f64) -> bool {
        let n = pred.len();
        if !self.exact || gt.len() != n || self.assignment.len() != n {
            return false;
        }
        let mut seen = vec![false; n];
        for &j in &self.assignment {
            if j >= n || seen[j] {
                return false;
            }
            seen[j] = true;
        }
        let u = &self.row_potentials;
        let v = &self.col_potentials;
        let dual_ok = (0..n).into_par_iter().all(|i| {
            (0..n).all(|j| dist(&pred[i], &gt[j]) - u[i] - v[j] >= -tol)
                && (dist(&pred[i], &gt[self.assignment[i]]) - u[i] - v[self.assignment[i]]).abs()
                    <= tol
        });
        let primal: f64 = (0..n)
            .map(|i| dist(&pred[i], &gt[self.assignment[i]]))
            .sum();
        let dual: f64 = u.iter().sum::<f64>() + v.iter().sum::<f64>();
        dual_ok
            && (primal - dual).abs() <= tol * n as f64
            && (primal / n as f64 - self.value).abs() <= tol
    }
}

fn cost_matrix(pred: &PointCloud, gt: &PointCloud) -> Vec<f64> {
    let n = gt.len();
    let mut c = vec![0.0; pred.len() * n];
    c.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = dist(&pred[i], &gt[j]);
        }
    });
    c
}

/// Exact EMD by the shortest-augmenting-path Hungarian method, O(n^3).
pub fn emd_exact(pred: &PointCloud, gt: &PointCloud) -> Result<EmdSolution> {
    check_pair(pred, gt)?;
    if pred.len() != gt.len() {
        return Err(Error::SizeMismatch {
            left: pred.len(),
            right: gt.len(),
        });
    }
    let n = pred.len();
    let cost = cost_matrix(pred, gt);
    let c = |i: usize, j: usize| cost[i * n + j];

    // 1-based rows/cols, column 0 is the virtual source
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|b| *b = false);
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = c(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[matched_row[j] - 1] = j - 1;
    }
    let total: f64 = (0..n).map(|i| c(i, assignment[i])).sum();
    Ok(EmdSolution {
        value: total / n as f64,
        assignment,
        row_potentials: u[1..].to_vec(),
        col_potentials: v[1..].to_vec(),
        exact: true,
        epsilon: 0.0,
    })
}

/// Approximate EMD by epsilon-scaling forward auction.
///
/// The final epsilon is `epsilon_rel` times the largest pairwise distance;
/// the mean matched distance is then within that epsilon of optimal.
pub fn emd_auction(pred: &PointCloud, gt: &PointCloud, epsilon_rel: f64) -> Result<EmdSolution> {
    check_pair(pred, gt)?;
    if pred.len() != gt.len() {
        return Err(Error::SizeMismatch {
            left: pred.len(),
            right: gt.len(),
        });
    }
    if !(epsilon_rel > 0.0) {
        return Err(Error::invalid("auction epsilon must be > 0"));
    }
    let n = pred.len();
    let cost = cost_matrix(pred, gt);
    let max_cost = cost.iter().copied().fold(0.0, f64::max);
    let eps_final = (epsilon_rel * max_cost).max(f64::MIN_POSITIVE);
    let mut prices = vec![0.0; n];
    let mut owner = vec![usize::MAX; n];
    let mut assigned = vec![usize::MAX; n];
    let mut eps = (max_cost / 4.0).max(eps_final);
    loop {
        owner.iter_mut().for_each(|o| *o = usize::MAX);
        assigned.iter_mut().for_each(|a| *a = usize::MAX);
        let mut queue: std::collections::VecDeque<usize> = (0..n).collect();
        while let Some(i) = queue.pop_front() {
            let row = &cost[i * n..(i + 1) * n];
            let mut best = usize::MAX;
            let mut best_val = f64::NEG_INFINITY;
            let mut second_val = f64::NEG_INFINITY;
            for (j, &c) in row.iter().enumerate() {
                let val = -c - prices[j];
                if val > best_val {
                    second_val = best_val;
                    best_val = val;
                    best = j;
                } else if val > second_val {
                    second_val = val;
                }
            }
            let raise = if n == 1 {
                eps
            } else {
                best_val - second_val + eps
            };
            prices[best] += raise;
            let prev = owner[best];
            owner[best] = i;
            assigned[i] = best;
            if prev != usize::MAX {
                assigned[prev] = usize::MAX;
                queue.push_back(prev);
            }
        }
        if eps <= eps_final {
            break;
        }
        eps = (eps / 5.0).max(eps_final);
    }
    let total: f64 = (0..n).map(|i| cost[i * n + assigned[i]]).sum();
    Ok(EmdSolution {
        value: total / n as f64,
        assignment: assigned,
        row_potentials: Vec::new(),
        col_potentials: Vec::new(),
        exact: false,
        epsilon: eps_final,
    })
}

/// EMD with the exact solver up to [`EMD_EXACT_LIMIT`] points and the
/// auction beyond; check [`EmdSolution::exact`].
pub fn emd_solve(pred: &PointCloud, gt: &PointCloud) -> Result<EmdSolution> {
    if pred.len() <= EMD_EXACT_LIMIT {
        emd_exact(pred, gt)
    } else {
        emd_auction(pred, gt, AUCTION_EPSILON_REL)
    }
}

pub fn emd(pred: &PointCloud, gt: &PointCloud) -> Result<f64> {
    Ok(emd_solve(pred, gt)?.value)
}

/// Similarity transform taking `gt` into the unit sphere (centroid at the
/// origin, farthest point at radius 1), applied to both clouds.
pub fn normalize_unit_sphere(
    pred: &PointCloud,
    gt: &PointCloud,
) -> Result<(PointCloud, PointCloud)> {
    let c = gt.centroid().ok_or(Error::EmptyInput)?;
    let radius = gt.iter().map(|p| dist(p, &c)).fold(0.0, f64::max);
    let s = if radius > 0.0 { 1.0 / radius } else { 1.0 };
    let apply = |cl: &PointCloud| {
        PointCloud::from_vec_unchecked(
            cl.iter()
                .map(|p| [(p[0] - c[0]) * s, (p[1] - c[1]) * s, (p[2] - c[2]) * s])
                .collect(),
        )
    };
    Ok((apply(pred), apply(gt)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricEntry {
    pub name: String,
    pub value: f64,
    pub convention: &'static str,
}

/// Named scalar results, each tagged with the convention that produced it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricReport {
    pub entries: Vec<MetricEntry>,
    pub params: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricKind {
    Chamfer,
    Dcd,
    Emd,
    FScore,
}

impl std::str::FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "cd" => Ok(MetricKind::Chamfer),
            "dcd" => Ok(MetricKind::Dcd),
            "emd" => Ok(MetricKind::Emd),
            "fscore" | "f" => Ok(MetricKind::FScore),
            other => Err(Error::invalid(format!("unknown metric `{other}`"))),
        }
    }
}

impl MetricReport {
    pub fn push(&mut self, name: &str, value: f64, convention: &'static str) {
        self.entries.push(MetricEntry {
            name: name.to_string(),
            value,
            convention,
        });
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.name == name)
            .map(|e| e.value)
    }

    /// Evaluates the requested metrics for one prediction/ground-truth pair.
    pub fn evaluate(
        pred: &PointCloud,
        gt: &PointCloud,
        which: &[MetricKind],
        tau: f64,
        alpha: f64,
    ) -> Result<MetricReport> {
        let mut r = MetricReport::default();
        for kind in which {
            match kind {
                MetricKind::Chamfer => {
                    let c = chamfer(pred, gt)?;
                    r.push("cd_l", c.cd_l, "mean pred->gt NN distance");
                    r.push("cd_g", c.cd_g, "mean gt->pred NN distance");
                    r.push("cd_l1", c.cd_l1, "(cd_l + cd_g) / 2");
                    r.push(
                        "cd_l2",
                        c.cd_l2,
                        "sum of directed mean squared NN distances",
                    );
                }
                MetricKind::Dcd => {
                    r.push(
                        "dcd",
                        dcd(pred, gt, alpha)?,
                        "density-aware chamfer, half sum",
                    );
                    r.params.push(("alpha".into(), alpha.to_string()));
                }
                MetricKind::Emd => {
                    let s = emd_solve(pred, gt)?;
                    r.push(
                        "emd",
                        s.value,
                        if s.exact {
                            "mean matched distance, exact"
                        } else {
                            "mean matched distance, auction"
                        },
                    );
                    r.params.push(("emd_exact".into(), s.exact.to_string()));
                }
                MetricKind::FScore => {
                    let f = fscore(pred, gt, tau)?;
                    r.push("f", f.f, "F1 at NN distance < tau");
                    r.push("precision", f.precision, "fraction of pred within tau");
                    r.push("recall", f.recall, "fraction of gt within tau");
                    r.params.push(("tau".into(), tau.to_string()));
                }
            }
        }
        Ok(r)
    }

    /// `key=value` lines, values first, then parameters.
    pub fn to_kv_lines(&self) -> Vec<String> {
        self.entries
            .iter()
            .map(|e| format!("{}={}", e.name, e.value))
            .chain(self.params.iter().map(|(k, v)| format!("{k}={v}")))
            .collect()
    }
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

    fn brute_nn(a: &Point3, b: &PointCloud) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (j, q) in b.iter().enumerate() {
            let d = ((a[0] - q[0]).powi(2) + (a[1] - q[1]).powi(2) + (a[2] - q[2]).powi(2)).sqrt();
            if d < best.1 {
                best = (j, d);
            }
        }
        best
    }

    #[test]
    fn chamfer_examples() {
        let p = pc(vec![[0., 0., 0.]]);
        let g = pc(vec![[1., 0., 0.], [0., 1., 0.]]);
        let c = chamfer(&p, &g).unwrap();
        assert_eq!((c.cd_l, c.cd_g, c.cd_l1, c.cd_l2), (1.0, 1.0, 1.0, 2.0));
        let z = chamfer(&g, &g).unwrap();
        assert_eq!((z.cd_l, z.cd_g, z.cd_l1, z.cd_l2), (0.0, 0.0, 0.0, 0.0));
        assert!(chamfer(&p, &PointCloud::default()).is_err());
    }

    #[test]
    fn chamfer_matches_double_loop() {
        let mut rng = SeededRng::new(10);
        let p = random_cloud(&mut rng, 100);
        let g = random_cloud(&mut rng, 120);
        let c = chamfer(&p, &g).unwrap();
        let l: f64 = p.iter().map(|a| brute_nn(a, &g).1).sum::<f64>() / 100.0;
        let gg: f64 = g.iter().map(|a| brute_nn(a, &p).1).sum::<f64>() / 120.0;
        let l2: f64 = p.iter().map(|a| brute_nn(a, &g).1.powi(2)).sum::<f64>() / 100.0
            + g.iter().map(|a| brute_nn(a, &p).1.powi(2)).sum::<f64>() / 120.0;
        assert!((c.cd_l - l).abs() < 1e-12);
        assert!((c.cd_g - gg).abs() < 1e-12);
        assert!((c.cd_l2 - l2).abs() < 1e-12);
        let swapped = chamfer(&g, &p).unwrap();
        assert_eq!(c.cd_l, swapped.cd_g);
    }

    #[test]
    fn dcd_examples() {
        let p = pc(vec![[0., 0., 0.]]);
        let g = pc(vec![[0.01, 0., 0.]]);
        let v = dcd(&p, &g, 1000.0).unwrap();
        assert!((v - (1.0 - (-0.1f64).exp())).abs() < 1e-12);
        assert!((v - 0.095163).abs() < 1e-6);
        let mut rng = SeededRng::new(3);
        let c = random_cloud(&mut rng, 40);
        assert_eq!(dcd(&c, &c, 1000.0).unwrap(), 0.0);
        assert!(dcd(&p, &g, 0.0).is_err());
    }

    #[test]
    fn dcd_matches_multiplicity_oracle() {
        let mut rng = SeededRng::new(31);
        let p = random_cloud(&mut rng, 60);
        let g = random_cloud(&mut rng, 45);
        let alpha = 50.0;
        let dir = |a: &PointCloud, b: &PointCloud| {
            let nn: Vec<(usize, f64)> = a.iter().map(|x| brute_nn(x, b)).collect();
            let mut s = 0.0;
            for &(j, d) in &nn {
                let count = nn.iter().filter(|&&(k, _)| k == j).count() as f64;
                s += 1.0 - (-alpha * d * d).exp() / count;
            }
            s / a.len() as f64
        };
        let want = 0.5 * (dir(&p, &g) + dir(&g, &p));
        assert!((dcd(&p, &g, alpha).unwrap() - want).abs() < 1e-12);
    }

    fn emd_enumerate(p: &PointCloud, g: &PointCloud) -> f64 {
        fn rec(
            i: usize,
            used: &mut Vec<bool>,
            p: &PointCloud,
            g: &PointCloud,
            acc: f64,
            best: &mut f64,
        ) {
            if i == p.len() {
                *best = best.min(acc);
                return;
            }
            for j in 0..g.len() {
                if !used[j] {
                    used[j] = true;
                    rec(i + 1, used, p, g, acc + dist(&p[i], &g[j]), best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(0, &mut vec![false; g.len()], p, g, 0.0, &mut best);
        best / p.len() as f64
    }

    #[test]
    fn emd_examples() {
        let p = pc(vec![[0., 0., 0.], [1., 0., 0.]]);
        let g = pc(vec![[0.4, 0., 0.], [0.6, 0., 0.]]);
        assert!((emd(&p, &g).unwrap() - 0.4).abs() < 1e-15);
        assert!((emd_enumerate(&p, &g) - 0.4).abs() < 1e-15);
        let rev = pc(vec![[1., 0., 0.], [0., 0., 0.]]);
        assert_eq!(emd(&p, &rev).unwrap(), 0.0);
        assert!(matches!(
            emd(&p, &pc(vec![[0.0; 3]])),
            Err(Error::SizeMismatch { .. })
        ));
    }

    #[test]
    fn emd_matches_enumeration_small() {
        let mut rng = SeededRng::new(44);
        for n in 1..=6 {
            for _ in 0..5 {
                let p = random_cloud(&mut rng, n);
                let g = random_cloud(&mut rng, n);
                let s = emd_exact(&p, &g).unwrap();
                let want = emd_enumerate(&p, &g);
                assert!((s.value - want).abs() < 1e-12, "n={n}");
                assert!(s.verify_optimal(&p, &g, 1e-9));
            }
        }
    }

    #[test]
    fn auction_is_within_epsilon_of_exact() {
        let mut rng = SeededRng::new(45);
        let p = random_cloud(&mut rng, 200);
        let g = random_cloud(&mut rng, 200);
        let exact = emd_exact(&p, &g).unwrap();
        let approx = emd_auction(&p, &g, 1e-6).unwrap();
        assert!(!approx.exact);
        assert!(approx.value >= exact.value - 1e-12);
        assert!(approx.value - exact.value <= approx.epsilon + 1e-12);
    }

    #[test]
    fn fscore_examples() {
        let p = pc(vec![[0., 0., 0.], [1., 0., 0.]]);
        let g = pc(vec![[0., 0., 0.], [5., 0., 0.]]);
        let f = fscore(&p, &g, 0.5).unwrap();
        assert_eq!((f.precision, f.recall, f.f), (0.5, 0.5, 0.5));
        assert_eq!(fscore(&p, &p, 0.01).unwrap().f, 1.0);
        let a = pc(vec![[0., 0., 0.]]);
        let b = pc(vec![[0.02, 0., 0.]]);
        assert_eq!(fscore(&a, &b, 0.01).unwrap().f, 0.0);
        assert!(fscore(&a, &b, 0.0).is_err());
    }

    #[test]
    fn fidelity_mmd_consistency() {
        let a = pc(vec![[0., 0., 0.]]);
        let b = pc(vec![[0., 0., 2.]]);
        assert_eq!(fidelity(&a, &b).unwrap(), 2.0);
        let sup = pc(vec![[0., 0., 0.], [3., 3., 3.]]);
        assert_eq!(fidelity(&a, &sup).unwrap(), 0.0);

        let mut rng = SeededRng::new(50);
        let out = random_cloud(&mut rng, 30);
        let refs: Vec<PointCloud> = (0..5).map(|_| random_cloud(&mut rng, 30)).collect();
        let m = mmd(&out, &refs).unwrap();
        let want = refs
            .iter()
            .map(|r| chamfer(&out, r).unwrap().cd_l1)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(m.value, want);
        assert_eq!(
            mmd(&out, &refs[..1]).unwrap().value,
            chamfer(&out, &refs[0]).unwrap().cd_l1
        );
        let mut with_self = refs.clone();
        with_self.push(out.clone());
        assert_eq!(mmd(&out, &with_self).unwrap().value, 0.0);
        assert!(mmd(&out, &[]).is_err());

        let frames: Vec<PointCloud> = (0..4).map(|_| random_cloud(&mut rng, 25)).collect();
        let want = (0..3)
            .map(|t| chamfer(&frames[t], &frames[t + 1]).unwrap().cd_l1)
            .sum::<f64>()
            / 3.0;
        assert!((consistency(&frames).unwrap() - want).abs() < 1e-15);
        assert_eq!(
            consistency(&[out.clone(), out.clone(), out.clone()]).unwrap(),
            0.0
        );
        assert!(consistency(&[out]).is_err());
    }

    #[test]
    fn uniformity_degenerate_balls_contribute_zero() {
        // every ball holds one point
        let c = pc(vec![[0., 0., 0.], [10., 0., 0.], [0., 10., 0.]]);
        assert_eq!(uniformity(&c, 0.01, 3).unwrap(), 0.0);
        assert!(uniformity(&c, 1.5, 1).is_err());
        assert!(uniformity(&c, 0.01, 4).is_err());
    }

    #[test]
    fn uniformity_zero_when_ball_size_matches_expectation() {
        // 100 points, p = 0.02: expected count 2; each ball holds exactly 2
        let mut pts = Vec::new();
        for i in 0..50 {
            let x = i as f64 * 10.0;
            pts.push([x, 0.0, 0.0]);
            pts.push([x + 0.05, 0.0, 0.0]);
        }
        let c = pc(pts);
        assert_eq!(uniformity(&c, 0.02, 50).unwrap(), 0.0);
    }

    #[test]
    fn report_lines() {
        let p = pc(vec![[0., 0., 0.], [1., 0., 0.]]);
        let r = MetricReport::evaluate(
            &p,
            &p,
            &[MetricKind::Chamfer, MetricKind::FScore],
            DEFAULT_TAU,
            DEFAULT_ALPHA,
        )
        .unwrap();
        assert_eq!(r.get("cd_l1"), Some(0.0));
        assert_eq!(r.get("f"), Some(1.0));
        assert!(r.to_kv_lines().contains(&"cd_l1=0".to_string()));
    }
}
