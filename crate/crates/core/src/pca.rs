//! PCA-guided sorting and uniform interleaved decomposition.
//!
//! A cloud is centred, its covariance (normalised by `N - 1`) is
//! eigendecomposed, every point is projected onto the principal axes and the
//! points are sorted lexicographically by those projections. Sorted position
//! `j` (0-based) then goes to subset `j mod U`, so subset 0 holds positions
//! `0, U, 2U, ...`.
//!
//! Eigenvector signs are not determined by the eigenproblem, yet the order
//! depends on them. Each axis is oriented by, in turn:
//!
//! 1. positive skewness `sum(q^3) > 1e-12 * scale^3` (flip if negative),
//! 2. otherwise `max(q) >= |min(q)|`,
//! 3. otherwise the solver output is kept.
//!
//! `scale` is the largest distance of a point from the centroid. Every rule
//! only looks at projection values, so the sorted order is invariant under
//! rigid motions whenever the spectrum is non-degenerate.

use crate::cloud::{Point3, PointCloud};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

const DEGENERATE_REL: f64 = 1e-9;
const SKEW_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignRule {
    Skewness,
    MaxMagnitude,
    SolverDefault,
}

/// Principal frame of a cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaFrame {
    pub centroid: Point3,
    /// Principal axes, by descending eigenvalue. `axes[a]` is a unit vector.
    pub axes: [Point3; 3],
    pub eigenvalues: [f64; 3],
    pub sign_rules: [SignRule; 3],
    /// Two eigenvalues coincide (within `1e-9` relative); the order is then
    /// not canonical.
    pub degenerate: bool,
}

impl PcaFrame {
    /// Projection of `p` onto the principal axes.
    pub fn project(&self, p: &Point3) -> Point3 {
        let c = [
            p[0] - self.centroid[0],
            p[1] - self.centroid[1],
            p[2] - self.centroid[2],
        ];
        let mut q = [0.0; 3];
        for (a, axis) in self.axes.iter().enumerate() {
            q[a] = axis[0] * c[0] + axis[1] * c[1] + axis[2] * c[2];
        }
        q
    }
}

pub type Sym3 = [[f64; 3]; 3];

fn dot(a: &Point3, b: &Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &Point3, b: &Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalized(v: Point3) -> Point3 {
    let n = dot(&v, &v).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn mat_vec(m: &Sym3, v: &Point3) -> Point3 {
    [dot(&m[0], v), dot(&m[1], v), dot(&m[2], v)]
}

/// Eigenvalues of a symmetric 3x3 matrix in descending order: trigonometric
/// closed form for the characteristic cubic, then one Newton step per root
/// (kept only if it shrinks the residual).
pub fn sym3_eigenvalues(m: &Sym3) -> [f64; 3] {
    let p1 = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
    let mut ev = if p1 == 0.0 {
        [m[0][0], m[1][1], m[2][2]]
    } else {
        let q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
        let p2 = (m[0][0] - q).powi(2) + (m[1][1] - q).powi(2) + (m[2][2] - q).powi(2) + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        let mut b = *m;
        for (i, row) in b.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - if i == j { q } else { 0.0 }) / p;
            }
        }
        let det_b = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1])
            - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
            + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
        let r = (det_b / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let l1 = q + 2.0 * p * phi.cos();
        let l3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        [l1, 3.0 * q - l1 - l3, l3]
    };

    let tr = m[0][0] + m[1][1] + m[2][2];
    let minors = m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2] - m[0][2] * m[2][0]
        + m[1][1] * m[2][2]
        - m[1][2] * m[2][1];
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let f = |l: f64| ((l - tr) * l + minors) * l - det;
    let df = |l: f64| (3.0 * l - 2.0 * tr) * l + minors;
    for l in ev.iter_mut() {
        let d = df(*l);
        if d.abs() > f64::EPSILON * (1.0 + tr.abs()).powi(2) {
            let cand = *l - f(*l) / d;
            if cand.is_finite() && f(cand).abs() < f(*l).abs() {
                *l = cand;
            }
        }
    }
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Unit null vector of `m - lambda I` from the largest pairwise row cross product.
fn null_vector(m: &Sym3, lambda: f64) -> Option<Point3> {
    let r0 = [m[0][0] - lambda, m[0][1], m[0][2]];
    let r1 = [m[1][0], m[1][1] - lambda, m[1][2]];
    let r2 = [m[2][0], m[2][1], m[2][2] - lambda];
    let cands = [cross(&r0, &r1), cross(&r0, &r2), cross(&r1, &r2)];
    let (best, n2) = cands
        .iter()
        .map(|c| (*c, dot(c, c)))
        .max_by(|a, b| a.1.total_cmp(&b.1))?;
    if n2 > 0.0 && n2.is_finite() {
        Some(normalized(best))
    } else {
        None
    }
}

/// Any unit vector orthogonal to `v`.
fn any_orthogonal(v: &Point3) -> Point3 {
    let helper = if v[0].abs() <= v[1].abs() && v[0].abs() <= v[2].abs() {
        [1.0, 0.0, 0.0]
    } else if v[1].abs() <= v[2].abs() {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    normalized(cross(v, &helper))
}

/// Eigenvector for `lambda` restricted to the plane orthogonal to `fixed`.
fn in_complement(m: &Sym3, fixed: &Point3, lambda: f64) -> Point3 {
    let u = any_orthogonal(fixed);
    let w = cross(fixed, &u);
    let mu = mat_vec(m, &u);
    let mw = mat_vec(m, &w);
    let a = dot(&u, &mu) - lambda;
    let b = dot(&u, &mw);
    let c = dot(&w, &mw) - lambda;
    // rows (a, b) and (b, c); the null vector of the larger row
    let (x, y) = if a * a + b * b >= b * b + c * c {
        (-b, a)
    } else {
        (-c, b)
    };
    let n = (x * x + y * y).sqrt();
    if n <= f64::MIN_POSITIVE {
        return u;
    }
    let (x, y) = (x / n, y / n);
    normalized([
        x * u[0] + y * w[0],
        x * u[1] + y * w[1],
        x * u[2] + y * w[2],
    ])
}

/// Eigendecomposition of a symmetric 3x3 matrix: descending eigenvalues and
/// matching orthonormal eigenvectors.
///
/// The eigenvector of the better-separated extreme eigenvalue comes from a
/// row cross product; the middle one is solved in its orthogonal complement
/// and the last is a cross product, so repeated eigenvalues still yield an
/// orthonormal basis. A multiple of the identity returns the standard basis.
pub fn sym3_eigen(m: &Sym3) -> ([f64; 3], [Point3; 3]) {
    let scale = m.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return (
            [0.0; 3],
            [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        );
    }
    let mut s = *m;
    for v in s.iter_mut().flatten() {
        *v /= scale;
    }
    let ev = sym3_eigenvalues(&s);
    let spread = ev[0] - ev[2];
    if spread <= 4.0 * f64::EPSILON {
        return (
            [ev[0] * scale, ev[1] * scale, ev[2] * scale],
            [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        );
    }
    let axes = if ev[0] - ev[1] >= ev[1] - ev[2] {
        let v0 = null_vector(&s, ev[0]).unwrap_or([1.0, 0.0, 0.0]);
        let v1 = in_complement(&s, &v0, ev[1]);
        let v2 = normalized(cross(&v0, &v1));
        [v0, v1, v2]
    } else {
        let v2 = null_vector(&s, ev[2]).unwrap_or([0.0, 0.0, 1.0]);
        let v1 = in_complement(&s, &v2, ev[1]);
        let v0 = normalized(cross(&v1, &v2));
        [v0, v1, v2]
    };
    ([ev[0] * scale, ev[1] * scale, ev[2] * scale], axes)
}

/// Sample covariance with `1 / (N - 1)` normalisation. Needs `N >= 2`.
pub fn covariance(cloud: &PointCloud, centroid: &Point3) -> Sym3 {
    let mut c = [[0.0; 3]; 3];
    for p in cloud {
        let d = [p[0] - centroid[0], p[1] - centroid[1], p[2] - centroid[2]];
        for i in 0..3 {
            for j in i..3 {
                c[i][j] += d[i] * d[j];
            }
        }
    }
    let denom = (cloud.len() - 1) as f64;
    for i in 0..3 {
        for j in i..3 {
            c[i][j] /= denom;
            c[j][i] = c[i][j];
        }
    }
    c
}

fn orient_axis(axis: &mut Point3, q: &[f64], scale: f64) -> SignRule {
    let skew: f64 = q.iter().map(|v| v * v * v).sum();
    let threshold = SKEW_REL * scale.powi(3);
    let flip = |a: &mut Point3| {
        for c in a.iter_mut() {
            *c = -*c;
        }
    };
    if skew.abs() >= threshold && skew != 0.0 {
        if skew < 0.0 {
            flip(axis);
        }
        return SignRule::Skewness;
    }
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = q.iter().copied().fold(f64::INFINITY, f64::min);
    if max != -min {
        if max < -min {
            flip(axis);
        }
        return SignRule::MaxMagnitude;
    }
    SignRule::SolverDefault
}

/// Centroid, principal axes and spectrum of a cloud, with signs fixed by the
/// module-level convention. A single point yields zero eigenvalues, the
/// standard basis and `degenerate = true`.
pub fn pca_axes(cloud: &PointCloud) -> Result<PcaFrame> {
    let centroid = cloud.centroid().ok_or(Error::EmptyInput)?;
    if cloud.len() == 1 {
        return Ok(PcaFrame {
            centroid,
            axes: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            eigenvalues: [0.0; 3],
            sign_rules: [SignRule::SolverDefault; 3],
            degenerate: true,
        });
    }
    let cov = covariance(cloud, &centroid);
    let (mut eigenvalues, mut axes) = sym3_eigen(&cov);
    for l in eigenvalues.iter_mut() {
        *l = l.max(0.0);
    }
    let top = eigenvalues[0].max(f64::MIN_POSITIVE);
    let degenerate = (eigenvalues[0] - eigenvalues[1]).abs() <= DEGENERATE_REL * top
        || (eigenvalues[1] - eigenvalues[2]).abs() <= DEGENERATE_REL * top;

    let centered: Vec<Point3> = cloud
        .iter()
        .map(|p| [p[0] - centroid[0], p[1] - centroid[1], p[2] - centroid[2]])
        .collect();
    let scale = centered
        .iter()
        .map(|c| dot(c, c).sqrt())
        .fold(0.0, f64::max);
    let mut sign_rules = [SignRule::SolverDefault; 3];
    for (a, axis) in axes.iter_mut().enumerate() {
        let q: Vec<f64> = centered.iter().map(|c| dot(axis, c)).collect();
        sign_rules[a] = orient_axis(axis, &q, scale);
    }
    Ok(PcaFrame {
        centroid,
        axes,
        eigenvalues,
        sign_rules,
        degenerate,
    })
}

fn lex_sort_projections(q: &[Point3]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..q.len()).collect();
    order.sort_by(|&i, &j| {
        q[i][0]
            .total_cmp(&q[j][0])
            .then(q[i][1].total_cmp(&q[j][1]))
            .then(q[i][2].total_cmp(&q[j][2]))
            .then(i.cmp(&j))
    });
    order
}

/// Permutation ordering the cloud lexicographically by its principal-axis
/// projections `(q1, q2, q3)`; exact ties keep the smaller index first.
pub fn pca_sort(cloud: &PointCloud) -> Result<Vec<usize>> {
    let frame = pca_axes(cloud)?;
    let q: Vec<Point3> = cloud.iter().map(|p| frame.project(p)).collect();
    Ok(lex_sort_projections(&q))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    #[default]
    PcaUniform,
    Random,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pca" | "pca_uniform" => Ok(Strategy::PcaUniform),
            "random" => Ok(Strategy::Random),
            other => Err(Error::invalid(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// Order in which points were interleaved (original indices).
    pub sorted_perm: Vec<usize>,
    /// Original indices of each subset, in sorted order.
    pub subset_indices: Vec<Vec<usize>>,
    pub subsets: Vec<PointCloud>,
    pub strategy: Strategy,
}

/// Splits `order` into `u` subsets, position `j` going to subset `j % u`.
pub fn interleave(order: &[usize], u: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::with_capacity(order.len() / u + 1); u];
    for (j, &i) in order.iter().enumerate() {
        out[j % u].push(i);
    }
    out
}

/// Decomposes `cloud` into `subsets` balanced, index-disjoint parts.
///
/// `PcaUniform` interleaves the PCA-sorted order; `Random` interleaves a
/// Fisher-Yates shuffle drawn from [`SeededRng`] with `seed` (ignored by
/// the PCA strategy).
pub fn decompose(
    cloud: &PointCloud,
    subsets: usize,
    strategy: Strategy,
    seed: u64,
) -> Result<Decomposition> {
    cloud.ensure_non_empty()?;
    if subsets == 0 {
        return Err(Error::invalid("subset count must be at least 1"));
    }
    if subsets > cloud.len() {
        return Err(Error::SampleTooLarge {
            requested: subsets,
            available: cloud.len(),
        });
    }
    let sorted_perm = match strategy {
        Strategy::PcaUniform => pca_sort(cloud)?,
        Strategy::Random => {
            let mut perm: Vec<usize> = (0..cloud.len()).collect();
            SeededRng::new(seed).shuffle(&mut perm);
            perm
        }
    };
    let subset_indices = interleave(&sorted_perm, subsets);
    let subsets = subset_indices.iter().map(|ix| cloud.select(ix)).collect();
    Ok(Decomposition {
        sorted_perm,
        subset_indices,
        subsets,
        strategy,
    })
}
