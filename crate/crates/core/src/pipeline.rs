//! End-to-end completion, synthetic shapes and viewpoint cropping.
//!
//! [`complete`] first sorts the input canonically, so the output depends
//! only on the multiset of input points. It then runs grouping, PointNet,
//! the encoder, seed generation, the decoder and the reconstruction heads
//! in that order.

use std::f64::consts::PI;

use crate::cloud::{dist2, Point3, PointCloud};
use crate::config::{ModelConfig, Scale};
use crate::error::{Error, Result};
use crate::geometry::{canonical_sort, fps, group_normalize};
use crate::nn::decoder::{transformer_decoder, DecoderOptions};
use crate::nn::encoder::mamba_encoder;
use crate::nn::pointnet::pointnet_lite;
use crate::nn::reconstruct::multi_head_reconstruct;
use crate::nn::seed::seed_generator;
use crate::nn::ssm::ScanMode;
use crate::nn::{ProxySet, Tensor, WeightStore};
use crate::rng::SeededRng;

pub fn default_config(scale: Scale) -> ModelConfig {
    ModelConfig::new(scale)
}

/// Intermediate features kept by [`complete_traced`].
#[derive(Debug, Clone, PartialEq)]
pub struct StageSnapshots {
    /// PointNet proxies (centres in FPS order).
    pub proxies: ProxySet,
    /// Encoder output.
    pub encoded: ProxySet,
    /// `I x D_h` seed features entering the decoder.
    pub seed_features: Tensor,
    /// `I x D_h` decoder output.
    pub decoded: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionResult {
    pub seeds: PointCloud,
    pub candidates: PointCloud,
    pub parts: Vec<PointCloud>,
    pub output: PointCloud,
    pub stages: Option<StageSnapshots>,
}

pub fn scan_mode(cfg: &ModelConfig) -> ScanMode {
    if cfg.deterministic {
        ScanMode::Sequential
    } else {
        ScanMode::Parallel
    }
}

pub fn complete(
    cloud: &PointCloud,
    cfg: &ModelConfig,
    weights: &WeightStore,
) -> Result<CompletionResult> {
    run(cloud, cfg, weights, false)
}

/// [`complete`] that also returns the per-stage features.
pub fn complete_traced(
    cloud: &PointCloud,
    cfg: &ModelConfig,
    weights: &WeightStore,
) -> Result<CompletionResult> {
    run(cloud, cfg, weights, true)
}

fn run(
    cloud: &PointCloud,
    cfg: &ModelConfig,
    weights: &WeightStore,
    trace: bool,
) -> Result<CompletionResult> {
    cfg.validate()?;
    weights.validate(cfg)?;
    cloud.ensure_non_empty()?;
    if cloud.len() != cfg.input_points {
        return Err(Error::invalid(format!(
            "input has {} points, config expects {}",
            cloud.len(),
            cfg.input_points
        )));
    }
    let canon = cloud.select(&canonical_sort(cloud)?);
    let centers = fps(&canon, cfg.groups)?;
    let patches = group_normalize(&canon, &centers, cfg.group_size)?;

    let proxies = pointnet_lite(&patches, weights)?;
    let encoded = mamba_encoder(
        &proxies,
        weights,
        cfg.encoder_blocks,
        cfg.k_lnp,
        scan_mode(cfg),
    )?;
    let seeds = seed_generator(
        &encoded,
        weights,
        cfg.candidates,
        cfg.seeds,
        cfg.residual_candidates(),
    )?;
    let opts = DecoderOptions {
        layers: cfg.decoder_layers,
        heads: cfg.attention_heads,
        geometric_k: cfg.attention_bias.then_some(cfg.k_attn),
    };
    let decoded = transformer_decoder(&seeds.features, &seeds.seeds, &encoded, weights, &opts)?;
    let recon = multi_head_reconstruct(
        &decoded,
        &seeds.seeds,
        weights,
        cfg.reconstruction_heads,
        cfg.offsets_per_seed,
    )?;
    debug_assert_eq!(recon.output.len(), cfg.output_points);

    let stages = trace.then(|| StageSnapshots {
        proxies,
        encoded,
        seed_features: seeds.features.clone(),
        decoded,
    });
    Ok(CompletionResult {
        seeds: PointCloud::new(seeds.seeds)?,
        candidates: PointCloud::new(seeds.candidates)?,
        parts: recon.parts,
        output: recon.output,
        stages,
    })
}

/// Brings a cloud to exactly `n` points: FPS when it is larger, cyclic
/// repetition in canonical order when it is smaller.
pub fn fit_to_size(cloud: &PointCloud, n: usize) -> Result<PointCloud> {
    cloud.ensure_non_empty()?;
    if n == 0 {
        return Err(Error::invalid("target size must be at least 1"));
    }
    let canon = canonical_sort(cloud)?;
    if cloud.len() >= n {
        let mut rank = vec![0; cloud.len()];
        for (r, &i) in canon.iter().enumerate() {
            rank[i] = r;
        }
        let mut idx = fps(cloud, n)?;
        idx.sort_by_key(|&i| rank[i]);
        return Ok(cloud.select(&idx));
    }
    let idx: Vec<usize> = (0..n).map(|i| canon[i % canon.len()]).collect();
    Ok(cloud.select(&idx))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Sphere,
    Cuboid,
    Cylinder,
    Torus,
}

impl std::str::FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(Shape::Sphere),
            "cuboid" => Ok(Shape::Cuboid),
            "cylinder" => Ok(Shape::Cylinder),
            "torus" => Ok(Shape::Torus),
            other => Err(Error::invalid(format!("unknown shape `{other}`"))),
        }
    }
}

/// Half extents of the synthetic cuboid.
pub const CUBOID_HALF: Point3 = [1.0, 0.6, 0.4];
/// Cylinder radius and half height (axis along z).
pub const CYLINDER_RADIUS: f64 = 1.0;
pub const CYLINDER_HALF_HEIGHT: f64 = 0.8;
/// Torus major and minor radii (axis along z).
pub const TORUS_MAJOR: f64 = 1.0;
pub const TORUS_MINOR: f64 = 0.3;

/// `n` points sampled uniformly by area from the surface of `shape`.
pub fn synth_shape(shape: Shape, n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::invalid("need at least one point"));
    }
    let mut rng = SeededRng::new(seed);
    let points = (0..n)
        .map(|_| match shape {
            Shape::Sphere => rng.unit_vector(),
            Shape::Cuboid => cuboid_point(&mut rng),
            Shape::Cylinder => cylinder_point(&mut rng),
            Shape::Torus => torus_point(&mut rng),
        })
        .collect();
    PointCloud::new(points)
}

fn cuboid_point(rng: &mut SeededRng) -> Point3 {
    let [a, b, c] = CUBOID_HALF;
    // face pairs normal to x, y, z with areas proportional to b*c, a*c, a*b
    let areas = [b * c, a * c, a * b];
    let total: f64 = areas.iter().sum();
    let mut pick = rng.uniform() * total;
    let mut axis = 2;
    for (k, &ar) in areas.iter().enumerate() {
        if pick < ar {
            axis = k;
            break;
        }
        pick -= ar;
    }
    let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
    let mut p = [0.0; 3];
    for (k, v) in p.iter_mut().enumerate() {
        *v = if k == axis {
            sign * CUBOID_HALF[k]
        } else {
            rng.uniform_in(-CUBOID_HALF[k], CUBOID_HALF[k])
        };
    }
    p
}

fn cylinder_point(rng: &mut SeededRng) -> Point3 {
    let (r, h) = (CYLINDER_RADIUS, CYLINDER_HALF_HEIGHT);
    let side = 2.0 * PI * r * 2.0 * h;
    let cap = PI * r * r;
    let pick = rng.uniform() * (side + 2.0 * cap);
    let theta = rng.uniform_in(0.0, 2.0 * PI);
    if pick < side {
        [r * theta.cos(), r * theta.sin(), rng.uniform_in(-h, h)]
    } else {
        let rho = r * rng.uniform().sqrt();
        let z = if pick < side + cap { h } else { -h };
        [rho * theta.cos(), rho * theta.sin(), z]
    }
}

fn torus_point(rng: &mut SeededRng) -> Point3 {
    let (big, small) = (TORUS_MAJOR, TORUS_MINOR);
    loop {
        let u = rng.uniform_in(0.0, 2.0 * PI);
        let v = rng.uniform_in(0.0, 2.0 * PI);
        // area element is proportional to (R + r cos v)
        if rng.uniform() * (big + small) <= big + small * v.cos() {
            let ring = big + small * v.cos();
            return [ring * u.cos(), ring * u.sin(), small * v.sin()];
        }
    }
}

/// Removes the `floor(fraction * N)` points closest to a random viewpoint
/// on the unit sphere. Returns `(partial, missing)`, both in input order.
pub fn crop_viewpoint(
    cloud: &PointCloud,
    fraction: f64,
    seed: u64,
) -> Result<(PointCloud, PointCloud)> {
    let viewpoint = SeededRng::new(seed).unit_vector();
    crop_from(cloud, fraction, viewpoint)
}

/// [`crop_viewpoint`] with an explicit viewpoint. Distance ties are
/// removed in index order.
pub fn crop_from(
    cloud: &PointCloud,
    fraction: f64,
    viewpoint: Point3,
) -> Result<(PointCloud, PointCloud)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!(
            "crop fraction {fraction} not in (0, 1)"
        )));
    }
    if viewpoint.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("viewpoint must be finite"));
    }
    cloud.ensure_non_empty()?;
    let n = cloud.len();
    let remove = (fraction * n as f64).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    let d: Vec<f64> = cloud.iter().map(|p| dist2(p, &viewpoint)).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    let mut gone = vec![false; n];
    for &i in &order[..remove] {
        gone[i] = true;
    }
    let keep: Vec<usize> = (0..n).filter(|&i| !gone[i]).collect();
    let drop: Vec<usize> = (0..n).filter(|&i| gone[i]).collect();
    Ok((cloud.select(&keep), cloud.select(&drop)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::multiset_key;

    #[test]
    fn shapes_lie_on_their_surfaces() {
        let s = synth_shape(Shape::Sphere, 500, 1).unwrap();
        assert!(s
            .iter()
            .all(|p| (dist2(p, &[0.0; 3]).sqrt() - 1.0).abs() < 1e-12));

        let c = synth_shape(Shape::Cuboid, 500, 2).unwrap();
        for p in &c {
            let on = (0..3).filter(|&k| p[k].abs() == CUBOID_HALF[k]).count();
            assert!(on >= 1);
            assert!((0..3).all(|k| p[k].abs() <= CUBOID_HALF[k]));
        }

        let y = synth_shape(Shape::Cylinder, 500, 3).unwrap();
        for p in &y {
            let rho = (p[0] * p[0] + p[1] * p[1]).sqrt();
            let side = (rho - CYLINDER_RADIUS).abs() < 1e-12;
            let cap = p[2].abs() == CYLINDER_HALF_HEIGHT && rho <= CYLINDER_RADIUS;
            assert!(side || cap);
        }

        let t = synth_shape(Shape::Torus, 500, 4).unwrap();
        for p in &t {
            let ring = (p[0] * p[0] + p[1] * p[1]).sqrt() - TORUS_MAJOR;
            assert!((ring * ring + p[2] * p[2] - TORUS_MINOR * TORUS_MINOR).abs() < 1e-12);
        }
    }

    #[test]
    fn cuboid_faces_follow_area() {
        let c = synth_shape(Shape::Cuboid, 20000, 5).unwrap();
        let on_z = c.iter().filter(|p| p[2].abs() == CUBOID_HALF[2]).count() as f64 / 20000.0;
        let [a, b, cc] = CUBOID_HALF;
        let expect = a * b / (a * b + a * cc + b * cc);
        assert!((on_z - expect).abs() < 0.02, "{on_z} vs {expect}");
    }

    #[test]
    fn crop_partitions_and_removes_nearest() {
        let cloud = synth_shape(Shape::Sphere, 200, 6).unwrap();
        let vp = [0.0, 0.0, 1.0];
        let (partial, missing) = crop_from(&cloud, 0.25, vp).unwrap();
        assert_eq!(missing.len(), 50);
        let mut all = partial.points().to_vec();
        all.extend_from_slice(missing.points());
        assert_eq!(multiset_key(&all), multiset_key(cloud.points()));
        let worst_missing = missing.iter().map(|p| dist2(p, &vp)).fold(0.0, f64::max);
        let best_kept = partial
            .iter()
            .map(|p| dist2(p, &vp))
            .fold(f64::INFINITY, f64::min);
        assert!(worst_missing <= best_kept);
    }

    #[test]
    fn crop_edge_cases() {
        let cloud = synth_shape(Shape::Sphere, 100, 7).unwrap();
        let (p, m) = crop_viewpoint(&cloud, 0.005, 1).unwrap();
        assert_eq!(p, cloud);
        assert!(m.is_empty());
        let (p, m) = crop_viewpoint(&cloud, 0.5, 1).unwrap();
        assert_eq!((p.len(), m.len()), (50, 50));
        assert!(crop_viewpoint(&cloud, 0.0, 1).is_err());
        assert!(crop_viewpoint(&cloud, 1.0, 1).is_err());
    }

    #[test]
    fn fit_to_size_both_ways() {
        let cloud = synth_shape(Shape::Torus, 100, 8).unwrap();
        assert_eq!(fit_to_size(&cloud, 60).unwrap().len(), 60);
        let up = fit_to_size(&cloud, 250).unwrap();
        assert_eq!(up.len(), 250);
        assert_eq!(up[0], up[100]);
    }

    fn small_cfg() -> ModelConfig {
        ModelConfig {
            input_points: 128,
            groups: 16,
            group_size: 8,
            hidden: 16,
            encoder_blocks: 1,
            decoder_layers: 1,
            candidates: 24,
            seeds: 16,
            reconstruction_heads: 4,
            offsets_per_seed: 2,
            output_points: 128,
            k_lnp: 4,
            k_attn: 4,
            attention_heads: 2,
            ssm_state: 4,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn completion_contracts() {
        let cfg = small_cfg();
        let w = WeightStore::init(&cfg, 3).unwrap();
        let cloud = synth_shape(Shape::Sphere, cfg.input_points, 9).unwrap();
        let r = complete_traced(&cloud, &cfg, &w).unwrap();
        assert_eq!(r.output.len(), cfg.output_points);
        assert!(r
            .parts
            .iter()
            .all(|p| p.len() == cfg.seeds * cfg.offsets_per_seed));
        assert_eq!(r.seeds.len(), cfg.seeds);
        assert_eq!(r.candidates.len(), cfg.candidates);
        assert!(r.stages.is_some());

        let mut shuffled = cloud.points().to_vec();
        SeededRng::new(1).shuffle(&mut shuffled);
        let again = complete(&PointCloud::new(shuffled).unwrap(), &cfg, &w).unwrap();
        assert_eq!(again.output, r.output);

        let short = synth_shape(Shape::Sphere, 100, 9).unwrap();
        assert!(complete(&short, &cfg, &w).is_err());
    }

    #[test]
    fn zero_heads_give_tiled_seeds() {
        let cfg = small_cfg();
        let mut w = WeightStore::init(&cfg, 3).unwrap();
        w.zero_prefix("recon.head.");
        let cloud = synth_shape(Shape::Cuboid, cfg.input_points, 10).unwrap();
        let r = complete(&cloud, &cfg, &w).unwrap();
        for (i, p) in r.output.iter().enumerate() {
            let seed = (i % (cfg.seeds * cfg.offsets_per_seed)) / cfg.offsets_per_seed;
            assert_eq!(*p, r.seeds[seed]);
        }
    }
}
