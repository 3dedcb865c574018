//! Multi-head reconstruction: split decoder features into `U` proxy sets
//! and let each head predict `r` offsets around every seed.
//!
//! ```text
//! g   = max_i ReLU(W_g D_i + b_g)
//! O   = psi([g, D_i, P0_i])          -> I x (U * D_h), head u owns slice u
//! P_u = {P0_i + phi_u(O_u,i)[k] : seed i, offset k}
//! ```
//!
//! Points are ordered head, then seed, then offset.

use crate::cloud::{Point3, PointCloud};
use crate::error::{Error, Result};
use crate::nn::tensor::{relu, Tensor};
use crate::nn::{dense, mlp2, points_tensor, WeightStore};

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub parts: Vec<PointCloud>,
    pub output: PointCloud,
}

pub fn multi_head_reconstruct(
    features: &Tensor,
    seeds: &[Point3],
    store: &WeightStore,
    heads: usize,
    offsets: usize,
) -> Result<Reconstruction> {
    if heads == 0 || offsets == 0 {
        return Err(Error::invalid("need at least one head and one offset"));
    }
    if features.rows() != seeds.len() || seeds.is_empty() {
        return Err(Error::invalid(format!(
            "{} seed features for {} seeds",
            features.rows(),
            seeds.len()
        )));
    }
    let width = features.cols();
    let g = dense(store, "recon.global", features)?.map(relu).max_rows();
    let broadcast = Tensor::matrix(seeds.len(), g.len(), g.repeat(seeds.len()));
    let o = mlp2(
        store,
        "recon.psi",
        &Tensor::hcat(&[&broadcast, features, &points_tensor(seeds)]),
    )?;
    if o.cols() != heads * width {
        return Err(Error::tensor(
            "recon.psi.1.weight",
            format!("produces width {}, expected {}", o.cols(), heads * width),
        ));
    }

    let mut parts = Vec::with_capacity(heads);
    for u in 0..heads {
        let slice: Vec<f64> = (0..seeds.len())
            .flat_map(|i| o.row(i)[u * width..(u + 1) * width].to_vec())
            .collect();
        let off = mlp2(
            store,
            &format!("recon.head.{u}"),
            &Tensor::matrix(seeds.len(), width, slice),
        )?;
        if off.cols() != 3 * offsets {
            return Err(Error::tensor(
                format!("recon.head.{u}.1.weight"),
                format!("produces width {}, expected {}", off.cols(), 3 * offsets),
            ));
        }
        let mut pts = Vec::with_capacity(seeds.len() * offsets);
        for (i, s) in seeds.iter().enumerate() {
            for k in 0..offsets {
                let d = &off.row(i)[3 * k..3 * k + 3];
                pts.push([s[0] + d[0], s[1] + d[1], s[2] + d[2]]);
            }
        }
        parts.push(PointCloud::new(pts)?);
    }
    let output = PointCloud::concat(&parts);
    Ok(Reconstruction { parts, output })
}
