//! Forward-only network stages over a small dense-tensor substrate.
//!
//! Stage order: [`pointnet::pointnet_lite`] turns local patches into point
//! proxies, [`encoder::mamba_encoder`] mixes them with local aggregation
//! and a bidirectional SSM, [`seed::seed_generator`] predicts and selects
//! seed points, [`decoder::transformer_decoder`] refines seed features with
//! self- and cross-attention, and [`reconstruct::multi_head_reconstruct`]
//! grows `U` point sets of offsets around the seeds.
//!
//! Weights are looked up by name in a [`WeightStore`]; see
//! [`weights::expected_tensors`] for the schema.

pub mod decoder;
pub mod encoder;
pub mod pointnet;
pub mod reconstruct;
pub mod seed;
pub mod ssm;
pub mod tensor;
pub mod weights;

pub use tensor::Tensor;
pub use weights::WeightStore;

use crate::cloud::Point3;
use crate::error::{Error, Result};
use tensor::{layer_norm, linear, relu};

/// Point proxies: one feature row per centre.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxySet {
    pub centers: Vec<Point3>,
    /// `G x D_h`.
    pub features: Tensor,
}

impl ProxySet {
    pub fn new(centers: Vec<Point3>, features: Tensor) -> Result<Self> {
        if centers.len() != features.rows() {
            return Err(Error::invalid(format!(
                "{} centres but {} feature rows",
                centers.len(),
                features.rows()
            )));
        }
        Ok(Self { centers, features })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

pub(crate) fn points_tensor(points: &[Point3]) -> Tensor {
    Tensor::matrix(points.len(), 3, points.iter().flatten().copied().collect())
}

/// `x W^T + b` with weights `{prefix}.weight` / `{prefix}.bias`.
pub(crate) fn dense(store: &WeightStore, prefix: &str, x: &Tensor) -> Result<Tensor> {
    let wname = format!("{prefix}.weight");
    let w = store.get(&wname)?;
    let b = store.get(&format!("{prefix}.bias"))?;
    if w.shape().len() != 2 || w.shape()[1] != x.cols() || b.len() != w.shape()[0] {
        return Err(Error::tensor(
            wname,
            format!("shape {:?} cannot map width {}", w.shape(), x.cols()),
        ));
    }
    Ok(linear(x, w, b))
}

/// Two dense layers with a ReLU between: `{prefix}.0`, `{prefix}.1`.
pub(crate) fn mlp2(store: &WeightStore, prefix: &str, x: &Tensor) -> Result<Tensor> {
    let h = dense(store, &format!("{prefix}.0"), x)?.map(relu);
    dense(store, &format!("{prefix}.1"), &h)
}

pub(crate) fn norm(store: &WeightStore, prefix: &str, x: &Tensor) -> Result<Tensor> {
    let gname = format!("{prefix}.gamma");
    let g = store.get(&gname)?;
    let b = store.get(&format!("{prefix}.beta"))?;
    if g.len() != x.cols() || b.len() != x.cols() {
        return Err(Error::tensor(gname, format!("expected width {}", x.cols())));
    }
    Ok(layer_norm(x, g, b))
}
