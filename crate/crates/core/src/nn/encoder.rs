//! Encoder blocks: local aggregation followed by a bidirectional SSM over
//! the proxy sequence.
//!
//! ```text
//! pos = SiLU(W_pos c + b_pos)
//! z_0 = F + pos
//! z'  = LNP(LN1(z + pos)) + z
//! z   = bi_ssm(LN2(z')) + z'
//! ```
//!
//! `LNP` gathers the `k_lnp` nearest proxies (by centre, self included),
//! runs a shared two-layer MLP on the feature differences `h_j - h_i` and
//! max-pools over the neighbours.

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::knn_with_dist2;
use crate::nn::ssm::{bi_ssm, ScanMode, SsmWeights};
use crate::nn::tensor::{silu, Tensor};
use crate::nn::{dense, mlp2, norm, points_tensor, ProxySet, WeightStore};

pub fn positional_encoding(store: &WeightStore, proxies: &ProxySet) -> Result<Tensor> {
    Ok(dense(store, "encoder.pos", &points_tensor(&proxies.centers))?.map(silu))
}

/// Local aggregation over the `k` nearest proxies of each proxy.
pub fn local_aggregate(
    store: &WeightStore,
    prefix: &str,
    centers: &[crate::cloud::Point3],
    h: &Tensor,
    k: usize,
) -> Result<Tensor> {
    let cloud = PointCloud::new(centers.to_vec())?;
    let neighbours = knn_with_dist2(&cloud, centers, k)?;
    let width = h.cols();
    let mut out = Vec::with_capacity(h.len());
    for (i, row) in neighbours.iter().enumerate() {
        let mut diffs = Vec::with_capacity(row.len() * width);
        for &(j, _) in row {
            diffs.extend(h.row(j).iter().zip(h.row(i)).map(|(a, b)| a - b));
        }
        let m = mlp2(store, prefix, &Tensor::matrix(row.len(), width, diffs))?;
        out.extend(m.max_rows());
    }
    Ok(Tensor::matrix(h.rows(), width, out))
}

pub fn mamba_encoder(
    proxies: &ProxySet,
    store: &WeightStore,
    blocks: usize,
    k_lnp: usize,
    mode: ScanMode,
) -> Result<ProxySet> {
    if blocks == 0 {
        return Err(Error::invalid("encoder needs at least one block"));
    }
    let pos = positional_encoding(store, proxies)?;
    let mut z = proxies.features.add(&pos);
    for l in 0..blocks {
        let p = format!("encoder.{l}");
        let h = norm(store, &format!("{p}.norm1"), &z.add(&pos))?;
        let z_mid =
            local_aggregate(store, &format!("{p}.lnp"), &proxies.centers, &h, k_lnp)?.add(&z);
        let fwd = SsmWeights::load(store, &format!("{p}.ssm_fwd"))?;
        let bwd = SsmWeights::load(store, &format!("{p}.ssm_bwd"))?;
        let mixed = bi_ssm(
            &fwd,
            &bwd,
            &norm(store, &format!("{p}.norm2"), &z_mid)?,
            mode,
        )?;
        z = mixed.add(&z_mid);
    }
    ProxySet::new(proxies.centers.clone(), z)
}
