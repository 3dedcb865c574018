//! Lightweight PointNet: shared per-point MLP, max-pool per group, second
//! MLP on the pooled vector.

use crate::error::{Error, Result};
use crate::geometry::GroupedPatches;
use crate::nn::tensor::{relu, Tensor};
use crate::nn::{dense, mlp2, points_tensor, ProxySet, WeightStore};

pub fn pointnet_lite(patches: &GroupedPatches, store: &WeightStore) -> Result<ProxySet> {
    let g = patches.groups();
    if g == 0 {
        return Err(Error::EmptyInput);
    }
    let mut pooled = Vec::new();
    for offsets in &patches.local_offsets {
        if offsets.is_empty() {
            return Err(Error::EmptyInput);
        }
        let h = dense(store, "pointnet.mlp1", &points_tensor(offsets))?.map(relu);
        pooled.extend(h.max_rows());
    }
    let width = pooled.len() / g;
    let pooled = Tensor::matrix(g, width, pooled);
    let features = mlp2(store, "pointnet.mlp2", &pooled)?;
    ProxySet::new(patches.centers.clone(), features)
}
