//! Flexible Chamfer training loss over seeds, per-head parts and the merged
//! output, with analytic (sub)gradients.
//!
//! ```text
//! total  = l_p0 + mean_i(l_parts[i]) + l_out
//! l_p0   = cd_g(P0, G)
//! l_part = cd_l(P_i, G_i) + 2 cd_g(P_i, G_i)
//! l_out  = cd_l(Pout, G)  + 2 cd_g(Pout, G)
//! ```
//!
//! Gradients hold the nearest-neighbour assignments fixed. A pair at exactly
//! zero distance contributes a zero subgradient.

use crate::cloud::{Point3, PointCloud};
use crate::error::{Error, Result};
use crate::geometry::nearest;
use crate::metrics::chamfer;

/// Weight of the ground-truth-to-prediction term in part and output losses.
pub const CD_G_WEIGHT: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub l_p0: f64,
    pub l_parts: Vec<f64>,
    pub l_out: f64,
    pub total: f64,
}

/// Gradient of [`LossBreakdown::total`] w.r.t. each predicted coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub p0: Vec<Point3>,
    pub parts: Vec<Vec<Point3>>,
    pub pout: Vec<Point3>,
}

/// Predicted clouds and their targets for one sample.
#[derive(Debug, Clone, Copy)]
pub struct LossInputs<'a> {
    pub seeds: &'a PointCloud,
    pub parts: &'a [PointCloud],
    pub output: &'a PointCloud,
    pub gt: &'a PointCloud,
    pub gt_parts: &'a [PointCloud],
}

impl LossInputs<'_> {
    fn check(&self) -> Result<()> {
        if self.parts.is_empty() || self.parts.len() != self.gt_parts.len() {
            return Err(Error::invalid(format!(
                "head count mismatch: {} predicted parts, {} target parts",
                self.parts.len(),
                self.gt_parts.len()
            )));
        }
        self.seeds.ensure_non_empty()?;
        self.output.ensure_non_empty()?;
        self.gt.ensure_non_empty()?;
        for c in self.parts.iter().chain(self.gt_parts) {
            c.ensure_non_empty()?;
        }
        Ok(())
    }
}

fn flexible(pred: &PointCloud, gt: &PointCloud) -> Result<f64> {
    let c = chamfer(pred, gt)?;
    Ok(c.cd_l + CD_G_WEIGHT * c.cd_g)
}

pub fn total_loss(inputs: &LossInputs<'_>) -> Result<LossBreakdown> {
    inputs.check()?;
    let l_p0 = chamfer(inputs.seeds, inputs.gt)?.cd_g;
    let l_parts = inputs
        .parts
        .iter()
        .zip(inputs.gt_parts)
        .map(|(p, g)| flexible(p, g))
        .collect::<Result<Vec<_>>>()?;
    let l_out = flexible(inputs.output, inputs.gt)?;
    let total = l_p0 + l_parts.iter().sum::<f64>() / l_parts.len() as f64 + l_out;
    Ok(LossBreakdown {
        l_p0,
        l_parts,
        l_out,
        total,
    })
}

fn unit_diff(a: &Point3, b: &Point3) -> Point3 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if n == 0.0 {
        [0.0; 3]
    } else {
        [d[0] / n, d[1] / n, d[2] / n]
    }
}

fn add_scaled(g: &mut Point3, v: &Point3, w: f64) {
    for k in 0..3 {
        g[k] += w * v[k];
    }
}

/// Adds `weight * d cd_l(pred, gt) / d pred` into `grad`.
fn accumulate_cd_l(
    pred: &PointCloud,
    gt: &PointCloud,
    weight: f64,
    grad: &mut [Point3],
) -> Result<()> {
    let w = weight / pred.len() as f64;
    for (i, (j, _)) in nearest(pred.points(), gt)?.into_iter().enumerate() {
        add_scaled(&mut grad[i], &unit_diff(&pred[i], &gt[j]), w);
    }
    Ok(())
}

/// Adds `weight * d cd_g(pred, gt) / d pred` into `grad`.
fn accumulate_cd_g(
    pred: &PointCloud,
    gt: &PointCloud,
    weight: f64,
    grad: &mut [Point3],
) -> Result<()> {
    let w = weight / gt.len() as f64;
    for (g, (i, _)) in nearest(gt.points(), pred)?.into_iter().enumerate() {
        add_scaled(&mut grad[i], &unit_diff(&pred[i], &gt[g]), w);
    }
    Ok(())
}

pub fn loss_grad(inputs: &LossInputs<'_>) -> Result<LossGrad> {
    inputs.check()?;
    let mut p0 = vec![[0.0; 3]; inputs.seeds.len()];
    accumulate_cd_g(inputs.seeds, inputs.gt, 1.0, &mut p0)?;

    let head_weight = 1.0 / inputs.parts.len() as f64;
    let parts = inputs
        .parts
        .iter()
        .zip(inputs.gt_parts)
        .map(|(p, g)| {
            let mut grad = vec![[0.0; 3]; p.len()];
            accumulate_cd_l(p, g, head_weight, &mut grad)?;
            accumulate_cd_g(p, g, head_weight * CD_G_WEIGHT, &mut grad)?;
            Ok(grad)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut pout = vec![[0.0; 3]; inputs.output.len()];
    accumulate_cd_l(inputs.output, inputs.gt, 1.0, &mut pout)?;
    accumulate_cd_g(inputs.output, inputs.gt, CD_G_WEIGHT, &mut pout)?;
    Ok(LossGrad { p0, parts, pout })
}
