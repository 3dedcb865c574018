//! The multi-level Chamfer loss and its gradient, used for a few steps of
//! plain gradient descent directly on the predicted coordinates.
//!
//! cargo run --example loss

use ppcmt::loss::{loss_grad, total_loss, LossInputs};
use ppcmt::pca::{decompose, Strategy};
use ppcmt::pipeline::{synth_shape, Shape};
use ppcmt::{PointCloud, Result};

const HEADS: usize = 4;

fn step(cloud: &PointCloud, grad: &[[f64; 3]], lr: f64) -> Result<PointCloud> {
    let moved = cloud
        .iter()
        .zip(grad)
        .map(|(p, g)| [p[0] - lr * g[0], p[1] - lr * g[1], p[2] - lr * g[2]])
        .collect();
    PointCloud::new(moved)
}

fn main() -> Result<()> {
    let gt = synth_shape(Shape::Cylinder, 512, 2)?;
    let gt_parts = decompose(&gt, HEADS, Strategy::PcaUniform, 0)?.subsets;

    // start from noisy shrunken copies of the targets
    let mut seeds = synth_shape(Shape::Sphere, 64, 3)?.transformed(
        &[[0.3, 0.0, 0.0], [0.0, 0.3, 0.0], [0.0, 0.0, 0.3]],
        [0.0; 3],
    );
    let mut parts: Vec<PointCloud> = (0..HEADS)
        .map(|u| synth_shape(Shape::Sphere, 128, 10 + u as u64))
        .collect::<Result<_>>()?;

    let lr = 0.05;
    for it in 0..=40 {
        let output = PointCloud::concat(&parts);
        let inputs = LossInputs {
            seeds: &seeds,
            parts: &parts,
            output: &output,
            gt: &gt,
            gt_parts: &gt_parts,
        };
        let l = total_loss(&inputs)?;
        if it % 10 == 0 {
            println!(
                "iter {it:>2}: total {:.5}  seeds {:.5}  out {:.5}",
                l.total, l.l_p0, l.l_out
            );
        }
        let g = loss_grad(&inputs)?;
        // a part point also appears in the merged output
        let mut offset = 0;
        for (u, part) in parts.iter_mut().enumerate() {
            let n = part.len();
            let combined: Vec<[f64; 3]> = (0..n)
                .map(|i| {
                    let (a, b) = (g.parts[u][i], g.pout[offset + i]);
                    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
                })
                .collect();
            *part = step(part, &combined, lr * n as f64)?;
            offset += n;
        }
        seeds = step(&seeds, &g.p0, lr * seeds.len() as f64 / 8.0)?;
    }
    Ok(())
}
