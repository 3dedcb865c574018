//! Paired and unpaired metrics on a cropped torus.
//!
//! cargo run --example metrics

use ppcmt::metrics::{self, MetricKind, MetricReport, DEFAULT_ALPHA, DEFAULT_TAU};
use ppcmt::pipeline::{crop_viewpoint, synth_shape, Shape};
use ppcmt::PointCloud;

fn main() -> ppcmt::Result<()> {
    let gt = synth_shape(Shape::Torus, 1024, 3)?;
    let (partial, _missing) = crop_viewpoint(&gt, 0.25, 11)?;

    // A stand-in prediction: the partial cloud padded back to 1024 points
    // by repeating its own points.
    let mut pts = partial.points().to_vec();
    let extra: Vec<_> = pts
        .iter()
        .cycle()
        .take(gt.len() - pts.len())
        .copied()
        .collect();
    pts.extend(extra);
    let pred = PointCloud::new(pts)?;

    let all = [
        MetricKind::Chamfer,
        MetricKind::Dcd,
        MetricKind::Emd,
        MetricKind::FScore,
    ];
    let report = MetricReport::evaluate(&pred, &gt, &all, DEFAULT_TAU, DEFAULT_ALPHA)?;
    for e in &report.entries {
        println!("{:<10} {:>12.6}   {}", e.name, e.value, e.convention);
    }

    let other = synth_shape(Shape::Torus, 1024, 4)?;
    println!("fidelity    {:.6}", metrics::fidelity(&partial, &pred)?);
    println!(
        "consistency {:.6}",
        metrics::consistency(&[gt.clone(), other.clone(), pred.clone()])?
    );
    let refs = [synth_shape(Shape::Sphere, 1024, 5)?, other];
    let m = metrics::mmd(&pred, &refs)?;
    println!(
        "mmd         {:.6} (closest reference {})",
        m.value, m.best_index
    );
    Ok(())
}
