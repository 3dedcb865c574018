//! Viewpoint cropping and the Uniformity metric across neighbourhood sizes.
//!
//! cargo run --example crop_uniformity

use ppcmt::metrics::uniformity;
use ppcmt::pipeline::{crop_from, synth_shape, Shape};
use ppcmt::PointCloud;

fn main() -> ppcmt::Result<()> {
    let sphere = synth_shape(Shape::Sphere, 4096, 8)?;
    let (partial, missing) = crop_from(&sphere, 0.25, [0.0, 0.0, 1.0])?;
    println!("crop: kept {}, removed {}", partial.len(), missing.len());
    let top = missing.iter().map(|p| p[2]).fold(f64::INFINITY, f64::min);
    println!("lowest removed point has z = {top:.3}");

    // Pull a quarter of the points into a tight blob to see the metric react.
    let mut pts = sphere.points().to_vec();
    for p in pts.iter_mut().step_by(4) {
        *p = [p[0] * 0.05 + 1.0, p[1] * 0.05, p[2] * 0.05];
    }
    let clumped = PointCloud::new(pts)?;

    println!("{:>6} {:>12} {:>12}", "p", "sphere", "clumped");
    for p in [0.004, 0.006, 0.008, 0.010, 0.012] {
        println!(
            "{p:>6} {:>12.4} {:>12.4}",
            uniformity(&sphere, p, 1000)?,
            uniformity(&clumped, p, 1000)?
        );
    }
    Ok(())
}
