//! PCA-guided decomposition of a synthetic cuboid into four interleaved
//! subsets, next to the random baseline.
//!
//! cargo run --example decompose

use ppcmt::metrics::chamfer;
use ppcmt::pca::{decompose, pca_axes, Strategy};
use ppcmt::pipeline::{synth_shape, Shape};

fn main() -> ppcmt::Result<()> {
    let cloud = synth_shape(Shape::Cuboid, 2048, 1)?;
    let frame = pca_axes(&cloud)?;
    println!("eigenvalues {:?}", frame.eigenvalues);
    println!("axes        {:?}", frame.axes);
    println!("sign rules  {:?}", frame.sign_rules);

    for strategy in [Strategy::PcaUniform, Strategy::Random] {
        let d = decompose(&cloud, 4, strategy, 7)?;
        let sizes: Vec<usize> = d.subsets.iter().map(|s| s.len()).collect();
        // how well each subset alone covers the whole shape
        let cover: Vec<String> = d
            .subsets
            .iter()
            .map(|s| chamfer(s, &cloud).map(|c| format!("{:.4}", c.cd_g)))
            .collect::<ppcmt::Result<_>>()?;
        println!(
            "{strategy:?}: sizes {sizes:?}, subset->cloud coverage {}",
            cover.join(" ")
        );
    }
    Ok(())
}
