//! Desk-scale completion of a cropped sphere with seeded weights, printing
//! the size and a few statistics of every stage.
//!
//! cargo run --example completion

use ppcmt::config::{ModelConfig, Scale};
use ppcmt::metrics::chamfer;
use ppcmt::nn::WeightStore;
use ppcmt::pipeline::{complete_traced, crop_viewpoint, fit_to_size, synth_shape, Shape};

fn main() -> ppcmt::Result<()> {
    let cfg = ModelConfig::new(Scale::Desk);
    let weights = WeightStore::init(&cfg, cfg.seed)?;

    let full = synth_shape(Shape::Sphere, 2048, 0)?;
    let (partial, _) = crop_viewpoint(&full, 0.5, 1)?;
    let input = fit_to_size(&partial, cfg.input_points)?;

    let r = complete_traced(&input, &cfg, &weights)?;
    let st = r.stages.as_ref().expect("traced run keeps stages");
    println!("input       {} points", input.len());
    println!("proxies     {:?}", st.proxies.features.shape());
    println!("encoded     {:?}", st.encoded.features.shape());
    println!("candidates  {}", r.candidates.len());
    println!("seeds       {}", r.seeds.len());
    println!("decoded     {:?}", st.decoded.shape());
    for (u, part) in r.parts.iter().enumerate() {
        println!("part {u}      {} points", part.len());
    }
    println!("output      {} points", r.output.len());

    // The weights are untrained, so this only shows how to score a result.
    let c = chamfer(&r.output, &full)?;
    println!("cd_l1 vs full shape {:.4}", c.cd_l1);
    Ok(())
}
