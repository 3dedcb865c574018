//! Config files and weight containers: build a config, write it as TOML,
//! initialise weights, store them as PWT1 and load them back with schema
//! validation.
//!
//! cargo run --example weights

use ppcmt::config::{ModelConfig, Scale};
use ppcmt::io;
use ppcmt::nn::weights::expected_tensors;
use ppcmt::nn::WeightStore;

fn main() -> ppcmt::Result<()> {
    let dir = std::env::temp_dir().join("ppcmt-weights-example");
    std::fs::create_dir_all(&dir)?;

    let cfg = ModelConfig {
        attention_bias: true,
        seed: 42,
        ..ModelConfig::new(Scale::Desk)
    };
    std::fs::write(dir.join("model.toml"), cfg.to_toml())?;
    let cfg = io::read_config(dir.join("model.toml"))?;

    let specs = expected_tensors(&cfg);
    let values: usize = specs
        .iter()
        .map(|s| s.shape.iter().product::<usize>())
        .sum();
    println!("{} tensors, {values} values", specs.len());
    for s in specs.iter().take(6) {
        println!("  {:<28} {:?} {:?}", s.name, s.shape, s.init);
    }

    let weights = WeightStore::init(&cfg, cfg.seed)?;
    let path = dir.join("model.pwt");
    io::write_weights(&path, &weights)?;
    let loaded = io::load_weights(&path, &cfg)?;
    println!("round trip identical: {}", loaded == weights);

    let paper = ModelConfig::new(Scale::Paper);
    match io::load_weights(&path, &paper) {
        Ok(_) => println!("unexpectedly accepted"),
        Err(e) => println!("paper-scale config rejects these weights: {e}"),
    }
    Ok(())
}
