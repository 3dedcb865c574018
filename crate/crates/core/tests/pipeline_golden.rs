//! Byte-level regression for the desk-scale forward pass. The digests were
//! recorded after the per-stage oracle tests passed; any change to them
//! means the forward computation changed.

use ppcmt::config::{ModelConfig, Scale};
use ppcmt::io::{encode_pcf, encode_weights};
use ppcmt::nn::WeightStore;
use ppcmt::pipeline::{complete, complete_traced, synth_shape, Shape};
use sha2::{Digest, Sha256};

fn hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn f64_bytes(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

const WEIGHTS_SHA: &str = "c7f4bfab4fc7f3d058cb075a02f360798ff0b8a52262f44618a39ec11bd3ddaf";
const ENCODER_SHA: &str = "25ad7f8bccc582291dc06c00f63cefb823b5dcffd850bd5d6bcb9aebb5012c83";
const OUTPUT_SHA: &str = "1ef01cdc82f115f77f3ed4baf06e8b97485956225b1961f87e95478a8d7f7a8b";

#[test]
fn desk_sphere_golden() {
    let cfg = ModelConfig::new(Scale::Desk);
    let weights = WeightStore::init(&cfg, 0).unwrap();
    let cloud = synth_shape(Shape::Sphere, cfg.input_points, 0).unwrap();
    let r = complete_traced(&cloud, &cfg, &weights).unwrap();
    let stages = r.stages.as_ref().unwrap();
    let digests = [
        hex(&encode_weights(&weights).unwrap()),
        hex(&f64_bytes(stages.encoded.features.data())),
        hex(&f64_bytes(
            &r.output
                .points()
                .iter()
                .flatten()
                .copied()
                .collect::<Vec<_>>(),
        )),
    ];
    assert_eq!(digests, [WEIGHTS_SHA, ENCODER_SHA, OUTPUT_SHA]);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let cfg = ModelConfig::new(Scale::Desk);
    let weights = WeightStore::init(&cfg, 5).unwrap();
    let cloud = synth_shape(Shape::Torus, cfg.input_points, 5).unwrap();
    let a = encode_pcf(&complete(&cloud, &cfg, &weights).unwrap().output).unwrap();
    let b = encode_pcf(&complete(&cloud, &cfg, &weights).unwrap().output).unwrap();
    assert_eq!(a, b);
}

#[test]
fn parallel_scan_mode_stays_close_to_sequential() {
    let cfg = ModelConfig::new(Scale::Desk);
    let weights = WeightStore::init(&cfg, 6).unwrap();
    let cloud = synth_shape(Shape::Cylinder, cfg.input_points, 6).unwrap();
    let seq = complete(&cloud, &cfg, &weights).unwrap();
    let fast_cfg = ModelConfig {
        deterministic: false,
        ..cfg.clone()
    };
    let par = complete(&cloud, &fast_cfg, &weights).unwrap();
    for (a, b) in seq.output.iter().zip(par.output.iter()) {
        for k in 0..3 {
            assert!((a[k] - b[k]).abs() <= 1e-9 * (1.0 + a[k].abs()));
        }
    }
}
