use ppcmt::config::ModelConfig;
use ppcmt::io::{self, decode_pcf, encode_pcf, format_xyz, parse_xyz, CloudFormat};
use ppcmt::nn::WeightStore;
use ppcmt::rng::SeededRng;
use ppcmt::PointCloud;
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e6f64..1e6,
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
    ]
}

proptest! {
    #[test]
    fn xyz_round_trip_bit_exact(points in prop::collection::vec([finite(), finite(), finite()], 0..64)) {
        let cloud = PointCloud::new(points).unwrap();
        let back = parse_xyz(&format_xyz(&cloud)).unwrap();
        prop_assert_eq!(back.len(), cloud.len());
        for (a, b) in cloud.iter().zip(back.iter()) {
            for k in 0..3 {
                // -0.0 and 0.0 print differently, so bits are preserved too
                prop_assert_eq!(a[k].to_bits(), b[k].to_bits());
            }
        }
    }

    #[test]
    fn pcf_round_trip_is_f32_rounding(points in prop::collection::vec([-1e3f64..1e3, -1e3f64..1e3, -1e3f64..1e3], 0..64)) {
        let cloud = PointCloud::new(points).unwrap();
        let back = decode_pcf(&encode_pcf(&cloud).unwrap()).unwrap();
        for (a, b) in cloud.iter().zip(back.iter()) {
            for k in 0..3 {
                prop_assert_eq!(b[k], a[k] as f32 as f64);
            }
        }
    }
}

#[test]
fn thousand_point_pcf_file_within_f32_ulp() {
    let mut rng = SeededRng::new(12);
    let cloud = PointCloud::new(
        (0..1000)
            .map(|_| [rng.normal(), 10.0 * rng.normal(), 0.01 * rng.normal()])
            .collect(),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.pcf");
    io::write_cloud(&path, &cloud, CloudFormat::Pcf).unwrap();
    assert_eq!(std::fs::metadata(&path).unwrap().len(), 8 + 12 * 1000);
    let back = io::read_cloud(&path).unwrap();
    for (a, b) in cloud.iter().zip(back.iter()) {
        for k in 0..3 {
            // half an f32 ulp at the value's magnitude
            let bound =
                (a[k].abs() as f32).max(f32::MIN_POSITIVE) as f64 * f32::EPSILON as f64 / 2.0;
            assert!(
                (a[k] - b[k]).abs() <= bound * 1.0000001,
                "{} vs {}",
                a[k],
                b[k]
            );
        }
    }
}

#[test]
fn xyz_file_round_trip() {
    let mut rng = SeededRng::new(3);
    let cloud = PointCloud::new(
        (0..100)
            .map(|_| [rng.normal(), rng.normal(), rng.normal()])
            .collect(),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.xyz");
    io::write_cloud(&path, &cloud, CloudFormat::Xyz).unwrap();
    assert_eq!(io::read_cloud(&path).unwrap(), cloud);
}

#[test]
fn weights_file_round_trip_and_validation() {
    let cfg = ModelConfig::default();
    let store = WeightStore::init(&cfg, 7).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.pwt");
    io::write_weights(&path, &store).unwrap();
    assert_eq!(io::load_weights(&path, &cfg).unwrap(), store);

    let mut missing = store.clone();
    missing.remove("decoder.0.self_attn.k.bias");
    io::write_weights(&path, &missing).unwrap();
    let err = io::load_weights(&path, &cfg).unwrap_err().to_string();
    assert!(err.contains("decoder.0.self_attn.k.bias"), "{err}");

    let other = ModelConfig {
        hidden: 32,
        ..ModelConfig::default()
    };
    io::write_weights(&path, &store).unwrap();
    let err = io::load_weights(&path, &other).unwrap_err().to_string();
    assert!(err.contains("shape"), "{err}");
}

#[test]
fn missing_file_error_names_path() {
    let err = io::read_cloud("/nonexistent/dir/cloud.xyz")
        .unwrap_err()
        .to_string();
    assert!(err.contains("/nonexistent/dir/cloud.xyz"), "{err}");
}
