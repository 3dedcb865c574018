//! Selective SSM scan: the sequential recurrence against the chunked
//! associative scan, on random parameters.
//!
//! cargo run --release --example scan

use std::time::Instant;

use ppcmt::nn::ssm::{max_relative_diff, ssm_scan, ScanMode, SsmParams, SCAN_CHUNK};

fn main() -> ppcmt::Result<()> {
    println!(
        "chunk {SCAN_CHUNK}, threads {}",
        rayon::current_num_threads()
    );
    for len in [16, 256, 4096, 16384] {
        let (params, x) = SsmParams::random(len, 64, 16, len as u64);
        let t = Instant::now();
        let seq = ssm_scan(&params, &x, ScanMode::Sequential)?;
        let seq_ms = t.elapsed().as_secs_f64() * 1e3;
        let t = Instant::now();
        let par = ssm_scan(&params, &x, ScanMode::Parallel)?;
        let par_ms = t.elapsed().as_secs_f64() * 1e3;
        println!(
            "L={len:>5}  sequential {seq_ms:>8.2} ms  parallel {par_ms:>8.2} ms  max rel diff {:.2e}",
            max_relative_diff(&seq, &par)
        );
    }
    Ok(())
}
