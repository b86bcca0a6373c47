//! Curvature of the moon shape as the spurious block grows relative to the
//! core block. Uses a reduced grid; pass `full` for the default one.

use moonshape::harness::{run_spurious_series, ExperimentConfig, GridSpec, Knob};
use moonshape::trainer::BatchSize;

fn main() -> moonshape::Result<()> {
    let out = std::env::temp_dir().join("moonshape-series");
    let mut cfg = ExperimentConfig::default().with_out(&out);
    if std::env::args().nth(1).as_deref() != Some("full") {
        cfg.grid = GridSpec {
            learning_rates: vec![1e-4, 1e-3, 3e-3],
            l2s: vec![0.0],
            batch_sizes: vec![BatchSize::Rows(16), BatchSize::Rows(64)],
            snapshot_epochs: vec![1, 5, 10],
            seeds: vec![0, 1],
        };
    }
    let s = run_spurious_series(&cfg, Knob::Sdr, &[0.1, 0.3, 0.5], 4)?;
    for ((v, c), se) in s.values.iter().zip(&s.curvature).zip(&s.curvature_se) {
        println!("sdr {v:.1}: beta2 = {c:8.2} ± {se:.2}");
    }
    println!("non-decreasing |beta2| pairs: {}", s.nondecreasing_pairs);
    println!("artifacts in {}", out.display());
    Ok(())
}
