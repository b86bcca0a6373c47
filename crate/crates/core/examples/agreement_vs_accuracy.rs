//! Runs a correlated sweep, then compares the agreement cloud of model pairs
//! with the accuracy cloud of single models.

use moonshape::datagen::ShiftSpec;
use moonshape::harness::{run_agreement_pipeline, run_sweep_pipeline, ExperimentConfig};

fn main() -> moonshape::Result<()> {
    let out = std::env::temp_dir().join("moonshape-agreement");
    let mut cfg = ExperimentConfig::default().with_out(&out);
    cfg.shift = ShiftSpec::default().with_correlation(0.5, 0.9, 0.3);
    cfg.output.write_datasets = false;

    run_sweep_pipeline(&cfg, 4)?;
    let report = run_agreement_pipeline(&cfg, 300, 0)?;
    if let Some(g) = &report.gap {
        println!(
            "over ID in [{:.3}, {:.3}]: agreement − accuracy mean {:+.4}, max |diff| {:.4}",
            g.range[0], g.range[1], g.mean_diff, g.max_abs_diff
        );
        println!("agreement at least 0.02 above accuracy on {:.0}% of the range", 100.0 * g.frac_above);
    }
    for w in &report.warnings {
        println!("warning: {w}");
    }
    println!("see {}", out.join("agreement.svg").display());
    Ok(())
}
