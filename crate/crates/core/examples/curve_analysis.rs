//! Fits linear, probit, quadratic and smoothing-spline summaries to a noisy
//! concave point cloud, then compares it with a straight one.

use moonshape::analysis::{compare_nonlinearity, fit_curves, FitOptions};
use moonshape::rng::SplitMix64;

fn cloud(curve: f64, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = SplitMix64::new(seed);
    (0..300)
        .map(|_| {
            let m = 0.75 + 0.2 * rng.next_f64();
            let t = m - 0.85;
            (m, 0.6 + 0.8 * t - curve * t * t + 0.005 * rng.normal())
        })
        .collect()
}

fn main() -> moonshape::Result<()> {
    let opts = FitOptions::default();
    let bent = fit_curves(&cloud(20.0, 1), &opts)?;
    let flat = fit_curves(&cloud(0.0, 2), &opts)?;
    for (name, r) in [("bent", &bent), ("flat", &flat)] {
        println!(
            "{name}: linear R2 {:.4}, probit R2 {:.4}, beta2 {:.2} ± {:.2}, spline edf {:.2}",
            r.linear_fit.r2,
            r.probit_fit.r2,
            r.curvature,
            r.curvature_se,
            r.spline.as_ref().map_or(f64::NAN, |s| s.edf)
        );
        if let Some(x) = r.phase_transition {
            println!("  slope changes sign at maj = {x:.4}");
        }
    }
    let cmp = compare_nonlinearity(&bent, &flat, 0.02);
    println!("verdict: {}", serde_json::to_string(&cmp.verdict)?);
    Ok(())
}
