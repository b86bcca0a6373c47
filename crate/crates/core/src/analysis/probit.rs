//! Probit transform with clamping away from 0 and 1.

use crate::normal;

pub const DEFAULT_EPS: f64 = 1e-3;

/// Φ⁻¹(p) after clamping p to [eps, 1 − eps]. The flag reports whether the
/// input was moved.
pub fn probit_clamped(p: f64, eps: f64) -> (f64, bool) {
    let q = p.clamp(eps, 1.0 - eps);
    (normal::inverse_cdf(q), q != p)
}

pub fn probit(p: f64, eps: f64) -> f64 {
    probit_clamped(p, eps).0
}

/// Transforms a slice and counts clamping events.
pub fn probit_all(ps: &[f64], eps: f64) -> (Vec<f64>, usize) {
    let mut clamped = 0;
    let out = ps
        .iter()
        .map(|&p| {
            let (v, c) = probit_clamped(p, eps);
            clamped += usize::from(c);
            v
        })
        .collect();
    (out, clamped)
}
