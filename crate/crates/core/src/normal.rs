//! Standard normal CDF and its inverse, implemented without platform special
//! functions so every build computes identical values.
//!
//! `cdf` is Hart's double-precision rational approximation (absolute error
//! well below 1e-14). `inverse_cdf` starts from Acklam's rational
//! approximation and refines it by bisection against `cdf`.

use std::f64::consts::PI;

const SQRT_2PI: f64 = 2.506_628_274_631_000_2;

pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal cumulative distribution function Φ.
pub fn cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let ax = x.abs();
    let tail = if ax > 37.0 {
        0.0
    } else {
        let e = (-0.5 * ax * ax).exp();
        if ax < 7.071_067_811_865_47 {
            let mut num = 3.526_249_659_989_11e-2 * ax + 0.700_383_064_443_688;
            num = num * ax + 6.373_962_203_531_65;
            num = num * ax + 33.912_866_078_383;
            num = num * ax + 112.079_291_497_871;
            num = num * ax + 221.213_596_169_931;
            num = num * ax + 220.206_867_912_376;
            let mut den = 8.838_834_764_831_84e-2 * ax + 1.755_667_163_182_64;
            den = den * ax + 16.064_177_579_207;
            den = den * ax + 86.780_732_202_946_1;
            den = den * ax + 296.564_248_779_674;
            den = den * ax + 637.333_633_378_831;
            den = den * ax + 793.826_512_519_948;
            den = den * ax + 440.413_735_824_752;
            e * num / den
        } else {
            let mut cf = ax + 0.65;
            cf = ax + 4.0 / cf;
            cf = ax + 3.0 / cf;
            cf = ax + 2.0 / cf;
            cf = ax + 1.0 / cf;
            e / cf / SQRT_2PI
        }
    };
    if x > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Upper tail 1 − Φ(x), without cancellation for large x.
pub fn sf(x: f64) -> f64 {
    cdf(-x)
}

const ACKLAM_A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const ACKLAM_B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const ACKLAM_C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_671_010_229_528,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const ACKLAM_D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];

/// Acklam's approximation for p in (0, 0.5]; relative error about 1e-9.
fn acklam_lower(p: f64) -> f64 {
    if p < 0.024_25 {
        let q = (-2.0 * p.ln()).sqrt();
        let c = &ACKLAM_C;
        let d = &ACKLAM_D;
        (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        let a = &ACKLAM_A;
        let b = &ACKLAM_B;
        (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
            / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    }
}

/// Inverse of Φ. Returns ±∞ at 0 and 1 and NaN outside [0, 1].
///
/// The result is exactly antisymmetric: `inverse_cdf(p) == -inverse_cdf(1 - p)`
/// up to the rounding of `1 - p` itself.
pub fn inverse_cdf(p: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    if p == 0.5 {
        return 0.0;
    }
    let (tail, sign) = if p < 0.5 { (p, 1.0) } else { (1.0 - p, -1.0) };
    sign * refine_lower(tail, acklam_lower(tail))
}

/// Bisection refinement of x ≈ Φ⁻¹(p) for p < 0.5 (so x < 0).
fn refine_lower(p: f64, guess: f64) -> f64 {
    let mut step = 1e-6 * (1.0 + guess.abs());
    let mut lo = guess - step;
    let mut hi = (guess + step).min(0.0);
    while cdf(lo) > p {
        step *= 2.0;
        lo = guess - step;
    }
    while cdf(hi) < p && hi < 0.0 {
        step *= 2.0;
        hi = (guess + step).min(0.0);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Pick the endpoint whose CDF is closer to p.
    if (cdf(lo) - p).abs() <= (cdf(hi) - p).abs() {
        lo
    } else {
        hi
    }
}
