//! The curve report: linear, probit and quadratic fits of minority accuracy
//! on majority accuracy, a smoothing spline, and derived curvature metrics.

use serde::{Deserialize, Serialize};

use super::ols::{fit_line, fit_quadratic};
use super::probit::{probit_all, DEFAULT_EPS};
use super::spline::{smooth_spline, Lambda, SplineFit, MIN_DISTINCT};
use crate::error::{Error, Result};

pub const MIN_POINTS: usize = 4;
pub const DEFAULT_MARGIN: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub eps: f64,
    pub lambda: Lambda,
    pub spline: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            eps: DEFAULT_EPS,
            lambda: Lambda::Gcv,
            spline: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadFit {
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub r2: f64,
    pub se_beta0: f64,
    pub se_beta1: f64,
    pub se_beta2: f64,
}

/// Choices the fits depend on, recorded next to the numbers they produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitChoices {
    pub probit_eps: f64,
    pub probit_clamped_points: usize,
    pub weighting: String,
    pub spline_lambda_rule: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveReport {
    pub n_points: usize,
    pub maj_range: [f64; 2],
    pub min_range: [f64; 2],
    pub linear_fit: LineFit,
    pub probit_fit: LineFit,
    pub quad_fit: QuadFit,
    pub curvature: f64,
    pub curvature_se: f64,
    pub phase_transition: Option<f64>,
    pub spline: Option<SplineFit>,
    pub choices: FitChoices,
}

impl CurveReport {
    /// Quadratic fit evaluated at `m`.
    pub fn quad_at(&self, m: f64) -> f64 {
        let q = &self.quad_fit;
        q.beta0 + q.beta1 * m + q.beta2 * m * m
    }

    /// Derivative of the quadratic fit at `m`.
    pub fn quad_slope_at(&self, m: f64) -> f64 {
        self.quad_fit.beta1 + 2.0 * self.quad_fit.beta2 * m
    }

    /// |β2| exceeds `k` standard errors.
    pub fn curvature_significant(&self, k: f64) -> bool {
        self.curvature.abs() > k * self.curvature_se
    }

    pub fn to_json(&self) -> Result<String> {
        crate::fmt::to_json_sig(self)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn range(v: &[f64]) -> [f64; 2] {
    v.iter().fold([f64::INFINITY, f64::NEG_INFINITY], |[lo, hi], &x| [lo.min(x), hi.max(x)])
}

/// Fits every curve summary to (maj_acc, min_acc) points.
pub fn fit_curves(points: &[(f64, f64)], opts: &FitOptions) -> Result<CurveReport> {
    if points.len() < MIN_POINTS {
        return Err(Error::InsufficientPoints { need: MIN_POINTS, got: points.len() });
    }
    let maj: Vec<f64> = points.iter().map(|p| p.0).collect();
    let min: Vec<f64> = points.iter().map(|p| p.1).collect();
    if let Some(i) = maj.iter().chain(&min).position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i % points.len()));
    }
    let maj_range = range(&maj);
    if maj_range[0] == maj_range[1] {
        return Err(Error::RankDeficient("all majority accuracies are equal".into()));
    }
    let lin = fit_line(&maj, &min)?;
    let quad = fit_quadratic(&maj, &min)?;
    let (pmaj, c1) = probit_all(&maj, opts.eps);
    let (pmin, c2) = probit_all(&min, opts.eps);
    let prob = fit_line(&pmaj, &pmin)?;

    let (b1, b2) = (quad.beta[1], quad.beta[2]);
    let phase_transition = if b2 > 0.0 {
        let m = -b1 / (2.0 * b2);
        (m > maj_range[0] && m < maj_range[1]).then_some(m)
    } else {
        None
    };

    let mut distinct = maj.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let spline = if opts.spline && distinct.len() >= MIN_DISTINCT {
        Some(smooth_spline(&maj, &min, opts.lambda)?)
    } else {
        None
    };

    Ok(CurveReport {
        n_points: points.len(),
        maj_range,
        min_range: range(&min),
        linear_fit: LineFit { slope: lin.beta[1], intercept: lin.beta[0], r2: lin.r2 },
        probit_fit: LineFit { slope: prob.beta[1], intercept: prob.beta[0], r2: prob.r2 },
        quad_fit: QuadFit {
            beta0: quad.beta[0],
            beta1: b1,
            beta2: b2,
            r2: quad.r2,
            se_beta0: quad.se[0],
            se_beta1: quad.se[1],
            se_beta2: quad.se[2],
        },
        curvature: b2,
        curvature_se: quad.se[2],
        phase_transition,
        spline,
        choices: FitChoices {
            probit_eps: opts.eps,
            probit_clamped_points: c1 + c2,
            weighting: "unweighted".into(),
            spline_lambda_rule: match opts.lambda {
                Lambda::Gcv => "gcv".into(),
                Lambda::Fixed(_) => "fixed".into(),
            },
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "a more nonlinear")]
    AMoreNonlinear,
    #[serde(rename = "b more nonlinear")]
    BMoreNonlinear,
    #[serde(rename = "comparable")]
    Comparable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// probit R² of a minus that of b.
    pub delta_probit_r2: f64,
    /// β2 of a minus β2 of b.
    pub delta_curvature: f64,
    /// |β2| of a minus |β2| of b.
    pub delta_abs_curvature: f64,
    pub margin: f64,
    pub verdict: Verdict,
}

/// Lower probit R² means more nonlinear; differences within `margin` are
/// called comparable.
pub fn compare_nonlinearity(a: &CurveReport, b: &CurveReport, margin: f64) -> Comparison {
    let delta = a.probit_fit.r2 - b.probit_fit.r2;
    let verdict = if delta < -margin {
        Verdict::AMoreNonlinear
    } else if delta > margin {
        Verdict::BMoreNonlinear
    } else {
        Verdict::Comparable
    };
    Comparison {
        delta_probit_r2: delta,
        delta_curvature: a.curvature - b.curvature,
        delta_abs_curvature: a.curvature.abs() - b.curvature.abs(),
        margin,
        verdict,
    }
}
