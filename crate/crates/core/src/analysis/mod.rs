//! Curve analysis of (majority, minority) accuracy clouds.

pub mod ols;
pub mod probit;
pub mod report;
pub mod spline;

pub use ols::{fit_line, fit_quadratic, least_squares, OlsFit};
pub use probit::{probit, probit_all, DEFAULT_EPS};
pub use report::{compare_nonlinearity, fit_curves, Comparison, CurveReport, FitOptions, Verdict};
pub use spline::{smooth_spline, Lambda, SplineFit};
