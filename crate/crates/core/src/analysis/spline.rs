//! Penalized cubic smoothing spline (Reinsch form) with GCV selection of λ.
//!
//! Minimizes Σ (y_i − f(x_i))² + λ ∫ f″². Tied x values are merged into one
//! knot carrying their mean response and a weight equal to their count, which
//! leaves the objective unchanged up to a constant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_DISTINCT: usize = 5;
pub const GCV_GRID_LEN: usize = 25;
pub const GCV_LOG10_RANGE: (f64, f64) = (-6.0, 3.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambda {
    Fixed(f64),
    Gcv,
}

/// Natural cubic spline through (knots, fitted) with second derivatives `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineFit {
    pub lambda: f64,
    pub gcv: f64,
    /// Trace of the smoother matrix.
    pub edf: f64,
    pub knots: Vec<f64>,
    pub fitted: Vec<f64>,
    pub second_derivs: Vec<f64>,
}

impl SplineFit {
    /// Evaluates the spline; linear continuation outside the knot range.
    pub fn eval(&self, x: f64) -> f64 {
        let t = &self.knots;
        let f = &self.fitted;
        let m = &self.second_derivs;
        let n = t.len();
        if x <= t[0] {
            return f[0] + self.slope_at(0) * (x - t[0]);
        }
        if x >= t[n - 1] {
            return f[n - 1] + self.slope_at(n - 1) * (x - t[n - 1]);
        }
        let i = t.partition_point(|&k| k <= x).saturating_sub(1).min(n - 2);
        let h = t[i + 1] - t[i];
        let a = (t[i + 1] - x) / h;
        let b = (x - t[i]) / h;
        a * f[i] + b * f[i + 1] + ((a * a * a - a) * m[i] + (b * b * b - b) * m[i + 1]) * h * h / 6.0
    }

    fn slope_at(&self, k: usize) -> f64 {
        let t = &self.knots;
        let f = &self.fitted;
        let m = &self.second_derivs;
        let n = t.len();
        if k == 0 {
            let h = t[1] - t[0];
            (f[1] - f[0]) / h - h * (2.0 * m[0] + m[1]) / 6.0
        } else {
            let h = t[n - 1] - t[n - 2];
            (f[n - 1] - f[n - 2]) / h + h * (m[n - 2] + 2.0 * m[n - 1]) / 6.0
        }
    }

    pub fn range(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().unwrap())
    }
}

/// x values closer than this fraction of the x-range count as tied. Values
/// computed by different floating-point routes can differ in the last ulp,
/// and an almost-zero knot spacing wrecks the band solve.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Knots, mean y per knot, points per knot, and each input's knot index.
type Merged = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<usize>);

/// Points merged on tied x.
fn merge_ties(x: &[f64], y: &[f64]) -> Result<Merged> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    for (i, (a, b)) in x.iter().zip(y).enumerate() {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::NonFinite(i));
        }
    }
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    let span = match (idx.first(), idx.last()) {
        (Some(&a), Some(&b)) => x[b] - x[a],
        _ => 0.0,
    };
    let tol = TIE_TOLERANCE * span;
    let (mut xs, mut ys, mut ws) = (Vec::new(), Vec::<f64>::new(), Vec::<f64>::new());
    let mut knot = vec![0; x.len()];
    for i in idx {
        if xs.last().is_some_and(|&last: &f64| x[i] - last <= tol) {
            let k = ys.len() - 1;
            ys[k] += y[i];
            ws[k] += 1.0;
        } else {
            xs.push(x[i]);
            ys.push(y[i]);
            ws.push(1.0);
        }
        knot[i] = xs.len() - 1;
    }
    for (s, w) in ys.iter_mut().zip(&ws) {
        *s /= w;
    }
    Ok((xs, ys, ws, knot))
}

/// Symmetric positive-definite band matrix with half-bandwidth 2, stored as
/// diagonals d0 (main), d1, d2.
struct Penta {
    d0: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl Penta {
    /// In-place LDLᵀ factorization.
    fn factor(mut self) -> Self {
        let n = self.d0.len();
        for i in 0..n {
            if i >= 1 {
                let l1 = self.d1[i - 1];
                self.d0[i] -= l1 * l1 * self.d0[i - 1];
                if i + 1 < n {
                    self.d1[i] -= l1 * self.d2[i - 1] * self.d0[i - 1];
                }
            }
            if i >= 2 {
                let l2 = self.d2[i - 2];
                self.d0[i] -= l2 * l2 * self.d0[i - 2];
            }
            if i + 1 < n {
                self.d1[i] /= self.d0[i];
            }
            if i + 2 < n {
                self.d2[i] /= self.d0[i];
            }
        }
        self
    }

    /// Solves with the factored form.
    fn solve(&self, b: &mut [f64]) {
        let n = b.len();
        for i in 0..n {
            if i >= 1 {
                b[i] -= self.d1[i - 1] * b[i - 1];
            }
            if i >= 2 {
                b[i] -= self.d2[i - 2] * b[i - 2];
            }
        }
        for (v, d) in b.iter_mut().zip(&self.d0) {
            *v /= d;
        }
        for i in (0..n).rev() {
            if i + 1 < n {
                b[i] -= self.d1[i] * b[i + 1];
            }
            if i + 2 < n {
                b[i] -= self.d2[i] * b[i + 2];
            }
        }
    }
}

/// Per-knot quantities shared across λ values.
struct Setup {
    x: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
    h: Vec<f64>,
    /// Qᵀy, length n − 2.
    qty: Vec<f64>,
    /// Qᵀ W⁻¹ Q as diagonals.
    b: (Vec<f64>, Vec<f64>, Vec<f64>),
    /// R as diagonals (tridiagonal).
    r: (Vec<f64>, Vec<f64>),
}

impl Setup {
    fn new(x: Vec<f64>, y: Vec<f64>, w: Vec<f64>) -> Self {
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|p| p[1] - p[0]).collect();
        let m = n - 2;
        // Column j of Q (j = 0..m) has entries at rows j, j+1, j+2.
        let q = |j: usize| -> [f64; 3] { [1.0 / h[j], -1.0 / h[j] - 1.0 / h[j + 1], 1.0 / h[j + 1]] };
        let qty = (0..m)
            .map(|j| {
                let c = q(j);
                c[0] * y[j] + c[1] * y[j + 1] + c[2] * y[j + 2]
            })
            .collect();
        let mut b0 = vec![0.0; m];
        let mut b1 = vec![0.0; m.saturating_sub(1)];
        let mut b2 = vec![0.0; m.saturating_sub(2)];
        for j in 0..m {
            let cj = q(j);
            b0[j] = (0..3).map(|r| cj[r] * cj[r] / w[j + r]).sum();
            if j + 1 < m {
                let ck = q(j + 1);
                b1[j] = cj[1] * ck[0] / w[j + 1] + cj[2] * ck[1] / w[j + 2];
            }
            if j + 2 < m {
                let ck = q(j + 2);
                b2[j] = cj[2] * ck[0] / w[j + 2];
            }
        }
        let r0 = (0..m).map(|j| (h[j] + h[j + 1]) / 3.0).collect();
        let r1 = (0..m.saturating_sub(1)).map(|j| h[j + 1] / 6.0).collect();
        Self { x, y, w, h, qty, b: (b0, b1, b2), r: (r0, r1) }
    }

    fn system(&self, lambda: f64) -> Penta {
        let (b0, b1, b2) = &self.b;
        let (r0, r1) = &self.r;
        Penta {
            d0: r0.iter().zip(b0).map(|(r, b)| r + lambda * b).collect(),
            d1: r1.iter().zip(b1).map(|(r, b)| r + lambda * b).collect(),
            d2: b2.iter().map(|b| lambda * b).collect(),
        }
        .factor()
    }

    /// Fit at λ plus the trace of the smoother.
    fn fit(&self, lambda: f64) -> (Vec<f64>, Vec<f64>, f64) {
        let n = self.x.len();
        let m = n - 2;
        let sys = self.system(lambda);
        let mut gamma = self.qty.clone();
        sys.solve(&mut gamma);
        // f = y − λ W⁻¹ Q γ
        let mut qg = vec![0.0; n];
        for j in 0..m {
            let c = [1.0 / self.h[j], -1.0 / self.h[j] - 1.0 / self.h[j + 1], 1.0 / self.h[j + 1]];
            for r in 0..3 {
                qg[j + r] += c[r] * gamma[j];
            }
        }
        let fitted: Vec<f64> = (0..n).map(|i| self.y[i] - lambda * qg[i] / self.w[i]).collect();
        let mut second = vec![0.0; n];
        second[1..n - 1].copy_from_slice(&gamma);
        // tr(A) = n − λ·tr(M⁻¹ B): one banded solve per column of B.
        let (b0, b1, b2) = &self.b;
        let mut tr = 0.0;
        let mut col = vec![0.0; m];
        for j in 0..m {
            col.iter_mut().for_each(|v| *v = 0.0);
            col[j] = b0[j];
            if j >= 1 {
                col[j - 1] = b1[j - 1];
            }
            if j + 1 < m {
                col[j + 1] = b1[j];
            }
            if j >= 2 {
                col[j - 2] = b2[j - 2];
            }
            if j + 2 < m {
                col[j + 2] = b2[j];
            }
            sys.solve(&mut col);
            tr += col[j];
        }
        (fitted, second, n as f64 - lambda * tr)
    }
}

fn log_grid() -> Vec<f64> {
    let (a, b) = GCV_LOG10_RANGE;
    (0..GCV_GRID_LEN)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (GCV_GRID_LEN - 1) as f64))
        .collect()
}

/// Fits the smoothing spline to (x, y) pairs in any order.
pub fn smooth_spline(x: &[f64], y: &[f64], lambda: Lambda) -> Result<SplineFit> {
    let (xs, ys, ws, knot) = merge_ties(x, y)?;
    if xs.len() < MIN_DISTINCT {
        return Err(Error::InsufficientPoints { need: MIN_DISTINCT, got: xs.len() });
    }
    let n_total = x.len() as f64;
    let setup = Setup::new(xs, ys, ws);
    // Within-knot scatter is part of the RSS for every λ.
    let within: f64 = y.iter().zip(&knot).map(|(yi, &k)| (yi - setup.y[k]).powi(2)).sum();
    let score = |fitted: &[f64], edf: f64| -> f64 {
        let rss: f64 = within
            + fitted
                .iter()
                .zip(&setup.y)
                .zip(&setup.w)
                .map(|((f, y), w)| w * (y - f).powi(2))
                .sum::<f64>();
        n_total * rss / (n_total - edf).powi(2)
    };
    let candidates = match lambda {
        Lambda::Fixed(l) => {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidArgument(format!("lambda must be positive, got {l}")));
            }
            vec![l]
        }
        Lambda::Gcv => log_grid(),
    };
    let mut best: Option<SplineFit> = None;
    for l in candidates {
        let (fitted, second_derivs, edf) = setup.fit(l);
        let gcv = score(&fitted, edf);
        if !(gcv.is_finite() && fitted.iter().all(|f| f.is_finite())) {
            continue;
        }
        if best.as_ref().is_none_or(|b| gcv < b.gcv) {
            best = Some(SplineFit {
                lambda: l,
                gcv,
                edf,
                knots: setup.x.clone(),
                fitted,
                second_derivs,
            });
        }
    }
    best.ok_or_else(|| Error::RankDeficient("no smoothing parameter gives a finite fit".into()))
}
