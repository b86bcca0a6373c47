//! Least squares by Householder QR.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub beta: Vec<f64>,
    /// Classical standard errors, σ̂²·(XᵀX)⁻¹ with σ̂² = RSS / (n − p).
    /// NaN when n = p.
    pub se: Vec<f64>,
    pub rss: f64,
    pub tss: f64,
    pub r2: f64,
}

/// R² guarded against zero-variance targets and clamped to [0, 1].
pub fn r_squared(rss: f64, tss: f64) -> f64 {
    if tss <= 0.0 {
        if rss <= 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (1.0 - rss / tss).clamp(0.0, 1.0)
    }
}

/// Solves min ‖Xβ − y‖² where `columns` holds the columns of X.
pub fn least_squares(columns: &[Vec<f64>], y: &[f64]) -> Result<OlsFit> {
    let p = columns.len();
    let n = y.len();
    if n < p || p == 0 {
        return Err(Error::InsufficientPoints { need: p.max(1), got: n });
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let mut a: Vec<Vec<f64>> = columns.to_vec();
    for col in &a {
        if col.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: col.len() });
        }
        if let Some(i) = col.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
    }
    let mut qty = y.to_vec();
    let mut rdiag = vec![0.0; p];
    for k in 0..p {
        let norm = a[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = columns[k].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-10 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::RankDeficient(format!("column {k} is collinear with earlier columns")));
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        let reflect = |col: &mut [f64]| {
            let s: f64 = v.iter().zip(col.iter()).map(|(a, b)| a * b).sum::<f64>() * 2.0 / vnorm2;
            for (c, vi) in col.iter_mut().zip(&v) {
                *c -= s * vi;
            }
        };
        for col in a.iter_mut().skip(k) {
            reflect(&mut col[k..]);
        }
        reflect(&mut qty[k..]);
        rdiag[k] = alpha;
        a[k][k] = alpha;
    }
    // Back substitution R β = (Qᵀy)[..p]; R[i][j] = a[j][i].
    let mut beta = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|j| a[j][i] * beta[j]).sum();
        beta[i] = (qty[i] - s) / rdiag[i];
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let rss: f64 = (0..n)
        .map(|i| {
            let fit: f64 = (0..p).map(|j| columns[j][i] * beta[j]).sum();
            (y[i] - fit).powi(2)
        })
        .sum();
    // (RᵀR)⁻¹ diagonal via R⁻¹.
    let mut rinv = vec![vec![0.0; p]; p];
    for j in 0..p {
        rinv[j][j] = 1.0 / rdiag[j];
        for i in (0..j).rev() {
            let s: f64 = (i + 1..=j).map(|m| a[m][i] * rinv[m][j]).sum();
            rinv[i][j] = -s / rdiag[i];
        }
    }
    let sigma2 = if n > p { rss / (n - p) as f64 } else { f64::NAN };
    let se = (0..p)
        .map(|i| (sigma2 * (i..p).map(|j| rinv[i][j] * rinv[i][j]).sum::<f64>()).sqrt())
        .collect();
    Ok(OlsFit { beta, se, rss, tss, r2: r_squared(rss, tss) })
}

/// y ≈ β0 + β1·x.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<OlsFit> {
    least_squares(&[vec![1.0; x.len()], x.to_vec()], y)
}

/// y ≈ β0 + β1·x + β2·x².
pub fn fit_quadratic(x: &[f64], y: &[f64]) -> Result<OlsFit> {
    let sq = x.iter().map(|v| v * v).collect();
    least_squares(&[vec![1.0; x.len()], x.to_vec(), sq], y)
}
