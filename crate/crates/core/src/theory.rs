//! Closed-form accuracy gap between the two values of a binary spurious
//! attribute Z, the per-group accuracies it comes from, a Monte Carlo check,
//! and the analytic (majority, minority) curve traced by sweeping a threshold
//! along an ROC curve.
//!
//! With P(Y=1) = p, P(Z=1|Y=1) = π1, P(Z=1|Y=0) = π0 and q = P(Z=1):
//!
//! ```text
//! acc(Z=z) = TPR·P(Y=1|Z=z) + TNR·P(Y=0|Z=z)
//! |acc(Z=1) − acc(Z=0)| = p(1−p) / (q(1−q)) · |π1 − π0| · |TPR − TNR|
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub p_y1: f64,
    pub pi1: f64,
    pub pi0: f64,
}

impl PopulationSpec {
    pub fn new(p_y1: f64, pi1: f64, pi0: f64) -> Result<Self> {
        let pop = Self { p_y1, pi1, pi0 };
        pop.validate()?;
        Ok(pop)
    }

    pub fn p_z1(&self) -> f64 {
        self.pi1 * self.p_y1 + self.pi0 * (1.0 - self.p_y1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_y1 > 0.0 && self.p_y1 < 1.0) {
            return Err(Error::InvalidArgument(format!("p_y1 = {} outside (0,1)", self.p_y1)));
        }
        for (name, v) in [("pi1", self.pi1), ("pi0", self.pi0)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!("{name} = {v} outside [0,1]")));
            }
        }
        let q = self.p_z1();
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::DegeneratePopulation(q));
        }
        Ok(())
    }

    /// P(Y=1 | Z=z).
    pub fn p_y1_given_z(&self, z: u8) -> f64 {
        let q = self.p_z1();
        if z == 1 {
            self.pi1 * self.p_y1 / q
        } else {
            (1.0 - self.pi1) * self.p_y1 / (1.0 - q)
        }
    }
}

fn check_rate(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} = {v} outside [0,1]")))
    }
}

/// Closed-form |acc(Z=1) − acc(Z=0)|.
pub fn accuracy_gap(pop: &PopulationSpec, tpr: f64, tnr: f64) -> Result<f64> {
    pop.validate()?;
    check_rate("tpr", tpr)?;
    check_rate("tnr", tnr)?;
    let p = pop.p_y1;
    let q = pop.p_z1();
    Ok(p * (1.0 - p) / (q * (1.0 - q)) * (pop.pi1 - pop.pi0).abs() * (tpr - tnr).abs())
}

/// Accuracy on Z = z of a classifier with the given class-conditional rates.
pub fn subpop_accuracy(pop: &PopulationSpec, tpr: f64, tnr: f64, z: u8) -> Result<f64> {
    pop.validate()?;
    check_rate("tpr", tpr)?;
    check_rate("tnr", tnr)?;
    if z > 1 {
        return Err(Error::InvalidArgument(format!("z = {z} is not 0 or 1")));
    }
    // TPR·P + TNR·(1 − P), written so equal rates give exactly that rate.
    Ok(tnr + (tpr - tnr) * pop.p_y1_given_z(z))
}

/// Gaussian class-conditional scores X|Y=0 ~ N(mu0, s0²), X|Y=1 ~ N(mu1, s1²);
/// the classifier predicts 1 when X > t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreModel {
    pub mu0: f64,
    pub mu1: f64,
    pub s0: f64,
    pub s1: f64,
}

impl ScoreModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.s0 > 0.0 && self.s1 > 0.0) || !(self.mu0.is_finite() && self.mu1.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid score model {self:?}")));
        }
        Ok(())
    }

    pub fn tpr(&self, t: f64) -> f64 {
        normal::cdf((self.mu1 - t) / self.s1)
    }

    pub fn tnr(&self, t: f64) -> f64 {
        normal::cdf((t - self.mu0) / self.s0)
    }

    /// Threshold at which TPR = TNR.
    pub fn equal_rate_threshold(&self) -> f64 {
        (self.mu0 * self.s1 + self.mu1 * self.s0) / (self.s0 + self.s1)
    }

    /// A score model with unit-variance F0 at 0 and unit-variance F1, plus the
    /// threshold that realizes the requested rates.
    pub fn realizing(tpr: f64, tnr: f64) -> Result<(Self, f64)> {
        for (name, v) in [("tpr", tpr), ("tnr", tnr)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidArgument(format!("{name} = {v} must lie in (0,1)")));
            }
        }
        let t = normal::inverse_cdf(tnr);
        let mu1 = t + normal::inverse_cdf(tpr);
        Ok((Self { mu0: 0.0, mu1, s0: 1.0, s1: 1.0 }, t))
    }

    /// CDF of the class mixture with P(Y=1) = p.
    fn mixture_cdf(&self, p: f64, x: f64) -> f64 {
        (1.0 - p) * normal::cdf((x - self.mu0) / self.s0) + p * normal::cdf((x - self.mu1) / self.s1)
    }

    /// Quantile of the class mixture by bisection.
    pub fn mixture_quantile(&self, p: f64, level: f64) -> f64 {
        let lo0 = (self.mu0 - 40.0 * self.s0).min(self.mu1 - 40.0 * self.s1);
        let hi0 = (self.mu0 + 40.0 * self.s0).max(self.mu1 + 40.0 * self.s1);
        let (mut lo, mut hi) = (lo0, hi0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.mixture_cdf(p, mid) < level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McGap {
    pub gap: f64,
    pub se: f64,
    pub acc_z1: f64,
    pub acc_z0: f64,
    pub n_z1: u64,
    pub n_z0: u64,
}

pub const MC_MIN_SAMPLES: u64 = 10_000;
const MC_SHARDS: u64 = 16;

/// Samples Z, then Y | Z, then X | Y, classifies by `threshold`, and returns
/// the observed gap with its binomial standard error. Shards draw from
/// streams keyed by (seed, shard) and are merged by count addition, so the
/// result does not depend on the thread count.
pub fn monte_carlo_gap(
    pop: &PopulationSpec,
    score: &ScoreModel,
    threshold: f64,
    n_samples: u64,
    seed: u64,
) -> Result<McGap> {
    pop.validate()?;
    score.validate()?;
    if n_samples < MC_MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "n_samples = {n_samples} below the minimum {MC_MIN_SAMPLES}"
        )));
    }
    let q = pop.p_z1();
    let py = [pop.p_y1_given_z(0), pop.p_y1_given_z(1)];
    let counts: Vec<[u64; 4]> = (0..MC_SHARDS)
        .into_par_iter()
        .map(|shard| {
            let n = n_samples / MC_SHARDS + u64::from(shard < n_samples % MC_SHARDS);
            let mut rng = SplitMix64::from_parts(&[seed, shard]);
            // [n_z0, correct_z0, n_z1, correct_z1]
            let mut c = [0u64; 4];
            for _ in 0..n {
                let z = usize::from(rng.bernoulli(q));
                let y = rng.bernoulli(py[z]);
                let x = if y {
                    score.mu1 + score.s1 * rng.normal()
                } else {
                    score.mu0 + score.s0 * rng.normal()
                };
                c[2 * z] += 1;
                c[2 * z + 1] += u64::from((x > threshold) == y);
            }
            c
        })
        .collect();
    let mut tot = [0u64; 4];
    for c in counts {
        for (t, v) in tot.iter_mut().zip(c) {
            *t += v;
        }
    }
    for z in 0..2 {
        if tot[2 * z] == 0 {
            return Err(Error::EmptyGroupSample(z));
        }
    }
    let a0 = tot[1] as f64 / tot[0] as f64;
    let a1 = tot[3] as f64 / tot[2] as f64;
    let se = (a1 * (1.0 - a1) / tot[2] as f64 + a0 * (1.0 - a0) / tot[0] as f64).sqrt();
    Ok(McGap {
        gap: (a1 - a0).abs(),
        se,
        acc_z1: a1,
        acc_z0: a0,
        n_z1: tot[2],
        n_z0: tot[0],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub tnr: f64,
    pub tpr: f64,
    pub maj_acc: f64,
    pub min_acc: f64,
    pub gap: f64,
}

pub const QUANTILE_CLIP: (f64, f64) = (0.001, 0.999);

/// Majority is Z=1, minority Z=0. Thresholds are evenly spaced quantiles of
/// the class mixture between the clip levels; the equal-rate threshold is
/// added when it falls inside that range, so the curve contains its
/// maj = min point.
pub fn roc_traverse(pop: &PopulationSpec, score: &ScoreModel, n_thresholds: usize) -> Result<Vec<RocPoint>> {
    pop.validate()?;
    score.validate()?;
    if n_thresholds < 3 {
        return Err(Error::InvalidArgument(format!("n_thresholds = {n_thresholds} < 3")));
    }
    let (lo, hi) = QUANTILE_CLIP;
    let mut thresholds: Vec<f64> = (0..n_thresholds)
        .map(|i| score.mixture_quantile(pop.p_y1, lo + (hi - lo) * i as f64 / (n_thresholds - 1) as f64))
        .collect();
    let t_eq = score.equal_rate_threshold();
    if t_eq > thresholds[0] && t_eq < thresholds[n_thresholds - 1] {
        // A quantile within rounding of t_eq is replaced rather than joined.
        let tol = 1e-9 * (thresholds[n_thresholds - 1] - thresholds[0]);
        match thresholds.iter().position(|t| (t - t_eq).abs() <= tol) {
            Some(i) => thresholds[i] = t_eq,
            None => {
                thresholds.push(t_eq);
                thresholds.sort_by(f64::total_cmp);
            }
        }
    }
    thresholds
        .into_iter()
        .map(|t| {
            let (tpr, tnr) = if t == t_eq {
                let r = score.tnr(t);
                (r, r)
            } else {
                (score.tpr(t), score.tnr(t))
            };
            Ok(RocPoint {
                threshold: t,
                tnr,
                tpr,
                maj_acc: subpop_accuracy(pop, tpr, tnr, 1)?,
                min_acc: subpop_accuracy(pop, tpr, tnr, 0)?,
                gap: accuracy_gap(pop, tpr, tnr)?,
            })
        })
        .collect()
}
