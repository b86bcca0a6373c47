//! One sweep per value of a spurious-strength knob, all sharing seeds.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::CurveReport;
use crate::datagen::{mixture_table, spec_from_table, round_half_up, FeatureParams};
use crate::error::{Error, Result};
use crate::fmt::format_sig;

use super::config::{ExperimentConfig, TableInputs};
use super::sweep::{run_sweep, write_sweep_bundle};
use super::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Knob {
    /// d_spu / d_core with d_core held fixed.
    Sdr,
    /// Training share of the majority group.
    PMaj,
    /// Position between the independent and the maximally correlated table.
    CorrelationLevel,
}

impl fmt::Display for Knob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Knob::Sdr => "sdr",
            Knob::PMaj => "p_maj",
            Knob::CorrelationLevel => "correlation_level",
        })
    }
}

impl FromStr for Knob {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sdr" => Ok(Knob::Sdr),
            "p_maj" => Ok(Knob::PMaj),
            "correlation_level" => Ok(Knob::CorrelationLevel),
            other => Err(Error::Config(format!("unknown knob `{other}`"))),
        }
    }
}

/// The configuration for one knob value.
pub fn apply_knob(base: &ExperimentConfig, knob: Knob, value: f64) -> Result<ExperimentConfig> {
    let mut cfg = base.clone();
    match knob {
        Knob::Sdr => {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::Config(format!("sdr must be non-negative, got {value}")));
            }
            cfg.shift = cfg.resolved_shift()?;
            cfg.table = None;
            cfg.shift.d_spu = round_half_up(value * cfg.shift.d_core as f64) as usize;
        }
        Knob::PMaj => {
            cfg.table = None;
            cfg.shift = cfg.shift.with_p_maj(value);
        }
        Knob::CorrelationLevel => {
            let s = &cfg.shift;
            let inputs = cfg.table.unwrap_or(TableInputs {
                total: s.n_train as u64,
                class_balance: s.p_y1,
                attr_balance: 0.6,
                correlation_level: value,
            });
            let table = mixture_table(inputs.total, inputs.class_balance, inputs.attr_balance, value)?;
            let features = FeatureParams { d_core: s.d_core, d_spu: s.d_spu, sigma_core: s.sigma_core, sigma_spu: s.sigma_spu };
            cfg.shift = spec_from_table(&table, features, s)?;
            cfg.table = None;
        }
    }
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesReport {
    pub knob: Knob,
    pub values: Vec<f64>,
    pub curvature: Vec<f64>,
    pub curvature_se: Vec<f64>,
    pub curvature_abs: Vec<f64>,
    pub probit_r2: Vec<f64>,
    /// Adjacent pairs with |β2| not decreasing, out of `values.len() − 1`.
    pub nondecreasing_pairs: usize,
    pub strictly_increasing: bool,
    pub reports: Vec<CurveReport>,
}

impl SeriesReport {
    pub fn from_reports(knob: Knob, values: Vec<f64>, reports: Vec<CurveReport>) -> Self {
        let curvature: Vec<f64> = reports.iter().map(|r| r.curvature).collect();
        let abs: Vec<f64> = curvature.iter().map(|c| c.abs()).collect();
        Self {
            knob,
            values,
            curvature_se: reports.iter().map(|r| r.curvature_se).collect(),
            probit_r2: reports.iter().map(|r| r.probit_fit.r2).collect(),
            nondecreasing_pairs: abs.windows(2).filter(|w| w[1] >= w[0]).count(),
            strictly_increasing: abs.windows(2).all(|w| w[1] > w[0]),
            curvature_abs: abs,
            curvature,
            reports,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        crate::fmt::to_json_sig(self)
    }
}

/// Runs one sweep per value. Each value's results, report and plot go to
/// `<out>/<knob>_<value>/`; the summary goes to `<out>/series.json`.
pub fn run_spurious_series(base: &ExperimentConfig, knob: Knob, values: &[f64], jobs: usize) -> Result<SeriesReport> {
    if values.is_empty() {
        return Err(Error::Config("series needs at least one value".into()));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!("series values must be strictly ascending: {values:?}")));
    }
    let mut reports = Vec::with_capacity(values.len());
    for &v in values {
        let cfg = apply_knob(base, knob, v)?;
        let bundle = run_sweep(&cfg, jobs)?;
        let dir = base.output.dir.join(format!("{knob}_{}", format_sig(v, 6)));
        write_sweep_bundle(&bundle, &dir, false)?;
        let report = bundle.report.ok_or_else(|| {
            Error::RankDeficient(format!("{knob} = {v}: {}", bundle.warnings.join("; ")))
        })?;
        reports.push(report);
    }
    let series = SeriesReport::from_reports(knob, values.to_vec(), reports);
    write_atomic(&base.output.dir.join("series.json"), series.to_json()?.as_bytes())?;
    Ok(series)
}
