//! The theory pipeline: closed form against Monte Carlo, plus the ROC
//! traversal table.

use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::{fit_curves, FitOptions};
use crate::error::{Error, Result};
use crate::fmt::{format_sig, parse_f64, RESULT_DIGITS};
use crate::theory::{accuracy_gap, monte_carlo_gap, roc_traverse, subpop_accuracy, PopulationSpec, RocPoint, ScoreModel};

use super::config::TheoryOptions;
use super::{write_atomic, write_with};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Json,
}

impl FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "json" => Ok(TableFormat::Json),
            other => Err(Error::Config(format!("unknown format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheorySummary {
    pub population: PopulationSpec,
    pub tpr: f64,
    pub tnr: f64,
    pub closed_form_gap: f64,
    pub acc_z1: f64,
    pub acc_z0: f64,
    pub mc_gap: f64,
    pub mc_se: f64,
    pub mc_samples: u64,
    /// "agree" when the Monte Carlo estimate lies within 3 standard errors.
    pub verdict: String,
    pub roc_score: ScoreModel,
    pub roc_points: usize,
    pub roc_curvature: f64,
    pub roc_curvature_se: f64,
}

pub const ROC_HEADER: [&str; 6] = ["threshold", "tnr", "tpr", "maj_acc", "min_acc", "gap"];

pub fn write_roc_csv<W: Write>(points: &[RocPoint], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(ROC_HEADER)?;
    for p in points {
        out.write_record([p.threshold, p.tnr, p.tpr, p.maj_acc, p.min_acc, p.gap].map(|x| format_sig(x, RESULT_DIGITS)))?;
    }
    out.flush().map_err(|e| Error::io("roc.csv", e))?;
    Ok(())
}

pub fn read_roc_csv<R: Read>(r: R) -> Result<Vec<RocPoint>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let v: Vec<f64> = rec
            .iter()
            .map(|s| parse_f64(s).ok_or_else(|| Error::parse("roc.csv", s.to_string())))
            .collect::<Result<_>>()?;
        if v.len() != 6 {
            return Err(Error::parse("roc.csv", "expected 6 columns"));
        }
        out.push(RocPoint { threshold: v[0], tnr: v[1], tpr: v[2], maj_acc: v[3], min_acc: v[4], gap: v[5] });
    }
    Ok(out)
}

/// Computes the summary and ROC table; writes `roc.csv` or `roc.json` and
/// `theory.json` under `out`.
pub fn run_theory(opts: &TheoryOptions, seed: u64, format: TableFormat, out: &Path) -> Result<(TheorySummary, Vec<RocPoint>)> {
    let pop = PopulationSpec::new(opts.p_y1, opts.pi1, opts.pi0)?;
    let gap = accuracy_gap(&pop, opts.tpr, opts.tnr)?;
    let (score, threshold) = ScoreModel::realizing(opts.tpr, opts.tnr)?;
    let mc = monte_carlo_gap(&pop, &score, threshold, opts.n_samples, seed)?;
    let roc_score = ScoreModel { mu0: opts.mu0, mu1: opts.mu1, s0: opts.s0, s1: opts.s1 };
    let roc = roc_traverse(&pop, &roc_score, opts.n_thresholds)?;
    let pts: Vec<(f64, f64)> = roc.iter().map(|p| (p.maj_acc, p.min_acc)).collect();
    let fit = fit_curves(&pts, &FitOptions { spline: false, ..FitOptions::default() })?;
    let summary = TheorySummary {
        population: pop,
        tpr: opts.tpr,
        tnr: opts.tnr,
        closed_form_gap: gap,
        acc_z1: subpop_accuracy(&pop, opts.tpr, opts.tnr, 1)?,
        acc_z0: subpop_accuracy(&pop, opts.tpr, opts.tnr, 0)?,
        mc_gap: mc.gap,
        mc_se: mc.se,
        mc_samples: opts.n_samples,
        verdict: if (mc.gap - gap).abs() <= 3.0 * mc.se { "agree" } else { "disagree" }.into(),
        roc_score,
        roc_points: roc.len(),
        roc_curvature: fit.curvature,
        roc_curvature_se: fit.curvature_se,
    };
    match format {
        TableFormat::Csv => write_with(&out.join("roc.csv"), |b| write_roc_csv(&roc, b))?,
        TableFormat::Json => write_atomic(&out.join("roc.json"), crate::fmt::to_json_sig(&roc)?.as_bytes())?,
    }
    write_atomic(&out.join("theory.json"), crate::fmt::to_json_sig(&summary)?.as_bytes())?;
    Ok((summary, roc))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roc_table_round_trips() {
        let pop = PopulationSpec::new(0.5, 0.9, 0.3).unwrap();
        let score = ScoreModel { mu0: -1.0, mu1: 1.0, s0: 1.0, s1: 1.0 };
        let roc = roc_traverse(&pop, &score, 11).unwrap();
        let mut a = Vec::new();
        write_roc_csv(&roc, &mut a).unwrap();
        let mut b = Vec::new();
        write_roc_csv(&read_roc_csv(a.as_slice()).unwrap(), &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pipeline_writes_both_files() {
        let dir = tempfile::tempdir().unwrap();
        let opts = TheoryOptions { n_samples: 200_000, ..TheoryOptions::default() };
        let (s, roc) = run_theory(&opts, 1, TableFormat::Json, dir.path()).unwrap();
        assert!((s.closed_form_gap - 0.125).abs() < 1e-12);
        assert_eq!(s.roc_points, roc.len());
        assert!(dir.path().join("roc.json").exists() && dir.path().join("theory.json").exists());
    }
}
