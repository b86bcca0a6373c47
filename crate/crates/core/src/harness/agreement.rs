//! Agreement-versus-accuracy comparison on a finished sweep.
//!
//! Each model contributes one accuracy point (ID accuracy, OOD accuracy) and
//! each sampled pair one agreement point (ID agreement, OOD agreement), where
//! the ID and OOD values reweight per-group rates by `r_tr` and `r_ts`.
//! Smoothing splines through both clouds are compared over their common
//! x-range.

use serde::{Deserialize, Serialize};

use crate::analysis::{smooth_spline, SplineFit};
use crate::datagen::{generate, Split};
use crate::error::{Error, Result};
use crate::evaluator::{
    agreement_of, group_agreement, read_preds_csv, read_results_csv, sample_pairs, write_agreement_csv,
    AgreementRecord,
};
use crate::fmt::{format_sig, RESULT_DIGITS};
use crate::rng::derive_seed;

use super::config::ExperimentConfig;
use super::plot::{emit_plot, Overlay, PlotStyle, Scatter};
use super::{read_input, write_atomic, write_with};

/// Grid resolution for comparing the two splines.
pub const COMPARE_POINTS: usize = 201;
/// Agreement counts as above accuracy by at least this much...
pub const ABOVE_MARGIN: f64 = 0.02;
/// ...over at least this fraction of the common range.
pub const ABOVE_FRACTION: f64 = 0.8;
/// Splines within this distance everywhere count as aligned.
pub const ALIGN_TOLERANCE: f64 = 0.03;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAgreement {
    pub model_a: String,
    pub model_b: String,
    pub agreement: f64,
    pub id_agreement: f64,
    pub ood_agreement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineGap {
    /// The common x-range of both clouds, or their hull when they do not
    /// overlap (then `extrapolated` is set and the splines continue
    /// linearly past their knots).
    pub range: [f64; 2],
    pub extrapolated: bool,
    /// Fraction of the common range where agreement ≥ accuracy + 0.02.
    pub frac_above: f64,
    pub max_abs_diff: f64,
    pub mean_diff: f64,
    pub agreement_above: bool,
    pub aligned: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub n_models: usize,
    pub n_pairs: usize,
    pub pair_seed: u64,
    pub accuracy_spline: Option<SplineFit>,
    pub agreement_spline: Option<SplineFit>,
    pub gap: Option<SplineGap>,
    pub warnings: Vec<String>,
}

impl AgreementReport {
    pub fn to_json(&self) -> Result<String> {
        crate::fmt::to_json_sig(self)
    }
}

/// Compares `upper − lower` on an even grid over the common x-range.
pub fn spline_gap(upper: &SplineFit, lower: &SplineFit) -> Option<SplineGap> {
    let (a0, a1) = upper.range();
    let (b0, b1) = lower.range();
    let (mut lo, mut hi) = (a0.max(b0), a1.min(b1));
    let extrapolated = hi <= lo;
    if extrapolated {
        (lo, hi) = (a0.min(b0), a1.max(b1));
    }
    if hi <= lo {
        return None;
    }
    let diffs: Vec<f64> = (0..COMPARE_POINTS)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (COMPARE_POINTS - 1) as f64;
            upper.eval(x) - lower.eval(x)
        })
        .collect();
    let n = diffs.len() as f64;
    let frac_above = diffs.iter().filter(|&&d| d >= ABOVE_MARGIN).count() as f64 / n;
    let max_abs_diff = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    Some(SplineGap {
        range: [lo, hi],
        extrapolated,
        frac_above,
        max_abs_diff,
        mean_diff: diffs.iter().sum::<f64>() / n,
        agreement_above: frac_above >= ABOVE_FRACTION,
        aligned: max_abs_diff <= ALIGN_TOLERANCE,
    })
}

fn curves_csv(pairs: &[PairAgreement], buf: &mut Vec<u8>) -> Result<()> {
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(["model_a", "model_b", "agreement", "id_agreement", "ood_agreement"])?;
    let f = |x: f64| format_sig(x, RESULT_DIGITS);
    for p in pairs {
        w.write_record([p.model_a.clone(), p.model_b.clone(), f(p.agreement), f(p.id_agreement), f(p.ood_agreement)])?;
    }
    w.flush().map_err(|e| Error::io("agreement_curves.csv", e))?;
    Ok(())
}

/// Reads `results.csv` and `preds.csv` from the configured output directory,
/// samples model pairs and writes agreement.csv, agreement_curves.csv,
/// agreement.json and agreement.svg next to them.
pub fn run_agreement_pipeline(cfg: &ExperimentConfig, n_pairs: usize, pair_seed: u64) -> Result<AgreementReport> {
    let dir = &cfg.output.dir;
    let results = read_results_csv(read_input(&dir.join("results.csv"))?.as_slice())?;
    let (ids, preds) = read_preds_csv(read_input(&dir.join("preds.csv"))?.as_slice())?;
    if ids.len() != results.len() || ids.iter().zip(&results).any(|(a, r)| *a != r.model_id) {
        return Err(Error::parse("preds.csv", "model ids do not match results.csv"));
    }
    let spec = cfg.resolved_shift()?;
    let pool = generate(&spec, Split::OodTest)?;
    if let Some(p) = preds.iter().find(|p| p.len() != pool.n_rows()) {
        return Err(Error::DimensionMismatch { expected: pool.n_rows(), got: p.len() });
    }

    let seed = derive_seed(&[spec.master_seed, pair_seed]);
    let pairs = sample_pairs(ids.len(), n_pairs, seed)?;
    let mix = |r: &[f64], g: &[f64]| -> f64 { r.iter().zip(g).map(|(w, a)| w * a).sum() };
    let mut records = Vec::with_capacity(pairs.len());
    let mut curves = Vec::with_capacity(pairs.len());
    for &(i, j) in &pairs {
        let ga = group_agreement(&preds[i], &preds[j], &pool)?;
        let agreement = agreement_of(&preds[i], &preds[j])?;
        records.push(AgreementRecord { model_a: ids[i].clone(), model_b: ids[j].clone(), agreement });
        curves.push(PairAgreement {
            model_a: ids[i].clone(),
            model_b: ids[j].clone(),
            agreement,
            id_agreement: mix(&spec.r_tr, &ga),
            ood_agreement: mix(&spec.r_ts, &ga),
        });
    }

    let acc_x: Vec<f64> = results.iter().map(|r| r.id_acc).collect();
    let acc_y: Vec<f64> = results.iter().map(|r| r.ood_acc).collect();
    let agr_x: Vec<f64> = curves.iter().map(|c| c.id_agreement).collect();
    let agr_y: Vec<f64> = curves.iter().map(|c| c.ood_agreement).collect();
    let mut warnings = Vec::new();
    let fit = |x: &[f64], y: &[f64], what: &str, warnings: &mut Vec<String>| -> Result<Option<SplineFit>> {
        match smooth_spline(x, y, cfg.analysis.lambda) {
            Ok(s) => Ok(Some(s)),
            Err(Error::InsufficientPoints { need, got }) => {
                warnings.push(format!("{what}: {got} distinct x values, need {need}; no spline fitted"));
                Ok(None)
            }
            Err(e) => Err(e),
        }
    };
    let accuracy_spline = fit(&acc_x, &acc_y, "accuracy", &mut warnings)?;
    let agreement_spline = fit(&agr_x, &agr_y, "agreement", &mut warnings)?;
    let gap = match (&agreement_spline, &accuracy_spline) {
        (Some(a), Some(b)) => spline_gap(a, b),
        _ => None,
    };
    let report = AgreementReport {
        n_models: ids.len(),
        n_pairs: pairs.len(),
        pair_seed,
        accuracy_spline,
        agreement_spline,
        gap,
        warnings,
    };

    write_with(&dir.join("agreement.csv"), |b| write_agreement_csv(&records, b))?;
    write_with(&dir.join("agreement_curves.csv"), |b| curves_csv(&curves, b))?;
    write_atomic(&dir.join("agreement.json"), report.to_json()?.as_bytes())?;

    let line = |s: &Option<SplineFit>, label: &str, color: &str| -> Option<Overlay> {
        s.as_ref().map(|s| {
            let (lo, hi) = s.range();
            Overlay {
                label: label.into(),
                color: color.into(),
                points: (0..=60).map(|i| lo + (hi - lo) * i as f64 / 60.0).map(|x| (x, s.eval(x))).collect(),
            }
        })
    };
    let overlays: Vec<Overlay> = [
        line(&report.accuracy_spline, "accuracy spline", "navy"),
        line(&report.agreement_spline, "agreement spline", "darkorange"),
    ]
    .into_iter()
    .flatten()
    .collect();
    let scatters = [
        Scatter { label: "accuracy".into(), color: "steelblue".into(), points: acc_x.into_iter().zip(acc_y).collect() },
        Scatter { label: "agreement".into(), color: "orange".into(), points: agr_x.into_iter().zip(agr_y).collect() },
    ];
    let style = PlotStyle { x_label: "ID".into(), y_label: "OOD".into(), ..PlotStyle::default() };
    emit_plot(&scatters, &overlays, &style, &dir.join("agreement.svg"))?;
    Ok(report)
}
