//! The sweep pipeline: generate, train the grid, evaluate on the OOD pool,
//! fit the curve report, write every artifact.

use std::path::Path;

use crate::analysis::{fit_curves, CurveReport, FitOptions};
use crate::datagen::{generate, Dataset, ShiftSpec, Split};
use crate::error::{Error, Result};
use crate::evaluator::{
    evaluate_all, model_mixture, read_preds_csv, read_results_csv, write_preds_csv, write_results_csv, EvalRecord,
    MixtureMode,
};
use crate::trainer::{read_models, sweep, write_models_csv, write_weights_csv, CellFailure, ModelRecord};

use super::config::ExperimentConfig;
use super::plot::{emit_plot, Overlay, PlotStyle, Scatter};
use super::{read_input, write_atomic, write_with};

#[derive(Debug, Clone)]
pub struct SweepBundle {
    pub spec: ShiftSpec,
    pub train: Dataset,
    pub id_test: Dataset,
    pub ood_test: Dataset,
    pub models: Vec<ModelRecord>,
    pub failures: Vec<CellFailure>,
    pub results: Vec<EvalRecord>,
    pub preds: Vec<Vec<i8>>,
    /// `None` when the point cloud admits no fit (e.g. every model reached
    /// the same majority accuracy); `warnings` then says why.
    pub report: Option<CurveReport>,
    pub warnings: Vec<String>,
    pub maj_group: usize,
    pub min_group: usize,
}

impl SweepBundle {
    pub fn points(&self) -> Vec<(f64, f64)> {
        maj_min_points(&self.results, self.maj_group, self.min_group)
    }
}

pub fn maj_min_points(results: &[EvalRecord], maj: usize, min: usize) -> Vec<(f64, f64)> {
    results.iter().map(|r| (r.group_acc[maj], r.group_acc[min])).collect()
}

/// Majority = largest training weight (last on ties), minority = smallest
/// (first on ties).
pub fn maj_min_groups(spec: &ShiftSpec) -> (usize, usize) {
    let r = &spec.r_tr;
    let maj = (0..r.len()).fold(0, |b, g| if r[g] >= r[b] { g } else { b });
    let min = (0..r.len()).fold(0, |b, g| if r[g] < r[b] { g } else { b });
    (maj, min)
}

pub fn fit_options(cfg: &ExperimentConfig) -> FitOptions {
    FitOptions {
        eps: cfg.analysis.eps,
        lambda: cfg.analysis.lambda,
        spline: true,
    }
}

/// Runs the sweep in memory.
pub fn run_sweep(cfg: &ExperimentConfig, jobs: usize) -> Result<SweepBundle> {
    let spec = cfg.resolved_shift()?;
    spec.validate()?;
    let train = generate(&spec, Split::Train)?;
    let id_test = generate(&spec, Split::IdTest)?;
    let ood_test = generate(&spec, Split::OodTest)?;
    let grid = cfg.grid.cells();
    let out = sweep(&train, &grid, jobs)?;
    if out.models.is_empty() {
        let first = out.failures.first().map_or(String::new(), |f| f.message.clone());
        return Err(Error::InvalidHyperParams(format!(
            "all {} grid cells failed; first failure: {first}",
            grid.len()
        )));
    }
    let (results, preds) = evaluate_all(&out.models, &ood_test, &spec.r_tr, &spec.r_ts)?;
    let (maj_group, min_group) = maj_min_groups(&spec);
    let (report, warnings) = fit_or_warn(&maj_min_points(&results, maj_group, min_group), cfg)?;
    Ok(SweepBundle {
        spec,
        train,
        id_test,
        ood_test,
        models: out.models,
        failures: out.failures,
        results,
        preds,
        report,
        warnings,
        maj_group,
        min_group,
    })
}

/// Fits the curve report, downgrading degenerate-cloud errors to a warning.
fn fit_or_warn(points: &[(f64, f64)], cfg: &ExperimentConfig) -> Result<(Option<CurveReport>, Vec<String>)> {
    match fit_curves(points, &fit_options(cfg)) {
        Ok(r) => Ok((Some(r), Vec::new())),
        Err(e @ (Error::RankDeficient(_) | Error::InsufficientPoints { .. })) => {
            Ok((None, vec![format!("no curve report: {e}")]))
        }
        Err(e) => Err(e),
    }
}

fn failures_csv(failures: &[CellFailure], buf: &mut Vec<u8>) -> Result<()> {
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(["grid_index", "model_id", "message"])?;
    for f in failures {
        w.write_record([f.grid_index.to_string(), f.hyperparams.model_id(0), f.message.clone()])?;
    }
    w.flush().map_err(|e| Error::io("failures.csv", e))?;
    Ok(())
}

/// The moon scatter with its quadratic fit, spline and the exact mixture
/// segment between the best and worst models by ID accuracy.
pub fn moon_plot(bundle: &SweepBundle, path: &Path) -> Result<()> {
    let pts = bundle.points();
    let mut overlays = Vec::new();
    if let Some(r) = &bundle.report {
        let [lo, hi] = r.maj_range;
        let xs: Vec<f64> = (0..=60).map(|i| lo + (hi - lo) * i as f64 / 60.0).collect();
        overlays.push(Overlay {
            label: "quadratic fit".into(),
            color: "crimson".into(),
            points: xs.iter().map(|&x| (x, r.quad_at(x))).collect(),
        });
        if let Some(s) = &r.spline {
            overlays.push(Overlay {
                label: format!("smoothing spline (lambda {:.3e})", s.lambda),
                color: "darkgreen".into(),
                points: xs.iter().map(|&x| (x, s.eval(x))).collect(),
            });
        }
    }
    let by_id = |i: usize| bundle.results[i].id_acc;
    let best = (0..bundle.results.len()).fold(0, |b, i| if by_id(i) > by_id(b) { i } else { b });
    let worst = (0..bundle.results.len()).fold(0, |b, i| if by_id(i) < by_id(b) { i } else { b });
    if best != worst {
        let spec = &bundle.spec;
        let seg = [0.0, 0.25, 0.5, 0.75, 1.0]
            .iter()
            .map(|&p| {
                model_mixture(
                    &bundle.models[best],
                    &bundle.models[worst],
                    p,
                    &bundle.ood_test,
                    &spec.r_tr,
                    &spec.r_ts,
                    MixtureMode::Exact,
                )
                .map(|e| (e.group_acc[bundle.maj_group], e.group_acc[bundle.min_group]))
            })
            .collect::<Result<Vec<_>>>()?;
        overlays.push(Overlay { label: "mixture of best and worst".into(), color: "darkorange".into(), points: seg });
    }
    let style = PlotStyle {
        title: format!("{} models", pts.len()),
        ..PlotStyle::default()
    };
    let scatter = Scatter { label: "models".into(), color: "steelblue".into(), points: pts };
    emit_plot(&[scatter], &overlays, &style, path)
}

/// Writes the bundle's artifacts under `dir`.
pub fn write_sweep_bundle(bundle: &SweepBundle, dir: &Path, write_datasets: bool) -> Result<()> {
    if write_datasets {
        for ds in [&bundle.train, &bundle.id_test, &bundle.ood_test] {
            write_with(&dir.join(format!("{}.csv", ds.split)), |b| ds.write_csv(b))?;
        }
    }
    write_atomic(&dir.join("spec.txt"), bundle.spec.to_kv_string().as_bytes())?;
    write_with(&dir.join("models.csv"), |b| write_models_csv(&bundle.models, b))?;
    write_with(&dir.join("weights.csv"), |b| write_weights_csv(&bundle.models, b))?;
    write_with(&dir.join("results.csv"), |b| write_results_csv(&bundle.results, b))?;
    let ids: Vec<String> = bundle.models.iter().map(|m| m.model_id.clone()).collect();
    write_with(&dir.join("preds.csv"), |b| write_preds_csv(&ids, &bundle.preds, b))?;
    write_with(&dir.join("failures.csv"), |b| failures_csv(&bundle.failures, b))?;
    if let Some(report) = &bundle.report {
        write_atomic(&dir.join("report.json"), report.to_json()?.as_bytes())?;
    }
    moon_plot(bundle, &dir.join("moon.svg"))
}

/// Runs the sweep and writes its artifacts to the configured directory.
pub fn run_sweep_pipeline(cfg: &ExperimentConfig, jobs: usize) -> Result<SweepBundle> {
    let bundle = run_sweep(cfg, jobs)?;
    write_sweep_bundle(&bundle, &cfg.output.dir, cfg.output.write_datasets)?;
    Ok(bundle)
}

/// Generates the three splits and writes them, with `spec.txt`, to the
/// configured directory.
pub fn gen_data(cfg: &ExperimentConfig) -> Result<[Dataset; 3]> {
    let spec = cfg.resolved_shift()?;
    spec.validate()?;
    let sets = [generate(&spec, Split::Train)?, generate(&spec, Split::IdTest)?, generate(&spec, Split::OodTest)?];
    let dir = &cfg.output.dir;
    for ds in &sets {
        write_with(&dir.join(format!("{}.csv", ds.split)), |b| ds.write_csv(b))?;
    }
    write_atomic(&dir.join("spec.txt"), spec.to_kv_string().as_bytes())?;
    Ok(sets)
}

/// Refits the curve report from `<out>/results.csv` and rewrites
/// `report.json`.
pub fn analyze_results(cfg: &ExperimentConfig) -> Result<CurveReport> {
    let dir = &cfg.output.dir;
    let results = read_results_csv(read_input(&dir.join("results.csv"))?.as_slice())?;
    let spec = cfg.resolved_shift()?;
    let (maj, min) = maj_min_groups(&spec);
    if let Some(r) = results.iter().find(|r| r.group_acc.len() != spec.k_groups) {
        return Err(Error::DimensionMismatch { expected: spec.k_groups, got: r.group_acc.len() });
    }
    let report = fit_curves(&maj_min_points(&results, maj, min), &fit_options(cfg))?;
    write_atomic(&dir.join("report.json"), report.to_json()?.as_bytes())?;
    Ok(report)
}

/// Rebuilds a bundle from the artifacts of an earlier sweep. Datasets are
/// regenerated from the configuration; the report is refitted.
pub fn load_bundle(cfg: &ExperimentConfig) -> Result<SweepBundle> {
    let dir = &cfg.output.dir;
    let spec = cfg.resolved_shift()?;
    spec.validate()?;
    let models = read_models(
        read_input(&dir.join("models.csv"))?.as_slice(),
        read_input(&dir.join("weights.csv"))?.as_slice(),
    )?;
    let results = read_results_csv(read_input(&dir.join("results.csv"))?.as_slice())?;
    let (_, preds) = read_preds_csv(read_input(&dir.join("preds.csv"))?.as_slice())?;
    if models.len() != results.len() || preds.len() != results.len() {
        return Err(Error::parse(
            dir.display().to_string(),
            format!("{} models, {} results, {} prediction rows", models.len(), results.len(), preds.len()),
        ));
    }
    let (maj_group, min_group) = maj_min_groups(&spec);
    let (report, warnings) = fit_or_warn(&maj_min_points(&results, maj_group, min_group), cfg)?;
    Ok(SweepBundle {
        train: generate(&spec, Split::Train)?,
        id_test: generate(&spec, Split::IdTest)?,
        ood_test: generate(&spec, Split::OodTest)?,
        spec,
        models,
        failures: Vec::new(),
        results,
        preds,
        report,
        warnings,
        maj_group,
        min_group,
    })
}

/// Redraws `<out>/moon.svg` from the artifacts on disk.
pub fn plot_results(cfg: &ExperimentConfig) -> Result<()> {
    let bundle = load_bundle(cfg)?;
    moon_plot(&bundle, &cfg.output.dir.join("moon.svg"))
}
