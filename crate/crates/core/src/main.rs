use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use moonshape::harness::{self, ExperimentConfig, Knob, TableFormat};
use moonshape::{Error, Result};

#[derive(Parser)]
#[command(name = "moonshape", version, about = "Subpopulation-shift sweeps and accuracy-on-the-line analysis")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `[output] dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed (overrides `[shift] master_seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for training and Monte Carlo.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Table format for printed summaries and the ROC table.
    #[arg(long, global = true, default_value = "csv")]
    format: TableFormat,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write the train, ID-test and OOD-test datasets.
    GenData,
    /// Train the grid, evaluate and fit the moon-shape report.
    Sweep,
    /// Refit the report from an existing results.csv.
    Analyze,
    /// One sweep per value of a spurious-strength knob.
    Series {
        #[arg(long)]
        knob: Knob,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Compare agreement-on-the-line against accuracy-on-the-line.
    Agreement {
        #[arg(long)]
        pairs: Option<usize>,
        #[arg(long)]
        pair_seed: Option<u64>,
    },
    /// Closed-form gap against Monte Carlo, plus the ROC traversal table.
    Theory,
    /// Redraw moon.svg from an existing sweep.
    Plot,
}

/// `theory` runs from built-in defaults when no file is given; every other
/// subcommand needs one.
fn load_config(c: &Common, cmd: &Cmd) -> Result<ExperimentConfig> {
    let mut cfg = match (&c.config, cmd) {
        (Some(p), _) => ExperimentConfig::load(p)?,
        (None, Cmd::Theory) => ExperimentConfig::default(),
        (None, _) => return Err(Error::Config("--config is required for this subcommand".into())),
    };
    if let Some(seed) = c.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(out) = &c.out {
        cfg = cfg.with_out(out);
    }
    if c.jobs == 0 {
        return Err(Error::Config("--jobs must be at least 1".into()));
    }
    Ok(cfg)
}

fn summary(format: TableFormat, rows: &[(String, String)]) -> String {
    match format {
        TableFormat::Csv => {
            let mut s = String::from("key,value\n");
            for (k, v) in rows {
                s.push_str(&format!("{k},{v}\n"));
            }
            s
        }
        TableFormat::Json => {
            let map: serde_json::Map<String, serde_json::Value> =
                rows.iter().map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone()))).collect();
            format!("{}\n", serde_json::Value::Object(map))
        }
    }
}

fn run(cli: Cli) -> Result<String> {
    let cfg = load_config(&cli.common, &cli.cmd)?;
    let (jobs, format) = (cli.common.jobs, cli.common.format);
    let dir = cfg.output.dir.display().to_string();
    let rows: Vec<(String, String)> = match cli.cmd {
        Cmd::GenData => {
            let sets = harness::gen_data(&cfg)?;
            let mut rows: Vec<(String, String)> = sets.iter().map(|d| (d.split.as_str().into(), d.n_rows().to_string())).collect();
            rows.push(("dir".into(), dir));
            rows
        }
        Cmd::Sweep => {
            let b = harness::run_sweep_pipeline(&cfg, jobs)?;
            for f in &b.failures {
                eprintln!("warning: grid cell {} failed: {}", f.grid_index, f.message);
            }
            for w in &b.warnings {
                eprintln!("warning: {w}");
            }
            let mut rows = vec![
                ("models".into(), b.results.len().to_string()),
                ("failures".into(), b.failures.len().to_string()),
            ];
            if let Some(r) = &b.report {
                rows.push(("curvature".into(), r.curvature.to_string()));
                rows.push(("curvature_se".into(), r.curvature_se.to_string()));
                rows.push(("probit_r2".into(), r.probit_fit.r2.to_string()));
            }
            rows.push(("dir".into(), dir));
            rows
        }
        Cmd::Analyze => {
            let r = harness::analyze_results(&cfg)?;
            vec![
                ("points".into(), r.n_points.to_string()),
                ("linear_r2".into(), r.linear_fit.r2.to_string()),
                ("probit_r2".into(), r.probit_fit.r2.to_string()),
                ("curvature".into(), r.curvature.to_string()),
                ("curvature_se".into(), r.curvature_se.to_string()),
                ("phase_transition".into(), r.phase_transition.map_or("none".into(), |x| x.to_string())),
            ]
        }
        Cmd::Series { knob, values } => {
            let s = harness::run_spurious_series(&cfg, knob, &values, jobs)?;
            let mut rows: Vec<(String, String)> = vec![("knob".into(), knob.to_string())];
            for (v, c) in s.values.iter().zip(&s.curvature) {
                rows.push((format!("curvature_at_{v}"), c.to_string()));
            }
            rows.push(("strictly_increasing".into(), s.strictly_increasing.to_string()));
            rows
        }
        Cmd::Agreement { pairs, pair_seed } => {
            let n = pairs.unwrap_or(cfg.analysis.n_pairs);
            let r = harness::run_agreement_pipeline(&cfg, n, pair_seed.unwrap_or(cfg.analysis.pair_seed))?;
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            let mut rows = vec![("models".into(), r.n_models.to_string()), ("pairs".into(), r.n_pairs.to_string())];
            if let Some(g) = &r.gap {
                rows.push(("frac_above".into(), g.frac_above.to_string()));
                rows.push(("max_abs_diff".into(), g.max_abs_diff.to_string()));
                rows.push(("agreement_above".into(), g.agreement_above.to_string()));
                rows.push(("aligned".into(), g.aligned.to_string()));
                rows.push(("extrapolated".into(), g.extrapolated.to_string()));
            }
            rows
        }
        Cmd::Theory => {
            let seed = cli.common.seed.unwrap_or(cfg.shift.master_seed);
            let (s, _) = harness::run_theory(&cfg.theory, seed, format, &cfg.output.dir)?;
            vec![
                ("closed_form_gap".into(), s.closed_form_gap.to_string()),
                ("mc_gap".into(), s.mc_gap.to_string()),
                ("mc_se".into(), s.mc_se.to_string()),
                ("verdict".into(), s.verdict.clone()),
                ("acc_z1".into(), s.acc_z1.to_string()),
                ("acc_z0".into(), s.acc_z0.to_string()),
                ("roc_curvature".into(), s.roc_curvature.to_string()),
            ]
        }
        Cmd::Plot => {
            harness::plot_results(&cfg)?;
            vec![("plot".into(), cfg.output.dir.join("moon.svg").display().to_string())]
        }
    };
    Ok(summary(format, &rows))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let jobs = cli.common.jobs.max(1);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build();
    let result = match pool {
        Ok(p) => p.install(|| run(cli)),
        Err(e) => Err(Error::Config(e.to_string())),
    };
    match result {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
