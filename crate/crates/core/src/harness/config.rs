//! Experiment configuration: `key = value` lines under `[section]` headers.
//!
//! ```text
//! [shift]        data-generating process (ShiftSpec keys, or table_total /
//!                class_balance / attr_balance / correlation_level to build
//!                the training table directly)
//! [grid]         learning_rates, l2, batch_sizes, snapshot_epochs, seeds
//! [analysis]     eps, lambda (gcv or a number), n_pairs, pair_seed, margin
//! [output]       dir, write_datasets
//! [theory]       p_y1, pi1, pi0, tpr, tnr, mu0, mu1, s0, s1,
//!                n_thresholds, n_samples
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::analysis::{Lambda, DEFAULT_EPS};
use crate::datagen::{mixture_table, spec_from_table, FeatureParams, ShiftSpec};
use crate::error::{Error, Result};
use crate::fmt::{format_sig, parse_f64, RESULT_DIGITS};
use crate::trainer::{build_grid, BatchSize, HyperParams};

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub learning_rates: Vec<f64>,
    pub l2s: Vec<f64>,
    pub batch_sizes: Vec<BatchSize>,
    pub snapshot_epochs: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl Default for GridSpec {
    /// 5 learning rates × 5 batch sizes × 4 snapshots × 5 seeds = 500 models.
    fn default() -> Self {
        Self {
            learning_rates: vec![3e-5, 1e-4, 3e-4, 1e-3, 3e-3],
            l2s: vec![0.0],
            batch_sizes: [8, 16, 32, 64, 128].map(BatchSize::Rows).to_vec(),
            snapshot_epochs: vec![1, 5, 10, 25],
            seeds: (0..5).collect(),
        }
    }
}

impl GridSpec {
    pub fn cells(&self) -> Vec<HyperParams> {
        build_grid(&self.learning_rates, &self.l2s, &self.batch_sizes, &self.snapshot_epochs, &self.seeds)
    }

    pub fn n_snapshots(&self) -> usize {
        self.learning_rates.len() * self.l2s.len() * self.batch_sizes.len() * self.seeds.len() * self.snapshot_epochs.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub eps: f64,
    pub lambda: Lambda,
    pub n_pairs: usize,
    pub pair_seed: u64,
    pub margin: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            eps: DEFAULT_EPS,
            lambda: Lambda::Gcv,
            n_pairs: 500,
            pair_seed: 0,
            margin: crate::analysis::report::DEFAULT_MARGIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputOptions {
    pub dir: PathBuf,
    pub write_datasets: bool,
}

impl Default for OutputOptions {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            write_datasets: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryOptions {
    pub p_y1: f64,
    pub pi1: f64,
    pub pi0: f64,
    pub tpr: f64,
    pub tnr: f64,
    pub mu0: f64,
    pub mu1: f64,
    pub s0: f64,
    pub s1: f64,
    pub n_thresholds: usize,
    pub n_samples: u64,
}

impl Default for TheoryOptions {
    fn default() -> Self {
        Self {
            p_y1: 0.5,
            pi1: 0.9,
            pi0: 0.3,
            tpr: 0.9,
            tnr: 0.7,
            mu0: -1.0,
            mu1: 1.0,
            s0: 1.0,
            s1: 1.0,
            n_thresholds: 101,
            n_samples: 1_000_000,
        }
    }
}

/// Training-table inputs given in `[shift]` in place of π1 / π0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableInputs {
    pub total: u64,
    pub class_balance: f64,
    pub attr_balance: f64,
    pub correlation_level: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentConfig {
    pub shift: ShiftSpec,
    pub table: Option<TableInputs>,
    pub grid: GridSpec,
    pub analysis: AnalysisOptions,
    pub output: OutputOptions,
    pub theory: TheoryOptions,
}

const TABLE_KEYS: [&str; 4] = ["table_total", "class_balance", "attr_balance", "correlation_level"];

fn cfg_err(section: &str, key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("[{section}] {key}: {msg}"))
}

fn num(section: &str, key: &str, v: &str) -> Result<f64> {
    parse_f64(v).ok_or_else(|| cfg_err(section, key, format!("`{v}` is not a number")))
}

fn int<T: std::str::FromStr>(section: &str, key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| cfg_err(section, key, format!("`{v}` is not a non-negative integer")))
}

fn list<T>(section: &str, key: &str, v: &str, f: impl Fn(&str, &str, &str) -> Result<T>) -> Result<Vec<T>> {
    let items: Vec<T> = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| f(section, key, s))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(cfg_err(section, key, "empty list"));
    }
    Ok(items)
}

fn boolean(section: &str, key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(cfg_err(section, key, format!("`{other}` is not a boolean"))),
    }
}

/// Splits the text into sections of key/value maps.
fn sections(text: &str) -> Result<BTreeMap<String, BTreeMap<String, String>>> {
    let mut out: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim().to_string();
            if !["shift", "grid", "analysis", "output", "theory"].contains(&name.as_str()) {
                return Err(Error::Config(format!("line {}: unknown section [{name}]", lineno + 1)));
            }
            out.entry(name.clone()).or_default();
            current = Some(name);
            continue;
        }
        let section = current
            .as_ref()
            .ok_or_else(|| Error::Config(format!("line {}: key outside any section", lineno + 1)))?;
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
        let key = k.trim().to_string();
        let map = out.get_mut(section).expect("section exists");
        if map.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
        }
    }
    Ok(out)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let secs = sections(text)?;
        let mut cfg = ExperimentConfig::default();
        let empty = BTreeMap::new();

        let shift = secs.get("shift").unwrap_or(&empty);
        let mut spec_keys = BTreeMap::new();
        let mut table_keys = BTreeMap::new();
        for (k, v) in shift {
            if TABLE_KEYS.contains(&k.as_str()) {
                table_keys.insert(k.clone(), v.clone());
            } else {
                spec_keys.insert(k.clone(), v.clone());
            }
        }
        cfg.shift = ShiftSpec::from_map(&spec_keys).map_err(|e| Error::Config(format!("[shift] {e}")))?;
        if !table_keys.is_empty() {
            let get = |k: &str| table_keys.get(k).ok_or_else(|| cfg_err("shift", k, "required with table inputs"));
            cfg.table = Some(TableInputs {
                total: int("shift", "table_total", get("table_total")?)?,
                class_balance: num("shift", "class_balance", get("class_balance")?)?,
                attr_balance: num("shift", "attr_balance", get("attr_balance")?)?,
                correlation_level: num("shift", "correlation_level", get("correlation_level")?)?,
            });
        }

        for (k, v) in secs.get("grid").unwrap_or(&empty) {
            let g = &mut cfg.grid;
            match k.as_str() {
                "learning_rates" => g.learning_rates = list("grid", k, v, num)?,
                "l2" => g.l2s = list("grid", k, v, num)?,
                "batch_sizes" => {
                    g.batch_sizes = list("grid", k, v, |s, k, x| {
                        x.parse::<BatchSize>().map_err(|e| cfg_err(s, k, e))
                    })?
                }
                "snapshot_epochs" => g.snapshot_epochs = list("grid", k, v, int)?,
                "seeds" => g.seeds = list("grid", k, v, int)?,
                other => return Err(cfg_err("grid", other, "unknown key")),
            }
        }

        for (k, v) in secs.get("analysis").unwrap_or(&empty) {
            let a = &mut cfg.analysis;
            match k.as_str() {
                "eps" => a.eps = num("analysis", k, v)?,
                "lambda" => {
                    a.lambda = if v == "gcv" { Lambda::Gcv } else { Lambda::Fixed(num("analysis", k, v)?) }
                }
                "n_pairs" => a.n_pairs = int("analysis", k, v)?,
                "pair_seed" => a.pair_seed = int("analysis", k, v)?,
                "margin" => a.margin = num("analysis", k, v)?,
                other => return Err(cfg_err("analysis", other, "unknown key")),
            }
        }

        for (k, v) in secs.get("output").unwrap_or(&empty) {
            match k.as_str() {
                "dir" => cfg.output.dir = PathBuf::from(v),
                "write_datasets" => cfg.output.write_datasets = boolean("output", k, v)?,
                other => return Err(cfg_err("output", other, "unknown key")),
            }
        }

        for (k, v) in secs.get("theory").unwrap_or(&empty) {
            let t = &mut cfg.theory;
            let slot = match k.as_str() {
                "p_y1" => &mut t.p_y1,
                "pi1" => &mut t.pi1,
                "pi0" => &mut t.pi0,
                "tpr" => &mut t.tpr,
                "tnr" => &mut t.tnr,
                "mu0" => &mut t.mu0,
                "mu1" => &mut t.mu1,
                "s0" => &mut t.s0,
                "s1" => &mut t.s1,
                "n_thresholds" => {
                    t.n_thresholds = int("theory", k, v)?;
                    continue;
                }
                "n_samples" => {
                    t.n_samples = int("theory", k, v)?;
                    continue;
                }
                other => return Err(cfg_err("theory", other, "unknown key")),
            };
            *slot = num("theory", k, v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::Config(format!("config file {} not found", path.display())));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// The shift spec after applying table inputs, if any.
    pub fn resolved_shift(&self) -> Result<ShiftSpec> {
        match self.table {
            None => Ok(self.shift.clone()),
            Some(t) => {
                let table = mixture_table(t.total, t.class_balance, t.attr_balance, t.correlation_level)?;
                let features = FeatureParams {
                    d_core: self.shift.d_core,
                    d_spu: self.shift.d_spu,
                    sigma_core: self.shift.sigma_core,
                    sigma_spu: self.shift.sigma_spu,
                };
                spec_from_table(&table, features, &self.shift)
            }
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.shift.master_seed = seed;
        self
    }

    pub fn with_out(mut self, dir: impl Into<PathBuf>) -> Self {
        self.output.dir = dir.into();
        self
    }

    /// Serializes back to the file format.
    pub fn to_text(&self) -> String {
        let f = |x: f64| format_sig(x, RESULT_DIGITS);
        let join = |v: Vec<String>| v.join(", ");
        let mut s = String::from("[shift]\n");
        for (k, v) in self.shift.to_pairs() {
            s.push_str(&format!("{k} = {v}\n"));
        }
        if let Some(t) = self.table {
            s.push_str(&format!(
                "table_total = {}\nclass_balance = {}\nattr_balance = {}\ncorrelation_level = {}\n",
                t.total,
                f(t.class_balance),
                f(t.attr_balance),
                f(t.correlation_level)
            ));
        }
        let g = &self.grid;
        s.push_str("\n[grid]\n");
        s.push_str(&format!("learning_rates = {}\n", join(g.learning_rates.iter().map(|&x| f(x)).collect())));
        s.push_str(&format!("l2 = {}\n", join(g.l2s.iter().map(|&x| f(x)).collect())));
        s.push_str(&format!("batch_sizes = {}\n", join(g.batch_sizes.iter().map(|b| b.to_string()).collect())));
        s.push_str(&format!("snapshot_epochs = {}\n", join(g.snapshot_epochs.iter().map(|e| e.to_string()).collect())));
        s.push_str(&format!("seeds = {}\n", join(g.seeds.iter().map(|e| e.to_string()).collect())));
        let a = &self.analysis;
        s.push_str("\n[analysis]\n");
        s.push_str(&format!("eps = {}\n", f(a.eps)));
        s.push_str(&format!(
            "lambda = {}\n",
            match a.lambda {
                Lambda::Gcv => "gcv".to_string(),
                Lambda::Fixed(l) => f(l),
            }
        ));
        s.push_str(&format!("n_pairs = {}\npair_seed = {}\nmargin = {}\n", a.n_pairs, a.pair_seed, f(a.margin)));
        s.push_str(&format!(
            "\n[output]\ndir = {}\nwrite_datasets = {}\n",
            self.output.dir.display(),
            self.output.write_datasets
        ));
        let t = &self.theory;
        s.push_str(&format!(
            "\n[theory]\np_y1 = {}\npi1 = {}\npi0 = {}\ntpr = {}\ntnr = {}\nmu0 = {}\nmu1 = {}\ns0 = {}\ns1 = {}\nn_thresholds = {}\nn_samples = {}\n",
            f(t.p_y1), f(t.pi1), f(t.pi0), f(t.tpr), f(t.tnr), f(t.mu0), f(t.mu1), f(t.s0), f(t.s1), t.n_thresholds, t.n_samples
        ));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::Design;

    #[test]
    fn default_grid_has_500_snapshots() {
        assert_eq!(GridSpec::default().n_snapshots(), 500);
        assert_eq!(GridSpec::default().cells().len(), 125);
    }

    #[test]
    fn parses_every_section() {
        let cfg = ExperimentConfig::parse(
            "# demo\n[shift]\ndesign = correlation\npi1 = 0.9\npi0 = 0.3\nmaster_seed = 7\n\
             [grid]\nlearning_rates = 0.001, 0.01\nbatch_sizes = full, 32\nsnapshot_epochs = 1,5\nseeds = 0\n\
             [analysis]\nlambda = 0.5\nn_pairs = 20\n[output]\ndir = /tmp/x\nwrite_datasets = no\n\
             [theory]\ntpr = 0.8\nn_thresholds = 11\n",
        )
        .unwrap();
        assert_eq!(cfg.shift.design, Design::Correlation);
        assert!((cfg.shift.r_tr[1] - 0.8).abs() < 1e-12);
        assert_eq!(cfg.shift.master_seed, 7);
        assert_eq!(cfg.grid.batch_sizes, vec![BatchSize::Full, BatchSize::Rows(32)]);
        assert_eq!(cfg.grid.n_snapshots(), 2 * 2 * 2);
        assert_eq!(cfg.analysis.lambda, Lambda::Fixed(0.5));
        assert!(!cfg.output.write_datasets);
        assert_eq!(cfg.theory.tpr, 0.8);
        assert_eq!(cfg.theory.n_thresholds, 11);
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.table = Some(TableInputs { total: 2000, class_balance: 0.5, attr_balance: 0.6, correlation_level: 0.5 });
        let text = cfg.to_text();
        let back = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn table_inputs_resolve_to_a_correlation_spec() {
        let cfg = ExperimentConfig::parse(
            "[shift]\ntable_total = 10000\nclass_balance = 0.5\nattr_balance = 0.6\ncorrelation_level = 1\n",
        )
        .unwrap();
        let spec = cfg.resolved_shift().unwrap();
        assert_eq!((spec.pi1, spec.pi0, spec.n_train), (1.0, 0.2, 10_000));
    }

    #[test]
    fn malformed_files_are_config_errors() {
        for bad in [
            "[nope]\n",
            "key = 1\n",
            "[grid]\nseeds = a\n",
            "[grid]\nbogus = 1\n",
            "[shift]\nd_core = 1\nd_core = 2\n",
            "[shift]\nfoo\n",
            "[shift]\ntable_total = 10\n",
        ] {
            let err = ExperimentConfig::parse(bad).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{bad:?}: {err}");
        }
    }
}
