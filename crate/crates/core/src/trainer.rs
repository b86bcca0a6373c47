//! Logistic regression trained by plain gradient descent, with per-epoch
//! snapshots, plus grid sweeps over hyperparameters.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;

use crate::datagen::{Dataset, ShiftSpec};
use crate::error::{Error, Result};
use crate::fmt::{format_sig, parse_f64, RESULT_DIGITS};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BatchSize {
    Full,
    Rows(usize),
}

impl fmt::Display for BatchSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BatchSize::Full => f.write_str("full"),
            BatchSize::Rows(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for BatchSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "full" => Ok(BatchSize::Full),
            t => t
                .parse()
                .map(BatchSize::Rows)
                .map_err(|_| Error::parse("batch_size", format!("`{t}` is neither `full` nor an integer"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    pub learning_rate: f64,
    pub l2: f64,
    pub batch_size: BatchSize,
    pub max_epochs: usize,
    pub snapshot_epochs: Vec<usize>,
    pub seed: u64,
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidHyperParams(m));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return bad(format!("l2 must be non-negative, got {}", self.l2));
        }
        if self.batch_size == BatchSize::Rows(0) {
            return bad("batch_size must be positive".into());
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive".into());
        }
        if self.snapshot_epochs.is_empty() {
            return bad("snapshot_epochs is empty".into());
        }
        if self.snapshot_epochs[0] == 0 || self.snapshot_epochs.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!(
                "snapshot_epochs must be positive and strictly increasing: {:?}",
                self.snapshot_epochs
            ));
        }
        if *self.snapshot_epochs.last().unwrap() > self.max_epochs {
            return bad("last snapshot exceeds max_epochs".into());
        }
        Ok(())
    }

    /// Identifier of one snapshot of this cell. Built from the hyperparameters
    /// alone, so a permuted grid yields the same ids.
    pub fn model_id(&self, epoch: usize) -> String {
        format!(
            "lr{}_l2{}_b{}_s{}_e{}",
            format_sig(self.learning_rate, RESULT_DIGITS),
            format_sig(self.l2, RESULT_DIGITS),
            self.batch_size,
            self.seed,
            epoch
        )
    }

    fn cell_key(&self) -> (u64, u64, BatchSize, u64) {
        (self.learning_rate.to_bits(), self.l2.to_bits(), self.batch_size, self.seed)
    }
}

/// Cartesian product of the grid axes; each cell trains to the last snapshot.
pub fn build_grid(
    learning_rates: &[f64],
    l2s: &[f64],
    batch_sizes: &[BatchSize],
    snapshot_epochs: &[usize],
    seeds: &[u64],
) -> Vec<HyperParams> {
    let max_epochs = snapshot_epochs.iter().copied().max().unwrap_or(0);
    let mut grid = Vec::new();
    for &learning_rate in learning_rates {
        for &l2 in l2s {
            for &batch_size in batch_sizes {
                for &seed in seeds {
                    grid.push(HyperParams {
                        learning_rate,
                        l2,
                        batch_size,
                        max_epochs,
                        snapshot_epochs: snapshot_epochs.to_vec(),
                        seed,
                    });
                }
            }
        }
    }
    grid
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelRecord {
    pub model_id: String,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub hyperparams: HyperParams,
    pub epoch: usize,
    /// Regularized objective: mean logistic loss + (l2/2)·‖w‖².
    pub train_loss: f64,
}

impl ModelRecord {
    #[inline]
    pub fn margin(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    /// +1 iff w·x + b ≥ 0.
    #[inline]
    pub fn predict(&self, x: &[f64]) -> i8 {
        if self.margin(x) >= 0.0 {
            1
        } else {
            -1
        }
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.weights.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                got: dim,
            });
        }
        Ok(())
    }

    pub fn accuracy(&self, data: &Dataset) -> Result<f64> {
        self.check_dim(data.dim)?;
        let correct = (0..data.n_rows())
            .filter(|&i| self.predict(data.row(i)) == data.labels[i])
            .count();
        Ok(correct as f64 / data.n_rows() as f64)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// log(1 + e^{−m}) without overflow.
#[inline]
fn logistic_loss(m: f64) -> f64 {
    if m > 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

/// Regularized training objective at (w, b).
pub fn objective(data: &Dataset, w: &[f64], b: f64, l2: f64) -> f64 {
    let n = data.n_rows();
    let total: f64 = (0..n)
        .map(|i| logistic_loss(f64::from(data.labels[i]) * (dot(w, data.row(i)) + b)))
        .sum();
    total / n as f64 + 0.5 * l2 * dot(w, w)
}

/// Gradient descent from zero weights; emits one record per snapshot epoch.
pub fn train(data: &Dataset, hp: &HyperParams) -> Result<Vec<ModelRecord>> {
    hp.validate()?;
    let n = data.n_rows();
    let d = data.dim;
    if data.features.len() != n * d {
        return Err(Error::DimensionMismatch {
            expected: n * d,
            got: data.features.len(),
        });
    }
    if n == 0 {
        return Err(Error::InvalidHyperParams("training set is empty".into()));
    }
    let batch = match hp.batch_size {
        BatchSize::Full => n,
        BatchSize::Rows(b) => b.min(n),
    };
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut gw = vec![0.0; d];
    let mut order: Vec<usize> = (0..n).collect();
    let mut records = Vec::with_capacity(hp.snapshot_epochs.len());
    let mut next_snapshot = 0;

    for epoch in 1..=hp.max_epochs {
        if batch < n {
            let mut rng = SplitMix64::from_parts(&[hp.seed, epoch as u64]);
            order.iter_mut().enumerate().for_each(|(i, v)| *v = i);
            rng.shuffle(&mut order);
        }
        for chunk in order.chunks(batch) {
            gw.iter_mut().for_each(|g| *g = 0.0);
            let mut gb = 0.0;
            for &i in chunk {
                let x = data.row(i);
                let y = f64::from(data.labels[i]);
                // d/dm log(1 + e^{−y m}) = −y / (1 + e^{y m})
                let s = -y / (1.0 + (y * (dot(&w, x) + b)).exp());
                for (g, xj) in gw.iter_mut().zip(x) {
                    *g += s * xj;
                }
                gb += s;
            }
            let inv = 1.0 / chunk.len() as f64;
            for (wj, g) in w.iter_mut().zip(&gw) {
                *wj -= hp.learning_rate * (g * inv + hp.l2 * *wj);
            }
            b -= hp.learning_rate * gb * inv;
        }
        if !b.is_finite() || w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                epoch,
                loss: f64::NAN,
            });
        }
        if next_snapshot < hp.snapshot_epochs.len() && hp.snapshot_epochs[next_snapshot] == epoch {
            let loss = objective(data, &w, b, hp.l2);
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            records.push(ModelRecord {
                model_id: hp.model_id(epoch),
                weights: w.clone(),
                bias: b,
                hyperparams: hp.clone(),
                epoch,
                train_loss: loss,
            });
            next_snapshot += 1;
        }
    }
    Ok(records)
}

/// A grid cell that failed to train.
#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub grid_index: usize,
    pub hyperparams: HyperParams,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepOutput {
    pub models: Vec<ModelRecord>,
    pub failures: Vec<CellFailure>,
}

/// Trains every grid cell. Output is in grid order regardless of `jobs`;
/// failing cells are recorded and skipped.
pub fn sweep(data: &Dataset, grid: &[HyperParams], jobs: usize) -> Result<SweepOutput> {
    if grid.is_empty() {
        return Err(Error::InvalidHyperParams("empty grid".into()));
    }
    let mut seen = HashSet::new();
    for hp in grid {
        if !seen.insert(hp.cell_key()) {
            return Err(Error::InvalidHyperParams(format!(
                "duplicate grid cell {}",
                hp.model_id(0)
            )));
        }
    }
    let run = || -> Vec<Result<Vec<ModelRecord>>> {
        grid.par_iter().map(|hp| train(data, hp)).collect()
    };
    let results = if jobs <= 1 {
        grid.iter().map(|hp| train(data, hp)).collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map(|pool| pool.install(run))
            .unwrap_or_else(|_| run())
    };
    let mut out = SweepOutput::default();
    for (grid_index, (hp, result)) in grid.iter().zip(results).enumerate() {
        match result {
            Ok(models) => out.models.extend(models),
            Err(e) => out.failures.push(CellFailure {
                grid_index,
                hyperparams: hp.clone(),
                message: e.to_string(),
            }),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    CoreOnly,
    AllFeatures,
}

/// Analytic linear classifiers: unit weights on the core block (or on every
/// coordinate), zero bias.
pub fn oracle_classifier(spec: &ShiftSpec, mode: OracleMode) -> ModelRecord {
    let mut weights = vec![1.0; spec.dim()];
    let name = match mode {
        OracleMode::CoreOnly => {
            weights[spec.d_core..].iter_mut().for_each(|w| *w = 0.0);
            "oracle_core"
        }
        OracleMode::AllFeatures => "oracle_all",
    };
    ModelRecord {
        model_id: name.to_string(),
        weights,
        bias: 0.0,
        hyperparams: HyperParams {
            learning_rate: 0.0,
            l2: 0.0,
            batch_size: BatchSize::Full,
            max_epochs: 0,
            snapshot_epochs: Vec::new(),
            seed: 0,
        },
        epoch: 0,
        train_loss: f64::NAN,
    }
}

pub const MODELS_HEADER: [&str; 7] = ["model_id", "lr", "l2", "batch_size", "epoch", "seed", "train_loss"];

/// Writes `models.csv`.
pub fn write_models_csv<W: Write>(models: &[ModelRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(MODELS_HEADER)?;
    for m in models {
        let hp = &m.hyperparams;
        out.write_record([
            m.model_id.clone(),
            format_sig(hp.learning_rate, RESULT_DIGITS),
            format_sig(hp.l2, RESULT_DIGITS),
            hp.batch_size.to_string(),
            m.epoch.to_string(),
            hp.seed.to_string(),
            format_sig(m.train_loss, RESULT_DIGITS),
        ])?;
    }
    out.flush().map_err(|e| Error::io("models.csv", e))?;
    Ok(())
}

/// Writes `weights.csv`: model_id, b, w0..w{d−1}.
pub fn write_weights_csv<W: Write>(models: &[ModelRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let dim = models.first().map_or(0, |m| m.weights.len());
    let mut header = vec!["model_id".to_string(), "b".to_string()];
    header.extend((0..dim).map(|j| format!("w{j}")));
    out.write_record(&header)?;
    for m in models {
        m.check_dim(dim)?;
        let mut row = vec![m.model_id.clone(), format_sig(m.bias, RESULT_DIGITS)];
        row.extend(m.weights.iter().map(|&x| format_sig(x, RESULT_DIGITS)));
        out.write_record(&row)?;
    }
    out.flush().map_err(|e| Error::io("weights.csv", e))?;
    Ok(())
}

fn field<'a>(rec: &'a csv::StringRecord, i: usize, ctx: &str) -> Result<&'a str> {
    rec.get(i)
        .ok_or_else(|| Error::parse(ctx, format!("missing column {i}")))
}

fn num(s: &str, ctx: &str) -> Result<f64> {
    parse_f64(s).ok_or_else(|| Error::parse(ctx, format!("bad number `{s}`")))
}

fn int<T: FromStr>(s: &str, ctx: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::parse(ctx, format!("bad integer `{s}`")))
}

/// Reads `models.csv` plus `weights.csv` back into records. The reconstructed
/// hyperparameters end at the snapshot's own epoch.
pub fn read_models<R1: Read, R2: Read>(models: R1, weights: R2) -> Result<Vec<ModelRecord>> {
    let mut wr = csv::Reader::from_reader(weights);
    let mut by_id = std::collections::HashMap::new();
    for rec in wr.records() {
        let rec = rec?;
        let ctx = "weights.csv";
        let id = field(&rec, 0, ctx)?.to_string();
        let bias = num(field(&rec, 1, ctx)?, ctx)?;
        let w = rec.iter().skip(2).map(|s| num(s, ctx)).collect::<Result<Vec<_>>>()?;
        by_id.insert(id, (bias, w));
    }
    let mut mr = csv::Reader::from_reader(models);
    let mut out = Vec::new();
    for rec in mr.records() {
        let rec = rec?;
        let ctx = "models.csv";
        let id = field(&rec, 0, ctx)?.to_string();
        let epoch: usize = int(field(&rec, 4, ctx)?, ctx)?;
        let hyperparams = HyperParams {
            learning_rate: num(field(&rec, 1, ctx)?, ctx)?,
            l2: num(field(&rec, 2, ctx)?, ctx)?,
            batch_size: field(&rec, 3, ctx)?.parse()?,
            max_epochs: epoch,
            snapshot_epochs: vec![epoch],
            seed: int(field(&rec, 5, ctx)?, ctx)?,
        };
        let (bias, weights) = by_id
            .remove(&id)
            .ok_or_else(|| Error::parse(ctx, format!("no weights for `{id}`")))?;
        out.push(ModelRecord {
            model_id: id,
            weights,
            bias,
            hyperparams,
            epoch,
            train_loss: num(field(&rec, 6, ctx)?, ctx)?,
        });
    }
    Ok(out)
}
