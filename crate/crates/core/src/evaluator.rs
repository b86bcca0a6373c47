//! Per-group accuracies, TPR/TNR, ID/OOD mixtures, pairwise agreement and
//! mixture-of-models baselines.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::fmt::{format_sig, parse_f64, RESULT_DIGITS};
use crate::rng::SplitMix64;
use crate::trainer::{BatchSize, ModelRecord};

/// Per-group confusion counts of one classifier on one pool.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GroupCounts {
    pub pos: Vec<u64>,
    pub neg: Vec<u64>,
    pub true_pos: Vec<u64>,
    pub true_neg: Vec<u64>,
}

impl GroupCounts {
    fn zeros(k: usize) -> Self {
        Self {
            pos: vec![0; k],
            neg: vec![0; k],
            true_pos: vec![0; k],
            true_neg: vec![0; k],
        }
    }

    pub fn correct(&self) -> u64 {
        self.true_pos.iter().sum::<u64>() + self.true_neg.iter().sum::<u64>()
    }

    pub fn total(&self) -> u64 {
        self.pos.iter().sum::<u64>() + self.neg.iter().sum::<u64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub model_id: String,
    pub epoch: usize,
    pub lr: f64,
    pub l2: f64,
    pub batch_size: BatchSize,
    pub seed: u64,
    pub group_acc: Vec<f64>,
    /// NaN for a group with no positive rows.
    pub tpr: Vec<f64>,
    /// NaN for a group with no negative rows.
    pub tnr: Vec<f64>,
    pub id_acc: f64,
    pub ood_acc: f64,
}

impl EvalRecord {
    /// Majority and minority accuracy of a two-group pool (group 1, group 0).
    pub fn maj_min(&self) -> (f64, f64) {
        (self.group_acc[1], self.group_acc[0])
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        f64::NAN
    } else {
        num as f64 / den as f64
    }
}

fn check_weights(test: &Dataset, r_tr: &[f64], r_ts: &[f64]) -> Result<()> {
    for (name, r) in [("r_tr", r_tr), ("r_ts", r_ts)] {
        if r.len() != test.k_groups {
            return Err(Error::InvalidArgument(format!(
                "{name} has {} weights for {} groups",
                r.len(),
                test.k_groups
            )));
        }
    }
    Ok(())
}

/// Confusion counts from a prediction vector.
pub fn group_counts(preds: &[i8], test: &Dataset) -> GroupCounts {
    let mut c = GroupCounts::zeros(test.k_groups);
    for ((&p, &y), &g) in preds.iter().zip(&test.labels).zip(&test.groups) {
        if y > 0 {
            c.pos[g] += 1;
            c.true_pos[g] += u64::from(p > 0);
        } else {
            c.neg[g] += 1;
            c.true_neg[g] += u64::from(p < 0);
        }
    }
    c
}

/// Record from counts. Group accuracies are exact count ratios; the ID and
/// OOD accuracies reweight them by `r_tr` and `r_ts`.
pub fn record_from_counts(
    model: &ModelRecord,
    counts: &GroupCounts,
    r_tr: &[f64],
    r_ts: &[f64],
) -> Result<EvalRecord> {
    let k = counts.pos.len();
    let mut group_acc = Vec::with_capacity(k);
    for g in 0..k {
        let n = counts.pos[g] + counts.neg[g];
        if n == 0 {
            return Err(Error::EmptyGroup(g));
        }
        group_acc.push(ratio(counts.true_pos[g] + counts.true_neg[g], n));
    }
    let mix = |r: &[f64]| r.iter().zip(&group_acc).map(|(w, a)| w * a).sum();
    let hp = &model.hyperparams;
    Ok(EvalRecord {
        model_id: model.model_id.clone(),
        epoch: model.epoch,
        lr: hp.learning_rate,
        l2: hp.l2,
        batch_size: hp.batch_size,
        seed: hp.seed,
        tpr: (0..k).map(|g| ratio(counts.true_pos[g], counts.pos[g])).collect(),
        tnr: (0..k).map(|g| ratio(counts.true_neg[g], counts.neg[g])).collect(),
        id_acc: mix(r_tr),
        ood_acc: mix(r_ts),
        group_acc,
    })
}

pub fn predict_all(model: &ModelRecord, test: &Dataset) -> Result<Vec<i8>> {
    model.check_dim(test.dim)?;
    Ok((0..test.n_rows()).map(|i| model.predict(test.row(i))).collect())
}

/// Evaluates one model on a test pool.
pub fn evaluate(model: &ModelRecord, test: &Dataset, r_tr: &[f64], r_ts: &[f64]) -> Result<EvalRecord> {
    check_weights(test, r_tr, r_ts)?;
    let preds = predict_all(model, test)?;
    record_from_counts(model, &group_counts(&preds, test), r_tr, r_ts)
}

/// Evaluates every model and also returns its prediction vector.
pub fn evaluate_all(
    models: &[ModelRecord],
    test: &Dataset,
    r_tr: &[f64],
    r_ts: &[f64],
) -> Result<(Vec<EvalRecord>, Vec<Vec<i8>>)> {
    check_weights(test, r_tr, r_ts)?;
    let mut records = Vec::with_capacity(models.len());
    let mut preds = Vec::with_capacity(models.len());
    for m in models {
        let p = predict_all(m, test)?;
        records.push(record_from_counts(m, &group_counts(&p, test), r_tr, r_ts)?);
        preds.push(p);
    }
    Ok((records, preds))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgreementRecord {
    pub model_a: String,
    pub model_b: String,
    pub agreement: f64,
}

/// Fraction of rows where two prediction vectors coincide.
pub fn agreement_of(a: &[i8], b: &[i8]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::InvalidArgument("empty prediction vectors".into()));
    }
    let same = a.iter().zip(b).filter(|(x, y)| x == y).count();
    Ok(same as f64 / a.len() as f64)
}

/// Per-group agreement rates of two prediction vectors.
pub fn group_agreement(a: &[i8], b: &[i8], test: &Dataset) -> Result<Vec<f64>> {
    if a.len() != test.n_rows() || b.len() != test.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: test.n_rows(),
            got: a.len().min(b.len()),
        });
    }
    let mut same = vec![0u64; test.k_groups];
    let mut total = vec![0u64; test.k_groups];
    for ((x, y), &g) in a.iter().zip(b).zip(&test.groups) {
        total[g] += 1;
        same[g] += u64::from(x == y);
    }
    (0..test.k_groups)
        .map(|g| {
            if total[g] == 0 {
                Err(Error::EmptyGroup(g))
            } else {
                Ok(ratio(same[g], total[g]))
            }
        })
        .collect()
}

pub fn agreement(a: &ModelRecord, b: &ModelRecord, test: &Dataset) -> Result<AgreementRecord> {
    if a.weights.len() != b.weights.len() {
        return Err(Error::DimensionMismatch {
            expected: a.weights.len(),
            got: b.weights.len(),
        });
    }
    let pa = predict_all(a, test)?;
    let pb = predict_all(b, test)?;
    Ok(AgreementRecord {
        model_a: a.model_id.clone(),
        model_b: b.model_id.clone(),
        agreement: agreement_of(&pa, &pb)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixtureMode {
    Exact,
    Sampled(u64),
}

/// Randomized classifier that answers with `a` with probability `p` and with
/// `b` otherwise. Exact mode returns the expectation; sampled mode flips one
/// seeded coin per test row.
pub fn model_mixture(
    a: &ModelRecord,
    b: &ModelRecord,
    p: f64,
    test: &Dataset,
    r_tr: &[f64],
    r_ts: &[f64],
    mode: MixtureMode,
) -> Result<EvalRecord> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("mixture weight {p} outside [0,1]")));
    }
    let ea = evaluate(a, test, r_tr, r_ts)?;
    let eb = evaluate(b, test, r_tr, r_ts)?;
    let id = format!("mix({},{},{})", a.model_id, b.model_id, format_sig(p, RESULT_DIGITS));
    match mode {
        MixtureMode::Exact => {
            let lerp = |x: &[f64], y: &[f64]| -> Vec<f64> {
                x.iter().zip(y).map(|(u, v)| p * u + (1.0 - p) * v).collect()
            };
            Ok(EvalRecord {
                model_id: id,
                group_acc: lerp(&ea.group_acc, &eb.group_acc),
                tpr: lerp(&ea.tpr, &eb.tpr),
                tnr: lerp(&ea.tnr, &eb.tnr),
                id_acc: p * ea.id_acc + (1.0 - p) * eb.id_acc,
                ood_acc: p * ea.ood_acc + (1.0 - p) * eb.ood_acc,
                ..eb
            })
        }
        MixtureMode::Sampled(seed) => {
            let pa = predict_all(a, test)?;
            let pb = predict_all(b, test)?;
            let mut rng = SplitMix64::from_parts(&[seed, p.to_bits()]);
            let preds: Vec<i8> = pa
                .iter()
                .zip(&pb)
                .map(|(&x, &y)| if rng.bernoulli(p) { x } else { y })
                .collect();
            let mut rec = record_from_counts(b, &group_counts(&preds, test), r_tr, r_ts)?;
            rec.model_id = id;
            Ok(rec)
        }
    }
}

/// `count` distinct unordered pairs from `n` items, uniform without
/// replacement (Floyd's algorithm over pair ranks), sorted.
pub fn sample_pairs(n: usize, count: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    let total = (n as u64) * (n as u64).saturating_sub(1) / 2;
    if count as u64 > total {
        return Err(Error::InvalidArgument(format!(
            "requested {count} pairs but only {total} exist"
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let mut chosen = BTreeSet::new();
    for j in (total - count as u64)..total {
        let t = rng.below(j + 1);
        if !chosen.insert(t) {
            chosen.insert(j);
        }
    }
    Ok(chosen.into_iter().map(|r| unrank_pair(r, n as u64)).collect())
}

/// Rank r → (i, j), i < j, in row-major order of the strict upper triangle.
fn unrank_pair(mut r: u64, n: u64) -> (usize, usize) {
    let mut i = 0;
    loop {
        let row = n - 1 - i;
        if r < row {
            return (i as usize, (i + 1 + r) as usize);
        }
        r -= row;
        i += 1;
    }
}

pub fn results_header(k: usize) -> Vec<String> {
    let mut h: Vec<String> = ["model_id", "epoch", "lr", "l2", "batch_size", "seed"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for prefix in ["group_acc", "tpr", "tnr"] {
        h.extend((0..k).map(|g| format!("{prefix}_{g}")));
    }
    h.push("id_acc".into());
    h.push("ood_acc".into());
    h
}

/// Writes `results.csv`.
pub fn write_results_csv<W: Write>(records: &[EvalRecord], w: W) -> Result<()> {
    let k = records.first().map_or(2, |r| r.group_acc.len());
    let mut out = csv::Writer::from_writer(w);
    out.write_record(results_header(k))?;
    let f = |x: f64| format_sig(x, RESULT_DIGITS);
    for r in records {
        let mut row = vec![
            r.model_id.clone(),
            r.epoch.to_string(),
            f(r.lr),
            f(r.l2),
            r.batch_size.to_string(),
            r.seed.to_string(),
        ];
        for v in [&r.group_acc, &r.tpr, &r.tnr] {
            if v.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    got: v.len(),
                });
            }
            row.extend(v.iter().map(|&x| f(x)));
        }
        row.push(f(r.id_acc));
        row.push(f(r.ood_acc));
        out.write_record(&row)?;
    }
    out.flush().map_err(|e| Error::io("results.csv", e))?;
    Ok(())
}

pub fn read_results_csv<R: Read>(r: R) -> Result<Vec<EvalRecord>> {
    let ctx = "results.csv";
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    let width = headers.len();
    if width < 11 || (width - 8) % 3 != 0 || headers.get(0) != Some("model_id") {
        return Err(Error::parse(ctx, "unexpected header"));
    }
    let k = (width - 8) / 3;
    let num = |s: &str| parse_f64(s).ok_or_else(|| Error::parse(ctx, format!("bad number `{s}`")));
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let get = |i: usize| rec.get(i).unwrap_or("");
        let vals = |start: usize| (start..start + k).map(|i| num(get(i))).collect::<Result<Vec<_>>>();
        out.push(EvalRecord {
            model_id: get(0).to_string(),
            epoch: get(1).parse().map_err(|_| Error::parse(ctx, "bad epoch"))?,
            lr: num(get(2))?,
            l2: num(get(3))?,
            batch_size: get(4).parse()?,
            seed: get(5).parse().map_err(|_| Error::parse(ctx, "bad seed"))?,
            group_acc: vals(6)?,
            tpr: vals(6 + k)?,
            tnr: vals(6 + 2 * k)?,
            id_acc: num(get(6 + 3 * k))?,
            ood_acc: num(get(7 + 3 * k))?,
        });
    }
    Ok(out)
}

pub fn bits_string(preds: &[i8]) -> String {
    preds.iter().map(|&p| if p > 0 { '1' } else { '0' }).collect()
}

pub fn parse_bits(bits: &str) -> Result<Vec<i8>> {
    bits.chars()
        .map(|c| match c {
            '1' => Ok(1),
            '0' => Ok(-1),
            other => Err(Error::parse("preds.csv", format!("bad bit `{other}`"))),
        })
        .collect()
}

/// Writes `preds.csv` (model_id, bits).
pub fn write_preds_csv<W: Write>(ids: &[String], preds: &[Vec<i8>], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["model_id", "bits"])?;
    for (id, p) in ids.iter().zip(preds) {
        out.write_record([id.as_str(), &bits_string(p)])?;
    }
    out.flush().map_err(|e| Error::io("preds.csv", e))?;
    Ok(())
}

pub fn read_preds_csv<R: Read>(r: R) -> Result<(Vec<String>, Vec<Vec<i8>>)> {
    let mut rdr = csv::Reader::from_reader(r);
    let (mut ids, mut preds) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec?;
        ids.push(rec.get(0).unwrap_or("").to_string());
        preds.push(parse_bits(rec.get(1).unwrap_or(""))?);
    }
    Ok((ids, preds))
}

/// Writes `agreement.csv` (model_a, model_b, agreement).
pub fn write_agreement_csv<W: Write>(records: &[AgreementRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["model_a", "model_b", "agreement"])?;
    for r in records {
        out.write_record([
            r.model_a.as_str(),
            r.model_b.as_str(),
            &format_sig(r.agreement, RESULT_DIGITS),
        ])?;
    }
    out.flush().map_err(|e| Error::io("agreement.csv", e))?;
    Ok(())
}

pub fn read_agreement_csv<R: Read>(r: R) -> Result<Vec<AgreementRecord>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let v = rec.get(2).unwrap_or("");
        out.push(AgreementRecord {
            model_a: rec.get(0).unwrap_or("").to_string(),
            model_b: rec.get(1).unwrap_or("").to_string(),
            agreement: parse_f64(v).ok_or_else(|| Error::parse("agreement.csv", v.to_string()))?,
        });
    }
    Ok(out)
}
