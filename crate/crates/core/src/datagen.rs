//! Synthetic subpopulation-shift datasets.
//!
//! Every row carries a label `y ∈ {−1, +1}` and a subpopulation index `g`.
//! Features are `x = [x_core, x_spu]` with
//!
//! ```text
//! x_core | y    ~ N(y·1,        σ_core² I)
//! x_spu  | y, g ~ N(a_g·y·1,    σ_spu² I)
//! ```
//!
//! where `a_g ∈ [−1, 1]` is the spurious alignment of subpopulation `g`. With
//! two groups, group 1 is the majority (`a = y`, alignment +1) and group 0 the
//! minority (`a = −y`, alignment −1). Subpopulations are fixed distributions
//! (alignment and within-group positive fraction); splits differ only in how
//! many rows each subpopulation contributes.
//!
//! Three designs fix the group sizes:
//! - [`Design::Majority`]: two groups, `n_maj = round(p_maj · n)`, labels
//!   balanced inside each group.
//! - [`Design::Correlation`]: a 2×2 (Y, Z) training table built from
//!   `(p_y1, π1, π0)`; the spurious attribute is `a = 2Z − 1`, so the aligned
//!   cells (Y=1,Z=1) and (Y=0,Z=0) form group 1 and the rest group 0.
//! - [`Design::Mixture`]: `k_groups` groups with alignments evenly spaced in
//!   [−1, 1] and training weights `r_tr`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fmt::{format_sig, parse_f64, FEATURE_DIGITS};
use crate::rng::SplitMix64;

const WEIGHT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Design {
    Majority,
    Correlation,
    Mixture,
}

impl Design {
    pub fn as_str(self) -> &'static str {
        match self {
            Design::Majority => "majority",
            Design::Correlation => "correlation",
            Design::Mixture => "mixture",
        }
    }
}

impl FromStr for Design {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "majority" => Ok(Design::Majority),
            "correlation" => Ok(Design::Correlation),
            "mixture" => Ok(Design::Mixture),
            other => Err(Error::parse("design", format!("unknown design `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    IdTest,
    OodTest,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::IdTest, Split::OodTest];

    pub fn tag(self) -> u64 {
        match self {
            Split::Train => 0x0074_7261_696e,
            Split::IdTest => 0x0069_645f_7465_7374,
            Split::OodTest => 0x6f6f_645f_7465_7374,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::IdTest => "id_test",
            Split::OodTest => "ood_test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "train" => Ok(Split::Train),
            "id_test" => Ok(Split::IdTest),
            "ood_test" => Ok(Split::OodTest),
            other => Err(Error::parse("split", format!("unknown split `{other}`"))),
        }
    }
}

/// Full parameterization of the data-generating process.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSpec {
    pub design: Design,
    pub d_core: usize,
    pub d_spu: usize,
    pub sigma_core: f64,
    pub sigma_spu: f64,
    pub n_train: usize,
    pub p_maj: f64,
    pub pi1: f64,
    pub pi0: f64,
    pub p_y1: f64,
    pub n_id_test: usize,
    pub n_ood_test: usize,
    pub r_tr: Vec<f64>,
    pub r_ts: Vec<f64>,
    pub k_groups: usize,
    pub master_seed: u64,
}

impl Default for ShiftSpec {
    /// The two-group simulation: n = 3000, σ_core = 10, σ_spu = 1,
    /// d_core = 100, d_spu = 10, p_maj = 0.9.
    fn default() -> Self {
        Self {
            design: Design::Majority,
            d_core: 100,
            d_spu: 10,
            sigma_core: 10.0,
            sigma_spu: 1.0,
            n_train: 3000,
            p_maj: 0.9,
            pi1: 0.5,
            pi0: 0.5,
            p_y1: 0.5,
            n_id_test: 10_000,
            n_ood_test: 10_000,
            // Same arithmetic as `with_p_maj(0.9)`, so configs reproduce it bit for bit.
            r_tr: vec![1.0 - 0.9, 0.9],
            r_ts: vec![0.5, 0.5],
            k_groups: 2,
            master_seed: 0,
        }
    }
}

/// One subpopulation: its spurious alignment and its positive-label fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Subpopulation {
    pub alignment: f64,
    pub pos_frac: f64,
}

/// Exact per-group label counts for one split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellCounts {
    pub pos: Vec<usize>,
    pub neg: Vec<usize>,
}

impl CellCounts {
    pub fn group_sizes(&self) -> Vec<usize> {
        self.pos.iter().zip(&self.neg).map(|(p, n)| p + n).collect()
    }

    pub fn total(&self) -> usize {
        self.pos.iter().sum::<usize>() + self.neg.iter().sum::<usize>()
    }
}

impl ShiftSpec {
    pub fn dim(&self) -> usize {
        self.d_core + self.d_spu
    }

    /// Majority design with the given majority fraction; keeps `r_tr` in sync.
    pub fn with_p_maj(mut self, p_maj: f64) -> Self {
        self.design = Design::Majority;
        self.k_groups = 2;
        self.p_maj = p_maj;
        self.r_tr = vec![1.0 - p_maj, p_maj];
        if self.r_ts.len() != 2 {
            self.r_ts = vec![0.5, 0.5];
        }
        self
    }

    /// Correlation design with P(Y=1) = p_y1, P(Z=1|Y=1) = π1, P(Z=1|Y=0) = π0.
    pub fn with_correlation(mut self, p_y1: f64, pi1: f64, pi0: f64) -> Self {
        self.design = Design::Correlation;
        self.k_groups = 2;
        self.p_y1 = p_y1;
        self.pi1 = pi1;
        self.pi0 = pi0;
        let aligned = aligned_share(p_y1, pi1, pi0);
        self.r_tr = vec![1.0 - aligned, aligned];
        if self.r_ts.len() != 2 {
            self.r_ts = vec![0.5, 0.5];
        }
        self
    }

    /// Mixture design over `r_tr.len()` groups; OOD weights default to uniform.
    pub fn with_mixture(mut self, r_tr: Vec<f64>, r_ts: Option<Vec<f64>>) -> Self {
        let k = r_tr.len();
        self.design = Design::Mixture;
        self.k_groups = k;
        self.r_tr = r_tr;
        self.r_ts = r_ts.unwrap_or_else(|| vec![1.0 / k as f64; k]);
        self
    }

    pub fn p_z1(&self) -> f64 {
        self.pi1 * self.p_y1 + self.pi0 * (1.0 - self.p_y1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.d_core == 0 {
            return Err(Error::DegenerateDimension);
        }
        for (name, v) in [("sigma_core", self.sigma_core), ("sigma_spu", self.sigma_spu)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        for (name, v) in [
            ("n_train", self.n_train),
            ("n_id_test", self.n_id_test),
            ("n_ood_test", self.n_ood_test),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if !(self.p_y1 > 0.0 && self.p_y1 < 1.0) {
            return bad(format!("p_y1 must lie in (0,1), got {}", self.p_y1));
        }
        if self.k_groups < 2 {
            return bad(format!("k_groups must be at least 2, got {}", self.k_groups));
        }
        check_weights("r_tr", &self.r_tr, self.k_groups)?;
        check_weights("r_ts", &self.r_ts, self.k_groups)?;
        match self.design {
            Design::Majority => {
                if self.k_groups != 2 {
                    return bad("majority design requires k_groups = 2".into());
                }
                if !(self.p_maj > 0.0 && self.p_maj < 1.0) {
                    return bad(format!("p_maj must lie in (0,1), got {}", self.p_maj));
                }
                if (self.r_tr[1] - self.p_maj).abs() > 1e-9 {
                    return bad(format!(
                        "r_tr = {:?} disagrees with p_maj = {}",
                        self.r_tr, self.p_maj
                    ));
                }
            }
            Design::Correlation => {
                if self.k_groups != 2 {
                    return bad("correlation design requires k_groups = 2".into());
                }
                for (name, v) in [("pi1", self.pi1), ("pi0", self.pi0)] {
                    if !(0.0..=1.0).contains(&v) {
                        return bad(format!("{name} must lie in [0,1], got {v}"));
                    }
                }
                let pz = self.p_z1();
                if !(pz > 0.0 && pz < 1.0) {
                    return bad(format!("P(Z=1) = {pz} must lie in (0,1)"));
                }
                let aligned = aligned_share(self.p_y1, self.pi1, self.pi0);
                if (self.r_tr[1] - aligned).abs() > 1e-9 {
                    return bad(format!(
                        "r_tr = {:?} disagrees with the aligned share {aligned}",
                        self.r_tr
                    ));
                }
            }
            Design::Mixture => {}
        }
        Ok(())
    }

    /// Spurious alignment and positive fraction of every subpopulation.
    pub fn subpopulations(&self) -> Vec<Subpopulation> {
        let k = self.k_groups;
        (0..k)
            .map(|g| {
                let alignment = -1.0 + 2.0 * g as f64 / (k - 1) as f64;
                let pos_frac = match self.design {
                    Design::Correlation => {
                        let (p, q) = (self.p_y1, 1.0 - self.p_y1);
                        let (pos, neg) = if g == 1 {
                            (self.pi1 * p, (1.0 - self.pi0) * q)
                        } else {
                            ((1.0 - self.pi1) * p, self.pi0 * q)
                        };
                        if pos + neg > 0.0 {
                            pos / (pos + neg)
                        } else {
                            0.5
                        }
                    }
                    _ => self.p_y1,
                };
                Subpopulation {
                    alignment,
                    pos_frac,
                }
            })
            .collect()
    }

    /// The (Y, Z) training table implied by a correlation design.
    pub fn train_table(&self) -> Option<MixtureTable> {
        if self.design != Design::Correlation {
            return None;
        }
        let n = self.n_train as u64;
        let n1 = round_half_up(self.p_y1 * n as f64) as u64;
        let n0 = n - n1;
        let y1z1 = round_half_up(self.pi1 * n1 as f64) as u64;
        let y0z1 = round_half_up(self.pi0 * n0 as f64) as u64;
        Some(MixtureTable {
            counts: [[n0 - y0z1, y0z1], [n1 - y1z1, y1z1]],
        })
    }

    /// Exact per-group label counts for a split.
    pub fn cell_counts(&self, split: Split) -> CellCounts {
        let k = self.k_groups;
        if split == Split::Train {
            match self.design {
                Design::Majority => {
                    let n_maj = round_half_up(self.p_maj * self.n_train as f64) as usize;
                    let sizes = [self.n_train - n_maj, n_maj];
                    return split_labels(&sizes, &[self.p_y1; 2]);
                }
                Design::Correlation => {
                    let t = self.train_table().expect("correlation design");
                    let c = |y: usize, z: usize| t.counts[y][z] as usize;
                    return CellCounts {
                        pos: vec![c(1, 0), c(1, 1)],
                        neg: vec![c(0, 1), c(0, 0)],
                    };
                }
                Design::Mixture => {
                    let sizes = apportion(self.n_train, &self.r_tr);
                    return split_labels(&sizes, &vec![self.p_y1; k]);
                }
            }
        }
        let (n, weights) = match split {
            Split::IdTest => (self.n_id_test, &self.r_tr),
            _ => (self.n_ood_test, &self.r_ts),
        };
        let sizes = apportion(n, weights);
        let fracs: Vec<f64> = self.subpopulations().iter().map(|s| s.pos_frac).collect();
        split_labels(&sizes, &fracs)
    }

    /// Writes this `ShiftSpec` as `key=value` lines.
    pub fn to_kv_string(&self) -> String {
        let mut out = String::from("# subpopulation shift spec\n");
        for (k, v) in self.to_pairs() {
            out.push_str(&format!("{k}={v}\n"));
        }
        out
    }

    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let f = |x: f64| format_sig(x, 12);
        let list = |v: &[f64]| v.iter().map(|&x| f(x)).collect::<Vec<_>>().join(",");
        vec![
            ("design", self.design.as_str().to_string()),
            ("d_core", self.d_core.to_string()),
            ("d_spu", self.d_spu.to_string()),
            ("sigma_core", f(self.sigma_core)),
            ("sigma_spu", f(self.sigma_spu)),
            ("n_train", self.n_train.to_string()),
            ("p_maj", f(self.p_maj)),
            ("pi1", f(self.pi1)),
            ("pi0", f(self.pi0)),
            ("p_y1", f(self.p_y1)),
            ("n_id_test", self.n_id_test.to_string()),
            ("n_ood_test", self.n_ood_test.to_string()),
            ("r_tr", list(&self.r_tr)),
            ("r_ts", list(&self.r_ts)),
            ("k_groups", self.k_groups.to_string()),
            ("master_seed", self.master_seed.to_string()),
        ]
    }

    /// Parses `key=value` lines (`#` comments allowed).
    pub fn parse_kv(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::parse("spec", format!("line {}: expected key=value", lineno + 1))
            })?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Self::from_map(&map)
    }

    /// Builds a spec from parsed key/value pairs; absent keys keep defaults and
    /// `r_tr` is derived from the design parameters when not given.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let mut spec = ShiftSpec::default();
        let mut r_tr_given = false;
        let mut r_ts_given = false;
        for (key, value) in map {
            let ctx = format!("spec key `{key}`");
            let num = || parse_f64(value).ok_or_else(|| Error::parse(&ctx, value.clone()));
            let int = || {
                value
                    .parse::<usize>()
                    .map_err(|e| Error::parse(&ctx, e.to_string()))
            };
            match key.as_str() {
                "design" => spec.design = value.parse()?,
                "d_core" => spec.d_core = int()?,
                "d_spu" => spec.d_spu = int()?,
                "sigma_core" => spec.sigma_core = num()?,
                "sigma_spu" => spec.sigma_spu = num()?,
                "n_train" => spec.n_train = int()?,
                "p_maj" => spec.p_maj = num()?,
                "pi1" => spec.pi1 = num()?,
                "pi0" => spec.pi0 = num()?,
                "p_y1" => spec.p_y1 = num()?,
                "n_id_test" => spec.n_id_test = int()?,
                "n_ood_test" => spec.n_ood_test = int()?,
                "k_groups" => spec.k_groups = int()?,
                "master_seed" => {
                    spec.master_seed = value
                        .parse()
                        .map_err(|e: std::num::ParseIntError| Error::parse(&ctx, e.to_string()))?
                }
                "r_tr" => {
                    spec.r_tr = parse_list(value, &ctx)?;
                    r_tr_given = true;
                }
                "r_ts" => {
                    spec.r_ts = parse_list(value, &ctx)?;
                    r_ts_given = true;
                }
                other => return Err(Error::parse("spec", format!("unknown key `{other}`"))),
            }
        }
        // The two-group designs determine r_tr. A written-out r_tr (as in
        // spec.txt, rounded to 12 digits) is checked and then replaced by the
        // derived value, so a reloaded spec reproduces the original bits.
        let derived = match spec.design {
            Design::Majority => Some(vec![1.0 - spec.p_maj, spec.p_maj]),
            Design::Correlation => {
                let a = aligned_share(spec.p_y1, spec.pi1, spec.pi0);
                Some(vec![1.0 - a, a])
            }
            Design::Mixture => {
                if !map.contains_key("k_groups") && r_tr_given {
                    spec.k_groups = spec.r_tr.len();
                }
                None
            }
        };
        if let Some(d) = derived {
            let consistent = spec.r_tr.len() == 2 && spec.r_tr.iter().zip(&d).all(|(a, b)| (a - b).abs() <= 1e-9);
            if r_tr_given && !consistent {
                return Err(Error::InvalidSpec(format!(
                    "r_tr = {:?} contradicts the {} design, which implies {d:?}",
                    spec.r_tr,
                    spec.design.as_str()
                )));
            }
            spec.r_tr = d;
        }
        if !r_ts_given && spec.r_ts.len() != spec.k_groups {
            spec.r_ts = vec![1.0 / spec.k_groups as f64; spec.k_groups];
        }
        Ok(spec)
    }
}

fn parse_list(value: &str, ctx: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|s| parse_f64(s).ok_or_else(|| Error::parse(ctx, s.to_string())))
        .collect()
}

fn check_weights(name: &str, w: &[f64], k: usize) -> Result<()> {
    if w.len() != k {
        return Err(Error::InvalidSpec(format!(
            "{name} has {} entries, expected {k}",
            w.len()
        )));
    }
    if w.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::InvalidSpec(format!("{name} entries must lie in [0,1]")));
    }
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_TOL {
        return Err(Error::InvalidSpec(format!("{name} sums to {sum}, not 1")));
    }
    Ok(())
}

/// Share of training mass in the aligned cells (Y=1,Z=1) and (Y=0,Z=0).
pub fn aligned_share(p_y1: f64, pi1: f64, pi0: f64) -> f64 {
    pi1 * p_y1 + (1.0 - pi0) * (1.0 - p_y1)
}

pub(crate) fn round_half_up(x: f64) -> f64 {
    (x + 0.5).floor()
}

/// Largest-remainder apportionment of `total` units by `weights`; ties go to
/// the lower index.
pub fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

fn split_labels(sizes: &[usize], pos_fracs: &[f64]) -> CellCounts {
    let pos: Vec<usize> = sizes
        .iter()
        .zip(pos_fracs)
        .map(|(&n, &f)| (round_half_up(f * n as f64) as usize).min(n))
        .collect();
    let neg = sizes.iter().zip(&pos).map(|(n, p)| n - p).collect();
    CellCounts { pos, neg }
}

/// A generated split: row-major features plus labels and groups.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<f64>,
    pub dim: usize,
    pub labels: Vec<i8>,
    pub groups: Vec<usize>,
    pub k_groups: usize,
    pub split: Split,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k_groups];
        for &g in &self.groups {
            sizes[g] += 1;
        }
        sizes
    }

    pub fn cell_counts(&self) -> CellCounts {
        let mut c = CellCounts {
            pos: vec![0; self.k_groups],
            neg: vec![0; self.k_groups],
        };
        for (&y, &g) in self.labels.iter().zip(&self.groups) {
            if y > 0 {
                c.pos[g] += 1;
            } else {
                c.neg[g] += 1;
            }
        }
        c
    }

    /// Writes `y,z,x0,...,x{d-1}` with 9 significant digits per feature.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = String::from("y,z");
        for j in 0..self.dim {
            header.push_str(&format!(",x{j}"));
        }
        header.push('\n');
        w.write_all(header.as_bytes())
            .map_err(|e| Error::io("<dataset>", e))?;
        let mut line = String::new();
        for i in 0..self.n_rows() {
            line.clear();
            line.push_str(&format!("{},{}", self.labels[i], self.groups[i]));
            for &x in self.row(i) {
                line.push(',');
                line.push_str(&format_sig(x, FEATURE_DIGITS));
            }
            line.push('\n');
            w.write_all(line.as_bytes())
                .map_err(|e| Error::io("<dataset>", e))?;
        }
        Ok(())
    }

    /// Reads a dataset CSV. `k_groups` defaults to one past the largest group.
    pub fn read_csv<R: BufRead>(r: R, split: Split, k_groups: Option<usize>) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse("dataset", "empty file"))?
            .map_err(|e| Error::io("<dataset>", e))?;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.len() < 3 || cols[0] != "y" || cols[1] != "z" {
            return Err(Error::parse("dataset", "header must start with y,z,x0"));
        }
        let dim = cols.len() - 2;
        let mut ds = Dataset {
            features: Vec::new(),
            dim,
            labels: Vec::new(),
            groups: Vec::new(),
            k_groups: 0,
            split,
        };
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io("<dataset>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let ctx = || format!("dataset row {}", lineno + 1);
            let mut fields = line.trim().split(',');
            let y: i8 = fields
                .next()
                .and_then(|s| s.parse().ok())
                .filter(|y| *y == 1 || *y == -1)
                .ok_or_else(|| Error::parse(ctx(), "label must be -1 or 1"))?;
            let z: usize = fields
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::parse(ctx(), "bad group"))?;
            let before = ds.features.len();
            for s in fields {
                ds.features
                    .push(parse_f64(s).ok_or_else(|| Error::parse(ctx(), s.to_string()))?);
            }
            if ds.features.len() - before != dim {
                return Err(Error::parse(ctx(), "wrong number of features"));
            }
            ds.labels.push(y);
            ds.groups.push(z);
        }
        let observed = ds.groups.iter().max().map_or(0, |m| m + 1);
        ds.k_groups = k_groups.unwrap_or(observed).max(observed);
        Ok(ds)
    }
}

/// Samples one split. Rows are laid out group by group, positives first;
/// row `i` draws from its own stream seeded by (master_seed, split, i).
pub fn generate(spec: &ShiftSpec, split: Split) -> Result<Dataset> {
    spec.validate()?;
    let counts = spec.cell_counts(split);
    let subpops = spec.subpopulations();
    let n = counts.total();
    let dim = spec.dim();
    let mut ds = Dataset {
        features: Vec::with_capacity(n * dim),
        dim,
        labels: Vec::with_capacity(n),
        groups: Vec::with_capacity(n),
        k_groups: spec.k_groups,
        split,
    };
    for (g, sub) in subpops.iter().enumerate() {
        for (y, count) in [(1i8, counts.pos[g]), (-1i8, counts.neg[g])] {
            for _ in 0..count {
                let row = ds.labels.len() as u64;
                let mut rng = SplitMix64::from_parts(&[spec.master_seed, split.tag(), row]);
                let yf = f64::from(y);
                for _ in 0..spec.d_core {
                    ds.features.push(yf + spec.sigma_core * rng.normal());
                }
                let spu_mean = sub.alignment * yf;
                for _ in 0..spec.d_spu {
                    ds.features.push(spu_mean + spec.sigma_spu * rng.normal());
                }
                ds.labels.push(y);
                ds.groups.push(g);
            }
        }
    }
    Ok(ds)
}

/// 2×2 training counts indexed `counts[y][z]` with y, z ∈ {0, 1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MixtureTable {
    pub counts: [[u64; 2]; 2],
}

impl MixtureTable {
    pub fn cell(&self, y: usize, z: usize) -> u64 {
        self.counts[y][z]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn class_total(&self, y: usize) -> u64 {
        self.counts[y][0] + self.counts[y][1]
    }

    pub fn attr_total(&self, z: usize) -> u64 {
        self.counts[0][z] + self.counts[1][z]
    }

    pub fn p_y1(&self) -> f64 {
        self.class_total(1) as f64 / self.total() as f64
    }

    /// P(Z=1 | Y=1).
    pub fn pi1(&self) -> f64 {
        self.counts[1][1] as f64 / self.class_total(1) as f64
    }

    /// P(Z=1 | Y=0).
    pub fn pi0(&self) -> f64 {
        self.counts[0][1] as f64 / self.class_total(0) as f64
    }

    /// Feasible range of the free cell (Y=1, Z=1) under this table's marginals.
    pub fn free_cell_bounds(&self) -> (u64, u64) {
        frechet_bounds(self.total(), self.class_total(1), self.attr_total(1))
    }
}

impl fmt::Display for MixtureTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "        Z=1    Z=0")?;
        writeln!(f, "Y=1 {:>6} {:>6}", self.counts[1][1], self.counts[1][0])?;
        write!(f, "Y=0 {:>6} {:>6}", self.counts[0][1], self.counts[0][0])
    }
}

fn frechet_bounds(total: u64, n_y1: u64, n_z1: u64) -> (u64, u64) {
    let lo = (n_y1 + n_z1).saturating_sub(total);
    let hi = n_y1.min(n_z1);
    (lo, hi)
}

/// Builds the training table with fixed grand total, class marginal and
/// attribute marginal. `correlation_level` moves the free cell (Y=1, Z=1)
/// linearly from its independence value (0) to its Fréchet upper bound (1).
pub fn mixture_table(
    total: u64,
    class_balance: f64,
    attr_balance: f64,
    correlation_level: f64,
) -> Result<MixtureTable> {
    let infeasible = |m: String| Err(Error::InfeasibleMarginals(m));
    if total == 0 {
        return infeasible("total must be positive".into());
    }
    for (name, v) in [("class_balance", class_balance), ("attr_balance", attr_balance)] {
        if !(v > 0.0 && v < 1.0) {
            return infeasible(format!("{name} must lie in (0,1), got {v}"));
        }
    }
    if !(0.0..=1.0).contains(&correlation_level) {
        return infeasible(format!(
            "correlation_level must lie in [0,1], got {correlation_level}"
        ));
    }
    let n_y1 = round_half_up(class_balance * total as f64) as u64;
    let n_z1 = round_half_up(attr_balance * total as f64) as u64;
    if n_y1 == 0 || n_y1 == total || n_z1 == 0 || n_z1 == total {
        return infeasible(format!(
            "marginals round to a degenerate table (Y=1: {n_y1}, Z=1: {n_z1} of {total})"
        ));
    }
    let (lo, hi) = frechet_bounds(total, n_y1, n_z1);
    let independent = n_y1 as f64 * n_z1 as f64 / total as f64;
    let target = independent + correlation_level * (hi as f64 - independent);
    let free = (round_half_up(target) as u64).clamp(lo, hi);
    let y1z0 = n_y1 - free;
    let y0z1 = n_z1 - free;
    let y0z0 = total - n_y1 - y0z1;
    Ok(MixtureTable {
        counts: [[y0z0, y0z1], [y1z0, free]],
    })
}

/// Feature dimensions and noise scales to pair with a mixture table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureParams {
    pub d_core: usize,
    pub d_spu: usize,
    pub sigma_core: f64,
    pub sigma_spu: f64,
}

impl Default for FeatureParams {
    fn default() -> Self {
        let s = ShiftSpec::default();
        Self {
            d_core: s.d_core,
            d_spu: s.d_spu,
            sigma_core: s.sigma_core,
            sigma_spu: s.sigma_spu,
        }
    }
}

/// A correlation-design spec whose training split reproduces `table`.
pub fn spec_from_table(table: &MixtureTable, features: FeatureParams, base: &ShiftSpec) -> Result<ShiftSpec> {
    let mut spec = ShiftSpec {
        d_core: features.d_core,
        d_spu: features.d_spu,
        sigma_core: features.sigma_core,
        sigma_spu: features.sigma_spu,
        n_train: table.total() as usize,
        r_ts: vec![0.5, 0.5],
        ..base.clone()
    }
    .with_correlation(table.p_y1(), table.pi1(), table.pi0());
    spec.r_ts = vec![0.5, 0.5];
    spec.validate()?;
    Ok(spec)
}

/// Reads a spec file from disk.
pub fn read_spec_file(path: &Path) -> Result<ShiftSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ShiftSpec::parse_kv(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_spec() -> ShiftSpec {
        ShiftSpec {
            n_train: 400,
            n_id_test: 200,
            n_ood_test: 200,
            d_core: 5,
            d_spu: 3,
            ..ShiftSpec::default()
        }
    }

    #[test]
    fn default_config_has_3000_training_rows() {
        let ds = generate(&ShiftSpec::default(), Split::Train).unwrap();
        assert_eq!(ds.n_rows(), 3000);
        assert_eq!(ds.group_sizes(), vec![300, 2700]);
        assert_eq!(ds.features.len(), 3000 * 110);
        assert_eq!(ds.cell_counts().pos, vec![150, 1350]);
    }

    #[test]
    fn zero_noise_limit_places_core_features_at_label() {
        let spec = ShiftSpec {
            sigma_core: 1e-12,
            ..small_spec()
        };
        let ds = generate(&spec, Split::Train).unwrap();
        for i in 0..ds.n_rows() {
            let y = f64::from(ds.labels[i]);
            for &x in &ds.row(i)[..spec.d_core] {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn core_means_within_standard_error_across_seeds() {
        for seed in 0..20 {
            let spec = ShiftSpec {
                master_seed: seed,
                ..ShiftSpec::default()
            };
            let ds = generate(&spec, Split::Train).unwrap();
            let pos: Vec<usize> = (0..ds.n_rows()).filter(|&i| ds.labels[i] > 0).collect();
            let bound = 4.0 * spec.sigma_core / (pos.len() as f64).sqrt();
            for j in 0..spec.d_core {
                let mean = pos.iter().map(|&i| ds.row(i)[j]).sum::<f64>() / pos.len() as f64;
                assert!((mean - 1.0).abs() < bound, "seed {seed} coord {j}: {mean}");
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = small_spec();
        for split in Split::ALL {
            assert_eq!(generate(&spec, split).unwrap(), generate(&spec, split).unwrap());
        }
    }

    #[test]
    fn seed_changes_features_not_counts() {
        let a = generate(&small_spec(), Split::Train).unwrap();
        let b = generate(
            &ShiftSpec {
                master_seed: 99,
                ..small_spec()
            },
            Split::Train,
        )
        .unwrap();
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.groups, b.groups);
        assert_ne!(a.features, b.features);
    }

    #[test]
    fn splits_use_distinct_streams() {
        let spec = ShiftSpec {
            n_id_test: 400,
            n_ood_test: 400,
            r_ts: vec![0.1, 0.9],
            ..small_spec()
        };
        let a = generate(&spec, Split::Train).unwrap();
        let b = generate(&spec, Split::IdTest).unwrap();
        assert_eq!(a.labels, b.labels);
        assert_ne!(a.features, b.features);
    }

    #[test]
    fn ood_split_is_group_balanced() {
        let ds = generate(&ShiftSpec::default(), Split::OodTest).unwrap();
        assert_eq!(ds.group_sizes(), vec![5000, 5000]);
        assert_eq!(ds.cell_counts().pos, vec![2500, 2500]);
        let id = generate(&ShiftSpec::default(), Split::IdTest).unwrap();
        assert_eq!(id.group_sizes(), vec![1000, 9000]);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let bad_weights = ShiftSpec {
            r_ts: vec![0.6, 0.5],
            ..ShiftSpec::default()
        };
        assert!(matches!(bad_weights.validate(), Err(Error::InvalidSpec(_))));
        let zero_dim = ShiftSpec {
            d_core: 0,
            ..ShiftSpec::default()
        };
        assert!(matches!(
            generate(&zero_dim, Split::Train),
            Err(Error::DegenerateDimension)
        ));
        let degenerate_z = ShiftSpec::default().with_correlation(0.5, 0.0, 0.0);
        assert!(matches!(degenerate_z.validate(), Err(Error::InvalidSpec(_))));
        let bad_pmaj = ShiftSpec::default().with_p_maj(1.0);
        assert!(bad_pmaj.validate().is_err());
    }

    #[test]
    fn k_group_alignments_are_evenly_spaced() {
        let spec = small_spec().with_mixture(vec![0.5, 0.3, 0.2], None);
        spec.validate().unwrap();
        let a: Vec<f64> = spec.subpopulations().iter().map(|s| s.alignment).collect();
        assert_eq!(a, vec![-1.0, 0.0, 1.0]);
        let ds = generate(&spec, Split::Train).unwrap();
        assert_eq!(ds.group_sizes(), vec![200, 120, 80]);
        let ood = generate(&spec, Split::OodTest).unwrap();
        assert_eq!(ood.group_sizes(), vec![67, 67, 66]);
    }

    #[test]
    fn independent_table_matches_fixed_marginals() {
        let t = mixture_table(10_000, 0.5, 0.6, 0.0).unwrap();
        // (Y1Z1, Y1Z0, Y0Z1, Y0Z0)
        assert_eq!(
            [t.cell(1, 1), t.cell(1, 0), t.cell(0, 1), t.cell(0, 0)],
            [3000, 2000, 3000, 2000]
        );
        assert_eq!(t.class_total(1), 5000);
        assert_eq!(t.attr_total(1), 6000);
        assert_eq!(t.pi1(), 0.6);
        assert_eq!(t.pi0(), 0.6);
    }

    /// Exhaustive oracle: the largest feasible (Y=1,Z=1) cell over all
    /// non-negative integer tables with the given marginals.
    fn brute_force_max_cell(total: u64, n_y1: u64, n_z1: u64) -> u64 {
        let mut best = 0;
        for y1z1 in 0..=total {
            for y0z1 in 0..=total {
                let (Some(y1z0), Some(rest)) = (n_y1.checked_sub(y1z1), n_z1.checked_sub(y1z1))
                else {
                    continue;
                };
                if rest != y0z1 {
                    continue;
                }
                let used = y1z1 + y1z0 + y0z1;
                if used <= total {
                    best = best.max(y1z1);
                }
            }
        }
        best
    }

    #[test]
    fn maximal_table_hits_frechet_upper_bound() {
        let t = mixture_table(10_000, 0.5, 0.6, 1.0).unwrap();
        assert_eq!(t.cell(1, 1), 5000);
        assert_eq!(t.cell(0, 1), 1000);
        assert_eq!(t.pi1(), 1.0);
        assert_eq!(t.pi0(), 0.2);
        // Scaled-down exhaustive check of the bound (same marginal ratios).
        let small = mixture_table(100, 0.5, 0.6, 1.0).unwrap();
        assert_eq!(small.cell(1, 1), brute_force_max_cell(100, 50, 60));
    }

    #[test]
    fn infeasible_marginals_are_rejected() {
        assert!(matches!(
            mixture_table(0, 0.5, 0.5, 0.0),
            Err(Error::InfeasibleMarginals(_))
        ));
        assert!(mixture_table(10, 0.01, 0.5, 0.0).is_err());
        assert!(mixture_table(10, 0.5, 0.5, 1.5).is_err());
    }

    #[test]
    fn spec_from_table_reads_frequencies() {
        let indep = mixture_table(10_000, 0.5, 0.6, 0.0).unwrap();
        let s = spec_from_table(&indep, FeatureParams::default(), &ShiftSpec::default()).unwrap();
        assert_eq!((s.pi1, s.pi0, s.p_y1), (0.6, 0.6, 0.5));
        assert_eq!(s.r_tr, vec![0.5, 0.5]);
        let max = mixture_table(10_000, 0.5, 0.6, 1.0).unwrap();
        let s = spec_from_table(&max, FeatureParams::default(), &ShiftSpec::default()).unwrap();
        assert_eq!((s.pi1, s.pi0), (1.0, 0.2));
    }

    #[test]
    fn correlation_train_split_reproduces_table_cells() {
        let t = mixture_table(2000, 0.5, 0.6, 0.5).unwrap();
        let spec = spec_from_table(
            &t,
            FeatureParams {
                d_core: 3,
                d_spu: 2,
                sigma_core: 1.0,
                sigma_spu: 1.0,
            },
            &ShiftSpec::default(),
        )
        .unwrap();
        let ds = generate(&spec, Split::Train).unwrap();
        let c = ds.cell_counts();
        // group 1 = aligned: (Y=1,Z=1) positives and (Y=0,Z=0) negatives
        assert_eq!(c.pos[1] as u64, t.cell(1, 1));
        assert_eq!(c.neg[1] as u64, t.cell(0, 0));
        assert_eq!(c.pos[0] as u64, t.cell(1, 0));
        assert_eq!(c.neg[0] as u64, t.cell(0, 1));
    }

    #[test]
    fn conditional_independence_audit() {
        // Core features must not depend on the group once y is fixed.
        let spec = ShiftSpec {
            n_train: 50_000,
            d_core: 4,
            d_spu: 2,
            ..ShiftSpec::default()
        }
        .with_p_maj(0.5);
        let ds = generate(&spec, Split::Train).unwrap();
        for y in [-1i8, 1] {
            for j in 0..spec.d_core {
                let mut sums = [0.0; 2];
                let mut counts = [0usize; 2];
                for i in 0..ds.n_rows() {
                    if ds.labels[i] == y {
                        sums[ds.groups[i]] += ds.row(i)[j];
                        counts[ds.groups[i]] += 1;
                    }
                }
                let m0 = sums[0] / counts[0] as f64;
                let m1 = sums[1] / counts[1] as f64;
                let se = spec.sigma_core
                    * (1.0 / counts[0] as f64 + 1.0 / counts[1] as f64).sqrt();
                assert!((m0 - m1).abs() < 4.0 * se, "y={y} j={j}: {m0} vs {m1}");
            }
        }
    }

    #[test]
    fn csv_round_trip_is_byte_identical() {
        let ds = generate(&small_spec(), Split::OodTest).unwrap();
        let mut first = Vec::new();
        ds.write_csv(&mut first).unwrap();
        let back = Dataset::read_csv(first.as_slice(), Split::OodTest, Some(2)).unwrap();
        let mut second = Vec::new();
        back.write_csv(&mut second).unwrap();
        assert_eq!(first, second);
        assert!(String::from_utf8(first).unwrap().starts_with("y,z,x0,x1,"));
    }

    #[test]
    fn spec_kv_round_trip() {
        let spec = ShiftSpec::default().with_correlation(0.5, 0.9, 0.3);
        let text = spec.to_kv_string();
        let back = ShiftSpec::parse_kv(&text).unwrap();
        assert_eq!(back.to_kv_string(), text);
        assert_eq!(back.design, Design::Correlation);
        let partial = ShiftSpec::parse_kv("# comment\ndesign=majority\np_maj=0.7\n").unwrap();
        assert_eq!(partial.r_tr, vec![1.0 - 0.7, 0.7]);
        partial.validate().unwrap();
        assert!(ShiftSpec::parse_kv("bogus=1").is_err());
    }

    #[test]
    fn reloaded_spec_is_bit_exact_and_checked() {
        for spec in [ShiftSpec::default(), ShiftSpec::default().with_correlation(0.5, 0.9, 0.3)] {
            let back = ShiftSpec::parse_kv(&spec.to_kv_string()).unwrap();
            assert_eq!(back, spec);
        }
        let bad = ShiftSpec::parse_kv("design=majority\np_maj=0.7\nr_tr=0.5,0.5\n").unwrap_err();
        assert_eq!(bad.exit_code(), 2);
    }

    proptest! {
        #[test]
        fn table_marginals_hold(total in 10u64..5000, cb in 0.05f64..0.95, ab in 0.05f64..0.95, level in 0.0f64..=1.0) {
            if let Ok(t) = mixture_table(total, cb, ab, level) {
                let n_y1 = round_half_up(cb * total as f64) as u64;
                let n_z1 = round_half_up(ab * total as f64) as u64;
                prop_assert_eq!(t.total(), total);
                prop_assert_eq!(t.class_total(1), n_y1);
                prop_assert_eq!(t.attr_total(1), n_z1);
                let (lo, hi) = t.free_cell_bounds();
                prop_assert!(t.cell(1, 1) >= lo && t.cell(1, 1) <= hi);
                // P(Z=1) = π1·P(Y=1) + π0·P(Y=0) as exact rationals:
                // (y1z1/n1)(n1/N) + (y0z1/n0)(n0/N) == n_z1/N, cross-multiplied.
                let (n1, n0, n) = (t.class_total(1) as u128, t.class_total(0) as u128, total as u128);
                let lhs = (t.cell(1, 1) as u128 * n1 * n0 + t.cell(0, 1) as u128 * n0 * n1) * n;
                let rhs = n_z1 as u128 * n1 * n0 * n;
                prop_assert_eq!(lhs, rhs);
            }
        }

        #[test]
        fn spec_round_trip_reproduces_table(total in 20u64..4000, cb in 0.1f64..0.9, ab in 0.1f64..0.9, level in 0.0f64..=1.0) {
            if let Ok(t) = mixture_table(total, cb, ab, level) {
                let spec = spec_from_table(&t, FeatureParams::default(), &ShiftSpec::default());
                if let Ok(spec) = spec {
                    prop_assert_eq!(spec.train_table().unwrap(), t);
                }
            }
        }

        #[test]
        fn apportion_sums_to_total(total in 0usize..10_000, w in proptest::collection::vec(0.01f64..1.0, 2..6)) {
            let counts = apportion(total, &w);
            prop_assert_eq!(counts.iter().sum::<usize>(), total);
            let sum: f64 = w.iter().sum();
            for (c, wi) in counts.iter().zip(&w) {
                prop_assert!((*c as f64 - wi / sum * total as f64).abs() < 1.0 + 1e-9);
            }
        }
    }
}
