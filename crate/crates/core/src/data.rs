//! Dataset ingestion and preparation: LIBSVM text, min-max scaling,
//! semi-supervised splits and a two-Gaussian generator.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Pool, Result};
use crate::seed::{derive_seed, stream, stream_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn is_positive(self) -> bool {
        matches!(self, Label::Positive)
    }

    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Positive => "+1",
            Label::Negative => "-1",
        })
    }
}

/// One LIBSVM row. Feature indices are 1-based and strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRow {
    pub label: Label,
    pub features: Vec<(u32, f64)>,
}

impl LabeledRow {
    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut x = vec![0.0; dim];
        for &(idx, v) in &self.features {
            if let Some(slot) = x.get_mut(idx as usize - 1) {
                *slot = v;
            }
        }
        x
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledDataset {
    pub rows: Vec<LabeledRow>,
    /// Largest feature index seen (or declared).
    pub dim: usize,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dense_rows(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.to_dense(self.dim)).collect()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.rows.iter().map(|r| r.label).collect()
    }

    /// Builds a dataset from dense rows, dropping exact zeros.
    pub fn from_dense(rows: &[Vec<f64>], labels: &[Label], dim: usize) -> Self {
        let rows = rows
            .iter()
            .zip(labels)
            .map(|(x, &label)| LabeledRow {
                label,
                features: sparse_from_dense(x),
            })
            .collect();
        Self { rows, dim }
    }
}

fn sparse_from_dense(x: &[f64]) -> Vec<(u32, f64)> {
    x.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, v)| (i as u32 + 1, *v))
        .collect()
}

fn parse_error(line: usize, token: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        token: token.to_string(),
        message: message.into(),
    }
}

fn parse_label(token: &str, line: usize) -> Result<Label> {
    let value: f64 = token
        .parse()
        .map_err(|_| parse_error(line, token, "label is not numeric"))?;
    if value == 1.0 {
        Ok(Label::Positive)
    } else if value == -1.0 {
        Ok(Label::Negative)
    } else {
        Err(parse_error(line, token, "label must be +1, 1 or -1"))
    }
}

/// Parses LIBSVM text: `LABEL idx:val idx:val ...` per line, `#` starts a comment.
pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<LabeledDataset> {
    let mut ds = LabeledDataset::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let content = match line.find('#') {
            Some(pos) => &line[..pos],
            None => &line[..],
        };
        let mut tokens = content.split_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue;
        };
        let label = parse_label(label_tok, line_no)?;
        let mut features = Vec::new();
        let mut last = 0u32;
        for tok in tokens {
            let (idx_s, val_s) = tok
                .split_once(':')
                .ok_or_else(|| parse_error(line_no, tok, "expected index:value"))?;
            let idx: i64 = idx_s
                .parse()
                .map_err(|_| parse_error(line_no, tok, "feature index is not an integer"))?;
            if idx < 1 || idx > u32::MAX as i64 {
                return Err(parse_error(line_no, tok, "feature index must be positive"));
            }
            let idx = idx as u32;
            if idx <= last {
                return Err(parse_error(
                    line_no,
                    tok,
                    "feature indices must be strictly increasing",
                ));
            }
            let val: f64 = val_s
                .parse()
                .map_err(|_| parse_error(line_no, tok, "feature value is not a number"))?;
            if !val.is_finite() {
                return Err(parse_error(line_no, tok, "feature value is not finite"));
            }
            last = idx;
            features.push((idx, val));
        }
        ds.dim = ds.dim.max(last as usize);
        ds.rows.push(LabeledRow { label, features });
    }
    Ok(ds)
}

pub fn parse_libsvm_str(text: &str) -> Result<LabeledDataset> {
    parse_libsvm(text.as_bytes())
}

/// Writes LIBSVM text. Values use the shortest representation that parses back
/// to the same `f64`.
pub fn write_libsvm<W: Write>(ds: &LabeledDataset, mut out: W) -> Result<()> {
    for row in &ds.rows {
        write!(out, "{}", row.label)?;
        for (idx, v) in &row.features {
            write!(out, " {idx}:{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Per-feature `(min, max)` over the training rows, implicit zeros included.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxTable {
    pub ranges: Vec<(f64, f64)>,
}

impl MinMaxTable {
    pub fn fit(ds: &LabeledDataset) -> Self {
        let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); ds.dim];
        let mut present = vec![0usize; ds.dim];
        for row in &ds.rows {
            for &(idx, v) in &row.features {
                let r = &mut ranges[idx as usize - 1];
                r.0 = r.0.min(v);
                r.1 = r.1.max(v);
                present[idx as usize - 1] += 1;
            }
        }
        for (r, &n) in ranges.iter_mut().zip(&present) {
            if n < ds.rows.len() {
                r.0 = r.0.min(0.0);
                r.1 = r.1.max(0.0);
            }
        }
        Self { ranges }
    }

    /// Maps a raw value of 0-based feature `j` into `[0, 1]`. Constant features
    /// map to 0, out-of-range values are clamped.
    pub fn scale(&self, j: usize, v: f64) -> f64 {
        match self.ranges.get(j) {
            Some(&(lo, hi)) if hi > lo => ((v - lo) / (hi - lo)).clamp(0.0, 1.0),
            Some(_) => 0.0,
            // Feature never seen during fitting.
            None => 0.0,
        }
    }

    pub fn apply_dense(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, &v)| self.scale(j, v))
            .collect()
    }

    pub fn apply(&self, ds: &LabeledDataset) -> LabeledDataset {
        let dim = ds.dim.max(self.ranges.len());
        let rows = ds
            .rows
            .iter()
            .map(|row| LabeledRow {
                label: row.label,
                features: sparse_from_dense(&self.apply_dense(&row.to_dense(dim))),
            })
            .collect();
        LabeledDataset { rows, dim }
    }

    /// Tab-separated `feature\tmin\tmax` lines with a header.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "feature\tmin\tmax")?;
        for (j, (lo, hi)) in self.ranges.iter().enumerate() {
            writeln!(out, "{}\t{lo}\t{hi}", j + 1)?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut ranges = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let bad = || parse_error(i + 1, &line, "expected feature, min, max");
            if cols.len() != 3 {
                return Err(bad());
            }
            let idx: usize = cols[0].parse().map_err(|_| bad())?;
            if idx != ranges.len() + 1 {
                return Err(bad());
            }
            let lo: f64 = cols[1].parse().map_err(|_| bad())?;
            let hi: f64 = cols[2].parse().map_err(|_| bad())?;
            ranges.push((lo, hi));
        }
        Ok(Self { ranges })
    }
}

pub fn normalize_unit_interval(ds: &LabeledDataset) -> (LabeledDataset, MinMaxTable) {
    let table = MinMaxTable::fit(ds);
    (table.apply(ds), table)
}

/// Positive, negative and unlabeled pools of dense vectors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SemiSupervisedDataset {
    pub positives: Vec<Vec<f64>>,
    pub negatives: Vec<Vec<f64>>,
    pub unlabeled: Vec<Vec<f64>>,
    pub dim: usize,
    pub provenance: String,
}

impl SemiSupervisedDataset {
    pub fn new(
        positives: Vec<Vec<f64>>,
        negatives: Vec<Vec<f64>>,
        unlabeled: Vec<Vec<f64>>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let dim = positives
            .first()
            .or(negatives.first())
            .or(unlabeled.first())
            .map_or(0, Vec::len);
        let ds = Self {
            positives,
            negatives,
            unlabeled,
            dim,
            provenance: provenance.into(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        for x in self.all_points() {
            if x.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    actual: x.len(),
                });
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(
                    "dataset contains a non-finite value".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn pool(&self, pool: Pool) -> &[Vec<f64>] {
        match pool {
            Pool::Positive => &self.positives,
            Pool::Negative => &self.negatives,
            Pool::Unlabeled => &self.unlabeled,
        }
    }

    pub fn require_nonempty(&self, pools: &[Pool]) -> Result<()> {
        for &p in pools {
            if self.pool(p).is_empty() {
                return Err(Error::EmptyPool(p));
            }
        }
        Ok(())
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        (
            self.positives.len(),
            self.negatives.len(),
            self.unlabeled.len(),
        )
    }

    pub fn total(&self) -> usize {
        self.positives.len() + self.negatives.len() + self.unlabeled.len()
    }

    /// Positives, then negatives, then unlabeled.
    pub fn all_points(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.positives
            .iter()
            .chain(&self.negatives)
            .chain(&self.unlabeled)
    }
}

/// Held-out labeled points for evaluation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TestSet {
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
}

impl TestSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Row indices (into the source dataset) of each pool.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitManifest {
    pub labeled: Vec<usize>,
    pub unlabeled: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitManifest {
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# qsgauc split manifest v1")?;
        for (name, rows) in [
            ("labeled", &self.labeled),
            ("unlabeled", &self.unlabeled),
            ("test", &self.test),
        ] {
            write!(out, "{name}")?;
            for r in rows {
                write!(out, " {r}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut m = SplitManifest::default();
        let mut seen = HashSet::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let name = tokens.next().unwrap_or_default();
            let target = match name {
                "labeled" => &mut m.labeled,
                "unlabeled" => &mut m.unlabeled,
                "test" => &mut m.test,
                other => return Err(parse_error(i + 1, other, "unknown pool name")),
            };
            if !seen.insert(name.to_string()) {
                return Err(parse_error(i + 1, name, "pool listed twice"));
            }
            for tok in tokens {
                target.push(
                    tok.parse()
                        .map_err(|_| parse_error(i + 1, tok, "row index is not an integer"))?,
                );
            }
        }
        Ok(m)
    }

    /// Materializes the pools from the source rows.
    pub fn apply(
        &self,
        ds: &LabeledDataset,
        provenance: &str,
    ) -> Result<(SemiSupervisedDataset, TestSet)> {
        let n = ds.len();
        let check = |r: usize| {
            if r >= n {
                Err(Error::InvalidInput(format!(
                    "manifest row {r} out of range ({n} rows)"
                )))
            } else {
                Ok(())
            }
        };
        let mut positives = Vec::new();
        let mut negatives = Vec::new();
        for &r in &self.labeled {
            check(r)?;
            let row = &ds.rows[r];
            match row.label {
                Label::Positive => positives.push(row.to_dense(ds.dim)),
                Label::Negative => negatives.push(row.to_dense(ds.dim)),
            }
        }
        let mut unlabeled = Vec::with_capacity(self.unlabeled.len());
        for &r in &self.unlabeled {
            check(r)?;
            unlabeled.push(ds.rows[r].to_dense(ds.dim));
        }
        let mut test = TestSet::default();
        for &r in &self.test {
            check(r)?;
            test.points.push(ds.rows[r].to_dense(ds.dim));
            test.labels.push(ds.rows[r].label);
        }
        let dataset = SemiSupervisedDataset {
            positives,
            negatives,
            unlabeled,
            dim: ds.dim,
            provenance: provenance.to_string(),
        };
        Ok((dataset, test))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitConfig {
    pub n_labeled: usize,
    /// Fraction of rows held out (stratified by class) for evaluation.
    pub test_fraction: f64,
    pub seed: u64,
    pub max_attempts: usize,
    /// Evaluate on the unlabeled pool with its hidden labels instead of a held-out set.
    pub transductive: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            n_labeled: 200,
            test_fraction: 0.2,
            seed: 0,
            max_attempts: 100,
            transductive: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Split {
    pub dataset: SemiSupervisedDataset,
    pub test: TestSet,
    pub manifest: SplitManifest,
}

/// Stratified test hold-out, then a uniform labeled sample from the rest; the
/// remainder becomes the unlabeled pool.
pub fn split_semi(ds: &LabeledDataset, cfg: &SplitConfig) -> Result<Split> {
    let n = ds.len();
    if !(0.0..1.0).contains(&cfg.test_fraction) {
        return Err(Error::InvalidParameter(format!(
            "test fraction must lie in [0, 1), got {}",
            cfg.test_fraction
        )));
    }
    if cfg.n_labeled == 0 {
        return Err(Error::InvalidParameter("n_labeled must be positive".into()));
    }
    let mut rng = stream_rng(derive_seed(cfg.seed, stream::SPLIT, 0));

    let test = if cfg.transductive {
        Vec::new()
    } else {
        stratified_sample(
            ds,
            (cfg.test_fraction * n as f64).round() as usize,
            &mut rng,
        )
    };
    let mut in_test = vec![false; n];
    for &r in &test {
        in_test[r] = true;
    }
    let rest: Vec<usize> = (0..n).filter(|&r| !in_test[r]).collect();
    if cfg.n_labeled > rest.len() {
        return Err(Error::InvalidParameter(format!(
            "n_labeled = {} exceeds the {} rows available after the test hold-out",
            cfg.n_labeled,
            rest.len()
        )));
    }

    let mut attempts = 0;
    let labeled = loop {
        attempts += 1;
        let mut candidate: Vec<usize> = rest
            .choose_multiple(&mut rng, cfg.n_labeled)
            .copied()
            .collect();
        let has_pos = candidate.iter().any(|&r| ds.rows[r].label.is_positive());
        let has_neg = candidate.iter().any(|&r| !ds.rows[r].label.is_positive());
        if has_pos && has_neg {
            candidate.sort_unstable();
            break candidate;
        }
        if attempts >= cfg.max_attempts.max(1) {
            return Err(Error::SingleClass { attempts });
        }
    };
    let mut is_labeled = vec![false; n];
    for &r in &labeled {
        is_labeled[r] = true;
    }
    let unlabeled: Vec<usize> = rest.iter().copied().filter(|&r| !is_labeled[r]).collect();
    let test = if cfg.transductive {
        unlabeled.clone()
    } else {
        test
    };
    let manifest = SplitManifest {
        labeled,
        unlabeled,
        test,
    };
    let (dataset, test) = manifest.apply(
        ds,
        &format!("split(seed={}, n_labeled={})", cfg.seed, cfg.n_labeled),
    )?;
    Ok(Split {
        dataset,
        test,
        manifest,
    })
}

/// Draws `size` rows with per-class quotas allocated by largest remainder.
fn stratified_sample<R: Rng>(ds: &LabeledDataset, size: usize, rng: &mut R) -> Vec<usize> {
    let n = ds.len();
    if size == 0 || n == 0 {
        return Vec::new();
    }
    let pos: Vec<usize> = (0..n).filter(|&r| ds.rows[r].label.is_positive()).collect();
    let neg: Vec<usize> = (0..n)
        .filter(|&r| !ds.rows[r].label.is_positive())
        .collect();
    let exact_pos = size as f64 * pos.len() as f64 / n as f64;
    let exact_neg = size as f64 * neg.len() as f64 / n as f64;
    let mut q_pos = exact_pos.floor() as usize;
    let mut q_neg = exact_neg.floor() as usize;
    if q_pos + q_neg < size {
        if exact_pos - q_pos as f64 >= exact_neg - q_neg as f64 {
            q_pos += 1;
        } else {
            q_neg += 1;
        }
    }
    let mut out: Vec<usize> = pos
        .choose_multiple(rng, q_pos.min(pos.len()))
        .copied()
        .collect();
    out.extend(neg.choose_multiple(rng, q_neg.min(neg.len())).copied());
    out.sort_unstable();
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_pos: usize,
    pub n_neg: usize,
    pub n_unlabeled: usize,
    pub n_test: usize,
    pub dim: usize,
    /// Distance between the two class means along the first axis.
    pub separation: f64,
    /// Positive fraction of the unlabeled and test mixtures.
    pub prior: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_pos: 50,
            n_neg: 50,
            n_unlabeled: 500,
            n_test: 1000,
            dim: 2,
            separation: 2.0,
            prior: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub dataset: SemiSupervisedDataset,
    pub test: TestSet,
    /// Hidden labels of the unlabeled pool.
    pub unlabeled_labels: Vec<Label>,
}

impl SynthOutput {
    /// Flattens into one labeled table (positives, negatives, unlabeled with
    /// hidden labels, test) plus the manifest describing the pools.
    pub fn to_labeled(&self) -> (LabeledDataset, SplitManifest) {
        let d = &self.dataset;
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for x in &d.positives {
            rows.push(x.clone());
            labels.push(Label::Positive);
        }
        for x in &d.negatives {
            rows.push(x.clone());
            labels.push(Label::Negative);
        }
        let n_lab = rows.len();
        rows.extend(d.unlabeled.iter().cloned());
        labels.extend(&self.unlabeled_labels);
        let n_pool = rows.len();
        rows.extend(self.test.points.iter().cloned());
        labels.extend(&self.test.labels);
        let manifest = SplitManifest {
            labeled: (0..n_lab).collect(),
            unlabeled: (n_lab..n_pool).collect(),
            test: (n_pool..rows.len()).collect(),
        };
        (LabeledDataset::from_dense(&rows, &labels, d.dim), manifest)
    }
}

/// Positives from `N(+s/2 e1, I)`, negatives from `N(-s/2 e1, I)`; unlabeled and
/// test points from the prior-weighted mixture.
pub fn synth_gaussian(cfg: &SynthConfig) -> Result<SynthOutput> {
    if !(cfg.prior > 0.0 && cfg.prior < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "prior must lie in (0, 1), got {}",
            cfg.prior
        )));
    }
    if cfg.dim == 0 {
        return Err(Error::InvalidParameter("dim must be positive".into()));
    }
    if !cfg.separation.is_finite() {
        return Err(Error::InvalidParameter("separation must be finite".into()));
    }
    let mut rng = stream_rng(derive_seed(cfg.seed, stream::SYNTH, 0));
    let half = cfg.separation / 2.0;
    let draw = |label: Label, rng: &mut crate::seed::StreamRng| -> Vec<f64> {
        let mut x: Vec<f64> = (0..cfg.dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        x[0] += half * label.sign();
        x
    };
    let mixture = |count: usize, rng: &mut crate::seed::StreamRng| -> (Vec<Vec<f64>>, Vec<Label>) {
        let mut xs = Vec::with_capacity(count);
        let mut ys = Vec::with_capacity(count);
        for _ in 0..count {
            let label = if rng.random::<f64>() < cfg.prior {
                Label::Positive
            } else {
                Label::Negative
            };
            xs.push(draw(label, rng));
            ys.push(label);
        }
        (xs, ys)
    };
    let positives: Vec<Vec<f64>> = (0..cfg.n_pos)
        .map(|_| draw(Label::Positive, &mut rng))
        .collect();
    let negatives: Vec<Vec<f64>> = (0..cfg.n_neg)
        .map(|_| draw(Label::Negative, &mut rng))
        .collect();
    let (unlabeled, unlabeled_labels) = mixture(cfg.n_unlabeled, &mut rng);
    let (test_points, test_labels) = mixture(cfg.n_test, &mut rng);
    let dataset = SemiSupervisedDataset {
        positives,
        negatives,
        unlabeled,
        dim: cfg.dim,
        provenance: format!(
            "synth_gaussian(separation={}, prior={}, seed={})",
            cfg.separation, cfg.prior, cfg.seed
        ),
    };
    Ok(SynthOutput {
        dataset,
        test: TestSet {
            points: test_points,
            labels: test_labels,
        },
        unlabeled_labels,
    })
}
