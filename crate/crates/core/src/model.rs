//! The trained model: a coefficient history whose entries are paired with
//! seed-regenerated feature blocks at prediction time.
//!
//! Entry `i` stores the coefficient `alpha_i` exactly as it was appended at
//! iteration `i` together with the factor `decay_i` by which all earlier
//! entries were scaled just before it was appended. The effective coefficient
//! of entry `i` after `t` iterations is therefore
//!
//! ```text
//! alpha_i * decay_{i+1} * ... * decay_t * tail_decay
//! ```
//!
//! and prediction evaluates the same sum by a forward recursion
//! `f <- decay_i * f + <alpha_i, phi_i(x)>`, which is also what the trainer
//! uses for its running values, so both paths agree bit for bit.

use std::io::{BufRead, Write};

use crate::error::{check_dim, Error, ModelFormatError, Result};
use crate::rff::{sample_frequencies, FrequencyBlock};
use crate::seed::iteration_seed;

pub const FORMAT_MAGIC: &str = "qsgauc-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientHistory {
    master_seed: u64,
    feature_count: usize,
    sigma: f64,
    dim: usize,
    decays: Vec<f64>,
    /// Row-major `len x 2 * feature_count`.
    alphas: Vec<f64>,
    tail_decay: f64,
}

/// Borrowed view of one history entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry<'a> {
    /// 1-based iteration index.
    pub iteration: usize,
    pub decay: f64,
    pub alpha: &'a [f64],
}

impl CoefficientHistory {
    pub fn new(master_seed: u64, dim: usize, feature_count: usize, sigma: f64) -> Result<Self> {
        if dim == 0 || feature_count == 0 {
            return Err(Error::InvalidParameter(
                "dim and feature_count must be positive".into(),
            ));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        Ok(Self {
            master_seed,
            feature_count,
            sigma,
            dim,
            decays: Vec::new(),
            alphas: Vec::new(),
            tail_decay: 1.0,
        })
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.decays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decays.is_empty()
    }

    pub fn alpha_len(&self) -> usize {
        2 * self.feature_count
    }

    /// Decay recorded since the last appended entry (1 when none is pending).
    pub fn tail_decay(&self) -> f64 {
        self.tail_decay
    }

    pub fn entry(&self, iteration: usize) -> Entry<'_> {
        let k = self.alpha_len();
        let i = iteration - 1;
        Entry {
            iteration,
            decay: self.decays[i],
            alpha: &self.alphas[i * k..(i + 1) * k],
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = Entry<'_>> {
        (1..=self.len()).map(|i| self.entry(i))
    }

    /// Scales every existing coefficient by `factor`.
    ///
    /// The factor is folded into the next appended entry (or the tail decay if
    /// none follows) instead of touching the stored rows.
    pub fn scale_existing(&mut self, factor: f64) {
        self.tail_decay *= factor;
    }

    pub fn push(&mut self, alpha: Vec<f64>) -> Result<()> {
        if alpha.len() != self.alpha_len() {
            return Err(Error::DimensionMismatch {
                expected: self.alpha_len(),
                actual: alpha.len(),
            });
        }
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidInput("coefficients must be finite".into()));
        }
        self.decays.push(self.tail_decay);
        self.alphas.extend_from_slice(&alpha);
        self.tail_decay = 1.0;
        Ok(())
    }

    /// Current coefficient of entry `iteration` with all later decays applied.
    pub fn effective_alpha(&self, iteration: usize) -> Vec<f64> {
        let factor = self.decay_after(iteration);
        self.entry(iteration)
            .alpha
            .iter()
            .map(|a| a * factor)
            .collect()
    }

    /// Product of the decays applied after entry `iteration` was appended.
    pub fn decay_after(&self, iteration: usize) -> f64 {
        let mut factor = 1.0;
        for &d in &self.decays[iteration..] {
            factor *= d;
        }
        factor * self.tail_decay
    }

    pub fn frequency_block(&self, iteration: usize) -> FrequencyBlock {
        sample_frequencies(
            iteration_seed(self.master_seed, iteration),
            self.dim,
            self.feature_count,
            self.sigma,
        )
        .expect("parameters validated at construction")
    }

    /// The model as it stood after its first `n` iterations.
    pub fn prefix(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            master_seed: self.master_seed,
            feature_count: self.feature_count,
            sigma: self.sigma,
            dim: self.dim,
            decays: self.decays[..n].to_vec(),
            alphas: self.alphas[..n * self.alpha_len()].to_vec(),
            tail_decay: 1.0,
        }
    }

    /// Copy with every coefficient multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for a in &mut out.alphas {
            *a *= c;
        }
        out
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        let mut scratch = vec![0.0; self.alpha_len()];
        let mut f = 0.0;
        for entry in self.entries() {
            let block = self.frequency_block(entry.iteration);
            f = entry.decay * f + block.project(x, entry.alpha, &mut scratch);
        }
        Ok(f * self.tail_decay)
    }

    /// Same values as mapping [`predict`](Self::predict), regenerating each
    /// iteration's frequencies once for the whole batch.
    pub fn predict_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        for x in xs {
            check_dim(self.dim, x.len())?;
        }
        let mut scratch = vec![0.0; self.alpha_len()];
        let mut out = vec![0.0; xs.len()];
        if xs.is_empty() {
            return Ok(out);
        }
        for entry in self.entries() {
            let block = self.frequency_block(entry.iteration);
            for (f, x) in out.iter_mut().zip(xs) {
                *f = entry.decay * *f + block.project(x, entry.alpha, &mut scratch);
            }
        }
        for f in &mut out {
            *f *= self.tail_decay;
        }
        Ok(out)
    }

    /// Writes the text model format:
    ///
    /// ```text
    /// qsgauc-model 1
    /// dim <d>
    /// feature_count <D>
    /// sigma <real>
    /// master_seed <u64>
    /// tail_decay <real>
    /// entries <t>
    /// <i> <decay_i> <alpha_i[0]> ... <alpha_i[2D-1]>     (t rows, i ascending)
    /// ```
    ///
    /// Reals use the shortest decimal form that parses back to the same `f64`.
    pub fn save<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{FORMAT_MAGIC} {FORMAT_VERSION}")?;
        writeln!(out, "dim {}", self.dim)?;
        writeln!(out, "feature_count {}", self.feature_count)?;
        writeln!(out, "sigma {:?}", self.sigma)?;
        writeln!(out, "master_seed {}", self.master_seed)?;
        writeln!(out, "tail_decay {:?}", self.tail_decay)?;
        writeln!(out, "entries {}", self.len())?;
        for entry in self.entries() {
            write!(out, "{} {:?}", entry.iteration, entry.decay)?;
            for a in entry.alpha {
                write!(out, " {a:?}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn load<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let mut next_line =
            || -> Result<Option<String>> { lines.next().transpose().map_err(Error::from) };

        let header = next_line()?.unwrap_or_default();
        let mut parts = header.split_whitespace();
        if parts.next() != Some(FORMAT_MAGIC) {
            return Err(ModelFormatError::BadMagic {
                expected: format!("{FORMAT_MAGIC} {FORMAT_VERSION}"),
                found: header.clone(),
            }
            .into());
        }
        let version = parts.next().unwrap_or("");
        if version != FORMAT_VERSION.to_string() {
            return Err(ModelFormatError::UnsupportedVersion(version.to_string()).into());
        }

        let mut field = |name: &'static str| -> Result<String> {
            let line = next_line()?.ok_or(ModelFormatError::MissingField(name))?;
            match line.split_once(' ') {
                Some((key, value)) if key == name => Ok(value.trim().to_string()),
                _ => Err(ModelFormatError::MissingField(name).into()),
            }
        };
        fn parse<T: std::str::FromStr>(name: &'static str, value: String) -> Result<T> {
            value
                .parse()
                .map_err(|_| ModelFormatError::InvalidField { field: name, value }.into())
        }
        let dim: usize = parse("dim", field("dim")?)?;
        let feature_count: usize = parse("feature_count", field("feature_count")?)?;
        let sigma: f64 = parse("sigma", field("sigma")?)?;
        let master_seed: u64 = parse("master_seed", field("master_seed")?)?;
        let tail_decay: f64 = parse("tail_decay", field("tail_decay")?)?;
        let entries: usize = parse("entries", field("entries")?)?;
        if dim == 0 {
            return Err(ModelFormatError::InvalidField {
                field: "dim",
                value: "0".into(),
            }
            .into());
        }
        if feature_count == 0 {
            return Err(ModelFormatError::InvalidField {
                field: "feature_count",
                value: "0".into(),
            }
            .into());
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(ModelFormatError::InvalidField {
                field: "sigma",
                value: sigma.to_string(),
            }
            .into());
        }
        if !tail_decay.is_finite() {
            return Err(ModelFormatError::InvalidField {
                field: "tail_decay",
                value: tail_decay.to_string(),
            }
            .into());
        }

        let k = 2 * feature_count;
        let mut decays = Vec::with_capacity(entries);
        let mut alphas = Vec::with_capacity(entries * k);
        for row in 1..=entries {
            let Some(line) = next_line()? else {
                return Err(ModelFormatError::Truncated {
                    expected: entries,
                    found: row - 1,
                }
                .into());
            };
            let bad = |reason: String| Error::from(ModelFormatError::BadEntry { row, reason });
            let mut tokens = line.split_whitespace();
            let idx: usize = tokens
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad("missing iteration index".into()))?;
            if idx != row {
                return Err(bad(format!("iteration index {idx} out of sequence")));
            }
            let mut values = Vec::with_capacity(k + 1);
            for tok in tokens {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| bad(format!("`{tok}` is not a number")))?;
                if !v.is_finite() {
                    return Err(bad(format!("`{tok}` is not finite")));
                }
                values.push(v);
            }
            if values.len() != k + 1 {
                return Err(bad(format!(
                    "expected {} values, found {}",
                    k + 1,
                    values.len()
                )));
            }
            decays.push(values[0]);
            alphas.extend_from_slice(&values[1..]);
        }
        while let Some(line) = next_line()? {
            if !line.trim().is_empty() {
                return Err(ModelFormatError::BadEntry {
                    row: entries + 1,
                    reason: "unexpected data after the declared entries".into(),
                }
                .into());
            }
        }
        Ok(Self {
            master_seed,
            feature_count,
            sigma,
            dim,
            decays,
            alphas,
            tail_decay,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rff::feature_map;

    fn toy(entries: usize) -> CoefficientHistory {
        let mut h = CoefficientHistory::new(5, 3, 4, 0.9).unwrap();
        for i in 0..entries {
            h.scale_existing(1.0 - 0.3 / (i + 1) as f64);
            let alpha = (0..8)
                .map(|k| ((i * 8 + k) as f64 * 0.37).sin() / 3.0)
                .collect();
            h.push(alpha).unwrap();
        }
        h
    }

    fn probes(n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| (0..3).map(|j| ((i * 3 + j) as f64 * 0.71).cos()).collect())
            .collect()
    }

    #[test]
    fn empty_history_predicts_zero() {
        let h = CoefficientHistory::new(1, 2, 3, 1.0).unwrap();
        assert_eq!(h.predict(&[0.4, -2.0]).unwrap(), 0.0);
        assert!(h.predict(&[0.4]).is_err());
    }

    #[test]
    fn prediction_is_sum_of_effective_coefficients() {
        let h = toy(6);
        for x in probes(5) {
            let direct: f64 = (1..=6)
                .map(|i| {
                    let phi = feature_map(&x, &h.frequency_block(i)).unwrap();
                    crate::rff::dot(&h.effective_alpha(i), &phi.values)
                })
                .sum();
            let p = h.predict(&x).unwrap();
            assert!((p - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn batch_matches_pointwise_exactly() {
        let h = toy(7);
        let xs = probes(100);
        let batch = h.predict_batch(&xs).unwrap();
        for (x, b) in xs.iter().zip(&batch) {
            assert_eq!(h.predict(x).unwrap().to_bits(), b.to_bits());
        }
        assert_eq!(
            h.predict_batch(&xs[..1]).unwrap(),
            vec![h.predict(&xs[0]).unwrap()]
        );
        assert!(h.predict_batch(&[]).unwrap().is_empty());
    }

    #[test]
    fn prediction_is_linear_in_coefficients() {
        let h = toy(4);
        let scaled = h.scaled(-2.5);
        for x in probes(10) {
            let a = h.predict(&x).unwrap();
            let b = scaled.predict(&x).unwrap();
            assert!((b + 2.5 * a).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn unit_step_decay_zeroes_history() {
        let mut h = toy(3);
        h.scale_existing(0.0);
        for i in 1..=3 {
            assert!(h.effective_alpha(i).iter().all(|a| *a == 0.0));
        }
        assert_eq!(h.predict(&[0.1, 0.2, 0.3]).unwrap(), 0.0);
    }

    #[test]
    fn save_load_roundtrip() {
        for h in [toy(3), toy(0)] {
            let mut buf = Vec::new();
            h.save(&mut buf).unwrap();
            let loaded = CoefficientHistory::load(buf.as_slice()).unwrap();
            assert_eq!(loaded, h);
            for x in probes(10) {
                assert_eq!(
                    loaded.predict(&x).unwrap().to_bits(),
                    h.predict(&x).unwrap().to_bits()
                );
            }
        }
    }

    fn saved(h: &CoefficientHistory) -> String {
        let mut buf = Vec::new();
        h.save(&mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn truncated_file_is_rejected() {
        let text = saved(&toy(3));
        let cut: Vec<&str> = text.lines().take(8).collect();
        match CoefficientHistory::load(cut.join("\n").as_bytes()) {
            Err(Error::ModelFormat(ModelFormatError::Truncated {
                expected: 3,
                found: 1,
            })) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_files_name_the_field() {
        let text = saved(&toy(1));
        let err = |s: &str| CoefficientHistory::load(s.as_bytes()).unwrap_err();
        assert!(matches!(
            err(&text.replace("qsgauc-model 1", "qsgauc-model 2")),
            Error::ModelFormat(ModelFormatError::UnsupportedVersion(_))
        ));
        assert!(matches!(
            err(&text.replace("qsgauc-model", "other")),
            Error::ModelFormat(ModelFormatError::BadMagic { .. })
        ));
        assert!(matches!(
            err(&text.replace("sigma 0.9", "sigma nope")),
            Error::ModelFormat(ModelFormatError::InvalidField { field: "sigma", .. })
        ));
        assert!(matches!(
            err(&text.replace("master_seed", "seed")),
            Error::ModelFormat(ModelFormatError::MissingField("master_seed"))
        ));
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[7] = lines[7].replacen("1 ", "2 ", 1);
        assert!(matches!(
            err(&lines.join("\n")),
            Error::ModelFormat(ModelFormatError::BadEntry { row: 1, .. })
        ));
    }
}
