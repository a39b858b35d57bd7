//! Run configuration: a flat TOML key-value file merged with command-line
//! overrides. Every flag overrides the config key of the same name, with
//! dashes turned into underscores (`--batch-p` sets `batch_p`).

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use qsgauc_core::{CvGrid, EvalStrategy, Hyperparams, SplitConfig, SynthConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Loads `file` (if any), applies `overrides`, and deserializes the result.
/// Keys the target type does not know are rejected.
pub fn resolve<C, O>(file: Option<&Path>, overrides: &O) -> Result<C>
where
    C: Serialize + DeserializeOwned,
    O: Serialize,
{
    let mut table = match file {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            text.parse::<toml::Table>()
                .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))?
        }
        None => toml::Table::new(),
    };
    let flags = toml::Table::try_from(overrides).map_err(|e| CliError::Config(e.to_string()))?;
    table.extend(flags);
    let config: C = table
        .clone()
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;

    // Anything that does not survive a round trip was not a recognised key.
    let known = toml::Table::try_from(&config).map_err(|e| CliError::Config(e.to_string()))?;
    let mut unknown: Vec<&String> = table.keys().filter(|k| !known.contains_key(*k)).collect();
    unknown.sort();
    if let Some(key) = unknown.first() {
        return Err(CliError::Config(format!("unknown config key `{key}`")));
    }
    Ok(config)
}

/// The resolved configuration as written beside a run's outputs.
pub fn render<C: Serialize>(config: &C) -> Result<String> {
    toml::to_string(config).map_err(|e| CliError::Config(e.to_string()))
}

fn required<'a>(value: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| CliError::Config(format!("missing required config key `{key}`")))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    #[default]
    Auto,
    OnDemand,
    PoolCache,
}

impl From<Strategy> for EvalStrategy {
    fn from(s: Strategy) -> Self {
        match s {
            Strategy::Auto => EvalStrategy::Auto,
            Strategy::OnDemand => EvalStrategy::OnDemand,
            Strategy::PoolCache => EvalStrategy::PoolCache,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub theta: f64,
    pub sigma: f64,
    pub features: usize,
    pub iterations: usize,
    pub batch_p: usize,
    pub batch_n: usize,
    pub batch_u: usize,
    pub seed: u64,
    pub allow_unsafe_schedule: bool,
}

impl Default for HyperConfig {
    fn default() -> Self {
        let hp = Hyperparams::default();
        Self {
            gamma: hp.gamma,
            lambda: hp.lambda,
            theta: hp.theta,
            sigma: hp.sigma,
            features: hp.feature_count,
            iterations: hp.iterations,
            batch_p: hp.batch_p,
            batch_n: hp.batch_n,
            batch_u: hp.batch_u,
            seed: hp.master_seed,
            allow_unsafe_schedule: hp.allow_unsafe_schedule,
        }
    }
}

impl HyperConfig {
    pub fn hyperparams(&self) -> Result<Hyperparams> {
        let hp = Hyperparams {
            gamma: self.gamma,
            lambda: self.lambda,
            theta: self.theta,
            sigma: self.sigma,
            feature_count: self.features,
            iterations: self.iterations,
            batch_p: self.batch_p,
            batch_n: self.batch_n,
            batch_u: self.batch_u,
            master_seed: self.seed,
            allow_unsafe_schedule: self.allow_unsafe_schedule,
        };
        hp.validate()
            .map_err(|e| CliError::core("hyperparameters", e))?;
        Ok(hp)
    }
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct HyperArgs {
    /// Weight of the labeled pair risk, in [0, 1]
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Regularization strength
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Step-size scale: eta_t = theta / t
    #[arg(long)]
    pub theta: Option<f64>,
    /// Kernel width: k(x, y) = exp(-sigma |x - y|^2)
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Random features drawn per iteration
    #[arg(long)]
    pub features: Option<usize>,
    /// Training iterations T
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Positives per mini-batch
    #[arg(long)]
    pub batch_p: Option<usize>,
    /// Negatives per mini-batch
    #[arg(long)]
    pub batch_n: Option<usize>,
    /// Unlabeled points per mini-batch
    #[arg(long)]
    pub batch_u: Option<usize>,
    /// Master seed for frequencies and sampling
    #[arg(long)]
    pub seed: Option<u64>,
    /// Train even when theta * lambda is outside (1, 2) or the positive integers
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub allow_unsafe_schedule: Option<bool>,
}

/// Paths shared by commands that read a dataset and its split manifest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProblemConfig {
    pub data: Option<PathBuf>,
    pub split: Option<PathBuf>,
    /// Feature dimension; 0 infers it from the largest index in `data`.
    pub dim: usize,
}

impl ProblemConfig {
    pub fn paths(&self) -> Result<(&Path, &Path)> {
        Ok((
            required(&self.data, "data")?,
            required(&self.split, "split")?,
        ))
    }
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct ProblemArgs {
    /// LIBSVM data file
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Split manifest listing the labeled, unlabeled and test rows of `data`
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Feature dimension (0 infers it from the data)
    #[arg(long)]
    pub dim: Option<usize>,
}

// synth

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthRun {
    pub out_dir: Option<PathBuf>,
    pub n_pos: usize,
    pub n_neg: usize,
    pub n_unlabeled: usize,
    pub n_test: usize,
    pub dim: usize,
    pub separation: f64,
    pub prior: f64,
    pub seed: u64,
}

impl Default for SynthRun {
    fn default() -> Self {
        let s = SynthConfig::default();
        Self {
            out_dir: None,
            n_pos: s.n_pos,
            n_neg: s.n_neg,
            n_unlabeled: s.n_unlabeled,
            n_test: s.n_test,
            dim: s.dim,
            separation: s.separation,
            prior: s.prior,
            seed: s.seed,
        }
    }
}

impl SynthRun {
    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            n_pos: self.n_pos,
            n_neg: self.n_neg,
            n_unlabeled: self.n_unlabeled,
            n_test: self.n_test,
            dim: self.dim,
            separation: self.separation,
            prior: self.prior,
            seed: self.seed,
        }
    }

    pub fn out_dir(&self) -> Result<&Path> {
        required(&self.out_dir, "out_dir")
    }
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct SynthArgs {
    /// Directory receiving data.svm, split.txt and config.toml
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Labeled positives
    #[arg(long)]
    pub n_pos: Option<usize>,
    /// Labeled negatives
    #[arg(long)]
    pub n_neg: Option<usize>,
    /// Unlabeled pool size
    #[arg(long)]
    pub n_unlabeled: Option<usize>,
    /// Held-out test points
    #[arg(long)]
    pub n_test: Option<usize>,
    /// Input dimension
    #[arg(long)]
    pub dim: Option<usize>,
    /// Distance between the class means along the first axis
    #[arg(long)]
    pub separation: Option<f64>,
    /// Positive fraction of the unlabeled and test mixtures
    #[arg(long)]
    pub prior: Option<f64>,
    /// Generator seed
    #[arg(long)]
    pub seed: Option<u64>,
}

// split

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitRun {
    pub input: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub n_labeled: usize,
    pub test_fraction: f64,
    pub seed: u64,
    pub max_attempts: usize,
    pub transductive: bool,
    pub normalize: bool,
}

impl Default for SplitRun {
    fn default() -> Self {
        let s = SplitConfig::default();
        Self {
            input: None,
            out_dir: None,
            n_labeled: s.n_labeled,
            test_fraction: s.test_fraction,
            seed: s.seed,
            max_attempts: s.max_attempts,
            transductive: s.transductive,
            normalize: true,
        }
    }
}

impl SplitRun {
    pub fn split_config(&self) -> SplitConfig {
        SplitConfig {
            n_labeled: self.n_labeled,
            test_fraction: self.test_fraction,
            seed: self.seed,
            max_attempts: self.max_attempts,
            transductive: self.transductive,
        }
    }

    pub fn paths(&self) -> Result<(&Path, &Path)> {
        Ok((
            required(&self.input, "input")?,
            required(&self.out_dir, "out_dir")?,
        ))
    }
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct SplitArgs {
    /// LIBSVM file to split
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Directory receiving data.svm, split.txt, config.toml and, when normalizing, minmax.txt
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Rows that keep their labels
    #[arg(long)]
    pub n_labeled: Option<usize>,
    /// Fraction of rows held out for testing, stratified by class
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// Split seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Resampling attempts when the labeled sample has one class
    #[arg(long)]
    pub max_attempts: Option<usize>,
    /// Evaluate on the unlabeled pool (hidden labels) instead of a held-out set
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub transductive: Option<bool>,
    /// Min-max scale every feature to [0, 1] before splitting
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub normalize: Option<bool>,
}

// train

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainRun {
    #[serde(flatten)]
    pub problem: ProblemConfig,
    pub out_dir: Option<PathBuf>,
    #[serde(flatten)]
    pub hyper: HyperConfig,
    pub strategy: Strategy,
    /// Leading test points whose model values are traced.
    pub probes: usize,
    /// Probe cadence in iterations; 0 disables probe columns.
    pub checkpoint_every: usize,
    /// Add an elapsed-seconds column to the trace.
    pub timing: bool,
}

impl TrainRun {
    pub fn out_dir(&self) -> Result<&Path> {
        required(&self.out_dir, "out_dir")
    }
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub problem: ProblemArgs,
    /// Directory receiving model.txt, trace.csv and config.toml
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub hyper: HyperArgs,
    /// How model values at batch points are computed
    #[arg(long, value_enum)]
    pub strategy: Option<Strategy>,
    /// Leading test points whose model values are traced
    #[arg(long)]
    pub probes: Option<usize>,
    /// Probe cadence in iterations (0 disables)
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Record wall time in the trace
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub timing: Option<bool>,
}

// predict

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictRun {
    pub model: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl PredictRun {
    pub fn paths(&self) -> Result<(&Path, &Path, &Path)> {
        Ok((
            required(&self.model, "model")?,
            required(&self.input, "input")?,
            required(&self.out, "out")?,
        ))
    }
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct PredictArgs {
    /// Model file written by `train`
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// LIBSVM rows to score (labels are ignored)
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Scores file, one per input row
    #[arg(long)]
    pub out: Option<PathBuf>,
}

// cv

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvRun {
    #[serde(flatten)]
    pub problem: ProblemConfig,
    pub out_dir: Option<PathBuf>,
    #[serde(flatten)]
    pub hyper: HyperConfig,
    pub lambda_values: Vec<f64>,
    pub sigma_values: Vec<f64>,
    pub gamma_values: Vec<f64>,
    pub folds: usize,
}

impl Default for CvRun {
    fn default() -> Self {
        let g = CvGrid::default();
        Self {
            problem: ProblemConfig::default(),
            out_dir: None,
            hyper: HyperConfig::default(),
            lambda_values: g.lambda_values,
            sigma_values: g.sigma_values,
            gamma_values: g.gamma_values,
            folds: g.folds,
        }
    }
}

impl CvRun {
    pub fn grid(&self) -> CvGrid {
        CvGrid {
            lambda_values: self.lambda_values.clone(),
            sigma_values: self.sigma_values.clone(),
            gamma_values: self.gamma_values.clone(),
            folds: self.folds,
        }
    }

    pub fn out_dir(&self) -> Result<&Path> {
        required(&self.out_dir, "out_dir")
    }
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct CvArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub problem: ProblemArgs,
    /// Directory receiving cv.tsv, best.toml and config.toml
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub hyper: HyperArgs,
    /// Comma-separated lambda grid
    #[arg(long, value_delimiter = ',')]
    pub lambda_values: Option<Vec<f64>>,
    /// Comma-separated sigma grid
    #[arg(long, value_delimiter = ',')]
    pub sigma_values: Option<Vec<f64>>,
    /// Comma-separated gamma grid
    #[arg(long, value_delimiter = ',')]
    pub gamma_values: Option<Vec<f64>>,
    /// Cross-validation folds
    #[arg(long)]
    pub folds: Option<usize>,
}

// bench

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchRun {
    pub out_dir: Option<PathBuf>,
    #[serde(flatten)]
    pub hyper: HyperConfig,
    pub strategy: Strategy,
    pub n_pos: usize,
    pub n_neg: usize,
    pub unlabeled_sizes: Vec<usize>,
    pub n_test: usize,
    pub dim: usize,
    pub separation: f64,
    pub prior: f64,
    pub trials: usize,
    /// Largest point count the exact solver accepts.
    pub solver_cap: usize,
}

impl Default for BenchRun {
    fn default() -> Self {
        let s = SynthConfig::default();
        Self {
            out_dir: None,
            hyper: HyperConfig::default(),
            strategy: Strategy::OnDemand,
            n_pos: s.n_pos,
            n_neg: s.n_neg,
            unlabeled_sizes: vec![500, 1000, 2000],
            n_test: s.n_test,
            dim: s.dim,
            separation: s.separation,
            prior: s.prior,
            trials: 10,
            solver_cap: qsgauc_core::oracle::DEFAULT_SOLVER_CAP,
        }
    }
}

impl BenchRun {
    pub fn out_dir(&self) -> Result<&Path> {
        required(&self.out_dir, "out_dir")
    }
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct BenchArgs {
    /// Directory receiving bench.tsv and config.toml
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub hyper: HyperArgs,
    /// How the trainer evaluates the model at batch points
    #[arg(long, value_enum)]
    pub strategy: Option<Strategy>,
    /// Labeled positives per trial
    #[arg(long)]
    pub n_pos: Option<usize>,
    /// Labeled negatives per trial
    #[arg(long)]
    pub n_neg: Option<usize>,
    /// Comma-separated unlabeled pool sizes
    #[arg(long, value_delimiter = ',')]
    pub unlabeled_sizes: Option<Vec<usize>>,
    /// Held-out test points per trial
    #[arg(long)]
    pub n_test: Option<usize>,
    /// Input dimension
    #[arg(long)]
    pub dim: Option<usize>,
    /// Distance between the class means
    #[arg(long)]
    pub separation: Option<f64>,
    /// Positive fraction of the unlabeled and test mixtures
    #[arg(long)]
    pub prior: Option<f64>,
    /// Trials per pool size
    #[arg(long)]
    pub trials: Option<usize>,
    /// Largest point count the exact solver accepts
    #[arg(long)]
    pub solver_cap: Option<usize>,
}

// diag

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagRun {
    pub out_dir: Option<PathBuf>,
    #[serde(flatten)]
    pub hyper: HyperConfig,
    /// Horizon of the coefficient bound check.
    pub horizon: usize,
    /// Also run the convergence study against the exact solution.
    pub convergence: bool,
    pub strategy: Strategy,
    pub repeats: usize,
    pub n_pos: usize,
    pub n_neg: usize,
    pub n_unlabeled: usize,
    pub n_probes: usize,
    pub data_dim: usize,
    pub separation: f64,
    pub data_seed: u64,
    pub fit_start: usize,
    pub per_decade: usize,
}

impl Default for DiagRun {
    fn default() -> Self {
        Self {
            out_dir: None,
            hyper: HyperConfig {
                features: 256,
                iterations: 10_000,
                ..HyperConfig::default()
            },
            horizon: 10_000,
            convergence: false,
            strategy: Strategy::PoolCache,
            repeats: 10,
            n_pos: 50,
            n_neg: 50,
            n_unlabeled: 500,
            n_probes: 20,
            data_dim: 2,
            separation: 2.0,
            data_seed: 1,
            fit_start: 100,
            per_decade: 6,
        }
    }
}

impl DiagRun {
    pub fn out_dir(&self) -> Result<&Path> {
        required(&self.out_dir, "out_dir")
    }
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct DiagArgs {
    /// Directory receiving schedule.tsv, config.toml and optionally convergence.tsv
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub hyper: HyperArgs,
    /// Horizon t of the coefficient bound check
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Run the convergence study on synthetic data
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub convergence: Option<bool>,
    /// How the trainer evaluates the model at batch points
    #[arg(long, value_enum)]
    pub strategy: Option<Strategy>,
    /// Training repeats averaged by the study
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Labeled positives in the study data
    #[arg(long)]
    pub n_pos: Option<usize>,
    /// Labeled negatives in the study data
    #[arg(long)]
    pub n_neg: Option<usize>,
    /// Unlabeled pool size of the study data
    #[arg(long)]
    pub n_unlabeled: Option<usize>,
    /// Fixed probe points at which the error is measured
    #[arg(long)]
    pub n_probes: Option<usize>,
    /// Input dimension of the study data
    #[arg(long)]
    pub data_dim: Option<usize>,
    /// Class separation of the study data
    #[arg(long)]
    pub separation: Option<f64>,
    /// Seed of the study data
    #[arg(long)]
    pub data_seed: Option<u64>,
    /// First iteration included in the slope fit
    #[arg(long)]
    pub fit_start: Option<usize>,
    /// Checkpoints per decade of iterations
    #[arg(long)]
    pub per_decade: Option<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, "lambda = 2\nsigma = 0.5\nout_dir = \"a\"\n").unwrap();
        let flags = TrainArgs {
            hyper: HyperArgs {
                sigma: Some(4.0),
                ..HyperArgs::default()
            },
            ..TrainArgs::default()
        };
        let run: TrainRun = resolve(Some(&path), &flags).unwrap();
        assert_eq!(run.hyper.lambda, 2.0);
        assert_eq!(run.hyper.sigma, 4.0);
        assert_eq!(run.out_dir.as_deref(), Some(Path::new("a")));
        assert_eq!(run.hyper.features, HyperConfig::default().features);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, "lamda = 2\n").unwrap();
        let err = resolve::<TrainRun, _>(Some(&path), &TrainArgs::default()).unwrap_err();
        assert_eq!(err.code(), "E_CONFIG");
        assert!(err.to_string().contains("lamda"), "{err}");
    }

    #[test]
    fn wrong_types_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, "iterations = \"many\"\n").unwrap();
        let err = resolve::<TrainRun, _>(Some(&path), &TrainArgs::default()).unwrap_err();
        assert_eq!(err.code(), "E_CONFIG");
    }

    #[test]
    fn rendered_config_resolves_to_itself() {
        let run = CvRun {
            folds: 3,
            lambda_values: vec![0.5, 1.0],
            ..CvRun::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.toml");
        fs::write(&path, render(&run).unwrap()).unwrap();
        let back: CvRun = resolve(Some(&path), &CvArgs::default()).unwrap();
        assert_eq!(back, run);
    }

    #[test]
    fn missing_paths_are_named() {
        let run = TrainRun::default();
        let err = run.out_dir().unwrap_err();
        assert!(err.to_string().contains("out_dir"));
    }
}
