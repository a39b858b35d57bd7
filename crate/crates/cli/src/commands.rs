use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use qsgauc_core::loss::SquarePairLoss;
use qsgauc_core::oracle::solve_kernel_closed_form_capped;
use qsgauc_core::seed::{derive_seed, stream};
use qsgauc_core::{
    auc, coefficient_schedule_check, convergence_study, cross_validate, empirical_risks,
    normalize_unit_interval, solve_kernel_closed_form, split_semi, synth_gaussian, trainer,
    write_libsvm, CoefficientHistory, ConvergenceConfig, ConvergenceReport, Error as CoreError,
    Label, RiskLoss, ScheduleReport, SemiSupervisedDataset, SynthConfig, TestSet, TrainOptions,
};

use crate::config::{render, BenchRun, CvRun, DiagRun, PredictRun, SplitRun, SynthRun, TrainRun};
use crate::error::{CliError, Result};
use crate::io::{create_dir, read_libsvm, read_model, read_problem, write_atomic, write_text};

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::io(path, e)
}

fn core_err(path: &Path) -> impl Fn(CoreError) -> CliError + '_ {
    move |e| CliError::core(path.display().to_string(), e)
}

/// AUC of `scores`, or `None` when the labels hold a single class.
fn maybe_auc(scores: &[f64], labels: &[Label]) -> Option<f64> {
    let has = |positive: bool| labels.iter().any(|l| l.is_positive() == positive);
    if has(true) && has(false) {
        auc(scores, labels).ok()
    } else {
        None
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"))
}

fn test_auc<F>(test: &TestSet, predict: F) -> Result<Option<f64>>
where
    F: Fn(&[Vec<f64>]) -> qsgauc_core::Result<Vec<f64>>,
{
    if test.is_empty() {
        return Ok(None);
    }
    let scores = predict(&test.points).map_err(|e| CliError::core("scoring test set", e))?;
    Ok(maybe_auc(&scores, &test.labels))
}

// synth

pub struct SynthSummary {
    pub data: PathBuf,
    pub counts: (usize, usize, usize, usize),
}

impl fmt::Display for SynthSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (p, n, u, t) = self.counts;
        write!(
            f,
            "wrote {} ({p} positive, {n} negative, {u} unlabeled, {t} test)",
            self.data.display()
        )
    }
}

pub fn synth(run: &SynthRun) -> Result<SynthSummary> {
    let out_dir = run.out_dir()?;
    let generated = synth_gaussian(&run.synth_config()).map_err(|e| CliError::core("synth", e))?;
    let (table, manifest) = generated.to_labeled();

    create_dir(out_dir)?;
    let data = out_dir.join("data.svm");
    write_atomic(&data, |w| write_libsvm(&table, w).map_err(core_err(&data)))?;
    let split = out_dir.join("split.txt");
    write_atomic(&split, |w| manifest.write(w).map_err(core_err(&split)))?;
    write_text(&out_dir.join("config.toml"), &render(run)?)?;
    let (p, n, u) = generated.dataset.counts();
    Ok(SynthSummary {
        data,
        counts: (p, n, u, generated.test.len()),
    })
}

// split

pub struct SplitSummary {
    pub counts: (usize, usize, usize, usize),
}

impl fmt::Display for SplitSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (p, n, u, t) = self.counts;
        write!(
            f,
            "split: {p} positive, {n} negative, {u} unlabeled, {t} test"
        )
    }
}

pub fn split(run: &SplitRun) -> Result<SplitSummary> {
    let (input, out_dir) = run.paths()?;
    let raw = read_libsvm(input)?;
    let (table, ranges) = if run.normalize {
        let (scaled, ranges) = normalize_unit_interval(&raw);
        (scaled, Some(ranges))
    } else {
        (raw, None)
    };
    let result = split_semi(&table, &run.split_config()).map_err(core_err(input))?;

    create_dir(out_dir)?;
    let data = out_dir.join("data.svm");
    write_atomic(&data, |w| write_libsvm(&table, w).map_err(core_err(&data)))?;
    let manifest = out_dir.join("split.txt");
    write_atomic(&manifest, |w| {
        result.manifest.write(w).map_err(core_err(&manifest))
    })?;
    if let Some(ranges) = ranges {
        let path = out_dir.join("minmax.txt");
        write_atomic(&path, |w| ranges.write(w).map_err(core_err(&path)))?;
    }
    write_text(&out_dir.join("config.toml"), &render(run)?)?;
    let (p, n, u) = result.dataset.counts();
    Ok(SplitSummary {
        counts: (p, n, u, result.test.len()),
    })
}

// train

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub iterations: usize,
    /// Composite square-loss risk over the training pools.
    pub surrogate_risk: f64,
    pub labeled_auc: Option<f64>,
    pub test_auc: Option<f64>,
    pub elapsed: Duration,
}

impl fmt::Display for TrainSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "iterations\t{}", self.iterations)?;
        writeln!(f, "surrogate_risk\t{:.6}", self.surrogate_risk)?;
        writeln!(f, "labeled_auc\t{}", fmt_opt(self.labeled_auc))?;
        write!(f, "test_auc\t{}", fmt_opt(self.test_auc))
    }
}

fn train_options(run: &TrainRun, test: &TestSet) -> Result<TrainOptions> {
    if run.probes > test.len() {
        return Err(CliError::Config(format!(
            "probes = {} but the split has only {} test points",
            run.probes,
            test.len()
        )));
    }
    let t = run.hyper.iterations;
    let every = run.checkpoint_every;
    let mut checkpoints: Vec<usize> = match t.checked_div(every) {
        Some(k) => (1..=k).map(|k| k * every).collect(),
        None => Vec::new(),
    };
    if run.timing && checkpoints.last() != Some(&t) {
        checkpoints.push(t);
    }
    Ok(TrainOptions {
        probes: if checkpoints.is_empty() {
            Vec::new()
        } else {
            test.points[..run.probes].to_vec()
        },
        checkpoints,
        strategy: run.strategy.into(),
        timing: run.timing,
        ..TrainOptions::default()
    })
}

fn surrogate_risk(
    ds: &SemiSupervisedDataset,
    model: &CoefficientHistory,
    gamma: f64,
) -> Result<f64> {
    let score = |pool: &[Vec<f64>]| {
        model
            .predict_batch(pool)
            .map_err(|e| CliError::core("scoring", e))
    };
    let (sp, sn, su) = (
        score(&ds.positives)?,
        score(&ds.negatives)?,
        score(&ds.unlabeled)?,
    );
    let report = empirical_risks(&sp, &sn, &su, gamma, RiskLoss::Surrogate(&SquarePairLoss))
        .map_err(|e| CliError::core("risk", e))?;
    Ok(report.r_pnu)
}

pub fn train(run: &TrainRun) -> Result<TrainSummary> {
    let out_dir = run.out_dir()?;
    let (data, split) = run.problem.paths()?;
    let hp = run.hyper.hyperparams()?;
    let (ds, test) = read_problem(data, split, run.problem.dim)?;
    let options = train_options(run, &test)?;

    let start = Instant::now();
    let (model, trace) =
        trainer::train(&ds, &hp, options).map_err(|e| CliError::core("training", e))?;
    let elapsed = start.elapsed();
    log::info!(
        "trained {} iterations in {:.3}s",
        hp.iterations,
        elapsed.as_secs_f64()
    );

    let surrogate = surrogate_risk(&ds, &model, hp.gamma)?;
    let labeled: Vec<Vec<f64>> = ds.positives.iter().chain(&ds.negatives).cloned().collect();
    let labels: Vec<Label> = std::iter::repeat_n(Label::Positive, ds.positives.len())
        .chain(std::iter::repeat_n(Label::Negative, ds.negatives.len()))
        .collect();
    let labeled_scores = model
        .predict_batch(&labeled)
        .map_err(|e| CliError::core("scoring", e))?;
    let test_auc = test_auc(&test, |x| model.predict_batch(x))?;

    create_dir(out_dir)?;
    let model_path = out_dir.join("model.txt");
    write_atomic(&model_path, |w| {
        model.save(w).map_err(core_err(&model_path))
    })?;
    let trace_path = out_dir.join("trace.csv");
    write_atomic(&trace_path, |w| {
        trace.write_csv(w).map_err(core_err(&trace_path))
    })?;
    write_text(&out_dir.join("config.toml"), &render(run)?)?;

    Ok(TrainSummary {
        iterations: hp.iterations,
        surrogate_risk: surrogate,
        labeled_auc: maybe_auc(&labeled_scores, &labels),
        test_auc,
        elapsed,
    })
}

// predict

pub struct PredictSummary {
    pub rows: usize,
    pub out: PathBuf,
}

impl fmt::Display for PredictSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "scored {} rows into {}", self.rows, self.out.display())
    }
}

pub fn predict(run: &PredictRun) -> Result<PredictSummary> {
    let (model_path, input, out) = run.paths()?;
    let model = read_model(model_path)?;
    let rows = read_libsvm(input)?;
    if rows.dim > model.dim() {
        return Err(CliError::core(
            format!(
                "{} uses feature index {} but the model has dimension {}",
                input.display(),
                rows.dim,
                model.dim()
            ),
            CoreError::DimensionMismatch {
                expected: model.dim(),
                actual: rows.dim,
            },
        ));
    }
    let points: Vec<Vec<f64>> = rows.rows.iter().map(|r| r.to_dense(model.dim())).collect();
    let scores = model.predict_batch(&points).map_err(core_err(input))?;
    write_atomic(out, |w| {
        writeln!(w, "score").map_err(io_err(out))?;
        for s in &scores {
            writeln!(w, "{s}").map_err(io_err(out))?;
        }
        Ok(())
    })?;
    Ok(PredictSummary {
        rows: scores.len(),
        out: out.to_path_buf(),
    })
}

// cv

pub struct CvSummary {
    pub lambda: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub mean_auc: f64,
    pub cells: usize,
}

impl fmt::Display for CvSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "best of {} cells: lambda = {}, sigma = {}, gamma = {}, mean AUC {:.6}",
            self.cells, self.lambda, self.sigma, self.gamma, self.mean_auc
        )
    }
}

pub fn cv(run: &CvRun) -> Result<CvSummary> {
    let out_dir = run.out_dir()?;
    let (data, split) = run.problem.paths()?;
    let base = run.hyper.hyperparams()?;
    let grid = run.grid();
    grid.validate().map_err(|e| CliError::core("grid", e))?;
    let (ds, _) = read_problem(data, split, run.problem.dim)?;

    let result =
        cross_validate(&ds, &grid, &base, base.master_seed).map_err(|e| CliError::core("cv", e))?;
    let best = &result.cells[result.best_index];

    create_dir(out_dir)?;
    let table = out_dir.join("cv.tsv");
    write_atomic(&table, |w| {
        result.write_table(w, true).map_err(core_err(&table))
    })?;
    let chosen = format!(
        "gamma = {:?}\nlambda = {:?}\nsigma = {:?}\ntheta = {:?}\n",
        result.best.gamma, result.best.lambda, result.best.sigma, result.best.theta
    );
    write_text(&out_dir.join("best.toml"), &chosen)?;
    write_text(&out_dir.join("config.toml"), &render(run)?)?;
    Ok(CvSummary {
        lambda: best.lambda,
        sigma: best.sigma,
        gamma: best.gamma,
        mean_auc: best.mean_auc,
        cells: result.cells.len(),
    })
}

// bench

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n_unlabeled: usize,
    pub n_total: usize,
    pub trial: usize,
    pub method: &'static str,
    /// `None` when the method refused the problem.
    pub seconds: Option<f64>,
    pub test_auc: Option<f64>,
}

impl BenchRow {
    pub const HEADER: &'static str =
        "n_unlabeled\tn_total\ttrial\tmethod\tseconds\ttest_auc\tstatus";

    fn status(&self) -> &'static str {
        if self.seconds.is_some() {
            "ok"
        } else {
            "refused"
        }
    }
}

impl fmt::Display for BenchRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.n_unlabeled,
            self.n_total,
            self.trial,
            self.method,
            self.seconds
                .map_or_else(|| "NA".to_string(), |s| format!("{s:.6}")),
            self.test_auc
                .map_or_else(|| "NA".to_string(), |a| format!("{a:?}")),
            self.status()
        )
    }
}

pub struct BenchSummary {
    pub rows: Vec<BenchRow>,
}

impl fmt::Display for BenchSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut sizes: Vec<usize> = self.rows.iter().map(|r| r.n_unlabeled).collect();
        sizes.dedup();
        let mut lines = vec!["n_unlabeled\tmethod\tmean_seconds\tmean_test_auc".to_string()];
        for n in sizes {
            for method in ["qsg", "exact"] {
                let rows: Vec<&BenchRow> = self
                    .rows
                    .iter()
                    .filter(|r| r.n_unlabeled == n && r.method == method)
                    .collect();
                let mean = |get: fn(&BenchRow) -> Option<f64>| {
                    let v: Option<Vec<f64>> = rows.iter().map(|r| get(r)).collect();
                    v.filter(|v| !v.is_empty())
                        .map(|v| v.iter().sum::<f64>() / v.len() as f64)
                };
                lines.push(match mean(|r| r.seconds) {
                    Some(s) => format!("{n}\t{method}\t{s:.4}\t{}", fmt_opt(mean(|r| r.test_auc))),
                    None => format!("{n}\t{method}\trefused\tNA"),
                });
            }
        }
        f.write_str(&lines.join("\n"))
    }
}

pub fn bench(run: &BenchRun) -> Result<BenchSummary> {
    let out_dir = run.out_dir()?;
    let hp = run.hyper.hyperparams()?;
    if run.trials == 0 || run.unlabeled_sizes.is_empty() {
        return Err(CliError::Config(
            "bench needs at least one trial and one pool size".into(),
        ));
    }
    let mut rows = Vec::new();
    for &n_unlabeled in &run.unlabeled_sizes {
        for trial in 0..run.trials {
            let generated = synth_gaussian(&SynthConfig {
                n_pos: run.n_pos,
                n_neg: run.n_neg,
                n_unlabeled,
                n_test: run.n_test,
                dim: run.dim,
                separation: run.separation,
                prior: run.prior,
                seed: derive_seed(hp.master_seed, stream::SYNTH, trial as u64),
            })
            .map_err(|e| CliError::core("bench data", e))?;
            let ds = &generated.dataset;
            let n_total = ds.total();
            let row = |method, seconds, test_auc| BenchRow {
                n_unlabeled,
                n_total,
                trial,
                method,
                seconds,
                test_auc,
            };

            let trial_hp = qsgauc_core::Hyperparams {
                master_seed: derive_seed(hp.master_seed, stream::REPEAT, trial as u64),
                ..hp.clone()
            };
            let options = TrainOptions {
                strategy: run.strategy.into(),
                ..TrainOptions::default()
            };
            let start = Instant::now();
            let (model, _) = trainer::train(ds, &trial_hp, options)
                .map_err(|e| CliError::core("bench training", e))?;
            let secs = start.elapsed().as_secs_f64();
            log::info!("n_unlabeled {n_unlabeled} trial {trial}: trainer {secs:.3}s");
            rows.push(row(
                "qsg",
                Some(secs),
                test_auc(&generated.test, |x| model.predict_batch(x))?,
            ));

            let start = Instant::now();
            match solve_kernel_closed_form_capped(ds, hp.gamma, hp.lambda, hp.sigma, run.solver_cap)
            {
                Ok(exact) => {
                    let secs = start.elapsed().as_secs_f64();
                    rows.push(row(
                        "exact",
                        Some(secs),
                        test_auc(&generated.test, |x| exact.predict_batch(x))?,
                    ));
                }
                Err(CoreError::OverCap { .. }) => rows.push(row("exact", None, None)),
                Err(e) => return Err(CliError::core("bench exact solver", e)),
            }
        }
    }

    create_dir(out_dir)?;
    let table = out_dir.join("bench.tsv");
    write_atomic(&table, |w| {
        writeln!(w, "{}", BenchRow::HEADER).map_err(io_err(&table))?;
        for r in &rows {
            writeln!(w, "{r}").map_err(io_err(&table))?;
        }
        Ok(())
    })?;
    write_text(&out_dir.join("config.toml"), &render(run)?)?;
    Ok(BenchSummary { rows })
}

// diag

pub struct DiagSummary {
    pub schedule: ScheduleReport,
    pub convergence: Option<ConvergenceReport>,
}

impl fmt::Display for DiagSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.schedule;
        write!(
            f,
            "schedule theta*lambda = {}: max |a| {:e} (bound {:e}), sum a^2 {:e} (bound {:e}): {}",
            s.theta * s.lambda,
            s.max_abs,
            s.max_bound,
            s.sum_sq,
            s.sum_sq_bound,
            if s.passed() { "PASS" } else { "FAIL" }
        )?;
        if let Some(c) = &self.convergence {
            if c.slope_defined {
                write!(f, "\nconvergence slope {:.4}", c.fitted_slope)?;
            } else {
                write!(f, "\nconvergence slope undefined")?;
            }
        }
        Ok(())
    }
}

pub const SCHEDULE_HEADER: &str =
    "theta\tlambda\tt\tmax_abs\tmax_bound\tmax_ok\tsum_sq\tsum_sq_bound\tsum_sq_ok\tzero_prefix\tzero_prefix_ok\tpassed";

fn schedule_row(s: &ScheduleReport) -> String {
    let (prefix, prefix_ok) = match s.zero_prefix {
        Some((n, ok)) => (n.to_string(), ok.to_string()),
        None => ("NA".to_string(), "NA".to_string()),
    };
    format!(
        "{:?}\t{:?}\t{}\t{:e}\t{:e}\t{}\t{:e}\t{:e}\t{}\t{prefix}\t{prefix_ok}\t{}",
        s.theta,
        s.lambda,
        s.t,
        s.max_abs,
        s.max_bound,
        s.max_ok,
        s.sum_sq,
        s.sum_sq_bound,
        s.sum_sq_ok,
        s.passed()
    )
}

pub fn diag(run: &DiagRun) -> Result<DiagSummary> {
    let out_dir = run.out_dir()?;
    let hp = run.hyper.hyperparams()?;
    let schedule = coefficient_schedule_check(hp.theta, hp.lambda, run.horizon)
        .map_err(|e| CliError::core("schedule", e))?;

    let convergence = if run.convergence {
        if run.n_probes == 0 || run.repeats == 0 || run.per_decade == 0 {
            return Err(CliError::Config(
                "n_probes, repeats and per_decade must be positive".into(),
            ));
        }
        let generated = synth_gaussian(&SynthConfig {
            n_pos: run.n_pos,
            n_neg: run.n_neg,
            n_unlabeled: run.n_unlabeled,
            n_test: run.n_probes,
            dim: run.data_dim,
            separation: run.separation,
            prior: 0.5,
            seed: run.data_seed,
        })
        .map_err(|e| CliError::core("diag data", e))?;
        let ds = &generated.dataset;
        let fstar = solve_kernel_closed_form(ds, hp.gamma, hp.lambda, hp.sigma)
            .map_err(|e| CliError::core("exact solution", e))?;
        let t = hp.iterations;
        let config = ConvergenceConfig {
            repeats: run.repeats,
            checkpoints: trainer::log_spaced((run.fit_start / 10).max(1), t, run.per_decade),
            fit_range: (run.fit_start, t),
            strategy: run.strategy.into(),
        };
        Some(
            convergence_study(ds, &hp, &fstar, &generated.test.points, &config)
                .map_err(|e| CliError::core("convergence study", e))?,
        )
    } else {
        None
    };

    create_dir(out_dir)?;
    write_text(
        &out_dir.join("schedule.tsv"),
        &format!("{SCHEDULE_HEADER}\n{}\n", schedule_row(&schedule)),
    )?;
    if let Some(report) = &convergence {
        let path = out_dir.join("convergence.tsv");
        write_atomic(&path, |w| report.write_table(w).map_err(core_err(&path)))?;
    }
    write_text(&out_dir.join("config.toml"), &render(run)?)?;
    Ok(DiagSummary {
        schedule,
        convergence,
    })
}
