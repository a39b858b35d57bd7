//! AUC, cross-validated grid search, and the empirical convergence-rate study.

use std::io::Write;
use std::time::{Duration, Instant};

use log::warn;
use rand::seq::SliceRandom;

use crate::data::{Label, SemiSupervisedDataset};
use crate::error::{check_dim, Error, Result};
use crate::oracle::KernelModel;
use crate::seed::{derive_seed, stream, stream_rng};
use crate::trainer::{train, EvalStrategy, Hyperparams, TrainOptions};

/// Wilcoxon–Mann–Whitney statistic with midranks for ties.
pub fn auc(scores: &[f64], labels: &[Label]) -> Result<f64> {
    check_dim(scores.len(), labels.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("scores contain NaN".into()));
    }
    let n_pos = labels.iter().filter(|l| l.is_positive()).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidInput("AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Ranks are 1-based; a tie group spanning ranks i+1..=j gets (i + 1 + j) / 2.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0;
        let positives = order[i..j]
            .iter()
            .filter(|&&k| labels[k].is_positive())
            .count();
        rank_sum += midrank * positives as f64;
        i = j;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvGrid {
    pub lambda_values: Vec<f64>,
    pub sigma_values: Vec<f64>,
    pub gamma_values: Vec<f64>,
    pub folds: usize,
}

impl Default for CvGrid {
    /// `lambda, sigma in {2^-3, ..., 2^3}`, `gamma in {0, 0.1, ..., 1}`, 5 folds.
    fn default() -> Self {
        let dyadic: Vec<f64> = (-3..=3).map(|e| 2f64.powi(e)).collect();
        Self {
            lambda_values: dyadic.clone(),
            sigma_values: dyadic,
            gamma_values: (0..=10).map(|k| k as f64 / 10.0).collect(),
            folds: 5,
        }
    }
}

impl CvGrid {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_values.is_empty()
            || self.sigma_values.is_empty()
            || self.gamma_values.is_empty()
        {
            return Err(Error::InvalidParameter(
                "every grid axis needs at least one value".into(),
            ));
        }
        if self.folds < 2 {
            return Err(Error::InvalidParameter(
                "at least 2 folds are needed".into(),
            ));
        }
        if self
            .lambda_values
            .iter()
            .chain(&self.sigma_values)
            .any(|v| !(*v > 0.0 && v.is_finite()))
        {
            return Err(Error::InvalidParameter(
                "lambda and sigma values must be positive".into(),
            ));
        }
        if self.gamma_values.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return Err(Error::InvalidParameter(
                "gamma values must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.lambda_values.len() * self.sigma_values.len() * self.gamma_values.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvCell {
    pub lambda: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub mean_auc: f64,
    pub folds_used: usize,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct CvResult {
    pub best: Hyperparams,
    pub best_index: usize,
    pub cells: Vec<CvCell>,
}

impl CvResult {
    /// Tab-separated table with a header row. Timing is the last column.
    pub fn write_table<W: Write>(&self, mut out: W, timing: bool) -> Result<()> {
        write!(out, "lambda\tsigma\tgamma\tmean_auc\tfolds_used")?;
        if timing {
            write!(out, "\tseconds")?;
        }
        writeln!(out)?;
        for c in &self.cells {
            write!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                c.lambda, c.sigma, c.gamma, c.mean_auc, c.folds_used
            )?;
            if timing {
                write!(out, "\t{:.3}", c.elapsed.as_secs_f64())?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Stratified k-fold over the labeled pools; the unlabeled pool is shared by every fold.
///
/// Each cell trains with `base` except for `lambda`, `sigma`, `gamma`, and
/// `theta = base.theta * base.lambda / lambda`, which keeps the step-size
/// product fixed across the grid. The winner is the highest mean validation
/// AUC; ties go to the larger lambda, then the larger sigma, then the smaller gamma.
pub fn cross_validate(
    ds: &SemiSupervisedDataset,
    grid: &CvGrid,
    base: &Hyperparams,
    seed: u64,
) -> Result<CvResult> {
    grid.validate()?;
    ds.validate()?;
    let (np, nn, _) = ds.counts();
    if np < grid.folds || nn < grid.folds {
        return Err(Error::InvalidInput(format!(
            "{} folds need at least that many positives ({np}) and negatives ({nn})",
            grid.folds
        )));
    }
    let mut rng = stream_rng(derive_seed(seed, stream::FOLDS, 0));
    let mut assign = |n: usize| -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        let mut fold = vec![0; n];
        for (k, &i) in idx.iter().enumerate() {
            fold[i] = k % grid.folds;
        }
        fold
    };
    let fold_p = assign(np);
    let fold_n = assign(nn);
    let product = base.theta * base.lambda;

    let mut cells = Vec::with_capacity(grid.cells());
    for &lambda in &grid.lambda_values {
        for &sigma in &grid.sigma_values {
            for &gamma in &grid.gamma_values {
                let hp = Hyperparams {
                    lambda,
                    sigma,
                    gamma,
                    theta: product / lambda,
                    ..base.clone()
                };
                let start = Instant::now();
                let mut aucs = Vec::new();
                for fold in 0..grid.folds {
                    let split = |pool: &[Vec<f64>], folds: &[usize]| {
                        let (mut train, mut valid) = (Vec::new(), Vec::new());
                        for (x, &f) in pool.iter().zip(folds) {
                            if f == fold { &mut valid } else { &mut train }.push(x.clone());
                        }
                        (train, valid)
                    };
                    let (tp, vp) = split(&ds.positives, &fold_p);
                    let (tn, vn) = split(&ds.negatives, &fold_n);
                    if tp.is_empty() || tn.is_empty() || vp.is_empty() || vn.is_empty() {
                        warn!("fold {fold} is degenerate (a class is missing); skipped");
                        continue;
                    }
                    let train_ds = SemiSupervisedDataset {
                        positives: tp,
                        negatives: tn,
                        unlabeled: ds.unlabeled.clone(),
                        dim: ds.dim,
                        provenance: format!("{} fold {fold}", ds.provenance),
                    };
                    let (model, _) = train(&train_ds, &hp, TrainOptions::default())?;
                    let points: Vec<Vec<f64>> = vp.iter().chain(&vn).cloned().collect();
                    let labels: Vec<Label> = std::iter::repeat_n(Label::Positive, vp.len())
                        .chain(std::iter::repeat_n(Label::Negative, vn.len()))
                        .collect();
                    aucs.push(auc(&model.predict_batch(&points)?, &labels)?);
                }
                if aucs.is_empty() {
                    return Err(Error::InvalidInput("every fold is degenerate".into()));
                }
                cells.push(CvCell {
                    lambda,
                    sigma,
                    gamma,
                    mean_auc: aucs.iter().sum::<f64>() / aucs.len() as f64,
                    folds_used: aucs.len(),
                    elapsed: start.elapsed(),
                });
            }
        }
    }

    let better = |a: &CvCell, b: &CvCell| {
        a.mean_auc
            .total_cmp(&b.mean_auc)
            .then(a.lambda.total_cmp(&b.lambda))
            .then(a.sigma.total_cmp(&b.sigma))
            .then(b.gamma.total_cmp(&a.gamma))
    };
    let best_index = (0..cells.len())
        .max_by(|&a, &b| better(&cells[a], &cells[b]).then(b.cmp(&a)))
        .expect("grid is nonempty");
    let c = &cells[best_index];
    let best = Hyperparams {
        lambda: c.lambda,
        sigma: c.sigma,
        gamma: c.gamma,
        theta: product / c.lambda,
        ..base.clone()
    };
    Ok(CvResult {
        best,
        best_index,
        cells,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// Completed iteration counts; 0 denotes the initial zero model.
    pub iterations: Vec<usize>,
    /// Mean over probes and repeats of `|f_t(x) - f*(x)|^2`.
    pub mse_vs_fstar: Vec<f64>,
    pub fitted_slope: f64,
    pub fitted_intercept: f64,
    /// False when fewer than two usable points fell in the fit range.
    pub slope_defined: bool,
}

impl ConvergenceReport {
    pub fn write_table<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iteration\tmse")?;
        for (t, e) in self.iterations.iter().zip(&self.mse_vs_fstar) {
            writeln!(out, "{t}\t{e:e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceConfig {
    pub repeats: usize,
    /// Iteration counts at which the error is measured.
    pub checkpoints: Vec<usize>,
    /// Inclusive iteration range used for the slope fit.
    pub fit_range: (usize, usize),
    pub strategy: EvalStrategy,
}

/// Least-squares line through `(ln x, ln y)`; `None` with fewer than two
/// usable points or no spread in `x`.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Trains `repeats` times with master seeds drawn from `hp.master_seed` and
/// measures the mean squared distance to `fstar` at the probes.
pub fn convergence_study(
    ds: &SemiSupervisedDataset,
    hp: &Hyperparams,
    fstar: &KernelModel,
    probes: &[Vec<f64>],
    config: &ConvergenceConfig,
) -> Result<ConvergenceReport> {
    if probes.is_empty() {
        return Err(Error::InvalidInput(
            "convergence study needs probe points".into(),
        ));
    }
    if config.repeats == 0 {
        return Err(Error::InvalidParameter("repeats must be at least 1".into()));
    }
    let target = fstar.predict_batch(probes)?;
    let mut checkpoints: Vec<usize> = config
        .checkpoints
        .iter()
        .copied()
        .filter(|&t| t <= hp.iterations)
        .collect();
    checkpoints.sort_unstable();
    checkpoints.dedup();
    if checkpoints.is_empty() {
        checkpoints.push(hp.iterations);
    }

    let mut sums = vec![0.0; checkpoints.len()];
    for r in 0..config.repeats {
        let run = Hyperparams {
            master_seed: derive_seed(hp.master_seed, stream::REPEAT, r as u64),
            ..hp.clone()
        };
        let (_, trace) = train(
            ds,
            &run,
            TrainOptions {
                probes: probes.to_vec(),
                checkpoints: checkpoints.clone(),
                strategy: config.strategy,
                ..TrainOptions::default()
            },
        )?;
        for (sum, cp) in sums.iter_mut().zip(&trace.checkpoints) {
            let sq: f64 = cp
                .probe_values
                .iter()
                .zip(&target)
                .map(|(f, s)| (f - s) * (f - s))
                .sum();
            *sum += sq / probes.len() as f64;
        }
    }
    let mse: Vec<f64> = sums.iter().map(|s| s / config.repeats as f64).collect();

    let (lo, hi) = config.fit_range;
    let (xs, ys): (Vec<f64>, Vec<f64>) = checkpoints
        .iter()
        .zip(&mse)
        .filter(|(t, _)| (lo..=hi).contains(*t))
        .map(|(t, e)| (*t as f64, *e))
        .unzip();
    let fit = fit_loglog(&xs, &ys);
    Ok(ConvergenceReport {
        iterations: checkpoints,
        mse_vs_fstar: mse,
        fitted_slope: fit.map_or(f64::NAN, |f| f.0),
        fitted_intercept: fit.map_or(f64::NAN, |f| f.1),
        slope_defined: fit.is_some(),
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::data::{synth_gaussian, SynthConfig};

    fn labels(signs: &[i8]) -> Vec<Label> {
        signs
            .iter()
            .map(|&s| {
                if s > 0 {
                    Label::Positive
                } else {
                    Label::Negative
                }
            })
            .collect()
    }

    fn brute_force(scores: &[f64], labels: &[Label]) -> f64 {
        let mut total = 0.0;
        let mut pairs = 0.0;
        for (sp, lp) in scores.iter().zip(labels) {
            for (sn, ln) in scores.iter().zip(labels) {
                if lp.is_positive() && !ln.is_positive() {
                    pairs += 1.0;
                    total += if sp > sn {
                        1.0
                    } else if sp == sn {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        total / pairs
    }

    #[test]
    fn auc_examples() {
        assert_eq!(
            auc(&[2.0, 3.0, 0.0, 1.0], &labels(&[1, 1, -1, -1])).unwrap(),
            1.0
        );
        assert_eq!(
            auc(&[5.0; 6], &labels(&[1, -1, 1, -1, -1, 1])).unwrap(),
            0.5
        );
        assert_eq!(
            auc(&[1.0, 3.0, 2.0, 2.0], &labels(&[1, 1, -1, -1])).unwrap(),
            0.5
        );
        assert!(auc(&[1.0, 2.0], &labels(&[1, 1])).is_err());
        assert!(auc(&[1.0], &labels(&[1, -1])).is_err());
    }

    #[test]
    fn auc_matches_brute_force_on_random_instances() {
        use rand::Rng;
        let mut rng = stream_rng(77);
        let mut checked = 0;
        while checked < 1000 {
            let m = rng.random_range(2..60);
            // Coarse scores so ties are common.
            let scores: Vec<f64> = (0..m)
                .map(|_| rng.random_range(0..8) as f64 / 4.0)
                .collect();
            let labs: Vec<Label> = (0..m)
                .map(|_| {
                    if rng.random_bool(0.4) {
                        Label::Positive
                    } else {
                        Label::Negative
                    }
                })
                .collect();
            let Ok(a) = auc(&scores, &labs) else { continue };
            assert!((a - brute_force(&scores, &labs)).abs() < 1e-12);
            checked += 1;
        }
    }

    proptest! {
        #[test]
        fn auc_sorted_equals_pairs(data in prop::collection::vec((-50i32..50, any::<bool>()), 2..200)) {
            let scores: Vec<f64> = data.iter().map(|d| d.0 as f64).collect();
            let labs: Vec<Label> = data.iter().map(|d| if d.1 { Label::Positive } else { Label::Negative }).collect();
            prop_assume!(labs.iter().any(|l| l.is_positive()) && labs.iter().any(|l| !l.is_positive()));
            prop_assert!((auc(&scores, &labs).unwrap() - brute_force(&scores, &labs)).abs() < 1e-12);
        }

        #[test]
        fn auc_invariant_under_increasing_maps(data in prop::collection::vec((-5.0f64..5.0, any::<bool>()), 2..100)) {
            let scores: Vec<f64> = data.iter().map(|d| d.0).collect();
            let labs: Vec<Label> = data.iter().map(|d| if d.1 { Label::Positive } else { Label::Negative }).collect();
            prop_assume!(labs.iter().any(|l| l.is_positive()) && labs.iter().any(|l| !l.is_positive()));
            let base = auc(&scores, &labs).unwrap();
            let mapped: Vec<f64> = scores.iter().map(|s| (s * 0.5).exp() + 3.0).collect();
            prop_assert_eq!(auc(&mapped, &labs).unwrap(), base);
        }

        #[test]
        fn negation_complements_distinct_scores(data in prop::collection::vec(any::<bool>(), 2..150), seed in any::<u64>()) {
            let labs: Vec<Label> = data.iter().map(|&b| if b { Label::Positive } else { Label::Negative }).collect();
            prop_assume!(labs.iter().any(|l| l.is_positive()) && labs.iter().any(|l| !l.is_positive()));
            let mut idx: Vec<usize> = (0..labs.len()).collect();
            idx.shuffle(&mut stream_rng(seed));
            let scores: Vec<f64> = idx.iter().map(|&i| i as f64 * 0.37).collect();
            let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
            prop_assert_eq!(auc(&scores, &labs).unwrap() + auc(&neg, &labs).unwrap(), 1.0);
        }
    }

    #[test]
    fn loglog_fit_recovers_power_law() {
        let xs: Vec<f64> = (1..20).map(|k| (k * 50) as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-1.1)).collect();
        let (slope, intercept) = fit_loglog(&xs, &ys).unwrap();
        assert!((slope + 1.1).abs() < 1e-12);
        assert!((intercept - 3f64.ln()).abs() < 1e-10);
        assert!(fit_loglog(&[1.0], &[1.0]).is_none());
    }

    fn synth_small(seed: u64, separation: f64) -> SemiSupervisedDataset {
        synth_gaussian(&SynthConfig {
            n_pos: 20,
            n_neg: 20,
            n_unlabeled: 60,
            n_test: 0,
            separation,
            seed,
            ..SynthConfig::default()
        })
        .unwrap()
        .dataset
    }

    fn quick_hp() -> Hyperparams {
        Hyperparams {
            feature_count: 16,
            iterations: 60,
            batch_p: 4,
            batch_n: 4,
            batch_u: 4,
            ..Hyperparams::default()
        }
    }

    #[test]
    fn single_cell_grid() {
        let ds = synth_small(1, 2.0);
        let grid = CvGrid {
            lambda_values: vec![0.5],
            sigma_values: vec![1.0],
            gamma_values: vec![0.3],
            folds: 3,
        };
        let res = cross_validate(&ds, &grid, &quick_hp(), 9).unwrap();
        assert_eq!(res.cells.len(), 1);
        assert_eq!(
            (res.best.lambda, res.best.sigma, res.best.gamma),
            (0.5, 1.0, 0.3)
        );
        assert_eq!(res.best.theta * res.best.lambda, 1.5);
        let mut buf = Vec::new();
        res.write_table(&mut buf, false).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
    }

    #[test]
    fn duplicate_cells_agree() {
        let ds = synth_small(2, 2.0);
        let grid = CvGrid {
            lambda_values: vec![1.0, 1.0],
            sigma_values: vec![0.5],
            gamma_values: vec![0.5],
            folds: 2,
        };
        let res = cross_validate(&ds, &grid, &quick_hp(), 3).unwrap();
        assert_eq!(res.cells[0].mean_auc, res.cells[1].mean_auc);
        let again = cross_validate(&ds, &grid, &quick_hp(), 3).unwrap();
        let aucs = |r: &CvResult| r.cells.iter().map(|c| c.mean_auc).collect::<Vec<_>>();
        assert_eq!(aucs(&res), aucs(&again));
        assert_eq!(res.best_index, 0);
    }

    #[test]
    fn too_few_labeled_points() {
        let ds = synth_small(3, 2.0);
        let grid = CvGrid {
            folds: 50,
            ..CvGrid::default()
        };
        assert!(cross_validate(&ds, &grid, &quick_hp(), 0).is_err());
    }

    #[test]
    fn degenerate_study_reports_undefined_slope() {
        let ds = synth_small(4, 2.0);
        let hp = Hyperparams {
            iterations: 0,
            ..quick_hp()
        };
        let report = convergence_study(
            &ds,
            &hp,
            &KernelModel::zero(1.0),
            &[vec![0.0, 0.0], vec![1.0, 1.0]],
            &ConvergenceConfig {
                repeats: 2,
                checkpoints: vec![0, 10, 100],
                fit_range: (1, 100),
                strategy: EvalStrategy::Auto,
            },
        )
        .unwrap();
        assert_eq!(report.iterations, vec![0]);
        assert_eq!(report.mse_vs_fstar, vec![0.0]);
        assert!(report.fitted_slope.is_nan());
        assert!(!report.slope_defined);
    }
}
