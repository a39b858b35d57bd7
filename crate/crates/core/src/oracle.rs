//! Exact small-scale references: pairwise risks, the full-data functional
//! gradient with the exact kernel, and square-loss minimizers of the
//! regularized composite objective
//!
//! ```text
//! L(f) = gamma * R_pn + (1 - gamma) * (R_pu + R_nu - 1/2) + lambda/2 * |f|^2
//! ```
//!
//! With the square loss each pair term `w * mean_{a in A, b in B} (1 - f_a + f_b)^2`
//! is quadratic in the values `f` at the data points: its Hessian has
//! `kappa * |B|` on the diagonal of `A`, `kappa * |A|` on the diagonal of `B`
//! and `-kappa` on every `(a, b)` cross entry, with `kappa = 2 w / (|A| |B|)`;
//! its gradient at zero is `-kappa * |B|` on `A` and `kappa * |A|` on `B`.
//! Summing the three terms `(gamma, P, N)`, `(1 - gamma, P, U)`, `(1 - gamma, U, N)`
//! gives `R(f) = f'Hf/2 + b'f + const`.

use std::fmt;

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::data::SemiSupervisedDataset;
use crate::error::{check_dim, Error, Pool, Result};
use crate::loss::{zero_one_loss, PairwiseLoss, SquarePairLoss, TripletWeights};
use crate::rff::{dot, gaussian_kernel, FrequencyBlock};

/// Largest dataset the kernel solver accepts by default.
pub const DEFAULT_SOLVER_CAP: usize = 2000;

const JITTER: f64 = 1e-12;

/// Loss used when measuring risks.
#[derive(Clone, Copy)]
pub enum RiskLoss<'a> {
    ZeroOne,
    Surrogate(&'a dyn PairwiseLoss),
}

impl RiskLoss<'_> {
    fn name(&self) -> &'static str {
        match self {
            RiskLoss::ZeroOne => "zero_one",
            RiskLoss::Surrogate(l) => l.name(),
        }
    }

    fn value(&self, u: f64, v: f64) -> f64 {
        match self {
            RiskLoss::ZeroOne => zero_one_loss(u, v),
            RiskLoss::Surrogate(l) => l.value(u, v),
        }
    }
}

impl fmt::Debug for RiskLoss<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    pub r_pn: f64,
    /// NaN when the unlabeled pool is empty.
    pub r_pu: f64,
    pub r_nu: f64,
    pub r_pnu: f64,
    pub loss_name: &'static str,
    pub counts: (usize, usize, usize),
}

impl RiskReport {
    pub const HEADER: &'static str = "loss\tn_p\tn_n\tn_u\tr_pn\tr_pu\tr_nu\tr_pnu";

    pub fn to_row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.loss_name,
            self.counts.0,
            self.counts.1,
            self.counts.2,
            self.r_pn,
            self.r_pu,
            self.r_nu,
            self.r_pnu
        )
    }
}

fn pair_mean(a: &[f64], b: &[f64], loss: RiskLoss<'_>) -> f64 {
    let mut total = 0.0;
    for &u in a {
        for &v in b {
            total += loss.value(u, v);
        }
    }
    total / (a.len() * b.len()) as f64
}

/// Mean pairwise losses over all ordered pairs (self-pairs included when two
/// pools share points) and the composite `gamma * R_pn + (1 - gamma) * (R_pu + R_nu - 1/2)`.
pub fn empirical_risks(
    scores_p: &[f64],
    scores_n: &[f64],
    scores_u: &[f64],
    gamma: f64,
    loss: RiskLoss<'_>,
) -> Result<RiskReport> {
    if scores_p.is_empty() {
        return Err(Error::EmptyPool(Pool::Positive));
    }
    if scores_n.is_empty() {
        return Err(Error::EmptyPool(Pool::Negative));
    }
    if scores_u.is_empty() && gamma < 1.0 {
        return Err(Error::EmptyPool(Pool::Unlabeled));
    }
    let r_pn = pair_mean(scores_p, scores_n, loss);
    let (r_pu, r_nu, r_pnu) = if scores_u.is_empty() {
        (f64::NAN, f64::NAN, r_pn)
    } else {
        let r_pu = pair_mean(scores_p, scores_u, loss);
        let r_nu = pair_mean(scores_u, scores_n, loss);
        (
            r_pu,
            r_nu,
            gamma * r_pn + (1.0 - gamma) * (r_pu + r_nu - 0.5),
        )
    };
    Ok(RiskReport {
        r_pn,
        r_pu,
        r_nu,
        r_pnu,
        loss_name: loss.name(),
        counts: (scores_p.len(), scores_n.len(), scores_u.len()),
    })
}

/// Model values at every dataset point, one vector per pool.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PoolValues {
    pub positives: Vec<f64>,
    pub negatives: Vec<f64>,
    pub unlabeled: Vec<f64>,
}

impl PoolValues {
    pub fn from_fn(ds: &SemiSupervisedDataset, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        Self {
            positives: ds.positives.iter().map(|x| f(x)).collect(),
            negatives: ds.negatives.iter().map(|x| f(x)).collect(),
            unlabeled: ds.unlabeled.iter().map(|x| f(x)).collect(),
        }
    }

    fn check(&self, ds: &SemiSupervisedDataset) -> Result<()> {
        check_dim(ds.positives.len(), self.positives.len())?;
        check_dim(ds.negatives.len(), self.negatives.len())?;
        check_dim(ds.unlabeled.len(), self.unlabeled.len())
    }
}

/// Data part of the functional gradient at `probe` (the `lambda * f` term excluded),
/// using full double means over the `(p, n)`, `(p, u)` and `(u, n)` pairs.
pub fn exact_functional_gradient(
    ds: &SemiSupervisedDataset,
    f: &PoolValues,
    gamma: f64,
    probe: &[f64],
    sigma: f64,
) -> Result<f64> {
    exact_functional_gradient_with_loss(ds, f, gamma, probe, sigma, &SquarePairLoss)
}

pub fn exact_functional_gradient_with_loss(
    ds: &SemiSupervisedDataset,
    f: &PoolValues,
    gamma: f64,
    probe: &[f64],
    sigma: f64,
    loss: &dyn PairwiseLoss,
) -> Result<f64> {
    check_dim(ds.dim, probe.len())?;
    f.check(ds)?;
    ds.require_nonempty(&[Pool::Positive, Pool::Negative])?;
    if gamma < 1.0 {
        ds.require_nonempty(&[Pool::Unlabeled])?;
    }
    let k = |pool: &[Vec<f64>]| -> Vec<f64> {
        pool.iter()
            .map(|x| gaussian_kernel(x, probe, sigma))
            .collect()
    };
    let (kp, kn, ku) = (k(&ds.positives), k(&ds.negatives), k(&ds.unlabeled));

    let pair_term = |fa: &[f64], ka: &[f64], fb: &[f64], kb: &[f64]| -> f64 {
        let mut total = 0.0;
        for (&u, &k_a) in fa.iter().zip(ka) {
            for (&v, &k_b) in fb.iter().zip(kb) {
                let (du, dv) = loss.grads(u, v);
                total += du * k_a + dv * k_b;
            }
        }
        total / (fa.len() * fb.len()) as f64
    };
    let mut g = gamma * pair_term(&f.positives, &kp, &f.negatives, &kn);
    if gamma < 1.0 {
        g += (1.0 - gamma)
            * (pair_term(&f.positives, &kp, &f.unlabeled, &ku)
                + pair_term(&f.unlabeled, &ku, &f.negatives, &kn));
    }
    Ok(g)
}

/// Single-triplet stochastic gradient at `probe` with the exact kernel.
#[allow(clippy::too_many_arguments)]
pub fn triplet_kernel_gradient(
    loss: &dyn PairwiseLoss,
    points: [&[f64]; 3],
    values: [f64; 3],
    gamma: f64,
    probe: &[f64],
    sigma: f64,
) -> Result<f64> {
    for x in points {
        check_dim(probe.len(), x.len())?;
    }
    let w = TripletWeights::new(loss, values[0], values[1], values[2], gamma);
    Ok(w.positive * gaussian_kernel(points[0], probe, sigma)
        + w.negative * gaussian_kernel(points[1], probe, sigma)
        + w.unlabeled * gaussian_kernel(points[2], probe, sigma))
}

/// Same as [`triplet_kernel_gradient`] with the kernel replaced by the random
/// feature inner product of `block`.
pub fn triplet_feature_gradient(
    loss: &dyn PairwiseLoss,
    points: [&[f64]; 3],
    values: [f64; 3],
    gamma: f64,
    probe: &[f64],
    block: &FrequencyBlock,
) -> Result<f64> {
    check_dim(block.dim(), probe.len())?;
    for x in points {
        check_dim(block.dim(), x.len())?;
    }
    let len = block.feature_len();
    let mut phi_probe = vec![0.0; len];
    block.features_into(probe, &mut phi_probe);
    let mut phi = vec![0.0; len];
    let w = TripletWeights::new(loss, values[0], values[1], values[2], gamma);
    let mut g = 0.0;
    for (x, weight) in points.iter().zip([w.positive, w.negative, w.unlabeled]) {
        block.features_into(x, &mut phi);
        g += weight * dot(&phi, &phi_probe);
    }
    Ok(g)
}

/// `f(x) = sum_j beta_j k(x_j, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelModel {
    pub support: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
    pub sigma: f64,
}

impl KernelModel {
    /// The identically zero function.
    pub fn zero(sigma: f64) -> Self {
        Self {
            support: Vec::new(),
            beta: Vec::new(),
            sigma,
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if let Some(s) = self.support.first() {
            check_dim(s.len(), x.len())?;
        }
        Ok(self
            .support
            .iter()
            .zip(&self.beta)
            .map(|(s, b)| b * gaussian_kernel(s, x, self.sigma))
            .sum())
    }

    pub fn predict_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }

    /// `beta' K beta`.
    pub fn rkhs_norm_sq(&self) -> f64 {
        let mut total = 0.0;
        for (si, bi) in self.support.iter().zip(&self.beta) {
            for (sj, bj) in self.support.iter().zip(&self.beta) {
                total += bi * bj * gaussian_kernel(si, sj, self.sigma);
            }
        }
        total
    }
}

/// Index ranges of the three pools in the stacked order `P, N, U`.
struct PairTerms {
    /// `(weight, A, B)` with `A`, `B` half-open index ranges.
    terms: Vec<(f64, std::ops::Range<usize>, std::ops::Range<usize>)>,
    n: usize,
}

impl PairTerms {
    fn new(ds: &SemiSupervisedDataset, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidParameter(format!(
                "gamma must lie in [0, 1], got {gamma}"
            )));
        }
        ds.require_nonempty(&[Pool::Positive, Pool::Negative])?;
        let (np, nn, nu) = ds.counts();
        let p = 0..np;
        let n = np..np + nn;
        let u = np + nn..np + nn + nu;
        let mut terms = Vec::new();
        if gamma > 0.0 {
            terms.push((gamma, p.clone(), n.clone()));
        }
        if gamma < 1.0 {
            ds.require_nonempty(&[Pool::Unlabeled])?;
            terms.push((1.0 - gamma, p, u.clone()));
            terms.push((1.0 - gamma, u, n));
        }
        Ok(Self {
            terms,
            n: np + nn + nu,
        })
    }

    /// Gradient at zero of the stacked quadratic.
    fn linear(&self) -> DVector<f64> {
        let mut b = DVector::zeros(self.n);
        for (w, a, bset) in &self.terms {
            let kappa = 2.0 * w / (a.len() * bset.len()) as f64;
            for i in a.clone() {
                b[i] -= kappa * bset.len() as f64;
            }
            for i in bset.clone() {
                b[i] += kappa * a.len() as f64;
            }
        }
        b
    }

    /// `H M` for the Hessian `H` of the stacked quadratic, in `O(n * cols)` per term.
    fn hessian_times(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let cols = m.ncols();
        let mut out = DMatrix::zeros(self.n, cols);
        let row_sum = |range: &std::ops::Range<usize>| -> Vec<f64> {
            let mut s = vec![0.0; cols];
            for i in range.clone() {
                for (c, acc) in s.iter_mut().enumerate() {
                    *acc += m[(i, c)];
                }
            }
            s
        };
        for (w, a, b) in &self.terms {
            let kappa = 2.0 * w / (a.len() * b.len()) as f64;
            let (sa, sb) = (row_sum(a), row_sum(b));
            for (set, other_len, other_sum) in [(a, b.len(), &sb), (b, a.len(), &sa)] {
                for i in set.clone() {
                    for c in 0..cols {
                        out[(i, c)] += kappa * (other_len as f64 * m[(i, c)] - other_sum[c]);
                    }
                }
            }
        }
        out
    }
}

fn stacked_points(ds: &SemiSupervisedDataset) -> Vec<Vec<f64>> {
    ds.all_points().cloned().collect()
}

/// Exact minimizer over the span of the kernel sections at all data points.
pub fn solve_kernel_closed_form(
    ds: &SemiSupervisedDataset,
    gamma: f64,
    lambda: f64,
    sigma: f64,
) -> Result<KernelModel> {
    solve_kernel_closed_form_capped(ds, gamma, lambda, sigma, DEFAULT_SOLVER_CAP)
}

/// Solves `(H K + lambda I) beta = -b`; refuses more than `cap` points.
pub fn solve_kernel_closed_form_capped(
    ds: &SemiSupervisedDataset,
    gamma: f64,
    lambda: f64,
    sigma: f64,
    cap: usize,
) -> Result<KernelModel> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    ds.validate()?;
    let n = ds.total();
    if n > cap {
        return Err(Error::OverCap { n, cap });
    }
    let terms = PairTerms::new(ds, gamma)?;
    let points = stacked_points(ds);
    let k = DMatrix::from_fn(n, n, |i, j| gaussian_kernel(&points[i], &points[j], sigma));
    let mut system = terms.hessian_times(&k);
    for i in 0..n {
        system[(i, i)] += lambda;
    }
    let rhs = -terms.linear();
    let beta = match system.clone().lu().solve(&rhs) {
        Some(beta) if beta.iter().all(|v| v.is_finite()) => beta,
        _ => {
            warn!("kernel system factorization failed; retrying with diagonal jitter {JITTER}");
            for i in 0..n {
                system[(i, i)] += JITTER;
            }
            system
                .lu()
                .solve(&rhs)
                .filter(|b| b.iter().all(|v| v.is_finite()))
                .ok_or_else(|| Error::Linalg("kernel system is singular".into()))?
        }
    };
    Ok(KernelModel {
        support: points,
        beta: beta.iter().copied().collect(),
        sigma,
    })
}

/// Regularized objective of a kernel model: surrogate composite risk plus `lambda/2 beta'K beta`.
pub fn kernel_objective(
    ds: &SemiSupervisedDataset,
    model: &KernelModel,
    gamma: f64,
    lambda: f64,
) -> Result<f64> {
    let f = PoolValues::from_fn(ds, |x| model.predict(x).unwrap_or(f64::NAN));
    let r = empirical_risks(
        &f.positives,
        &f.negatives,
        &f.unlabeled,
        gamma,
        RiskLoss::Surrogate(&SquarePairLoss),
    )?;
    Ok(r.r_pnu + 0.5 * lambda * model.rkhs_norm_sq())
}

fn feature_matrix(ds: &SemiSupervisedDataset, block: &FrequencyBlock) -> Result<DMatrix<f64>> {
    check_dim(block.dim(), ds.dim)?;
    let len = block.feature_len();
    let mut phi = DMatrix::zeros(ds.total(), len);
    let mut buf = vec![0.0; len];
    for (i, x) in ds.all_points().enumerate() {
        block.features_into(x, &mut buf);
        for (j, v) in buf.iter().enumerate() {
            phi[(i, j)] = *v;
        }
    }
    Ok(phi)
}

/// Regularized objective of `f(x) = <w, phi(x)>` for one fixed feature block.
pub fn fixed_feature_objective(
    ds: &SemiSupervisedDataset,
    block: &FrequencyBlock,
    gamma: f64,
    lambda: f64,
    w: &[f64],
) -> Result<f64> {
    check_dim(block.feature_len(), w.len())?;
    let mut buf = vec![0.0; w.len()];
    let mut score = |x: &[f64]| block.project(x, w, &mut buf);
    let f = PoolValues::from_fn(ds, &mut score);
    let r = empirical_risks(
        &f.positives,
        &f.negatives,
        &f.unlabeled,
        gamma,
        RiskLoss::Surrogate(&SquarePairLoss),
    )?;
    Ok(r.r_pnu + 0.5 * lambda * dot(w, w))
}

/// Gradient of [`fixed_feature_objective`] with respect to `w`.
pub fn fixed_feature_gradient(
    ds: &SemiSupervisedDataset,
    block: &FrequencyBlock,
    gamma: f64,
    lambda: f64,
    w: &[f64],
) -> Result<Vec<f64>> {
    check_dim(block.feature_len(), w.len())?;
    let terms = PairTerms::new(ds, gamma)?;
    let phi = feature_matrix(ds, block)?;
    let wv = DVector::from_column_slice(w);
    let f = &phi * &wv;
    let df = terms
        .hessian_times(&DMatrix::from_column_slice(f.len(), 1, f.as_slice()))
        .column(0)
        + terms.linear();
    let g = phi.transpose() * df + wv * lambda;
    Ok(g.iter().copied().collect())
}

/// Minimizer of [`fixed_feature_objective`] from `(Phi' H Phi + lambda I) w = -Phi' b`.
pub fn solve_fixed_feature(
    ds: &SemiSupervisedDataset,
    block: &FrequencyBlock,
    gamma: f64,
    lambda: f64,
) -> Result<Vec<f64>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    ds.validate()?;
    let terms = PairTerms::new(ds, gamma)?;
    let phi = feature_matrix(ds, block)?;
    let mut system = phi.transpose() * terms.hessian_times(&phi);
    // Symmetrize away rounding so the Cholesky factorization sees an exactly symmetric matrix.
    system = (&system + system.transpose()) * 0.5;
    for i in 0..system.nrows() {
        system[(i, i)] += lambda;
    }
    let rhs = -(phi.transpose() * terms.linear());
    let chol = system
        .clone()
        .cholesky()
        .or_else(|| {
            warn!("fixed-feature factorization failed; retrying with diagonal jitter {JITTER}");
            for i in 0..system.nrows() {
                system[(i, i)] += JITTER;
            }
            system.cholesky()
        })
        .ok_or_else(|| Error::Linalg("fixed-feature system is not positive definite".into()))?;
    Ok(chol.solve(&rhs).iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rff::sample_frequencies;

    fn tiny(seed: u64) -> SemiSupervisedDataset {
        use rand::Rng;
        let mut rng = crate::seed::stream_rng(seed);
        let mut pts = |n: usize, shift: f64| -> Vec<Vec<f64>> {
            (0..n)
                .map(|_| vec![rng.random::<f64>() + shift, rng.random::<f64>()])
                .collect()
        };
        let p = pts(5, 0.5);
        let n = pts(6, -0.5);
        let u = pts(9, 0.0);
        SemiSupervisedDataset::new(p, n, u, "tiny").unwrap()
    }

    #[test]
    fn separated_and_tied_risks() {
        let r = empirical_risks(&[3.0, 4.0], &[0.0, 1.0], &[2.0], 0.5, RiskLoss::ZeroOne).unwrap();
        assert_eq!(r.r_pn, 0.0);
        let r = empirical_risks(&[1.0; 3], &[1.0; 2], &[1.0; 4], 0.3, RiskLoss::ZeroOne).unwrap();
        assert_eq!((r.r_pn, r.r_pu, r.r_nu, r.r_pnu), (0.5, 0.5, 0.5, 0.5));
        assert_eq!(r.counts, (3, 2, 4));
        assert!(empirical_risks(&[], &[1.0], &[1.0], 0.5, RiskLoss::ZeroOne).is_err());
        assert!(empirical_risks(&[1.0], &[1.0], &[], 0.5, RiskLoss::ZeroOne).is_err());
        let pn_only = empirical_risks(&[1.0], &[0.0], &[], 1.0, RiskLoss::ZeroOne).unwrap();
        assert_eq!(pn_only.r_pnu, 0.0);
    }

    #[test]
    fn surrogate_pair_means_match_moment_formula() {
        // mean (1 - X + Y)^2 over independent pairs = (1 - EX + EY)^2 + VarX + VarY.
        let a = [0.3, -1.2, 0.8, 2.0];
        let b = [0.1, 0.4, -0.7];
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        let var = |s: &[f64]| {
            let m = mean(s);
            s.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / s.len() as f64
        };
        let expected = (1.0 - mean(&a) + mean(&b)).powi(2) + var(&a) + var(&b);
        let r = empirical_risks(&a, &b, &b, 1.0, RiskLoss::Surrogate(&SquarePairLoss)).unwrap();
        assert!((r.r_pn - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_function_gradient() {
        let ds = tiny(1);
        let probe = [0.2, 0.6];
        let zero = PoolValues::from_fn(&ds, |_| 0.0);
        let mean_k = |pool: &[Vec<f64>]| {
            pool.iter()
                .map(|x| gaussian_kernel(x, &probe, 1.3))
                .sum::<f64>()
                / pool.len() as f64
        };
        let expected = 2.0 * (mean_k(&ds.negatives) - mean_k(&ds.positives));
        for gamma in [0.0, 0.25, 1.0] {
            let g = exact_functional_gradient(&ds, &zero, gamma, &probe, 1.3).unwrap();
            assert!(
                (g - expected).abs() < 1e-14,
                "gamma {gamma}: {g} vs {expected}"
            );
        }
    }

    #[test]
    fn closed_form_is_stationary() {
        let ds = tiny(2);
        let (gamma, lambda, sigma) = (0.4, 0.7, 0.9);
        let model = solve_kernel_closed_form(&ds, gamma, lambda, sigma).unwrap();
        let f = PoolValues::from_fn(&ds, |x| model.predict(x).unwrap());
        for i in 0..10 {
            let probe = [i as f64 / 7.0 - 0.3, (i as f64 * 0.77).sin()];
            let g = exact_functional_gradient(&ds, &f, gamma, &probe, sigma).unwrap();
            let residual = g + lambda * model.predict(&probe).unwrap();
            assert!(residual.abs() <= 1e-8, "residual {residual}");
        }
    }

    #[test]
    fn closed_form_minimizes_objective() {
        let ds = tiny(3);
        let model = solve_kernel_closed_form(&ds, 0.5, 0.5, 1.0).unwrap();
        let best = kernel_objective(&ds, &model, 0.5, 0.5).unwrap();
        for k in 0..5 {
            let mut other = model.clone();
            other.beta[k] += 0.05;
            assert!(kernel_objective(&ds, &other, 0.5, 0.5).unwrap() > best);
        }
    }

    #[test]
    fn over_cap_refuses() {
        let ds = tiny(4);
        assert!(matches!(
            solve_kernel_closed_form_capped(&ds, 0.5, 1.0, 1.0, 10),
            Err(Error::OverCap { n: 20, cap: 10 })
        ));
    }

    #[test]
    fn pn_only_accepts_empty_unlabeled() {
        let full = tiny(5);
        let pn = SemiSupervisedDataset::new(
            full.positives.clone(),
            full.negatives.clone(),
            vec![],
            "pn",
        )
        .unwrap();
        let a = solve_kernel_closed_form(&pn, 1.0, 0.8, 1.0).unwrap();
        assert_eq!(a.support.len(), 11);
        assert!(solve_kernel_closed_form(&pn, 0.5, 0.8, 1.0).is_err());
        // With gamma = 1 the unlabeled points carry no loss, so their coefficients vanish.
        let b = solve_kernel_closed_form(&full, 1.0, 0.8, 1.0).unwrap();
        for x in &full.unlabeled {
            let (pa, pb) = (a.predict(x).unwrap(), b.predict(x).unwrap());
            assert!((pa - pb).abs() < 1e-10);
        }
        assert!(b.beta[11..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn fixed_feature_gradient_matches_finite_differences() {
        let ds = tiny(6);
        let block = sample_frequencies(9, 2, 3, 1.0).unwrap();
        let w: Vec<f64> = (0..6).map(|i| (i as f64 * 0.9).cos() * 0.4).collect();
        let g = fixed_feature_gradient(&ds, &block, 0.3, 0.6, &w).unwrap();
        let h = 1e-6;
        for j in 0..6 {
            let mut plus = w.clone();
            let mut minus = w.clone();
            plus[j] += h;
            minus[j] -= h;
            let fd = (fixed_feature_objective(&ds, &block, 0.3, 0.6, &plus).unwrap()
                - fixed_feature_objective(&ds, &block, 0.3, 0.6, &minus).unwrap())
                / (2.0 * h);
            assert!((fd - g[j]).abs() <= 1e-6, "component {j}: {fd} vs {}", g[j]);
        }
    }

    #[test]
    fn fixed_feature_solution() {
        let ds = tiny(7);
        let block = sample_frequencies(10, 2, 4, 1.0).unwrap();
        let w = solve_fixed_feature(&ds, &block, 0.6, 0.5).unwrap();
        let g = fixed_feature_gradient(&ds, &block, 0.6, 0.5, &w).unwrap();
        assert!(dot(&g, &g).sqrt() <= 1e-8);

        let heavy = solve_fixed_feature(&ds, &block, 0.6, 1e6).unwrap();
        assert!(dot(&heavy, &heavy).sqrt() <= 1e-3);

        // Plain gradient descent reaches the same point.
        let mut v = vec![0.0; w.len()];
        for _ in 0..20_000 {
            let g = fixed_feature_gradient(&ds, &block, 0.6, 0.5, &v).unwrap();
            for (vi, gi) in v.iter_mut().zip(&g) {
                *vi -= 0.05 * gi;
            }
        }
        for (a, b) in v.iter().zip(&w) {
            assert!((a - b).abs() <= 1e-4, "{a} vs {b}");
        }
    }
}
