//! The training loop: triplet mini-batches, one fresh frequency block per
//! iteration, and the decay-then-append coefficient update.
//!
//! At iteration `t` with step size `eta_t = theta / t` the trainer
//!
//! 1. draws `batch_p` positives, `batch_n` negatives and `batch_u` unlabeled
//!    points (uniform, with replacement) from the triplet stream,
//! 2. regenerates the frequency block of seed `t`,
//! 3. evaluates the current model at the batch points,
//! 4. forms `alpha_t = -eta_t * mean_k(w_p phi(x_p) + w_n phi(x_n) + w_u phi(x_u))`,
//! 5. multiplies every earlier coefficient by `1 - eta_t * lambda` and appends `alpha_t`.
//!
//! When the three batch sizes differ the batch holds `max(batch_p, batch_n, batch_u)`
//! triplets and triplet `k` uses the `k mod batch_*` draw of each pool.

use std::io::Write;
use std::time::{Duration, Instant};

use log::debug;
use rand::Rng;

use crate::data::SemiSupervisedDataset;
use crate::error::{check_dim, Divergence, Error, Pool, Result};
use crate::loss::{triplet_risk, PairwiseLoss, SquarePairLoss, TripletWeights};
use crate::model::CoefficientHistory;
use crate::rff::{sample_frequencies, FrequencyBlock, FrequencyCache};
use crate::seed::{derive_seed, iteration_seed, stream, stream_rng, StreamRng};

/// Tolerance when deciding whether `theta * lambda` is an integer.
const INTEGER_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    /// Weight of the PN risk against the PU + NU risks.
    pub gamma: f64,
    pub lambda: f64,
    pub theta: f64,
    pub sigma: f64,
    pub feature_count: usize,
    pub iterations: usize,
    pub batch_p: usize,
    pub batch_n: usize,
    pub batch_u: usize,
    pub master_seed: u64,
    /// Skip the step-size regime check.
    pub allow_unsafe_schedule: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            lambda: 1.0,
            theta: 1.5,
            sigma: 1.0,
            feature_count: 128,
            iterations: 1000,
            batch_p: 16,
            batch_n: 16,
            batch_u: 16,
            master_seed: 0,
            allow_unsafe_schedule: false,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return bad(format!("theta must be positive, got {}", self.theta));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if self.feature_count == 0 {
            return bad("feature_count must be at least 1".into());
        }
        if self.batch_p == 0 || self.batch_n == 0 || self.batch_u == 0 {
            return bad("batch sizes must be at least 1".into());
        }
        if !self.allow_unsafe_schedule && !schedule_in_safe_regime(self.theta, self.lambda) {
            return Err(Error::UnsafeSchedule(regime_explanation(
                self.theta,
                self.lambda,
            )));
        }
        Ok(())
    }

    pub fn batch_len(&self) -> usize {
        self.batch_p.max(self.batch_n).max(self.batch_u)
    }
}

/// `theta * lambda` lies in `(1, 2)` or is a positive integer.
pub fn schedule_in_safe_regime(theta: f64, lambda: f64) -> bool {
    let p = theta * lambda;
    if !p.is_finite() {
        return false;
    }
    (p > 1.0 && p < 2.0) || integer_product(p).is_some()
}

fn integer_product(p: f64) -> Option<u64> {
    let r = p.round();
    (r >= 1.0 && (p - r).abs() <= INTEGER_TOL * r).then_some(r as u64)
}

fn regime_explanation(theta: f64, lambda: f64) -> String {
    format!(
        "theta * lambda = {} (theta {theta}, lambda {lambda}); the coefficient bounds and the 1/t rate \
         need theta * lambda in (1, 2) or a positive integer",
        theta * lambda
    )
}

pub fn step_size(t: usize, theta: f64) -> Result<f64> {
    if t == 0 {
        return Err(Error::InvalidParameter(
            "iterations are numbered from 1".into(),
        ));
    }
    Ok(theta / t as f64)
}

/// Scales every coefficient already in `history` by `1 - eta_t * lambda`.
pub fn decay_history(history: &mut CoefficientHistory, eta_t: f64, lambda: f64) {
    history.scale_existing(1.0 - eta_t * lambda);
}

/// One `(x_p, x_n, x_u)` draw, with the pool indices it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triplet<'a> {
    pub positive: &'a [f64],
    pub negative: &'a [f64],
    pub unlabeled: &'a [f64],
    /// Indices into the positive, negative and unlabeled pools.
    pub indices: [usize; 3],
}

fn draw<R: Rng + ?Sized>(ds: &SemiSupervisedDataset, pool: Pool, rng: &mut R) -> Result<usize> {
    let n = ds.pool(pool).len();
    if n == 0 {
        return Err(Error::EmptyPool(pool));
    }
    Ok(rng.random_range(0..n))
}

pub fn sample_triplet<'a, R: Rng + ?Sized>(
    ds: &'a SemiSupervisedDataset,
    rng: &mut R,
) -> Result<Triplet<'a>> {
    ds.require_nonempty(&[Pool::Positive, Pool::Negative, Pool::Unlabeled])?;
    let p = draw(ds, Pool::Positive, rng)?;
    let n = draw(ds, Pool::Negative, rng)?;
    let u = draw(ds, Pool::Unlabeled, rng)?;
    Ok(Triplet {
        positive: &ds.positives[p],
        negative: &ds.negatives[n],
        unlabeled: &ds.unlabeled[u],
        indices: [p, n, u],
    })
}

/// Model values and features of one triplet, ordered positive, negative, unlabeled.
#[derive(Debug, Clone, Copy)]
pub struct TripletEval<'a> {
    pub values: [f64; 3],
    pub features: [&'a [f64]; 3],
}

/// Batch mean of `w_p phi(x_p) + w_n phi(x_n) + w_u phi(x_u)`.
pub fn gradient_direction(
    loss: &dyn PairwiseLoss,
    batch: &[TripletEval<'_>],
    gamma: f64,
) -> Result<Vec<f64>> {
    let first = batch
        .first()
        .ok_or_else(|| Error::InvalidInput("gradient of an empty batch".into()))?;
    let len = first.features[0].len();
    let mut acc = vec![0.0; len];
    for t in batch {
        for phi in t.features {
            check_dim(len, phi.len())?;
        }
        let [fp, fn_, fu] = t.values;
        let w = TripletWeights::new(loss, fp, fn_, fu, gamma);
        let [pp, pn, pu] = t.features;
        for (j, a) in acc.iter_mut().enumerate() {
            *a += w.positive * pp[j] + w.negative * pn[j] + w.unlabeled * pu[j];
        }
    }
    let count = batch.len() as f64;
    for a in &mut acc {
        *a /= count;
    }
    Ok(acc)
}

/// `-eta_t` times [`gradient_direction`].
pub fn gradient_coefficient(
    loss: &dyn PairwiseLoss,
    batch: &[TripletEval<'_>],
    gamma: f64,
    eta_t: f64,
) -> Result<Vec<f64>> {
    let mut g = gradient_direction(loss, batch, gamma)?;
    for v in &mut g {
        *v *= -eta_t;
    }
    Ok(g)
}

/// How the trainer obtains model values at batch points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalStrategy {
    /// Choose by estimated cost.
    #[default]
    Auto,
    /// Evaluate the history at the batch points each step: `O(batch * t * D)`
    /// per step, independent of the pool sizes.
    OnDemand,
    /// Keep running values for every pool point and probe: `O(n * D)` per step.
    PoolCache,
}

impl EvalStrategy {
    fn resolve(self, hp: &Hyperparams, points: usize) -> Self {
        match self {
            EvalStrategy::Auto => {
                let per_step = hp.batch_p + hp.batch_n + hp.batch_u;
                if points.saturating_mul(2) <= per_step.saturating_mul(hp.iterations) {
                    EvalStrategy::PoolCache
                } else {
                    EvalStrategy::OnDemand
                }
            }
            other => other,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Points whose model values are recorded at each checkpoint.
    pub probes: Vec<Vec<f64>>,
    /// Iteration counts (0 allowed) after which probe values are recorded.
    pub checkpoints: Vec<usize>,
    pub strategy: EvalStrategy,
    /// Keep each iteration's gradient direction.
    pub record_gradients: bool,
    /// Keep each iteration's batch indices and model values.
    pub record_batches: bool,
    /// Record wall time at checkpoints (excludes probe evaluation).
    pub timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub iteration: usize,
    pub eta: f64,
    /// Mean triplet surrogate risk over the batch, at the pre-update model.
    pub batch_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub iteration: usize,
    pub elapsed: Option<Duration>,
    pub probe_values: Vec<f64>,
}

/// Batch drawn at one iteration and the model values the update used.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchRecord {
    pub iteration: usize,
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
    pub unlabeled: Vec<usize>,
    /// Values at `positives`, then `negatives`, then `unlabeled`.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct TrainTrace {
    pub strategy: EvalStrategy,
    pub steps: Vec<StepRecord>,
    pub checkpoints: Vec<Checkpoint>,
    pub gradients: Vec<Vec<f64>>,
    pub batches: Vec<BatchRecord>,
}

impl TrainTrace {
    /// Comma-separated export, one row per iteration. Probe columns are filled
    /// on checkpoint rows only; the elapsed column appears when timing was on.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let probes = self.checkpoints.first().map_or(0, |c| c.probe_values.len());
        let timed = self.checkpoints.iter().any(|c| c.elapsed.is_some());
        write!(out, "iteration,eta,batch_loss")?;
        if timed {
            write!(out, ",elapsed_s")?;
        }
        for k in 0..probes {
            write!(out, ",probe_{k}")?;
        }
        writeln!(out)?;

        let mut cps = self.checkpoints.iter().peekable();
        let mut write_checkpoint = |out: &mut W, iteration: usize| -> Result<()> {
            match cps.next_if(|c| c.iteration == iteration) {
                Some(c) => {
                    if timed {
                        match c.elapsed {
                            Some(e) => write!(out, ",{:.6}", e.as_secs_f64())?,
                            None => write!(out, ",")?,
                        }
                    }
                    for v in &c.probe_values {
                        write!(out, ",{v:?}")?;
                    }
                }
                None => {
                    let blanks = probes + usize::from(timed);
                    write!(out, "{}", ",".repeat(blanks))?;
                }
            }
            writeln!(out)?;
            Ok(())
        };
        if self.checkpoints.first().is_some_and(|c| c.iteration == 0) {
            write!(out, "0,,")?;
            write_checkpoint(&mut out, 0)?;
        }
        for s in &self.steps {
            write!(out, "{},{:?},{:?}", s.iteration, s.eta, s.batch_loss)?;
            write_checkpoint(&mut out, s.iteration)?;
        }
        Ok(())
    }
}

enum Evaluator {
    OnDemand(FrequencyCache),
    Pool {
        values: [Vec<f64>; 3],
        probes: Vec<f64>,
    },
}

/// Stepwise trainer. [`train`] drives it to completion.
pub struct Trainer<'a> {
    ds: &'a SemiSupervisedDataset,
    hp: Hyperparams,
    loss: &'a dyn PairwiseLoss,
    options: TrainOptions,
    history: CoefficientHistory,
    trace: TrainTrace,
    rng: StreamRng,
    eval: Evaluator,
    iteration: usize,
    started: Instant,
    excluded: Duration,
    next_checkpoint: usize,
    scratch: Vec<f64>,
}

impl<'a> Trainer<'a> {
    pub fn new(
        ds: &'a SemiSupervisedDataset,
        hp: &Hyperparams,
        loss: &'a dyn PairwiseLoss,
        mut options: TrainOptions,
    ) -> Result<Self> {
        hp.validate()?;
        ds.validate()?;
        ds.require_nonempty(&[Pool::Positive, Pool::Negative, Pool::Unlabeled])?;
        for p in &options.probes {
            check_dim(ds.dim, p.len())?;
        }
        options.checkpoints.sort_unstable();
        options.checkpoints.dedup();

        let history = CoefficientHistory::new(hp.master_seed, ds.dim, hp.feature_count, hp.sigma)?;
        let strategy = options
            .strategy
            .resolve(hp, ds.total() + options.probes.len());
        let eval = match strategy {
            EvalStrategy::PoolCache => Evaluator::Pool {
                values: [
                    vec![0.0; ds.positives.len()],
                    vec![0.0; ds.negatives.len()],
                    vec![0.0; ds.unlabeled.len()],
                ],
                probes: vec![0.0; options.probes.len()],
            },
            _ => Evaluator::OnDemand(FrequencyCache::new(
                hp.master_seed,
                ds.dim,
                hp.feature_count,
                hp.sigma,
            )?),
        };
        debug!(
            "training with {strategy:?} evaluation, {} points",
            ds.total()
        );
        let mut trainer = Self {
            ds,
            hp: hp.clone(),
            loss,
            options,
            history,
            trace: TrainTrace {
                strategy,
                ..TrainTrace::default()
            },
            rng: stream_rng(derive_seed(hp.master_seed, stream::TRIPLETS, 0)),
            eval,
            iteration: 0,
            started: Instant::now(),
            excluded: Duration::ZERO,
            next_checkpoint: 0,
            scratch: vec![0.0; 2 * hp.feature_count],
        };
        trainer.record_checkpoint();
        Ok(trainer)
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn history(&self) -> &CoefficientHistory {
        &self.history
    }

    pub fn trace(&self) -> &TrainTrace {
        &self.trace
    }

    /// Current running values of the pool points (pool-cache strategy only).
    pub fn pool_values(&self) -> Option<&[Vec<f64>; 3]> {
        match &self.eval {
            Evaluator::Pool { values, .. } => Some(values),
            Evaluator::OnDemand(_) => None,
        }
    }

    pub fn step(&mut self) -> Result<()> {
        let t = self.iteration + 1;
        let hp = &self.hp;
        let eta = step_size(t, hp.theta)?;

        let mut idx: [Vec<usize>; 3] = Default::default();
        for (slot, (pool, size)) in idx.iter_mut().zip([
            (Pool::Positive, hp.batch_p),
            (Pool::Negative, hp.batch_n),
            (Pool::Unlabeled, hp.batch_u),
        ]) {
            *slot = (0..size)
                .map(|_| draw(self.ds, pool, &mut self.rng))
                .collect::<Result<_>>()?;
        }
        let block = sample_frequencies(
            iteration_seed(hp.master_seed, t),
            self.ds.dim,
            hp.feature_count,
            hp.sigma,
        )?;

        let pools = [&self.ds.positives, &self.ds.negatives, &self.ds.unlabeled];
        let values: [Vec<f64>; 3] = match &mut self.eval {
            Evaluator::Pool { values, .. } => {
                std::array::from_fn(|k| idx[k].iter().map(|&i| values[k][i]).collect())
            }
            Evaluator::OnDemand(cache) => {
                let points: Vec<&[f64]> = (0..3)
                    .flat_map(|k| idx[k].iter().map(move |&i| pools[k][i].as_slice()))
                    .collect();
                let flat = evaluate_history(&self.history, cache, &points, &mut self.scratch);
                let mut it = flat.into_iter();
                std::array::from_fn(|k| it.by_ref().take(idx[k].len()).collect())
            }
        };

        let len = block.feature_len();
        let features: [Vec<f64>; 3] = std::array::from_fn(|k| {
            let mut buf = vec![0.0; idx[k].len() * len];
            for (chunk, &i) in buf.chunks_exact_mut(len).zip(&idx[k]) {
                block.features_into(&pools[k][i], chunk);
            }
            buf
        });

        let b = hp.batch_len();
        let batch: Vec<TripletEval<'_>> = (0..b)
            .map(|k| {
                let pick = |pool: usize| k % idx[pool].len();
                let (p, n, u) = (pick(0), pick(1), pick(2));
                TripletEval {
                    values: [values[0][p], values[1][n], values[2][u]],
                    features: [
                        &features[0][p * len..(p + 1) * len],
                        &features[1][n * len..(n + 1) * len],
                        &features[2][u * len..(u + 1) * len],
                    ],
                }
            })
            .collect();
        let direction = gradient_direction(self.loss, &batch, hp.gamma)?;
        let alpha: Vec<f64> = direction.iter().map(|g| -eta * g).collect();
        if alpha.iter().any(|a| !a.is_finite()) {
            let offending = alpha
                .iter()
                .copied()
                .enumerate()
                .filter(|(_, a)| !a.is_finite())
                .take(8)
                .collect();
            return Err(Error::Diverged(Box::new(Divergence {
                iteration: t,
                step_size: eta,
                offending,
                batch_values: values.concat(),
            })));
        }
        let batch_loss = batch
            .iter()
            .map(|e| triplet_risk(self.loss, e.values[0], e.values[1], e.values[2], hp.gamma))
            .sum::<f64>()
            / b as f64;

        let decay = 1.0 - eta * hp.lambda;
        decay_history(&mut self.history, eta, hp.lambda);
        self.history.push(alpha)?;
        if let Evaluator::Pool { values, probes } = &mut self.eval {
            let alpha = self.history.entry(t).alpha;
            for (vals, pool) in values.iter_mut().zip(pools) {
                for (f, x) in vals.iter_mut().zip(pool) {
                    *f = decay * *f + block.project(x, alpha, &mut self.scratch);
                }
            }
            for (f, x) in probes.iter_mut().zip(&self.options.probes) {
                *f = decay * *f + block.project(x, alpha, &mut self.scratch);
            }
        }

        self.iteration = t;
        self.trace.steps.push(StepRecord {
            iteration: t,
            eta,
            batch_loss,
        });
        if self.options.record_gradients {
            self.trace.gradients.push(direction);
        }
        if self.options.record_batches {
            let [positives, negatives, unlabeled] = idx;
            self.trace.batches.push(BatchRecord {
                iteration: t,
                positives,
                negatives,
                unlabeled,
                values: values.concat(),
            });
        }
        self.record_checkpoint();
        Ok(())
    }

    fn record_checkpoint(&mut self) {
        let cps = &self.options.checkpoints;
        while self.next_checkpoint < cps.len() && cps[self.next_checkpoint] < self.iteration {
            self.next_checkpoint += 1;
        }
        if cps.get(self.next_checkpoint) != Some(&self.iteration) {
            return;
        }
        self.next_checkpoint += 1;
        let elapsed = self
            .options
            .timing
            .then(|| self.started.elapsed().saturating_sub(self.excluded));
        let probe_start = Instant::now();
        let probe_values = match &mut self.eval {
            Evaluator::Pool { probes, .. } => probes.clone(),
            Evaluator::OnDemand(cache) => {
                let points: Vec<&[f64]> = self.options.probes.iter().map(Vec::as_slice).collect();
                evaluate_history(&self.history, cache, &points, &mut self.scratch)
            }
        };
        self.excluded += probe_start.elapsed();
        self.trace.checkpoints.push(Checkpoint {
            iteration: self.iteration,
            elapsed,
            probe_values,
        });
    }

    pub fn finish(self) -> (CoefficientHistory, TrainTrace) {
        (self.history, self.trace)
    }
}

/// Same recursion as `CoefficientHistory::predict`, with cached blocks.
fn evaluate_history(
    history: &CoefficientHistory,
    cache: &mut FrequencyCache,
    points: &[&[f64]],
    scratch: &mut [f64],
) -> Vec<f64> {
    let mut out = vec![0.0; points.len()];
    for entry in history.entries() {
        let block: &FrequencyBlock = cache.block(entry.iteration);
        for (f, x) in out.iter_mut().zip(points) {
            *f = entry.decay * *f + block.project(x, entry.alpha, scratch);
        }
    }
    let tail = history.tail_decay();
    for f in &mut out {
        *f *= tail;
    }
    out
}

pub fn train_with_loss(
    ds: &SemiSupervisedDataset,
    hp: &Hyperparams,
    loss: &dyn PairwiseLoss,
    options: TrainOptions,
) -> Result<(CoefficientHistory, TrainTrace)> {
    let mut trainer = Trainer::new(ds, hp, loss, options)?;
    for _ in 0..hp.iterations {
        trainer.step()?;
    }
    Ok(trainer.finish())
}

/// Trains with the square pairwise loss.
pub fn train(
    ds: &SemiSupervisedDataset,
    hp: &Hyperparams,
    options: TrainOptions,
) -> Result<(CoefficientHistory, TrainTrace)> {
    train_with_loss(ds, hp, &SquarePairLoss, options)
}

/// Roughly logarithmically spaced iteration counts in `[lo, hi]`, `per_decade` per factor of ten.
pub fn log_spaced(lo: usize, hi: usize, per_decade: usize) -> Vec<usize> {
    if hi == 0 || lo > hi {
        return Vec::new();
    }
    let lo = lo.max(1);
    let steps = ((hi as f64 / lo as f64).log10() * per_decade as f64)
        .ceil()
        .max(1.0) as usize;
    let mut out: Vec<usize> = (0..=steps)
        .map(|k| {
            let v = lo as f64 * (hi as f64 / lo as f64).powf(k as f64 / steps as f64);
            (v.round() as usize).clamp(lo, hi)
        })
        .collect();
    out.dedup();
    out
}

/// Closed-form coefficients `a_t^i = -eta_i * prod_{j=i+1..t} (1 - eta_j lambda)` and their bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleReport {
    pub theta: f64,
    pub lambda: f64,
    pub t: usize,
    /// `a_t^i` for `i = 1..=t`.
    pub coefficients: Vec<f64>,
    pub max_abs: f64,
    pub sum_sq: f64,
    pub max_bound: f64,
    pub sum_sq_bound: f64,
    pub max_ok: bool,
    pub sum_sq_ok: bool,
    /// In the integer case, the count of leading indices `i <= theta * lambda - 1`
    /// and whether all of their coefficients vanish.
    pub zero_prefix: Option<(usize, bool)>,
}

impl ScheduleReport {
    pub fn passed(&self) -> bool {
        self.max_ok && self.sum_sq_ok && self.zero_prefix.is_none_or(|(_, ok)| ok)
    }
}

pub fn coefficient_schedule_check(theta: f64, lambda: f64, t: usize) -> Result<ScheduleReport> {
    if t == 0 {
        return Err(Error::InvalidParameter("t must be at least 1".into()));
    }
    if !(theta > 0.0 && lambda > 0.0) {
        return Err(Error::InvalidParameter(
            "theta and lambda must be positive".into(),
        ));
    }
    if !schedule_in_safe_regime(theta, lambda) {
        return Err(Error::UnsafeSchedule(regime_explanation(theta, lambda)));
    }
    let mut coefficients = vec![0.0; t];
    let mut prod = 1.0;
    for i in (1..=t).rev() {
        let eta = theta / i as f64;
        coefficients[i - 1] = -eta * prod;
        prod *= 1.0 - eta * lambda;
    }
    let max_abs = coefficients.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let sum_sq: f64 = coefficients.iter().map(|a| a * a).sum();
    let max_bound = theta / t as f64;
    let sum_sq_bound = theta * theta / t as f64;
    let slack = 1.0 + 1e-12;
    let zero_prefix = integer_product(theta * lambda).map(|k| {
        // The factor at j = theta * lambda is exactly zero, so it only wipes
        // earlier coefficients once t has reached it.
        let k = k as usize;
        let n = if t >= k { k - 1 } else { 0 };
        let ok = coefficients[..n]
            .iter()
            .all(|a| a.abs() <= 4.0 * f64::EPSILON * theta);
        (n, ok)
    });
    Ok(ScheduleReport {
        theta,
        lambda,
        t,
        max_ok: max_abs <= max_bound * slack,
        sum_sq_ok: sum_sq <= sum_sq_bound * slack,
        coefficients,
        max_abs,
        sum_sq,
        max_bound,
        sum_sq_bound,
        zero_prefix,
    })
}
