//! Random Fourier features for the Gaussian kernel `k(x, x') = exp(-sigma * |x - x'|^2)`.
//!
//! The spectral density of this kernel is `N(0, 2 sigma I)`. A [`FrequencyBlock`]
//! holds `count` frequencies drawn from it and is fully determined by its seed,
//! so a trained model only has to remember seeds, never the frequencies.
//!
//! Gaussian draws use the Box–Muller transform over the stream's 64-bit words:
//! `u1 = ((w1 >> 11) + 1) * 2^-53` lies in `(0, 1]`, `u2 = (w2 >> 11) * 2^-53`
//! lies in `[0, 1)`, and the pair yields `r cos(2 pi u2)` then `r sin(2 pi u2)`
//! with `r = sqrt(-2 ln u1)`. Frequencies are filled row-major.
//!
//! Feature values go through one shared routine (`FrequencyBlock::features_into`)
//! so training-time and prediction-time values agree bit for bit.

use rand::RngCore;

use crate::error::{check_dim, Error, Result};
use crate::seed::{iteration_seed, stream_rng, StreamRng};
use crate::trig;

/// `count` spectral frequencies of dimension `dim`, regenerable from `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyBlock {
    seed: u64,
    dim: usize,
    count: usize,
    sigma: f64,
    /// Row-major `count x dim`.
    frequencies: Vec<f64>,
}

/// Output of the feature map: cosine half followed by sine half, scaled by `sqrt(1/count)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub count: usize,
}

impl FeatureVector {
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &FeatureVector) -> f64 {
        dot(&self.values, &other.values)
    }
}

const INV_2_POW_53: f64 = 1.0 / (1u64 << 53) as f64;

struct BoxMuller {
    rng: StreamRng,
    spare: Option<f64>,
}

impl BoxMuller {
    fn new(seed: u64) -> Self {
        Self {
            rng: stream_rng(seed),
            spare: None,
        }
    }

    fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 * INV_2_POW_53;
        let u2 = (self.rng.next_u64() >> 11) as f64 * INV_2_POW_53;
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }
}

pub fn sample_frequencies(
    seed: u64,
    dim: usize,
    count: usize,
    sigma: f64,
) -> Result<FrequencyBlock> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    if count == 0 {
        return Err(Error::InvalidParameter(
            "feature count must be at least 1".into(),
        ));
    }
    if dim == 0 {
        return Err(Error::InvalidParameter(
            "input dimension must be at least 1".into(),
        ));
    }
    let std_dev = (2.0 * sigma).sqrt();
    let mut normal = BoxMuller::new(seed);
    let frequencies = (0..count * dim).map(|_| std_dev * normal.next()).collect();
    Ok(FrequencyBlock {
        seed,
        dim,
        count,
        sigma,
        frequencies,
    })
}

impl FrequencyBlock {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Length of the feature vectors this block produces (`2 * count`).
    pub fn feature_len(&self) -> usize {
        2 * self.count
    }

    pub fn frequency(&self, row: usize) -> &[f64] {
        &self.frequencies[row * self.dim..(row + 1) * self.dim]
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// Writes the feature map of `x` into `out` (length `2 * count`) without allocating.
    ///
    /// Callers must have checked `x.len() == dim`.
    pub fn features_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(out.len(), 2 * self.count);
        let scale = (1.0 / self.count as f64).sqrt();
        let (cos_half, sin_half) = out.split_at_mut(self.count);
        for (angle, omega) in cos_half
            .iter_mut()
            .zip(self.frequencies.chunks_exact(self.dim))
        {
            *angle = dot(omega, x);
        }
        trig::scaled_sin_cos_in_place(cos_half, sin_half, scale);
    }

    /// `<alpha, phi(x)>` with `scratch` as the feature buffer. This is the single
    /// evaluation path shared by prediction and training.
    pub fn project(&self, x: &[f64], alpha: &[f64], scratch: &mut [f64]) -> f64 {
        self.features_into(x, scratch);
        dot(alpha, scratch)
    }
}

pub fn feature_map(x: &[f64], block: &FrequencyBlock) -> Result<FeatureVector> {
    check_dim(block.dim, x.len())?;
    let mut values = vec![0.0; block.feature_len()];
    block.features_into(x, &mut values);
    Ok(FeatureVector {
        values,
        count: block.count,
    })
}

pub fn kernel_exact(x: &[f64], x_prime: &[f64], sigma: f64) -> Result<f64> {
    check_dim(x.len(), x_prime.len())?;
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    Ok(gaussian_kernel(x, x_prime, sigma))
}

/// Unchecked Gaussian kernel used in hot loops.
pub(crate) fn gaussian_kernel(x: &[f64], y: &[f64], sigma: f64) -> f64 {
    let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-sigma * sq).exp()
}

/// Dot product with a fixed reduction shape: four interleaved partial sums,
/// combined as `(s0 + s1) + (s2 + s3)`, then the leftover tail in order. The
/// shape is part of the reproducibility contract between training and prediction.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Per-iteration frequency blocks for one training run, generated on first use.
///
/// Purely a speed cache: a block obtained here is bit-identical to a fresh
/// [`sample_frequencies`] call with the iteration seed.
#[derive(Debug, Clone)]
pub struct FrequencyCache {
    master_seed: u64,
    dim: usize,
    count: usize,
    sigma: f64,
    blocks: Vec<FrequencyBlock>,
}

impl FrequencyCache {
    pub fn new(master_seed: u64, dim: usize, count: usize, sigma: f64) -> Result<Self> {
        // Validate once so `block` can stay infallible.
        sample_frequencies(0, dim, count, sigma)?;
        Ok(Self {
            master_seed,
            dim,
            count,
            sigma,
            blocks: Vec::new(),
        })
    }

    /// Block of 1-based training iteration `iteration`.
    pub fn block(&mut self, iteration: usize) -> &FrequencyBlock {
        assert!(iteration >= 1, "iterations are 1-based");
        while self.blocks.len() < iteration {
            let i = self.blocks.len() + 1;
            let seed = iteration_seed(self.master_seed, i);
            let block = sample_frequencies(seed, self.dim, self.count, self.sigma)
                .expect("parameters validated at construction");
            self.blocks.push(block);
        }
        &self.blocks[iteration - 1]
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn same_seed_same_block() {
        let a = sample_frequencies(99, 5, 7, 0.8).unwrap();
        let b = sample_frequencies(99, 5, 7, 0.8).unwrap();
        assert_eq!(a.frequencies(), b.frequencies());
        assert_ne!(
            a.frequencies(),
            sample_frequencies(100, 5, 7, 0.8).unwrap().frequencies()
        );
    }

    #[test]
    fn shape_and_finiteness() {
        let b = sample_frequencies(3, 3, 4, 1.0).unwrap();
        assert_eq!((b.count(), b.dim()), (4, 3));
        assert_eq!(b.frequencies().len(), 12);
        assert!(b.frequencies().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            sample_frequencies(0, 1, 1, 0.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            sample_frequencies(0, 1, 1, -1.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            sample_frequencies(0, 1, 0, 1.0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn pooled_variance_is_two_sigma() {
        // 1000 single-draw blocks with sigma = 0.5 should have variance 2 * 0.5 = 1.
        let draws: Vec<f64> = (0..1000u64)
            .map(|s| sample_frequencies(s, 1, 1, 0.5).unwrap().frequencies()[0])
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
        assert!((var - 1.0).abs() <= 0.15, "variance {var}");
    }

    #[test]
    fn zero_input_features() {
        let block = sample_frequencies(1, 3, 4, 1.0).unwrap();
        let phi = feature_map(&[0.0; 3], &block).unwrap();
        let s = (1.0f64 / 4.0).sqrt();
        assert_eq!(&phi.values[..4], &[s; 4]);
        assert_eq!(&phi.values[4..], &[0.0; 4]);
    }

    #[test]
    fn feature_map_dimension_mismatch() {
        let block = sample_frequencies(1, 3, 4, 1.0).unwrap();
        assert!(matches!(
            feature_map(&[0.0; 2], &block),
            Err(Error::DimensionMismatch {
                expected: 3,
                actual: 2
            })
        ));
    }

    #[test]
    fn kernel_values() {
        assert_eq!(kernel_exact(&[0.3, 0.1], &[0.3, 0.1], 2.0).unwrap(), 1.0);
        let k = kernel_exact(&[0.0, 0.0], &[1.0, 0.0], 1.0).unwrap();
        assert!((k - (-1.0f64).exp()).abs() < 1e-15);
        assert!((k - 0.367879).abs() < 1e-6);
        assert!(kernel_exact(&[0.0], &[0.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn cache_matches_fresh_sampling() {
        let mut cache = FrequencyCache::new(11, 2, 3, 0.7).unwrap();
        let cached = cache.block(5).clone();
        let fresh = sample_frequencies(iteration_seed(11, 5), 2, 3, 0.7).unwrap();
        assert_eq!(cached, fresh);
        assert_eq!(cache.len(), 5);
    }

    proptest! {
        #[test]
        fn features_have_unit_norm(seed in any::<u64>(), x in prop::collection::vec(-5.0f64..5.0, 4), count in 1usize..64) {
            let block = sample_frequencies(seed, 4, count, 1.3).unwrap();
            let phi = feature_map(&x, &block).unwrap();
            prop_assert!((phi.norm() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn kernel_is_symmetric(x in prop::collection::vec(-3.0f64..3.0, 3), y in prop::collection::vec(-3.0f64..3.0, 3), sigma in 0.01f64..2.0) {
            let a = kernel_exact(&x, &y, sigma).unwrap();
            prop_assert_eq!(a, kernel_exact(&y, &x, sigma).unwrap());
            prop_assert!(a > 0.0 && a <= 1.0);
        }
    }
}
