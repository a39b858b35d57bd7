//! Shared fixtures for the criterion benchmarks.

use qsgauc_core::{synth_gaussian, Hyperparams, SemiSupervisedDataset, SynthConfig};

/// Two-Gaussian problem with `n_unlabeled` unlabeled points in `dim` dimensions.
pub fn synthetic(n_unlabeled: usize, dim: usize) -> SemiSupervisedDataset {
    synth_gaussian(&SynthConfig {
        n_pos: 50,
        n_neg: 50,
        n_unlabeled,
        n_test: 0,
        dim,
        seed: 7,
        ..SynthConfig::default()
    })
    .expect("valid synthetic configuration")
    .dataset
}

pub fn hyperparams(feature_count: usize, iterations: usize) -> Hyperparams {
    Hyperparams {
        feature_count,
        iterations,
        lambda: 0.5,
        theta: 3.0,
        ..Hyperparams::default()
    }
}
