//! Semi-supervised AUC maximization by quadruply stochastic functional
//! gradient descent with seed-regenerated random Fourier features.
//!
//! A trained model is a [`CoefficientHistory`]: one coefficient vector per
//! iteration, paired at prediction time with the frequency block that
//! iteration's seed regenerates. The [`oracle`] module holds the exact
//! small-scale references the tests compare against.

pub mod data;
pub mod error;
pub mod eval;
pub mod loss;
pub mod model;
pub mod oracle;
pub mod rff;
pub mod seed;
pub mod trainer;
mod trig;

pub use data::{
    normalize_unit_interval, parse_libsvm, parse_libsvm_str, split_semi, synth_gaussian,
    write_libsvm, Label, LabeledDataset, LabeledRow, MinMaxTable, SemiSupervisedDataset, Split,
    SplitConfig, SplitManifest, SynthConfig, SynthOutput, TestSet,
};
pub use error::{Divergence, Error, ModelFormatError, Pool, Result};
pub use eval::{
    auc, convergence_study, cross_validate, ConvergenceConfig, ConvergenceReport, CvCell, CvGrid,
    CvResult,
};
pub use loss::{pair_loss, pair_loss_grads, zero_one_loss, PairwiseLoss, SquarePairLoss};
pub use model::CoefficientHistory;
pub use oracle::{
    empirical_risks, exact_functional_gradient, solve_fixed_feature, solve_kernel_closed_form,
    KernelModel, PoolValues, RiskLoss, RiskReport,
};
pub use rff::{feature_map, kernel_exact, sample_frequencies, FeatureVector, FrequencyBlock};
pub use trainer::{
    coefficient_schedule_check, step_size, train, EvalStrategy, Hyperparams, ScheduleReport,
    TrainOptions, TrainTrace,
};
