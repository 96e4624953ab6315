//! EXPoSE anomaly detection with kernel mean embeddings.
//!
//! A point's anomaly score is its expected kernel similarity to the training
//! distribution, `η(y) = ⟨φ̂(y), μ[P]⟩`. The embedding `μ[P]` can be computed
//! exactly over a dataset ([`empirical_embedding`]) or estimated in a fixed
//! number of steps by projected stochastic approximation ([`run_sgd`]), whose
//! cost does not grow with the dataset size.
//!
//! ```
//! use expose_core::{empirical_embedding, run_sgd, score, Dataset, KernelSpec, RksFeatureMap, SgdConfig};
//!
//! let data = Dataset::from_rows(&[vec![0.0, 0.1], vec![0.2, -0.1], vec![-0.1, 0.0]], None, "toy").unwrap();
//! let map = RksFeatureMap::build(&KernelSpec::gaussian(1.0).unwrap(), 2, 256, 7).unwrap();
//! let full = empirical_embedding(&map, &data).unwrap();
//! let sgd = run_sgd(&SgdConfig::with_iterations(100, 1), &data, &map).unwrap();
//! let near = score(&sgd, &map, &[0.0, 0.0]).unwrap();
//! let far = score(&sgd, &map, &[5.0, 5.0]).unwrap();
//! assert!(near > far);
//! assert!((score(&full, &map, &[0.0, 0.0]).unwrap() - near).abs() < 0.1);
//! ```

pub mod data;
pub mod dataset;
pub mod embedding;
pub mod error;
pub mod experiments;
pub mod kernel;
pub mod linalg;
pub mod scoring;
pub mod sgd;

pub use data::{make_anomaly_split, Sampler, SamplingMode};
pub use dataset::Dataset;
pub use embedding::{
    empirical_embedding, load_model, objective_gap, objective_value, save_model, ModelState,
};
pub use error::{ErrorKind, ExposeError, Result};
pub use experiments::{
    aggregate_runs, run_convergence_experiment, write_diagnostics_csv, DiagnosticsRecord, ExperimentConfig,
};
pub use kernel::{evaluate_kernel, FeatureVector, KernelSpec, MapFingerprint, RksFeatureMap};
pub use scoring::{
    calibrate_threshold, classification_error, classify, score, score_batch, Class, ThresholdCalibration,
};
pub use sgd::{
    iterations_for_accuracy, project_ball, run_sgd, run_sgd_with, sgd_step, stochastic_gradient,
    theoretical_bounds, AccuracyMode, SgdConfig, StopCriterion, TheoreticalBounds,
};
