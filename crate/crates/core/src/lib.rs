//! Accuracy estimation on unlabeled data from classifier softmax outputs.
//!
//! The core method is average thresholded confidence (ATC): learn a score
//! threshold on labeled source data so that the fraction of source examples
//! below it equals the source error, then report the fraction of target
//! examples below it. Six score functions on the probability simplex are
//! provided, together with tools to check which of them induce the same
//! ordering, a difference-of-confidence baseline, a bootstrap benchmark and
//! a synthetic data generator.
//!
//! ```
//! use atc_core::{atc_estimate, generate, GeneratorSpec, ScoreFunctionId, Convention};
//!
//! let source = generate(&GeneratorSpec::new(4, 500, 0.8, 1)).unwrap();
//! let target = generate(&GeneratorSpec::new(4, 500, 0.8, 2)).unwrap();
//! let est = atc_estimate(&source, &target, &ScoreFunctionId::NegEntropy).unwrap();
//! assert!((est.in_convention(Convention::Accuracy) - 0.8).abs() < 0.1);
//! ```

pub mod atc;
pub mod cli;
pub mod doc;
pub mod error;
pub mod harness;
pub mod io;
pub mod ordering;
pub mod par;
pub mod score;
pub mod seed;
pub mod simplex;
pub mod synth;

pub use atc::{atc_estimate, estimate_target, learn_threshold, AtcEstimate, Threshold, ThresholdModel};
pub use doc::{doc_estimate, doc_gap, fit_doc_regression, DocMode, DocModel};
pub use error::{Error, Result};
pub use harness::{
    aggregate, bootstrap_resample, estimate_accuracy, pairwise_difference_report, rank_methods, run_benchmark,
    AggregateRow, BenchmarkConfig, DimensionData, Method, RunRecord,
};
pub use io::{load_dump, write_dump, DumpFormat};
pub use ordering::{check_pair, search_counterexample, verify_equivalence_relation, verify_on_sample, Checker};
pub use par::Execution;
pub use score::{score, score_batch, Monotone, MonotoneTransform, ScoreFunction, ScoreFunctionId};
pub use simplex::{true_accuracy, true_error, validate_vector, Convention, MetricValue, PredictionSet, ProbabilityVector};
pub use synth::{generate, make_shift_pair, GeneratorSpec, Shift};
