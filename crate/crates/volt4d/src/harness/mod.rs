//! Training, evaluation metrics, inference timing, and the full
//! multi-architecture comparison study.

pub mod eval;
pub mod gradsuite;
pub mod loss;
pub mod metrics;
pub mod study;
pub mod train;

pub use eval::{benchmark_inference, evaluate, BenchReport, EvalReport};
pub use gradsuite::{full_gradcheck_suite, layer_gradchecks, model_gradcheck, model_gradchecks, SuiteOutcome};
pub use loss::mse_loss;
pub use metrics::{acc_metric, acc_metric_detailed, mae_metric, AccReport, Horizon, MeanStd};
pub use study::{run_study, StudyConfig, StudyOutcome, StudyRow};
pub use train::{train, EpochRecord, History, TrainConfig};
