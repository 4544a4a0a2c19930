//! Budget-constrained data selection over precomputed feature embeddings.
//!
//! The central output is a single annotation ordering computed by k-center
//! greedy (farthest-point) selection in a fixed embedding space: label the
//! first `B` entries for a budget of `B`, for any `B` and any downstream
//! model. An evaluation harness compares that ordering against uniform
//! random selection and a retrain-per-round core-set baseline on synthetic
//! Gaussian mixtures.
//!
//! The numeric core is generic over the storage [`Scalar`] (`f32`/`f64`);
//! the aliases below fix the precision used by the file formats.

pub mod embedding_store;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod proxy_model;
pub mod rng;
pub mod scalar;
pub mod selector;
pub mod synth;

pub use embedding_store::{load_embeddings, load_labels, save_embeddings, save_labels, EmbeddingMatrix, LabelVector};
pub use error::{Error, Result};
pub use harness::{class_histogram, emit_report, run_budget_sweep, BudgetSchedule, ClassHistogram, Method, SweepConfig, SweepResult};
pub use metrics::{distance, Metric};
pub use proxy_model::{MlpModel, TrainConfig};
pub use rng::Rng;
pub use scalar::Scalar;
pub use selector::{full_ordering, iterative_coreset, kcenter_greedy, random_order, SelectionConfig, SelectionOrder, SelectionState};
pub use synth::MixtureSpec;

/// Embeddings as stored on disk.
pub type Embeddings = EmbeddingMatrix<f32>;
/// Double-precision embeddings.
pub type Embeddings64 = EmbeddingMatrix<f64>;
/// Proxy classifier with single-precision parameters.
pub type Mlp = MlpModel<f32>;
/// Proxy classifier with double-precision parameters.
pub type Mlp64 = MlpModel<f64>;
