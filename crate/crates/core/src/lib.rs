//! Extreme multi-class classification with a fixed budget of parameters.
//!
//! Instead of one weight vector per class, a model here trains `R` small
//! softmax classifiers, each over `B` buckets, where every classifier sees the
//! original `K` class ids folded through its own 2-universal hash function.
//! At inference time the `R` bucket-probability vectors are combined back into
//! per-class scores, so memory and training cost scale with `B * R` instead of
//! `K` while any two classes stay separated by at least one hash with high
//! probability.
//!
//! The crate is organized by pipeline stage:
//!
//! * [`hash`]: 2-universal hash families mapping class ids to buckets.
//! * [`data`]: sparse feature vectors, datasets, and the libsvm text format.
//! * [`softmax`]: multinomial logistic regression trained with mini-batch SGD.
//! * [`model`]: the bucketed ensemble: training, scoring, prediction.
//! * [`eval`]: accuracy measurement against held-out data.
//! * [`analysis`]: repetition planning, collision audits, and cost accounting.
//! * [`persist`]: a checksummed binary model format.
//! * [`synth`]: synthetic dataset generation from a known ground-truth model.
//!
//! Model math is generic over [`Scalar`] (`f32` or `f64`); the `*64` aliases
//! at the crate root pick the double-precision instantiation used by the CLI.

pub mod analysis;
pub mod data;
pub mod error;
pub mod eval;
pub mod hash;
pub mod model;
pub mod persist;
pub mod scalar;
pub mod softmax;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use data::{Dataset, LabelMap, LoadOptions, SparseVector};
pub use hash::{HashKind, HashSpec};
pub use model::{EstimatorKind, MachConfig, MachModel, MemberReport, Prediction};
pub use softmax::{SoftmaxModel, TrainConfig};

/// Double-precision sparse feature vector.
pub type SparseVector64 = data::SparseVector<f64>;
/// Double-precision dataset.
pub type Dataset64 = data::Dataset<f64>;
/// Double-precision flat softmax classifier.
pub type SoftmaxModel64 = softmax::SoftmaxModel<f64>;
/// Double-precision hashed ensemble.
pub type MachModel64 = model::MachModel<f64>;
