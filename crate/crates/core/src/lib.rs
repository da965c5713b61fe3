//! Compact edge detectors built from gradient-like Feature Extractors,
//! dilated Enrichment blocks and 1×1 Summarizers, with everything needed to
//! train, run and score them:
//!
//! - [`tensor`], [`tape`]: dense tensors and reverse-mode autodiff over the
//!   small operator set the networks use; [`gradcheck`] verifies it against
//!   finite differences.
//! - [`kernels`]: the directional gradient bank and a Sobel baseline.
//! - [`model`]: TIN1 / TIN2 graphs, initialization and parameter accounting.
//! - [`loss`]: class-balanced cross-entropy with an ignore band.
//! - [`train`], [`augment`]: SGD with momentum, step schedule, augmentation.
//! - [`infer`], [`nms`], [`eval`]: multi-scale prediction, thinning and
//!   ODS/OIS scoring.
//! - [`io`], [`config`], [`synthetic`]: files, checkpoints, configuration and
//!   a synthetic shapes dataset.

pub mod augment;
pub mod config;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod infer;
pub mod io;
pub mod kernels;
pub mod loss;
pub mod maps;
pub mod model;
pub mod nms;
pub mod ops;
pub mod scalar;
pub mod synthetic;
pub mod tape;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use maps::{BinaryMap, EdgeMap, GroundTruth, Plane};
pub use model::{build_tin1, build_tin2, EnrichmentSpec, Network, Variant};
pub use scalar::Scalar;
pub use tape::{Tape, Var};
pub use tensor::Tensor;
