//! Transductive few-shot segmentation by region-proportion regularised
//! inference.
//!
//! Given a handful of annotated support images and one unlabelled query,
//! [`engine::repri_infer`] fits a cosine-similarity foreground classifier to
//! the query by gradient descent on a support cross-entropy, a query entropy
//! and a KL penalty pulling the predicted foreground proportion toward a
//! prior. Features are precomputed and read from a small binary container
//! format ([`taskio::container`]).

pub mod classifier;
pub mod cli;
pub mod engine;
pub mod error;
pub mod eval;
pub mod losses;
pub mod par;
pub mod rng;
pub mod taskio;
pub mod types;

pub use engine::{repri_infer, InferenceResult};
pub use error::{RepriError, Result};
pub use par::Execution;
pub use types::{
    ClassifierParams, FeatureMap, Hyperparams, LossSelector, Mode, PixelMask, ProbMap,
    Proportion, TaskInstance,
};
