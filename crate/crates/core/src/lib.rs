//! Two-stage prototype clustering.
//!
//! Five base clusterers (K-means, self-organizing map, SOINN, Ant K-means and
//! ASCA), the two-stage compositions built from them (SOMK, SOMAK, ASCAK,
//! SOINAK), and a cross-validated evaluation protocol that scores a method by
//! the class entropy of its clusters on held-out folds.

pub mod ant_kmeans;
pub mod asca;
pub mod data;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod kmeans;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod soinn;
pub mod som;

pub use data::{Dataset, FoldPlan, NormalizationParams};
pub use error::{Error, Result};
pub use pipeline::{Method, MethodConfig, PipelineModel, PrototypeSet};
pub use rng::RngSeed;
