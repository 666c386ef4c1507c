//! One-pass streaming algorithms: merge-and-reduce over the batch coreset,
//! sensitivity-sampled two-tier streaming, the O(1)-update region sketch,
//! and the d = 2 trigonometric-moment sketch.
//!
//! Every state here is single-writer (stream order matters); queries run on
//! frozen or finalized states only.

pub mod fourier;
pub mod merge_reduce;
pub mod region;
pub mod sensitivity;

pub use fourier::FourierSketch;
pub use merge_reduce::MergeReduce;
pub use region::{RegionEnsemble, RegionSketch, RegionSketchConfig};
pub use sensitivity::{SensitivityParams, SensitivityStream};
