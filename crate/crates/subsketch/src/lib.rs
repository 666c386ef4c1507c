//! Small-memory data structures for weighted `lp` norm queries.
//!
//! Given an n x d matrix of weighted rows, the crate builds compact sketches
//! that answer `sum_i w_i |<A_i, x>|^p` for every query direction `x` with
//! multiplicative `(1 +- eps)` or additive `O(eps)` error, in batch and in a
//! single pass over a row stream. It also estimates regularized SVM hinge
//! objectives at query points and ships the experiment harness used to check
//! the size and separation scaling laws empirically.

pub mod caratheodory;
pub mod coreset;
pub mod error;
pub mod experiments;
pub mod harmonics;
pub mod model;
pub mod rounding;
pub mod scalar;
pub mod sphere;
pub mod stream;
pub mod svm;
pub mod tensor;

/// Concrete scalar used by the sketch pipeline and all file formats.
pub type Real = f64;

/// Symmetric tensor over the pipeline scalar.
pub type RealSymTensor = tensor::SymTensor<Real>;

pub use error::{Result, SketchError};
pub use model::{
    exact_lp_power, normalize_weights, sup_error_on_net, NetSupError, QueryDirection,
    SketchReport, WeightedPointSet,
};
