//! Curation toolkit for synthetic paired makeup datasets.
//!
//! * [`model`]: rasters, parsing masks, manifests and filter configuration
//! * [`mask_algebra`]: exact counting on binary masks
//! * [`filters`]: misalignment, failed-makeup and background-consistency filters
//! * [`metrics`]: SSIM, background MSE, embedding cosine similarity, pass rate
//! * [`ref_injector`]: reference implementation of low-rank key/value
//!   injection into attention, with analytic gradients
//! * [`pipeline`]: parallel, order-preserving batch runs and reporting
//!
//! Floating-point code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which is what the tolerances assume.

pub mod error;
pub mod filters;
pub mod mask_algebra;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod ref_injector;
mod scalar;

pub use error::{ForgeError, Result};
pub use scalar::{exact_sum, Scalar};

pub type Tensor = ref_injector::Tensor3<f64>;
pub type WeightMatrix = ref_injector::Matrix<f64>;
pub type HiddenStates = ref_injector::HiddenStates<f64>;
pub type InjectorWeights = ref_injector::InjectorWeights<f64>;
pub type AttentionInputs = ref_injector::AttentionInputs<f64>;
pub type InjectorGradients = ref_injector::InjectorGradients<f64>;
pub type EmbeddingVector = metrics::EmbeddingVector<f64>;
