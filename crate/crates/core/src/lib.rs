//! Explanations of black-box text predictions by minimal influential token
//! subsets, per-token drop scores and counterfactual samples.

pub mod error;
pub mod eval;
pub mod explainer;
pub mod oracle;
pub mod predictor;
pub mod render;
pub mod sampling;
pub mod text;

pub use error::{Error, Result};
pub use explainer::{Explainer, ExplainerConfig, Explanation};
pub use predictor::{Prediction, Predictor};
pub use sampling::SamplingConfig;
pub use text::{tokenize, Document};
