//! The baseline network: a four-level set-abstraction encoder, the feature
//! aggregation block fusing all levels top-down, two point perception
//! blocks extracting global semantics and multi-scale context, and the
//! saliency perception block producing per-point salient probabilities.

mod config;
mod net;

pub use config::{ConfigError, ModelConfig, PpbConfig};
pub use net::{
    encoder_forward, fab_forward, forward, init_model, ppb_forward, spb_forward, ForwardPass,
    LevelSet, ModelError, Prediction,
};
