//! Core library for point-cloud salient object detection.
//!
//! Everything algorithmic lives here: domain types for 3D views, exact
//! neighborhood/sampling kernels, a minimal reverse-mode autodiff engine,
//! the segmentation network (encoder, feature aggregation, point perception
//! and saliency perception blocks), the training loop with voting inference,
//! and the evaluation metrics. File formats, the CLI, and anything touching
//! the filesystem live in the companion `pcsod-cli` crate.
//!
//! The crate is `no_std` (with `alloc`) so the numeric core stays portable;
//! all transcendental math goes through `libm`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod autodiff;
pub mod checkpoint;
pub mod geometry;
pub mod gradcheck;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod synth;
pub mod train;
pub mod view;

pub use rng::Rng;
pub use synth::SceneRecipe;
pub use view::{ChunkPlan, EncodedInput, PointView};
