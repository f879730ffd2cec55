//! IO, file formats, threading, and command implementations for the
//! point-cloud saliency toolkit. The algorithmic core lives in
//! `pcsod-core`; this crate owns everything that touches the filesystem,
//! the clock, or OS threads.

pub mod ckpt;
pub mod commands;
pub mod config;
pub mod csvio;
pub mod dataset;
pub mod error;
pub mod ply;
pub mod recipe;
pub mod runner;

pub use error::CliError;
