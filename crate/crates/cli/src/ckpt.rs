//! Checkpoint file IO over the byte container.

use std::path::Path;

use pcsod_core::autodiff::ParamStore;
use pcsod_core::checkpoint::{decode, encode};

use crate::error::CliError;

pub fn save_checkpoint(store: &ParamStore<f32>, path: &Path) -> Result<(), CliError> {
    let bytes = encode(store);
    std::fs::write(path, bytes).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

pub fn load_checkpoint(path: &Path) -> Result<ParamStore<f32>, CliError> {
    let bytes =
        std::fs::read(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(decode(&bytes)?)
}
