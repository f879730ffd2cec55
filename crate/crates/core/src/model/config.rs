//! Network hyperparameters.

use alloc::format;
use alloc::string::String;
use core::fmt;

use crate::autodiff::Reduction;

/// Neighbor counts and widths of one point perception block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PpbConfig {
    /// Neighbor counts of branches 1-4, strictly increasing, each ≥ 1.
    pub k: [usize; 4],
    /// Channels of the incoming point-wise features.
    pub channels: usize,
    /// Width of the geometric embedding MLP (two layers of this width).
    pub embed_width: usize,
    /// Channels of the block output (the block is shape-preserving).
    pub out_channels: usize,
}

impl PpbConfig {
    /// Conventional widths for features of `channels` dimensions: embedding
    /// at half width, output width preserved.
    pub fn for_channels(channels: usize, k: [usize; 4]) -> Self {
        PpbConfig {
            k,
            channels,
            embed_width: (channels / 2).max(1),
            out_channels: channels,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.k[0] == 0 {
            return Err(ConfigError(format!("PPB k[0] = 0, must be ≥ 1")));
        }
        for w in self.k.windows(2) {
            if w[1] <= w[0] {
                return Err(ConfigError(format!(
                    "PPB neighbor counts must be strictly increasing, got {:?}",
                    self.k
                )));
            }
        }
        if self.channels == 0 || self.embed_width == 0 || self.out_channels == 0 {
            return Err(ConfigError(String::from("PPB widths must be ≥ 1")));
        }
        Ok(())
    }
}

/// Full model hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    /// Encoder grouping neighbor count.
    pub k_enc: usize,
    /// Feature channels of encoder levels 1-4.
    pub level_dims: [usize; 4],
    /// Channels of the aggregated compact features.
    pub fc_channels: usize,
    /// Branch neighbor counts of the global-semantics block (applied to the
    /// deepest level) and of the multi-scale block (applied to the
    /// aggregated features).
    pub k_semantics: [usize; 4],
    pub k_multiscale: [usize; 4],
    /// Neighbor reduction inside both perception blocks.
    pub reduction: Reduction,
    /// Batch-normalization layers present. Disabled for gradient checking.
    pub norm: bool,
    /// Momentum of the running normalization statistics.
    pub bn_momentum: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            k_enc: 32,
            level_dims: [64, 128, 256, 512],
            fc_channels: 128,
            k_semantics: [1, 4, 9, 16],
            k_multiscale: [1, 9, 25, 49],
            reduction: Reduction::MeanMax,
            norm: true,
            bn_momentum: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config: {}", self.0)
    }
}

impl ModelConfig {
    pub fn ppb_semantics(&self) -> PpbConfig {
        PpbConfig::for_channels(self.level_dims[3], self.k_semantics)
    }

    pub fn ppb_multiscale(&self) -> PpbConfig {
        PpbConfig::for_channels(self.fc_channels, self.k_multiscale)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.k_enc == 0 {
            return Err(ConfigError(String::from("k_enc must be ≥ 1")));
        }
        if self.level_dims.iter().any(|&d| d == 0) || self.fc_channels == 0 {
            return Err(ConfigError(String::from("channel widths must be ≥ 1")));
        }
        if !(0.0..1.0).contains(&self.bn_momentum) {
            return Err(ConfigError(format!("bn_momentum {} outside [0,1)", self.bn_momentum)));
        }
        self.ppb_semantics().validate()?;
        self.ppb_multiscale().validate()?;
        Ok(())
    }

    /// Smallest block size the full forward pass accepts: the deepest level
    /// must hold the largest semantic branch.
    pub fn min_block_size(&self) -> usize {
        256 * self.k_semantics[3].max(1)
    }
}
