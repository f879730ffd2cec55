//! Run configuration files: flat key=value text mirroring the model and
//! training parameters. Unknown keys are hard errors; when a file is given
//! every key must be present (defaults apply only when no file is passed).

use std::path::Path;

use pcsod_core::autodiff::Reduction;
use pcsod_core::model::ModelConfig;
use pcsod_core::train::TrainConfig;

use crate::error::CliError;

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

const KEYS: [&str; 16] = [
    "lr",
    "weight_decay",
    "epochs",
    "batch_size",
    "block_size",
    "seed",
    "votes",
    "k_enc",
    "level_dims",
    "fc_channels",
    "k_semantics",
    "k_multiscale",
    "reduction",
    "norm",
    "bn_momentum",
    "points_per_view",
];

/// Extra knob carried alongside the core configs: how many points synthetic
/// views get (the published data has 240,000; desk scale defaults to 4,096).
#[derive(Clone, Debug)]
pub struct FullConfig {
    pub run: RunConfig,
    pub points_per_view: usize,
}

impl Default for FullConfig {
    fn default() -> Self {
        FullConfig {
            run: RunConfig::default(),
            points_per_view: 4096,
        }
    }
}

fn parse_usize_list<const N: usize>(key: &str, value: &str) -> Result<[usize; N], CliError> {
    let parts: Vec<usize> = value
        .split(',')
        .map(|p| p.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::usage(format!("bad value for {key}: {value}")))?;
    parts
        .try_into()
        .map_err(|_| CliError::usage(format!("{key} needs exactly {N} comma-separated values")))
}

pub fn parse_config(text: &str) -> Result<FullConfig, CliError> {
    let mut cfg = FullConfig::default();
    let mut seen: Vec<String> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("config line {}: expected key=value", ln + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(CliError::usage(format!("unknown config key {key}")));
        }
        if seen.iter().any(|s| s == key) {
            return Err(CliError::usage(format!("duplicate config key {key}")));
        }
        seen.push(key.to_string());
        macro_rules! parse_val {
            () => {
                value
                    .parse()
                    .map_err(|_| CliError::usage(format!("bad value for {key}: {value}")))?
            };
        }
        match key {
            "lr" => cfg.run.train.lr = parse_val!(),
            "weight_decay" => cfg.run.train.weight_decay = parse_val!(),
            "epochs" => cfg.run.train.epochs = parse_val!(),
            "batch_size" => cfg.run.train.batch_size = parse_val!(),
            "block_size" => cfg.run.train.block_size = parse_val!(),
            "seed" => cfg.run.train.seed = parse_val!(),
            "votes" => cfg.run.train.votes = parse_val!(),
            "k_enc" => cfg.run.model.k_enc = parse_val!(),
            "level_dims" => cfg.run.model.level_dims = parse_usize_list("level_dims", value)?,
            "fc_channels" => cfg.run.model.fc_channels = parse_val!(),
            "k_semantics" => cfg.run.model.k_semantics = parse_usize_list("k_semantics", value)?,
            "k_multiscale" => cfg.run.model.k_multiscale = parse_usize_list("k_multiscale", value)?,
            "reduction" => {
                cfg.run.model.reduction = Reduction::parse(value)
                    .ok_or_else(|| CliError::usage(format!("bad value for reduction: {value}")))?
            }
            "norm" => {
                cfg.run.model.norm = match value {
                    "true" | "1" => true,
                    "false" | "0" => false,
                    _ => return Err(CliError::usage(format!("bad value for norm: {value}"))),
                }
            }
            "bn_momentum" => cfg.run.model.bn_momentum = parse_val!(),
            "points_per_view" => cfg.points_per_view = parse_val!(),
            _ => unreachable!(),
        }
    }
    for key in KEYS {
        if !seen.iter().any(|s| s == key) {
            return Err(CliError::usage(format!("missing config key {key}")));
        }
    }
    cfg.run.model.validate()?;
    cfg.run.train.validate()?;
    Ok(cfg)
}

pub fn load_config(path: Option<&Path>) -> Result<FullConfig, CliError> {
    match path {
        None => Ok(FullConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::data(format!("{}: {e}", p.display())))?;
            parse_config(&text)
        }
    }
}

pub fn format_config(cfg: &FullConfig) -> String {
    let dims = cfg.run.model.level_dims.map(|d| d.to_string()).join(",");
    let ks = cfg.run.model.k_semantics.map(|d| d.to_string()).join(",");
    let km = cfg.run.model.k_multiscale.map(|d| d.to_string()).join(",");
    format!(
        "lr={}\nweight_decay={}\nepochs={}\nbatch_size={}\nblock_size={}\nseed={}\nvotes={}\n\
         k_enc={}\nlevel_dims={}\nfc_channels={}\nk_semantics={}\nk_multiscale={}\nreduction={}\n\
         norm={}\nbn_momentum={}\npoints_per_view={}\n",
        cfg.run.train.lr,
        cfg.run.train.weight_decay,
        cfg.run.train.epochs,
        cfg.run.train.batch_size,
        cfg.run.train.block_size,
        cfg.run.train.seed,
        cfg.run.train.votes,
        cfg.run.model.k_enc,
        dims,
        cfg.run.model.fc_channels,
        ks,
        km,
        cfg.run.model.reduction.name(),
        cfg.run.model.norm,
        cfg.run.model.bn_momentum,
        cfg.points_per_view,
    )
}
