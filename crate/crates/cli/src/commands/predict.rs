//! `pcsod predict`: per-point salient probabilities for one view, written
//! as a probability-heatmap PLY that also carries hard labels at 0.5.

use std::path::PathBuf;

use clap::Args;
use pcsod_core::autodiff::ParamStore;
use pcsod_core::checkpoint::validate_compatible;
use pcsod_core::model::init_model;
use pcsod_core::rng::Rng;
use pcsod_core::train::infer_full_view;

use crate::ckpt::load_checkpoint;
use crate::config::load_config;
use crate::error::CliError;
use crate::ply::{load_ply, save_ply, PlyFormat};
use crate::runner::ThreadedRunner;

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Input view.
    #[arg(long, value_name = "PLY")]
    pub r#in: PathBuf,
    /// Checkpoint to predict with.
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Output PLY: heat-mapped colors plus a label property at threshold 0.5.
    #[arg(long)]
    pub out: PathBuf,
    /// Run configuration file; must match the checkpoint.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run(args: &PredictArgs) -> Result<(), CliError> {
    let cfg = load_config(args.config.as_deref())?;
    let view = load_ply(&args.r#in)
        .map_err(|e| CliError::data(format!("{}: {e}", args.r#in.display())))?;
    view.validate()?;
    let store = load_checkpoint(&args.ckpt)?;
    let mut expected: ParamStore<f32> = ParamStore::new();
    init_model(&mut expected, &cfg.run.model, &mut Rng::new(0))?;
    validate_compatible(&store, &expected)?;

    let runner = ThreadedRunner::from_env();
    let pred = infer_full_view(
        &view,
        &store,
        &cfg.run.model,
        cfg.run.train.block_size,
        cfg.run.train.votes,
        cfg.run.train.seed,
        &runner,
    )?;

    let mut out_view = view;
    out_view.labels = Some(
        pred.probabilities
            .iter()
            .map(|&p| (p >= 0.5) as u8)
            .collect(),
    );
    save_ply(
        &out_view,
        &args.out,
        PlyFormat::BinaryLittleEndian,
        Some(&pred.probabilities),
    )
    .map_err(|e| CliError::data(format!("{}: {e}", args.out.display())))?;

    let salient = out_view
        .labels
        .as_ref()
        .unwrap()
        .iter()
        .filter(|&&l| l == 1)
        .count();
    println!(
        "{} points, {salient} predicted salient, wrote {}",
        out_view.len(),
        args.out.display()
    );
    Ok(())
}
