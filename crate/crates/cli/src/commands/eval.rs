//! `pcsod eval`: full-view voting inference over a split, per-view and
//! aggregate metrics as CSV.

use std::path::PathBuf;

use clap::Args;
use pcsod_core::autodiff::ParamStore;
use pcsod_core::checkpoint::validate_compatible;
use pcsod_core::metrics::{aggregate, evaluate, MetricsConfig, MetricsReport};
use pcsod_core::model::init_model;
use pcsod_core::rng::Rng;
use pcsod_core::train::infer_full_view;
use pcsod_core::view::PointView;

use crate::ckpt::load_checkpoint;
use crate::config::{load_config, FullConfig};
use crate::csvio::{write_curves, write_report};
use crate::dataset::{load_dataset, Split};
use crate::error::CliError;
use crate::runner::ThreadedRunner;

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Dataset root.
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint to evaluate.
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Output CSV report (per-view rows + aggregate row).
    #[arg(long)]
    pub report: PathBuf,
    /// Run configuration file; must match the checkpoint.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Optional threshold-curve CSV of the aggregate F/E values.
    #[arg(long)]
    pub curves: Option<PathBuf>,
    /// Which split to evaluate.
    #[arg(long, default_value = "test")]
    pub split: String,
}

/// Evaluates a list of labeled views and returns per-view reports plus the
/// aggregate. Shared by `eval` and the acceptance suite.
pub fn evaluate_views(
    views: &[PointView],
    store: &pcsod_core::autodiff::ParamStore<f32>,
    cfg: &FullConfig,
    runner: &ThreadedRunner,
) -> Result<(Vec<(String, MetricsReport)>, MetricsReport), CliError> {
    let mut rows = Vec::with_capacity(views.len());
    for view in views {
        let labels = view
            .labels
            .as_ref()
            .ok_or_else(|| CliError::data(format!("view {} has no labels", view.view_id)))?;
        let pred = infer_full_view(
            view,
            store,
            &cfg.run.model,
            cfg.run.train.block_size,
            cfg.run.train.votes,
            cfg.run.train.seed,
            runner,
        )?;
        let report = evaluate(&pred.probabilities, labels, &MetricsConfig::default())?;
        rows.push((view.view_id.clone(), report));
    }
    let agg = aggregate(&rows.iter().map(|(_, r)| r.clone()).collect::<Vec<_>>())?;
    Ok((rows, agg))
}

pub fn run(args: &EvalArgs) -> Result<(), CliError> {
    let split = Split::parse(&args.split)
        .ok_or_else(|| CliError::usage(format!("unknown split {}", args.split)))?;
    let cfg = load_config(args.config.as_deref())?;
    let views = load_dataset(&args.data, split)?;
    let store = load_checkpoint(&args.ckpt)?;
    let mut expected: ParamStore<f32> = ParamStore::new();
    init_model(&mut expected, &cfg.run.model, &mut Rng::new(0))?;
    validate_compatible(&store, &expected)?;

    let runner = ThreadedRunner::from_env();
    let (rows, agg) = evaluate_views(&views, &store, &cfg, &runner)?;
    write_report(&args.report, &rows, &agg)?;
    if let Some(curves) = &args.curves {
        write_curves(curves, &agg)?;
    }
    println!(
        "{} views ({split}): mae {:.4}  iou {:.4}  max-F {:.4}  max-E {:.4}",
        rows.len(),
        agg.mae,
        agg.iou,
        agg.max_f,
        agg.max_e
    );
    Ok(())
}
