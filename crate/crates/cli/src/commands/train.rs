//! `pcsod train`: train on a dataset's train split, write a checkpoint and
//! a CSV loss log.

use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use pcsod_core::checkpoint::validate_compatible;
use pcsod_core::metrics::{aggregate, evaluate, MetricsConfig};
use pcsod_core::model::init_model;
use pcsod_core::autodiff::ParamStore;
use pcsod_core::rng::Rng;
use pcsod_core::train::{infer_full_view, RunLog, StepRecord, Trainer};

use crate::ckpt::{load_checkpoint, save_checkpoint};
use crate::config::load_config;
use crate::csvio::{write_runlog, TrainEval};
use crate::dataset::{load_dataset, Split};
use crate::error::CliError;
use crate::runner::ThreadedRunner;

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Dataset root (expects train/ inside).
    #[arg(long)]
    pub data: PathBuf,
    /// Run configuration file; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// CSV loss log path.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Resume from an existing checkpoint.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Evaluate the train split every N epochs (0 = never).
    #[arg(long, default_value_t = 0)]
    pub eval_every: usize,
}

pub fn run(args: &TrainArgs) -> Result<(), CliError> {
    let cfg = load_config(args.config.as_deref())?;
    let views = load_dataset(&args.data, Split::Train)?;
    let runner = ThreadedRunner::from_env();

    let mut trainer = match &args.resume {
        Some(path) => {
            let loaded = load_checkpoint(path)?;
            let mut expected: ParamStore<f32> = ParamStore::new();
            init_model(&mut expected, &cfg.run.model, &mut Rng::new(0))?;
            validate_compatible(&loaded, &expected)?;
            Trainer::resume(&views, cfg.run.model.clone(), cfg.run.train.clone(), loaded)?
        }
        None => Trainer::new(&views, cfg.run.model.clone(), cfg.run.train.clone())?,
    };

    println!(
        "training on {} views for {} epochs ({} steps, {} threads)",
        views.len(),
        cfg.run.train.epochs,
        trainer.total_steps(),
        runner.threads()
    );

    let started = Instant::now();
    let mut log = RunLog::default();
    let mut evals: Vec<TrainEval> = Vec::new();
    let spe = trainer.steps_per_epoch();
    while trainer.current_step() < trainer.total_steps() {
        let epoch = trainer.current_epoch();
        let loss = trainer.step(&runner)?;
        if !loss.is_finite() {
            return Err(CliError::Numeric(format!(
                "non-finite loss at step {}",
                trainer.current_step()
            )));
        }
        let step = trainer.current_step();
        log.push(StepRecord {
            step,
            epoch,
            loss,
            elapsed_sec: started.elapsed().as_secs_f64(),
        });
        let epoch_finished = step as usize % spe == 0;
        let epoch_now = step as usize / spe;
        if epoch_finished && args.eval_every > 0 && epoch_now % args.eval_every == 0 {
            let mut reports = Vec::new();
            for view in &views {
                let pred = infer_full_view(
                    view,
                    &trainer.store,
                    &trainer.model_cfg,
                    cfg.run.train.block_size,
                    cfg.run.train.votes,
                    cfg.run.train.seed,
                    &runner,
                )?;
                let labels = view.labels.as_ref().expect("train views are labeled");
                reports.push(evaluate(&pred.probabilities, labels, &MetricsConfig::default())?);
            }
            let agg = aggregate(&reports)?;
            println!(
                "epoch {epoch_now}: loss {loss:.4}  train mae {:.4} iou {:.4} max-F {:.4}",
                agg.mae, agg.iou, agg.max_f
            );
            evals.push(TrainEval {
                step,
                mae: agg.mae,
                max_f: agg.max_f,
                max_e: agg.max_e,
                iou: agg.iou,
            });
        }
    }

    save_checkpoint(&trainer.store, &args.out)?;
    if let Some(log_path) = &args.log {
        write_runlog(log_path, &log, &evals)?;
    }
    let final_loss = log.records.last().map_or(f64::NAN, |r| r.loss);
    println!(
        "done in {:.1}s: {} steps, final loss {final_loss:.4}, checkpoint {}",
        started.elapsed().as_secs_f64(),
        log.records.len(),
        args.out.display()
    );
    Ok(())
}
