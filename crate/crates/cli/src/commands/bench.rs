//! `pcsod bench`: timing of the pipeline stages on a synthetic view.

use std::time::Instant;

use clap::Args;
use pcsod_core::autodiff::{BnMode, ParamStore, Session};
use pcsod_core::model::{forward, init_model};
use pcsod_core::rng::Rng;
use pcsod_core::synth::{generate_scene, SceneRecipe};
use pcsod_core::train::infer_full_view;
use pcsod_core::view::{encode_input, sample_training_block};

use crate::config::load_config;
use crate::error::CliError;
use crate::runner::ThreadedRunner;

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Points in the benchmark view.
    #[arg(long, default_value_t = 16384)]
    pub points: usize,
    /// Run configuration file.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
}

pub fn run(args: &BenchArgs) -> Result<(), CliError> {
    let cfg = load_config(args.config.as_deref())?;
    let block = cfg.run.train.block_size;
    if args.points < block {
        return Err(CliError::usage(format!(
            "--points must be at least the block size ({block})"
        )));
    }
    let runner = ThreadedRunner::from_env();
    println!("block size {block}, {} threads", runner.threads());

    let t = Instant::now();
    let view = generate_scene(&SceneRecipe {
        rng_seed: 0,
        total_points: args.points,
        ..SceneRecipe::default()
    });
    println!("generate {} points: {:>8.1} ms", args.points, t.elapsed().as_secs_f64() * 1e3);

    let mut store: ParamStore<f32> = ParamStore::new();
    init_model(&mut store, &cfg.run.model, &mut Rng::new(0))?;
    println!("model: {} learnable values", store.learnable_values());

    let mut rng = Rng::new(1);
    let indices = sample_training_block(&view, block, &mut rng);
    let sub = view.gather(&indices);
    let encoded = encode_input(&sub);

    let t = Instant::now();
    let mut sess = Session::new(&store, BnMode::Running);
    let pass = forward(&mut sess, &cfg.run.model, &sub.positions, &encoded)?;
    let fwd = t.elapsed().as_secs_f64();
    println!(
        "forward  ({} pts): {:>8.1} ms  ({:.0} pts/s)",
        block,
        fwd * 1e3,
        block as f64 / fwd
    );

    let t = Instant::now();
    let mut sess = Session::new(&store, BnMode::Batch);
    let pass2 = forward(&mut sess, &cfg.run.model, &sub.positions, &encoded)?;
    let labels = sub.labels.as_ref().expect("synthetic views are labeled");
    let loss = sess
        .graph
        .cross_entropy(pass2.logits, labels)
        .map_err(pcsod_core::model::ModelError::from)?;
    sess.graph
        .backward(loss)
        .map_err(pcsod_core::model::ModelError::from)?;
    let bwd = t.elapsed().as_secs_f64();
    println!(
        "fwd+bwd  ({} pts): {:>8.1} ms  ({:.0} pts/s)",
        block,
        bwd * 1e3,
        block as f64 / bwd
    );

    let t = Instant::now();
    let pred = infer_full_view(
        &view,
        &store,
        &cfg.run.model,
        block,
        cfg.run.train.votes,
        0,
        &runner,
    )?;
    let inf = t.elapsed().as_secs_f64();
    println!(
        "full view ({} pts, {} votes): {:>8.2} s  ({:.0} pts/s)",
        pred.len(),
        cfg.run.train.votes,
        inf,
        pred.len() as f64 / inf
    );
    let _ = pass;
    Ok(())
}
