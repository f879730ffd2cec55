//! `pcsod synth`: generate a labeled synthetic dataset on disk.

use std::path::PathBuf;

use clap::Args;
use pcsod_core::synth::{dataset_recipe, generate_scene};

use crate::dataset::write_dataset;
use crate::error::CliError;
use crate::recipe::load_recipe;

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output dataset directory (train/ and test/ are created inside).
    #[arg(long)]
    pub out: PathBuf,
    /// Number of views to generate.
    #[arg(long)]
    pub views: usize,
    /// Master seed; every view derives its own stream from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fraction of views that go to the train split.
    #[arg(long, default_value_t = 0.7)]
    pub split_ratio: f64,
    /// Points per generated view.
    #[arg(long, default_value_t = 4096)]
    pub points: usize,
    /// Base recipe file; when given, its object kind and parameters are
    /// used for every view (reseeded per view).
    #[arg(long)]
    pub recipe: Option<PathBuf>,
}

pub fn run(args: &SynthArgs) -> Result<(), CliError> {
    if args.views == 0 {
        return Err(CliError::usage("--views must be ≥ 1"));
    }
    if args.points == 0 {
        return Err(CliError::usage("--points must be ≥ 1"));
    }
    let base = args.recipe.as_deref().map(load_recipe).transpose()?;
    let views: Vec<_> = (0..args.views)
        .map(|i| {
            let mut recipe = match &base {
                Some(r) => {
                    let mut r = r.clone();
                    r.rng_seed = r.rng_seed.wrapping_add(i as u64);
                    r
                }
                None => dataset_recipe(args.seed, i),
            };
            recipe.total_points = args.points;
            generate_scene(&recipe)
        })
        .collect();
    let (n_train, n_test) = write_dataset(&views, &args.out, args.split_ratio)?;
    println!(
        "wrote {n_train} train and {n_test} test views ({} points each) to {}",
        args.points,
        args.out.display()
    );
    Ok(())
}
