//! Training loop and full-view voting inference.
//!
//! Every random choice of a run is derived from (seed, position in the
//! schedule) rather than from a mutating generator, so a run resumed from a
//! checkpoint replays exactly the steps an uninterrupted run would have
//! taken. An epoch is one pass in which every training view contributes one
//! sampled block.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::autodiff::{adam_step, AdamConfig, BnMode, ParamStore, Session};
use crate::model::{forward, init_model, ModelConfig, ModelError, Prediction};
use crate::rng::Rng;
use crate::view::{encode_input, plan_chunks, rotate_z, sample_training_block, PointView};

// stream tags for deriving independent generators from one seed
const STREAM_INIT: u64 = 0x01;
const STREAM_EPOCH: u64 = 0x1000;
const STREAM_VIEW: u64 = 0x2000_0000;
const STREAM_VOTE: u64 = 0x4000_0000;

/// Runs a set of independent jobs and collects their results in index
/// order. The sequential implementation lives here; a threaded one backed
/// by OS threads lives in the companion crate.
pub trait BatchRunner: Sync {
    fn run<O: Send, F: Fn(usize) -> O + Sync>(&self, jobs: usize, f: F) -> Vec<O>;
}

/// Runs jobs one after another on the calling thread.
pub struct SequentialRunner;

impl BatchRunner for SequentialRunner {
    fn run<O: Send, F: Fn(usize) -> O + Sync>(&self, jobs: usize, f: F) -> Vec<O> {
        (0..jobs).map(f).collect()
    }
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub block_size: usize,
    pub seed: u64,
    pub votes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 5e-4,
            weight_decay: 1e-4,
            // desk-scale default; the full-scale run is 3000
            epochs: 200,
            batch_size: 32,
            block_size: 4096,
            seed: 0,
            votes: 3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 || self.batch_size == 0 || self.votes == 0 {
            return Err(TrainError::Config(String::from(
                "epochs, batch_size, and votes must be ≥ 1",
            )));
        }
        if self.block_size == 0 || self.block_size % 256 != 0 {
            return Err(TrainError::Config(String::from(
                "block_size must be a positive multiple of 256",
            )));
        }
        if !(self.lr >= 0.0) || !(self.weight_decay >= 0.0) {
            return Err(TrainError::Config(String::from(
                "lr and weight_decay must be non-negative",
            )));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }
}

#[derive(Clone, Debug)]
pub enum TrainError {
    EmptyDataset,
    UnlabeledView(String),
    Config(String),
    Model(ModelError),
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::EmptyDataset => write!(f, "training requires a nonempty labeled split"),
            TrainError::UnlabeledView(id) => write!(f, "train views require labels ({id} has none)"),
            TrainError::Config(s) => write!(f, "{s}"),
            TrainError::Model(e) => write!(f, "{e}"),
        }
    }
}

impl From<ModelError> for TrainError {
    fn from(e: ModelError) -> Self {
        TrainError::Model(e)
    }
}

/// One logged optimizer step.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub step: u64,
    pub epoch: usize,
    pub loss: f64,
    pub elapsed_sec: f64,
}

/// Loss trajectory of a run; per-epoch evaluation rows are appended by the
/// driver when it evaluates.
#[derive(Clone, Debug, Default)]
pub struct RunLog {
    pub records: Vec<StepRecord>,
}

impl RunLog {
    pub fn push(&mut self, record: StepRecord) {
        if let Some(last) = self.records.last() {
            debug_assert!(record.step > last.step, "step counter must be monotone");
        }
        self.records.push(record);
    }
}

/// Deterministic trainer over a labeled dataset.
pub struct Trainer<'d> {
    views: &'d [PointView],
    pub model_cfg: ModelConfig,
    pub cfg: TrainConfig,
    pub store: ParamStore<f32>,
}

impl<'d> Trainer<'d> {
    /// Fresh trainer with seed-derived parameter initialization.
    pub fn new(
        views: &'d [PointView],
        model_cfg: ModelConfig,
        cfg: TrainConfig,
    ) -> Result<Self, TrainError> {
        cfg.validate()?;
        Self::check_views(views, cfg.block_size, &model_cfg)?;
        let mut store = ParamStore::new();
        init_model(&mut store, &model_cfg, &mut Rng::derive(cfg.seed, STREAM_INIT))?;
        Ok(Trainer {
            views,
            model_cfg,
            cfg,
            store,
        })
    }

    /// Trainer resuming from a previously saved store; the schedule picks
    /// up at the store's step counter.
    pub fn resume(
        views: &'d [PointView],
        model_cfg: ModelConfig,
        cfg: TrainConfig,
        store: ParamStore<f32>,
    ) -> Result<Self, TrainError> {
        cfg.validate()?;
        Self::check_views(views, cfg.block_size, &model_cfg)?;
        Ok(Trainer {
            views,
            model_cfg,
            cfg,
            store,
        })
    }

    fn check_views(
        views: &[PointView],
        block_size: usize,
        model_cfg: &ModelConfig,
    ) -> Result<(), TrainError> {
        if views.is_empty() {
            return Err(TrainError::EmptyDataset);
        }
        for v in views {
            if !v.has_labels() {
                return Err(TrainError::UnlabeledView(v.view_id.clone()));
            }
        }
        if block_size < model_cfg.min_block_size() {
            return Err(TrainError::Config(alloc::format!(
                "block_size {} below the model's minimum {}",
                block_size,
                model_cfg.min_block_size()
            )));
        }
        Ok(())
    }

    pub fn steps_per_epoch(&self) -> usize {
        self.views.len().div_ceil(self.cfg.batch_size)
    }

    pub fn total_steps(&self) -> u64 {
        (self.steps_per_epoch() * self.cfg.epochs) as u64
    }

    pub fn current_step(&self) -> u64 {
        self.store.step
    }

    pub fn current_epoch(&self) -> usize {
        (self.store.step as usize) / self.steps_per_epoch()
    }

    /// View indices making up the batch of a given global step.
    fn batch_views(&self, step: u64) -> Vec<usize> {
        let spe = self.steps_per_epoch();
        let epoch = (step as usize) / spe;
        let slot = (step as usize) % spe;
        let mut order: Vec<usize> = (0..self.views.len()).collect();
        Rng::derive(self.cfg.seed, STREAM_EPOCH + epoch as u64).shuffle(&mut order);
        order
            .into_iter()
            .skip(slot * self.cfg.batch_size)
            .take(self.cfg.batch_size)
            .collect()
    }

    /// One optimizer step: sample a block per batch view (with
    /// replacement), rotate, forward, average gradients in batch order,
    /// apply Adam, fold normalization statistics into the running averages.
    pub fn step<R: BatchRunner>(&mut self, runner: &R) -> Result<f64, TrainError> {
        let step = self.store.step;
        let epoch = (step as usize) / self.steps_per_epoch();
        let batch = self.batch_views(step);

        struct ViewResult {
            loss: f64,
            grads: Vec<Option<Vec<f32>>>,
            bn: Vec<(usize, usize, Vec<f32>, Vec<f32>)>,
            error: Option<TrainError>,
        }

        let store = &self.store;
        let model_cfg = &self.model_cfg;
        let cfg = &self.cfg;
        let views = self.views;
        let results: Vec<ViewResult> = runner.run(batch.len(), |slot| {
            let view_idx = batch[slot];
            let view = &views[view_idx];
            let mut rng = Rng::derive(
                cfg.seed,
                STREAM_VIEW + (step as u64) * 131 + view_idx as u64,
            );
            let indices = sample_training_block(view, cfg.block_size, &mut rng);
            let block = view.gather(&indices);
            let angle = rng.range_f64(0.0, 2.0 * core::f64::consts::PI);
            let block = rotate_z(&block, angle);
            let encoded = encode_input(&block);

            let mut sess = Session::new(store, BnMode::Batch);
            let run = (|| -> Result<(f64, Vec<Option<Vec<f32>>>, Vec<_>), TrainError> {
                let pass = forward(&mut sess, model_cfg, &block.positions, &encoded)?;
                let labels = block.labels.as_ref().expect("checked at construction");
                let loss = sess
                    .graph
                    .cross_entropy(pass.logits, labels)
                    .map_err(ModelError::from)?;
                sess.graph.backward(loss).map_err(ModelError::from)?;
                let loss_value = sess.graph.data(loss)[0] as f64;
                Ok((loss_value, sess.parameter_grads(), sess.bn_stats()))
            })();
            match run {
                Ok((loss, grads, bn)) => ViewResult {
                    loss,
                    grads,
                    bn,
                    error: None,
                },
                Err(e) => ViewResult {
                    loss: f64::NAN,
                    grads: Vec::new(),
                    bn: Vec::new(),
                    error: Some(e),
                },
            }
        });

        // merge in fixed batch order
        let mut merged: Vec<Option<Vec<f32>>> = (0..self.store.len()).map(|_| None).collect();
        let mut bn_acc: Vec<(usize, usize, Vec<f32>, Vec<f32>, usize)> = Vec::new();
        let mut loss_total = 0.0;
        let weight = 1.0 / results.len() as f32;
        for r in results {
            if let Some(e) = r.error {
                return Err(e);
            }
            loss_total += r.loss;
            for (idx, g) in r.grads.into_iter().enumerate() {
                let Some(g) = g else { continue };
                match &mut merged[idx] {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, &v)| *a += v * weight),
                    None => merged[idx] = Some(g.into_iter().map(|v| v * weight).collect()),
                }
            }
            for (mean_e, var_e, mean, var) in r.bn {
                match bn_acc.iter_mut().find(|(m, _, _, _, _)| *m == mean_e) {
                    Some((_, _, am, av, count)) => {
                        am.iter_mut().zip(&mean).for_each(|(a, &v)| *a += v);
                        av.iter_mut().zip(&var).for_each(|(a, &v)| *a += v);
                        *count += 1;
                    }
                    None => bn_acc.push((mean_e, var_e, mean, var, 1)),
                }
            }
        }

        adam_step(&mut self.store, &merged, &self.cfg.adam());

        let momentum = self.model_cfg.bn_momentum as f32;
        for (mean_e, var_e, mean_sum, var_sum, count) in bn_acc {
            let inv = 1.0 / count as f32;
            let entry = self.store.entry_mut(mean_e);
            for (r, &s) in entry.data.iter_mut().zip(&mean_sum) {
                *r = momentum * *r + (1.0 - momentum) * s * inv;
            }
            let entry = self.store.entry_mut(var_e);
            for (r, &s) in entry.data.iter_mut().zip(&var_sum) {
                *r = momentum * *r + (1.0 - momentum) * s * inv;
            }
        }

        let _ = epoch;
        Ok(loss_total / batch.len() as f64)
    }

    /// Re-estimates the normalization running statistics by averaging the
    /// exact batch statistics of `passes` fresh training blocks per view.
    /// Removes the momentum lag of the running averages before inference.
    pub fn refresh_norm_stats<R: BatchRunner>(
        &mut self,
        runner: &R,
        passes: usize,
    ) -> Result<(), TrainError> {
        let store = &self.store;
        let model_cfg = &self.model_cfg;
        let cfg = &self.cfg;
        let views = self.views;
        let jobs = views.len() * passes.max(1);
        let results: Vec<Result<Vec<(usize, usize, Vec<f32>, Vec<f32>)>, TrainError>> = runner
            .run(jobs, |job| {
                let view = &views[job % views.len()];
                let mut rng = Rng::derive(cfg.seed, 0x8000_0000 + job as u64);
                let indices = sample_training_block(view, cfg.block_size, &mut rng);
                let block = view.gather(&indices);
                let encoded = encode_input(&block);
                let mut sess = Session::new(store, BnMode::Batch);
                forward(&mut sess, model_cfg, &block.positions, &encoded)?;
                Ok(sess.bn_stats())
            });
        let mut acc: Vec<(usize, usize, Vec<f64>, Vec<f64>, usize)> = Vec::new();
        for r in results {
            for (mean_e, var_e, mean, var) in r? {
                match acc.iter_mut().find(|(m, _, _, _, _)| *m == mean_e) {
                    Some((_, _, am, av, count)) => {
                        am.iter_mut().zip(&mean).for_each(|(a, &v)| *a += v as f64);
                        av.iter_mut().zip(&var).for_each(|(a, &v)| *a += v as f64);
                        *count += 1;
                    }
                    None => acc.push((
                        mean_e,
                        var_e,
                        mean.iter().map(|&v| v as f64).collect(),
                        var.iter().map(|&v| v as f64).collect(),
                        1,
                    )),
                }
            }
        }
        for (mean_e, var_e, mean_sum, var_sum, count) in acc {
            let inv = 1.0 / count as f64;
            let entry = self.store.entry_mut(mean_e);
            for (r, &s) in entry.data.iter_mut().zip(&mean_sum) {
                *r = (s * inv) as f32;
            }
            let entry = self.store.entry_mut(var_e);
            for (r, &s) in entry.data.iter_mut().zip(&var_sum) {
                *r = (s * inv) as f32;
            }
        }
        Ok(())
    }

    /// Runs until `total_steps`, logging each step via the caller's clock.
    pub fn run<R: BatchRunner>(
        &mut self,
        runner: &R,
        clock: &dyn Fn() -> f64,
        log: &mut RunLog,
    ) -> Result<(), TrainError> {
        while self.store.step < self.total_steps() {
            let epoch = self.current_epoch();
            let loss = self.step(runner)?;
            log.push(StepRecord {
                step: self.store.step,
                epoch,
                loss,
                elapsed_sec: clock(),
            });
        }
        Ok(())
    }
}

/// Convenience entry point: train from scratch for the configured number of
/// epochs and return the parameters with the loss log.
pub fn train<R: BatchRunner>(
    views: &[PointView],
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    runner: &R,
    clock: &dyn Fn() -> f64,
) -> Result<(ParamStore<f32>, RunLog), TrainError> {
    let mut trainer = Trainer::new(views, model_cfg.clone(), cfg.clone())?;
    let mut log = RunLog::default();
    trainer.run(runner, clock, &mut log)?;
    Ok((trainer.store, log))
}

/// Covers the whole view with fresh chunk plans `votes` times and averages:
/// within a vote, multiply-visited points average their block predictions;
/// the final probability is the mean over votes.
///
/// Normalization uses the statistics of each processed block, matching the
/// training-time semantics. Frozen running averages proved unreliable at
/// this scale: per-view activation statistics vary enough that a single
/// global average misnormalizes outlier views (see `refresh_norm_stats`,
/// which still repairs the stored averages for diagnostic use).
pub fn infer_full_view<R: BatchRunner>(
    view: &PointView,
    store: &ParamStore<f32>,
    model_cfg: &ModelConfig,
    block_size: usize,
    votes: usize,
    seed: u64,
    runner: &R,
) -> Result<Prediction, TrainError> {
    assert!(votes >= 1);
    let n = view.len();
    let mut accumulated = vec![0.0f64; n];
    for vote in 0..votes {
        let mut rng = Rng::derive(seed, STREAM_VOTE + vote as u64);
        let plan = plan_chunks(view, block_size, &mut rng);
        let block_preds: Vec<Result<Vec<f64>, TrainError>> =
            runner.run(plan.blocks.len(), |bi| {
                let block_idx = &plan.blocks[bi];
                let block = view.gather(block_idx);
                let encoded = encode_input(&block);
                let mut sess = Session::new(store, BnMode::Batch);
                let pass = forward(&mut sess, model_cfg, &block.positions, &encoded)?;
                Ok(pass.prediction.probabilities)
            });
        let mut sum = vec![0.0f64; n];
        let mut visits = vec![0u32; n];
        for (bi, result) in block_preds.into_iter().enumerate() {
            let probs = result?;
            for (&point, &p) in plan.blocks[bi].iter().zip(&probs) {
                sum[point as usize] += p;
                visits[point as usize] += 1;
            }
        }
        for i in 0..n {
            debug_assert!(visits[i] >= 1, "chunk plan must cover every point");
            accumulated[i] += sum[i] / visits[i] as f64;
        }
    }
    Ok(Prediction {
        probabilities: accumulated.into_iter().map(|p| p / votes as f64).collect(),
    })
}
