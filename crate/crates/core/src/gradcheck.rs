//! Finite-difference verification of the reverse-mode gradients.
//!
//! Each named block is instantiated at 64 bits on a small fixed problem
//! with normalization disabled, its inputs registered as parameters so the
//! input-gradient paths are covered too, and every parameter element is
//! compared against a central difference of a fixed linear scalarization.
//! The reported error is relative to the largest gradient component of the
//! block, which keeps near-zero components from drowning the check in
//! finite-difference noise.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::autodiff::{BnMode, ParamStore, Reduction, Session, TensorId};
use crate::model::{fab_forward, init_model, ppb_forward, spb_forward, LevelSet, ModelConfig, PpbConfig};
use crate::rng::Rng;
use crate::view::{encode_input, PointView};

pub const DEFAULT_TOLERANCE: f64 = 1e-5;
pub const DEFAULT_STEP: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    Encoder,
    Fab,
    PpbSemantics,
    PpbMultiscale,
    Spb,
    Loss,
}

impl Block {
    pub const ALL: [Block; 6] = [
        Block::Encoder,
        Block::Fab,
        Block::PpbSemantics,
        Block::PpbMultiscale,
        Block::Spb,
        Block::Loss,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Block::Encoder => "encoder",
            Block::Fab => "fab",
            Block::PpbSemantics => "ppb-semantics",
            Block::PpbMultiscale => "ppb-multiscale",
            Block::Spb => "spb",
            Block::Loss => "loss",
        }
    }

    /// Blocks selected by a CLI-style argument.
    pub fn select(arg: &str) -> Option<Vec<Block>> {
        match arg {
            "all" => Some(Block::ALL.to_vec()),
            "encoder" => Some(alloc::vec![Block::Encoder]),
            "fab" => Some(alloc::vec![Block::Fab]),
            "ppb" => Some(alloc::vec![Block::PpbSemantics, Block::PpbMultiscale]),
            "spb" => Some(alloc::vec![Block::Spb]),
            "loss" => Some(alloc::vec![Block::Loss]),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BlockReport {
    pub block: Block,
    pub elements_checked: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl BlockReport {
    pub fn pass(&self) -> bool {
        self.max_rel_error <= self.tolerance
    }
}

/// Test hook: corrupt one analytic gradient component so the comparison
/// must fail.
#[derive(Clone, Copy, Debug, Default)]
pub struct FaultInjection(pub bool);

fn tiny_model() -> ModelConfig {
    ModelConfig {
        k_enc: 4,
        level_dims: [4, 6, 8, 10],
        fc_channels: 10,
        k_semantics: [1, 2, 3, 4],
        k_multiscale: [1, 3, 5, 8],
        reduction: Reduction::MeanMax,
        // gradient checking runs without normalization layers
        norm: false,
        bn_momentum: 0.9,
    }
}

fn random_positions(rng: &mut Rng, n: usize) -> Vec<[f64; 3]> {
    (0..n)
        .map(|_| {
            [
                rng.range_f64(-1.0, 1.0),
                rng.range_f64(-1.0, 1.0),
                rng.range_f64(-1.0, 1.0),
            ]
        })
        .collect()
}

fn random_values(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.range_f64(-1.0, 1.0)).collect()
}

/// Problem instance of one block: a parameter store (inputs included as
/// learnable entries) and a scalar loss over it.
struct Instance {
    store: ParamStore<f64>,
    scalarizer: Vec<f64>,
    kind: Block,
    positions: Vec<Vec<[f64; 3]>>,
    labels: Vec<u8>,
}

impl Instance {
    fn build(block: Block, seed: u64) -> Instance {
        let cfg = tiny_model();
        let mut rng = Rng::new(seed ^ (0x9c0de + block as u64));
        let mut store: ParamStore<f64> = ParamStore::new();
        let mut positions = Vec::new();
        let mut labels = Vec::new();
        let out_len;

        match block {
            Block::Encoder => {
                init_model(&mut store, &cfg, &mut rng).unwrap();
                let n = 256;
                let pos = random_positions(&mut rng, n);
                let view = PointView {
                    positions: pos.clone(),
                    colors: (0..n)
                        .map(|_| [rng.next_f64(), rng.next_f64(), rng.next_f64()])
                        .collect(),
                    labels: None,
                    scene_id: String::new(),
                    view_id: String::new(),
                };
                let enc = encode_input(&view);
                store.add("in.enc", &[n, 9], enc.features, true);
                positions.push(pos);
                out_len = (n / 256) * cfg.level_dims[3];
            }
            Block::Fab => {
                init_model(&mut store, &cfg, &mut rng).unwrap();
                let sizes = [32usize, 16, 8, 4];
                for (l, &m) in sizes.iter().enumerate() {
                    positions.push(random_positions(&mut rng, m));
                    let c = cfg.level_dims[l];
                    store.add(
                        &format!("in.f{}", l + 1),
                        &[m, c],
                        random_values(&mut rng, m * c),
                        true,
                    );
                }
                out_len = sizes[0] * cfg.fc_channels;
            }
            Block::PpbSemantics | Block::PpbMultiscale => {
                let ppb = ppb_instance_config(block);
                let m = 16;
                init_ppb_store(&mut store, &ppb, cfg.reduction, &mut rng);
                store.add(
                    "in.f",
                    &[m, ppb.channels],
                    random_values(&mut rng, m * ppb.channels),
                    true,
                );
                positions.push(random_positions(&mut rng, m));
                out_len = m * ppb.out_channels;
            }
            Block::Spb => {
                init_model(&mut store, &cfg, &mut rng).unwrap();
                let (m_sem, m_multi, n_fine) = (4usize, 16usize, 64usize);
                positions.push(random_positions(&mut rng, m_sem));
                positions.push(random_positions(&mut rng, m_multi));
                positions.push(random_positions(&mut rng, n_fine));
                store.add(
                    "in.fs",
                    &[m_sem, cfg.level_dims[3]],
                    random_values(&mut rng, m_sem * cfg.level_dims[3]),
                    true,
                );
                store.add(
                    "in.fm",
                    &[m_multi, cfg.fc_channels],
                    random_values(&mut rng, m_multi * cfg.fc_channels),
                    true,
                );
                out_len = n_fine * 2;
            }
            Block::Loss => {
                let m = 8;
                store.add("in.logits", &[m, 2], random_values(&mut rng, m * 2), true);
                labels = (0..m).map(|i| (i % 2) as u8).collect();
                out_len = 1;
            }
        }

        let scalarizer: Vec<f64> = (0..out_len).map(|_| rng.range_f64(0.5, 1.5)).collect();
        Instance {
            store,
            scalarizer,
            kind: block,
            positions,
            labels,
        }
    }

    /// Builds the block's graph over a store and returns the scalar loss.
    fn run<'s>(&self, store: &'s ParamStore<f64>) -> (TensorId, Session<'s, f64>) {
        let cfg = tiny_model();
        let mut sess: Session<'_, f64> = Session::new(store, BnMode::Batch);
        let out = match self.kind {
            Block::Encoder => {
                let input = sess.param("in.enc");
                let levels = encoder_levels_from_node(&mut sess, &cfg, &self.positions[0], input);
                levels.last().unwrap().features
            }
            Block::Fab => {
                let mut levels = Vec::new();
                for l in 0..4 {
                    let f = sess.param(&format!("in.f{}", l + 1));
                    levels.push(LevelSet {
                        positions: self.positions[l].clone(),
                        features: f,
                    });
                }
                fab_forward(&mut sess, &cfg, &levels).unwrap()
            }
            Block::PpbSemantics | Block::PpbMultiscale => {
                let ppb = ppb_instance_config(self.kind);
                let f = sess.param("in.f");
                ppb_forward(
                    &mut sess,
                    "ppb",
                    &ppb,
                    cfg.reduction,
                    false,
                    &self.positions[0],
                    f,
                )
                .unwrap()
            }
            Block::Spb => {
                let fs = sess.param("in.fs");
                let fm = sess.param("in.fm");
                let (logits, _) = spb_forward(
                    &mut sess,
                    &cfg,
                    fs,
                    &self.positions[0],
                    fm,
                    &self.positions[1],
                    &self.positions[2],
                )
                .unwrap();
                logits
            }
            Block::Loss => {
                let logits = sess.param("in.logits");
                let loss = sess.graph.cross_entropy(logits, &self.labels).unwrap();
                return (loss, sess);
            }
        };
        let loss = sess.graph.dot_const(out, &self.scalarizer).unwrap();
        (loss, sess)
    }

    fn loss_value(&self, store: &ParamStore<f64>) -> f64 {
        let (loss, sess) = self.run(store);
        sess.graph.data(loss)[0]
    }
}

fn ppb_instance_config(block: Block) -> PpbConfig {
    match block {
        Block::PpbSemantics => PpbConfig::for_channels(6, [1, 2, 3, 4]),
        _ => PpbConfig::for_channels(6, [1, 3, 5, 8]),
    }
}

/// Encoder levels built over an in-graph input node (instead of a constant)
/// so the input gradient path is exercised too. Mirrors the production
/// encoder exactly: FPS centers, KNN grouping, relative-position
/// augmentation, shared MLP, max reduction.
fn encoder_levels_from_node(
    sess: &mut Session<'_, f64>,
    cfg: &ModelConfig,
    positions: &[[f64; 3]],
    input: TensorId,
) -> Vec<LevelSet> {
    use crate::autodiff::MlpSpec;
    use crate::geometry::{farthest_point_sample, knn};
    let mut prev_feat = input;
    let mut prev_pos = positions.to_vec();
    let mut levels = Vec::with_capacity(4);
    for l in 1..=4 {
        let m = prev_pos.len() / 4;
        let sample = farthest_point_sample(&prev_pos, m).unwrap();
        let centers: Vec<[f64; 3]> = sample
            .selected_indices
            .iter()
            .map(|&i| prev_pos[i as usize])
            .collect();
        let k = cfg.k_enc.min(prev_pos.len());
        let groups = knn(&centers, &prev_pos, k).unwrap();
        let mut flat = Vec::with_capacity(m * k);
        let mut rel = Vec::with_capacity(m * k * 3);
        for (g, center) in groups.iter().zip(&centers) {
            for &j in &g.neighbor_indices {
                flat.push(j);
                let p = prev_pos[j as usize];
                rel.push(p[0] - center[0]);
                rel.push(p[1] - center[1]);
                rel.push(p[2] - center[2]);
            }
        }
        let gathered = sess.graph.gather_rows(prev_feat, &flat);
        let rel = sess.graph.constant(flat.len(), 3, rel);
        let grouped = sess.graph.concat_cols(&[gathered, rel]).unwrap();
        let in_c = sess.graph.cols(grouped);
        let mut spec = MlpSpec::new(in_c, &[cfg.level_dims[l - 1]]);
        if !cfg.norm {
            spec = spec.without_norm();
        }
        let embedded = sess.mlp(&format!("enc{l}"), &spec, grouped).unwrap();
        let pooled = sess.graph.group_max(embedded, k).unwrap();
        levels.push(LevelSet {
            positions: centers.clone(),
            features: pooled,
        });
        prev_pos = centers;
        prev_feat = pooled;
    }
    levels
}

/// Instance seed per block, chosen so that no rectifier preactivation or
/// pool argmax sits within reach of the finite-difference step.
fn instance_seed(block: Block) -> u64 {
    match block {
        Block::Spb => SPB_SEED,
        _ => 0,
    }
}

const SPB_SEED: u64 = 4;

/// Central-difference check of one block.
pub fn check_block(block: Block, tolerance: f64, step: f64, fault: FaultInjection) -> BlockReport {
    check_block_seeded(block, tolerance, step, fault, instance_seed(block))
}

/// Central-difference check of one block with an explicit instance seed.
pub fn check_block_seeded(
    block: Block,
    tolerance: f64,
    step: f64,
    fault: FaultInjection,
    seed: u64,
) -> BlockReport {
    let mut instance = Instance::build(block, seed);

    let (loss, mut sess) = instance.run(&instance.store);
    sess.graph.backward(loss).unwrap();
    let mut analytic = sess.parameter_grads();
    drop(sess);
    if fault.0 {
        for g in analytic.iter_mut().flatten() {
            if let Some(v) = g.first_mut() {
                *v += 1.0;
                break;
            }
        }
    }

    let grad_scale = analytic
        .iter()
        .flatten()
        .flat_map(|g| g.iter())
        .fold(0.0f64, |acc, &v| acc.max(v.abs()))
        .max(1e-12);

    let mut max_rel = 0.0f64;
    let mut checked = 0usize;
    for idx in 0..instance.store.len() {
        if !instance.store.entry(idx).learnable {
            continue;
        }
        let len = instance.store.entry(idx).data.len();
        for i in 0..len {
            let orig = instance.store.entry(idx).data[i];
            instance.store.entry_mut(idx).data[i] = orig + step;
            let plus = instance.loss_value(&instance.store);
            instance.store.entry_mut(idx).data[i] = orig - step;
            let minus = instance.loss_value(&instance.store);
            instance.store.entry_mut(idx).data[i] = orig;

            let fd = (plus - minus) / (2.0 * step);
            let a = analytic[idx].as_ref().map_or(0.0, |g| g[i]);
            let rel = (a - fd).abs() / grad_scale;
            if rel > max_rel {
                max_rel = rel;
            }
            checked += 1;
        }
    }

    BlockReport {
        block,
        elements_checked: checked,
        max_rel_error: max_rel,
        tolerance,
    }
}

/// Checks the given blocks at one tolerance.
pub fn check_blocks(
    blocks: &[Block],
    tolerance: f64,
    step: f64,
    fault: FaultInjection,
) -> Vec<BlockReport> {
    blocks
        .iter()
        .map(|&b| check_block(b, tolerance, step, fault))
        .collect()
}

fn init_ppb_store(store: &mut ParamStore<f64>, cfg: &PpbConfig, reduction: Reduction, rng: &mut Rng) {
    use crate::autodiff::{init_mlp, MlpSpec};
    let e = cfg.embed_width;
    let c = cfg.channels;
    let red_in = match reduction {
        Reduction::MeanMax => 2 * (e + c),
        _ => e + c,
    };
    for b in 1..=4 {
        init_mlp(
            store,
            &format!("ppb.b{b}.embed"),
            &MlpSpec::new(10, &[e, e]).without_norm(),
            rng,
        );
        if reduction == Reduction::Attentive {
            let bound = 1.0 / libm::sqrt((e + c) as f64);
            let w: Vec<f64> = (0..e + c).map(|_| rng.range_f64(-bound, bound)).collect();
            store.add(&format!("ppb.b{b}.attn.w"), &[e + c, 1], w, true);
            store.add(&format!("ppb.b{b}.attn.b"), &[1, 1], alloc::vec![0.0], true);
        }
        init_mlp(
            store,
            &format!("ppb.b{b}.red"),
            &MlpSpec::new(red_in, &[c]).without_norm(),
            rng,
        );
    }
    init_mlp(
        store,
        "ppb.fuse",
        &MlpSpec::new(4 * c, &[cfg.out_channels]).without_norm(),
        rng,
    );
    init_mlp(
        store,
        "ppb.skip",
        &MlpSpec::new(c, &[cfg.out_channels]).without_norm(),
        rng,
    );
}
