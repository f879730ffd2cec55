//! Acceptance suite: one test per criterion, each printing a PASS line
//! with the measured numbers (run with `--nocapture` to see them).
//!
//! The heavy training criteria size their runs for a small CPU box; every
//! threshold they assert is fixed here, not tuned at runtime.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use pcsod_cli::dataset::{load_dataset, write_dataset, Split};
use pcsod_cli::ply::{load_ply, save_ply, PlyFormat};
use pcsod_cli::runner::ThreadedRunner;
use pcsod_core::autodiff::{BnMode, ParamStore, Reduction, Session};
use pcsod_core::geometry::{farthest_point_sample, interpolation_weights, knn, squared_distance};
use pcsod_core::metrics::{
    aggregate, e_measure_at, evaluate, f_measure_at, iou, mae, MetricsConfig,
};
use pcsod_core::model::{forward, init_model, ModelConfig};
use pcsod_core::synth::{dataset_recipe, generate_scene, SceneRecipe};
use pcsod_core::train::{infer_full_view, Trainer, TrainConfig};
use pcsod_core::view::{encode_input, plan_chunks, PointView};
use pcsod_core::Rng;

fn pass(criterion: &str, details: String) {
    println!("[PASS] {criterion}: {details}");
}

/// Desk-scale model: full default widths, semantic branches shrunk to fit
/// a 1024-point block (the default {1,4,9,16} needs 4096-point blocks).
fn desk_model() -> ModelConfig {
    ModelConfig {
        k_semantics: [1, 2, 3, 4],
        ..ModelConfig::default()
    }
}

fn desk_train(epochs: usize, batch: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: batch,
        block_size: 1024,
        seed,
        ..TrainConfig::default()
    }
}

fn synth_views(count: usize, master_seed: u64, points: usize) -> Vec<PointView> {
    (0..count)
        .map(|i| {
            let mut recipe = dataset_recipe(master_seed, i);
            recipe.total_points = points;
            generate_scene(&recipe)
        })
        .collect()
}

fn train_iou(
    views: &[PointView],
    trainer: &Trainer,
    runner: &ThreadedRunner,
    block: usize,
) -> (f64, f64) {
    let reports: Vec<_> = views
        .iter()
        .map(|v| {
            let pred = infer_full_view(v, &trainer.store, &trainer.model_cfg, block, 3, 99, runner)
                .expect("inference");
            evaluate(
                &pred.probabilities,
                v.labels.as_ref().unwrap(),
                &MetricsConfig::default(),
            )
            .expect("metrics")
        })
        .collect();
    let agg = aggregate(&reports).expect("aggregate");
    (agg.iou, agg.max_f)
}

// ---------------------------------------------------------------- 1 ----

#[test]
fn criterion_01_gradient_fidelity() {
    let started = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_pcsod"))
        .args(["gradcheck", "--block", "all"])
        .output()
        .expect("spawn gradcheck");
    let elapsed = started.elapsed();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        out.status.success(),
        "gradcheck exited {:?}:\n{stdout}",
        out.status.code()
    );
    for block in [
        "encoder",
        "fab",
        "ppb-semantics",
        "ppb-multiscale",
        "spb",
        "loss",
    ] {
        assert!(stdout.contains(block), "missing row for {block}:\n{stdout}");
    }
    assert!(!stdout.contains("FAIL"), "{stdout}");
    assert!(
        elapsed.as_secs() < 600,
        "gradcheck took {:.0}s, budget 600s",
        elapsed.as_secs_f64()
    );
    pass(
        "criterion 1 (gradient fidelity)",
        format!("all blocks ≤ 1e-5 rel error in {:.1}s", elapsed.as_secs_f64()),
    );
}

// ---------------------------------------------------------------- 2 ----

/// Brute-force confusion counts, the oracle all threshold metrics reduce to.
fn oracle_confusion(p: &[f64], g: &[u8], t: f64) -> (u64, u64, u64, u64) {
    let (mut tp, mut fp, mut fne, mut tn) = (0, 0, 0, 0);
    for i in 0..p.len() {
        let pred = p[i] >= t;
        let pos = g[i] == 1;
        if pred && pos {
            tp += 1;
        } else if pred {
            fp += 1;
        } else if pos {
            fne += 1;
        } else {
            tn += 1;
        }
    }
    (tp, fp, fne, tn)
}

#[test]
fn criterion_02_metric_oracle_equivalence() {
    let mut rng = Rng::new(0xace);
    let beta_sq = 0.3;
    for instance in 0..1000 {
        let n = 200 + rng.below(801);
        let p: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
        let g: Vec<u8> = (0..n).map(|_| (rng.next_f64() < 0.3) as u8).collect();
        let t = (rng.below(256) as f64) / 255.0;

        let (tp, fp, fne, tn) = oracle_confusion(&p, &g, t);
        assert_eq!(tp + fp + fne + tn, n as u64);

        // MAE against a scalar-arithmetic oracle
        let want_mae = p
            .iter()
            .zip(&g)
            .map(|(&pi, &gi)| (pi - gi as f64).abs())
            .sum::<f64>()
            / n as f64;
        assert!((mae(&p, &g).unwrap() - want_mae).abs() < 1e-9, "instance {instance}");

        // F from oracle counts
        let got_f = f_measure_at(&p, &g, t, beta_sq).unwrap();
        if tp + fne == 0 {
            assert!(got_f.is_none());
        } else {
            let prec = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
            let reca = tp as f64 / (tp + fne) as f64;
            let want = if prec == 0.0 && reca == 0.0 {
                0.0
            } else {
                (1.0 + beta_sq) * prec * reca / (beta_sq * prec + reca)
            };
            assert!((got_f.unwrap() - want).abs() < 1e-9, "instance {instance}");
        }

        // IoU from oracle counts (empty-union convention: 1)
        let want_iou = if tp + fp + fne == 0 {
            1.0
        } else {
            tp as f64 / (tp + fp + fne) as f64
        };
        assert!((iou(&p, &g, t).unwrap() - want_iou).abs() < 1e-9);

        // E against a direct pointwise-formula oracle
        let bin: Vec<f64> = p.iter().map(|&v| (v >= t) as u8 as f64).collect();
        let gv: Vec<f64> = g.iter().map(|&v| v as f64).collect();
        let mb = bin.iter().sum::<f64>() / n as f64;
        let mg = gv.iter().sum::<f64>() / n as f64;
        let want_e = if (mb == 0.0 || mb == 1.0) && (mg == 0.0 || mg == 1.0) {
            if mb == mg {
                1.0
            } else {
                0.0
            }
        } else {
            bin.iter()
                .zip(&gv)
                .map(|(&b, &gg)| {
                    let pb = b - mb;
                    let pg = gg - mg;
                    let xi = 2.0 * pb * pg / (pb * pb + pg * pg + 1e-12);
                    (1.0 + xi) * (1.0 + xi) / 4.0
                })
                .sum::<f64>()
                / n as f64
        };
        assert!(
            (e_measure_at(&p, &g, t, 1e-12).unwrap() - want_e).abs() < 1e-9,
            "instance {instance}"
        );
    }

    // the worked examples
    let mut p = vec![1.0; 5];
    p.extend(vec![0.0; 4]);
    let mut g = vec![1u8; 4];
    g.push(0);
    g.extend(vec![1u8; 4]);
    let f = f_measure_at(&p, &g, 0.5, beta_sq).unwrap().unwrap();
    assert!((f - 0.7027).abs() < 1e-4, "TP=4 FP=1 FN=4 worked value, got {f}");
    let m = mae(&[0.2, 0.9, 0.4], &[0, 1, 1]).unwrap();
    assert!((m - 0.3).abs() < 1e-12, "hand-sum MAE, got {m}");

    pass(
        "criterion 2 (metric oracle equivalence)",
        "1000 random instances + worked F≈0.7027 and MAE=0.3".into(),
    );
}

// ---------------------------------------------------------------- 3 ----

#[test]
fn criterion_03_shape_contract() {
    let cfg = ModelConfig::default();
    let mut store: ParamStore<f32> = ParamStore::new();
    init_model(&mut store, &cfg, &mut Rng::new(0)).unwrap();
    let view = generate_scene(&SceneRecipe {
        rng_seed: 33,
        total_points: 4096,
        ..SceneRecipe::default()
    });
    let encoded = encode_input(&view);
    let mut sess = Session::new(&store, BnMode::Batch);
    let out = forward(&mut sess, &cfg, &view.positions, &encoded).unwrap();
    assert_eq!(
        out.level_shapes,
        [(1024, 64), (256, 128), (64, 256), (16, 512)],
        "level sizes and channels"
    );
    assert_eq!(out.fs_shape.0, 16, "global semantics at 16 points");
    assert_eq!(out.prediction.len(), 4096);
    pass(
        "criterion 3 (shape contract)",
        format!(
            "levels {:?}, F_s at {} pts, prediction {}",
            out.level_shapes,
            out.fs_shape.0,
            out.prediction.len()
        ),
    );
}

// ---------------------------------------------------------------- 4 ----

#[test]
fn criterion_04_permutation_equivariance() {
    let cfg = desk_model();
    let mut store: ParamStore<f32> = ParamStore::new();
    init_model(&mut store, &cfg, &mut Rng::new(5)).unwrap();
    let mut rng = Rng::new(0xbeef);
    let mut worst = 0.0f64;
    for trial in 0..20 {
        let view = generate_scene(&SceneRecipe {
            rng_seed: 100 + trial,
            total_points: 1024,
            ..SceneRecipe::default()
        });
        let encoded = encode_input(&view);
        let mut sess = Session::new(&store, BnMode::Batch);
        let base = forward(&mut sess, &cfg, &view.positions, &encoded).unwrap();

        let perm = rng.permutation(view.len());
        let permuted = view.gather(&perm);
        let enc_p = encode_input(&permuted);
        let mut sess_p = Session::new(&store, BnMode::Batch);
        let out_p = forward(&mut sess_p, &cfg, &permuted.positions, &enc_p).unwrap();

        for (pi, &src) in perm.iter().enumerate() {
            let d = (base.prediction.probabilities[src as usize]
                - out_p.prediction.probabilities[pi])
                .abs();
            worst = worst.max(d);
        }
    }
    assert!(worst <= 1e-5, "max deviation {worst}");
    pass(
        "criterion 4 (permutation equivariance)",
        format!("20 views, max |forward(π(V)) − π(forward(V))| = {worst:.2e} ≤ 1e-5"),
    );
}

// ---------------------------------------------------------------- 5 ----

#[test]
fn criterion_05_overfit_sanity() {
    let started = Instant::now();
    let kinds = [
        pcsod_core::synth::ObjectKind::Sphere,
        pcsod_core::synth::ObjectKind::Box,
        pcsod_core::synth::ObjectKind::Torus,
        pcsod_core::synth::ObjectKind::Composite,
    ];
    let views: Vec<PointView> = (0..10)
        .map(|i| {
            generate_scene(&SceneRecipe {
                rng_seed: 0xf17 + i as u64,
                object_kind: kinds[i % kinds.len()],
                object_point_fraction: 0.18 + 0.01 * (i % 5) as f64,
                clutter_count: 2,
                illumination_scale: 0.9,
                total_points: 4096,
            })
        })
        .collect();
    let runner = ThreadedRunner::from_env();
    let mut trainer = Trainer::new(&views, desk_model(), desk_train(400, 2, 21)).unwrap();

    let mut reached = None;
    let mut last_iou = 0.0;
    while trainer.current_step() < trainer.total_steps().min(2000) {
        let probe_at = if trainer.current_step() < 200 { 200 } else { trainer.current_step() + 100 };
        while trainer.current_step() < probe_at.min(2000) {
            trainer.step(&runner).unwrap();
        }
        let (iou_now, _) = train_iou(&views, &trainer, &runner, 1024);
        last_iou = iou_now;
        if iou_now >= 0.95 {
            reached = Some(trainer.current_step());
            break;
        }
    }
    let elapsed = started.elapsed();
    assert!(
        reached.is_some(),
        "train IoU only reached {last_iou:.3} within 2000 steps"
    );
    assert!(
        elapsed.as_secs() < 1800,
        "took {:.0}s, budget 1800s",
        elapsed.as_secs_f64()
    );
    pass(
        "criterion 5 (overfit sanity)",
        format!(
            "train IoU {last_iou:.3} ≥ 0.95 at step {} in {:.0}s",
            reached.unwrap(),
            elapsed.as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------- 6 ----

#[test]
fn criterion_06_generalization_sanity() {
    let started = Instant::now();
    let all = synth_views(120, 0x9e4, 4096);
    let (train_views, test_views) = all.split_at(84);
    let runner = ThreadedRunner::from_env();
    let mut trainer =
        Trainer::new(train_views, desk_model(), desk_train(40, 4, 7)).unwrap();

    let mut test_iou = 0.0;
    let mut test_f = 0.0;
    while trainer.current_step() < trainer.total_steps() {
        for _ in 0..105 {
            if trainer.current_step() >= trainer.total_steps() {
                break;
            }
            trainer.step(&runner).unwrap();
        }
        let (iou_now, f_now) = train_iou(test_views, &trainer, &runner, 1024);
        test_iou = iou_now;
        test_f = f_now;
        if test_iou >= 0.72 && trainer.current_step() >= 315 {
            break;
        }
    }

    // all-positive constant baseline on the same test split
    let baseline_reports: Vec<_> = test_views
        .iter()
        .map(|v| {
            evaluate(
                &vec![1.0; v.len()],
                v.labels.as_ref().unwrap(),
                &MetricsConfig::default(),
            )
            .unwrap()
        })
        .collect();
    let baseline = aggregate(&baseline_reports).unwrap();

    let elapsed = started.elapsed();
    assert!(
        test_iou >= 0.6,
        "test IoU {test_iou:.3} < 0.6 after {} steps",
        trainer.current_step()
    );
    assert!(
        test_f >= baseline.max_f + 0.3,
        "test max-F {test_f:.3} does not beat all-positive baseline {:.3} by 0.3",
        baseline.max_f
    );
    assert!(
        elapsed.as_secs() < 7200,
        "took {:.0}s, budget 7200s",
        elapsed.as_secs_f64()
    );
    pass(
        "criterion 6 (generalization sanity)",
        format!(
            "test IoU {test_iou:.3} ≥ 0.6, max-F {test_f:.3} ≥ baseline {:.3} + 0.3, in {:.0}s",
            baseline.max_f,
            elapsed.as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------- 7 ----

#[test]
fn criterion_07_reduction_ablation_trend() {
    let started = Instant::now();
    let runner = ThreadedRunner::from_env();
    let modes = [Reduction::Mean, Reduction::Max, Reduction::MeanMax];
    let mut mean_f = [0.0f64; 3];

    for (mi, &mode) in modes.iter().enumerate() {
        for seed in 0..3u64 {
            let all = synth_views(24, 0xab1 + seed, 2048);
            let (train_views, test_views) = all.split_at(18);
            let model = ModelConfig {
                reduction: mode,
                ..desk_model()
            };
            let mut trainer =
                Trainer::new(train_views, model, desk_train(30, 3, 40 + seed)).unwrap();
            while trainer.current_step() < trainer.total_steps() {
                trainer.step(&runner).unwrap();
            }
            let (_, f) = train_iou(test_views, &trainer, &runner, 1024);
            mean_f[mi] += f / 3.0;
        }
    }

    let (f_mean, f_max, f_mean_max) = (mean_f[0], mean_f[1], mean_f[2]);
    assert!(
        f_mean_max >= f_mean,
        "mean-max F {f_mean_max:.4} below mean-only {f_mean:.4}"
    );
    assert!(
        f_mean_max >= f_max - 0.01,
        "mean-max F {f_mean_max:.4} below max-only {f_max:.4} − 0.01"
    );
    pass(
        "criterion 7 (reduction ablation trend)",
        format!(
            "mean-F over 3 seeds: mean {f_mean:.4}, max {f_max:.4}, mean-max {f_mean_max:.4} ({:.0}s)",
            started.elapsed().as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------- 8 ----

#[test]
fn criterion_08_voting_determinism_and_coverage() {
    // 240,000-point view → 59 chunks per vote
    let big = generate_scene(&SceneRecipe {
        rng_seed: 8,
        total_points: 240_000,
        ..SceneRecipe::default()
    });
    let plan = plan_chunks(&big, 4096, &mut Rng::new(1));
    assert_eq!(plan.blocks.len(), 59, "240,000 / 4,096 → 59 chunks");
    assert!(plan.blocks.iter().all(|b| b.len() == 4096));
    assert!(plan.coverage.iter().all(|&c| c >= 1), "full coverage");

    // constant model: zero the prediction head → logits (0,0) → p = 0.5
    let cfg = desk_model();
    let mut store: ParamStore<f32> = ParamStore::new();
    init_model(&mut store, &cfg, &mut Rng::new(3)).unwrap();
    for idx in 0..store.len() {
        if store.entry(idx).name.starts_with("spb.pred") {
            let e = store.entry_mut(idx);
            e.data.iter_mut().for_each(|v| *v = 0.0);
        }
    }
    let view = generate_scene(&SceneRecipe {
        rng_seed: 9,
        total_points: 4096,
        ..SceneRecipe::default()
    });
    let runner = ThreadedRunner::from_env();
    let one = infer_full_view(&view, &store, &cfg, 1024, 1, 4, &runner).unwrap();
    let three = infer_full_view(&view, &store, &cfg, 1024, 3, 4, &runner).unwrap();
    assert_eq!(one.len(), view.len());
    assert_eq!(
        one.probabilities, three.probabilities,
        "votes=1 and votes=3 must agree for a constant model"
    );
    assert!(one.probabilities.iter().all(|&p| p == 0.5));

    pass(
        "criterion 8 (voting determinism and coverage)",
        "59 chunks at 240k points, 100% coverage, constant-model votes identical".into(),
    );
}

// ---------------------------------------------------------------- 9 ----

#[test]
fn criterion_09_geometry_oracles() {
    let mut rng = Rng::new(0x9e0);

    // KNN equals the exhaustive-sort oracle up to N = 500
    for &n in &[10usize, 100, 250, 500] {
        let reference: Vec<[f64; 3]> = (0..n)
            .map(|_| [rng.next_f64(), rng.next_f64(), rng.next_f64()])
            .collect();
        let query: Vec<[f64; 3]> = (0..50)
            .map(|_| [rng.next_f64(), rng.next_f64(), rng.next_f64()])
            .collect();
        let k = 8.min(n);
        let got = knn(&query, &reference, k).unwrap();
        for (qi, g) in got.iter().enumerate() {
            let mut all: Vec<(f64, u32)> = reference
                .iter()
                .enumerate()
                .map(|(ri, r)| (squared_distance(query[qi], *r), ri as u32))
                .collect();
            all.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let want: Vec<u32> = all[..k].iter().map(|&(_, i)| i).collect();
            assert_eq!(g.neighbor_indices, want, "N={n} query {qi}");
        }
    }

    // FPS max-min sequence non-increasing on 100 random clouds
    for _ in 0..100 {
        let n = 20 + rng.below(200);
        let points: Vec<[f64; 3]> = (0..n)
            .map(|_| [rng.next_f64(), rng.next_f64(), rng.next_f64()])
            .collect();
        let m = 2 + rng.below(n / 2);
        let result = farthest_point_sample(&points, m).unwrap();
        for w in result.farthest_distances[1..].windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    // interpolation weights sum to 1
    let coarse: Vec<[f64; 3]> = (0..40)
        .map(|_| [rng.next_f64(), rng.next_f64(), rng.next_f64()])
        .collect();
    let fine: Vec<[f64; 3]> = (0..300)
        .map(|_| [rng.next_f64(), rng.next_f64(), rng.next_f64()])
        .collect();
    for stencil in interpolation_weights(&coarse, &fine).unwrap() {
        let total: f64 = stencil.iter().map(|&(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    pass(
        "criterion 9 (geometry oracles)",
        "KNN = brute force to N=500; FPS max-min non-increasing ×100; interp weights sum 1".into(),
    );
}

// --------------------------------------------------------------- 10 ----

#[test]
fn criterion_10_io_round_trips() {
    let dir = tempfile::tempdir().unwrap();

    // binary PLY round trip: bit-exact positions, colors, labels
    let view = generate_scene(&SceneRecipe {
        rng_seed: 77,
        total_points: 2048,
        ..SceneRecipe::default()
    });
    let ply_path = dir.path().join("view.ply");
    save_ply(&view, &ply_path, PlyFormat::BinaryLittleEndian, None).unwrap();
    let loaded = load_ply(&ply_path).unwrap();
    assert_eq!(loaded.positions, view.positions, "positions bit-exact");
    assert_eq!(loaded.colors, view.colors);
    assert_eq!(loaded.labels, view.labels);

    // checkpoint round trip reproduces the forward pass exactly at 32 bits
    let cfg = desk_model();
    let mut store: ParamStore<f32> = ParamStore::new();
    init_model(&mut store, &cfg, &mut Rng::new(13)).unwrap();
    let block = view.gather(&(0..1024).collect::<Vec<u32>>());
    let encoded = encode_input(&block);
    let mut sess = Session::new(&store, BnMode::Batch);
    let before = forward(&mut sess, &cfg, &block.positions, &encoded).unwrap();

    let bytes = pcsod_core::checkpoint::encode(&store);
    let restored = pcsod_core::checkpoint::decode(&bytes).unwrap();
    let mut sess2 = Session::new(&restored, BnMode::Batch);
    let after = forward(&mut sess2, &cfg, &block.positions, &encoded).unwrap();
    assert_eq!(
        before.prediction.probabilities, after.prediction.probabilities,
        "forward after reload must be bit-identical"
    );

    // dataset layout round trip through the CLI-facing writer
    let all = synth_views(4, 0x5a, 512);
    let data_dir = dir.path().join("ds");
    write_dataset(&all, &data_dir, 0.5).unwrap();
    let train = load_dataset(&data_dir, Split::Train).unwrap();
    assert_eq!(train.len(), 2);
    assert!(Path::new(&data_dir).join("test").is_dir());

    pass(
        "criterion 10 (I/O round trips)",
        "binary PLY bit-exact; checkpoint reload forward-identical".into(),
    );
}
