//! Property tests over the spec'd invariants.

use proptest::prelude::*;

use pcsod_core::autodiff::{Graph, Reduction};
use pcsod_core::geometry::{farthest_point_sample, knn, squared_distance};
use pcsod_core::view::{encode_input, plan_chunks, rotate_z, PointView};
use pcsod_core::Rng;

fn arb_points(max: usize) -> impl Strategy<Value = Vec<[f64; 3]>> {
    prop::collection::vec(
        (
            -100.0f64..100.0,
            -100.0f64..100.0,
            -100.0f64..100.0,
        )
            .prop_map(|(x, y, z)| [x, y, z]),
        1..max,
    )
}

fn view_of(positions: Vec<[f64; 3]>) -> PointView {
    let n = positions.len();
    PointView {
        positions,
        colors: vec![[0.5, 0.5, 0.5]; n],
        labels: None,
        scene_id: "p".into(),
        view_id: "p".into(),
    }
}

proptest! {
    #[test]
    fn rotation_is_a_z_isometry(positions in arb_points(40), angle in 0.0f64..std::f64::consts::TAU) {
        let view = view_of(positions);
        let rotated = rotate_z(&view, angle);
        for i in 0..view.len() {
            prop_assert_eq!(rotated.positions[i][2], view.positions[i][2]);
            for j in i + 1..view.len() {
                let a = squared_distance(view.positions[i], view.positions[j]).sqrt();
                let b = squared_distance(rotated.positions[i], rotated.positions[j]).sqrt();
                prop_assert!((a - b).abs() < 1e-9 * (1.0 + a));
            }
        }
    }

    #[test]
    fn encode_input_ranges(positions in arb_points(60)) {
        let enc = encode_input(&view_of(positions));
        for i in 0..enc.n {
            for a in 6..9 {
                let v = enc.features[i * 9 + a];
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
        for a in 0..3 {
            let mean: f64 = (0..enc.n).map(|i| enc.features[i * 9 + a]).sum::<f64>() / enc.n as f64;
            prop_assert!(mean.abs() < 1e-9 * 100.0);
        }
    }

    #[test]
    fn chunk_plans_cover_everything(n in 1usize..400, block in 1usize..64, seed in any::<u64>()) {
        let view = view_of((0..n).map(|i| [i as f64, 0.0, 0.0]).collect());
        let plan = plan_chunks(&view, block, &mut Rng::new(seed));
        prop_assert_eq!(plan.blocks.len(), n.div_ceil(block));
        prop_assert!(plan.blocks.iter().all(|b| b.len() == block));
        prop_assert!(plan.coverage.iter().all(|&c| c >= 1));
    }

    #[test]
    fn knn_matches_full_sort(points in arb_points(60), k in 1usize..8) {
        let k = k.min(points.len());
        let groups = knn(&points, &points, k).unwrap();
        for (qi, g) in groups.iter().enumerate() {
            let mut all: Vec<(f64, u32)> = points
                .iter()
                .enumerate()
                .map(|(ri, r)| (squared_distance(points[qi], *r), ri as u32))
                .collect();
            all.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let want: Vec<u32> = all[..k].iter().map(|&(_, i)| i).collect();
            prop_assert_eq!(&g.neighbor_indices, &want);
        }
    }

    #[test]
    fn fps_sequence_non_increasing(points in arb_points(80), frac in 0.1f64..1.0) {
        let m = ((points.len() as f64 * frac) as usize).max(1);
        let result = farthest_point_sample(&points, m).unwrap();
        for w in result.farthest_distances[1..].windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
        let mut sorted = result.selected_indices.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), m, "selected indices must be distinct");
    }

    #[test]
    fn softmax_rows_are_distributions(rows in 1usize..6, cols in 2usize..8, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let data: Vec<f64> = (0..rows * cols).map(|_| rng.range_f64(-30.0, 30.0)).collect();
        let mut g: Graph<f64> = Graph::new();
        let x = g.constant(rows, cols, data);
        let y = g.row_softmax(x);
        for row in g.data(y).chunks_exact(cols) {
            let total: f64 = row.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            prop_assert!(row.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn mean_max_reduction_matches_naive(groups in 1usize..5, k in 1usize..6, cols in 1usize..5, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let data: Vec<f64> = (0..groups * k * cols).map(|_| rng.range_f64(-5.0, 5.0)).collect();
        let mut g: Graph<f64> = Graph::new();
        let x = g.constant(groups * k, cols, data.clone());
        let y = g.reduce(x, k, Reduction::MeanMax, None).unwrap();
        let out = g.data(y);
        for gi in 0..groups {
            for c in 0..cols {
                let column: Vec<f64> = (0..k).map(|r| data[(gi * k + r) * cols + c]).collect();
                let naive_max = column.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let naive_mean = column.iter().sum::<f64>() / k as f64;
                prop_assert_eq!(out[gi * 2 * cols + c], naive_max);
                prop_assert!((out[gi * 2 * cols + cols + c] - naive_mean).abs() < 1e-12);
            }
        }
    }
}
