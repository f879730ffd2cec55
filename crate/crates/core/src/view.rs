//! Domain types for 3D views and the input-side operations on them:
//! nine-channel input encoding, training-block sampling, test-time chunk
//! planning, and rotation augmentation.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::rng::Rng;

/// One 3D view: positions, colors, and (for labeled data) binary saliency.
#[derive(Clone, Debug, PartialEq)]
pub struct PointView {
    pub positions: Vec<[f64; 3]>,
    /// RGB in [0, 1], one triplet per point.
    pub colors: Vec<[f64; 3]>,
    /// 1 = salient, 0 = background; `None` for unlabeled views.
    pub labels: Option<Vec<u8>>,
    pub scene_id: String,
    pub view_id: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ViewError {
    Empty,
    LengthMismatch { field: &'static str, expected: usize, got: usize },
    NonFiniteCoordinate { index: usize },
    ColorOutOfRange { index: usize },
    BadLabel { index: usize, value: u8 },
}

impl fmt::Display for ViewError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViewError::Empty => write!(f, "view has no points"),
            ViewError::LengthMismatch { field, expected, got } => {
                write!(f, "{field} has {got} entries, expected {expected}")
            }
            ViewError::NonFiniteCoordinate { index } => {
                write!(f, "non-finite coordinate at point {index}")
            }
            ViewError::ColorOutOfRange { index } => {
                write!(f, "color outside [0,1] at point {index}")
            }
            ViewError::BadLabel { index, value } => {
                write!(f, "label {value} at point {index} is not 0 or 1")
            }
        }
    }
}

impl PointView {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn has_labels(&self) -> bool {
        self.labels.is_some()
    }

    /// Checks every domain invariant; loaders call this after parsing.
    pub fn validate(&self) -> Result<(), ViewError> {
        let n = self.positions.len();
        if n == 0 {
            return Err(ViewError::Empty);
        }
        if self.colors.len() != n {
            return Err(ViewError::LengthMismatch {
                field: "colors",
                expected: n,
                got: self.colors.len(),
            });
        }
        for (i, p) in self.positions.iter().enumerate() {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(ViewError::NonFiniteCoordinate { index: i });
            }
        }
        for (i, c) in self.colors.iter().enumerate() {
            if !c.iter().all(|v| (0.0..=1.0).contains(v)) {
                return Err(ViewError::ColorOutOfRange { index: i });
            }
        }
        if let Some(labels) = &self.labels {
            if labels.len() != n {
                return Err(ViewError::LengthMismatch {
                    field: "labels",
                    expected: n,
                    got: labels.len(),
                });
            }
            for (i, &l) in labels.iter().enumerate() {
                if l > 1 {
                    return Err(ViewError::BadLabel { index: i, value: l });
                }
            }
        }
        Ok(())
    }

    /// Sub-view at the given indices (duplicates allowed).
    pub fn gather(&self, indices: &[u32]) -> PointView {
        PointView {
            positions: indices.iter().map(|&i| self.positions[i as usize]).collect(),
            colors: indices.iter().map(|&i| self.colors[i as usize]).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i as usize]).collect()),
            scene_id: self.scene_id.clone(),
            view_id: self.view_id.clone(),
        }
    }
}

/// Nine-channel per-point input: centered xyz, RGB, normalized xyz.
#[derive(Clone, Debug)]
pub struct EncodedInput {
    /// Row-major N×9.
    pub features: Vec<f64>,
    pub n: usize,
}

pub const INPUT_CHANNELS: usize = 9;

/// Encodes a view into the nine-dimensional per-point input vectors:
/// channels 0-2 are xyz centered by the view centroid, 3-5 the RGB colors,
/// and 6-8 xyz mapped to [0,1] by the view's bounding box (a degenerate
/// axis maps to 0.5).
pub fn encode_input(view: &PointView) -> EncodedInput {
    let n = view.len();
    assert!(n >= 1, "encode_input requires a nonempty view");

    let mut centroid = [0.0f64; 3];
    let mut min = [f64::INFINITY; 3];
    let mut max = [f64::NEG_INFINITY; 3];
    for p in &view.positions {
        for a in 0..3 {
            centroid[a] += p[a];
            min[a] = min[a].min(p[a]);
            max[a] = max[a].max(p[a]);
        }
    }
    for c in centroid.iter_mut() {
        *c /= n as f64;
    }
    let extent = [max[0] - min[0], max[1] - min[1], max[2] - min[2]];

    let mut features = Vec::with_capacity(n * INPUT_CHANNELS);
    for (p, c) in view.positions.iter().zip(&view.colors) {
        for a in 0..3 {
            features.push(p[a] - centroid[a]);
        }
        features.extend_from_slice(c);
        for a in 0..3 {
            if extent[a] > 0.0 {
                features.push((p[a] - min[a]) / extent[a]);
            } else {
                features.push(0.5);
            }
        }
    }
    EncodedInput { features, n }
}

/// Draws exactly `n` point indices uniformly with replacement.
pub fn sample_training_block(view: &PointView, n: usize, rng: &mut Rng) -> Vec<u32> {
    assert!(!view.is_empty());
    let len = view.len();
    (0..n).map(|_| rng.below(len) as u32).collect()
}

/// Test-time cover of a view by fixed-size blocks.
#[derive(Clone, Debug)]
pub struct ChunkPlan {
    /// Index blocks, each exactly `block_size` long.
    pub blocks: Vec<Vec<u32>>,
    /// Visits per point over all blocks; every entry ≥ 1.
    pub coverage: Vec<u32>,
}

impl ChunkPlan {
    pub fn block_size(&self) -> usize {
        self.blocks.first().map_or(0, Vec::len)
    }
}

/// Splits a random permutation of the view into ⌈N/n⌉ blocks of size `n`.
/// The final short block is padded by re-drawing indices that are already
/// covered, so every point is visited at least once and predictions for
/// multiply-visited points can be averaged.
pub fn plan_chunks(view: &PointView, n: usize, rng: &mut Rng) -> ChunkPlan {
    assert!(!view.is_empty());
    assert!(n >= 1);
    let len = view.len();
    let perm = rng.permutation(len);
    let mut coverage = vec![0u32; len];
    let mut blocks = Vec::with_capacity(len.div_ceil(n));
    for (ci, chunk) in perm.chunks(n).enumerate() {
        let mut block: Vec<u32> = chunk.to_vec();
        while block.len() < n {
            // re-draw from the permutation's already-consumed prefix; when
            // the whole view fits in one short block, from the block itself
            let pool = if ci > 0 { ci * n } else { chunk.len() };
            block.push(perm[rng.below(pool)]);
        }
        for &i in &block {
            coverage[i as usize] += 1;
        }
        blocks.push(block);
    }
    ChunkPlan { blocks, coverage }
}

/// Rotates positions about the vertical (z) axis by a uniform random angle;
/// colors and labels are untouched.
pub fn augment_rotation(view: &PointView, rng: &mut Rng) -> PointView {
    let angle = rng.range_f64(0.0, 2.0 * core::f64::consts::PI);
    rotate_z(view, angle)
}

/// Rotation about the z axis by a fixed angle.
pub fn rotate_z(view: &PointView, angle: f64) -> PointView {
    let (sin, cos) = (libm::sin(angle), libm::cos(angle));
    let positions = view
        .positions
        .iter()
        .map(|p| [p[0] * cos - p[1] * sin, p[0] * sin + p[1] * cos, p[2]])
        .collect();
    PointView {
        positions,
        colors: view.colors.clone(),
        labels: view.labels.clone(),
        scene_id: view.scene_id.clone(),
        view_id: view.view_id.clone(),
    }
}
