//! Exact neighborhood and sampling kernels.
//!
//! These are the primitives behind encoder downsampling, neighbor grouping,
//! and decoder upsampling. All of them are brute-force and exact: k-nearest
//! neighbors by full distance scan, greedy max-min farthest point sampling,
//! and inverse-squared-distance interpolation over the three nearest coarse
//! points. Determinism rules: KNN ties resolve to the smaller reference
//! index; the FPS seed is the point farthest from the centroid with a
//! lexicographic coordinate tie-break, so sampling is a function of the
//! geometry rather than of point order.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Neighborhood of one query point: `k` reference indices sorted by distance.
#[derive(Clone, Debug)]
pub struct NeighborGroup {
    pub center_index: usize,
    pub neighbor_indices: Vec<u32>,
    /// Euclidean distances, non-decreasing, aligned with `neighbor_indices`.
    pub distances: Vec<f64>,
}

/// Result of farthest point sampling.
#[derive(Clone, Debug)]
pub struct SampleResult {
    /// Selected point indices in order of selection; all distinct.
    pub selected_indices: Vec<u32>,
    /// Max-min distance at each pick; non-increasing after the first entry
    /// (the first entry is the seed's distance from the centroid).
    pub farthest_distances: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GeometryError {
    /// Asked for more neighbors than there are reference points.
    KTooLarge { k: usize, available: usize },
    /// Asked for more samples than there are points.
    SampleTooLarge { m: usize, available: usize },
    /// A point set that must be nonempty was empty.
    EmptyInput,
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::KTooLarge { k, available } => {
                write!(f, "k = {k} exceeds reference size {available}")
            }
            GeometryError::SampleTooLarge { m, available } => {
                write!(f, "sample size {m} exceeds point count {available}")
            }
            GeometryError::EmptyInput => write!(f, "empty point set"),
        }
    }
}

pub fn euclidean_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    libm::sqrt(squared_distance(a, b))
}

#[inline]
pub fn squared_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Exact k-nearest neighbors of every query point among `reference`.
///
/// Ties in distance resolve to the smaller reference index. Results per
/// query are sorted by (distance, index) ascending.
pub fn knn(
    query: &[[f64; 3]],
    reference: &[[f64; 3]],
    k: usize,
) -> Result<Vec<NeighborGroup>, GeometryError> {
    if reference.is_empty() {
        return Err(GeometryError::EmptyInput);
    }
    if k == 0 || k > reference.len() {
        return Err(GeometryError::KTooLarge {
            k,
            available: reference.len(),
        });
    }
    let mut out = Vec::with_capacity(query.len());
    // (d², index) max-heap of the best k so far, represented as a sorted
    // insertion buffer; k is small (≤ 64) so linear insertion wins over a heap.
    let mut best: Vec<(f64, u32)> = Vec::with_capacity(k + 1);
    for (qi, q) in query.iter().enumerate() {
        best.clear();
        for (ri, r) in reference.iter().enumerate() {
            let d2 = squared_distance(*q, *r);
            if best.len() == k {
                let worst = best[k - 1];
                if d2 > worst.0 || (d2 == worst.0 && ri as u32 > worst.1) {
                    continue;
                }
            }
            let key = (d2, ri as u32);
            let pos = best.partition_point(|&(bd, bi)| bd < key.0 || (bd == key.0 && bi < key.1));
            best.insert(pos, key);
            if best.len() > k {
                best.pop();
            }
        }
        out.push(NeighborGroup {
            center_index: qi,
            neighbor_indices: best.iter().map(|&(_, i)| i).collect(),
            distances: best.iter().map(|&(d2, _)| libm::sqrt(d2)).collect(),
        });
    }
    Ok(out)
}

/// Greedy max-min farthest point sampling of `m` points.
///
/// The seed is the point farthest from the centroid (ties: lexicographically
/// smallest coordinates, then smallest index); later picks maximize the
/// distance to the already-selected set, ties to the smaller index.
pub fn farthest_point_sample(points: &[[f64; 3]], m: usize) -> Result<SampleResult, GeometryError> {
    let n = points.len();
    if n == 0 {
        return Err(GeometryError::EmptyInput);
    }
    if m == 0 || m > n {
        return Err(GeometryError::SampleTooLarge { m, available: n });
    }

    let mut centroid = [0.0f64; 3];
    for p in points {
        centroid[0] += p[0];
        centroid[1] += p[1];
        centroid[2] += p[2];
    }
    centroid[0] /= n as f64;
    centroid[1] /= n as f64;
    centroid[2] /= n as f64;

    let mut seed = 0usize;
    let mut seed_d2 = f64::NEG_INFINITY;
    for (i, p) in points.iter().enumerate() {
        let d2 = squared_distance(*p, centroid);
        let better = d2 > seed_d2 || (d2 == seed_d2 && lex_less(*p, points[seed]));
        if better {
            seed = i;
            seed_d2 = d2;
        }
    }

    let mut selected = Vec::with_capacity(m);
    let mut farthest = Vec::with_capacity(m);
    selected.push(seed as u32);
    farthest.push(libm::sqrt(seed_d2));

    // min squared distance of every point to the selected set
    let mut min_d2: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(*p, points[seed]))
        .collect();

    for _ in 1..m {
        let mut pick = 0usize;
        let mut pick_d2 = f64::NEG_INFINITY;
        for (i, &d2) in min_d2.iter().enumerate() {
            if d2 > pick_d2 {
                pick = i;
                pick_d2 = d2;
            }
        }
        selected.push(pick as u32);
        farthest.push(libm::sqrt(pick_d2));
        for (i, d2) in min_d2.iter_mut().enumerate() {
            let nd2 = squared_distance(points[i], points[pick]);
            if nd2 < *d2 {
                *d2 = nd2;
            }
        }
    }

    Ok(SampleResult {
        selected_indices: selected,
        farthest_distances: farthest,
    })
}

fn lex_less(a: [f64; 3], b: [f64; 3]) -> bool {
    for axis in 0..3 {
        if a[axis] < b[axis] {
            return true;
        }
        if a[axis] > b[axis] {
            return false;
        }
    }
    false
}

/// Interpolation stencil for one fine point: up to 3 (coarse index, weight)
/// pairs with weights summing to 1.
pub type InterpStencil = Vec<(u32, f64)>;

/// Distance below which a fine point is treated as coinciding with a coarse
/// point and copies its feature exactly.
pub const COINCIDENT_EPS: f64 = 1e-10;

/// Inverse-squared-distance weights over the 3 nearest coarse points
/// (fewer when fewer exist). A coincident coarse point takes all the weight.
pub fn interpolation_weights(
    coarse_pos: &[[f64; 3]],
    fine_pos: &[[f64; 3]],
) -> Result<Vec<InterpStencil>, GeometryError> {
    if coarse_pos.is_empty() {
        return Err(GeometryError::EmptyInput);
    }
    let k = coarse_pos.len().min(3);
    let groups = knn(fine_pos, coarse_pos, k)?;
    let mut out = Vec::with_capacity(fine_pos.len());
    for g in &groups {
        if g.distances[0] < COINCIDENT_EPS {
            out.push(vec![(g.neighbor_indices[0], 1.0)]);
            continue;
        }
        let inv: Vec<f64> = g.distances.iter().map(|&d| 1.0 / (d * d)).collect();
        let total: f64 = inv.iter().sum();
        out.push(
            g.neighbor_indices
                .iter()
                .zip(&inv)
                .map(|(&i, &w)| (i, w / total))
                .collect(),
        );
    }
    Ok(out)
}

/// Interpolates per-point features from a coarse set onto fine positions.
pub fn interpolate_features(
    coarse_pos: &[[f64; 3]],
    coarse_feat: &[f64],
    channels: usize,
    fine_pos: &[[f64; 3]],
) -> Result<Vec<f64>, GeometryError> {
    debug_assert_eq!(coarse_feat.len(), coarse_pos.len() * channels);
    let stencils = interpolation_weights(coarse_pos, fine_pos)?;
    let mut out = vec![0.0f64; fine_pos.len() * channels];
    for (fi, stencil) in stencils.iter().enumerate() {
        let row = &mut out[fi * channels..(fi + 1) * channels];
        for &(ci, w) in stencil {
            let src = &coarse_feat[ci as usize * channels..(ci as usize + 1) * channels];
            for (o, &s) in row.iter_mut().zip(src) {
                *o += w * s;
            }
        }
    }
    Ok(out)
}
