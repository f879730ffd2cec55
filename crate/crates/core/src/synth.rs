//! Synthetic labeled scenes for desk-scale experiments.
//!
//! Each scene is a floor-and-wall background, a handful of unlabeled clutter
//! primitives in muted background colors, and exactly one color-distinct
//! salient primitive whose points carry label 1. Output is deterministic in
//! the recipe seed, and every coordinate is quantized to f32 so that views
//! survive a binary PLY round trip bit-exactly.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use crate::rng::Rng;
use crate::view::PointView;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObjectKind {
    Sphere,
    Box,
    Torus,
    /// Sphere stacked on a box.
    Composite,
}

impl ObjectKind {
    pub fn parse(s: &str) -> Option<ObjectKind> {
        match s {
            "sphere" => Some(ObjectKind::Sphere),
            "box" => Some(ObjectKind::Box),
            "torus" => Some(ObjectKind::Torus),
            "composite" => Some(ObjectKind::Composite),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ObjectKind::Sphere => "sphere",
            ObjectKind::Box => "box",
            ObjectKind::Torus => "torus",
            ObjectKind::Composite => "composite",
        }
    }
}

/// Deterministic description of one synthetic scene.
#[derive(Clone, Debug)]
pub struct SceneRecipe {
    pub rng_seed: u64,
    pub object_kind: ObjectKind,
    /// Target fraction of scene points on the salient object, in (0, 1).
    pub object_point_fraction: f64,
    pub clutter_count: usize,
    /// Multiplies all colors; 1.0 = fully lit.
    pub illumination_scale: f64,
    /// Total points in the generated view. Not part of the recipe file
    /// format; callers override it for large test views.
    pub total_points: usize,
}

impl Default for SceneRecipe {
    fn default() -> Self {
        SceneRecipe {
            rng_seed: 0,
            object_kind: ObjectKind::Sphere,
            object_point_fraction: 0.1,
            clutter_count: 3,
            illumination_scale: 1.0,
            total_points: 4096,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RecipeError {
    BadFraction(f64),
    BadIllumination(f64),
    NoPoints,
}

impl fmt::Display for RecipeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecipeError::BadFraction(v) => write!(f, "fraction {v} outside (0,1)"),
            RecipeError::BadIllumination(v) => write!(f, "illumination {v} outside (0,1]"),
            RecipeError::NoPoints => write!(f, "total_points must be ≥ 1"),
        }
    }
}

impl SceneRecipe {
    pub fn validate(&self) -> Result<(), RecipeError> {
        if !(self.object_point_fraction > 0.0 && self.object_point_fraction < 1.0) {
            return Err(RecipeError::BadFraction(self.object_point_fraction));
        }
        if !(self.illumination_scale > 0.0 && self.illumination_scale <= 1.0) {
            return Err(RecipeError::BadIllumination(self.illumination_scale));
        }
        if self.total_points == 0 {
            return Err(RecipeError::NoPoints);
        }
        Ok(())
    }
}

/// Axis-aligned bounding volume of the salient primitive, for containment
/// checks in tests.
#[derive(Clone, Copy, Debug)]
pub struct BoundingVolume {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl BoundingVolume {
    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] - 1e-9 && p[a] <= self.max[a] + 1e-9)
    }
}

/// Generates a labeled scene from a recipe. Same recipe, same bytes.
pub fn generate_scene(recipe: &SceneRecipe) -> PointView {
    generate_scene_with_bounds(recipe).0
}

pub fn generate_scene_with_bounds(recipe: &SceneRecipe) -> (PointView, BoundingVolume) {
    recipe
        .validate()
        .expect("invalid recipe passed to generate_scene");
    let mut rng = Rng::new(recipe.rng_seed);
    let total = recipe.total_points;

    // actual salient count jitters within ±10%, comfortably inside the
    // contracted ±20% band
    let jitter = 1.0 + rng.range_f64(-0.1, 0.1);
    let n_object = ((total as f64 * recipe.object_point_fraction * jitter) as usize)
        .clamp(1, total.saturating_sub(1).max(1));

    let n_rest = total - n_object;
    let n_clutter_each = if recipe.clutter_count > 0 {
        (n_rest / 8) / recipe.clutter_count
    } else {
        0
    };
    let n_clutter = n_clutter_each * recipe.clutter_count;
    let n_background = n_rest - n_clutter;

    let mut positions = Vec::with_capacity(total);
    let mut colors = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(total);

    // background: floor slab and a back wall in muted gray-brown tones
    let floor_share = (n_background * 3) / 4;
    let base_tone = rng.range_f64(0.35, 0.55);
    for i in 0..n_background {
        let (p, rough) = if i < floor_share {
            (
                [rng.range_f64(-3.0, 3.0), rng.range_f64(-3.0, 3.0), rng.range_f64(0.0, 0.02)],
                0.06,
            )
        } else {
            (
                [rng.range_f64(-3.0, 3.0), 3.0 + rng.range_f64(0.0, 0.02), rng.range_f64(0.0, 2.0)],
                0.04,
            )
        };
        positions.push(p);
        let tone = (base_tone + rng.range_f64(-rough, rough)).clamp(0.0, 1.0);
        colors.push([tone, tone * rng.range_f64(0.9, 1.0), tone * rng.range_f64(0.8, 0.95)]);
        labels.push(0u8);
    }

    // clutter: small primitives in background-like colors, never labeled
    for _ in 0..recipe.clutter_count {
        let kind = match rng.below(3) {
            0 => ObjectKind::Sphere,
            1 => ObjectKind::Box,
            _ => ObjectKind::Torus,
        };
        let center = [rng.range_f64(-2.5, 2.5), rng.range_f64(-2.5, 2.5), 0.0];
        let size = rng.range_f64(0.15, 0.35);
        let tone = rng.range_f64(0.2, 0.6);
        let color = [tone, tone * rng.range_f64(0.85, 1.0), tone * rng.range_f64(0.7, 1.0)];
        for _ in 0..n_clutter_each {
            positions.push(sample_primitive(kind, center, size, &mut rng));
            colors.push(jitter_color(color, 0.03, &mut rng));
            labels.push(0u8);
        }
    }

    // the salient object: saturated, hue-distinct color
    let center = [rng.range_f64(-1.8, 1.8), rng.range_f64(-1.8, 1.8), 0.0];
    let size = rng.range_f64(0.35, 0.6);
    let palette = [
        [0.9, 0.1, 0.1],
        [0.1, 0.8, 0.15],
        [0.1, 0.2, 0.9],
        [0.9, 0.8, 0.1],
        [0.85, 0.1, 0.85],
        [0.1, 0.85, 0.85],
    ];
    let object_color = palette[rng.below(palette.len())];
    let mut vol_min = [f64::INFINITY; 3];
    let mut vol_max = [f64::NEG_INFINITY; 3];
    for _ in 0..n_object {
        let p = sample_primitive(recipe.object_kind, center, size, &mut rng);
        for a in 0..3 {
            vol_min[a] = vol_min[a].min(p[a]);
            vol_max[a] = vol_max[a].max(p[a]);
        }
        positions.push(p);
        colors.push(jitter_color(object_color, 0.04, &mut rng));
        labels.push(1u8);
    }

    // illumination and f32 quantization
    for c in colors.iter_mut() {
        for v in c.iter_mut() {
            *v = ((*v * recipe.illumination_scale).clamp(0.0, 1.0) * 255.0 + 0.5) as u32 as f64
                / 255.0;
        }
    }
    for p in positions.iter_mut() {
        for v in p.iter_mut() {
            *v = *v as f32 as f64;
        }
    }
    for a in 0..3 {
        vol_min[a] = vol_min[a] as f32 as f64;
        vol_max[a] = vol_max[a] as f32 as f64;
    }

    let view = PointView {
        positions,
        colors,
        labels: Some(labels),
        scene_id: format!("synth-{}", recipe.rng_seed),
        view_id: format!("{}-{}", recipe.object_kind.name(), recipe.rng_seed),
    };
    (
        view,
        BoundingVolume {
            min: vol_min,
            max: vol_max,
        },
    )
}

fn sample_primitive(kind: ObjectKind, center: [f64; 3], size: f64, rng: &mut Rng) -> [f64; 3] {
    let local = match kind {
        ObjectKind::Sphere => sample_sphere_surface(size, rng),
        ObjectKind::Box => sample_box_surface(size, rng),
        ObjectKind::Torus => sample_torus_surface(size, size * 0.35, rng),
        ObjectKind::Composite => {
            if rng.below(2) == 0 {
                let mut p = sample_box_surface(size * 0.8, rng);
                p[2] -= size * 0.8;
                p
            } else {
                let mut p = sample_sphere_surface(size * 0.6, rng);
                p[2] += size * 0.6;
                p
            }
        }
    };
    // hover above the floor: a clear gap keeps object and background
    // neighborhoods disjoint, so labels stay unambiguous even at coarse
    // sampling resolutions
    let lift = 0.6 + match kind {
        ObjectKind::Sphere => size,
        ObjectKind::Box => size,
        ObjectKind::Torus => size * 0.35,
        ObjectKind::Composite => size * 1.6,
    };
    [
        center[0] + local[0],
        center[1] + local[1],
        center[2] + local[2] + lift,
    ]
}

fn sample_sphere_surface(r: f64, rng: &mut Rng) -> [f64; 3] {
    loop {
        let v = [rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian()];
        let norm = libm::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        if norm > 1e-9 {
            return [v[0] / norm * r, v[1] / norm * r, v[2] / norm * r];
        }
    }
}

fn sample_box_surface(half: f64, rng: &mut Rng) -> [f64; 3] {
    let face = rng.below(6);
    let u = rng.range_f64(-half, half);
    let v = rng.range_f64(-half, half);
    match face {
        0 => [half, u, v],
        1 => [-half, u, v],
        2 => [u, half, v],
        3 => [u, -half, v],
        4 => [u, v, half],
        _ => [u, v, -half],
    }
}

fn sample_torus_surface(major: f64, minor: f64, rng: &mut Rng) -> [f64; 3] {
    let theta = rng.range_f64(0.0, 2.0 * core::f64::consts::PI);
    let phi = rng.range_f64(0.0, 2.0 * core::f64::consts::PI);
    let ring = major + minor * libm::cos(phi);
    [
        ring * libm::cos(theta),
        ring * libm::sin(theta),
        minor * libm::sin(phi),
    ]
}

fn jitter_color(base: [f64; 3], sigma: f64, rng: &mut Rng) -> [f64; 3] {
    [
        (base[0] + rng.range_f64(-sigma, sigma)).clamp(0.0, 1.0),
        (base[1] + rng.range_f64(-sigma, sigma)).clamp(0.0, 1.0),
        (base[2] + rng.range_f64(-sigma, sigma)).clamp(0.0, 1.0),
    ]
}

/// Recipe for view `index` of a synthetic dataset derived from one master
/// seed: kinds cycle, placement and size vary with the per-view seed.
pub fn dataset_recipe(master_seed: u64, index: usize) -> SceneRecipe {
    let kinds = [
        ObjectKind::Sphere,
        ObjectKind::Box,
        ObjectKind::Torus,
        ObjectKind::Composite,
    ];
    let mut rng = Rng::derive(master_seed, index as u64);
    SceneRecipe {
        rng_seed: master_seed
            .wrapping_mul(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(index as u64),
        object_kind: kinds[index % kinds.len()],
        object_point_fraction: rng.range_f64(0.08, 0.16),
        clutter_count: 2 + rng.below(3),
        illumination_scale: rng.range_f64(0.7, 1.0),
        total_points: 4096,
    }
}
