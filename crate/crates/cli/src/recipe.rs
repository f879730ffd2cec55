//! Scene recipe files: key=value text with exactly the keys
//! {seed, object_kind, fraction, clutter, illumination}.

use std::path::Path;

use pcsod_core::synth::{ObjectKind, SceneRecipe};

use crate::error::CliError;

const KEYS: [&str; 5] = ["seed", "object_kind", "fraction", "clutter", "illumination"];

pub fn parse_recipe(text: &str) -> Result<SceneRecipe, CliError> {
    let mut recipe = SceneRecipe::default();
    let mut seen = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("recipe line {}: expected key=value", ln + 1)))?;
        let key = key.trim();
        let value = value.trim();
        if !KEYS.contains(&key) {
            return Err(CliError::usage(format!("unknown recipe key {key}")));
        }
        if seen.contains(&key) {
            return Err(CliError::usage(format!("duplicate recipe key {key}")));
        }
        seen.push(key);
        match key {
            "seed" => {
                recipe.rng_seed = value
                    .parse()
                    .map_err(|_| CliError::usage(format!("bad seed value {value}")))?
            }
            "object_kind" => {
                recipe.object_kind = ObjectKind::parse(value)
                    .ok_or_else(|| CliError::usage(format!("unknown object kind {value}")))?
            }
            "fraction" => {
                recipe.object_point_fraction = value
                    .parse()
                    .map_err(|_| CliError::usage(format!("bad fraction value {value}")))?
            }
            "clutter" => {
                recipe.clutter_count = value
                    .parse()
                    .map_err(|_| CliError::usage(format!("bad clutter value {value}")))?
            }
            "illumination" => {
                recipe.illumination_scale = value
                    .parse()
                    .map_err(|_| CliError::usage(format!("bad illumination value {value}")))?
            }
            _ => unreachable!(),
        }
    }
    for key in KEYS {
        if !seen.contains(&key) {
            return Err(CliError::usage(format!("missing recipe key {key}")));
        }
    }
    recipe
        .validate()
        .map_err(|e| CliError::usage(e.to_string()))?;
    Ok(recipe)
}

pub fn load_recipe(path: &Path) -> Result<SceneRecipe, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    parse_recipe(&text)
}

pub fn format_recipe(recipe: &SceneRecipe) -> String {
    format!(
        "seed={}\nobject_kind={}\nfraction={}\nclutter={}\nillumination={}\n",
        recipe.rng_seed,
        recipe.object_kind.name(),
        recipe.object_point_fraction,
        recipe.clutter_count,
        recipe.illumination_scale,
    )
}
