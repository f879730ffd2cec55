//! Dataset directory layout: `root/train/*.ply` and `root/test/*.ply`,
//! loaded in lexicographic filename order.

use std::fmt;
use std::path::{Path, PathBuf};

use pcsod_core::view::PointView;

use crate::error::CliError;
use crate::ply::{load_ply, save_ply, PlyFormat};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn dir_name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.dir_name())
    }
}

/// Loads every view of a split, sorted by filename. Train views must carry
/// labels.
pub fn load_dataset(root: &Path, split: Split) -> Result<Vec<PointView>, CliError> {
    let dir = root.join(split.dir_name());
    if !dir.is_dir() {
        return Err(CliError::data(format!(
            "missing split directory {}",
            dir.display()
        )));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "ply"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::data(format!(
            "split directory {} contains no .ply views",
            dir.display()
        )));
    }
    let mut views = Vec::with_capacity(files.len());
    for f in files {
        let view = load_ply(&f).map_err(|e| CliError::data(format!("{}: {e}", f.display())))?;
        view.validate()?;
        if split == Split::Train && !view.has_labels() {
            return Err(CliError::data(format!(
                "train views require labels ({} has none)",
                f.display()
            )));
        }
        views.push(view);
    }
    Ok(views)
}

/// Writes labeled views into `root/{train,test}` at the given split ratio
/// (binary PLY). The split point is `round(views · ratio)`.
pub fn write_dataset(
    views: &[PointView],
    root: &Path,
    split_ratio: f64,
) -> Result<(usize, usize), CliError> {
    if !(0.0..=1.0).contains(&split_ratio) {
        return Err(CliError::usage(format!(
            "split ratio {split_ratio} outside [0,1]"
        )));
    }
    let n_train = (views.len() as f64 * split_ratio).round() as usize;
    let n_test = views.len() - n_train;
    if n_train == 0 {
        return Err(CliError::usage("empty train split"));
    }
    if n_test == 0 {
        return Err(CliError::usage("empty test split"));
    }
    for split in [Split::Train, Split::Test] {
        std::fs::create_dir_all(root.join(split.dir_name()))?;
    }
    for (i, view) in views.iter().enumerate() {
        let split = if i < n_train { Split::Train } else { Split::Test };
        let path = root
            .join(split.dir_name())
            .join(format!("view_{i:04}.ply"));
        save_ply(view, &path, PlyFormat::BinaryLittleEndian, None)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    }
    Ok((n_train, n_test))
}
