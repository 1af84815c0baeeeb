use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::{prepare, read_gray, read_rgb, PrepareConfig, Sample};

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

/// Image/mask pairs of one split, sorted by id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub split: String,
    pub entries: Vec<(String, PathBuf, PathBuf)>,
}

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(id, _, _)| id.as_str())
    }

    pub fn image_path(&self, i: usize) -> &Path {
        &self.entries[i].1
    }

    pub fn gt_path(&self, i: usize) -> &Path {
        &self.entries[i].2
    }

    pub fn load_raw(&self, i: usize) -> Result<(ndarray::Array3<f32>, ndarray::Array2<f32>)> {
        let (_, img, gt) = &self.entries[i];
        Ok((read_rgb(img)?, read_gray(gt)?))
    }

    pub fn load(&self, i: usize, config: &PrepareConfig) -> Result<Sample> {
        let (rgb, gt) = self.load_raw(i)?;
        prepare(&rgb, &gt, &self.entries[i].0, config)
    }

    /// Keeps the first `n` entries.
    pub fn truncate(&mut self, n: usize) {
        self.entries.truncate(n);
    }
}

fn stems(dir: &Path, extensions: &[&str]) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        let Some(ext) = ext else { continue };
        if !extensions.contains(&ext.as_str()) || !path.is_file() {
            continue;
        }
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            out.insert(stem.to_string(), path);
        }
    }
    Ok(out)
}

/// Pairs `<root>/<split>/image/*` with `<root>/<split>/GT/*.png` by stem.
pub fn load_dataset(root: &Path, split: &str) -> Result<DatasetManifest> {
    let base = root.join(split);
    let image_dir = base.join("image");
    let gt_dir = base.join("GT");
    let images = stems(&image_dir, &IMAGE_EXTENSIONS)?;
    let gts = stems(&gt_dir, &["png"])?;

    let orphans: Vec<String> = images
        .keys()
        .filter(|k| !gts.contains_key(*k))
        .map(|k| format!("image/{k}"))
        .chain(
            gts.keys()
                .filter(|k| !images.contains_key(*k))
                .map(|k| format!("GT/{k}")),
        )
        .collect();
    if !orphans.is_empty() {
        return Err(Error::Pairing {
            dir: base,
            stems: orphans,
        });
    }
    if images.is_empty() {
        return Err(Error::EmptyManifest(base));
    }
    let entries = images
        .into_iter()
        .map(|(id, img)| {
            let gt = gts[&id].clone();
            (id, img, gt)
        })
        .collect();
    Ok(DatasetManifest {
        root: root.to_path_buf(),
        split: split.to_string(),
        entries,
    })
}
