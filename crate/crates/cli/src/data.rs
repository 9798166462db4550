//! On-disk dataset layout shared by the subcommands.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pssr_core::stereo_image::{load_pfm, load_ppm, save_pfm, save_ppm, StereoPair};

pub fn scene_stem(i: usize) -> String {
    format!("scene{i:03}")
}

pub fn version_stem(i: usize, j: usize) -> String {
    format!("ref{i:03}_v{j:03}")
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

pub fn require_dir(dir: &Path) -> Result<()> {
    if !dir.is_dir() {
        bail!("input directory {} does not exist", dir.display());
    }
    Ok(())
}

pub fn write_pair(dir: &Path, stem: &str, pair: &StereoPair) -> Result<()> {
    save_ppm(&pair.left, &dir.join(format!("{stem}_L.ppm")))?;
    save_ppm(&pair.right, &dir.join(format!("{stem}_R.ppm")))?;
    if let Some(d) = &pair.disparity_gt {
        save_pfm(d, &dir.join(format!("{stem}_disp.pfm")))?;
    }
    Ok(())
}

/// Load `<stem>_L.ppm`, `<stem>_R.ppm` and, when present, `<stem>_disp.pfm`.
pub fn read_pair(dir: &Path, stem: &str) -> Result<StereoPair> {
    let left = load_ppm(&dir.join(format!("{stem}_L.ppm")))?;
    let right = load_ppm(&dir.join(format!("{stem}_R.ppm")))?;
    let pair = StereoPair::new(left, right).with_context(|| format!("pair {stem} in {}", dir.display()))?;
    let disp = dir.join(format!("{stem}_disp.pfm"));
    if disp.is_file() {
        return Ok(pair.with_disparity(load_pfm(&disp)?)?);
    }
    Ok(pair)
}

fn file_names(dir: &Path) -> Result<Vec<String>> {
    require_dir(dir)?;
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("cannot list {}", dir.display()))? {
        let entry = entry?;
        if let Some(n) = entry.file_name().to_str() {
            names.push(n.to_string());
        }
    }
    names.sort();
    Ok(names)
}

/// Stems of every `<stem>_L.ppm` in `dir`, sorted.
pub fn pair_stems(dir: &Path) -> Result<Vec<String>> {
    let stems: Vec<String> = file_names(dir)?
        .into_iter()
        .filter_map(|n| n.strip_suffix("_L.ppm").map(str::to_string))
        .collect();
    if stems.is_empty() {
        bail!("no *_L.ppm images in {}", dir.display());
    }
    Ok(stems)
}

/// Scenes `scene000`, `scene001`, ... (indices must be contiguous from 0).
pub fn read_scenes(dir: &Path) -> Result<Vec<StereoPair>> {
    let stems = pair_stems(dir)?;
    let mut scenes = Vec::new();
    for (i, stem) in stems.iter().filter(|s| s.starts_with("scene")).enumerate() {
        if *stem != scene_stem(i) {
            bail!("scene files in {} are not numbered contiguously (expected {}, found {stem})", dir.display(), scene_stem(i));
        }
        scenes.push(read_pair(dir, stem)?);
    }
    if scenes.is_empty() {
        bail!("no scene*_L.ppm images in {}", dir.display());
    }
    Ok(scenes)
}

fn parse_version_stem(stem: &str) -> Option<(usize, usize)> {
    let rest = stem.strip_prefix("ref")?;
    let (i, j) = rest.split_once("_v")?;
    Some((i.parse().ok()?, j.parse().ok()?))
}

/// Versions `ref{i}_v{j}` as a full `refs × versions` grid.
pub fn read_versions(dir: &Path) -> Result<Vec<Vec<StereoPair>>> {
    let mut cells = BTreeMap::new();
    for stem in pair_stems(dir)? {
        if let Some(ij) = parse_version_stem(&stem) {
            cells.insert(ij, stem);
        }
    }
    if cells.is_empty() {
        bail!("no ref*_v*_L.ppm images in {}", dir.display());
    }
    let n_refs = cells.keys().map(|k| k.0).max().unwrap_or(0) + 1;
    let n_versions = cells.keys().map(|k| k.1).max().unwrap_or(0) + 1;
    let mut out = Vec::with_capacity(n_refs);
    for i in 0..n_refs {
        let mut row = Vec::with_capacity(n_versions);
        for j in 0..n_versions {
            let stem = cells
                .get(&(i, j))
                .with_context(|| format!("missing {} in {}", version_stem(i, j), dir.display()))?;
            row.push(read_pair(dir, stem)?);
        }
        out.push(row);
    }
    Ok(out)
}

/// Files (not directories) under `dir`, sorted, excluding the manifest.
pub fn output_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = Vec::new();
    for n in file_names(dir)? {
        let p = dir.join(&n);
        if p.is_file() && n != crate::manifest::MANIFEST_FILE {
            out.push(p);
        }
    }
    Ok(out)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("config {} is invalid", path.display()))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn create_file(path: &Path) -> Result<fs::File> {
    fs::File::create(path).with_context(|| format!("cannot write {}", path.display()))
}
