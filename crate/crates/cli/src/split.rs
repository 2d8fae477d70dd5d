//! Reading and writing label directories and split files.

use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use weak3d::kitti_io::{
    parse_calibration, parse_label_file, parse_point_cloud, write_label_file, Calibration,
    FrameLabelSet, PointCloud, Provenance, Strictness,
};

use crate::error::{usage, usage_err, CliResult};

pub fn require_dir(path: &Path) -> CliResult<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(usage_err!("missing directory {}", path.display()))
    }
}

fn read_input(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(usage)
}

fn read_text(path: &Path) -> CliResult<String> {
    String::from_utf8(read_input(path)?)
        .with_context(|| format!("{} is not UTF-8", path.display()))
        .map_err(usage)
}

/// Sorted stems of the files in `dir` with extension `ext`.
pub fn stems(dir: &Path, ext: &str) -> CliResult<Vec<String>> {
    require_dir(dir)?;
    let mut ids = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == ext) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                ids.push(stem.to_string());
            }
        }
    }
    ids.sort();
    Ok(ids)
}

pub fn read_labels(path: &Path, frame_id: &str, expects_3d: bool, provenance: Provenance) -> CliResult<FrameLabelSet> {
    let text = read_text(path)?;
    let set = parse_label_file(frame_id, &text, expects_3d)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(usage)?;
    Ok(set.with_provenance(provenance))
}

/// Every `.txt` label file of `dir`, sorted by frame id.
pub fn read_label_dir(dir: &Path, expects_3d: bool, provenance: Provenance) -> CliResult<Vec<FrameLabelSet>> {
    stems(dir, "txt")?
        .iter()
        .map(|id| read_labels(&dir.join(format!("{id}.txt")), id, expects_3d, provenance))
        .collect()
}

pub fn write_label_dir(dir: &Path, sets: &[FrameLabelSet], mode_3d: bool) -> CliResult<()> {
    std::fs::create_dir_all(dir)?;
    for s in sets {
        let text = write_label_file(s, mode_3d).with_context(|| format!("frame {}", s.frame_id))?;
        std::fs::write(dir.join(format!("{}.txt", s.frame_id)), text)?;
    }
    Ok(())
}

pub fn read_calib(path: &Path) -> CliResult<Calibration> {
    let text = read_text(path)?;
    parse_calibration(&text, Strictness::Strict)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(usage)
}

pub fn read_cloud(path: &Path) -> CliResult<PointCloud> {
    parse_point_cloud(&read_input(path)?)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(usage)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(usage)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value).context("serializing JSON")?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
