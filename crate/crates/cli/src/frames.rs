//! Reading a directory of per-frame KITTI files.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use fuzzy_nms::kitti::{parse_frame, KittiFrame, ParseOptions};
use rayon::prelude::*;

use crate::Failure;

/// `(frame id, path)` for every `.txt` file in `dir`, sorted by id.
fn list(dir: &Path) -> Result<Vec<(String, PathBuf)>, Failure> {
    if !dir.is_dir() {
        return Err(Failure::new(Failure::MISSING_INPUT, anyhow!("input directory {} does not exist", dir.display())));
    }
    let entries = std::fs::read_dir(dir)
        .with_context(|| format!("cannot list {}", dir.display()))
        .map_err(|e| Failure::new(Failure::MISSING_INPUT, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.context("cannot list input directory")?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "txt") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.push((stem.to_string(), path.clone()));
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Parses every detection file in `input`, pairing it with `<labels>/<id>.txt`
/// when a label directory is given. Frames come back sorted by id.
pub fn load(input: &Path, labels: Option<&Path>, opts: &ParseOptions) -> Result<Vec<KittiFrame>, Failure> {
    let files = list(input)?;
    if let Some(dir) = labels {
        if !dir.is_dir() {
            return Err(Failure::new(Failure::MISSING_INPUT, anyhow!("label directory {} does not exist", dir.display())));
        }
    }
    files
        .par_iter()
        .map(|(id, path)| {
            let dets = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            let label_text = match labels {
                Some(dir) => {
                    let p = dir.join(format!("{id}.txt"));
                    if p.is_file() {
                        Some(std::fs::read_to_string(&p).with_context(|| format!("cannot read {}", p.display()))?)
                    } else {
                        log::warn!("no label file for frame {id}");
                        None
                    }
                }
                None => None,
            };
            let frame = parse_frame(id, label_text.as_deref(), &dets, opts)
                .with_context(|| format!("frame {id} ({})", path.display()))?;
            if frame.skipped_unknown > 0 {
                log::warn!("frame {id}: skipped {} records of unknown type", frame.skipped_unknown);
            }
            Ok(frame)
        })
        .collect::<anyhow::Result<Vec<_>>>()
        .map_err(Failure::from)
}
