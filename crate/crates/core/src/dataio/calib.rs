use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::{DataError, Result};
use crate::geometry::CameraIntrinsics;

/// Contents of a KITTI calibration file.
///
/// Besides the standard `P0..P3`, `R0_rect` and `Tr_*` entries, an optional
/// `image_size: W H` line supplies the image resolution, which the standard
/// format does not carry.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibRecord {
    pub path: PathBuf,
    /// Every `key: values` entry, projection matrices included.
    pub entries: BTreeMap<String, Vec<f64>>,
    pub image_size: Option<(u32, u32)>,
}

impl CalibRecord {
    /// The 3x4 projection matrix `name` (e.g. "P2"), row-major.
    pub fn projection(&self, name: &str) -> Option<[f64; 12]> {
        self.entries
            .get(name)
            .and_then(|v| <[f64; 12]>::try_from(v.as_slice()).ok())
    }

    /// Intrinsics of camera `name`, using the file's `image_size` or else
    /// `fallback_size`.
    pub fn intrinsics(&self, name: &str, fallback_size: Option<(u32, u32)>) -> Result<CameraIntrinsics> {
        let invalid = |message: String| DataError::InvalidIntrinsics {
            path: self.path.clone(),
            message,
        };
        let p = self
            .projection(name)
            .ok_or_else(|| invalid(format!("no 3x4 projection matrix {name}")))?;
        let (w, h) = self
            .image_size
            .or(fallback_size)
            .ok_or_else(|| invalid("image size unknown (add an `image_size: W H` line)".into()))?;
        CameraIntrinsics::new(p[0], p[5], p[2], p[6], w, h).map_err(|e| invalid(e.to_string()))
    }
}

pub fn read_calib(path: impl AsRef<Path>) -> Result<CalibRecord> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    let mut entries = BTreeMap::new();
    let mut image_size = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (key, rest) = line
            .split_once(':')
            .ok_or_else(|| DataError::parse(path, line_no, "expected `key: values`"))?;
        let key = key.trim();
        let values: Vec<f64> = rest
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| DataError::parse(path, line_no, format!("{key}: bad number {t:?}")))
            })
            .collect::<Result<_>>()?;
        if key == "image_size" {
            match values.as_slice() {
                [w, h] if *w >= 1.0 && *h >= 1.0 && w.fract() == 0.0 && h.fract() == 0.0 => {
                    image_size = Some((*w as u32, *h as u32))
                }
                _ => return Err(DataError::parse(path, line_no, "image_size needs two positive integers")),
            }
            continue;
        }
        if key.starts_with('P') && key[1..].chars().all(|c| c.is_ascii_digit()) && key.len() > 1 {
            if values.len() != 12 {
                return Err(DataError::parse(path, line_no, format!("{key} needs 12 values, found {}", values.len())));
            }
            if !(values[0] > 0.0 && values[5] > 0.0) {
                return Err(DataError::InvalidIntrinsics {
                    path: path.to_path_buf(),
                    message: format!("{key} has non-positive focal ({}, {})", values[0], values[5]),
                });
            }
        }
        if entries.insert(key.to_string(), values).is_some() {
            return Err(DataError::parse(path, line_no, format!("duplicate key {key}")));
        }
    }
    Ok(CalibRecord {
        path: path.to_path_buf(),
        entries,
        image_size,
    })
}
