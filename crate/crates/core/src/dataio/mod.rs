//! Readers and writers for every file that crosses the toolkit boundary.
//!
//! Readers reject malformed input instead of repairing it, and every error
//! carries the offending path plus a line number (text formats) or byte
//! offset (binary formats).

mod calib;
mod depth;
mod detections;
mod labels;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use calib::{read_calib, CalibRecord};
pub use depth::{read_depth, write_depth, DEPTH_MAGIC};
pub use detections::{
    read_detections, write_detections, DetectionEntry, DetectionFile, ImageDetections,
    DETECTION_SCHEMA_VERSION,
};
pub use labels::{
    parse_label_line, read_labels, write_labels, write_labels_string, KittiLabelRecord,
};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: byte {offset}: {message}")]
    Binary {
        path: PathBuf,
        offset: u64,
        message: String,
    },
    #[error("{path}: invalid intrinsics: {message}")]
    InvalidIntrinsics { path: PathBuf, message: String },
}

impl DataError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn parse(path: &Path, line: usize, message: impl Into<String>) -> Self {
        DataError::Parse {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn binary(path: &Path, offset: u64, message: impl Into<String>) -> Self {
        DataError::Binary {
            path: path.to_path_buf(),
            offset,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, DataError>;

/// Fixed-point formatting that never prints a negative zero.
pub(crate) fn fixed(x: f64, decimals: usize) -> String {
    let s = format!("{x:.decimals$}");
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}
