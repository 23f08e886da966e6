//! KITTI-style 3D detection evaluation: rotated IoU, AP|R40 and the height
//! distribution diagnostic.

mod ap;
mod iou;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ap::{
    accumulate, ap_r40, match_predictions, metric_iou, EvalResult, ImageMatches, MatchConfig,
    Metric, Outcome,
};
pub use iou::{
    bev_corners, bev_intersection, bev_iou, clip_convex, iou2d, iou3d, signed_area,
    vertical_overlap, Point2, AREA_EPS,
};

use crate::pseudolabel::{median_in_place, Box3D};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("no heights to summarize")]
    EmptyInput,
    #[error("bin width must be positive, got {0}")]
    InvalidBinWidth(f64),
}

/// KITTI difficulty levels with their standard gt admission thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Moderate,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Moderate, Difficulty::Hard];

    pub fn min_bbox_height(self) -> f64 {
        match self {
            Difficulty::Easy => 40.0,
            Difficulty::Moderate | Difficulty::Hard => 25.0,
        }
    }

    pub fn max_occlusion(self) -> i32 {
        match self {
            Difficulty::Easy => 0,
            Difficulty::Moderate => 1,
            Difficulty::Hard => 2,
        }
    }

    pub fn max_truncation(self) -> f64 {
        match self {
            Difficulty::Easy => 0.15,
            Difficulty::Moderate => 0.3,
            Difficulty::Hard => 0.5,
        }
    }

    /// Whether a ground truth with these attributes counts at this level.
    pub fn admits(self, bbox_height: f64, occluded: i32, truncated: f64) -> bool {
        bbox_height >= self.min_bbox_height()
            && occluded <= self.max_occlusion()
            && truncated <= self.max_truncation()
    }

    pub fn name(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Moderate => "moderate",
            Difficulty::Hard => "hard",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    /// Inclusive lower edge.
    pub lo: f64,
    /// Exclusive upper edge.
    pub hi: f64,
    pub count: usize,
}

impl HistogramBin {
    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightHistogram {
    pub bin_width: f64,
    /// Contiguous bins from the lowest to the highest occupied one.
    pub bins: Vec<HistogramBin>,
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    /// Population variance, m^2.
    pub variance: f64,
}

/// Histogram of box heights over half-open bins `[k w, (k + 1) w)`.
pub fn height_histogram(preds: &[Box3D], bin_width: f64) -> Result<HeightHistogram, EvalError> {
    let heights: Vec<f64> = preds.iter().map(|b| b.h).collect();
    histogram_of(&heights, bin_width)
}

pub fn histogram_of(values: &[f64], bin_width: f64) -> Result<HeightHistogram, EvalError> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(EvalError::InvalidBinWidth(bin_width));
    }
    if values.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|h| (h - mean) * (h - mean)).sum::<f64>() / n;
    let median = median_in_place(&mut values.to_vec());

    let index = |h: f64| (h / bin_width).floor() as i64;
    let lo = values.iter().map(|&h| index(h)).min().unwrap_or(0);
    let hi = values.iter().map(|&h| index(h)).max().unwrap_or(0);
    let mut bins: Vec<HistogramBin> = (lo..=hi)
        .map(|k| HistogramBin {
            lo: k as f64 * bin_width,
            hi: (k + 1) as f64 * bin_width,
            count: 0,
        })
        .collect();
    for &h in values {
        bins[(index(h) - lo) as usize].count += 1;
    }
    Ok(HeightHistogram {
        bin_width,
        bins,
        count: values.len(),
        mean,
        median,
        variance,
    })
}
