use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::PseudoLabelError;
use crate::geometry::{normalize_angle, CamPoint3};

/// An axis-aligned 2D detection in image pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection2D {
    pub class: String,
    pub left: f64,
    pub top: f64,
    pub right: f64,
    pub bottom: f64,
    pub score: f64,
}

impl Detection2D {
    pub fn new(
        class: impl Into<String>,
        [left, top, right, bottom]: [f64; 4],
        score: f64,
    ) -> Result<Self, PseudoLabelError> {
        let det = Self {
            class: class.into(),
            left,
            top,
            right,
            bottom,
            score,
        };
        det.validate()?;
        Ok(det)
    }

    pub fn validate(&self) -> Result<(), PseudoLabelError> {
        if !(self.left < self.right && self.top < self.bottom) {
            return Err(PseudoLabelError::InvalidDetection(format!(
                "bbox [{}, {}, {}, {}] needs left < right and top < bottom",
                self.left, self.top, self.right, self.bottom
            )));
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(PseudoLabelError::InvalidDetection(format!(
                "score {} outside [0, 1]",
                self.score
            )));
        }
        Ok(())
    }

    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.left + self.right),
            0.5 * (self.top + self.bottom),
        )
    }

    pub fn width(&self) -> f64 {
        self.right - self.left
    }

    pub fn height(&self) -> f64 {
        self.bottom - self.top
    }

    /// True when `(u, v)` lies strictly inside the box.
    pub fn strictly_contains(&self, u: f64, v: f64) -> bool {
        self.left < u && u < self.right && self.top < v && v < self.bottom
    }

    pub fn bbox(&self) -> [f64; 4] {
        [self.left, self.top, self.right, self.bottom]
    }
}

/// Heading about the camera's vertical axis, kept in (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
pub struct Yaw(f64);

impl Yaw {
    pub fn new(radians: f64) -> Self {
        Self(normalize_angle(radians))
    }

    pub fn radians(self) -> f64 {
        self.0
    }
}

impl From<f64> for Yaw {
    fn from(r: f64) -> Self {
        Self::new(r)
    }
}

impl From<Yaw> for f64 {
    fn from(y: Yaw) -> Self {
        y.0
    }
}

/// Metric depth map aligned with an image. Pixel `(x, y)` is centered on
/// integer coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthRaster {
    width: u32,
    height: u32,
    values: Vec<f32>,
    valid: Vec<bool>,
}

impl DepthRaster {
    /// Builds a raster whose validity comes from the sentinel rule: any
    /// non-finite or non-positive depth is invalid.
    pub fn from_values(width: u32, height: u32, values: Vec<f32>) -> Result<Self, PseudoLabelError> {
        let n = width as usize * height as usize;
        if values.len() != n || n == 0 {
            return Err(PseudoLabelError::InvalidRaster(format!(
                "{}x{} raster needs {} values, got {}",
                width,
                height,
                n,
                values.len()
            )));
        }
        let valid = values.iter().map(|d| d.is_finite() && *d > 0.0).collect();
        Ok(Self {
            width,
            height,
            values,
            valid,
        })
    }

    /// Like [`DepthRaster::from_values`], additionally masking pixels where
    /// `mask` is false.
    pub fn with_mask(
        width: u32,
        height: u32,
        values: Vec<f32>,
        mask: &[bool],
    ) -> Result<Self, PseudoLabelError> {
        let mut raster = Self::from_values(width, height, values)?;
        if mask.len() != raster.valid.len() {
            return Err(PseudoLabelError::InvalidRaster(format!(
                "mask has {} entries for {} pixels",
                mask.len(),
                raster.valid.len()
            )));
        }
        for (v, m) in raster.valid.iter_mut().zip(mask) {
            *v &= *m;
        }
        Ok(raster)
    }

    pub fn constant(width: u32, height: u32, depth: f32) -> Result<Self, PseudoLabelError> {
        Self::from_values(width, height, vec![depth; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, x: u32, y: u32) -> Option<f32> {
        if x >= self.width || y >= self.height {
            return None;
        }
        let i = y as usize * self.width as usize + x as usize;
        self.valid[i].then(|| self.values[i])
    }
}

/// Per-class base footprint used to turn a 2D width into metric w and l.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionPrior {
    pub w_base: f64,
    pub l_base: f64,
    pub h_default: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl DimensionPrior {
    pub fn new(w_base: f64, l_base: f64, h_default: f64) -> Self {
        Self {
            w_base,
            l_base,
            h_default,
            alpha: 0.5,
            beta: 2.0,
        }
    }

    pub fn with_clamp(self, alpha: f64, beta: f64) -> Self {
        Self {
            alpha,
            beta,
            ..self
        }
    }

    pub fn validate(&self) -> Result<(), PseudoLabelError> {
        if !(self.w_base > 0.0 && self.l_base > 0.0 && self.h_default > 0.0) {
            return Err(PseudoLabelError::InvalidPrior(format!(
                "base dimensions must be positive: w={} l={} h={}",
                self.w_base, self.l_base, self.h_default
            )));
        }
        if !(0.0 < self.alpha && self.alpha <= 1.0 && 1.0 <= self.beta && self.beta.is_finite()) {
            return Err(PseudoLabelError::InvalidPrior(format!(
                "clamp bounds need 0 < alpha <= 1 <= beta, got alpha={} beta={}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

/// Class name to prior lookup with a fallback for unlisted classes.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorTable {
    pub classes: BTreeMap<String, DimensionPrior>,
    pub fallback: DimensionPrior,
}

impl PriorTable {
    pub fn get(&self, class: &str) -> &DimensionPrior {
        self.classes.get(class).unwrap_or(&self.fallback)
    }

    pub fn validate(&self) -> Result<(), PseudoLabelError> {
        self.fallback.validate()?;
        self.classes.values().try_for_each(DimensionPrior::validate)
    }
}

impl Default for PriorTable {
    /// Mean KITTI dimensions for the three evaluated classes.
    fn default() -> Self {
        let classes = [
            ("Car", DimensionPrior::new(1.63, 3.88, 1.53)),
            ("Pedestrian", DimensionPrior::new(0.66, 0.84, 1.76)),
            ("Cyclist", DimensionPrior::new(0.60, 1.76, 1.74)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        Self {
            classes,
            fallback: DimensionPrior::new(1.0, 1.0, 1.0),
        }
    }
}

/// A yaw-oriented 3D box in camera coordinates.
///
/// `(x, y, z)` is the bottom-face center (KITTI label convention, y pointing
/// down), so the box spans `[y - h, y]` vertically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    pub class: String,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub h: f64,
    pub w: f64,
    pub l: f64,
    pub yaw: f64,
    pub score: f64,
}

impl Box3D {
    /// Builds a box from its geometric center.
    pub fn from_center(
        class: impl Into<String>,
        center: CamPoint3,
        [h, w, l]: [f64; 3],
        yaw: f64,
        score: f64,
    ) -> Self {
        Self {
            class: class.into(),
            x: center.x,
            y: center.y + 0.5 * h,
            z: center.z,
            h,
            w,
            l,
            yaw,
            score,
        }
    }

    pub fn center(&self) -> CamPoint3 {
        CamPoint3::new(self.x, self.y - 0.5 * self.h, self.z)
    }

    pub fn bottom_center(&self) -> CamPoint3 {
        CamPoint3::new(self.x, self.y, self.z)
    }

    pub fn volume(&self) -> f64 {
        self.h * self.w * self.l
    }

    pub fn is_valid(&self) -> bool {
        self.h > 0.0 && self.w > 0.0 && self.l > 0.0 && self.z > 0.0
    }
}
