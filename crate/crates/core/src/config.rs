//! Run configuration, stored as TOML.
//!
//! Every key is optional and falls back to its default; unknown keys are
//! rejected. A complete file with the defaults:
//!
//! ```toml
//! score_threshold = 0.1
//! outlier_k = 2.0
//! outlier_std = "population"
//! camera = "P2"
//! depth_window = 5
//! fallback_grid = 5
//!
//! [virtual_camera]
//! focal = 900.0
//! width = 1274
//! height = 644
//!
//! [dimensions]
//! alpha = 0.5
//! beta = 2.0
//! fallback = { w_base = 1.0, l_base = 1.0, h_default = 1.0 }
//!
//! [dimensions.priors]
//! Car = { w_base = 1.63, l_base = 3.88, h_default = 1.53 }
//! Pedestrian = { w_base = 0.66, l_base = 0.84, h_default = 1.76 }
//! Cyclist = { w_base = 0.60, l_base = 1.76, h_default = 1.74 }
//!
//! [losses]
//! lambda_dice = 0.7
//! lambda_bce = 0.3
//! dice_eps = 1e-6
//! kl_eps = 0.1
//! smooth_delta = 1.0
//! consistency_beta = 50.0
//! l2_lambda = 1e-4
//! bin_count = 80
//! depth_min = 2.0
//! depth_max = 46.8
//!
//! [augment]
//! focal_min = 900.0
//! focal_max = 900.0
//! max_yaw_deg = 3.0
//! max_pitch_deg = 3.0
//! max_roll_deg = 3.0
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{AugmentConfig, VirtualCameraSpec};
use crate::kernels::{ConsistencyParams, RegionWeights, StdKind};
use crate::pseudolabel::{DimensionPrior, PriorTable, PseudoLabelSettings};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorEntry {
    pub w_base: f64,
    pub l_base: f64,
    pub h_default: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DimensionConfig {
    pub alpha: f64,
    pub beta: f64,
    pub fallback: PriorEntry,
    pub priors: BTreeMap<String, PriorEntry>,
}

impl Default for DimensionConfig {
    fn default() -> Self {
        let table = PriorTable::default();
        let entry = |p: &DimensionPrior| PriorEntry {
            w_base: p.w_base,
            l_base: p.l_base,
            h_default: p.h_default,
        };
        Self {
            alpha: table.fallback.alpha,
            beta: table.fallback.beta,
            fallback: entry(&table.fallback),
            priors: table.classes.iter().map(|(k, v)| (k.clone(), entry(v))).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    pub lambda_dice: f64,
    pub lambda_bce: f64,
    pub dice_eps: f64,
    pub kl_eps: f64,
    pub smooth_delta: f64,
    pub consistency_beta: f64,
    pub l2_lambda: f64,
    pub bin_count: usize,
    pub depth_min: f64,
    pub depth_max: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        let region = RegionWeights::default();
        let consistency = ConsistencyParams::default();
        Self {
            lambda_dice: region.dice,
            lambda_bce: region.bce,
            dice_eps: 1e-6,
            kl_eps: crate::kernels::GaussianDepth::DEFAULT_EPS,
            smooth_delta: consistency.smooth_delta,
            consistency_beta: consistency.beta,
            l2_lambda: 1e-4,
            bin_count: 80,
            depth_min: 2.0,
            depth_max: 46.8,
        }
    }
}

/// Augmentation ranges with angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentSection {
    pub focal_min: f64,
    pub focal_max: f64,
    pub max_yaw_deg: f64,
    pub max_pitch_deg: f64,
    pub max_roll_deg: f64,
}

impl Default for AugmentSection {
    fn default() -> Self {
        let a = AugmentConfig::default();
        Self {
            focal_min: a.focal_min,
            focal_max: a.focal_max,
            max_yaw_deg: a.max_yaw.to_degrees(),
            max_pitch_deg: a.max_pitch.to_degrees(),
            max_roll_deg: a.max_roll.to_degrees(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub score_threshold: f64,
    pub outlier_k: f64,
    pub outlier_std: StdKind,
    /// Projection matrix used from calibration files.
    pub camera: String,
    pub depth_window: u32,
    pub fallback_grid: u32,
    pub virtual_camera: VirtualCameraSpec,
    pub dimensions: DimensionConfig,
    pub losses: LossConfig,
    pub augment: AugmentSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let settings = PseudoLabelSettings::default();
        Self {
            score_threshold: settings.score_threshold,
            outlier_k: 2.0,
            outlier_std: StdKind::Population,
            camera: "P2".into(),
            depth_window: settings.depth_window,
            fallback_grid: settings.fallback_grid,
            virtual_camera: VirtualCameraSpec::default(),
            dimensions: DimensionConfig::default(),
            losses: LossConfig::default(),
            augment: AugmentSection::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn settings(&self) -> PseudoLabelSettings {
        PseudoLabelSettings {
            score_threshold: self.score_threshold,
            depth_window: self.depth_window,
            fallback_grid: self.fallback_grid,
        }
    }

    pub fn prior_table(&self) -> PriorTable {
        let d = &self.dimensions;
        let prior = |e: &PriorEntry| {
            DimensionPrior::new(e.w_base, e.l_base, e.h_default).with_clamp(d.alpha, d.beta)
        };
        PriorTable {
            classes: d.priors.iter().map(|(k, v)| (k.clone(), prior(v))).collect(),
            fallback: prior(&d.fallback),
        }
    }

    pub fn augment(&self) -> AugmentConfig {
        let a = &self.augment;
        AugmentConfig {
            focal_min: a.focal_min,
            focal_max: a.focal_max,
            max_yaw: a.max_yaw_deg.to_radians(),
            max_pitch: a.max_pitch_deg.to_radians(),
            max_roll: a.max_roll_deg.to_radians(),
        }
    }

    pub fn region_weights(&self) -> RegionWeights {
        RegionWeights {
            dice: self.losses.lambda_dice,
            bce: self.losses.lambda_bce,
        }
    }

    pub fn consistency(&self) -> ConsistencyParams {
        ConsistencyParams {
            beta: self.losses.consistency_beta,
            smooth_delta: self.losses.smooth_delta,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        self.settings()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.outlier_k >= 0.0 && self.outlier_k.is_finite()) {
            return invalid(format!("outlier_k must be >= 0, got {}", self.outlier_k));
        }
        if self.camera.is_empty() {
            return invalid("camera must name a projection matrix".into());
        }
        self.virtual_camera
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.prior_table()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.augment()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let l = &self.losses;
        for (name, v) in [
            ("lambda_dice", l.lambda_dice),
            ("lambda_bce", l.lambda_bce),
            ("l2_lambda", l.l2_lambda),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return invalid(format!("losses.{name} must be >= 0, got {v}"));
            }
        }
        for (name, v) in [
            ("dice_eps", l.dice_eps),
            ("kl_eps", l.kl_eps),
            ("smooth_delta", l.smooth_delta),
            ("consistency_beta", l.consistency_beta),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return invalid(format!("losses.{name} must be > 0, got {v}"));
            }
        }
        if l.bin_count == 0 || !(l.depth_min < l.depth_max) {
            return invalid(format!(
                "depth bins need bin_count >= 1 and depth_min < depth_max, got {} over [{}, {}]",
                l.bin_count, l.depth_min, l.depth_max
            ));
        }
        Ok(())
    }
}
