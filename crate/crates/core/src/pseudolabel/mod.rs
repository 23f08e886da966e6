//! Pseudo 3D labels from frozen 2D detections, a metric depth map and yaw
//! estimates.
//!
//! For every confident detection the bbox center (or a clear point in its
//! central quarter when the center sits inside another detection) is lifted
//! to 3D with the sampled depth and expressed in the virtual camera. Height
//! follows directly from the bbox height; width and length rescale the class
//! prior so its projected footprint matches the observed bbox width:
//!
//! ```text
//! h        = (bottom - top) * z / f_y
//! width_2d = f_x / z * (|w_base cos yaw| + |l_base sin yaw|)
//! scale    = |(right - left) / width_2d|
//! w, l     = w_base, l_base * clamp(scale, alpha, beta)
//! ```

mod types;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use types::{Box3D, DepthRaster, Detection2D, DimensionPrior, PriorTable, Yaw};

use crate::geometry::{
    backproject, make_virtual_intrinsics, to_virtual, CameraIntrinsics, GeometryError,
    VirtualCameraSpec,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PseudoLabelError {
    #[error("invalid detection: {0}")]
    InvalidDetection(String),
    #[error("invalid dimension prior: {0}")]
    InvalidPrior(String),
    #[error("invalid depth raster: {0}")]
    InvalidRaster(String),
    #[error("depth window must be odd and positive, got {0}")]
    InvalidWindow(u32),
    #[error("non-positive depth: {0}")]
    NonPositiveDepth(f64),
    #[error("point ({u}, {v}) outside the depth raster")]
    OutOfBounds { u: f64, v: f64 },
    #[error("no valid depth around ({u}, {v})")]
    NoValidDepth { u: f64, v: f64 },
    #[error("projected prior footprint has zero width")]
    DegenerateProjection,
    #[error("{detections} detections but {yaws} yaw estimates")]
    MisalignedInputs { detections: usize, yaws: usize },
    #[error("invalid setting: {0}")]
    InvalidSetting(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type Result<T> = std::result::Result<T, PseudoLabelError>;

/// Where a detection is lifted to 3D.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionPoint {
    pub u: f64,
    pub v: f64,
    /// Set when every candidate point fell inside another detection.
    pub conflict: bool,
}

/// Picks the image point to lift for `det`.
///
/// The bbox center is used unless it lies strictly inside one of `others`.
/// Then a `grid x grid` lattice spanning the central quarter (half width and
/// half height around the center, edges included) is scanned row by row, top
/// to bottom and left to right, and the first point inside no other box wins.
/// If none is clear the center is returned with `conflict` set.
pub fn select_projection_point(
    det: &Detection2D,
    others: &[Detection2D],
    grid: u32,
) -> ProjectionPoint {
    let (cu, cv) = det.center();
    let clear = |u: f64, v: f64| !others.iter().any(|o| o.strictly_contains(u, v));
    if clear(cu, cv) {
        return ProjectionPoint {
            u: cu,
            v: cv,
            conflict: false,
        };
    }
    let (half_w, half_h) = (0.25 * det.width(), 0.25 * det.height());
    let n = grid.max(1);
    let coord = |c: f64, half: f64, i: u32| {
        if n == 1 {
            c
        } else {
            c - half + 2.0 * half * i as f64 / (n - 1) as f64
        }
    };
    for row in 0..n {
        let v = coord(cv, half_h, row);
        for col in 0..n {
            let u = coord(cu, half_w, col);
            if clear(u, v) {
                return ProjectionPoint {
                    u,
                    v,
                    conflict: false,
                };
            }
        }
    }
    ProjectionPoint {
        u: cu,
        v: cv,
        conflict: true,
    }
}

/// Median of the valid depths in a `window x window` patch around
/// `(round(u), round(v))`, clipped to the raster.
pub fn sample_depth(raster: &DepthRaster, u: f64, v: f64, window: u32) -> Result<f64> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(PseudoLabelError::InvalidWindow(window));
    }
    let (x, y) = (u.round(), v.round());
    if !(x >= 0.0 && y >= 0.0 && x < raster.width() as f64 && y < raster.height() as f64) {
        return Err(PseudoLabelError::OutOfBounds { u, v });
    }
    let (x, y, r) = (x as i64, y as i64, (window / 2) as i64);
    let mut patch: Vec<f64> = Vec::with_capacity((window * window) as usize);
    for py in (y - r).max(0)..=(y + r).min(raster.height() as i64 - 1) {
        for px in (x - r).max(0)..=(x + r).min(raster.width() as i64 - 1) {
            if let Some(d) = raster.get(px as u32, py as u32) {
                patch.push(d as f64);
            }
        }
    }
    if patch.is_empty() {
        return Err(PseudoLabelError::NoValidDepth { u, v });
    }
    Ok(median_in_place(&mut patch))
}

pub(crate) fn median_in_place(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Metric box dimensions `[h, w, l]`.
pub fn estimate_dimensions(
    det: &Detection2D,
    z: f64,
    yaw: Yaw,
    intr: &CameraIntrinsics,
    prior: &DimensionPrior,
) -> Result<[f64; 3]> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(PseudoLabelError::NonPositiveDepth(z));
    }
    let h = det.height() * z / intr.fy;
    let (s, c) = yaw.radians().sin_cos();
    let width_2d = intr.fx / z * ((prior.w_base * c).abs() + (prior.l_base * s).abs());
    if width_2d == 0.0 || !width_2d.is_finite() {
        return Err(PseudoLabelError::DegenerateProjection);
    }
    let scale = (det.width() / width_2d).abs().clamp(prior.alpha, prior.beta);
    Ok([h, prior.w_base * scale, prior.l_base * scale])
}

/// Knobs of the labelling procedure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PseudoLabelSettings {
    pub score_threshold: f64,
    pub depth_window: u32,
    pub fallback_grid: u32,
}

impl Default for PseudoLabelSettings {
    fn default() -> Self {
        Self {
            score_threshold: 0.1,
            depth_window: 5,
            fallback_grid: 5,
        }
    }
}

impl PseudoLabelSettings {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.score_threshold) {
            return Err(PseudoLabelError::InvalidSetting(format!(
                "score_threshold {} outside [0, 1]",
                self.score_threshold
            )));
        }
        if self.depth_window == 0 || self.depth_window.is_multiple_of(2) {
            return Err(PseudoLabelError::InvalidWindow(self.depth_window));
        }
        if self.fallback_grid == 0 {
            return Err(PseudoLabelError::InvalidSetting(
                "fallback_grid must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// One emitted label with the bookkeeping that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabel {
    /// Box in the virtual camera frame.
    pub box3d: Box3D,
    /// The 2D box rescaled to virtual pixels.
    pub bbox_virtual: [f64; 4],
    /// Lifted point in original pixels.
    pub anchor: (f64, f64),
    /// Lifted point in virtual pixels.
    pub anchor_virtual: (f64, f64),
    pub conflict: bool,
    /// Index into the input detection list.
    pub detection_index: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub detections: usize,
    pub below_threshold: usize,
    pub dropped_no_depth: usize,
    pub conflicts: usize,
    pub emitted: usize,
}

impl std::ops::AddAssign for Diagnostics {
    fn add_assign(&mut self, o: Self) {
        self.detections += o.detections;
        self.below_threshold += o.below_threshold;
        self.dropped_no_depth += o.dropped_no_depth;
        self.conflicts += o.conflicts;
        self.emitted += o.emitted;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabelOutput {
    /// Sorted by descending score; ties keep input order.
    pub labels: Vec<PseudoLabel>,
    pub diagnostics: Diagnostics,
}

/// Runs the full labelling procedure for one image.
///
/// `depth` may have a different resolution than the image; lookups are
/// rescaled by the size ratio. Detections whose lifted point has no valid
/// depth are dropped and counted.
#[allow(clippy::too_many_arguments)]
pub fn generate_pseudo_labels(
    dets: &[Detection2D],
    depth: &DepthRaster,
    yaws: &[Yaw],
    intr: &CameraIntrinsics,
    spec: &VirtualCameraSpec,
    priors: &PriorTable,
    settings: &PseudoLabelSettings,
) -> Result<PseudoLabelOutput> {
    if dets.len() != yaws.len() {
        return Err(PseudoLabelError::MisalignedInputs {
            detections: dets.len(),
            yaws: yaws.len(),
        });
    }
    settings.validate()?;
    priors.validate()?;
    dets.iter().try_for_each(Detection2D::validate)?;
    let vi = make_virtual_intrinsics(intr, spec)?;
    let virtual_cam = vi.as_camera();

    let mut diagnostics = Diagnostics {
        detections: dets.len(),
        ..Default::default()
    };
    let kept: Vec<usize> = (0..dets.len())
        .filter(|&i| dets[i].score >= settings.score_threshold)
        .collect();
    diagnostics.below_threshold = dets.len() - kept.len();

    let to_raster_x = depth.width() as f64 / intr.width as f64;
    let to_raster_y = depth.height() as f64 / intr.height as f64;
    let mut labels = Vec::with_capacity(kept.len());
    for &i in &kept {
        let det = &dets[i];
        let others: Vec<Detection2D> = kept
            .iter()
            .filter(|&&j| j != i)
            .map(|&j| dets[j].clone())
            .collect();
        let point = select_projection_point(det, &others, settings.fallback_grid);
        let z = match sample_depth(
            depth,
            point.u * to_raster_x,
            point.v * to_raster_y,
            settings.depth_window,
        ) {
            Ok(z) => z,
            Err(PseudoLabelError::NoValidDepth { .. } | PseudoLabelError::OutOfBounds { .. }) => {
                diagnostics.dropped_no_depth += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let dims = estimate_dimensions(det, z, yaws[i], intr, priors.get(&det.class))?;
        let pv = to_virtual(point.u, point.v, z, intr, spec)?;
        let center = backproject(pv.u, pv.v, pv.depth, &virtual_cam)?;
        if point.conflict {
            diagnostics.conflicts += 1;
        }
        labels.push(PseudoLabel {
            box3d: Box3D::from_center(
                det.class.clone(),
                center,
                dims,
                yaws[i].radians(),
                det.score,
            ),
            bbox_virtual: [
                det.left * vi.sx,
                det.top * vi.sy,
                det.right * vi.sx,
                det.bottom * vi.sy,
            ],
            anchor: (point.u, point.v),
            anchor_virtual: (pv.u, pv.v),
            conflict: point.conflict,
            detection_index: i,
        });
    }
    labels.sort_by(|a, b| b.box3d.score.total_cmp(&a.box3d.score));
    diagnostics.emitted = labels.len();
    Ok(PseudoLabelOutput {
        labels,
        diagnostics,
    })
}
