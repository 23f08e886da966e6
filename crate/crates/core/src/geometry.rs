//! Pinhole projection and the virtual-camera transforms.
//!
//! Every camera is mapped onto a canonical *virtual* camera with a fixed focal
//! length and resolution. Pixel coordinates scale with the image size and depth
//! scales with the focal ratio, so a network sees the same apparent geometry
//! regardless of the sensor the image came from:
//!
//! ```text
//! s_x = W_v / W        s_y = H_v / H
//! u_v = u * s_x        v_v = v * s_y        Z_v = (f_v / f_x) * Z
//! ```
//!
//! All angles are radians. Pixel coordinates are continuous.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("non-positive depth: {0}")]
    NonPositiveDepth(f64),
    #[error("invalid range: {0}")]
    InvalidRange(String),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

/// Pinhole parameters of a physical camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let intr = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fx.is_finite()) || !(self.fy > 0.0 && self.fy.is_finite()) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "image size must be positive, got {}x{}",
                self.width, self.height
            )));
        }
        if !(0.0..=self.width as f64).contains(&self.cx)
            || !(0.0..=self.height as f64).contains(&self.cy)
        {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "principal point ({}, {}) outside the {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }
}

/// The canonical camera every image is normalized onto.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VirtualCameraSpec {
    pub focal: f64,
    pub width: u32,
    pub height: u32,
}

impl VirtualCameraSpec {
    pub fn new(focal: f64, width: u32, height: u32) -> Result<Self> {
        let spec = Self {
            focal,
            width,
            height,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.focal > 0.0 && self.focal.is_finite()) || self.width == 0 || self.height == 0 {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "virtual camera needs positive focal and size, got f={} {}x{}",
                self.focal, self.width, self.height
            )));
        }
        Ok(())
    }

    /// Virtual camera reproducing `intr` exactly (unit scales, same focal).
    pub fn matching(intr: &CameraIntrinsics) -> Self {
        Self {
            focal: intr.fx,
            width: intr.width,
            height: intr.height,
        }
    }
}

impl Default for VirtualCameraSpec {
    fn default() -> Self {
        Self {
            focal: 900.0,
            width: 1274,
            height: 644,
        }
    }
}

/// Intrinsics of the virtual camera derived for one physical camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualIntrinsics {
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
    pub sx: f64,
    pub sy: f64,
    pub width: u32,
    pub height: u32,
}

impl VirtualIntrinsics {
    /// The virtual camera as an ordinary pinhole model.
    pub fn as_camera(&self) -> CameraIntrinsics {
        CameraIntrinsics {
            fx: self.focal,
            fy: self.focal,
            cx: self.cx,
            cy: self.cy,
            width: self.width,
            height: self.height,
        }
    }
}

/// A point in a camera frame (x right, y down, z forward), metres.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CamPoint3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl CamPoint3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

/// A pixel plus depth expressed in the virtual camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualPixel {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

fn check_depth(z: f64) -> Result<()> {
    if z > 0.0 && z.is_finite() {
        Ok(())
    } else {
        Err(GeometryError::NonPositiveDepth(z))
    }
}

pub fn make_virtual_intrinsics(
    intr: &CameraIntrinsics,
    spec: &VirtualCameraSpec,
) -> Result<VirtualIntrinsics> {
    intr.validate()?;
    spec.validate()?;
    let sx = spec.width as f64 / intr.width as f64;
    let sy = spec.height as f64 / intr.height as f64;
    Ok(VirtualIntrinsics {
        focal: spec.focal,
        cx: intr.cx * sx,
        cy: intr.cy * sy,
        sx,
        sy,
        width: spec.width,
        height: spec.height,
    })
}

/// Maps an image pixel with metric depth into the virtual camera.
pub fn to_virtual(
    u: f64,
    v: f64,
    depth: f64,
    intr: &CameraIntrinsics,
    spec: &VirtualCameraSpec,
) -> Result<VirtualPixel> {
    check_depth(depth)?;
    let vi = make_virtual_intrinsics(intr, spec)?;
    Ok(VirtualPixel {
        u: u * vi.sx,
        v: v * vi.sy,
        depth: spec.focal * depth / intr.fx,
    })
}

/// Recovers the physical camera-frame point from virtual pixel and depth.
pub fn from_virtual(
    u_v: f64,
    v_v: f64,
    depth_v: f64,
    intr: &CameraIntrinsics,
    spec: &VirtualCameraSpec,
) -> Result<CamPoint3> {
    check_depth(depth_v)?;
    let vi = make_virtual_intrinsics(intr, spec)?;
    let z = intr.fx * depth_v / spec.focal;
    Ok(CamPoint3 {
        x: (u_v / vi.sx - intr.cx) * z / intr.fx,
        y: (v_v / vi.sy - intr.cy) * z / intr.fy,
        z,
    })
}

pub fn project(p: &CamPoint3, intr: &CameraIntrinsics) -> Result<(f64, f64)> {
    check_depth(p.z)?;
    Ok((
        intr.fx * p.x / p.z + intr.cx,
        intr.fy * p.y / p.z + intr.cy,
    ))
}

pub fn backproject(u: f64, v: f64, depth: f64, intr: &CameraIntrinsics) -> Result<CamPoint3> {
    check_depth(depth)?;
    Ok(CamPoint3 {
        x: (u - intr.cx) * depth / intr.fx,
        y: (v - intr.cy) * depth / intr.fy,
        z: depth,
    })
}

/// Ranges for focal-length and viewpoint augmentation of the virtual camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentConfig {
    pub focal_min: f64,
    pub focal_max: f64,
    /// Half-widths of the uniform yaw/pitch/roll ranges, radians.
    pub max_yaw: f64,
    pub max_pitch: f64,
    pub max_roll: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        let three_deg = 3f64.to_radians();
        Self {
            focal_min: 900.0,
            focal_max: 900.0,
            max_yaw: three_deg,
            max_pitch: three_deg,
            max_roll: three_deg,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.focal_min > 0.0 && self.focal_min <= self.focal_max && self.focal_max.is_finite())
        {
            return Err(GeometryError::InvalidRange(format!(
                "focal range [{}, {}] must be positive and ordered",
                self.focal_min, self.focal_max
            )));
        }
        for (name, a) in [
            ("yaw", self.max_yaw),
            ("pitch", self.max_pitch),
            ("roll", self.max_roll),
        ] {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(GeometryError::InvalidRange(format!(
                    "max {name} must be a non-negative angle, got {a}"
                )));
            }
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Draws a virtual camera with focal length uniform in the configured range.
pub fn sample_virtual_camera(
    base: &VirtualCameraSpec,
    seed: u64,
    aug: &AugmentConfig,
) -> Result<VirtualCameraSpec> {
    base.validate()?;
    aug.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(VirtualCameraSpec {
        focal: uniform(&mut rng, aug.focal_min, aug.focal_max),
        ..*base
    })
}

/// Small rotation of the virtual camera, applied to points before projection.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ViewpointPerturbation {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl ViewpointPerturbation {
    pub fn sample(seed: u64, aug: &AugmentConfig) -> Result<Self> {
        aug.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        Ok(Self {
            yaw: uniform(&mut rng, -aug.max_yaw, aug.max_yaw),
            pitch: uniform(&mut rng, -aug.max_pitch, aug.max_pitch),
            roll: uniform(&mut rng, -aug.max_roll, aug.max_roll),
        })
    }

    /// Row-major rotation R = R_y(yaw) * R_x(pitch) * R_z(roll).
    pub fn rotation(&self) -> [[f64; 3]; 3] {
        let (sy, cy) = self.yaw.sin_cos();
        let (sp, cp) = self.pitch.sin_cos();
        let (sr, cr) = self.roll.sin_cos();
        let ry = [[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]];
        let rx = [[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]];
        let rz = [[cr, -sr, 0.0], [sr, cr, 0.0], [0.0, 0.0, 1.0]];
        matmul3(&matmul3(&ry, &rx), &rz)
    }

    pub fn apply(&self, p: &CamPoint3) -> CamPoint3 {
        let r = self.rotation();
        CamPoint3 {
            x: r[0][0] * p.x + r[0][1] * p.y + r[0][2] * p.z,
            y: r[1][0] * p.x + r[1][1] * p.y + r[1][2] * p.z,
            z: r[2][0] * p.x + r[2][1] * p.y + r[2][2] * p.z,
        }
    }
}

fn matmul3(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}
