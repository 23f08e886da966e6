use super::{KernelError, LossReport, Result};

/// Residual clamp and Smooth-L1 transition, both in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyParams {
    pub beta: f64,
    pub smooth_delta: f64,
}

impl Default for ConsistencyParams {
    fn default() -> Self {
        Self {
            beta: 50.0,
            smooth_delta: 1.0,
        }
    }
}

/// Smooth-L1 and its derivative: quadratic below `delta`, linear above.
pub fn smooth_l1(r: f64, delta: f64) -> (f64, f64) {
    if r.abs() < delta {
        (0.5 * r * r / delta, r / delta)
    } else {
        (r.abs() - 0.5 * delta, r.signum())
    }
}

/// Smooth-L1 of the clamped gap between the projected 3D extent
/// `f_x * dim / depth` and the observed 2D extent.
///
/// Gradients for `dim3d` and `depth` vanish once the residual saturates the
/// clamp.
pub fn consistency_loss(
    dim3d: f64,
    depth: f64,
    fx: f64,
    s2d: f64,
    params: ConsistencyParams,
) -> Result<LossReport> {
    if !(depth > 0.0) {
        return Err(KernelError::NonPositiveDepth(depth));
    }
    if !(params.beta > 0.0 && params.smooth_delta > 0.0) {
        return Err(KernelError::InvalidParameter(format!(
            "clamp {} and smooth-L1 transition {} must be positive",
            params.beta, params.smooth_delta
        )));
    }
    let s_proj = fx * dim3d / depth;
    let raw = s_proj - s2d;
    let r = raw.clamp(-params.beta, params.beta);
    let (value, d_r) = smooth_l1(r, params.smooth_delta);
    let pass = if raw.abs() < params.beta { d_r } else { 0.0 };
    Ok(LossReport::new(value)
        .with_grad("dim3d", vec![pass * fx / depth])
        .with_grad("depth", vec![-pass * fx * dim3d / (depth * depth)]))
}
