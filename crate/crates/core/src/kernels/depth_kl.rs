use super::{KernelError, LossReport, Result};

/// Predicted Gaussian depth `(mean, sigma)` against a sharp target
/// `(target, eps)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianDepth {
    pub mean: f64,
    pub sigma: f64,
    pub target: f64,
    pub eps: f64,
}

impl GaussianDepth {
    /// Target sharpness used when none is configured, metres.
    pub const DEFAULT_EPS: f64 = 0.1;
}

/// `log(sigma/eps) + (eps^2 + (target - mean)^2) / (2 sigma^2) - 1/2`,
/// with gradients for `mean` and `sigma`.
pub fn depth_kl(gd: &GaussianDepth) -> Result<LossReport> {
    let GaussianDepth {
        mean,
        sigma,
        target,
        eps,
    } = *gd;
    if !(sigma > 0.0) {
        return Err(KernelError::NonPositiveSigma(sigma));
    }
    if !(eps > 0.0) {
        return Err(KernelError::InvalidParameter(format!(
            "target sharpness must be positive, got {eps}"
        )));
    }
    let diff = target - mean;
    let var = sigma * sigma;
    // With t = (eps/sigma)^2 the width terms are (t - 1 - ln t) / 2, written
    // through ln_1p so the minimum is reached without cancellation.
    let tm1 = (eps - sigma) * (eps + sigma) / var;
    let width_term = 0.5 * (tm1 - tm1.ln_1p());
    let value = (width_term + diff * diff / (2.0 * var)).max(0.0);
    let d_mean = -diff / var;
    let d_sigma = 1.0 / sigma - (eps * eps + diff * diff) / (var * sigma);
    Ok(LossReport::new(value)
        .with_grad("mean", vec![d_mean])
        .with_grad("sigma", vec![d_sigma]))
}
