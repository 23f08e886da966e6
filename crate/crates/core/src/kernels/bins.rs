use super::{sigmoid, KernelError, LossReport, Result};

/// Raw interval parameters of a learnable depth discretization.
#[derive(Debug, Clone, PartialEq)]
pub struct BinSpec {
    pub delta: Vec<f64>,
    pub depth_min: f64,
    pub depth_max: f64,
}

impl BinSpec {
    pub fn new(delta: Vec<f64>, depth_min: f64, depth_max: f64) -> Result<Self> {
        if delta.is_empty() {
            return Err(KernelError::InvalidParameter("need at least one bin".into()));
        }
        if !(depth_min < depth_max && depth_min.is_finite() && depth_max.is_finite()) {
            return Err(KernelError::InvalidParameter(format!(
                "depth range [{depth_min}, {depth_max}] is empty"
            )));
        }
        Ok(Self {
            delta,
            depth_min,
            depth_max,
        })
    }

    /// Equal intervals: 80 bins over [2, 46.8] m.
    pub fn uniform_default() -> Self {
        Self {
            delta: vec![0.0; 80],
            depth_min: 2.0,
            depth_max: 46.8,
        }
    }
}

/// Bin centers with the Jacobian `d center_k / d delta_j`, row-major N x N.
#[derive(Debug, Clone, PartialEq)]
pub struct BinCenters {
    pub centers: Vec<f64>,
    pub jacobian: Vec<f64>,
}

impl BinCenters {
    /// `value = upstream . centers`, gradient `J^T upstream` under "delta".
    pub fn vjp(&self, upstream: &[f64]) -> Result<LossReport> {
        let n = self.centers.len();
        if upstream.len() != n {
            return Err(KernelError::ShapeMismatch(format!(
                "upstream has {} entries for {n} bins",
                upstream.len()
            )));
        }
        let value = upstream.iter().zip(&self.centers).map(|(u, c)| u * c).sum();
        let grad = (0..n)
            .map(|j| (0..n).map(|k| upstream[k] * self.jacobian[k * n + j]).sum())
            .collect();
        Ok(LossReport::new(value).with_grad("delta", grad))
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Softplus-normalized intervals accumulated from `depth_min`.
///
/// `delta_i` below roughly -745 underflows softplus to zero, which collapses
/// that interval.
pub fn bin_centers(spec: &BinSpec) -> BinCenters {
    let n = spec.delta.len();
    let range = spec.depth_max - spec.depth_min;
    let sp: Vec<f64> = spec.delta.iter().map(|&d| softplus(d)).collect();
    let total: f64 = sp.iter().sum();

    let mut centers = Vec::with_capacity(n);
    let mut cumulative = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &s in &sp {
        acc += s;
        cumulative.push(acc);
        centers.push(spec.depth_min + range * acc / total);
    }

    let mut jacobian = vec![0.0; n * n];
    for (k, &c_k) in cumulative.iter().enumerate() {
        for (j, &d) in spec.delta.iter().enumerate() {
            let inside = if j <= k { 1.0 } else { 0.0 };
            jacobian[k * n + j] = range * sigmoid(d) * (inside / total - c_k / (total * total));
        }
    }
    BinCenters { centers, jacobian }
}
