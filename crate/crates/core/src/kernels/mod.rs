//! Loss and gating kernels with eagerly computed analytic gradients.
//!
//! Every differentiable kernel returns a [`LossReport`] holding the scalar
//! value and one gradient array per differentiable input. Tensor-valued maps
//! (the query gate, the bin centers) report a vector-Jacobian product against
//! a caller supplied upstream gradient, which is what a training loop would
//! consume and what the finite-difference checker verifies.

mod bins;
mod consistency;
mod depth_kl;
mod diversity;
mod gate;
pub mod gradcheck;
mod outlier;
mod region;
mod regularization;

use thiserror::Error;

pub use bins::{bin_centers, BinCenters, BinSpec};
pub use consistency::{consistency_loss, smooth_l1, ConsistencyParams};
pub use depth_kl::{depth_kl, GaussianDepth};
pub use diversity::{diversity_loss, QuerySet};
pub use gate::{query_gate, query_gate_vjp, GateOutput, GateParams};
pub use gradcheck::{finite_diff_check, GradCheck};
pub use outlier::{outlier_filter, OutlierFilter, StdKind};
pub use region::{bce_loss, dice_loss, region_loss, MaskPair, RegionWeights, BCE_CLIP};
pub use regularization::l2_reg;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("query {batch}/{query} has (near) zero norm")]
    DegenerateQuery { batch: usize, query: usize },
    #[error("sigma must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("region loss needs at least one scale")]
    EmptyScaleList,
    #[error("outlier filter needs at least one loss")]
    EmptyInput,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, KernelError>;

/// Scalar value plus named gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub value: f64,
    pub grads: Vec<(String, Vec<f64>)>,
    /// Set when the value was defined by convention rather than computed.
    pub note: Option<&'static str>,
}

impl LossReport {
    pub fn new(value: f64) -> Self {
        Self {
            value,
            grads: Vec::new(),
            note: None,
        }
    }

    pub fn with_grad(mut self, name: impl Into<String>, grad: Vec<f64>) -> Self {
        self.grads.push((name.into(), grad));
        self
    }

    pub fn grad(&self, name: &str) -> Option<&[f64]> {
        self.grads
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, g)| g.as_slice())
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
