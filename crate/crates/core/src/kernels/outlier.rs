use serde::{Deserialize, Serialize};

use super::{KernelError, Result};
use crate::pseudolabel::median_in_place;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StdKind {
    /// Divide by n.
    #[default]
    Population,
    /// Divide by n - 1.
    Sample,
}

/// Result of the median-plus-k-sigma rejection rule.
#[derive(Debug, Clone, PartialEq)]
pub struct OutlierFilter {
    pub keep: Vec<bool>,
    pub tau: f64,
    pub median: f64,
    pub std: f64,
}

impl OutlierFilter {
    /// Losses with rejected entries replaced by zero.
    pub fn apply(&self, losses: &[f64]) -> Vec<f64> {
        losses
            .iter()
            .zip(&self.keep)
            .map(|(&l, &k)| if k { l } else { 0.0 })
            .collect()
    }

    pub fn dropped(&self) -> usize {
        self.keep.iter().filter(|k| !**k).count()
    }
}

/// Keeps `L_i <= median + k * std`.
pub fn outlier_filter(losses: &[f64], k: f64, std_kind: StdKind) -> Result<OutlierFilter> {
    if losses.is_empty() {
        return Err(KernelError::EmptyInput);
    }
    if !(k >= 0.0 && k.is_finite()) {
        return Err(KernelError::InvalidParameter(format!(
            "k must be a non-negative number, got {k}"
        )));
    }
    if let Some(x) = losses.iter().find(|x| !x.is_finite()) {
        return Err(KernelError::InvalidParameter(format!("non-finite loss {x}")));
    }
    let n = losses.len();
    let mean = losses.iter().sum::<f64>() / n as f64;
    let ss: f64 = losses.iter().map(|l| (l - mean) * (l - mean)).sum();
    let dof = match std_kind {
        StdKind::Population => n as f64,
        StdKind::Sample if n > 1 => (n - 1) as f64,
        StdKind::Sample => 1.0,
    };
    let std = (ss / dof).sqrt();
    let median = median_in_place(&mut losses.to_vec());
    let tau = median + k * std;
    Ok(OutlierFilter {
        keep: losses.iter().map(|&l| l <= tau).collect(),
        tau,
        median,
        std,
    })
}
