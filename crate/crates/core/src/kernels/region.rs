use super::{KernelError, LossReport, Result};

/// Probabilities are clipped into `[BCE_CLIP, 1 - BCE_CLIP]` before the logs.
pub const BCE_CLIP: f64 = 1e-7;

/// A predicted probability map and its target, flattened.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskPair {
    pub pred: Vec<f64>,
    pub target: Vec<f64>,
}

impl MaskPair {
    pub fn new(pred: Vec<f64>, target: Vec<f64>) -> Result<Self> {
        if pred.len() != target.len() || pred.is_empty() {
            return Err(KernelError::ShapeMismatch(format!(
                "prediction has {} pixels, target {}",
                pred.len(),
                target.len()
            )));
        }
        if let Some(x) = pred.iter().chain(&target).find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(KernelError::InvalidParameter(format!(
                "mask value {x} outside [0, 1]"
            )));
        }
        Ok(Self { pred, target })
    }
}

/// `1 - (2 sum(p g) + eps) / (sum p + sum g + eps)`, gradient under "pred".
pub fn dice_loss(mp: &MaskPair, eps: f64) -> Result<LossReport> {
    if !(eps > 0.0) {
        return Err(KernelError::InvalidParameter(format!(
            "dice smoothing must be positive, got {eps}"
        )));
    }
    let inter: f64 = mp.pred.iter().zip(&mp.target).map(|(p, g)| p * g).sum();
    let sum_p: f64 = mp.pred.iter().sum();
    let sum_g: f64 = mp.target.iter().sum();
    let num = 2.0 * inter + eps;
    let den = sum_p + sum_g + eps;
    let grad = mp
        .target
        .iter()
        .map(|g| -(2.0 * g * den - num) / (den * den))
        .collect();
    Ok(LossReport::new(1.0 - num / den).with_grad("pred", grad))
}

/// Pixel-mean binary cross-entropy with clipped predictions.
pub fn bce_loss(mp: &MaskPair) -> Result<LossReport> {
    let n = mp.pred.len() as f64;
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(mp.pred.len());
    for (&p, &g) in mp.pred.iter().zip(&mp.target) {
        let pc = p.clamp(BCE_CLIP, 1.0 - BCE_CLIP);
        value -= g * pc.ln() + (1.0 - g) * (1.0 - pc).ln();
        let inside = p > BCE_CLIP && p < 1.0 - BCE_CLIP;
        grad.push(if inside {
            (-g / pc + (1.0 - g) / (1.0 - pc)) / n
        } else {
            0.0
        });
    }
    Ok(LossReport::new(value / n).with_grad("pred", grad))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionWeights {
    pub dice: f64,
    pub bce: f64,
}

impl Default for RegionWeights {
    fn default() -> Self {
        Self {
            dice: 0.7,
            bce: 0.3,
        }
    }
}

/// Weighted scale-mean of Dice and BCE. Gradients are named `pred{i}` for
/// scale `i`.
pub fn region_loss(pairs: &[MaskPair], weights: RegionWeights, dice_eps: f64) -> Result<LossReport> {
    if pairs.is_empty() {
        return Err(KernelError::EmptyScaleList);
    }
    let n = pairs.len() as f64;
    let mut report = LossReport::new(0.0);
    for (i, mp) in pairs.iter().enumerate() {
        let dice = dice_loss(mp, dice_eps)?;
        let bce = bce_loss(mp)?;
        report.value += (weights.dice * dice.value + weights.bce * bce.value) / n;
        let grad = dice.grads[0]
            .1
            .iter()
            .zip(&bce.grads[0].1)
            .map(|(a, b)| (weights.dice * a + weights.bce * b) / n)
            .collect();
        report.grads.push((format!("pred{i}"), grad));
    }
    Ok(report)
}
