use super::{KernelError, LossReport, Result};

/// `lambda * sum(theta^2)` over every parameter array; gradient `2 lambda theta`
/// reported as `param{i}`.
pub fn l2_reg(params: &[&[f64]], lambda: f64) -> Result<LossReport> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(KernelError::InvalidParameter(format!(
            "lambda must be non-negative, got {lambda}"
        )));
    }
    let mut report = LossReport::new(0.0);
    for (i, p) in params.iter().enumerate() {
        report.value += lambda * p.iter().map(|x| x * x).sum::<f64>();
        report
            .grads
            .push((format!("param{i}"), p.iter().map(|x| 2.0 * lambda * x).collect()));
    }
    Ok(report)
}
