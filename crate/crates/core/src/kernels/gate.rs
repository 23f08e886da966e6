use super::{sigmoid, KernelError, LossReport, QuerySet, Result};

/// Linear map `d x 2d` (row-major) plus optional bias applied to `[tgt; g]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GateParams {
    pub dim: usize,
    pub weight: Vec<f64>,
    pub bias: Option<Vec<f64>>,
}

impl GateParams {
    pub fn new(dim: usize, weight: Vec<f64>, bias: Option<Vec<f64>>) -> Result<Self> {
        if weight.len() != 2 * dim * dim {
            return Err(KernelError::ShapeMismatch(format!(
                "gate weight must be {dim}x{}, got {} values",
                2 * dim,
                weight.len()
            )));
        }
        if let Some(b) = &bias {
            if b.len() != dim {
                return Err(KernelError::ShapeMismatch(format!(
                    "gate bias must have {dim} entries, got {}",
                    b.len()
                )));
            }
        }
        Ok(Self { dim, weight, bias })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            weight: vec![0.0; 2 * dim * dim],
            bias: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateOutput {
    pub gates: QuerySet,
    pub fused: QuerySet,
}

/// Index of the context vector used by batch element `b`. A context of
/// length `d` is shared by the whole batch; length `B*d` gives one per element.
fn context_offset(context: &[f64], q: &QuerySet, b: usize) -> Result<usize> {
    if context.len() == q.dim {
        Ok(0)
    } else if context.len() == q.batch * q.dim {
        Ok(b * q.dim)
    } else {
        Err(KernelError::ShapeMismatch(format!(
            "depth context must have {} or {} entries, got {}",
            q.dim,
            q.batch * q.dim,
            context.len()
        )))
    }
}

fn check_params(tgt: &QuerySet, params: &GateParams) -> Result<()> {
    if params.dim != tgt.dim {
        return Err(KernelError::ShapeMismatch(format!(
            "gate width {} does not match query width {}",
            params.dim, tgt.dim
        )));
    }
    Ok(())
}

fn pre_activation(tgt: &[f64], ctx: &[f64], params: &GateParams, k: usize) -> f64 {
    let d = params.dim;
    let row = &params.weight[k * 2 * d..(k + 1) * 2 * d];
    let mut z = params.bias.as_ref().map_or(0.0, |b| b[k]);
    z += row[..d].iter().zip(tgt).map(|(w, x)| w * x).sum::<f64>();
    z += row[d..].iter().zip(ctx).map(|(w, x)| w * x).sum::<f64>();
    z
}

/// `gate_i = sigmoid(W [tgt_i; g] + b)`, `fused_i = gate_i * tgt_i`.
pub fn query_gate(tgt: &QuerySet, context: &[f64], params: &GateParams) -> Result<GateOutput> {
    check_params(tgt, params)?;
    let d = tgt.dim;
    let mut gates = vec![0.0; tgt.values.len()];
    let mut fused = vec![0.0; tgt.values.len()];
    for b in 0..tgt.batch {
        let off = context_offset(context, tgt, b)?;
        let ctx = &context[off..off + d];
        for i in 0..tgt.queries {
            let t = tgt.query(b, i);
            let base = (b * tgt.queries + i) * d;
            for k in 0..d {
                let g = sigmoid(pre_activation(t, ctx, params, k));
                gates[base + k] = g;
                fused[base + k] = g * t[k];
            }
        }
    }
    let shaped = |values| QuerySet {
        values,
        ..tgt.clone()
    };
    Ok(GateOutput {
        gates: shaped(gates),
        fused: shaped(fused),
    })
}

/// Vector-Jacobian product of the gate: value is `sum(upstream * fused)`,
/// gradients are reported for `tgt`, `context`, `weight` and, when present,
/// `bias`.
pub fn query_gate_vjp(
    tgt: &QuerySet,
    context: &[f64],
    params: &GateParams,
    upstream: &[f64],
) -> Result<LossReport> {
    if upstream.len() != tgt.values.len() {
        return Err(KernelError::ShapeMismatch(format!(
            "upstream gradient has {} entries for {} outputs",
            upstream.len(),
            tgt.values.len()
        )));
    }
    let out = query_gate(tgt, context, params)?;
    let d = tgt.dim;
    let mut d_tgt = vec![0.0; tgt.values.len()];
    let mut d_ctx = vec![0.0; context.len()];
    let mut d_w = vec![0.0; params.weight.len()];
    let mut d_b = vec![0.0; d];
    let mut value = 0.0;
    for b in 0..tgt.batch {
        let off = context_offset(context, tgt, b)?;
        let ctx = &context[off..off + d];
        for i in 0..tgt.queries {
            let t = tgt.query(b, i);
            let base = (b * tgt.queries + i) * d;
            for k in 0..d {
                let up = upstream[base + k];
                let gate = out.gates.values[base + k];
                value += up * out.fused.values[base + k];
                d_tgt[base + k] += up * gate;
                let dz = up * t[k] * gate * (1.0 - gate);
                d_b[k] += dz;
                let row = k * 2 * d;
                for j in 0..d {
                    d_w[row + j] += dz * t[j];
                    d_w[row + d + j] += dz * ctx[j];
                    d_tgt[base + j] += dz * params.weight[row + j];
                    d_ctx[off + j] += dz * params.weight[row + d + j];
                }
            }
        }
    }
    let mut report = LossReport::new(value)
        .with_grad("tgt", d_tgt)
        .with_grad("context", d_ctx)
        .with_grad("weight", d_w);
    if params.bias.is_some() {
        report = report.with_grad("bias", d_b);
    }
    Ok(report)
}
