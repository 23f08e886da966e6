use super::{KernelError, LossReport, Result};

/// `batch x queries x dim` embeddings, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct QuerySet {
    pub batch: usize,
    pub queries: usize,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl QuerySet {
    pub fn new(batch: usize, queries: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if queries == 0 || dim == 0 {
            return Err(KernelError::ShapeMismatch(format!(
                "need at least one query of width >= 1, got Q={queries} d={dim}"
            )));
        }
        if values.len() != batch * queries * dim {
            return Err(KernelError::ShapeMismatch(format!(
                "{batch}x{queries}x{dim} query set needs {} values, got {}",
                batch * queries * dim,
                values.len()
            )));
        }
        Ok(Self {
            batch,
            queries,
            dim,
            values,
        })
    }

    pub fn query(&self, b: usize, i: usize) -> &[f64] {
        let start = (b * self.queries + i) * self.dim;
        &self.values[start..start + self.dim]
    }
}

const MIN_NORM: f64 = 1e-12;

/// Mean pairwise cosine similarity between distinct queries of each batch
/// element.
///
/// Uses `sum_{i != j} n_i . n_j = |sum_i n_i|^2 - sum_i |n_i|^2` over the unit
/// vectors `n_i`, so the cost is linear in Q. With fewer than two queries the
/// loss is undefined; the report then carries value 0, a zero gradient and a
/// note.
pub fn diversity_loss(q: &QuerySet) -> Result<LossReport> {
    let (bsz, nq, d) = (q.batch, q.queries, q.dim);
    let mut grad = vec![0.0; q.values.len()];
    if nq < 2 || bsz == 0 {
        let mut r = LossReport::new(0.0).with_grad("q", grad);
        r.note = Some("undefined for fewer than two queries");
        return Ok(r);
    }
    let scale = 1.0 / (bsz * nq * (nq - 1)) as f64;
    let mut value = 0.0;
    let mut unit = vec![0.0; nq * d];
    let mut norms = vec![0.0; nq];
    let mut total = vec![0.0; d];
    for b in 0..bsz {
        total.iter_mut().for_each(|t| *t = 0.0);
        for i in 0..nq {
            let qi = q.query(b, i);
            let norm = qi.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !(norm >= MIN_NORM) {
                return Err(KernelError::DegenerateQuery { batch: b, query: i });
            }
            norms[i] = norm;
            for k in 0..d {
                let n = qi[k] / norm;
                unit[i * d + k] = n;
                total[k] += n;
            }
        }
        let self_terms: f64 = unit.iter().map(|x| x * x).sum();
        let total_sq: f64 = total.iter().map(|x| x * x).sum();
        value += total_sq - self_terms;

        // d/dn_i = 2 * scale * (S - n_i), then project out the radial part.
        for i in 0..nq {
            let n_i = &unit[i * d..(i + 1) * d];
            let dn: Vec<f64> = (0..d).map(|k| 2.0 * scale * (total[k] - n_i[k])).collect();
            let radial: f64 = dn.iter().zip(n_i).map(|(a, b)| a * b).sum();
            let base = (b * nq + i) * d;
            for k in 0..d {
                grad[base + k] = (dn[k] - radial * n_i[k]) / norms[i];
            }
        }
    }
    Ok(LossReport::new(value * scale).with_grad("q", grad))
}
