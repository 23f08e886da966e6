//! Central finite-difference verification of the analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::*;

/// Outcome of one finite-difference comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub worst_index: Option<usize>,
    pub numeric: Vec<f64>,
}

/// Coordinates whose gradient is three orders of magnitude below the largest
/// one are compared against that scale instead of their own size.
const SCALE_FLOOR: f64 = 1e-3;
const ABS_FLOOR: f64 = 1e-8;

/// Compares `analytic` with central differences of `f` at `x`.
///
/// The relative error of coordinate `i` is
/// `|a_i - n_i| / max(|a_i|, |n_i|, 1e-3 * max_j |a_j|, 1e-8)`.
pub fn finite_diff_check<F>(f: F, x: &[f64], analytic: &[f64], h: f64) -> GradCheck
where
    F: Fn(&[f64]) -> f64,
{
    assert_eq!(x.len(), analytic.len(), "gradient length must match inputs");
    assert!(h > 0.0, "step must be positive");
    let mut probe = x.to_vec();
    let numeric: Vec<f64> = (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect();
    let scale = analytic.iter().fold(0.0f64, |m, a| m.max(a.abs())) * SCALE_FLOOR;
    let mut max_rel_err = 0.0;
    let mut worst_index = None;
    for (i, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
        let denom = a.abs().max(n.abs()).max(scale).max(ABS_FLOOR);
        let err = (a - n).abs() / denom;
        if err > max_rel_err || err.is_nan() {
            max_rel_err = if err.is_nan() { f64::INFINITY } else { err };
            worst_index = Some(i);
        }
    }
    GradCheck {
        max_rel_err,
        worst_index,
        numeric,
    }
}

/// Every kernel covered by [`run_suite`], in report order.
pub const KERNELS: [&str; 8] = [
    "query_gate",
    "diversity_loss",
    "bin_centers",
    "depth_kl",
    "dice_loss",
    "bce_loss",
    "consistency_loss",
    "l2_reg",
];

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckOptions {
    pub seed: u64,
    pub points: usize,
    pub h: f64,
    pub tolerance: f64,
    /// Scales the analytic gradient of the named kernel by 1.01; used to
    /// confirm the suite detects a wrong gradient.
    pub inject_fault: Option<String>,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            points: 100,
            h: 1e-5,
            tolerance: 1e-4,
            inject_fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelCheck {
    pub kernel: String,
    pub points: usize,
    pub max_rel_err: f64,
    pub worst_point: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub seed: u64,
    pub h: f64,
    pub tolerance: f64,
    pub kernels: Vec<KernelCheck>,
    pub passed: bool,
}

/// A differentiable problem flattened to one input vector.
type Objective = Box<dyn Fn(&[f64]) -> f64>;

struct Problem {
    x: Vec<f64>,
    f: Objective,
    grad: Vec<f64>,
}

fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn flat_grads(r: &LossReport) -> Vec<f64> {
    r.grads.iter().flat_map(|(_, g)| g.iter().copied()).collect()
}

fn gate_problem(rng: &mut ChaCha8Rng) -> Problem {
    let (b, q, d) = (2, 3, 4);
    let nt = b * q * d;
    let nc = b * d;
    let nw = 2 * d * d;
    let x = uniform_vec(rng, nt + nc + nw + d, -1.0, 1.0);
    let upstream = uniform_vec(rng, nt, -1.0, 1.0);
    let eval = move |x: &[f64]| {
        let tgt = QuerySet::new(b, q, d, x[..nt].to_vec()).unwrap();
        let params = GateParams::new(
            d,
            x[nt + nc..nt + nc + nw].to_vec(),
            Some(x[nt + nc + nw..].to_vec()),
        )
        .unwrap();
        query_gate_vjp(&tgt, &x[nt..nt + nc], &params, &upstream).unwrap()
    };
    let grad = flat_grads(&eval(&x));
    Problem {
        x,
        f: Box::new(move |x| eval(x).value),
        grad,
    }
}

fn diversity_problem(rng: &mut ChaCha8Rng) -> Problem {
    let (b, q, d) = (2, 4, 8);
    let x = uniform_vec(rng, b * q * d, -1.0, 1.0);
    let eval = move |x: &[f64]| diversity_loss(&QuerySet::new(b, q, d, x.to_vec()).unwrap()).unwrap();
    let grad = flat_grads(&eval(&x));
    Problem {
        x,
        f: Box::new(move |x| eval(x).value),
        grad,
    }
}

fn bins_problem(rng: &mut ChaCha8Rng) -> Problem {
    let n = 8;
    let x = uniform_vec(rng, n, -3.0, 3.0);
    let upstream = uniform_vec(rng, n, -1.0, 1.0);
    let lo = rng.random_range(0.5..5.0);
    let hi = lo + rng.random_range(10.0..60.0);
    let eval = move |x: &[f64]| {
        bin_centers(&BinSpec::new(x.to_vec(), lo, hi).unwrap())
            .vjp(&upstream)
            .unwrap()
    };
    let grad = flat_grads(&eval(&x));
    Problem {
        x,
        f: Box::new(move |x| eval(x).value),
        grad,
    }
}

fn depth_kl_problem(rng: &mut ChaCha8Rng) -> Problem {
    let target = rng.random_range(2.0..60.0);
    let eps = rng.random_range(0.05..0.5);
    let x = vec![target + rng.random_range(-3.0..3.0), rng.random_range(0.2..3.0)];
    let eval = move |x: &[f64]| {
        depth_kl(&GaussianDepth {
            mean: x[0],
            sigma: x[1],
            target,
            eps,
        })
        .unwrap()
    };
    let grad = flat_grads(&eval(&x));
    Problem {
        x,
        f: Box::new(move |x| eval(x).value),
        grad,
    }
}

fn mask_problem(rng: &mut ChaCha8Rng, dice: bool) -> Problem {
    let n = 16;
    let x = uniform_vec(rng, n, 0.05, 0.95);
    let target: Vec<f64> = (0..n)
        .map(|_| {
            if rng.random_bool(0.5) {
                rng.random_range(0.0..1.0)
            } else {
                f64::from(rng.random_bool(0.5) as u8)
            }
        })
        .collect();
    let eval = move |x: &[f64]| {
        let mp = MaskPair {
            pred: x.to_vec(),
            target: target.clone(),
        };
        if dice {
            dice_loss(&mp, 1e-6).unwrap()
        } else {
            bce_loss(&mp).unwrap()
        }
    };
    let grad = flat_grads(&eval(&x));
    Problem {
        x,
        f: Box::new(move |x| eval(x).value),
        grad,
    }
}

fn consistency_problem(rng: &mut ChaCha8Rng, h: f64) -> Problem {
    let params = ConsistencyParams {
        beta: rng.random_range(5.0..60.0),
        smooth_delta: rng.random_range(0.5..3.0),
    };
    let fx = rng.random_range(500.0..1500.0);
    // Residuals span both Smooth-L1 branches and the saturated clamp; points
    // within 10h (in residual units) of a kink are redrawn.
    let (dim, depth, s2d) = loop {
        let dim = rng.random_range(0.5..5.0);
        let depth = rng.random_range(3.0..60.0);
        let s_proj = fx * dim / depth;
        let raw = rng.random_range(-2.0 * params.beta..2.0 * params.beta);
        let slope = fx / depth + fx * dim / (depth * depth);
        let margin = 10.0 * h * slope;
        let clipped = raw.clamp(-params.beta, params.beta);
        if (raw.abs() - params.beta).abs() > margin
            && (clipped.abs() - params.smooth_delta).abs() > margin
        {
            break (dim, depth, s_proj - raw);
        }
    };
    let x = vec![dim, depth];
    let eval = move |x: &[f64]| consistency_loss(x[0], x[1], fx, s2d, params).unwrap();
    let grad = flat_grads(&eval(&x));
    Problem {
        x,
        f: Box::new(move |x| eval(x).value),
        grad,
    }
}

fn l2_problem(rng: &mut ChaCha8Rng) -> Problem {
    let lambda = rng.random_range(0.0..2.0);
    let x = uniform_vec(rng, 8, -3.0, 3.0);
    let eval = move |x: &[f64]| l2_reg(&[&x[..5], &x[5..]], lambda).unwrap();
    let grad = flat_grads(&eval(&x));
    Problem {
        x,
        f: Box::new(move |x| eval(x).value),
        grad,
    }
}

fn make_problem(kernel: &str, rng: &mut ChaCha8Rng, h: f64) -> Problem {
    match kernel {
        "query_gate" => gate_problem(rng),
        "diversity_loss" => diversity_problem(rng),
        "bin_centers" => bins_problem(rng),
        "depth_kl" => depth_kl_problem(rng),
        "dice_loss" => mask_problem(rng, true),
        "bce_loss" => mask_problem(rng, false),
        "consistency_loss" => consistency_problem(rng, h),
        "l2_reg" => l2_problem(rng),
        other => unreachable!("unknown kernel {other}"),
    }
}

/// Checks one kernel at `opts.points` seeded random points.
pub fn check_kernel(kernel: &str, opts: &GradcheckOptions) -> KernelCheck {
    let index = KERNELS
        .iter()
        .position(|k| *k == kernel)
        .unwrap_or_else(|| panic!("unknown kernel {kernel}"));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(0x1000 * (index as u64 + 1)));
    let fault = opts.inject_fault.as_deref() == Some(kernel);
    let mut worst = (0.0f64, 0usize);
    for point in 0..opts.points {
        let mut p = make_problem(kernel, &mut rng, opts.h);
        if fault {
            p.grad.iter_mut().for_each(|g| *g *= 1.01);
        }
        let check = finite_diff_check(&p.f, &p.x, &p.grad, opts.h);
        if check.max_rel_err > worst.0 || point == 0 {
            worst = (check.max_rel_err, point);
        }
    }
    KernelCheck {
        kernel: kernel.to_string(),
        points: opts.points,
        max_rel_err: worst.0,
        worst_point: worst.1,
        passed: worst.0 < opts.tolerance,
    }
}

pub fn run_suite(opts: &GradcheckOptions) -> GradcheckReport {
    let kernels: Vec<KernelCheck> = KERNELS.iter().map(|k| check_kernel(k, opts)).collect();
    let passed = kernels.iter().all(|k| k.passed);
    GradcheckReport {
        seed: opts.seed,
        h: opts.h,
        tolerance: opts.tolerance,
        kernels,
        passed,
    }
}
