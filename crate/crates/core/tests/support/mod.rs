//! Shared test oracles and dataset builders.
//!
//! The quadratic-programming oracle here is deliberately independent of the
//! library's solver path: it builds its own kernel values and minimizes the
//! dual objective by accelerated projected gradient over the feasible box
//! intersected with the equality hyperplane. Agreement between the two
//! routes is what the solver tests assert.

use spectc_core::rng::Rng;
use spectc_core::svc::KernelSpec;

/// Kernel evaluation local to the oracle (independent of the library path).
fn oracle_kernel(k: KernelSpec, x: &[f64], z: &[f64]) -> f64 {
    match k {
        KernelSpec::Linear => x.iter().zip(z).map(|(a, b)| a * b).sum(),
        KernelSpec::Rbf { gamma } => {
            let d2: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
            (-gamma * d2).exp()
        }
    }
}

/// Project `v` onto `{a : 0 <= a <= c, y.a = 0}` by bisecting the multiplier
/// of the equality constraint.
fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let clamp = |lambda: f64| -> Vec<f64> {
        v.iter().zip(y).map(|(&vi, &yi)| (vi - lambda * yi).clamp(0.0, c)).collect()
    };
    let balance = |a: &[f64]| -> f64 { a.iter().zip(y).map(|(&ai, &yi)| ai * yi).sum() };
    let bound = v.iter().fold(0.0_f64, |m, &vi| m.max(vi.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-bound, bound);
    // balance(clamp(lambda)) is nonincreasing in lambda.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if balance(&clamp(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    clamp(0.5 * (lo + hi))
}

/// Maximal dual objective `W(a) = sum a - 1/2 a' Q a` over the feasible set,
/// computed by FISTA with function restarts on the equivalent minimization.
pub fn qp_oracle_objective(
    features: &[Vec<f64>],
    labels: &[f64],
    kernel: KernelSpec,
    c: f64,
) -> f64 {
    let n = features.len();
    let mut q = vec![0.0_f64; n * n];
    for i in 0..n {
        for j in 0..n {
            q[i * n + j] = labels[i] * labels[j] * oracle_kernel(kernel, &features[i], &features[j]);
        }
    }
    let qdot = |a: &[f64], out: &mut [f64]| {
        for i in 0..n {
            out[i] = (0..n).map(|j| q[i * n + j] * a[j]).sum();
        }
    };
    // Lipschitz bound: infinity norm of the symmetric matrix.
    let lip = (0..n)
        .map(|i| (0..n).map(|j| q[i * n + j].abs()).sum::<f64>())
        .fold(1e-12_f64, f64::max);
    let step = 1.0 / lip;

    let f_val = |a: &[f64], qa: &[f64]| -> f64 {
        0.5 * a.iter().zip(qa).map(|(ai, qi)| ai * qi).sum::<f64>() - a.iter().sum::<f64>()
    };

    let mut x = vec![0.0_f64; n];
    let mut momentum = x.clone();
    let mut t = 1.0_f64;
    let mut qa = vec![0.0_f64; n];
    let mut fx_prev = f64::INFINITY;
    let mut quiet = 0usize;
    for _ in 0..400_000 {
        qdot(&momentum, &mut qa);
        let trial: Vec<f64> =
            momentum.iter().zip(&qa).map(|(mi, qi)| mi - step * (qi - 1.0)).collect();
        let x_next = project(&trial, labels, c);

        let mut qx = vec![0.0; n];
        qdot(&x_next, &mut qx);
        let fx = f_val(&x_next, &qx);
        if fx > fx_prev {
            // Function restart: drop momentum.
            t = 1.0;
            momentum = x.clone();
            fx_prev = f64::INFINITY;
            continue;
        }

        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        momentum = x_next
            .iter()
            .zip(&x)
            .map(|(xn, xo)| xn + beta * (xn - xo))
            .collect();
        let delta = x_next
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        x = x_next;
        t = t_next;
        fx_prev = fx;
        if delta < 1e-14 * (1.0 + c) {
            quiet += 1;
            if quiet >= 60 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    let mut qx = vec![0.0; n];
    qdot(&x, &mut qx);
    -f_val(&x, &qx)
}

/// A random small classification problem with both classes present.
pub struct TinyProblem {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
    pub kernel: KernelSpec,
    pub c: f64,
}

pub fn random_tiny_problem(rng: &mut Rng, case: usize) -> TinyProblem {
    let n = 4 + rng.below(9); // 4..=12
    let dim = 1 + rng.below(4); // 1..=4
    let features: Vec<Vec<f64>> =
        (0..n).map(|_| (0..dim).map(|_| rng.uniform(-2.0, 2.0)).collect()).collect();
    let mut labels: Vec<f64> = (0..n).map(|_| if rng.next_f64() < 0.5 { 1.0 } else { -1.0 }).collect();
    // Force both classes.
    labels[0] = 1.0;
    labels[1] = -1.0;
    let kernel = if case.is_multiple_of(2) {
        KernelSpec::Linear
    } else {
        KernelSpec::Rbf { gamma: rng.uniform(0.2, 2.0) }
    };
    let c = if case.is_multiple_of(3) { 1.0 } else { 10.0 };
    TinyProblem { features, labels, kernel, c }
}
