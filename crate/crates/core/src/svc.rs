//! Soft-margin support-vector classification with a sequential minimal
//! optimization (SMO) dual solver.
//!
//! The solver maximizes the dual objective
//! `W(a) = sum_k a_k - 1/2 sum_kl a_k a_l y_k y_l K(x_k, x_l)` subject to
//! `0 <= a_k <= c` and `sum_k a_k y_k = 0`, by repeatedly optimizing the pair
//! of multipliers formed by the maximal Karush-Kuhn-Tucker violator and the
//! partner with the largest error gap. Pair selection breaks ties by lowest
//! index and uses no randomness, so training is deterministic for a given
//! input order.
//!
//! Trained models are immutable; prediction is reentrant and models can be
//! shared freely across threads.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SvcError {
    #[error("feature vectors have mismatched dimensions ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("training data contains a single class only")]
    DegenerateLabels,
    #[error("training labels must be +1 or -1, got {0}")]
    InvalidLabel(f64),
    #[error("need at least two training points, got {0}")]
    TooFewPoints(usize),
    #[error("rbf kernel requires gamma > 0, got {0}")]
    InvalidGamma(f64),
    #[error("hyperparameter `{0}` must be positive")]
    InvalidHyperparam(&'static str),
    #[error("model file: {0}")]
    ModelFile(String),
}

/// Kernel selection. `Rbf` computes `exp(-gamma * |x - z|^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Linear,
    Rbf { gamma: f64 },
}

impl KernelSpec {
    /// Default radial kernel for `dim`-dimensional inputs: `gamma = 1/dim`.
    pub fn rbf_for_dim(dim: usize) -> Self {
        KernelSpec::Rbf { gamma: 1.0 / dim.max(1) as f64 }
    }

    pub fn validate(&self) -> Result<(), SvcError> {
        match self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Rbf { gamma } if *gamma > 0.0 && gamma.is_finite() => Ok(()),
            KernelSpec::Rbf { gamma } => Err(SvcError::InvalidGamma(*gamma)),
        }
    }

    /// Kernel value for a pair of equal-dimension vectors.
    pub fn eval(&self, x: &[f64], z: &[f64]) -> Result<f64, SvcError> {
        if x.len() != z.len() {
            return Err(SvcError::DimensionMismatch(x.len(), z.len()));
        }
        Ok(self.eval_unchecked(x, z))
    }

    fn eval_unchecked(&self, x: &[f64], z: &[f64]) -> f64 {
        match self {
            KernelSpec::Linear => x.iter().zip(z).map(|(a, b)| a * b).sum(),
            KernelSpec::Rbf { gamma } => {
                let d2: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

/// Training hyperparameters.
///
/// `epsilon` is a reporting threshold on the absolute model error
/// `|y - f(x)|`, not a loss parameter: training minimizes the usual hinge
/// objective and afterwards records how many training points deviate from
/// their label by more than `epsilon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub kernel: KernelSpec,
    /// Box constraint on the dual variables.
    pub c: f64,
    /// Reporting threshold on `|y - f(x)|`.
    pub epsilon: f64,
    /// KKT violation below which the solver stops.
    pub kkt_tol: f64,
    /// Maximum number of pair-optimization steps.
    pub max_passes: usize,
}

impl Hyperparams {
    /// Defaults for `dim`-dimensional inputs: RBF kernel with `gamma = 1/dim`
    /// and `c = 10`.
    pub fn for_dim(dim: usize) -> Self {
        Hyperparams {
            kernel: KernelSpec::rbf_for_dim(dim),
            c: 10.0,
            epsilon: 0.0,
            kkt_tol: 1e-6,
            max_passes: 200_000,
        }
    }

    pub fn with_kernel(mut self, kernel: KernelSpec) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn validate(&self) -> Result<(), SvcError> {
        self.kernel.validate()?;
        if !(self.c > 0.0) {
            return Err(SvcError::InvalidHyperparam("c"));
        }
        if !(self.epsilon >= 0.0) {
            return Err(SvcError::InvalidHyperparam("epsilon"));
        }
        if !(self.kkt_tol > 0.0) {
            return Err(SvcError::InvalidHyperparam("kkt_tol"));
        }
        if self.max_passes == 0 {
            return Err(SvcError::InvalidHyperparam("max_passes"));
        }
        Ok(())
    }
}

/// Final solver state, kept on freshly trained models for inspection.
///
/// `slacks[k]` is the epsilon-insensitive residual
/// `max(0, |y_k - f(x_k)| - epsilon)`, so `|y_k - f(x_k)| <= epsilon +
/// slacks[k]` holds for every training point by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub slacks: Vec<f64>,
    /// Dual objective `W(a)` at termination.
    pub objective: f64,
}

/// Provenance of a trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMeta {
    pub hyperparams: Hyperparams,
    pub n_train: usize,
    pub dim: usize,
    pub seed: u64,
    /// False when the step budget ran out before the KKT conditions held.
    pub converged: bool,
    pub steps: usize,
    /// Training points with `|y - f(x)| > epsilon`.
    pub epsilon_violations: usize,
}

/// A trained support-vector classifier. `coefficients[k]` stores
/// `alpha_k * y_k` for the k-th support vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SvcModel {
    support_vectors: Vec<Vec<f64>>,
    coefficients: Vec<f64>,
    bias: f64,
    kernel: KernelSpec,
    meta: TrainingMeta,
    solver_state: Option<SolverState>,
}

impl SvcModel {
    pub fn support_vectors(&self) -> &[Vec<f64>] {
        &self.support_vectors
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    pub fn meta(&self) -> &TrainingMeta {
        &self.meta
    }

    /// Present on freshly trained models, absent after deserialization.
    pub fn solver_state(&self) -> Option<&SolverState> {
        self.solver_state.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.meta.dim
    }

    /// The decision function `f(x) = sum_k coeff_k K(sv_k, x) + bias`.
    pub fn decision_value(&self, x: &[f64]) -> Result<f64, SvcError> {
        if x.len() != self.meta.dim {
            return Err(SvcError::DimensionMismatch(x.len(), self.meta.dim));
        }
        let mut f = self.bias;
        for (sv, coeff) in self.support_vectors.iter().zip(&self.coefficients) {
            f += coeff * self.kernel.eval_unchecked(sv, x);
        }
        Ok(f)
    }

    /// Sign of the decision value; an exact zero maps to `+1`.
    pub fn predict(&self, x: &[f64]) -> Result<i8, SvcError> {
        Ok(if self.decision_value(x)? >= 0.0 { 1 } else { -1 })
    }

    /// Model error `e_m = y - f(x)`.
    pub fn model_error(&self, x: &[f64], y: f64) -> Result<f64, SvcError> {
        Ok(y - self.decision_value(x)?)
    }

    /// Serialize to the model interchange JSON
    /// (`{kernel, gamma, c, bias, support_vectors, coefficients}`).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&SvcModelFile::from(self)).expect("model serialization")
    }

    /// Inverse of [`SvcModel::to_json`]. Hyperparameters beyond the kernel
    /// and `c` are not part of the interchange format; the loaded model
    /// carries solver defaults in their place and no solver state.
    pub fn from_json(json: &str) -> Result<Self, SvcError> {
        let file: SvcModelFile =
            serde_json::from_str(json).map_err(|e| SvcError::ModelFile(e.to_string()))?;
        SvcModel::try_from(file)
    }
}

#[derive(Serialize, Deserialize)]
pub(crate) struct SvcModelFile {
    kernel: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    c: f64,
    bias: f64,
    support_vectors: Vec<Vec<f64>>,
    coefficients: Vec<f64>,
}

impl From<&SvcModel> for SvcModelFile {
    fn from(m: &SvcModel) -> Self {
        let (kernel, gamma) = match m.kernel {
            KernelSpec::Linear => ("linear".to_string(), None),
            KernelSpec::Rbf { gamma } => ("rbf".to_string(), Some(gamma)),
        };
        SvcModelFile {
            kernel,
            gamma,
            c: m.meta.hyperparams.c,
            bias: m.bias,
            support_vectors: m.support_vectors.clone(),
            coefficients: m.coefficients.clone(),
        }
    }
}

impl TryFrom<SvcModelFile> for SvcModel {
    type Error = SvcError;

    fn try_from(f: SvcModelFile) -> Result<Self, SvcError> {
        let kernel = match f.kernel.as_str() {
            "linear" => KernelSpec::Linear,
            "rbf" => KernelSpec::Rbf {
                gamma: f.gamma.ok_or_else(|| SvcError::ModelFile("rbf kernel without gamma".into()))?,
            },
            other => return Err(SvcError::ModelFile(format!("unknown kernel `{other}`"))),
        };
        kernel.validate()?;
        if f.support_vectors.len() != f.coefficients.len() {
            return Err(SvcError::ModelFile(
                "support vector and coefficient counts differ".into(),
            ));
        }
        if f.support_vectors.is_empty() {
            return Err(SvcError::ModelFile("model has no support vectors".into()));
        }
        let dim = f.support_vectors[0].len();
        if f.support_vectors.iter().any(|sv| sv.len() != dim) {
            return Err(SvcError::ModelFile("ragged support vectors".into()));
        }
        let mut hp = Hyperparams::for_dim(dim).with_kernel(kernel);
        hp.c = f.c;
        Ok(SvcModel {
            support_vectors: f.support_vectors,
            coefficients: f.coefficients,
            bias: f.bias,
            kernel,
            meta: TrainingMeta {
                hyperparams: hp,
                n_train: 0,
                dim,
                seed: 0,
                converged: true,
                steps: 0,
                epsilon_violations: 0,
            },
            solver_state: None,
        })
    }
}

/// Train a soft-margin classifier. `labels` must be `+1`/`-1` with both
/// classes present. The `seed` is recorded in the model metadata; the solver
/// itself is deterministic in the input order.
///
/// An exhausted step budget is not an error: the model is returned with
/// `meta.converged == false`.
pub fn train_svc(
    features: &[Vec<f64>],
    labels: &[f64],
    hp: &Hyperparams,
    seed: u64,
) -> Result<SvcModel, SvcError> {
    hp.validate()?;
    if features.len() < 2 {
        return Err(SvcError::TooFewPoints(features.len()));
    }
    if features.len() != labels.len() {
        return Err(SvcError::DimensionMismatch(features.len(), labels.len()));
    }
    let dim = features[0].len();
    for x in features {
        if x.len() != dim {
            return Err(SvcError::DimensionMismatch(x.len(), dim));
        }
    }
    for &y in labels {
        if y != 1.0 && y != -1.0 {
            return Err(SvcError::InvalidLabel(y));
        }
    }
    let has_pos = labels.iter().any(|&y| y > 0.0);
    let has_neg = labels.iter().any(|&y| y < 0.0);
    if !has_pos || !has_neg {
        return Err(SvcError::DegenerateLabels);
    }

    let n = features.len();
    let kernel = hp.kernel;
    // Dense kernel matrix; populations in this workspace stay small enough
    // that the O(n^2) storage is the simplest correct cache.
    let mut k = vec![0.0_f64; n * n];
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval_unchecked(&features[i], &features[j]);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    let kij = |i: usize, j: usize| k[i * n + j];

    let c = hp.c;
    let tol = hp.kkt_tol;
    let mut alphas = vec![0.0_f64; n];
    let mut bias = 0.0_f64;
    // Error cache E_k = f(x_k) - y_k; with all alphas at zero f == 0.
    let mut errors: Vec<f64> = labels.iter().map(|&y| -y).collect();

    // Maximal-violating-pair selection over the classic up/down index sets:
    // a pair (i in up, j in down) violates the KKT conditions iff
    // E_j - E_i > tol, and the maximal violating pair is the (min-E up,
    // max-E down) pair, which also maximizes |E_i - E_j| among violators.
    // Ties break to the lowest index; the bias term cancels in E
    // differences, so selection is independent of it. Multipliers within
    // `zeta` of a box bound count as at the bound, otherwise rounding can
    // leave a one-ulp zombie that gets selected but cannot move.
    let zeta = c * 1e-12;
    let in_up = |alphas: &[f64], t: usize| {
        (labels[t] > 0.0 && alphas[t] < c - zeta) || (labels[t] < 0.0 && alphas[t] > zeta)
    };
    let in_down = |alphas: &[f64], t: usize| {
        (labels[t] < 0.0 && alphas[t] < c - zeta) || (labels[t] > 0.0 && alphas[t] > zeta)
    };

    let mut steps = 0_usize;
    let converged;

    loop {
        let mut i_best: Option<usize> = None;
        let mut e_min = f64::INFINITY;
        let mut j_best: Option<usize> = None;
        let mut e_max = f64::NEG_INFINITY;
        for (t, &e) in errors.iter().enumerate() {
            if in_up(&alphas, t) && e < e_min {
                e_min = e;
                i_best = Some(t);
            }
            if in_down(&alphas, t) && e > e_max {
                e_max = e;
                j_best = Some(t);
            }
        }
        let (Some(i), Some(j)) = (i_best, j_best) else {
            // One of the sets emptied; nothing movable remains.
            converged = true;
            break;
        };
        if e_max - e_min <= tol {
            converged = true;
            break;
        }
        if !optimize_pair(i, j, labels, &mut alphas, &mut bias, &mut errors, c, &kij) {
            // A maximal violating pair that cannot move is a numerical
            // dead end; stop rather than spin.
            if std::env::var_os("SPECTC_SMO_TRACE").is_some() {
                let eta = kij(i, i) + kij(j, j) - 2.0 * kij(i, j);
                eprintln!(
                    "smo dead end: i={i} j={j} yi={} yj={} ai={} aj={} Ei={} Ej={} eta={eta}",
                    labels[i], labels[j], alphas[i], alphas[j], errors[i], errors[j]
                );
            }
            converged = false;
            break;
        }
        steps += 1;
        if steps >= hp.max_passes {
            let mut e_min2 = f64::INFINITY;
            let mut e_max2 = f64::NEG_INFINITY;
            for (t, &e) in errors.iter().enumerate() {
                if in_up(&alphas, t) {
                    e_min2 = e_min2.min(e);
                }
                if in_down(&alphas, t) {
                    e_max2 = e_max2.max(e);
                }
            }
            converged = e_max2 - e_min2 <= tol;
            break;
        }
    }

    // Assemble the model from the positive multipliers; the snap threshold
    // used inside the pair updates separates real support vectors from dust.
    let mut support_vectors = Vec::new();
    let mut coefficients = Vec::new();
    for idx in 0..n {
        if alphas[idx] > zeta {
            support_vectors.push(features[idx].clone());
            coefficients.push(alphas[idx] * labels[idx]);
        }
    }
    debug_assert!(!support_vectors.is_empty(), "both classes present implies support vectors");

    // Dual objective W(a) = sum a - 1/2 sum_ij a_i a_j y_i y_j K_ij.
    let mut quad = 0.0;
    for ii in 0..n {
        if alphas[ii] == 0.0 {
            continue;
        }
        for jj in 0..n {
            if alphas[jj] == 0.0 {
                continue;
            }
            quad += alphas[ii] * alphas[jj] * labels[ii] * labels[jj] * kij(ii, jj);
        }
    }
    let objective = alphas.iter().sum::<f64>() - 0.5 * quad;

    let slacks: Vec<f64> = (0..n)
        .map(|idx| {
            let f = errors[idx] + labels[idx];
            (labels[idx] - f).abs() - hp.epsilon
        })
        .map(|r| r.max(0.0))
        .collect();
    let epsilon_violations = slacks.iter().filter(|&&s| s > 0.0).count();

    Ok(SvcModel {
        support_vectors,
        coefficients,
        bias,
        kernel,
        meta: TrainingMeta {
            hyperparams: hp.clone(),
            n_train: n,
            dim,
            seed,
            converged,
            steps,
            epsilon_violations,
        },
        solver_state: Some(SolverState { alphas, bias, slacks, objective }),
    })
}

/// One SMO pair update. Returns true when the pair moved.
#[allow(clippy::too_many_arguments)]
fn optimize_pair(
    i: usize,
    j: usize,
    labels: &[f64],
    alphas: &mut [f64],
    bias: &mut f64,
    errors: &mut [f64],
    c: f64,
    kij: &impl Fn(usize, usize) -> f64,
) -> bool {
    let (yi, yj) = (labels[i], labels[j]);
    let (ai_old, aj_old) = (alphas[i], alphas[j]);
    let s = yi * yj;
    let (lo, hi) = if yi != yj {
        ((aj_old - ai_old).max(0.0), (c + aj_old - ai_old).min(c))
    } else {
        ((ai_old + aj_old - c).max(0.0), (ai_old + aj_old).min(c))
    };
    if lo >= hi {
        return false;
    }
    let (kii, kjj, kxx) = (kij(i, i), kij(j, j), kij(i, j));
    let eta = kii + kjj - 2.0 * kxx;
    let mut aj = if eta > 0.0 {
        (aj_old + yj * (errors[i] - errors[j]) / eta).clamp(lo, hi)
    } else {
        // Flat or concave direction: the pair objective is linear along the
        // constraint segment; move to the better endpoint if one is
        // strictly better.
        let f1 = yi * (errors[i] + labels[i]) - ai_old * kii - s * aj_old * kxx;
        let f2 = yj * (errors[j] + labels[j]) - s * ai_old * kxx - aj_old * kjj;
        let obj_at = |a2: f64| {
            let a1 = ai_old + s * (aj_old - a2);
            a1 * f1 + a2 * f2 + 0.5 * a1 * a1 * kii + 0.5 * a2 * a2 * kjj + s * a1 * a2 * kxx
        };
        let (olo, ohi) = (obj_at(lo), obj_at(hi));
        if olo < ohi - 1e-12 {
            lo
        } else if ohi < olo - 1e-12 {
            hi
        } else {
            return false;
        }
    };
    // Snap to the segment endpoints, then derive the partner from the pair
    // constraint and snap it to the box; this keeps rounding from leaving
    // near-bound dust multipliers behind.
    let snap = 1e-12 * c;
    if aj - lo < snap {
        aj = lo;
    } else if hi - aj < snap {
        aj = hi;
    }
    if aj == aj_old {
        return false;
    }
    let mut ai = ai_old + s * (aj_old - aj);
    if ai < snap {
        ai = 0.0;
    } else if ai > c - snap {
        ai = c;
    }
    alphas[i] = ai;
    alphas[j] = aj;

    let di = yi * (ai - ai_old);
    let dj = yj * (aj - aj_old);
    let b_old = *bias;
    let b1 = b_old - errors[i] - di * kij(i, i) - dj * kij(i, j);
    let b2 = b_old - errors[j] - di * kij(i, j) - dj * kij(j, j);
    let b_new = if ai > 0.0 && ai < c {
        b1
    } else if aj > 0.0 && aj < c {
        b2
    } else {
        0.5 * (b1 + b2)
    };
    *bias = b_new;
    let db = b_new - b_old;
    for (t, e) in errors.iter_mut().enumerate() {
        *e += di * kij(i, t) + dj * kij(j, t) + db;
    }
    true
}
