//! Greedy specification-test elimination.
//!
//! Starting from the complete specification set, candidates are examined in a
//! configured order, exactly once each. For every candidate a guard-band
//! model is trained to predict the joint pass/fail of the whole accumulated
//! eliminated set from the remaining specifications; the candidate is
//! accepted (permanently eliminated) when the prediction error `e_p` on the
//! held-out test population stays within the user tolerance `e_T`, otherwise
//! it returns to the retained set. The last remaining specification is never
//! eliminated.
//!
//! `e_p`, yield loss and defect escape count confident predictions only:
//! guard-band devices are routed to retest, so they appear in the guard
//! fraction and nowhere else. Denominators are total evaluated instances.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datamodel::{DataError, Dataset, Label, LabelVector};
use crate::grid::{compact_training_data, GridError, GridSpec};
use crate::guardband::{train_guard_band, GuardBandError, GuardBandModel, TriState};
use crate::rng;
use crate::svc::{train_svc, Hyperparams, KernelSpec, SvcError};

#[derive(Debug, Error)]
pub enum CompactError {
    #[error("tolerance e_T = {0} must lie in [0, 1]")]
    InvalidTolerance(f64),
    #[error("unknown specification `{0}` in the ordering")]
    UnknownSpecName(String),
    #[error("duplicate specification `{0}` in the ordering")]
    DuplicateOrderName(String),
    #[error("retained specification set would be empty")]
    EmptyRetainedSet,
    #[error("eliminated specification set is empty")]
    EmptyEliminatedSet,
    #[error("train and test datasets carry different specification sets")]
    SpecSetMismatch,
    #[error("datasets must be normalized before compaction")]
    NotNormalized,
    #[error("truth has {truth} labels but {preds} predictions were given")]
    LengthMismatch { truth: usize, preds: usize },
    #[error("invalid counts: {0}")]
    InvalidCounts(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Svc(#[from] SvcError),
    #[error(transparent)]
    GuardBand(#[from] GuardBandError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Candidate examination order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderingStrategy {
    /// Examine exactly the named specifications, in this order (a domain
    /// expert's choice). Specifications not listed are never examined.
    FixedList(Vec<String>),
    /// Most predictable first: each specification is scored by the held-out
    /// error of a single-spec predictor trained on all other specifications;
    /// ties break by specification-set order.
    MarginalScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactionConfig {
    /// Prediction-error tolerance, fraction of evaluated instances.
    pub e_t: f64,
    /// Guard-band half-width in normalized range units.
    pub delta: f64,
    pub hp: Hyperparams,
    /// When true (the default) and the kernel is radial, gamma is re-derived
    /// as `1/dim` for the feature dimension of each training, tracking the
    /// shrinking retained set.
    pub auto_gamma: bool,
    pub ordering: OrderingStrategy,
    /// Optional training-data grid compaction applied before each training.
    pub grid: Option<GridSpec>,
    pub seed: u64,
}

impl CompactionConfig {
    pub fn new(e_t: f64, delta: f64, seed: u64) -> Self {
        CompactionConfig {
            e_t,
            delta,
            hp: Hyperparams::for_dim(1),
            auto_gamma: true,
            ordering: OrderingStrategy::MarginalScore,
            grid: None,
            seed,
        }
    }

    pub fn with_ordering(mut self, ordering: OrderingStrategy) -> Self {
        self.ordering = ordering;
        self
    }

    pub fn validate(&self) -> Result<(), CompactError> {
        if !(0.0..=1.0).contains(&self.e_t) || !self.e_t.is_finite() {
            return Err(CompactError::InvalidTolerance(self.e_t));
        }
        self.hp.validate()?;
        Ok(())
    }

    fn hp_for_dim(&self, dim: usize) -> Hyperparams {
        let mut hp = self.hp.clone();
        if self.auto_gamma {
            if let KernelSpec::Rbf { .. } = hp.kernel {
                hp.kernel = KernelSpec::rbf_for_dim(dim);
            }
        }
        hp
    }
}

/// Confusion summary of one evaluation, percentages of all evaluated
/// instances. Guard-band devices are excluded from the error numerators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    /// `(yield-loss count + defect-escape count) / n_eval`.
    pub e_p: f64,
    pub yield_loss_pct: f64,
    pub defect_escape_pct: f64,
    pub guard_pct: f64,
    pub n_eval: usize,
    pub n_yield_loss: usize,
    pub n_defect_escape: usize,
    pub n_guard: usize,
    pub n_confident_correct: usize,
}

/// One examined candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub candidate: String,
    pub accepted: bool,
    /// Feature dimension the step's model was trained on.
    pub n_retained: usize,
    #[serde(flatten)]
    pub metrics: MetricsSummary,
}

/// Outcome of a compaction run.
#[derive(Debug, Clone)]
pub struct CompactionResult {
    /// Surviving specifications, in specification-set order.
    pub retained: Vec<String>,
    /// Eliminated specifications, in acceptance order.
    pub eliminated: Vec<String>,
    /// Guard-band model predicting the joint pass/fail of `eliminated`;
    /// `None` when nothing was eliminated.
    pub final_model: Option<GuardBandModel>,
    /// Every examined candidate, including rejections.
    pub history: Vec<StepMetrics>,
}

/// Compare tri-state predictions against pass/fail truth.
///
/// Yield loss counts truth-Pass devices predicted Bad, defect escape counts
/// truth-Fail devices predicted Good; guard-band predictions join neither
/// numerator. All percentages are over the full evaluation count.
pub fn compute_metrics(
    truth: &LabelVector,
    predictions: &[TriState],
) -> Result<MetricsSummary, CompactError> {
    if truth.len() != predictions.len() {
        return Err(CompactError::LengthMismatch { truth: truth.len(), preds: predictions.len() });
    }
    let n = truth.len();
    let mut n_yl = 0usize;
    let mut n_de = 0usize;
    let mut n_guard = 0usize;
    let mut n_ok = 0usize;
    for (t, p) in truth.labels().iter().zip(predictions) {
        match (t, p) {
            (_, TriState::GuardBand) => n_guard += 1,
            (Label::Pass, TriState::Bad) => n_yl += 1,
            (Label::Fail, TriState::Good) => n_de += 1,
            _ => n_ok += 1,
        }
    }
    debug_assert_eq!(n_ok + n_yl + n_de + n_guard, n);
    let pct = |k: usize| if n == 0 { 0.0 } else { 100.0 * k as f64 / n as f64 };
    Ok(MetricsSummary {
        e_p: if n == 0 { 0.0 } else { (n_yl + n_de) as f64 / n as f64 },
        yield_loss_pct: pct(n_yl),
        defect_escape_pct: pct(n_de),
        guard_pct: pct(n_guard),
        n_eval: n,
        n_yield_loss: n_yl,
        n_defect_escape: n_de,
        n_guard,
        n_confident_correct: n_ok,
    })
}

/// Decide the candidate examination order.
///
/// `FixedList` is returned verbatim after validation. `MarginalScore` holds
/// out a quarter of the training data, trains one single-spec predictor per
/// specification from all other specifications and sorts ascending by
/// held-out misclassification (most predictable first); a specification
/// whose labels are single-class scores the error of the constant predictor.
pub fn order_tests(
    train: &Dataset,
    strategy: &OrderingStrategy,
    hp: &Hyperparams,
    auto_gamma: bool,
    seed: u64,
) -> Result<Vec<String>, CompactError> {
    let all = train.spec_names();
    match strategy {
        OrderingStrategy::FixedList(names) => {
            let mut seen = Vec::new();
            for name in names {
                if !all.contains(name) {
                    return Err(CompactError::UnknownSpecName(name.clone()));
                }
                if seen.contains(&name) {
                    return Err(CompactError::DuplicateOrderName(name.clone()));
                }
                seen.push(name);
            }
            Ok(names.clone())
        }
        OrderingStrategy::MarginalScore => {
            let (fit, hold) = train.split(0.75, rng::derive(seed, 101))?;
            let mut scored: Vec<(f64, usize, String)> = Vec::with_capacity(all.len());
            for (i, name) in all.iter().enumerate() {
                let others: Vec<String> =
                    all.iter().filter(|n| *n != name).cloned().collect();
                let err = single_spec_error(&fit, &hold, name, &others, hp, auto_gamma, seed, i)?;
                scored.push((err, i, name.clone()));
            }
            scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            Ok(scored.into_iter().map(|(_, _, n)| n).collect())
        }
    }
}

/// Held-out misclassification of a plain classifier predicting one
/// specification's pass/fail from the others.
#[allow(clippy::too_many_arguments)]
fn single_spec_error(
    fit: &Dataset,
    hold: &Dataset,
    name: &str,
    others: &[String],
    hp: &Hyperparams,
    auto_gamma: bool,
    seed: u64,
    index: usize,
) -> Result<f64, CompactError> {
    let fit_labels = fit.label_pass_fail(&[name])?;
    let hold_labels = hold.label_pass_fail(&[name])?;
    if hold.is_empty() {
        return Ok(0.0);
    }
    let pass = fit_labels.pass_count();
    if pass == 0 || pass == fit_labels.len() {
        // Constant predictor of the single observed class.
        let constant = if pass == 0 { Label::Fail } else { Label::Pass };
        let wrong = hold_labels.labels().iter().filter(|l| **l != constant).count();
        return Ok(wrong as f64 / hold_labels.len() as f64);
    }
    let mut hp = hp.clone();
    if auto_gamma {
        if let KernelSpec::Rbf { .. } = hp.kernel {
            hp.kernel = KernelSpec::rbf_for_dim(others.len());
        }
    }
    let features = fit.feature_matrix(others)?;
    let model = train_svc(&features, &fit_labels.signs(), &hp, rng::derive(seed, 200 + index as u64))?;
    let hold_features = hold.feature_matrix(others)?;
    let mut wrong = 0usize;
    for (x, want) in hold_features.iter().zip(hold_labels.labels()) {
        let got = model.predict(x)?;
        if (got > 0) != (*want == Label::Pass) {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / hold_labels.len() as f64)
}

/// Train a guard-band model for the given retained/eliminated split and
/// measure it on the held-out test population.
///
/// The step trains on `train` (grid-compacted first when configured),
/// predicts the joint pass/fail of all of `s_red`, and reports metrics over
/// `test`. The reported candidate is the most recent addition to `s_red`.
pub fn evaluate_candidate(
    train: &Dataset,
    test: &Dataset,
    retained: &[String],
    s_red: &[String],
    cfg: &CompactionConfig,
) -> Result<(GuardBandModel, StepMetrics), CompactError> {
    cfg.validate()?;
    if retained.is_empty() {
        return Err(CompactError::EmptyRetainedSet);
    }
    if s_red.is_empty() {
        return Err(CompactError::EmptyEliminatedSet);
    }
    if !train.is_normalized() || !test.is_normalized() {
        return Err(CompactError::NotNormalized);
    }
    let candidate = s_red.last().expect("nonempty").clone();

    let compacted;
    let train_ds: &Dataset = match &cfg.grid {
        Some(grid) => {
            let labels = train.label_pass_fail(s_red)?;
            compacted = compact_training_data(train, &labels, grid)?;
            &compacted.dataset
        }
        None => train,
    };

    let hp = cfg.hp_for_dim(retained.len());
    let gb = train_guard_band(
        train_ds,
        retained,
        s_red,
        cfg.delta,
        &hp,
        rng::derive(cfg.seed, 300 + s_red.len() as u64),
    )?;

    let truth = test.label_pass_fail(s_red)?;
    let features = test.feature_matrix(retained)?;
    let predictions = gb.classify_all(&features)?;
    let metrics = compute_metrics(&truth, &predictions)?;
    Ok((gb, StepMetrics { candidate, accepted: false, n_retained: retained.len(), metrics }))
}

/// Run the greedy elimination loop.
///
/// Candidates are examined once each in the configured order. An accepted
/// candidate joins the eliminated set, so later candidates are evaluated
/// against the joint pass/fail of everything eliminated so far; a rejected
/// candidate stays retained. A candidate whose elimination would empty the
/// retained set is skipped without evaluation (a tester must keep at least
/// one measurement). A candidate whose perturbed training labels collapse to
/// a single class is recorded as rejected, with the metrics of the matching
/// constant prediction.
pub fn compact(
    train: &Dataset,
    test: &Dataset,
    cfg: &CompactionConfig,
) -> Result<CompactionResult, CompactError> {
    cfg.validate()?;
    if train.spec_names() != test.spec_names() {
        return Err(CompactError::SpecSetMismatch);
    }
    if !train.is_normalized() || !test.is_normalized() {
        return Err(CompactError::NotNormalized);
    }
    let order = order_tests(train, &cfg.ordering, &cfg.hp, cfg.auto_gamma, cfg.seed)?;

    let all = train.spec_names();
    let mut retained = all.clone();
    let mut eliminated: Vec<String> = Vec::new();
    let mut final_model: Option<GuardBandModel> = None;
    let mut history: Vec<StepMetrics> = Vec::new();

    for candidate in order {
        if retained.len() == 1 {
            // Eliminating the final measurement would leave the tester blind.
            continue;
        }
        let retained_trial: Vec<String> =
            retained.iter().filter(|n| **n != candidate).cloned().collect();
        let mut s_red_trial = eliminated.clone();
        s_red_trial.push(candidate.clone());

        match evaluate_candidate(train, test, &retained_trial, &s_red_trial, cfg) {
            Ok((model, mut step)) => {
                step.accepted = step.metrics.e_p <= cfg.e_t;
                if step.accepted {
                    retained = retained_trial;
                    eliminated = s_red_trial;
                    final_model = Some(model);
                }
                history.push(step);
            }
            Err(CompactError::GuardBand(GuardBandError::DegenerateLabels { all_pass, .. })) => {
                // No trainable boundary. Score the constant prediction
                // honestly but keep the candidate: a model that cannot see
                // both classes has no guard band to offer.
                let truth = test.label_pass_fail(&s_red_trial)?;
                let constant =
                    if all_pass { TriState::Good } else { TriState::Bad };
                let predictions = vec![constant; test.len()];
                let metrics = compute_metrics(&truth, &predictions)?;
                history.push(StepMetrics {
                    candidate,
                    accepted: false,
                    n_retained: retained_trial.len(),
                    metrics,
                });
            }
            Err(other) => return Err(other),
        }
    }

    let retained_ordered: Vec<String> =
        all.into_iter().filter(|n| retained.contains(n)).collect();
    Ok(CompactionResult { retained: retained_ordered, eliminated, final_model, history })
}

/// Staged retest cost model.
///
/// Baseline flow: every device runs stage 1 and the `n_pass_stage1` devices
/// that pass continue through the remaining `stages - 1` stages. Compacted
/// flow: every device runs stage 1 only, except the `n_guard` guard-band
/// devices which run all `stages` stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub baseline_cost: f64,
    pub compacted_cost: f64,
    pub savings_pct: f64,
}

pub fn cost_savings(
    n_devices: usize,
    n_guard: usize,
    n_pass_stage1: usize,
    stages: u32,
    per_stage_cost: f64,
) -> Result<CostReport, CompactError> {
    if n_guard > n_devices {
        return Err(CompactError::InvalidCounts(format!(
            "n_guard {n_guard} exceeds n_devices {n_devices}"
        )));
    }
    if n_pass_stage1 > n_devices {
        return Err(CompactError::InvalidCounts(format!(
            "n_pass_stage1 {n_pass_stage1} exceeds n_devices {n_devices}"
        )));
    }
    if stages == 0 {
        return Err(CompactError::InvalidCounts("stages must be >= 1".into()));
    }
    if !(per_stage_cost >= 0.0) {
        return Err(CompactError::InvalidCounts("per_stage_cost must be >= 0".into()));
    }
    let c = per_stage_cost;
    let compacted = (n_devices - n_guard) as f64 * c + n_guard as f64 * stages as f64 * c;
    let baseline = n_devices as f64 * c + n_pass_stage1 as f64 * (stages - 1) as f64 * c;
    let savings_pct = if baseline > 0.0 { 100.0 * (1.0 - compacted / baseline) } else { 0.0 };
    Ok(CostReport { baseline_cost: baseline, compacted_cost: compacted, savings_pct })
}

/// Machine-readable run report (config echo, step series and outcome).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompactionReport {
    pub config: CompactionConfig,
    pub retained: Vec<String>,
    pub eliminated: Vec<String>,
    pub steps: Vec<StepMetrics>,
    pub cost: Option<CostReport>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syngen::{generate_planted, GeneratorConfig};

    fn planted_pair(n_train: usize, n_test: usize, seed: u64) -> (Dataset, Dataset) {
        let mut cfg = GeneratorConfig::planted(n_train + n_test, seed);
        cfg.noise_scale = 0.005;
        let (ds, _) = generate_planted(&cfg).unwrap();
        let norm = ds.normalize().unwrap();
        let (train, test) = norm.split_count(n_train, rng::derive(seed, 1)).unwrap();
        (train, test)
    }

    #[test]
    fn metrics_match_reference_counts() {
        // 1000 devices, 2 escapes, 1 loss, 84 guarded: 0.2 / 0.1 / 8.4.
        let mut labels = Vec::new();
        let mut preds = Vec::new();
        for _ in 0..2 {
            labels.push(Label::Fail);
            preds.push(TriState::Good);
        }
        labels.push(Label::Pass);
        preds.push(TriState::Bad);
        for _ in 0..84 {
            labels.push(Label::Pass);
            preds.push(TriState::GuardBand);
        }
        while labels.len() < 1000 {
            labels.push(Label::Pass);
            preds.push(TriState::Good);
        }
        let truth = LabelVector::new(vec!["x".into()], labels);
        let m = compute_metrics(&truth, &preds).unwrap();
        assert!((m.defect_escape_pct - 0.2).abs() < 1e-12);
        assert!((m.yield_loss_pct - 0.1).abs() < 1e-12);
        assert!((m.guard_pct - 8.4).abs() < 1e-12);
        assert!((m.e_p - 0.003).abs() < 1e-12);
        assert_eq!(m.n_confident_correct + m.n_yield_loss + m.n_defect_escape + m.n_guard, 1000);
    }

    #[test]
    fn all_correct_confident_is_zero_everywhere() {
        let truth = LabelVector::new(vec!["x".into()], vec![Label::Pass, Label::Fail]);
        let m = compute_metrics(&truth, &[TriState::Good, TriState::Bad]).unwrap();
        assert_eq!((m.yield_loss_pct, m.defect_escape_pct, m.guard_pct), (0.0, 0.0, 0.0));
    }

    #[test]
    fn all_guard_band_is_pure_guard_fraction() {
        let truth = LabelVector::new(vec!["x".into()], vec![Label::Pass, Label::Fail]);
        let m = compute_metrics(&truth, &[TriState::GuardBand, TriState::GuardBand]).unwrap();
        assert_eq!((m.yield_loss_pct, m.defect_escape_pct, m.guard_pct), (0.0, 0.0, 100.0));
        assert_eq!(m.e_p, 0.0);
    }

    #[test]
    fn metrics_length_mismatch_is_rejected() {
        let truth = LabelVector::new(vec!["x".into()], vec![Label::Pass]);
        assert!(matches!(
            compute_metrics(&truth, &[]),
            Err(CompactError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn reference_cost_arithmetic() {
        let r = cost_savings(1000, 84, 774, 3, 1.0).unwrap();
        assert_eq!(r.baseline_cost, 2548.0);
        assert_eq!(r.compacted_cost, 1168.0);
        assert!((r.savings_pct - 54.16).abs() < 0.01);
    }

    #[test]
    fn no_guard_single_stage_costs_match() {
        let r = cost_savings(500, 0, 400, 1, 2.5).unwrap();
        assert_eq!(r.baseline_cost, r.compacted_cost);
        assert_eq!(r.savings_pct, 0.0);
    }

    #[test]
    fn zero_cost_reports_zero_savings() {
        let r = cost_savings(100, 10, 80, 3, 0.0).unwrap();
        assert_eq!(r.baseline_cost, 0.0);
        assert_eq!(r.compacted_cost, 0.0);
        assert_eq!(r.savings_pct, 0.0);
    }

    #[test]
    fn invalid_counts_are_rejected() {
        assert!(matches!(cost_savings(10, 11, 5, 2, 1.0), Err(CompactError::InvalidCounts(_))));
        assert!(matches!(cost_savings(10, 1, 11, 2, 1.0), Err(CompactError::InvalidCounts(_))));
        assert!(matches!(cost_savings(10, 1, 5, 0, 1.0), Err(CompactError::InvalidCounts(_))));
    }

    #[test]
    fn fixed_list_order_is_identity() {
        let (train, _) = planted_pair(60, 20, 3);
        let order = order_tests(
            &train,
            &OrderingStrategy::FixedList(vec!["s3".into(), "s1".into()]),
            &Hyperparams::for_dim(3),
            true,
            1,
        )
        .unwrap();
        assert_eq!(order, vec!["s3".to_string(), "s1".to_string()]);
    }

    #[test]
    fn fixed_list_rejects_unknown_and_duplicate_names() {
        let (train, _) = planted_pair(40, 10, 3);
        assert!(matches!(
            order_tests(
                &train,
                &OrderingStrategy::FixedList(vec!["nope".into()]),
                &Hyperparams::for_dim(3),
                true,
                1
            ),
            Err(CompactError::UnknownSpecName(_))
        ));
        assert!(matches!(
            order_tests(
                &train,
                &OrderingStrategy::FixedList(vec!["s1".into(), "s1".into()]),
                &Hyperparams::for_dim(3),
                true,
                1
            ),
            Err(CompactError::DuplicateOrderName(_))
        ));
    }

    #[test]
    fn marginal_score_ranks_planted_spec_before_noise_spec() {
        let (train, _) = planted_pair(600, 1, 7);
        let order = order_tests(
            &train,
            &OrderingStrategy::MarginalScore,
            &Hyperparams::for_dim(3),
            true,
            7,
        )
        .unwrap();
        let pos = |n: &str| order.iter().position(|x| x == n).unwrap();
        // s3 = (s1+s2)/2 is near-perfectly predictable; s4 is independent.
        assert!(pos("s3") < pos("s4"), "order: {order:?}");
    }

    #[test]
    fn marginal_score_ties_break_by_spec_order() {
        // Mirrored coordinates: predicting either from the other is the
        // same problem, so their held-out errors are identical and the
        // specification-set order decides.
        use crate::datamodel::{DeviceRecord, SpecificationDef};
        use crate::rng::Rng;
        let specs = vec![
            SpecificationDef::new("m1", "-", 0.5, 0.25, 0.75).unwrap(),
            SpecificationDef::new("m2", "-", 0.5, 0.25, 0.75).unwrap(),
        ];
        let mut rng = Rng::new(31);
        let records: Vec<DeviceRecord> = (0..200)
            .map(|i| {
                let v = 0.5 + 0.3 * rng.symmetric();
                DeviceRecord::new(format!("d{i}"), vec![v, v])
            })
            .collect();
        let ds = Dataset::new(specs, records).unwrap().normalize().unwrap();
        let order =
            order_tests(&ds, &OrderingStrategy::MarginalScore, &Hyperparams::for_dim(1), true, 3)
                .unwrap();
        assert_eq!(order, vec!["m1".to_string(), "m2".to_string()]);
    }

    #[test]
    fn planted_run_eliminates_exactly_the_dependent_spec() {
        let (train, test) = planted_pair(1200, 600, 11);
        let cfg = CompactionConfig::new(0.02, 0.01, 11).with_ordering(OrderingStrategy::FixedList(
            vec!["s3".into(), "s1".into(), "s2".into(), "s4".into()],
        ));
        let result = compact(&train, &test, &cfg).unwrap();
        assert_eq!(result.eliminated, vec!["s3".to_string()]);
        assert_eq!(result.retained, vec!["s1".to_string(), "s2".to_string(), "s4".to_string()]);
        assert!(result.final_model.is_some());
        assert_eq!(result.history.len(), 4);
        assert!(result.history[0].accepted);
        for step in &result.history[1..] {
            assert!(!step.accepted, "{} should be rejected", step.candidate);
        }
    }

    #[test]
    fn zero_tolerance_rejects_imperfect_candidates() {
        let (train, test) = planted_pair(300, 300, 13);
        // s4 is independent noise; at e_T = 0 it can never be accepted.
        let cfg = CompactionConfig::new(0.0, 0.01, 13)
            .with_ordering(OrderingStrategy::FixedList(vec!["s4".into()]));
        let result = compact(&train, &test, &cfg).unwrap();
        assert!(result.eliminated.is_empty());
        assert!(result.final_model.is_none());
        assert_eq!(result.history.len(), 1);
        assert!(!result.history[0].accepted);
        assert!(result.history[0].metrics.e_p > 0.0);
    }

    #[test]
    fn partition_invariant_holds() {
        let (train, test) = planted_pair(400, 200, 17);
        let cfg = CompactionConfig::new(0.05, 0.01, 17);
        let result = compact(&train, &test, &cfg).unwrap();
        let mut union = result.retained.clone();
        union.extend(result.eliminated.clone());
        union.sort();
        let mut all = train.spec_names();
        all.sort();
        assert_eq!(union, all);
        for step in &result.history {
            if step.accepted {
                assert!(step.metrics.e_p <= cfg.e_t);
                assert!(result.eliminated.contains(&step.candidate));
            }
        }
    }

    #[test]
    fn determinism_of_full_runs() {
        let (train, test) = planted_pair(250, 120, 19);
        let cfg = CompactionConfig::new(0.05, 0.02, 19);
        let a = compact(&train, &test, &cfg).unwrap();
        let b = compact(&train, &test, &cfg).unwrap();
        assert_eq!(a.retained, b.retained);
        assert_eq!(a.eliminated, b.eliminated);
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn last_remaining_spec_is_never_eliminated() {
        // Two perfectly redundant coordinates: s_b mirrors s_a exactly, so
        // whichever is examined first is eliminated and the survivor must be
        // kept even though it is equally predictable.
        use crate::datamodel::{DeviceRecord, SpecificationDef};
        use crate::rng::Rng;
        let specs = vec![
            SpecificationDef::new("s_a", "-", 0.5, 0.25, 0.75).unwrap(),
            SpecificationDef::new("s_b", "-", 0.5, 0.25, 0.75).unwrap(),
        ];
        let mut rng = Rng::new(23);
        let records: Vec<DeviceRecord> = (0..300)
            .map(|i| {
                let v = 0.5 + 0.3 * rng.symmetric();
                DeviceRecord::new(format!("d{i}"), vec![v, v])
            })
            .collect();
        let ds = Dataset::new(specs, records).unwrap().normalize().unwrap();
        let (train, test) = ds.split(0.5, 23).unwrap();
        let cfg = CompactionConfig::new(0.05, 0.0, 23).with_ordering(OrderingStrategy::FixedList(
            vec!["s_a".into(), "s_b".into()],
        ));
        let result = compact(&train, &test, &cfg).unwrap();
        assert_eq!(result.eliminated, vec!["s_a".to_string()]);
        assert_eq!(result.retained, vec!["s_b".to_string()]);
        // s_b was skipped, not examined: one history entry only.
        assert_eq!(result.history.len(), 1);
    }
}
