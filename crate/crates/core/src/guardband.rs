//! Dual-model guard-band classification.
//!
//! Two classifiers are trained from the same features but with the
//! acceptability boundaries of the predicted (eliminated) specifications
//! perturbed in opposite directions by `delta`: the tight model labels a
//! training device good only when every eliminated value lies in
//! `[delta, 1 - delta]` (normalized units), the loose model uses
//! `[-delta, 1 + delta]`. A device both models call good is confidently good;
//! one both call bad is confidently bad; disagreement lands in the guard band
//! and is routed to retest instead of receiving a verdict.

use std::thread;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datamodel::{Dataset, Label};
use crate::rng;
use crate::svc::{train_svc, Hyperparams, SvcError, SvcModel};

#[derive(Debug, Error)]
pub enum GuardBandError {
    #[error("retained specification set is empty")]
    EmptyRetainedSet,
    #[error("dataset must be normalized before guard-band training")]
    NotNormalized,
    #[error("specification `{0}` appears in both the retained and eliminated sets")]
    OverlappingSets(String),
    #[error("guard-band delta must be nonnegative and finite, got {0}")]
    InvalidDelta(f64),
    #[error("training labels for the {side} model contain a single class only")]
    DegenerateLabels { side: Side, all_pass: bool },
    #[error("feature vector has dimension {0}, model expects {1}")]
    DimensionMismatch(usize, usize),
    #[error("model file: {0}")]
    ModelFile(String),
    #[error(transparent)]
    Data(#[from] crate::datamodel::DataError),
    #[error(transparent)]
    Svc(#[from] SvcError),
}

/// Which of the two perturbed trainings failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Tight,
    Loose,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Tight => write!(f, "tight"),
            Side::Loose => write!(f, "loose"),
        }
    }
}

/// Three-way verdict of the guard-banded classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TriState {
    Good,
    Bad,
    GuardBand,
}

/// A pair of classifiers trained with boundaries perturbed by `delta` in
/// opposite directions, predicting the joint pass/fail of the eliminated
/// specifications from the retained-specification values.
#[derive(Debug, Clone, PartialEq)]
pub struct GuardBandModel {
    tight: SvcModel,
    loose: SvcModel,
    delta: f64,
    retained_specs: Vec<String>,
    eliminated_specs: Vec<String>,
}

impl GuardBandModel {
    pub fn tight(&self) -> &SvcModel {
        &self.tight
    }

    pub fn loose(&self) -> &SvcModel {
        &self.loose
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn retained_specs(&self) -> &[String] {
        &self.retained_specs
    }

    pub fn eliminated_specs(&self) -> &[String] {
        &self.eliminated_specs
    }

    pub fn dim(&self) -> usize {
        self.retained_specs.len()
    }

    /// Classify one device from its retained-specification values
    /// (normalized units, in `retained_specs` order).
    pub fn classify(&self, x: &[f64]) -> Result<TriState, GuardBandError> {
        if x.len() != self.dim() {
            return Err(GuardBandError::DimensionMismatch(x.len(), self.dim()));
        }
        let t = self.tight.predict(x)?;
        let l = self.loose.predict(x)?;
        Ok(match (t, l) {
            (1, 1) => TriState::Good,
            (-1, -1) => TriState::Bad,
            _ => TriState::GuardBand,
        })
    }

    /// Classify a whole feature matrix.
    pub fn classify_all(&self, xs: &[Vec<f64>]) -> Result<Vec<TriState>, GuardBandError> {
        xs.iter().map(|x| self.classify(x)).collect()
    }

    /// JSON wrapper embedding both sub-models plus `delta` and the
    /// specification name lists.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Wrapper<'a> {
            delta: f64,
            retained_specs: &'a [String],
            eliminated_specs: &'a [String],
            tight: serde_json::Value,
            loose: serde_json::Value,
        }
        let w = Wrapper {
            delta: self.delta,
            retained_specs: &self.retained_specs,
            eliminated_specs: &self.eliminated_specs,
            tight: serde_json::from_str(&self.tight.to_json()).expect("model json"),
            loose: serde_json::from_str(&self.loose.to_json()).expect("model json"),
        };
        serde_json::to_string_pretty(&w).expect("guard-band serialization")
    }

    pub fn from_json(json: &str) -> Result<Self, GuardBandError> {
        #[derive(Deserialize)]
        struct Wrapper {
            delta: f64,
            retained_specs: Vec<String>,
            eliminated_specs: Vec<String>,
            tight: serde_json::Value,
            loose: serde_json::Value,
        }
        let w: Wrapper =
            serde_json::from_str(json).map_err(|e| GuardBandError::ModelFile(e.to_string()))?;
        let tight = SvcModel::from_json(&w.tight.to_string())?;
        let loose = SvcModel::from_json(&w.loose.to_string())?;
        if tight.dim() != w.retained_specs.len() || loose.dim() != w.retained_specs.len() {
            return Err(GuardBandError::ModelFile(
                "sub-model dimensions disagree with the retained specification list".into(),
            ));
        }
        Ok(GuardBandModel {
            tight,
            loose,
            delta: w.delta,
            retained_specs: w.retained_specs,
            eliminated_specs: w.eliminated_specs,
        })
    }
}

/// Labels for the eliminated specifications with the pass region widened by
/// `-margin` (negative `margin` widens, positive shrinks): a device passes
/// iff every eliminated value lies in `[margin, 1 - margin]`.
pub fn perturbed_labels(
    ds: &Dataset,
    eliminated: &[String],
    margin: f64,
) -> Result<Vec<Label>, GuardBandError> {
    if !ds.is_normalized() {
        return Err(GuardBandError::NotNormalized);
    }
    let columns: Vec<Vec<f64>> = eliminated
        .iter()
        .map(|name| ds.values_of(name))
        .collect::<Result<_, _>>()?;
    let (lo, hi) = (margin, 1.0 - margin);
    Ok((0..ds.len())
        .map(|k| {
            let pass = columns.iter().all(|col| lo <= col[k] && col[k] <= hi);
            if pass {
                Label::Pass
            } else {
                Label::Fail
            }
        })
        .collect())
}

/// Train the dual guard-band model on a normalized dataset.
///
/// Features are the retained-specification values; the tight model is
/// trained on labels from ranges shrunk by `delta` on each side, the loose
/// model on ranges widened by `delta`. The two trainings are independent and
/// run concurrently.
pub fn train_guard_band(
    train: &Dataset,
    retained: &[String],
    eliminated: &[String],
    delta: f64,
    hp: &Hyperparams,
    seed: u64,
) -> Result<GuardBandModel, GuardBandError> {
    if retained.is_empty() {
        return Err(GuardBandError::EmptyRetainedSet);
    }
    if !train.is_normalized() {
        return Err(GuardBandError::NotNormalized);
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(GuardBandError::InvalidDelta(delta));
    }
    for name in retained {
        if eliminated.contains(name) {
            return Err(GuardBandError::OverlappingSets(name.clone()));
        }
    }

    let features = train.feature_matrix(retained)?;
    let tight_labels = perturbed_labels(train, eliminated, delta)?;
    let loose_labels = perturbed_labels(train, eliminated, -delta)?;

    // Shrinking ranges can only flip Pass to Fail, so tight-Pass must be a
    // subset of loose-Pass on the training data.
    debug_assert!(tight_labels
        .iter()
        .zip(&loose_labels)
        .all(|(t, l)| !(t == &Label::Pass && l == &Label::Fail)));

    check_two_classes(&tight_labels, Side::Tight)?;
    check_two_classes(&loose_labels, Side::Loose)?;

    let tight_signs: Vec<f64> = tight_labels.iter().map(|l| l.sign()).collect();
    let loose_signs: Vec<f64> = loose_labels.iter().map(|l| l.sign()).collect();
    let tight_seed = rng::derive(seed, 0);
    let loose_seed = rng::derive(seed, 1);

    let (tight, loose) = thread::scope(|s| {
        let t = s.spawn(|| train_svc(&features, &tight_signs, hp, tight_seed));
        let l = s.spawn(|| train_svc(&features, &loose_signs, hp, loose_seed));
        (t.join().expect("tight training"), l.join().expect("loose training"))
    });

    Ok(GuardBandModel {
        tight: tight?,
        loose: loose?,
        delta,
        retained_specs: retained.to_vec(),
        eliminated_specs: eliminated.to_vec(),
    })
}


fn check_two_classes(labels: &[Label], side: Side) -> Result<(), GuardBandError> {
    let pass = labels.iter().filter(|l| **l == Label::Pass).count();
    if pass == 0 || pass == labels.len() {
        return Err(GuardBandError::DegenerateLabels { side, all_pass: pass == labels.len() });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{DeviceRecord, SpecificationDef};
    use crate::rng::Rng;

    /// Tiny planted population: s3 tracks the mean of s1 and s2, so a model
    /// over (s1, s2) can predict the pass/fail of s3.
    fn planted_dataset(n: usize, seed: u64) -> Dataset {
        let specs = vec![
            SpecificationDef::new("s1", "-", 0.5, 0.25, 0.75).unwrap(),
            SpecificationDef::new("s2", "-", 0.5, 0.25, 0.75).unwrap(),
            SpecificationDef::new("s3", "-", 0.5, 0.25, 0.75).unwrap(),
        ];
        let mut rng = Rng::new(seed);
        let records = (0..n)
            .map(|i| {
                let s1 = 0.5 + 0.3 * rng.symmetric();
                let s2 = 0.5 + 0.3 * rng.symmetric();
                let s3 = 0.5 * (s1 + s2);
                DeviceRecord::new(format!("d{i}"), vec![s1, s2, s3])
            })
            .collect();
        Dataset::new(specs, records).unwrap().normalize().unwrap()
    }

    fn names(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn zero_delta_trains_identical_models() {
        let ds = planted_dataset(200, 11);
        let hp = Hyperparams::for_dim(2);
        let gb =
            train_guard_band(&ds, &names(&["s1", "s2"]), &names(&["s3"]), 0.0, &hp, 3).unwrap();
        assert_eq!(gb.tight().coefficients(), gb.loose().coefficients());
        assert_eq!(gb.tight().bias(), gb.loose().bias());
        // Identical sub-models can never disagree.
        let mut rng = Rng::new(5);
        for _ in 0..500 {
            let x = vec![rng.uniform(-0.3, 1.3), rng.uniform(-0.3, 1.3)];
            assert_ne!(gb.classify(&x).unwrap(), TriState::GuardBand);
        }
    }

    #[test]
    fn classify_matches_sub_model_votes() {
        let ds = planted_dataset(300, 17);
        let hp = Hyperparams::for_dim(2);
        let gb =
            train_guard_band(&ds, &names(&["s1", "s2"]), &names(&["s3"]), 0.05, &hp, 3).unwrap();
        let mut rng = Rng::new(23);
        let mut seen_guard = false;
        for _ in 0..2000 {
            let x = vec![rng.uniform(-0.3, 1.3), rng.uniform(-0.3, 1.3)];
            let t = gb.tight().predict(&x).unwrap();
            let l = gb.loose().predict(&x).unwrap();
            let want = match (t, l) {
                (1, 1) => TriState::Good,
                (-1, -1) => TriState::Bad,
                _ => TriState::GuardBand,
            };
            let got = gb.classify(&x).unwrap();
            assert_eq!(got, want);
            seen_guard |= got == TriState::GuardBand;
        }
        assert!(seen_guard, "a nonzero delta should produce some guard-band region");
    }

    #[test]
    fn deep_interior_point_is_good() {
        let ds = planted_dataset(400, 29);
        let hp = Hyperparams::for_dim(2);
        let gb =
            train_guard_band(&ds, &names(&["s1", "s2"]), &names(&["s3"]), 0.025, &hp, 3).unwrap();
        // s1 = s2 = 0.5 puts s3 exactly at mid-range, far from every bound.
        assert_eq!(gb.classify(&[0.5, 0.5]).unwrap(), TriState::Good);
    }

    #[test]
    fn boundary_points_land_in_the_guard_band() {
        // Devices whose predicted-spec value sits exactly on a range bound
        // are the band's center line: with delta = 0.025 nearly all of them
        // must come back GuardBand. s3 = (s1 + s2) / 2 holds in normalized
        // units too, so the s3 = 0 and s3 = 1 boundaries are the lines
        // s1 + s2 = 0 and s1 + s2 = 2.
        let ds = planted_dataset(2000, 47);
        let hp = Hyperparams::for_dim(2);
        let gb =
            train_guard_band(&ds, &names(&["s1", "s2"]), &names(&["s3"]), 0.025, &hp, 5).unwrap();
        let mut rng = Rng::new(53);
        let mut guarded = 0;
        for k in 0..100 {
            let t = rng.uniform(-0.05, 0.05);
            let x = if k % 2 == 0 {
                vec![t, -t] // s3 exactly 0
            } else {
                vec![1.0 + t, 1.0 - t] // s3 exactly 1
            };
            if gb.classify(&x).unwrap() == TriState::GuardBand {
                guarded += 1;
            }
        }
        assert!(guarded >= 90, "only {guarded}/100 boundary points were guarded");
    }

    #[test]
    fn label_nesting_holds() {
        let ds = planted_dataset(500, 31);
        let elim = names(&["s3"]);
        for delta in [0.0, 0.01, 0.05, 0.2] {
            let tight = perturbed_labels(&ds, &elim, delta).unwrap();
            let loose = perturbed_labels(&ds, &elim, -delta).unwrap();
            for (t, l) in tight.iter().zip(&loose) {
                assert!(!(t == &Label::Pass && l == &Label::Fail));
            }
        }
    }

    #[test]
    fn oversized_delta_fails_loudly() {
        let ds = planted_dataset(100, 37);
        let hp = Hyperparams::for_dim(2);
        // delta = 0.5 empties the tight pass region entirely.
        let err = train_guard_band(&ds, &names(&["s1", "s2"]), &names(&["s3"]), 0.5, &hp, 3)
            .unwrap_err();
        assert!(matches!(err, GuardBandError::DegenerateLabels { side: Side::Tight, .. }));
    }

    #[test]
    fn empty_retained_set_is_rejected() {
        let ds = planted_dataset(50, 41);
        let hp = Hyperparams::for_dim(1);
        assert!(matches!(
            train_guard_band(&ds, &[], &names(&["s3"]), 0.01, &hp, 3),
            Err(GuardBandError::EmptyRetainedSet)
        ));
    }

    #[test]
    fn json_roundtrip_preserves_classification() {
        let ds = planted_dataset(200, 43);
        let hp = Hyperparams::for_dim(2);
        let gb =
            train_guard_band(&ds, &names(&["s1", "s2"]), &names(&["s3"]), 0.025, &hp, 3).unwrap();
        let back = GuardBandModel::from_json(&gb.to_json()).unwrap();
        assert_eq!(back.retained_specs(), gb.retained_specs());
        assert_eq!(back.eliminated_specs(), gb.eliminated_specs());
        let mut rng = Rng::new(7);
        for _ in 0..500 {
            let x = vec![rng.uniform(-0.3, 1.3), rng.uniform(-0.3, 1.3)];
            assert_eq!(gb.classify(&x).unwrap(), back.classify(&x).unwrap());
        }
    }
}
