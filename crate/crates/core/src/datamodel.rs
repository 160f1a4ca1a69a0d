//! Specification sets, device populations, range-based normalization and
//! pass/fail labeling.
//!
//! A [`SpecificationDef`] is one measurable performance parameter with an
//! acceptability range; a [`Dataset`] is a population of devices, each an
//! ordered vector of measured specification values. Labeling is a closed-range
//! test: a device passes a subset of specifications iff every value in the
//! subset lies inside its range (boundary values pass). Normalization maps
//! each range to `[0, 1]`; out-of-range values land outside `[0, 1]` and are
//! kept as-is so failing devices stay distinguishable.
//!
//! Datasets are immutable after construction: every operation returns a new
//! value and is safe to call concurrently.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::Rng;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("specification `{0}`: range lower bound must be strictly below upper bound")]
    InvalidRange(String),
    #[error("specification `{0}`: nominal value lies outside the acceptability range")]
    NominalOutOfRange(String),
    #[error("specification `{0}`: test cost must be nonnegative")]
    NegativeCost(String),
    #[error("duplicate specification name `{0}`")]
    DuplicateSpecName(String),
    #[error("missing column `{column}`{}", row.as_ref().map(|r| format!(" in row `{r}`")).unwrap_or_default())]
    MissingColumn { column: String, row: Option<String> },
    #[error("non-numeric value in row `{row}`, column `{column}`")]
    NonNumericValue { row: String, column: String },
    #[error("duplicate device id `{0}`")]
    DuplicateId(String),
    #[error("record `{id}` has {got} values, expected {want}")]
    RecordShape { id: String, got: usize, want: usize },
    #[error("dataset is already normalized")]
    AlreadyNormalized,
    #[error("dataset is not normalized")]
    NotNormalized,
    #[error("unknown specification name `{0}`")]
    UnknownSpecName(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("split fraction {0} must lie strictly between 0 and 1")]
    InvalidFraction(f64),
    #[error("specification file: {0}")]
    SpecFile(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn default_cost() -> f64 {
    1.0
}

/// One specification: a named performance parameter with an acceptability
/// range and a per-application test cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecificationDef {
    pub name: String,
    pub unit: String,
    pub nominal: f64,
    #[serde(rename = "lo")]
    pub range_lo: f64,
    #[serde(rename = "hi")]
    pub range_hi: f64,
    #[serde(rename = "cost", default = "default_cost")]
    pub test_cost: f64,
}

impl SpecificationDef {
    pub fn new(
        name: impl Into<String>,
        unit: impl Into<String>,
        nominal: f64,
        range_lo: f64,
        range_hi: f64,
    ) -> Result<Self, DataError> {
        let spec = SpecificationDef {
            name: name.into(),
            unit: unit.into(),
            nominal,
            range_lo,
            range_hi,
            test_cost: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_cost(mut self, cost: f64) -> Result<Self, DataError> {
        self.test_cost = cost;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if !(self.range_lo < self.range_hi) {
            return Err(DataError::InvalidRange(self.name.clone()));
        }
        if !(self.range_lo <= self.nominal && self.nominal <= self.range_hi) {
            return Err(DataError::NominalOutOfRange(self.name.clone()));
        }
        if !(self.test_cost >= 0.0) {
            return Err(DataError::NegativeCost(self.name.clone()));
        }
        Ok(())
    }

    pub fn span(&self) -> f64 {
        self.range_hi - self.range_lo
    }

    /// Map a raw value into range-normalized units (lower bound to 0, upper
    /// bound to 1). Out-of-range inputs map outside `[0, 1]`.
    pub fn normalize_value(&self, v: f64) -> f64 {
        (v - self.range_lo) / self.span()
    }

    pub fn denormalize_value(&self, x: f64) -> f64 {
        self.range_lo + x * self.span()
    }

    /// Closed-interval range test on a raw value.
    pub fn in_range(&self, v: f64) -> bool {
        self.range_lo <= v && v <= self.range_hi
    }
}

/// One measured device: an id plus one value per specification of the owning
/// dataset, in specification order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceRecord {
    pub id: String,
    pub values: Vec<f64>,
}

impl DeviceRecord {
    pub fn new(id: impl Into<String>, values: Vec<f64>) -> Self {
        DeviceRecord { id: id.into(), values }
    }
}

/// Pass/fail verdict for one device against one specification subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    Pass,
    Fail,
}

impl Label {
    /// `+1` for Pass, `-1` for Fail.
    pub fn sign(self) -> f64 {
        match self {
            Label::Pass => 1.0,
            Label::Fail => -1.0,
        }
    }
}

/// Labels for a whole population, remembering which specification subset they
/// were computed against.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVector {
    subset: Vec<String>,
    labels: Vec<Label>,
}

impl LabelVector {
    pub fn new(subset: Vec<String>, labels: Vec<Label>) -> Self {
        LabelVector { subset, labels }
    }

    pub fn subset(&self) -> &[String] {
        &self.subset
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn pass_count(&self) -> usize {
        self.labels.iter().filter(|l| **l == Label::Pass).count()
    }

    /// Signed labels (`+1`/`-1`) for classifier training.
    pub fn signs(&self) -> Vec<f64> {
        self.labels.iter().map(|l| l.sign()).collect()
    }
}

/// An immutable device population over a fixed specification set.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    specs: Vec<SpecificationDef>,
    records: Vec<DeviceRecord>,
    normalized: bool,
}

impl Dataset {
    pub fn new(specs: Vec<SpecificationDef>, records: Vec<DeviceRecord>) -> Result<Self, DataError> {
        Self::with_flag(specs, records, false)
    }

    fn with_flag(
        specs: Vec<SpecificationDef>,
        records: Vec<DeviceRecord>,
        normalized: bool,
    ) -> Result<Self, DataError> {
        let mut names = HashSet::new();
        for spec in &specs {
            spec.validate()?;
            if !names.insert(spec.name.as_str()) {
                return Err(DataError::DuplicateSpecName(spec.name.clone()));
            }
        }
        let mut ids = HashSet::new();
        for rec in &records {
            if rec.values.len() != specs.len() {
                return Err(DataError::RecordShape {
                    id: rec.id.clone(),
                    got: rec.values.len(),
                    want: specs.len(),
                });
            }
            for (spec, v) in specs.iter().zip(&rec.values) {
                if !v.is_finite() {
                    return Err(DataError::NonNumericValue {
                        row: rec.id.clone(),
                        column: spec.name.clone(),
                    });
                }
            }
            if !ids.insert(rec.id.as_str()) {
                return Err(DataError::DuplicateId(rec.id.clone()));
            }
        }
        Ok(Dataset { specs, records, normalized })
    }

    /// Mark a dataset assembled from already-normalized values. Grid
    /// compaction builds records directly in normalized units; re-running
    /// the affine map there would double-apply it.
    pub(crate) fn assume_normalized(mut ds: Dataset) -> Dataset {
        ds.normalized = true;
        ds
    }

    pub fn specs(&self) -> &[SpecificationDef] {
        &self.specs
    }

    pub fn records(&self) -> &[DeviceRecord] {
        &self.records
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn spec_names(&self) -> Vec<String> {
        self.specs.iter().map(|s| s.name.clone()).collect()
    }

    pub fn spec_index(&self, name: &str) -> Option<usize> {
        self.specs.iter().position(|s| s.name == name)
    }

    fn spec_indices<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>, DataError> {
        names
            .iter()
            .map(|n| {
                self.spec_index(n.as_ref())
                    .ok_or_else(|| DataError::UnknownSpecName(n.as_ref().to_string()))
            })
            .collect()
    }

    /// Range-normalize every value: lower bound maps to 0, upper bound to 1.
    /// Out-of-range values map outside `[0, 1]` and are kept unclipped.
    pub fn normalize(&self) -> Result<Dataset, DataError> {
        if self.normalized {
            return Err(DataError::AlreadyNormalized);
        }
        let records = self
            .records
            .iter()
            .map(|r| DeviceRecord {
                id: r.id.clone(),
                values: r
                    .values
                    .iter()
                    .zip(&self.specs)
                    .map(|(v, s)| s.normalize_value(*v))
                    .collect(),
            })
            .collect();
        Dataset::with_flag(self.specs.clone(), records, true)
    }

    /// Invert [`Dataset::normalize`].
    pub fn denormalize(&self) -> Result<Dataset, DataError> {
        if !self.normalized {
            return Err(DataError::NotNormalized);
        }
        let records = self
            .records
            .iter()
            .map(|r| DeviceRecord {
                id: r.id.clone(),
                values: r
                    .values
                    .iter()
                    .zip(&self.specs)
                    .map(|(v, s)| s.denormalize_value(*v))
                    .collect(),
            })
            .collect();
        Dataset::with_flag(self.specs.clone(), records, false)
    }

    /// Pass/fail of every record against the given specification subset.
    ///
    /// A record passes iff every subset value lies inside its closed range;
    /// the empty subset passes vacuously. On a normalized dataset the pass
    /// region is `[0, 1]` per specification.
    pub fn label_pass_fail<S: AsRef<str>>(&self, subset: &[S]) -> Result<LabelVector, DataError> {
        let idx = self.spec_indices(subset)?;
        let labels = self
            .records
            .iter()
            .map(|r| {
                let pass = idx.iter().all(|&i| {
                    let v = r.values[i];
                    if self.normalized {
                        (0.0..=1.0).contains(&v)
                    } else {
                        self.specs[i].in_range(v)
                    }
                });
                if pass {
                    Label::Pass
                } else {
                    Label::Fail
                }
            })
            .collect();
        Ok(LabelVector::new(
            subset.iter().map(|s| s.as_ref().to_string()).collect(),
            labels,
        ))
    }

    /// Deterministic seeded partition; the first part receives
    /// `round(len * fraction)` records. Record order is preserved within each
    /// part and the parts are disjoint with union equal to the input.
    pub fn split(&self, fraction: f64, seed: u64) -> Result<(Dataset, Dataset), DataError> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(DataError::InvalidFraction(fraction));
        }
        let count = (self.len() as f64 * fraction).round() as usize;
        self.split_count(count, seed)
    }

    /// Deterministic seeded partition with an exact first-part size.
    pub fn split_count(&self, count: usize, seed: u64) -> Result<(Dataset, Dataset), DataError> {
        if self.is_empty() {
            return Err(DataError::EmptyDataset);
        }
        let count = count.min(self.len());
        let mut order: Vec<usize> = (0..self.len()).collect();
        Rng::new(seed).shuffle(&mut order);
        let chosen: HashSet<usize> = order[..count].iter().copied().collect();
        let mut first = Vec::with_capacity(count);
        let mut second = Vec::with_capacity(self.len() - count);
        for (i, rec) in self.records.iter().enumerate() {
            if chosen.contains(&i) {
                first.push(rec.clone());
            } else {
                second.push(rec.clone());
            }
        }
        Ok((
            Dataset::with_flag(self.specs.clone(), first, self.normalized)?,
            Dataset::with_flag(self.specs.clone(), second, self.normalized)?,
        ))
    }

    /// Per-record feature vectors over the named specifications, in the
    /// given order.
    pub fn feature_matrix<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<Vec<f64>>, DataError> {
        let idx = self.spec_indices(names)?;
        Ok(self
            .records
            .iter()
            .map(|r| idx.iter().map(|&i| r.values[i]).collect())
            .collect())
    }

    /// Column of values for one specification.
    pub fn values_of(&self, name: &str) -> Result<Vec<f64>, DataError> {
        let i = self
            .spec_index(name)
            .ok_or_else(|| DataError::UnknownSpecName(name.to_string()))?;
        Ok(self.records.iter().map(|r| r.values[i]).collect())
    }
}

/// Load a specification set from a JSON array of
/// `{name, unit, nominal, lo, hi, cost}` objects (`cost` optional, default 1).
pub fn load_specs(path: impl AsRef<Path>) -> Result<Vec<SpecificationDef>, DataError> {
    let file = File::open(path)?;
    read_specs(BufReader::new(file))
}

pub fn read_specs<R: Read>(reader: R) -> Result<Vec<SpecificationDef>, DataError> {
    let specs: Vec<SpecificationDef> =
        serde_json::from_reader(reader).map_err(|e| DataError::SpecFile(e.to_string()))?;
    let mut names = HashSet::new();
    for spec in &specs {
        spec.validate()?;
        if !names.insert(spec.name.as_str()) {
            return Err(DataError::DuplicateSpecName(spec.name.clone()));
        }
    }
    Ok(specs)
}

pub fn save_specs(path: impl AsRef<Path>, specs: &[SpecificationDef]) -> Result<(), DataError> {
    let mut file = BufWriter::new(File::create(path)?);
    let json = serde_json::to_string_pretty(specs).map_err(|e| DataError::SpecFile(e.to_string()))?;
    file.write_all(json.as_bytes())?;
    file.write_all(b"\n")?;
    Ok(())
}

/// Load a population from CSV with header `id,<spec1>,<spec2>,...`; the
/// header must name the given specifications in order. Values are parsed as
/// decimal and must be finite.
pub fn load_dataset(
    path: impl AsRef<Path>,
    specs: Vec<SpecificationDef>,
) -> Result<Dataset, DataError> {
    let file = File::open(path)?;
    read_dataset(BufReader::new(file), specs)
}

pub fn read_dataset<R: Read>(reader: R, specs: Vec<SpecificationDef>) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || headers.get(0) != Some("id") {
        return Err(DataError::MissingColumn { column: "id".into(), row: None });
    }
    for (i, spec) in specs.iter().enumerate() {
        match headers.get(i + 1) {
            Some(h) if h == spec.name => {}
            _ => {
                return Err(DataError::MissingColumn { column: spec.name.clone(), row: None });
            }
        }
    }
    if headers.len() != specs.len() + 1 {
        // Extra trailing columns the specification set does not account for.
        return Err(DataError::MissingColumn {
            column: headers.get(specs.len() + 1).unwrap_or("").to_string(),
            row: None,
        });
    }

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for row in rdr.records() {
        let row = row?;
        let id = row.get(0).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(DataError::MissingColumn { column: "id".into(), row: Some(id) });
        }
        if !seen.insert(id.clone()) {
            return Err(DataError::DuplicateId(id));
        }
        let mut values = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            let cell = row.get(i + 1).ok_or_else(|| DataError::MissingColumn {
                column: spec.name.clone(),
                row: Some(id.clone()),
            })?;
            let v: f64 = cell.trim().parse().map_err(|_| DataError::NonNumericValue {
                row: id.clone(),
                column: spec.name.clone(),
            })?;
            if !v.is_finite() {
                return Err(DataError::NonNumericValue { row: id.clone(), column: spec.name.clone() });
            }
            values.push(v);
        }
        records.push(DeviceRecord::new(id, values));
    }
    Dataset::new(specs, records)
}

/// Write a population as CSV. Values use the shortest decimal form that
/// parses back to the identical `f64`, so a save/load cycle is lossless.
pub fn save_dataset(path: impl AsRef<Path>, ds: &Dataset) -> Result<(), DataError> {
    let file = BufWriter::new(File::create(path)?);
    write_dataset(file, ds)
}

pub fn write_dataset<W: Write>(writer: W, ds: &Dataset) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string()];
    header.extend(ds.specs().iter().map(|s| s.name.clone()));
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for rec in ds.records() {
        row.clear();
        row.push(rec.id.clone());
        row.extend(rec.values.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gain_spec() -> SpecificationDef {
        SpecificationDef::new("gain", "-", 14000.0, 1000.0, 20000.0).unwrap()
    }

    /// The full op-amp specification table used across the test suite.
    fn opamp_specs() -> Vec<SpecificationDef> {
        crate::syngen::opamp_specs()
    }

    #[test]
    fn spec_rejects_empty_range() {
        assert!(matches!(
            SpecificationDef::new("x", "-", 1.0, 2.0, 2.0),
            Err(DataError::InvalidRange(_))
        ));
    }

    #[test]
    fn spec_rejects_nominal_outside_range() {
        assert!(matches!(
            SpecificationDef::new("x", "-", 5.0, 0.0, 1.0),
            Err(DataError::NominalOutOfRange(_))
        ));
    }

    #[test]
    fn load_single_gain_row() {
        let csv = "id,gain\nd1,14000\n";
        let ds = read_dataset(csv.as_bytes(), vec![gain_spec()]).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.records()[0].values, vec![14000.0]);
    }

    #[test]
    fn load_header_only_gives_empty_dataset() {
        let csv = "id,gain\n";
        let ds = read_dataset(csv.as_bytes(), vec![gain_spec()]).unwrap();
        assert_eq!(ds.len(), 0);
    }

    #[test]
    fn load_reports_non_numeric_cell() {
        let csv = "id,gain\nd1,14000\nd2,abc\n";
        let err = read_dataset(csv.as_bytes(), vec![gain_spec()]).unwrap_err();
        match err {
            DataError::NonNumericValue { row, column } => {
                assert_eq!(row, "d2");
                assert_eq!(column, "gain");
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn load_rejects_nan_cells() {
        let csv = "id,gain\nd1,NaN\n";
        assert!(matches!(
            read_dataset(csv.as_bytes(), vec![gain_spec()]),
            Err(DataError::NonNumericValue { .. })
        ));
    }

    #[test]
    fn load_reports_duplicate_id() {
        let csv = "id,gain\nd1,1500\nd1,1800\n";
        assert!(matches!(
            read_dataset(csv.as_bytes(), vec![gain_spec()]),
            Err(DataError::DuplicateId(_))
        ));
    }

    #[test]
    fn load_reports_header_mismatch() {
        let csv = "id,wrong\nd1,1500\n";
        assert!(matches!(
            read_dataset(csv.as_bytes(), vec![gain_spec()]),
            Err(DataError::MissingColumn { .. })
        ));
    }

    #[test]
    fn normalize_maps_range_to_unit_interval() {
        let ds = Dataset::new(
            vec![gain_spec()],
            vec![
                DeviceRecord::new("lo", vec![1000.0]),
                DeviceRecord::new("hi", vec![20000.0]),
                DeviceRecord::new("nom", vec![14000.0]),
            ],
        )
        .unwrap();
        let n = ds.normalize().unwrap();
        assert!(n.is_normalized());
        assert_eq!(n.records()[0].values[0], 0.0);
        assert_eq!(n.records()[1].values[0], 1.0);
        assert!((n.records()[2].values[0] - 13000.0 / 19000.0).abs() < 1e-15);
    }

    #[test]
    fn normalize_twice_is_an_error() {
        let ds = Dataset::new(vec![gain_spec()], vec![DeviceRecord::new("d", vec![1500.0])]).unwrap();
        let n = ds.normalize().unwrap();
        assert!(matches!(n.normalize(), Err(DataError::AlreadyNormalized)));
    }

    #[test]
    fn nominal_opamp_device_passes_all_specs() {
        let specs = opamp_specs();
        let values: Vec<f64> = specs.iter().map(|s| s.nominal).collect();
        let ds = Dataset::new(specs, vec![DeviceRecord::new("nom", values)]).unwrap();
        let names = ds.spec_names();
        let labels = ds.label_pass_fail(&names).unwrap();
        assert_eq!(labels.labels(), &[Label::Pass]);
    }

    #[test]
    fn out_of_range_quiescent_current_fails() {
        let specs = opamp_specs();
        let iq = specs.iter().position(|s| s.name == "quiescent_current").unwrap();
        let mut values: Vec<f64> = specs.iter().map(|s| s.nominal).collect();
        values[iq] = 130.0; // range is 70..=125
        let ds = Dataset::new(specs, vec![DeviceRecord::new("d", values)]).unwrap();
        let names = ds.spec_names();
        let labels = ds.label_pass_fail(&names).unwrap();
        assert_eq!(labels.labels(), &[Label::Fail]);
    }

    #[test]
    fn empty_subset_passes_vacuously() {
        let ds = Dataset::new(vec![gain_spec()], vec![DeviceRecord::new("d", vec![-5.0e7])]).unwrap();
        let labels = ds.label_pass_fail::<&str>(&[]).unwrap();
        assert_eq!(labels.labels(), &[Label::Pass]);
    }

    #[test]
    fn boundary_values_pass() {
        let ds = Dataset::new(
            vec![gain_spec()],
            vec![DeviceRecord::new("lo", vec![1000.0]), DeviceRecord::new("hi", vec![20000.0])],
        )
        .unwrap();
        let labels = ds.label_pass_fail(&["gain"]).unwrap();
        assert_eq!(labels.labels(), &[Label::Pass, Label::Pass]);
    }

    #[test]
    fn unknown_subset_name_is_an_error() {
        let ds = Dataset::new(vec![gain_spec()], vec![]).unwrap();
        assert!(matches!(
            ds.label_pass_fail(&["offset"]),
            Err(DataError::UnknownSpecName(_))
        ));
    }

    #[test]
    fn split_partitions_and_is_deterministic() {
        let records: Vec<DeviceRecord> =
            (0..10).map(|i| DeviceRecord::new(format!("d{i}"), vec![1500.0 + i as f64])).collect();
        let ds = Dataset::new(vec![gain_spec()], records).unwrap();
        let (a, b) = ds.split(0.5, 7).unwrap();
        assert_eq!(a.len(), 5);
        assert_eq!(b.len(), 5);
        let mut ids: Vec<&str> =
            a.records().iter().chain(b.records()).map(|r| r.id.as_str()).collect();
        ids.sort_unstable();
        let mut want: Vec<String> = (0..10).map(|i| format!("d{i}")).collect();
        want.sort_unstable();
        assert_eq!(ids, want.iter().map(|s| s.as_str()).collect::<Vec<_>>());

        let (a2, b2) = ds.split(0.5, 7).unwrap();
        assert_eq!(a, a2);
        assert_eq!(b, b2);
    }

    #[test]
    fn split_empty_dataset_is_an_error() {
        let ds = Dataset::new(vec![gain_spec()], vec![]).unwrap();
        assert!(matches!(ds.split(0.5, 1), Err(DataError::EmptyDataset)));
    }

    #[test]
    fn specs_json_roundtrip_with_default_cost() {
        let json = r#"[{"name":"gain","unit":"-","nominal":14000.0,"lo":1000.0,"hi":20000.0}]"#;
        let specs = read_specs(json.as_bytes()).unwrap();
        assert_eq!(specs[0].test_cost, 1.0);
        assert_eq!(specs[0], gain_spec());
    }

    proptest! {
        #[test]
        fn normalize_denormalize_roundtrip(v in -1.0e9_f64..1.0e9, lo in -1.0e6_f64..1.0e6, w in 1.0e-3_f64..1.0e6) {
            let spec = SpecificationDef::new("s", "-", lo, lo, lo + w).unwrap();
            let back = spec.denormalize_value(spec.normalize_value(v));
            // The affine round-trip error scales with the largest magnitude
            // involved, not with |v| alone.
            let scale = v.abs().max(lo.abs() + w).max(1.0);
            prop_assert!((back - v).abs() <= 1e-12 * scale);
        }

        #[test]
        fn subset_conjunction(vals in proptest::collection::vec(-2.0_f64..3.0, 3)) {
            let specs = vec![
                SpecificationDef::new("a", "-", 0.5, 0.0, 1.0).unwrap(),
                SpecificationDef::new("b", "-", 0.5, 0.0, 1.0).unwrap(),
                SpecificationDef::new("c", "-", 0.5, 0.0, 1.0).unwrap(),
            ];
            let ds = Dataset::new(specs, vec![DeviceRecord::new("d", vals)]).unwrap();
            let union = ds.label_pass_fail(&["a", "b", "c"]).unwrap();
            let a = ds.label_pass_fail(&["a"]).unwrap();
            let bc = ds.label_pass_fail(&["b", "c"]).unwrap();
            let want = if a.labels()[0] == Label::Pass && bc.labels()[0] == Label::Pass {
                Label::Pass
            } else {
                Label::Fail
            };
            prop_assert_eq!(union.labels()[0], want);
        }

        #[test]
        fn labels_commute_with_normalization(vals in proptest::collection::vec(900.0_f64..21000.0, 4)) {
            let specs = vec![gain_spec()];
            let records: Vec<DeviceRecord> =
                vals.iter().enumerate().map(|(i, v)| DeviceRecord::new(format!("d{i}"), vec![*v])).collect();
            let ds = Dataset::new(specs, records).unwrap();
            let raw = ds.label_pass_fail(&["gain"]).unwrap();
            let norm = ds.normalize().unwrap().label_pass_fail(&["gain"]).unwrap();
            prop_assert_eq!(raw.labels(), norm.labels());
        }

        #[test]
        fn csv_roundtrip_is_lossless(vals in proptest::collection::vec(-1.0e8_f64..1.0e8, 1..20)) {
            let spec = SpecificationDef::new("s", "-", 0.0, -1.0e9, 1.0e9).unwrap();
            let records: Vec<DeviceRecord> =
                vals.iter().enumerate().map(|(i, v)| DeviceRecord::new(format!("d{i}"), vec![*v])).collect();
            let ds = Dataset::new(vec![spec.clone()], records).unwrap();
            let mut buf = Vec::new();
            write_dataset(&mut buf, &ds).unwrap();
            let back = read_dataset(buf.as_slice(), vec![spec]).unwrap();
            prop_assert_eq!(ds, back);
        }
    }
}
