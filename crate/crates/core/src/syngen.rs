//! Deterministic synthetic device populations.
//!
//! Three generator families stand in for circuit-simulation campaigns:
//!
//! - `OpAmpLike`: an 11-specification operational-amplifier population.
//!   Latent device parameters (widths, lengths, capacitances, a bias level,
//!   mismatch terms) are perturbed uniformly within `param_variation` of
//!   nominal; six driver specifications respond linearly to the latent
//!   deviations and five more are smooth closed-form functions of the
//!   drivers, so a learner can recover them.
//! - `AccelTriTemp`: a five-specification accelerometer population measured
//!   at hot (80C), cold (-40C) and room (14.85C) temperature, 15 columns
//!   total. Temperature enters only through an anchor-shift offset applied
//!   to the same latent state, so the hot and cold columns are deterministic
//!   transforms of the room-temperature device.
//! - `PlantedRedundancy`: a population with explicitly planted dependences
//!   (s3 = f(s1, s2) and similar) and a ground-truth descriptor, used as the
//!   oracle for compaction tests.
//!
//! Record `k` is generated from the derived stream `substream(seed, k)`, so
//! populations are reproducible record-by-record and independent of
//! generation order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datamodel::{DataError, Dataset, DeviceRecord, SpecificationDef};
use crate::rng::Rng;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("dependence target `{0}` refers to a spec that is not an independent base")]
    CyclicDependence(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    OpAmpLike,
    AccelTriTemp,
    PlantedRedundancy,
}

/// An independent planted specification: sampled uniformly within
/// `spread` of its nominal value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedBase {
    pub spec: SpecificationDef,
    pub spread: f64,
}

/// Closed-form dependence of one planted specification on base values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DependenceExpr {
    /// Arithmetic mean of the named base specifications.
    Mean(Vec<String>),
    /// `offset + sum(coeff * value)`.
    WeightedSum { terms: Vec<(f64, String)>, offset: f64 },
    /// `offset + sum((value - center)^2)`: smooth but not invertible in any
    /// single source, so eliminating the target reveals nothing about them.
    SquaredDist { names: Vec<String>, center: f64, offset: f64 },
}

impl DependenceExpr {
    fn sources(&self) -> Vec<&str> {
        match self {
            DependenceExpr::Mean(names) => names.iter().map(|s| s.as_str()).collect(),
            DependenceExpr::WeightedSum { terms, .. } => {
                terms.iter().map(|(_, s)| s.as_str()).collect()
            }
            DependenceExpr::SquaredDist { names, .. } => {
                names.iter().map(|s| s.as_str()).collect()
            }
        }
    }

    /// Evaluate against resolved base values.
    pub fn eval(&self, lookup: &dyn Fn(&str) -> f64) -> f64 {
        match self {
            DependenceExpr::Mean(names) => {
                names.iter().map(|n| lookup(n)).sum::<f64>() / names.len() as f64
            }
            DependenceExpr::WeightedSum { terms, offset } => {
                offset + terms.iter().map(|(c, n)| c * lookup(n)).sum::<f64>()
            }
            DependenceExpr::SquaredDist { names, center, offset } => {
                offset
                    + names
                        .iter()
                        .map(|n| {
                            let d = lookup(n) - center;
                            d * d
                        })
                        .sum::<f64>()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dependence {
    pub spec: SpecificationDef,
    pub expr: DependenceExpr,
}

/// Base and dependent specification layout for the planted generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedLayout {
    pub bases: Vec<PlantedBase>,
    pub deps: Vec<Dependence>,
}

fn unit_spec(name: &str) -> SpecificationDef {
    SpecificationDef::new(name, "-", 0.5, 0.25, 0.75).expect("static spec")
}

impl PlantedLayout {
    /// Default layout: s1, s2, s4 independent, s3 = (s1 + s2) / 2. Each
    /// independent spec alone fails about one device in six.
    pub fn default_mean() -> Self {
        PlantedLayout {
            bases: vec![
                PlantedBase { spec: unit_spec("s1"), spread: 0.30 },
                PlantedBase { spec: unit_spec("s2"), spread: 0.30 },
                PlantedBase { spec: unit_spec("s4"), spread: 0.30 },
            ],
            deps: vec![Dependence {
                spec: unit_spec("s3"),
                expr: DependenceExpr::Mean(vec!["s1".into(), "s2".into()]),
            }],
        }
    }

    /// Three-spec layout without the independent s4, for two-dimensional
    /// lookup-table and grid exercises.
    pub fn two_driver_mean() -> Self {
        PlantedLayout {
            bases: vec![
                PlantedBase { spec: unit_spec("s1"), spread: 0.30 },
                PlantedBase { spec: unit_spec("s2"), spread: 0.30 },
            ],
            deps: vec![Dependence {
                spec: unit_spec("s3"),
                expr: DependenceExpr::Mean(vec!["s1".into(), "s2".into()]),
            }],
        }
    }
}

/// Ground truth emitted alongside a planted population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTruth {
    /// Names of the dependent (redundant) specifications.
    pub dependent_specs: Vec<String>,
    /// The exact planted dependences.
    pub dependences: Vec<Dependence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub kind: GeneratorKind,
    pub n: usize,
    pub seed: u64,
    /// Uniform latent-parameter perturbation, as a fraction of nominal.
    #[serde(default = "default_variation")]
    pub param_variation: f64,
    /// Measurement noise: op-amp/accelerometer columns jitter by up to
    /// `noise_scale` of their range span; planted dependent values by up to
    /// `noise_scale` in value units.
    #[serde(default = "default_noise")]
    pub noise_scale: f64,
    /// Planted layout; `None` selects [`PlantedLayout::default_mean`].
    #[serde(default)]
    pub planted: Option<PlantedLayout>,
}

fn default_variation() -> f64 {
    0.10
}

fn default_noise() -> f64 {
    0.005
}

impl GeneratorConfig {
    pub fn opamp(n: usize, seed: u64) -> Self {
        GeneratorConfig {
            kind: GeneratorKind::OpAmpLike,
            n,
            seed,
            param_variation: default_variation(),
            noise_scale: default_noise(),
            planted: None,
        }
    }

    /// Accelerometer defaults use instrument-grade measurement repeatability
    /// (0.2% of span); temperature-test prediction hinges on it.
    pub fn accel(n: usize, seed: u64) -> Self {
        GeneratorConfig {
            kind: GeneratorKind::AccelTriTemp,
            noise_scale: 0.002,
            ..Self::opamp(n, seed)
        }
    }

    pub fn planted(n: usize, seed: u64) -> Self {
        GeneratorConfig { kind: GeneratorKind::PlantedRedundancy, ..Self::opamp(n, seed) }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if self.n == 0 {
            return Err(GenError::InvalidConfig("n must be >= 1".into()));
        }
        if !(self.param_variation >= 0.0 && self.param_variation.is_finite()) {
            return Err(GenError::InvalidConfig("param_variation must be >= 0".into()));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(GenError::InvalidConfig("noise_scale must be >= 0".into()));
        }
        Ok(())
    }
}

/// Generate a population. For `PlantedRedundancy` the ground-truth
/// descriptor is dropped; use [`generate_planted`] to keep it.
pub fn generate(cfg: &GeneratorConfig) -> Result<Dataset, GenError> {
    match cfg.kind {
        GeneratorKind::OpAmpLike => generate_opamp(cfg),
        GeneratorKind::AccelTriTemp => generate_accel(cfg),
        GeneratorKind::PlantedRedundancy => Ok(generate_planted(cfg)?.0),
    }
}

// ---------------------------------------------------------------------------
// Op-amp population
// ---------------------------------------------------------------------------

/// The operational-amplifier specification table.
pub fn opamp_specs() -> Vec<SpecificationDef> {
    let rows: [(&str, &str, f64, f64, f64); 11] = [
        ("gain", "-", 14000.0, 1000.0, 20000.0),
        ("bw_3db", "Hz", 200.0, 130.0, 10000.0),
        ("unity_gain_freq", "MHz", 2.1, 1.7, 5.0),
        ("slew_rate", "V/us", 0.44, 0.35, 0.55),
        ("rise_time", "us", 8.5, 0.01, 10.5),
        ("overshoot", "-", 0.0001, -0.00026, 0.00026),
        ("settling_time", "ns", 895.0, 1.0, 1070.0),
        ("quiescent_current", "uA", 105.0, 70.0, 125.0),
        ("common_mode_gain", "-", 0.08, 0.0, 0.48),
        ("power_supply_gain", "-", 0.4, 0.0, 0.95),
        ("short_circuit_current", "mA", 0.5, 0.0, 4.2),
    ];
    rows.iter()
        .map(|(name, unit, nom, lo, hi)| SpecificationDef::new(*name, *unit, *nom, *lo, *hi).unwrap())
        .collect()
}

/// Per-spec response amplitude in span units, calibrated once against the
/// 75% training-yield target of the reference op-amp population.
const OPAMP_AMP: [f64; 11] = [
    0.284,  // gain
    0.0058, // bw_3db
    0.156,  // unity_gain_freq
    0.450,  // slew_rate
    0.240,  // rise_time
    0.462,  // overshoot
    0.158,  // settling_time
    0.413,  // quiescent_current
    0.193,  // common_mode_gain
    0.459,  // power_supply_gain
    0.162,  // short_circuit_current
];

/// Latent indices: width, length, comp cap, load cap, bias, resistance,
/// mismatch, supply coupling.
const OPAMP_LATENTS: usize = 8;

/// Normalized spec responses for one latent deviation vector
/// (width, length, comp cap, load cap, bias, resistance, mismatch, supply).
///
/// Six driver responses are linear in the latents; the other five are
/// smooth functions of the drivers, so their pass/fail stays recoverable
/// from driver measurements.
fn opamp_responses(u: &[f64; OPAMP_LATENTS]) -> [f64; 11] {
    let [uw, ulen, ucc, ucl, uib, urr, umm, ups] = *u;

    let m_gain = 0.50 * uw + 0.50 * uib + 0.70 * urr;
    let m_bw = -0.80 * ucc - 0.45 * urr - 0.30 * ulen;
    let m_slew = 0.75 * uib - 0.65 * ucc;
    let m_iq = 0.80 * uib + 0.40 * uw;
    let m_cmg = 0.90 * umm + 0.25 * uw * ulen;
    let m_psg = 0.90 * ups + 0.20 * umm + 0.10 * ucl;

    let m_ugf = 0.55 * m_gain + 0.75 * m_bw + 0.15 * m_gain * m_bw;
    let m_rise = -0.75 * m_bw - 0.45 * m_gain + 0.10 * m_bw * m_bw;
    let m_settle = -0.60 * m_bw - 0.50 * m_slew + 0.12 * m_slew * m_bw;
    let m_over = 0.70 * m_slew - 0.45 * m_bw + 0.15 * m_slew * m_slew;
    let m_scc = 0.85 * m_iq + 0.10 * m_iq * m_iq;

    [m_gain, m_bw, m_ugf, m_slew, m_rise, m_over, m_settle, m_iq, m_cmg, m_psg, m_scc]
}

fn generate_opamp(cfg: &GeneratorConfig) -> Result<Dataset, GenError> {
    cfg.validate()?;
    let specs = opamp_specs();
    let spans: Vec<f64> = specs.iter().map(|s| s.span()).collect();
    let noms: Vec<f64> = specs.iter().map(|s| s.nominal).collect();
    let records = (0..cfg.n)
        .map(|k| {
            let mut rng = Rng::substream(cfg.seed, k as u64);
            // Latent deviations in [-1, 1]; param_variation rescales them so
            // a tighter process shrinks every response proportionally.
            let vscale = cfg.param_variation / default_variation();
            let mut u = [0.0_f64; OPAMP_LATENTS];
            for slot in u.iter_mut() {
                *slot = vscale * rng.symmetric();
            }
            let mixes = opamp_responses(&u);
            let values: Vec<f64> = mixes
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    let noise = cfg.noise_scale * rng.symmetric();
                    noms[i] + spans[i] * (OPAMP_AMP[i] * m + noise)
                })
                .collect();
            DeviceRecord::new(format!("d{k:06}"), values)
        })
        .collect();
    Ok(Dataset::new(specs, records)?)
}

// ---------------------------------------------------------------------------
// Tri-temperature accelerometer population
// ---------------------------------------------------------------------------

pub const TEMP_ROOM: &str = "14.85C";
pub const TEMP_HOT: &str = "80C";
pub const TEMP_COLD: &str = "-40C";

/// Normalized anchor-shift per temperature: chip expansion moves the anchors
/// away from the center when hot, toward it when cold, proportionally to the
/// distance from room temperature.
fn anchor_shift(temp: &str) -> f64 {
    match temp {
        TEMP_ROOM => 0.0,
        TEMP_HOT => 1.0,           // (80 - 14.85) / 65.15
        TEMP_COLD => -54.85 / 65.15,
        other => unreachable!("unknown temperature label {other}"),
    }
}

const ACCEL_BASES: [(&str, &str, f64, f64, f64); 5] = [
    ("scale_factor", "mV/V", 9.5, 5.0, 30.0),
    ("cross_axis", "mV/V", 0.0, -6.0, 4.0),
    ("peak_freq", "KHz", 5.6, 4.0, 6.2),
    ("quality_factor", "-", 2.1, 1.0, 2.8),
    ("bw_3db", "KHz", 2.7, 2.0, 3.8),
];

/// Response amplitudes per base spec, span units; calibrated once against
/// the 77% training-yield target of the reference accelerometer population.
const ACCEL_AMP: [f64; 5] = [
    0.219, // scale_factor
    0.496, // cross_axis
    0.312, // peak_freq
    0.474, // quality_factor
    0.502, // bw_3db
];

/// The accelerometer specification table: five specifications, each measured
/// at room, hot and cold temperature (`name@temp` columns, room block first).
pub fn accel_specs() -> Vec<SpecificationDef> {
    let mut specs = Vec::with_capacity(15);
    for temp in [TEMP_ROOM, TEMP_HOT, TEMP_COLD] {
        for (name, unit, nom, lo, hi) in ACCEL_BASES {
            specs.push(
                SpecificationDef::new(format!("{name}@{temp}"), unit, nom, lo, hi).unwrap(),
            );
        }
    }
    specs
}

/// Column names of one temperature block, in base-spec order.
pub fn accel_columns_at(temp: &str) -> Vec<String> {
    ACCEL_BASES.iter().map(|(name, ..)| format!("{name}@{temp}")).collect()
}

fn generate_accel(cfg: &GeneratorConfig) -> Result<Dataset, GenError> {
    cfg.validate()?;
    let specs = accel_specs();
    let records = (0..cfg.n)
        .map(|k| {
            let mut rng = Rng::substream(cfg.seed, k as u64);
            let vscale = cfg.param_variation / default_variation();
            // Latents: finger length/width, spring length/width, angle,
            // anchor position.
            let ulf = vscale * rng.symmetric();
            let uwf = vscale * rng.symmetric();
            let uls = vscale * rng.symmetric();
            let uws = vscale * rng.symmetric();
            let uang = vscale * rng.symmetric();
            let uanch = vscale * rng.symmetric();

            // Room-temperature responses.
            let room = [
                0.55 * ulf + 0.35 * uwf - 0.45 * uws + 0.18 * uanch,
                0.85 * uang + 0.20 * uwf * uang + 0.15 * uanch,
                0.65 * uws - 0.50 * ulf - 0.30 * uls + 0.12 * uanch,
                0.55 * uws + 0.40 * ulf - 0.45 * uwf + 0.10 * uanch,
                -0.30 * uws - 0.45 * ulf + 0.55 * uwf + 0.10 * uanch,
            ];
            // Anchor shift scales the room response and adds a per-spec
            // drift with linear and quadratic terms plus a small anchor
            // interaction. The response rides on the room value (an exact
            // affine function of it), so temperature behavior stays
            // recoverable from room measurements; the anchor term is itself
            // visible in every room column. The drift signs point away from
            // each specification's nearer range edge, so the expensive
            // temperature insertions mostly re-confirm the room verdict.
            const TEMP_LIN: [f64; 5] = [0.11, -0.07, -0.09, -0.09, 0.08];
            const TEMP_QUAD: [f64; 5] = [0.26, -0.13, -0.18, -0.16, 0.16];
            const TEMP_GAIN: [f64; 5] = [0.05, 0.045, 0.045, 0.045, 0.05];
            const TEMP_ANCHOR: [f64; 5] = [0.05, 0.04, 0.04, 0.04, 0.04];
            let mix = |i: usize, s: f64| -> f64 {
                room[i] * (1.0 + TEMP_GAIN[i] * s)
                    + TEMP_LIN[i] * s
                    + TEMP_QUAD[i] * s * s
                    + TEMP_ANCHOR[i] * s * uanch
            };

            let mut values = Vec::with_capacity(15);
            for temp in [TEMP_ROOM, TEMP_HOT, TEMP_COLD] {
                let s = anchor_shift(temp);
                for (i, (_, _, nom, lo, hi)) in ACCEL_BASES.iter().enumerate() {
                    let span = hi - lo;
                    let noise = cfg.noise_scale * rng.symmetric();
                    values.push(nom + span * (ACCEL_AMP[i] * mix(i, s) + noise));
                }
            }
            DeviceRecord::new(format!("d{k:06}"), values)
        })
        .collect();
    Ok(Dataset::new(specs, records)?)
}

// ---------------------------------------------------------------------------
// Planted-redundancy population
// ---------------------------------------------------------------------------

/// Generate a planted population plus its ground-truth descriptor.
///
/// Base values are sampled uniformly within `spread` of their nominal;
/// dependent values are computed exactly from their expression, then
/// perturbed by at most `noise_scale` in value units.
pub fn generate_planted(cfg: &GeneratorConfig) -> Result<(Dataset, PlantedTruth), GenError> {
    cfg.validate()?;
    if cfg.kind != GeneratorKind::PlantedRedundancy {
        return Err(GenError::InvalidConfig(
            "generate_planted requires kind = planted_redundancy".into(),
        ));
    }
    let layout = cfg.planted.clone().unwrap_or_else(PlantedLayout::default_mean);
    if layout.bases.is_empty() {
        return Err(GenError::InvalidConfig("planted layout needs at least one base spec".into()));
    }
    let base_names: Vec<&str> = layout.bases.iter().map(|b| b.spec.name.as_str()).collect();
    for dep in &layout.deps {
        for source in dep.expr.sources() {
            if !base_names.contains(&source) {
                return Err(GenError::CyclicDependence(dep.spec.name.clone()));
            }
        }
    }

    // Column order: bases first, then dependents, re-sorted so that the
    // final spec order matches the declaration order by name where the
    // default layouts interleave them (s1, s2, s3, s4).
    let mut specs: Vec<SpecificationDef> = layout.bases.iter().map(|b| b.spec.clone()).collect();
    specs.extend(layout.deps.iter().map(|d| d.spec.clone()));
    let mut order: Vec<usize> = (0..specs.len()).collect();
    order.sort_by(|&a, &b| specs[a].name.cmp(&specs[b].name));
    let specs_sorted: Vec<SpecificationDef> = order.iter().map(|&i| specs[i].clone()).collect();

    let records = (0..cfg.n)
        .map(|k| {
            let mut rng = Rng::substream(cfg.seed, k as u64);
            let base_values: Vec<f64> = layout
                .bases
                .iter()
                .map(|b| b.spec.nominal + b.spread * rng.symmetric())
                .collect();
            let lookup = |name: &str| -> f64 {
                let i = base_names.iter().position(|n| *n == name).expect("validated source");
                base_values[i]
            };
            let mut all = base_values.clone();
            for dep in &layout.deps {
                let exact = dep.expr.eval(&lookup);
                let noise = cfg.noise_scale * rng.symmetric();
                all.push(exact + noise);
            }
            let values: Vec<f64> = order.iter().map(|&i| all[i]).collect();
            DeviceRecord::new(format!("d{k:06}"), values)
        })
        .collect();

    let truth = PlantedTruth {
        dependent_specs: layout.deps.iter().map(|d| d.spec.name.clone()).collect(),
        dependences: layout.deps.clone(),
    };
    Ok((Dataset::new(specs_sorted, records)?, truth))
}

/// Fraction of records passing every specification (raw units).
pub fn population_yield(ds: &Dataset) -> f64 {
    if ds.is_empty() {
        return 0.0;
    }
    let names = ds.spec_names();
    let labels = ds.label_pass_fail(&names).expect("own spec names");
    labels.pass_count() as f64 / ds.len() as f64
}
