//! Statistical test-set compaction for specification-based testing.
//!
//! Device populations are labeled pass/fail against specification ranges,
//! redundant specification tests are eliminated greedily with support-vector
//! classifiers under a user-defined error tolerance, every prediction is
//! guard-banded by a dual-model scheme, and the final classifier can be
//! exported as a grid lookup table for tester-side pass/fail decisions.
//!
//! Module map:
//! - [`datamodel`]: specification sets, datasets, normalization, labeling, I/O
//! - [`svc`]: soft-margin support-vector classifier with an SMO dual solver
//! - [`guardband`]: dual-model guard-band classifier (Good / Bad / GuardBand)
//! - [`grid`]: training-data compaction and lookup-table export
//! - [`compactor`]: the greedy test-elimination loop, metrics and cost model
//! - [`syngen`]: deterministic synthetic device-population generators
//! - [`rng`]: seeded pseudo-random streams used everywhere above

// Negated float comparisons (`!(x >= 0.0)`) are the NaN-rejecting form of
// every range check here; the positive form would silently admit NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compactor;
pub mod datamodel;
pub mod grid;
pub mod guardband;
pub mod rng;
pub mod svc;
pub mod syngen;

pub use compactor::{
    compact, compute_metrics, cost_savings, CompactError, CompactionConfig, CompactionResult,
    CostReport, MetricsSummary, OrderingStrategy, StepMetrics,
};
pub use datamodel::{DataError, Dataset, DeviceRecord, Label, LabelVector, SpecificationDef};
pub use grid::{GridError, GridSpec, LookupTable};
pub use guardband::{train_guard_band, GuardBandError, GuardBandModel, TriState};
pub use svc::{train_svc, Hyperparams, KernelSpec, SvcError, SvcModel};
pub use syngen::{generate, generate_planted, GeneratorConfig, GeneratorKind};
