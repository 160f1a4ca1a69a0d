//! Grid-based training-data compaction and tester-side lookup tables.
//!
//! A [`GridSpec`] tiles a region of the normalized specification space with
//! axis-aligned cells. Two uses:
//!
//! - training-data compaction: cells containing both good and bad instances
//!   keep all of them, single-class cells collapse to one synthetic instance
//!   at the cell center, empty cells contribute nothing;
//! - lookup tables: every cell is classified once at its center, producing a
//!   piecewise-constant Good/Bad/GuardBand table cheap enough to ship to a
//!   tester.
//!
//! Cell membership uses half-open intervals `[edge_k, edge_k+1)` with the
//! final bin closed, and points outside the bounds clamp to the nearest edge
//! cell, so every point maps to exactly one cell.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datamodel::{DataError, Dataset, DeviceRecord, Label, LabelVector};
use crate::guardband::{GuardBandError, GuardBandModel, TriState};

/// Default per-dimension bounds in normalized units; wider than `[0, 1]` so
/// failing (out-of-range) instances stay representable.
pub const DEFAULT_BOUNDS: (f64, f64) = (-0.25, 1.25);

/// Cells a lookup table may materialize before construction is refused.
pub const DEFAULT_CELL_BUDGET: u128 = 1_000_000;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid needs at least one dimension")]
    NoDims,
    #[error("dimension `{0}`: bins must be >= 1")]
    ZeroBins(String),
    #[error("dimension `{0}`: lower bound must be strictly below upper bound")]
    InvalidBounds(String),
    #[error("{got} dims but {want} bin counts")]
    ShapeMismatch { got: usize, want: usize },
    #[error("grid would materialize {cells} cells, over the budget of {budget}")]
    CellLimitExceeded { cells: u128, budget: u128 },
    #[error("grid dimensions do not match the model's retained specifications")]
    DimsMismatch,
    #[error("point has dimension {0}, grid expects {1}")]
    DimensionMismatch(usize, usize),
    #[error("dataset must be normalized before grid compaction")]
    NotNormalized,
    #[error("labels cover {got} records, dataset has {want}")]
    LabelMismatch { got: usize, want: usize },
    #[error("lookup table file: {0}")]
    Format(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    GuardBand(#[from] GuardBandError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// An axis-aligned grid over named dimensions of the normalized space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dims: Vec<String>,
    bins: Vec<usize>,
    bounds: Vec<(f64, f64)>,
}

impl GridSpec {
    /// Grid with the same bin count and the default bounds on every
    /// dimension.
    pub fn uniform(dims: Vec<String>, bins_per_dim: usize) -> Result<Self, GridError> {
        let n = dims.len();
        GridSpec::new(dims, vec![bins_per_dim; n], vec![DEFAULT_BOUNDS; n])
    }

    pub fn new(
        dims: Vec<String>,
        bins: Vec<usize>,
        bounds: Vec<(f64, f64)>,
    ) -> Result<Self, GridError> {
        if dims.is_empty() {
            return Err(GridError::NoDims);
        }
        if bins.len() != dims.len() {
            return Err(GridError::ShapeMismatch { got: dims.len(), want: bins.len() });
        }
        if bounds.len() != dims.len() {
            return Err(GridError::ShapeMismatch { got: dims.len(), want: bounds.len() });
        }
        for ((d, b), (lo, hi)) in dims.iter().zip(&bins).zip(&bounds) {
            if *b == 0 {
                return Err(GridError::ZeroBins(d.clone()));
            }
            if !(lo < hi) {
                return Err(GridError::InvalidBounds(d.clone()));
            }
        }
        Ok(GridSpec { dims, bins, bounds })
    }

    pub fn dims(&self) -> &[String] {
        &self.dims
    }

    pub fn bins(&self) -> &[usize] {
        &self.bins
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    /// Total cell count (may exceed any practical budget; checked at
    /// materialization time).
    pub fn cell_count(&self) -> u128 {
        self.bins.iter().map(|&b| b as u128).product()
    }

    /// Bin index along one dimension, clamping out-of-bounds values to the
    /// edge bins.
    pub fn bin_of(&self, dim: usize, v: f64) -> usize {
        let (lo, hi) = self.bounds[dim];
        let b = self.bins[dim];
        let t = (v - lo) / (hi - lo) * b as f64;
        if t < 0.0 {
            0
        } else {
            (t as usize).min(b - 1)
        }
    }

    /// Per-dimension bin coordinates of a point.
    pub fn cell_of(&self, x: &[f64]) -> Result<Vec<usize>, GridError> {
        if x.len() != self.dims.len() {
            return Err(GridError::DimensionMismatch(x.len(), self.dims.len()));
        }
        Ok(x.iter().enumerate().map(|(d, &v)| self.bin_of(d, v)).collect())
    }

    /// Row-major flat index; the first dimension varies slowest.
    pub fn flat_index(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .zip(&self.bins)
            .fold(0usize, |acc, (&c, &b)| acc * b + c)
    }

    /// Geometric center of a cell given its coordinates.
    pub fn cell_center(&self, coords: &[usize]) -> Vec<f64> {
        coords
            .iter()
            .enumerate()
            .map(|(d, &c)| {
                let (lo, hi) = self.bounds[d];
                let w = (hi - lo) / self.bins[d] as f64;
                lo + (c as f64 + 0.5) * w
            })
            .collect()
    }

    /// Iterate all cell coordinates in row-major order.
    fn all_cells(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        let total = self.cell_count() as usize;
        let bins = self.bins.clone();
        (0..total).map(move |mut flat| {
            let mut coords = vec![0usize; bins.len()];
            for d in (0..bins.len()).rev() {
                coords[d] = flat % bins[d];
                flat /= bins[d];
            }
            coords
        })
    }
}

/// Result of grid-compacting a training population.
#[derive(Debug, Clone)]
pub struct GridCompaction {
    pub dataset: Dataset,
    pub labels: LabelVector,
    /// Single-class cells replaced by their center instance.
    pub merged_cells: usize,
    /// Cells retained verbatim because they held both classes.
    pub mixed_cells: usize,
    /// Single-class cells kept verbatim because the synthetic center would
    /// re-label differently than its members (cells straddling a range
    /// boundary); counted as a coarse-grid warning.
    pub coarse_cells: usize,
}

/// Compact a normalized training population over `grid`.
///
/// Cells holding both good and bad instances keep every instance unchanged;
/// single-class cells are replaced by one synthetic instance at the cell's
/// geometric center (grid dimensions at the center, remaining dimensions at
/// the member mean) carrying the cell's label. Synthetic instances whose
/// recomputed label would disagree with the cell label are not merged; their
/// cell is kept verbatim and counted in `coarse_cells`.
pub fn compact_training_data(
    ds: &Dataset,
    labels: &LabelVector,
    grid: &GridSpec,
) -> Result<GridCompaction, GridError> {
    if !ds.is_normalized() {
        return Err(GridError::NotNormalized);
    }
    if labels.len() != ds.len() {
        return Err(GridError::LabelMismatch { got: labels.len(), want: ds.len() });
    }
    let dim_idx: Vec<usize> = grid
        .dims()
        .iter()
        .map(|d| {
            ds.spec_index(d)
                .ok_or_else(|| GridError::Data(DataError::UnknownSpecName(d.clone())))
        })
        .collect::<Result<_, _>>()?;

    // Bucket record indices per occupied cell; BTreeMap keeps the output
    // deterministic (lexicographic cell order).
    let mut cells: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for (k, rec) in ds.records().iter().enumerate() {
        let point: Vec<f64> = dim_idx.iter().map(|&i| rec.values[i]).collect();
        let coords = grid.cell_of(&point)?;
        cells.entry(coords).or_default().push(k);
    }

    let mut out_records = Vec::new();
    let mut out_labels = Vec::new();
    let mut merged = 0usize;
    let mut mixed = 0usize;
    let mut coarse = 0usize;
    let n_specs = ds.specs().len();

    for (coords, members) in &cells {
        let first = labels.labels()[members[0]];
        let pure = members.iter().all(|&k| labels.labels()[k] == first);
        if !pure {
            mixed += 1;
            for &k in members {
                out_records.push(ds.records()[k].clone());
                out_labels.push(labels.labels()[k]);
            }
            continue;
        }

        // Synthetic instance: cell center on grid dims, member mean elsewhere.
        let center = grid.cell_center(coords);
        let mut values = vec![0.0_f64; n_specs];
        for (i, v) in values.iter_mut().enumerate() {
            *v = members.iter().map(|&k| ds.records()[k].values[i]).sum::<f64>()
                / members.len() as f64;
        }
        for (slot, &i) in dim_idx.iter().enumerate() {
            values[i] = center[slot];
        }

        // Defensive re-label: the merge must not change the cell's label.
        let subset_ok = labels.subset().iter().all(|name| {
            let i = ds.spec_index(name).expect("label subset validated on creation");
            (0.0..=1.0).contains(&values[i])
        });
        let relabel = if subset_ok { Label::Pass } else { Label::Fail };
        if relabel != first {
            coarse += 1;
            for &k in members {
                out_records.push(ds.records()[k].clone());
                out_labels.push(labels.labels()[k]);
            }
            continue;
        }

        merged += 1;
        let id = format!("cell:{}", coords.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","));
        out_records.push(DeviceRecord::new(id, values));
        out_labels.push(first);
    }

    // Dataset::new clears the normalized flag; the records were assembled
    // in normalized units, so restore it directly.
    let compacted = Dataset::assume_normalized(Dataset::new(ds.specs().to_vec(), out_records)?);
    Ok(GridCompaction {
        dataset: compacted,
        labels: LabelVector::new(labels.subset().to_vec(), out_labels),
        merged_cells: merged,
        mixed_cells: mixed,
        coarse_cells: coarse,
    })
}


/// A piecewise-constant classifier over a grid: one attribute per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct LookupTable {
    grid: GridSpec,
    attributes: Vec<TriState>,
}

impl LookupTable {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn attributes(&self) -> &[TriState] {
        &self.attributes
    }

    /// Attribute of the cell containing `x`; out-of-bounds points clamp to
    /// the nearest edge cell.
    pub fn classify(&self, x: &[f64]) -> Result<TriState, GridError> {
        let coords = self.grid.cell_of(x)?;
        Ok(self.attributes[self.grid.flat_index(&coords)])
    }

    /// Counts of (good, bad, guard-band) cells.
    pub fn histogram(&self) -> (usize, usize, usize) {
        let mut h = (0usize, 0usize, 0usize);
        for a in &self.attributes {
            match a {
                TriState::Good => h.0 += 1,
                TriState::Bad => h.1 += 1,
                TriState::GuardBand => h.2 += 1,
            }
        }
        h
    }
}

/// Build a lookup table by classifying every cell center with the guard-band
/// model. The grid dimensions must equal the model's retained specifications
/// in order, and the cell count must fit the budget.
pub fn build_lookup_table(
    gb: &GuardBandModel,
    grid: GridSpec,
    budget: u128,
) -> Result<LookupTable, GridError> {
    if grid.dims() != gb.retained_specs() {
        return Err(GridError::DimsMismatch);
    }
    let cells = grid.cell_count();
    if cells > budget {
        return Err(GridError::CellLimitExceeded { cells, budget });
    }
    let mut attributes = Vec::with_capacity(cells as usize);
    for coords in grid.all_cells() {
        let center = grid.cell_center(&coords);
        attributes.push(gb.classify(&center)?);
    }
    Ok(LookupTable { grid, attributes })
}

fn attr_char(a: TriState) -> char {
    match a {
        TriState::Good => 'G',
        TriState::Bad => 'B',
        TriState::GuardBand => 'U',
    }
}

fn attr_from_char(c: char) -> Result<TriState, GridError> {
    match c {
        'G' => Ok(TriState::Good),
        'B' => Ok(TriState::Bad),
        'U' => Ok(TriState::GuardBand),
        other => Err(GridError::Format(format!("unknown attribute `{other}`"))),
    }
}

/// Write the tester-side table format: dimension count, one `name lo hi bins`
/// line per dimension, then the row-major attribute characters (`G`, `B`,
/// `U`) wrapped at 80 columns.
pub fn write_lut<W: Write>(mut w: W, lut: &LookupTable) -> Result<(), GridError> {
    writeln!(w, "{}", lut.grid.dims().len())?;
    for ((name, (lo, hi)), bins) in lut
        .grid
        .dims()
        .iter()
        .zip(lut.grid.bounds())
        .zip(lut.grid.bins())
    {
        writeln!(w, "{name} {lo} {hi} {bins}")?;
    }
    for chunk in lut.attributes.chunks(80) {
        let line: String = chunk.iter().map(|&a| attr_char(a)).collect();
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn save_lut(path: impl AsRef<Path>, lut: &LookupTable) -> Result<(), GridError> {
    write_lut(BufWriter::new(File::create(path)?), lut)
}

pub fn read_lut<R: BufRead>(r: R) -> Result<LookupTable, GridError> {
    let mut lines = r.lines();
    let mut next_line = || -> Result<String, GridError> {
        lines
            .next()
            .ok_or_else(|| GridError::Format("unexpected end of file".into()))?
            .map_err(GridError::Io)
    };
    let ndims: usize = next_line()?
        .trim()
        .parse()
        .map_err(|_| GridError::Format("bad dimension count".into()))?;
    let mut dims = Vec::with_capacity(ndims);
    let mut bins = Vec::with_capacity(ndims);
    let mut bounds = Vec::with_capacity(ndims);
    for _ in 0..ndims {
        let line = next_line()?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 4 {
            return Err(GridError::Format(format!("bad dimension line `{line}`")));
        }
        dims.push(parts[0].to_string());
        let lo: f64 = parts[1].parse().map_err(|_| GridError::Format("bad bound".into()))?;
        let hi: f64 = parts[2].parse().map_err(|_| GridError::Format("bad bound".into()))?;
        let b: usize = parts[3].parse().map_err(|_| GridError::Format("bad bin count".into()))?;
        bounds.push((lo, hi));
        bins.push(b);
    }
    let grid = GridSpec::new(dims, bins, bounds)?;
    let want = grid.cell_count() as usize;
    let mut attributes = Vec::with_capacity(want);
    for line in lines {
        for c in line?.trim().chars() {
            attributes.push(attr_from_char(c)?);
        }
    }
    if attributes.len() != want {
        return Err(GridError::Format(format!(
            "expected {want} attributes, found {}",
            attributes.len()
        )));
    }
    Ok(LookupTable { grid, attributes })
}

pub fn load_lut(path: impl AsRef<Path>) -> Result<LookupTable, GridError> {
    read_lut(BufReader::new(File::open(path)?))
}
