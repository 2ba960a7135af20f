//! Design matrix construction, column masking and stacking of per-camera
//! blocks into the global system matrix.

use std::fmt;
use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::conditioning::{singular_values, RANK_TOLERANCE};
use crate::error::{Error, Result};
use crate::spectral::{mixing_coefficient, GaussianBand, SensorModel};

/// The ordered set of target center wavelengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavelengthSet {
    wavelengths_nm: Vec<f64>,
}

impl WavelengthSet {
    pub fn new(wavelengths_nm: Vec<f64>) -> Result<Self> {
        if wavelengths_nm.is_empty() {
            return Err(Error::InvalidWavelengths("no target wavelengths".into()));
        }
        if let Some(w) = wavelengths_nm.iter().find(|w| !w.is_finite()) {
            return Err(Error::InvalidWavelengths(format!(
                "non-finite wavelength {w}"
            )));
        }
        if let Some(w) = wavelengths_nm.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidWavelengths(format!(
                "targets must be distinct and strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self { wavelengths_nm })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.wavelengths_nm
    }

    pub fn len(&self) -> usize {
        self.wavelengths_nm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavelengths_nm.is_empty()
    }
}

/// One wavelength allocation: a k-subset of target indices per camera.
///
/// Indices are 0-based internally. Encodings written to disk or shown to
/// users are 1-based (see [`Allocation::to_one_based`]).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Allocation {
    subsets: Vec<Vec<usize>>,
    canonical: bool,
}

impl Allocation {
    /// Builds an allocation in the given camera order. Each subset must hold
    /// distinct indices and all subsets must have the same size.
    pub fn new(subsets: Vec<Vec<usize>>) -> Result<Self> {
        let k = subsets
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InfeasibleAllocation("allocation has no cameras".into()))?;
        if k == 0 {
            return Err(Error::InfeasibleAllocation(
                "empty wavelength subset".into(),
            ));
        }
        for (i, s) in subsets.iter().enumerate() {
            if s.len() != k {
                return Err(Error::InfeasibleAllocation(format!(
                    "camera {} has {} wavelengths, expected {k}",
                    i + 1,
                    s.len()
                )));
            }
            let mut sorted = s.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InfeasibleAllocation(format!(
                    "camera {} repeats a wavelength index",
                    i + 1
                )));
            }
        }
        Ok(Self {
            subsets,
            canonical: false,
        })
    }

    /// Parses 1-based indices.
    pub fn from_one_based(subsets: &[Vec<usize>]) -> Result<Self> {
        let zero_based = subsets
            .iter()
            .map(|s| {
                s.iter()
                    .map(|&i| {
                        i.checked_sub(1).ok_or_else(|| {
                            Error::InfeasibleAllocation("wavelength indices are 1-based".into())
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(zero_based)
    }

    /// Crate-internal constructor for subsets already known to be canonical.
    pub(crate) fn from_canonical_unchecked(subsets: Vec<Vec<usize>>) -> Self {
        Self {
            subsets,
            canonical: true,
        }
    }

    /// Sorted within each subset, subsets in lexicographic order.
    pub fn canonical(&self) -> Self {
        let mut subsets = self.subsets.clone();
        for s in &mut subsets {
            s.sort_unstable();
        }
        subsets.sort();
        Self {
            subsets,
            canonical: true,
        }
    }

    pub fn is_canonical(&self) -> bool {
        self.canonical
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    pub fn n_cam(&self) -> usize {
        self.subsets.len()
    }

    pub fn k(&self) -> usize {
        self.subsets[0].len()
    }

    /// Flattened 0-based encoding; the sort key for ties.
    pub fn encoding(&self) -> Vec<usize> {
        self.subsets.iter().flatten().copied().collect()
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.subsets.iter().flatten().map(|i| i + 1).collect()
    }

    pub fn wavelengths_nm(&self, targets: &WavelengthSet) -> Vec<Vec<f64>> {
        self.subsets
            .iter()
            .map(|s| s.iter().map(|&i| targets.as_slice()[i]).collect())
            .collect()
    }

    /// True when no two cameras share an identical wavelength set.
    pub fn subsets_distinct(&self) -> bool {
        let c = self.canonical();
        c.subsets.windows(2).all(|w| w[0] != w[1])
    }

    /// True when the union of subsets is exactly `{0..p}`.
    pub fn covers(&self, p: usize) -> bool {
        let mut seen = vec![false; p];
        for &i in self.subsets.iter().flatten() {
            match seen.get_mut(i) {
                Some(s) => *s = true,
                None => return false,
            }
        }
        seen.into_iter().all(|s| s)
    }
}

impl fmt::Display for Allocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .subsets
            .iter()
            .map(|s| {
                let idx: Vec<String> = s.iter().map(|i| (i + 1).to_string()).collect();
                format!("{{{}}}", idx.join(","))
            })
            .collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// Columns whose largest entry is below this fraction of the matrix's largest
/// entry count as all-zero (Gaussian tails never vanish exactly).
pub const ZERO_COLUMN_TOLERANCE: f64 = 1e-12;

/// Mixing coefficients of every channel against every target band (C × p).
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    entries: DMatrix<f64>,
    targets: WavelengthSet,
    sensor_label: String,
    filter_fwhm_nm: f64,
    truncated_columns: Vec<usize>,
}

impl DesignMatrix {
    /// Wraps a precomputed coefficient matrix, enforcing nonnegative finite
    /// entries and no (numerically) all-zero column.
    pub fn from_entries(
        entries: DMatrix<f64>,
        targets: WavelengthSet,
        sensor_label: impl Into<String>,
        filter_fwhm_nm: f64,
    ) -> Result<Self> {
        if entries.ncols() != targets.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} columns for {} targets",
                entries.ncols(),
                targets.len()
            )));
        }
        if entries.nrows() == 0 {
            return Err(Error::DimensionMismatch("design matrix has no rows".into()));
        }
        if let Some(v) = entries.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::DimensionMismatch(format!(
                "design matrix entry {v} is negative or non-finite"
            )));
        }
        let scale = entries.max();
        for (i, col) in entries.column_iter().enumerate() {
            if col.max() <= ZERO_COLUMN_TOLERANCE * scale {
                return Err(Error::ZeroColumn {
                    index: i,
                    wavelength_nm: targets.as_slice()[i],
                });
            }
        }
        Ok(Self {
            entries,
            targets,
            sensor_label: sensor_label.into(),
            filter_fwhm_nm,
            truncated_columns: Vec::new(),
        })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn targets(&self) -> &WavelengthSet {
        &self.targets
    }

    pub fn sensor_label(&self) -> &str {
        &self.sensor_label
    }

    pub fn filter_fwhm_nm(&self) -> f64 {
        self.filter_fwhm_nm
    }

    pub fn channels(&self) -> usize {
        self.entries.nrows()
    }

    pub fn p(&self) -> usize {
        self.entries.ncols()
    }

    /// Columns whose band lost more than 1% of its mass off the sensor grid.
    pub fn truncated_columns(&self) -> &[usize] {
        &self.truncated_columns
    }
}

/// Builds D with `d[c][i] = ∫ F_i(λ) S_c(λ) dλ` for a Gaussian band at each
/// target wavelength.
pub fn build_design_matrix(
    sensor: &SensorModel,
    targets: &WavelengthSet,
    fwhm_nm: f64,
    peak: f64,
) -> Result<DesignMatrix> {
    let (lo, hi) = (sensor.min_nm(), sensor.max_nm());
    let c = sensor.channel_count();
    let p = targets.len();
    let mut entries = DMatrix::zeros(c, p);
    let mut truncated = Vec::new();
    for (i, &lambda) in targets.as_slice().iter().enumerate() {
        if lambda < lo || lambda > hi {
            return Err(Error::TargetOutOfRange {
                wavelength_nm: lambda,
                min_nm: lo,
                max_nm: hi,
            });
        }
        let band = GaussianBand::new(lambda, fwhm_nm, peak)?;
        for ch in 0..c {
            let o = mixing_coefficient(sensor, ch, &band)?;
            entries[(ch, i)] = o.value;
            if ch == 0 && o.band_outside_range() {
                truncated.push(i);
            }
        }
    }
    let label = sensor.channel_names().join("/");
    let mut d = DesignMatrix::from_entries(entries, targets.clone(), label, fwhm_nm)?;
    d.truncated_columns = truncated;
    Ok(d)
}

/// Copies the columns in `subset` and zeroes the rest.
pub fn mask_columns(design: &DesignMatrix, subset: &[usize]) -> DMatrix<f64> {
    let d = design.entries();
    let mut out = DMatrix::zeros(d.nrows(), d.ncols());
    for &i in subset {
        out.set_column(i, &d.column(i));
    }
    out
}

/// The stacked global forward operator for one allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrix {
    entries: DMatrix<f64>,
    allocation: Allocation,
    row_blocks: Vec<Range<usize>>,
}

impl SystemMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn allocation(&self) -> &Allocation {
        &self.allocation
    }

    /// Row range of each camera's block, in camera order.
    pub fn row_blocks(&self) -> &[Range<usize>] {
        &self.row_blocks
    }

    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    /// Camera that produced `row`.
    pub fn camera_of_row(&self, row: usize) -> Option<usize> {
        self.row_blocks.iter().position(|r| r.contains(&row))
    }

    /// Wraps an arbitrary matrix as a single-camera system over all columns.
    /// Useful for analysing matrices that were not assembled from a design.
    pub fn from_matrix(entries: DMatrix<f64>) -> Self {
        let p = entries.ncols();
        let rows = entries.nrows();
        Self {
            entries,
            allocation: Allocation::from_canonical_unchecked(vec![(0..p).collect()]),
            #[allow(clippy::single_range_in_vec_init)]
            row_blocks: vec![0..rows],
        }
    }
}

fn design_for_camera(designs: &[DesignMatrix], camera: usize) -> &DesignMatrix {
    if designs.len() == 1 {
        &designs[0]
    } else {
        &designs[camera]
    }
}

/// Writes the stacked system for `subsets` into a fresh matrix. No validation.
pub(crate) fn fill_system<S: AsRef<[usize]>>(
    designs: &[DesignMatrix],
    subsets: &[S],
) -> DMatrix<f64> {
    let rows: usize = (0..subsets.len())
        .map(|i| design_for_camera(designs, i).channels())
        .sum();
    let p = designs[0].p();
    let mut a = DMatrix::zeros(rows, p);
    let mut r0 = 0;
    for (cam, subset) in subsets.iter().enumerate() {
        let d = design_for_camera(designs, cam).entries();
        for &i in subset.as_ref() {
            for c in 0..d.nrows() {
                a[(r0 + c, i)] = d[(c, i)];
            }
        }
        r0 += d.nrows();
    }
    a
}

/// Stacks `mask_columns(D_i, K_i)` for every camera. `designs` holds either
/// one matrix shared by all cameras or one per camera.
pub fn stack_system(designs: &[DesignMatrix], allocation: &Allocation) -> Result<SystemMatrix> {
    let n_cam = allocation.n_cam();
    if designs.is_empty() || (designs.len() != 1 && designs.len() != n_cam) {
        return Err(Error::DimensionMismatch(format!(
            "{} design matrices for {n_cam} cameras",
            designs.len()
        )));
    }
    let p = designs[0].p();
    if designs.iter().any(|d| d.p() != p) {
        return Err(Error::DimensionMismatch(
            "design matrices disagree on the number of targets".into(),
        ));
    }
    if !allocation.subsets_distinct() {
        return Err(Error::InfeasibleAllocation(
            "condition (i): two cameras use identical wavelength sets".into(),
        ));
    }
    if !allocation.covers(p) {
        return Err(Error::InfeasibleAllocation(format!(
            "subsets do not cover exactly the {p} target wavelengths"
        )));
    }
    let entries = fill_system(designs, allocation.subsets());
    let mut row_blocks = Vec::with_capacity(n_cam);
    let mut r0 = 0;
    for cam in 0..n_cam {
        let c = design_for_camera(designs, cam).channels();
        row_blocks.push(r0..r0 + c);
        r0 += c;
    }
    Ok(SystemMatrix {
        entries,
        allocation: allocation.clone(),
        row_blocks,
    })
}

/// Block-diagonal matrix given by its square diagonal blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiagonal {
    blocks: Vec<DMatrix<f64>>,
}

impl BlockDiagonal {
    pub fn new(blocks: Vec<DMatrix<f64>>) -> Self {
        Self { blocks }
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    pub fn nrows(&self) -> usize {
        self.blocks.iter().map(|b| b.nrows()).sum()
    }

    pub fn ncols(&self) -> usize {
        self.blocks.iter().map(|b| b.ncols()).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows(), self.ncols());
        let (mut r, mut c) = (0, 0);
        for b in &self.blocks {
            out.view_mut((r, c), b.shape()).copy_from(b);
            r += b.nrows();
            c += b.ncols();
        }
        out
    }
}

/// Column permutation: column `r` of the block-diagonal factor lands in
/// column `target(r)` of the system matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    targets: Vec<usize>,
}

impl Permutation {
    pub fn new(targets: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; targets.len()];
        for &t in &targets {
            match seen.get_mut(t) {
                Some(s) if !*s => *s = true,
                _ => {
                    return Err(Error::DimensionMismatch(format!(
                        "{targets:?} is not a permutation"
                    )))
                }
            }
        }
        Ok(Self { targets })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            targets: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn target(&self, r: usize) -> usize {
        self.targets[r]
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    /// The 0/1 matrix `P` with `P[r, target(r)] = 1`.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.targets.len();
        let mut m = DMatrix::zeros(n, n);
        for (r, &t) in self.targets.iter().enumerate() {
            m[(r, t)] = 1.0;
        }
        m
    }
}

/// Factors a minimum-case system as `A = B·P` with `B` block-diagonal.
pub fn block_diag_factor(system: &SystemMatrix) -> Result<(BlockDiagonal, Permutation)> {
    let alloc = system.allocation();
    let p = system.ncols();
    let total: usize = alloc.subsets().iter().map(Vec::len).sum();
    if total != p || !alloc.covers(p) {
        return Err(Error::NotMinimumCase(format!(
            "allocation uses {total} passbands for {p} targets; each wavelength must appear exactly once"
        )));
    }
    if system.nrows() != p {
        return Err(Error::NotMinimumCase(format!(
            "system is {}x{p}, not square",
            system.nrows()
        )));
    }
    let a = system.entries();
    let mut blocks = Vec::with_capacity(alloc.n_cam());
    let mut targets = Vec::with_capacity(p);
    for (rows, subset) in system.row_blocks().iter().zip(alloc.subsets()) {
        if rows.len() != subset.len() {
            return Err(Error::NotMinimumCase(format!(
                "camera block has {} channels but {} passbands",
                rows.len(),
                subset.len()
            )));
        }
        let mut block = DMatrix::zeros(rows.len(), subset.len());
        for (bc, &col) in subset.iter().enumerate() {
            for (br, row) in rows.clone().enumerate() {
                block[(br, bc)] = a[(row, col)];
            }
        }
        blocks.push(block);
        targets.extend_from_slice(subset);
    }
    Ok((BlockDiagonal::new(blocks), Permutation::new(targets)?))
}

/// Pass/fail of each feasibility condition for one allocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    /// (i) no two cameras share a wavelength set.
    pub distinct: bool,
    /// Every target wavelength is measured at least once.
    pub coverage: bool,
    /// (ii) numerical full column rank.
    pub full_rank: bool,
    /// (iii) at least as many measurements as unknowns.
    pub determined: bool,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.distinct && self.coverage && self.full_rank && self.determined
    }

    /// Human-readable names of the violated conditions.
    pub fn violations(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if !self.distinct {
            v.push("condition (i) distinct wavelength sets");
        }
        if !self.full_rank {
            v.push("condition (ii) full column rank");
        }
        if !self.determined {
            v.push("condition (iii) determined or overdetermined system");
        }
        if !self.coverage {
            v.push("coverage of every target wavelength");
        }
        v
    }
}

pub fn check_feasibility(allocation: &Allocation, system: &DMatrix<f64>) -> FeasibilityReport {
    let p = system.ncols();
    let sv = singular_values(system);
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let sigma_min = if system.nrows() >= p {
        sv.last().copied().unwrap_or(0.0)
    } else {
        0.0
    };
    FeasibilityReport {
        distinct: allocation.subsets_distinct(),
        coverage: allocation.covers(p),
        full_rank: system.nrows() >= p && sigma_max > 0.0 && sigma_min > RANK_TOLERANCE * sigma_max,
        determined: system.nrows() >= p,
        sigma_min,
        sigma_max,
    }
}
