//! Design toolkit for multi-camera multispectral imaging systems built from
//! RGB cameras and narrow multi-band filters.
//!
//! The pipeline:
//!
//! 1. [`spectral`]: sensor sensitivities and Gaussian passbands, overlap
//!    integrals.
//! 2. [`assembly`]: the design matrix `D`, column masks, the stacked system
//!    matrix of an allocation, and the block-diagonal factorisation of the
//!    minimum case.
//! 3. [`enumeration`] / [`table`]: counting, streaming and unranking every
//!    feasible wavelength allocation; the persisted index table.
//! 4. [`mod@conditioning`] / [`mod@optimize`]: condition number, frame bounds and
//!    worst-case SNR factor; exhaustive argmin over all allocations.
//! 5. [`reconstruction`]: simulated acquisition, least-squares recovery and
//!    Monte Carlo SNR.

pub mod assembly;
pub mod conditioning;
pub mod enumeration;
pub mod error;
pub mod io;
pub mod optimize;
pub mod reconstruction;
pub mod spectral;
pub mod table;

pub use assembly::{
    block_diag_factor, build_design_matrix, check_feasibility, mask_columns, stack_system,
    Allocation, BlockDiagonal, DesignMatrix, FeasibilityReport, Permutation, SystemMatrix,
    WavelengthSet,
};
pub use conditioning::{
    conditioning, conditioning_of, singular_values, worst_case_snr_demo, ConditioningReport,
    SnrDemo, RANK_TOLERANCE,
};
pub use enumeration::{
    count_feasible, count_minimum, enumerate_allocations, AllocationIter, Enumerator,
    SearchSpaceSpec,
};
pub use error::{Error, Result};
pub use optimize::{optimize, optimize_ranks, OptimizeOptions, RankedAllocation, RankingResult};
pub use reconstruction::{
    monte_carlo_snr, simulate_exact, simulate_mixed, solve_ls, solve_per_block, LeastSquares,
    NoiseKind, NoiseModel, ReconstructionResult, SceneSpectrum, SnrSummary, SolveMethod,
};
pub use spectral::{
    band_transmittance, mixing_coefficient, normalize_sensor, FilterSpec, GaussianBand, Overlap,
    SensorModel, SpectralCurve,
};
pub use table::{build_index_table, load_index_table, save_index_table, IndexTable};
