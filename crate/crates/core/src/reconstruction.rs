//! Simulated acquisition, least-squares reconstruction and SNR measurement.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::assembly::{BlockDiagonal, Permutation, SystemMatrix};
use crate::conditioning::conditioning_of;
use crate::error::{Error, Result};
use crate::spectral::{FilterSpec, SensorModel, SpectralCurve};

/// Scene spectral irradiance `E(λ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpectrum {
    pub curve: SpectralCurve,
}

impl SceneSpectrum {
    pub fn new(curve: SpectralCurve) -> Self {
        Self { curve }
    }

    /// Samples the scene at the target wavelengths, `x_i = E(λ_i)`.
    pub fn sample_targets(&self, targets_nm: &[f64]) -> Result<DVector<f64>> {
        let values = targets_nm
            .iter()
            .map(|&w| {
                self.curve.sample(w).ok_or(Error::GridMismatch {
                    scene_min: self.curve.min_nm(),
                    scene_max: self.curve.max_nm(),
                    sensor_min: w,
                    sensor_max: w,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DVector::from_vec(values))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    None,
    WhiteGaussian,
}

/// Additive noise on the measurements. The generator is ChaCha8 seeded from
/// `seed`, so a given seed reproduces the same noise on every platform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn none() -> Self {
        Self {
            kind: NoiseKind::None,
            sigma: 0.0,
            seed: 0,
        }
    }

    pub fn white_gaussian(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidNoise(format!(
                "white noise needs sigma > 0, got {sigma}"
            )));
        }
        Ok(Self {
            kind: NoiseKind::WhiteGaussian,
            sigma,
            seed,
        })
    }

    /// `none` for sigma = 0, white Gaussian otherwise.
    pub fn from_sigma(sigma: f64, seed: u64) -> Result<Self> {
        if sigma == 0.0 {
            Ok(Self {
                seed,
                ..Self::none()
            })
        } else {
            Self::white_gaussian(sigma, seed)
        }
    }

    /// The same model with the seed of trial `index` (`seed + index`).
    pub fn for_trial(&self, index: u64) -> Self {
        Self {
            seed: self.seed.wrapping_add(index),
            ..*self
        }
    }

    pub fn sample(&self, len: usize) -> DVector<f64> {
        match self.kind {
            NoiseKind::None => DVector::zeros(len),
            NoiseKind::WhiteGaussian => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                DVector::from_fn(len, |_, _| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    self.sigma * z
                })
            }
        }
    }
}

/// Noiseless channel values `y_c = ∫ E(λ) Σ_i F_i(λ) S_c(λ) dλ`. The scene is
/// interpolated onto the sensor grid and each passband is integrated exactly
/// against the interpolated product `E·S_c`, as for the mixing coefficients.
pub fn simulate_exact(
    scene: &SceneSpectrum,
    sensor: &SensorModel,
    filter: &FilterSpec,
) -> Result<DVector<f64>> {
    let grid = sensor.wavelengths_nm();
    if scene.curve.min_nm() > sensor.min_nm() || scene.curve.max_nm() < sensor.max_nm() {
        return Err(Error::GridMismatch {
            scene_min: scene.curve.min_nm(),
            scene_max: scene.curve.max_nm(),
            sensor_min: sensor.min_nm(),
            sensor_max: sensor.max_nm(),
        });
    }
    let radiance: Vec<f64> = grid
        .iter()
        .map(|&w| scene.curve.sample(w).expect("scene covers the grid"))
        .collect();
    Ok(DVector::from_iterator(
        sensor.channel_count(),
        sensor.channels().iter().map(|ch| {
            let product: Vec<f64> = radiance
                .iter()
                .zip(ch.values())
                .map(|(e, s)| e * s)
                .collect();
            filter
                .bands()
                .iter()
                .map(|band| band.integrate_against(grid, &product))
                .sum::<f64>()
        }),
    ))
}

/// `y = A x + n`.
pub fn simulate_mixed(
    x: &DVector<f64>,
    system: &SystemMatrix,
    noise: &NoiseModel,
) -> Result<DVector<f64>> {
    let a = system.entries();
    if x.len() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "signal has {} entries, system has {} columns",
            x.len(),
            a.ncols()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::DimensionMismatch(
            "signal has non-finite entries".into(),
        ));
    }
    Ok(a * x + noise.sample(a.nrows()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    Pseudoinverse,
    SquareInverse,
    PerBlock,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub x_hat: DVector<f64>,
    /// `‖y − A x_hat‖₂`.
    pub residual_norm: f64,
    /// `x_hat − x_true`, once a ground truth is supplied.
    pub per_band_error: Option<DVector<f64>>,
    pub method: SolveMethod,
}

impl ReconstructionResult {
    pub fn with_truth(mut self, x_true: &DVector<f64>) -> Self {
        self.per_band_error = Some(&self.x_hat - x_true);
        self
    }
}

enum Factor {
    Qr { q: DMatrix<f64>, r: DMatrix<f64> },
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

/// Reusable least-squares solver for one full-rank system. Tall systems are
/// solved through a QR factorisation, square ones through LU; the normal
/// equations are never formed.
pub struct LeastSquares {
    a: DMatrix<f64>,
    factor: Factor,
}

impl LeastSquares {
    pub fn new(system: &SystemMatrix) -> Result<Self> {
        Self::from_matrix(system.entries().clone())
    }

    pub fn from_matrix(a: DMatrix<f64>) -> Result<Self> {
        let report = conditioning_of(&a);
        if !report.rank_ok {
            return Err(Error::RankDeficient {
                sigma_min: report.sigma_min,
                sigma_max: report.sigma_max,
            });
        }
        let factor = if a.is_square() {
            Factor::Lu(a.clone().lu())
        } else {
            let qr = a.clone().qr();
            Factor::Qr {
                q: qr.q(),
                r: qr.r(),
            }
        };
        Ok(Self { a, factor })
    }

    pub fn method(&self) -> SolveMethod {
        match self.factor {
            Factor::Qr { .. } => SolveMethod::Pseudoinverse,
            Factor::Lu(_) => SolveMethod::SquareInverse,
        }
    }

    pub fn solve(&self, y: &DVector<f64>) -> Result<ReconstructionResult> {
        if y.len() != self.a.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} measurements for a system with {} rows",
                y.len(),
                self.a.nrows()
            )));
        }
        let x_hat = match &self.factor {
            Factor::Qr { q, r } => {
                r.solve_upper_triangular(&(q.transpose() * y))
                    .ok_or(Error::RankDeficient {
                        sigma_min: 0.0,
                        sigma_max: 0.0,
                    })?
            }
            Factor::Lu(lu) => lu.solve(y).ok_or(Error::RankDeficient {
                sigma_min: 0.0,
                sigma_max: 0.0,
            })?,
        };
        let residual_norm = (y - &self.a * &x_hat).norm();
        Ok(ReconstructionResult {
            x_hat,
            residual_norm,
            per_band_error: None,
            method: self.method(),
        })
    }
}

/// Least-squares estimate `A⁺ y`.
pub fn solve_ls(system: &SystemMatrix, y: &DVector<f64>) -> Result<ReconstructionResult> {
    LeastSquares::new(system)?.solve(y)
}

/// Solves each diagonal block on its own and undoes the column permutation.
/// `y` is in the row order of the system (block rows are contiguous).
pub fn solve_per_block(
    blocks: &BlockDiagonal,
    permutation: &Permutation,
    y: &DVector<f64>,
) -> Result<ReconstructionResult> {
    let n = blocks.ncols();
    if permutation.len() != n || y.len() != blocks.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "block system is {}x{n}, permutation has {} entries, y has {}",
            blocks.nrows(),
            permutation.len(),
            y.len()
        )));
    }
    let mut z = DVector::zeros(n);
    let mut residual_sq = 0.0;
    let (mut r0, mut c0) = (0, 0);
    for (i, b) in blocks.blocks().iter().enumerate() {
        let (rows, cols) = b.shape();
        let report = conditioning_of(b);
        if rows != cols || !report.rank_ok {
            return Err(Error::SingularBlock { block: i });
        }
        let yb = y.rows(r0, rows).into_owned();
        let zb = b
            .clone()
            .lu()
            .solve(&yb)
            .ok_or(Error::SingularBlock { block: i })?;
        residual_sq += (&yb - b * &zb).norm_squared();
        z.rows_mut(c0, cols).copy_from(&zb);
        r0 += rows;
        c0 += cols;
    }
    let mut x_hat = DVector::zeros(n);
    for (r, v) in z.iter().enumerate() {
        x_hat[permutation.target(r)] = *v;
    }
    Ok(ReconstructionResult {
        x_hat,
        residual_norm: residual_sq.sqrt(),
        per_band_error: None,
        method: SolveMethod::PerBlock,
    })
}

/// Aggregate output-SNR statistics of a Monte Carlo run.
///
/// Output SNR is measured on the reconstruction, `‖x‖² / ‖x_hat − x‖²`; input
/// SNR on the measurements, `‖A x‖² / ‖n‖²`. Per trial the ratio of the two
/// can never drop below `1/kappa²`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnrSummary {
    pub trials: u64,
    pub seed: u64,
    pub sigma: f64,
    pub kappa: f64,
    /// `1 / kappa²`.
    pub worst_case_factor: f64,
    /// Expected input SNR, `‖A x‖² / (rows · sigma²)`.
    pub input_snr: f64,
    /// `input_snr · worst_case_factor`.
    pub floor: f64,
    pub mean_output_snr: f64,
    pub min_output_snr: f64,
    /// `‖x‖²` over the mean squared reconstruction error.
    pub aggregate_output_snr: f64,
    /// Smallest per-trial ratio of output SNR to realised input SNR.
    pub min_degradation: f64,
    pub floor_respected: bool,
    /// Root-mean-square reconstruction error of each target.
    pub per_band_rmse: Vec<f64>,
}

/// Relative slack allowed when checking per-trial degradation against the
/// `1/kappa²` floor; covers rounding in the solve.
pub const FLOOR_SLACK: f64 = 1e-9;

pub fn monte_carlo_snr(
    system: &SystemMatrix,
    x_true: &DVector<f64>,
    noise: &NoiseModel,
    trials: u64,
) -> Result<SnrSummary> {
    if trials == 0 {
        return Err(Error::InvalidNoise("need at least one trial".into()));
    }
    let solver = LeastSquares::new(system)?;
    let a = system.entries();
    if x_true.len() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "signal has {} entries, system has {} columns",
            x_true.len(),
            a.ncols()
        )));
    }
    let report = conditioning_of(a);
    let clean = a * x_true;
    let signal = x_true.norm_squared();
    let p = a.ncols();

    let mut sum_snr = 0.0;
    let mut min_snr = f64::INFINITY;
    let mut min_degradation = f64::INFINITY;
    let mut sq_err = vec![0.0; p];
    for t in 0..trials {
        let n = noise.for_trial(t).sample(a.nrows());
        let y = &clean + &n;
        let x_hat = solver.solve(&y)?.x_hat;
        let err = &x_hat - x_true;
        for (acc, e) in sq_err.iter_mut().zip(err.iter()) {
            *acc += e * e;
        }
        let err_sq = err.norm_squared();
        let out_snr = if err_sq == 0.0 {
            f64::INFINITY
        } else {
            signal / err_sq
        };
        let noise_sq = n.norm_squared();
        if noise_sq > 0.0 && err_sq > 0.0 {
            let in_snr = clean.norm_squared() / noise_sq;
            min_degradation = min_degradation.min(out_snr / in_snr);
        }
        sum_snr += out_snr;
        min_snr = min_snr.min(out_snr);
    }
    let input_snr = match noise.kind {
        NoiseKind::None => f64::INFINITY,
        NoiseKind::WhiteGaussian => {
            clean.norm_squared() / (a.nrows() as f64 * noise.sigma * noise.sigma)
        }
    };
    let factor = report.snr_worst_factor;
    let mse_total: f64 = sq_err.iter().sum::<f64>() / trials as f64;
    Ok(SnrSummary {
        trials,
        seed: noise.seed,
        sigma: noise.sigma,
        kappa: report.kappa,
        worst_case_factor: factor,
        input_snr,
        floor: input_snr * factor,
        mean_output_snr: sum_snr / trials as f64,
        min_output_snr: min_snr,
        aggregate_output_snr: if mse_total == 0.0 {
            f64::INFINITY
        } else {
            signal / mse_total
        },
        min_degradation,
        floor_respected: min_degradation >= factor * (1.0 - FLOOR_SLACK),
        per_band_rmse: sq_err
            .into_iter()
            .map(|s| (s / trials as f64).sqrt())
            .collect(),
    })
}
