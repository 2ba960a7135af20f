//! Singular values, spectral condition number, frame bounds and the
//! worst-case SNR factor of a system matrix.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::assembly::SystemMatrix;
use crate::error::{Error, Result};

/// A matrix has full column rank when `sigma_min > RANK_TOLERANCE * sigma_max`.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Singular values in descending order.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = a
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    sv.sort_unstable_by(|x, y| y.total_cmp(x));
    sv
}

/// Conditioning of one system matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditioningReport {
    pub sigma_max: f64,
    pub sigma_min: f64,
    /// `sigma_max / sigma_min`; `+inf` when the matrix is rank deficient.
    pub kappa: f64,
    /// Lower frame bound, the smallest eigenvalue of `AᵀA`.
    pub frame_lower: f64,
    /// Upper frame bound, the largest eigenvalue of `AᵀA`.
    pub frame_upper: f64,
    /// `1 / kappa²`; 0 when rank deficient.
    pub snr_worst_factor: f64,
    pub rank_ok: bool,
}

impl ConditioningReport {
    fn from_extremes(sigma_max: f64, sigma_min: f64) -> Self {
        let rank_ok = sigma_max > 0.0 && sigma_min > RANK_TOLERANCE * sigma_max;
        let kappa = if rank_ok {
            sigma_max / sigma_min
        } else {
            f64::INFINITY
        };
        Self {
            sigma_max,
            sigma_min,
            kappa,
            frame_lower: sigma_min * sigma_min,
            frame_upper: sigma_max * sigma_max,
            snr_worst_factor: if rank_ok { 1.0 / (kappa * kappa) } else { 0.0 },
            rank_ok,
        }
    }
}

/// Conditioning of a raw matrix. Matrices with fewer rows than columns are
/// reported as rank deficient.
pub fn conditioning_of(a: &DMatrix<f64>) -> ConditioningReport {
    let sv = singular_values(a);
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let sigma_min = if a.nrows() >= a.ncols() {
        sv.last().copied().unwrap_or(0.0)
    } else {
        0.0
    };
    ConditioningReport::from_extremes(sigma_max, sigma_min)
}

pub fn conditioning(system: &SystemMatrix) -> ConditioningReport {
    conditioning_of(system.entries())
}

/// Extremal singular triplets `(sigma, u, v)` of a tall matrix.
#[derive(Debug, Clone)]
pub struct ExtremeSingularVectors {
    pub sigma_max: f64,
    pub u_max: DVector<f64>,
    pub v_max: DVector<f64>,
    pub sigma_min: f64,
    pub u_min: DVector<f64>,
    pub v_min: DVector<f64>,
}

pub fn extreme_singular_vectors(a: &DMatrix<f64>) -> Result<ExtremeSingularVectors> {
    if a.nrows() < a.ncols() || a.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "need a nonempty tall matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let svd = a.clone().svd(true, true);
    let s = &svd.singular_values;
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested V^T");
    let imax = s.imax();
    let imin = s.imin();
    Ok(ExtremeSingularVectors {
        sigma_max: s[imax],
        u_max: u.column(imax).into_owned(),
        v_max: vt.row(imax).transpose(),
        sigma_min: s[imin],
        u_min: u.column(imin).into_owned(),
        v_min: vt.row(imin).transpose(),
    })
}

/// Predicted and measured worst-case SNR degradation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SnrDemo {
    /// `1 / kappa²`.
    pub predicted: f64,
    /// `(‖Ax‖² / ‖An‖²) / (‖x‖² / ‖n‖²)` for the adversarial pair.
    pub empirical: f64,
}

/// Places the signal on the direction `A` shrinks most and the noise on the
/// direction `A` stretches most (the extremal eigenvectors of `AᵀA`), then
/// measures how much the energy ratio drops through `A`.
pub fn worst_case_snr_demo(system: &SystemMatrix, sigma_noise: f64) -> Result<SnrDemo> {
    if !(sigma_noise > 0.0 && sigma_noise.is_finite()) {
        return Err(Error::InvalidNoise(format!(
            "noise amplitude must be positive, got {sigma_noise}"
        )));
    }
    let a = system.entries();
    let report = conditioning_of(a);
    if !report.rank_ok {
        return Err(Error::RankDeficient {
            sigma_min: report.sigma_min,
            sigma_max: report.sigma_max,
        });
    }
    let ext = extreme_singular_vectors(a)?;
    let x = ext.v_min;
    let n = ext.v_max * sigma_noise;
    let input = x.norm_squared() / n.norm_squared();
    let output = (a * &x).norm_squared() / (a * &n).norm_squared();
    Ok(SnrDemo {
        predicted: report.snr_worst_factor,
        empirical: output / input,
    })
}
