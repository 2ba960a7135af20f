use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the design toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("sensor has no strictly positive value; cannot normalize")]
    AllZeroSensor,

    #[error("invalid spectral curve `{label}`: {reason}")]
    InvalidCurve { label: String, reason: String },

    #[error("invalid sensor: {0}")]
    InvalidSensor(String),

    #[error("invalid filter band: {0}")]
    InvalidBand(String),

    #[error("invalid wavelength set: {0}")]
    InvalidWavelengths(String),

    #[error("target wavelength {wavelength_nm} nm lies outside the sensor range [{min_nm}, {max_nm}] nm")]
    TargetOutOfRange {
        wavelength_nm: f64,
        min_nm: f64,
        max_nm: f64,
    },

    #[error("design matrix column {index} ({wavelength_nm} nm) is all zero")]
    ZeroColumn { index: usize, wavelength_nm: f64 },

    #[error("channel index {index} out of range for a {channels}-channel sensor")]
    ChannelOutOfRange { index: usize, channels: usize },

    #[error("invalid search space: {0}")]
    InvalidSearchSpace(String),

    #[error("infeasible allocation: {0}")]
    InfeasibleAllocation(String),

    #[error("not a minimum-case system: {0}")]
    NotMinimumCase(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("system is rank deficient (sigma_min = {sigma_min:e}, sigma_max = {sigma_max:e})")]
    RankDeficient { sigma_min: f64, sigma_max: f64 },

    #[error("block {block} of the block-diagonal factor is numerically singular")]
    SingularBlock { block: usize },

    #[error("every feasible allocation is rank deficient ({evaluated} evaluated)")]
    NoFeasibleAllocation { evaluated: u64 },

    #[error("scene spectrum [{scene_min}, {scene_max}] nm does not cover the sensor range [{sensor_min}, {sensor_max}] nm")]
    GridMismatch {
        scene_min: f64,
        scene_max: f64,
        sensor_min: f64,
        sensor_max: f64,
    },

    #[error("invalid noise model: {0}")]
    InvalidNoise(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("corrupt index table {path}: row {row}: {message}")]
    CorruptTable {
        path: PathBuf,
        row: usize,
        message: String,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
