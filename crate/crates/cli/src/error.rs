use thiserror::Error;

use triband_core::Error as CoreError;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Data(_) => EXIT_DATA,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::InfeasibleAllocation(_)
            | CoreError::NoFeasibleAllocation { .. }
            | CoreError::RankDeficient { .. }
            | CoreError::SingularBlock { .. }
            | CoreError::NotMinimumCase(_)
            | CoreError::ZeroColumn { .. } => CliError::Infeasible(msg),
            CoreError::InvalidSearchSpace(_)
            | CoreError::TargetOutOfRange { .. }
            | CoreError::InvalidBand(_)
            | CoreError::InvalidWavelengths(_)
            | CoreError::InvalidNoise(_) => CliError::Config(msg),
            _ => CliError::Data(msg),
        }
    }
}
