//! Run configuration: a TOML file plus command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Sensor path value selecting the synthetic sensor bundled with the core crate.
pub const BUILTIN_SENSOR: &str = "builtin:synthetic-rgb";

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "TRIBAND_OUTPUT_DIR";

const FALLBACK_OUTPUT_DIR: &str = "triband-out";

fn default_fwhm() -> f64 {
    10.0
}
fn default_peak() -> f64 {
    1.0
}
fn default_top_m() -> usize {
    10
}
fn default_trials() -> u64 {
    1000
}

/// Everything needed to reproduce a run. Embedded verbatim in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub sensor_file: String,
    pub targets_nm: Vec<f64>,
    #[serde(default = "default_fwhm")]
    pub fwhm_nm: f64,
    #[serde(default = "default_peak")]
    pub peak_transmittance: f64,
    pub n_cam: usize,
    pub k: usize,
    #[serde(default = "default_top_m")]
    pub top_m: usize,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    /// Optional scene spectrum CSV (`wavelength_nm,<value>`) for `simulate`.
    #[serde(default)]
    pub scene_file: Option<String>,
}

/// Scalar fields that may be overridden from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub fwhm_nm: Option<f64>,
    pub peak_transmittance: Option<f64>,
    pub n_cam: Option<usize>,
    pub k: Option<usize>,
    pub top_m: Option<usize>,
    pub noise_sigma: Option<f64>,
    pub seed: Option<u64>,
    pub output_dir: Option<String>,
    pub trials: Option<u64>,
}

fn resolve_relative(base: &Path, file: &str) -> String {
    if file == BUILTIN_SENSOR || Path::new(file).is_absolute() {
        file.to_owned()
    } else {
        base.join(file).to_string_lossy().into_owned()
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads a config file. Relative `sensor_file` / `scene_file` paths are
    /// resolved against the config file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.sensor_file = resolve_relative(base, &cfg.sensor_file);
        cfg.scene_file = cfg.scene_file.as_deref().map(|f| resolve_relative(base, f));
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.fwhm_nm {
            self.fwhm_nm = v;
        }
        if let Some(v) = o.peak_transmittance {
            self.peak_transmittance = v;
        }
        if let Some(v) = o.n_cam {
            self.n_cam = v;
        }
        if let Some(v) = o.k {
            self.k = v;
        }
        if let Some(v) = o.top_m {
            self.top_m = v;
        }
        if let Some(v) = o.noise_sigma {
            self.noise_sigma = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = &o.output_dir {
            self.output_dir = Some(v.clone());
        }
        if let Some(v) = o.trials {
            self.trials = v;
        }
    }

    /// Fills `output_dir` from the environment when the config leaves it out.
    pub fn resolve_output_dir(&mut self) {
        if self.output_dir.is_none() {
            self.output_dir = Some(
                std::env::var(OUTPUT_DIR_ENV).unwrap_or_else(|_| FALLBACK_OUTPUT_DIR.to_owned()),
            );
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        PathBuf::from(self.output_dir.as_deref().unwrap_or(FALLBACK_OUTPUT_DIR))
    }

    pub fn p(&self) -> usize {
        self.targets_nm.len()
    }

    /// Checks everything that does not need the sensor data. Negated
    /// comparisons also reject NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), CliError> {
        if self.targets_nm.is_empty() {
            return Err(CliError::Config("targets_nm is empty".into()));
        }
        let mut sorted = self.targets_nm.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(CliError::Config("targets_nm contains duplicates".into()));
        }
        if self.targets_nm.windows(2).any(|w| w[1] < w[0]) {
            return Err(CliError::Config(
                "targets_nm must be listed in increasing order".into(),
            ));
        }
        if !(self.fwhm_nm > 0.0) {
            return Err(CliError::Config(format!(
                "fwhm_nm must be positive, got {}",
                self.fwhm_nm
            )));
        }
        if !(self.peak_transmittance > 0.0 && self.peak_transmittance <= 1.0) {
            return Err(CliError::Config(format!(
                "peak_transmittance must lie in (0, 1], got {}",
                self.peak_transmittance
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(CliError::Config(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        if self.k == 0 || self.k > self.p() {
            return Err(CliError::Config(format!(
                "k = {} must lie in 1..={} (the number of targets)",
                self.k,
                self.p()
            )));
        }
        if self.n_cam == 0 {
            return Err(CliError::Config("n_cam must be at least 1".into()));
        }
        if self.n_cam * self.k < self.p() {
            return Err(CliError::Infeasible(format!(
                "feasibility condition (iii) violated: n_cam*k = {}*{} = {} < p = {}; the targets cannot all be measured",
                self.n_cam,
                self.k,
                self.n_cam * self.k,
                self.p()
            )));
        }
        if self.trials == 0 {
            return Err(CliError::Config("trials must be at least 1".into()));
        }
        Ok(())
    }
}
