//! Sensor sensitivities, Gaussian filter passbands and their overlap integrals.
//!
//! A [`SensorModel`] holds the per-channel responsivity curves of one camera on
//! a shared wavelength grid. A [`GaussianBand`] models one passband of a
//! multi-band filter. The mixing coefficient of band `i` in channel `c` is the
//! overlap integral `∫ F_i(λ) S_c(λ) dλ` over the sensor's native grid. The
//! sensor is taken as the linear interpolant of its samples and the Gaussian
//! is integrated exactly against it, so narrow bands and coarse grids need no
//! resampling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of a band's Gaussian mass allowed to fall outside the sensor grid
/// before the overlap is flagged as truncated.
pub const OUTSIDE_MASS_TOLERANCE: f64 = 0.01;

/// `2 sqrt(2 ln 2)`, the FWHM of a unit-sigma Gaussian.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// A function of wavelength sampled on a strictly increasing grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralCurve {
    wavelengths_nm: Vec<f64>,
    values: Vec<f64>,
    label: String,
}

impl SpectralCurve {
    pub fn new(
        label: impl Into<String>,
        wavelengths_nm: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let label = label.into();
        let invalid = |reason: String| Error::InvalidCurve {
            label: label.clone(),
            reason,
        };
        if wavelengths_nm.len() < 2 {
            return Err(invalid(format!(
                "need at least 2 samples, got {}",
                wavelengths_nm.len()
            )));
        }
        if wavelengths_nm.len() != values.len() {
            return Err(invalid(format!(
                "{} wavelengths but {} values",
                wavelengths_nm.len(),
                values.len()
            )));
        }
        if let Some(w) = wavelengths_nm.iter().find(|w| !w.is_finite()) {
            return Err(invalid(format!("non-finite wavelength {w}")));
        }
        if let Some(i) = wavelengths_nm.windows(2).position(|w| w[1] <= w[0]) {
            return Err(invalid(format!(
                "wavelengths not strictly increasing at sample {} ({} -> {})",
                i + 1,
                wavelengths_nm[i],
                wavelengths_nm[i + 1]
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(invalid(format!("value {v} is negative or non-finite")));
        }
        Ok(Self {
            wavelengths_nm,
            values,
            label,
        })
    }

    pub fn wavelengths_nm(&self) -> &[f64] {
        &self.wavelengths_nm
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn min_nm(&self) -> f64 {
        self.wavelengths_nm[0]
    }

    pub fn max_nm(&self) -> f64 {
        self.wavelengths_nm[self.wavelengths_nm.len() - 1]
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Linear interpolation; `None` outside the sampled range.
    pub fn sample(&self, wavelength_nm: f64) -> Option<f64> {
        let grid = &self.wavelengths_nm;
        if !(self.min_nm()..=self.max_nm()).contains(&wavelength_nm) {
            return None;
        }
        let hi = grid.partition_point(|&w| w < wavelength_nm);
        if hi == 0 {
            return Some(self.values[0]);
        }
        if grid[hi] == wavelength_nm {
            return Some(self.values[hi]);
        }
        let lo = hi - 1;
        let t = (wavelength_nm - grid[lo]) / (grid[hi] - grid[lo]);
        Some(self.values[lo] + t * (self.values[hi] - self.values[lo]))
    }

    /// Trapezoid-rule integral of the curve over its own grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.wavelengths_nm, |i| self.values[i])
    }
}

/// Trapezoid rule over `grid` with integrand values supplied by index.
pub(crate) fn trapezoid(grid: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    let mut sum = 0.0;
    let mut prev = f(0);
    for i in 1..grid.len() {
        let cur = f(i);
        sum += 0.5 * (grid[i] - grid[i - 1]) * (prev + cur);
        prev = cur;
    }
    sum
}

/// Per-channel spectral sensitivities of one camera, all on one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    channels: Vec<SpectralCurve>,
    normalized: bool,
}

impl SensorModel {
    /// Builds a sensor from curves that share an identical wavelength grid.
    /// Mismatched grids are rejected rather than resampled.
    pub fn new(channels: Vec<SpectralCurve>) -> Result<Self> {
        let first = channels
            .first()
            .ok_or_else(|| Error::InvalidSensor("sensor has no channels".into()))?;
        for ch in &channels[1..] {
            if ch.wavelengths_nm != first.wavelengths_nm {
                return Err(Error::InvalidSensor(format!(
                    "channel `{}` does not share the wavelength grid of channel `{}`",
                    ch.label, first.label
                )));
            }
        }
        Ok(Self {
            channels,
            normalized: false,
        })
    }

    pub fn channels(&self) -> &[SpectralCurve] {
        &self.channels
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn channel_names(&self) -> Vec<&str> {
        self.channels.iter().map(SpectralCurve::label).collect()
    }

    pub fn wavelengths_nm(&self) -> &[f64] {
        self.channels[0].wavelengths_nm()
    }

    pub fn min_nm(&self) -> f64 {
        self.channels[0].min_nm()
    }

    pub fn max_nm(&self) -> f64 {
        self.channels[0].max_nm()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Largest value over all channels.
    pub fn global_peak(&self) -> f64 {
        self.channels
            .iter()
            .map(SpectralCurve::peak)
            .fold(0.0, f64::max)
    }

    /// Divides every channel by the largest peak among all channels, so the
    /// relative channel gains are preserved and the global maximum is 1.
    pub fn normalized(&self) -> Result<Self> {
        let peak = self.global_peak();
        if peak <= 0.0 {
            return Err(Error::AllZeroSensor);
        }
        let scale = 1.0 / peak;
        let channels = self
            .channels
            .iter()
            .map(|ch| SpectralCurve {
                wavelengths_nm: ch.wavelengths_nm.clone(),
                values: ch.values.iter().map(|v| v * scale).collect(),
                label: ch.label.clone(),
            })
            .collect();
        Ok(Self {
            channels,
            normalized: true,
        })
    }
}

/// Free-function form of [`SensorModel::normalized`].
pub fn normalize_sensor(sensor: &SensorModel) -> Result<SensorModel> {
    sensor.normalized()
}

/// One Gaussian passband of a multi-band filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBand {
    pub center_nm: f64,
    pub fwhm_nm: f64,
    pub peak_transmittance: f64,
}

impl GaussianBand {
    pub fn new(center_nm: f64, fwhm_nm: f64, peak_transmittance: f64) -> Result<Self> {
        if !center_nm.is_finite() {
            return Err(Error::InvalidBand(format!("center {center_nm} nm")));
        }
        if !(fwhm_nm > 0.0 && fwhm_nm.is_finite()) {
            return Err(Error::InvalidBand(format!(
                "FWHM must be positive, got {fwhm_nm} nm"
            )));
        }
        if !(peak_transmittance > 0.0 && peak_transmittance <= 1.0) {
            return Err(Error::InvalidBand(format!(
                "peak transmittance must lie in (0, 1], got {peak_transmittance}"
            )));
        }
        Ok(Self {
            center_nm,
            fwhm_nm,
            peak_transmittance,
        })
    }

    pub fn sigma_nm(&self) -> f64 {
        self.fwhm_nm / FWHM_PER_SIGMA
    }

    pub fn transmittance(&self, wavelength_nm: f64) -> f64 {
        let sigma = self.sigma_nm();
        let d = wavelength_nm - self.center_nm;
        self.peak_transmittance * (-d * d / (2.0 * sigma * sigma)).exp()
    }

    /// Analytic integral over the whole real line.
    pub fn area(&self) -> f64 {
        self.peak_transmittance * self.sigma_nm() * (2.0 * std::f64::consts::PI).sqrt()
    }

    /// Exact integral of the band against the piecewise-linear interpolant of
    /// `values` on `grid`; the interpolant is zero outside the grid.
    pub fn integrate_against(&self, grid: &[f64], values: &[f64]) -> f64 {
        debug_assert_eq!(grid.len(), values.len());
        let sigma = self.sigma_nm();
        let scale = sigma * std::f64::consts::SQRT_2;
        let t = self.peak_transmittance;
        let mu = self.center_nm;
        let mut sum = 0.0;
        for i in 1..grid.len() {
            let (a, b) = (grid[i - 1], grid[i]);
            let (ua, ub) = ((a - mu) / scale, (b - mu) / scale);
            if (ua > 40.0 || ub < -40.0) || (values[i - 1] == 0.0 && values[i] == 0.0) {
                continue;
            }
            // ∫ G and ∫ G·(λ − a) over [a, b].
            let i0 = t * sigma * (std::f64::consts::PI / 2.0).sqrt() * erf_diff(ua, ub);
            let i1 = t * sigma * sigma * ((-ua * ua).exp() - (-ub * ub).exp()) + (mu - a) * i0;
            let slope = (values[i] - values[i - 1]) / (b - a);
            sum += values[i - 1] * i0 + slope * i1;
        }
        sum
    }

    /// Fraction of the Gaussian mass lying outside `[lo_nm, hi_nm]`.
    pub fn mass_outside(&self, lo_nm: f64, hi_nm: f64) -> f64 {
        let s = self.sigma_nm() * std::f64::consts::SQRT_2;
        let below = 0.5 * libm::erfc((self.center_nm - lo_nm) / s);
        let above = 0.5 * libm::erfc((hi_nm - self.center_nm) / s);
        below + above
    }
}

/// `erf(b) − erf(a)` for `a <= b`, using `erfc` in the tails to avoid
/// cancellation.
fn erf_diff(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        libm::erfc(a) - libm::erfc(b)
    } else if b <= 0.0 {
        libm::erfc(-b) - libm::erfc(-a)
    } else {
        libm::erf(b) - libm::erf(a)
    }
}

/// Free-function form of [`GaussianBand::transmittance`].
pub fn band_transmittance(band: &GaussianBand, wavelength_nm: f64) -> f64 {
    band.transmittance(wavelength_nm)
}

/// A k-band filter: Gaussian passbands with pairwise distinct centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    bands: Vec<GaussianBand>,
}

impl FilterSpec {
    pub fn new(bands: Vec<GaussianBand>) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::InvalidBand("filter has no passbands".into()));
        }
        for (i, a) in bands.iter().enumerate() {
            if bands[i + 1..].iter().any(|b| b.center_nm == a.center_nm) {
                return Err(Error::InvalidBand(format!(
                    "duplicate passband center {} nm",
                    a.center_nm
                )));
            }
        }
        Ok(Self { bands })
    }

    /// Filter with identical FWHM and peak at each of `centers_nm`.
    pub fn uniform(centers_nm: &[f64], fwhm_nm: f64, peak_transmittance: f64) -> Result<Self> {
        let bands = centers_nm
            .iter()
            .map(|&c| GaussianBand::new(c, fwhm_nm, peak_transmittance))
            .collect::<Result<Vec<_>>>()?;
        Self::new(bands)
    }

    pub fn bands(&self) -> &[GaussianBand] {
        &self.bands
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    /// Summed transmittance of all passbands.
    pub fn transmittance(&self, wavelength_nm: f64) -> f64 {
        self.bands
            .iter()
            .map(|b| b.transmittance(wavelength_nm))
            .sum()
    }
}

/// Result of an overlap integral, with the analytic mass the grid missed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overlap {
    pub value: f64,
    pub outside_mass: f64,
}

impl Overlap {
    /// True when more than 1% of the band's mass lies outside the sensor grid.
    pub fn band_outside_range(&self) -> bool {
        self.outside_mass > OUTSIDE_MASS_TOLERANCE
    }
}

/// Overlap integral `∫ F(λ) S_c(λ) dλ` of one band against one channel over
/// the sensor grid. Units are nm.
pub fn mixing_coefficient(
    sensor: &SensorModel,
    channel_index: usize,
    band: &GaussianBand,
) -> Result<Overlap> {
    let channel = sensor
        .channels
        .get(channel_index)
        .ok_or(Error::ChannelOutOfRange {
            index: channel_index,
            channels: sensor.channel_count(),
        })?;
    let grid = channel.wavelengths_nm();
    let values = channel.values();
    let value = band.integrate_against(grid, values);
    Ok(Overlap {
        value,
        outside_mass: band.mass_outside(channel.min_nm(), channel.max_nm()),
    })
}
