//! Sensor and scene CSV ingestion.
//!
//! Sensor files have a header `wavelength_nm,<ch1>,<ch2>,...` followed by one
//! row per grid point. Scene files use the same layout with a single value
//! column.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::reconstruction::SceneSpectrum;
use crate::spectral::{SensorModel, SpectralCurve};

/// The synthetic three-channel sensor shipped with the crate (387–950 nm,
/// 1 nm grid). It is a smooth stand-in, not a measured sensor.
pub const SYNTHETIC_RGB_CSV: &str = include_str!("../data/synthetic_rgb.csv");

/// Parsed columns of a wavelength-indexed CSV.
struct Columns {
    names: Vec<String>,
    wavelengths: Vec<f64>,
    values: Vec<Vec<f64>>,
}

fn parse_columns<R: Read>(reader: R, path: &Path) -> Result<Columns> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let first = header
        .get(0)
        .unwrap_or_default()
        .trim_start_matches('\u{feff}');
    if first != "wavelength_nm" {
        return Err(parse_err(
            1,
            format!("first column must be `wavelength_nm`, found `{first}`"),
        ));
    }
    if header.len() < 2 {
        return Err(parse_err(1, "no value columns".into()));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let mut wavelengths = Vec::new();
    let mut values = vec![Vec::new(); names.len()];
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != header.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        let mut fields = record.iter().map(|f| {
            f.parse::<f64>()
                .map_err(|_| parse_err(line, format!("`{f}` is not a number")))
        });
        let w = fields.next().expect("nonempty record")?;
        if let Some(&prev) = wavelengths.last() {
            if w <= prev {
                return Err(parse_err(
                    line,
                    format!("wavelength {w} does not increase (previous {prev})"),
                ));
            }
        }
        wavelengths.push(w);
        for (col, v) in values.iter_mut().zip(fields) {
            let v = v?;
            if !v.is_finite() || v < 0.0 {
                return Err(parse_err(
                    line,
                    format!("value {v} is negative or non-finite"),
                ));
            }
            col.push(v);
        }
    }
    Ok(Columns {
        names,
        wavelengths,
        values,
    })
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn parse_sensor_csv<R: Read>(reader: R, source: impl Into<PathBuf>) -> Result<SensorModel> {
    let path = source.into();
    let cols = parse_columns(reader, &path)?;
    let curves = cols
        .names
        .into_iter()
        .zip(cols.values)
        .map(|(name, v)| SpectralCurve::new(name, cols.wavelengths.clone(), v))
        .collect::<Result<Vec<_>>>()?;
    SensorModel::new(curves)
}

pub fn read_sensor_csv(path: impl AsRef<Path>) -> Result<SensorModel> {
    let path = path.as_ref();
    parse_sensor_csv(open(path)?, path)
}

/// The bundled synthetic RGB sensor, not yet normalized.
pub fn synthetic_rgb_sensor() -> SensorModel {
    parse_sensor_csv(SYNTHETIC_RGB_CSV.as_bytes(), "synthetic_rgb.csv")
        .expect("bundled sensor fixture is valid")
}

pub fn parse_scene_csv<R: Read>(reader: R, source: impl Into<PathBuf>) -> Result<SceneSpectrum> {
    let path = source.into();
    let cols = parse_columns(reader, &path)?;
    if cols.names.len() != 1 {
        return Err(Error::Parse {
            path,
            line: 1,
            message: format!(
                "scene needs exactly one value column, found {}",
                cols.names.len()
            ),
        });
    }
    let name = cols.names.into_iter().next().expect("one column");
    let values = cols.values.into_iter().next().expect("one column");
    Ok(SceneSpectrum::new(SpectralCurve::new(
        name,
        cols.wavelengths,
        values,
    )?))
}

pub fn read_scene_csv(path: impl AsRef<Path>) -> Result<SceneSpectrum> {
    let path = path.as_ref();
    parse_scene_csv(open(path)?, path)
}
