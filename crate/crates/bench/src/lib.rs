//! Shared fixtures for the benchmarks in `benches/`.

use triband_core::io::synthetic_rgb_sensor;
use triband_core::{build_design_matrix, DesignMatrix, WavelengthSet};

pub const TARGETS_NM: [f64; 12] = [
    410.0, 430.0, 450.0, 500.0, 520.0, 550.0, 578.0, 620.0, 680.0, 700.0, 720.0, 780.0,
];

/// Design matrix of the bundled sensor for the twelve standard targets.
pub fn synthetic_design() -> DesignMatrix {
    let sensor = synthetic_rgb_sensor()
        .normalized()
        .expect("bundled sensor is valid");
    let targets = WavelengthSet::new(TARGETS_NM.to_vec()).expect("targets are increasing");
    build_design_matrix(&sensor, &targets, 10.0, 1.0).expect("targets lie inside the sensor range")
}
