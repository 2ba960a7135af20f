//! Runs the 12-wavelength triband search on the bundled synthetic sensor and
//! prints the best allocations. The optional argument sets the camera count
//! (default 4).

use std::time::Instant;

use triband_core::io::synthetic_rgb_sensor;
use triband_core::{
    build_design_matrix, optimize, OptimizeOptions, SearchSpaceSpec, WavelengthSet,
};

fn main() -> triband_core::Result<()> {
    let sensor = synthetic_rgb_sensor().normalized()?;
    let targets = WavelengthSet::new(vec![
        410.0, 430.0, 450.0, 500.0, 520.0, 550.0, 578.0, 620.0, 680.0, 700.0, 720.0, 780.0,
    ])?;
    let d = build_design_matrix(&sensor, &targets, 10.0, 1.0)?;
    let n_cam = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(4);
    let spec = SearchSpaceSpec::new(12, 3, n_cam)?;
    let start = Instant::now();
    let opts = OptimizeOptions {
        top_m: 5,
        ..Default::default()
    };
    let res = optimize(std::slice::from_ref(&d), &spec, &opts)?;
    println!(
        "evaluated {} allocations ({} rank deficient) in {:.2?}",
        res.evaluated_count,
        res.infeasible_rank_count,
        start.elapsed()
    );
    for r in &res.top_m {
        println!(
            "kappa = {:.6}  {:?} nm",
            r.report.kappa,
            r.allocation.wavelengths_nm(&targets)
        );
    }
    Ok(())
}
