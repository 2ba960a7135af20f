//! Acquisition simulation against quadrature oracles and the SNR floor.

mod common;

use approx::assert_relative_eq;
use nalgebra::DVector;

use triband_core::io::synthetic_rgb_sensor;
use triband_core::{
    build_design_matrix, conditioning, simulate_exact, stack_system, Enumerator, FilterSpec,
    SceneSpectrum, SearchSpaceSpec, SpectralCurve,
};

use common::*;

fn smooth_scene(l: f64) -> f64 {
    1.0 + 0.5 * (2.0 * std::f64::consts::PI * (l - 387.0) / 300.0).sin()
}

fn scene_on(grid: &[f64]) -> SceneSpectrum {
    let values = grid.iter().map(|&l| smooth_scene(l)).collect();
    SceneSpectrum::new(SpectralCurve::new("smooth", grid.to_vec(), values).unwrap())
}

#[test]
fn exact_simulation_matches_fine_quadrature() {
    let sensor = synthetic_rgb_sensor().normalized().unwrap();
    let grid = sensor.wavelengths_nm().to_vec();
    let scene = scene_on(&grid);
    let filter = FilterSpec::uniform(&[450.0, 578.0, 720.0], 10.0, 1.0).unwrap();
    let y = simulate_exact(&scene, &sensor, &filter).unwrap();
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    let h = 0.01;
    let n = ((hi - lo) / h).round() as usize;
    for (c, ch) in sensor.channels().iter().enumerate() {
        // Composite Simpson at 0.01 nm on the linear interpolant of E·S.
        let product: Vec<f64> = grid
            .iter()
            .zip(ch.values())
            .map(|(&l, s)| smooth_scene(l) * s)
            .collect();
        let f = |l: f64| {
            let t = l - lo;
            let i = (t.floor() as usize).min(product.len() - 2);
            let frac = t - i as f64;
            (product[i] * (1.0 - frac) + product[i + 1] * frac) * filter.transmittance(l)
        };
        let mut sum = f(lo) + f(hi);
        for i in 1..n {
            sum += f(lo + h * i as f64) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        assert_relative_eq!(y[c], sum * h / 3.0, max_relative = 1e-4);
    }
}

#[test]
fn narrowband_gap_shrinks_with_band_width() {
    let sensor = synthetic_rgb_sensor().normalized().unwrap();
    let scene = scene_on(sensor.wavelengths_nm());
    let targets = targets();
    let alloc = Enumerator::new(SearchSpaceSpec::new(12, 3, 4).unwrap())
        .unwrap()
        .unrank(10_048)
        .unwrap();
    let x = DVector::from_iterator(12, TARGETS_NM.iter().map(|&l| smooth_scene(l)));
    let gap = |fwhm: f64| {
        let d = build_design_matrix(&sensor, &targets, fwhm, 1.0).unwrap();
        let a = stack_system(std::slice::from_ref(&d), &alloc).unwrap();
        let mut exact = Vec::new();
        for subset in alloc.subsets() {
            let centers: Vec<f64> = subset.iter().map(|&i| TARGETS_NM[i]).collect();
            let filter = FilterSpec::uniform(&centers, fwhm, 1.0).unwrap();
            exact.extend(
                simulate_exact(&scene, &sensor, &filter)
                    .unwrap()
                    .iter()
                    .copied(),
            );
        }
        let exact = DVector::from_vec(exact);
        (&exact - a.entries() * &x).norm() / exact.norm()
    };
    let gaps: Vec<f64> = [20.0, 10.0, 5.0, 2.5].iter().map(|&w| gap(w)).collect();
    for w in gaps.windows(2) {
        assert!(w[1] < w[0], "gap did not shrink: {gaps:?}");
    }
    assert!(gaps[3] < 1e-3, "{gaps:?}");
}

#[test]
fn adversarial_noise_drives_degradation_to_the_floor() {
    let d = synthetic_design();
    let alloc = Enumerator::new(SearchSpaceSpec::new(12, 3, 4).unwrap())
        .unwrap()
        .unrank(10_048)
        .unwrap();
    let a = stack_system(std::slice::from_ref(&d), &alloc).unwrap();
    let floor = conditioning(&a).snr_worst_factor;
    let mut previous = f64::INFINITY;
    for spread in [1.0, 0.1, 0.01, 0.001] {
        let worst = adversarial_min_degradation(a.entries(), spread, 10_000, 17);
        assert!(worst >= floor * (1.0 - 1e-9), "{worst} below floor {floor}");
        assert!(worst <= previous);
        previous = worst;
    }
    assert!(previous <= floor * 1.001, "{previous} vs floor {floor}");
}
