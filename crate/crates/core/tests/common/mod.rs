#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use triband_core::io::synthetic_rgb_sensor;
use triband_core::{
    build_design_matrix, Allocation, DesignMatrix, Enumerator, SearchSpaceSpec, WavelengthSet,
};

pub const TARGETS_NM: [f64; 12] = [
    410.0, 430.0, 450.0, 500.0, 520.0, 550.0, 578.0, 620.0, 680.0, 700.0, 720.0, 780.0,
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn targets() -> WavelengthSet {
    WavelengthSet::new(TARGETS_NM.to_vec()).unwrap()
}

/// Design matrix of the bundled sensor for the twelve standard targets,
/// 10 nm FWHM, unit peak transmittance.
pub fn synthetic_design() -> DesignMatrix {
    let sensor = synthetic_rgb_sensor().normalized().unwrap();
    build_design_matrix(&sensor, &targets(), 10.0, 1.0).unwrap()
}

/// Random strictly positive `c × p` design matrix.
pub fn random_design(rng: &mut impl Rng, c: usize, p: usize) -> DesignMatrix {
    let entries = DMatrix::from_fn(c, p, |_, _| rng.random_range(0.05..1.0));
    let t = WavelengthSet::new((0..p).map(|i| 400.0 + 20.0 * i as f64).collect()).unwrap();
    DesignMatrix::from_entries(entries, t, "random", 10.0).unwrap()
}

/// Uniformly random allocation from the canonical enumeration.
pub fn random_allocation(rng: &mut impl Rng, spec: SearchSpaceSpec) -> (u64, Allocation) {
    let mut e = Enumerator::new(spec).unwrap();
    let rank = rng.random_range(0..e.total());
    (rank, e.unrank(rank).unwrap())
}

/// Random `rows × cols` matrix with standard normal entries.
pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(rand_distr::StandardNormal))
}

/// All k-subsets of `0..p` as bitmasks.
pub fn subset_masks(p: usize, k: usize) -> Vec<u64> {
    (0u64..1 << p)
        .filter(|m| m.count_ones() as usize == k)
        .collect()
}

/// Every feasible allocation, found by trying all `n_cam`-combinations of
/// distinct subsets and keeping those that cover all targets. Each result is
/// a sorted list of subset bitmasks.
pub fn brute_force_allocations(p: usize, k: usize, n_cam: usize) -> Vec<Vec<u64>> {
    fn rec(
        masks: &[u64],
        start: usize,
        left: usize,
        full: u64,
        cur: &mut Vec<u64>,
        out: &mut Vec<Vec<u64>>,
    ) {
        if left == 0 {
            if cur.iter().fold(0, |a, m| a | m) == full {
                out.push(cur.clone());
            }
            return;
        }
        for i in start..masks.len() {
            cur.push(masks[i]);
            rec(masks, i + 1, left - 1, full, cur, out);
            cur.pop();
        }
    }
    let masks = subset_masks(p, k);
    let mut out = Vec::new();
    rec(&masks, 0, n_cam, (1u64 << p) - 1, &mut Vec::new(), &mut out);
    out
}

pub fn allocation_masks(a: &Allocation) -> Vec<u64> {
    let mut m: Vec<u64> = a
        .subsets()
        .iter()
        .map(|s| s.iter().fold(0u64, |acc, &i| acc | 1 << i))
        .collect();
    m.sort_unstable();
    m
}

/// Smallest per-trial ratio of output SNR (`‖x‖²/‖x̂ − x‖²`) to input SNR
/// (`‖Ax‖²/‖n‖²`) when the signal lies along the top right-singular vector
/// and the noise is `z·u_min + spread·w` with `z`, `w` standard normal.
/// As `spread → 0` the ratio approaches `1/κ²`.
pub fn adversarial_min_degradation(a: &DMatrix<f64>, spread: f64, trials: usize, seed: u64) -> f64 {
    use nalgebra::DVector;
    use rand_distr::StandardNormal;
    let ext = triband_core::conditioning::extreme_singular_vectors(a).unwrap();
    let solver = triband_core::LeastSquares::from_matrix(a.clone()).unwrap();
    let x = ext.v_max.clone();
    let clean = a * &x;
    let mut rng = rng(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..trials {
        let z: f64 = rng.sample(StandardNormal);
        let w = DVector::from_fn(a.nrows(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = &ext.u_min * z + w * spread;
        let x_hat = solver.solve(&(&clean + &n)).unwrap().x_hat;
        let out = x.norm_squared() / (&x_hat - &x).norm_squared();
        let input = clean.norm_squared() / n.norm_squared();
        worst = worst.min(out / input);
    }
    worst
}
