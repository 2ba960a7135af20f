//! Invariants checked on generated inputs.

mod common;

use nalgebra::{DMatrix, DVector};
use num_bigint::BigUint;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use triband_core::{
    block_diag_factor, conditioning_of, count_feasible, count_minimum, mixing_coefficient,
    solve_ls, stack_system, Allocation, Enumerator, GaussianBand, SearchSpaceSpec, SensorModel,
    SpectralCurve,
};

use common::{random_allocation, random_design};

fn binomial(n: u64, r: u64) -> BigUint {
    (0..r).fold(BigUint::from(1u32), |acc, i| acc * (n - i) / (i + 1))
}

/// Small search spaces whose totals fit comfortably in memory-free streaming.
fn small_spec() -> impl Strategy<Value = SearchSpaceSpec> {
    (2usize..=9, 1usize..=4)
        .prop_filter("k <= p", |(p, k)| k <= p)
        .prop_flat_map(|(p, k)| {
            let lo = p.div_ceil(k);
            (Just(p), Just(k), lo..=lo + 2)
        })
        .prop_map(|(p, k, n)| SearchSpaceSpec::new(p, k, n).unwrap())
        .prop_filter("nonempty", |s| count_feasible(s) > BigUint::from(0u32))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closed_form_matches_inclusion_exclusion(k in 1usize..=6, n_cam in 1usize..=6) {
        let spec = SearchSpaceSpec::new(k * n_cam, k, n_cam).unwrap();
        prop_assert_eq!(count_minimum(&spec).unwrap(), count_feasible(&spec));
    }

    #[test]
    fn count_is_bounded_by_unconstrained_choices(spec in small_spec()) {
        let subsets = binomial(spec.p as u64, spec.k as u64);
        let subsets: u64 = subsets.try_into().unwrap();
        prop_assert!(count_feasible(&spec) <= binomial(subsets, spec.n_cam as u64));
    }

    #[test]
    fn rank_and_unrank_are_inverse(spec in small_spec(), seed in any::<u64>()) {
        let mut e = Enumerator::new(spec).unwrap();
        let total = e.total();
        let r = seed % total;
        let a = e.unrank(r).unwrap();
        prop_assert!(a.is_canonical());
        prop_assert!(a.covers(spec.p));
        prop_assert!(a.subsets_distinct());
        prop_assert_eq!(e.rank(&a), Some(r));
        if r + 1 < total {
            let b = e.unrank(r + 1).unwrap();
            prop_assert!(a.encoding() < b.encoding());
        }
        prop_assert!(e.unrank(total).is_none());
    }

    #[test]
    fn canonical_form_ignores_camera_and_band_order(seed in any::<u64>(), rot in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (_, a) = random_allocation(&mut rng, SearchSpaceSpec::new(12, 3, 4).unwrap());
        let mut shuffled: Vec<Vec<usize>> = a.subsets().to_vec();
        shuffled.rotate_left(rot);
        for s in &mut shuffled {
            s.reverse();
        }
        let b = Allocation::new(shuffled).unwrap();
        prop_assert_eq!(b.canonical(), a.canonical());
        prop_assert_eq!(b.canonical().canonical(), b.canonical());
    }

    #[test]
    fn kappa_is_at_least_one_and_scale_free(
        seed in any::<u64>(), rows in 2usize..10, extra in 0usize..4, scale in 1e-3f64..1e3,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols = rows;
        let a = common::random_matrix(&mut rng, rows + extra, cols);
        let r = conditioning_of(&a);
        prop_assume!(r.rank_ok);
        prop_assert!(r.kappa >= 1.0);
        let scaled = conditioning_of(&(&a * scale)).kappa;
        prop_assert!((scaled - r.kappa).abs() <= 1e-9 * r.kappa);
        prop_assert!((r.snr_worst_factor * r.kappa * r.kappa - 1.0).abs() < 1e-12);
    }

    #[test]
    fn frame_bounds_hold(seed in any::<u64>(), x in prop::collection::vec(-10.0f64..10.0, 6)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = common::random_matrix(&mut rng, 9, 6);
        let r = conditioning_of(&a);
        let x = DVector::from_vec(x);
        let energy = (&a * &x).norm_squared();
        let xx = x.norm_squared();
        prop_assert!(r.frame_lower * xx <= energy * (1.0 + 1e-12) + 1e-300);
        prop_assert!(energy <= r.frame_upper * xx * (1.0 + 1e-12));
    }

    #[test]
    fn overlap_is_nonnegative_and_bounded(
        center in 380.0f64..960.0, fwhm in 1.0f64..60.0, peak in 0.05f64..=1.0, seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid: Vec<f64> = (400..=900).step_by(5).map(f64::from).collect();
        let values: Vec<f64> = grid.iter().map(|_| rand::Rng::random_range(&mut rng, 0.0..1.0)).collect();
        let vmax = values.iter().cloned().fold(0.0, f64::max);
        let sensor = SensorModel::new(vec![SpectralCurve::new("r", grid, values).unwrap()]).unwrap();
        let band = GaussianBand::new(center, fwhm, peak).unwrap();
        let o = mixing_coefficient(&sensor, 0, &band).unwrap();
        prop_assert!(o.value >= 0.0);
        prop_assert!(o.value <= band.area() * vmax * (1.0 + 1e-12));
        prop_assert!((0.0..=1.0).contains(&o.outside_mass));
    }

    #[test]
    fn block_factorization_is_exact(seed in any::<u64>(), k in 2usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_cam = 3;
        let p = k * n_cam;
        let d = random_design(&mut rng, k, p);
        let (_, alloc) = random_allocation(&mut rng, SearchSpaceSpec::new(p, k, n_cam).unwrap());
        let a = stack_system(std::slice::from_ref(&d), &alloc).unwrap();
        let (b, perm) = block_diag_factor(&a).unwrap();
        let bp: DMatrix<f64> = b.to_dense() * perm.to_matrix();
        prop_assert_eq!(&bp, a.entries());
    }

    #[test]
    fn noiseless_least_squares_recovers_signal(seed in any::<u64>(), extra in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_design(&mut rng, 3, 9);
        let (_, alloc) = random_allocation(&mut rng, SearchSpaceSpec::new(9, 3, 3 + extra).unwrap());
        let a = stack_system(std::slice::from_ref(&d), &alloc).unwrap();
        let r = conditioning_of(a.entries());
        prop_assume!(r.rank_ok && r.kappa < 1e6);
        let x = DVector::from_fn(9, |i, _| 1.0 + 0.1 * i as f64);
        let y = a.entries() * &x;
        let x_hat = solve_ls(&a, &y).unwrap().x_hat;
        prop_assert!((&x_hat - &x).norm() <= 1e-14 * r.kappa * x.norm() + 1e-12);
    }
}
