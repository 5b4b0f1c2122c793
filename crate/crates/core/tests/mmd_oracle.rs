mod common;

use common::{naive_mmd, random_matrix};
use mspec_core::mmd::{mmd_biased, KernelSpec, MmdReference};
use mspec_core::ndcompute::Array;
use mspec_core::rng::seeded;
use proptest::prelude::*;

#[test]
fn blocked_estimator_matches_double_loop() {
    let mut rng = seeded(2024);
    for (m, n, s) in [(1, 1, 1), (65, 3, 2), (130, 129, 5), (64, 64, 16), (200, 7, 3)] {
        let a = random_matrix(&mut rng, m, s, 1.0);
        let b = random_matrix(&mut rng, n, s, 1.3);
        for spec in [KernelSpec::gaussian_default(s), KernelSpec::imq_default(s)] {
            let got = mmd_biased(&spec, &a, &b).unwrap().mmd_sq;
            assert!((got - naive_mmd(&spec, &a, &b)).abs() < 1e-10, "m={} n={} s={}", m, n, s);
            let cached = MmdReference::new(spec.clone(), a.clone()).unwrap().compare(&b).unwrap().mmd_sq;
            assert_eq!(cached, got);
        }
    }
}

#[test]
fn shifted_sample_has_positive_mmd() {
    let mut rng = seeded(5);
    let a = random_matrix(&mut rng, 100, 2, 1.0);
    let b = Array::matrix(100, 2, a.data().iter().map(|v| v + 3.0).collect()).unwrap();
    assert!(mmd_biased(&KernelSpec::gaussian_default(2), &a, &b).unwrap().mmd_sq > 0.5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symmetric_nonnegative_and_oracle_exact(seed in 0u64..10_000, m in 1usize..40, n in 1usize..40, s in 1usize..5) {
        let mut rng = seeded(seed);
        let a = random_matrix(&mut rng, m, s, 1.0);
        let b = random_matrix(&mut rng, n, s, 2.0);
        let spec = KernelSpec::imq_default(s);
        let ab = mmd_biased(&spec, &a, &b).unwrap();
        let ba = mmd_biased(&spec, &b, &a).unwrap();
        prop_assert_eq!(ab.mmd_sq.to_bits(), ba.mmd_sq.to_bits());
        prop_assert!(ab.mmd_sq >= -1e-12);
        prop_assert!((ab.mmd_sq - naive_mmd(&spec, &a, &b)).abs() < 1e-10);
    }
}
