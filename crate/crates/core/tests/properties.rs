use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use subrad_core::constants::{compute_constants, SolverConfig};
use subrad_core::fixtures;
use subrad_core::matrices::{frobenius_min_matrix, min_opnorm_matrix, OpnormConfig, Witness};
use subrad_core::norms::{dual_attainer, dual_norm, norm, operator_norm, NormSpec};
use subrad_core::perturbations::{declared_modulus, lip_estimate, perturbation_fn, step2_h, PerturbationSpec, Staircase, StaircaseSpec, Zigzag, ZigzagSpec};
use subrad_core::verify::{chain_violations, random_witness};

fn norm_spec() -> impl Strategy<Value = NormSpec> {
    prop_oneof![Just(NormSpec::L1), Just(NormSpec::L2), Just(NormSpec::LInf)]
}

fn vector(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, dim)
}

/// Rescales a random witness so that `‖u‖_p = ‖v*‖_q = 1` and the coupling still holds.
fn witness_for(seed: u64, n: usize, m: usize, p: NormSpec) -> Witness {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = random_witness(&mut rng, n, m);
    let (u, vs) = (w.u(), w.vstar());
    let (nu, nv) = (norm(&u, p), norm(&vs, p.dual()));
    let u = u / nu;
    let vs = vs / nv;
    let v = w.v();
    let mut us = w.ustar();
    let gap = vs.dot(&v) - us.dot(&u);
    // shift u* along a dual attainer z of u, which has zᵀu = 1
    us += dual_attainer(&u, p).unwrap() * gap;
    Witness::new(u, v, us, vs)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn hoelder_and_attainer(x in vector(3), y in vector(3), p in norm_spec()) {
        let (x, y) = (DVector::from_vec(x), DVector::from_vec(y));
        prop_assert!(x.dot(&y).abs() <= norm(&x, p) * dual_norm(&y, p) * (1.0 + 1e-12) + 1e-12);
        if norm(&x, p) > 1e-9 {
            let z = dual_attainer(&x, p).unwrap();
            prop_assert!((z.dot(&x) - norm(&x, p)).abs() < 1e-9 * (1.0 + norm(&x, p)));
            prop_assert!((dual_norm(&z, p) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn operator_norm_bounds_images(rows in prop::collection::vec(vector(3), 2), x in vector(3), p in norm_spec()) {
        let m = DMatrix::from_fn(2, 3, |i, j| rows[i][j]);
        let x = DVector::from_vec(x);
        prop_assert!(norm(&(&m * &x), p) <= operator_norm(&m, p) * norm(&x, p) * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn frobenius_minimum_is_feasible_and_below_other_solutions(seed in any::<u64>(), n in 1usize..=4, m in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_witness(&mut rng, n, m);
        let (b, f) = frobenius_min_matrix(&w).unwrap();
        prop_assert!(w.residual_of(&b) <= 1e-10);
        let other = min_opnorm_matrix(&w, NormSpec::L2, &OpnormConfig { max_evals: 2000, ..Default::default() }).unwrap();
        let om = DMatrix::from_fn(m, n, |i, j| other.matrix[i][j]);
        if w.residual_of(&om) <= 1e-9 {
            prop_assert!(om.norm() >= f - 1e-8);
        }
    }

    #[test]
    fn minimal_operator_norm_is_bracketed(seed in any::<u64>(), n in 1usize..=3, m in 1usize..=3, p in norm_spec()) {
        let w = witness_for(seed, n, m, p);
        let r = min_opnorm_matrix(&w, p, &OpnormConfig { max_evals: 4000, ..Default::default() }).unwrap();
        let b = DMatrix::from_fn(m, n, |i, j| r.matrix[i][j]);
        prop_assert!(w.residual_of(&b) <= 1e-8);
        prop_assert!(r.lower <= r.upper * (1.0 + 1e-9) + 1e-12);
        prop_assert!((operator_norm(&b, p) - r.upper).abs() <= 1e-8 * (1.0 + r.upper));
    }

    #[test]
    fn zigzag_is_odd_and_nonexpansive(t in -0.5f64..0.5, s in -0.5f64..0.5) {
        let z = Zigzag::new(&ZigzagSpec::default()).unwrap();
        let (a, b) = (z.eval(t).unwrap(), z.eval(s).unwrap());
        prop_assert_eq!(z.eval(-t).unwrap(), -a);
        prop_assert!((a - b).abs() <= (t - s).abs() * (1.0 + 1e-12) + 1e-15);
        prop_assert!(a.abs() <= t.abs());
    }

    #[test]
    fn staircase_below_identity(x in 1e-9f64..0.5) {
        let st = Staircase::new(&StaircaseSpec::default()).unwrap();
        let f = st.eval(x).unwrap();
        prop_assert!(f <= x && f >= 0.0);
        prop_assert_eq!(st.eval(-x).unwrap(), f);
    }

    #[test]
    fn declared_modulus_dominates_samples(seed in 0u64..1000, p in norm_spec(), lip in 0.1f64..3.0) {
        let sys = fixtures::random_system(seed, p);
        for spec in [
            PerturbationSpec::PiecewiseRandom { lip, seed, terms: 3 },
            PerturbationSpec::Linear { b: vec![vec![lip, -0.5], vec![0.25, 0.0]] },
        ] {
            let h = perturbation_fn(&spec, &sys).unwrap();
            let est = lip_estimate(&*h, sys.xbar(), 1.0, p, 300, seed);
            prop_assert!(est <= declared_modulus(&spec, &sys).unwrap() * (1.0 + 1e-9));
        }
    }

    #[test]
    fn step2_certificate_dominates_samples(seed in any::<u64>(), n in 1usize..=3, m in 1usize..=3, p in norm_spec()) {
        let w = witness_for(seed, n, m, p);
        let h = step2_h(&w, &ZigzagSpec::default(), p).unwrap();
        let f = |x: &DVector<f64>| h.eval(x);
        let est = lip_estimate(&f, &DVector::zeros(n), 0.2, p, 1000, seed);
        prop_assert!(est <= h.lipschitz_certificate() * (1.0 + 1e-9));
        prop_assert!(h.eval(&DVector::zeros(n)).amax() == 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn chain_holds_on_random_systems(seed in 1000u64..100_000, p in norm_spec()) {
        let sys = fixtures::random_system(seed, p);
        let bad = chain_violations(&sys, &SolverConfig::default()).unwrap();
        prop_assert!(bad.is_empty(), "{:?}", bad);
    }

    #[test]
    fn reports_round_trip_through_json(seed in 0u64..10_000, p in norm_spec()) {
        let sys = fixtures::random_system(seed, p);
        let r = compute_constants(&sys, &SolverConfig::default()).unwrap();
        let text = serde_json::to_string(&r).unwrap();
        let back: subrad_core::constants::ConstantsReport = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }
}
