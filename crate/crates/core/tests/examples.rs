use nalgebra::{DMatrix, DVector};

use subrad_core::constants::{compute_constants, SolverConfig};
use subrad_core::fixtures;
use subrad_core::oracle::{brute_force_oracle, OracleConfig};
use subrad_core::perturbations::{perturbed_model, PerturbationSpec, ScalarModel, Staircase, StaircaseSpec};
use subrad_core::radii::{eckart_young, radius_report};
use subrad_core::system::subreg_ratio;
use subrad_core::NormSpec;

fn cfg() -> SolverConfig {
    SolverConfig::default()
}

#[test]
fn cone_constants_coincide() {
    for (p, want, tol) in [(NormSpec::L1, 0.5, 1e-6), (NormSpec::L2, 0.5f64.sqrt(), 1e-3), (NormSpec::LInf, 1.0, 1e-6)] {
        let r = radius_report(&fixtures::cone(p), &cfg()).unwrap();
        let c = &r.constants;
        for (name, x) in [
            ("rg", c.rg),
            ("rg_diamond", c.rg_diamond),
            ("rg_circ_lower", c.rg_circ_lower),
            ("rg_circ_upper", c.rg_circ_upper),
            ("rad_ss", r.rad_ss.value),
            ("rad_c1", r.rad_c1.value),
        ] {
            assert!((x - want).abs() <= tol, "{p} {name} = {x}");
        }
        if p == NormSpec::L2 {
            assert!((c.rg_dagger.unwrap() - want).abs() <= 1e-3);
        }
    }
}

#[test]
fn zero_map_is_critical() {
    for p in NormSpec::ALL {
        let r = radius_report(&fixtures::zero_map(p), &cfg()).unwrap();
        let c = &r.constants;
        for x in [c.rg, c.rg_over, c.rg_diamond, c.rg_circ_lower, c.rg_circ_upper, r.rad_lip_upper.value, r.rad_ss.value] {
            assert_eq!(x, 0.0);
        }
        assert!(r.critical);
    }
}

#[test]
fn linear_system_matches_smallest_singular_value() {
    let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 0.0, 0.5, 0.3, 1.0, 0.0, 1.5]);
    let r = radius_report(&fixtures::linear(&a, NormSpec::L2).unwrap(), &cfg()).unwrap();
    let sigma = a.clone().svd(false, false).singular_values.min();
    assert!((r.rad_ss.value - sigma).abs() < 5e-3);
    assert!((eckart_young(&a).unwrap().radius - sigma).abs() < 1e-12);
}

#[test]
fn staircase_linearization_is_regular() {
    let st = Staircase::new(&StaircaseSpec::default()).unwrap();
    let c = compute_constants(&fixtures::staircase_linearized(), &cfg()).unwrap();
    for n in 1..6 {
        let x = st.a(n);
        let ratio = st.eval(x).unwrap() / x;
        assert!(ratio >= 1.0 - st.epsilon(n) - 1e-12 && ratio < 1.0);
        assert!(c.rg >= 1.0 - st.epsilon(n));
    }
}

fn growth(model: &dyn subrad_core::system::FeasibilityModel, r0: f64) -> Vec<f64> {
    (0..4).map(|d| subreg_ratio(model, r0 / 10f64.powi(d), 4000, 11).unwrap().ratio).collect()
}

#[test]
fn quadratic_perturbation_destroys_subregularity() {
    let sys = fixtures::zero_map(NormSpec::L2);
    let model = perturbed_model(&sys, &PerturbationSpec::Quadratic { coeff: 1.0 }).unwrap();
    let r = growth(&*model, 1e-1);
    for w in r.windows(2) {
        assert!(w[1] >= 5.0 * w[0], "{r:?}");
    }
}

#[test]
fn staircase_is_not_robust() {
    let spec = StaircaseSpec::default();
    for k in 1..=3 {
        let st = Staircase::new(&spec).unwrap();
        let model = ScalarModel::staircase(&spec, k).unwrap();
        let r0 = 0.1 * (st.a(k - 1) - st.a(k));
        let r = growth(&model, r0);
        for w in r.windows(2) {
            assert!(w[1] >= 5.0 * w[0], "k={k} {r:?}");
        }
    }
}

#[test]
fn oracle_agrees_with_solver_on_planar_fixtures() {
    let mut systems: Vec<_> = NormSpec::ALL.iter().map(|&p| fixtures::cone(p)).collect();
    systems.push(fixtures::linear(&DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 0.5]), NormSpec::L2).unwrap());
    for sys in systems {
        let c = compute_constants(&sys, &cfg()).unwrap();
        let o = brute_force_oracle(&sys, &OracleConfig::default()).unwrap();
        let close = |a: f64, b: f64| (a.is_infinite() && b.is_infinite()) || (a - b).abs() <= 2.0 * o.grid_error;
        assert!(close(c.rg, o.rg), "{} vs {}", c.rg, o.rg);
        assert!(close(c.rg_over, o.rg_over));
        assert!(close(c.mr_bound, o.mr_bound));
        assert!(close(c.ssr_bound, o.ssr_bound));
    }
}

#[test]
fn oracle_agrees_with_solver_on_random_systems() {
    for p in NormSpec::ALL {
        for seed in 100..108 {
            let sys = fixtures::random_system(seed, p);
            let c = compute_constants(&sys, &cfg()).unwrap();
            let o = brute_force_oracle(&sys, &OracleConfig::default()).unwrap();
            let close = |a: f64, b: f64| (a.is_infinite() && b.is_infinite()) || (a - b).abs() <= 2.0 * o.grid_error;
            assert!(close(c.rg, o.rg) && close(c.rg_over, o.rg_over), "{p} seed {seed}: {} vs {}", c.rg, o.rg);
            assert!(close(c.mr_bound, o.mr_bound) && close(c.ssr_bound, o.ssr_bound), "{p} seed {seed}");
        }
    }
}

#[test]
fn witness_matrix_maps_onto_graphical_derivative() {
    // B u = v with v ∈ DF(x̄|0)(u) for a unit u
    let sys = fixtures::cone(NormSpec::L1);
    let c = compute_constants(&sys, &cfg()).unwrap();
    let w = c.witness.unwrap();
    let b = w.matrix().unwrap().unwrap();
    let (u, v) = (w.u(), w.v());
    assert!((&b * &u - &v).amax() < 1e-9);
    assert!(sys.graphical_derivative_contains(&u, &v, 1e-9).unwrap());
    let zero = DVector::zeros(2);
    assert!(sys.graphical_derivative_contains(&zero, &zero, 0.0).unwrap());
}
