//! Acceptance gate: one line per criterion, nonzero exit if any criterion fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use subrad_core::constants::{compute_constants, SolverConfig};
use subrad_core::oracle::{brute_force_oracle, OracleConfig};
use subrad_core::perturbations::{perturbed_model, PerturbationSpec, ScalarModel, Staircase, StaircaseSpec};
use subrad_core::problem::ProblemSpec;
use subrad_core::radii::radius_report;
use subrad_core::system::{subreg_ratio, ConstraintSystem, FeasibilityModel};
use subrad_core::verify;
use subrad_core::NormSpec;

struct Outcome {
    pass: bool,
    detail: String,
}

fn fixture(name: &str) -> (ProblemSpec, ConstraintSystem) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(format!("{name}.json"));
    let text = std::fs::read_to_string(&path).unwrap();
    let spec: ProblemSpec = serde_json::from_str(&text).unwrap();
    let sys = spec.build().unwrap();
    (spec, sys)
}

const BUNDLED: [&str; 6] = ["cone_p1", "cone_p2", "cone_pinf", "zero_map", "linear_A", "staircase"];

fn cone_cases() -> [(&'static str, f64, f64); 3] {
    [("cone_p1", 0.5, 1e-6), ("cone_p2", 0.5f64.sqrt(), 1e-3), ("cone_pinf", 1.0, 1e-6)]
}

fn criterion_1() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, want, tol) in cone_cases() {
        let (spec, sys) = fixture(name);
        let t = Instant::now();
        let r = radius_report(&sys, &spec.solver_config()).unwrap();
        let dt = t.elapsed();
        let ok = (r.rad_ss.value - want).abs() <= tol && (r.rad_c1.value - want).abs() <= tol && dt < Duration::from_secs(10);
        pass &= ok;
        detail.push(format!("{name}: rad_ss={:.8} rad_c1={:.8} ({:.2}s)", r.rad_ss.value, r.rad_c1.value, dt.as_secs_f64()));
    }
    Outcome { pass, detail: detail.join("; ") }
}

fn criterion_2() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, want, tol) in cone_cases() {
        let (spec, sys) = fixture(name);
        let c = compute_constants(&sys, &spec.solver_config()).unwrap();
        let mut vals = vec![c.rg, c.rg_diamond, c.rg_circ_lower, c.rg_circ_upper];
        if sys.norm() == NormSpec::L2 {
            vals.push(c.rg_dagger.unwrap_or(f64::NAN));
        }
        let worst = vals.iter().map(|v| (v - want).abs()).fold(0.0, f64::max);
        pass &= worst <= tol;
        detail.push(format!("{name}: max deviation {worst:.2e}"));
    }
    Outcome { pass, detail: detail.join("; ") }
}

fn suite_outcome(r: verify::SuiteOutcome, dt: Duration, limit: Option<Duration>) -> Outcome {
    let in_time = limit.is_none_or(|l| dt < l);
    let mut detail = format!("{}/{} passed, max error {:.2e}, {:.2}s", r.passed, r.trials, r.max_error, dt.as_secs_f64());
    if let Some(c) = &r.counterexample {
        detail += &format!("; first failure at trial {}: {}", c.trial, c.reason);
    }
    Outcome { pass: r.ok() && in_time, detail }
}

fn criterion_3() -> Outcome {
    let t = Instant::now();
    let r = verify::frobenius(1000, 7).unwrap();
    suite_outcome(r, t.elapsed(), Some(Duration::from_secs(30)))
}

fn criterion_4() -> Outcome {
    let t = Instant::now();
    let mut systems: Vec<(String, ConstraintSystem)> = BUNDLED.iter().map(|n| (n.to_string(), fixture(n).1)).collect();
    systems.extend(verify::random_systems(0, 50));
    let r = verify::chain_over(&systems, 0, &SolverConfig::default()).unwrap();
    suite_outcome(r, t.elapsed(), None)
}

fn criterion_5() -> Outcome {
    let t = Instant::now();
    let r = verify::eckart_young_suite(100, 0).unwrap();
    suite_outcome(r, t.elapsed(), None)
}

fn criterion_6() -> Outcome {
    let t = Instant::now();
    let r = verify::zigzag(30, 0).unwrap();
    suite_outcome(r, t.elapsed(), None)
}

fn growth(model: &dyn FeasibilityModel, r0: f64) -> f64 {
    let ratios: Vec<f64> = (0..4).map(|d| subreg_ratio(model, r0 / 10f64.powi(d), 4000, 0).unwrap().ratio).collect();
    ratios.windows(2).map(|w| w[1] / w[0]).fold(f64::INFINITY, f64::min)
}

fn criterion_7() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    let mut nonzero = 0;
    for p in NormSpec::ALL {
        let mut spec = fixture("zero_map").0;
        spec.norm_p = p;
        let r = radius_report(&spec.build().unwrap(), &SolverConfig::default()).unwrap();
        let c = &r.constants;
        let all = [
            c.rg,
            c.rg_over,
            c.rg_diamond,
            c.rg_circ_lower,
            c.rg_circ_upper,
            c.rg_dagger.unwrap_or(0.0),
            r.rad_lip_lower.value,
            r.rad_lip_upper.value,
            r.rad_ss.value,
            r.rad_c1.value,
        ];
        nonzero += all.iter().filter(|&&x| x != 0.0).count();
    }
    pass &= nonzero == 0;
    detail.push(format!("zero map: {nonzero} nonzero values"));

    let (spec, sys) = fixture("zero_map");
    let pert = spec.perturbation.clone().unwrap_or(PerturbationSpec::Quadratic { coeff: 1.0 });
    let g = growth(&*perturbed_model(&sys, &pert).unwrap(), 0.1);
    pass &= g >= 5.0;
    detail.push(format!("quadratic: min growth {g:.2}"));

    let st_spec = StaircaseSpec::default();
    let st = Staircase::new(&st_spec).unwrap();
    let mut worst = f64::INFINITY;
    for k in 1..=5 {
        let model = ScalarModel::staircase(&st_spec, k).unwrap();
        worst = worst.min(growth(&model, 0.1 * (st.a(k - 1) - st.a(k))));
    }
    pass &= worst >= 5.0;
    detail.push(format!("staircase a_1..a_5: min growth {worst:.2}"));
    Outcome { pass, detail: detail.join("; ") }
}

fn criterion_8() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for name in BUNDLED {
        let (spec, sys) = fixture(name);
        if sys.n() != 2 || sys.m() != 2 {
            continue;
        }
        let c = compute_constants(&sys, &spec.solver_config()).unwrap();
        let o = brute_force_oracle(&sys, &OracleConfig::default()).unwrap();
        let gap = |a: f64, b: f64| if a.is_infinite() && b.is_infinite() && a == b { 0.0 } else { (a - b).abs() };
        let worst = [gap(c.rg, o.rg), gap(c.rg_over, o.rg_over), gap(c.mr_bound, o.mr_bound), gap(c.ssr_bound, o.ssr_bound)]
            .into_iter()
            .fold(0.0, f64::max);
        pass &= worst <= 2.0 * o.grid_error;
        detail.push(format!("{name}: {:.2}× grid error", worst / o.grid_error));
    }
    Outcome { pass, detail: detail.join("; ") }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("cone radii", criterion_1),
        ("cone constant coincidences", criterion_2),
        ("Frobenius closed form", criterion_3),
        ("inequality chains", criterion_4),
        ("Eckart-Young baseline", criterion_5),
        ("zigzag construction", criterion_6),
        ("degenerate and destruction suite", criterion_7),
        ("oracle equivalence", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        println!("criterion {} {name}: {} ({})", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
