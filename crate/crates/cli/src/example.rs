//! Worked examples with their known values.

use subrad_core::constants::SolverConfig;
use subrad_core::fixtures;
use subrad_core::perturbations::{perturbed_model, PerturbationSpec, ScalarModel, Staircase, StaircaseSpec};
use subrad_core::radii::radius_report;
use subrad_core::system::{subreg_ratio, FeasibilityModel};
use subrad_core::{NormSpec, Result};

use crate::reports::{DivergenceRow, ExampleReport, ExampleRow};

pub const DECADES: usize = 4;
pub const SAMPLES: usize = 4000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ExampleName {
    Cone,
    Zero,
    Staircase,
}

/// Ratios at `r0, r0/10, …` and the smallest growth between consecutive radii.
pub fn divergence(label: &str, model: &dyn FeasibilityModel, r0: f64, seed: u64) -> Result<DivergenceRow> {
    let radii: Vec<f64> = (0..DECADES).map(|d| r0 / 10f64.powi(d as i32)).collect();
    let ratios = radii.iter().map(|&r| subreg_ratio(model, r, SAMPLES, seed).map(|e| e.ratio)).collect::<Result<Vec<f64>>>()?;
    let min_growth = ratios.windows(2).map(|w| w[1] / w[0]).fold(f64::INFINITY, f64::min);
    Ok(DivergenceRow { label: label.into(), base_point: model.base_point()[0], radii, ratios, min_growth, pass: min_growth >= 5.0 })
}

fn finish(example: &str, norm: NormSpec, rows: Vec<ExampleRow>, divergence: Vec<DivergenceRow>) -> ExampleReport {
    let passed = rows.iter().all(|r| r.pass) && divergence.iter().all(|d| d.pass);
    ExampleReport { example: example.into(), norm, rows, divergence, passed }
}

pub fn cone(p: NormSpec, cfg: &SolverConfig) -> Result<ExampleReport> {
    let want = 0.5f64.powf(1.0 / p.exponent());
    let tol = if p == NormSpec::L2 { 1e-3 } else { 1e-6 };
    let r = radius_report(&fixtures::cone(p), cfg)?;
    let c = &r.constants;
    let mut rows = vec![
        ExampleRow::approx("rg", want, c.rg, tol),
        ExampleRow::approx("rg_diamond", want, c.rg_diamond, tol),
        ExampleRow::approx("rg_circ_lower", want, c.rg_circ_lower, tol),
        ExampleRow::approx("rg_circ_upper", want, c.rg_circ_upper, tol),
    ];
    if let Some(d) = c.rg_dagger {
        rows.push(ExampleRow::approx("rg_dagger", want, d, tol));
    }
    rows.push(ExampleRow::approx("rad_ss", want, r.rad_ss.value, tol));
    rows.push(ExampleRow::approx("rad_c1", want, r.rad_c1.value, tol));
    rows.push(ExampleRow::approx("rad_lip_lower", want, r.rad_lip_lower.value, tol));
    Ok(finish("cone", p, rows, vec![]))
}

pub fn zero(p: NormSpec, cfg: &SolverConfig, seed: u64) -> Result<ExampleReport> {
    let sys = fixtures::zero_map(p);
    let r = radius_report(&sys, cfg)?;
    let c = &r.constants;
    let rows = [
        ("rg", c.rg),
        ("rg_over", c.rg_over),
        ("rg_diamond", c.rg_diamond),
        ("rg_circ_lower", c.rg_circ_lower),
        ("rg_circ_upper", c.rg_circ_upper),
        ("rad_lip_lower", r.rad_lip_lower.value),
        ("rad_lip_upper", r.rad_lip_upper.value),
        ("rad_ss", r.rad_ss.value),
        ("rad_c1", r.rad_c1.value),
    ]
    .into_iter()
    .map(|(q, x)| ExampleRow::approx(q, 0.0, x, 0.0))
    .collect();
    let model = perturbed_model(&sys.with_norm(NormSpec::L2), &PerturbationSpec::Quadratic { coeff: 1.0 })?;
    let div = divergence("x^2", &*model, 0.1, seed)?;
    Ok(finish("zero", p, rows, vec![div]))
}

pub fn staircase(cfg: &SolverConfig, seed: u64) -> Result<ExampleReport> {
    let spec = StaircaseSpec::default();
    let st = Staircase::new(&spec)?;
    let c = radius_report(&fixtures::staircase_linearized(), cfg)?.constants;
    let mut rows = vec![ExampleRow::approx("rg (linearization)", 1.0, c.rg, 1e-6)];
    for n in 1..=5 {
        let x = st.a(n);
        rows.push(ExampleRow::at_least(&format!("f(a_{n})/a_{n}"), 1.0 - st.epsilon(n), st.eval(x)? / x));
    }
    let mut div = Vec::new();
    for k in 1..=5 {
        let model = ScalarModel::staircase(&spec, k)?;
        div.push(divergence(&format!("a_{k}"), &model, 0.1 * (st.a(k - 1) - st.a(k)), seed)?);
    }
    Ok(finish("staircase", NormSpec::L2, rows, div))
}
