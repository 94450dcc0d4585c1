//! Self-checking suites run by the `verify` command and the acceptance tests.

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constants::{compute_constants, SolverConfig};
use crate::error::Result;
use crate::fixtures;
use crate::linalg::{lstsq, null_space};
use crate::matrices::{compatible_matrix, frobenius_min_matrix, min_opnorm_matrix, rows_to_matrix, OpnormConfig, Witness};
use crate::norms::{frobenius_norm, operator_norm, NormSpec};
use crate::perturbations::{lip_estimate, Zigzag, ZigzagSpec};
use crate::radii::{eckart_young, radius_report, report_from_constants};
use crate::serde_ext::ext_f64;
use crate::system::ConstraintSystem;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub trial: usize,
    pub reason: String,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteOutcome {
    pub suite: String,
    pub seed: u64,
    pub trials: usize,
    pub passed: usize,
    pub failed: usize,
    /// Worst value of the suite's main error measure over all trials.
    #[serde(with = "ext_f64")]
    pub max_error: f64,
    pub counterexample: Option<Counterexample>,
}

impl SuiteOutcome {
    fn new(suite: &str, seed: u64) -> Self {
        SuiteOutcome { suite: suite.into(), seed, trials: 0, passed: 0, failed: 0, max_error: 0.0, counterexample: None }
    }

    fn record(&mut self, err: f64, failure: Option<(String, Vec<f64>)>) {
        let trial = self.trials;
        self.trials += 1;
        if err.is_nan() {
            self.max_error = f64::NAN;
        } else {
            self.max_error = self.max_error.max(err);
        }
        match failure {
            None => self.passed += 1,
            Some((reason, data)) => {
                self.failed += 1;
                if self.counterexample.is_none() {
                    self.counterexample = Some(Counterexample { trial, reason, data });
                }
            }
        }
    }

    pub fn ok(&self) -> bool {
        self.failed == 0 && self.trials > 0
    }
}

fn unit(rng: &mut ChaCha8Rng, dim: usize) -> DVector<f64> {
    loop {
        let x = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
        let nx = x.norm();
        if nx > 1e-3 {
            return x / nx;
        }
    }
}

/// Random Euclidean witness with `u*ᵀu = v*ᵀv`.
pub fn random_witness(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Witness {
    let u = unit(rng, n);
    let vs = unit(rng, m);
    let v = DVector::from_fn(m, |_, _| rng.random_range(-2.0..2.0));
    let mut us = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
    let gap = vs.dot(&v) - us.dot(&u);
    us += &u * gap;
    Witness::new(u, v, us, vs)
}

/// `vec(B)` (row major) constraints `B u = v`, `Bᵀ v* = u*`, without row reduction.
fn vectorized_constraints(w: &Witness) -> (DMatrix<f64>, DVector<f64>) {
    let (u, v, us, vs) = (w.u(), w.v(), w.ustar(), w.vstar());
    let (n, m) = (u.len(), v.len());
    let mut a = DMatrix::zeros(m + n, m * n);
    let mut b = DVector::zeros(m + n);
    for i in 0..m {
        for j in 0..n {
            a[(i, i * n + j)] = u[j];
            a[(m + j, i * n + j)] = vs[i];
        }
        b[i] = v[i];
    }
    for j in 0..n {
        b[m + j] = us[j];
    }
    (a, b)
}

/// Closed-form minimum Frobenius matrices checked against least squares and random search.
pub fn frobenius(trials: usize, seed: u64) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::new("frobenius", seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let n = rng.random_range(1..=4usize);
        let m = rng.random_range(1..=4usize);
        let w = random_witness(&mut rng, n, m);
        let (bbar, fro) = frobenius_min_matrix(&w)?;
        let (u, v, us) = (w.u(), w.v(), w.ustar());
        let c = us.dot(&u);
        let identity_err = (fro * fro - (us.norm_squared() + v.norm_squared() - c * c)).abs();
        let residual = w.residual_of(&bbar);

        let (a, rhs) = vectorized_constraints(&w);
        let ls = lstsq(&a, &rhs);
        let ls_norm = ls.norm();
        let mut best = ls_norm;
        let kernel = null_space(&a, 1e-10);
        let bvec = DVector::from_fn(m * n, |k, _| bbar[(k / n, k % n)]);
        for _ in 0..64 {
            if kernel.ncols() == 0 {
                break;
            }
            let z = DVector::from_fn(kernel.ncols(), |_, _| rng.random_range(-1.0..1.0));
            let scale: f64 = rng.random_range(1e-4..1.0);
            let cand = &bvec + &kernel * z * scale;
            if (&a * &cand - &rhs).amax() <= 1e-9 {
                best = best.min(cand.norm());
            }
        }
        let bm = compatible_matrix(&w, NormSpec::L2)?;
        if w.residual_of(&bm) <= 1e-9 {
            best = best.min(frobenius_norm(&bm));
        }
        let op = min_opnorm_matrix(&w, NormSpec::L2, &OpnormConfig { max_evals: 5_000, ..Default::default() })?;
        let opm = rows_to_matrix(&op.matrix, n)?;
        if w.residual_of(&opm) <= 1e-9 {
            best = best.min(frobenius_norm(&opm));
        }
        let beat = fro - best;

        let failure = if identity_err > 1e-10 {
            Some(format!("Frobenius identity off by {identity_err:e}"))
        } else if residual > 1e-10 {
            Some(format!("constraint residual {residual:e}"))
        } else if beat > 1e-8 {
            Some(format!("feasible matrix with norm {best} below {fro}"))
        } else {
            None
        };
        let mut data = w.u.clone();
        data.extend(&w.v);
        data.extend(&w.ustar);
        data.extend(&w.vstar);
        out.record(identity_err.max(residual).max(beat.max(0.0)), failure.map(|r| (r, data)));
    }
    Ok(out)
}

/// Random nonsingular 5×5 matrices: distance to singularity in the spectral norm.
pub fn eckart_young_suite(trials: usize, seed: u64) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::new("eckart-young", seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = SolverConfig::default();
    for _ in 0..trials {
        let a = loop {
            let a: DMatrix<f64> = DMatrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
            if a.determinant().abs() > 1e-3 {
                break a;
            }
        };
        let ey = eckart_young(&a)?;
        let b = rows_to_matrix(&ey.perturbation, 5)?;
        let inv = a.clone().try_inverse().expect("nonsingular by construction");
        let expect = 1.0 / operator_norm(&inv, NormSpec::L2);
        let norm_err = (operator_norm(&b, NormSpec::L2) - expect).abs();
        let sys = fixtures::linear(&a, NormSpec::L2)?;
        let rad = radius_report(&sys, &cfg)?.rad_ss.value;
        let radii_err = (rad - ey.radius).abs();
        let failure = if ey.det_residual > 1e-8 {
            Some(format!("det(A + B*)/det(A) = {:e}", ey.det_residual))
        } else if norm_err > 1e-10 {
            Some(format!("‖B*‖₂ differs from 1/‖A⁻¹‖₂ by {norm_err:e}"))
        } else if radii_err > 5e-3 {
            Some(format!("radius {rad} vs σ_min {}", ey.radius))
        } else {
            None
        };
        out.record(norm_err.max(radii_err), failure.map(|r| (r, a.transpose().iter().copied().collect())));
    }
    Ok(out)
}

/// The flattened zigzag: values at the `τ_k` and a sampled Lipschitz constant.
pub fn zigzag(terms: usize, seed: u64) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::new("zigzag", seed);
    // one extra level so that the innermost checked flat is not the truncation core
    let z = Zigzag::new(&ZigzagSpec::geometric(0.5, 0.5, terms + 1))?;
    for (i, &t) in z.tau().iter().enumerate().take(terms) {
        let k = (i + 1) as f64;
        let c = z.eval(t)?;
        let low = t * (1.0 - 1.0 / (k + 1.0));
        let failure = if !(c < t && c > low) { Some((format!("χ(τ_{k}) = {c} outside ({low}, {t})"), vec![t, c])) } else { None };
        out.record(((low - c).max(c - t) / t).max(0.0), failure);
    }
    let f = |x: &DVector<f64>| DVector::from_element(1, z.eval_extended(x[0]));
    let est = lip_estimate(&f, &DVector::zeros(1), z.tau()[0], NormSpec::L2, 20_000, seed);
    let failure = if !(est > 0.9 && est <= 1.0 + 1e-12) { Some((format!("Lipschitz estimate {est} outside (0.9, 1]"), vec![est])) } else { None };
    out.record(0.0, failure);
    Ok(out)
}

/// Named systems for the chain suite.
pub fn chain_systems(seed: u64, random: usize) -> Result<Vec<(String, ConstraintSystem)>> {
    let mut out = Vec::new();
    for p in NormSpec::ALL {
        out.push((format!("cone_p{}", p.label()), fixtures::cone(p)));
        out.push((format!("zero_map_p{}", p.label()), fixtures::zero_map(p)));
    }
    let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 0.5]);
    out.push(("linear_A".into(), fixtures::linear(&a, NormSpec::L2)?));
    out.push(("staircase".into(), fixtures::staircase_linearized()));
    out.extend(random_systems(seed, random));
    Ok(out)
}

/// Order relations between the constants and radius bounds.
pub fn chain_violations(sys: &ConstraintSystem, cfg: &SolverConfig) -> Result<Vec<String>> {
    let c = compute_constants(sys, cfg)?;
    let r = report_from_constants(c.clone());
    let le = |a: f64, b: f64| a <= b + 1e-9 * (1.0 + b.abs()) || (b == f64::INFINITY);
    let mut bad = Vec::new();
    if !le(c.rg, c.rg_diamond) {
        bad.push(format!("rg {} > rg_diamond {}", c.rg, c.rg_diamond));
    }
    if !le(c.rg_diamond, c.rg_circ_upper) {
        bad.push(format!("rg_diamond {} > rg_circ_upper {}", c.rg_diamond, c.rg_circ_upper));
    }
    if !le(c.rg, c.rg_over) || !le(c.rg_over, 2.0 * c.rg) {
        bad.push(format!("rg_over {} outside [rg, 2 rg] with rg {}", c.rg_over, c.rg));
    }
    if let Some(d) = c.rg_dagger {
        if !le(c.rg_circ_lower, d) || !le(d, 2f64.sqrt() * c.rg_circ_upper) {
            bad.push(format!("rg_dagger {d} outside [{}, √2·{}]", c.rg_circ_lower, c.rg_circ_upper));
        }
    }
    if !le(r.rad_lip_lower.value, r.rad_lip_upper.value) {
        bad.push(format!("rad_lip bounds reversed: {} > {}", r.rad_lip_lower.value, r.rad_lip_upper.value));
    }
    Ok(bad)
}

pub fn chain(seed: u64, random: usize, cfg: &SolverConfig) -> Result<SuiteOutcome> {
    chain_over(&chain_systems(seed, random)?, seed, cfg)
}

pub fn chain_over(systems: &[(String, ConstraintSystem)], seed: u64, cfg: &SolverConfig) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::new("chain", seed);
    for (name, sys) in systems {
        let bad = chain_violations(sys, cfg)?;
        let failure = bad.first().map(|b| (format!("{name}: {b}"), sys.jacobian().transpose().iter().copied().collect()));
        out.record(bad.len() as f64, failure);
    }
    Ok(out)
}

/// `count` seeded random planar systems for each norm, named by seed and norm.
pub fn random_systems(seed: u64, count: usize) -> Vec<(String, ConstraintSystem)> {
    let mut out = Vec::new();
    for p in NormSpec::ALL {
        for s in 0..count as u64 {
            out.push((format!("random_{}_p{}", seed + s, p.label()), fixtures::random_system(seed + s, p)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_witnesses_are_compatible() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let w = random_witness(&mut rng, 3, 2);
            assert!(w.is_compatible(1e-12));
        }
    }

    #[test]
    fn short_suites_pass() {
        let f = frobenius(40, 7).unwrap();
        assert!(f.ok(), "{f:?}");
        assert!(eckart_young_suite(3, 7).unwrap().ok());
        let z = zigzag(30, 0).unwrap();
        assert!(z.ok(), "{z:?}");
    }
}
