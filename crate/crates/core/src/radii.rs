//! Radius bounds assembled from the constants, and the linear-system baseline.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::constants::{compute_constants, ConstantsReport, SolverConfig};
use crate::error::{Result, SubradError};
use crate::linalg::min_singular_triplet;
use crate::matrices::matrix_to_rows;
use crate::serde_ext::ext_f64;
use crate::system::ConstraintSystem;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    #[serde(with = "ext_f64")]
    pub value: f64,
    pub source: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    #[serde(with = "ext_f64")]
    pub lower: f64,
    #[serde(with = "ext_f64")]
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusReport {
    /// Lower bound for the radius under Lipschitz perturbations.
    pub rad_lip_lower: Bound,
    /// Upper bound for the radius under Lipschitz perturbations.
    pub rad_lip_upper: Bound,
    /// Radius under semismooth* perturbations (midpoint of `rad_ss_interval`).
    pub rad_ss: Bound,
    pub rad_ss_interval: Interval,
    /// Radius under C¹ perturbations; equal to `rad_ss`.
    pub rad_c1: Bound,
    /// Euclidean only: `[rg†/√2, rg†]` also brackets `rad_ss`.
    pub frobenius_bracket: Option<Interval>,
    pub critical: bool,
    pub constants: ConstantsReport,
}

pub fn radius_report(sys: &ConstraintSystem, cfg: &SolverConfig) -> Result<RadiusReport> {
    let c = compute_constants(sys, cfg)?;
    Ok(report_from_constants(c))
}

pub fn report_from_constants(c: ConstantsReport) -> RadiusReport {
    let lip_upper = c.rg_over.min(c.rg_circ_upper);
    let upper_src = if c.rg_over <= c.rg_circ_upper { "rg_over" } else { "rg_circ_upper" };
    let mid = if c.rg_circ_upper.is_finite() { 0.5 * (c.rg_circ_lower + c.rg_circ_upper) } else { c.rg_circ_lower };
    let gap = c.rg_circ_upper - c.rg_circ_lower;
    let src = if gap > 1e-6 {
        format!("rg_circ interval midpoint (gap {gap:.3e})")
    } else {
        "rg_circ".to_string()
    };
    RadiusReport {
        rad_lip_lower: Bound { value: c.rg, source: "rg".into() },
        rad_lip_upper: Bound { value: lip_upper, source: upper_src.into() },
        rad_ss: Bound { value: mid, source: src.clone() },
        rad_ss_interval: Interval { lower: c.rg_circ_lower, upper: c.rg_circ_upper },
        rad_c1: Bound { value: mid, source: src },
        frobenius_bracket: c.rg_dagger.map(|d| Interval { lower: d / 2f64.sqrt(), upper: d }),
        critical: c.rg <= 1e-12,
        constants: c,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EckartYoung {
    /// `σ_min(A) = 1 / ‖A⁻¹‖₂`.
    pub radius: f64,
    /// `B* = -σ_min u vᵀ`, a smallest perturbation making `A + B*` singular.
    pub perturbation: Vec<Vec<f64>>,
    /// `|det(A + B*)| / |det A|` (0 when `A` is singular).
    pub det_residual: f64,
}

/// Distance of a square matrix to the singular matrices in the spectral norm.
pub fn eckart_young(a: &DMatrix<f64>) -> Result<EckartYoung> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(SubradError::Precondition("Eckart–Young needs a nonempty square matrix".into()));
    }
    let (sigma, left, right) = min_singular_triplet(a);
    let b = -(&left * right.transpose()) * sigma;
    let det_a = a.determinant();
    let det_res = if det_a == 0.0 { 0.0 } else { ((a + &b).determinant() / det_a).abs() };
    Ok(EckartYoung { radius: sigma, perturbation: matrix_to_rows(&b), det_residual: det_res })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::{operator_norm, NormSpec};

    #[test]
    fn eckart_young_on_diagonal() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -0.25]);
        let e = eckart_young(&a).unwrap();
        assert!((e.radius - 0.25).abs() < 1e-14);
        let b = DMatrix::from_fn(2, 2, |i, j| e.perturbation[i][j]);
        assert!((&a + &b).determinant().abs() < 1e-14);
        assert!((operator_norm(&b, NormSpec::L2) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn eckart_young_singular_input() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let e = eckart_young(&a).unwrap();
        assert!(e.radius < 1e-14);
    }
}
