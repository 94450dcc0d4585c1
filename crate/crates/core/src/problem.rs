//! JSON problem description and its conversion to a constraint system.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::constants::SolverConfig;
use crate::error::{Result, SubradError};
use crate::norms::NormSpec;
use crate::perturbations::PerturbationSpec;
use crate::polyhedral::{ConvexPoly, PolyUnion};
use crate::system::{ConstraintSystem, LocalMap};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceSpec {
    #[serde(rename = "A", default)]
    pub a: Vec<Vec<f64>>,
    #[serde(default)]
    pub b: Vec<f64>,
    #[serde(rename = "E", default, skip_serializing_if = "Vec::is_empty")]
    pub e: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub d: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetSpec {
    pub pieces: Vec<PieceSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub value: Vec<f64>,
    pub jacobian: Vec<Vec<f64>>,
    #[serde(default)]
    pub affine: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub n: usize,
    pub m: usize,
    pub xbar: Vec<f64>,
    pub norm_p: NormSpec,
    #[serde(rename = "D")]
    pub d: SetSpec,
    #[serde(rename = "K")]
    pub k: SetSpec,
    pub g: MapSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
}

fn invalid(path: &str, msg: impl std::fmt::Display) -> SubradError {
    SubradError::Invalid(format!("{path}: {msg}"))
}

fn check_len(path: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(invalid(path, format!("expected length {want}, got {got}")));
    }
    Ok(())
}

fn build_set(name: &str, set: &SetSpec, dim: usize) -> Result<PolyUnion> {
    if set.pieces.is_empty() {
        return Err(invalid(&format!("{name}.pieces"), "at least one piece is required"));
    }
    let mut pieces = Vec::new();
    for (i, p) in set.pieces.iter().enumerate() {
        let base = format!("{name}.pieces[{i}]");
        check_len(&format!("{base}.b"), p.b.len(), p.a.len())?;
        check_len(&format!("{base}.d"), p.d.len(), p.e.len())?;
        for (r, row) in p.a.iter().enumerate() {
            check_len(&format!("{base}.A[{r}]"), row.len(), dim)?;
        }
        for (r, row) in p.e.iter().enumerate() {
            check_len(&format!("{base}.E[{r}]"), row.len(), dim)?;
        }
        pieces.push(
            ConvexPoly::new(dim, p.a.clone(), p.b.clone(), p.e.clone(), p.d.clone())
                .map_err(|e| invalid(&base, e))?,
        );
    }
    PolyUnion::new(dim, pieces)
}

impl ProblemSpec {
    pub fn from_system(sys: &ConstraintSystem) -> Self {
        let set = |u: &PolyUnion| SetSpec {
            pieces: u
                .pieces()
                .iter()
                .map(|p| PieceSpec {
                    a: p.ineq().0.to_vec(),
                    b: p.ineq().1.to_vec(),
                    e: p.eq().0.to_vec(),
                    d: p.eq().1.to_vec(),
                })
                .collect(),
        };
        let g = sys.jacobian();
        ProblemSpec {
            n: sys.n(),
            m: sys.m(),
            xbar: sys.xbar().iter().copied().collect(),
            norm_p: sys.norm(),
            d: set(sys.d()),
            k: set(sys.k()),
            g: MapSpec {
                value: sys.g0().iter().copied().collect(),
                jacobian: (0..g.nrows()).map(|i| g.row(i).iter().copied().collect()).collect(),
                affine: sys.map().is_affine(),
            },
            perturbation: None,
            solver: None,
        }
    }

    /// Validates dimensions and builds the system. A reference point outside `D` or a value
    /// outside `K` is reported as [`SubradError::Infeasible`].
    pub fn build(&self) -> Result<ConstraintSystem> {
        let (n, m) = (self.n, self.m);
        if n == 0 || m == 0 {
            return Err(invalid(if n == 0 { "n" } else { "m" }, "must be positive"));
        }
        check_len("xbar", self.xbar.len(), n)?;
        check_len("g.value", self.g.value.len(), m)?;
        check_len("g.jacobian", self.g.jacobian.len(), m)?;
        for (r, row) in self.g.jacobian.iter().enumerate() {
            check_len(&format!("g.jacobian[{r}]"), row.len(), n)?;
        }
        let d = build_set("D", &self.d, n)?;
        let k = build_set("K", &self.k, m)?;
        let jac = DMatrix::from_fn(m, n, |i, j| self.g.jacobian[i][j]);
        let g = LocalMap::new(DVector::from_row_slice(&self.g.value), jac, self.g.affine)?;
        ConstraintSystem::new(d, k, g, DVector::from_row_slice(&self.xbar), self.norm_p)
    }

    pub fn solver_config(&self) -> SolverConfig {
        self.solver.clone().unwrap_or_default()
    }
}
