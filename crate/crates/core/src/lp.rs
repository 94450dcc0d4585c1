//! Thin wrapper over `microlp` with index-based variables.

use std::collections::BTreeMap;

use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem, Variable};

use crate::error::{Result, SubradError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub enum LpOutcome {
    Optimal { objective: f64, x: Vec<f64> },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(self) -> Option<(f64, Vec<f64>)> {
        match self {
            LpOutcome::Optimal { objective, x } => Some((objective, x)),
            _ => None,
        }
    }
}

pub struct Lp {
    problem: Problem,
    vars: Vec<Variable>,
}

impl Lp {
    pub fn minimize() -> Self {
        Lp { problem: Problem::new(OptimizationDirection::Minimize), vars: Vec::new() }
    }

    pub fn maximize() -> Self {
        Lp { problem: Problem::new(OptimizationDirection::Maximize), vars: Vec::new() }
    }

    pub fn var(&mut self, cost: f64, lo: f64, hi: f64) -> usize {
        self.vars.push(self.problem.add_var(cost, (lo, hi)));
        self.vars.len() - 1
    }

    pub fn free_var(&mut self, cost: f64) -> usize {
        self.var(cost, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn constraint(&mut self, terms: &[(usize, f64)], op: Cmp, rhs: f64) {
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for &(i, c) in terms {
            *merged.entry(i).or_insert(0.0) += c;
        }
        let mut expr = LinearExpr::empty();
        for (i, c) in merged {
            if c != 0.0 {
                expr.add(self.vars[i], c);
            }
        }
        let op = match op {
            Cmp::Le => ComparisonOp::Le,
            Cmp::Ge => ComparisonOp::Ge,
            Cmp::Eq => ComparisonOp::Eq,
        };
        self.problem.add_constraint(expr, op, rhs);
    }

    pub fn solve(&self) -> Result<LpOutcome> {
        match self.problem.solve() {
            Ok(outcome) => {
                let sol = outcome
                    .into_solution()
                    .map_err(|_| SubradError::Lp("solve interrupted".into()))?;
                let x = self.vars.iter().map(|&v| sol.var_value(v)).collect();
                Ok(LpOutcome::Optimal { objective: sol.objective(), x })
            }
            Err(microlp::Error::Infeasible) => Ok(LpOutcome::Infeasible),
            Err(microlp::Error::Unbounded) => Ok(LpOutcome::Unbounded),
            Err(e) => Err(SubradError::Lp(e.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_lp() {
        let mut lp = Lp::maximize();
        let x = lp.var(1.0, 0.0, f64::INFINITY);
        let y = lp.var(2.0, 0.0, 3.0);
        lp.constraint(&[(x, 1.0), (y, 1.0)], Cmp::Le, 4.0);
        let (obj, sol) = lp.solve().unwrap().optimal().unwrap();
        assert!((obj - 7.0).abs() < 1e-9);
        assert!((sol[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = Lp::minimize();
        let x = lp.var(1.0, 0.0, 1.0);
        lp.constraint(&[(x, 1.0)], Cmp::Ge, 2.0);
        assert!(matches!(lp.solve().unwrap(), LpOutcome::Infeasible));
        let mut lp = Lp::minimize();
        let x = lp.free_var(1.0);
        lp.constraint(&[(x, 1.0), (x, 1.0)], Cmp::Le, 2.0);
        assert!(matches!(lp.solve().unwrap(), LpOutcome::Unbounded));
    }
}
