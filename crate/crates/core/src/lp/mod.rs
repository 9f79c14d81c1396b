//! Linear programs over non-negative variables, a revised simplex solver sized for
//! desk-scale instances, and CPLEX-LP text export/import for external solvers.

// Pivoting walks several parallel arrays by index.
#![allow(clippy::needless_range_loop)]

mod format;
mod lu;
mod simplex;

use serde::Serialize;

use crate::error::LpError;

pub use format::{export_lp, parse_lp};

/// Primal feasibility tolerance applied to every reported optimum.
pub const FEAS_TOL: f64 = 1e-7;
/// Objective tolerance against the true optimum.
pub const OPT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_PIVOTS: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `min c.x` subject to linear rows, with every variable bounded below by zero.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearProgram {
    names: Vec<String>,
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, name: impl Into<String>) -> VarId {
        self.names.push(name.into());
        self.objective.push(0.0);
        VarId(self.names.len() - 1)
    }

    pub fn set_objective(&mut self, var: VarId, coeff: f64) {
        self.objective[var.0] = coeff;
    }

    /// Adds a row. Repeated variables in `terms` are merged and zero coefficients
    /// dropped.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) {
        let mut terms: Vec<(VarId, f64)> = terms.into_iter().collect();
        terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
        for (v, c) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => merged.push((v, c)),
            }
        }
        merged.retain(|t| t.1 != 0.0);
        self.constraints.push(Constraint { name: name.into(), terms: merged, relation, rhs });
    }

    pub fn num_variables(&self) -> usize {
        self.names.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn variable_names(&self) -> &[String] {
        &self.names
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn nonzeros(&self) -> usize {
        self.constraints.iter().map(|c| c.terms.len()).sum()
    }

    pub fn variable(&self, name: &str) -> Option<VarId> {
        self.names.iter().position(|n| n == name).map(VarId)
    }

    pub fn validate(&self) -> Result<(), LpError> {
        if self.names.is_empty() {
            return Err(LpError::Malformed("no variables".into()));
        }
        if let Some(c) = self.objective.iter().find(|c| !c.is_finite()) {
            return Err(LpError::Malformed(format!("objective coefficient {c}")));
        }
        for row in &self.constraints {
            if !row.rhs.is_finite() {
                return Err(LpError::Malformed(format!("row {}: rhs {}", row.name, row.rhs)));
            }
            for &(v, c) in &row.terms {
                if v.0 >= self.names.len() {
                    return Err(LpError::Malformed(format!(
                        "row {} references undeclared variable #{}",
                        row.name, v.0
                    )));
                }
                if !c.is_finite() {
                    return Err(LpError::Malformed(format!("row {}: coefficient {c}", row.name)));
                }
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().zip(values).map(|(c, x)| c * x).sum()
    }

    /// Largest violation of any row or non-negativity bound by `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst = values.iter().fold(0.0f64, |w, &x| w.max(-x));
        for row in &self.constraints {
            let lhs: f64 = row.terms.iter().map(|&(v, c)| c * values[v.0]).sum();
            let gap = match row.relation {
                Relation::Le => lhs - row.rhs,
                Relation::Ge => row.rhs - lhs,
                Relation::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(gap);
        }
        worst
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Meaningful only when `status` is optimal; NaN otherwise.
    pub objective_value: f64,
    /// Primal values aligned with the LP's variables (empty unless optimal).
    pub values: Vec<f64>,
    pub pivots: usize,
}

impl LpSolution {
    pub fn value(&self, var: VarId) -> f64 {
        self.values[var.0]
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub max_pivots: usize,
    /// Basis updates kept in product form before the basis is refactorized.
    pub refactor_interval: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { max_pivots: DEFAULT_MAX_PIVOTS, refactor_interval: 64 }
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_lp_with(lp, &SolveOptions::default())
}

pub fn solve_lp_with(lp: &LinearProgram, options: &SolveOptions) -> Result<LpSolution, LpError> {
    lp.validate()?;
    simplex::solve(lp, options)
}

#[cfg(test)]
mod tests;
