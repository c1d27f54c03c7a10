//! Thin wrapper over `minilp` so callers deal in plain indices and our error type.

use minilp::{ComparisonOp, OptimizationDirection, Problem, Variable};

use crate::error::{Error, Result};

#[derive(Copy, Clone, Debug)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Copy, Clone, Debug)]
pub enum Cmp {
    Le,
    Eq,
    Ge,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Var(usize);

pub struct LinearProgram {
    problem: Problem,
    vars: Vec<Variable>,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub objective: f64,
    pub values: Vec<f64>,
}

impl LpSolution {
    pub fn value(&self, v: Var) -> f64 {
        self.values[v.0]
    }
}

/// Outcome of a solve that may legitimately be infeasible.
#[derive(Clone, Debug)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
}

impl LinearProgram {
    pub fn new(sense: Sense) -> Self {
        let direction = match sense {
            Sense::Minimize => OptimizationDirection::Minimize,
            Sense::Maximize => OptimizationDirection::Maximize,
        };
        LinearProgram { problem: Problem::new(direction), vars: Vec::new() }
    }

    pub fn add_var(&mut self, objective: f64, lower: f64, upper: f64) -> Var {
        self.vars.push(self.problem.add_var(objective, (lower, upper)));
        Var(self.vars.len() - 1)
    }

    pub fn add_constraint(&mut self, terms: impl IntoIterator<Item = (Var, f64)>, cmp: Cmp, rhs: f64) {
        let terms: Vec<(Variable, f64)> =
            terms.into_iter().filter(|(_, c)| *c != 0.0).map(|(v, c)| (self.vars[v.0], c)).collect();
        let op = match cmp {
            Cmp::Le => ComparisonOp::Le,
            Cmp::Eq => ComparisonOp::Eq,
            Cmp::Ge => ComparisonOp::Ge,
        };
        self.problem.add_constraint(terms.as_slice(), op, rhs);
    }

    pub fn try_solve(&self) -> Result<LpOutcome> {
        match self.problem.solve() {
            Ok(sol) => Ok(LpOutcome::Optimal(LpSolution {
                objective: sol.objective(),
                values: self.vars.iter().map(|v| *sol.var_value(*v)).collect(),
            })),
            Err(minilp::Error::Infeasible) => Ok(LpOutcome::Infeasible),
            Err(e) => Err(Error::Lp(e.to_string())),
        }
    }

    pub fn solve(&self) -> Result<LpSolution> {
        match self.try_solve()? {
            LpOutcome::Optimal(sol) => Ok(sol),
            LpOutcome::Infeasible => Err(Error::Lp("infeasible".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_program() {
        // max x + 2y  s.t. x + y <= 4, y <= 3
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_var(1.0, 0.0, f64::INFINITY);
        let y = lp.add_var(2.0, 0.0, 3.0);
        lp.add_constraint([(x, 1.0), (y, 1.0)], Cmp::Le, 4.0);
        let sol = lp.solve().unwrap();
        assert!((sol.objective - 7.0).abs() < 1e-9);
        assert!((sol.value(x) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn reports_infeasibility() {
        let mut lp = LinearProgram::new(Sense::Minimize);
        let x = lp.add_var(1.0, 0.0, 1.0);
        lp.add_constraint([(x, 1.0)], Cmp::Ge, 2.0);
        assert!(matches!(lp.try_solve().unwrap(), LpOutcome::Infeasible));
    }
}
