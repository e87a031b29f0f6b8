//! Mixed-integer linear program representation.
//!
//! Variables and rows carry deterministic names of the form
//! `kind[i,j,...]`; the part before `[` is the constraint family, which
//! feasibility reports group by. Coefficients are sparse and always
//! finite.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("model error: {0}")]
    Model(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    pub fn symbol(&self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub lb: f64,
    pub ub: f64,
    pub integer: bool,
    pub obj: f64,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub name: String,
    pub sense: Sense,
    pub rhs: f64,
    /// Sorted by column, one entry per column.
    pub coeffs: Vec<(usize, f64)>,
}

impl Row {
    /// Left-hand-side activity at `x`.
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates this row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }

    /// Constraint family: the row name up to the first `[`.
    pub fn family(&self) -> &str {
        self.name.split('[').next().unwrap_or(&self.name)
    }
}

#[derive(Debug, Clone, Default)]
pub struct MilpProblem {
    pub name: String,
    vars: Vec<Variable>,
    rows: Vec<Row>,
    var_index: BTreeMap<String, usize>,
}

impl MilpProblem {
    pub fn new(name: impl Into<String>) -> Self {
        MilpProblem {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        lb: f64,
        ub: f64,
        integer: bool,
        obj: f64,
    ) -> usize {
        let name = name.into();
        assert!(!name.is_empty() && !self.var_index.contains_key(&name), "duplicate or empty variable name {:?}", name);
        assert!(lb <= ub, "variable {:?} has lb {} > ub {}", name, lb, ub);
        assert!(obj.is_finite(), "variable {:?} has non-finite objective", name);
        assert!(!lb.is_nan() && !ub.is_nan());
        let id = self.vars.len();
        self.vars.push(Variable {
            name: name.clone(),
            lb,
            ub,
            integer,
            obj,
        });
        self.var_index.insert(name, id);
        id
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        sense: Sense,
        rhs: f64,
        coeffs: Vec<(usize, f64)>,
    ) -> usize {
        let name = name.into();
        assert!(rhs.is_finite(), "row {:?} has non-finite rhs", name);
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for (j, a) in coeffs {
            assert!(a.is_finite(), "row {:?} has non-finite coefficient", name);
            assert!(j < self.vars.len(), "row {:?} references unknown column {}", name, j);
            *merged.entry(j).or_insert(0.0) += a;
        }
        let coeffs: Vec<(usize, f64)> = merged.into_iter().filter(|&(_, a)| a != 0.0).collect();
        let id = self.rows.len();
        self.rows.push(Row {
            name,
            sense,
            rhs,
            coeffs,
        });
        id
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn var(&self, id: usize) -> &Variable {
        &self.vars[id]
    }

    pub fn var_mut(&mut self, id: usize) -> &mut Variable {
        &mut self.vars[id]
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn var_id(&self, name: &str) -> Option<usize> {
        self.var_index.get(name).copied()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.vars.iter().zip(x).map(|(v, &xv)| v.obj * xv).sum()
    }

    /// Count of rows per constraint family, in family name order.
    pub fn family_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for row in &self.rows {
            *counts.entry(row.family().to_string()).or_insert(0) += 1;
        }
        counts
    }

    /// Structural equality by names: same variables (bounds, integrality,
    /// objective) and same rows (sense, rhs, coefficients) regardless of
    /// the order they were added in. Tolerance is exact except for an
    /// epsilon on floats to absorb text round-trips.
    pub fn structurally_eq(&self, other: &MilpProblem, tol: f64) -> Result<(), String> {
        if self.vars.len() != other.vars.len() {
            return Err(format!(
                "variable counts differ: {} vs {}",
                self.vars.len(),
                other.vars.len()
            ));
        }
        if self.rows.len() != other.rows.len() {
            return Err(format!(
                "row counts differ: {} vs {}",
                self.rows.len(),
                other.rows.len()
            ));
        }
        let close = |a: f64, b: f64| {
            (a.is_infinite() && b.is_infinite() && a.signum() == b.signum())
                || (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
        };
        let mut col_map = vec![0usize; self.vars.len()];
        for (i, v) in self.vars.iter().enumerate() {
            let Some(&j) = other.var_index.get(&v.name) else {
                return Err(format!("variable {:?} missing", v.name));
            };
            let w = &other.vars[j];
            if v.integer != w.integer {
                return Err(format!("variable {:?} integrality differs", v.name));
            }
            if !close(v.lb, w.lb) || !close(v.ub, w.ub) {
                return Err(format!(
                    "variable {:?} bounds differ: [{}, {}] vs [{}, {}]",
                    v.name, v.lb, v.ub, w.lb, w.ub
                ));
            }
            if !close(v.obj, w.obj) {
                return Err(format!("variable {:?} objective differs", v.name));
            }
            col_map[i] = j;
        }
        let mut other_rows: BTreeMap<&str, &Row> = BTreeMap::new();
        for row in &other.rows {
            if other_rows.insert(row.name.as_str(), row).is_some() {
                return Err(format!("duplicate row name {:?}", row.name));
            }
        }
        for row in &self.rows {
            let Some(w) = other_rows.get(row.name.as_str()) else {
                return Err(format!("row {:?} missing", row.name));
            };
            if row.sense != w.sense {
                return Err(format!("row {:?} sense differs", row.name));
            }
            if !close(row.rhs, w.rhs) {
                return Err(format!("row {:?} rhs differs: {} vs {}", row.name, row.rhs, w.rhs));
            }
            let mapped: BTreeMap<usize, f64> =
                row.coeffs.iter().map(|&(j, a)| (col_map[j], a)).collect();
            let theirs: BTreeMap<usize, f64> = w.coeffs.iter().copied().collect();
            if mapped.len() != theirs.len() {
                return Err(format!("row {:?} coefficient counts differ", row.name));
            }
            for (&j, &a) in &mapped {
                match theirs.get(&j) {
                    Some(&b) if close(a, b) => {}
                    _ => {
                        return Err(format!(
                            "row {:?} coefficient on {:?} differs",
                            row.name, other.vars[j].name
                        ))
                    }
                }
            }
        }
        Ok(())
    }
}

/// Solver outcome classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Proven optimal (gap ~ 0 up to tolerances).
    Optimal,
    /// Stopped at the configured gap tolerance with an incumbent.
    GapFeasible,
    Infeasible,
    Unbounded,
    /// Hit an iteration, node, or time limit.
    Limit,
}

/// A (possibly partial) solve result. For minimization, `bound <=
/// objective` and `gap = (objective - bound) / max(|objective|, eps)`.
#[derive(Debug, Clone)]
pub struct Solution {
    pub status: SolveStatus,
    pub values: Vec<f64>,
    pub objective: f64,
    pub bound: f64,
    pub gap: f64,
    pub simplex_iterations: u64,
    pub nodes: u64,
}

impl Solution {
    pub fn value_of(&self, problem: &MilpProblem, name: &str) -> Option<f64> {
        problem.var_id(name).map(|id| self.values[id])
    }

    pub fn compute_gap(objective: f64, bound: f64) -> f64 {
        (objective - bound) / objective.abs().max(1e-9)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_merge_duplicate_columns() {
        let mut p = MilpProblem::new("t");
        let x = p.add_var("x", 0.0, 1.0, false, 1.0);
        p.add_row("r[0]", Sense::Le, 2.0, vec![(x, 1.0), (x, 2.0)]);
        assert_eq!(p.rows()[0].coeffs, vec![(x, 3.0)]);
        assert_eq!(p.rows()[0].family(), "r");
    }

    #[test]
    fn structural_equality_ignores_order() {
        let mut a = MilpProblem::new("a");
        let x = a.add_var("x", 0.0, 1.0, true, 1.0);
        let y = a.add_var("y", 0.0, 2.0, false, -1.0);
        a.add_row("c[0]", Sense::Le, 1.5, vec![(x, 1.0), (y, 2.0)]);

        let mut b = MilpProblem::new("b");
        let yb = b.add_var("y", 0.0, 2.0, false, -1.0);
        let xb = b.add_var("x", 0.0, 1.0, true, 1.0);
        b.add_row("c[0]", Sense::Le, 1.5, vec![(yb, 2.0), (xb, 1.0)]);

        assert!(a.structurally_eq(&b, 0.0).is_ok());

        b.var_mut(xb).ub = 3.0;
        assert!(a.structurally_eq(&b, 0.0).is_err());
    }

    #[test]
    fn violation_by_sense() {
        let mut p = MilpProblem::new("t");
        let x = p.add_var("x", 0.0, 10.0, false, 0.0);
        p.add_row("le", Sense::Le, 1.0, vec![(x, 1.0)]);
        p.add_row("ge", Sense::Ge, 1.0, vec![(x, 1.0)]);
        p.add_row("eq", Sense::Eq, 1.0, vec![(x, 1.0)]);
        let x2 = vec![2.0];
        assert_eq!(p.rows()[0].violation(&x2), 1.0);
        assert_eq!(p.rows()[1].violation(&x2), 0.0);
        assert_eq!(p.rows()[2].violation(&x2), 1.0);
    }
}
