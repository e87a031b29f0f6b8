//! Bound tightening on singleton rows.
//!
//! Rows with one nonzero fold into variable bounds and disappear; empty
//! rows either hold trivially or prove infeasibility. Columns are never
//! touched, so solutions of the reduced problem are solutions of the
//! original as-is.

use crate::milp::{MilpProblem, Sense};

const FEAS_TOL: f64 = 1e-9;

pub enum PresolveResult {
    Reduced(MilpProblem),
    Infeasible,
}

/// Fold singleton rows into bounds. With `integral`, integer variables'
/// bounds are also rounded inward (valid only when integrality will be
/// enforced).
pub fn presolve(problem: &MilpProblem, integral: bool) -> PresolveResult {
    let mut reduced = MilpProblem::new(problem.name.clone());
    let mut lb: Vec<f64> = problem.vars().iter().map(|v| v.lb).collect();
    let mut ub: Vec<f64> = problem.vars().iter().map(|v| v.ub).collect();

    let mut kept_rows = Vec::new();
    for row in problem.rows() {
        match row.coeffs.len() {
            0 => {
                let violated = match row.sense {
                    Sense::Le => row.rhs < -FEAS_TOL,
                    Sense::Ge => row.rhs > FEAS_TOL,
                    Sense::Eq => row.rhs.abs() > FEAS_TOL,
                };
                if violated {
                    return PresolveResult::Infeasible;
                }
            }
            1 => {
                let (j, a) = row.coeffs[0];
                let bound = row.rhs / a;
                let (tight_ub, tight_lb) = match (row.sense, a > 0.0) {
                    (Sense::Le, true) | (Sense::Ge, false) => (Some(bound), None),
                    (Sense::Le, false) | (Sense::Ge, true) => (None, Some(bound)),
                    (Sense::Eq, _) => (Some(bound), Some(bound)),
                };
                if let Some(b) = tight_ub {
                    ub[j] = ub[j].min(b);
                }
                if let Some(b) = tight_lb {
                    lb[j] = lb[j].max(b);
                }
            }
            _ => kept_rows.push(row),
        }
    }

    if integral {
        for (j, v) in problem.vars().iter().enumerate() {
            if v.integer {
                if lb[j].is_finite() {
                    lb[j] = (lb[j] - FEAS_TOL).ceil();
                }
                if ub[j].is_finite() {
                    ub[j] = (ub[j] + FEAS_TOL).floor();
                }
            }
        }
    }

    for j in 0..problem.n_vars() {
        if lb[j] > ub[j] + FEAS_TOL {
            return PresolveResult::Infeasible;
        }
        // Collapse numerically-crossed bounds from rounding.
        if lb[j] > ub[j] {
            ub[j] = lb[j];
        }
    }

    for (j, v) in problem.vars().iter().enumerate() {
        reduced.add_var(v.name.clone(), lb[j], ub[j], v.integer, v.obj);
    }
    for row in kept_rows {
        reduced.add_row(row.name.clone(), row.sense, row.rhs, row.coeffs.clone());
    }
    PresolveResult::Reduced(reduced)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton_rows_become_bounds() {
        let mut p = MilpProblem::new("t");
        let x = p.add_var("x", 0.0, 10.0, false, 1.0);
        let y = p.add_var("y", 0.0, 10.0, false, 1.0);
        p.add_row("cap", Sense::Le, 3.0, vec![(x, 1.0)]);
        p.add_row("floor", Sense::Ge, 2.0, vec![(x, 1.0)]);
        p.add_row("neg", Sense::Le, -4.0, vec![(y, -2.0)]);
        p.add_row("real", Sense::Le, 5.0, vec![(x, 1.0), (y, 1.0)]);
        match presolve(&p, false) {
            PresolveResult::Reduced(r) => {
                assert_eq!(r.n_rows(), 1);
                assert_eq!((r.var(x).lb, r.var(x).ub), (2.0, 3.0));
                assert_eq!(r.var(y).lb, 2.0);
            }
            PresolveResult::Infeasible => panic!("feasible"),
        }
    }

    #[test]
    fn conflicting_singletons_are_infeasible() {
        let mut p = MilpProblem::new("t");
        let x = p.add_var("x", 0.0, 10.0, false, 1.0);
        p.add_row("a", Sense::Le, 1.0, vec![(x, 1.0)]);
        p.add_row("b", Sense::Ge, 2.0, vec![(x, 1.0)]);
        assert!(matches!(presolve(&p, false), PresolveResult::Infeasible));
    }

    #[test]
    fn integer_bounds_round_inward() {
        let mut p = MilpProblem::new("t");
        let x = p.add_var("x", 0.0, 10.0, true, 1.0);
        p.add_row("cap", Sense::Le, 2.5, vec![(x, 1.0)]);
        p.add_row("floor", Sense::Ge, 0.3, vec![(x, 1.0)]);
        match presolve(&p, true) {
            PresolveResult::Reduced(r) => {
                assert_eq!((r.var(x).lb, r.var(x).ub), (1.0, 2.0));
            }
            PresolveResult::Infeasible => panic!("feasible"),
        }
    }

    #[test]
    fn empty_row_checks() {
        let mut p = MilpProblem::new("t");
        let _ = p.add_var("x", 0.0, 1.0, false, 1.0);
        p.add_row("fine", Sense::Le, 0.5, vec![]);
        assert!(matches!(presolve(&p, false), PresolveResult::Reduced(_)));
        p.add_row("broken", Sense::Ge, 0.5, vec![]);
        assert!(matches!(presolve(&p, false), PresolveResult::Infeasible));
    }
}
