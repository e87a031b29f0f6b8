//! LP and MILP solving: presolve, simplex, and best-bound branch & bound.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use crate::milp::{MilpProblem, Solution, SolveStatus};
use crate::presolve::{presolve, PresolveResult};
use crate::simplex::{BasisSnapshot, LpStatus, Simplex, StandardForm};

/// Search limits and tolerances. The defaults follow the desk-scale
/// profile: 1% gap, 1e6 simplex iterations, 1e5 nodes, 300 s wall clock.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub gap_tol: f64,
    pub iter_limit: u64,
    pub node_limit: u64,
    pub time_limit: Option<Duration>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            gap_tol: 0.01,
            iter_limit: 1_000_000,
            node_limit: 100_000,
            time_limit: Some(Duration::from_secs(300)),
        }
    }
}

impl SolverOptions {
    pub fn with_gap(gap_tol: f64) -> Self {
        SolverOptions {
            gap_tol,
            ..Default::default()
        }
    }
}

const INT_TOL: f64 = 1e-6;

fn infeasible_solution(n: usize) -> Solution {
    Solution {
        status: SolveStatus::Infeasible,
        values: vec![0.0; n],
        objective: f64::INFINITY,
        bound: f64::INFINITY,
        gap: 0.0,
        simplex_iterations: 0,
        nodes: 0,
    }
}

/// Solve the LP relaxation (integrality flags ignored).
pub fn solve_lp(problem: &MilpProblem, options: &SolverOptions) -> Solution {
    let reduced = match presolve(problem, false) {
        PresolveResult::Reduced(r) => r,
        PresolveResult::Infeasible => return infeasible_solution(problem.n_vars()),
    };
    let form = StandardForm::build(&reduced);
    let lb = form.lb.clone();
    let ub = form.ub.clone();
    let r = Simplex::solve(&form, &lb, &ub, None, options.iter_limit);
    let values = r.x[..problem.n_vars()].to_vec();
    let objective = problem.objective_value(&values);
    match r.status {
        LpStatus::Optimal => Solution {
            status: SolveStatus::Optimal,
            values,
            objective,
            bound: objective,
            gap: 0.0,
            simplex_iterations: r.iterations,
            nodes: 1,
        },
        LpStatus::Infeasible => Solution {
            simplex_iterations: r.iterations,
            nodes: 1,
            ..infeasible_solution(problem.n_vars())
        },
        LpStatus::Unbounded => Solution {
            status: SolveStatus::Unbounded,
            values,
            objective: f64::NEG_INFINITY,
            bound: f64::NEG_INFINITY,
            gap: 0.0,
            simplex_iterations: r.iterations,
            nodes: 1,
        },
        LpStatus::IterLimit => Solution {
            status: SolveStatus::Limit,
            values,
            objective,
            bound: f64::NEG_INFINITY,
            gap: f64::INFINITY,
            simplex_iterations: r.iterations,
            nodes: 1,
        },
    }
}

struct Node {
    bound: f64,
    id: u64,
    /// (column, lb, ub) overrides relative to the root bounds.
    overrides: Vec<(usize, f64, f64)>,
}

struct HeapKey(f64, u64);

impl PartialEq for HeapKey {
    fn eq(&self, other: &Self) -> bool {
        self.0.total_cmp(&other.0).is_eq() && self.1 == other.1
    }
}
impl Eq for HeapKey {}
impl PartialOrd for HeapKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Best-bound branch and bound with most-fractional branching (ties to the
/// lowest column index). Deterministic: the node heap orders by (bound,
/// node id) and every tie-break is index-based.
pub fn solve_milp(problem: &MilpProblem, options: &SolverOptions) -> Solution {
    let start_time = Instant::now();
    let reduced = match presolve(problem, true) {
        PresolveResult::Reduced(r) => r,
        PresolveResult::Infeasible => return infeasible_solution(problem.n_vars()),
    };
    let integer_cols: Vec<usize> = reduced
        .vars()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.integer)
        .map(|(j, _)| j)
        .collect();

    let form = StandardForm::build(&reduced);
    let root_lb = form.lb.clone();
    let root_ub = form.ub.clone();

    let mut iterations_used = 0u64;
    let mut nodes_explored = 0u64;
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut root_basis: Option<BasisSnapshot> = None;
    let mut heap: BinaryHeap<Reverse<HeapKey>> = BinaryHeap::new();
    let mut nodes: Vec<Node> = Vec::new();
    let mut hit_limit = false;

    let push = |heap: &mut BinaryHeap<Reverse<HeapKey>>, nodes: &mut Vec<Node>, node: Node| {
        heap.push(Reverse(HeapKey(node.bound, node.id)));
        nodes.push(node);
    };
    push(
        &mut heap,
        &mut nodes,
        Node {
            bound: f64::NEG_INFINITY,
            id: 0,
            overrides: Vec::new(),
        },
    );
    let mut next_id = 1u64;

    while let Some(Reverse(HeapKey(node_bound, node_id))) = heap.pop() {
        // Global lower bound: this node has the least bound of all open
        // nodes (best-bound order).
        if let Some((inc_obj, _)) = &incumbent {
            if node_bound >= inc_obj - 1e-9 {
                continue; // cannot improve
            }
            let gap = Solution::compute_gap(*inc_obj, node_bound);
            if gap <= options.gap_tol {
                let (inc_obj, values) = incumbent.unwrap();
                return Solution {
                    status: if gap <= 1e-9 {
                        SolveStatus::Optimal
                    } else {
                        SolveStatus::GapFeasible
                    },
                    values: values[..problem.n_vars()].to_vec(),
                    objective: inc_obj,
                    bound: node_bound,
                    gap,
                    simplex_iterations: iterations_used,
                    nodes: nodes_explored,
                };
            }
        }

        if nodes_explored >= options.node_limit
            || iterations_used >= options.iter_limit
            || options
                .time_limit
                .is_some_and(|limit| start_time.elapsed() >= limit)
        {
            hit_limit = true;
            // Reinstate the popped node's bound as the global bound.
            heap.push(Reverse(HeapKey(node_bound, node_id)));
            break;
        }

        let node = &nodes[node_id as usize];
        let mut lb = root_lb.clone();
        let mut ub = root_ub.clone();
        for &(j, l, u) in &node.overrides {
            lb[j] = l;
            ub[j] = u;
        }

        nodes_explored += 1;
        let remaining = options.iter_limit.saturating_sub(iterations_used).max(1);
        let r = Simplex::solve(&form, &lb, &ub, root_basis.as_ref(), remaining);
        iterations_used += r.iterations;
        if node_id == 0 {
            root_basis = Some(r.basis.clone());
        }

        match r.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                if node_id == 0 {
                    return Solution {
                        status: SolveStatus::Unbounded,
                        values: r.x[..problem.n_vars()].to_vec(),
                        objective: f64::NEG_INFINITY,
                        bound: f64::NEG_INFINITY,
                        gap: 0.0,
                        simplex_iterations: iterations_used,
                        nodes: nodes_explored,
                    };
                }
                continue;
            }
            LpStatus::IterLimit => {
                hit_limit = true;
                heap.push(Reverse(HeapKey(node_bound, node_id)));
                break;
            }
            LpStatus::Optimal => {}
        }

        let lp_obj = r.objective;
        if let Some((inc_obj, _)) = &incumbent {
            if lp_obj >= inc_obj - 1e-9 {
                continue;
            }
        }

        // Most-fractional branching variable.
        let mut branch: Option<(usize, f64, f64)> = None; // (col, value, frac score)
        for &j in &integer_cols {
            let v = r.x[j];
            let frac = (v - v.round()).abs();
            if frac > INT_TOL {
                let score = (v - v.floor()).min(v.ceil() - v);
                if branch.map_or(true, |(_, _, s)| score > s + 1e-12) {
                    branch = Some((j, v, score));
                }
            }
        }

        match branch {
            None => {
                // Integral: round off the tolerance fuzz and keep as the
                // incumbent if better.
                let mut values = r.x.clone();
                for &j in &integer_cols {
                    values[j] = values[j].round();
                }
                if incumbent
                    .as_ref()
                    .map_or(true, |(inc_obj, _)| lp_obj < inc_obj - 1e-9)
                {
                    incumbent = Some((lp_obj, values));
                }
            }
            Some((j, v, _)) => {
                let mut down = node.overrides.clone();
                down.push((j, lb[j], v.floor()));
                let mut up = node.overrides.clone();
                up.push((j, v.ceil(), ub[j]));
                for overrides in [down, up] {
                    push(
                        &mut heap,
                        &mut nodes,
                        Node {
                            bound: lp_obj,
                            id: next_id,
                            overrides,
                        },
                    );
                    next_id += 1;
                }
            }
        }
    }

    let global_bound = heap
        .peek()
        .map(|Reverse(HeapKey(b, _))| *b)
        .unwrap_or(f64::INFINITY);
    match incumbent {
        Some((inc_obj, values)) => {
            let bound = global_bound.min(inc_obj);
            let gap = Solution::compute_gap(inc_obj, bound);
            Solution {
                status: if hit_limit {
                    SolveStatus::Limit
                } else if gap <= 1e-9 {
                    SolveStatus::Optimal
                } else {
                    SolveStatus::GapFeasible
                },
                values: values[..problem.n_vars()].to_vec(),
                objective: inc_obj,
                bound,
                gap,
                simplex_iterations: iterations_used,
                nodes: nodes_explored,
            }
        }
        None => {
            if hit_limit {
                Solution {
                    status: SolveStatus::Limit,
                    values: vec![0.0; problem.n_vars()],
                    objective: f64::INFINITY,
                    bound: global_bound,
                    gap: f64::INFINITY,
                    simplex_iterations: iterations_used,
                    nodes: nodes_explored,
                }
            } else {
                Solution {
                    simplex_iterations: iterations_used,
                    nodes: nodes_explored,
                    ..infeasible_solution(problem.n_vars())
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::Sense;

    #[test]
    fn knapsack_matches_enumeration() {
        // max 10a + 6b + 4c s.t. a + b + c <= 2, binary: optimum 16.
        let mut p = MilpProblem::new("knapsack");
        let a = p.add_var("a", 0.0, 1.0, true, -10.0);
        let b = p.add_var("b", 0.0, 1.0, true, -6.0);
        let c = p.add_var("c", 0.0, 1.0, true, -4.0);
        p.add_row("cap", Sense::Le, 2.0, vec![(a, 1.0), (b, 1.0), (c, 1.0)]);
        let s = solve_milp(&p, &SolverOptions::with_gap(0.0));
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective + 16.0).abs() < 1e-9);
        assert_eq!(
            (s.values[a].round(), s.values[b].round(), s.values[c].round()),
            (1.0, 1.0, 0.0)
        );
    }

    #[test]
    fn integral_relaxation_explores_only_the_root() {
        let mut p = MilpProblem::new("t");
        let x = p.add_var("x", 0.0, 5.0, true, -1.0);
        p.add_row("cap", Sense::Le, 3.0, vec![(x, 1.0)]);
        let s = solve_milp(&p, &SolverOptions::with_gap(0.0));
        assert_eq!(s.status, SolveStatus::Optimal);
        // The singleton row presolves into a bound, the relaxation is
        // integral at x = 3, and no branching happens.
        assert_eq!(s.nodes, 1);
        assert_eq!(s.values[x], 3.0);
    }

    #[test]
    fn infeasible_integer_problem() {
        // 0.4 <= x <= 0.6 with x integer.
        let mut p = MilpProblem::new("t");
        let x = p.add_var("x", 0.0, 1.0, true, 1.0);
        p.add_row("lo", Sense::Ge, 0.4, vec![(x, 1.0)]);
        p.add_row("hi", Sense::Le, 0.6, vec![(x, 1.0)]);
        let s = solve_milp(&p, &SolverOptions::with_gap(0.0));
        assert_eq!(s.status, SolveStatus::Infeasible);
    }

    #[test]
    fn weak_duality_holds_at_termination() {
        let mut p = MilpProblem::new("t");
        let x = p.add_var("x", 0.0, 7.0, true, -3.0);
        let y = p.add_var("y", 0.0, 7.0, true, -2.0);
        p.add_row("r1", Sense::Le, 9.5, vec![(x, 2.0), (y, 1.0)]);
        p.add_row("r2", Sense::Le, 7.1, vec![(x, 1.0), (y, 1.5)]);
        let s = solve_milp(&p, &SolverOptions::with_gap(0.0));
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!(s.bound <= s.objective + 1e-9);
        assert!(s.gap.abs() <= 1e-9);
    }
}
