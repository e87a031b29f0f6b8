//! Solver correctness against independent brute-force oracles.
//!
//! LPs are checked against vertex enumeration (every choice of n active
//! constraints), MILPs against full lattice enumeration. Both oracles are
//! straight-line evaluations that share no code with the simplex.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use stagg_opt::branch_bound::{solve_lp, solve_milp, SolverOptions};
use stagg_opt::milp::{MilpProblem, Sense, SolveStatus};

/// One inequality `coeffs . x (<=|>=) rhs` in dense form.
struct DenseRow {
    coeffs: Vec<f64>,
    rhs: f64,
    ge: bool,
}

struct DenseLp {
    obj: Vec<f64>,
    rows: Vec<DenseRow>,
    ub: Vec<f64>,
}

impl DenseLp {
    fn feasible(&self, x: &[f64], tol: f64) -> bool {
        for (j, &v) in x.iter().enumerate() {
            if v < -tol || v > self.ub[j] + tol {
                return false;
            }
        }
        for row in &self.rows {
            let lhs: f64 = row.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
            let ok = if row.ge {
                lhs >= row.rhs - tol
            } else {
                lhs <= row.rhs + tol
            };
            if !ok {
                return false;
            }
        }
        true
    }

    fn objective(&self, x: &[f64]) -> f64 {
        self.obj.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

/// Generate a random feasible LP: rows are tilted around a random interior
/// point so the region is never empty, and the box keeps it bounded.
fn random_lp(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DenseLp {
    let ub: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..3.0)).collect();
    let x0: Vec<f64> = ub.iter().map(|&u| rng.gen_range(0.0..u)).collect();
    let mut rows = Vec::new();
    for _ in 0..m {
        let coeffs: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.3) {
                    0.0
                } else {
                    rng.gen_range(-2.0..2.0)
                }
            })
            .collect();
        let at_x0: f64 = coeffs.iter().zip(&x0).map(|(a, v)| a * v).sum();
        let ge = rng.gen_bool(0.3);
        let slack = rng.gen_range(0.05..1.0);
        let rhs = if ge { at_x0 - slack } else { at_x0 + slack };
        rows.push(DenseRow { coeffs, rhs, ge });
    }
    let obj: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    DenseLp { obj, rows, ub }
}

/// Solve a small dense linear system by Gaussian elimination; None when
/// singular.
fn solve_square(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
    let mut rhs = b.to_vec();
    for k in 0..n {
        let pivot = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs()))?;
        if m[pivot][k].abs() < 1e-10 {
            return None;
        }
        m.swap(k, pivot);
        rhs.swap(k, pivot);
        for i in (k + 1)..n {
            let f = m[i][k] / m[k][k];
            if f != 0.0 {
                for c in k..n {
                    m[i][c] -= f * m[k][c];
                }
                rhs[i] -= f * rhs[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = rhs[i];
        for c in (i + 1)..n {
            sum -= m[i][c] * x[c];
        }
        x[i] = sum / m[i][i];
    }
    Some(x)
}

/// Brute-force LP optimum: enumerate all vertices (n active constraints
/// from rows and bounds) and take the best feasible one.
fn vertex_enumeration_optimum(lp: &DenseLp) -> Option<f64> {
    let n = lp.obj.len();
    // Active-constraint candidates: each row as equality, each bound.
    let mut constraints: Vec<(Vec<f64>, f64)> = Vec::new();
    for row in &lp.rows {
        constraints.push((row.coeffs.clone(), row.rhs));
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        constraints.push((e.clone(), 0.0));
        constraints.push((e, lp.ub[j]));
    }
    let total = constraints.len();
    let mut best: Option<f64> = None;
    let mut choice: Vec<usize> = (0..n).collect();
    loop {
        let a: Vec<Vec<f64>> = choice.iter().map(|&i| constraints[i].0.clone()).collect();
        let b: Vec<f64> = choice.iter().map(|&i| constraints[i].1).collect();
        if let Some(x) = solve_square(&a, &b) {
            if lp.feasible(&x, 1e-7) {
                let obj = lp.objective(&x);
                best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            }
        }
        // Next combination in lexicographic order.
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if choice[i] != i + total - n {
                choice[i] += 1;
                for k in (i + 1)..n {
                    choice[k] = choice[k - 1] + 1;
                }
                break;
            }
        }
    }
}

fn to_problem(lp: &DenseLp, integer: bool) -> MilpProblem {
    let mut p = MilpProblem::new("random");
    let vars: Vec<usize> = lp
        .obj
        .iter()
        .enumerate()
        .map(|(j, &c)| p.add_var(format!("x[{}]", j), 0.0, lp.ub[j], integer, c))
        .collect();
    for (i, row) in lp.rows.iter().enumerate() {
        let sense = if row.ge { Sense::Ge } else { Sense::Le };
        let coeffs: Vec<(usize, f64)> = row
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, &a)| a != 0.0)
            .map(|(j, &a)| (vars[j], a))
            .collect();
        p.add_row(format!("r[{}]", i), sense, row.rhs, coeffs);
    }
    p
}

#[test]
fn lp_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for trial in 0..20 {
        let n = rng.gen_range(3..=6);
        let m = rng.gen_range(3..=8);
        let lp = random_lp(&mut rng, n, m);
        let oracle = vertex_enumeration_optimum(&lp).expect("region is nonempty by construction");
        let problem = to_problem(&lp, false);
        let solution = solve_lp(&problem, &SolverOptions::with_gap(0.0));
        assert_eq!(solution.status, SolveStatus::Optimal, "trial {}", trial);
        assert!(
            (solution.objective - oracle).abs() <= 1e-8,
            "trial {}: simplex {} vs vertices {}",
            trial,
            solution.objective,
            oracle
        );
        assert!(lp.feasible(&solution.values, 1e-7), "trial {}", trial);
    }
}

/// Random pure-integer MILP with small boxes, checked against full
/// lattice enumeration.
fn random_milp(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DenseLp {
    let ub: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=2) as f64).collect();
    let x0: Vec<f64> = ub.iter().map(|&u| rng.gen_range(0..=u as i64) as f64).collect();
    let mut rows = Vec::new();
    for _ in 0..m {
        let coeffs: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.25) {
                    0.0
                } else {
                    rng.gen_range(-3..=3) as f64
                }
            })
            .collect();
        let at_x0: f64 = coeffs.iter().zip(&x0).map(|(a, v)| a * v).sum();
        let ge = rng.gen_bool(0.3);
        let slack = rng.gen_range(0.0..2.0);
        let rhs = if ge { at_x0 - slack } else { at_x0 + slack };
        rows.push(DenseRow { coeffs, rhs, ge });
    }
    let obj: Vec<f64> = (0..n).map(|_| rng.gen_range(-5..=5) as f64).collect();
    DenseLp { obj, rows, ub }
}

fn lattice_optimum(lp: &DenseLp) -> Option<f64> {
    let n = lp.obj.len();
    let mut x = vec![0.0; n];
    let mut best: Option<f64> = None;
    loop {
        if lp.feasible(&x, 1e-9) {
            let obj = lp.objective(&x);
            best = Some(best.map_or(obj, |b: f64| b.min(obj)));
        }
        let mut j = 0;
        loop {
            if j == n {
                return best;
            }
            if x[j] + 1.0 <= lp.ub[j] + 1e-9 {
                x[j] += 1.0;
                break;
            }
            x[j] = 0.0;
            j += 1;
        }
    }
}

#[test]
fn milp_matches_lattice_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..20 {
        let n = rng.gen_range(6..=12);
        let m = rng.gen_range(3..=6);
        let lp = random_milp(&mut rng, n, m);
        let oracle = lattice_optimum(&lp).expect("x0 is feasible by construction");
        let problem = to_problem(&lp, true);
        let solution = solve_milp(&problem, &SolverOptions::with_gap(0.0));
        assert_eq!(solution.status, SolveStatus::Optimal, "trial {}", trial);
        assert!(
            (solution.objective - oracle).abs() <= 1e-6,
            "trial {}: branch-and-bound {} vs lattice {}",
            trial,
            solution.objective,
            oracle
        );
        // Weak duality at termination.
        assert!(solution.bound <= solution.objective + 1e-9);
        // The incumbent is integral and feasible.
        for v in &solution.values {
            assert!((v - v.round()).abs() < 1e-6);
        }
        assert!(lp.feasible(&solution.values, 1e-6));
    }
}

#[test]
fn lp_solutions_satisfy_rows_within_scaled_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..10 {
        let lp = random_lp(&mut rng, 5, 6);
        let problem = to_problem(&lp, false);
        let solution = solve_lp(&problem, &SolverOptions::with_gap(0.0));
        assert_eq!(solution.status, SolveStatus::Optimal);
        for row in problem.rows() {
            let scale = 1.0_f64.max(row.rhs.abs());
            assert!(row.violation(&solution.values) <= 1e-8 * scale);
        }
    }
}
