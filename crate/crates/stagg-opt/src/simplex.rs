//! Bounded-variable revised primal simplex.
//!
//! Rows become equalities by adding one slack per row (`<=`: slack in
//! [0, inf), `=`: fixed at 0, `>=`: slack in (-inf, 0]), so the working
//! problem is `min c'x  s.t.  Ax + s = b, l <= x <= u`. Phase 1 starts
//! from the slack basis (or a caller-provided basis) and minimizes the sum
//! of bound violations of the basic variables with a composite objective;
//! phase 2 continues from the feasible basis with the true objective.
//! The basis inverse is kept as a dense LU factorization plus a product-
//! form eta file, refactored every [`REFACTOR_INTERVAL`] pivots. Dantzig
//! pricing switches to Bland's rule after a degeneracy stall to guarantee
//! termination.

use crate::lu::LuFactors;
use crate::milp::{MilpProblem, Sense};

const REFACTOR_INTERVAL: usize = 50;
const PIVOT_TOL: f64 = 1e-9;
const RC_TOL: f64 = 1e-9;
const BOUND_TOL: f64 = 1e-9;
/// Iterations without objective progress before Bland's rule engages.
const STALL_LIMIT: u64 = 500;

/// Column-major sparse view of a problem in computational form.
pub struct StandardForm {
    pub n_structural: usize,
    pub m: usize,
    /// Structural objective (slacks cost 0).
    pub obj: Vec<f64>,
    col_starts: Vec<usize>,
    col_rows: Vec<usize>,
    col_vals: Vec<f64>,
    pub rhs: Vec<f64>,
    /// Bounds over structural then slack columns (length n + m).
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
}

impl StandardForm {
    pub fn build(problem: &MilpProblem) -> StandardForm {
        let n = problem.n_vars();
        let m = problem.n_rows();
        let mut col_entries: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (r, row) in problem.rows().iter().enumerate() {
            for &(j, a) in &row.coeffs {
                col_entries[j].push((r, a));
            }
        }
        let mut col_starts = Vec::with_capacity(n + 1);
        let mut col_rows = Vec::new();
        let mut col_vals = Vec::new();
        for entries in &col_entries {
            col_starts.push(col_rows.len());
            for &(r, a) in entries {
                col_rows.push(r);
                col_vals.push(a);
            }
        }
        col_starts.push(col_rows.len());

        let mut lb: Vec<f64> = problem.vars().iter().map(|v| v.lb).collect();
        let mut ub: Vec<f64> = problem.vars().iter().map(|v| v.ub).collect();
        for row in problem.rows() {
            let (slb, sub) = match row.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Eq => (0.0, 0.0),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
            };
            lb.push(slb);
            ub.push(sub);
        }

        StandardForm {
            n_structural: n,
            m,
            obj: problem.vars().iter().map(|v| v.obj).collect(),
            col_starts,
            col_rows,
            col_vals,
            rhs: problem.rows().iter().map(|r| r.rhs).collect(),
            lb,
            ub,
        }
    }

    pub fn n_total(&self) -> usize {
        self.n_structural + self.m
    }

    /// Iterate the nonzeros of column `j` (slack columns are unit).
    fn for_col(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.n_structural {
            for k in self.col_starts[j]..self.col_starts[j + 1] {
                f(self.col_rows[k], self.col_vals[k]);
            }
        } else {
            f(j - self.n_structural, 1.0);
        }
    }

    fn col_dot(&self, j: usize, y: &[f64]) -> f64 {
        let mut sum = 0.0;
        self.for_col(j, |r, a| sum += a * y[r]);
        sum
    }

    fn cost(&self, j: usize) -> f64 {
        if j < self.n_structural {
            self.obj[j]
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
    /// Free nonbasic variables rest at zero.
    FreeZero,
}

/// Basis snapshot for warm starts (e.g., branch-and-bound children).
#[derive(Debug, Clone)]
pub struct BasisSnapshot {
    basis: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterLimit,
}

#[derive(Debug, Clone)]
pub struct LpResult {
    pub status: LpStatus,
    /// Values of all structural and slack columns.
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: u64,
    pub basis: BasisSnapshot,
    /// Largest equality residual `|Ax + s - b|` at the returned point.
    pub residual: f64,
}

struct Eta {
    row: usize,
    alpha: Vec<f64>,
}

pub struct Simplex<'a> {
    form: &'a StandardForm,
    lb: &'a [f64],
    ub: &'a [f64],
    basis: Vec<usize>,
    vstat: Vec<VarState>,
    lu: LuFactors,
    etas: Vec<Eta>,
    x_basic: Vec<f64>,
    iterations: u64,
    stall: u64,
    bland: bool,
}

enum Pricing {
    Phase1,
    Phase2,
}

impl<'a> Simplex<'a> {
    /// Solve with optional bound overrides and an optional starting basis.
    pub fn solve(
        form: &'a StandardForm,
        lb: &'a [f64],
        ub: &'a [f64],
        start: Option<&BasisSnapshot>,
        iter_limit: u64,
    ) -> LpResult {
        debug_assert_eq!(lb.len(), form.n_total());
        let m = form.m;

        // Bound sanity: an empty interval is infeasible outright.
        for j in 0..form.n_total() {
            if lb[j] > ub[j] + BOUND_TOL {
                return LpResult {
                    status: LpStatus::Infeasible,
                    x: vec![0.0; form.n_total()],
                    objective: f64::INFINITY,
                    iterations: 0,
                    basis: BasisSnapshot { basis: (form.n_structural..form.n_total()).collect() },
                    residual: 0.0,
                };
            }
        }

        let basis: Vec<usize> = match start {
            Some(snapshot) if Self::usable_basis(form, &snapshot.basis) => snapshot.basis.clone(),
            _ => (form.n_structural..form.n_total()).collect(),
        };

        let mut vstat = vec![VarState::AtLower; form.n_total()];
        for (j, state) in vstat.iter_mut().enumerate() {
            *state = if lb[j].is_finite() {
                VarState::AtLower
            } else if ub[j].is_finite() {
                VarState::AtUpper
            } else {
                VarState::FreeZero
            };
        }
        for (pos, &j) in basis.iter().enumerate() {
            vstat[j] = VarState::Basic(pos);
        }

        let lu = match Self::factorize(form, &basis) {
            Some(lu) => lu,
            None => {
                // Degenerate start basis; fall back to the slack basis.
                let basis: Vec<usize> = (form.n_structural..form.n_total()).collect();
                let mut vstat = vec![VarState::AtLower; form.n_total()];
                for (j, state) in vstat.iter_mut().enumerate() {
                    *state = if lb[j].is_finite() {
                        VarState::AtLower
                    } else if ub[j].is_finite() {
                        VarState::AtUpper
                    } else {
                        VarState::FreeZero
                    };
                }
                for (pos, &j) in basis.iter().enumerate() {
                    vstat[j] = VarState::Basic(pos);
                }
                let lu = Self::factorize(form, &basis).expect("identity basis factors");
                let mut solver = Simplex {
                    form,
                    lb,
                    ub,
                    basis,
                    vstat,
                    lu,
                    etas: Vec::new(),
                    x_basic: vec![0.0; m],
                    iterations: 0,
                    stall: 0,
                    bland: false,
                };
                solver.recompute_basics();
                return solver.run(iter_limit);
            }
        };

        let mut solver = Simplex {
            form,
            lb,
            ub,
            basis,
            vstat,
            lu,
            etas: Vec::new(),
            x_basic: vec![0.0; m],
            iterations: 0,
            stall: 0,
            bland: false,
        };
        solver.recompute_basics();
        solver.run(iter_limit)
    }

    fn usable_basis(form: &StandardForm, basis: &[usize]) -> bool {
        basis.len() == form.m && basis.iter().all(|&j| j < form.n_total()) && {
            let mut seen = vec![false; form.n_total()];
            basis.iter().all(|&j| !std::mem::replace(&mut seen[j], true))
        }
    }

    fn factorize(form: &StandardForm, basis: &[usize]) -> Option<LuFactors> {
        let m = form.m;
        let mut dense = vec![0.0; m * m];
        for (pos, &j) in basis.iter().enumerate() {
            form.for_col(j, |r, a| dense[r * m + pos] = a);
        }
        LuFactors::factorize(m, |r, c| dense[r * m + c])
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.vstat[j] {
            VarState::AtLower => self.lb[j],
            VarState::AtUpper => self.ub[j],
            VarState::FreeZero => 0.0,
            VarState::Basic(_) => unreachable!("basic treated as nonbasic"),
        }
    }

    /// x_B = B^{-1} (b - N x_N), straight from the LU factors.
    fn recompute_basics(&mut self) {
        let m = self.form.m;
        let mut rhs = self.form.rhs.to_vec();
        for j in 0..self.form.n_total() {
            if let VarState::Basic(_) = self.vstat[j] {
                continue;
            }
            let xj = self.nonbasic_value(j);
            if xj != 0.0 {
                self.form.for_col(j, |r, a| rhs[r] -= a * xj);
            }
        }
        self.ftran(&mut rhs);
        self.x_basic = rhs;
        debug_assert_eq!(self.x_basic.len(), m);
    }

    fn ftran(&self, v: &mut Vec<f64>) {
        self.lu.solve(v);
        for eta in &self.etas {
            let pivot = v[eta.row] / eta.alpha[eta.row];
            if pivot != 0.0 {
                for (i, &a) in eta.alpha.iter().enumerate() {
                    if i == eta.row {
                        continue;
                    }
                    v[i] -= a * pivot;
                }
            }
            v[eta.row] = pivot;
        }
    }

    fn btran(&self, v: &mut Vec<f64>) {
        for eta in self.etas.iter().rev() {
            let mut sum = v[eta.row];
            for (i, &a) in eta.alpha.iter().enumerate() {
                if i != eta.row {
                    sum -= a * v[i];
                }
            }
            v[eta.row] = sum / eta.alpha[eta.row];
        }
        self.lu.solve_transpose(v);
    }

    fn refactorize(&mut self) -> bool {
        match Self::factorize(self.form, &self.basis) {
            Some(lu) => {
                self.lu = lu;
                self.etas.clear();
                self.recompute_basics();
                true
            }
            None => false,
        }
    }

    /// Total bound violation of the basic variables.
    fn infeasibility(&self) -> f64 {
        let mut total = 0.0;
        for (pos, &j) in self.basis.iter().enumerate() {
            let x = self.x_basic[pos];
            if x < self.lb[j] - BOUND_TOL {
                total += self.lb[j] - x;
            } else if x > self.ub[j] + BOUND_TOL {
                total += x - self.ub[j];
            }
        }
        total
    }

    fn phase1_costs(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.form.m];
        for (pos, &j) in self.basis.iter().enumerate() {
            let x = self.x_basic[pos];
            if x < self.lb[j] - BOUND_TOL {
                c[pos] = -1.0;
            } else if x > self.ub[j] + BOUND_TOL {
                c[pos] = 1.0;
            }
        }
        c
    }

    fn run(&mut self, iter_limit: u64) -> LpResult {
        // Phase 1: drive out infeasibility.
        loop {
            if self.infeasibility() <= BOUND_TOL * (1.0 + self.form.m as f64) {
                break;
            }
            match self.iterate(Pricing::Phase1, iter_limit) {
                IterOutcome::Step => continue,
                IterOutcome::Optimal => {
                    // No improving direction while infeasible.
                    return self.finish(LpStatus::Infeasible);
                }
                IterOutcome::Unbounded => {
                    // The phase-1 objective is bounded below by 0; an
                    // unbounded ray here means numerical trouble. Treat as
                    // infeasible after a refactor double-check.
                    if !self.refactorize() {
                        return self.finish(LpStatus::Infeasible);
                    }
                    if self.infeasibility() <= BOUND_TOL * (1.0 + self.form.m as f64) {
                        break;
                    }
                    return self.finish(LpStatus::Infeasible);
                }
                IterOutcome::IterLimit => return self.finish(LpStatus::IterLimit),
            }
        }

        // Phase 2: optimize the true objective from the feasible basis.
        self.stall = 0;
        self.bland = false;
        loop {
            match self.iterate(Pricing::Phase2, iter_limit) {
                IterOutcome::Step => {
                    // Numerical drift can reintroduce infeasibility; catch
                    // it early and fall back to phase 1.
                    if self.iterations % 128 == 0
                        && self.infeasibility() > 1e-6 * (1.0 + self.form.m as f64)
                    {
                        self.refactorize();
                        if self.infeasibility() > 1e-6 * (1.0 + self.form.m as f64) {
                            return self.run(iter_limit);
                        }
                    }
                }
                IterOutcome::Optimal => return self.finish(LpStatus::Optimal),
                IterOutcome::Unbounded => return self.finish(LpStatus::Unbounded),
                IterOutcome::IterLimit => return self.finish(LpStatus::IterLimit),
            }
        }
    }

    fn finish(&mut self, status: LpStatus) -> LpResult {
        // Refactor for a clean final point.
        if !self.etas.is_empty() {
            self.refactorize();
        }
        let mut x = vec![0.0; self.form.n_total()];
        for j in 0..self.form.n_total() {
            if !matches!(self.vstat[j], VarState::Basic(_)) {
                x[j] = self.nonbasic_value(j);
            }
        }
        for (pos, &j) in self.basis.iter().enumerate() {
            x[j] = self.x_basic[pos];
        }
        let objective = (0..self.form.n_structural)
            .map(|j| self.form.obj[j] * x[j])
            .sum();
        let mut residual: f64 = 0.0;
        let mut activity = vec![0.0; self.form.m];
        for j in 0..self.form.n_total() {
            if x[j] != 0.0 {
                self.form.for_col(j, |r, a| activity[r] += a * x[j]);
            }
        }
        for r in 0..self.form.m {
            residual = residual.max((activity[r] - self.form.rhs[r]).abs());
        }
        LpResult {
            status,
            x,
            objective,
            iterations: self.iterations,
            basis: BasisSnapshot {
                basis: self.basis.clone(),
            },
            residual,
        }
    }

    fn iterate(&mut self, pricing: Pricing, iter_limit: u64) -> IterOutcome {
        if self.iterations >= iter_limit {
            return IterOutcome::IterLimit;
        }
        self.iterations += 1;
        if self.stall >= STALL_LIMIT {
            self.bland = true;
        }

        // Duals for the active objective.
        let mut y = match pricing {
            Pricing::Phase1 => self.phase1_costs(),
            Pricing::Phase2 => {
                let mut c = vec![0.0; self.form.m];
                for (pos, &j) in self.basis.iter().enumerate() {
                    c[pos] = self.form.cost(j);
                }
                c
            }
        };
        self.btran(&mut y);

        // Price nonbasic columns.
        let mut entering: Option<(usize, f64, f64)> = None; // (col, reduced cost, score)
        for j in 0..self.form.n_total() {
            let state = self.vstat[j];
            if matches!(state, VarState::Basic(_)) {
                continue;
            }
            if self.lb[j] >= self.ub[j] - BOUND_TOL && self.lb[j].is_finite() {
                continue; // fixed
            }
            let cost = match pricing {
                Pricing::Phase1 => 0.0,
                Pricing::Phase2 => self.form.cost(j),
            };
            let d = cost - self.form.col_dot(j, &y);
            let eligible = match state {
                VarState::AtLower => d < -RC_TOL,
                VarState::AtUpper => d > RC_TOL,
                VarState::FreeZero => d.abs() > RC_TOL,
                VarState::Basic(_) => false,
            };
            if !eligible {
                continue;
            }
            if self.bland {
                entering = Some((j, d, 0.0));
                break;
            }
            let score = d.abs();
            if entering.map_or(true, |(_, _, s)| score > s) {
                entering = Some((j, d, score));
            }
        }

        let Some((q, d_q, _)) = entering else {
            return IterOutcome::Optimal;
        };

        // Direction: sigma = +1 when x_q increases.
        let sigma = match self.vstat[q] {
            VarState::AtLower => 1.0,
            VarState::AtUpper => -1.0,
            VarState::FreeZero => {
                if d_q < 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            VarState::Basic(_) => unreachable!(),
        };

        // alpha = B^{-1} a_q.
        let mut alpha = vec![0.0; self.form.m];
        self.form.for_col(q, |r, a| alpha[r] = a);
        self.ftran(&mut alpha);

        // Ratio test. Basic i moves at rate delta_i = -sigma * alpha_i.
        // Feasible basics block at their nearer bound; infeasible basics
        // block where they become feasible (the phase-1 kink).
        let own_range = self.ub[q] - self.lb[q]; // may be inf
        let mut t_best = own_range.max(0.0);
        let mut blocker: Option<(usize, bool)> = None; // (basis pos, to_upper)

        for (pos, &bj) in self.basis.iter().enumerate() {
            let delta = -sigma * alpha[pos];
            if delta.abs() <= PIVOT_TOL {
                continue;
            }
            let x = self.x_basic[pos];
            // A basic already beyond a bound and moving further away never
            // blocks; the composite phase-1 objective accounts for it.
            let (target, to_upper) = if delta < 0.0 {
                if x > self.ub[bj] + BOUND_TOL {
                    (self.ub[bj], true)
                } else if x >= self.lb[bj] - BOUND_TOL && self.lb[bj].is_finite() {
                    (self.lb[bj], false)
                } else {
                    continue;
                }
            } else if x < self.lb[bj] - BOUND_TOL {
                (self.lb[bj], false)
            } else if x <= self.ub[bj] + BOUND_TOL && self.ub[bj].is_finite() {
                (self.ub[bj], true)
            } else {
                continue;
            };
            let ratio = ((target - x) / delta).max(0.0);
            let wins = match blocker {
                None => ratio < t_best - 1e-12,
                Some((bpos, _)) => {
                    if self.bland {
                        // Bland anti-cycling: lowest leaving variable
                        // index among the ratio ties.
                        ratio < t_best - 1e-12
                            || (ratio < t_best + 1e-12 && self.basis[pos] < self.basis[bpos])
                    } else {
                        ratio < t_best - 1e-12
                            || (ratio < t_best + 1e-12
                                && alpha[pos].abs() > alpha[bpos].abs() + 1e-12)
                    }
                }
            };
            if wins {
                t_best = ratio;
                blocker = Some((pos, to_upper));
            }
        }

        if t_best.is_infinite() {
            return IterOutcome::Unbounded;
        }

        let improving = t_best > 1e-12;
        if improving {
            self.stall = 0;
        } else {
            self.stall += 1;
        }

        match blocker {
            None => {
                // Entering variable flips to its opposite bound.
                for (pos, _) in self.basis.iter().enumerate() {
                    self.x_basic[pos] += -sigma * alpha[pos] * t_best;
                }
                self.vstat[q] = match self.vstat[q] {
                    VarState::AtLower => VarState::AtUpper,
                    VarState::AtUpper => VarState::AtLower,
                    other => other,
                };
                IterOutcome::Step
            }
            Some((r, to_upper)) => {
                if alpha[r].abs() <= PIVOT_TOL {
                    // Unusable pivot; refactor and retry, or give up on
                    // this column by a forced Bland switch.
                    self.bland = true;
                    if !self.refactorize() {
                        return IterOutcome::IterLimit;
                    }
                    return IterOutcome::Step;
                }
                let leaving = self.basis[r];
                for (pos, _) in self.basis.iter().enumerate() {
                    self.x_basic[pos] += -sigma * alpha[pos] * t_best;
                }
                let entering_value = match self.vstat[q] {
                    VarState::AtLower => self.lb[q] + sigma * t_best,
                    VarState::AtUpper => self.ub[q] + sigma * t_best,
                    VarState::FreeZero => sigma * t_best,
                    VarState::Basic(_) => unreachable!(),
                };
                self.vstat[leaving] = if to_upper {
                    VarState::AtUpper
                } else {
                    VarState::AtLower
                };
                self.basis[r] = q;
                self.vstat[q] = VarState::Basic(r);
                self.x_basic[r] = entering_value;
                self.etas.push(Eta {
                    row: r,
                    alpha,
                });
                if self.etas.len() >= REFACTOR_INTERVAL && !self.refactorize() {
                    return IterOutcome::IterLimit;
                }
                IterOutcome::Step
            }
        }
    }
}

enum IterOutcome {
    Step,
    Optimal,
    Unbounded,
    IterLimit,
}
