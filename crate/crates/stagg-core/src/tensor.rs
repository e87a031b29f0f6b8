//! Reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Tape`] records every operation of a forward pass (define-by-run) and
//! [`Tape::backward`] replays it in reverse to accumulate adjoints. The op
//! set is exactly what the pooling autoencoder losses need: matrix products,
//! elementwise arithmetic, a few activations, and scalar reductions. The
//! tape is rebuilt on every forward pass and is confined to one worker;
//! independent training runs use independent tapes.

use std::cell::RefCell;
use std::ops::Range;

use thiserror::Error;

use crate::matrix::Matrix;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("dimension error in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },
    #[error("usage error: {0}")]
    Usage(String),
}

fn dim_err(op: &'static str, detail: String) -> TensorError {
    TensorError::Dimension { op, detail }
}

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(&self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// Divide by a 1x1 tensor, broadcast over the numerator.
    DivScalar(Var, Var),
    Log(Var),
    Exp(Var),
    Square(Var),
    Relu(Var),
    Tanh(Var),
    SoftmaxRows(Var),
    Sum(Var),
    Trace(Var),
    FrobeniusNorm(Var),
    Scale(Var, f64),
    /// Extract a rectangular block; the adjoint scatters back.
    Block(Var, Range<usize>, Range<usize>),
}

struct Node {
    op: Op,
    value: Matrix,
}

/// Records a forward computation for reverse-mode differentiation.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    fn push(&self, op: Op, value: Matrix) -> Var {
        debug_assert!(value.all_finite(), "non-finite forward value");
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { op, value });
        Var(nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> Matrix {
        self.nodes.borrow()[v.0].value.clone()
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes.borrow()[v.0].value.shape()
    }

    /// Register an input tensor. Leaves are the only nodes that receive
    /// gradients callers care about (weights, inputs, constants alike).
    pub fn leaf(&self, value: Matrix) -> Var {
        self.push(Op::Leaf, value)
    }

    pub fn scalar(&self, value: f64) -> Var {
        self.leaf(Matrix::scalar(value))
    }

    pub fn matmul(&self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ar, ac) = self.shape(a);
        let (br, bc) = self.shape(b);
        if ac != br {
            return Err(dim_err("matmul", format!("{}x{} * {}x{}", ar, ac, br, bc)));
        }
        let value = {
            let nodes = self.nodes.borrow();
            nodes[a.0].value.matmul(&nodes[b.0].value)
        };
        Ok(self.push(Op::MatMul(a, b), value))
    }

    pub fn transpose(&self, a: Var) -> Var {
        let value = self.nodes.borrow()[a.0].value.transpose();
        self.push(Op::Transpose(a), value)
    }

    fn binary(
        &self,
        op_name: &'static str,
        a: Var,
        b: Var,
        make: impl Fn(Var, Var) -> Op,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Var, TensorError> {
        if self.shape(a) != self.shape(b) {
            return Err(dim_err(
                op_name,
                format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            ));
        }
        let value = {
            let nodes = self.nodes.borrow();
            nodes[a.0].value.zip(&nodes[b.0].value, f)
        };
        Ok(self.push(make(a, b), value))
    }

    pub fn add(&self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary("add", a, b, Op::Add, |x, y| x + y)
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary("sub", a, b, Op::Sub, |x, y| x - y)
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary("mul", a, b, Op::Mul, |x, y| x * y)
    }

    /// Divide every entry of `a` by the scalar tensor `b`.
    pub fn div_scalar(&self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (br, bc) = self.shape(b);
        if (br, bc) != (1, 1) {
            return Err(dim_err("div_scalar", format!("divisor is {}x{}", br, bc)));
        }
        let s = self.nodes.borrow()[b.0].value.scalar_value();
        if s == 0.0 {
            return Err(TensorError::Domain {
                op: "div_scalar",
                detail: "division by zero".into(),
            });
        }
        let value = self.nodes.borrow()[a.0].value.scale(1.0 / s);
        Ok(self.push(Op::DivScalar(a, b), value))
    }

    pub fn log(&self, a: Var) -> Result<Var, TensorError> {
        {
            let nodes = self.nodes.borrow();
            if let Some(v) = nodes[a.0].value.data().iter().find(|v| **v <= 0.0) {
                return Err(TensorError::Domain {
                    op: "log",
                    detail: format!("non-positive input {}", v),
                });
            }
        }
        let value = self.nodes.borrow()[a.0].value.map(f64::ln);
        Ok(self.push(Op::Log(a), value))
    }

    pub fn exp(&self, a: Var) -> Var {
        let value = self.nodes.borrow()[a.0].value.map(f64::exp);
        self.push(Op::Exp(a), value)
    }

    pub fn square(&self, a: Var) -> Var {
        let value = self.nodes.borrow()[a.0].value.map(|v| v * v);
        self.push(Op::Square(a), value)
    }

    pub fn relu(&self, a: Var) -> Var {
        let value = self.nodes.borrow()[a.0].value.map(|v| v.max(0.0));
        self.push(Op::Relu(a), value)
    }

    pub fn tanh(&self, a: Var) -> Var {
        let value = self.nodes.borrow()[a.0].value.map(f64::tanh);
        self.push(Op::Tanh(a), value)
    }

    /// Row-wise softmax with per-row max subtraction for stability.
    /// Output rows sum to 1 and entries lie strictly in (0, 1).
    pub fn softmax_rows(&self, a: Var) -> Var {
        let value = {
            let nodes = self.nodes.borrow();
            let m = &nodes[a.0].value;
            let mut out = Matrix::zeros(m.rows(), m.cols());
            for r in 0..m.rows() {
                let row = m.row(r);
                let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                let mut denom = 0.0;
                for c in 0..m.cols() {
                    let e = (row[c] - max).exp();
                    out.set(r, c, e);
                    denom += e;
                }
                for c in 0..m.cols() {
                    out.set(r, c, out.get(r, c) / denom);
                }
            }
            out
        };
        self.push(Op::SoftmaxRows(a), value)
    }

    pub fn sum(&self, a: Var) -> Var {
        let value = Matrix::scalar(self.nodes.borrow()[a.0].value.sum());
        self.push(Op::Sum(a), value)
    }

    pub fn trace(&self, a: Var) -> Result<Var, TensorError> {
        let (r, c) = self.shape(a);
        if r != c {
            return Err(dim_err("trace", format!("{}x{} is not square", r, c)));
        }
        let value = Matrix::scalar(self.nodes.borrow()[a.0].value.trace());
        Ok(self.push(Op::Trace(a), value))
    }

    pub fn frobenius_norm(&self, a: Var) -> Var {
        let value = Matrix::scalar(self.nodes.borrow()[a.0].value.frobenius_norm());
        self.push(Op::FrobeniusNorm(a), value)
    }

    pub fn scale(&self, a: Var, c: f64) -> Var {
        let value = self.nodes.borrow()[a.0].value.scale(c);
        self.push(Op::Scale(a, c), value)
    }

    pub fn block(
        &self,
        a: Var,
        rows: Range<usize>,
        cols: Range<usize>,
    ) -> Result<Var, TensorError> {
        let (r, c) = self.shape(a);
        if rows.end > r || cols.end > c {
            return Err(dim_err(
                "block",
                format!("block {:?}x{:?} out of {}x{}", rows, cols, r, c),
            ));
        }
        let value = self.nodes.borrow()[a.0].value.block(rows.clone(), cols.clone());
        Ok(self.push(Op::Block(a, rows, cols), value))
    }

    /// Reverse pass from a scalar output. Returns adjoints for every node;
    /// leaves not on the path to `output` get zero gradients.
    pub fn backward(&self, output: Var) -> Result<Gradients, TensorError> {
        let nodes = self.nodes.borrow();
        if nodes[output.0].value.shape() != (1, 1) {
            return Err(TensorError::Usage(format!(
                "backward requires a scalar output, got {:?}",
                nodes[output.0].value.shape()
            )));
        }
        let mut adjoints: Vec<Option<Matrix>> = vec![None; nodes.len()];
        adjoints[output.0] = Some(Matrix::scalar(1.0));

        let accumulate = |slot: &mut Option<Matrix>, delta: Matrix| match slot {
            Some(existing) => *existing = existing.add(&delta),
            None => *slot = Some(delta),
        };

        for id in (0..=output.0).rev() {
            let Some(grad) = adjoints[id].clone() else {
                continue;
            };
            let node = &nodes[id];
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let da = grad.matmul(&nodes[b.0].value.transpose());
                    let db = nodes[a.0].value.transpose().matmul(&grad);
                    accumulate(&mut adjoints[a.0], da);
                    accumulate(&mut adjoints[b.0], db);
                }
                Op::Transpose(a) => {
                    accumulate(&mut adjoints[a.0], grad.transpose());
                }
                Op::Add(a, b) => {
                    accumulate(&mut adjoints[a.0], grad.clone());
                    accumulate(&mut adjoints[b.0], grad);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut adjoints[a.0], grad.clone());
                    accumulate(&mut adjoints[b.0], grad.scale(-1.0));
                }
                Op::Mul(a, b) => {
                    accumulate(&mut adjoints[a.0], grad.hadamard(&nodes[b.0].value));
                    accumulate(&mut adjoints[b.0], grad.hadamard(&nodes[a.0].value));
                }
                Op::DivScalar(a, b) => {
                    let s = nodes[b.0].value.scalar_value();
                    accumulate(&mut adjoints[a.0], grad.scale(1.0 / s));
                    let ds = -grad.hadamard(&nodes[a.0].value).sum() / (s * s);
                    accumulate(&mut adjoints[b.0], Matrix::scalar(ds));
                }
                Op::Log(a) => {
                    let da = grad.zip(&nodes[a.0].value, |g, x| g / x);
                    accumulate(&mut adjoints[a.0], da);
                }
                Op::Exp(a) => {
                    accumulate(&mut adjoints[a.0], grad.hadamard(&node.value));
                }
                Op::Square(a) => {
                    let da = grad.zip(&nodes[a.0].value, |g, x| 2.0 * g * x);
                    accumulate(&mut adjoints[a.0], da);
                }
                Op::Relu(a) => {
                    let da = grad.zip(&nodes[a.0].value, |g, x| if x > 0.0 { g } else { 0.0 });
                    accumulate(&mut adjoints[a.0], da);
                }
                Op::Tanh(a) => {
                    let da = grad.zip(&node.value, |g, y| g * (1.0 - y * y));
                    accumulate(&mut adjoints[a.0], da);
                }
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let mut da = Matrix::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let mut dot = 0.0;
                        for c in 0..y.cols() {
                            dot += grad.get(r, c) * y.get(r, c);
                        }
                        for c in 0..y.cols() {
                            da.set(r, c, y.get(r, c) * (grad.get(r, c) - dot));
                        }
                    }
                    accumulate(&mut adjoints[a.0], da);
                }
                Op::Sum(a) => {
                    let (r, c) = nodes[a.0].value.shape();
                    accumulate(&mut adjoints[a.0], Matrix::filled(r, c, grad.scalar_value()));
                }
                Op::Trace(a) => {
                    let n = nodes[a.0].value.rows();
                    accumulate(
                        &mut adjoints[a.0],
                        Matrix::identity(n).scale(grad.scalar_value()),
                    );
                }
                Op::FrobeniusNorm(a) => {
                    let norm = node.value.scalar_value();
                    // Gradient at the origin is defined as zero.
                    let da = if norm == 0.0 {
                        let (r, c) = nodes[a.0].value.shape();
                        Matrix::zeros(r, c)
                    } else {
                        nodes[a.0].value.scale(grad.scalar_value() / norm)
                    };
                    accumulate(&mut adjoints[a.0], da);
                }
                Op::Scale(a, c) => {
                    accumulate(&mut adjoints[a.0], grad.scale(*c));
                }
                Op::Block(a, rows, cols) => {
                    let (r, c) = nodes[a.0].value.shape();
                    let mut da = Matrix::zeros(r, c);
                    for (ro, rr) in rows.clone().enumerate() {
                        for (co, cc) in cols.clone().enumerate() {
                            da.set(rr, cc, grad.get(ro, co));
                        }
                    }
                    accumulate(&mut adjoints[a.0], da);
                }
            }
        }

        let shapes: Vec<(usize, usize)> = nodes.iter().map(|n| n.value.shape()).collect();
        Ok(Gradients { adjoints, shapes })
    }
}

/// Result of a backward pass: one adjoint per tape node.
pub struct Gradients {
    adjoints: Vec<Option<Matrix>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient of the backward output with respect to `v`. Nodes that do
    /// not influence the output get an all-zero gradient of their shape.
    pub fn wrt(&self, v: Var) -> Matrix {
        match &self.adjoints[v.0] {
            Some(m) => m.clone(),
            None => {
                let (r, c) = self.shapes[v.0];
                Matrix::zeros(r, c)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::central_difference;

    fn seeded(seed: u64) -> impl FnMut() -> f64 {
        // xorshift; good enough to fill test matrices.
        let mut state = seed.wrapping_mul(2685821657736338717).max(1);
        move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state as f64 / u64::MAX as f64) * 2.0 - 1.0
        }
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut next = seeded(seed);
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| next()).collect())
    }

    #[test]
    fn matmul_forward_and_identity() {
        let tape = Tape::new();
        let m = tape.leaf(Matrix::from_rows(&[vec![2.0, -1.0], vec![0.5, 3.0]]));
        let i = tape.leaf(Matrix::identity(2));
        let out = tape.matmul(i, m).unwrap();
        assert_eq!(tape.value(out), tape.value(m));

        let a = tape.leaf(Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]));
        let b = tape.leaf(Matrix::from_rows(&[vec![1.0], vec![1.0]]));
        let c = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[3.0, 7.0]);
    }

    #[test]
    fn matmul_shape_mismatch_is_error() {
        let tape = Tape::new();
        let a = tape.leaf(Matrix::zeros(2, 3));
        let b = tape.leaf(Matrix::zeros(2, 3));
        assert!(matches!(
            tape.matmul(a, b),
            Err(TensorError::Dimension { .. })
        ));
    }

    #[test]
    fn matmul_gradient_matches_finite_differences() {
        for seed in 0..10 {
            let a0 = random_matrix(3, 4, 100 + seed);
            let b0 = random_matrix(4, 2, 200 + seed);
            let f = |a_vals: &[f64]| {
                let tape = Tape::new();
                let a = tape.leaf(Matrix::from_vec(3, 4, a_vals.to_vec()));
                let b = tape.leaf(b0.clone());
                let out = tape.sum(tape.matmul(a, b).unwrap());
                tape.value(out).scalar_value()
            };
            let numeric = central_difference(&f, a0.data());

            let tape = Tape::new();
            let a = tape.leaf(a0.clone());
            let b = tape.leaf(b0.clone());
            let out = tape.sum(tape.matmul(a, b).unwrap());
            let grads = tape.backward(out).unwrap();
            let analytic = grads.wrt(a);
            for (an, nu) in analytic.data().iter().zip(numeric.iter()) {
                let denom = nu.abs().max(1e-8);
                assert!(
                    (an - nu).abs() / denom <= 1e-4,
                    "grad mismatch: {} vs {}",
                    an,
                    nu
                );
            }
        }
    }

    #[test]
    fn elementwise_identities() {
        let tape = Tape::new();
        let m = tape.leaf(Matrix::from_rows(&[vec![1.5, -2.0], vec![0.0, 4.0]]));
        let zero = tape.leaf(Matrix::zeros(2, 2));
        let sum = tape.add(zero, m).unwrap();
        assert_eq!(tape.value(sum), tape.value(m));

        // log(exp(x)) = x on a modest range.
        for x in [-10.0, -3.3, 0.0, 1.7, 10.0] {
            let v = tape.leaf(Matrix::scalar(x));
            let roundtrip = tape.log(tape.exp(v)).unwrap();
            assert!((tape.value(roundtrip).scalar_value() - x).abs() <= 1e-12);
        }
    }

    #[test]
    fn log_rejects_nonpositive() {
        let tape = Tape::new();
        let v = tape.leaf(Matrix::scalar(-1.0));
        assert!(matches!(tape.log(v), Err(TensorError::Domain { .. })));
    }

    #[test]
    fn square_gradient_at_three_is_six() {
        let tape = Tape::new();
        let x = tape.leaf(Matrix::scalar(3.0));
        let y = tape.square(x);
        let grads = tape.backward(y).unwrap();
        assert!((grads.wrt(x).scalar_value() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn activations_basic_values() {
        let tape = Tape::new();
        let v = tape.leaf(Matrix::from_rows(&[vec![-1.0, 2.0]]));
        assert_eq!(tape.value(tape.relu(v)).data(), &[0.0, 2.0]);

        let z = tape.leaf(Matrix::zeros(1, 4));
        let s = tape.softmax_rows(z);
        for &p in tape.value(s).data() {
            assert!((p - 0.25).abs() < 1e-15);
        }

        let t0 = tape.leaf(Matrix::scalar(0.0));
        let t = tape.tanh(t0);
        let grads = tape.backward(t).unwrap();
        assert!((grads.wrt(t0).scalar_value() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_rows_sum_to_one_strictly_inside_unit_interval() {
        for seed in 0..10 {
            let m = random_matrix(5, 4, 300 + seed).scale(8.0);
            let tape = Tape::new();
            let v = tape.leaf(m);
            let s = tape.value(tape.softmax_rows(v));
            for r in 0..s.rows() {
                let sum: f64 = s.row(r).iter().sum();
                assert!((sum - 1.0).abs() <= 1e-12);
                for &p in s.row(r) {
                    assert!(p > 0.0 && p < 1.0);
                }
            }
        }
    }

    #[test]
    fn reductions_known_values() {
        let tape = Tape::new();
        let i3 = tape.leaf(Matrix::identity(3));
        assert_eq!(tape.value(tape.trace(i3).unwrap()).scalar_value(), 3.0);

        let m = tape.leaf(Matrix::from_rows(&[vec![3.0, 4.0]]));
        assert_eq!(tape.value(tape.frobenius_norm(m)).scalar_value(), 5.0);

        let w = tape.leaf(Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]));
        let s = tape.sum(w);
        let grads = tape.backward(s).unwrap();
        assert_eq!(grads.wrt(w), Matrix::filled(2, 2, 1.0));
    }

    #[test]
    fn trace_requires_square() {
        let tape = Tape::new();
        let m = tape.leaf(Matrix::zeros(2, 3));
        assert!(matches!(tape.trace(m), Err(TensorError::Dimension { .. })));
    }

    #[test]
    fn frobenius_gradient_at_zero_is_zero() {
        let tape = Tape::new();
        let m = tape.leaf(Matrix::zeros(2, 2));
        let n = tape.frobenius_norm(m);
        let grads = tape.backward(n).unwrap();
        assert_eq!(grads.wrt(m), Matrix::zeros(2, 2));
    }

    #[test]
    fn backward_requires_scalar() {
        let tape = Tape::new();
        let m = tape.leaf(Matrix::zeros(2, 2));
        assert!(matches!(tape.backward(m), Err(TensorError::Usage(_))));
    }

    #[test]
    fn backward_is_deterministic_across_fresh_tapes() {
        let run = || {
            let tape = Tape::new();
            let w = tape.leaf(random_matrix(3, 3, 77));
            let x = tape.leaf(random_matrix(3, 2, 78));
            let h = tape.tanh(tape.matmul(w, x).unwrap());
            let loss = tape.sum(tape.square(h));
            let grads = tape.backward(loss).unwrap();
            grads.wrt(w)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn unused_leaf_gets_zero_gradient() {
        let tape = Tape::new();
        let used = tape.leaf(Matrix::scalar(2.0));
        let unused = tape.leaf(Matrix::zeros(3, 2));
        let out = tape.square(used);
        let grads = tape.backward(out).unwrap();
        assert_eq!(grads.wrt(unused), Matrix::zeros(3, 2));
    }

    #[test]
    fn composite_gradient_matches_finite_differences() {
        // softmax -> transpose product -> trace/norm mix; exercises most ops.
        for seed in 0..10 {
            let x0 = random_matrix(4, 3, 500 + seed);
            let f = |vals: &[f64]| {
                let tape = Tape::new();
                let x = tape.leaf(Matrix::from_vec(4, 3, vals.to_vec()));
                let s = tape.softmax_rows(x);
                let st = tape.transpose(s);
                let sts = tape.matmul(st, s).unwrap();
                let tr = tape.trace(sts).unwrap();
                let nrm = tape.frobenius_norm(sts);
                let ratio = tape.div_scalar(tr, nrm).unwrap();
                let lg = tape.log(ratio).unwrap();
                let out = tape.sum(lg);
                tape.value(out).scalar_value()
            };
            let numeric = central_difference(&f, x0.data());

            let tape = Tape::new();
            let x = tape.leaf(x0.clone());
            let s = tape.softmax_rows(x);
            let st = tape.transpose(s);
            let sts = tape.matmul(st, s).unwrap();
            let tr = tape.trace(sts).unwrap();
            let nrm = tape.frobenius_norm(sts);
            let ratio = tape.div_scalar(tr, nrm).unwrap();
            let lg = tape.log(ratio).unwrap();
            let out = tape.sum(lg);
            let grads = tape.backward(out).unwrap();
            let analytic = grads.wrt(x);
            for (an, nu) in analytic.data().iter().zip(numeric.iter()) {
                let denom = nu.abs().max(1e-8);
                assert!(
                    (an - nu).abs() / denom <= 1e-4,
                    "seed {}: {} vs {}",
                    seed,
                    an,
                    nu
                );
            }
        }
    }
}
