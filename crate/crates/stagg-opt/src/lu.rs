//! Dense LU factorization with partial pivoting for simplex bases.

/// Packed L and U factors of a permuted square matrix.
pub struct LuFactors {
    n: usize,
    /// Row-major; strictly-lower part holds L (unit diagonal implicit),
    /// upper part holds U.
    lu: Vec<f64>,
    /// Row permutation applied to the input.
    perm: Vec<usize>,
}

impl LuFactors {
    /// Factor the matrix whose entry (r, c) is `get(r, c)`. Returns `None`
    /// when the matrix is numerically singular.
    pub fn factorize(n: usize, get: impl Fn(usize, usize) -> f64) -> Option<LuFactors> {
        let mut lu = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                lu[r * n + c] = get(r, c);
            }
        }
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            // Partial pivot on the largest magnitude in column k.
            let mut pivot_row = k;
            let mut pivot_val = lu[k * n + k].abs();
            for r in (k + 1)..n {
                let v = lu[r * n + k].abs();
                if v > pivot_val {
                    pivot_val = v;
                    pivot_row = r;
                }
            }
            if pivot_val < 1e-12 {
                return None;
            }
            if pivot_row != k {
                for c in 0..n {
                    lu.swap(k * n + c, pivot_row * n + c);
                }
                perm.swap(k, pivot_row);
            }
            let pivot = lu[k * n + k];
            for r in (k + 1)..n {
                let factor = lu[r * n + k] / pivot;
                lu[r * n + k] = factor;
                if factor != 0.0 {
                    for c in (k + 1)..n {
                        lu[r * n + c] -= factor * lu[k * n + c];
                    }
                }
            }
        }
        Some(LuFactors { n, lu, perm })
    }

    /// Solve `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        let mut x = vec![0.0; n];
        for r in 0..n {
            x[r] = b[self.perm[r]];
        }
        // Forward: L y = Pb.
        for r in 1..n {
            let mut sum = x[r];
            for c in 0..r {
                sum -= self.lu[r * n + c] * x[c];
            }
            x[r] = sum;
        }
        // Backward: U x = y.
        for r in (0..n).rev() {
            let mut sum = x[r];
            for c in (r + 1)..n {
                sum -= self.lu[r * n + c] * x[c];
            }
            x[r] = sum / self.lu[r * n + r];
        }
        b.copy_from_slice(&x);
    }

    /// Solve `A^T x = b` in place.
    pub fn solve_transpose(&self, b: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        // A^T = (P^T L U)^T = U^T L^T P, so solve U^T y = b, then
        // L^T z = y, then x = P^T z.
        let mut y = b.to_vec();
        for r in 0..n {
            let mut sum = y[r];
            for c in 0..r {
                sum -= self.lu[c * n + r] * y[c];
            }
            y[r] = sum / self.lu[r * n + r];
        }
        for r in (0..n).rev() {
            let mut sum = y[r];
            for c in (r + 1)..n {
                sum -= self.lu[c * n + r] * y[c];
            }
            y[r] = sum;
        }
        for r in 0..n {
            b[self.perm[r]] = y[r];
        }
    }
}
