//! Left-looking sparse LU with threshold partial pivoting.
//!
//! Columns are processed in a fill-reducing order `q`. For each column the
//! sparse triangular solve `x = L \ A(:, q[k])` only touches the rows
//! reachable in the graph of `L` (depth-first search), so the work is
//! proportional to the floating-point operations. Rows are pivoted
//! dynamically; the diagonal row is preferred when it is within
//! [`PIVOT_THRESHOLD`] of the largest candidate, which keeps the fill close
//! to what the ordering predicts while still handling the zero diagonal of
//! saddle-point blocks.

use alloc::vec;
use alloc::vec::Vec;

use super::ordering::minimum_degree;
use super::sparse::CsrMatrix;
use crate::{Error, Result};

pub const PIVOT_THRESHOLD: f64 = 1e-3;

/// Pivots below this fraction of the largest matrix entry count as zero.
pub const SINGULAR_RELATIVE: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct SparseLu {
    n: usize,
    // L: unit lower triangular, diagonal stored first in each column.
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    // U: upper triangular, diagonal stored last in each column.
    u_ptr: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    pinv: Vec<usize>,
    q: Vec<usize>,
    off_diagonal: usize,
}

impl SparseLu {
    pub fn factor(a: &CsrMatrix, q: &[usize]) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: a.ncols() });
        }
        if q.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: q.len() });
        }
        let cols = a.transpose();
        let tiny = SINGULAR_RELATIVE * a.max_abs();

        const NONE: usize = usize::MAX;
        let mut pinv = vec![NONE; n];
        let mut x = vec![0.0; n];
        let mut xi = vec![0usize; n];
        let mut stack = vec![0usize; n];
        let mut resume = vec![0usize; n];
        let mut mark = vec![NONE; n];
        let mut off_diagonal = 0;

        let mut l_ptr = Vec::with_capacity(n + 1);
        let mut u_ptr = Vec::with_capacity(n + 1);
        let est = 4 * a.nnz() + n;
        let mut l_idx = Vec::with_capacity(est);
        let mut l_val = Vec::with_capacity(est);
        let mut u_idx = Vec::with_capacity(est);
        let mut u_val = Vec::with_capacity(est);

        for k in 0..n {
            l_ptr.push(l_idx.len());
            u_ptr.push(u_idx.len());
            let col = q[k];
            let (b_idx, b_val) = cols.row(col);

            // Reach of A(:, col) in the graph of L, topologically ordered in xi[top..].
            let mut top = n;
            for &start in b_idx {
                if mark[start] == k {
                    continue;
                }
                let mut head = 0;
                stack[0] = start;
                while let Some(&j) = stack[..=head].last() {
                    let jcol = pinv[j];
                    if mark[j] != k {
                        mark[j] = k;
                        resume[head] = if jcol == NONE { 0 } else { l_ptr[jcol] + 1 };
                    }
                    let end = if jcol == NONE { 0 } else { l_ptr[jcol + 1] };
                    let mut pushed = false;
                    while resume[head] < end {
                        let i = l_idx[resume[head]];
                        resume[head] += 1;
                        if mark[i] != k {
                            head += 1;
                            stack[head] = i;
                            pushed = true;
                            break;
                        }
                    }
                    if !pushed {
                        top -= 1;
                        xi[top] = j;
                        if head == 0 {
                            break;
                        }
                        head -= 1;
                    }
                }
            }

            // Sparse triangular solve.
            for &i in &xi[top..] {
                x[i] = 0.0;
            }
            for (&i, &v) in b_idx.iter().zip(b_val) {
                x[i] = v;
            }
            for &j in &xi[top..] {
                let jcol = pinv[j];
                if jcol == NONE {
                    continue;
                }
                let xj = x[j];
                for p in (l_ptr[jcol] + 1)..l_ptr[jcol + 1] {
                    x[l_idx[p]] -= l_val[p] * xj;
                }
            }

            // Pivot choice.
            let mut ipiv = NONE;
            let mut amax = -1.0;
            for &i in &xi[top..] {
                if pinv[i] == NONE {
                    let t = x[i].abs();
                    if t > amax {
                        amax = t;
                        ipiv = i;
                    }
                } else {
                    u_idx.push(pinv[i]);
                    u_val.push(x[i]);
                }
            }
            if ipiv == NONE || !(amax > tiny) || !amax.is_finite() {
                return Err(Error::SingularMatrix { column: col });
            }
            if pinv[col] == NONE && x[col].abs() >= PIVOT_THRESHOLD * amax {
                ipiv = col;
            }
            if ipiv != col {
                off_diagonal += 1;
            }
            let pivot = x[ipiv];
            u_idx.push(k);
            u_val.push(pivot);
            pinv[ipiv] = k;
            l_idx.push(ipiv);
            l_val.push(1.0);
            for &i in &xi[top..] {
                if pinv[i] == NONE {
                    l_idx.push(i);
                    l_val.push(x[i] / pivot);
                }
                x[i] = 0.0;
            }
        }
        l_ptr.push(l_idx.len());
        u_ptr.push(u_idx.len());
        for i in &mut l_idx {
            *i = pinv[*i];
        }
        Ok(SparseLu { n, l_ptr, l_idx, l_val, u_ptr, u_idx, u_val, pinv, q: q.to_vec(), off_diagonal })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: b.len() });
        }
        let mut x = vec![0.0; self.n];
        for (k, &v) in b.iter().enumerate() {
            x[self.pinv[k]] = v;
        }
        for j in 0..self.n {
            let xj = x[j];
            for p in (self.l_ptr[j] + 1)..self.l_ptr[j + 1] {
                x[self.l_idx[p]] -= self.l_val[p] * xj;
            }
        }
        for j in (0..self.n).rev() {
            let last = self.u_ptr[j + 1] - 1;
            x[j] /= self.u_val[last];
            let xj = x[j];
            for p in self.u_ptr[j]..last {
                x[self.u_idx[p]] -= self.u_val[p] * xj;
            }
        }
        let mut out = vec![0.0; self.n];
        for (k, &qk) in self.q.iter().enumerate() {
            out[qk] = x[k];
        }
        Ok(out)
    }

    /// Columns whose pivot was taken off the diagonal.
    pub fn off_diagonal_pivots(&self) -> usize {
        self.off_diagonal
    }

    /// Stored entries of `L` and `U` together.
    pub fn fill(&self) -> usize {
        self.l_idx.len() + self.u_idx.len()
    }
}

/// LU solver that keeps the fill-reducing ordering while the sparsity
/// pattern stays the same, as it does across Newton iterations and steps.
#[derive(Debug, Default, Clone)]
pub struct LuSolver {
    cached: Option<(Vec<usize>, Vec<usize>, Vec<usize>)>,
}

impl LuSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn factor(&mut self, a: &CsrMatrix) -> Result<SparseLu> {
        let hit = matches!(&self.cached, Some((rp, ci, _)) if rp == a.row_ptr() && ci == a.col_idx());
        if !hit {
            let q = minimum_degree(a);
            self.cached = Some((a.row_ptr().to_vec(), a.col_idx().to_vec(), q));
        }
        let q = &self.cached.as_ref().expect("ordering cached").2;
        SparseLu::factor(a, q)
    }

    pub fn solve(&mut self, a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
        self.factor(a)?.solve(b)
    }
}

/// One-shot direct solve of `A x = b`.
pub fn sparse_factor_solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    LuSolver::new().solve(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
        let ax = a.mul_vec(x).unwrap();
        let r: f64 = ax.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        r / b.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Dense Gaussian elimination with partial pivoting.
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
            a.swap(k, p);
            b.swap(k, p);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
            x[k] = (b[k] - s) / a[k][k];
        }
        x
    }

    #[test]
    fn identity() {
        let a = CsrMatrix::identity(4);
        let b = [1.0, -2.0, 3.0, 0.5];
        assert_eq!(sparse_factor_solve(&a, &b).unwrap(), b.to_vec());
    }

    #[test]
    fn zero_diagonal_needs_pivoting() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        assert_eq!(sparse_factor_solve(&a, &[1.0, 2.0]).unwrap(), vec![2.0, 1.0]);
    }

    #[test]
    fn singular_is_reported() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]).unwrap();
        assert!(matches!(sparse_factor_solve(&a, &[1.0, 2.0]), Err(Error::SingularMatrix { .. })));
        let z = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0)]).unwrap();
        assert!(matches!(sparse_factor_solve(&z, &[1.0, 2.0]), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn random_spd_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..3 {
            let n = 200;
            // A = B Bᵀ + n I with sparse B
            let mut b_trip = Vec::new();
            for i in 0..n {
                for _ in 0..3 {
                    b_trip.push((i, rng.gen_range(0..n), rng.gen_range(-1.0..1.0)));
                }
            }
            let bm = CsrMatrix::from_triplets(n, n, &b_trip).unwrap();
            let bd = bm.to_dense();
            let mut t = Vec::new();
            for i in 0..n {
                t.push((i, i, n as f64 * 0.05));
                for j in 0..n {
                    let v: f64 = (0..n).map(|k| bd[i][k] * bd[j][k]).sum();
                    if v != 0.0 {
                        t.push((i, j, v));
                    }
                }
            }
            let a = CsrMatrix::from_triplets(n, n, &t).unwrap();
            let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = sparse_factor_solve(&a, &rhs).unwrap();
            let xd = dense_solve(a.to_dense(), rhs.clone());
            let diff: f64 = x.iter().zip(&xd).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            let nx: f64 = xd.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(diff / nx < 1e-10, "{}", diff / nx);
            assert!(residual(&a, &x, &rhs) < 1e-10);
        }
    }

    #[test]
    fn random_saddle_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (nu, np) = (60, 20);
        let n = nu + np;
        let mut t = Vec::new();
        for i in 0..nu {
            t.push((i, i, 4.0 + rng.gen_range(0.0..1.0)));
            if i + 1 < nu {
                let v = rng.gen_range(-1.0..1.0);
                t.push((i, i + 1, v));
                t.push((i + 1, i, v));
            }
        }
        for k in 0..np {
            for _ in 0..4 {
                let i = rng.gen_range(0..nu);
                let v = rng.gen_range(-1.0..1.0);
                t.push((nu + k, i, v));
                t.push((i, nu + k, v));
            }
            t.push((nu + k, 3 * k, 1.0));
            t.push((3 * k, nu + k, 1.0));
        }
        let a = CsrMatrix::from_triplets(n, n, &t).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = sparse_factor_solve(&a, &b).unwrap();
        assert!(residual(&a, &x, &b) < 1e-10);
        let xd = dense_solve(a.to_dense(), b);
        for (p, q) in x.iter().zip(&xd) {
            assert!((p - q).abs() < 1e-9 * (1.0 + q.abs()));
        }
    }

    #[test]
    fn ordering_is_reused() {
        let a = CsrMatrix::from_triplets(3, 3, &[(0, 0, 2.0), (1, 1, 3.0), (2, 2, 4.0), (0, 2, 1.0), (2, 0, 1.0)]).unwrap();
        let mut s = LuSolver::new();
        let x1 = s.solve(&a, &[1.0, 1.0, 1.0]).unwrap();
        let mut a2 = a.clone();
        a2.values_mut()[0] = 5.0;
        let x2 = s.solve(&a2, &[1.0, 1.0, 1.0]).unwrap();
        assert_ne!(x1, x2);
        assert!(residual(&a2, &x2, &[1.0, 1.0, 1.0]) < 1e-14);
    }
}
