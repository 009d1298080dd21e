//! Sparse LU factorization with a factor-once / solve-many contract.
//!
//! The series recursion solves the same coefficient matrix at every order, so
//! the factorization is computed once and reused for each right-hand side.
//! Columns are factored left-looking (Gilbert–Peierls) with partial pivoting
//! in natural column order, which keeps the decomposition deterministic.
//!
//! Entries are either real scalars or `Complex<T>`; the PV-coupled recursion
//! uses the real doubled system, the PQ-only recursion the complex one.

use std::ops::Neg;
use std::sync::atomic::{AtomicUsize, Ordering};

use num_complex::Complex;
use num_traits::{NumAssign, Zero};
use thiserror::Error;

use crate::scalar::Scalar;

/// Matrix/vector element: real scalar or complex over one.
pub trait LinearEntry<T: Scalar>:
    Copy + PartialEq + NumAssign + Neg<Output = Self> + Send + Sync + 'static
{
    /// Modulus used for pivot selection and norms.
    fn magnitude(self) -> T;
}

impl<T: Scalar> LinearEntry<T> for T {
    fn magnitude(self) -> T {
        self.abs()
    }
}

impl<T: Scalar> LinearEntry<T> for Complex<T> {
    fn magnitude(self) -> T {
        self.norm()
    }
}

#[derive(Debug, Error)]
pub enum LinsolveError {
    /// No acceptable pivot in the given elimination column.
    #[error("matrix is numerically singular at pivot column {pivot}")]
    Singular { pivot: usize },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: system is {expected}, right-hand side is {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("triplet index ({row}, {col}) outside {rows}x{cols} matrix")]
    IndexOutOfBounds { row: usize, col: usize, rows: usize, cols: usize },
}

/// Column-compressed sparse matrix.
#[derive(Debug, Clone)]
pub struct SparseMatrix<E> {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<E>,
}

impl<E: Copy + PartialEq + NumAssign> SparseMatrix<E> {
    /// Build from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, E)],
    ) -> Result<Self, LinsolveError> {
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(LinsolveError::IndexOutOfBounds { row: r, col: c, rows: nrows, cols: ncols });
            }
        }
        let mut entries: Vec<(usize, usize, E)> = triplets.to_vec();
        entries.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));

        let mut col_ptr = vec![0usize; ncols + 1];
        let mut row_idx: Vec<usize> = Vec::with_capacity(entries.len());
        let mut values: Vec<E> = Vec::with_capacity(entries.len());
        let mut cur_col = 0usize;
        for &(r, c, v) in &entries {
            while cur_col < c {
                cur_col += 1;
                col_ptr[cur_col] = row_idx.len();
            }
            if row_idx.len() > col_ptr[cur_col] && *row_idx.last().unwrap() == r {
                *values.last_mut().unwrap() += v;
            } else {
                row_idx.push(r);
                values.push(v);
            }
        }
        while cur_col < ncols {
            cur_col += 1;
            col_ptr[cur_col] = row_idx.len();
        }
        Ok(Self { nrows, ncols, col_ptr, row_idx, values })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Entries of column `j` as (row, value) pairs, ascending row.
    pub fn col(&self, j: usize) -> impl Iterator<Item = (usize, E)> + '_ {
        let lo = self.col_ptr[j];
        let hi = self.col_ptr[j + 1];
        self.row_idx[lo..hi].iter().copied().zip(self.values[lo..hi].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> E
    where
        E: Zero,
    {
        self.col(j).find(|&(r, _)| r == i).map(|(_, v)| v).unwrap_or_else(E::zero)
    }

    /// `A * v`.
    pub fn matvec(&self, v: &[E]) -> Vec<E>
    where
        E: Zero,
    {
        assert_eq!(v.len(), self.ncols, "matvec dimension mismatch");
        let mut out = vec![E::zero(); self.nrows];
        for j in 0..self.ncols {
            let vj = v[j];
            if vj == E::zero() {
                continue;
            }
            for (r, a) in self.col(j) {
                let mut t = a;
                t *= vj;
                out[r] += t;
            }
        }
        out
    }
}

impl<E> SparseMatrix<E> {
    /// Maximum row sum of entry magnitudes.
    pub fn inf_norm<T: Scalar>(&self) -> T
    where
        E: LinearEntry<T>,
    {
        let mut rowsum = vec![T::zero(); self.nrows];
        for (&r, &v) in self.row_idx.iter().zip(self.values.iter()) {
            rowsum[r] = rowsum[r] + v.magnitude();
        }
        rowsum.into_iter().fold(T::zero(), T::max)
    }
}

/// Sparse LU decomposition `P A = L U` with partial pivoting.
///
/// Immutable once built; concurrent solves against one factorization are
/// fine. `solve_count` exposes the factor-reuse contract to tests.
#[derive(Debug)]
pub struct Factorization<E> {
    n: usize,
    l_colptr: Vec<usize>,
    l_rows: Vec<usize>, // original row ids, strictly below pivot, unit diagonal implicit
    l_vals: Vec<E>,
    u_colptr: Vec<usize>,
    u_rows: Vec<usize>, // pivot positions k < j
    u_vals: Vec<E>,
    u_diag: Vec<E>,
    perm: Vec<usize>, // perm[j] = original row pivotal for column j
    solves: AtomicUsize,
}

const UNPIVOTED: usize = usize::MAX;

/// Factor a square, structurally nonsingular sparse matrix.
///
/// Left-looking columns in natural order, partial pivoting by largest
/// modulus (ties to the lowest row index), so the result is deterministic
/// for a given input.
pub fn factor<T, E>(matrix: &SparseMatrix<E>) -> Result<Factorization<E>, LinsolveError>
where
    T: Scalar,
    E: LinearEntry<T> + Zero,
{
    if matrix.nrows != matrix.ncols {
        return Err(LinsolveError::NotSquare { rows: matrix.nrows, cols: matrix.ncols });
    }
    let n = matrix.nrows;

    let mut f = Factorization {
        n,
        l_colptr: vec![0usize; 1],
        l_rows: Vec::new(),
        l_vals: Vec::new(),
        u_colptr: vec![0usize; 1],
        u_rows: Vec::new(),
        u_vals: Vec::new(),
        u_diag: Vec::with_capacity(n),
        perm: Vec::with_capacity(n),
        solves: AtomicUsize::new(0),
    };

    let mut pinv = vec![UNPIVOTED; n];
    let mut x = vec![E::zero(); n];
    let mut visited = vec![false; n];
    let mut order: Vec<usize> = Vec::with_capacity(n);
    // explicit DFS stack of (node, next child index) to survive deep graphs
    let mut stack: Vec<(usize, usize)> = Vec::new();

    for j in 0..n {
        // symbolic: reach of A[:,j] through already-built columns of L
        order.clear();
        for (seed, _) in matrix.col(j) {
            if visited[seed] {
                continue;
            }
            stack.push((seed, 0));
            visited[seed] = true;
            while let Some(&mut (node, ref mut child)) = stack.last_mut() {
                let k = pinv[node];
                let next = if k == UNPIVOTED {
                    None
                } else {
                    let lo = f.l_colptr[k];
                    let hi = f.l_colptr[k + 1];
                    let mut found = None;
                    while lo + *child < hi {
                        let r = f.l_rows[lo + *child];
                        *child += 1;
                        if !visited[r] {
                            found = Some(r);
                            break;
                        }
                    }
                    found
                };
                match next {
                    Some(r) => {
                        visited[r] = true;
                        stack.push((r, 0));
                    }
                    None => {
                        stack.pop();
                        order.push(node);
                    }
                }
            }
        }

        // numeric: scatter A[:,j], then apply updates in topological order
        for (r, v) in matrix.col(j) {
            x[r] = v;
        }
        for &r in order.iter().rev() {
            let k = pinv[r];
            if k == UNPIVOTED {
                continue;
            }
            let xr = x[r];
            if xr == E::zero() {
                continue;
            }
            let lo = f.l_colptr[k];
            let hi = f.l_colptr[k + 1];
            for idx in lo..hi {
                let rr = f.l_rows[idx];
                let mut t = f.l_vals[idx];
                t *= xr;
                x[rr] -= t;
            }
        }

        // pivot: largest magnitude among not-yet-pivoted pattern rows
        let mut pivot_row = UNPIVOTED;
        let mut pivot_mag = T::zero();
        for &r in order.iter() {
            if pinv[r] == UNPIVOTED {
                let m = x[r].magnitude();
                if m > pivot_mag || (m == pivot_mag && pivot_mag > T::zero() && r < pivot_row) {
                    pivot_mag = m;
                    pivot_row = r;
                }
            }
        }
        if pivot_row == UNPIVOTED || pivot_mag <= T::zero() || !pivot_mag.is_finite() {
            return Err(LinsolveError::Singular { pivot: j });
        }
        let pivot_val = x[pivot_row];

        // gather U column (pivoted rows) and L column (remaining rows)
        for &r in order.iter() {
            let k = pinv[r];
            if k != UNPIVOTED {
                f.u_rows.push(k);
                f.u_vals.push(x[r]);
            } else if r != pivot_row {
                let mut lv = x[r];
                lv /= pivot_val;
                if lv != E::zero() {
                    f.l_rows.push(r);
                    f.l_vals.push(lv);
                }
            }
            x[r] = E::zero();
            visited[r] = false;
        }
        f.u_colptr.push(f.u_rows.len());
        f.l_colptr.push(f.l_rows.len());
        f.u_diag.push(pivot_val);
        f.perm.push(pivot_row);
        pinv[pivot_row] = j;
    }

    Ok(f)
}

impl<E> Factorization<E> {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Numeric factorizations backing this object (always exactly one).
    pub fn factor_count(&self) -> usize {
        1
    }

    /// Number of `solve` calls served so far.
    pub fn solve_count(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }

    /// Solve `A x = rhs`, reusing the stored decomposition.
    pub fn solve<T>(&self, rhs: &[E]) -> Result<Vec<E>, LinsolveError>
    where
        T: Scalar,
        E: LinearEntry<T> + Zero,
    {
        if rhs.len() != self.n {
            return Err(LinsolveError::DimensionMismatch { expected: self.n, got: rhs.len() });
        }
        self.solves.fetch_add(1, Ordering::Relaxed);

        // forward substitution in original-row space
        let mut work = rhs.to_vec();
        for j in 0..self.n {
            let xj = work[self.perm[j]];
            if xj == E::zero() {
                continue;
            }
            let lo = self.l_colptr[j];
            let hi = self.l_colptr[j + 1];
            for idx in lo..hi {
                let mut t = self.l_vals[idx];
                t *= xj;
                work[self.l_rows[idx]] -= t;
            }
        }
        // backward substitution in pivot space, column oriented
        let mut y: Vec<E> = (0..self.n).map(|j| work[self.perm[j]]).collect();
        let mut sol = vec![E::zero(); self.n];
        for j in (0..self.n).rev() {
            let mut xj = y[j];
            xj /= self.u_diag[j];
            sol[j] = xj;
            if xj == E::zero() {
                continue;
            }
            let lo = self.u_colptr[j];
            let hi = self.u_colptr[j + 1];
            for idx in lo..hi {
                let mut t = self.u_vals[idx];
                t *= xj;
                y[self.u_rows[idx]] -= t;
            }
        }
        Ok(sol)
    }
}

/// Dense Gaussian elimination with partial pivoting on a row-major `n x n`
/// system, used for the small Padé/Toeplitz solves. Returns `None` on a
/// zero or non-finite pivot.
pub fn dense_solve<T, E>(a: &mut [E], b: &mut [E]) -> Option<Vec<E>>
where
    T: Scalar,
    E: LinearEntry<T> + Zero,
{
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col * n + col].magnitude();
        for r in col + 1..n {
            let m = a[r * n + col].magnitude();
            if m > best {
                best = m;
                piv = r;
            }
        }
        if best <= T::zero() || !best.is_finite() {
            return None;
        }
        if piv != col {
            for c in 0..n {
                a.swap(col * n + c, piv * n + c);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let mut f = a[r * n + col];
            f /= d;
            if f == E::zero() {
                continue;
            }
            for c in col..n {
                let mut t = f;
                t *= a[col * n + c];
                a[r * n + c] -= t;
            }
            let mut t = f;
            t *= b[col];
            b[r] -= t;
        }
    }
    let mut x = vec![E::zero(); n];
    for r in (0..n).rev() {
        let mut acc = b[r];
        for c in r + 1..n {
            let mut t = a[r * n + c];
            t *= x[c];
            acc -= t;
        }
        let mut v = acc;
        v /= a[r * n + r];
        x[r] = v;
    }
    Some(x)
}
