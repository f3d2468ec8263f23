//! Small dense linear algebra: LU with partial pivoting, one-sided Jacobi
//! SVD, inverse iteration for the smallest singular value, and null vectors
//! of wide matrices through Householder QR.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).fold(T::zero(), |acc, (&a, &b)| acc + a * b))
            .collect()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Bordered square matrix `[[self, col], [row, corner]]`.
    pub fn bordered(&self, col: &[T], row: &[T], corner: T) -> Self {
        assert_eq!(col.len(), self.rows);
        assert_eq!(row.len(), self.cols);
        let (r, c) = (self.rows + 1, self.cols + 1);
        let mut out = Self::zeros(r, c);
        for i in 0..self.rows {
            out.data[i * c..i * c + self.cols].copy_from_slice(self.row(i));
            out[(i, self.cols)] = col[i];
        }
        out.data[self.rows * c..self.rows * c + self.cols].copy_from_slice(row);
        out[(self.rows, self.cols)] = corner;
        out
    }

    /// Appends `col` as an extra column.
    pub fn with_column(&self, col: &[T]) -> Self {
        assert_eq!(col.len(), self.rows);
        let c = self.cols + 1;
        let mut out = Self::zeros(self.rows, c);
        for i in 0..self.rows {
            out.data[i * c..i * c + self.cols].copy_from_slice(self.row(i));
            out[(i, self.cols)] = col[i];
        }
        out
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorization `P A = L U` with partial pivoting.
#[derive(Clone, Debug)]
pub struct Lu<T> {
    n: usize,
    lu: Vec<T>,
    perm: Vec<usize>,
    swaps: usize,
}

impl<T: Real> Lu<T> {
    /// Factorizes a square matrix. A pivot below
    /// `rel_tol · n · max|A_ij|` is reported as [`Error::SingularJacobian`].
    pub fn factor(a: &Matrix<T>, rel_tol: T) -> Result<Self> {
        assert_eq!(a.rows, a.cols, "LU needs a square matrix");
        let n = a.rows;
        let scale = a.max_abs();
        let threshold = rel_tol * T::from_index(n.max(1)) * scale;
        let mut lu = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0;
        for k in 0..n {
            let (p, pivot_abs) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pivot_abs > threshold) || scale.is_zero() {
                return Err(Error::SingularJacobian { pivot: pivot_abs.to_f64_lossy() });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                swaps += 1;
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let f = lu[i * n + k] / pivot;
                lu[i * n + k] = f;
                if f.is_zero() {
                    continue;
                }
                for j in k + 1..n {
                    let v = lu[k * n + j];
                    lu[i * n + j] = lu[i * n + j] - f * v;
                }
            }
        }
        Ok(Self { n, lu, perm, swaps })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc = acc - self.lu[i * n + j] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc = acc - self.lu[i * n + j] * x[j];
            }
            x[i] = acc / self.lu[i * n + i];
        }
        x
    }

    /// Solves `Aᵀ x = b`.
    pub fn solve_transpose(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        assert_eq!(b.len(), n);
        // Aᵀ = Uᵀ Lᵀ P, so solve Uᵀ y = b, Lᵀ z = y, x = Pᵀ z.
        let mut y = b.to_vec();
        for i in 0..n {
            let mut acc = y[i];
            for j in 0..i {
                acc = acc - self.lu[j * n + i] * y[j];
            }
            y[i] = acc / self.lu[i * n + i];
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            for j in i + 1..n {
                acc = acc - self.lu[j * n + i] * y[j];
            }
            y[i] = acc;
        }
        let mut x = vec![T::zero(); n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }

    /// Sign of the determinant: `+1` or `-1`.
    pub fn det_sign(&self) -> i8 {
        let mut neg = self.swaps % 2 == 1;
        for i in 0..self.n {
            if self.lu[i * self.n + i] < T::zero() {
                neg = !neg;
            }
        }
        if neg {
            -1
        } else {
            1
        }
    }

    /// Smallest singular value of the factored matrix by inverse iteration on
    /// `(AᵀA)^{-1}`. The estimate approaches the true value from above.
    pub fn min_singular_value(&self) -> T {
        let n = self.n;
        // deterministic start vector with no special alignment
        let mut v: Vec<T> = (0..n)
            .map(|i| T::one() + T::lit(0.5) * (T::lit(0.7) * T::from_index(i + 1)).sin())
            .collect();
        normalize(&mut v);
        let mut estimate = T::infinity();
        for _ in 0..200 {
            let w = self.solve_transpose(&v);
            let mut z = self.solve(&w);
            let growth = norm2(&z);
            if !growth.is_finite() || growth.is_zero() {
                return T::zero();
            }
            let next = T::one() / growth.sqrt();
            for zi in z.iter_mut() {
                *zi = *zi / growth;
            }
            v = z;
            let converged = (estimate - next).abs() <= T::lit(1e-12) * next;
            estimate = next;
            if converged {
                break;
            }
        }
        estimate
    }
}

pub fn norm2<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
}

pub fn norm_inf<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

fn normalize<T: Real>(v: &mut [T]) {
    let n = norm2(v);
    if n > T::zero() {
        for x in v.iter_mut() {
            *x = *x / n;
        }
    }
}

/// Singular values (descending) by one-sided Jacobi rotations.
pub fn singular_values<T: Real>(a: &Matrix<T>) -> Vec<T> {
    // work on columns of A (or Aᵀ when wide)
    let work = if a.rows >= a.cols { a.clone() } else { a.transpose() };
    let (m, n) = (work.rows, work.cols);
    let mut cols: Vec<Vec<T>> = (0..n).map(|j| (0..m).map(|i| work[(i, j)]).collect()).collect();
    let tol = T::epsilon() * T::from_index(m);
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = cols[p].iter().zip(&cols[q]).fold(
                    (T::zero(), T::zero(), T::zero()),
                    |(a, b, g), (&x, &y)| (a + x * x, b + y * y, g + x * y),
                );
                if gamma.is_zero() || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma + gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                for (x, y) in left[p].iter_mut().zip(right[0].iter_mut()) {
                    let (xp, yq) = (*x, *y);
                    *x = c * xp - s * yq;
                    *y = s * xp + c * yq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<T> = cols.iter().map(|c| norm2(c)).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

/// Unit null vector of a full-row-rank `n × (n+1)` matrix.
///
/// Householder QR of `Aᵀ`; the last column of `Q` spans the kernel. When the
/// smallest `|R_ii|` relative to the largest falls below `rel_tol` the matrix
/// is reported rank deficient.
pub fn null_vector<T: Real>(a: &Matrix<T>, rel_tol: T) -> Result<Vec<T>> {
    assert_eq!(a.cols, a.rows + 1, "null_vector expects an n x (n+1) matrix");
    let mut r = a.transpose(); // (n+1) x n
    let (m, n) = (r.rows, r.cols);
    let mut reflectors: Vec<Vec<T>> = Vec::with_capacity(n);
    let mut diag = Vec::with_capacity(n);
    for k in 0..n {
        let x: Vec<T> = (k..m).map(|i| r[(i, k)]).collect();
        let alpha = norm2(&x);
        let alpha = if x[0] > T::zero() { -alpha } else { alpha };
        let mut v = x;
        v[0] = v[0] - alpha;
        let vn = norm2(&v);
        if vn > T::zero() {
            for vi in v.iter_mut() {
                *vi = *vi / vn;
            }
            for j in k..n {
                let dot = (k..m).fold(T::zero(), |acc, i| acc + v[i - k] * r[(i, j)]);
                for i in k..m {
                    r[(i, j)] = r[(i, j)] - (dot + dot) * v[i - k];
                }
            }
        }
        diag.push(r[(k, k)].abs());
        reflectors.push(v);
    }
    let largest = diag.iter().fold(T::zero(), |a, &b| a.max(b));
    let smallest = diag.iter().fold(T::infinity(), |a, &b| a.min(b));
    let ratio = if largest.is_zero() { T::zero() } else { smallest / largest };
    if !(ratio > rel_tol) {
        return Err(Error::RankDeficient { ratio: ratio.to_f64_lossy() });
    }
    // Q e_{m-1} = H_0 H_1 ... H_{n-1} e_{m-1}
    let mut q = vec![T::zero(); m];
    q[m - 1] = T::one();
    for (k, v) in reflectors.iter().enumerate().rev() {
        let dot = (k..m).fold(T::zero(), |acc, i| acc + v[i - k] * q[i]);
        for i in k..m {
            q[i] = q[i] - (dot + dot) * v[i - k];
        }
    }
    Ok(q)
}
