//! Small dense linear algebra on row-major `f64` matrices.
//!
//! Sizes in this crate are tiny (a few dozen rows at most), so everything is
//! plain Gaussian elimination or Householder reflections without blocking.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Index, IndexMut};

use crate::math;

#[derive(Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row slices; panics if the rows are ragged.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self[(i, l)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(l, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "mul_vec shape mismatch");
        (0..self.rows).map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    }

    /// Largest entrywise difference; panics on shape mismatch.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()))
    }

    /// Stacks matrices with equal column counts on top of each other.
    pub fn vstack(blocks: &[&Matrix]) -> Matrix {
        let cols = blocks.first().map_or(0, |b| b.cols);
        let mut data = Vec::new();
        let mut rows = 0;
        for b in blocks {
            assert_eq!(b.cols, cols, "vstack column mismatch");
            data.extend_from_slice(&b.data);
            rows += b.rows;
        }
        Matrix { rows, cols, data }
    }

    /// Principal submatrix on the given index set.
    pub fn submatrix(&self, idx: &[usize]) -> Matrix {
        Matrix::from_fn(idx.len(), idx.len(), |i, j| self[(idx[i], idx[j])])
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries((0..self.rows).map(|i| self.row(i))).finish()
    }
}

/// Numerical rank by Gaussian elimination with full pivoting.
///
/// Pivots below `rel_tol * max|A|` count as zero. An all-zero matrix has
/// rank 0.
pub fn rank(a: &Matrix, rel_tol: f64) -> usize {
    let scale = a.max_abs();
    if scale == 0.0 {
        return 0;
    }
    let threshold = rel_tol * scale;
    let mut m = a.clone();
    let (rows, cols) = (m.rows, m.cols);
    let mut r = 0;
    let mut col_done = vec![false; cols];
    while r < rows {
        let mut best = (0.0, 0, 0);
        for i in r..rows {
            for j in (0..cols).filter(|&j| !col_done[j]) {
                let v = m[(i, j)].abs();
                if v > best.0 {
                    best = (v, i, j);
                }
            }
        }
        let (pivot_abs, pi, pj) = best;
        if pivot_abs <= threshold {
            break;
        }
        if pi != r {
            for j in 0..cols {
                let tmp = m[(r, j)];
                m[(r, j)] = m[(pi, j)];
                m[(pi, j)] = tmp;
            }
        }
        let pivot = m[(r, pj)];
        for i in r + 1..rows {
            let factor = m[(i, pj)] / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in 0..cols {
                m[(i, j)] -= factor * m[(r, j)];
            }
        }
        col_done[pj] = true;
        r += 1;
    }
    r
}

/// LU factorisation with partial pivoting, stored compactly.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
    sign: f64,
    singular: bool,
}

impl Lu {
    pub fn new(a: &Matrix) -> Lu {
        assert!(a.is_square(), "LU of a non-square matrix");
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut singular = false;
        for c in 0..n {
            let (mut best, mut p) = (lu[(c, c)].abs(), c);
            for i in c + 1..n {
                if lu[(i, c)].abs() > best {
                    best = lu[(i, c)].abs();
                    p = i;
                }
            }
            if best == 0.0 {
                singular = true;
                continue;
            }
            if p != c {
                for j in 0..n {
                    let tmp = lu[(c, j)];
                    lu[(c, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(c, p);
                sign = -sign;
            }
            let pivot = lu[(c, c)];
            for i in c + 1..n {
                let f = lu[(i, c)] / pivot;
                lu[(i, c)] = f;
                for j in c + 1..n {
                    lu[(i, j)] -= f * lu[(c, j)];
                }
            }
        }
        Lu { lu, perm, sign, singular }
    }

    pub fn det(&self) -> f64 {
        if self.singular {
            return 0.0;
        }
        (0..self.lu.rows).fold(self.sign, |d, i| d * self.lu[(i, i)])
    }

    /// Solves `A x = b`; `None` when an exact zero pivot was met.
    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        if self.singular {
            return None;
        }
        let n = self.lu.rows;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lu[(i, j)] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[(i, j)] * x[j];
            }
            x[i] /= self.lu[(i, i)];
        }
        Some(x)
    }
}

pub fn det(a: &Matrix) -> f64 {
    Lu::new(a).det()
}

pub fn solve(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    Lu::new(a).solve(b)
}

pub fn inverse(a: &Matrix) -> Option<Matrix> {
    let lu = Lu::new(a);
    let n = a.rows;
    let mut out = Matrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = lu.solve(&e)?;
        for i in 0..n {
            out[(i, j)] = col[i];
        }
    }
    Some(out)
}

/// Least-squares solution of an overdetermined system via Householder QR.
///
/// Returns `None` when `A` is column-rank deficient at `rel_tol`. On success
/// the second element is the ∞-norm of the residual `A x − b`.
pub fn lstsq(a: &Matrix, b: &[f64], rel_tol: f64) -> Option<(Vec<f64>, f64)> {
    let (m, n) = (a.rows, a.cols);
    assert_eq!(b.len(), m);
    if m < n {
        return None;
    }
    let scale = a.max_abs();
    let mut r = a.clone();
    let mut qtb = b.to_vec();
    for c in 0..n {
        let norm = math::sqrt((c..m).map(|i| r[(i, c)] * r[(i, c)]).sum());
        if norm <= rel_tol * scale || norm == 0.0 {
            return None;
        }
        let alpha = if r[(c, c)] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (c..m).map(|i| r[(i, c)]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in c..n {
            let dot: f64 = (c..m).map(|i| v[i - c] * r[(i, j)]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in c..m {
                r[(i, j)] -= f * v[i - c];
            }
        }
        let dot: f64 = (c..m).map(|i| v[i - c] * qtb[i]).sum();
        let f = 2.0 * dot / vnorm2;
        for i in c..m {
            qtb[i] -= f * v[i - c];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = qtb[i];
        for j in i + 1..n {
            s -= r[(i, j)] * x[j];
        }
        x[i] = s / r[(i, i)];
    }
    let res = a.mul_vec(&x).iter().zip(b).fold(0.0, |acc, (ax, bi)| f64::max(acc, (ax - bi).abs()));
    Some((x, res))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_simple_matrices() {
        assert_eq!(rank(&Matrix::zeros(3, 3), 1e-10), 0);
        assert_eq!(rank(&Matrix::identity(4), 1e-10), 4);
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![0.0, 0.0]]);
        assert_eq!(rank(&m, 1e-10), 1);
    }

    #[test]
    fn det_and_solve_agree() {
        let a = Matrix::from_rows(&[vec![4.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 2.0]]);
        assert!((det(&a) - 18.0).abs() < 1e-12);
        let x = solve(&a, &[1.0, 2.0, 3.0]).unwrap();
        let back = a.mul_vec(&x);
        for (u, v) in back.iter().zip([1.0, 2.0, 3.0]) {
            assert!((u - v).abs() < 1e-12);
        }
        let inv = inverse(&a).unwrap();
        assert!(a.matmul(&inv).max_abs_diff(&Matrix::identity(3)) < 1e-12);
    }

    #[test]
    fn singular_lu() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert_eq!(det(&a), 0.0);
        assert!(solve(&a, &[1.0, 1.0]).is_none());
    }

    #[test]
    fn lstsq_recovers_consistent_solution() {
        let a = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]);
        let (x, res) = lstsq(&a, &[2.0, -1.0, 1.0], 1e-12).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] + 1.0).abs() < 1e-12);
        assert!(res < 1e-12);
        let deficient = Matrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0]]);
        assert!(lstsq(&deficient, &[1.0, 2.0], 1e-12).is_none());
    }
}
