//! Dense row-major `f64` matrices and the handful of factorizations the
//! summarizers need: Cholesky with a jitter ladder, PSD log-determinants,
//! Jacobi eigendecomposition and sample covariance.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default starting jitter for near-singular PSD factorizations.
pub const DEFAULT_JITTER: f64 = 1e-10;

/// Number of decades the jitter ladder climbs above the starting jitter.
const JITTER_DECADES: i32 = 6;

const SYMMETRY_RTOL: f64 = 1e-9;
const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows. Panics on ragged input, so
    /// keep it to literals and test fixtures.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn row_vector(values: &[f64]) -> Self {
        Self {
            rows: 1,
            cols: values.len(),
            data: values.to_vec(),
        }
    }

    pub fn column_vector(values: &[f64]) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Matrix {
        self.map(|v| v * s)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    /// Symmetric to within `1e-9` relative to the largest entry.
    pub fn is_symmetric(&self) -> bool {
        if !self.is_square() {
            return false;
        }
        let tol = SYMMETRY_RTOL * self.max_abs().max(1.0);
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if (self[(i, j)] - self[(j, i)]).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Elementwise sum; shapes must agree.
    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn hadamard(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, "hadamard", |a, b| a * b)
    }

    fn zip_with(&self, other: &Matrix, op: &str, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::shape(format!(
                "{op}: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// `self + s * I`. Square matrices only.
    pub fn add_diagonal(&self, s: f64) -> Matrix {
        let mut m = self.clone();
        for i in 0..self.rows.min(self.cols) {
            m[(i, i)] += s;
        }
        m
    }

    /// Principal submatrix on the given (row and column) indices.
    pub fn principal_minor(&self, idx: &[usize]) -> Matrix {
        let mut m = Matrix::zeros(idx.len(), idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                m[(a, b)] = self[(i, j)];
            }
        }
        m
    }

    /// `self * other^T`, the product used for `x W^T` style layers.
    pub fn matmul_t(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::shape(format!(
                "matmul_t: {:?} x {:?}^T",
                self.shape(),
                other.shape()
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..other.rows {
                let b = other.row(j);
                out.data[i * other.rows + j] = a.iter().zip(b).map(|(x, y)| x * y).sum();
            }
        }
        Ok(out)
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
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// Standard matrix product.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::shape(format!("matmul: {:?} x {:?}", a.shape(), b.shape())));
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let out_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for k in 0..a.cols {
            let aik = a.data[i * a.cols + k];
            if aik == 0.0 {
                continue;
            }
            let b_row = &b.data[k * b.cols..(k + 1) * b.cols];
            for (o, &bkj) in out_row.iter_mut().zip(b_row) {
                *o += aik * bkj;
            }
        }
    }
    Ok(out)
}

/// Lower-triangular Cholesky factor of `m + jitter_used * I`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    pub lower: Matrix,
    pub jitter_used: f64,
}

impl CholeskyFactor {
    pub fn log_det(&self) -> f64 {
        2.0 * self.lower.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Solves `(L L^T) x = b` for every column of `b`.
    pub fn solve(&self, b: &Matrix) -> Result<Matrix> {
        let n = self.lower.rows();
        if b.rows() != n {
            return Err(Error::shape(format!(
                "cholesky solve: factor is {n}x{n}, rhs has {} rows",
                b.rows()
            )));
        }
        let l = &self.lower;
        let mut x = b.clone();
        for c in 0..b.cols() {
            // forward: L y = b
            for i in 0..n {
                let mut s = x[(i, c)];
                for k in 0..i {
                    s -= l[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s / l[(i, i)];
            }
            // backward: L^T x = y
            for i in (0..n).rev() {
                let mut s = x[(i, c)];
                for k in (i + 1)..n {
                    s -= l[(k, i)] * x[(k, c)];
                }
                x[(i, c)] = s / l[(i, i)];
            }
        }
        Ok(x)
    }

    /// Inverse of the factored matrix, symmetrized.
    pub fn inverse(&self) -> Result<Matrix> {
        let n = self.lower.rows();
        let inv = self.solve(&Matrix::identity(n))?;
        Ok(symmetrize(&inv))
    }
}

/// Attempts a plain Cholesky factorization; `None` when a pivot is not
/// strictly positive and finite.
fn try_cholesky(m: &Matrix, shift: f64) -> Option<Matrix> {
    let n = m.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)] + shift;
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

fn check_square_symmetric(m: &Matrix, op: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::shape(format!("{op}: {:?} is not square", m.shape())));
    }
    if !m.is_symmetric() {
        return Err(Error::shape(format!("{op}: matrix is not symmetric")));
    }
    Ok(())
}

/// Cholesky factorization of a symmetric PSD matrix. Tries the jitter
/// ladder `0, jitter, 10 jitter, ..., 1e6 jitter` and keeps the first shift
/// that factors.
pub fn cholesky_psd(m: &Matrix, jitter: f64) -> Result<CholeskyFactor> {
    check_square_symmetric(m, "cholesky_psd")?;
    if jitter < 0.0 || !jitter.is_finite() {
        return Err(Error::contract(format!("jitter must be >= 0, got {jitter}")));
    }
    let mut ladder = vec![0.0];
    if jitter > 0.0 {
        ladder.extend((0..=JITTER_DECADES).map(|k| jitter * 10f64.powi(k)));
    }
    for &shift in &ladder {
        if let Some(lower) = try_cholesky(m, shift) {
            return Ok(CholeskyFactor {
                lower,
                jitter_used: shift,
            });
        }
    }
    Err(Error::NotPsd {
        max_jitter: *ladder.last().unwrap_or(&0.0),
    })
}

/// `ln det(m)` for a symmetric PSD matrix through its (jittered) Cholesky
/// factor.
pub fn logdet_psd(m: &Matrix, jitter: f64) -> Result<f64> {
    Ok(cholesky_psd(m, jitter)?.log_det())
}

/// Inverse of a symmetric PD matrix via Cholesky.
pub fn inverse_psd(m: &Matrix, jitter: f64) -> Result<Matrix> {
    cholesky_psd(m, jitter)?.inverse()
}

/// Determinant by LU with partial pivoting. Works for any square matrix.
pub fn det(m: &Matrix) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::shape(format!("det: {:?} is not square", m.shape())));
    }
    let n = m.rows();
    let mut a = m.clone();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[(i, col)].abs().total_cmp(&a[(j, col)].abs()))
            .unwrap_or(col);
        if a[(pivot, col)] == 0.0 {
            return Ok(0.0);
        }
        if pivot != col {
            for k in 0..n {
                let tmp = a[(col, k)];
                a[(col, k)] = a[(pivot, k)];
                a[(pivot, k)] = tmp;
            }
            det = -det;
        }
        let p = a[(col, col)];
        det *= p;
        for i in (col + 1)..n {
            let factor = a[(i, col)] / p;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[(i, k)] -= factor * a[(col, k)];
            }
        }
    }
    Ok(det)
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for i in 0..m.rows() {
        for j in (i + 1)..m.cols() {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Eigenvalues come back sorted descending; column `k` of the returned
/// matrix is the unit eigenvector for eigenvalue `k`.
pub fn sym_eig(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    check_square_symmetric(m, "sym_eig")?;
    let n = m.rows();
    let mut a = symmetrize(m);
    let mut v = Matrix::identity(n);
    let scale = a.frobenius_norm().max(1.0);

    let off_norm = |a: &Matrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)] * a[(i, j)];
                }
            }
        }
        s.sqrt()
    };

    let mut converged = off_norm(&a) < JACOBI_TOL * scale;
    let mut sweeps = 0;
    while !converged && sweeps < JACOBI_MAX_SWEEPS {
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        sweeps += 1;
        converged = off_norm(&a) < JACOBI_TOL * scale;
    }
    if !converged {
        return Err(Error::Numeric(format!(
            "Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, dst)] = v[(k, src)];
        }
    }
    Ok((values, vectors))
}

/// Rebuilds `V diag(f(lambda)) V^T` from an eigendecomposition.
pub fn eig_reconstruct(values: &[f64], vectors: &Matrix, f: impl Fn(f64) -> f64) -> Matrix {
    let n = values.len();
    let mut out = Matrix::zeros(n, n);
    for (k, &lambda) in values.iter().enumerate() {
        let w = f(lambda);
        if w == 0.0 {
            continue;
        }
        for i in 0..n {
            let vik = vectors[(i, k)] * w;
            for j in 0..n {
                out[(i, j)] += vik * vectors[(j, k)];
            }
        }
    }
    symmetrize(&out)
}

/// Squared diagonal of `R` in the Householder QR of `a^T`, i.e. the
/// Cholesky pivots of `a a^T` obtained without forming the product.
/// `ln det(a a^T)` is the sum of their logs; working on `a` directly keeps
/// the rounding error proportional to its condition number rather than
/// the square of it. Rows beyond the column count give zero pivots.
pub fn gram_pivots(a: &Matrix) -> Vec<f64> {
    let (k, m) = a.shape();
    // columns of a^T are the rows of a
    let mut b = a.transpose();
    let mut pivots = vec![0.0; k];
    for j in 0..k.min(m) {
        let norm = (j..m).map(|i| b[(i, j)] * b[(i, j)]).sum::<f64>().sqrt();
        pivots[j] = norm * norm;
        if norm == 0.0 {
            continue;
        }
        let alpha = if b[(j, j)] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (j..m).map(|i| b[(i, j)]).collect();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        if vv == 0.0 {
            continue;
        }
        for c in j..k {
            let dot: f64 = v.iter().enumerate().map(|(r, vr)| vr * b[(j + r, c)]).sum();
            let f = 2.0 * dot / vv;
            for (r, vr) in v.iter().enumerate() {
                b[(j + r, c)] -= f * vr;
            }
        }
    }
    pivots
}

/// Unbiased sample covariance of the rows of `x` (samples in rows).
pub fn covariance(x: &Matrix) -> Result<Matrix> {
    let n = x.rows();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "covariance needs at least 2 samples, got {n}"
        )));
    }
    let d = x.cols();
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut centered = x.clone();
    for i in 0..n {
        for (c, m) in centered.row_mut(i).iter_mut().zip(&mean) {
            *c -= m;
        }
    }
    let mut cov = Matrix::zeros(d, d);
    let denom = (n - 1) as f64;
    for a in 0..d {
        for b in a..d {
            let mut s = 0.0;
            for i in 0..n {
                s += centered[(i, a)] * centered[(i, b)];
            }
            cov[(a, b)] = s / denom;
            cov[(b, a)] = s / denom;
        }
    }
    Ok(cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
        symmetrize(&random_matrix(rng, n, n).scale(2.0))
    }

    fn gram(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
        let g = random_matrix(rng, n, n);
        matmul(&g.transpose(), &g).unwrap()
    }

    /// Determinant by Laplace expansion along the first row.
    fn cofactor_det(m: &Matrix) -> f64 {
        let n = m.rows();
        if n == 0 {
            return 1.0;
        }
        if n == 1 {
            return m[(0, 0)];
        }
        let mut total = 0.0;
        for j in 0..n {
            let keep: Vec<usize> = (0..n).filter(|&c| c != j).collect();
            let mut minor = Matrix::zeros(n - 1, n - 1);
            for i in 1..n {
                for (b, &c) in keep.iter().enumerate() {
                    minor[(i - 1, b)] = m[(i, c)];
                }
            }
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            total += sign * m[(0, j)] * cofactor_det(&minor);
        }
        total
    }

    #[test]
    fn matmul_identity_and_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_matrix(&mut rng, 3, 4);
        assert_eq!(matmul(&Matrix::identity(3), &a).unwrap(), a);
        let z = matmul(&a, &Matrix::zeros(4, 2)).unwrap();
        assert_eq!(z, Matrix::zeros(3, 2));
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_matrix(&mut rng, 4, 5);
        let b = random_matrix(&mut rng, 5, 3);
        let c = matmul(&a, &b).unwrap();
        for i in 0..4 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..5 {
                    s += a[(i, k)] * b[(k, j)];
                }
                assert!((c[(i, j)] - s).abs() < 1e-12);
            }
        }
        let ct = a.matmul_t(&b.transpose()).unwrap();
        assert!(ct.sub(&c).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn matmul_shape_error() {
        let err = matmul(&Matrix::zeros(2, 3), &Matrix::zeros(2, 3)).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn cholesky_identity_and_diagonal() {
        let f = cholesky_psd(&Matrix::identity(3), 0.0).unwrap();
        assert_eq!(f.lower, Matrix::identity(3));
        assert_eq!(f.jitter_used, 0.0);

        let f = cholesky_psd(&Matrix::diag(&[4.0, 9.0]), DEFAULT_JITTER).unwrap();
        assert_eq!(f.lower, Matrix::diag(&[2.0, 3.0]));
    }

    #[test]
    fn cholesky_reconstructs_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = gram(&mut rng, 6);
        let f = cholesky_psd(&m, DEFAULT_JITTER).unwrap();
        let back = matmul(&f.lower, &f.lower.transpose()).unwrap();
        let target = m.add_diagonal(f.jitter_used);
        assert!(back.sub(&target).unwrap().frobenius_norm() < 1e-10);
    }

    #[test]
    fn cholesky_climbs_jitter_ladder_for_singular() {
        // rank-1, so the second pivot is exactly zero without jitter
        let m = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]);
        let f = cholesky_psd(&m, 1e-10).unwrap();
        assert!(f.jitter_used > 0.0);
        assert!(matches!(cholesky_psd(&m, 0.0).unwrap_err(), Error::NotPsd { .. }));
        let neg = Matrix::diag(&[1.0, -1.0]);
        assert!(matches!(
            cholesky_psd(&neg, 1e-10).unwrap_err(),
            Error::NotPsd { .. }
        ));
    }

    #[test]
    fn cholesky_rejects_asymmetric() {
        let m = Matrix::from_rows(&[[1.0, 0.5], [0.0, 1.0]]);
        assert!(matches!(cholesky_psd(&m, 0.0).unwrap_err(), Error::Shape(_)));
    }

    #[test]
    fn logdet_fixtures() {
        assert_eq!(logdet_psd(&Matrix::identity(5), 0.0).unwrap(), 0.0);
        let v = logdet_psd(&Matrix::diag(&[2.0, 3.0]), 0.0).unwrap();
        assert!((v - 6f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn logdet_matches_cofactor_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let m = gram(&mut rng, 8).add_diagonal(0.1);
            let oracle = cofactor_det(&m);
            let v = logdet_psd(&m, 0.0).unwrap().exp();
            assert!(((v - oracle) / oracle).abs() < 1e-9, "{v} vs {oracle}");
            let lu = det(&m).unwrap();
            assert!(((lu - oracle) / oracle).abs() < 1e-9);
        }
    }

    #[test]
    fn logdet_equals_product_of_squared_pivots() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..10 {
            let m = gram(&mut rng, n).add_diagonal(0.5);
            let f = cholesky_psd(&m, 0.0).unwrap();
            let prod: f64 = f.lower.diagonal().iter().map(|d| d * d).product();
            let v = logdet_psd(&m, 0.0).unwrap().exp();
            assert!(((v - prod) / prod).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = gram(&mut rng, 5).add_diagonal(0.5);
        let inv = inverse_psd(&m, 0.0).unwrap();
        let eye = matmul(&m, &inv).unwrap();
        assert!(eye.sub(&Matrix::identity(5)).unwrap().max_abs() < 1e-9);
    }

    #[test]
    fn sym_eig_fixtures() {
        let (vals, vecs) = sym_eig(&Matrix::diag(&[5.0, 1.0])).unwrap();
        assert_eq!(vals, vec![5.0, 1.0]);
        assert_eq!(vecs.map(f64::abs), Matrix::identity(2));

        let (vals, _) = sym_eig(&Matrix::identity(4)).unwrap();
        assert!(vals.iter().all(|&v| v == 1.0));

        // ascending diagonal must come back sorted descending
        let (vals, vecs) = sym_eig(&Matrix::diag(&[1.0, 3.0, 2.0])).unwrap();
        assert_eq!(vals, vec![3.0, 2.0, 1.0]);
        assert_eq!(vecs[(1, 0)].abs(), 1.0);
    }

    #[test]
    fn sym_eig_rejects_asymmetric() {
        let m = Matrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]);
        assert!(matches!(sym_eig(&m).unwrap_err(), Error::Shape(_)));
    }

    #[test]
    fn sym_eig_reconstruction_and_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=16 {
            let m = random_symmetric(&mut rng, n);
            let (vals, vecs) = sym_eig(&m).unwrap();
            assert!(vals.windows(2).all(|w| w[0] >= w[1]));
            let back = eig_reconstruct(&vals, &vecs, |l| l);
            assert!(back.sub(&m).unwrap().frobenius_norm() < 1e-8, "n={n}");
            let vtv = matmul(&vecs.transpose(), &vecs).unwrap();
            assert!(vtv.sub(&Matrix::identity(n)).unwrap().frobenius_norm() < 1e-8);
        }
    }

    #[test]
    fn covariance_fixtures() {
        let same = Matrix::from_rows(&[[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]);
        assert_eq!(covariance(&same).unwrap(), Matrix::zeros(2, 2));

        let x = Matrix::from_rows(&[[0.0], [2.0]]);
        assert_eq!(covariance(&x).unwrap()[(0, 0)], 2.0);

        let one = Matrix::from_rows(&[[1.0, 2.0]]);
        assert!(matches!(
            covariance(&one).unwrap_err(),
            Error::InsufficientData(_)
        ));
    }

    #[test]
    fn covariance_matches_two_pass_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_matrix(&mut rng, 100, 4);
        let c = covariance(&x).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                let ma = (0..100).map(|i| x[(i, a)]).sum::<f64>() / 100.0;
                let mb = (0..100).map(|i| x[(i, b)]).sum::<f64>() / 100.0;
                let s: f64 = (0..100).map(|i| (x[(i, a)] - ma) * (x[(i, b)] - mb)).sum();
                assert!((c[(a, b)] - s / 99.0).abs() < 1e-12);
            }
        }
        assert_eq!(c, c.transpose());
        let (vals, _) = sym_eig(&c).unwrap();
        assert!(vals.iter().all(|&v| v >= -1e-10));
    }

    #[test]
    fn det_of_singular_is_zero() {
        let m = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]);
        assert_eq!(det(&m).unwrap(), 0.0);
        assert_eq!(det(&Matrix::zeros(0, 0)).unwrap(), 1.0);
    }
}
