//! Small dense real linear algebra: Cholesky solves, symmetric eigenvalues,
//! Pearson correlation. Summation order is fixed so results are reproducible.

use crate::error::{check_dim, param, Error, Result};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
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
        check_dim("Matrix::from_vec", rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_dim("Matrix::from_rows", cols, r.len())?;
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
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

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        check_dim("matmul", self.cols, other.rows)?;
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a != 0.0 {
                    axpy(a, other.row(k), orow);
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim("matvec", self.cols, v.len())?;
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    pub fn add_diagonal(&mut self, value: f64) {
        let n = self.rows.min(self.cols);
        for i in 0..n {
            self.data[i * self.cols + i] += value;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Dot product with four independent accumulators.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut tail = 0.0;
    for k in 4 * chunks..n {
        tail += a[k] * b[k];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Fails with a state error when a pivot is not positive.
    pub fn factor(a: &Matrix) -> Result<Self> {
        check_dim("cholesky (square)", a.rows, a.cols)?;
        let n = a.rows;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let (li, lj) = if i == j {
                    let r = &l[i * n..i * n + j];
                    (r, r)
                } else {
                    let (lo, hi) = l.split_at(i * n);
                    (&hi[..j], &lo[j * n..j * n + j])
                };
                let s = a.data[i * n + j] - dot(li, lj);
                if i == j {
                    if s.is_nan() || s <= 0.0 || !s.is_finite() {
                        return Err(Error::State(format!("matrix is not positive definite (pivot {i} = {s:e})")));
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<()> {
        check_dim("cholesky solve", self.n, b.len())?;
        let n = self.n;
        for i in 0..n {
            let s = b[i] - dot(&self.l[i * n..i * n + i], &b[..i]);
            b[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for (k, bk) in b.iter().enumerate().skip(i + 1) {
                s -= self.l[k * n + i] * bk;
            }
            b[i] = s / self.l[i * n + i];
        }
        Ok(())
    }

    /// Solves `A X = B` for every column of `B`.
    pub fn solve_matrix(&self, b: &Matrix) -> Result<Matrix> {
        check_dim("cholesky solve", self.n, b.rows)?;
        let bt = b.transpose();
        let mut out = bt.clone();
        for c in 0..bt.rows {
            self.solve_in_place(out.row_mut(c))?;
        }
        Ok(out.transpose())
    }
}

/// Solves `(A + shift*I) X = B` with the given factor of `A + shift*I`,
/// followed by `steps` rounds of iterative refinement against `A`.
pub fn refined_solve(a: &Matrix, shift: f64, chol: &Cholesky, b: &Matrix, steps: usize) -> Result<Matrix> {
    check_dim("refined solve", a.rows, b.rows)?;
    let n = a.rows;
    let bt = b.transpose();
    let mut xt = bt.clone();
    for c in 0..bt.rows {
        let x = xt.row_mut(c);
        chol.solve_in_place(x)?;
        for _ in 0..steps {
            let mut r: Vec<f64> = (0..n)
                .map(|i| bt.data[c * n + i] - dot(a.row(i), x) - shift * x[i])
                .collect();
            chol.solve_in_place(&mut r)?;
            for (xi, ri) in x.iter_mut().zip(&r) {
                *xi += ri;
            }
        }
    }
    Ok(xt.transpose())
}

/// Factors `A + jitter*I`, multiplying the jitter by ten until it succeeds.
/// Returns the factor and the jitter that worked.
pub fn cholesky_with_jitter(a: &Matrix, start: f64, max_tries: usize) -> Result<(Cholesky, f64)> {
    let mut jitter = start;
    for attempt in 0..max_tries {
        let mut m = a.clone();
        m.add_diagonal(jitter);
        match Cholesky::factor(&m) {
            Ok(c) => {
                if attempt > 0 {
                    log::warn!("cholesky needed diagonal jitter {jitter:e} after {attempt} escalations");
                }
                return Ok((c, jitter));
            }
            Err(_) => jitter *= 10.0,
        }
    }
    Err(Error::State(format!(
        "matrix could not be made positive definite with jitter up to {:e}",
        jitter / 10.0
    )))
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted descending.
///
/// Stops when the off-diagonal Frobenius norm falls below `tol` times the
/// matrix Frobenius norm, or after `max_sweeps` sweeps.
pub fn symmetric_eigenvalues(a: &Matrix, tol: f64, max_sweeps: usize) -> Result<Vec<f64>> {
    check_dim("jacobi (square)", a.rows, a.cols)?;
    if !a.is_symmetric(1e-9 * a.frobenius().max(1.0)) {
        return Err(param("matrix", "Jacobi eigenvalues need a symmetric matrix"));
    }
    let n = a.rows;
    let mut m = a.data.clone();
    let scale = a.frobenius();
    let off = |m: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[i * n + j] * m[i * n + j];
                }
            }
        }
        s.sqrt()
    };
    let target = tol * scale;
    for _ in 0..max_sweeps {
        if off(&m) <= target {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // rows p and q
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                // columns p and q
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
            }
        }
    }
    let final_off = off(&m);
    if final_off > target {
        log::warn!("jacobi stopped after {max_sweeps} sweeps with off-diagonal norm {final_off:e}");
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    Ok(ev)
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}
