//! Linear readout fitted by ridge-regularized least squares on 0/1 features.

use rayon::prelude::*;

use crate::bitcore::BitVector;
use crate::error::{check_dim, param, Error, Result};
use crate::linalg::{axpy, cholesky_with_jitter, dot, refined_solve, Matrix};

/// Default ridge term standing in for the exact pseudoinverse.
pub const DEFAULT_LAMBDA: f64 = 1e-8;

/// Which linear system a fit solved.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitPath {
    /// `A = (X Xᵀ + λI)⁻¹ Y`, `W = Xᵀ A`; chosen when features outnumber samples.
    Gram,
    /// `W = (Xᵀ X + λI)⁻¹ Xᵀ Y`.
    Normal,
}

#[derive(Clone, Debug)]
enum Weights {
    /// Feature-major `D x T`.
    Primal(Matrix),
    /// Support rows and dual coefficients `S x T`.
    Dual { supports: Vec<BitVector>, coef: Matrix },
}

/// A fitted linear map from features to targets.
#[derive(Clone, Debug)]
pub struct LinearReadout {
    weights: Weights,
    features: usize,
    targets: usize,
    /// Ridge term requested at fit time.
    pub lambda: f64,
    /// Diagonal term that was actually added (larger when the system needed repair).
    pub jitter_used: f64,
    pub path: FitPath,
}

/// Per-trial scoring outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrialResult {
    pub success: bool,
    pub bit_errors: usize,
    pub evaluated_bits: usize,
}

fn check_rows(x: &[BitVector], y: &Matrix) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::Empty("training features"));
    }
    check_dim("readout samples", x.len(), y.rows())?;
    let d = x[0].len();
    for row in x {
        check_dim("readout feature length", d, row.len())?;
    }
    Ok(d)
}

/// Exact integer Gram matrix `G[i][j] = popcount(x_i AND x_j)`.
pub fn gram_matrix(x: &[BitVector]) -> Matrix {
    let s = x.len();
    let lower: Vec<Vec<f64>> = (0..s)
        .into_par_iter()
        .map(|i| (0..=i).map(|j| x[i].dot(&x[j]).expect("equal lengths") as f64).collect())
        .collect();
    let mut g = Matrix::zeros(s, s);
    for (i, row) in lower.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// Columns of the 0/1 sample matrix as bit vectors of length `S`.
fn transpose_bits(x: &[BitVector], d: usize) -> Vec<BitVector> {
    let s = x.len();
    let mut cols = vec![BitVector::zeros(s); d];
    for (i, row) in x.iter().enumerate() {
        for j in row.ones_iter() {
            cols[j].set(i, true);
        }
    }
    cols
}

impl LinearReadout {
    /// Ridge fit choosing the Gram path when `D > S`.
    pub fn fit(x: &[BitVector], y: &Matrix, lambda: f64) -> Result<Self> {
        let d = check_rows(x, y)?;
        let path = if d > x.len() { FitPath::Gram } else { FitPath::Normal };
        Self::fit_with(x, y, lambda, path)
    }

    pub fn fit_with(x: &[BitVector], y: &Matrix, lambda: f64, path: FitPath) -> Result<Self> {
        let d = check_rows(x, y)?;
        if lambda.is_nan() || lambda < 0.0 || !lambda.is_finite() {
            return Err(param("lambda", format!("{lambda} must be a finite value >= 0")));
        }
        // a zero ridge still needs a positive pivot floor for singular systems
        let start = if lambda > 0.0 { lambda } else { 1e-12 };
        match path {
            FitPath::Gram => {
                let g = gram_matrix(x);
                let (chol, jitter) = cholesky_with_jitter(&g, start, 40)?;
                Self::note_jitter(lambda, jitter);
                let coef = refined_solve(&g, jitter, &chol, y, 2)?;
                Ok(Self {
                    weights: Weights::Dual {
                        supports: x.to_vec(),
                        coef,
                    },
                    features: d,
                    targets: y.cols(),
                    lambda,
                    jitter_used: jitter,
                    path,
                })
            }
            FitPath::Normal => {
                let cols = transpose_bits(x, d);
                let lower: Vec<Vec<f64>> = (0..d)
                    .into_par_iter()
                    .map(|i| (0..=i).map(|j| cols[i].dot(&cols[j]).expect("equal lengths") as f64).collect())
                    .collect();
                let mut xtx = Matrix::zeros(d, d);
                for (i, row) in lower.iter().enumerate() {
                    for (j, &v) in row.iter().enumerate() {
                        xtx[(i, j)] = v;
                        xtx[(j, i)] = v;
                    }
                }
                let mut xty = Matrix::zeros(d, y.cols());
                for (i, row) in x.iter().enumerate() {
                    for j in row.ones_iter() {
                        axpy(1.0, y.row(i), xty.row_mut(j));
                    }
                }
                let (chol, jitter) = cholesky_with_jitter(&xtx, start, 40)?;
                Self::note_jitter(lambda, jitter);
                let w = refined_solve(&xtx, jitter, &chol, &xty, 2)?;
                Ok(Self {
                    weights: Weights::Primal(w),
                    features: d,
                    targets: y.cols(),
                    lambda,
                    jitter_used: jitter,
                    path,
                })
            }
        }
    }

    fn note_jitter(lambda: f64, jitter: f64) {
        if jitter > lambda.max(1e-12) {
            log::warn!("readout system is rank deficient at lambda={lambda:e}; solved with {jitter:e}");
        }
    }

    /// Whether the fit needed more diagonal than requested.
    pub fn rank_deficient(&self) -> bool {
        self.jitter_used > self.lambda.max(1e-12)
    }

    pub fn feature_len(&self) -> usize {
        self.features
    }

    pub fn target_len(&self) -> usize {
        self.targets
    }

    /// Real-valued outputs `W x`.
    pub fn predict(&self, x: &BitVector) -> Result<Vec<f64>> {
        check_dim("readout predict", self.features, x.len())?;
        let mut out = vec![0.0; self.targets];
        match &self.weights {
            Weights::Primal(w) => {
                for j in x.ones_iter() {
                    axpy(1.0, w.row(j), &mut out);
                }
            }
            Weights::Dual { supports, coef } => {
                for (s, sup) in supports.iter().enumerate() {
                    let k = sup.dot(x)? as f64;
                    if k != 0.0 {
                        axpy(k, coef.row(s), &mut out);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Target bit `t` is 1 iff `(W x)[t] > 0.5`.
    pub fn predict_binary(&self, x: &BitVector) -> Result<BitVector> {
        let raw = self.predict(x)?;
        Ok(BitVector::from_bools(&raw.iter().map(|&v| v > 0.5).collect::<Vec<_>>()))
    }

    /// Makes target `to` use the weights of target `from`.
    pub fn copy_target(&mut self, from: usize, to: usize) {
        let m = match &mut self.weights {
            Weights::Primal(w) => w,
            Weights::Dual { coef, .. } => coef,
        };
        for r in 0..m.rows() {
            m[(r, to)] = m[(r, from)];
        }
    }

    /// Dense `T x D` weight matrix.
    pub fn weights(&self) -> Matrix {
        match &self.weights {
            Weights::Primal(w) => w.transpose(),
            Weights::Dual { supports, coef } => {
                let mut w = Matrix::zeros(self.targets, self.features);
                for (s, sup) in supports.iter().enumerate() {
                    for j in sup.ones_iter() {
                        for t in 0..self.targets {
                            w[(t, j)] += coef[(s, t)];
                        }
                    }
                }
                w
            }
        }
    }

    /// Sum of squared residuals on a data set.
    pub fn residual(&self, x: &[BitVector], y: &Matrix) -> Result<f64> {
        check_rows(x, y)?;
        let mut total = 0.0;
        for (i, row) in x.iter().enumerate() {
            let p = self.predict(row)?;
            let diff: Vec<f64> = p.iter().zip(y.row(i)).map(|(a, b)| a - b).collect();
            total += dot(&diff, &diff);
        }
        Ok(total)
    }

    /// `rows u64, cols u64` header then `T x D` little-endian f64 weights.
    pub fn to_bytes(&self) -> Vec<u8> {
        let w = self.weights();
        let mut out = Vec::with_capacity(16 + 8 * w.data().len());
        out.extend_from_slice(&(w.rows() as u64).to_le_bytes());
        out.extend_from_slice(&(w.cols() as u64).to_le_bytes());
        for v in w.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Reads the dense form written by [`to_bytes`](Self::to_bytes).
    pub fn weights_from_bytes(bytes: &[u8]) -> Result<Matrix> {
        if bytes.len() < 16 {
            return Err(Error::Format("readout header shorter than 16 bytes".into()));
        }
        let rows = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes")) as usize;
        let cols = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = &bytes[16..];
        check_dim("readout body", rows * cols * 8, body.len())?;
        let data = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Matrix::from_vec(rows, cols, data)
    }
}

/// A trial succeeds iff every evaluated bit matches. `mask` selects evaluated
/// target positions (all when absent).
pub fn score_task(predictions: &[BitVector], targets: &[BitVector], mask: Option<&BitVector>) -> Result<TrialResult> {
    if predictions.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    check_dim("score_task sequences", targets.len(), predictions.len())?;
    let mut bit_errors = 0;
    let mut evaluated_bits = 0;
    for (p, t) in predictions.iter().zip(targets) {
        let diff = p.xor(t)?;
        match mask {
            Some(m) => {
                bit_errors += diff.dot(m)?;
                evaluated_bits += m.count_ones();
            }
            None => {
                bit_errors += diff.count_ones();
                evaluated_bits += p.len();
            }
        }
    }
    if evaluated_bits == 0 {
        return Err(Error::Empty("evaluated target bits"));
    }
    Ok(TrialResult {
        success: bit_errors == 0,
        bit_errors,
        evaluated_bits,
    })
}
