//! GF(2) kernel view of linear rules.
//!
//! For rule 90/150 the feature block of lane `r` at step `i` is `B·a0 mod 2`
//! with `B = M^i P_r`. The integer matrix `M_K = Σ BᵀB` and its eigenvalues
//! `s` give three cheap quadratic forms per input pair; a no-intercept least
//! squares fit on those forms estimates the feature-space distance or dot
//! product without expanding the automaton.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::automata::characteristic_matrix;
use crate::bitcore::{BitVector, Gf2Matrix};
use crate::error::{check_dim, param, Error, Result};
use crate::linalg::{cholesky_with_jitter, pearson, symmetric_eigenvalues, Cholesky, Matrix};
use crate::reservoir::{expand_feedforward, ReservoirConfig};

const JACOBI_TOL: f64 = 1e-10;
const JACOBI_SWEEPS: usize = 100;
const FIT_JITTER: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricMode {
    /// Squared feature distance (Hamming count between features).
    Distance,
    /// Feature dot product (popcount of the AND of features).
    Dot,
}

impl std::str::FromStr for MetricMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "distance" => Ok(MetricMode::Distance),
            "dot" => Ok(MetricMode::Dot),
            _ => Err(param("mode", format!("{s:?} is neither \"distance\" nor \"dot\""))),
        }
    }
}

/// `M_K`, its eigenvalues, and (once fitted) the three regression coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelModel {
    pub n: usize,
    mk: Vec<u64>,
    pub s: Vec<f64>,
    pub coeffs: Option<[f64; 3]>,
    pub mode: MetricMode,
}

/// Fit diagnostics for [`KernelModel::fit`].
#[derive(Clone, Debug, PartialEq)]
pub struct MetricFit {
    pub coeffs: [f64; 3],
    pub train_correlation: Option<f64>,
    /// The 3x3 design needed extra jitter or has near-collinear columns.
    pub collinear: bool,
}

/// Integer `M_K = Σ_{r, i=1..I} (M^i P_r)ᵀ (M^i P_r)`.
pub fn build_mk(cfg: &ReservoirConfig) -> Result<Vec<u64>> {
    let rule = cfg.rule.linear_rule().ok_or(Error::UnsupportedRule {
        rule: match cfg.rule {
            crate::automata::RuleSpec::Elementary { rule, .. } => rule as u16,
            crate::automata::RuleSpec::GameOfLife { .. } => u16::MAX,
        },
        context: "kernel matrix M_K",
    })?;
    let n = cfg.cells();
    let m = characteristic_matrix(rule, n)?;
    // G = Σ_i (M^i)ᵀ M^i, shared by every lane
    let mut g = vec![0u64; n * n];
    let mut power = m.clone();
    for step in 1..=cfg.i {
        if step > 1 {
            power = power.matmul(&m)?;
        }
        let cols = power.transpose();
        for a in 0..n {
            for b in 0..=a {
                let v = cols.row(a).dot(cols.row(b))? as u64;
                g[a * n + b] += v;
                if a != b {
                    g[b * n + a] += v;
                }
            }
        }
    }
    // (Pᵀ G P)[x][y] = G[p⁻¹(x)][p⁻¹(y)]
    let mut mk = vec![0u64; n * n];
    for p in cfg.permutations() {
        let inv = p.inverse();
        for x in 0..n {
            let gx = &g[inv.get(x) * n..inv.get(x) * n + n];
            let row = &mut mk[x * n..x * n + n];
            for (y, cell) in row.iter_mut().enumerate() {
                *cell += gx[inv.get(y)];
            }
        }
    }
    Ok(mk)
}

/// Reference `M_K` from explicitly materialized blocks `B = M^i P_r`.
pub fn build_mk_brute_force(cfg: &ReservoirConfig) -> Result<Vec<u64>> {
    let rule = cfg
        .rule
        .linear_rule()
        .ok_or(Error::UnsupportedRule { rule: 0, context: "kernel matrix M_K" })?;
    let n = cfg.cells();
    let m = characteristic_matrix(rule, n)?;
    let mut mk = vec![0u64; n * n];
    for p in cfg.permutations() {
        let pm = Gf2Matrix::from_permutation(p);
        for i in 1..=cfg.i {
            let b = m.pow(i as u64)?.matmul(&pm)?;
            for x in 0..n {
                for y in 0..n {
                    mk[x * n + y] += (0..n).filter(|&k| b.get(k, x) && b.get(k, y)).count() as u64;
                }
            }
        }
    }
    Ok(mk)
}

fn eigen_diagonal(mk: &[u64], n: usize) -> Result<Vec<f64>> {
    let m = Matrix::from_vec(n, n, mk.iter().map(|&v| v as f64).collect())?;
    let mut s = symmetric_eigenvalues(&m, JACOBI_TOL, JACOBI_SWEEPS)?;
    for v in s.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(s)
}

impl KernelModel {
    /// Builds `M_K` and `s` for a linear-rule configuration.
    pub fn build(cfg: &ReservoirConfig, mode: MetricMode) -> Result<Self> {
        let mk = build_mk(cfg)?;
        let n = cfg.cells();
        let s = eigen_diagonal(&mk, n)?;
        Ok(Self {
            n,
            mk,
            s,
            coeffs: None,
            mode,
        })
    }

    /// Model from explicit parts; `s` is taken as given.
    pub fn from_parts(n: usize, mk: Vec<u64>, s: Vec<f64>, coeffs: Option<[f64; 3]>, mode: MetricMode) -> Result<Self> {
        check_dim("M_K entries", n * n, mk.len())?;
        check_dim("eigen diagonal", n, s.len())?;
        for x in 0..n {
            for y in 0..x {
                if mk[x * n + y] != mk[y * n + x] {
                    return Err(param("M_K", "matrix must be symmetric"));
                }
            }
        }
        Ok(Self { n, mk, s, coeffs, mode })
    }

    /// Model with `M_K = I` and `s = 1`.
    pub fn identity(n: usize, coeffs: Option<[f64; 3]>, mode: MetricMode) -> Self {
        let mut mk = vec![0u64; n * n];
        for i in 0..n {
            mk[i * n + i] = 1;
        }
        Self {
            n,
            mk,
            s: vec![1.0; n],
            coeffs,
            mode,
        }
    }

    #[inline]
    pub fn mk(&self, x: usize, y: usize) -> u64 {
        self.mk[x * self.n + y]
    }

    pub fn mk_matrix(&self) -> Matrix {
        Matrix::from_vec(self.n, self.n, self.mk.iter().map(|&v| v as f64).collect()).expect("square")
    }

    pub fn mk_trace(&self) -> u64 {
        (0..self.n).map(|i| self.mk(i, i)).sum()
    }

    fn quad(&self, a: &BitVector, b: &BitVector) -> f64 {
        let bi: Vec<usize> = b.ones_iter().collect();
        let mut acc = 0u64;
        for x in a.ones_iter() {
            let row = &self.mk[x * self.n..(x + 1) * self.n];
            acc += bi.iter().map(|&y| row[y]).sum::<u64>();
        }
        acc as f64
    }

    fn diag_sum(&self, v: &BitVector) -> f64 {
        v.ones_iter().map(|i| self.s[i]).sum()
    }

    /// `(dᵀd, dᵀ M_K d, Σ s_i d_i)` with `d = a0 XOR b0`.
    pub fn distance_features(&self, a0: &BitVector, b0: &BitVector) -> Result<[f64; 3]> {
        check_dim("distance_features", self.n, a0.len())?;
        let d = a0.xor(b0)?;
        Ok([d.count_ones() as f64, self.quad(&d, &d), self.diag_sum(&d)])
    }

    /// `(aᵀb, (a .* s)ᵀ b, aᵀ M_K b)`.
    pub fn dot_features(&self, a0: &BitVector, b0: &BitVector) -> Result<[f64; 3]> {
        check_dim("dot_features", self.n, a0.len())?;
        let both = a0.and(b0)?;
        Ok([both.count_ones() as f64, self.diag_sum(&both), self.quad(a0, b0)])
    }

    pub fn features(&self, a0: &BitVector, b0: &BitVector) -> Result<[f64; 3]> {
        match self.mode {
            MetricMode::Distance => self.distance_features(a0, b0),
            MetricMode::Dot => self.dot_features(a0, b0),
        }
    }

    /// No-intercept least squares of `targets` on the three pair features.
    pub fn fit(&mut self, pairs: &[(BitVector, BitVector)], targets: &[f64]) -> Result<MetricFit> {
        check_dim("fit_metric targets", pairs.len(), targets.len())?;
        if pairs.len() < 3 {
            return Err(param("pairs", "at least three pairs are needed for three coefficients"));
        }
        let rows = pairs
            .iter()
            .map(|(a, b)| self.features(a, b))
            .collect::<Result<Vec<_>>>()?;
        let mut ftf = Matrix::zeros(3, 3);
        let mut fty = Matrix::zeros(3, 1);
        for (f, &t) in rows.iter().zip(targets) {
            for p in 0..3 {
                fty[(p, 0)] += f[p] * t;
                for q in 0..3 {
                    ftf[(p, q)] += f[p] * f[q];
                }
            }
        }
        // scale-aware jitter keeps the 3x3 solve well posed under collinearity
        let scale = ftf.trace().max(1.0) / 3.0;
        let (chol, jitter) = cholesky_with_jitter(&ftf, FIT_JITTER * scale, 30)?;
        let k = chol.solve_matrix(&fty)?;
        let coeffs = [k[(0, 0)], k[(1, 0)], k[(2, 0)]];
        let cols: Vec<Vec<f64>> = (0..3).map(|p| rows.iter().map(|f| f[p]).collect()).collect();
        let collinear = jitter > FIT_JITTER * scale
            || (0..3).any(|p| {
                (p + 1..3).any(|q| pearson(&cols[p], &cols[q]).is_some_and(|c| c.abs() > 1.0 - 1e-9))
            });
        if collinear {
            log::warn!("metric regression design is collinear; coefficients are not unique");
        }
        self.coeffs = Some(coeffs);
        let predicted: Vec<f64> = rows.iter().map(|f| combine(&coeffs, f)).collect();
        Ok(MetricFit {
            coeffs,
            train_correlation: pearson(&predicted, targets),
            collinear,
        })
    }

    fn fitted(&self) -> Result<[f64; 3]> {
        self.coeffs
            .ok_or_else(|| Error::State("kernel model has no fitted coefficients".into()))
    }

    /// Estimated metric for a pair (either mode).
    pub fn estimate(&self, a0: &BitVector, b0: &BitVector) -> Result<f64> {
        let k = self.fitted()?;
        Ok(combine(&k, &self.features(a0, b0)?))
    }

    /// `k1·f1 + k2·f2 + k3·f3` on dot features.
    pub fn kernel_value(&self, x: &BitVector, y: &BitVector) -> Result<f64> {
        if self.mode != MetricMode::Dot {
            return Err(Error::State("kernel_value needs a dot-mode model".into()));
        }
        let k = self.fitted()?;
        Ok(combine(&k, &self.dot_features(x, y)?))
    }

    /// `M_K v` for a 0/1 vector.
    fn mk_times(&self, v: &BitVector) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for y in v.ones_iter() {
            for (x, o) in out.iter_mut().enumerate() {
                // M_K symmetric: column y equals row y
                *o += self.mk[y * self.n + x] as f64;
            }
        }
        out
    }

    /// Per-point linear forms `w = k1·x + k2·(s .* x) + k3·M_K x`, so that
    /// `kernel_value(x, y) = Σ_{j ∈ y} w_j`.
    fn linear_forms(&self, data: &[BitVector]) -> Result<Vec<Vec<f64>>> {
        let k = self.fitted()?;
        data.iter()
            .map(|x| {
                check_dim("kernel data", self.n, x.len())?;
                let mut w: Vec<f64> = self.mk_times(x).iter().map(|v| k[2] * v).collect();
                for j in x.ones_iter() {
                    w[j] += k[0] + k[1] * self.s[j];
                }
                Ok(w)
            })
            .collect()
    }

    pub fn kernel_matrix(&self, data: &[BitVector]) -> Result<Matrix> {
        if self.mode != MetricMode::Dot {
            return Err(Error::State("kernel_matrix needs a dot-mode model".into()));
        }
        let forms = self.linear_forms(data)?;
        let m = data.len();
        let mut k = Matrix::zeros(m, m);
        for i in 0..m {
            for j in 0..=i {
                let v: f64 = data[j].ones_iter().map(|c| forms[i][c]).sum();
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        Ok(k)
    }

    /// `K[t][i] = kernel_value(test_t, train_i)`.
    pub fn cross_kernel(&self, test: &[BitVector], train: &[BitVector]) -> Result<Matrix> {
        if self.mode != MetricMode::Dot {
            return Err(Error::State("cross_kernel needs a dot-mode model".into()));
        }
        let forms = self.linear_forms(train)?;
        let mut k = Matrix::zeros(test.len(), train.len());
        for (t, x) in test.iter().enumerate() {
            check_dim("kernel data", self.n, x.len())?;
            for (i, f) in forms.iter().enumerate() {
                k[(t, i)] = x.ones_iter().map(|c| f[c]).sum();
            }
        }
        Ok(k)
    }

    /// Folds supports, weights and labels into one length-`N` vector so that a
    /// prediction costs one pass over the query's set bits.
    pub fn precompute_q(&self, supports: &[BitVector], alpha: &[f64], y: &[f64]) -> Result<PrecomputedReadout> {
        check_dim("precompute_q alpha", supports.len(), alpha.len())?;
        check_dim("precompute_q labels", supports.len(), y.len())?;
        let forms = self.linear_forms(supports)?;
        let mut q = vec![0.0; self.n];
        for ((f, a), l) in forms.iter().zip(alpha).zip(y) {
            for (qj, fj) in q.iter_mut().zip(f) {
                *qj += a * l * fj;
            }
        }
        Ok(PrecomputedReadout { q })
    }

    /// Versioned binary blob: `"CAKM"`, version, mode, coefficient flag, `N`,
    /// `M_K` as u64, `s` and coefficients as f64, all little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"CAKM");
        out.extend_from_slice(&1u32.to_le_bytes());
        out.push(match self.mode {
            MetricMode::Distance => 0,
            MetricMode::Dot => 1,
        });
        out.push(self.coeffs.is_some() as u8);
        out.extend_from_slice(&[0, 0]);
        out.extend_from_slice(&(self.n as u64).to_le_bytes());
        for v in &self.mk {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in &self.s {
            out.extend_from_slice(&v.to_le_bytes());
        }
        if let Some(k) = self.coeffs {
            for v in k {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != b"CAKM" {
            return Err(Error::Format("kernel model blob has a bad magic".into()));
        }
        let version = u32::from_le_bytes(cur.take(4)?.try_into().expect("4 bytes"));
        if version != 1 {
            return Err(Error::Format(format!("unsupported kernel model version {version}")));
        }
        let head = cur.take(4)?;
        let mode = match head[0] {
            0 => MetricMode::Distance,
            1 => MetricMode::Dot,
            m => return Err(Error::Format(format!("unknown metric mode tag {m}"))),
        };
        let has_coeffs = head[1] == 1;
        let n = cur.u64()? as usize;
        let mk = (0..n * n).map(|_| cur.u64()).collect::<Result<Vec<_>>>()?;
        let s = (0..n).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
        let coeffs = if has_coeffs {
            Some([cur.f64()?, cur.f64()?, cur.f64()?])
        } else {
            None
        };
        if cur.pos != bytes.len() {
            return Err(Error::Format("trailing bytes after kernel model".into()));
        }
        Self::from_parts(n, mk, s, coeffs, mode)
    }

    /// Writes a kernel matrix as headerless CSV rows.
    pub fn write_matrix_csv<W: Write>(k: &Matrix, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        for i in 0..k.rows() {
            w.write_record(k.row(i).iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let s = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| Error::Format("truncated kernel model blob".into()))?;
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

#[inline]
fn combine(k: &[f64; 3], f: &[f64; 3]) -> f64 {
    k[0] * f[0] + k[1] * f[1] + k[2] * f[2]
}

/// Linear-time predictor `Σ_j x_j Q_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecomputedReadout {
    pub q: Vec<f64>,
}

impl PrecomputedReadout {
    pub fn predict(&self, x: &BitVector) -> Result<f64> {
        check_dim("precomputed readout", self.q.len(), x.len())?;
        Ok(x.ones_iter().map(|j| self.q[j]).sum())
    }
}

/// Exact feature-space metric by full expansion (raw input excluded).
pub fn true_feature_metric(a0: &BitVector, b0: &BitVector, cfg: &ReservoirConfig, mode: MetricMode) -> Result<f64> {
    let cfg = cfg.clone().with_raw_input(false);
    let fa = expand_feedforward(a0, &cfg)?.bits;
    let fb = expand_feedforward(b0, &cfg)?.bits;
    Ok(match mode {
        MetricMode::Distance => fa.hamming(&fb)?,
        MetricMode::Dot => fa.dot(&fb)?,
    } as f64)
}

/// Output of a one-vs-rest kernel ridge run.
#[derive(Clone, Debug, PartialEq)]
pub struct Classification {
    pub labels: Vec<usize>,
    pub jitter: f64,
}

/// One-vs-rest kernel ridge on precomputed kernels. `k_test` is `test x train`.
/// The ridge is relative to the mean kernel diagonal; extra jitter escalates
/// by ten from 1e-8 until the system factors. Ties go to the lower class.
pub fn kernel_ridge_classify(k_train: &Matrix, labels: &[usize], k_test: &Matrix, ridge: f64) -> Result<Classification> {
    let m = labels.len();
    check_dim("kernel rows", m, k_train.rows())?;
    check_dim("kernel cols", m, k_test.cols())?;
    let classes = labels.iter().max().map_or(0, |&c| c + 1);
    let distinct = {
        let mut seen = vec![false; classes];
        labels.iter().for_each(|&l| seen[l] = true);
        seen.iter().filter(|&&b| b).count()
    };
    if distinct < 2 {
        return Err(param("labels", "kernel classification needs at least two classes"));
    }
    let scale = (k_train.trace() / m as f64).abs().max(f64::MIN_POSITIVE);
    let mut sys = k_train.clone();
    sys.add_diagonal(ridge * scale);
    let (chol, jitter) = match Cholesky::factor(&sys) {
        Ok(c) => (c, 0.0),
        Err(_) => {
            let (c, j) = cholesky_with_jitter(&sys, 1e-8 * scale, 40)?;
            log::warn!("kernel matrix needed jitter {j:e} on top of the ridge");
            (c, j)
        }
    };
    let mut targets = Matrix::zeros(m, classes);
    for (i, &l) in labels.iter().enumerate() {
        for c in 0..classes {
            targets[(i, c)] = if c == l { 1.0 } else { -1.0 };
        }
    }
    let alpha = chol.solve_matrix(&targets)?;
    let scores = k_test.matmul(&alpha)?;
    let labels = (0..scores.rows())
        .map(|t| {
            let row = scores.row(t);
            let mut best = 0;
            for c in 1..classes {
                if row[c] > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect();
    Ok(Classification { labels, jitter })
}

/// Kernel ridge classification with the model's kernel.
pub fn kernel_classify(
    train: &[(BitVector, usize)],
    test: &[BitVector],
    model: &KernelModel,
    ridge: f64,
) -> Result<Classification> {
    let xs: Vec<BitVector> = train.iter().map(|(x, _)| x.clone()).collect();
    let labels: Vec<usize> = train.iter().map(|(_, l)| *l).collect();
    let k = model.kernel_matrix(&xs)?;
    let kt = model.cross_kernel(test, &xs)?;
    kernel_ridge_classify(&k, &labels, &kt, ridge)
}

/// Fraction of equal entries.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    predicted.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::RuleSpec;
    use crate::bitcore::{Permutation, SeededRng};

    fn cfg(rule: u8, n: usize, r: usize, i: usize, seed: u64) -> ReservoirConfig {
        ReservoirConfig::new(RuleSpec::elementary(rule, n).unwrap(), r, i, seed).unwrap()
    }

    fn dense_quad(model: &KernelModel, a: &BitVector, b: &BitVector) -> f64 {
        let mut acc = 0.0;
        for x in 0..model.n {
            for y in 0..model.n {
                acc += (a.get(x) as u64 * model.mk(x, y) * b.get(y) as u64) as f64;
            }
        }
        acc
    }

    #[test]
    fn single_block_hand_case() {
        let c = cfg(90, 4, 1, 1, 0).with_permutations(vec![Permutation::identity(4)]).unwrap();
        let mk = build_mk(&c).unwrap();
        // M_N rows 0101,1010,0101,1010: columns 0 and 2 coincide
        let expected = [2, 0, 2, 0, 0, 2, 0, 2, 2, 0, 2, 0, 0, 2, 0, 2];
        assert_eq!(mk, expected);
    }

    #[test]
    fn fast_mk_matches_brute_force() {
        for (rule, n, r, i, seed) in [(90, 8, 2, 3, 1), (150, 11, 3, 4, 2), (90, 16, 4, 4, 3), (150, 16, 4, 2, 4)] {
            let c = cfg(rule, n, r, i, seed);
            assert_eq!(build_mk(&c).unwrap(), build_mk_brute_force(&c).unwrap(), "rule {rule} n {n}");
        }
    }

    #[test]
    fn trace_and_eigen_sum() {
        let c = cfg(90, 24, 3, 5, 7);
        let model = KernelModel::build(&c, MetricMode::Distance).unwrap();
        let m = characteristic_matrix(90, 24).unwrap();
        let ones: usize = (1..=5).map(|i| m.pow(i).unwrap().count_ones()).sum::<usize>() * 3;
        assert_eq!(model.mk_trace() as usize, ones);
        let s: f64 = model.s.iter().sum();
        assert!((s - model.mk_trace() as f64).abs() < 1e-8, "{s}");
        assert!(model.s.windows(2).all(|w| w[0] >= w[1]) && model.s.iter().all(|&v| v >= 0.0));
        assert!(model.mk_matrix().is_symmetric(0.0));
    }

    #[test]
    fn nonlinear_rule_rejected() {
        let c = cfg(30, 8, 1, 1, 0);
        assert!(matches!(build_mk(&c), Err(Error::UnsupportedRule { .. })));
    }

    #[test]
    fn feature_forms() {
        let mut rng = SeededRng::new(3);
        let model = KernelModel::build(&cfg(90, 8, 2, 3, 5), MetricMode::Distance).unwrap();
        for _ in 0..50 {
            let a = BitVector::random_uniform(8, &mut rng);
            let b = BitVector::random_uniform(8, &mut rng);
            let e = model.distance_features(&a, &b).unwrap();
            let d = a.xor(&b).unwrap();
            assert_eq!(e[1], dense_quad(&model, &d, &d));
            assert_eq!(e, model.distance_features(&b, &a).unwrap());
            let f = model.dot_features(&a, &b).unwrap();
            assert_eq!(f[2], dense_quad(&model, &a, &b));
            assert!(e.iter().all(|&v| v >= 0.0));
        }
        let a = BitVector::random_uniform(8, &mut rng);
        assert_eq!(model.distance_features(&a, &a).unwrap(), [0.0; 3]);
        assert_eq!(model.dot_features(&a, &BitVector::zeros(8)).unwrap(), [0.0; 3]);
        let id = KernelModel::identity(8, None, MetricMode::Dot);
        let b = BitVector::random_uniform(8, &mut rng);
        let e = id.distance_features(&a, &b).unwrap();
        assert_eq!(e[0], a.hamming(&b).unwrap() as f64);
        assert_eq!(e[1], e[0]);
        let f = id.dot_features(&a, &b).unwrap();
        assert_eq!(f[1], f[0]);
    }

    #[test]
    fn true_metric_against_explicit_features() {
        let c = cfg(90, 16, 4, 4, 9);
        let mut rng = SeededRng::new(4);
        let a = BitVector::random_uniform(16, &mut rng);
        let b = BitVector::random_uniform(16, &mut rng);
        // independent expansion: lane by lane, step by step
        let feat = |x: &BitVector| -> Vec<bool> {
            let mut out = Vec::new();
            for p in c.permutations() {
                let mut s = p.apply(x).unwrap();
                for _ in 0..4 {
                    s = c.rule.step(&s).unwrap();
                    out.extend(s.iter());
                }
            }
            out
        };
        let (fa, fb) = (feat(&a), feat(&b));
        let dist = fa.iter().zip(&fb).filter(|(u, v)| u != v).count() as f64;
        let dotp = fa.iter().zip(&fb).filter(|(u, v)| **u && **v).count() as f64;
        assert_eq!(true_feature_metric(&a, &b, &c, MetricMode::Distance).unwrap(), dist);
        assert_eq!(true_feature_metric(&a, &b, &c, MetricMode::Dot).unwrap(), dotp);
        assert_eq!(true_feature_metric(&a, &a, &c, MetricMode::Distance).unwrap(), 0.0);
        let z = BitVector::zeros(16);
        assert_eq!(true_feature_metric(&z, &z, &c, MetricMode::Dot).unwrap(), 0.0);
    }

    #[test]
    fn regression_recovers_synthetic_target() {
        let mut model = KernelModel::build(&cfg(90, 32, 4, 3, 1), MetricMode::Distance).unwrap();
        let mut rng = SeededRng::new(6);
        let pairs: Vec<(BitVector, BitVector)> = (0..200)
            .map(|_| {
                (
                    BitVector::random(32, 0.2, &mut rng).unwrap(),
                    BitVector::random(32, 0.2, &mut rng).unwrap(),
                )
            })
            .collect();
        let targets: Vec<f64> = pairs.iter().map(|(a, b)| a.hamming(b).unwrap() as f64).collect();
        let fit = model.fit(&pairs, &targets).unwrap();
        assert!(fit.train_correlation.unwrap() >= 0.999);
        assert!((fit.coeffs[0] - 1.0).abs() < 1e-3, "{:?}", fit.coeffs);
    }

    #[test]
    fn kernel_value_and_matrix() {
        let mut rng = SeededRng::new(8);
        let mut model = KernelModel::build(&cfg(150, 20, 3, 3, 2), MetricMode::Dot).unwrap();
        let data: Vec<BitVector> = (0..12).map(|_| BitVector::random(20, 0.3, &mut rng).unwrap()).collect();
        assert!(model.kernel_value(&data[0], &data[1]).is_err());
        model.coeffs = Some([0.7, -0.01, 0.02]);
        let k = model.kernel_matrix(&data).unwrap();
        assert!(k.is_symmetric(1e-12));
        for i in 0..12 {
            for j in 0..12 {
                let f = model.dot_features(&data[i], &data[j]).unwrap();
                let direct = 0.7 * f[0] - 0.01 * f[1] + 0.02 * f[2];
                assert!((k[(i, j)] - direct).abs() < 1e-9);
                assert!((model.kernel_value(&data[i], &data[j]).unwrap() - model.kernel_value(&data[j], &data[i]).unwrap()).abs() < 1e-12);
            }
        }
        model.coeffs = Some([1.0, 0.0, 0.0]);
        let k = model.kernel_matrix(&data).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                assert_eq!(k[(i, j)], data[i].dot(&data[j]).unwrap() as f64);
            }
        }
        let single = model.kernel_matrix(&data[..1]).unwrap();
        assert_eq!(single[(0, 0)], model.kernel_value(&data[0], &data[0]).unwrap());
    }

    #[test]
    fn summation_trick_is_exact() {
        let mut rng = SeededRng::new(10);
        let mut model = KernelModel::build(&cfg(90, 64, 4, 4, 3), MetricMode::Dot).unwrap();
        model.coeffs = Some([0.9, 0.003, -0.0004]);
        let supports: Vec<BitVector> = (0..50).map(|_| BitVector::random(64, 0.2, &mut rng).unwrap()).collect();
        let alpha: Vec<f64> = (0..50).map(|_| rng.normal()).collect();
        let y: Vec<f64> = (0..50).map(|_| rng.sign()).collect();
        let q = model.precompute_q(&supports, &alpha, &y).unwrap();
        for _ in 0..100 {
            let x = BitVector::random(64, 0.2, &mut rng).unwrap();
            let explicit: f64 = (0..50)
                .map(|i| alpha[i] * y[i] * model.kernel_value(&x, &supports[i]).unwrap())
                .sum();
            assert!((q.predict(&x).unwrap() - explicit).abs() < 1e-9);
        }
        let one = KernelModel::identity(5, Some([1.0, 0.0, 0.0]), MetricMode::Dot);
        let sup: BitVector = "10110".parse().unwrap();
        let q = one.precompute_q(std::slice::from_ref(&sup), &[1.0], &[1.0]).unwrap();
        assert_eq!(q.q, sup.to_f64());
    }

    #[test]
    fn blob_roundtrip() {
        let mut model = KernelModel::build(&cfg(90, 10, 2, 2, 3), MetricMode::Dot).unwrap();
        let plain = KernelModel::from_bytes(&model.to_bytes()).unwrap();
        assert_eq!(plain, model);
        model.coeffs = Some([1.5, 2.5, -3.0]);
        let blob = model.to_bytes();
        assert_eq!(&blob[..4], b"CAKM");
        assert_eq!(KernelModel::from_bytes(&blob).unwrap(), model);
        assert!(KernelModel::from_bytes(&blob[..blob.len() - 1]).is_err());
    }

    #[test]
    fn classifier_on_separable_clusters() {
        let mut rng = SeededRng::new(12);
        let n = 64;
        let proto = [BitVector::random_uniform(n, &mut rng), BitVector::random_uniform(n, &mut rng)];
        let noisy = |p: &BitVector, rng: &mut SeededRng| {
            let mut v = p.clone();
            for _ in 0..3 {
                v.flip(rng.below(n as u64) as usize);
            }
            v
        };
        let train: Vec<(BitVector, usize)> = (0..40).map(|i| (noisy(&proto[i % 2], &mut rng), i % 2)).collect();
        let test: Vec<BitVector> = (0..20).map(|i| noisy(&proto[i % 2], &mut rng)).collect();
        let truth: Vec<usize> = (0..20).map(|i| i % 2).collect();
        let model = KernelModel::identity(n, Some([1.0, 0.0, 0.0]), MetricMode::Dot);
        let out = kernel_classify(&train, &test, &model, 1e-3).unwrap();
        assert_eq!(accuracy(&out.labels, &truth), 1.0);
        let own = kernel_classify(&train, &[train[5].0.clone()], &model, 1e-3).unwrap();
        assert_eq!(own.labels, vec![train[5].1]);
        let single: Vec<(BitVector, usize)> = train.iter().map(|(x, _)| (x.clone(), 0)).collect();
        assert!(kernel_classify(&single, &test, &model, 1e-3).is_err());
    }

    #[test]
    fn matrix_csv() {
        let k = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 2.0]]).unwrap();
        let mut buf = Vec::new();
        KernelModel::write_matrix_csv(&k, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "1,0.5\n0.5,2\n");
    }
}
