use crate::error::{check_dim, Result};

use super::bitvec::BitVector;
use super::permutation::Permutation;
use super::rng::SeededRng;

/// Dense binary matrix over GF(2), stored as packed rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gf2Matrix {
    rows: usize,
    cols: usize,
    data: Vec<BitVector>,
}

impl Gf2Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![BitVector::zeros(cols); rows],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn random(rows: usize, cols: usize, rng: &mut SeededRng) -> Self {
        Self {
            rows,
            cols,
            data: (0..rows).map(|_| BitVector::random_uniform(cols, rng)).collect(),
        }
    }

    pub fn from_rows(rows: Vec<BitVector>) -> Result<Self> {
        let cols = rows.first().map_or(0, BitVector::len);
        for r in &rows {
            check_dim("Gf2Matrix::from_rows", cols, r.len())?;
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows,
        })
    }

    /// Matrix `P` with `P·v == p.apply(v)`: row `i` has its single 1 at column `p[i]`.
    pub fn from_permutation(p: &Permutation) -> Self {
        let n = p.len();
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, p.get(i), true);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &BitVector {
        &self.data[i]
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i].get(j)
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.data[i].set(j, v);
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().map(BitVector::count_ones).sum()
    }

    /// `out[i] = XOR_j (M[i,j] AND v[j])`.
    pub fn matvec(&self, v: &BitVector) -> Result<BitVector> {
        check_dim("gf2 matvec", self.cols, v.len())?;
        let mut out = BitVector::zeros(self.rows);
        for (i, r) in self.data.iter().enumerate() {
            if r.dot_gf2(v)? {
                out.set(i, true);
            }
        }
        Ok(out)
    }

    pub fn matmul(&self, other: &Gf2Matrix) -> Result<Gf2Matrix> {
        check_dim("gf2 matmul", self.cols, other.rows)?;
        let mut out = Gf2Matrix::zeros(self.rows, other.cols);
        for (i, r) in self.data.iter().enumerate() {
            let acc = &mut out.data[i];
            for j in r.ones_iter() {
                acc.xor_assign(&other.data[j])?;
            }
        }
        Ok(out)
    }

    /// `M^k` by square-and-multiply; `k = 0` gives the identity.
    pub fn pow(&self, mut k: u64) -> Result<Gf2Matrix> {
        check_dim("gf2 matpow (square)", self.rows, self.cols)?;
        let mut result = Gf2Matrix::identity(self.rows);
        let mut base = self.clone();
        while k > 0 {
            if k & 1 == 1 {
                result = result.matmul(&base)?;
            }
            k >>= 1;
            if k > 0 {
                base = base.matmul(&base)?;
            }
        }
        Ok(result)
    }

    pub fn transpose(&self) -> Gf2Matrix {
        let mut t = Gf2Matrix::zeros(self.cols, self.rows);
        for (i, r) in self.data.iter().enumerate() {
            for j in r.ones_iter() {
                t.data[j].set(i, true);
            }
        }
        t
    }
}
