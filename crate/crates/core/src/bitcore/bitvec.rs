//! Packed binary vectors.
//!
//! Bit `i` lives in word `i / 64` at position `i % 64` (logical-index
//! little-endian). Bits past `len` are always zero, so equality, hashing and
//! popcount work directly on the raw words.

use std::fmt;
use std::str::FromStr;

use crate::error::{check_dim, param, Error, Result};

use super::rng::SeededRng;

pub(crate) const WORD_BITS: usize = 64;

#[inline]
pub(crate) fn words_for(len: usize) -> usize {
    len.div_ceil(WORD_BITS)
}

/// Mask of the valid bits in the final word of a `len`-bit vector.
#[inline]
pub(crate) fn tail_mask(len: usize) -> u64 {
    match len % WORD_BITS {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

/// OR the first `src_len` bits of `src` into `dst` starting at bit `offset`.
/// Bits that would land past `dst_len` are dropped.
pub(crate) fn or_bits_at(dst: &mut [u64], dst_len: usize, offset: usize, src: &[u64], src_len: usize) {
    if src_len == 0 || offset >= dst_len {
        return;
    }
    let shift = offset % WORD_BITS;
    let base = offset / WORD_BITS;
    let n_src = words_for(src_len);
    for (k, &w) in src.iter().take(n_src).enumerate() {
        let w = if k + 1 == n_src { w & tail_mask(src_len) } else { w };
        let idx = base + k;
        if idx >= dst.len() {
            break;
        }
        dst[idx] |= w << shift;
        if shift != 0 && idx + 1 < dst.len() {
            dst[idx + 1] |= w >> (WORD_BITS - shift);
        }
    }
    let last = words_for(dst_len) - 1;
    dst[last] &= tail_mask(dst_len);
    for w in dst.iter_mut().skip(last + 1) {
        *w = 0;
    }
}

/// A fixed-length packed binary vector.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; words_for(len)],
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut v = Self {
            len,
            words: vec![u64::MAX; words_for(len)],
        };
        v.canonicalize();
        v
    }

    /// Builds a vector from raw words; bits beyond `len` are cleared.
    pub fn from_words(len: usize, mut words: Vec<u64>) -> Result<Self> {
        check_dim("BitVector::from_words", words_for(len), words.len())?;
        if let Some(last) = words.last_mut() {
            *last &= tail_mask(len);
        }
        Ok(Self { len, words })
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                v.words[i / WORD_BITS] |= 1 << (i % WORD_BITS);
            }
        }
        v
    }

    pub fn from_indices(len: usize, ones: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut v = Self::zeros(len);
        for i in ones {
            if i >= len {
                return Err(param("index", format!("{i} out of range for length {len}")));
            }
            v.set(i, true);
        }
        Ok(v)
    }

    /// Each bit independently 1 with probability `nz`.
    pub fn random(len: usize, nz: f64, rng: &mut SeededRng) -> Result<Self> {
        if !(0.0..=1.0).contains(&nz) || nz.is_nan() {
            return Err(param("nz", format!("{nz} is outside [0, 1]")));
        }
        if len == 0 {
            return Err(param("n", "length must be at least 1"));
        }
        let mut v = Self::zeros(len);
        if nz == 0.5 {
            for w in v.words.iter_mut() {
                *w = rng.next_u64();
            }
            v.canonicalize();
        } else {
            for i in 0..len {
                if rng.bernoulli(nz) {
                    v.words[i / WORD_BITS] |= 1 << (i % WORD_BITS);
                }
            }
        }
        Ok(v)
    }

    /// Uniform random vector (each bit a fair coin).
    pub fn random_uniform(len: usize, rng: &mut SeededRng) -> Self {
        let mut v = Self::zeros(len);
        for w in v.words.iter_mut() {
            *w = rng.next_u64();
        }
        v.canonicalize();
        v
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Mutable access for bulk kernels; callers must restore canonical padding.
    #[inline]
    pub(crate) fn words_mut(&mut self) -> &mut [u64] {
        &mut self.words
    }

    #[inline]
    pub(crate) fn canonicalize(&mut self) {
        if let Some(last) = self.words.last_mut() {
            *last &= tail_mask(self.len);
        }
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range (len={})", self.len);
        (self.words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range (len={})", self.len);
        let mask = 1u64 << (i % WORD_BITS);
        if value {
            self.words[i / WORD_BITS] |= mask;
        } else {
            self.words[i / WORD_BITS] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit index {i} out of range (len={})", self.len);
        self.words[i / WORD_BITS] ^= 1 << (i % WORD_BITS);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Indices of set bits in increasing order.
    pub fn ones_iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(k, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let t = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(k * WORD_BITS + t)
                }
            })
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(|i| self.get(i))
    }

    /// Bits as 0.0 / 1.0 reals.
    pub fn to_f64(&self) -> Vec<f64> {
        self.iter().map(|b| if b { 1.0 } else { 0.0 }).collect()
    }

    fn zip_words(&self, other: &Self, context: &'static str, f: impl Fn(u64, u64) -> u64) -> Result<Self> {
        check_dim(context, self.len, other.len)?;
        let words = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(&a, &b)| f(a, b))
            .collect();
        let mut v = Self { len: self.len, words };
        v.canonicalize();
        Ok(v)
    }

    pub fn xor(&self, other: &Self) -> Result<Self> {
        self.zip_words(other, "xor", |a, b| a ^ b)
    }

    pub fn and(&self, other: &Self) -> Result<Self> {
        self.zip_words(other, "and", |a, b| a & b)
    }

    pub fn or(&self, other: &Self) -> Result<Self> {
        self.zip_words(other, "or", |a, b| a | b)
    }

    /// `self AND NOT other`.
    pub fn and_not(&self, other: &Self) -> Result<Self> {
        self.zip_words(other, "and_not", |a, b| a & !b)
    }

    pub fn not(&self) -> Self {
        let mut v = Self {
            len: self.len,
            words: self.words.iter().map(|w| !w).collect(),
        };
        v.canonicalize();
        v
    }

    pub fn xor_assign(&mut self, other: &Self) -> Result<()> {
        check_dim("xor_assign", self.len, other.len)?;
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
        Ok(())
    }

    /// Number of positions where the vectors differ.
    pub fn hamming(&self, other: &Self) -> Result<usize> {
        check_dim("hamming", self.len, other.len)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum())
    }

    /// popcount(self AND other), i.e. the 0/1 inner product.
    pub fn dot(&self, other: &Self) -> Result<usize> {
        check_dim("dot", self.len, other.len)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum())
    }

    /// Parity of popcount(self AND other): the GF(2) inner product.
    pub fn dot_gf2(&self, other: &Self) -> Result<bool> {
        check_dim("dot_gf2", self.len, other.len)?;
        let acc = self
            .words
            .iter()
            .zip(&other.words)
            .fold(0u64, |acc, (a, b)| acc ^ (a & b));
        Ok(acc.count_ones() % 2 == 1)
    }

    /// `out[i] = self[(i - k) mod len]`: positive `k` moves content towards
    /// higher indices with wrap-around.
    pub fn rotate(&self, k: isize) -> Self {
        let n = self.len;
        if n == 0 {
            return self.clone();
        }
        let k = k.rem_euclid(n as isize) as usize;
        if k == 0 {
            return self.clone();
        }
        let mut out = Self::zeros(n);
        // low part moves up by k, the top k bits wrap to the start
        or_bits_at(&mut out.words, n, k, &self.words, n - k);
        let top = self.slice(n - k, k);
        or_bits_at(&mut out.words, n, 0, &top.words, k);
        out
    }

    /// Copy of bits `[start, start + len)`.
    pub fn slice(&self, start: usize, len: usize) -> Self {
        assert!(
            start + len <= self.len,
            "slice [{start}, {}) out of range (len={})",
            start + len,
            self.len
        );
        let mut out = Self::zeros(len);
        if len == 0 {
            return out;
        }
        let shift = start % WORD_BITS;
        let base = start / WORD_BITS;
        for k in 0..out.words.len() {
            let lo = self.words.get(base + k).copied().unwrap_or(0);
            let w = if shift == 0 {
                lo
            } else {
                let hi = self.words.get(base + k + 1).copied().unwrap_or(0);
                (lo >> shift) | (hi << (WORD_BITS - shift))
            };
            out.words[k] = w;
        }
        out.canonicalize();
        out
    }

    /// Bits `[start, start + width)` packed into the low bits of a word (`width <= 64`).
    #[inline]
    pub(crate) fn read_bits(&self, start: usize, width: usize) -> u64 {
        debug_assert!(width <= WORD_BITS && start + width <= self.len);
        if width == 0 {
            return 0;
        }
        let k = start / WORD_BITS;
        let sh = start % WORD_BITS;
        let mut w = self.words[k] >> sh;
        if sh != 0 && sh + width > WORD_BITS {
            w |= self.words[k + 1] << (WORD_BITS - sh);
        }
        if width == WORD_BITS {
            w
        } else {
            w & ((1u64 << width) - 1)
        }
    }

    /// ORs the low `width` bits of `value` into `[start, start + width)`.
    #[inline]
    pub(crate) fn or_bits(&mut self, start: usize, width: usize, value: u64) {
        debug_assert!(width <= WORD_BITS && start + width <= self.len);
        if width == 0 {
            return;
        }
        let value = if width == WORD_BITS { value } else { value & ((1u64 << width) - 1) };
        let k = start / WORD_BITS;
        let sh = start % WORD_BITS;
        self.words[k] |= value << sh;
        if sh != 0 && sh + width > WORD_BITS {
            self.words[k + 1] |= value >> (WORD_BITS - sh);
        }
    }

    /// Writes `src` into `self` at `offset`; the target range must currently be zero.
    pub(crate) fn or_at(&mut self, offset: usize, src: &BitVector) {
        assert!(offset + src.len <= self.len, "or_at out of range");
        or_bits_at(&mut self.words, self.len, offset, &src.words, src.len);
    }

    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a BitVector>) -> Self {
        let parts: Vec<&BitVector> = parts.into_iter().collect();
        let total = parts.iter().map(|p| p.len).sum();
        let mut out = Self::zeros(total);
        let mut offset = 0;
        for p in parts {
            out.or_at(offset, p);
            offset += p.len;
        }
        out
    }

    /// Little-endian packed bytes: byte `k` bit `j` is logical index `8k + j`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let n_bytes = self.len.div_ceil(8);
        self.words
            .iter()
            .flat_map(|w| w.to_le_bytes())
            .take(n_bytes)
            .collect()
    }

    pub fn from_bytes(len: usize, bytes: &[u8]) -> Result<Self> {
        check_dim("BitVector::from_bytes", len.div_ceil(8), bytes.len())?;
        let mut words = vec![0u64; words_for(len)];
        for (i, &b) in bytes.iter().enumerate() {
            words[i / 8] |= (b as u64) << (8 * (i % 8));
        }
        if !len.is_multiple_of(8) {
            let last = bytes[bytes.len() - 1];
            if last >> (len % 8) != 0 {
                return Err(Error::Format("non-zero padding bits in packed vector".into()));
            }
        }
        Self::from_words(len, words)
    }

    /// Binary form: 8-byte little-endian length followed by the packed bytes.
    pub fn write_binary(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self.len as u64).to_le_bytes());
        out.extend_from_slice(&self.to_bytes());
    }

    /// Inverse of [`write_binary`](Self::write_binary); returns the vector and bytes consumed.
    pub fn read_binary(bytes: &[u8]) -> Result<(Self, usize)> {
        if bytes.len() < 8 {
            return Err(Error::Format("truncated bit vector header".into()));
        }
        let len = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes")) as usize;
        let n = len.div_ceil(8);
        let body = bytes
            .get(8..8 + n)
            .ok_or_else(|| Error::Format("truncated bit vector body".into()))?;
        Ok((Self::from_bytes(len, body)?, 8 + n))
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len <= 128 {
            write!(f, "BitVector({self})")
        } else {
            write!(f, "BitVector(len={}, ones={})", self.len, self.count_ones())
        }
    }
}

impl FromStr for BitVector {
    type Err = Error;

    /// Parses the fixture text form: `'0'`/`'1'` characters, index 0 leftmost.
    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Format(format!("unexpected character {other:?} in bit string"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_bools(&bits))
    }
}
