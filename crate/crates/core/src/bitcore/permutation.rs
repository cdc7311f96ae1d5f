use crate::error::{check_dim, param, Result};

use super::bitvec::BitVector;
use super::rng::SeededRng;

/// A bijection on `0..n`. Applying it to `v` gives `out[i] = v[map[i]]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation {
    map: Vec<u32>,
    seed: Option<(u64, u64)>,
}

impl Permutation {
    /// Validates that `map` contains each index exactly once.
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &m in &map {
            if m >= n || seen[m] {
                return Err(param("mapping", format!("not a bijection on 0..{n} (entry {m})")));
            }
            seen[m] = true;
        }
        Ok(Self {
            map: map.into_iter().map(|m| m as u32).collect(),
            seed: None,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            map: (0..n as u32).collect(),
            seed: None,
        }
    }

    /// Uniform random permutation drawn from stream `(seed, index)`.
    pub fn random(n: usize, seed: u64, index: u64) -> Self {
        let mut rng = SeededRng::stream(seed, index);
        let mut p = Self::random_with(n, &mut rng);
        p.seed = Some((seed, index));
        p
    }

    pub fn random_with(n: usize, rng: &mut SeededRng) -> Self {
        let mut map: Vec<u32> = (0..n as u32).collect();
        rng.shuffle(&mut map);
        Self { map, seed: None }
    }

    /// `(seed, stream)` the permutation was drawn from, if any.
    pub fn provenance(&self) -> Option<(u64, u64)> {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> usize {
        self.map[i] as usize
    }

    pub fn mapping(&self) -> Vec<usize> {
        self.map.iter().map(|&m| m as usize).collect()
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0u32; self.map.len()];
        for (i, &m) in self.map.iter().enumerate() {
            inv[m as usize] = i as u32;
        }
        Self { map: inv, seed: None }
    }

    /// `self` after `first`: applying the result equals applying `first` then `self`.
    pub fn after(&self, first: &Permutation) -> Result<Self> {
        check_dim("Permutation::after", self.len(), first.len())?;
        Ok(Self {
            map: self.map.iter().map(|&m| first.map[m as usize]).collect(),
            seed: None,
        })
    }

    pub fn apply(&self, v: &BitVector) -> Result<BitVector> {
        check_dim("permute", self.len(), v.len())?;
        let src = v.words();
        let mut out = BitVector::zeros(v.len());
        let dst = out.words_mut();
        for (i, &m) in self.map.iter().enumerate() {
            let m = m as usize;
            let bit = (src[m / 64] >> (m % 64)) & 1;
            dst[i / 64] |= bit << (i % 64);
        }
        Ok(out)
    }

    /// Applies the permutation to a slice of any element type.
    pub fn apply_slice<T: Copy>(&self, v: &[T]) -> Result<Vec<T>> {
        check_dim("permute", self.len(), v.len())?;
        Ok(self.map.iter().map(|&m| v[m as usize]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_example() {
        let p = Permutation::new(vec![2, 0, 1]).unwrap();
        let v: BitVector = "100".parse().unwrap();
        assert_eq!(p.apply(&v).unwrap().to_string(), "010");
    }

    #[test]
    fn rejects_non_bijection() {
        assert!(Permutation::new(vec![0, 0, 1]).is_err());
        assert!(Permutation::new(vec![0, 3, 1]).is_err());
    }

    #[test]
    fn identity_and_dimension() {
        let v: BitVector = "10110".parse().unwrap();
        assert_eq!(Permutation::identity(5).apply(&v).unwrap(), v);
        assert!(Permutation::identity(4).apply(&v).is_err());
    }

    #[test]
    fn composition_order() {
        let a = Permutation::random(50, 1, 0);
        let b = Permutation::random(50, 1, 1);
        let mut rng = SeededRng::new(3);
        let v = BitVector::random_uniform(50, &mut rng);
        let seq = b.apply(&a.apply(&v).unwrap()).unwrap();
        assert_eq!(b.after(&a).unwrap().apply(&v).unwrap(), seq);
    }

    proptest! {
        #[test]
        fn inverse_roundtrip_and_popcount(seed in any::<u64>(), n in 1usize..300) {
            let p = Permutation::random(n, seed, 0);
            let mut rng = SeededRng::new(seed ^ 1);
            let v = BitVector::random_uniform(n, &mut rng);
            let w = p.apply(&v).unwrap();
            prop_assert_eq!(w.count_ones(), v.count_ones());
            prop_assert_eq!(p.inverse().apply(&w).unwrap(), v);
        }
    }
}
