//! Input encoding and cellular-automaton feature expansion.
//!
//! Feedforward features concatenate, for each of `R` random permutations of
//! the input, the states `A_1..A_I` of the automaton started from the permuted
//! input; the raw input may be appended once at the end. The recurrent mode
//! keeps one live state made of `R` permuted lanes and folds each new input in
//! with [`normalized_add`].

use crate::automata::{evolve, RuleSpec};
use crate::bitcore::{derive_seed, BitVector, Permutation, SeededRng};
use crate::error::{check_dim, param, Error, Result};
use crate::linalg::Matrix;

/// Which automaton, how many permutations and iterations, and the permutations themselves.
#[derive(Clone, Debug, PartialEq)]
pub struct ReservoirConfig {
    pub rule: RuleSpec,
    pub r: usize,
    pub i: usize,
    pub master_seed: u64,
    pub include_raw_input: bool,
    permutations: Vec<Permutation>,
}

impl ReservoirConfig {
    /// Draws `r` uniform permutations of the cells from `master_seed`.
    pub fn new(rule: RuleSpec, r: usize, i: usize, master_seed: u64) -> Result<Self> {
        rule.validate()?;
        if r == 0 {
            return Err(param("R", "permutation count must be at least 1"));
        }
        if i == 0 {
            return Err(param("I", "iteration count must be at least 1"));
        }
        let n = rule.cells();
        let perm_seed = derive_seed(master_seed, "permutations");
        let permutations = (0..r as u64).map(|k| Permutation::random(n, perm_seed, k)).collect();
        Ok(Self {
            rule,
            r,
            i,
            master_seed,
            include_raw_input: true,
            permutations,
        })
    }

    pub fn with_raw_input(mut self, include: bool) -> Self {
        self.include_raw_input = include;
        self
    }

    /// Replaces the drawn permutations; `R` becomes `perms.len()`.
    pub fn with_permutations(mut self, perms: Vec<Permutation>) -> Result<Self> {
        if perms.is_empty() {
            return Err(param("R", "permutation count must be at least 1"));
        }
        for p in &perms {
            check_dim("permutation length", self.cells(), p.len())?;
        }
        self.r = perms.len();
        self.permutations = perms;
        Ok(self)
    }

    pub fn cells(&self) -> usize {
        self.rule.cells()
    }

    pub fn permutations(&self) -> &[Permutation] {
        &self.permutations
    }

    /// Feedforward feature length `N*I*R (+ N)`.
    pub fn feature_len(&self) -> usize {
        let n = self.cells();
        n * self.i * self.r + if self.include_raw_input { n } else { 0 }
    }

    /// Recurrent per-step feature length `N*R*I`.
    pub fn recurrent_feature_len(&self) -> usize {
        self.cells() * self.r * self.i
    }

    /// Seed of the tie-breaking streams used by recurrent insertion.
    pub fn tie_seed(&self) -> u64 {
        derive_seed(self.master_seed, "normalized-add ties")
    }
}

/// A feature vector together with the shape that produced it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpaceTimeFeature {
    pub n: usize,
    pub r: usize,
    pub i: usize,
    pub include_raw_input: bool,
    pub bits: BitVector,
}

const FLAG_RAW: u32 = 1;

impl SpaceTimeFeature {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// State `A_k` (1-based `k`) of permutation lane `r`.
    pub fn block(&self, r: usize, k: usize) -> BitVector {
        assert!(r < self.r && (1..=self.i).contains(&k), "block ({r}, {k}) out of range");
        self.bits.slice((r * self.i + (k - 1)) * self.n, self.n)
    }

    pub fn raw_input(&self) -> Option<BitVector> {
        self.include_raw_input
            .then(|| self.bits.slice(self.n * self.i * self.r, self.n))
    }

    /// 16-byte header (N, R, I, flags as little-endian u32) followed by packed bits.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.bits.len().div_ceil(8));
        for v in [self.n as u32, self.r as u32, self.i as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let flags = if self.include_raw_input { FLAG_RAW } else { 0 };
        out.extend_from_slice(&flags.to_le_bytes());
        out.extend_from_slice(&self.bits.to_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 {
            return Err(Error::Format("feature header shorter than 16 bytes".into()));
        }
        let word = |k: usize| u32::from_le_bytes(bytes[4 * k..4 * k + 4].try_into().expect("4 bytes")) as usize;
        let (n, r, i, flags) = (word(0), word(1), word(2), word(3));
        let include_raw_input = flags as u32 & FLAG_RAW != 0;
        let len = n * r * i + if include_raw_input { n } else { 0 };
        let bits = BitVector::from_bytes(len, &bytes[16..])?;
        Ok(Self {
            n,
            r,
            i,
            include_raw_input,
            bits,
        })
    }
}

/// Scatters the input over the cells: `A_0^P = permute(input, p)`.
pub fn encode_binary(input: &BitVector, p: &Permutation) -> Result<BitVector> {
    p.apply(input)
}

/// Cell `i` is 1 iff `(W x)[i] > threshold`.
pub fn encode_real(input: &[f64], w: &Matrix, threshold: f64) -> Result<BitVector> {
    let proj = w.matvec(input)?;
    Ok(BitVector::from_bools(&proj.iter().map(|&v| v > threshold).collect::<Vec<_>>()))
}

/// Lays out blocks `[lane r][step k]` followed by the optional raw input.
fn pack_lanes(
    cfg: &ReservoirConfig,
    input: &BitVector,
    mut lane_states: impl FnMut(&BitVector) -> Result<Vec<BitVector>>,
) -> Result<SpaceTimeFeature> {
    let n = cfg.cells();
    check_dim("feature expansion input", n, input.len())?;
    let mut bits = BitVector::zeros(cfg.feature_len());
    for (r, p) in cfg.permutations.iter().enumerate() {
        let a0 = p.apply(input)?;
        for (k, state) in lane_states(&a0)?.iter().enumerate() {
            bits.or_at((r * cfg.i + k) * n, state);
        }
    }
    if cfg.include_raw_input {
        bits.or_at(n * cfg.i * cfg.r, input);
    }
    Ok(SpaceTimeFeature {
        n,
        r: cfg.r,
        i: cfg.i,
        include_raw_input: cfg.include_raw_input,
        bits,
    })
}

/// Feedforward expansion: for each permutation, `A_1..A_I` of the permuted input.
pub fn expand_feedforward(input: &BitVector, cfg: &ReservoirConfig) -> Result<SpaceTimeFeature> {
    pack_lanes(cfg, input, |a0| Ok(evolve(a0, &cfg.rule, cfg.i)?.states.split_off(1)))
}

/// `C_k = rot(a0, +k) XOR rot(a0, -k)` for `k = 1..I`, concatenated.
pub fn covariance_features(a0: &BitVector, i: usize) -> Result<BitVector> {
    let blocks = covariance_blocks(a0, i)?;
    Ok(BitVector::concat(&blocks))
}

fn covariance_blocks(a0: &BitVector, i: usize) -> Result<Vec<BitVector>> {
    if a0.len() < 3 {
        return Err(param("n", format!("ring length {} is below 3", a0.len())));
    }
    (1..=i as isize)
        .map(|k| a0.rotate(k).xor(&a0.rotate(-k)))
        .collect()
}

/// Same layout as [`expand_feedforward`] with `C_k` in place of `A_k`.
pub fn expand_covariance(input: &BitVector, cfg: &ReservoirConfig) -> Result<SpaceTimeFeature> {
    pack_lanes(cfg, input, |a0| covariance_blocks(a0, cfg.i))
}

/// Live recurrent state over all permutation lanes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecurrentState {
    pub current: BitVector,
    pub step_index: usize,
}

/// Concatenation of the `R` permuted copies of `x`.
pub fn permuted_lanes(x: &BitVector, cfg: &ReservoirConfig) -> Result<BitVector> {
    check_dim("recurrent input", cfg.cells(), x.len())?;
    let n = cfg.cells();
    let mut out = BitVector::zeros(n * cfg.r);
    for (r, p) in cfg.permutations.iter().enumerate() {
        out.or_at(r * n, &p.apply(x)?);
    }
    Ok(out)
}

pub fn recurrent_init(x0: &BitVector, cfg: &ReservoirConfig) -> Result<RecurrentState> {
    Ok(RecurrentState {
        current: permuted_lanes(x0, cfg)?,
        step_index: 0,
    })
}

/// 1 where both are 1, 0 where both are 0, a fair coin where they differ.
pub fn normalized_add(a: &BitVector, b: &BitVector, rng: &mut SeededRng) -> Result<BitVector> {
    check_dim("normalized_add", a.len(), b.len())?;
    let words: Vec<u64> = a
        .words()
        .iter()
        .zip(b.words())
        .map(|(&x, &y)| {
            let diff = x ^ y;
            let coin = if diff != 0 { rng.next_u64() } else { 0 };
            (x & y) | (diff & coin)
        })
        .collect();
    BitVector::from_words(a.len(), words)
}

/// Evolves the live state `I` steps as one ring (or stacked torus), returning
/// the `I` intermediate states as the step feature, then inserts `x_t`.
pub fn recurrent_step(
    state: &RecurrentState,
    x_t: Option<&BitVector>,
    cfg: &ReservoirConfig,
    rng: &mut SeededRng,
) -> Result<(RecurrentState, BitVector)> {
    let joined = cfg.rule.joined(cfg.r);
    check_dim("recurrent state", joined.cells(), state.current.len())?;
    let mut st = evolve(&state.current, &joined, cfg.i)?;
    let feature = BitVector::concat(&st.states[1..]);
    let last = st.states.pop().expect("non-empty evolution");
    let current = match x_t {
        Some(x) => normalized_add(&last, &permuted_lanes(x, cfg)?, rng)?,
        None => last,
    };
    Ok((
        RecurrentState {
            current,
            step_index: state.step_index + x_t.map_or(0, |_| 1),
        },
        feature,
    ))
}
