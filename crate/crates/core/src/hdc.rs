//! Binary hyperdimensional operations: binding, bundling, sequences, cleanup
//! memory, sign-sum conceptors, analogy, and Boolean algebra on features of
//! additive automata.

use serde::Serialize;

use crate::bitcore::{BitVector, Permutation, SeededRng};
use crate::error::{check_dim, Error, Result};
use crate::reservoir::{expand_feedforward, ReservoirConfig};

/// Where a hypervector came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Origin {
    Random,
    /// Feature of an automaton started from `initial`.
    CaFeature { initial: BitVector },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hypervector {
    pub bits: BitVector,
    pub origin: Origin,
}

impl From<BitVector> for Hypervector {
    fn from(bits: BitVector) -> Self {
        Self {
            bits,
            origin: Origin::Random,
        }
    }
}

impl Hypervector {
    pub fn random(dim: usize, rng: &mut SeededRng) -> Self {
        BitVector::random_uniform(dim, rng).into()
    }

    /// Feedforward feature of `initial`, remembering the initial vector.
    pub fn from_ca(initial: &BitVector, cfg: &ReservoirConfig) -> Result<Self> {
        Ok(Self {
            bits: expand_feedforward(initial, cfg)?.bits,
            origin: Origin::CaFeature {
                initial: initial.clone(),
            },
        })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn initial(&self) -> Option<&BitVector> {
        match &self.origin {
            Origin::CaFeature { initial } => Some(initial),
            Origin::Random => None,
        }
    }

    pub fn hamming(&self, other: &Hypervector) -> Result<usize> {
        self.bits.hamming(&other.bits)
    }

    /// Tag byte (0 random, 1 automaton feature), the bits, then the initial vector if any.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match &self.origin {
            Origin::Random => {
                out.push(0);
                self.bits.write_binary(&mut out);
            }
            Origin::CaFeature { initial } => {
                out.push(1);
                self.bits.write_binary(&mut out);
                initial.write_binary(&mut out);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let tag = *bytes.first().ok_or_else(|| Error::Format("empty hypervector blob".into()))?;
        let (bits, used) = BitVector::read_binary(&bytes[1..])?;
        let rest = &bytes[1 + used..];
        let (origin, tail) = match tag {
            0 => (Origin::Random, rest.len()),
            1 => {
                let (initial, used) = BitVector::read_binary(rest)?;
                (Origin::CaFeature { initial }, rest.len() - used)
            }
            t => return Err(Error::Format(format!("unknown hypervector origin tag {t}"))),
        };
        if tail != 0 {
            return Err(Error::Format("trailing bytes after hypervector".into()));
        }
        Ok(Self { bits, origin })
    }
}

pub fn bind_xor(a: &Hypervector, b: &Hypervector) -> Result<Hypervector> {
    Ok(a.bits.xor(&b.bits)?.into())
}

pub fn bind_permute(a: &Hypervector, p: &Permutation) -> Result<Hypervector> {
    Ok(p.apply(&a.bits)?.into())
}

/// Bitwise majority; exact ties are fair coins drawn one word at a time.
/// For two inputs this coincides with normalized addition.
pub fn bundle_bits(vs: &[&BitVector], rng: &mut SeededRng) -> Result<BitVector> {
    let first = vs.first().ok_or(Error::Empty("bundle inputs"))?;
    let dim = first.len();
    for v in vs {
        check_dim("bundle", dim, v.len())?;
    }
    if vs.len() == 1 {
        return Ok((*first).clone());
    }
    let k = vs.len();
    let mut counts = vec![0u32; dim];
    for v in vs {
        for i in v.ones_iter() {
            counts[i] += 1;
        }
    }
    let n_words = first.words().len();
    let mut words = vec![0u64; n_words];
    for (w, out) in words.iter_mut().enumerate() {
        let (mut maj, mut tie) = (0u64, 0u64);
        for b in 0..64 {
            let i = w * 64 + b;
            if i >= dim {
                break;
            }
            let twice = 2 * counts[i] as usize;
            if twice > k {
                maj |= 1 << b;
            } else if twice == k {
                tie |= 1 << b;
            }
        }
        let coin = if tie != 0 { rng.next_u64() } else { 0 };
        *out = maj | (tie & coin);
    }
    BitVector::from_words(dim, words)
}

pub fn bundle(vs: &[&Hypervector], rng: &mut SeededRng) -> Result<Hypervector> {
    let bits: Vec<&BitVector> = vs.iter().map(|h| &h.bits).collect();
    Ok(bundle_bits(&bits, rng)?.into())
}

/// `A ⊕ P ⊕ B`.
pub fn make_triple(a: &Hypervector, p: &Hypervector, b: &Hypervector) -> Result<Hypervector> {
    Ok(a.bits.xor(&p.bits)?.xor(&b.bits)?.into())
}

/// `(X ⊕ A) ⊕ A ⊕ B = X ⊕ B`.
pub fn substitute(xa: &Hypervector, a: &Hypervector, b: &Hypervector) -> Result<Hypervector> {
    make_triple(xa, a, b)
}

/// `S = Π(...Π(Π(Π A) + B) + C ...) + last`: permute the running vector, then
/// bundle it with the next item.
pub fn encode_sequence(items: &[&Hypervector], p: &Permutation, rng: &mut SeededRng) -> Result<Hypervector> {
    let (first, rest) = items.split_first().ok_or(Error::Empty("sequence items"))?;
    let mut s = p.apply(&first.bits)?;
    for item in rest {
        s = bundle_bits(&[&p.apply(&s)?, &item.bits], rng)?;
    }
    Ok(s.into())
}

/// Result of a cleanup-memory probe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Cleanup {
    pub index: usize,
    pub distance: usize,
    /// Gap to the runner-up (0 for a tie or single-item memory).
    pub margin: usize,
}

/// Nearest stored item by Hamming distance; ties go to the lowest index.
pub fn cleanup(memory: &[&BitVector], query: &BitVector) -> Result<Cleanup> {
    if memory.is_empty() {
        return Err(Error::Empty("cleanup memory"));
    }
    let dists = memory
        .iter()
        .map(|m| m.hamming(query))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, &d) in dists.iter().enumerate() {
        if d < dists[best] {
            best = i;
        }
    }
    let runner = dists
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != best)
        .map(|(_, &d)| d)
        .min()
        .unwrap_or(dists[best]);
    Ok(Cleanup {
        index: best,
        distance: dists[best],
        margin: runner - dists[best],
    })
}

/// Cleanup over labelled items, returning the winning label.
pub fn cleanup_labeled<'a, L>(memory: &'a [(L, Hypervector)], query: &Hypervector) -> Result<(&'a L, Cleanup)> {
    let bits: Vec<&BitVector> = memory.iter().map(|(_, h)| &h.bits).collect();
    let c = cleanup(&bits, &query.bits)?;
    Ok((&memory[c.index].0, c))
}

/// How the `+` terms of the inference rule are normalized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleBundling {
    /// Every `+` term joins one majority vote.
    Flat,
    /// Each relation is bundled, then the two relations are bundled again.
    Nested,
}

/// One run of the grandmother rule: `R = G_xz ⊕ (M_xy + F_yz)` applied to
/// "a is the mother of b" and "b is the father of c". Succeeds iff cleanup
/// over `G_ac` and `distractors` random vectors returns `G_ac`.
pub fn infer_grandmother_demo(dim: usize, distractors: usize, bundling: RuleBundling, rng: &mut SeededRng) -> Result<bool> {
    let mut atom = || BitVector::random_uniform(dim, rng);
    let [m1, m2, f1, f2, g1, g2] = [atom(), atom(), atom(), atom(), atom(), atom()];
    let [x, y, z, a, b, c] = [atom(), atom(), atom(), atom(), atom(), atom()];
    let bind = |r: &BitVector, v: &BitVector| r.xor(v).expect("equal dims");

    let relation_sum = |p: &BitVector, q: &BitVector, r: &BitVector, rng: &mut SeededRng| -> Result<BitVector> {
        let terms = [bind(&m1, p), bind(&m2, q), bind(&f1, q), bind(&f2, r)];
        match bundling {
            RuleBundling::Flat => bundle_bits(&terms.iter().collect::<Vec<_>>(), rng),
            RuleBundling::Nested => {
                let mother = bundle_bits(&[&terms[0], &terms[1]], rng)?;
                let father = bundle_bits(&[&terms[2], &terms[3]], rng)?;
                bundle_bits(&[&mother, &father], rng)
            }
        }
    };
    let g_xz = bundle_bits(&[&bind(&g1, &x), &bind(&g2, &z)], rng)?;
    let rule = g_xz.xor(&relation_sum(&x, &y, &z, rng)?)?;
    let g_ac = bundle_bits(&[&bind(&g1, &a), &bind(&g2, &c)], rng)?;
    let inferred = rule.xor(&relation_sum(&a, &b, &c, rng)?)?;

    let mut memory = vec![g_ac];
    for _ in 0..distractors {
        memory.push(BitVector::random_uniform(dim, rng));
    }
    let refs: Vec<&BitVector> = memory.iter().collect();
    Ok(cleanup(&refs, &inferred)?.index == 0)
}

/// Per-position sign of the summed ±1 features.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Conceptor {
    /// Bit 1 encodes +1, bit 0 encodes −1.
    pub positive: BitVector,
    pub label: usize,
}

impl Conceptor {
    /// `sign(Σ (2F − 1))`; zero sums become a fair ±1.
    pub fn build(features: &[&BitVector], label: usize, rng: &mut SeededRng) -> Result<Self> {
        Ok(Self {
            positive: bundle_bits(features, rng)?,
            label,
        })
    }

    pub fn signs(&self) -> Vec<i8> {
        self.positive.iter().map(|b| if b { 1 } else { -1 }).collect()
    }

    /// `Σ_j f_j · sign_j` with `f` kept as 0/1.
    pub fn score(&self, f: &BitVector) -> Result<i64> {
        let pos = f.dot(&self.positive)? as i64;
        Ok(pos - (f.count_ones() as i64 - pos))
    }

    /// Label, then the packed signs in bit-vector binary form.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = (self.label as u64).to_le_bytes().to_vec();
        self.positive.write_binary(&mut out);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(Error::Format("conceptor blob shorter than its label".into()));
        }
        let label = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes")) as usize;
        let (positive, used) = BitVector::read_binary(&bytes[8..])?;
        if 8 + used != bytes.len() {
            return Err(Error::Format("trailing bytes after conceptor".into()));
        }
        Ok(Self { positive, label })
    }
}

/// Label of the conceptor with the largest inner product; ties go to the first.
pub fn conceptor_classify(conceptors: &[Conceptor], f: &BitVector) -> Result<usize> {
    let mut best: Option<(i64, usize)> = None;
    for c in conceptors {
        let s = c.score(f)?;
        if best.is_none_or(|(b, _)| s > b) {
            best = Some((s, c.label));
        }
    }
    best.map(|(_, l)| l).ok_or(Error::Empty("conceptor list"))
}

/// `x ⊕ c1 ⊕ c2`: "what is to `c2` as `x` is to `c1`".
pub fn analogy(x: &Hypervector, c1: &Hypervector, c2: &Hypervector) -> Result<Hypervector> {
    make_triple(x, c1, c2)
}

/// One run of the "automobile of air" scenario on random atoms: land and air
/// each bundle an animal and a vehicle binding, and the analogy must clean up
/// to the airplane among all atoms.
pub fn analogy_demo(dim: usize, rng: &mut SeededRng) -> Result<bool> {
    let names = ["animal", "vehicle", "horse", "automobile", "bird", "airplane"];
    let atoms: Vec<Hypervector> = names.iter().map(|_| Hypervector::random(dim, rng)).collect();
    let (animal, vehicle, horse, auto, bird, plane) = (&atoms[0], &atoms[1], &atoms[2], &atoms[3], &atoms[4], &atoms[5]);
    let land = bundle(&[&bind_xor(animal, horse)?, &bind_xor(vehicle, auto)?], rng)?;
    let air = bundle(&[&bind_xor(animal, bird)?, &bind_xor(vehicle, plane)?], rng)?;
    let query = analogy(auto, &land, &air)?;
    let memory: Vec<(&str, Hypervector)> = names.iter().copied().zip(atoms.iter().cloned()).collect();
    let (label, _) = cleanup_labeled(&memory, &query)?;
    Ok(*label == "airplane")
}

fn initials<'a>(ca: &'a Hypervector, cb: &'a Hypervector) -> Result<(&'a BitVector, &'a BitVector)> {
    match (ca.initial(), cb.initial()) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(Error::State(
            "Boolean feature algebra needs hypervectors that remember their initial vector".into(),
        )),
    }
}

fn require_linear(cfg: &ReservoirConfig) -> Result<()> {
    match cfg.rule.linear_rule() {
        Some(_) => Ok(()),
        None => Err(Error::UnsupportedRule {
            rule: match cfg.rule {
                crate::automata::RuleSpec::Elementary { rule, .. } => rule as u16,
                crate::automata::RuleSpec::GameOfLife { .. } => u16::MAX,
            },
            context: "Boolean feature algebra",
        }),
    }
}

/// `C_{A∨B} = C_A ⊕ C_{B−A}`.
pub fn symbolic_or(ca: &Hypervector, cb: &Hypervector, cfg: &ReservoirConfig) -> Result<Hypervector> {
    require_linear(cfg)?;
    let (a0, b0) = initials(ca, cb)?;
    let extra = expand_feedforward(&b0.and_not(a0)?, cfg)?.bits;
    Ok(Hypervector {
        bits: ca.bits.xor(&extra)?,
        origin: Origin::CaFeature { initial: a0.or(b0)? },
    })
}

/// `C_{A∧B} = C_A ⊕ C_{A−B}`.
pub fn symbolic_and(ca: &Hypervector, cb: &Hypervector, cfg: &ReservoirConfig) -> Result<Hypervector> {
    require_linear(cfg)?;
    let (a0, b0) = initials(ca, cb)?;
    let extra = expand_feedforward(&a0.and_not(b0)?, cfg)?.bits;
    Ok(Hypervector {
        bits: ca.bits.xor(&extra)?,
        origin: Origin::CaFeature { initial: a0.and(b0)? },
    })
}

/// `C_A ⊕ C_B`; the initial vector is `A0 XOR B0` when both are known.
pub fn symbolic_xor(ca: &Hypervector, cb: &Hypervector) -> Result<Hypervector> {
    let bits = ca.bits.xor(&cb.bits)?;
    let origin = match (ca.initial(), cb.initial()) {
        (Some(a), Some(b)) => Origin::CaFeature { initial: a.xor(b)? },
        _ => Origin::Random,
    };
    Ok(Hypervector { bits, origin })
}
