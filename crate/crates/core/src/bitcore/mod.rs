//! Bit-packed vectors, permutations, GF(2) matrices and seeded randomness.

mod bitvec;
mod gf2;
mod permutation;
mod rng;

pub use bitvec::BitVector;
pub(crate) use bitvec::tail_mask;
pub use gf2::Gf2Matrix;
pub use permutation::Permutation;
pub use rng::{derive_seed, SeededRng};
