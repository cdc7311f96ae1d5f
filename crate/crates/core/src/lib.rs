//! Cellular-automaton reservoir computing.
//!
//! Binary inputs are scattered over the cells of an elementary or Game of Life
//! automaton, evolved for a few steps, and the concatenated space-time states
//! serve as features for a linear readout. The crate also provides the GF(2)
//! kernel view of linear rules, hyperdimensional symbolic operations, and
//! experiment drivers for sequence-memory benchmarks.

pub mod automata;
pub mod bitcore;
pub mod error;
pub mod harness;
pub mod hdc;
pub mod kernel;
pub mod linalg;
pub mod readout;
pub mod reservoir;

pub use automata::{RuleSpec, SpaceTime};
pub use bitcore::{BitVector, Gf2Matrix, Permutation, SeededRng};
pub use error::{Error, Result};
pub use hdc::{Conceptor, Hypervector};
pub use kernel::{KernelModel, MetricMode, PrecomputedReadout};
pub use readout::LinearReadout;
pub use reservoir::{RecurrentState, ReservoirConfig, SpaceTimeFeature};
