//! Sequence-memory benchmarks.
//!
//! Both tasks present a pattern, a long distractor period, a cue, and then
//! expect the pattern back while the distractor channel stays on. Matrices are
//! stored flattened time-major: element `(t, c)` is bit `t * channels + c`.

use serde::{Deserialize, Serialize};

use crate::bitcore::{BitVector, SeededRng};
use crate::error::{param, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    #[serde(rename = "5bit")]
    FiveBit,
    #[serde(rename = "20bit")]
    TwentyBit,
}

impl TaskKind {
    pub fn pattern_len(self) -> usize {
        match self {
            TaskKind::FiveBit => 5,
            TaskKind::TwentyBit => 10,
        }
    }

    pub fn input_channels(self) -> usize {
        match self {
            TaskKind::FiveBit => 4,
            TaskKind::TwentyBit => 6,
        }
    }

    pub fn output_channels(self) -> usize {
        match self {
            TaskKind::FiveBit => 3,
            TaskKind::TwentyBit => 5,
        }
    }

    /// Alphabet size of the pattern.
    pub fn symbols(self) -> usize {
        match self {
            TaskKind::FiveBit => 2,
            TaskKind::TwentyBit => 4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TaskKind::FiveBit => "5bit",
            TaskKind::TwentyBit => "20bit",
        }
    }
}

impl std::str::FromStr for TaskKind {
    type Err = crate::error::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "5bit" => Ok(TaskKind::FiveBit),
            "20bit" => Ok(TaskKind::TwentyBit),
            other => Err(param("task", format!("unknown task {other:?} (expected 5bit or 20bit)"))),
        }
    }
}

/// One input/target pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sequence {
    /// Symbol index per pattern step.
    pub pattern: Vec<u8>,
    pub input: BitVector,
    pub target: BitVector,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MemoryTask {
    pub kind: TaskKind,
    pub t0: usize,
    pub sequences: Vec<Sequence>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Time steps whose targets enter the regression.
    pub train_steps: BitVector,
    /// Time steps that are scored.
    pub test_steps: BitVector,
}

impl MemoryTask {
    pub fn len(&self) -> usize {
        self.t0 + 2 * self.kind.pattern_len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn in_channels(&self) -> usize {
        self.kind.input_channels()
    }

    pub fn out_channels(&self) -> usize {
        self.kind.output_channels()
    }

    /// Input column at step `t`.
    pub fn input_at(&self, seq: usize, t: usize) -> BitVector {
        let c = self.in_channels();
        self.sequences[seq].input.slice(t * c, c)
    }

    pub fn target_at(&self, seq: usize, t: usize) -> BitVector {
        let c = self.out_channels();
        self.sequences[seq].target.slice(t * c, c)
    }

    /// First step of the distractor period.
    pub fn distractor_start(&self) -> usize {
        self.kind.pattern_len()
    }

    /// Step carrying the cue.
    pub fn cue_step(&self) -> usize {
        self.kind.pattern_len() + self.t0 - 1
    }

    pub fn is_distractor_step(&self, t: usize) -> bool {
        t >= self.distractor_start() && t < self.cue_step()
    }

    /// Expands a step mask to the flattened target layout.
    pub fn target_mask(&self, steps: &BitVector) -> BitVector {
        let c = self.out_channels();
        let mut m = BitVector::zeros(self.len() * c);
        for t in steps.ones_iter() {
            for k in 0..c {
                m.set(t * c + k, true);
            }
        }
        m
    }

    /// Sampled distractor step nearest to each unsampled one (earlier on ties).
    pub fn nearest_sampled_distractor(&self) -> Vec<(usize, usize)> {
        let sampled: Vec<usize> = (self.distractor_start()..self.cue_step())
            .filter(|&t| self.train_steps.get(t))
            .collect();
        if sampled.is_empty() {
            return Vec::new();
        }
        (self.distractor_start()..self.cue_step())
            .filter(|&t| !self.train_steps.get(t))
            .map(|t| {
                let best = *sampled
                    .iter()
                    .min_by_key(|&&s| (s.abs_diff(t), s))
                    .expect("non-empty");
                (t, best)
            })
            .collect()
    }
}

fn build_sequence(kind: TaskKind, t0: usize, pattern: Vec<u8>) -> Sequence {
    let p = kind.pattern_len();
    let (ci, co) = (kind.input_channels(), kind.output_channels());
    let len = t0 + 2 * p;
    let distractor_in = ci - 2;
    let cue_in = ci - 1;
    let waiting_out = co - 1;
    let cue = p + t0 - 1;
    let mut input = BitVector::zeros(len * ci);
    let mut target = BitVector::zeros(len * co);
    let symbol_channel = |sym: u8| -> usize {
        match kind {
            // channel 0 carries the bit, channel 1 its complement
            TaskKind::FiveBit => 1 - sym as usize,
            TaskKind::TwentyBit => sym as usize,
        }
    };
    for t in 0..len {
        if t < p {
            input.set(t * ci + symbol_channel(pattern[t]), true);
        } else if t == cue {
            input.set(t * ci + cue_in, true);
        } else {
            input.set(t * ci + distractor_in, true);
        }
        if t <= cue {
            target.set(t * co + waiting_out, true);
        } else {
            target.set(t * co + symbol_channel(pattern[t - cue - 1]), true);
        }
    }
    Sequence { pattern, input, target }
}

/// All 32 five-bit patterns; every sequence is both trained and tested on.
pub fn gen_5bit(t0: usize) -> Result<MemoryTask> {
    if t0 == 0 {
        return Err(param("t0", "distractor period must be at least 1"));
    }
    let kind = TaskKind::FiveBit;
    let sequences: Vec<Sequence> = (0..32u32)
        .map(|code| {
            let pattern = (0..5).map(|k| ((code >> (4 - k)) & 1) as u8).collect();
            build_sequence(kind, t0, pattern)
        })
        .collect();
    let len = t0 + 10;
    Ok(MemoryTask {
        kind,
        t0,
        train: (0..32).collect(),
        test: (0..32).collect(),
        sequences,
        train_steps: BitVector::ones(len),
        test_steps: BitVector::ones(len),
    })
}

/// Number of distractor steps that enter training for the 20-bit task.
pub const NPICK_TRAIN: usize = 10;

/// Distinct random 10-symbol patterns over 4 symbols, split into train and test.
/// Training covers every non-distractor step plus 10 sampled distractor steps.
pub fn gen_20bit(t0: usize, n_train: usize, n_test: usize, rng: &mut SeededRng) -> Result<MemoryTask> {
    if t0 == 0 {
        return Err(param("t0", "distractor period must be at least 1"));
    }
    let space = 4u64.pow(10);
    if (n_train + n_test) as u64 > space {
        return Err(param(
            "n_train + n_test",
            format!("{} exceeds the {space} distinct patterns", n_train + n_test),
        ));
    }
    let kind = TaskKind::TwentyBit;
    let codes = rng.sample_distinct(space, n_train + n_test);
    let sequences: Vec<Sequence> = codes
        .iter()
        .map(|&code| {
            let pattern = (0..10).map(|k| ((code >> (2 * (9 - k))) & 3) as u8).collect();
            build_sequence(kind, t0, pattern)
        })
        .collect();
    let len = t0 + 20;
    let mut train_steps = BitVector::ones(len);
    let distractors: Vec<usize> = (10..9 + t0).collect();
    if distractors.len() > NPICK_TRAIN {
        for &t in &distractors {
            train_steps.set(t, false);
        }
        for k in rng.sample_distinct(distractors.len() as u64, NPICK_TRAIN) {
            train_steps.set(distractors[k as usize], true);
        }
    }
    Ok(MemoryTask {
        kind,
        t0,
        train: (0..n_train).collect(),
        test: (n_train..n_train + n_test).collect(),
        sequences,
        train_steps,
        test_steps: BitVector::ones(len),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_bit_shape() {
        let task = gen_5bit(200).unwrap();
        assert_eq!(task.sequences.len(), 32);
        assert_eq!(task.len(), 210);
        assert_eq!((task.in_channels(), task.out_channels()), (4, 3));
        let mut patterns: Vec<_> = task.sequences.iter().map(|s| s.pattern.clone()).collect();
        patterns.dedup();
        assert_eq!(patterns.len(), 32);
        assert_eq!(task.train, task.test);
        assert!(gen_5bit(0).is_err());
    }

    #[test]
    fn five_bit_layout() {
        let task = gen_5bit(7).unwrap();
        for (s, seq) in task.sequences.iter().enumerate() {
            for t in 0..task.len() {
                let x = task.input_at(s, t);
                let y = task.target_at(s, t);
                assert_eq!(x.count_ones(), 1, "step {t}");
                assert_eq!(y.count_ones(), 1, "step {t}");
                if t < 5 {
                    let bit = seq.pattern[t] == 1;
                    assert_eq!((x.get(0), x.get(1)), (bit, !bit));
                } else if t == 11 {
                    assert!(x.get(3));
                } else {
                    assert!(x.get(2));
                }
                if t <= 11 {
                    assert!(y.get(2));
                } else {
                    let bit = seq.pattern[t - 12] == 1;
                    assert_eq!((y.get(0), y.get(1)), (bit, !bit));
                }
            }
        }
    }

    #[test]
    fn twenty_bit_shape_and_mask() {
        let mut rng = SeededRng::new(1);
        let task = gen_20bit(200, 300, 100, &mut rng).unwrap();
        assert_eq!(task.len(), 220);
        assert_eq!((task.in_channels(), task.out_channels()), (6, 5));
        let mut pats: Vec<_> = task.sequences.iter().map(|s| s.pattern.clone()).collect();
        pats.sort();
        pats.dedup();
        assert_eq!(pats.len(), 400);
        assert!(task.train.iter().all(|i| !task.test.contains(i)));
        let non_distractor = (0..task.len()).filter(|&t| !task.is_distractor_step(t)).count();
        assert_eq!(non_distractor, 21);
        assert_eq!(task.train_steps.count_ones(), NPICK_TRAIN + non_distractor);
        assert_eq!(task.test_steps.count_ones(), task.len());
        for (s, seq) in task.sequences.iter().enumerate().take(5) {
            for t in 0..task.len() {
                assert_eq!(task.input_at(s, t).count_ones(), 1);
            }
            for k in 0..10 {
                assert!(task.target_at(s, task.cue_step() + 1 + k).get(seq.pattern[k] as usize));
            }
        }
        let copies = task.nearest_sampled_distractor();
        assert_eq!(copies.len(), 199 - NPICK_TRAIN);
        assert!(copies.iter().all(|&(t, s)| task.train_steps.get(s) && !task.train_steps.get(t)));
    }

    #[test]
    fn twenty_bit_rejects_oversampling() {
        let mut rng = SeededRng::new(1);
        assert!(gen_20bit(10, 1 << 20, 1, &mut rng).is_err());
    }
}
