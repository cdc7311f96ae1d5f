//! Experiment drivers. Every driver is a deterministic function of its
//! configuration and master seed.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::automata::RuleSpec;
use crate::bitcore::{derive_seed, BitVector, SeededRng};
use crate::error::{param, Error, Result};
use crate::hdc::{analogy_demo, infer_grandmother_demo, RuleBundling};
use crate::kernel::{accuracy, kernel_classify, KernelModel, MetricMode};
use crate::linalg::{pearson, Matrix};
use crate::readout::{score_task, LinearReadout, TrialResult, DEFAULT_LAMBDA};
use crate::reservoir::{
    expand_covariance, expand_feedforward, recurrent_init, recurrent_step, ReservoirConfig,
};

use super::report::{fmt_f64, fmt_opt, Table, Tabular};
use super::tasks::{gen_20bit, gen_5bit, MemoryTask, TaskKind};

/// Default byte cap for feature matrices and solver workspace.
pub const DEFAULT_MEMORY_CAP: u64 = 4 << 30;

/// Automaton family; geometry is derived from the input size.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleChoice {
    Elementary(u8),
    Life,
}

impl RuleChoice {
    /// Geometry holding at least `cells` cells.
    pub fn spec_for(self, cells: usize) -> Result<RuleSpec> {
        match self {
            RuleChoice::Elementary(rule) => RuleSpec::elementary(rule, cells.max(3)),
            RuleChoice::Life => RuleSpec::game_of_life_square(cells),
        }
    }
}

impl std::fmt::Display for RuleChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RuleChoice::Elementary(r) => write!(f, "{r}"),
            RuleChoice::Life => f.write_str("life"),
        }
    }
}

impl std::str::FromStr for RuleChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "life" | "gol" | "game-of-life" => Ok(RuleChoice::Life),
            other => other
                .parse::<u8>()
                .map(RuleChoice::Elementary)
                .map_err(|_| param("rule", format!("{s:?} is neither 0..=255 nor \"life\""))),
        }
    }
}

impl Serialize for RuleChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            RuleChoice::Elementary(r) => s.serialize_u8(*r),
            RuleChoice::Life => s.serialize_str("life"),
        }
    }
}

impl<'de> Deserialize<'de> for RuleChoice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(u8),
            Name(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(r) => Ok(RuleChoice::Elementary(r)),
            Repr::Name(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// How sequences become features.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// Whole flattened sequence expanded by the automaton.
    Feedforward,
    /// Whole flattened sequence expanded into local covariance blocks.
    Covariance,
    /// One step at a time with normalized-addition insertion.
    Recurrent,
}

impl std::str::FromStr for FeatureMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "feedforward" => Ok(FeatureMode::Feedforward),
            "covariance" => Ok(FeatureMode::Covariance),
            "recurrent" => Ok(FeatureMode::Recurrent),
            _ => Err(param("mode", format!("{s:?} is not feedforward, covariance or recurrent"))),
        }
    }
}

/// Memory-task experiment parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryExperiment {
    pub task: TaskKind,
    pub t0: usize,
    pub rule: RuleChoice,
    pub r: usize,
    pub i: usize,
    pub mode: FeatureMode,
    pub trials: usize,
    pub master_seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub lambda: f64,
    pub memory_cap: u64,
    /// Append the raw input to flattened features.
    #[serde(default = "default_true")]
    pub include_raw_input: bool,
}

fn default_true() -> bool {
    true
}

impl MemoryExperiment {
    pub fn five_bit(rule: RuleChoice, t0: usize, i: usize, r: usize, trials: usize, master_seed: u64) -> Self {
        Self {
            task: TaskKind::FiveBit,
            t0,
            rule,
            r,
            i,
            mode: FeatureMode::Feedforward,
            trials,
            master_seed,
            n_train: 300,
            n_test: 100,
            lambda: DEFAULT_LAMBDA,
            memory_cap: DEFAULT_MEMORY_CAP,
            include_raw_input: true,
        }
    }

    pub fn with_mode(mut self, mode: FeatureMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn build_task(&self) -> Result<MemoryTask> {
        match self.task {
            TaskKind::FiveBit => gen_5bit(self.t0),
            TaskKind::TwentyBit => {
                let mut rng = SeededRng::new(derive_seed(self.master_seed, "task"));
                gen_20bit(self.t0, self.n_train, self.n_test, &mut rng)
            }
        }
    }

    /// Seed of trial `k`.
    pub fn trial_seed(&self, k: usize) -> u64 {
        SeededRng::child_seed(derive_seed(self.master_seed, "memory trials"), k as u64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub success: bool,
    pub bit_errors: usize,
    pub evaluated_bits: usize,
    pub jitter: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MemoryReport {
    pub config: MemoryExperiment,
    pub percent_failed: f64,
    pub failed: usize,
    pub trials: Vec<TrialRecord>,
    pub wall_clock_secs: f64,
}

impl Tabular for MemoryReport {
    fn table(&self) -> Table {
        Table::new(
            &["rule", "t0", "I", "R", "trials", "percent_failed"],
            vec![vec![
                self.config.rule.to_string(),
                self.config.t0.to_string(),
                self.config.i.to_string(),
                self.config.r.to_string(),
                self.config.trials.to_string(),
                fmt_f64(self.percent_failed),
            ]],
        )
    }
}

fn check_budget(features: usize, feature_bits: usize, solve_dim: usize, cap: u64) -> Result<()> {
    let required = features as u64 * feature_bits.div_ceil(8) as u64 + 3 * 8 * (solve_dim as u64).pow(2);
    if required > cap {
        return Err(Error::MemoryBudget { required, cap });
    }
    Ok(())
}

fn pad(x: &BitVector, cells: usize) -> BitVector {
    if x.len() == cells {
        x.clone()
    } else {
        BitVector::concat([x, &BitVector::zeros(cells - x.len())])
    }
}

fn targets_matrix(rows: &[&BitVector]) -> Result<Matrix> {
    Matrix::from_rows(&rows.iter().map(|b| b.to_f64()).collect::<Vec<_>>())
}

fn flattened_trial(task: &MemoryTask, exp: &MemoryExperiment, seed: u64) -> Result<(TrialResult, f64)> {
    let n_in = task.sequences[0].input.len();
    let spec = exp.rule.spec_for(n_in)?;
    let cfg = ReservoirConfig::new(spec, exp.r, exp.i, seed)?.with_raw_input(exp.include_raw_input);
    let cells = cfg.cells();
    let used: Vec<usize> = {
        let mut u = task.train.clone();
        u.extend(task.test.iter().filter(|i| !task.train.contains(i)));
        u
    };
    check_budget(used.len(), cfg.feature_len(), task.train.len().min(cfg.feature_len()), exp.memory_cap)?;
    let features: Vec<(usize, BitVector)> = used
        .par_iter()
        .map(|&s| {
            let x = pad(&task.sequences[s].input, cells);
            let f = match exp.mode {
                FeatureMode::Covariance => expand_covariance(&x, &cfg)?,
                _ => expand_feedforward(&x, &cfg)?,
            };
            Ok((s, f.bits))
        })
        .collect::<Result<_>>()?;
    let feature_of = |s: usize| &features.iter().find(|(k, _)| *k == s).expect("expanded").1;
    let x_train: Vec<BitVector> = task.train.iter().map(|&s| feature_of(s).clone()).collect();
    let y_train = targets_matrix(&task.train.iter().map(|&s| &task.sequences[s].target).collect::<Vec<_>>())?;
    let mut readout = LinearReadout::fit(&x_train, &y_train, exp.lambda)?;
    let co = task.out_channels();
    for (t, src) in task.nearest_sampled_distractor() {
        for c in 0..co {
            readout.copy_target(src * co + c, t * co + c);
        }
    }
    let preds = task
        .test
        .iter()
        .map(|&s| readout.predict_binary(feature_of(s)))
        .collect::<Result<Vec<_>>>()?;
    let targets: Vec<BitVector> = task.test.iter().map(|&s| task.sequences[s].target.clone()).collect();
    let mask = task.target_mask(&task.test_steps);
    Ok((score_task(&preds, &targets, Some(&mask))?, readout.jitter_used))
}

/// Per-step recurrent features of one sequence.
fn recurrent_features(task: &MemoryTask, seq: usize, cfg: &ReservoirConfig) -> Result<Vec<BitVector>> {
    let cells = cfg.cells();
    let len = task.len();
    let tie_seed = cfg.tie_seed();
    let mut state = recurrent_init(&pad(&task.input_at(seq, 0), cells), cfg)?;
    let mut out = Vec::with_capacity(len);
    for t in 0..len {
        let next = (t + 1 < len).then(|| pad(&task.input_at(seq, t + 1), cells));
        let mut rng = SeededRng::stream(tie_seed, t as u64);
        let (s, f) = recurrent_step(&state, next.as_ref(), cfg, &mut rng)?;
        state = s;
        out.push(f);
    }
    Ok(out)
}

fn recurrent_trial(task: &MemoryTask, exp: &MemoryExperiment, seed: u64) -> Result<(TrialResult, f64)> {
    let spec = exp.rule.spec_for(task.in_channels())?;
    let cfg = ReservoirConfig::new(spec, exp.r, exp.i, seed)?;
    let d = cfg.recurrent_feature_len();
    let samples = task.train.len() * task.train_steps.count_ones();
    let all_steps = (task.train.len() + task.test.len()) * task.len();
    check_budget(all_steps, d, samples.min(d), exp.memory_cap)?;
    let mut used = task.train.clone();
    used.extend(task.test.iter().filter(|i| !task.train.contains(i)));
    let feats: Vec<(usize, Vec<BitVector>)> = used
        .par_iter()
        .map(|&s| Ok((s, recurrent_features(task, s, &cfg)?)))
        .collect::<Result<_>>()?;
    let feats_of = |s: usize| &feats.iter().find(|(k, _)| *k == s).expect("expanded").1;
    let mut x = Vec::with_capacity(samples);
    let mut y = Vec::with_capacity(samples);
    for &s in &task.train {
        for t in task.train_steps.ones_iter() {
            x.push(feats_of(s)[t].clone());
            y.push(task.target_at(s, t));
        }
    }
    let readout = LinearReadout::fit(&x, &targets_matrix(&y.iter().collect::<Vec<_>>())?, exp.lambda)?;
    let mut preds = Vec::new();
    let mut targets = Vec::new();
    for &s in &task.test {
        for t in task.test_steps.ones_iter() {
            preds.push(readout.predict_binary(&feats_of(s)[t])?);
            targets.push(task.target_at(s, t));
        }
    }
    Ok((score_task(&preds, &targets, None)?, readout.jitter_used))
}

/// Percent of trials with any wrong output bit.
pub fn run_memory_experiment(exp: &MemoryExperiment) -> Result<MemoryReport> {
    if exp.trials == 0 {
        return Err(param("trials", "at least one trial is needed"));
    }
    let start = Instant::now();
    let task = exp.build_task()?;
    let mut trials = Vec::with_capacity(exp.trials);
    for k in 0..exp.trials {
        let seed = exp.trial_seed(k);
        let (res, jitter) = match exp.mode {
            FeatureMode::Recurrent => recurrent_trial(&task, exp, seed)?,
            _ => flattened_trial(&task, exp, seed)?,
        };
        log::info!(
            "trial {k}: {} ({} wrong of {} bits)",
            if res.success { "ok" } else { "failed" },
            res.bit_errors,
            res.evaluated_bits
        );
        trials.push(TrialRecord {
            trial: k,
            seed,
            success: res.success,
            bit_errors: res.bit_errors,
            evaluated_bits: res.evaluated_bits,
            jitter,
        });
    }
    let failed = trials.iter().filter(|t| !t.success).count();
    Ok(MemoryReport {
        config: exp.clone(),
        percent_failed: 100.0 * failed as f64 / exp.trials as f64,
        failed,
        trials,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistLocalRow {
    pub r: usize,
    pub distributed: f64,
    pub local: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistLocalReport {
    pub rule: u8,
    pub t0: usize,
    pub i: usize,
    pub trials: usize,
    pub master_seed: u64,
    pub rows: Vec<DistLocalRow>,
    pub wall_clock_secs: f64,
}

impl Tabular for DistLocalReport {
    fn table(&self) -> Table {
        Table::new(
            &["rule", "t0", "I", "R", "trials", "distributed_percent_failed", "local_percent_failed"],
            self.rows
                .iter()
                .map(|r| {
                    vec![
                        self.rule.to_string(),
                        self.t0.to_string(),
                        self.i.to_string(),
                        r.r.to_string(),
                        self.trials.to_string(),
                        fmt_f64(r.distributed),
                        fmt_f64(r.local),
                    ]
                })
                .collect(),
        )
    }
}

/// 5-bit task with automaton states versus local covariance blocks (rule 90).
pub fn run_distributed_vs_local(t0: usize, i: usize, r_list: &[usize], trials: usize, master_seed: u64) -> Result<DistLocalReport> {
    let start = Instant::now();
    let mut rows = Vec::new();
    for &r in r_list {
        let base = MemoryExperiment::five_bit(RuleChoice::Elementary(90), t0, i, r, trials, master_seed);
        let distributed = run_memory_experiment(&base)?.percent_failed;
        let local = run_memory_experiment(&base.clone().with_mode(FeatureMode::Covariance))?.percent_failed;
        rows.push(DistLocalRow { r, distributed, local });
    }
    Ok(DistLocalReport {
        rule: 90,
        t0,
        i,
        trials,
        master_seed,
        rows,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricExperiment {
    pub n: usize,
    pub nz: f64,
    pub r: usize,
    pub i: usize,
    pub mode: MetricMode,
    pub vectors: usize,
    pub train_fraction: f64,
    pub master_seed: u64,
}

impl MetricExperiment {
    pub fn new(n: usize, nz: f64, r: usize, i: usize, mode: MetricMode, master_seed: u64) -> Self {
        Self {
            n,
            nz,
            r,
            i,
            mode,
            vectors: 100,
            train_fraction: 0.8,
            master_seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricReport {
    pub config: MetricExperiment,
    pub coeffs: Option<[f64; 3]>,
    pub train_correlation: Option<f64>,
    pub test_correlation: Option<f64>,
    pub collinear: bool,
    pub train_pairs: usize,
    pub test_pairs: usize,
    pub wall_clock_secs: f64,
}

impl Tabular for MetricReport {
    fn table(&self) -> Table {
        let c = &self.config;
        let k = self.coeffs.unwrap_or([f64::NAN; 3]);
        Table::new(
            &["n", "nz", "I", "R", "mode", "train_corr", "test_corr", "k1", "k2", "k3"],
            vec![vec![
                c.n.to_string(),
                fmt_f64(c.nz),
                c.i.to_string(),
                c.r.to_string(),
                format!("{:?}", c.mode).to_lowercase(),
                fmt_opt(self.train_correlation),
                fmt_opt(self.test_correlation),
                fmt_f64(k[0]),
                fmt_f64(k[1]),
                fmt_f64(k[2]),
            ]],
        )
    }
}

/// Fits the three-coefficient metric on random pairs (rule 90) and reports the
/// held-out Pearson correlation with the exact feature-space metric.
pub fn run_metric_experiment(exp: &MetricExperiment) -> Result<MetricReport> {
    let start = Instant::now();
    if exp.vectors < 3 {
        return Err(param("vectors", "need at least 3 vectors"));
    }
    let cfg = ReservoirConfig::new(RuleSpec::elementary(90, exp.n)?, exp.r, exp.i, derive_seed(exp.master_seed, "metric reservoir"))?
        .with_raw_input(false);
    let mut rng = SeededRng::new(derive_seed(exp.master_seed, "metric vectors"));
    let vectors = (0..exp.vectors)
        .map(|_| BitVector::random(exp.n, exp.nz, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let mut pairs: Vec<(usize, usize)> = (0..exp.vectors).flat_map(|a| (a + 1..exp.vectors).map(move |b| (a, b))).collect();
    SeededRng::new(derive_seed(exp.master_seed, "metric split")).shuffle(&mut pairs);
    let n_train = ((pairs.len() as f64) * exp.train_fraction).round() as usize;
    let report = |coeffs, train, test, collinear| MetricReport {
        config: exp.clone(),
        coeffs,
        train_correlation: train,
        test_correlation: test,
        collinear,
        train_pairs: n_train,
        test_pairs: pairs.len() - n_train,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    if exp.nz <= 0.0 || exp.nz >= 1.0 {
        // every vector identical: the correlation is undefined
        return Ok(report(None, None, None, false));
    }
    let features: Vec<BitVector> = vectors
        .par_iter()
        .map(|v| Ok(expand_feedforward(v, &cfg)?.bits))
        .collect::<Result<_>>()?;
    let truth = |a: usize, b: usize| -> Result<f64> {
        Ok(match exp.mode {
            MetricMode::Distance => features[a].hamming(&features[b])?,
            MetricMode::Dot => features[a].dot(&features[b])?,
        } as f64)
    };
    let mut model = KernelModel::build(&cfg, exp.mode)?;
    let train_pairs: Vec<(BitVector, BitVector)> = pairs[..n_train]
        .iter()
        .map(|&(a, b)| (vectors[a].clone(), vectors[b].clone()))
        .collect();
    let train_targets = pairs[..n_train].iter().map(|&(a, b)| truth(a, b)).collect::<Result<Vec<_>>>()?;
    let fit = model.fit(&train_pairs, &train_targets)?;
    let mut est = Vec::new();
    let mut tru = Vec::new();
    for &(a, b) in &pairs[n_train..] {
        est.push(model.estimate(&vectors[a], &vectors[b])?);
        tru.push(truth(a, b)?);
    }
    Ok(report(Some(fit.coeffs), fit.train_correlation, pearson(&est, &tru), fit.collinear))
}

/// Pearson correlation of two 0/1 vectors from popcounts.
pub fn binary_pearson(a: &BitVector, b: &BitVector) -> Result<Option<f64>> {
    let n = a.len() as f64;
    let (ca, cb, cab) = (a.count_ones() as f64, b.count_ones() as f64, a.dot(b)? as f64);
    let cov = cab / n - (ca / n) * (cb / n);
    let va = (ca / n) * (1.0 - ca / n);
    let vb = (cb / n) * (1.0 - cb / n);
    if va <= 0.0 || vb <= 0.0 {
        return Ok(None);
    }
    Ok(Some(cov / (va * vb).sqrt()))
}

/// Mean Pearson correlation over all pairs with defined correlation.
pub fn mean_pairwise_correlation(features: &[BitVector]) -> Result<Option<f64>> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for a in 0..features.len() {
        for b in a + 1..features.len() {
            if let Some(c) = binary_pearson(&features[a], &features[b])? {
                sum += c;
                count += 1;
            }
        }
    }
    Ok((count > 0).then(|| sum / count as f64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerExperiment {
    pub n_list: Vec<usize>,
    pub nz_list: Vec<f64>,
    pub r: usize,
    pub i: usize,
    pub vectors: usize,
    pub seeds: usize,
    pub master_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PowerRow {
    pub n: usize,
    pub nz: f64,
    pub mean_correlation: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PowerReport {
    pub config: PowerExperiment,
    pub rows: Vec<PowerRow>,
    pub wall_clock_secs: f64,
}

impl PowerReport {
    pub fn value(&self, n: usize, nz: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.n == n && r.nz == nz)
            .and_then(|r| r.mean_correlation)
    }
}

impl Tabular for PowerReport {
    fn table(&self) -> Table {
        let c = &self.config;
        Table::new(
            &["n", "nz", "I", "R", "vectors", "seeds", "mean_correlation"],
            self.rows
                .iter()
                .map(|r| {
                    vec![
                        r.n.to_string(),
                        fmt_f64(r.nz),
                        c.i.to_string(),
                        c.r.to_string(),
                        c.vectors.to_string(),
                        c.seeds.to_string(),
                        fmt_opt(r.mean_correlation),
                    ]
                })
                .collect(),
        )
    }
}

/// Mean pairwise correlation of rule-90 features of random vectors, averaged
/// over seeds, for each `(N, Nz)` cell.
pub fn run_power_experiment(exp: &PowerExperiment) -> Result<PowerReport> {
    let start = Instant::now();
    let mut rows = Vec::new();
    for &n in &exp.n_list {
        for &nz in &exp.nz_list {
            let per_seed: Vec<Option<f64>> = (0..exp.seeds)
                .into_par_iter()
                .map(|k| {
                    let seed = SeededRng::child_seed(derive_seed(exp.master_seed, "power"), k as u64);
                    let cfg = ReservoirConfig::new(RuleSpec::elementary(90, n)?, exp.r, exp.i, seed)?.with_raw_input(false);
                    let mut rng = SeededRng::stream(seed, 1);
                    let feats = (0..exp.vectors)
                        .map(|_| Ok(expand_feedforward(&BitVector::random(n, nz, &mut rng)?, &cfg)?.bits))
                        .collect::<Result<Vec<_>>>()?;
                    mean_pairwise_correlation(&feats)
                })
                .collect::<Result<_>>()?;
            let defined: Vec<f64> = per_seed.into_iter().flatten().collect();
            let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
            rows.push(PowerRow {
                n,
                nz,
                mean_correlation: mean,
            });
        }
    }
    Ok(PowerReport {
        config: exp.clone(),
        rows,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionExperiment {
    pub n: usize,
    pub r: usize,
    pub i: usize,
    pub flip_percents: Vec<f64>,
    pub seeds: usize,
    pub density: f64,
    pub master_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistortionRow {
    pub percent: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistortionReport {
    pub config: DistortionExperiment,
    pub rows: Vec<DistortionRow>,
    pub wall_clock_secs: f64,
}

impl DistortionReport {
    pub fn ratio(&self, percent: f64) -> Option<f64> {
        self.rows.iter().find(|r| r.percent == percent).map(|r| r.ratio)
    }
}

impl Tabular for DistortionReport {
    fn table(&self) -> Table {
        let c = &self.config;
        Table::new(
            &["n", "I", "R", "seeds", "flip_percent", "correlation_ratio"],
            self.rows
                .iter()
                .map(|r| {
                    vec![
                        c.n.to_string(),
                        c.i.to_string(),
                        c.r.to_string(),
                        c.seeds.to_string(),
                        fmt_f64(r.percent),
                        fmt_f64(r.ratio),
                    ]
                })
                .collect(),
        )
    }
}

/// Flips a fraction of a random initial vector's bits and reports the feature
/// correlation relative to the unflipped baseline, averaged over seeds.
pub fn run_distortion_experiment(exp: &DistortionExperiment) -> Result<DistortionReport> {
    let start = Instant::now();
    let per_seed: Vec<Vec<f64>> = (0..exp.seeds)
        .into_par_iter()
        .map(|k| {
            let seed = SeededRng::child_seed(derive_seed(exp.master_seed, "distortion"), k as u64);
            let cfg = ReservoirConfig::new(RuleSpec::elementary(90, exp.n)?, exp.r, exp.i, seed)?;
            let mut rng = SeededRng::stream(seed, 1);
            let a0 = BitVector::random(exp.n, exp.density, &mut rng)?;
            let f0 = expand_feedforward(&a0, &cfg)?.bits;
            let base = binary_pearson(&f0, &f0)?.ok_or_else(|| Error::State("constant baseline feature".into()))?;
            exp.flip_percents
                .iter()
                .map(|&pct| {
                    let flips = ((pct / 100.0) * exp.n as f64).round() as usize;
                    let mut a = a0.clone();
                    for pos in rng.sample_distinct(exp.n as u64, flips.min(exp.n)) {
                        a.flip(pos as usize);
                    }
                    let f = expand_feedforward(&a, &cfg)?.bits;
                    Ok(binary_pearson(&f0, &f)?.unwrap_or(0.0) / base)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let rows = exp
        .flip_percents
        .iter()
        .enumerate()
        .map(|(j, &percent)| DistortionRow {
            percent,
            ratio: per_seed.iter().map(|v| v[j]).sum::<f64>() / exp.seeds as f64,
        })
        .collect();
    Ok(DistortionReport {
        config: exp.clone(),
        rows,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MnistKernelExperiment {
    pub r: usize,
    pub i: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub ridge: f64,
    pub master_seed: u64,
}

impl MnistKernelExperiment {
    pub fn new(master_seed: u64) -> Self {
        Self {
            r: 128,
            i: 8,
            n_train: 200,
            n_test: 200,
            ridge: 1e-3,
            master_seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MnistKernelReport {
    pub config: MnistKernelExperiment,
    pub coeffs: [f64; 3],
    pub train_dot_correlation: Option<f64>,
    pub test_dot_correlation: Option<f64>,
    pub ca_accuracy: f64,
    pub linear_accuracy: f64,
    pub wall_clock_secs: f64,
}

impl Tabular for MnistKernelReport {
    fn table(&self) -> Table {
        Table::new(
            &["R", "I", "n_train", "n_test", "test_dot_corr", "ca_accuracy", "linear_accuracy"],
            vec![vec![
                self.config.r.to_string(),
                self.config.i.to_string(),
                self.config.n_train.to_string(),
                self.config.n_test.to_string(),
                fmt_opt(self.test_dot_correlation),
                fmt_f64(self.ca_accuracy),
                fmt_f64(self.linear_accuracy),
            ]],
        )
    }
}

/// Fits the dot-product kernel on training pairs, checks it on test pairs,
/// and compares kernel ridge accuracy against the plain linear kernel.
pub fn run_mnist_kernel_experiment(data: &[(BitVector, u8)], exp: &MnistKernelExperiment) -> Result<MnistKernelReport> {
    let start = Instant::now();
    let need = exp.n_train + exp.n_test;
    if data.len() < need {
        return Err(param("dataset", format!("needs {need} instances, got {}", data.len())));
    }
    let n = data[0].0.len();
    let cfg = ReservoirConfig::new(RuleSpec::elementary(90, n)?, exp.r, exp.i, derive_seed(exp.master_seed, "mnist reservoir"))?
        .with_raw_input(false);
    let train = &data[..exp.n_train];
    let test = &data[exp.n_train..need];
    let feats = |set: &[(BitVector, u8)]| -> Result<Vec<BitVector>> {
        set.par_iter().map(|(x, _)| Ok(expand_feedforward(x, &cfg)?.bits)).collect()
    };
    let (ftrain, ftest) = (feats(train)?, feats(test)?);
    let pairs_of = |m: usize| (0..m).flat_map(move |a| (a + 1..m).map(move |b| (a, b))).collect::<Vec<_>>();
    let mut model = KernelModel::build(&cfg, MetricMode::Dot)?;
    let train_pairs: Vec<(BitVector, BitVector)> = pairs_of(train.len())
        .iter()
        .map(|&(a, b)| (train[a].0.clone(), train[b].0.clone()))
        .collect();
    let train_targets = pairs_of(train.len())
        .iter()
        .map(|&(a, b)| Ok(ftrain[a].dot(&ftrain[b])? as f64))
        .collect::<Result<Vec<_>>>()?;
    let fit = model.fit(&train_pairs, &train_targets)?;
    let mut est = Vec::new();
    let mut tru = Vec::new();
    for (a, b) in pairs_of(test.len()) {
        est.push(model.kernel_value(&test[a].0, &test[b].0)?);
        tru.push(ftest[a].dot(&ftest[b])? as f64);
    }
    let labelled: Vec<(BitVector, usize)> = train.iter().map(|(x, l)| (x.clone(), *l as usize)).collect();
    let queries: Vec<BitVector> = test.iter().map(|(x, _)| x.clone()).collect();
    let truth: Vec<usize> = test.iter().map(|(_, l)| *l as usize).collect();
    let ca = kernel_classify(&labelled, &queries, &model, exp.ridge)?;
    let linear = KernelModel::identity(n, Some([1.0, 0.0, 0.0]), MetricMode::Dot);
    let lin = kernel_classify(&labelled, &queries, &linear, exp.ridge)?;
    Ok(MnistKernelReport {
        config: exp.clone(),
        coeffs: fit.coeffs,
        train_dot_correlation: fit.train_correlation,
        test_dot_correlation: pearson(&est, &tru),
        ca_accuracy: 100.0 * accuracy(&ca.labels, &truth),
        linear_accuracy: 100.0 * accuracy(&lin.labels, &truth),
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HdcDemoExperiment {
    pub dim: usize,
    pub runs: usize,
    pub distractors: usize,
    pub master_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HdcDemoReport {
    pub config: HdcDemoExperiment,
    /// Success rate (percent) of the grandmother rule with flat bundling.
    pub grandmother_percent: f64,
    /// Same with nested two-term bundles, for comparison.
    pub grandmother_nested_percent: f64,
    pub analogy_percent: f64,
    pub wall_clock_secs: f64,
}

impl Tabular for HdcDemoReport {
    fn table(&self) -> Table {
        Table::new(
            &["dim", "runs", "distractors", "grandmother_percent", "grandmother_nested_percent", "analogy_percent"],
            vec![vec![
                self.config.dim.to_string(),
                self.config.runs.to_string(),
                self.config.distractors.to_string(),
                fmt_f64(self.grandmother_percent),
                fmt_f64(self.grandmother_nested_percent),
                fmt_f64(self.analogy_percent),
            ]],
        )
    }
}

/// Monte Carlo success rates of rule inference and analogy on random atoms.
pub fn run_hdc_demo(exp: &HdcDemoExperiment) -> Result<HdcDemoReport> {
    let start = Instant::now();
    let rate = |domain: &str, f: &dyn Fn(&mut SeededRng) -> Result<bool>| -> Result<f64> {
        let base = derive_seed(exp.master_seed, domain);
        let mut ok = 0usize;
        for k in 0..exp.runs {
            if f(&mut SeededRng::stream(base, k as u64))? {
                ok += 1;
            }
        }
        Ok(100.0 * ok as f64 / exp.runs.max(1) as f64)
    };
    let flat = rate("grandmother", &|rng| infer_grandmother_demo(exp.dim, exp.distractors, RuleBundling::Flat, rng))?;
    let nested = rate("grandmother", &|rng| infer_grandmother_demo(exp.dim, exp.distractors, RuleBundling::Nested, rng))?;
    let analogy = rate("analogy", &|rng| analogy_demo(exp.dim, rng))?;
    Ok(HdcDemoReport {
        config: exp.clone(),
        grandmother_percent: flat,
        grandmother_nested_percent: nested,
        analogy_percent: analogy,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}
