//! `careservoir`: runs the memory, metric, power, distortion, MNIST kernel
//! and hyperdimensional experiments and writes CSV or JSON reports.

mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use ca_reservoir::harness::{
    load_mnist_idx, mnist::DEFAULT_THRESHOLD, run_distortion_experiment, run_distributed_vs_local,
    run_hdc_demo, run_memory_experiment, run_metric_experiment, run_mnist_kernel_experiment,
    run_power_experiment, write_report, DistortionExperiment, FeatureMode, HdcDemoExperiment,
    MemoryExperiment, MetricExperiment, MnistKernelExperiment, PowerExperiment, RuleChoice,
    TaskKind, Tabular, DEFAULT_MEMORY_CAP,
};
use ca_reservoir::readout::DEFAULT_LAMBDA;
use ca_reservoir::MetricMode;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use config::Merge;

#[derive(Parser, Debug)]
#[command(name = "careservoir", version, about = "Cellular-automata reservoir experiments")]
struct Cli {
    /// Master seed; every random draw derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Report path: `.json` writes the full report, anything else CSV.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON file with default values for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// 5-bit or 20-bit memory task: percent of failed trials.
    Memtask(MemtaskArgs),
    /// Automaton features against local covariance features (rule 90).
    Distlocal(DistlocalArgs),
    /// Learned three-coefficient feature metric, held-out correlation.
    Metric(MetricArgs),
    /// Mean pairwise feature correlation over vector sizes and densities.
    Power(PowerArgs),
    /// Feature correlation after flipping a fraction of input bits.
    Distort(DistortArgs),
    /// Linear-complexity kernel on binarized MNIST images.
    MnistKernel(MnistArgs),
    /// Rule inference and analogy on random hypervectors.
    HdcDemo(HdcArgs),
}

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct MemtaskArgs {
    /// 5bit or 20bit.
    #[arg(long)]
    task: Option<TaskKind>,
    /// Elementary rule number or `life`.
    #[arg(long)]
    rule: Option<RuleChoice>,
    /// Distractor period.
    #[arg(long)]
    t0: Option<usize>,
    /// Automaton steps per permutation (I).
    #[arg(long)]
    iters: Option<usize>,
    /// Number of random permutations (R).
    #[arg(long)]
    perms: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// feedforward, covariance or recurrent.
    #[arg(long)]
    mode: Option<FeatureMode>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    /// Ridge parameter of the readout.
    #[arg(long)]
    lambda: Option<f64>,
    /// Byte cap for feature storage and solver workspace.
    #[arg(long)]
    memory_cap: Option<u64>,
    /// Append the raw input to flattened features.
    #[arg(long)]
    raw_input: Option<bool>,
}
impl_merge!(MemtaskArgs { task, rule, t0, iters, perms, trials, mode, n_train, n_test, lambda, memory_cap, raw_input });

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct DistlocalArgs {
    #[arg(long)]
    t0: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    /// Comma-separated permutation counts.
    #[arg(long, value_delimiter = ',')]
    perms: Option<Vec<usize>>,
    #[arg(long)]
    trials: Option<usize>,
}
impl_merge!(DistlocalArgs { t0, iters, perms, trials });

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct MetricArgs {
    /// Input vector length.
    #[arg(long)]
    n: Option<usize>,
    /// Fraction of nonzero input bits.
    #[arg(long)]
    nz: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    perms: Option<usize>,
    /// distance or dot.
    #[arg(long)]
    mode: Option<MetricMode>,
    #[arg(long)]
    vectors: Option<usize>,
    #[arg(long)]
    train_fraction: Option<f64>,
}
impl_merge!(MetricArgs { n, nz, iters, perms, mode, vectors, train_fraction });

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct PowerArgs {
    /// Comma-separated vector lengths.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Comma-separated nonzero fractions.
    #[arg(long, value_delimiter = ',')]
    nz: Option<Vec<f64>>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    perms: Option<usize>,
    #[arg(long)]
    vectors: Option<usize>,
    /// Independent repetitions averaged per cell.
    #[arg(long)]
    seeds: Option<usize>,
}
impl_merge!(PowerArgs { n, nz, iters, perms, vectors, seeds });

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct DistortArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    perms: Option<usize>,
    /// Comma-separated flip percentages.
    #[arg(long, value_delimiter = ',')]
    flips: Option<Vec<f64>>,
    #[arg(long)]
    seeds: Option<usize>,
    /// Density of the random initial vector.
    #[arg(long)]
    density: Option<f64>,
}
impl_merge!(DistortArgs { n, iters, perms, flips, seeds, density });

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct MnistArgs {
    /// IDX images file.
    #[arg(long)]
    images: Option<PathBuf>,
    /// IDX labels file.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Pixels at or above this value become 1.
    #[arg(long)]
    threshold: Option<u8>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    perms: Option<usize>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    /// Kernel ridge parameter relative to the mean kernel diagonal.
    #[arg(long)]
    ridge: Option<f64>,
}
impl_merge!(MnistArgs { images, labels, threshold, iters, perms, n_train, n_test, ridge });

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct HdcArgs {
    /// Hypervector dimension.
    #[arg(long)]
    dim: Option<usize>,
    /// Monte Carlo runs per scenario.
    #[arg(long)]
    runs: Option<usize>,
    /// Distractor atoms in the cleanup memory.
    #[arg(long)]
    distractors: Option<usize>,
}
impl_merge!(HdcArgs { dim, runs, distractors });

enum Failure {
    Usage(String),
    Run(String),
}

impl From<ca_reservoir::Error> for Failure {
    fn from(e: ca_reservoir::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

fn resolve<T: Merge>(cli: &Cli, mut args: T) -> Result<(u64, Option<PathBuf>, T), Failure> {
    let mut seed = cli.seed;
    let mut out = cli.out.clone();
    if let Some(path) = &cli.config {
        let (common, file) = config::load::<T>(path).map_err(|e| Failure::Usage(e.0))?;
        args.merge(file);
        seed = seed.or(common.seed);
        out = out.or(common.out);
    }
    Ok((seed.unwrap_or(0), out, args))
}

fn emit<T: Serialize + Tabular>(report: &T, summary: String, out: Option<PathBuf>) -> Result<(), Failure> {
    println!("{summary}");
    if let Some(path) = out {
        write_report(report, &path)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Memtask(a) => {
            let (seed, out, a) = resolve(&cli, a.clone())?;
            let exp = MemoryExperiment {
                task: a.task.unwrap_or(TaskKind::FiveBit),
                t0: a.t0.unwrap_or(200),
                rule: a.rule.unwrap_or(RuleChoice::Elementary(90)),
                r: a.perms.unwrap_or(32),
                i: a.iters.unwrap_or(16),
                mode: a.mode.unwrap_or(FeatureMode::Feedforward),
                trials: a.trials.unwrap_or(25),
                master_seed: seed,
                n_train: a.n_train.unwrap_or(300),
                n_test: a.n_test.unwrap_or(100),
                lambda: a.lambda.unwrap_or(DEFAULT_LAMBDA),
                memory_cap: a.memory_cap.unwrap_or(DEFAULT_MEMORY_CAP),
                include_raw_input: a.raw_input.unwrap_or(true),
            };
            let rep = run_memory_experiment(&exp)?;
            let summary = format!(
                "memtask {} rule={} t0={} I={} R={} trials={}: {}% failed",
                exp.task.label(),
                exp.rule,
                exp.t0,
                exp.i,
                exp.r,
                exp.trials,
                rep.percent_failed
            );
            emit(&rep, summary, out)
        }
        Command::Distlocal(a) => {
            let (seed, out, a) = resolve(&cli, a.clone())?;
            let perms = a.perms.unwrap_or_else(|| vec![32, 64]);
            let rep = run_distributed_vs_local(a.t0.unwrap_or(200), a.iters.unwrap_or(8), &perms, a.trials.unwrap_or(25), seed)?;
            let rows: Vec<String> = rep
                .rows
                .iter()
                .map(|r| format!("R={}: distributed {}% local {}%", r.r, r.distributed, r.local))
                .collect();
            emit(&rep, format!("distlocal {}", rows.join("; ")), out)
        }
        Command::Metric(a) => {
            let (seed, out, a) = resolve(&cli, a.clone())?;
            let mut exp = MetricExperiment::new(
                a.n.unwrap_or(400),
                a.nz.unwrap_or(0.1),
                a.perms.unwrap_or(40),
                a.iters.unwrap_or(8),
                a.mode.unwrap_or(MetricMode::Distance),
                seed,
            );
            exp.vectors = a.vectors.unwrap_or(exp.vectors);
            exp.train_fraction = a.train_fraction.unwrap_or(exp.train_fraction);
            let rep = run_metric_experiment(&exp)?;
            let corr = rep.test_correlation.map_or("undefined".to_string(), |c| format!("{c:.6}"));
            emit(&rep, format!("metric n={} nz={} I={} R={}: held-out correlation {corr}", exp.n, exp.nz, exp.i, exp.r), out)
        }
        Command::Power(a) => {
            let (seed, out, a) = resolve(&cli, a.clone())?;
            let exp = PowerExperiment {
                n_list: a.n.unwrap_or_else(|| vec![100, 200, 400]),
                nz_list: a.nz.unwrap_or_else(|| vec![0.05, 0.1, 0.2, 0.4]),
                r: a.perms.unwrap_or(8),
                i: a.iters.unwrap_or(8),
                vectors: a.vectors.unwrap_or(100),
                seeds: a.seeds.unwrap_or(20),
                master_seed: seed,
            };
            let rep = run_power_experiment(&exp)?;
            emit(&rep, format!("power: {} cells", rep.rows.len()), out)
        }
        Command::Distort(a) => {
            let (seed, out, a) = resolve(&cli, a.clone())?;
            let exp = DistortionExperiment {
                n: a.n.unwrap_or(400),
                r: a.perms.unwrap_or(8),
                i: a.iters.unwrap_or(8),
                flip_percents: a.flips.unwrap_or_else(|| vec![0.0, 1.0, 2.0, 4.0, 8.0, 16.0]),
                seeds: a.seeds.unwrap_or(50),
                density: a.density.unwrap_or(0.5),
                master_seed: seed,
            };
            let rep = run_distortion_experiment(&exp)?;
            let rows: Vec<String> = rep.rows.iter().map(|r| format!("{}%:{:.4}", r.percent, r.ratio)).collect();
            emit(&rep, format!("distort ratios {}", rows.join(" ")), out)
        }
        Command::MnistKernel(a) => {
            let (seed, out, a) = resolve(&cli, a.clone())?;
            let (Some(images), Some(labels)) = (a.images.as_ref(), a.labels.as_ref()) else {
                return Err(Failure::Usage("mnist-kernel needs --images and --labels".into()));
            };
            let data = load_mnist_idx(images, labels, a.threshold.unwrap_or(DEFAULT_THRESHOLD))?;
            let mut exp = MnistKernelExperiment::new(seed);
            exp.r = a.perms.unwrap_or(exp.r);
            exp.i = a.iters.unwrap_or(exp.i);
            exp.n_train = a.n_train.unwrap_or(exp.n_train);
            exp.n_test = a.n_test.unwrap_or(exp.n_test);
            exp.ridge = a.ridge.unwrap_or(exp.ridge);
            let rep = run_mnist_kernel_experiment(&data, &exp)?;
            let corr = rep.test_dot_correlation.map_or("undefined".to_string(), |c| format!("{c:.4}"));
            let summary = format!(
                "mnist-kernel: dot correlation {corr}, CA kernel {:.1}%, linear kernel {:.1}%",
                rep.ca_accuracy, rep.linear_accuracy
            );
            emit(&rep, summary, out)
        }
        Command::HdcDemo(a) => {
            let (seed, out, a) = resolve(&cli, a.clone())?;
            let exp = HdcDemoExperiment {
                dim: a.dim.unwrap_or(10_000),
                runs: a.runs.unwrap_or(100),
                distractors: a.distractors.unwrap_or(99),
                master_seed: seed,
            };
            let rep = run_hdc_demo(&exp)?;
            let summary = format!(
                "hdc-demo D={}: grandmother {}% (nested {}%), analogy {}%",
                exp.dim, rep.grandmother_percent, rep.grandmother_nested_percent, rep.analogy_percent
            );
            emit(&rep, summary, out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
