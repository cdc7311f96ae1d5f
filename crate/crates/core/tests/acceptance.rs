//! End-to-end acceptance checks. Each test prints one PASS/FAIL line that
//! bypasses the test harness's output capture.

use std::io::Write;
use std::path::PathBuf;

use ca_reservoir::automata::{characteristic_matrix, evolve, step_elementary};
use ca_reservoir::harness::{
    load_mnist_idx, run_distortion_experiment, run_distributed_vs_local, run_hdc_demo, run_memory_experiment,
    run_metric_experiment, run_mnist_kernel_experiment, run_power_experiment, DistortionExperiment, FeatureMode,
    HdcDemoExperiment, MemoryExperiment, MetricExperiment, MnistKernelExperiment, PowerExperiment, RuleChoice,
    TaskKind,
};
use ca_reservoir::hdc::{bind_permute, bind_xor, symbolic_and, symbolic_or, symbolic_xor, Hypervector};
use ca_reservoir::reservoir::{covariance_features, expand_feedforward};
use ca_reservoir::{BitVector, KernelModel, MetricMode, Permutation, ReservoirConfig, RuleSpec, SeededRng};

const SEED: u64 = 7;

/// Prints the verdict line for one criterion and fails the test on any failed check.
fn verdict(id: &str, title: &str, checks: &[(String, bool)]) {
    let ok = checks.iter().all(|(_, pass)| *pass);
    let detail: Vec<String> = checks
        .iter()
        .map(|(what, pass)| format!("{what} [{}]", if *pass { "ok" } else { "FAILED" }))
        .collect();
    let line = format!("{} criterion {id}: {title}: {}\n", if ok { "PASS" } else { "FAIL" }, detail.join("; "));
    let _ = std::io::stdout().write_all(line.as_bytes());
    let _ = std::io::stdout().flush();
    assert!(ok, "{}", line.trim_end());
}

fn skip(id: &str, title: &str, why: &str) {
    let line = format!("SKIP criterion {id}: {title}: {why}\n");
    let _ = std::io::stdout().write_all(line.as_bytes());
}

fn percent_failed(rule: RuleChoice, t0: usize, i: usize, r: usize, trials: usize) -> f64 {
    run_memory_experiment(&MemoryExperiment::five_bit(rule, t0, i, r, trials, SEED))
        .unwrap()
        .percent_failed
}

#[test]
fn c01_five_bit_rule90_memorizes() {
    let p = percent_failed(RuleChoice::Elementary(90), 200, 16, 32, 25);
    verdict(
        "1",
        "5-bit rule 90 T0=200 I=16 R=32 25 trials",
        &[(format!("{p}% failed <= 4%"), p <= 4.0)],
    );
}

#[test]
fn c02_five_bit_rule_table() {
    let small = percent_failed(RuleChoice::Elementary(90), 200, 8, 8, 25);
    let r150 = percent_failed(RuleChoice::Elementary(150), 200, 16, 32, 25);
    let r22 = percent_failed(RuleChoice::Elementary(22), 200, 16, 32, 25);
    verdict(
        "2",
        "5-bit rule table",
        &[
            (format!("rule 90 I=8 R=8: {small}% failed >= 90%"), small >= 90.0),
            (format!("rule 150 I=16 R=32: {r150}% failed <= 4%"), r150 <= 4.0),
            (format!("rule 22 I=16 R=32: {r22}% failed <= 4%"), r22 <= 4.0),
        ],
    );
}

#[test]
fn c03_game_of_life_memorizes() {
    let p = percent_failed(RuleChoice::Life, 200, 32, 32, 25);
    verdict(
        "3",
        "5-bit Game of Life T0=200 I=32 R=32 25 trials",
        &[(format!("{p}% failed <= 4%"), p <= 4.0)],
    );
}

#[test]
#[ignore = "long-running"]
fn c03_game_of_life_long_distractor() {
    let p = percent_failed(RuleChoice::Life, 1000, 64, 64, 25);
    verdict(
        "3b",
        "5-bit Game of Life T0=1000 I=64 R=64 25 trials",
        &[(format!("{p}% failed <= 4%"), p <= 4.0)],
    );
}

#[test]
fn c04_distributed_beats_local() {
    let rep = run_distributed_vs_local(200, 8, &[32, 64], 25, SEED).unwrap();
    let (r32, r64) = (&rep.rows[0], &rep.rows[1]);
    verdict(
        "4",
        "distributed vs local, rule 90 T0=200 I=8",
        &[
            (format!("R=64 distributed {}% <= 4%", r64.distributed), r64.distributed <= 4.0),
            (format!("R=64 local {}% in [1,25]", r64.local), (1.0..=25.0).contains(&r64.local)),
            (
                format!("R=32 distributed {}% < local {}%", r32.distributed, r32.local),
                r32.distributed < r32.local,
            ),
        ],
    );
}

#[test]
#[ignore = "long-running"]
fn c05_twenty_bit_zero_error_reachable() {
    let mut tried = Vec::new();
    let mut found = None;
    'search: for i in [8, 16] {
        for r in [64, 128, 256, 448] {
            let exp = MemoryExperiment {
                task: TaskKind::TwentyBit,
                ..MemoryExperiment::five_bit(RuleChoice::Elementary(90), 200, i, r, 1, SEED)
            };
            let p = run_memory_experiment(&exp).unwrap().percent_failed;
            tried.push(format!("I={i} R={r}: {p}%"));
            if p == 0.0 {
                found = Some((i, r));
                break 'search;
            }
        }
    }
    verdict(
        "5",
        "20-bit T0=200 zero error for some I<=16, R<=448",
        &[(format!("{} -> {found:?}", tried.join(", ")), found.is_some())],
    );
}

#[test]
fn c06_metric_learning() {
    let corr = |nz: f64, r: usize| {
        run_metric_experiment(&MetricExperiment::new(400, nz, r, 8, MetricMode::Distance, SEED))
            .unwrap()
            .test_correlation
            .unwrap()
    };
    let base = corr(0.1, 40);
    let at_i = corr(0.1, 8);
    let (nz3, nz5) = (corr(0.3, 40), corr(0.5, 40));
    verdict(
        "6",
        "metric learning rule 90 N=400 I=8",
        &[
            (format!("Nz=0.1 R=40 held-out {base:.4} >= 0.9"), base >= 0.9),
            (format!("R=40 {base:.5} > R=8 {at_i:.5}"), base > at_i),
            (
                format!("Nz 0.1/0.3/0.5: {base:.4} > {nz3:.4} > {nz5:.4}"),
                base > nz3 && nz3 > nz5,
            ),
        ],
    );
}

/// Exact algebraic identities, checked on random vectors.
#[test]
fn c07_exact_algebra() {
    let mut rng = SeededRng::new(SEED);
    let mut checks = Vec::new();

    let n = 97;
    let mut additive = true;
    let mut matrix_agrees = true;
    for rule in [90u8, 150] {
        let m = characteristic_matrix(rule, n).unwrap();
        for _ in 0..200 {
            let a = BitVector::random_uniform(n, &mut rng);
            let b = BitVector::random_uniform(n, &mut rng);
            let lhs = step_elementary(&a.xor(&b).unwrap(), rule).unwrap();
            let rhs = step_elementary(&a, rule).unwrap().xor(&step_elementary(&b, rule).unwrap()).unwrap();
            additive &= lhs == rhs;
            matrix_agrees &= m.matvec(&a).unwrap() == step_elementary(&a, rule).unwrap();
        }
    }
    checks.push(("rule 90/150 additivity".to_string(), additive));
    checks.push(("characteristic matrix equals one step".to_string(), matrix_agrees));

    let mut cov = true;
    let spec = RuleSpec::elementary(90, 101).unwrap();
    for _ in 0..200 {
        let a0 = BitVector::random_uniform(101, &mut rng);
        let st = evolve(&a0, &spec, 8).unwrap();
        let a = |k: usize| st.states[k].clone();
        let c = covariance_features(&a0, 8).unwrap();
        let ck = |k: usize| c.slice((k - 1) * 101, 101);
        let x = |vs: &[usize]| vs.iter().skip(1).fold(a(vs[0]), |acc, &k| acc.xor(&a(k)).unwrap());
        cov &= ck(1) == a(1)
            && ck(2) == a(2)
            && ck(3) == x(&[3, 1])
            && ck(4) == a(4)
            && ck(5) == x(&[5, 3, 1])
            && ck(6) == x(&[6, 2])
            && ck(7) == x(&[7, 5, 1])
            && ck(8) == a(8);
    }
    checks.push(("C_k identities k=1..8 (C_6 = A_6^A_2)".to_string(), cov));

    let cfg = ReservoirConfig::new(RuleSpec::elementary(90, 64).unwrap(), 4, 6, SEED).unwrap();
    let mut boolean = true;
    for _ in 0..100 {
        let a0 = BitVector::random(64, 0.3, &mut rng).unwrap();
        let b0 = BitVector::random(64, 0.3, &mut rng).unwrap();
        let (ca, cb) = (
            Hypervector::from_ca(&a0, &cfg).unwrap(),
            Hypervector::from_ca(&b0, &cfg).unwrap(),
        );
        let full = |v: BitVector| expand_feedforward(&v, &cfg).unwrap().bits;
        boolean &= symbolic_or(&ca, &cb, &cfg).unwrap().bits == full(a0.or(&b0).unwrap())
            && symbolic_and(&ca, &cb, &cfg).unwrap().bits == full(a0.and(&b0).unwrap())
            && symbolic_xor(&ca, &cb).unwrap().bits == full(a0.xor(&b0).unwrap());
    }
    checks.push(("linear OR/AND/XOR match expansion of combined inputs".to_string(), boolean));

    let kcfg = ReservoirConfig::new(RuleSpec::elementary(90, 48).unwrap(), 5, 4, SEED).unwrap();
    let mut model = KernelModel::build(&kcfg, MetricMode::Dot).unwrap();
    model.coeffs = Some([0.7, -0.2, 0.4]);
    let supports: Vec<BitVector> = (0..12).map(|_| BitVector::random(48, 0.4, &mut rng).unwrap()).collect();
    let alpha: Vec<f64> = (0..12).map(|_| rng.normal()).collect();
    let labels: Vec<f64> = (0..12).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let q = model.precompute_q(&supports, &alpha, &labels).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let x = BitVector::random(48, 0.4, &mut rng).unwrap();
        let direct: f64 = supports
            .iter()
            .zip(&alpha)
            .zip(&labels)
            .map(|((s, a), l)| a * l * model.kernel_value(s, &x).unwrap())
            .sum();
        let fast = q.predict(&x).unwrap();
        worst = worst.max((direct - fast).abs() / direct.abs().max(1.0));
    }
    checks.push((format!("Q summation trick max rel. diff {worst:.2e} <= 1e-9"), worst <= 1e-9));

    let dim = 2048;
    let key = Hypervector::random(dim, &mut rng);
    let p = Permutation::random(dim, SEED, 0);
    let mut iso = true;
    for _ in 0..100 {
        let a = Hypervector::random(dim, &mut rng);
        let b = Hypervector::random(dim, &mut rng);
        let d = a.hamming(&b).unwrap();
        iso &= bind_xor(&a, &key).unwrap().hamming(&bind_xor(&b, &key).unwrap()).unwrap() == d
            && bind_permute(&a, &p).unwrap().hamming(&bind_permute(&b, &p).unwrap()).unwrap() == d;
    }
    checks.push(("XOR and permutation binding preserve Hamming distance".to_string(), iso));

    verdict("7", "exact algebra", &checks);
}

#[test]
fn c08_recurrent_zero_error_reachable() {
    let mut tried = Vec::new();
    let mut found = None;
    for r in [8, 16, 24, 32, 40, 48, 64, 96, 128, 192, 256, 384, 512] {
        let exp = MemoryExperiment::five_bit(RuleChoice::Elementary(30), 200, 32, r, 1, SEED).with_mode(FeatureMode::Recurrent);
        let p = run_memory_experiment(&exp).unwrap().percent_failed;
        tried.push(format!("R={r}: {p}%"));
        if p == 0.0 {
            found = Some(r);
            break;
        }
    }
    verdict(
        "8",
        "recurrent rule 30, 5-bit T0=200 I=32, zero error for some R<=512",
        &[(format!("{} -> {found:?}", tried.join(", ")), found.is_some())],
    );
}

#[test]
fn c09_power_trends() {
    let by_n = run_power_experiment(&PowerExperiment {
        n_list: vec![100, 200, 400],
        nz_list: vec![0.25],
        r: 8,
        i: 8,
        vectors: 100,
        seeds: 20,
        master_seed: SEED,
    })
    .unwrap();
    let by_nz = run_power_experiment(&PowerExperiment {
        n_list: vec![256],
        nz_list: vec![0.05, 0.1, 0.2, 0.4],
        r: 8,
        i: 8,
        vectors: 100,
        seeds: 20,
        master_seed: SEED,
    })
    .unwrap();
    let decreasing = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0] + 0.01);
    let n_vals: Vec<f64> = by_n.rows.iter().map(|r| r.mean_correlation.unwrap()).collect();
    let nz_vals: Vec<f64> = by_nz.rows.iter().map(|r| r.mean_correlation.unwrap()).collect();
    verdict(
        "9",
        "mean pairwise feature correlation, slack 0.01",
        &[
            (format!("N 100/200/400: {n_vals:.4?} decreasing"), decreasing(&n_vals)),
            (format!("Nz 0.05/0.1/0.2/0.4: {nz_vals:.4?} decreasing"), decreasing(&nz_vals)),
        ],
    );
}

#[test]
fn c10_distortion_curve() {
    let rep = run_distortion_experiment(&DistortionExperiment {
        n: 400,
        r: 8,
        i: 8,
        flip_percents: vec![0.0, 1.0, 2.0, 4.0, 8.0, 16.0],
        seeds: 50,
        density: 0.5,
        master_seed: SEED,
    })
    .unwrap();
    let ratios: Vec<f64> = rep.rows.iter().map(|r| r.ratio).collect();
    let monotone = ratios.windows(2).all(|w| w[1] <= w[0] + 0.02);
    verdict(
        "10",
        "distortion ratio over 0/1/2/4/8/16% flips",
        &[
            (format!("ratio at 0% = {}", ratios[0]), ratios[0] == 1.0),
            (format!("{ratios:.4?} non-increasing, slack 0.02"), monotone),
            (format!("4% {:.4} > 16% {:.4}", ratios[3], ratios[5]), ratios[3] > ratios[5]),
        ],
    );
}

#[test]
fn c11_hdc_monte_carlo() {
    let rep = run_hdc_demo(&HdcDemoExperiment {
        dim: 10_000,
        runs: 100,
        distractors: 99,
        master_seed: SEED,
    })
    .unwrap();
    verdict(
        "11",
        "hyperdimensional inference D=10000, 100 runs",
        &[
            (format!("grandmother rule {}% >= 95%", rep.grandmother_percent), rep.grandmother_percent >= 95.0),
            (format!("analogy {}% >= 90%", rep.analogy_percent), rep.analogy_percent >= 90.0),
        ],
    );
}

fn mnist_files() -> Option<(PathBuf, PathBuf)> {
    let dir = std::env::var_os("MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"));
    let pick = |names: &[&str]| names.iter().map(|n| dir.join(n)).find(|p| p.is_file());
    Some((
        pick(&["train-images-idx3-ubyte", "train-images.idx3-ubyte"])?,
        pick(&["train-labels-idx1-ubyte", "train-labels.idx1-ubyte"])?,
    ))
}

#[test]
fn c12_mnist_kernel() {
    let title = "MNIST 200/200 dot kernel R=128 I=8";
    let Some((images, labels)) = mnist_files() else {
        skip("12", title, "MNIST IDX files not found (set MNIST_DIR)");
        return;
    };
    let data = load_mnist_idx(&images, &labels, 128).unwrap();
    let rep = run_mnist_kernel_experiment(&data, &MnistKernelExperiment::new(SEED)).unwrap();
    let corr = rep.test_dot_correlation.unwrap_or(f64::NAN);
    verdict(
        "12",
        title,
        &[
            (format!("held-out dot correlation {corr:.4} >= 0.85"), corr >= 0.85),
            (
                format!("CA kernel {:.1}% within 5 points of linear {:.1}%", rep.ca_accuracy, rep.linear_accuracy),
                (rep.ca_accuracy - rep.linear_accuracy).abs() <= 5.0,
            ),
        ],
    );
}
