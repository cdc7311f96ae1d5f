//! Cross-module behaviour: expansion feeding the readout, reports written to
//! disk and read back, serialized artifacts surviving a round trip.

use ca_reservoir::harness::report::{parse_opt, Table};
use ca_reservoir::harness::{
    gen_5bit, load_mnist_idx, mnist, run_memory_experiment, run_metric_experiment, run_mnist_kernel_experiment,
    run_power_experiment, write_report, FeatureMode, MemoryExperiment, MetricExperiment, MnistKernelExperiment,
    PowerExperiment, RuleChoice, Tabular,
};
use ca_reservoir::hdc::{cleanup, Conceptor};
use ca_reservoir::linalg::Matrix;
use ca_reservoir::reservoir::expand_feedforward;
use ca_reservoir::{
    BitVector, Hypervector, KernelModel, LinearReadout, MetricMode, ReservoirConfig, RuleSpec, SeededRng,
    SpaceTimeFeature,
};

#[test]
fn readout_memorizes_expanded_patterns() {
    let task = gen_5bit(30).unwrap();
    let n_in = task.sequences[0].input.len();
    let cfg = ReservoirConfig::new(RuleSpec::elementary(110, n_in).unwrap(), 4, 4, 3).unwrap();
    let x: Vec<BitVector> = task
        .sequences
        .iter()
        .map(|s| expand_feedforward(&s.input, &cfg).unwrap().bits)
        .collect();
    let y = Matrix::from_rows(&task.sequences.iter().map(|s| s.target.to_f64()).collect::<Vec<_>>()).unwrap();
    let readout = LinearReadout::fit(&x, &y, 1e-8).unwrap();
    for (f, s) in x.iter().zip(&task.sequences) {
        assert_eq!(readout.predict_binary(f).unwrap(), s.target);
    }
}

#[test]
fn memory_report_csv_round_trips() {
    let exp = MemoryExperiment::five_bit(RuleChoice::Elementary(150), 15, 4, 4, 3, 11);
    let rep = run_memory_experiment(&exp).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    write_report(&rep, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("rule,t0,I,R,trials,percent_failed\n"));
    let table = Table::read_csv(text.as_bytes()).unwrap();
    assert_eq!(table, rep.table());
    let pf: f64 = table.column("percent_failed").unwrap()[0].parse().unwrap();
    assert_eq!(pf.to_bits(), rep.percent_failed.to_bits());
}

#[test]
fn metric_and_power_values_survive_csv() {
    let rep = run_metric_experiment(&MetricExperiment::new(64, 0.2, 6, 4, MetricMode::Dot, 5)).unwrap();
    let mut buf = Vec::new();
    rep.table().write_csv(&mut buf).unwrap();
    let t = Table::read_csv(buf.as_slice()).unwrap();
    assert_eq!(parse_opt(t.column("test_corr").unwrap()[0]).unwrap(), rep.test_correlation);

    let pw = run_power_experiment(&PowerExperiment {
        n_list: vec![50],
        nz_list: vec![0.0, 0.3],
        r: 2,
        i: 3,
        vectors: 10,
        seeds: 2,
        master_seed: 1,
    })
    .unwrap();
    let mut buf = Vec::new();
    pw.table().write_csv(&mut buf).unwrap();
    let t = Table::read_csv(buf.as_slice()).unwrap();
    let back: Vec<Option<f64>> = t.column("mean_correlation").unwrap().iter().map(|s| parse_opt(s).unwrap()).collect();
    assert_eq!(back, pw.rows.iter().map(|r| r.mean_correlation).collect::<Vec<_>>());
    assert_eq!(back[0], None);
}

#[test]
fn json_report_echoes_config_and_seed() {
    let exp = MemoryExperiment::five_bit(RuleChoice::Life, 5, 2, 2, 1, 99).with_mode(FeatureMode::Feedforward);
    let rep = run_memory_experiment(&exp).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    write_report(&rep, &path).unwrap();
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["config"]["master_seed"], 99);
    assert_eq!(v["config"]["rule"], "life");
    assert_eq!(v["trials"].as_array().unwrap().len(), 1);
}

#[test]
fn experiments_repeat_bit_exactly() {
    let exp = MetricExperiment::new(80, 0.15, 8, 4, MetricMode::Distance, 21);
    let a = run_metric_experiment(&exp).unwrap();
    let b = run_metric_experiment(&exp).unwrap();
    assert_eq!(a.coeffs.map(|c| c.map(f64::to_bits)), b.coeffs.map(|c| c.map(f64::to_bits)));
    assert_eq!(a.test_correlation.map(f64::to_bits), b.test_correlation.map(f64::to_bits));
}

#[test]
fn feature_and_model_blobs_round_trip() {
    let mut rng = SeededRng::new(8);
    let cfg = ReservoirConfig::new(RuleSpec::elementary(90, 40).unwrap(), 3, 5, 2).unwrap();
    let x = BitVector::random(40, 0.3, &mut rng).unwrap();
    let f = expand_feedforward(&x, &cfg).unwrap();
    assert_eq!(SpaceTimeFeature::from_bytes(&f.to_bytes()).unwrap(), f);

    let mut model = KernelModel::build(&cfg, MetricMode::Distance).unwrap();
    model.coeffs = Some([1.5, -0.25, 0.125]);
    assert_eq!(KernelModel::from_bytes(&model.to_bytes()).unwrap(), model);

    let hv = Hypervector::from_ca(&x, &cfg).unwrap();
    assert_eq!(Hypervector::from_bytes(&hv.to_bytes()).unwrap(), hv);

    let c = Conceptor::build(&[&f.bits, &f.bits], 3, &mut rng).unwrap();
    assert_eq!(Conceptor::from_bytes(&c.to_bytes()).unwrap(), c);
}

#[test]
fn cleanup_recovers_noisy_atom() {
    let mut rng = SeededRng::new(12);
    let atoms: Vec<BitVector> = (0..20).map(|_| BitVector::random_uniform(4000, &mut rng)).collect();
    let mut noisy = atoms[13].clone();
    for pos in rng.sample_distinct(4000, 1200) {
        noisy.flip(pos as usize);
    }
    let refs: Vec<&BitVector> = atoms.iter().collect();
    assert_eq!(cleanup(&refs, &noisy).unwrap().index, 13);
}

#[test]
fn mnist_pipeline_on_synthetic_digits() {
    // two blob-shaped classes on a 12x12 canvas, jittered per instance
    let mut rng = SeededRng::new(4);
    let (rows, cols) = (12usize, 12usize);
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for k in 0..60 {
        let class = (k % 2) as u8;
        let (cr, cc) = if class == 0 { (3, 3) } else { (8, 8) };
        let img: Vec<u8> = (0..rows * cols)
            .map(|p| {
                let (r, c) = ((p / cols) as i64, (p % cols) as i64);
                let near = (r - cr).abs() <= 2 && (c - cc).abs() <= 2;
                let noise = rng.bernoulli(0.08);
                if near ^ noise { 200 } else { 10 }
            })
            .collect();
        images.push(img);
        labels.push(class);
    }
    let dir = tempfile::tempdir().unwrap();
    let (ip, lp) = (dir.path().join("img"), dir.path().join("lab"));
    std::fs::write(&ip, mnist::encode_idx_images(&images, rows, cols)).unwrap();
    std::fs::write(&lp, mnist::encode_idx_labels(&labels)).unwrap();
    let data = load_mnist_idx(&ip, &lp, 128).unwrap();
    assert_eq!(data.len(), 60);
    let exp = MnistKernelExperiment {
        r: 6,
        i: 4,
        n_train: 30,
        n_test: 30,
        ridge: 1e-3,
        master_seed: 2,
    };
    let rep = run_mnist_kernel_experiment(&data, &exp).unwrap();
    assert!(rep.linear_accuracy >= 90.0, "{rep:?}");
    assert!(rep.ca_accuracy >= 90.0, "{rep:?}");
    assert!(rep.test_dot_correlation.unwrap() > 0.5, "{rep:?}");
}
