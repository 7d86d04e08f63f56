use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use snn_stdp::mnist::{self, serialize_idx_images, serialize_idx_labels, IdxImages, Split};
use snn_stdp::{checkpoint, StdpKernel, StdpRule, Topology, WeightInit, WeightStore};
use snn_stdp_cli::{cmd_compare_rules, cmd_eval, cmd_trace, cmd_train, RunConfig};

/// Digits 0 and 1 drawn as a ring and a vertical bar, with a per-image shift.
fn write_synthetic_mnist(dir: &Path, count: usize) {
    let mut pixels = Vec::with_capacity(count * 784);
    let mut labels = Vec::with_capacity(count);
    for k in 0..count {
        let label = (k % 2) as u8;
        let shift = (k / 2 % 3) as i32 - 1;
        for r in 0..28i32 {
            for c in 0..28i32 {
                let (y, x) = (r - 14, c - 14 - shift);
                let on = match label {
                    0 => (30..=70).contains(&(x * x + y * y)),
                    _ => x.abs() <= 1 && y.abs() <= 9,
                };
                pixels.push(if on { 255 } else { 0 });
            }
        }
        labels.push(label);
    }
    let images = IdxImages { count, rows: 28, cols: 28, pixels };
    for (img, lbl) in [(mnist::TRAIN_IMAGES, mnist::TRAIN_LABELS), (mnist::TEST_IMAGES, mnist::TEST_LABELS)] {
        fs::write(dir.join(img), serialize_idx_images(&images)).unwrap();
        fs::write(dir.join(lbl), serialize_idx_labels(&labels)).unwrap();
    }
}

struct Fixture {
    _tmp: tempfile::TempDir,
    config: RunConfig,
}

fn fixture() -> Fixture {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    fs::create_dir(&data).unwrap();
    write_synthetic_mnist(&data, 24);
    let config = RunConfig {
        data_dir: data,
        out: tmp.path().join("runs"),
        hidden: 20,
        epochs: 2,
        train_cap: 0,
        test_cap: 12,
        t0: 100.0,
        ..RunConfig::default()
    };
    Fixture { _tmp: tmp, config }
}

fn entries(dir: &Path) -> Vec<PathBuf> {
    match fs::read_dir(dir) {
        Ok(rd) => rd.map(|e| e.unwrap().path()).collect(),
        Err(_) => Vec::new(),
    }
}

#[test]
fn train_writes_config_metrics_and_weights() {
    let f = fixture();
    let run = cmd_train(&f.config).unwrap();
    let metrics = fs::read_to_string(run.join("metrics.csv")).unwrap();
    let lines: Vec<&str> = metrics.lines().collect();
    assert_eq!(lines[0], "epoch,train_error,test_error,mean_output_spikes");
    assert_eq!(lines.len(), 3);
    assert!(fs::read_to_string(run.join("timing.csv")).unwrap().starts_with("epoch,seconds\n"));
    let echoed = RunConfig::load(&run.join("config.toml")).unwrap();
    assert_eq!(echoed, f.config);
    let ck = checkpoint::load(&run.join("weights.txt")).unwrap();
    assert_eq!(ck.topology.sizes(), [784, 20, 10]);
    assert!(run.file_name().unwrap().to_str().unwrap().ends_with("-seed1"));
}

#[test]
fn rerunning_the_echoed_config_reproduces_metrics() {
    let f = fixture();
    let first = cmd_train(&f.config).unwrap();
    let echoed = RunConfig::load(&first.join("config.toml")).unwrap();
    let second = cmd_train(&echoed).unwrap();
    assert_ne!(first, second);
    for name in ["metrics.csv", "weights.txt", "config.toml"] {
        assert_eq!(fs::read(first.join(name)).unwrap(), fs::read(second.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn eval_reproduces_final_train_error_and_leaves_checkpoint_alone() {
    let f = fixture();
    let run = cmd_train(&f.config).unwrap();
    let weights = run.join("weights.txt");
    let before = fs::read(&weights).unwrap();
    let (_, eval) = cmd_eval(&f.config, &weights, Split::Train).unwrap();
    assert_eq!(fs::read(&weights).unwrap(), before);
    let metrics = fs::read_to_string(run.join("metrics.csv")).unwrap();
    let last: f64 = metrics.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(eval.error_rate, last);
}

#[test]
fn eval_rejects_bad_checkpoints() {
    let f = fixture();
    let dir = f.config.out.parent().unwrap().to_path_buf();
    let rule = StdpRule::windowed(StdpKernel::Sinusoidal { tau_w: 40.0 }, 100.0);

    let small = Topology::new(5, 3, 10).unwrap();
    let path = dir.join("small.txt");
    checkpoint::save(&path, &small, &rule, &WeightStore::random(&small, &WeightInit::default(), 1)).unwrap();
    assert!(cmd_eval(&f.config, &path, Split::Test).is_err());

    let full = f.config.topology().unwrap();
    let text = checkpoint::to_string(&full, &rule, &WeightStore::random(&full, &WeightInit::default(), 1)).unwrap();
    let cut = dir.join("cut.txt");
    fs::write(&cut, &text[..text.len() / 2]).unwrap();
    assert!(cmd_eval(&f.config, &cut, Split::Test).is_err());
    assert!(entries(&f.config.out).is_empty());
}

#[test]
fn trace_writes_both_step_sizes() {
    let f = fixture();
    let run = cmd_train(&f.config).unwrap();
    let (dir, summary) = cmd_trace(&f.config, &run.join("weights.txt"), 1, Split::Test, false).unwrap();
    for name in ["trace-dt1.csv", "trace-dt0.01.csv"] {
        let text = fs::read_to_string(dir.join(name)).unwrap();
        assert!(text.starts_with("time_ms,neuron_id,layer,V_mV,P\n"));
    }
    assert_eq!(fs::read_to_string(dir.join("trace-dt1.csv")).unwrap().lines().count(), 1 + 100 * 10);
    assert_eq!(fs::read_to_string(dir.join("trace-dt0.01.csv")).unwrap().lines().count(), 1 + 10_000 * 10);
    let spikes = fs::read_to_string(dir.join("spikes-dt1.csv")).unwrap();
    assert!(spikes.starts_with("time_ms,neuron_id\n"));
    assert_eq!(spikes.lines().count() - 1, summary.counts_coarse.iter().sum::<usize>());
    assert_eq!(summary.counts_coarse.len(), 10);
}

#[test]
fn blank_input_gives_flat_traces_at_rest() {
    let f = fixture();
    let topology = f.config.topology().unwrap();
    let rule = f.config.stdp_rule();
    let path = f.config.out.parent().unwrap().join("random.txt");
    checkpoint::save(&path, &topology, &rule, &WeightStore::random(&topology, &WeightInit::uniform(0.05), 2)).unwrap();
    let (dir, summary) = cmd_trace(&f.config, &path, 0, Split::Test, true).unwrap();
    assert!(summary.counts_coarse.iter().chain(&summary.counts_fine).all(|&c| c == 0));
    let mut rdr = csv::Reader::from_path(dir.join("trace-dt1.csv")).unwrap();
    for row in rdr.records() {
        let row = row.unwrap();
        let v: f64 = row[3].parse().unwrap();
        let p: f64 = row[4].parse().unwrap();
        assert!((v - f.config.e_l).abs() < 1e-9 && p == 0.0, "{row:?}");
    }
}

#[test]
fn trace_rejects_out_of_range_sample() {
    let f = fixture();
    let topology = f.config.topology().unwrap();
    let path = f.config.out.parent().unwrap().join("w.txt");
    checkpoint::save(&path, &topology, &f.config.stdp_rule(), &WeightStore::zeros(&topology)).unwrap();
    let err = cmd_trace(&f.config, &path, 12, Split::Test, false).unwrap_err();
    assert!(format!("{err:#}").contains("out of range"));
}

#[test]
fn missing_data_leaves_no_outputs() {
    let f = fixture();
    fs::remove_file(f.config.data_dir.join(mnist::TRAIN_IMAGES)).unwrap();
    assert!(cmd_train(&f.config).is_err());
    assert!(entries(&f.config.out).is_empty());
}

#[test]
fn compare_rules_with_zero_rate_is_flat_and_identical() {
    let f = fixture();
    let cfg = RunConfig { alpha: 0.0, ..f.config.clone() };
    let (dir, cmp) = cmd_compare_rules(&cfg).unwrap();
    let a = fs::read(dir.join("windowed/metrics.csv")).unwrap();
    let b = fs::read(dir.join("allpairs/metrics.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(cmp.windowed.train_error, cmp.all_pairs.train_error);
    let summary = fs::read_to_string(dir.join("summary.csv")).unwrap();
    assert!(summary.starts_with("rule,final_train_error,final_test_error,final_mean_output_spikes\nwindowed,"));
}

#[test]
fn binary_exit_codes() {
    let f = fixture();
    let bin = env!("CARGO_BIN_EXE_snn-stdp");
    let out = Command::new(bin).args(["train", "--rule", "bogus"]).output().unwrap();
    assert!(!out.status.success());

    let out = Command::new(bin)
        .args(["train", "--epochs", "1", "--train-cap", "6", "--test-cap", "4", "--classes", "0,1"])
        .arg("--out")
        .arg(&f.config.out)
        .env("SNN_STDP_DATA", f.config.data_dir.join("missing"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));

    let cfg = f.config.out.parent().unwrap().join("run.toml");
    fs::write(&cfg, format!("hidden = 8\nt0 = 50.0\ndata_dir = {:?}\n", f.config.data_dir)).unwrap();
    let out = Command::new(bin)
        .args(["train", "--epochs", "1", "--train-cap", "6", "--test-cap", "4", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&f.config.out)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = PathBuf::from(String::from_utf8(out.stdout).unwrap().trim());
    let echoed = RunConfig::load(&run.join("config.toml")).unwrap();
    assert_eq!((echoed.hidden, echoed.epochs, echoed.train_cap), (8, 1, 6));
}
