//! The four commands. Each returns the directory holding its outputs.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::Serialize;
use snn_stdp::checkpoint::{self, Checkpoint};
use snn_stdp::dynamics::{self, PhaseKind, Stimulus};
use snn_stdp::mnist::{load_split, Dataset, Split};
use snn_stdp::trainer::{self, Evaluation, Model};
use snn_stdp::{EpochMetrics, Layer, NetworkParams, PairingRule, StdpRule, Topology, WeightStore};

use crate::config::{cap, RunConfig};
use crate::rundir::RunDir;

/// The fine step used as the reference by `trace`, ms.
pub const FINE_DT: f64 = 0.01;

#[derive(Serialize)]
struct MetricsRow {
    epoch: usize,
    train_error: f64,
    test_error: Option<f64>,
    mean_output_spikes: f64,
}

#[derive(Serialize)]
struct TimingRow {
    epoch: usize,
    seconds: f64,
}

fn load(cfg: &RunConfig, split: Split) -> Result<Dataset> {
    let (name, n) = match split {
        Split::Train => ("training", cfg.train_cap),
        Split::Test => ("test", cfg.test_cap),
    };
    let filter = cfg.class_filter();
    load_split(&cfg.data_dir, split, filter.as_deref(), cap(n), cfg.data_seed).with_context(|| {
        format!("loading {name} images from {} (set --data-dir or {})", cfg.data_dir.display(), crate::config::DATA_ENV)
    })
}

fn write_config(dir: &RunDir, cfg: &RunConfig) -> Result<()> {
    fs::write(dir.file("config.toml"), cfg.to_toml())?;
    Ok(())
}

/// Write `rows` under `header`. The header is written even with no rows.
fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Train from `weights` and write metrics, timings and checkpoints into `dir`.
fn train_into(
    dir: &Path,
    cfg: &RunConfig,
    rule: StdpRule,
    weights: &mut WeightStore,
    train: &Dataset,
    test: &Dataset,
) -> Result<Vec<EpochMetrics>> {
    let params = cfg.network();
    let topology = cfg.topology()?;
    let model = Model { params: &params, topology: &topology };
    let mut config = cfg.train_config();
    config.rule = rule;

    let mut metrics = csv::Writer::from_path(dir.join("metrics.csv"))?;
    let mut timing = csv::Writer::from_path(dir.join("timing.csv"))?;
    let history = trainer::train_epochs(weights, model, train, Some(test), &config, |m, w| {
        let io = |e: csv::Error| snn_stdp::Error::Io(e.into());
        metrics
            .serialize(MetricsRow {
                epoch: m.epoch,
                train_error: m.train_error,
                test_error: m.test_error,
                mean_output_spikes: m.mean_output_spikes,
            })
            .map_err(io)?;
        metrics.flush()?;
        timing.serialize(TimingRow { epoch: m.epoch, seconds: m.seconds }).map_err(io)?;
        timing.flush()?;
        eprintln!(
            "epoch {:>3}  train {:.4}  test {:.4}  out spikes {:.1}  {:.1}s",
            m.epoch,
            m.train_error,
            m.test_error.unwrap_or(f64::NAN),
            m.mean_output_spikes,
            m.seconds
        );
        if cfg.checkpoint_every > 0 && m.epoch % cfg.checkpoint_every == 0 {
            checkpoint::save(&dir.join(format!("weights-epoch{:03}.txt", m.epoch)), &topology, &rule, w)?;
        }
        Ok(())
    })?;
    checkpoint::save(&dir.join("weights.txt"), &topology, &rule, weights)?;
    Ok(history)
}

/// Train with the configured rule.
pub fn cmd_train(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let train = load(cfg, Split::Train)?;
    let test = load(cfg, Split::Test)?;
    let run = RunDir::create(&cfg.out, "train", cfg.seed)?;
    write_config(&run, cfg)?;
    let mut weights = WeightStore::random(&cfg.topology()?, &cfg.weight_init(), cfg.seed);
    train_into(run.path(), cfg, cfg.stdp_rule(), &mut weights, &train, &test)?;
    run.commit()
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let ck = checkpoint::load(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
    let expected = RunConfig::default().topology()?;
    for layer in [Layer::Input, Layer::Output] {
        if ck.topology.size(layer) != expected.size(layer) {
            bail!(
                "checkpoint {} has {} {layer} neurons, the data needs {}",
                path.display(),
                ck.topology.size(layer),
                expected.size(layer)
            );
        }
    }
    Ok(ck)
}

#[derive(Serialize)]
struct EvalRow<'a> {
    split: &'a str,
    samples: usize,
    error_rate: f64,
    mean_output_spikes: f64,
}

fn split_name(split: Split) -> &'static str {
    match split {
        Split::Train => "train",
        Split::Test => "test",
    }
}

/// Inference-only error of a saved network. The checkpoint is only read.
pub fn cmd_eval(cfg: &RunConfig, checkpoint: &Path, split: Split) -> Result<(PathBuf, Evaluation)> {
    cfg.validate()?;
    let ck = load_checkpoint(checkpoint)?;
    let data = load(cfg, split)?;
    let params = cfg.network();
    let model = Model { params: &params, topology: &ck.topology };
    let eval = trainer::evaluate(&ck.weights, model, &data.samples, cfg.t0)?;
    let run = RunDir::create(&cfg.out, "eval", cfg.seed)?;
    write_config(&run, cfg)?;
    write_csv(
        &run.file("eval.csv"),
        &["split", "samples", "error_rate", "mean_output_spikes"],
        [EvalRow {
            split: split_name(split),
            samples: data.len(),
            error_rate: eval.error_rate,
            mean_output_spikes: eval.mean_output_spikes,
        }],
    )?;
    println!("{} error {:.4} over {} samples", split_name(split), eval.error_rate, data.len());
    Ok((run.commit()?, eval))
}

#[derive(Serialize)]
struct TraceRow {
    time_ms: f64,
    neuron_id: usize,
    layer: Layer,
    #[serde(rename = "V_mV")]
    v_mv: f64,
    #[serde(rename = "P")]
    p: f64,
}

#[derive(Serialize)]
struct SpikeRow {
    time_ms: f64,
    neuron_id: usize,
}

#[derive(Serialize)]
struct CountRow {
    neuron_id: usize,
    count_coarse: usize,
    count_fine: usize,
    abs_diff: usize,
}

/// Step-index times without accumulated rounding noise.
fn stamp(k: i64, dt: f64) -> f64 {
    (k as f64 * dt * 1e9).round() / 1e9
}

/// Output-layer spike counts from one inference phase, plus the trace rows.
fn trace_inference(
    weights: &WeightStore,
    params: &NetworkParams,
    topology: &Topology,
    input: &[f64],
    t0: f64,
) -> Result<(Vec<TraceRow>, Vec<SpikeRow>, Vec<usize>)> {
    let out = topology.range(Layer::Output);
    let mut rows = Vec::new();
    let mut observer = |k: i64, state: &dynamics::NeuronState| {
        for (j, i) in out.clone().enumerate() {
            rows.push(TraceRow {
                time_ms: stamp(k, params.dt),
                neuron_id: j,
                layer: Layer::Output,
                v_mv: state.v[i],
                p: state.p[i],
            });
        }
    };
    let mut state = dynamics::init_state(topology, params);
    let record = dynamics::run_phase(
        &mut state,
        weights,
        params,
        topology,
        &Stimulus::inference(input),
        PhaseKind::Inference,
        t0,
        Some(&mut observer),
    )?;
    let mut spikes: Vec<SpikeRow> = out
        .clone()
        .enumerate()
        .flat_map(|(j, i)| record.steps(i).iter().map(move |&k| (k, j)))
        .map(|(k, j)| SpikeRow { time_ms: stamp(k, params.dt), neuron_id: j })
        .collect();
    spikes.sort_by(|a, b| a.time_ms.total_cmp(&b.time_ms).then(a.neuron_id.cmp(&b.neuron_id)));
    let counts = dynamics::output_counts(&record, topology, PhaseKind::Inference);
    Ok((rows, spikes, counts))
}

fn dt_tag(dt: f64) -> String {
    format!("dt{dt}")
}

/// Outcome of [`cmd_trace`].
#[derive(Clone, Debug, PartialEq)]
pub struct TraceSummary {
    pub label: u8,
    pub counts_coarse: Vec<usize>,
    pub counts_fine: Vec<usize>,
}

impl TraceSummary {
    pub fn max_abs_diff(&self) -> usize {
        self.counts_coarse.iter().zip(&self.counts_fine).map(|(a, b)| a.abs_diff(*b)).max().unwrap_or(0)
    }
}

#[derive(Serialize)]
struct TraceSummaryRow {
    sample: usize,
    label: u8,
    coarse_dt: f64,
    fine_dt: f64,
    predicted_coarse: usize,
    predicted_fine: usize,
    max_abs_diff: usize,
}

/// Output-layer V/P traces and spikes for one sample, at the configured
/// step and at [`FINE_DT`]. With `blank` the image is replaced by zeros.
pub fn cmd_trace(
    cfg: &RunConfig,
    checkpoint: &Path,
    sample: usize,
    split: Split,
    blank: bool,
) -> Result<(PathBuf, TraceSummary)> {
    cfg.validate()?;
    let ck = load_checkpoint(checkpoint)?;
    let data = load(cfg, split)?;
    let Some(s) = data.samples.get(sample) else {
        bail!("sample {sample} out of range: the {} split has {} images", split_name(split), data.len());
    };
    let input = if blank { vec![0.0; s.pixels.len()] } else { s.pixels.clone() };
    let coarse = cfg.network();
    let fine = NetworkParams { dt: FINE_DT, ..coarse.clone() };
    fine.steps_for(cfg.t0).context("t0 must be a multiple of the fine step")?;

    let run = RunDir::create(&cfg.out, "trace", cfg.seed)?;
    write_config(&run, cfg)?;
    let mut counts = Vec::new();
    for params in [&coarse, &fine] {
        let (rows, spikes, c) = trace_inference(&ck.weights, params, &ck.topology, &input, cfg.t0)?;
        let tag = dt_tag(params.dt);
        write_csv(&run.file(&format!("trace-{tag}.csv")), &["time_ms", "neuron_id", "layer", "V_mV", "P"], rows)?;
        write_csv(&run.file(&format!("spikes-{tag}.csv")), &["time_ms", "neuron_id"], spikes)?;
        counts.push(c);
    }
    let summary =
        TraceSummary { label: s.label, counts_fine: counts.pop().unwrap(), counts_coarse: counts.pop().unwrap() };
    write_csv(
        &run.file("counts.csv"),
        &["neuron_id", "count_coarse", "count_fine", "abs_diff"],
        summary.counts_coarse.iter().zip(&summary.counts_fine).enumerate().map(|(j, (&a, &b))| CountRow {
            neuron_id: j,
            count_coarse: a,
            count_fine: b,
            abs_diff: a.abs_diff(b),
        }),
    )?;
    write_csv(
        &run.file("summary.csv"),
        &["sample", "label", "coarse_dt", "fine_dt", "predicted_coarse", "predicted_fine", "max_abs_diff"],
        [TraceSummaryRow {
            sample,
            label: s.label,
            coarse_dt: coarse.dt,
            fine_dt: FINE_DT,
            predicted_coarse: dynamics::argmax_first(&summary.counts_coarse),
            predicted_fine: dynamics::argmax_first(&summary.counts_fine),
            max_abs_diff: summary.max_abs_diff(),
        }],
    )?;
    Ok((run.commit()?, summary))
}

#[derive(Serialize)]
struct CompareRow<'a> {
    rule: &'a str,
    final_train_error: f64,
    final_test_error: Option<f64>,
    final_mean_output_spikes: f64,
}

/// Final metrics of the two trainings run by [`cmd_compare_rules`].
#[derive(Clone, Debug)]
pub struct Comparison {
    pub windowed: EpochMetrics,
    pub all_pairs: EpochMetrics,
}

/// Train twice from the same initial weights and sample order, once with
/// the windowed rule and once with every spike pair.
pub fn cmd_compare_rules(cfg: &RunConfig) -> Result<(PathBuf, Comparison)> {
    cfg.validate()?;
    let train = load(cfg, Split::Train)?;
    let test = load(cfg, Split::Test)?;
    let run = RunDir::create(&cfg.out, "compare-rules", cfg.seed)?;
    write_config(&run, cfg)?;
    let initial = WeightStore::random(&cfg.topology()?, &cfg.weight_init(), cfg.seed);
    let base = cfg.stdp_rule();
    let mut finals = Vec::new();
    for (name, pairing) in
        [("windowed", PairingRule::PreWindowed { window: cfg.window }), ("allpairs", PairingRule::AllPairs)]
    {
        eprintln!("-- {name}");
        let sub = run.file(name);
        fs::create_dir(&sub)?;
        let mut weights = initial.clone();
        let history = train_into(&sub, cfg, StdpRule { pairing, ..base }, &mut weights, &train, &test)?;
        let last = history.last().cloned().context("training produced no metrics")?;
        finals.push((name, last));
    }
    write_csv(
        &run.file("summary.csv"),
        &["rule", "final_train_error", "final_test_error", "final_mean_output_spikes"],
        finals.iter().map(|(name, m)| CompareRow {
            rule: name,
            final_train_error: m.train_error,
            final_test_error: m.test_error,
            final_mean_output_spikes: m.mean_output_spikes,
        }),
    )?;
    let (_, all_pairs) = finals.pop().expect("two runs");
    let (_, windowed) = finals.pop().expect("two runs");
    ensure!(windowed.epoch == all_pairs.epoch, "runs stopped at different epochs");
    println!("final train error: windowed {:.4}, all pairs {:.4}", windowed.train_error, all_pairs.train_error);
    Ok((run.commit()?, Comparison { windowed, all_pairs }))
}
