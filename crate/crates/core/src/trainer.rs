//! Per-sample two-phase training, evaluation and the epoch loop.
//!
//! Each training sample runs a free inference phase over `[-t_0, 0)`,
//! then a learning phase over `[0, T + tail)` with the output layer nudged
//! toward the one-hot target. The merged spike record is turned into a
//! weight change by [`stdp::accumulate`] and applied immediately.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::{self, NeuronState, PhaseKind, SpikeRecord, Stimulus};
use crate::error::{Error, Result};
use crate::mnist::{Dataset, Sample};
use crate::params::{Layer, NetworkParams, Topology};
use crate::stdp::{self, PairingRule, StdpKernel, StdpRule};
use crate::weights::{self, WeightDelta, WeightStore};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Learning rate applied to the accumulated STDP sums.
    pub alpha: f64,
    /// Inference phase length, ms.
    pub t0: f64,
    /// Presynaptic window `T`, ms.
    pub window: f64,
    pub rule: StdpRule,
    pub seed: u64,
    pub eval_every: usize,
    pub clamp_weights_nonneg: bool,
    pub class_filter: Option<Vec<u8>>,
    pub train_cap: Option<usize>,
    pub test_cap: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let window = 100.0;
        Self {
            epochs: 20,
            alpha: 3e-4,
            t0: 250.0,
            window,
            rule: StdpRule::windowed(StdpKernel::Sinusoidal { tau_w: 40.0 }, window),
            seed: 1,
            eval_every: 1,
            clamp_weights_nonneg: false,
            class_filter: None,
            train_cap: None,
            test_cap: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, params: &NetworkParams) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::contract("at least one epoch is required"));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::contract("alpha must be finite and non-negative"));
        }
        if self.eval_every == 0 {
            return Err(Error::contract("eval_every must be at least 1"));
        }
        self.rule.kernel.validate()?;
        params.steps_for(self.t0)?;
        params.steps_for(self.learning_duration())?;
        if let PairingRule::PreWindowed { window } = self.rule.pairing {
            if window != self.window {
                return Err(Error::contract("pairing window differs from the learning window"));
            }
        }
        Ok(())
    }

    /// Extra learning-phase time after the window, so presynaptic spikes
    /// near `T` see their full kernel.
    pub fn tail(&self) -> f64 {
        match self.rule.kernel {
            StdpKernel::Sinusoidal { tau_w } => tau_w,
            StdpKernel::Exponential { tau_m } => tau_m,
        }
    }

    /// `T + tail`.
    pub fn learning_duration(&self) -> f64 {
        self.window + self.tail()
    }

    /// Same configuration with the pairing rule swapped.
    pub fn with_pairing(&self, pairing: PairingRule) -> Self {
        let mut c = self.clone();
        c.rule.pairing = pairing;
        c
    }
}

/// Summary of one epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_error: f64,
    pub test_error: Option<f64>,
    /// Mean output-layer spikes per training sample during evaluation.
    pub mean_output_spikes: f64,
    pub seconds: f64,
}

/// One-hot target signal.
pub fn encode_target(label: usize, n_classes: usize) -> Result<Vec<f64>> {
    if label >= n_classes {
        return Err(Error::contract(format!("label {label} outside 0..{n_classes}")));
    }
    let mut v = vec![0.0; n_classes];
    v[label] = 1.0;
    Ok(v)
}

/// The network pieces every simulation needs.
#[derive(Clone, Copy, Debug)]
pub struct Model<'a> {
    pub params: &'a NetworkParams,
    pub topology: &'a Topology,
}

/// Both phases of one sample, without touching the weights.
#[derive(Clone, Debug)]
pub struct SampleRun {
    pub record: SpikeRecord,
    pub predicted: usize,
}

/// Simulate inference then learning for `sample` from a rested state.
pub fn simulate_sample(
    state: &mut NeuronState,
    weights: &WeightStore,
    model: Model<'_>,
    sample: &Sample,
    config: &TrainConfig,
) -> Result<SampleRun> {
    let target = encode_target(sample.label as usize, model.topology.size(Layer::Output))?;
    state.reset(model.params);
    let mut record = dynamics::run_phase(
        state,
        weights,
        model.params,
        model.topology,
        &Stimulus::inference(&sample.pixels),
        PhaseKind::Inference,
        config.t0,
        None,
    )?;
    let predicted = dynamics::predict(&record, model.topology);
    let learning = dynamics::run_phase(
        state,
        weights,
        model.params,
        model.topology,
        &Stimulus::learning(&sample.pixels, &target),
        PhaseKind::Learning,
        config.learning_duration(),
        None,
    )?;
    record.extend(&learning)?;
    Ok(SampleRun { record, predicted })
}

/// Weight change for one sample, before scaling by `alpha`.
pub fn sample_delta(
    state: &mut NeuronState,
    weights: &WeightStore,
    model: Model<'_>,
    sample: &Sample,
    config: &TrainConfig,
) -> Result<(WeightDelta, usize)> {
    let run = simulate_sample(state, weights, model, sample, config)?;
    let delta = stdp::accumulate(&run.record, model.topology, &config.rule)?;
    Ok((delta, run.predicted))
}

/// One step of the training loop: simulate, accumulate, apply.
/// Returns the inference-phase prediction.
pub fn train_sample(
    weights: &mut WeightStore,
    state: &mut NeuronState,
    model: Model<'_>,
    sample: &Sample,
    config: &TrainConfig,
) -> Result<usize> {
    let (delta, predicted) = sample_delta(state, weights, model, sample, config)?;
    weights::apply(weights, &delta, config.alpha, config.clamp_weights_nonneg)?;
    Ok(predicted)
}

/// Inference-only pass of one sample.
pub fn infer(
    state: &mut NeuronState,
    weights: &WeightStore,
    model: Model<'_>,
    sample: &Sample,
    t0: f64,
) -> Result<SpikeRecord> {
    state.reset(model.params);
    dynamics::run_phase(
        state,
        weights,
        model.params,
        model.topology,
        &Stimulus::inference(&sample.pixels),
        PhaseKind::Inference,
        t0,
        None,
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub error_rate: f64,
    pub mean_output_spikes: f64,
}

/// Error rate of inference-only predictions. Samples are spread over the
/// rayon pool; the weights are only read.
pub fn evaluate(weights: &WeightStore, model: Model<'_>, dataset: &[Sample], t0: f64) -> Result<Evaluation> {
    if dataset.is_empty() {
        return Err(Error::contract("cannot evaluate on an empty dataset"));
    }
    let (wrong, spikes) = dataset
        .par_iter()
        .map_init(
            || dynamics::init_state(model.topology, model.params),
            |state, sample| -> Result<(usize, usize)> {
                let record = infer(state, weights, model, sample, t0)?;
                let counts = dynamics::output_counts(&record, model.topology, PhaseKind::Inference);
                let predicted = dynamics::argmax_first(&counts);
                Ok((usize::from(predicted != sample.label as usize), counts.iter().sum()))
            },
        )
        .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
    let n = dataset.len() as f64;
    Ok(Evaluation { error_rate: wrong as f64 / n, mean_output_spikes: spikes as f64 / n })
}

/// Run `config.epochs` epochs of per-sample training.
///
/// The training order of epoch `e` is a permutation drawn from
/// `seed + e`. After every `eval_every` epochs (and after the last) the
/// network is evaluated on the training set and, when given, the test
/// set; `on_epoch` then sees the metrics and the current weights.
pub fn train_epochs(
    weights: &mut WeightStore,
    model: Model<'_>,
    train: &Dataset,
    test: Option<&Dataset>,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics, &WeightStore) -> Result<()>,
) -> Result<Vec<EpochMetrics>> {
    config.validate(model.params)?;
    if train.is_empty() {
        return Err(Error::contract("training set is empty"));
    }
    if !weights.matches(model.topology) {
        return Err(Error::contract("weights do not match the topology"));
    }
    let mut state = dynamics::init_state(model.topology, model.params);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::new();
    for epoch in 1..=config.epochs {
        let started = Instant::now();
        order.sort_unstable();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(epoch as u64));
        order.shuffle(&mut rng);
        for &k in &order {
            train_sample(weights, &mut state, model, &train.samples[k], config)?;
        }
        if epoch % config.eval_every != 0 && epoch != config.epochs {
            continue;
        }
        let on_train = evaluate(weights, model, &train.samples, config.t0)?;
        let test_error = match test {
            Some(t) => Some(evaluate(weights, model, &t.samples, config.t0)?.error_rate),
            None => None,
        };
        let metrics = EpochMetrics {
            epoch,
            train_error: on_train.error_rate,
            test_error,
            mean_output_spikes: on_train.mean_output_spikes,
            seconds: started.elapsed().as_secs_f64(),
        };
        on_epoch(&metrics, weights)?;
        history.push(metrics);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::WeightInit;

    #[test]
    fn one_hot() {
        assert_eq!(encode_target(3, 10).unwrap(), [0., 0., 0., 1., 0., 0., 0., 0., 0., 0.]);
        assert_eq!(encode_target(0, 10).unwrap()[0], 1.0);
        assert_eq!(encode_target(9, 10).unwrap()[9], 1.0);
        assert!(encode_target(10, 10).is_err());
    }

    #[test]
    fn zero_epochs_rejected() {
        let c = TrainConfig { epochs: 0, ..Default::default() };
        assert!(c.validate(&NetworkParams::default()).is_err());
    }

    #[test]
    fn empty_evaluation_rejected() {
        let t = Topology::new(4, 3, 2).unwrap();
        let p = NetworkParams::default();
        let w = WeightStore::zeros(&t);
        let m = Model { params: &p, topology: &t };
        assert!(evaluate(&w, m, &[], 10.0).is_err());
    }

    #[test]
    fn zero_rate_leaves_weights() {
        let t = Topology::new(4, 3, 2).unwrap();
        let p = NetworkParams::default();
        let w0 = WeightStore::random(&t, &WeightInit::uniform(0.2), 3);
        let mut w = w0.clone();
        let m = Model { params: &p, topology: &t };
        let sample = Sample { pixels: vec![1.0, 0.5, 0.0, 1.0], label: 1 };
        let config = TrainConfig { alpha: 0.0, t0: 50.0, ..Default::default() };
        let mut state = dynamics::init_state(&t, &p);
        let predicted = train_sample(&mut w, &mut state, m, &sample, &config).unwrap();
        assert!(predicted < 2);
        assert_eq!(w, w0);
    }
}
