//! Clock-driven Euler integration of the LIF network.
//!
//! Every step updates the input summations `P` first and the membrane
//! potentials `V` second, then resets any neuron at or above threshold.
//! A spike emitted at step `k` reaches its targets' `P` at step `k + 1`.
//!
//! Time is counted in whole steps relative to the start of the learning
//! phase: the inference phase occupies steps `-n_0 .. 0` and the learning
//! phase steps `0 .. n_1`. A spike emitted during step `k` is stamped `k * dt`.

use crate::error::{Error, Result};
use crate::params::{Layer, NetworkParams, Topology};
use crate::weights::WeightStore;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PhaseKind {
    /// Free-running, spans `[-t_0, 0)`.
    Inference,
    /// Output neurons nudged toward the target, spans `[0, T + tau_w)`.
    Learning,
}

/// Data presented to the network: the normalized pixels and, during the
/// learning phase, the target signal.
#[derive(Clone, Copy, Debug)]
pub struct Stimulus<'a> {
    pub input: &'a [f64],
    pub target: Option<&'a [f64]>,
}

impl<'a> Stimulus<'a> {
    pub fn inference(input: &'a [f64]) -> Self {
        Self { input, target: None }
    }

    pub fn learning(input: &'a [f64], target: &'a [f64]) -> Self {
        Self { input, target: Some(target) }
    }

    fn check(&self, topology: &Topology, phase: PhaseKind) -> Result<()> {
        if self.input.len() != topology.size(Layer::Input) {
            return Err(Error::contract(format!(
                "input has {} entries, expected {}",
                self.input.len(),
                topology.size(Layer::Input)
            )));
        }
        match (phase, self.target) {
            (PhaseKind::Inference, None) => Ok(()),
            (PhaseKind::Inference, Some(_)) => Err(Error::contract("the inference phase takes no target")),
            (PhaseKind::Learning, None) => Err(Error::contract("the learning phase needs a target")),
            (PhaseKind::Learning, Some(y)) if y.len() != topology.size(Layer::Output) => Err(Error::contract(format!(
                "target has {} entries, expected {}",
                y.len(),
                topology.size(Layer::Output)
            ))),
            (PhaseKind::Learning, Some(_)) => Ok(()),
        }
    }
}

/// Membrane potentials and input summations of every neuron, plus the
/// spikes emitted on the last step (not yet delivered).
#[derive(Clone, Debug, PartialEq)]
pub struct NeuronState {
    pub v: Vec<f64>,
    pub p: Vec<f64>,
    fired: Vec<usize>,
}

impl NeuronState {
    pub fn fired(&self) -> &[usize] {
        &self.fired
    }

    /// Rest every neuron at `E_L` with no input and nothing in flight.
    pub fn reset(&mut self, params: &NetworkParams) {
        self.v.fill(params.e_l);
        self.p.fill(0.0);
        self.fired.clear();
    }
}

/// Fresh resting state: `V = E_L`, `P = 0`.
pub fn init_state(topology: &Topology, params: &NetworkParams) -> NeuronState {
    let n = topology.total();
    NeuronState { v: vec![params.e_l; n], p: vec![0.0; n], fired: Vec::new() }
}

/// Advance the network by one Euler step of `params.dt`.
///
/// Returns the neurons that crossed threshold during this step, in
/// ascending order. They are also kept in the state for delivery on the
/// next step.
pub fn step(
    state: &mut NeuronState,
    weights: &WeightStore,
    params: &NetworkParams,
    topology: &Topology,
    stimulus: &Stimulus<'_>,
    phase: PhaseKind,
    step_index: i64,
) -> Result<Vec<usize>> {
    stimulus.check(topology, phase)?;
    advance(state, weights, params, topology, stimulus, phase, step_index)?;
    Ok(state.fired.clone())
}

fn advance(
    state: &mut NeuronState,
    weights: &WeightStore,
    params: &NetworkParams,
    topology: &Topology,
    stimulus: &Stimulus<'_>,
    phase: PhaseKind,
    step_index: i64,
) -> Result<()> {
    let p_rate = params.dt / params.tau_p;
    let v_rate = params.dt / params.tau_v;
    let jump = params.jump_scale();

    let inputs = topology.range(Layer::Input);
    let outputs = topology.range(Layer::Output);

    // Leak, using the summations from the end of the previous step.
    let previous: Vec<f64> = state.p[outputs.clone()].to_vec();
    for i in inputs.end..topology.total() {
        state.p[i] -= p_rate * state.p[i];
    }

    // Deliver last step's spikes.
    if !state.fired.is_empty() {
        for block in weights.blocks() {
            let src = topology.range(block.connection.source);
            let dst = topology.offset(block.connection.target);
            let lo = state.fired.partition_point(|&j| j < src.start);
            let hi = state.fired.partition_point(|&j| j < src.end);
            let sources = &state.fired[lo..hi];
            if sources.is_empty() {
                continue;
            }
            for row in 0..block.matrix.rows() {
                let w = block.matrix.row(row);
                let drive: f64 = sources.iter().map(|&j| w[j - src.start]).sum();
                state.p[dst + row] += jump * drive;
            }
        }
    }

    if let (PhaseKind::Learning, Some(target)) = (phase, stimulus.target) {
        let gain = p_rate * params.beta;
        for (k, i) in outputs.clone().enumerate() {
            state.p[i] += gain * (params.p_0 * target[k] - previous[k]);
        }
    }

    for i in inputs.end..topology.total() {
        state.p[i] = state.p[i].clamp(params.p_min, params.p_max);
    }
    for (p, &x) in state.p[inputs.clone()].iter_mut().zip(stimulus.input) {
        *p = params.p_0 * x;
    }

    let external = params.r_ext * params.i_e;
    state.fired.clear();
    for i in 0..topology.total() {
        let v = state.v[i];
        let p = state.p[i];
        let dv = -v + params.e_l - params.r_m * p * (v - params.e_s) + external;
        let next = v + v_rate * dv;
        if !next.is_finite() || !p.is_finite() {
            return Err(Error::Diverged { neuron: i, step: step_index });
        }
        if next >= params.v_th {
            state.v[i] = params.v_reset;
            state.fired.push(i);
        } else {
            state.v[i] = next;
        }
    }
    Ok(())
}

/// Spike trains of every neuron, stored as step indices.
///
/// Indices below zero belong to the inference phase, the rest to the
/// learning phase. Each train is strictly increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct SpikeRecord {
    dt: f64,
    trains: Vec<Vec<i64>>,
}

impl SpikeRecord {
    pub fn new(neurons: usize, dt: f64) -> Self {
        Self { dt, trains: vec![Vec::new(); neurons] }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.trains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trains.iter().all(Vec::is_empty)
    }

    pub fn push(&mut self, neuron: usize, step_index: i64) {
        let train = &mut self.trains[neuron];
        assert!(train.last().is_none_or(|&last| last < step_index), "spike steps must be strictly increasing");
        train.push(step_index);
    }

    pub fn steps(&self, neuron: usize) -> &[i64] {
        &self.trains[neuron]
    }

    /// Spike times in ms.
    pub fn times(&self, neuron: usize) -> Vec<f64> {
        self.trains[neuron].iter().map(|&k| k as f64 * self.dt).collect()
    }

    /// Number of inference-phase spikes of `neuron`; the train splits there.
    pub fn marker(&self, neuron: usize) -> usize {
        self.trains[neuron].partition_point(|&k| k < 0)
    }

    pub fn count(&self, neuron: usize, phase: PhaseKind) -> usize {
        match phase {
            PhaseKind::Inference => self.marker(neuron),
            PhaseKind::Learning => self.trains[neuron].len() - self.marker(neuron),
        }
    }

    /// Append a later fragment covering the same neurons.
    pub fn extend(&mut self, later: &SpikeRecord) -> Result<()> {
        if later.len() != self.len() || later.dt != self.dt {
            return Err(Error::contract("spike record fragments do not line up"));
        }
        for (mine, theirs) in self.trains.iter_mut().zip(&later.trains) {
            if let (Some(a), Some(b)) = (mine.last(), theirs.first()) {
                if b <= a {
                    return Err(Error::contract("spike record fragments overlap in time"));
                }
            }
            mine.extend_from_slice(theirs);
        }
        Ok(())
    }

    /// Keep only the spikes of `neurons`; other trains are emptied.
    pub fn retain_neurons(&mut self, mut keep: impl FnMut(usize) -> bool) {
        for (i, t) in self.trains.iter_mut().enumerate() {
            if !keep(i) {
                t.clear();
            }
        }
    }
}

/// Callback invoked after each step with the step index and the new state.
pub type Observer<'o> = &'o mut dyn FnMut(i64, &NeuronState);

/// Simulate one phase of `duration` ms and record every spike.
///
/// The inference phase ends at time zero and the learning phase starts
/// there, so the two fragments can be concatenated with
/// [`SpikeRecord::extend`].
#[allow(clippy::too_many_arguments)]
pub fn run_phase(
    state: &mut NeuronState,
    weights: &WeightStore,
    params: &NetworkParams,
    topology: &Topology,
    stimulus: &Stimulus<'_>,
    phase: PhaseKind,
    duration: f64,
    mut observer: Option<Observer<'_>>,
) -> Result<SpikeRecord> {
    stimulus.check(topology, phase)?;
    let steps = params.steps_for(duration)? as i64;
    let start = match phase {
        PhaseKind::Inference => -steps,
        PhaseKind::Learning => 0,
    };
    let mut record = SpikeRecord::new(topology.total(), params.dt);
    for k in start..start + steps {
        advance(state, weights, params, topology, stimulus, phase, k)?;
        for &i in &state.fired {
            record.push(i, k);
        }
        if let Some(obs) = observer.as_mut() {
            obs(k, state);
        }
    }
    Ok(record)
}

/// Per-output-neuron spike counts within one phase.
pub fn output_counts(record: &SpikeRecord, topology: &Topology, phase: PhaseKind) -> Vec<usize> {
    topology.range(Layer::Output).map(|i| record.count(i, phase)).collect()
}

/// Index of the first maximum; all-zero counts give class 0.
pub fn argmax_first(counts: &[usize]) -> usize {
    counts.iter().enumerate().fold((0, 0), |best, (k, &c)| if c > best.1 { (k, c) } else { best }).0
}

/// The class whose output neuron spiked most during inference.
pub fn predict(record: &SpikeRecord, topology: &Topology) -> usize {
    argmax_first(&output_counts(record, topology, PhaseKind::Inference))
}
