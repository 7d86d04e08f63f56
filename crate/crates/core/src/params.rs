//! Physical constants, integration settings and network layout.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a presynaptic spike moves the postsynaptic input summation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpikeJump {
    /// `P_i += W_ij` per presynaptic spike.
    Unit,
    /// `P_i += W_ij / tau_P`, the exact integral of a Dirac impulse.
    Delta,
}

impl FromStr for SpikeJump {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit" => Ok(SpikeJump::Unit),
            "delta" => Ok(SpikeJump::Delta),
            other => Err(Error::format(format!("unknown spike jump `{other}`"))),
        }
    }
}

/// Constants of the membrane and synapse equations.
///
/// Potentials are in mV, times in ms. The defaults reproduce the published
/// membrane constants; `r_m`, `p_0` and `beta` are calibrated for the
/// desk-scale MNIST runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub tau_v: f64,
    pub tau_p: f64,
    pub e_l: f64,
    pub e_s: f64,
    pub v_th: f64,
    pub v_reset: f64,
    /// Scale between input summation and membrane conductance.
    pub r_m: f64,
    /// Converts normalized input and target signals into input summations.
    pub p_0: f64,
    /// Strength of the target nudge on output neurons during learning.
    pub beta: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub dt: f64,
    /// Membrane resistance for an injected current. Unused while `i_e` is zero.
    pub r_ext: f64,
    /// Injected current; held at zero by the model.
    pub i_e: f64,
    pub spike_jump: SpikeJump,
}

impl Default for NetworkParams {
    fn default() -> Self {
        Self {
            tau_v: 20.0,
            tau_p: 10.0,
            e_l: -70.0,
            e_s: 0.0,
            v_th: -54.0,
            v_reset: -80.0,
            r_m: 3.0,
            p_0: 0.3,
            beta: 1.0,
            p_min: 0.0,
            p_max: 0.3,
            dt: 1.0,
            r_ext: 0.0,
            i_e: 0.0,
            spike_jump: SpikeJump::Unit,
        }
    }
}

impl NetworkParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.tau_v,
            self.tau_p,
            self.e_l,
            self.e_s,
            self.v_th,
            self.v_reset,
            self.r_m,
            self.p_0,
            self.beta,
            self.p_min,
            self.p_max,
            self.dt,
            self.r_ext,
            self.i_e,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::contract("network parameters must be finite"));
        }
        if self.tau_v <= 0.0 || self.tau_p <= 0.0 {
            return Err(Error::contract("time constants must be positive"));
        }
        if self.v_reset >= self.v_th {
            return Err(Error::contract("v_reset must lie below v_th"));
        }
        if self.p_min > self.p_max {
            return Err(Error::contract("p_min must not exceed p_max"));
        }
        if self.dt <= 0.0 {
            return Err(Error::contract("dt must be positive"));
        }
        Ok(())
    }

    /// Number of whole steps covering `duration`, or an error when the
    /// duration is not a positive multiple of `dt`.
    pub fn steps_for(&self, duration: f64) -> Result<usize> {
        if duration.is_nan() || duration <= 0.0 {
            return Err(Error::contract(format!("duration {duration} must be positive")));
        }
        let ratio = duration / self.dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-6 * ratio.max(1.0) {
            return Err(Error::contract(format!("duration {duration} ms is not a multiple of dt = {} ms", self.dt)));
        }
        Ok(steps as usize)
    }

    pub(crate) fn jump_scale(&self) -> f64 {
        match self.spike_jump {
            SpikeJump::Unit => 1.0,
            SpikeJump::Delta => 1.0 / self.tau_p,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Input,
    Hidden,
    Output,
}

impl Layer {
    pub const ALL: [Layer; 3] = [Layer::Input, Layer::Hidden, Layer::Output];

    pub fn index(self) -> usize {
        match self {
            Layer::Input => 0,
            Layer::Hidden => 1,
            Layer::Output => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Layer::Input => "input",
            Layer::Hidden => "hidden",
            Layer::Output => "output",
        }
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Layer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "input" => Ok(Layer::Input),
            "hidden" => Ok(Layer::Hidden),
            "output" => Ok(Layer::Output),
            other => Err(Error::format(format!("unknown layer `{other}`"))),
        }
    }
}

/// A directed all-to-all projection from one layer onto another.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Connection {
    pub source: Layer,
    pub target: Layer,
}

impl Connection {
    pub const fn new(source: Layer, target: Layer) -> Self {
        Self { source, target }
    }
}

impl fmt::Display for Connection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}>{}", self.source, self.target)
    }
}

impl FromStr for Connection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (source, target) =
            s.split_once('>').ok_or_else(|| Error::format(format!("connection `{s}` is not `source>target`")))?;
        Ok(Connection::new(source.parse()?, target.parse()?))
    }
}

/// Layer sizes and the directed blocks between them.
///
/// Neurons are numbered globally: inputs first, then hidden, then output.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    sizes: [usize; 3],
    connections: Vec<Connection>,
}

impl Topology {
    /// Input to hidden, hidden to output and the output to hidden feedback.
    pub const DEFAULT_CONNECTIONS: [Connection; 3] = [
        Connection::new(Layer::Input, Layer::Hidden),
        Connection::new(Layer::Hidden, Layer::Output),
        Connection::new(Layer::Output, Layer::Hidden),
    ];

    pub fn new(n_in: usize, n_hid: usize, n_out: usize) -> Result<Self> {
        Self::with_connections([n_in, n_hid, n_out], Self::DEFAULT_CONNECTIONS.to_vec())
    }

    /// The 784-200-10 MNIST network.
    pub fn mnist() -> Self {
        Self::new(784, 200, 10).expect("static topology is valid")
    }

    pub fn with_connections(sizes: [usize; 3], connections: Vec<Connection>) -> Result<Self> {
        if sizes.contains(&0) {
            return Err(Error::contract("every layer needs at least one neuron"));
        }
        for (k, c) in connections.iter().enumerate() {
            if c.source == c.target {
                return Err(Error::contract(format!("self-connection {c} is not allowed")));
            }
            if c.target == Layer::Input {
                return Err(Error::contract(format!("{c}: input neurons are clamped and take no synapses")));
            }
            if connections[..k].contains(c) {
                return Err(Error::contract(format!("duplicate connection {c}")));
            }
        }
        Ok(Self { sizes, connections })
    }

    pub fn size(&self, layer: Layer) -> usize {
        self.sizes[layer.index()]
    }

    pub fn sizes(&self) -> [usize; 3] {
        self.sizes
    }

    pub fn total(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn offset(&self, layer: Layer) -> usize {
        self.sizes[..layer.index()].iter().sum()
    }

    pub fn range(&self, layer: Layer) -> std::ops::Range<usize> {
        let start = self.offset(layer);
        start..start + self.size(layer)
    }

    pub fn layer_of(&self, neuron: usize) -> Layer {
        Layer::ALL
            .into_iter()
            .find(|&l| self.range(l).contains(&neuron))
            .unwrap_or_else(|| panic!("neuron {neuron} outside topology"))
    }

    pub fn connections(&self) -> &[Connection] {
        &self.connections
    }

    /// Global indices of the neurons with a synapse onto `neuron`.
    pub fn presynaptic(&self, neuron: usize) -> Vec<usize> {
        let layer = self.layer_of(neuron);
        self.connections.iter().filter(|c| c.target == layer).flat_map(|c| self.range(c.source)).collect()
    }
}
