//! Simulation and two-phase STDP training of a three-layer network of
//! leaky integrate-and-fire neurons.
//!
//! The network is clock driven: [`dynamics::step`] advances every neuron by
//! one Euler step. A training sample runs a free inference phase, then a
//! learning phase in which output neurons are nudged toward the one-hot
//! target. Weight changes come from STDP pairs in which only presynaptic
//! spikes inside the learning window `[0, T]` take part
//! ([`stdp::PairingRule::PreWindowed`]).
//!
//! The guide in `book/` walks through each piece; its code listings are
//! compiled and run as doctests of this crate.

pub mod checkpoint;
pub mod dynamics;
pub mod error;
pub mod mnist;
pub mod params;
pub mod stdp;
pub mod trainer;
pub mod weights;

pub use dynamics::{init_state, predict, run_phase, step, NeuronState, PhaseKind, SpikeRecord, Stimulus};
pub use error::{Error, Result};
pub use params::{Connection, Layer, NetworkParams, SpikeJump, Topology};
pub use stdp::{accumulate, delta_all_pairs, delta_windowed, PairingRule, SignConvention, StdpKernel, StdpRule};
pub use trainer::{encode_target, evaluate, train_epochs, train_sample, EpochMetrics, Model, TrainConfig};
pub use weights::{apply, WeightDelta, WeightInit, WeightStore};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/stdp.md")]
    mod stdp {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/mnist.md")]
    mod mnist {}
}
