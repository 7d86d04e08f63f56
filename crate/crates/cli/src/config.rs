//! Run configuration: built-in defaults, then a TOML file, then flags.
//!
//! The defaults describe the desk-scale experiment: digits 0 and 1, 500
//! training and 200 test images, a 200-neuron hidden layer, 20 epochs.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use snn_stdp::mnist::N_CLASSES;
use snn_stdp::stdp::{PairingRule, SignConvention, StdpKernel, StdpRule};
use snn_stdp::{NetworkParams, SpikeJump, Topology, TrainConfig, WeightInit};

/// Environment variable naming the default MNIST directory.
pub const DATA_ENV: &str = "SNN_STDP_DATA";

const IMAGE_PIXELS: usize = 28 * 28;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RuleKind {
    Windowed,
    Allpairs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Sin,
    Exp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sign {
    PostPre,
    PrePost,
}

/// Every knob of a run in one flat table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub data_dir: PathBuf,
    pub out: PathBuf,
    /// Digits to keep; empty keeps all ten.
    pub classes: Vec<u8>,
    /// Images kept from each split after filtering; 0 keeps them all.
    pub train_cap: usize,
    pub test_cap: usize,
    /// Seed of the train/test subsampling.
    pub data_seed: u64,

    pub hidden: usize,
    pub epochs: usize,
    pub eval_every: usize,
    pub alpha: f64,
    pub rule: RuleKind,
    pub kernel: KernelKind,
    pub tau_w: f64,
    pub tau_m: f64,
    pub sign: Sign,
    /// Learning window `T`, ms.
    pub window: f64,
    /// Inference phase length, ms.
    pub t0: f64,
    pub clamp_weights_nonneg: bool,
    pub w_init_input_hidden: f64,
    pub w_init_hidden_output: f64,
    pub w_init_output_hidden: f64,
    /// Also write weights every this many epochs; 0 writes only the final set.
    pub checkpoint_every: usize,

    pub dt: f64,
    pub tau_v: f64,
    pub tau_p: f64,
    pub e_l: f64,
    pub e_s: f64,
    pub v_th: f64,
    pub v_reset: f64,
    pub r_m: f64,
    pub p_0: f64,
    pub beta: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub r_ext: f64,
    pub i_e: f64,
    pub spike_jump: SpikeJump,
}

impl Default for RunConfig {
    fn default() -> Self {
        let net = NetworkParams::default();
        let train = TrainConfig::default();
        let init = WeightInit::default();
        let tau_w = match train.rule.kernel {
            StdpKernel::Sinusoidal { tau_w } => tau_w,
            StdpKernel::Exponential { .. } => unreachable!("default kernel is sinusoidal"),
        };
        Self {
            seed: train.seed,
            data_dir: std::env::var_os(DATA_ENV).map_or_else(|| PathBuf::from("data/mnist"), PathBuf::from),
            out: PathBuf::from("runs"),
            classes: vec![0, 1],
            train_cap: 500,
            test_cap: 200,
            data_seed: 1,
            hidden: 200,
            epochs: train.epochs,
            eval_every: train.eval_every,
            alpha: train.alpha,
            rule: RuleKind::Windowed,
            kernel: KernelKind::Sin,
            tau_w,
            tau_m: 20.0,
            sign: Sign::PostPre,
            window: train.window,
            t0: train.t0,
            clamp_weights_nonneg: train.clamp_weights_nonneg,
            w_init_input_hidden: init.input_hidden,
            w_init_hidden_output: init.hidden_output,
            w_init_output_hidden: init.output_hidden,
            checkpoint_every: 0,
            dt: net.dt,
            tau_v: net.tau_v,
            tau_p: net.tau_p,
            e_l: net.e_l,
            e_s: net.e_s,
            v_th: net.v_th,
            v_reset: net.v_reset,
            r_m: net.r_m,
            p_0: net.p_0,
            beta: net.beta,
            p_min: net.p_min,
            p_max: net.p_max,
            r_ext: net.r_ext,
            i_e: net.i_e,
            spike_jump: net.spike_jump,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn network(&self) -> NetworkParams {
        NetworkParams {
            tau_v: self.tau_v,
            tau_p: self.tau_p,
            e_l: self.e_l,
            e_s: self.e_s,
            v_th: self.v_th,
            v_reset: self.v_reset,
            r_m: self.r_m,
            p_0: self.p_0,
            beta: self.beta,
            p_min: self.p_min,
            p_max: self.p_max,
            dt: self.dt,
            r_ext: self.r_ext,
            i_e: self.i_e,
            spike_jump: self.spike_jump,
        }
    }

    pub fn topology(&self) -> Result<Topology> {
        Ok(Topology::new(IMAGE_PIXELS, self.hidden, N_CLASSES)?)
    }

    pub fn kernel(&self) -> StdpKernel {
        match self.kernel {
            KernelKind::Sin => StdpKernel::Sinusoidal { tau_w: self.tau_w },
            KernelKind::Exp => StdpKernel::Exponential { tau_m: self.tau_m },
        }
    }

    pub fn stdp_rule(&self) -> StdpRule {
        let pairing = match self.rule {
            RuleKind::Windowed => PairingRule::PreWindowed { window: self.window },
            RuleKind::Allpairs => PairingRule::AllPairs,
        };
        let sign = match self.sign {
            Sign::PostPre => SignConvention::PostMinusPre,
            Sign::PrePost => SignConvention::PreMinusPost,
        };
        StdpRule { kernel: self.kernel(), pairing, sign }
    }

    pub fn class_filter(&self) -> Option<Vec<u8>> {
        (!self.classes.is_empty()).then(|| self.classes.clone())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            alpha: self.alpha,
            t0: self.t0,
            window: self.window,
            rule: self.stdp_rule(),
            seed: self.seed,
            eval_every: self.eval_every,
            clamp_weights_nonneg: self.clamp_weights_nonneg,
            class_filter: self.class_filter(),
            train_cap: cap(self.train_cap),
            test_cap: cap(self.test_cap),
        }
    }

    pub fn weight_init(&self) -> WeightInit {
        WeightInit {
            input_hidden: self.w_init_input_hidden,
            hidden_output: self.w_init_hidden_output,
            output_hidden: self.w_init_output_hidden,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(&c) = self.classes.iter().find(|&&c| c > 9) {
            bail!("class {c} is not a digit");
        }
        self.network().validate()?;
        self.train_config().validate(&self.network())?;
        Ok(())
    }
}

pub(crate) fn cap(n: usize) -> Option<usize> {
    (n > 0).then_some(n)
}

/// Parse `0,1,7` into digits; `all` (or nothing) keeps every class.
pub fn parse_classes(s: &str) -> Result<Vec<u8>, String> {
    if s.trim() == "all" {
        return Ok(Vec::new());
    }
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse::<u8>().map_err(|e| format!("`{p}`: {e}")))
        .collect()
}
