//! Spike-timing dependent plasticity over recorded spike trains.
//!
//! Weight changes are accumulated once per sample from the complete
//! spike record. Two pairing rules are available:
//!
//! * [`PairingRule::AllPairs`] sums the kernel over every (pre, post) pair.
//!   With an antisymmetric kernel this makes `dW_ij = -dW_ji`, so the two
//!   directions of a reciprocal connection can never grow together.
//! * [`PairingRule::PreWindowed`] only admits presynaptic spikes inside
//!   `[0, T]` of the learning phase, pairing each with every postsynaptic
//!   spike. Postsynaptic spikes from the end of the inference phase still
//!   count, which breaks the cancellation.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::dynamics::SpikeRecord;
use crate::error::{Error, Result};
use crate::params::Topology;
use crate::weights::WeightDelta;

/// STDP curve `f(dt)` with `dt = t_post - t_pre`; positive `dt` potentiates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StdpKernel {
    Exponential { tau_m: f64 },
    Sinusoidal { tau_w: f64 },
}

impl StdpKernel {
    pub fn validate(&self) -> Result<()> {
        let tau = match *self {
            StdpKernel::Exponential { tau_m } => tau_m,
            StdpKernel::Sinusoidal { tau_w } => tau_w,
        };
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::contract("kernel time constant must be positive"));
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, delta_t: f64) -> f64 {
        match *self {
            StdpKernel::Exponential { tau_m } => {
                if delta_t > 0.0 {
                    (-delta_t / tau_m).exp()
                } else if delta_t < 0.0 {
                    -(delta_t / tau_m).exp()
                } else {
                    0.0
                }
            }
            StdpKernel::Sinusoidal { tau_w } => {
                if delta_t.abs() <= tau_w {
                    (PI * delta_t / tau_w).sin()
                } else {
                    0.0
                }
            }
        }
    }

    /// Half-width outside of which the kernel is exactly zero.
    pub fn support(&self) -> Option<f64> {
        match *self {
            StdpKernel::Exponential { .. } => None,
            StdpKernel::Sinusoidal { tau_w } => Some(tau_w),
        }
    }
}

impl fmt::Display for StdpKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StdpKernel::Exponential { tau_m } => write!(f, "exp:{tau_m}"),
            StdpKernel::Sinusoidal { tau_w } => write!(f, "sin:{tau_w}"),
        }
    }
}

impl FromStr for StdpKernel {
    type Err = Error;

    /// Parses `sin:<tau_w>` or `exp:<tau_m>`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, tau) = s.split_once(':').ok_or_else(|| Error::format(format!("kernel `{s}` is not `kind:tau`")))?;
        let tau: f64 = tau.parse().map_err(|_| Error::format(format!("bad kernel constant `{tau}`")))?;
        let k = match kind {
            "sin" => StdpKernel::Sinusoidal { tau_w: tau },
            "exp" => StdpKernel::Exponential { tau_m: tau },
            other => return Err(Error::format(format!("unknown kernel `{other}`"))),
        };
        k.validate().map_err(|e| Error::format(e.to_string()))?;
        Ok(k)
    }
}

/// Which presynaptic spikes take part in pairing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PairingRule {
    AllPairs,
    /// Presynaptic spikes restricted to `[0, window]` ms.
    PreWindowed {
        window: f64,
    },
}

impl fmt::Display for PairingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairingRule::AllPairs => f.write_str("allpairs"),
            PairingRule::PreWindowed { window } => write!(f, "windowed:{window}"),
        }
    }
}

impl FromStr for PairingRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "allpairs" {
            return Ok(PairingRule::AllPairs);
        }
        let window = s
            .strip_prefix("windowed:")
            .and_then(|w| w.parse::<f64>().ok())
            .filter(|w| *w > 0.0)
            .ok_or_else(|| Error::format(format!("bad pairing rule `{s}`")))?;
        Ok(PairingRule::PreWindowed { window })
    }
}

/// Argument order of the kernel in the accumulated update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SignConvention {
    /// `f(t_post - t_pre)`: pre-before-post potentiates.
    #[default]
    PostMinusPre,
    /// `f(t_pre - t_post)`, which flips every update of an antisymmetric kernel.
    PreMinusPost,
}

impl fmt::Display for SignConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SignConvention::PostMinusPre => "post-pre",
            SignConvention::PreMinusPost => "pre-post",
        })
    }
}

impl FromStr for SignConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "post-pre" => Ok(SignConvention::PostMinusPre),
            "pre-post" => Ok(SignConvention::PreMinusPost),
            other => Err(Error::format(format!("unknown sign convention `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StdpRule {
    pub kernel: StdpKernel,
    pub pairing: PairingRule,
    pub sign: SignConvention,
}

impl StdpRule {
    pub fn windowed(kernel: StdpKernel, window: f64) -> Self {
        Self { kernel, pairing: PairingRule::PreWindowed { window }, sign: SignConvention::default() }
    }

    pub fn all_pairs(kernel: StdpKernel) -> Self {
        Self { kernel, pairing: PairingRule::AllPairs, sign: SignConvention::default() }
    }
}

/// Sum of `f(t_post - t_pre)` over every spike pair.
pub fn delta_all_pairs(pre: &[f64], post: &[f64], kernel: &StdpKernel) -> f64 {
    pre.iter().map(|&tj| post.iter().map(|&ti| kernel.eval(ti - tj)).sum::<f64>()).sum()
}

/// Sum of `f(t_post - t_pre)` over presynaptic spikes in `[0, window]` and
/// every postsynaptic spike.
pub fn delta_windowed(pre: &[f64], post: &[f64], kernel: &StdpKernel, window: f64) -> f64 {
    pre.iter()
        .filter(|&&tj| (0.0..=window).contains(&tj))
        .map(|&tj| post.iter().map(|&ti| kernel.eval(ti - tj)).sum::<f64>())
        .sum()
}

/// Accumulate `dW_ij` for every synapse in `topology` from one spike record.
///
/// Spikes sit on the integration grid, so for each postsynaptic neuron the
/// kernel response is tabulated once over the grid points where admitted
/// presynaptic spikes occur and then summed per presynaptic neuron.
pub fn accumulate(record: &SpikeRecord, topology: &Topology, rule: &StdpRule) -> Result<WeightDelta> {
    if record.len() != topology.total() {
        return Err(Error::contract("spike record does not cover the topology"));
    }
    rule.kernel.validate()?;
    let dt = record.dt();
    let admitted = match rule.pairing {
        PairingRule::AllPairs => i64::MIN..=i64::MAX,
        PairingRule::PreWindowed { window } => 0..=((window / dt) + 1e-9).floor() as i64,
    };
    let sign = match rule.sign {
        SignConvention::PostMinusPre => 1.0,
        SignConvention::PreMinusPost => -1.0,
    };

    let mut delta = WeightDelta::zeros(topology);
    for block in delta.blocks_mut() {
        let src = topology.range(block.connection.source);
        let dst = topology.range(block.connection.target);

        let pre: Vec<(usize, &[i64])> = src
            .clone()
            .map(|j| {
                let steps = record.steps(j);
                let lo = steps.partition_point(|k| k < admitted.start());
                let hi = steps.partition_point(|k| k <= admitted.end());
                (j - src.start, &steps[lo..hi])
            })
            .filter(|(_, s)| !s.is_empty())
            .collect();
        if pre.is_empty() {
            continue;
        }
        let kmin = pre.iter().map(|(_, s)| s[0]).min().unwrap();
        let kmax = pre.iter().map(|(_, s)| *s.last().unwrap()).max().unwrap();

        let post_span = dst.clone().filter_map(|i| Some((*record.steps(i).first()?, *record.steps(i).last()?))).fold(
            None,
            |acc: Option<(i64, i64)>, (a, b)| match acc {
                None => Some((a, b)),
                Some((x, y)) => Some((x.min(a), y.max(b))),
            },
        );
        let Some((post_lo, post_hi)) = post_span else {
            continue;
        };
        let reach = match rule.kernel.support() {
            Some(w) => ((w / dt) + 1e-9).floor() as i64 + 1,
            None => (post_hi - kmin).max(kmax - post_lo).max(0),
        };
        let table = KernelTable::new(&rule.kernel, dt, reach, sign);

        let width = (kmax - kmin + 1) as usize;
        let mut response = vec![0.0; width];
        for (row, i) in dst.enumerate() {
            let post = record.steps(i);
            let lo = post.partition_point(|&s| s < kmin - reach);
            let hi = post.partition_point(|&s| s <= kmax + reach);
            if lo == hi {
                continue;
            }
            response.fill(0.0);
            for &s in &post[lo..hi] {
                let first = (s - reach).max(kmin);
                let last = (s + reach).min(kmax);
                for k in first..=last {
                    response[(k - kmin) as usize] += table.at(s - k);
                }
            }
            let out = block.matrix.row_mut(row);
            for &(col, steps) in &pre {
                out[col] = steps.iter().map(|&k| response[(k - kmin) as usize]).sum();
            }
        }
    }
    Ok(delta)
}

/// `sign * f(m * dt)` for integer lags `m` in `[-reach, reach]`.
struct KernelTable {
    reach: i64,
    values: Vec<f64>,
}

impl KernelTable {
    fn new(kernel: &StdpKernel, dt: f64, reach: i64, sign: f64) -> Self {
        let values = (-reach..=reach).map(|m| sign * kernel.eval(m as f64 * dt)).collect();
        Self { reach, values }
    }

    #[inline]
    fn at(&self, lag: i64) -> f64 {
        self.values[(lag + self.reach) as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{Connection, Layer};

    const SIN20: StdpKernel = StdpKernel::Sinusoidal { tau_w: 20.0 };
    const EXP20: StdpKernel = StdpKernel::Exponential { tau_m: 20.0 };

    #[test]
    fn kernel_values() {
        assert!((SIN20.eval(10.0) - 1.0).abs() < 1e-15);
        assert_eq!(SIN20.eval(25.0), 0.0);
        assert_eq!(SIN20.eval(-25.0), 0.0);
        assert_eq!(EXP20.eval(0.0), 0.0);
        assert!((EXP20.eval(20.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((EXP20.eval(-20.0) + (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn pair_sums() {
        let half = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(delta_all_pairs(&[], &[5.0], &SIN20), 0.0);
        assert!((delta_all_pairs(&[10.0], &[15.0], &SIN20) - half).abs() < 1e-12);
        assert_eq!(delta_windowed(&[-5.0], &[2.0], &SIN20, 100.0), 0.0);
        assert!((delta_windowed(&[2.0], &[-3.0], &SIN20, 100.0) + half).abs() < 1e-12);
        assert!((delta_windowed(&[10.0], &[15.0], &SIN20, 100.0) - half).abs() < 1e-12);
    }

    #[test]
    fn parse_forms() {
        assert_eq!("sin:20".parse::<StdpKernel>().unwrap(), SIN20);
        assert_eq!("exp:20".parse::<StdpKernel>().unwrap(), EXP20);
        assert!("sin:-1".parse::<StdpKernel>().is_err());
        assert_eq!("windowed:100".parse::<PairingRule>().unwrap(), PairingRule::PreWindowed { window: 100.0 });
        assert_eq!("allpairs".parse::<PairingRule>().unwrap(), PairingRule::AllPairs);
        assert_eq!(SIN20.to_string().parse::<StdpKernel>().unwrap(), SIN20);
    }

    fn pair_topology() -> Topology {
        Topology::with_connections(
            [1, 1, 1],
            vec![Connection::new(Layer::Hidden, Layer::Output), Connection::new(Layer::Output, Layer::Hidden)],
        )
        .unwrap()
    }

    #[test]
    fn reciprocal_all_pairs_cancel() {
        let t = pair_topology();
        let mut rec = SpikeRecord::new(3, 1.0);
        for k in [-30, -12, 4, 9, 40] {
            rec.push(1, k);
        }
        for k in [-20, 1, 6, 33] {
            rec.push(2, k);
        }
        let d = accumulate(&rec, &t, &StdpRule::all_pairs(SIN20)).unwrap();
        let forward = d.blocks()[0].matrix.get(0, 0);
        let back = d.blocks()[1].matrix.get(0, 0);
        assert!(forward != 0.0);
        assert!((forward + back).abs() < 1e-12);

        let d = accumulate(&rec, &t, &StdpRule::windowed(SIN20, 100.0)).unwrap();
        let sum = d.blocks()[0].matrix.get(0, 0) + d.blocks()[1].matrix.get(0, 0);
        assert!(sum.abs() > 1e-3, "{sum}");
    }

    #[test]
    fn no_learning_phase_spikes_means_no_change() {
        let t = pair_topology();
        let mut rec = SpikeRecord::new(3, 1.0);
        rec.push(1, -10);
        rec.push(2, -8);
        let d = accumulate(&rec, &t, &StdpRule::windowed(SIN20, 100.0)).unwrap();
        assert!(d.is_zero());
    }

    #[test]
    fn sign_flag_negates() {
        let t = pair_topology();
        let mut rec = SpikeRecord::new(3, 1.0);
        rec.push(1, 3);
        rec.push(2, 8);
        let mut rule = StdpRule::windowed(SIN20, 100.0);
        let a = accumulate(&rec, &t, &rule).unwrap();
        rule.sign = SignConvention::PreMinusPost;
        let b = accumulate(&rec, &t, &rule).unwrap();
        let x = a.blocks()[0].matrix.get(0, 0);
        assert!(x > 0.0);
        assert_eq!(b.blocks()[0].matrix.get(0, 0), -x);
    }
}
