use snn_stdp::dynamics::{self, PhaseKind};
use snn_stdp::mnist::{Dataset, Provenance, Sample};
use snn_stdp::trainer::{self, Model};
use snn_stdp::*;

/// Two 16-pixel classes: left half lit vs right half lit, with a little
/// per-sample variation.
fn bars(n: usize) -> Dataset {
    let samples = (0..n)
        .map(|k| {
            let label = (k % 2) as u8;
            let pixels = (0..16)
                .map(|p| {
                    let on = (p < 8) == (label == 0);
                    if on {
                        0.6 + 0.4 * ((k * 7 + p) % 5) as f64 / 4.0
                    } else {
                        0.0
                    }
                })
                .collect();
            Sample { pixels, label }
        })
        .collect();
    Dataset { samples, provenance: Provenance::default() }
}

fn setup() -> (NetworkParams, Topology, TrainConfig) {
    let params = NetworkParams::default();
    let topology = Topology::new(16, 12, 2).unwrap();
    let config = TrainConfig { epochs: 3, t0: 100.0, ..TrainConfig::default() };
    (params, topology, config)
}

fn init(topology: &Topology) -> WeightStore {
    WeightStore::random(topology, &WeightInit { input_hidden: 0.02, hidden_output: 0.02, output_hidden: 0.005 }, 5)
}

#[test]
fn same_seed_same_weights_and_metrics() {
    let (params, topology, config) = setup();
    let model = Model { params: &params, topology: &topology };
    let data = bars(16);
    let run = || {
        let mut w = init(&topology);
        let h = train_epochs(&mut w, model, &data, Some(&data), &config, |_, _| Ok(())).unwrap();
        let errors: Vec<(f64, Option<f64>, f64)> =
            h.iter().map(|m| (m.train_error, m.test_error, m.mean_output_spikes)).collect();
        (w, errors)
    };
    let (w1, e1) = run();
    let (w2, e2) = run();
    assert_eq!(w1, w2);
    assert_eq!(e1, e2);
    assert_eq!(e1.len(), 3);
    assert_ne!(w1, init(&topology), "training changed nothing");
}

#[test]
fn zero_rate_gives_flat_curves() {
    let (params, topology, config) = setup();
    let config = TrainConfig { alpha: 0.0, ..config };
    let model = Model { params: &params, topology: &topology };
    let data = bars(10);
    let mut w = init(&topology);
    let h = train_epochs(&mut w, model, &data, None, &config, |_, _| Ok(())).unwrap();
    assert!(h.windows(2).all(|p| p[0].train_error == p[1].train_error));
    assert!(h.iter().all(|m| m.test_error.is_none()));
    assert_eq!(w, init(&topology));
}

#[test]
fn eval_every_skips_but_keeps_last() {
    let (params, topology, config) = setup();
    let config = TrainConfig { epochs: 5, eval_every: 2, ..config };
    let model = Model { params: &params, topology: &topology };
    let data = bars(4);
    let mut w = init(&topology);
    let h = train_epochs(&mut w, model, &data, None, &config, |_, _| Ok(())).unwrap();
    assert_eq!(h.iter().map(|m| m.epoch).collect::<Vec<_>>(), [2, 4, 5]);
}

#[test]
fn parallel_evaluation_matches_a_plain_loop() {
    let (params, topology, config) = setup();
    let model = Model { params: &params, topology: &topology };
    let data = bars(12);
    let w = init(&topology);
    let eval = evaluate(&w, model, &data.samples, config.t0).unwrap();
    let mut state = init_state(&topology, &params);
    let mut wrong = 0;
    let mut spikes = 0;
    for s in &data.samples {
        let r = trainer::infer(&mut state, &w, model, s, config.t0).unwrap();
        let c = dynamics::output_counts(&r, &topology, PhaseKind::Inference);
        wrong += usize::from(dynamics::argmax_first(&c) != s.label as usize);
        spikes += c.iter().sum::<usize>();
    }
    assert_eq!(eval.error_rate, wrong as f64 / 12.0);
    assert_eq!(eval.mean_output_spikes, spikes as f64 / 12.0);
}

#[test]
fn inference_phase_does_not_depend_on_the_rule() {
    // before the first update, the two rules see exactly the same network
    let (params, topology, config) = setup();
    let model = Model { params: &params, topology: &topology };
    let sample = &bars(1).samples[0];
    let w = init(&topology);
    let mut state = init_state(&topology, &params);
    let a = trainer::simulate_sample(&mut state, &w, model, sample, &config).unwrap();
    let all = config.with_pairing(PairingRule::AllPairs);
    let b = trainer::simulate_sample(&mut state, &w, model, sample, &all).unwrap();
    for i in 0..topology.total() {
        assert_eq!(a.record.steps(i), b.record.steps(i));
    }
    assert_eq!(a.predicted, b.predicted);
}

#[test]
fn callback_errors_stop_training() {
    let (params, topology, config) = setup();
    let model = Model { params: &params, topology: &topology };
    let data = bars(4);
    let mut w = init(&topology);
    let mut calls = 0;
    let r = train_epochs(&mut w, model, &data, None, &config, |_, _| {
        calls += 1;
        Err(Error::Contract("stop".into()))
    });
    assert!(r.is_err());
    assert_eq!(calls, 1);
}
