#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tamatrack::eval::{ScenarioSpec, TargetSpec, Waypoint};
use tamatrack::tama::{LstmBias, LstmWeights};

/// Four pedestrians on crossing paths with detector dropout, clutter and
/// box jitter.
pub fn noisy_scene(seed: u64) -> ScenarioSpec {
    let mut spec = ScenarioSpec::crossing(seed);
    let wp = |frame, x, y| Waypoint { frame, x, y };
    spec.targets.push(TargetSpec {
        width: 30.0,
        height: 80.0,
        waypoints: vec![wp(1, 100.0, 100.0), wp(100, 500.0, 400.0)],
        occlusions: vec![],
    });
    spec.targets.push(TargetSpec {
        width: 36.0,
        height: 90.0,
        waypoints: vec![wp(10, 600.0, 80.0), wp(100, 80.0, 380.0)],
        occlusions: vec![],
    });
    spec.dropout = 0.2;
    spec.clutter = 0.1;
    spec.position_noise = 2.0;
    spec.size_noise = 2.0;
    spec.descriptor_noise = 0.05;
    spec
}

fn values(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Random weights; gate scale keeps activations away from saturation.
pub fn random_weights(rng: &mut ChaCha8Rng, hidden: usize, input: usize, cells: usize, with_bias: bool) -> LstmWeights {
    let n = hidden * (hidden + input);
    let scale = 1.0 / ((hidden + input) as f64).sqrt();
    LstmWeights {
        hidden,
        input,
        cells,
        w_forget: values(rng, n, scale),
        w_input: values(rng, n, scale),
        w_output: values(rng, n, scale),
        w_candidate: values(rng, n, scale),
        w_pos: values(rng, hidden, 1.0),
        w_neg: values(rng, hidden, 1.0),
        bias: with_bias.then(|| LstmBias {
            forget: values(rng, hidden, 0.5),
            input: values(rng, hidden, 0.5),
            output: values(rng, hidden, 0.5),
            candidate: values(rng, hidden, 0.5),
            logits: [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
        }),
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
