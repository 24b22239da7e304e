#![allow(dead_code)]

pub mod gradcheck;

use std::path::PathBuf;

use ndarray::{Array1, Array2};
use rldwa::nn::{Activation, Dense, Mlp};
use rldwa::sac::GaussianPolicy;
use rldwa::scenario::ScenarioConfig;

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.json"))
}

pub fn scenario(name: &str) -> ScenarioConfig {
    ScenarioConfig::load(&scenario_path(name)).unwrap()
}

/// A policy whose mean is exactly `gain·Δθ_norm`, written with two ReLU
/// units. The deterministic action is `tanh(gain·Δθ/π)`.
pub fn proportional_policy(gain: f64) -> GaussianPolicy {
    let mut w1 = Array2::zeros((2, 3));
    w1[[0, 1]] = 1.0;
    w1[[1, 1]] = -1.0;
    let mut w2 = Array2::zeros((2, 2));
    w2[[0, 0]] = gain;
    w2[[0, 1]] = -gain;
    let layers = vec![
        Dense { weight: w1, bias: Array1::zeros(2) },
        Dense { weight: w2, bias: Array1::from(vec![0.0, -3.0]) },
    ];
    let net = Mlp::from_layers(layers, Activation::Relu).unwrap();
    GaussianPolicy::from_backbone(net, -1.0, 1.0).unwrap()
}
