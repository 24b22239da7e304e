//! Tanh-squashed Gaussian policy over a single bounded action.

use std::f64::consts::{LN_2, PI};

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Error, Result};
use crate::nn::{Activation, Mlp};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActMode {
    Stochastic,
    Deterministic,
}

/// `ln(1 − tanh²u)` without cancellation for large `|u|`.
pub(crate) fn log_one_minus_tanh_sq(u: f64) -> f64 {
    let x = -2.0 * u;
    let softplus = x.max(0.0) + (-x.abs()).exp().ln_1p();
    2.0 * (LN_2 - u - softplus)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    /// Maps a state to `[mean, raw log_std]` in pre-squash space.
    pub backbone: Mlp,
    pub action_low: f64,
    pub action_high: f64,
}

/// A batch of reparameterized samples with what the actor gradient needs.
#[derive(Debug, Clone)]
pub struct SquashedSample {
    pub actions: Array1<f64>,
    pub log_probs: Array1<f64>,
    /// Pre-squash sample `u = mean + std·noise`.
    pub pre_squash: Array1<f64>,
    pub noise: Array1<f64>,
    pub std: Array1<f64>,
    /// Whether the raw log_std was inside its bounds (gradient flows).
    pub log_std_active: Vec<bool>,
}

impl GaussianPolicy {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        hidden: &[usize],
        activation: Activation,
        action_low: f64,
        action_high: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(action_low < action_high) {
            return Err(Error::InvalidArgument(format!(
                "action bounds [{action_low}, {action_high}] are empty"
            )));
        }
        let mut sizes = vec![state_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(2);
        Ok(Self {
            backbone: Mlp::new(&sizes, activation, rng)?,
            action_low,
            action_high,
        })
    }

    /// Wraps an existing network; it must emit exactly two outputs.
    pub fn from_backbone(backbone: Mlp, action_low: f64, action_high: f64) -> Result<Self> {
        if backbone.output_dim() != 2 {
            return Err(Error::Dimension(format!(
                "policy backbone must have 2 outputs, has {}",
                backbone.output_dim()
            )));
        }
        Ok(Self {
            backbone,
            action_low,
            action_high,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.backbone.input_dim()
    }

    pub fn scale(&self) -> f64 {
        0.5 * (self.action_high - self.action_low)
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.action_high + self.action_low)
    }

    fn squash(&self, u: f64) -> f64 {
        (self.center() + self.scale() * u.tanh()).clamp(self.action_low, self.action_high)
    }

    fn check_state(&self, state: &[f64]) -> Result<()> {
        if state.len() != self.state_dim() {
            return Err(Error::Dimension(format!(
                "state has {} features, policy expects {}",
                state.len(),
                self.state_dim()
            )));
        }
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("policy state"));
        }
        Ok(())
    }

    /// Mean and clamped log standard deviation in pre-squash space.
    pub fn distribution(&self, state: &[f64]) -> Result<(f64, f64)> {
        self.check_state(state)?;
        let x = ArrayView2::from_shape((1, state.len()), state)
            .map_err(|e| Error::Dimension(e.to_string()))?;
        let out = self.backbone.predict(x)?;
        Ok((out[[0, 0]], out[[0, 1]].clamp(LOG_STD_MIN, LOG_STD_MAX)))
    }

    /// With probability `epsilon` a uniform action; otherwise a squashed
    /// Gaussian sample, or the squashed mean in deterministic mode.
    pub fn act<R: Rng + ?Sized>(
        &self,
        state: &[f64],
        mode: ActMode,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<f64> {
        let (mean, log_std) = self.distribution(state)?;
        if epsilon > 0.0 && rng.random::<f64>() < epsilon {
            let u = Uniform::new_inclusive(self.action_low, self.action_high)
                .expect("bounds checked at construction");
            return Ok(u.sample(rng));
        }
        Ok(match mode {
            ActMode::Deterministic => self.squash(mean),
            ActMode::Stochastic => {
                let n: f64 = StandardNormal.sample(rng);
                self.squash(mean + log_std.exp() * n)
            }
        })
    }

    /// Log-density of `action` under the squashed policy, including the
    /// tanh and affine Jacobians.
    pub fn log_prob(&self, state: &[f64], action: f64) -> Result<f64> {
        if !(action > self.action_low && action < self.action_high) {
            return Err(Error::InvalidArgument(format!(
                "action {action} not strictly inside ({}, {})",
                self.action_low, self.action_high
            )));
        }
        let (mean, log_std) = self.distribution(state)?;
        let y = (action - self.center()) / self.scale();
        let u = y.atanh();
        let z = (u - mean) / log_std.exp();
        Ok(-0.5 * z * z - log_std - HALF_LN_2PI - (1.0 - y * y).ln() - self.scale().ln())
    }

    /// Reparameterized samples for a batch given standard-normal `noise`.
    /// Returns the samples and the backbone's raw outputs.
    pub(crate) fn sample_with_noise(
        &self,
        raw: &Array2<f64>,
        noise: &Array1<f64>,
    ) -> SquashedSample {
        let n = raw.nrows();
        let (center, scale) = (self.center(), self.scale());
        let mut out = SquashedSample {
            actions: Array1::zeros(n),
            log_probs: Array1::zeros(n),
            pre_squash: Array1::zeros(n),
            noise: noise.clone(),
            std: Array1::zeros(n),
            log_std_active: vec![true; n],
        };
        for i in 0..n {
            let mean = raw[[i, 0]];
            let raw_log_std = raw[[i, 1]];
            let log_std = raw_log_std.clamp(LOG_STD_MIN, LOG_STD_MAX);
            out.log_std_active[i] = (LOG_STD_MIN..=LOG_STD_MAX).contains(&raw_log_std);
            let std = log_std.exp();
            let e = noise[i];
            let u = mean + std * e;
            out.std[i] = std;
            out.pre_squash[i] = u;
            out.actions[i] = center + scale * u.tanh();
            out.log_probs[i] =
                -0.5 * e * e - log_std - HALF_LN_2PI - log_one_minus_tanh_sq(u) - scale.ln();
        }
        out
    }
}

/// Gaussian log-density, used by tests as an independent reference.
pub fn normal_log_pdf(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    -0.5 * z * z - std.ln() - 0.5 * (2.0 * PI).ln()
}
