use serde::{Deserialize, Serialize};

use super::{Gradients, Mlp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 2e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected Adam moments for a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        Self {
            config,
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step_count: 0,
        }
    }

    pub fn for_net(net: &Mlp, config: AdamConfig) -> Self {
        Self::new(net.param_count(), config)
    }

    /// Applies one update to `params` in place.
    pub fn step_slice(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.first_moment.len() {
            return Err(Error::Dimension(format!(
                "adam over {} moments, got {} params and {} grads",
                self.first_moment.len(),
                params.len(),
                grads.len()
            )));
        }
        self.step_count += 1;
        let (c1, c2) = self.corrections();
        for (i, (p, &g)) in params.iter_mut().zip(grads).enumerate() {
            *p -= self.update(i, g, c1, c2);
        }
        Ok(())
    }

    /// Applies one update to every layer of `net`.
    pub fn step_net(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        let shapes_match = net.layers().len() == grads.layers.len()
            && net
                .layers()
                .iter()
                .zip(&grads.layers)
                .all(|(l, g)| l.same_shape(g));
        if !shapes_match || net.param_count() != self.first_moment.len() {
            return Err(Error::Dimension(
                "gradient shapes do not match the network".into(),
            ));
        }
        self.step_count += 1;
        let (c1, c2) = self.corrections();
        let mut i = 0;
        for (layer, grad) in net.layers_mut().iter_mut().zip(&grads.layers) {
            for (p, &g) in layer.weight.iter_mut().zip(grad.weight.iter()) {
                *p -= self.update(i, g, c1, c2);
                i += 1;
            }
            for (p, &g) in layer.bias.iter_mut().zip(grad.bias.iter()) {
                *p -= self.update(i, g, c1, c2);
                i += 1;
            }
        }
        Ok(())
    }

    fn corrections(&self) -> (f64, f64) {
        let t = self.step_count as i32;
        (
            1.0 - self.config.beta1.powi(t),
            1.0 - self.config.beta2.powi(t),
        )
    }

    #[inline]
    fn update(&mut self, i: usize, g: f64, c1: f64, c2: f64) -> f64 {
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let m = &mut self.first_moment[i];
        *m = beta1 * *m + (1.0 - beta1) * g;
        let v = &mut self.second_moment[i];
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        lr * (self.first_moment[i] / c1) / ((self.second_moment[i] / c2).sqrt() + epsilon)
    }
}
