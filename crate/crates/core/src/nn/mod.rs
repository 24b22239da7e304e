//! Dense feed-forward networks with hand-written reverse mode.
//!
//! Rows of a batch matrix are samples. Every hidden layer applies the same
//! activation; the output layer is affine.

mod adam;
mod checkpoint;

use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{load_weights, save_weights, CHECKPOINT_MAGIC};

static NEXT_STAMP: AtomicU64 = AtomicU64::new(1);

fn fresh_stamp() -> u64 {
    NEXT_STAMP.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            _ => None,
        }
    }

    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Activation::Tanh => z.mapv_inplace(f64::tanh),
        }
    }

    /// Multiplies `delta` by the derivative, expressed via the activation output.
    fn backprop(self, delta: &mut Array2<f64>, out: &Array2<f64>) {
        match self {
            Activation::Relu => delta.zip_mut_with(out, |d, &a| {
                if a <= 0.0 {
                    *d = 0.0;
                }
            }),
            Activation::Tanh => delta.zip_mut_with(out, |d, &a| *d *= 1.0 - a * a),
        }
    }
}

/// One affine layer: `weight` is `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.nrows()
    }

    fn same_shape(&self, other: &Dense) -> bool {
        self.weight.dim() == other.weight.dim() && self.bias.len() == other.bias.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
    hidden: Activation,
    stamp: u64,
}

/// Layer inputs recorded by a forward pass; consumed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    stamp: u64,
    /// `activations[l]` is the input to layer `l`.
    activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.activations[0].nrows()
    }
}

/// Parameter gradients, laid out like the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()).copied())
            .collect()
    }
}

impl Mlp {
    /// Glorot-uniform weights and zero biases. `sizes` lists every layer width
    /// including input and output.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], hidden: Activation, rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Dimension(format!("invalid layer sizes {sizes:?}")));
        }
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
                Dense {
                    weight: Array2::from_shape_simple_fn((fan_out, fan_in), || dist.sample(rng)),
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(Self {
            layers,
            hidden,
            stamp: fresh_stamp(),
        })
    }

    /// Builds a network from explicit layers, checking that widths chain.
    pub fn from_layers(layers: Vec<Dense>, hidden: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Dimension("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.outputs() {
                return Err(Error::Dimension(format!(
                    "layer {i}: bias length {} != outputs {}",
                    l.bias.len(),
                    l.outputs()
                )));
            }
            if i > 0 && l.inputs() != layers[i - 1].outputs() {
                return Err(Error::Dimension(format!(
                    "layer {i}: expects {} inputs but layer {} emits {}",
                    l.inputs(),
                    i - 1,
                    layers[i - 1].outputs()
                )));
            }
        }
        Ok(Self {
            layers,
            hidden,
            stamp: fresh_stamp(),
        })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    /// Mutable access to the parameters; invalidates outstanding caches.
    pub fn layers_mut(&mut self) -> &mut [Dense] {
        self.stamp = fresh_stamp();
        &mut self.layers
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    /// Widths from input to output.
    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Dense::outputs))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        param_count(&self.sizes())
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    /// Overwrites all parameters from a flat vector in layer order
    /// (each layer's weights row-major, then its biases).
    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Dimension(format!(
                "{} values for {} parameters",
                flat.len(),
                self.param_count()
            )));
        }
        let mut it = flat.iter();
        for layer in self.layers_mut() {
            for (p, v) in layer.weight.iter_mut().chain(layer.bias.iter_mut()).zip(&mut it) {
                *p = *v;
            }
        }
        Ok(())
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs(), l.outputs()))
                .collect(),
        }
    }

    /// Batched forward pass without keeping a cache.
    pub fn predict(&self, input: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(input.ncols())?;
        let mut a = input.to_owned();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.weight.t());
            z += &layer.bias;
            if l < last {
                self.hidden.apply(&mut z);
            }
            a = z;
        }
        Ok(a)
    }

    /// Batched forward pass; the cache feeds [`Mlp::backward`].
    pub fn forward_batch(&self, input: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(input.ncols())?;
        let last = self.layers.len() - 1;
        let mut activations = Vec::with_capacity(self.layers.len());
        activations.push(input.to_owned());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = activations[l].dot(&layer.weight.t());
            z += &layer.bias;
            if l < last {
                self.hidden.apply(&mut z);
                activations.push(z);
            } else {
                return Ok((
                    z,
                    ForwardCache {
                        stamp: self.stamp,
                        activations,
                    },
                ));
            }
        }
        unreachable!("network has at least one layer")
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        let x = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| Error::Dimension(e.to_string()))?;
        let (out, cache) = self.forward_batch(x)?;
        Ok((out.into_raw_vec_and_offset().0, cache))
    }

    /// Reverse pass for a loss whose gradient with respect to the outputs is
    /// `output_grad`. Returns parameter gradients summed over the batch and the
    /// gradient with respect to the inputs.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        output_grad: ArrayView2<f64>,
    ) -> Result<(Gradients, Array2<f64>)> {
        self.backward_impl(cache, output_grad, true)
            .map(|(g, x)| (g.expect("requested"), x))
    }

    /// Like [`Mlp::backward`] but only propagates to the inputs.
    pub fn input_gradient(
        &self,
        cache: &ForwardCache,
        output_grad: ArrayView2<f64>,
    ) -> Result<Array2<f64>> {
        self.backward_impl(cache, output_grad, false).map(|(_, x)| x)
    }

    /// Single-sample convenience wrapper around [`Mlp::backward`].
    pub fn backward_single(
        &self,
        cache: &ForwardCache,
        output_grad: &[f64],
    ) -> Result<(Gradients, Vec<f64>)> {
        let g = ArrayView2::from_shape((1, output_grad.len()), output_grad)
            .map_err(|e| Error::Dimension(e.to_string()))?;
        let (grads, dx) = self.backward(cache, g)?;
        Ok((grads, dx.into_raw_vec_and_offset().0))
    }

    fn backward_impl(
        &self,
        cache: &ForwardCache,
        output_grad: ArrayView2<f64>,
        want_params: bool,
    ) -> Result<(Option<Gradients>, Array2<f64>)> {
        if cache.stamp != self.stamp {
            return Err(Error::StaleCache(
                "parameters changed since the forward pass".into(),
            ));
        }
        if cache.activations.len() != self.layers.len() {
            return Err(Error::StaleCache("layer count differs".into()));
        }
        let batch = cache.batch_size();
        if output_grad.dim() != (batch, self.output_dim()) {
            return Err(Error::Dimension(format!(
                "output gradient {:?}, expected ({batch}, {})",
                output_grad.dim(),
                self.output_dim()
            )));
        }
        let mut grads = want_params.then(|| Vec::with_capacity(self.layers.len()));
        let mut delta = output_grad.to_owned();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &cache.activations[l];
            if let Some(g) = grads.as_mut() {
                g.push(Dense {
                    weight: delta.t().dot(input),
                    bias: delta.sum_axis(Axis(0)),
                });
            }
            let mut next = delta.dot(&layer.weight);
            if l > 0 {
                self.hidden.backprop(&mut next, input);
            }
            delta = next;
        }
        let grads = grads.map(|mut g| {
            g.reverse();
            Gradients { layers: g }
        });
        Ok((grads, delta))
    }

    /// Polyak averaging: `self ← (1−τ)·self + τ·online`.
    pub fn polyak_update(&mut self, online: &Mlp, tau: f64) -> Result<()> {
        if self.layers.len() != online.layers.len()
            || self.layers.iter().zip(&online.layers).any(|(a, b)| !a.same_shape(b))
        {
            return Err(Error::Dimension("polyak update between different shapes".into()));
        }
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::InvalidArgument(format!("tau must be in [0, 1], got {tau}")));
        }
        for (t, o) in self.layers_mut().iter_mut().zip(&online.layers) {
            t.weight.zip_mut_with(&o.weight, |a, &b| *a = (1.0 - tau) * *a + tau * b);
            t.bias.zip_mut_with(&o.bias, |a, &b| *a = (1.0 - tau) * *a + tau * b);
        }
        Ok(())
    }

    fn check_input(&self, n: usize) -> Result<()> {
        if n != self.input_dim() {
            return Err(Error::Dimension(format!(
                "input has {n} features, network expects {}",
                self.input_dim()
            )));
        }
        Ok(())
    }
}

/// Σ (out·in + out) over consecutive widths.
pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}
