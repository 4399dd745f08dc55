//! Minimal dense-network substrate: linear layers with ReLU or identity
//! activations, reverse-mode gradients, MSE and cross-entropy losses, and
//! Adam. Everything is `f64` and full-batch matrices (batch x features);
//! the only implicit broadcast is the bias row.
//!
//! The ReLU subgradient at exactly zero is taken to be 0, so gradient
//! checks are deterministic.

mod adam;
mod gradcheck;
mod io;
mod loss;

pub use adam::AdamState;
pub use gradcheck::{finite_diff_gradient, max_relative_error};
pub use io::{load_net, save_net, ArchitectureSidecar};
pub use loss::{cross_entropy_loss, mse_loss};

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Activation applied elementwise after a layer's affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    ReLU,
    Identity,
}

impl Activation {
    fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::ReLU => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative with the ReLU'(0) = 0 convention.
    fn derivative(&self, z: f64) -> f64 {
        match self {
            Activation::ReLU => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// One dense layer: `out = act(in * weight + bias)`.
///
/// `weight` is `in_features x out_features`; `bias` is a `1 x out_features`
/// row broadcast over the batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: DMatrix<f64>,
    pub bias: DMatrix<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn in_features(&self) -> usize {
        self.weight.nrows()
    }

    pub fn out_features(&self) -> usize {
        self.weight.ncols()
    }
}

/// An ordered stack of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layers: Vec<Layer>,
}

impl DenseNet {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("a net needs at least one layer"));
        }
        for (k, layer) in layers.iter().enumerate() {
            if layer.bias.nrows() != 1 || layer.bias.ncols() != layer.out_features() {
                return Err(Error::invalid(format!("layer {k} bias shape mismatch")));
            }
            if k > 0 && layers[k - 1].out_features() != layer.in_features() {
                return Err(Error::invalid(format!(
                    "layer {k} input dim {} does not chain from previous output {}",
                    layer.in_features(),
                    layers[k - 1].out_features()
                )));
            }
            if !layer.weight.iter().chain(layer.bias.iter()).all(|x| x.is_finite()) {
                return Err(Error::invalid(format!("layer {k} has non-finite parameters")));
            }
        }
        Ok(DenseNet { layers })
    }

    /// He-style initialization: weights `N(0, 2 / fan_in)`, zero biases.
    pub fn random(dims: &[usize], activations: &[Activation], rng: &mut ChaCha8Rng) -> Result<Self> {
        if dims.len() < 2 || activations.len() != dims.len() - 1 {
            return Err(Error::invalid("dims and activations lengths do not chain"));
        }
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let scale = (2.0 / fan_in as f64).sqrt();
                let mut weight = DMatrix::zeros(fan_in, fan_out);
                for i in 0..fan_in {
                    for j in 0..fan_out {
                        weight[(i, j)] = rng.sample::<f64, _>(StandardNormal) * scale;
                    }
                }
                Layer {
                    weight,
                    bias: DMatrix::zeros(1, fan_out),
                    activation,
                }
            })
            .collect();
        DenseNet::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_features()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_features()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    /// Run the net, caching the per-layer pre- and post-activations needed
    /// by [`DenseNet::backward`].
    pub fn forward(&self, inputs: &DMatrix<f64>) -> Result<ForwardCache> {
        if inputs.ncols() != self.input_dim() {
            return Err(Error::invalid(format!(
                "input has {} features, net expects {}",
                inputs.ncols(),
                self.input_dim()
            )));
        }
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.layers.len());
        let mut current = inputs.clone();
        for layer in &self.layers {
            let mut z = &current * &layer.weight;
            for i in 0..z.nrows() {
                for j in 0..z.ncols() {
                    z[(i, j)] += layer.bias[(0, j)];
                }
            }
            let a = z.map(|v| layer.activation.apply(v));
            pre.push(z);
            post.push(a.clone());
            current = a;
        }
        Ok(ForwardCache {
            inputs: inputs.clone(),
            pre,
            post,
        })
    }

    /// Plain output without keeping the cache.
    pub fn output(&self, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.forward(inputs)?.into_output())
    }

    /// Backpropagate `output_grad` (dLoss/dOutput) through the cached
    /// forward pass. Returns per-layer parameter gradients and the gradient
    /// with respect to the inputs, so separate nets chain.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        output_grad: &DMatrix<f64>,
    ) -> Result<(Gradients, DMatrix<f64>)> {
        let n_layers = self.layers.len();
        if cache.pre.len() != n_layers {
            return Err(Error::invalid("forward cache does not match this net"));
        }
        let out = &cache.post[n_layers - 1];
        if output_grad.shape() != out.shape() {
            return Err(Error::invalid(format!(
                "output gradient shape {:?} does not match output {:?}",
                output_grad.shape(),
                out.shape()
            )));
        }
        let mut per_layer = vec![(DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)); n_layers];
        let mut grad = output_grad.clone();
        for l in (0..n_layers).rev() {
            let layer = &self.layers[l];
            let pre = &cache.pre[l];
            let dz = DMatrix::from_fn(grad.nrows(), grad.ncols(), |i, j| {
                grad[(i, j)] * layer.activation.derivative(pre[(i, j)])
            });
            let below = if l == 0 { &cache.inputs } else { &cache.post[l - 1] };
            let d_weight = below.transpose() * &dz;
            let mut d_bias = DMatrix::zeros(1, layer.out_features());
            for j in 0..dz.ncols() {
                d_bias[(0, j)] = dz.column(j).sum();
            }
            per_layer[l] = (d_weight, d_bias);
            grad = dz * layer.weight.transpose();
        }
        Ok((Gradients { per_layer }, grad))
    }

    /// Parameters in a fixed order: `W0, b0, W1, b1, ...`.
    pub fn params(&self) -> Vec<&DMatrix<f64>> {
        self.layers
            .iter()
            .flat_map(|l| [&l.weight, &l.bias])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut DMatrix<f64>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    /// Flattened copy of all parameters, in `params()` order, each matrix
    /// row-major.
    pub fn flatten_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for p in self.params() {
            for i in 0..p.nrows() {
                for j in 0..p.ncols() {
                    out.push(p[(i, j)]);
                }
            }
        }
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::invalid("flat parameter length mismatch"));
        }
        let mut k = 0;
        for p in self.params_mut() {
            for i in 0..p.nrows() {
                for j in 0..p.ncols() {
                    p[(i, j)] = flat[k];
                    k += 1;
                }
            }
        }
        Ok(())
    }

    /// SHA-256 digest of the parameter bytes (little-endian), for
    /// reproducibility assertions.
    pub fn param_digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        for v in self.flatten_params() {
            hasher.update(v.to_le_bytes());
        }
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Cached activations from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub inputs: DMatrix<f64>,
    /// Pre-activation values per layer.
    pub pre: Vec<DMatrix<f64>>,
    /// Post-activation values per layer.
    pub post: Vec<DMatrix<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &DMatrix<f64> {
        self.post.last().expect("nets have at least one layer")
    }

    pub fn into_output(mut self) -> DMatrix<f64> {
        self.post.pop().expect("nets have at least one layer")
    }
}

/// Per-layer `(dWeight, dBias)` gradients, aligned with the net's layers.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub per_layer: Vec<(DMatrix<f64>, DMatrix<f64>)>,
}

impl Gradients {
    /// Zero gradients shaped like `net`.
    pub fn zeros_like(net: &DenseNet) -> Gradients {
        Gradients {
            per_layer: net
                .layers()
                .iter()
                .map(|l| {
                    (
                        DMatrix::zeros(l.in_features(), l.out_features()),
                        DMatrix::zeros(1, l.out_features()),
                    )
                })
                .collect(),
        }
    }

    pub fn add(&mut self, other: &Gradients) {
        for ((w, b), (ow, ob)) in self.per_layer.iter_mut().zip(&other.per_layer) {
            *w += ow;
            *b += ob;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for (w, b) in &mut self.per_layer {
            *w *= s;
            *b *= s;
        }
    }

    /// Flattened in the same order as [`DenseNet::flatten_params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in &self.per_layer {
            for i in 0..w.nrows() {
                for j in 0..w.ncols() {
                    out.push(w[(i, j)]);
                }
            }
            for j in 0..b.ncols() {
                out.push(b[(0, j)]);
            }
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.per_layer
            .iter()
            .map(|(w, b)| w.norm_squared() + b.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    /// Views in `params()` order, for the optimizer.
    pub fn as_list(&self) -> Vec<&DMatrix<f64>> {
        self.per_layer.iter().flat_map(|(w, b)| [w, b]).collect()
    }
}

/// A training minibatch.
#[derive(Debug, Clone)]
pub struct Batch {
    pub inputs: DMatrix<f64>,
    pub targets: Targets,
    pub modality: Option<crate::dgp::Modality>,
}

/// Either dense regression targets or class labels.
#[derive(Debug, Clone)]
pub enum Targets {
    Continuous(DMatrix<f64>),
    Labels(Vec<usize>),
}

impl Batch {
    pub fn validate(&self) -> Result<()> {
        match &self.targets {
            Targets::Continuous(t) => {
                if t.nrows() != self.inputs.nrows() {
                    return Err(Error::invalid("batch target rows do not match inputs"));
                }
            }
            Targets::Labels(l) => {
                if l.len() != self.inputs.nrows() {
                    return Err(Error::invalid("batch label count does not match inputs"));
                }
            }
        }
        Ok(())
    }
}
