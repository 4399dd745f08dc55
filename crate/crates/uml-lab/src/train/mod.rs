//! Shared-weight training procedures.
//!
//! All trainers share one architecture idea: per-modality adapters feed a
//! shared trunk, and the trunk is the only parameter set updated by both
//! modalities' gradients. Heads are either per-modality decoders
//! (reconstruction / next-embedding prediction) or a single shared
//! classifier.
//!
//! RNG discipline: every parameter group and every data-order decision has
//! its own seed stream, so a joint run with the auxiliary loss weight set to
//! zero consumes exactly the same random numbers on the primary pathway as a
//! unimodal run and reproduces its trajectory bitwise.

mod autoencoder;
mod emb_io;
mod probe;
mod ssl;
mod supervised;
mod synthetic;

pub use autoencoder::{train_shared_autoencoder, GaussianArmReport, GaussianExperimentConfig,
    GaussianExperimentReport};
pub use emb_io::{read_embeddings, write_embeddings, LabeledEmbeddings};
pub use probe::linear_probe_accuracy;
pub use ssl::{train_ssl_shared_trunk, SslArch, SslOutcome};
pub use supervised::{
    evaluate_accuracy, init_head_from_class_means, train_supervised, train_supervised_unimodal,
    SupervisedArch, SupervisedOutcome,
};
pub use synthetic::{
    make_sequence_task, make_supervised_task, SequenceDataset, SequenceTask, SequenceTaskConfig,
    SupervisedTask, SupervisedTaskConfig,
};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::neural::{AdamState, DenseNet};

/// How the shared classifier is initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadInit {
    Zero,
    Random,
    /// Rows set to per-class mean auxiliary embeddings in trunk-output
    /// space, computed from the freshly initialized auxiliary pathway.
    ClassMeanAuxiliary,
}

/// Schedule and loss weights for shared-weight training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Auxiliary-loss weight; 0 skips auxiliary batches entirely.
    pub lambda: f64,
    /// Auxiliary batches per primary batch; fractional parts are taken
    /// stochastically from the schedule stream.
    pub batch_ratio: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Primary-only warmup epochs before auxiliary batches start.
    pub curriculum_step: usize,
    pub head_init: HeadInit,
    pub lr: f64,
    /// Keep the auxiliary adapter at its initialization (the frozen
    /// auxiliary-encoder regime).
    pub freeze_adapter_y: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 1.0,
            batch_ratio: 1.0,
            epochs: 30,
            batch_size: 16,
            seed: 0,
            curriculum_step: 0,
            head_init: HeadInit::Random,
            lr: 1e-3,
            freeze_adapter_y: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 || !self.lambda.is_finite() {
            return Err(Error::invalid("lambda must be finite and >= 0"));
        }
        if !(self.batch_ratio > 0.0) || !self.batch_ratio.is_finite() {
            return Err(Error::invalid("batch_ratio must be finite and > 0"));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch_size must be >= 1"));
        }
        if self.curriculum_step > self.epochs {
            return Err(Error::invalid("curriculum_step must not exceed epochs"));
        }
        if !(self.lr > 0.0) {
            return Err(Error::invalid("lr must be > 0"));
        }
        Ok(())
    }
}

/// Record of one training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean primary-modality loss per epoch.
    pub epoch_losses_x: Vec<f64>,
    /// Mean auxiliary loss per epoch; `None` for epochs in which no
    /// auxiliary batch ran.
    pub epoch_losses_y: Vec<Option<f64>>,
    /// Final validation metrics (accuracy, reconstruction MSE, ...).
    pub validation: BTreeMap<String, f64>,
    /// Echo of the configuration that produced the run.
    pub config: TrainConfig,
    /// SHA-256 over all trained parameters.
    pub param_digest: String,
    /// The exact modality sequence of processed batches ('x' / 'y').
    pub batch_schedule: String,
}

/// The shared-weight network: modality adapters, one trunk, and heads.
#[derive(Debug, Clone)]
pub struct SharedNet {
    pub adapter_x: DenseNet,
    pub adapter_y: Option<DenseNet>,
    pub trunk: DenseNet,
    pub heads: SharedHeads,
}

/// Per-modality decoders or one shared classifier.
#[derive(Debug, Clone)]
pub enum SharedHeads {
    Decoders {
        head_x: DenseNet,
        head_y: Option<DenseNet>,
    },
    Classifier(DenseNet),
}

impl SharedNet {
    pub fn validate(&self) -> Result<()> {
        let z = self.trunk.input_dim();
        if self.adapter_x.output_dim() != z {
            return Err(Error::invalid("adapter_x output does not match trunk input"));
        }
        if let Some(ay) = &self.adapter_y {
            if ay.output_dim() != z {
                return Err(Error::invalid("adapter_y output does not match trunk input"));
            }
        }
        let t_out = self.trunk.output_dim();
        match &self.heads {
            SharedHeads::Decoders { head_x, head_y } => {
                if head_x.input_dim() != t_out {
                    return Err(Error::invalid("head_x input does not match trunk output"));
                }
                if let Some(hy) = head_y {
                    if hy.input_dim() != t_out {
                        return Err(Error::invalid("head_y input does not match trunk output"));
                    }
                }
            }
            SharedHeads::Classifier(c) => {
                if c.input_dim() != t_out {
                    return Err(Error::invalid("classifier input does not match trunk output"));
                }
            }
        }
        Ok(())
    }

    /// Digest over the primary pathway (adapter_x, trunk, head used by X).
    pub fn primary_digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        for net in [&self.adapter_x, &self.trunk] {
            for v in net.flatten_params() {
                hasher.update(v.to_le_bytes());
            }
        }
        let head = match &self.heads {
            SharedHeads::Decoders { head_x, .. } => head_x,
            SharedHeads::Classifier(c) => c,
        };
        for v in head.flatten_params() {
            hasher.update(v.to_le_bytes());
        }
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Digest over every parameter in the net.
    pub fn full_digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        let mut feed = |net: &DenseNet| {
            for v in net.flatten_params() {
                hasher.update(v.to_le_bytes());
            }
        };
        feed(&self.adapter_x);
        if let Some(ay) = &self.adapter_y {
            feed(ay);
        }
        feed(&self.trunk);
        match &self.heads {
            SharedHeads::Decoders { head_x, head_y } => {
                feed(head_x);
                if let Some(hy) = head_y {
                    feed(hy);
                }
            }
            SharedHeads::Classifier(c) => feed(c),
        }
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// One gradient step through `adapter -> trunk -> head`.
///
/// The loss gradient is scaled by `loss_weight` before backpropagation, and
/// each unfrozen component takes one Adam step. Returns the (unweighted)
/// loss value.
pub(crate) struct PathComponents<'a> {
    pub adapter: &'a mut DenseNet,
    pub adapter_opt: &'a mut AdamState,
    pub adapter_frozen: bool,
    pub trunk: &'a mut DenseNet,
    pub trunk_opt: &'a mut AdamState,
    pub head: &'a mut DenseNet,
    pub head_opt: &'a mut AdamState,
}

pub(crate) enum PathTarget<'a> {
    Continuous(&'a DMatrix<f64>),
    Labels(&'a [usize]),
}

pub(crate) fn step_path(
    parts: &mut PathComponents<'_>,
    inputs: &DMatrix<f64>,
    target: PathTarget<'_>,
    loss_weight: f64,
) -> Result<f64> {
    let a_cache = parts.adapter.forward(inputs)?;
    let t_cache = parts.trunk.forward(a_cache.output())?;
    let h_cache = parts.head.forward(t_cache.output())?;
    let (loss, mut loss_grad) = match target {
        PathTarget::Continuous(t) => crate::neural::mse_loss(h_cache.output(), t)?,
        PathTarget::Labels(l) => crate::neural::cross_entropy_loss(h_cache.output(), l)?,
    };
    loss_grad *= loss_weight;
    let (head_grads, to_trunk) = parts.head.backward(&h_cache, &loss_grad)?;
    let (trunk_grads, to_adapter) = parts.trunk.backward(&t_cache, &to_trunk)?;
    parts.head_opt.step_net(parts.head, &head_grads)?;
    parts.trunk_opt.step_net(parts.trunk, &trunk_grads)?;
    if !parts.adapter_frozen {
        let (adapter_grads, _) = parts.adapter.backward(&a_cache, &to_adapter)?;
        parts.adapter_opt.step_net(parts.adapter, &adapter_grads)?;
    }
    Ok(loss)
}

/// Shuffled minibatch index schedule; reshuffles whenever exhausted, using
/// only its own RNG stream.
pub(crate) struct BatchSampler {
    order: Vec<usize>,
    cursor: usize,
    batch_size: usize,
    rng: ChaCha8Rng,
}

impl BatchSampler {
    pub fn new(n: usize, batch_size: usize, mut rng: ChaCha8Rng) -> Self {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        BatchSampler {
            order,
            cursor: 0,
            batch_size,
            rng,
        }
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.order.len().div_ceil(self.batch_size)
    }

    pub fn next_batch(&mut self) -> Vec<usize> {
        if self.cursor >= self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let batch = self.order[self.cursor..end].to_vec();
        self.cursor = end;
        batch
    }
}

/// Number of auxiliary batches to run after one primary batch: `floor(r)`
/// plus one more with probability `frac(r)`.
pub(crate) fn aux_steps(ratio: f64, rng: &mut ChaCha8Rng) -> usize {
    let base = ratio.floor();
    let frac = ratio - base;
    let extra = if frac > 0.0 && rng.random::<f64>() < frac {
        1
    } else {
        0
    };
    base as usize + extra
}

pub(crate) fn gather_rows(data: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), data.ncols(), |i, j| data[(rows[i], j)])
}
