//! Self-supervised shared-trunk training: next-embedding prediction.
//!
//! Each modality's sequences pass through a modality adapter into a shared
//! causal-window trunk (the trunk sees the last `window` adapter outputs,
//! flattened, zero-padded at the start), and a modality decoder predicts
//! the next input embedding. The loss aligns predictions at positions
//! `0..T-2` with inputs at `1..T-1`. The inference representation of a
//! sequence is the mean of the trunk outputs over all positions.

use nalgebra::DMatrix;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::neural::{mse_loss, Activation, AdamState, DenseNet};
use crate::rng::{stream, substream};

use super::{
    aux_steps, BatchSampler, LabeledEmbeddings, SequenceDataset, SharedHeads, SharedNet,
    TrainConfig, TrainReport,
};

/// Architecture of the self-supervised shared net.
#[derive(Debug, Clone, PartialEq)]
pub struct SslArch {
    pub dim_x: usize,
    pub dim_y: usize,
    /// Adapter output width per position.
    pub embed_dim: usize,
    /// Causal window length seen by the trunk.
    pub window: usize,
    pub trunk_hidden: Vec<usize>,
    pub trunk_out: usize,
}

impl Default for SslArch {
    fn default() -> Self {
        SslArch {
            dim_x: 16,
            dim_y: 12,
            embed_dim: 16,
            window: 4,
            trunk_hidden: vec![32],
            trunk_out: 16,
        }
    }
}

impl SslArch {
    fn build(&self, seed: u64) -> Result<SharedNet> {
        let adapter_x = DenseNet::random(
            &[self.dim_x, self.embed_dim],
            &[Activation::Identity],
            &mut substream(seed, stream::INIT_ADAPTER_X),
        )?;
        let adapter_y = DenseNet::random(
            &[self.dim_y, self.embed_dim],
            &[Activation::Identity],
            &mut substream(seed, stream::INIT_ADAPTER_Y),
        )?;
        let mut dims = vec![self.window * self.embed_dim];
        dims.extend(&self.trunk_hidden);
        dims.push(self.trunk_out);
        let mut acts = vec![Activation::ReLU; self.trunk_hidden.len()];
        acts.push(Activation::Identity);
        let trunk = DenseNet::random(&dims, &acts, &mut substream(seed, stream::INIT_TRUNK))?;
        let head_x = DenseNet::random(
            &[self.trunk_out, self.dim_x],
            &[Activation::Identity],
            &mut substream(seed, stream::INIT_HEAD_X),
        )?;
        let head_y = DenseNet::random(
            &[self.trunk_out, self.dim_y],
            &[Activation::Identity],
            &mut substream(seed, stream::INIT_HEAD_Y),
        )?;
        // The trunk consumes a window of adapter outputs, so the generic
        // adapter/trunk dimension check does not apply; check the windowed
        // contract instead.
        if trunk.input_dim() != self.window * self.embed_dim {
            return Err(Error::invalid("trunk input must be window * embed_dim"));
        }
        Ok(SharedNet {
            adapter_x,
            adapter_y: Some(adapter_y),
            trunk,
            heads: SharedHeads::Decoders {
                head_x,
                head_y: Some(head_y),
            },
        })
    }
}

fn validate_sequences(data: &SequenceDataset, dim: usize, name: &str) -> Result<()> {
    if data.is_empty() {
        return Err(Error::invalid(format!("{name} has no sequences")));
    }
    let t_len = data.seq_len();
    if t_len < 2 {
        return Err(Error::invalid(format!(
            "{name} sequences must have length >= 2 for next-embedding prediction"
        )));
    }
    for (i, s) in data.sequences.iter().enumerate() {
        if s.nrows() != t_len {
            return Err(Error::invalid(format!("{name} sequence {i} has ragged length")));
        }
        if s.ncols() != dim {
            return Err(Error::invalid(format!(
                "{name} sequence {i} has dim {}, expected {dim}",
                s.ncols()
            )));
        }
    }
    Ok(())
}

/// Stack a batch of sequences into a `(batch * seq_len) x dim` matrix with
/// row `s * seq_len + t` holding sequence `s` position `t`.
fn stack_sequences(data: &SequenceDataset, idx: &[usize]) -> DMatrix<f64> {
    let t_len = data.seq_len();
    let dim = data.dim();
    let mut out = DMatrix::zeros(idx.len() * t_len, dim);
    for (s, &seq_idx) in idx.iter().enumerate() {
        let seq = &data.sequences[seq_idx];
        for t in 0..t_len {
            for j in 0..dim {
                out[(s * t_len + t, j)] = seq[(t, j)];
            }
        }
    }
    out
}

/// Causal windows over per-position embeddings: row `(s, t)` is the
/// concatenation of positions `t - window + 1 ..= t` (zero-padded before the
/// sequence start). Only positions `0..n_positions` are emitted.
fn build_windows(
    z: &DMatrix<f64>,
    batch: usize,
    t_len: usize,
    n_positions: usize,
    window: usize,
) -> DMatrix<f64> {
    let z_dim = z.ncols();
    let mut out = DMatrix::zeros(batch * n_positions, window * z_dim);
    for s in 0..batch {
        for t in 0..n_positions {
            for (slot, offset) in (0..window).rev().enumerate() {
                // slot 0 is the oldest position in the window.
                let p = t as isize - offset as isize;
                if p < 0 {
                    continue;
                }
                let src = s * t_len + p as usize;
                for j in 0..z_dim {
                    out[(s * n_positions + t, slot * z_dim + j)] = z[(src, j)];
                }
            }
        }
    }
    out
}

/// Scatter window gradients back onto per-position embedding gradients.
fn scatter_window_grads(
    wgrad: &DMatrix<f64>,
    batch: usize,
    t_len: usize,
    n_positions: usize,
    window: usize,
    z_dim: usize,
) -> DMatrix<f64> {
    let mut zgrad = DMatrix::zeros(batch * t_len, z_dim);
    for s in 0..batch {
        for t in 0..n_positions {
            for (slot, offset) in (0..window).rev().enumerate() {
                let p = t as isize - offset as isize;
                if p < 0 {
                    continue;
                }
                let dst = s * t_len + p as usize;
                for j in 0..z_dim {
                    zgrad[(dst, j)] += wgrad[(s * n_positions + t, slot * z_dim + j)];
                }
            }
        }
    }
    zgrad
}

struct SslPath<'a> {
    adapter: &'a mut DenseNet,
    adapter_opt: &'a mut AdamState,
    adapter_frozen: bool,
    trunk: &'a mut DenseNet,
    trunk_opt: &'a mut AdamState,
    decoder: &'a mut DenseNet,
    decoder_opt: &'a mut AdamState,
}

/// One next-embedding prediction step over a batch of sequences.
fn ssl_step(
    path: &mut SslPath<'_>,
    data: &SequenceDataset,
    idx: &[usize],
    window: usize,
    loss_weight: f64,
) -> Result<f64> {
    let batch = idx.len();
    let t_len = data.seq_len();
    let dim = data.dim();
    let inputs = stack_sequences(data, idx);
    let a_cache = path.adapter.forward(&inputs)?;
    let z = a_cache.output();
    let z_dim = z.ncols();
    let n_pred = t_len - 1;
    let windows = build_windows(z, batch, t_len, n_pred, window);
    let t_cache = path.trunk.forward(&windows)?;
    let d_cache = path.decoder.forward(t_cache.output())?;
    // Targets: the next input embedding.
    let mut targets = DMatrix::zeros(batch * n_pred, dim);
    for s in 0..batch {
        for t in 0..n_pred {
            for j in 0..dim {
                targets[(s * n_pred + t, j)] = inputs[(s * t_len + t + 1, j)];
            }
        }
    }
    let (loss, mut grad) = mse_loss(d_cache.output(), &targets)?;
    grad *= loss_weight;
    let (dec_grads, to_trunk) = path.decoder.backward(&d_cache, &grad)?;
    let (trunk_grads, to_windows) = path.trunk.backward(&t_cache, &to_trunk)?;
    path.decoder_opt.step_net(path.decoder, &dec_grads)?;
    path.trunk_opt.step_net(path.trunk, &trunk_grads)?;
    if !path.adapter_frozen {
        let zgrad = scatter_window_grads(&to_windows, batch, t_len, n_pred, window, z_dim);
        let (adapter_grads, _) = path.adapter.backward(&a_cache, &zgrad)?;
        path.adapter_opt.step_net(path.adapter, &adapter_grads)?;
    }
    Ok(loss)
}

/// Outcome of a self-supervised run.
#[derive(Debug, Clone)]
pub struct SslOutcome {
    pub net: SharedNet,
    pub report: TrainReport,
    pub arch: SslArch,
}

impl SslOutcome {
    /// Mean-pooled trunk representations of X sequences.
    pub fn representations_x(&self, data: &SequenceDataset) -> Result<LabeledEmbeddings> {
        validate_sequences(data, self.arch.dim_x, "X")?;
        mean_pooled_representations(&self.net.adapter_x, &self.net.trunk, data, self.arch.window)
    }
}

/// Mean of trunk outputs over every sequence position.
pub(crate) fn mean_pooled_representations(
    adapter: &DenseNet,
    trunk: &DenseNet,
    data: &SequenceDataset,
    window: usize,
) -> Result<LabeledEmbeddings> {
    let t_len = data.seq_len();
    let n = data.len();
    let idx: Vec<usize> = (0..n).collect();
    let inputs = stack_sequences(data, &idx);
    let z = adapter.output(&inputs)?;
    let windows = build_windows(&z, n, t_len, t_len, window);
    let reps = trunk.output(&windows)?;
    let mut pooled = DMatrix::zeros(n, reps.ncols());
    for s in 0..n {
        for t in 0..t_len {
            for j in 0..reps.ncols() {
                pooled[(s, j)] += reps[(s * t_len + t, j)] / t_len as f64;
            }
        }
    }
    LabeledEmbeddings::new(pooled, data.labels.clone())
}

/// Train the shared trunk on unpaired sequence datasets from both
/// modalities with next-embedding prediction. `lambda = 0` skips the
/// auxiliary modality entirely.
pub fn train_ssl_shared_trunk(
    seq_x: &SequenceDataset,
    seq_y: &SequenceDataset,
    arch: &SslArch,
    cfg: &TrainConfig,
) -> Result<SslOutcome> {
    cfg.validate()?;
    validate_sequences(seq_x, arch.dim_x, "X")?;
    let aux_enabled = cfg.lambda > 0.0 && !seq_y.is_empty();
    if aux_enabled {
        validate_sequences(seq_y, arch.dim_y, "Y")?;
    }
    let mut net = arch.build(cfg.seed)?;
    let SharedHeads::Decoders {
        ref mut head_x,
        ref mut head_y,
    } = net.heads
    else {
        unreachable!("ssl nets are built with decoders");
    };
    let mut opt_ax = AdamState::for_net(&net.adapter_x, cfg.lr);
    let mut opt_ay = AdamState::for_net(net.adapter_y.as_ref().expect("built"), cfg.lr);
    let mut opt_trunk = AdamState::for_net(&net.trunk, cfg.lr);
    let mut opt_hx = AdamState::for_net(head_x, cfg.lr);
    let mut opt_hy = AdamState::for_net(head_y.as_ref().expect("built"), cfg.lr);

    let mut sampler_x = BatchSampler::new(
        seq_x.len(),
        cfg.batch_size,
        substream(cfg.seed, stream::BATCH_ORDER_X),
    );
    let mut sampler_y = BatchSampler::new(
        seq_y.len().max(1),
        cfg.batch_size,
        substream(cfg.seed, stream::BATCH_ORDER_Y),
    );
    let mut schedule_rng = substream(cfg.seed, stream::SCHEDULE);

    let mut epoch_losses_x = Vec::with_capacity(cfg.epochs);
    let mut epoch_losses_y: Vec<Option<f64>> = Vec::with_capacity(cfg.epochs);
    let mut schedule = String::new();
    for epoch in 0..cfg.epochs {
        let aux_this_epoch = aux_enabled && epoch >= cfg.curriculum_step;
        let mut loss_x_sum = 0.0;
        let mut x_steps = 0usize;
        let mut loss_y_sum = 0.0;
        let mut y_steps = 0usize;
        for _ in 0..sampler_x.batches_per_epoch() {
            let idx = sampler_x.next_batch();
            let mut path = SslPath {
                adapter: &mut net.adapter_x,
                adapter_opt: &mut opt_ax,
                adapter_frozen: false,
                trunk: &mut net.trunk,
                trunk_opt: &mut opt_trunk,
                decoder: head_x,
                decoder_opt: &mut opt_hx,
            };
            loss_x_sum += ssl_step(&mut path, seq_x, &idx, arch.window, 1.0)?;
            x_steps += 1;
            schedule.push('x');
            if aux_this_epoch {
                for _ in 0..aux_steps(cfg.batch_ratio, &mut schedule_rng) {
                    let idx_y = sampler_y.next_batch();
                    let mut path = SslPath {
                        adapter: net.adapter_y.as_mut().expect("built"),
                        adapter_opt: &mut opt_ay,
                        adapter_frozen: cfg.freeze_adapter_y,
                        trunk: &mut net.trunk,
                        trunk_opt: &mut opt_trunk,
                        decoder: head_y.as_mut().expect("built"),
                        decoder_opt: &mut opt_hy,
                    };
                    loss_y_sum += ssl_step(&mut path, seq_y, &idx_y, arch.window, cfg.lambda)?;
                    y_steps += 1;
                    schedule.push('y');
                }
            }
        }
        epoch_losses_x.push(loss_x_sum / x_steps as f64);
        epoch_losses_y.push((y_steps > 0).then(|| loss_y_sum / y_steps as f64));
    }

    let mut validation = BTreeMap::new();
    validation.insert(
        "final_train_loss_x".to_string(),
        *epoch_losses_x.last().expect("epochs >= 1"),
    );
    let report = TrainReport {
        epoch_losses_x,
        epoch_losses_y,
        validation,
        config: cfg.clone(),
        param_digest: net.full_digest(),
        batch_schedule: schedule,
    };
    Ok(SslOutcome {
        net,
        report,
        arch: arch.clone(),
    })
}
