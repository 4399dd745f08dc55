//! The Gaussian budget experiment: a shared autoencoder trained on
//! attenuated-projection data.
//!
//! Two arms share one sample budget. The unimodal arm trains on X alone;
//! the joint arm splits the budget evenly between unpaired X and Y batches
//! alternating 1:1. Both report reconstruction MSE of X on a validation set
//! drawn from the unattenuated spec, where the shared components X barely
//! saw during training carry full strength.
//!
//! Architecture, data dimensions, noise and attenuation follow the fixed
//! configuration of [`crate::dgp::make_attenuated_gaussian_spec`]:
//! 50-dimensional observations, 128-wide modality adapters, a shared
//! two-layer ReLU encoder into a 10-dimensional latent, a shared two-layer
//! decoder back to width 128, and modality heads back to 50.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::dgp::{make_attenuated_gaussian_spec, sample_fresh_latent_observations, Modality};
use crate::error::{Error, Result};
use crate::neural::{mse_loss, Activation, AdamState, DenseNet};
use crate::rng::{derive, stream, substream};

use super::{gather_rows, BatchSampler, SharedHeads, SharedNet};

const OBS_DIM: usize = 50;
const ADAPTER_DIM: usize = 128;
const LATENT_DIM: usize = 10;

/// Schedule of the Gaussian budget experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianExperimentConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Total training-sample budget (the unimodal arm uses all of it on X;
    /// the joint arm splits it evenly between X and Y).
    pub total_samples: usize,
    /// Validation samples drawn from the unattenuated spec.
    pub val_samples: usize,
}

impl Default for GaussianExperimentConfig {
    fn default() -> Self {
        GaussianExperimentConfig {
            epochs: 30,
            batch_size: 128,
            lr: 1e-3,
            total_samples: 10_000,
            val_samples: 2_000,
        }
    }
}

impl GaussianExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch_size must be >= 1"));
        }
        if self.total_samples < 2 || self.val_samples == 0 {
            return Err(Error::invalid("sample counts too small"));
        }
        if !(self.lr > 0.0) {
            return Err(Error::invalid("lr must be > 0"));
        }
        Ok(())
    }
}

/// Result of one training arm.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianArmReport {
    /// Reconstruction MSE of X on the unattenuated validation set.
    pub val_mse_x: f64,
    pub epoch_losses_x: Vec<f64>,
    pub epoch_losses_y: Vec<Option<f64>>,
    pub param_digest: String,
}

/// Result of both arms plus the shared configuration echo.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianExperimentReport {
    pub seed: u64,
    pub config: GaussianExperimentConfig,
    pub unimodal: GaussianArmReport,
    pub joint: GaussianArmReport,
    /// Sample allocation actually used: (x_unimodal, x_joint, y_joint).
    pub allocation: (usize, usize, usize),
    /// Notes pinned into every report (projection scaling and optimizer are
    /// artifact choices the published configuration leaves open).
    pub notes: BTreeMap<String, String>,
}

fn build_autoencoder_x(seed: u64) -> Result<(DenseNet, DenseNet, DenseNet)> {
    let adapter_x = DenseNet::random(
        &[OBS_DIM, ADAPTER_DIM],
        &[Activation::Identity],
        &mut substream(seed, stream::INIT_ADAPTER_X),
    )?;
    // Shared encoder (two linear layers with ReLU into the latent) plus
    // shared decoder (two linear layers back to the adapter width).
    let trunk = DenseNet::random(
        &[ADAPTER_DIM, ADAPTER_DIM, LATENT_DIM, ADAPTER_DIM, ADAPTER_DIM],
        &[
            Activation::ReLU,
            Activation::Identity,
            Activation::ReLU,
            Activation::Identity,
        ],
        &mut substream(seed, stream::INIT_TRUNK),
    )?;
    let head_x = DenseNet::random(
        &[ADAPTER_DIM, OBS_DIM],
        &[Activation::Identity],
        &mut substream(seed, stream::INIT_HEAD_X),
    )?;
    Ok((adapter_x, trunk, head_x))
}

fn reconstruction_mse(
    adapter: &DenseNet,
    trunk: &DenseNet,
    head: &DenseNet,
    data: &DMatrix<f64>,
) -> Result<f64> {
    let z = adapter.output(data)?;
    let r = trunk.output(&z)?;
    let recon = head.output(&r)?;
    Ok(mse_loss(&recon, data)?.0)
}

struct ArmNets {
    adapter_x: DenseNet,
    adapter_y: Option<DenseNet>,
    trunk: DenseNet,
    head_x: DenseNet,
    head_y: Option<DenseNet>,
}

fn train_arm(
    cfg: &GaussianExperimentConfig,
    seed: u64,
    data_x: &DMatrix<f64>,
    data_y: Option<&DMatrix<f64>>,
    val_x: &DMatrix<f64>,
) -> Result<GaussianArmReport> {
    let (mut adapter_x, mut trunk, mut head_x) = build_autoencoder_x(seed)?;
    let mut nets = ArmNets {
        adapter_y: None,
        head_y: None,
        adapter_x: DenseNet::random(&[1, 1], &[Activation::Identity], &mut substream(0, 0))?,
        trunk: DenseNet::random(&[1, 1], &[Activation::Identity], &mut substream(0, 0))?,
        head_x: DenseNet::random(&[1, 1], &[Activation::Identity], &mut substream(0, 0))?,
    };
    if data_y.is_some() {
        nets.adapter_y = Some(DenseNet::random(
            &[OBS_DIM, ADAPTER_DIM],
            &[Activation::Identity],
            &mut substream(seed, stream::INIT_ADAPTER_Y),
        )?);
        nets.head_y = Some(DenseNet::random(
            &[ADAPTER_DIM, OBS_DIM],
            &[Activation::Identity],
            &mut substream(seed, stream::INIT_HEAD_Y),
        )?);
    }
    let mut opt_ax = AdamState::for_net(&adapter_x, cfg.lr);
    let mut opt_trunk = AdamState::for_net(&trunk, cfg.lr);
    let mut opt_hx = AdamState::for_net(&head_x, cfg.lr);
    let mut opt_ay = nets.adapter_y.as_ref().map(|n| AdamState::for_net(n, cfg.lr));
    let mut opt_hy = nets.head_y.as_ref().map(|n| AdamState::for_net(n, cfg.lr));

    let mut sampler_x = BatchSampler::new(
        data_x.nrows(),
        cfg.batch_size,
        substream(seed, stream::BATCH_ORDER_X),
    );
    let mut sampler_y = data_y.map(|d| {
        BatchSampler::new(
            d.nrows(),
            cfg.batch_size,
            substream(seed, stream::BATCH_ORDER_Y),
        )
    });

    let mut epoch_losses_x = Vec::with_capacity(cfg.epochs);
    let mut epoch_losses_y: Vec<Option<f64>> = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let mut loss_x_sum = 0.0;
        let mut x_steps = 0usize;
        let mut loss_y_sum = 0.0;
        let mut y_steps = 0usize;
        for _ in 0..sampler_x.batches_per_epoch() {
            // X reconstruction step.
            let idx = sampler_x.next_batch();
            let batch = gather_rows(data_x, &idx);
            let a_cache = adapter_x.forward(&batch)?;
            let t_cache = trunk.forward(a_cache.output())?;
            let h_cache = head_x.forward(t_cache.output())?;
            let (loss, grad) = mse_loss(h_cache.output(), &batch)?;
            let (hg, to_trunk) = head_x.backward(&h_cache, &grad)?;
            let (tg, to_adapter) = trunk.backward(&t_cache, &to_trunk)?;
            let (ag, _) = adapter_x.backward(&a_cache, &to_adapter)?;
            opt_hx.step_net(&mut head_x, &hg)?;
            opt_trunk.step_net(&mut trunk, &tg)?;
            opt_ax.step_net(&mut adapter_x, &ag)?;
            loss_x_sum += loss;
            x_steps += 1;

            // Alternate 1:1 with a Y reconstruction step in the joint arm.
            if let (Some(data_y), Some(sampler)) = (data_y, sampler_y.as_mut()) {
                let adapter_y = nets.adapter_y.as_mut().expect("joint arm");
                let head_y = nets.head_y.as_mut().expect("joint arm");
                let oy = opt_ay.as_mut().expect("joint arm");
                let ohy = opt_hy.as_mut().expect("joint arm");
                let idx_y = sampler.next_batch();
                let batch_y = gather_rows(data_y, &idx_y);
                let a_cache = adapter_y.forward(&batch_y)?;
                let t_cache = trunk.forward(a_cache.output())?;
                let h_cache = head_y.forward(t_cache.output())?;
                let (loss_y, grad_y) = mse_loss(h_cache.output(), &batch_y)?;
                let (hg, to_trunk) = head_y.backward(&h_cache, &grad_y)?;
                let (tg, to_adapter) = trunk.backward(&t_cache, &to_trunk)?;
                let (ag, _) = adapter_y.backward(&a_cache, &to_adapter)?;
                ohy.step_net(head_y, &hg)?;
                opt_trunk.step_net(&mut trunk, &tg)?;
                oy.step_net(adapter_y, &ag)?;
                loss_y_sum += loss_y;
                y_steps += 1;
            }
        }
        epoch_losses_x.push(loss_x_sum / x_steps as f64);
        epoch_losses_y.push((y_steps > 0).then(|| loss_y_sum / y_steps as f64));
    }

    let val_mse_x = reconstruction_mse(&adapter_x, &trunk, &head_x, val_x)?;
    let net = SharedNet {
        adapter_x,
        adapter_y: nets.adapter_y,
        trunk,
        heads: SharedHeads::Decoders {
            head_x,
            head_y: nets.head_y,
        },
    };
    Ok(GaussianArmReport {
        val_mse_x,
        epoch_losses_x,
        epoch_losses_y,
        param_digest: net.full_digest(),
    })
}

/// Run both arms of the Gaussian budget experiment for one seed.
///
/// The unimodal arm trains on `total_samples` X draws; the joint arm trains
/// on the first `total_samples / 2` of the same X draws plus
/// `total_samples / 2` unpaired Y draws, keeping the budget fixed.
/// Validation reconstructions use the unattenuated spec.
pub fn train_shared_autoencoder(
    cfg: &GaussianExperimentConfig,
    seed: u64,
) -> Result<GaussianExperimentReport> {
    cfg.validate()?;
    let specs = make_attenuated_gaussian_spec(derive(seed, 0));
    let n_total = cfg.total_samples;
    let n_half = n_total / 2;
    let data_seed = derive(seed, 1);
    let x_full = sample_fresh_latent_observations(&specs.train, Modality::X, n_total, data_seed)?;
    // The joint arm's X half is the prefix of the same draw stream.
    let x_half = x_full.rows(0, n_half).into_owned();
    let y_half = sample_fresh_latent_observations(&specs.train, Modality::Y, n_half, data_seed)?;
    let val_x = sample_fresh_latent_observations(
        &specs.validation,
        Modality::X,
        cfg.val_samples,
        derive(seed, 2),
    )?;

    let unimodal = train_arm(cfg, derive(seed, 3), &x_full, None, &val_x)?;
    let joint = train_arm(cfg, derive(seed, 3), &x_half, Some(&y_half), &val_x)?;

    let mut notes = BTreeMap::new();
    notes.insert(
        "projection_entries".to_string(),
        "iid N(0, 1/d) with d the total latent dimension".to_string(),
    );
    notes.insert(
        "optimizer".to_string(),
        format!("adam lr {} beta (0.9, 0.999) eps 1e-8", cfg.lr),
    );
    Ok(GaussianExperimentReport {
        seed,
        config: cfg.clone(),
        unimodal,
        joint,
        allocation: (n_total, n_half, n_half),
        notes,
    })
}
