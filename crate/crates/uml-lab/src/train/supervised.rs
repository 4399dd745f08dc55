//! Alternating-modality supervised training with a shared classifier.
//!
//! One primary (X) batch, then `batch_ratio` auxiliary (Y) batches, all
//! through per-modality adapters into the shared trunk and shared
//! classifier head. Labels are modality-local; no pairing exists or is
//! used. With `lambda = 0` the auxiliary side is skipped entirely and the
//! run reproduces the unimodal trainer bitwise.

use nalgebra::DMatrix;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::neural::{Activation, AdamState, DenseNet};
use crate::rng::{stream, substream};

use super::{
    aux_steps, gather_rows, step_path, BatchSampler, HeadInit, LabeledEmbeddings, PathComponents,
    PathTarget, SharedHeads, SharedNet, TrainConfig, TrainReport,
};

/// Architecture of the supervised shared net.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedArch {
    pub dim_x: usize,
    pub dim_y: usize,
    /// Adapter output / trunk input width.
    pub embed_dim: usize,
    /// Hidden widths of the shared trunk (ReLU between them).
    pub trunk_hidden: Vec<usize>,
    /// Trunk output width (classifier input).
    pub trunk_out: usize,
    pub n_classes: usize,
}

impl SupervisedArch {
    fn trunk_dims(&self) -> (Vec<usize>, Vec<Activation>) {
        let mut dims = vec![self.embed_dim];
        dims.extend(&self.trunk_hidden);
        dims.push(self.trunk_out);
        let mut acts = vec![Activation::ReLU; self.trunk_hidden.len()];
        acts.push(Activation::Identity);
        (dims, acts)
    }

    fn build_x_path(&self, seed: u64) -> Result<(DenseNet, DenseNet, DenseNet)> {
        let adapter_x = DenseNet::random(
            &[self.dim_x, self.embed_dim],
            &[Activation::Identity],
            &mut substream(seed, stream::INIT_ADAPTER_X),
        )?;
        let (dims, acts) = self.trunk_dims();
        let trunk = DenseNet::random(&dims, &acts, &mut substream(seed, stream::INIT_TRUNK))?;
        let classifier = DenseNet::random(
            &[self.trunk_out, self.n_classes],
            &[Activation::Identity],
            &mut substream(seed, stream::INIT_HEAD_X),
        )?;
        Ok((adapter_x, trunk, classifier))
    }

    fn build_adapter_y(&self, seed: u64) -> Result<DenseNet> {
        DenseNet::random(
            &[self.dim_y, self.embed_dim],
            &[Activation::Identity],
            &mut substream(seed, stream::INIT_ADAPTER_Y),
        )
    }
}

/// Classifier rows from per-class mean auxiliary embeddings: row `k` is the
/// mean embedding of class `k`, bias zero.
pub fn init_head_from_class_means(
    aux_embeddings: &DMatrix<f64>,
    labels: &[usize],
    n_classes: usize,
) -> Result<DMatrix<f64>> {
    if labels.len() != aux_embeddings.nrows() {
        return Err(Error::invalid("label count does not match embeddings"));
    }
    if n_classes == 0 {
        return Err(Error::invalid("need at least one class"));
    }
    let dim = aux_embeddings.ncols();
    let mut sums = DMatrix::zeros(n_classes, dim);
    let mut counts = vec![0usize; n_classes];
    for (i, &label) in labels.iter().enumerate() {
        if label >= n_classes {
            return Err(Error::invalid(format!("label {label} outside 0..{n_classes}")));
        }
        counts[label] += 1;
        for j in 0..dim {
            sums[(label, j)] += aux_embeddings[(i, j)];
        }
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::invalid(format!(
            "class {empty} has no auxiliary samples"
        )));
    }
    for k in 0..n_classes {
        for j in 0..dim {
            sums[(k, j)] /= counts[k] as f64;
        }
    }
    Ok(sums)
}

fn validate_labels(data: &LabeledEmbeddings, n_classes: usize, name: &str) -> Result<()> {
    let labels = data.labels_or_err()?;
    if data.is_empty() {
        return Err(Error::invalid(format!("{name} dataset is empty")));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::invalid(format!(
            "{name} label {bad} outside the shared label space 0..{n_classes}"
        )));
    }
    Ok(())
}

fn classifier_accuracy(
    adapter: &DenseNet,
    trunk: &DenseNet,
    head: &DenseNet,
    data: &LabeledEmbeddings,
) -> Result<f64> {
    let labels = data.labels_or_err()?;
    let emb = adapter.output(&data.features)?;
    let rep = trunk.output(&emb)?;
    let logits = head.output(&rep)?;
    let mut correct = 0usize;
    for (i, &label) in labels.iter().enumerate() {
        let row = logits.row(i);
        let mut best = 0usize;
        for j in 1..row.ncols() {
            if row[j] > row[best] {
                best = j;
            }
        }
        if best == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / labels.len() as f64)
}

/// Accuracy of the X pathway of a trained shared net.
pub fn evaluate_accuracy(net: &SharedNet, data: &LabeledEmbeddings) -> Result<f64> {
    let SharedHeads::Classifier(head) = &net.heads else {
        return Err(Error::invalid("accuracy evaluation needs a classifier head"));
    };
    classifier_accuracy(&net.adapter_x, &net.trunk, head, data)
}

/// Outcome of a supervised run.
#[derive(Debug, Clone)]
pub struct SupervisedOutcome {
    pub net: SharedNet,
    pub report: TrainReport,
}

struct LoopData<'a> {
    data_x: &'a LabeledEmbeddings,
    data_y: Option<&'a LabeledEmbeddings>,
    val_x: Option<&'a LabeledEmbeddings>,
}

fn run_supervised_loop(
    arch: &SupervisedArch,
    data: LoopData<'_>,
    cfg: &TrainConfig,
    mut adapter_y: Option<DenseNet>,
) -> Result<SupervisedOutcome> {
    cfg.validate()?;
    validate_labels(data.data_x, arch.n_classes, "X")?;
    if let Some(y) = data.data_y {
        validate_labels(y, arch.n_classes, "Y")?;
    }
    let (mut adapter_x, mut trunk, mut classifier) = arch.build_x_path(cfg.seed)?;
    match cfg.head_init {
        HeadInit::Random => {}
        HeadInit::Zero => {
            for p in classifier.params_mut() {
                p.fill(0.0);
            }
        }
        HeadInit::ClassMeanAuxiliary => {
            let (Some(y), Some(ay)) = (data.data_y, adapter_y.as_ref()) else {
                return Err(Error::invalid(
                    "class-mean head init needs auxiliary data and pathway",
                ));
            };
            let emb = ay.output(&y.features)?;
            let rep = trunk.output(&emb)?;
            let rows = init_head_from_class_means(&rep, y.labels_or_err()?, arch.n_classes)?;
            classifier.layers_mut()[0].weight = rows.transpose();
            classifier.layers_mut()[0].bias.fill(0.0);
        }
    }

    let mut opt_ax = AdamState::for_net(&adapter_x, cfg.lr);
    let mut opt_trunk = AdamState::for_net(&trunk, cfg.lr);
    let mut opt_head = AdamState::for_net(&classifier, cfg.lr);
    let mut opt_ay = adapter_y.as_ref().map(|n| AdamState::for_net(n, cfg.lr));

    let mut sampler_x = BatchSampler::new(
        data.data_x.len(),
        cfg.batch_size,
        substream(cfg.seed, stream::BATCH_ORDER_X),
    );
    let mut sampler_y = data.data_y.map(|y| {
        BatchSampler::new(
            y.len(),
            cfg.batch_size,
            substream(cfg.seed, stream::BATCH_ORDER_Y),
        )
    });
    let mut schedule_rng = substream(cfg.seed, stream::SCHEDULE);

    let labels_x = data.data_x.labels_or_err()?.to_vec();
    let aux_enabled = cfg.lambda > 0.0 && data.data_y.is_some();

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
            let inputs = gather_rows(&data.data_x.features, &idx);
            let labels: Vec<usize> = idx.iter().map(|&i| labels_x[i]).collect();
            let mut parts = PathComponents {
                adapter: &mut adapter_x,
                adapter_opt: &mut opt_ax,
                adapter_frozen: false,
                trunk: &mut trunk,
                trunk_opt: &mut opt_trunk,
                head: &mut classifier,
                head_opt: &mut opt_head,
            };
            loss_x_sum += step_path(&mut parts, &inputs, PathTarget::Labels(&labels), 1.0)?;
            x_steps += 1;
            schedule.push('x');

            if aux_this_epoch {
                let y = data.data_y.expect("aux enabled implies data");
                let labels_y = y.labels_or_err()?;
                let sampler = sampler_y.as_mut().expect("aux enabled implies sampler");
                let ay = adapter_y.as_mut().expect("aux enabled implies adapter");
                let oy = opt_ay.as_mut().expect("aux enabled implies optimizer");
                for _ in 0..aux_steps(cfg.batch_ratio, &mut schedule_rng) {
                    let idx_y = sampler.next_batch();
                    let inputs_y = gather_rows(&y.features, &idx_y);
                    let batch_labels: Vec<usize> =
                        idx_y.iter().map(|&i| labels_y[i]).collect();
                    let mut parts = PathComponents {
                        adapter: ay,
                        adapter_opt: oy,
                        adapter_frozen: cfg.freeze_adapter_y,
                        trunk: &mut trunk,
                        trunk_opt: &mut opt_trunk,
                        head: &mut classifier,
                        head_opt: &mut opt_head,
                    };
                    loss_y_sum += step_path(
                        &mut parts,
                        &inputs_y,
                        PathTarget::Labels(&batch_labels),
                        cfg.lambda,
                    )?;
                    y_steps += 1;
                    schedule.push('y');
                }
            }
        }
        epoch_losses_x.push(loss_x_sum / x_steps as f64);
        epoch_losses_y.push((y_steps > 0).then(|| loss_y_sum / y_steps as f64));
    }

    let net = SharedNet {
        adapter_x,
        adapter_y,
        trunk,
        heads: SharedHeads::Classifier(classifier),
    };
    net.validate()?;

    let mut validation = BTreeMap::new();
    if let Some(val) = data.val_x {
        validation.insert("accuracy_x".to_string(), evaluate_accuracy(&net, val)?);
    }
    let report = TrainReport {
        epoch_losses_x,
        epoch_losses_y,
        validation,
        config: cfg.clone(),
        param_digest: net.full_digest(),
        batch_schedule: schedule,
    };
    Ok(SupervisedOutcome { net, report })
}

/// Train the shared classifier on unpaired labeled embeddings from both
/// modalities. `val_x` accuracy, when provided, lands in the report.
pub fn train_supervised(
    arch: &SupervisedArch,
    data_x: &LabeledEmbeddings,
    data_y: &LabeledEmbeddings,
    cfg: &TrainConfig,
    val_x: Option<&LabeledEmbeddings>,
) -> Result<SupervisedOutcome> {
    let adapter_y = Some(arch.build_adapter_y(cfg.seed)?);
    run_supervised_loop(
        arch,
        LoopData {
            data_x,
            data_y: Some(data_y),
            val_x,
        },
        cfg,
        adapter_y,
    )
}

/// The unimodal baseline: the same primary pathway and schedule with no
/// auxiliary pathway at all.
pub fn train_supervised_unimodal(
    arch: &SupervisedArch,
    data_x: &LabeledEmbeddings,
    cfg: &TrainConfig,
    val_x: Option<&LabeledEmbeddings>,
) -> Result<SupervisedOutcome> {
    let mut cfg = cfg.clone();
    cfg.lambda = 0.0;
    if cfg.head_init == HeadInit::ClassMeanAuxiliary {
        return Err(Error::invalid(
            "unimodal baseline cannot use auxiliary head initialization",
        ));
    }
    run_supervised_loop(
        arch,
        LoopData {
            data_x,
            data_y: None,
            val_x,
        },
        &cfg,
        None,
    )
}
