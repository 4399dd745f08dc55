//! Linear probing of learned representations.

use crate::error::Result;
use crate::neural::{Activation, AdamState, DenseNet};
use crate::rng::{stream, substream};

use super::{gather_rows, BatchSampler, LabeledEmbeddings};

/// Train a multinomial logistic probe on `train` and report accuracy on
/// `test`. Deterministic per seed.
pub fn linear_probe_accuracy(
    train: &LabeledEmbeddings,
    test: &LabeledEmbeddings,
    seed: u64,
) -> Result<f64> {
    let labels = train.labels_or_err()?;
    let n_classes = train
        .n_classes()
        .max(test.n_classes())
        .ok_or_else(|| crate::error::Error::invalid("probe needs labels"))?;
    let mut head = DenseNet::random(
        &[train.dim(), n_classes],
        &[Activation::Identity],
        &mut substream(seed, stream::PROBE),
    )?;
    let mut opt = AdamState::for_net(&head, 1e-2);
    let mut sampler = BatchSampler::new(train.len(), 32, substream(seed, stream::PROBE + 100));
    for _ in 0..60 {
        for _ in 0..sampler.batches_per_epoch() {
            let idx = sampler.next_batch();
            let inputs = gather_rows(&train.features, &idx);
            let batch_labels: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
            let cache = head.forward(&inputs)?;
            let (_, grad) =
                crate::neural::cross_entropy_loss(cache.output(), &batch_labels)?;
            let (grads, _) = head.backward(&cache, &grad)?;
            opt.step_net(&mut head, &grads)?;
        }
    }
    let logits = head.output(&test.features)?;
    let test_labels = test.labels_or_err()?;
    let mut correct = 0usize;
    for (i, &label) in test_labels.iter().enumerate() {
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
    Ok(correct as f64 / test_labels.len() as f64)
}
