//! Synthetic unpaired-multimodal tasks.
//!
//! Both modalities are generated from one shared semantic latent space
//! (class means live there); each modality sees it through its own random
//! linear map plus noise. Samples are drawn independently per modality, so
//! the datasets share class semantics but no pairing. The
//! unrelated-auxiliary control shuffles the auxiliary label assignments,
//! destroying the label-content association while keeping the marginal
//! distribution.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::rng::{derive, substream};

use super::LabeledEmbeddings;

#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedTaskConfig {
    pub n_classes: usize,
    pub latent_dim: usize,
    pub dim_x: usize,
    pub dim_y: usize,
    pub n_train_x_per_class: usize,
    pub n_train_y_per_class: usize,
    pub n_test_per_class: usize,
    /// Scale of the class means in latent space.
    pub class_separation: f64,
    /// Within-class latent jitter.
    pub within_jitter: f64,
    /// Observation noise after the modality map.
    pub noise: f64,
    /// Shuffle the auxiliary labels (the unrelated-auxiliary control).
    pub shuffle_aux_labels: bool,
}

impl Default for SupervisedTaskConfig {
    fn default() -> Self {
        SupervisedTaskConfig {
            n_classes: 10,
            latent_dim: 16,
            dim_x: 32,
            dim_y: 24,
            n_train_x_per_class: 10,
            n_train_y_per_class: 40,
            n_test_per_class: 200,
            class_separation: 1.0,
            within_jitter: 0.8,
            noise: 0.4,
            shuffle_aux_labels: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SupervisedTask {
    pub train_x: LabeledEmbeddings,
    pub train_y: LabeledEmbeddings,
    pub test_x: LabeledEmbeddings,
}

fn normal_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(r, c);
    for i in 0..r {
        for j in 0..c {
            m[(i, j)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    m
}

fn normal_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

struct SharedLatentWorld {
    class_means: Vec<DVector<f64>>,
    map_x: DMatrix<f64>,
    map_y: DMatrix<f64>,
}

impl SharedLatentWorld {
    fn new(cfg: &SupervisedTaskConfig, seed: u64) -> Self {
        let mut rng_means = substream(derive(seed, 0), 0);
        let class_means = (0..cfg.n_classes)
            .map(|_| normal_vector(&mut rng_means, cfg.latent_dim) * cfg.class_separation)
            .collect();
        let mut rng_maps = substream(derive(seed, 1), 0);
        let scale = 1.0 / (cfg.latent_dim as f64).sqrt();
        let map_x = normal_matrix(&mut rng_maps, cfg.dim_x, cfg.latent_dim) * scale;
        let map_y = normal_matrix(&mut rng_maps, cfg.dim_y, cfg.latent_dim) * scale;
        SharedLatentWorld {
            class_means,
            map_x,
            map_y,
        }
    }

    fn sample(
        &self,
        cfg: &SupervisedTaskConfig,
        map: &DMatrix<f64>,
        per_class: usize,
        rng: &mut ChaCha8Rng,
    ) -> LabeledEmbeddings {
        let n = per_class * cfg.n_classes;
        let dim = map.nrows();
        let mut features = DMatrix::zeros(n, dim);
        let mut labels = Vec::with_capacity(n);
        let mut row = 0;
        for (k, mean) in self.class_means.iter().enumerate() {
            for _ in 0..per_class {
                let z = mean + normal_vector(rng, cfg.latent_dim) * cfg.within_jitter;
                let obs = map * z + normal_vector(rng, dim) * cfg.noise;
                features.row_mut(row).copy_from(&obs.transpose());
                labels.push(k);
                row += 1;
            }
        }
        LabeledEmbeddings::new(features, Some(labels)).expect("consistent by construction")
    }
}

/// Build the synthetic two-modality classification task.
pub fn make_supervised_task(cfg: &SupervisedTaskConfig, seed: u64) -> SupervisedTask {
    let world = SharedLatentWorld::new(cfg, seed);
    let mut rng_x = substream(derive(seed, 2), 0);
    let mut rng_y = substream(derive(seed, 3), 0);
    let mut rng_test = substream(derive(seed, 4), 0);
    let train_x = world.sample(cfg, &world.map_x, cfg.n_train_x_per_class, &mut rng_x);
    let mut train_y = world.sample(cfg, &world.map_y, cfg.n_train_y_per_class, &mut rng_y);
    if cfg.shuffle_aux_labels {
        let mut rng_shuffle = substream(derive(seed, 5), 0);
        train_y
            .labels
            .as_mut()
            .expect("generated with labels")
            .shuffle(&mut rng_shuffle);
    }
    let test_x = world.sample(cfg, &world.map_x, cfg.n_test_per_class, &mut rng_test);
    SupervisedTask {
        train_x,
        train_y,
        test_x,
    }
}

/// Fixed-length sequences of embedding vectors for one modality.
#[derive(Debug, Clone)]
pub struct SequenceDataset {
    /// Each sequence is `seq_len x dim`, one embedding per row.
    pub sequences: Vec<DMatrix<f64>>,
    pub labels: Option<Vec<usize>>,
}

impl SequenceDataset {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn seq_len(&self) -> usize {
        self.sequences.first().map_or(0, |s| s.nrows())
    }

    pub fn dim(&self) -> usize {
        self.sequences.first().map_or(0, |s| s.ncols())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceTaskConfig {
    pub n_classes: usize,
    pub latent_dim: usize,
    pub dim_x: usize,
    pub dim_y: usize,
    pub seq_len: usize,
    pub n_train_x_per_class: usize,
    pub n_train_y_per_class: usize,
    pub n_probe_train_per_class: usize,
    pub n_probe_test_per_class: usize,
    pub class_separation: f64,
    /// AR(1) pull toward the class mean.
    pub ar_coeff: f64,
    /// Innovation scale of the latent dynamics.
    pub drive: f64,
    pub noise: f64,
}

impl Default for SequenceTaskConfig {
    fn default() -> Self {
        SequenceTaskConfig {
            n_classes: 6,
            latent_dim: 8,
            dim_x: 16,
            dim_y: 12,
            seq_len: 8,
            n_train_x_per_class: 12,
            n_train_y_per_class: 48,
            n_probe_train_per_class: 12,
            n_probe_test_per_class: 60,
            class_separation: 1.2,
            ar_coeff: 0.7,
            drive: 0.45,
            noise: 0.35,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SequenceTask {
    pub train_x: SequenceDataset,
    pub train_y: SequenceDataset,
    pub probe_train_x: SequenceDataset,
    pub probe_test_x: SequenceDataset,
}

/// Build the synthetic shared-latent sequential task: class-conditioned
/// AR(1) latent trajectories observed through per-modality maps.
pub fn make_sequence_task(cfg: &SequenceTaskConfig, seed: u64) -> SequenceTask {
    let mut rng_means = substream(derive(seed, 0), 0);
    let class_means: Vec<DVector<f64>> = (0..cfg.n_classes)
        .map(|_| normal_vector(&mut rng_means, cfg.latent_dim) * cfg.class_separation)
        .collect();
    let mut rng_maps = substream(derive(seed, 1), 0);
    let scale = 1.0 / (cfg.latent_dim as f64).sqrt();
    let map_x = normal_matrix(&mut rng_maps, cfg.dim_x, cfg.latent_dim) * scale;
    let map_y = normal_matrix(&mut rng_maps, cfg.dim_y, cfg.latent_dim) * scale;

    let gen = |map: &DMatrix<f64>, per_class: usize, rng: &mut ChaCha8Rng| {
        let dim = map.nrows();
        let mut sequences = Vec::with_capacity(per_class * cfg.n_classes);
        let mut labels = Vec::with_capacity(per_class * cfg.n_classes);
        for (k, mean) in class_means.iter().enumerate() {
            for _ in 0..per_class {
                let mut z = mean + normal_vector(rng, cfg.latent_dim) * cfg.drive;
                let mut seq = DMatrix::zeros(cfg.seq_len, dim);
                for t in 0..cfg.seq_len {
                    let obs = map * &z + normal_vector(rng, dim) * cfg.noise;
                    seq.row_mut(t).copy_from(&obs.transpose());
                    z = mean + (&z - mean) * cfg.ar_coeff
                        + normal_vector(rng, cfg.latent_dim) * cfg.drive;
                }
                sequences.push(seq);
                labels.push(k);
            }
        }
        SequenceDataset {
            sequences,
            labels: Some(labels),
        }
    };

    let mut rng_x = substream(derive(seed, 2), 0);
    let mut rng_y = substream(derive(seed, 3), 0);
    let mut rng_pt = substream(derive(seed, 4), 0);
    let mut rng_pe = substream(derive(seed, 5), 0);
    SequenceTask {
        train_x: gen(&map_x, cfg.n_train_x_per_class, &mut rng_x),
        train_y: gen(&map_y, cfg.n_train_y_per_class, &mut rng_y),
        probe_train_x: gen(&map_x, cfg.n_probe_train_per_class, &mut rng_pt),
        probe_test_x: gen(&map_x, cfg.n_probe_test_per_class, &mut rng_pe),
    }
}
