//! The linear multimodal data-generating process.
//!
//! Two modalities observe a latent parameter `theta = [theta_c, theta_x,
//! theta_y]` through known design blocks, with isotropic Gaussian noise:
//!
//! ```text
//! X_i = A_c,i theta_c + A_x,i theta_x + eps,   eps ~ N(0, sigma_x^2 I)
//! Y_j = B_c,j theta_c + B_y,j theta_y + eps,   eps ~ N(0, sigma_y^2 I)
//! ```
//!
//! Specs are plain data (serializable to JSON with matrices as nested row
//! arrays) so every experiment is replayable. X and Y draws come from
//! separate RNG streams, so datasets sampled together carry no cross-sample
//! pairing.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, substream};

/// Serialize matrices as nested row arrays.
pub mod serde_mat {
    use nalgebra::DMatrix;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..m.nrows())
            .map(|i| m.row(i).iter().cloned().collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("ragged matrix rows"));
        }
        Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
    }
}

/// Serialize vectors as flat arrays.
pub mod serde_vec {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.iter().cloned().collect::<Vec<f64>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        Ok(DVector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

/// Which modality a dataset or design belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modality {
    X,
    Y,
}

/// Split of the latent dimension into shared and modality-specific parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentPartition {
    pub d_c: usize,
    pub d_x: usize,
    pub d_y: usize,
}

impl LatentPartition {
    pub fn new(d_c: usize, d_x: usize, d_y: usize) -> Self {
        LatentPartition { d_c, d_x, d_y }
    }

    pub fn total(&self) -> usize {
        self.d_c + self.d_x + self.d_y
    }

    /// Index ranges of the three blocks in `[theta_c, theta_x, theta_y]`
    /// ordering.
    pub fn ranges(
        &self,
    ) -> (
        std::ops::Range<usize>,
        std::ops::Range<usize>,
        std::ops::Range<usize>,
    ) {
        let c = 0..self.d_c;
        let x = self.d_c..self.d_c + self.d_x;
        let y = self.d_c + self.d_x..self.total();
        (c, x, y)
    }
}

/// Design blocks for one X sample slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XDesign {
    /// `A_c`: how the slot probes the shared factors (m x d_c).
    #[serde(rename = "a_c", with = "serde_mat")]
    pub shared: DMatrix<f64>,
    /// `A_x`: how the slot probes X-specific factors (m x d_x).
    #[serde(rename = "a_x", with = "serde_mat")]
    pub specific: DMatrix<f64>,
}

/// Design blocks for one Y sample slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YDesign {
    /// `B_c` (n x d_c).
    #[serde(rename = "b_c", with = "serde_mat")]
    pub shared: DMatrix<f64>,
    /// `B_y` (n x d_y).
    #[serde(rename = "b_y", with = "serde_mat")]
    pub specific: DMatrix<f64>,
}

/// Full specification of the linear data-generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearDgpSpec {
    pub partition: LatentPartition,
    #[serde(with = "serde_vec")]
    pub theta_true: DVector<f64>,
    pub x_designs: Vec<XDesign>,
    pub y_designs: Vec<YDesign>,
    pub sigma_x: f64,
    pub sigma_y: f64,
}

impl LinearDgpSpec {
    /// Validate dimensional consistency.
    ///
    /// Noise levels must be finite and nonnegative (zero noise is the exact
    /// deterministic case used by identifiability tests).
    pub fn validate(&self) -> Result<()> {
        let p = &self.partition;
        if self.theta_true.len() != p.total() {
            return Err(Error::invalid(format!(
                "theta_true has length {}, partition total is {}",
                self.theta_true.len(),
                p.total()
            )));
        }
        if self.x_designs.is_empty() && self.y_designs.is_empty() {
            return Err(Error::invalid("spec must have at least one design slot"));
        }
        if !self.x_designs.is_empty() && !self.y_designs.is_empty() && p.d_c == 0 {
            return Err(Error::invalid("multimodal spec requires d_c >= 1"));
        }
        for (i, d) in self.x_designs.iter().enumerate() {
            if d.shared.ncols() != p.d_c || d.specific.ncols() != p.d_x {
                return Err(Error::invalid(format!(
                    "x design {i} has wrong column counts"
                )));
            }
            if d.shared.nrows() != self.x_designs[0].shared.nrows()
                || d.specific.nrows() != d.shared.nrows()
            {
                return Err(Error::invalid(format!(
                    "x design {i} has inconsistent row count"
                )));
            }
        }
        for (j, d) in self.y_designs.iter().enumerate() {
            if d.shared.ncols() != p.d_c || d.specific.ncols() != p.d_y {
                return Err(Error::invalid(format!(
                    "y design {j} has wrong column counts"
                )));
            }
            if d.shared.nrows() != self.y_designs[0].shared.nrows()
                || d.specific.nrows() != d.shared.nrows()
            {
                return Err(Error::invalid(format!(
                    "y design {j} has inconsistent row count"
                )));
            }
        }
        for (name, s) in [("sigma_x", self.sigma_x), ("sigma_y", self.sigma_y)] {
            if !s.is_finite() || s < 0.0 {
                return Err(Error::invalid(format!("{name} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    /// Observation dimension of a modality, if it has any design slots.
    pub fn obs_dim(&self, modality: Modality) -> Option<usize> {
        match modality {
            Modality::X => self.x_designs.first().map(|d| d.shared.nrows()),
            Modality::Y => self.y_designs.first().map(|d| d.shared.nrows()),
        }
    }

    pub fn theta_c(&self) -> DVector<f64> {
        let (c, _, _) = self.partition.ranges();
        self.theta_true.rows(c.start, c.len()).into_owned()
    }

    pub fn theta_x(&self) -> DVector<f64> {
        let (_, x, _) = self.partition.ranges();
        self.theta_true.rows(x.start, x.len()).into_owned()
    }

    pub fn theta_y(&self) -> DVector<f64> {
        let (_, _, y) = self.partition.ranges();
        self.theta_true.rows(y.start, y.len()).into_owned()
    }

    /// Noise level of a modality.
    pub fn sigma(&self, modality: Modality) -> f64 {
        match modality {
            Modality::X => self.sigma_x,
            Modality::Y => self.sigma_y,
        }
    }

    /// Short hex digest of the canonical JSON encoding, used to identify a
    /// spec in theorem failure records.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(self).expect("spec serializes");
        let hash = Sha256::digest(json.as_bytes());
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Observations from one modality, tagged with the design slot that
/// generated each of them.
#[derive(Debug, Clone)]
pub struct ModalityDataset {
    pub modality: Modality,
    pub observations: Vec<DVector<f64>>,
    pub design_index: Vec<usize>,
}

impl ModalityDataset {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

fn standard_normal_vector(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn standard_normal_matrix(rng: &mut ChaCha8Rng, nrows: usize, ncols: usize) -> DMatrix<f64> {
    // Row-major fill so the draw order is part of the format.
    let mut m = DMatrix::zeros(nrows, ncols);
    for i in 0..nrows {
        for j in 0..ncols {
            m[(i, j)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    m
}

fn sample_modality(
    spec: &LinearDgpSpec,
    modality: Modality,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ModalityDataset> {
    let (slots, theta_shared, theta_specific, sigma): (usize, _, _, f64) = match modality {
        Modality::X => (
            spec.x_designs.len(),
            spec.theta_c(),
            spec.theta_x(),
            spec.sigma_x,
        ),
        Modality::Y => (
            spec.y_designs.len(),
            spec.theta_c(),
            spec.theta_y(),
            spec.sigma_y,
        ),
    };
    if n > 0 && slots == 0 {
        return Err(Error::invalid(format!(
            "requested {n} samples from modality {modality:?} but the spec has no design slots"
        )));
    }
    let mut observations = Vec::with_capacity(n);
    let mut design_index = Vec::with_capacity(n);
    for i in 0..n {
        let slot = i % slots;
        let mean = match modality {
            Modality::X => {
                let d = &spec.x_designs[slot];
                &d.shared * &theta_shared + &d.specific * &theta_specific
            }
            Modality::Y => {
                let d = &spec.y_designs[slot];
                &d.shared * &theta_shared + &d.specific * &theta_specific
            }
        };
        let noise = standard_normal_vector(rng, mean.len());
        observations.push(mean + noise * sigma);
        design_index.push(slot);
    }
    Ok(ModalityDataset {
        modality,
        observations,
        design_index,
    })
}

/// Draw `n_x` X observations and `n_y` Y observations.
///
/// Design slots cycle round-robin when a modality has fewer slots than
/// samples. The two modalities draw from separate RNG streams of the same
/// seed, so datasets returned together carry no index-wise pairing.
pub fn sample_datasets(
    spec: &LinearDgpSpec,
    n_x: usize,
    n_y: usize,
    seed: u64,
) -> Result<(ModalityDataset, ModalityDataset)> {
    spec.validate()?;
    let mut rng_x = substream(seed, stream::MODALITY_X);
    let mut rng_y = substream(seed, stream::MODALITY_Y);
    let x = sample_modality(spec, Modality::X, n_x, &mut rng_x)?;
    let y = sample_modality(spec, Modality::Y, n_y, &mut rng_y)?;
    Ok((x, y))
}

/// Draw observations with a fresh standard-normal latent per sample.
///
/// This is the training distribution of the Gaussian budget experiment: the
/// projections are fixed by the spec, but each sample gets its own latent
/// draw rather than reusing `theta_true`. Returns an `n x obs_dim` matrix
/// with one observation per row.
pub fn sample_fresh_latent_observations(
    spec: &LinearDgpSpec,
    modality: Modality,
    n: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let slots = match modality {
        Modality::X => spec.x_designs.len(),
        Modality::Y => spec.y_designs.len(),
    };
    if slots == 0 {
        return Err(Error::invalid(
            "requested fresh-latent samples from a modality with no design slots",
        ));
    }
    let obs_dim = spec.obs_dim(modality).expect("slots checked nonempty");
    let p = spec.partition;
    let mut rng = substream(
        seed,
        match modality {
            Modality::X => stream::MODALITY_X,
            Modality::Y => stream::MODALITY_Y,
        },
    );
    let mut out = DMatrix::zeros(n, obs_dim);
    for i in 0..n {
        let slot = i % slots;
        let theta = standard_normal_vector(&mut rng, p.total());
        let theta_c = theta.rows(0, p.d_c);
        let obs = match modality {
            Modality::X => {
                let d = &spec.x_designs[slot];
                let theta_x = theta.rows(p.d_c, p.d_x);
                &d.shared * theta_c + &d.specific * theta_x
            }
            Modality::Y => {
                let d = &spec.y_designs[slot];
                let theta_y = theta.rows(p.d_c + p.d_x, p.d_y);
                &d.shared * theta_c + &d.specific * theta_y
            }
        };
        let noise = standard_normal_vector(&mut rng, obs_dim);
        let sample = obs + noise * spec.sigma(modality);
        out.row_mut(i).copy_from(&sample.transpose());
    }
    Ok(out)
}

/// Draw a square matrix that is comfortably invertible, redrawing on the
/// (measure-zero, but numerically possible) near-singular case.
fn well_conditioned_square(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<f64> {
    loop {
        let m = standard_normal_matrix(rng, dim, dim);
        let smallest = m
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if smallest > 0.1 {
            return m;
        }
    }
}

fn orthogonal_blocks(
    rng: &mut ChaCha8Rng,
    rows: usize,
    d_shared: usize,
    d_specific: usize,
) -> (DMatrix<f64>, DMatrix<f64>) {
    // Orthonormalize a Gaussian draw, then mix each side with a random
    // invertible matrix: the shared/specific column spaces stay exactly
    // orthogonal while the within-block Gram matrices stay generic.
    let g = standard_normal_matrix(rng, rows, d_shared + d_specific);
    let q = g.qr().q();
    let shared = q.columns(0, d_shared) * well_conditioned_square(rng, d_shared);
    let specific = if d_specific > 0 {
        q.columns(d_shared, d_specific) * well_conditioned_square(rng, d_specific)
    } else {
        DMatrix::zeros(rows, 0)
    };
    (shared, specific)
}

/// Build a spec whose per-slot shared and specific design blocks are exactly
/// column-orthogonal (`A_c^T A_x = 0`, `B_c^T B_y = 0`) with full column
/// rank, so the single-sample information is block-diagonal between the
/// shared and specific sub-blocks.
#[allow(clippy::too_many_arguments)]
pub fn make_orthogonal_spec(
    partition: LatentPartition,
    m: usize,
    n: usize,
    n_slots_x: usize,
    n_slots_y: usize,
    sigma_x: f64,
    sigma_y: f64,
    seed: u64,
) -> Result<LinearDgpSpec> {
    if partition.d_c == 0 {
        return Err(Error::invalid("orthogonal spec requires d_c >= 1"));
    }
    if m < partition.d_c + partition.d_x {
        return Err(Error::invalid("need m >= d_c + d_x"));
    }
    if n < partition.d_c + partition.d_y {
        return Err(Error::invalid("need n >= d_c + d_y"));
    }
    if n_slots_x == 0 && n_slots_y == 0 {
        return Err(Error::invalid("need at least one design slot"));
    }
    let mut rng_x = substream(seed, stream::DESIGN_X);
    let mut rng_y = substream(seed, stream::DESIGN_Y);
    let x_designs = (0..n_slots_x)
        .map(|_| {
            let (shared, specific) = orthogonal_blocks(&mut rng_x, m, partition.d_c, partition.d_x);
            XDesign { shared, specific }
        })
        .collect();
    let y_designs = (0..n_slots_y)
        .map(|_| {
            let (shared, specific) = orthogonal_blocks(&mut rng_y, n, partition.d_c, partition.d_y);
            YDesign { shared, specific }
        })
        .collect();
    let mut rng_theta = substream(seed, stream::THETA);
    let theta_true = standard_normal_vector(&mut rng_theta, partition.total());
    let spec = LinearDgpSpec {
        partition,
        theta_true,
        x_designs,
        y_designs,
        sigma_x,
        sigma_y,
    };
    spec.validate()?;
    Ok(spec)
}

/// A training spec with attenuated shared columns in X, plus the matched
/// validation spec built from the same projection draw without attenuation.
#[derive(Debug, Clone)]
pub struct AttenuatedSpecPair {
    pub train: LinearDgpSpec,
    pub validation: LinearDgpSpec,
}

/// Generalized attenuated-projection generator.
///
/// Draws a single dense projection per modality (entries `N(0, 1/d)` with
/// `d` the total latent dimension), then downscales all but the first
/// `ceil(0.1 * d_c)` shared columns of X by `attenuation`. Y observes every
/// shared component at full strength. The validation spec reuses the same
/// projections unattenuated.
pub fn make_attenuated_spec(
    partition: LatentPartition,
    m: usize,
    n: usize,
    attenuation: f64,
    sigma: f64,
    seed: u64,
) -> Result<AttenuatedSpecPair> {
    if partition.d_c == 0 {
        return Err(Error::invalid("attenuated spec requires d_c >= 1"));
    }
    let scale = 1.0 / (partition.total() as f64).sqrt();
    let mut rng_x = substream(seed, stream::DESIGN_X);
    let mut rng_y = substream(seed, stream::DESIGN_Y);
    let a_shared = standard_normal_matrix(&mut rng_x, m, partition.d_c) * scale;
    let a_specific = standard_normal_matrix(&mut rng_x, m, partition.d_x) * scale;
    let b_shared = standard_normal_matrix(&mut rng_y, n, partition.d_c) * scale;
    let b_specific = standard_normal_matrix(&mut rng_y, n, partition.d_y) * scale;

    let keep_full = (0.1 * partition.d_c as f64).ceil() as usize;
    let mut a_shared_attenuated = a_shared.clone();
    for j in keep_full..partition.d_c {
        let scaled = a_shared_attenuated.column(j) * attenuation;
        a_shared_attenuated.set_column(j, &scaled);
    }

    let mut rng_theta = substream(seed, stream::THETA);
    let theta_true = standard_normal_vector(&mut rng_theta, partition.total());

    let build = |a_c: DMatrix<f64>| LinearDgpSpec {
        partition,
        theta_true: theta_true.clone(),
        x_designs: vec![XDesign {
            shared: a_c,
            specific: a_specific.clone(),
        }],
        y_designs: vec![YDesign {
            shared: b_shared.clone(),
            specific: b_specific.clone(),
        }],
        sigma_x: sigma,
        sigma_y: sigma,
    };
    let pair = AttenuatedSpecPair {
        train: build(a_shared_attenuated),
        validation: build(a_shared),
    };
    pair.train.validate()?;
    pair.validation.validate()?;
    Ok(pair)
}

/// The Gaussian budget experiment configuration: 10 shared + 5 + 5 latent
/// dimensions, 50-dimensional observations, noise `N(0, 0.09 I)`, and X
/// downscaling every shared column after the first by 0.05.
pub fn make_attenuated_gaussian_spec(seed: u64) -> AttenuatedSpecPair {
    make_attenuated_spec(LatentPartition::new(10, 5, 5), 50, 50, 0.05, 0.3, seed)
        .expect("fixed configuration is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::SymMatrix;
    use approx::assert_relative_eq;

    fn small_orthogonal(seed: u64) -> LinearDgpSpec {
        make_orthogonal_spec(LatentPartition::new(2, 1, 1), 5, 5, 2, 2, 0.3, 0.3, seed).unwrap()
    }

    #[test]
    fn zero_noise_reproduces_the_mean_exactly() {
        let spec = LinearDgpSpec {
            partition: LatentPartition::new(2, 0, 0),
            theta_true: DVector::from_row_slice(&[1.0, 2.0]),
            x_designs: vec![XDesign {
                shared: DMatrix::identity(2, 2),
                specific: DMatrix::zeros(2, 0),
            }],
            y_designs: vec![],
            sigma_x: 0.0,
            sigma_y: 0.0,
        };
        let (x, _) = sample_datasets(&spec, 4, 0, 9).unwrap();
        for obs in &x.observations {
            assert_eq!(obs[0], 1.0);
            assert_eq!(obs[1], 2.0);
        }
    }

    #[test]
    fn sampling_is_bitwise_deterministic() {
        let spec = small_orthogonal(3);
        let (x1, y1) = sample_datasets(&spec, 7, 5, 42).unwrap();
        let (x2, y2) = sample_datasets(&spec, 7, 5, 42).unwrap();
        for (a, b) in x1.observations.iter().zip(&x2.observations) {
            assert_eq!(a, b);
        }
        for (a, b) in y1.observations.iter().zip(&y2.observations) {
            assert_eq!(a, b);
        }
        assert_eq!(x1.design_index, vec![0, 1, 0, 1, 0, 1, 0]);
    }

    #[test]
    fn empty_modality_request_errors() {
        let mut spec = small_orthogonal(4);
        spec.y_designs.clear();
        assert!(sample_datasets(&spec, 2, 1, 0).is_err());
        assert!(sample_datasets(&spec, 2, 0, 0).is_ok());
    }

    #[test]
    fn sample_variance_matches_noise_level() {
        // Monte-Carlo oracle: with sigma = 0.3 the per-coordinate variance
        // about the design mean is 0.09.
        let spec = LinearDgpSpec {
            partition: LatentPartition::new(1, 0, 0),
            theta_true: DVector::from_row_slice(&[0.7]),
            x_designs: vec![XDesign {
                shared: DMatrix::from_row_slice(2, 1, &[1.0, -2.0]),
                specific: DMatrix::zeros(2, 0),
            }],
            y_designs: vec![],
            sigma_x: 0.3,
            sigma_y: 0.0,
        };
        let n = 10_000;
        let (x, _) = sample_datasets(&spec, n, 0, 11).unwrap();
        let mean_target = &spec.x_designs[0].shared * spec.theta_c();
        for coord in 0..2 {
            let var = x
                .observations
                .iter()
                .map(|o| (o[coord] - mean_target[coord]).powi(2))
                .sum::<f64>()
                / n as f64;
            assert!((var - 0.09).abs() / 0.09 < 0.05, "variance {var}");
            // Mean converges at the CLT rate.
            let mean = x.observations.iter().map(|o| o[coord]).sum::<f64>() / n as f64;
            assert!((mean - mean_target[coord]).abs() <= 4.0 * 0.3 / (n as f64).sqrt());
        }
    }

    #[test]
    fn paired_by_index_samples_are_uncorrelated() {
        // Single design slot per modality, so observation means are constant
        // and any index-wise correlation would have to come from the noise
        // streams.
        let spec =
            make_orthogonal_spec(LatentPartition::new(2, 1, 1), 5, 5, 1, 1, 0.3, 0.3, 6).unwrap();
        let n = 10_000;
        let (x, y) = sample_datasets(&spec, n, n, 13).unwrap();
        let bound = 4.0 / (n as f64).sqrt();
        let mean = |data: &[DVector<f64>], k: usize| {
            data.iter().map(|o| o[k]).sum::<f64>() / data.len() as f64
        };
        for a in 0..x.observations[0].len() {
            for b in 0..y.observations[0].len() {
                let (mx, my) = (mean(&x.observations, a), mean(&y.observations, b));
                let mut cov = 0.0;
                let mut vx = 0.0;
                let mut vy = 0.0;
                for i in 0..n {
                    let dx = x.observations[i][a] - mx;
                    let dy = y.observations[i][b] - my;
                    cov += dx * dy;
                    vx += dx * dx;
                    vy += dy * dy;
                }
                let corr = cov / (vx.sqrt() * vy.sqrt());
                assert!(corr.abs() <= bound, "corr({a},{b}) = {corr}");
            }
        }
    }

    #[test]
    fn orthogonal_spec_blocks_are_orthogonal_and_full_rank() {
        let spec =
            make_orthogonal_spec(LatentPartition::new(3, 2, 1), 8, 6, 2, 1, 0.5, 0.5, 21).unwrap();
        for d in &spec.x_designs {
            let cross = d.shared.transpose() * &d.specific;
            assert!(cross.iter().all(|v| v.abs() <= 1e-12));
            // Rank via eigenvalue count of the Gram matrix.
            let gram = SymMatrix::from_gram(&d.shared).unwrap();
            assert_eq!(gram.rank().unwrap(), 3);
        }
        for d in &spec.y_designs {
            let cross = d.shared.transpose() * &d.specific;
            assert!(cross.iter().all(|v| v.abs() <= 1e-12));
        }
    }

    #[test]
    fn degenerate_specific_split_is_valid() {
        let spec =
            make_orthogonal_spec(LatentPartition::new(2, 0, 1), 4, 4, 1, 1, 0.3, 0.3, 2).unwrap();
        assert_eq!(spec.x_designs[0].specific.ncols(), 0);
        spec.validate().unwrap();
        sample_datasets(&spec, 3, 3, 0).unwrap();
    }

    #[test]
    fn orthogonal_spec_dimension_preconditions() {
        let err = make_orthogonal_spec(LatentPartition::new(3, 2, 0), 4, 4, 1, 1, 0.3, 0.3, 0);
        assert!(err.is_err());
    }

    #[test]
    fn attenuated_gaussian_matches_published_configuration() {
        let pair = make_attenuated_gaussian_spec(5);
        let t = &pair.train;
        assert_eq!(t.partition, LatentPartition::new(10, 5, 5));
        assert_eq!(t.obs_dim(Modality::X), Some(50));
        assert_eq!(t.obs_dim(Modality::Y), Some(50));
        assert_eq!(t.sigma_x, 0.3);
        assert_eq!(t.sigma_y, 0.3);
        // Shared columns beyond the first are scaled by exactly 0.05.
        let a_train = &t.x_designs[0].shared;
        let a_val = &pair.validation.x_designs[0].shared;
        assert_relative_eq!(
            a_train.column(0).norm(),
            a_val.column(0).norm(),
            epsilon = 0.0
        );
        for j in 1..10 {
            assert_relative_eq!(
                a_train.column(j).norm(),
                0.05 * a_val.column(j).norm(),
                max_relative = 1e-12
            );
        }
        // Y and the specific blocks are identical across the pair.
        assert_eq!(t.y_designs, pair.validation.y_designs);
        assert_eq!(
            t.x_designs[0].specific,
            pair.validation.x_designs[0].specific
        );
        assert_eq!(t.theta_true, pair.validation.theta_true);
    }

    #[test]
    fn attenuated_spec_is_seed_deterministic() {
        let a = make_attenuated_gaussian_spec(77);
        let b = make_attenuated_gaussian_spec(77);
        assert_eq!(a.train, b.train);
        assert_eq!(a.validation, b.validation);
        let c = make_attenuated_gaussian_spec(78);
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn spec_json_round_trips() {
        let spec = small_orthogonal(8);
        let json = serde_json::to_string(&spec).unwrap();
        let back: LinearDgpSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);
        assert_eq!(spec.digest(), back.digest());
    }

    #[test]
    fn fresh_latent_sampling_is_deterministic_and_varies() {
        let pair = make_attenuated_gaussian_spec(3);
        let a = sample_fresh_latent_observations(&pair.train, Modality::X, 5, 10).unwrap();
        let b = sample_fresh_latent_observations(&pair.train, Modality::X, 5, 10).unwrap();
        assert_eq!(a, b);
        // Distinct rows: each sample has its own latent draw.
        assert!((a.row(0) - a.row(1)).norm() > 1e-6);
    }
}
