//! Least-squares estimators and block Fisher information.
//!
//! The Fisher information of each modality is block-structured over the
//! `[theta_c, theta_x, theta_y]` ordering: X samples contribute Gram blocks
//! of their design matrices to the (c, x) corner, Y samples to the (c, y)
//! corner, and the joint information is exactly the entrywise sum of the
//! two. Estimators solve the normal equations through the eigenvalue-based
//! pseudoinverse so rank-deficient designs are first-class: unidentifiable
//! components are flagged, never fabricated.
//!
//! Two Fisher conventions coexist. The unscaled form (`noise_scaled =
//! false`) is the plain sum of design Grams used by the theorem checks; the
//! noise-scaled form divides each modality's contribution by its noise
//! variance and is the one whose (pseudo)inverse matches the Monte-Carlo
//! estimator covariance.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dgp::{sample_datasets, LatentPartition, LinearDgpSpec, Modality, ModalityDataset};
use crate::error::{Error, Result};
use crate::matrix::SymMatrix;
use crate::rng;

/// Which modality (or both) an estimator consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    XOnly,
    YOnly,
    Joint,
}

/// Relative tolerance for deciding whether a basis direction lies in the
/// numerical range of an information matrix.
pub const IDENTIFIABILITY_TOL: f64 = 1e-8;

/// Block-partitioned Fisher information over `[theta_c, theta_x, theta_y]`.
#[derive(Debug, Clone)]
pub struct FisherBlocks {
    pub mode: Mode,
    pub partition: LatentPartition,
    pub noise_scaled: bool,
    full: SymMatrix,
}

impl FisherBlocks {
    pub fn full(&self) -> &SymMatrix {
        &self.full
    }

    fn block(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> DMatrix<f64> {
        self.full
            .as_matrix()
            .view((rows.start, cols.start), (rows.len(), cols.len()))
            .into_owned()
    }

    /// Shared-parameter block.
    pub fn cc(&self) -> SymMatrix {
        let (c, _, _) = self.partition.ranges();
        SymMatrix::new(self.block(c.clone(), c)).expect("slice of finite symmetric matrix")
    }

    pub fn xx(&self) -> SymMatrix {
        let (_, x, _) = self.partition.ranges();
        SymMatrix::new(self.block(x.clone(), x)).expect("slice of finite symmetric matrix")
    }

    pub fn yy(&self) -> SymMatrix {
        let (_, _, y) = self.partition.ranges();
        SymMatrix::new(self.block(y.clone(), y)).expect("slice of finite symmetric matrix")
    }

    pub fn cx(&self) -> DMatrix<f64> {
        let (c, x, _) = self.partition.ranges();
        self.block(c, x)
    }

    pub fn cy(&self) -> DMatrix<f64> {
        let (c, _, y) = self.partition.ranges();
        self.block(c, y)
    }

    /// Cross block between theta_c and the nuisance parameters
    /// `[theta_x, theta_y]`.
    pub fn cross(&self) -> DMatrix<f64> {
        let (c, x, y) = self.partition.ranges();
        self.block(c, x.start..y.end)
    }

    /// Nuisance block over `[theta_x, theta_y]`.
    pub fn nuisance(&self) -> SymMatrix {
        let (_, x, y) = self.partition.ranges();
        let r = x.start..y.end;
        SymMatrix::new(self.block(r.clone(), r)).expect("slice of finite symmetric matrix")
    }
}

fn accumulate_x(spec: &LinearDgpSpec, n_x: usize, scale: f64, full: &mut DMatrix<f64>) {
    let p = spec.partition;
    let slots = spec.x_designs.len();
    for i in 0..n_x {
        let d = &spec.x_designs[i % slots];
        let cc = d.shared.transpose() * &d.shared * scale;
        let cx = d.shared.transpose() * &d.specific * scale;
        let xx = d.specific.transpose() * &d.specific * scale;
        *&mut full.view_mut((0, 0), (p.d_c, p.d_c)) += &cc;
        *&mut full.view_mut((0, p.d_c), (p.d_c, p.d_x)) += &cx;
        *&mut full.view_mut((p.d_c, 0), (p.d_x, p.d_c)) += cx.transpose();
        *&mut full.view_mut((p.d_c, p.d_c), (p.d_x, p.d_x)) += &xx;
    }
}

fn accumulate_y(spec: &LinearDgpSpec, n_y: usize, scale: f64, full: &mut DMatrix<f64>) {
    let p = spec.partition;
    let slots = spec.y_designs.len();
    let y0 = p.d_c + p.d_x;
    for j in 0..n_y {
        let d = &spec.y_designs[j % slots];
        let cc = d.shared.transpose() * &d.shared * scale;
        let cy = d.shared.transpose() * &d.specific * scale;
        let yy = d.specific.transpose() * &d.specific * scale;
        *&mut full.view_mut((0, 0), (p.d_c, p.d_c)) += &cc;
        *&mut full.view_mut((0, y0), (p.d_c, p.d_y)) += &cy;
        *&mut full.view_mut((y0, 0), (p.d_y, p.d_c)) += cy.transpose();
        *&mut full.view_mut((y0, y0), (p.d_y, p.d_y)) += &yy;
    }
}

fn check_counts(spec: &LinearDgpSpec, mode: Mode, n_x: usize, n_y: usize) -> Result<()> {
    let need = |n: usize, slots: usize, name: &str| -> Result<()> {
        if n == 0 {
            return Err(Error::invalid(format!("mode requires {name} samples")));
        }
        if slots == 0 {
            return Err(Error::invalid(format!(
                "spec has no {name} design slots but {name} samples were requested"
            )));
        }
        Ok(())
    };
    match mode {
        Mode::XOnly => need(n_x, spec.x_designs.len(), "X")?,
        Mode::YOnly => need(n_y, spec.y_designs.len(), "Y")?,
        Mode::Joint => {
            if n_x + n_y == 0 {
                return Err(Error::invalid("joint mode requires at least one sample"));
            }
            if n_x > 0 && spec.x_designs.is_empty() {
                return Err(Error::invalid("spec has no X design slots"));
            }
            if n_y > 0 && spec.y_designs.is_empty() {
                return Err(Error::invalid("spec has no Y design slots"));
            }
        }
    }
    Ok(())
}

/// Assemble the Fisher information for `mode` from `n_x` X samples and `n_y`
/// Y samples (cycling round-robin over the spec's design slots).
///
/// The joint information is computed as the entrywise sum of the X and Y
/// assemblies, so `fisher_info(Joint) == fisher_info(XOnly) +
/// fisher_info(YOnly)` holds exactly.
pub fn fisher_info(
    spec: &LinearDgpSpec,
    mode: Mode,
    n_x: usize,
    n_y: usize,
    noise_scaled: bool,
) -> Result<FisherBlocks> {
    spec.validate()?;
    check_counts(spec, mode, n_x, n_y)?;
    let d = spec.partition.total();
    let mut full = DMatrix::zeros(d, d);
    let scale_for = |sigma: f64| -> Result<f64> {
        if !noise_scaled {
            return Ok(1.0);
        }
        if sigma == 0.0 {
            return Err(Error::invalid(
                "noise-scaled information is undefined for sigma = 0",
            ));
        }
        Ok(1.0 / (sigma * sigma))
    };
    match mode {
        Mode::XOnly => accumulate_x(spec, n_x, scale_for(spec.sigma_x)?, &mut full),
        Mode::YOnly => accumulate_y(spec, n_y, scale_for(spec.sigma_y)?, &mut full),
        Mode::Joint => {
            // Assemble per modality and add the finished matrices, so joint
            // information equals the sum of the unimodal ones bitwise.
            let mut full_y = DMatrix::zeros(d, d);
            if n_x > 0 {
                accumulate_x(spec, n_x, scale_for(spec.sigma_x)?, &mut full);
            }
            if n_y > 0 {
                accumulate_y(spec, n_y, scale_for(spec.sigma_y)?, &mut full_y);
            }
            full += full_y;
        }
    }
    Ok(FisherBlocks {
        mode,
        partition: spec.partition,
        noise_scaled,
        full: SymMatrix::new(full)?,
    })
}

/// Datasets consumed by an estimator. The variants make it impossible to
/// hand a unimodal estimator the other modality's observations.
#[derive(Debug, Clone, Copy)]
pub enum EstimationData<'a> {
    XOnly(&'a ModalityDataset),
    YOnly(&'a ModalityDataset),
    Joint(&'a ModalityDataset, &'a ModalityDataset),
}

impl EstimationData<'_> {
    pub fn mode(&self) -> Mode {
        match self {
            EstimationData::XOnly(_) => Mode::XOnly,
            EstimationData::YOnly(_) => Mode::YOnly,
            EstimationData::Joint(_, _) => Mode::Joint,
        }
    }
}

/// Result of a least-squares fit.
#[derive(Debug, Clone)]
pub struct EstimatorResult {
    pub mode: Mode,
    /// Estimate over the full `[theta_c, theta_x, theta_y]` vector.
    /// Components outside the numerical range of the information matrix keep
    /// the minimum-norm value 0 and are flagged in `identifiable_mask`.
    pub theta_hat: DVector<f64>,
    /// Analytic covariance of the theta_c estimate (profile CRLB from the
    /// noise-scaled information). All zeros for a noiseless spec.
    pub cov_cc: SymMatrix,
    /// Per-component identifiability of `theta_hat`.
    pub identifiable_mask: Vec<bool>,
    /// Noise-scaled information when noise is present, unscaled otherwise.
    pub fisher: FisherBlocks,
}

fn rhs_for_x(spec: &LinearDgpSpec, data: &ModalityDataset, scale: f64, rhs: &mut DVector<f64>) {
    let p = spec.partition;
    for (obs, &slot) in data.observations.iter().zip(&data.design_index) {
        let d = &spec.x_designs[slot];
        let rc = d.shared.transpose() * obs * scale;
        let rx = d.specific.transpose() * obs * scale;
        for k in 0..p.d_c {
            rhs[k] += rc[k];
        }
        for k in 0..p.d_x {
            rhs[p.d_c + k] += rx[k];
        }
    }
}

fn rhs_for_y(spec: &LinearDgpSpec, data: &ModalityDataset, scale: f64, rhs: &mut DVector<f64>) {
    let p = spec.partition;
    for (obs, &slot) in data.observations.iter().zip(&data.design_index) {
        let d = &spec.y_designs[slot];
        let rc = d.shared.transpose() * obs * scale;
        let ry = d.specific.transpose() * obs * scale;
        for k in 0..p.d_c {
            rhs[k] += rc[k];
        }
        for k in 0..p.d_y {
            rhs[p.d_c + p.d_x + k] += ry[k];
        }
    }
}

/// Least-squares estimate of theta from the given datasets.
///
/// Solves the normal equations through the pseudoinverse of the mode's full
/// information. With positive noise on every active modality the equations
/// are noise-scaled (the Gaussian maximum-likelihood weighting, identical to
/// the unweighted solution when the noise levels agree); with all active
/// noise levels zero they are unweighted and recovery is exact on
/// identifiable components.
pub fn lsq_estimate(data: EstimationData<'_>, spec: &LinearDgpSpec) -> Result<EstimatorResult> {
    spec.validate()?;
    let mode = data.mode();
    let (x_data, y_data) = match data {
        EstimationData::XOnly(x) => {
            if x.modality != Modality::X {
                return Err(Error::invalid("XOnly estimation requires an X dataset"));
            }
            (Some(x), None)
        }
        EstimationData::YOnly(y) => {
            if y.modality != Modality::Y {
                return Err(Error::invalid("YOnly estimation requires a Y dataset"));
            }
            (None, Some(y))
        }
        EstimationData::Joint(x, y) => {
            if x.modality != Modality::X || y.modality != Modality::Y {
                return Err(Error::invalid("joint estimation requires (X, Y) datasets"));
            }
            (Some(x), Some(y))
        }
    };
    for d in [x_data, y_data].into_iter().flatten() {
        if d.is_empty() {
            return Err(Error::invalid("estimation dataset is empty"));
        }
    }
    let n_x = x_data.map_or(0, |d| d.len());
    let n_y = y_data.map_or(0, |d| d.len());
    check_counts(spec, mode, n_x, n_y)?;

    let sigmas: Vec<f64> = x_data
        .map(|_| spec.sigma_x)
        .into_iter()
        .chain(y_data.map(|_| spec.sigma_y))
        .collect();
    let all_noiseless = sigmas.iter().all(|&s| s == 0.0);
    let all_noisy = sigmas.iter().all(|&s| s > 0.0);
    if !all_noiseless && !all_noisy {
        return Err(Error::invalid(
            "mixed zero and positive noise levels are not supported",
        ));
    }
    let noise_scaled = all_noisy;

    let fisher = fisher_info(spec, mode, n_x, n_y, noise_scaled)?;
    let d_total = spec.partition.total();
    let mut rhs = DVector::zeros(d_total);
    if let Some(x) = x_data {
        let scale = if noise_scaled {
            1.0 / (spec.sigma_x * spec.sigma_x)
        } else {
            1.0
        };
        rhs_for_x(spec, x, scale, &mut rhs);
    }
    if let Some(y) = y_data {
        let scale = if noise_scaled {
            1.0 / (spec.sigma_y * spec.sigma_y)
        } else {
            1.0
        };
        rhs_for_y(spec, y, scale, &mut rhs);
    }

    let pinv = fisher.full().pinv(None)?;
    let theta_hat = pinv.as_matrix() * rhs;

    // Identifiability per basis direction, via one range projector.
    let eig = fisher.full().sym_eig()?;
    let proj = eig.range_projector(fisher.full().default_rank_tol());
    let identifiable_mask: Vec<bool> = (0..d_total)
        .map(|k| {
            let col = proj.column(k);
            let mut residual = 0.0;
            for i in 0..d_total {
                let e = if i == k { 1.0 } else { 0.0 };
                residual += (e - col[i]) * (e - col[i]);
            }
            residual.sqrt() <= IDENTIFIABILITY_TOL
        })
        .collect();

    let cov_cc = if all_noiseless {
        SymMatrix::zeros(spec.partition.d_c)?
    } else {
        crlb_common(&fisher, true)?
    };

    Ok(EstimatorResult {
        mode,
        theta_hat,
        cov_cc,
        identifiable_mask,
        fisher,
    })
}

/// CRLB on the shared parameters.
///
/// With `profile = false` this is the pseudoinverse of the cc block (the
/// object the variance-reduction statements compare). With `profile = true`
/// it is the pseudoinverse of the Schur complement `cc - C D^+ C^T`
/// eliminating the modality-specific blocks; this is the exact marginal
/// covariance of the theta_c estimate. On specs with orthogonal design
/// blocks the two coincide.
pub fn crlb_common(fisher: &FisherBlocks, profile: bool) -> Result<SymMatrix> {
    let cc = fisher.cc();
    if !profile {
        return cc.pinv(None);
    }
    let p = fisher.partition;
    if p.d_x + p.d_y == 0 {
        return cc.pinv(None);
    }
    let cross = fisher.cross();
    let nuisance_pinv = fisher.nuisance().pinv(None)?;
    let schur = cc.as_matrix() - &cross * nuisance_pinv.as_matrix() * cross.transpose();
    SymMatrix::new(schur)?.pinv(None)
}

/// Directional variance of estimating `v . theta_c` under an information
/// matrix on the shared block: infinite (flagged, not a float infinity) when
/// `v` leaves the numerical range, else `v^T M^+ v`.
#[derive(Debug, Clone, Copy)]
pub struct DirectionalVariance {
    pub finite: bool,
    /// `v^T M^+ v`; only meaningful when `finite`.
    pub value: f64,
}

pub fn directional_variance(info_cc: &SymMatrix, v: &DVector<f64>) -> Result<DirectionalVariance> {
    let finite = crate::matrix::range_contains(info_cc, v, IDENTIFIABILITY_TOL)?;
    let pinv = info_cc.pinv(None)?;
    let value = (v.transpose() * pinv.as_matrix() * v)[(0, 0)];
    Ok(DirectionalVariance { finite, value })
}

/// Monte-Carlo estimate of the covariance of the theta_c estimator.
#[derive(Debug, Clone)]
pub struct MonteCarloCov {
    pub cov_cc: SymMatrix,
    pub mean_theta_c: DVector<f64>,
    pub trials: usize,
}

/// Sample covariance of the theta_c estimate over independent trials.
///
/// Each trial gets its own derived seed, so the computation is deterministic
/// per (seed, trial count), independent of worker count, and embarrassingly
/// parallel. Trials are reduced in fixed index order.
pub fn monte_carlo_cov(
    spec: &LinearDgpSpec,
    mode: Mode,
    n_x: usize,
    n_y: usize,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloCov> {
    if trials < 2 {
        return Err(Error::invalid("monte_carlo_cov requires trials >= 2"));
    }
    spec.validate()?;
    check_counts(spec, mode, n_x, n_y)?;
    let (use_x, use_y) = match mode {
        Mode::XOnly => (n_x, 0),
        Mode::YOnly => (0, n_y),
        Mode::Joint => (n_x, n_y),
    };
    let estimates: Vec<DVector<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<DVector<f64>> {
            let trial_seed = rng::derive(seed, t as u64);
            let (x, y) = sample_datasets(spec, use_x, use_y, trial_seed)?;
            let data = match mode {
                Mode::XOnly => EstimationData::XOnly(&x),
                Mode::YOnly => EstimationData::YOnly(&y),
                Mode::Joint => EstimationData::Joint(&x, &y),
            };
            let result = lsq_estimate(data, spec)?;
            Ok(result.theta_hat.rows(0, spec.partition.d_c).into_owned())
        })
        .collect::<Result<Vec<_>>>()?;

    let d_c = spec.partition.d_c;
    // Identical estimates (the zero-noise case) have exactly zero sample
    // covariance; skip the accumulation so rounding cannot blur that.
    if estimates.iter().all(|e| e == &estimates[0]) {
        return Ok(MonteCarloCov {
            cov_cc: SymMatrix::zeros(d_c)?,
            mean_theta_c: estimates[0].clone(),
            trials,
        });
    }
    let mut mean = DVector::zeros(d_c);
    for est in &estimates {
        mean += est;
    }
    mean /= trials as f64;
    let mut cov = DMatrix::zeros(d_c, d_c);
    for est in &estimates {
        let centered = est - &mean;
        cov += &centered * centered.transpose();
    }
    cov /= (trials - 1) as f64;
    Ok(MonteCarloCov {
        cov_cc: SymMatrix::new(cov)?,
        mean_theta_c: mean,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{make_orthogonal_spec, LatentPartition, XDesign};
    use crate::matrix::{loewner_compare, LoewnerRelation};
    use approx::assert_relative_eq;

    fn orthogonal(seed: u64) -> LinearDgpSpec {
        make_orthogonal_spec(LatentPartition::new(3, 2, 1), 8, 7, 1, 1, 0.3, 0.3, seed).unwrap()
    }

    #[test]
    fn single_sample_cc_block_by_hand() {
        let spec = LinearDgpSpec {
            partition: LatentPartition::new(2, 0, 0),
            theta_true: DVector::zeros(2),
            x_designs: vec![XDesign {
                shared: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]),
                specific: DMatrix::zeros(2, 0),
            }],
            y_designs: vec![],
            sigma_x: 0.3,
            sigma_y: 0.3,
        };
        let f = fisher_info(&spec, Mode::XOnly, 1, 0, false).unwrap();
        let cc = f.cc();
        assert_eq!(cc.as_matrix()[(0, 0)], 1.0);
        assert_eq!(cc.as_matrix()[(1, 1)], 4.0);
        assert_eq!(cc.as_matrix()[(0, 1)], 0.0);
    }

    #[test]
    fn joint_information_is_exactly_additive() {
        let spec = orthogonal(1);
        let fx = fisher_info(&spec, Mode::XOnly, 4, 0, false).unwrap();
        let fy = fisher_info(&spec, Mode::YOnly, 0, 3, false).unwrap();
        let fj = fisher_info(&spec, Mode::Joint, 4, 3, false).unwrap();
        let sum = fx.full().as_matrix() + fy.full().as_matrix();
        // Entrywise identical: the joint assembly reuses the unimodal paths.
        assert_eq!(fj.full().as_matrix(), &sum);
        let cc_sum = fx.cc().as_matrix() + fy.cc().as_matrix();
        assert_eq!(fj.cc().as_matrix(), &cc_sum);
    }

    #[test]
    fn noise_scaling_is_a_scalar_factor() {
        let mut spec = orthogonal(2);
        spec.sigma_x = 0.5;
        spec.sigma_y = 0.5;
        let unscaled = fisher_info(&spec, Mode::Joint, 2, 2, false).unwrap();
        let scaled = fisher_info(&spec, Mode::Joint, 2, 2, true).unwrap();
        let expected = unscaled.full().as_matrix() * 4.0;
        let err = (scaled.full().as_matrix() - &expected).norm();
        assert!(err <= 1e-12 * expected.norm());
    }

    #[test]
    fn fisher_mode_count_preconditions() {
        let spec = orthogonal(3);
        assert!(fisher_info(&spec, Mode::XOnly, 0, 5, false).is_err());
        assert!(fisher_info(&spec, Mode::YOnly, 5, 0, false).is_err());
        assert!(fisher_info(&spec, Mode::Joint, 0, 0, false).is_err());
        assert!(fisher_info(&spec, Mode::Joint, 3, 0, false).is_ok());
    }

    #[test]
    fn noiseless_joint_estimate_recovers_theta() {
        let mut spec = orthogonal(4);
        spec.sigma_x = 0.0;
        spec.sigma_y = 0.0;
        let (x, y) = sample_datasets(&spec, 4, 4, 0).unwrap();
        let r = lsq_estimate(EstimationData::Joint(&x, &y), &spec).unwrap();
        assert!(r.identifiable_mask.iter().all(|&b| b));
        assert!((&r.theta_hat - &spec.theta_true).norm() <= 1e-10);
        assert_eq!(r.cov_cc.as_matrix().norm(), 0.0);
    }

    #[test]
    fn hand_system_is_solved_exactly() {
        let spec = LinearDgpSpec {
            partition: LatentPartition::new(2, 0, 0),
            theta_true: DVector::from_row_slice(&[3.0, 5.0]),
            x_designs: vec![XDesign {
                shared: DMatrix::identity(2, 2),
                specific: DMatrix::zeros(2, 0),
            }],
            y_designs: vec![],
            sigma_x: 0.0,
            sigma_y: 0.0,
        };
        let data = ModalityDataset {
            modality: Modality::X,
            observations: vec![DVector::from_row_slice(&[3.0, 5.0])],
            design_index: vec![0],
        };
        let r = lsq_estimate(EstimationData::XOnly(&data), &spec).unwrap();
        assert_relative_eq!(r.theta_hat[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(r.theta_hat[1], 5.0, epsilon = 1e-12);
    }

    #[test]
    fn noisy_estimate_matches_dense_solve_oracle() {
        // Independent route: stack the full design matrix and solve the
        // normal equations with an LU factorization.
        let spec = orthogonal(5);
        let (x, y) = sample_datasets(&spec, 6, 5, 17).unwrap();
        let r = lsq_estimate(EstimationData::Joint(&x, &y), &spec).unwrap();

        let d = spec.partition.total();
        let p = spec.partition;
        let mut normal = DMatrix::<f64>::zeros(d, d);
        let mut rhs = DVector::<f64>::zeros(d);
        let w_x = 1.0 / (spec.sigma_x * spec.sigma_x);
        let w_y = 1.0 / (spec.sigma_y * spec.sigma_y);
        for (obs, &slot) in x.observations.iter().zip(&x.design_index) {
            let des = &spec.x_designs[slot];
            let mut row_block = DMatrix::zeros(obs.len(), d);
            row_block
                .view_mut((0, 0), (obs.len(), p.d_c))
                .copy_from(&des.shared);
            row_block
                .view_mut((0, p.d_c), (obs.len(), p.d_x))
                .copy_from(&des.specific);
            normal += row_block.transpose() * &row_block * w_x;
            rhs += row_block.transpose() * obs * w_x;
        }
        for (obs, &slot) in y.observations.iter().zip(&y.design_index) {
            let des = &spec.y_designs[slot];
            let mut row_block = DMatrix::zeros(obs.len(), d);
            row_block
                .view_mut((0, 0), (obs.len(), p.d_c))
                .copy_from(&des.shared);
            row_block
                .view_mut((0, p.d_c + p.d_x), (obs.len(), p.d_y))
                .copy_from(&des.specific);
            normal += row_block.transpose() * &row_block * w_y;
            rhs += row_block.transpose() * obs * w_y;
        }
        let oracle = normal.lu().solve(&rhs).expect("full-rank system");
        assert!((&r.theta_hat - oracle).norm() <= 1e-9);
    }

    #[test]
    fn unimodal_masks_flag_the_missing_block() {
        let spec = orthogonal(6);
        let (x, y) = sample_datasets(&spec, 5, 5, 3).unwrap();
        let rx = lsq_estimate(EstimationData::XOnly(&x), &spec).unwrap();
        let (c, xr, yr) = spec.partition.ranges();
        for k in yr.clone() {
            assert!(!rx.identifiable_mask[k], "theta_y must be unidentifiable");
            assert_eq!(rx.theta_hat[k], 0.0);
        }
        for k in c.clone().chain(xr.clone()) {
            assert!(rx.identifiable_mask[k]);
        }
        let ry = lsq_estimate(EstimationData::YOnly(&y), &spec).unwrap();
        for k in xr {
            assert!(!ry.identifiable_mask[k], "theta_x must be unidentifiable");
        }
        // Mismatched dataset/mode combinations are rejected.
        assert!(lsq_estimate(EstimationData::XOnly(&y), &spec).is_err());
    }

    #[test]
    fn crlb_block_of_diagonal_information() {
        let spec = LinearDgpSpec {
            partition: LatentPartition::new(2, 0, 0),
            theta_true: DVector::zeros(2),
            x_designs: vec![XDesign {
                shared: DMatrix::from_row_slice(2, 2, &[2.0_f64.sqrt(), 0.0, 0.0, 2.0]),
                specific: DMatrix::zeros(2, 0),
            }],
            y_designs: vec![],
            sigma_x: 1.0,
            sigma_y: 1.0,
        };
        let f = fisher_info(&spec, Mode::XOnly, 1, 0, false).unwrap();
        let crlb = crlb_common(&f, false).unwrap();
        assert_relative_eq!(crlb.as_matrix()[(0, 0)], 0.5, epsilon = 1e-12);
        assert_relative_eq!(crlb.as_matrix()[(1, 1)], 0.25, epsilon = 1e-12);
    }

    #[test]
    fn profile_and_block_coincide_on_orthogonal_specs() {
        // Schur-complement oracle: with orthogonal blocks the cross terms
        // vanish, so eliminating the nuisance parameters changes nothing.
        let spec = orthogonal(7);
        let f = fisher_info(&spec, Mode::Joint, 3, 3, false).unwrap();
        let block = crlb_common(&f, false).unwrap();
        let profile = crlb_common(&f, true).unwrap();
        let err = (block.as_matrix() - profile.as_matrix()).norm();
        assert!(err <= 1e-10 * (1.0 + block.frobenius_norm()));
    }

    #[test]
    fn singular_direction_zeroed_and_flagged() {
        // X design observes only the first shared component.
        let spec = LinearDgpSpec {
            partition: LatentPartition::new(2, 0, 0),
            theta_true: DVector::from_row_slice(&[1.5, -0.5]),
            x_designs: vec![XDesign {
                shared: DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
                specific: DMatrix::zeros(1, 0),
            }],
            y_designs: vec![],
            sigma_x: 0.0,
            sigma_y: 0.0,
        };
        let (x, _) = sample_datasets(&spec, 3, 0, 0).unwrap();
        let r = lsq_estimate(EstimationData::XOnly(&x), &spec).unwrap();
        assert!(r.identifiable_mask[0]);
        assert!(!r.identifiable_mask[1]);
        assert_relative_eq!(r.theta_hat[0], 1.5, epsilon = 1e-10);
        assert_eq!(r.theta_hat[1], 0.0);
        let f = fisher_info(&spec, Mode::XOnly, 1, 0, false).unwrap();
        let crlb = crlb_common(&f, false).unwrap();
        assert_eq!(crlb.as_matrix()[(1, 1)], 0.0);
    }

    #[test]
    fn zero_noise_monte_carlo_covariance_is_zero() {
        let mut spec = orthogonal(8);
        spec.sigma_x = 0.0;
        spec.sigma_y = 0.0;
        let mc = monte_carlo_cov(&spec, Mode::Joint, 3, 3, 16, 5).unwrap();
        assert_eq!(mc.cov_cc.as_matrix().norm(), 0.0);
    }

    #[test]
    fn monte_carlo_matches_profile_crlb() {
        let spec = orthogonal(9);
        let trials = 4000;
        let mc = monte_carlo_cov(&spec, Mode::Joint, 4, 4, trials, 11).unwrap();
        let f = fisher_info(&spec, Mode::Joint, 4, 4, true).unwrap();
        let crlb = crlb_common(&f, true).unwrap();
        let rel = (mc.cov_cc.as_matrix() - crlb.as_matrix()).norm() / crlb.frobenius_norm();
        assert!(rel <= 0.10, "relative Frobenius error {rel}");
        // Mean-estimate CLT bound.
        let bound = 4.0
            * (crlb
                .as_matrix()
                .diagonal()
                .iter()
                .cloned()
                .fold(0.0_f64, f64::max)
                / trials as f64)
                .sqrt();
        let theta_c = spec.theta_c();
        for k in 0..spec.partition.d_c {
            assert!((mc.mean_theta_c[k] - theta_c[k]).abs() <= bound);
        }
    }

    #[test]
    fn monte_carlo_is_deterministic_per_seed() {
        let spec = orthogonal(10);
        let a = monte_carlo_cov(&spec, Mode::XOnly, 4, 0, 64, 21).unwrap();
        let b = monte_carlo_cov(&spec, Mode::XOnly, 4, 0, 64, 21).unwrap();
        assert_eq!(a.cov_cc.as_matrix(), b.cov_cc.as_matrix());
        assert_eq!(a.mean_theta_c, b.mean_theta_c);
        assert!(monte_carlo_cov(&spec, Mode::XOnly, 4, 0, 1, 21).is_err());
    }

    #[test]
    fn empirical_joint_covariance_dominated_by_unimodal() {
        // Operational form of the variance-reduction theorem on an
        // orthogonal spec, at Monte-Carlo tolerance.
        let spec = orthogonal(12);
        let trials = 3000;
        let mc_x = monte_carlo_cov(&spec, Mode::XOnly, 4, 0, trials, 31).unwrap();
        let mc_j = monte_carlo_cov(&spec, Mode::Joint, 4, 4, trials, 32).unwrap();
        let sampling_slack = 0.2 * mc_x.cov_cc.frobenius_norm();
        let verdict = loewner_compare(&mc_j.cov_cc, &mc_x.cov_cc, Some(sampling_slack)).unwrap();
        assert!(
            matches!(
                verdict.relation,
                LoewnerRelation::StrictlyLess | LoewnerRelation::LessOrEqual
            ),
            "joint covariance should not exceed unimodal: {:?}",
            verdict.relation
        );
    }
}
