//! Dense symmetric linear-algebra primitives: eigendecomposition,
//! Moore-Penrose pseudoinverse, range tests and Loewner-order comparisons.
//!
//! All higher modules funnel their matrix work through [`SymMatrix`], which
//! symmetrizes on construction so accumulated asymmetry from block assembly
//! cannot poison the eigen routines. Everything is `f64`; strict-order
//! verdicts carry an explicit margin so theorem checks can distinguish a
//! genuinely strict ordering from PSD-level numerical noise.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative rank cutoff per dimension unit: eigenvalues with magnitude below
/// `dim * RANK_TOL_PER_DIM * max|eig|` are treated as exactly zero.
pub const RANK_TOL_PER_DIM: f64 = 1e-12;

/// A square symmetric real matrix.
///
/// The wrapped matrix is symmetrized `(S + S^T)/2` when constructed and all
/// entries are checked finite, so downstream decompositions can assume a
/// clean input.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    inner: DMatrix<f64>,
}

impl SymMatrix {
    /// Wrap a square matrix, symmetrizing it.
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::invalid(format!(
                "symmetric matrix must be square, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if mat.nrows() == 0 {
            return Err(Error::invalid("symmetric matrix must have dim >= 1"));
        }
        let sym = (&mat + mat.transpose()) * 0.5;
        if !sym.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("matrix has non-finite entries"));
        }
        Ok(SymMatrix { inner: sym })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("row lengths must equal row count"));
        }
        let mat = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::new(mat)
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_row_slice(diag)))
    }

    /// Gram matrix `M^T M`, exactly symmetric by construction.
    pub fn from_gram(m: &DMatrix<f64>) -> Result<Self> {
        Self::new(m.transpose() * m)
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn trace(&self) -> f64 {
        self.inner.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.norm()
    }

    /// Spectral decomposition with eigenvalues sorted descending.
    pub fn sym_eig(&self) -> Result<EigenDecomp> {
        if !self.inner.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("matrix has non-finite entries"));
        }
        let eig = SymmetricEigen::new(self.inner.clone());
        let n = self.dim();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .expect("finite eigenvalues")
        });
        let eigenvalues = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
        let eigenvectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        Ok(EigenDecomp {
            eigenvalues,
            eigenvectors,
        })
    }

    /// Moore-Penrose pseudoinverse through the eigendecomposition.
    ///
    /// `rank_tol` is relative to the largest eigenvalue magnitude; eigenvalues
    /// with `|lambda| <= rank_tol * max|lambda|` are treated as exactly zero.
    /// `None` uses the default `dim * 1e-12`.
    pub fn pinv(&self, rank_tol: Option<f64>) -> Result<SymMatrix> {
        let tol = match rank_tol {
            Some(t) if t > 0.0 => t,
            Some(_) => return Err(Error::invalid("rank_tol must be > 0")),
            None => self.default_rank_tol(),
        };
        let eig = self.sym_eig()?;
        let max_abs = eig.max_abs_eigenvalue();
        let cutoff = tol * max_abs;
        let inv_vals = eig.eigenvalues.map(|l| {
            if max_abs == 0.0 || l.abs() <= cutoff {
                0.0
            } else {
                1.0 / l
            }
        });
        let q = &eig.eigenvectors;
        let recon = q * DMatrix::from_diagonal(&inv_vals) * q.transpose();
        SymMatrix::new(recon)
    }

    pub fn default_rank_tol(&self) -> f64 {
        self.dim() as f64 * RANK_TOL_PER_DIM
    }

    /// Numerical rank at the default relative tolerance.
    pub fn rank(&self) -> Result<usize> {
        let eig = self.sym_eig()?;
        Ok(eig.rank(self.default_rank_tol()))
    }
}

/// Eigendecomposition of a [`SymMatrix`]: `S = Q diag(lambda) Q^T` with
/// eigenvalues sorted descending and orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct EigenDecomp {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl EigenDecomp {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn max_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, l| m.max(l.abs()))
    }

    /// Count of eigenvalues with magnitude above `rel_tol * max|lambda|`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let cutoff = rel_tol * self.max_abs_eigenvalue();
        self.eigenvalues.iter().filter(|l| l.abs() > cutoff).count()
    }

    /// Orthogonal projector onto the span of eigenvectors whose eigenvalue
    /// magnitude exceeds `rel_tol * max|lambda|`.
    pub fn range_projector(&self, rel_tol: f64) -> DMatrix<f64> {
        let n = self.dim();
        let cutoff = rel_tol * self.max_abs_eigenvalue();
        let mut proj = DMatrix::zeros(n, n);
        for j in 0..n {
            if self.eigenvalues[j].abs() > cutoff {
                let q = self.eigenvectors.column(j);
                proj += q * q.transpose();
            }
        }
        proj
    }

    /// `Q diag(lambda) Q^T`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.eigenvectors
            * DMatrix::from_diagonal(&self.eigenvalues)
            * self.eigenvectors.transpose()
    }
}

/// Outcome of a Loewner-order comparison of `A` against `B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LoewnerRelation {
    /// `A < B` strictly: `B - A` positive definite beyond the margin.
    StrictlyLess,
    /// `A <= B`: `B - A` PSD within the margin, but singular.
    LessOrEqual,
    /// `A <= B` fails: some direction has `v^T (B - A) v < 0`. This covers
    /// both genuinely incomparable pairs and `B < A`.
    Incomparable,
    /// `B - A` is numerically zero.
    Equal,
}

/// Loewner verdict with the minimum eigenvalue of `B - A` and, for
/// `StrictlyLess` and `Incomparable`, its eigenvector as a witness.
#[derive(Debug, Clone)]
pub struct LoewnerVerdict {
    pub relation: LoewnerRelation,
    pub witness_direction: Option<DVector<f64>>,
    pub min_eig_of_difference: f64,
}

/// Default strictness margin for a difference matrix `D = B - A`.
pub fn default_strict_tol(diff_frobenius: f64) -> f64 {
    1e-10 * (1.0 + diff_frobenius)
}

/// Compare `A` and `B` in the Loewner order via the spectrum of `B - A`.
///
/// `strict_tol` is the margin separating a strict ordering from numerical
/// PSD noise; `None` uses `1e-10 * (1 + ||B - A||_F)`.
pub fn loewner_compare(
    a: &SymMatrix,
    b: &SymMatrix,
    strict_tol: Option<f64>,
) -> Result<LoewnerVerdict> {
    if a.dim() != b.dim() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let diff = SymMatrix::new(b.as_matrix() - a.as_matrix())?;
    let tol = strict_tol.unwrap_or_else(|| default_strict_tol(diff.frobenius_norm()));
    let eig = diff.sym_eig()?;
    let n = diff.dim();
    let min_eig = eig.eigenvalues[n - 1];
    let max_eig = eig.eigenvalues[0];
    let witness = DVector::from(eig.eigenvectors.column(n - 1));

    let (relation, witness_direction) = if min_eig > tol {
        (LoewnerRelation::StrictlyLess, Some(witness))
    } else if min_eig < -tol {
        (LoewnerRelation::Incomparable, Some(witness))
    } else if max_eig <= tol {
        (LoewnerRelation::Equal, None)
    } else {
        (LoewnerRelation::LessOrEqual, None)
    };
    Ok(LoewnerVerdict {
        relation,
        witness_direction,
        min_eig_of_difference: min_eig,
    })
}

/// Whether `v` lies in the numerical range (column space) of `S`:
/// `||(I - P) v|| <= tol * ||v||` with `P` the projector onto eigenvectors
/// above the default rank cutoff.
pub fn range_contains(s: &SymMatrix, v: &DVector<f64>, tol: f64) -> Result<bool> {
    if v.len() != s.dim() {
        return Err(Error::invalid("vector length must match matrix dim"));
    }
    let norm = v.norm();
    if norm == 0.0 {
        return Err(Error::invalid("range test requires a nonzero vector"));
    }
    let eig = s.sym_eig()?;
    let proj = eig.range_projector(s.default_rank_tol());
    let residual = v - proj * v;
    Ok(residual.norm() <= tol * norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_sym(dim: usize, seed: u64) -> SymMatrix {
        let mut rng = substream(seed, 0);
        let m = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        SymMatrix::new(m).unwrap()
    }

    fn random_spd(dim: usize, seed: u64) -> SymMatrix {
        let mut rng = substream(seed, 1);
        let m = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        // Gram plus a diagonal shift keeps eigenvalues well off zero.
        SymMatrix::new(m.transpose() * &m + DMatrix::identity(dim, dim) * 0.5).unwrap()
    }

    #[test]
    fn identity_eigenvalues_are_ones() {
        let eig = SymMatrix::identity(3).unwrap().sym_eig().unwrap();
        for l in eig.eigenvalues.iter() {
            assert_relative_eq!(*l, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn diag_eigenpairs_are_axis_aligned() {
        let eig = SymMatrix::from_diagonal(&[2.0, 0.0])
            .unwrap()
            .sym_eig()
            .unwrap();
        assert_relative_eq!(eig.eigenvalues[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(eig.eigenvalues[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(eig.eigenvectors[(0, 0)].abs(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(eig.eigenvectors[(1, 1)].abs(), 1.0, epsilon = 1e-12);
    }

    /// Closed-form eigenvalue oracle for a 2x2 symmetric [[a, b], [b, c]].
    fn quadratic_eig_oracle(a: f64, b: f64, c: f64) -> (f64, f64) {
        let mean = 0.5 * (a + c);
        let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        (mean + disc, mean - disc)
    }

    #[test]
    fn two_by_two_matches_quadratic_oracle() {
        let mut rng = substream(11, 0);
        for _ in 0..50 {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            let c: f64 = rng.sample(StandardNormal);
            let s = SymMatrix::from_rows(&[vec![a, b], vec![b, c]]).unwrap();
            let eig = s.sym_eig().unwrap();
            let (hi, lo) = quadratic_eig_oracle(a, b, c);
            assert_relative_eq!(eig.eigenvalues[0], hi, epsilon = 1e-10);
            assert_relative_eq!(eig.eigenvalues[1], lo, epsilon = 1e-10);
        }
    }

    #[test]
    fn eig_invariants_hold_on_random_inputs() {
        for seed in 0..20 {
            let s = random_sym(6, seed);
            let eig = s.sym_eig().unwrap();
            let recon_err = (eig.reconstruct() - s.as_matrix()).norm()
                / s.frobenius_norm().max(1.0);
            assert!(recon_err <= 1e-9, "reconstruction error {recon_err}");
            let q = &eig.eigenvectors;
            let ortho_err = (q.transpose() * q - DMatrix::identity(6, 6)).norm();
            assert!(ortho_err <= 1e-9, "orthonormality error {ortho_err}");
        }
    }

    #[test]
    fn eigenvalue_sum_equals_trace() {
        for seed in 0..20 {
            let s = random_sym(7, seed + 100);
            let eig = s.sym_eig().unwrap();
            let sum: f64 = eig.eigenvalues.iter().sum();
            assert_relative_eq!(sum, s.trace(), max_relative = 1e-9, epsilon = 1e-12);
        }
    }

    #[test]
    fn sym_eig_rejects_non_finite() {
        let err = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, 0.0, 1.0]));
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn pinv_of_singular_diagonal() {
        let p = SymMatrix::from_diagonal(&[2.0, 0.0])
            .unwrap()
            .pinv(None)
            .unwrap();
        assert_relative_eq!(p.as_matrix()[(0, 0)], 0.5, epsilon = 1e-14);
        assert_relative_eq!(p.as_matrix()[(1, 1)], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn pinv_of_zero_is_zero() {
        let p = SymMatrix::zeros(3).unwrap().pinv(None).unwrap();
        assert_eq!(p.as_matrix().norm(), 0.0);
    }

    #[test]
    fn pinv_of_spd_matches_linear_solve_oracle() {
        // Independent route: solve S x = e_i columnwise with an LU solver.
        let s = random_spd(5, 3);
        let p = s.pinv(None).unwrap();
        let lu = s.as_matrix().clone().lu();
        for i in 0..5 {
            let mut e = DVector::zeros(5);
            e[i] = 1.0;
            let x = lu.solve(&e).expect("SPD is invertible");
            let col = p.as_matrix().column(i);
            assert!((col - x).norm() <= 1e-9);
        }
    }

    #[test]
    fn pinv_satisfies_penrose_identity() {
        for seed in 0..10 {
            let s = random_sym(5, seed + 40);
            let p = s.pinv(None).unwrap();
            let sps = s.as_matrix() * p.as_matrix() * s.as_matrix();
            let err = (&sps - s.as_matrix()).norm() / s.frobenius_norm().max(1.0);
            assert!(err <= 1e-8, "S S+ S deviation {err}");
        }
    }

    #[test]
    fn pinv_is_an_involution() {
        for seed in 0..10 {
            let s = random_sym(6, seed + 60);
            let back = s.pinv(None).unwrap().pinv(None).unwrap();
            let err = (back.as_matrix() - s.as_matrix()).norm() / s.frobenius_norm().max(1.0);
            assert!(err <= 1e-8, "pinv(pinv(S)) deviation {err}");
        }
    }

    #[test]
    fn pinv_order_reverses_for_spd_pairs() {
        // Numerical instance of the inverse order-reversal lemma.
        for seed in 0..30 {
            let m = random_spd(4, seed);
            let bump = random_spd(4, seed + 1000);
            let n = SymMatrix::new(m.as_matrix() + bump.as_matrix()).unwrap();
            let verdict = loewner_compare(
                &n.pinv(None).unwrap(),
                &m.pinv(None).unwrap(),
                None,
            )
            .unwrap();
            assert_eq!(verdict.relation, LoewnerRelation::StrictlyLess);
        }
    }

    #[test]
    fn pinv_order_reverses_on_shared_kernel() {
        // PSD pair with identical kernels: ordering reverses on the range.
        let mut rng = substream(77, 0);
        for _ in 0..30 {
            let g = DMatrix::from_fn(5, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
            let q = g.qr().q(); // orthonormal basis of a 3-dim subspace
            let s1 = random_spd(3, rng.random());
            let s2 = random_spd(3, rng.random());
            let m = SymMatrix::new(&q * s1.as_matrix() * q.transpose()).unwrap();
            let n = SymMatrix::new(
                &q * (s1.as_matrix() + s2.as_matrix()) * q.transpose(),
            )
            .unwrap();
            let mp = m.pinv(None).unwrap();
            let np = n.pinv(None).unwrap();
            // Full-space comparison cannot be strict (shared kernel)...
            let verdict = loewner_compare(&np, &mp, None).unwrap();
            assert!(matches!(
                verdict.relation,
                LoewnerRelation::LessOrEqual | LoewnerRelation::StrictlyLess
            ));
            // ...but restricted to the shared range it is.
            let diff = q.transpose() * (mp.as_matrix() - np.as_matrix()) * &q;
            let restricted = SymMatrix::new(diff).unwrap();
            let min_eig = restricted
                .sym_eig()
                .unwrap()
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            assert!(min_eig > 1e-12, "restricted min eig {min_eig}");
        }
    }

    #[test]
    fn loewner_identity_vs_double() {
        let a = SymMatrix::identity(3).unwrap();
        let b = SymMatrix::new(DMatrix::identity(3, 3) * 2.0).unwrap();
        let v = loewner_compare(&a, &b, None).unwrap();
        assert_eq!(v.relation, LoewnerRelation::StrictlyLess);
        assert_relative_eq!(v.min_eig_of_difference, 1.0, epsilon = 1e-12);
        assert!(v.witness_direction.is_some());
    }

    #[test]
    fn loewner_incomparable_with_witness() {
        let a = SymMatrix::from_diagonal(&[1.0, 2.0]).unwrap();
        let b = SymMatrix::from_diagonal(&[2.0, 1.0]).unwrap();
        let v = loewner_compare(&a, &b, None).unwrap();
        assert_eq!(v.relation, LoewnerRelation::Incomparable);
        let w = v.witness_direction.unwrap();
        // Witness lies along the second axis, where B - A = -1.
        assert_relative_eq!(w[1].abs(), 1.0, epsilon = 1e-10);
        let quad = (w.transpose() * (b.as_matrix() - a.as_matrix()) * &w)[(0, 0)];
        assert!(quad < 0.0);
    }

    #[test]
    fn loewner_rank_one_update_is_not_strict() {
        // Oracle: eigenvalues of v v^T are (||v||^2, 0, ..., 0), so the
        // difference is PSD but singular whenever dim > 1.
        let mut rng = substream(5, 2);
        for _ in 0..20 {
            let a = random_sym(4, rng.random());
            let v = DVector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal));
            let b = SymMatrix::new(a.as_matrix() + &v * v.transpose()).unwrap();
            let verdict = loewner_compare(&a, &b, None).unwrap();
            assert_eq!(verdict.relation, LoewnerRelation::LessOrEqual);
        }
    }

    #[test]
    fn loewner_equal_and_dim_mismatch() {
        let a = SymMatrix::identity(2).unwrap();
        let v = loewner_compare(&a, &a, None).unwrap();
        assert_eq!(v.relation, LoewnerRelation::Equal);
        let b = SymMatrix::identity(3).unwrap();
        assert!(loewner_compare(&a, &b, None).is_err());
    }

    #[test]
    fn range_membership_on_singular_diagonal() {
        let s = SymMatrix::from_diagonal(&[1.0, 0.0]).unwrap();
        let inside = DVector::from_row_slice(&[1.0, 0.0]);
        let outside = DVector::from_row_slice(&[0.0, 1.0]);
        assert!(range_contains(&s, &inside, 1e-9).unwrap());
        assert!(!range_contains(&s, &outside, 1e-9).unwrap());
        let zero = DVector::zeros(2);
        assert!(range_contains(&s, &zero, 1e-9).is_err());
    }

    #[test]
    fn range_of_rank_one_projector() {
        // Oracle: P = q q^T for a unit q; membership is exactly the
        // projection residual.
        let mut rng = substream(9, 0);
        let mut q = DVector::from_fn(5, |_, _| rng.sample::<f64, _>(StandardNormal));
        q /= q.norm();
        let s = SymMatrix::new(&q * q.transpose()).unwrap();
        let mut perp = DVector::from_fn(5, |_, _| rng.sample::<f64, _>(StandardNormal));
        perp -= &q * q.dot(&perp);
        perp /= perp.norm();
        let v = &q + perp * 1e-14;
        assert!(range_contains(&s, &v, 1e-9).unwrap());
    }
}
