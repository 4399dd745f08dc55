//! Desk-scale laboratory for unpaired multimodal learning.
//!
//! The crate is organized around a linear-Gaussian data-generating process in
//! which two modalities observe a shared latent parameter block through known
//! design matrices. On top of that process it provides:
//!
//! - [`matrix`]: dense symmetric linear algebra (eigendecomposition,
//!   pseudoinverse, Loewner-order comparison, range tests),
//! - [`dgp`]: construction and sampling of the generating process, including
//!   the attenuated-projection configuration used by the Gaussian budget
//!   experiment,
//! - [`estimation`]: unimodal and joint least-squares estimators, block
//!   Fisher information, analytic CRLBs and Monte-Carlo covariance,
//! - [`theorems`]: numerical certification of the variance-reduction
//!   statements over randomized design ensembles, plus budget sweeps,
//! - [`neural`]: a minimal dense-network substrate with Adam and
//!   finite-difference gradient checking,
//! - [`train`]: shared-weight co-training procedures (supervised alternation,
//!   self-supervised next-embedding prediction, shared autoencoder),
//! - [`analysis`]: post-hoc metrics (functional margins, cluster quality,
//!   prototype alignment, boundary projections, cross-modal neuron
//!   correlations, exchange-rate plane fits),
//! - [`report`]: serializable experiment reports for replayable runs.

pub mod analysis;
pub mod dgp;
pub mod error;
pub mod estimation;
pub mod matrix;
pub mod neural;
pub mod report;
pub mod rng;
pub mod theorems;
pub mod train;

pub use error::{Error, Result};
