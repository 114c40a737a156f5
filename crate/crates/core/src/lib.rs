//! Memory-free iterative inference for Gaussian latent variable models.
//!
//! The crate covers a probit teacher-student problem end to end: instance
//! generation ([`ensemble`]), single-site posterior moments ([`likelihood`]),
//! spectral machinery for the covariance `K = XXᵀ` ([`spectral`]), the static
//! fixed point that parameterizes the algorithm ([`replica`]), the algorithm
//! and its VAMP counterpart ([`dynamics`]), the dynamical theory predicting
//! their trajectories ([`dft`]) and an experiment harness ([`harness`]).

pub mod dft;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod field;
pub mod harness;
pub mod fwht;
pub mod likelihood;
pub mod quadrature;
pub mod replica;
pub mod rng;
pub mod spectral;

pub use ensemble::{DesignKind, DesignMatrix, TeacherInstance};
pub use error::{Error, Result, Stage};
pub use likelihood::{LikelihoodKind, LikelihoodModel, Moments};
pub use quadrature::QuadratureSpec;
pub use spectral::{AOperator, SpectralData};
