//! Fidelity checks for linear covariance (LinCov) uncertainty propagation.
//!
//! The crate compares the first-order (Jacobian) propagation of a Gaussian
//! belief through a nonlinear map against higher-fidelity moment sources:
//! Monte Carlo sample clouds, second-order Taylor expansions built from
//! state transition tensors, and the scaled unscented transform. On top of
//! those sources it computes Mahalanobis-distance based checks
//! ([`metrics::smdm`], [`metrics::esmd`], [`metrics::esmdole_2`],
//! [`metrics::mcr`]), optimization based nonlinearity measures
//! ([`metrics::wussos`], [`metrics::wussolc`], [`metrics::wussadl`]) and
//! maximal directional skewness / excess kurtosis via tensor z-eigenpairs.
//!
//! The numerical core is generic over the scalar type through [`Real`];
//! `f64` aliases for the common types are exported at the crate root. The
//! [`study`] module drives the cislunar NRHO experiment end to end.

pub mod cr3bp;
pub mod error;
pub mod linalg;
pub mod mc;
pub mod metrics;
pub mod moments;
pub mod ode;
pub mod scalar;
pub mod study;
pub mod teig;
pub mod tensor;
pub mod transforms;

pub use error::{Error, Result};
pub use scalar::Real;

/// Supersymmetric tensor in double precision.
pub type SymTensorF64 = tensor::SymTensor<f64>;
/// Mixed (one output, two symmetric input indices) tensor in double precision.
pub type MixedTensor3F64 = tensor::MixedTensor3<f64>;
pub type GaussianBeliefF64 = moments::GaussianBelief<f64>;
pub type MomentSetF64 = moments::MomentSet<f64>;
pub type QuadraticMapF64 = transforms::QuadraticMap<f64>;
pub type EigenPairF64 = teig::EigenPair<f64>;
pub type SampleCloudF64 = mc::SampleCloud<f64>;
pub type VariationalStateF64 = cr3bp::VariationalState<f64>;
pub type FidelityReportF64 = metrics::FidelityReport<f64>;

/// Single-precision tensor, mainly useful for quick exploratory runs.
pub type SymTensorF32 = tensor::SymTensor<f32>;
pub type GaussianBeliefF32 = moments::GaussianBelief<f32>;
