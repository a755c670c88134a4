//! Flow-equation diagonalization of real symmetric band matrices.
//!
//! The central object is [`BandedSymmetricMatrix`], flowed under
//! `dH/dl = [eta, H]` with the band-preserving generator
//! `eta_nm = sign(n - m) h_nm` (or Wegner's `[H_d, H]` for comparison) by
//! [`flow::integrate_flow`]. The [`models`] module builds the Lipkin and
//! spin-boson Hamiltonians as tridiagonal matrices, [`analytics`] holds the
//! closed-form and large-n results, and [`oracle`] provides two independent
//! eigensolvers used to check everything else.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix `f64`, which is what the CLI uses.

pub mod analytics;
pub mod band;
pub mod dense;
pub mod flow;
pub mod models;
pub mod ode;
pub mod oracle;
mod scalar;

pub use band::{split_irreducible, BandError, BandedSymmetricMatrix, IrreducibleBlock};
pub use dense::DenseMatrix;
pub use flow::{
    integrate_flow, ConservationReport, FlowConfig, FlowError, FlowResult, GeneratorKind,
    TraceMode,
};
pub use oracle::SpectrumResult;
pub use scalar::Scalar;

/// Double-precision band matrix.
pub type BandMatrix = BandedSymmetricMatrix<f64>;
/// Single-precision band matrix.
pub type BandMatrix32 = BandedSymmetricMatrix<f32>;
/// Double-precision dense symmetric matrix.
pub type Dense = DenseMatrix<f64>;
/// Double-precision flow configuration.
pub type Config = FlowConfig<f64>;
/// Double-precision flow outcome.
pub type Flow = FlowResult<f64>;
/// Double-precision oracle spectrum.
pub type Spectrum = SpectrumResult<f64>;
/// Double-precision Lipkin parameters.
pub type Lipkin = models::LipkinParams<f64>;
/// Double-precision spin-boson parameters.
pub type SpinBoson = models::SpinBosonParams<f64>;
