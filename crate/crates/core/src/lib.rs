//! Douglas-Rachford phase retrieval with random phase masks.
//!
//! The crate provides the masked-Fourier measurement operator and its
//! unitary extension ([`model`]), the Fourier- and object-domain
//! Douglas-Rachford iterations ([`solvers`]), and the linearization of the
//! Fourier-domain iteration at the solution together with its singular
//! value structure ([`spectral`]).
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`). The aliases
//! below fix the scalar to `f64`, which is what the experiments use.

pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod scalar;
pub mod solvers;
pub mod spectral;

pub use error::{Error, Result};
pub use linalg::{GridDft, GridShape, RealPair};
pub use model::{ExtendedOp, MaskKind, MaskSpec, MeasuredData, PropagationOp, Variant};
pub use scalar::{phase, Real};
pub use solvers::{
    run_solver, Algorithm, Init, RecoveryResult, SectorSpec, SolverConfig, StopReason,
};
pub use spectral::{lambda2_power, LinearizationPoint, SpectralReport, SvdOracle};

pub use num_complex::Complex;

pub type C64 = Complex<f64>;
pub type C32 = Complex<f32>;

pub type Operator = PropagationOp<f64>;
pub type Extended = ExtendedOp<f64>;
pub type Sector = SectorSpec<f64>;
pub type Config = SolverConfig<f64>;
pub type Recovery = RecoveryResult<f64>;
pub type Report = SpectralReport<f64>;
pub type Linearization = LinearizationPoint<f64>;

pub type Operator32 = PropagationOp<f32>;
pub type Config32 = SolverConfig<f32>;
