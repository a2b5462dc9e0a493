//! Wave equation `phi_tt = phi_xx` on the expanding interval
//! `(-ell1 t, ell2 t)`, `t >= t0`, with Dirichlet walls.
//!
//! The crate provides the generalized Fourier series solution, an exact
//! method-of-characteristics solver used as an independent oracle, energy and
//! boundary-observability checks, non-observability counterexamples, and
//! boundary control synthesis by the Hilbert Uniqueness Method.

pub mod energy;
pub mod error;
pub mod extension;
pub mod geometry;
pub mod hum;
pub mod interp;
pub mod observability;
pub mod oracle;
pub mod presets;
pub mod quadrature;
pub mod scalar;
pub mod spectral;

pub use error::{Result, WaveError};
pub use extension::{extend, ExtendedData, Func, InitialData};
pub use geometry::{DomainGeometry, GeometrySpec, Side};
pub use hum::{ControlFunction, Controls};
pub use oracle::{solve_backward, Oracle};
pub use presets::Preset;
pub use scalar::Real;
pub use spectral::{compute_coefficients, CoefficientOptions, FieldSample, SpectralCoefficients, WaveField};

/// Crate version recorded in experiment metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Geometry64 = DomainGeometry<f64>;
pub type Geometry32 = DomainGeometry<f32>;
pub type Coefficients64 = SpectralCoefficients<f64>;
pub type Coefficients32 = SpectralCoefficients<f32>;
pub type InitialData64 = InitialData<f64>;
pub type WaveField64 = WaveField<f64>;
