//! Numerical toolkit for gauge fields on long cylinders over the round `S^3`.
//!
//! The crate provides, in rough dependency order:
//!
//! - [`lie`]: real skew-symmetric Lie-algebra values with the `Tr(A B^t)`
//!   inner product, including an orthonormal `su(2)` triple.
//! - [`geometry`]: closed-form low eigenmodes of the Laplace and Hodge-Laplace
//!   operators on `S^3`, the two rotation frames, the transition matrix
//!   between them, and exact product quadrature.
//! - [`forms`]: constant self-dual/anti-self-dual two-forms on `R^4`, the
//!   cylinder two-form families `P`/`Q`, contractions, and pullbacks under the
//!   cone map and the inversion.
//! - [`fields`]: sampled/closure-backed scalar and one-form fields on neck
//!   cylinders, finite differencing in `t` and along sphere geodesics.
//! - [`connection`]: matrix-valued connection one-forms, curvature, gauge
//!   transformations, the charge-one instanton family, decay fitting, and
//!   neck-mode extraction.
//! - [`balance`]: stress-energy tensor, conserved slice integrals, the seven
//!   balancing residuals, and the `su(2)` one-instanton no-go certificate.
//! - [`spectral`]: the mode-wise cylinder solver for `(d^2/dt^2 - L)u = f`,
//!   weighted Hoelder norms, the gauge functional and its linearization, and
//!   the low-mode ODE integrator.
//! - [`report`]: machine-readable check reports with deterministic
//!   fixed-precision serialization.

pub mod balance;
pub mod connection;
pub mod fields;
pub mod forms;
pub mod geometry;
pub mod lie;
pub mod report;
pub mod spectral;
pub mod verify;

pub use balance::{BalanceReport, BoundaryData};
pub use connection::{GaugeField, Instanton, NeckExpansion, Orientation};
pub use fields::{CylGrid, NeckGeometry};
pub use forms::{Chart, CylPoint, CylTwoForm, TwoFormR4};
pub use geometry::{GridConfig, S3Point, SphereGrid, TransitionMatrix};
pub use lie::LieMatrix;
pub use spectral::SpectralGaps;

/// Volume of the unit three-sphere, `2 pi^2`.
pub const S3_VOLUME: f64 = 2.0 * std::f64::consts::PI * std::f64::consts::PI;
