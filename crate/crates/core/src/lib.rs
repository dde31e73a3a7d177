//! Numerics for the cold-plasma model.
//!
//! The crate is organized bottom-up:
//!
//! * [`plasma`] evaluates species frequencies, the Stix parameters, the
//!   dielectric tensor and the lower-hybrid coefficient functions.
//! * [`dispersion`] builds and solves the wave-normal quartic and locates
//!   cutoffs and hybrid resonances in frequency.
//! * [`electrostatics`] covers the electrostatic reductions: the plane-layered
//!   ODE, the two-dimensional PDE coefficients, sonic conditions, singular
//!   points on the sonic line and the scaled local normal form.
//! * [`typegeometry`] classifies sonic points (Tricomi vs Keldysh), traces
//!   characteristics of `(x - y^2) u_xx + u_yy` and evaluates the curl-curl and
//!   Coulomb-gauge symbols.
//! * [`weak`] discretizes the model operator, evaluates weighted norms and
//!   multiplier energy inequalities, and solves the closed Dirichlet and mixed
//!   boundary-value problems in the least-squares sense.

pub mod constants;
pub mod dispersion;
pub mod electrostatics;
pub mod fields;
pub mod format;
pub mod plasma;
pub mod roots;
pub mod typegeometry;
pub mod weak;

pub use num_complex::Complex64;
