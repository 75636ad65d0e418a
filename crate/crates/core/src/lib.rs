//! Linear stability analysis for spatially uniform equilibria of the
//! one-dimensional electrostatic kinetic equation.
//!
//! Given an equilibrium velocity distribution `f0(v)` with derivative
//! `φ = f0'`, the crate answers, per wave number `k`:
//!
//! * how many exponentially growing modes exist (the instability index),
//!   counted *without* root searching from the sign data of `φ` at its
//!   zeros and the Nyquist-style boundary values of the dispersion function;
//! * where the growing roots `λ` of the dispersion relation actually sit
//!   (argument-principle bracketing plus Newton polishing, every root
//!   returned with a residual-and-winding certificate);
//! * which half-plane regions are certifiably free of spectrum, and how the
//!   dispersion function behaves in the short- and long-wavelength limits;
//! * and, independently of all spectral machinery, how a single spatial
//!   Fourier mode of the linearized dynamics actually evolves in time, so
//!   growth rates can be cross-validated against root locations.
//!
//! The numerical backbone is a deterministic adaptive Gauss–Kronrod engine
//! with certified tail bounds ([`quadrature`]), on top of which sit the
//! dispersion-function evaluators ([`dispersion`]), the sign-based counting
//! machinery ([`penrose`]), the contour root finder ([`roots`]), and the
//! time-domain integrators ([`evolution`]).

pub mod dispersion;
pub mod error;
pub mod evolution;
pub mod penrose;
pub mod profiles;
pub mod quadrature;
pub mod roots;

pub use error::{Error, Result};
pub use profiles::{
    build_profile, critical_points, level_widths, moment, CriticalKind, CriticalPoint, Kind,
    Moment, ProfileSpec, VelocityProfile,
};
pub use quadrature::{
    cauchy_integral, integrate_line, plemelj_boundary, pv_cauchy, QuadratureResult, Side,
};
