//! Numerical laboratory for passive scalars advected by white-in-time
//! transport noise on the flat torus `T^d = [0, 2π)^d`.
//!
//! The crate is organized bottom-up:
//!
//! * [`torus`] and [`noise`]: geometry and counter-based Brownian increments.
//! * [`fields`]: Kraichnan and Baxendale–Rozovskii mode families with exact
//!   derivatives and covariance identities.
//! * [`conditions`]: span/ellipticity/Lie-bracket checks for the driving fields.
//! * [`flow`]: Stratonovich Heun integration of the Lagrangian, tangent and
//!   normalized tangent flows.
//! * [`lyapunov`]: top Lyapunov exponent, moment Lyapunov function and the
//!   twisted-semigroup eigen-estimator.
//! * [`mixing`]: two-point motion statistics and Lagrangian `H^{-s}` pairings.
//! * [`spectral`]: d = 2 pseudo-spectral solver for the advected scalar.
//! * [`stats`]: exponential decay fits and small statistics helpers.

pub mod conditions;
pub mod fields;
pub mod flow;
pub mod lyapunov;
pub mod mixing;
pub mod noise;
pub mod spectral;
pub mod stats;
pub mod torus;

pub use fields::{ModelSpec, VelocityModel};
pub use flow::FlowState;
pub use noise::NoiseRealization;
pub use torus::TorusPoint;

/// Round-trip float formatting used by every CSV writer (17 significant digits).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
