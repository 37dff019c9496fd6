//! Hadamard gap series in growth spaces `h∞_v` of harmonic functions on the unit disk.
//!
//! The crate is organised around a handful of modules:
//!
//! * [`weights`]: admissible weights `v`, the companion `g(x) = v(1 - 1/x)`,
//!   doubling and regularity certificates.
//! * [`gapseries`]: the gap series type, padding, and the b-chain example and
//!   counterexample constructors.
//! * [`membership`]: coefficient-sum profiles `γ(N)`, necessary bounds,
//!   certified majorants, the Bloch translation and witness search.
//! * [`eval`]: evaluation near the boundary, circle profiles, Fourier recovery
//!   and tail bounds.
//! * [`oscillation`]: the weighted radial average `I_u(R, φ)`, its moments,
//!   iterated-logarithm statistics and sharpness checks.
//!
//! All numerical code is generic over the scalar type through [`Real`]; the
//! aliases at the crate root fix it to `f64`, which is what every reported
//! tolerance assumes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod eval;
pub mod gapseries;
pub mod io;
pub mod membership;
pub mod oscillation;
pub mod phase;
pub mod quadrature;
pub mod radius;
pub mod real;
pub mod spectral;
pub mod weights;

pub use error::{Error, Result};
pub use real::Real;

pub use num_complex::Complex;

/// Schema tag embedded in every JSON document this crate writes.
pub const SCHEMA: &str = "gapflow/1";

pub type Weight = weights::Weight<f64>;
pub type Weight32 = weights::Weight<f32>;
pub type Radius = radius::Radius<f64>;
pub type GapSeries = gapseries::GapSeries<f64>;
pub type GapSeries32 = gapseries::GapSeries<f32>;
pub type Term = gapseries::Term<f64>;
pub type BIndexChain = gapseries::BIndexChain<f64>;
pub type Construction = gapseries::Construction<f64>;
pub type DoublingCertificate = weights::DoublingCertificate<f64>;
pub type MembershipReport = membership::MembershipReport<f64>;
pub type CircleProfile = eval::CircleProfile<f64>;
pub type SpectralSeries = spectral::SpectralSeries<f64>;
pub type LilStatistics = oscillation::LilStatistics<f64>;
pub type OscillationTrace = oscillation::OscillationTrace<f64>;
