//! Numerical laboratory for radially symmetric positive solutions of the
//! elliptic system
//!
//! ```text
//! -Δu = |v|^p |u|^(r-1) u,   -Δv = |u|^q |v|^(s-1) v    on R^n
//! ```
//!
//! The crate is organized around the objects the problem is built from:
//!
//! * [`exponents`] — pure algebra on the exponent tuple `(n, p, q, r, s)`:
//!   hypothesis validation, the scaling pair `(a, b)`, regime classification,
//!   and the closed-form threshold and asymptotic constants.
//! * [`field`] — radial functions sampled on log-uniform grids with explicit
//!   power-law (optionally log-corrected) tail models, plus CSV/JSON
//!   serialization.
//! * [`greens`] — the radial Newton potential `Γ∗f`, its quadrature over many
//!   decades of radius, and the discrete radial Laplacian.
//! * [`solver`] — ground states by shooting on the singular radial ODE and,
//!   independently, by damped Picard iteration on the Green representation.
//! * [`analysis`] — decay-rate fits, weak-Lebesgue quasinorms, and the
//!   pointwise/integral checks the decay theory predicts.

pub mod analysis;
pub mod exponents;
pub mod field;
mod gammafn;
pub mod greens;
mod ode;
pub mod solver;

pub use analysis::{DecayFit, EnvelopeReport, MembershipReport};
pub use exponents::{DecayProfile, Regime, ScalingReport, SystemParams};
pub use field::{OriginModel, RadialField, RadialGrid, TailModel};
pub use greens::KernelConstants;
pub use solver::{GroundState, ShootingConfig, SolveMethod, TrajectoryClass};
