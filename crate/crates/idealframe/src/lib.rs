//! Special-perturbation propagation of perturbed Keplerian motion in
//! Hansen's ideal frame.
//!
//! The library integrates the same orbit through seven interchangeable
//! formulations of the equations of motion:
//!
//! * **Cowell** — Cartesian position/velocity in physical time.
//! * **8-dimensional ideal frame** — Euler parameters λ₁..λ₄ of the ideal
//!   frame plus the angular-momentum magnitude G, with either the inverse
//!   distance pair (q, Q) or Deprit's ideal elements (C*, S*) carrying the
//!   in-plane motion. Stepped in the regularized angle θ*.
//! * **7-dimensional ideal frame** — the scaled parameters gᵢ = √G λᵢ,
//!   which absorb G into the parameter norm (G = Σgᵢ²) and drop one
//!   equation from the system. Same (q, Q) and (C*, S*) variants.
//! * **Non-regularized 7-dimensional variants** — the same scaled
//!   parameters integrated in physical time, carrying (r, ṙ) or (C*, S*).
//!
//! All propagation runs in internal units chosen so that the gravitational
//! parameter is 1 and the initial osculating semi-major axis is the length
//! unit; conversion happens once at ingestion and once at output.
//!
//! The [`propagator`] module drives encode → integrate → decode end to end;
//! [`integrator`] provides the adaptive Dormand–Prince 8(5,3) stepper with
//! exact landing on requested output epochs.

pub mod forces;
pub mod formulations;
pub mod frames;
pub mod integrator;
pub mod math;
pub mod propagator;
pub mod state;

pub use forces::{DisturbingForce, ForceConfig, MoonParams, PerturbationSample};
pub use formulations::{decode, encode, Dynamics, EncodedState, FormulationKind};
pub use frames::{EulerParams, OrbitalFrame, ScaledParams};
pub use integrator::{StepStats, Tolerances};
pub use math::{Mat3, Vec3};
pub use propagator::{propagate, Scenario, Trajectory};
pub use state::{CartesianState, GravParams, UnitSystem};

/// Library-wide error type.
///
/// `Singular` is special: during an integration step attempt it marks a
/// state the field cannot be evaluated at (for example a trial step that
/// overshot into q ≤ 0), and the step controller responds by rejecting the
/// step and retrying with a shorter one rather than aborting the run.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("not a bound orbit: 2GM/r - v^2 must be positive")]
    NotBound,
    #[error("rectilinear orbit: angular momentum is zero")]
    Rectilinear,
    #[error("singular state: {0}")]
    Singular(&'static str),
    #[error("maximum step count {max_steps} exceeded at s = {s}")]
    MaxSteps { s: f64, max_steps: u64 },
    #[error("step size underflow at s = {s}")]
    StepUnderflow { s: f64 },
    #[error("target epoch {target} precedes the current epoch {current}")]
    EpochInPast { target: f64, current: f64 },
    #[error("time decreased along the flow: corrupted state")]
    NonMonotoneTime,
    #[error("epoch landing failed: {0}")]
    EpochLanding(&'static str),
    #[error("invalid scenario: {0}")]
    Scenario(String),
}

impl Error {
    /// True for errors that a trial integration step may legitimately
    /// produce; the stepper retries these with a smaller step.
    pub fn is_recoverable(&self) -> bool {
        matches!(self, Error::Singular(_))
    }
}
