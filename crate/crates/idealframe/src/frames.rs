//! Orbital frame construction, the departure-frame rotation, and the
//! Euler-parameter attitude of the ideal frame.
//!
//! The ideal frame is the intermediate frame whose angular velocity has no
//! component along the orbit normal's in-plane (Keplerian) rotation; its
//! attitude relative to the departure frame (the orbital frame frozen at
//! the initial epoch) is carried either by the unit quaternion λ₁..λ₄ or
//! by the scaled set gᵢ = √G·λᵢ, whose squared norm is the angular-momentum
//! magnitude G.

use crate::math::{Mat3, Vec3};
use crate::state::angular_momentum;
use crate::Error;

/// The instantaneous orbital frame: u along the radius, n along the
/// angular momentum, v = n × u, plus the radial distance and the
/// angular-momentum magnitude.
#[derive(Debug, Clone, Copy)]
pub struct OrbitalFrame {
    pub u: Vec3,
    pub v: Vec3,
    pub n: Vec3,
    pub r: f64,
    pub g: f64,
}

/// Build the orbital frame of a Cartesian state. Fails for zero radius or
/// rectilinear (zero angular momentum) states, which every ideal-frame
/// formula divides by.
pub fn orbital_frame(pos: Vec3, vel: Vec3) -> Result<OrbitalFrame, Error> {
    let r = pos.norm();
    if r <= 0.0 {
        return Err(Error::Singular("zero radius"));
    }
    let gv = angular_momentum(pos, vel);
    let g = gv.norm();
    if g <= 0.0 {
        return Err(Error::Rectilinear);
    }
    let u = pos / r;
    let n = gv / g;
    Ok(OrbitalFrame { u, v: n.cross(u), n, r, g })
}

/// Rotation from the orbital frame to the space frame: columns are u, v, n
/// in space axes. Evaluated at the initial epoch this is the constant
/// departure matrix M₀, frozen for the whole propagation.
pub fn departure_matrix(frame: &OrbitalFrame) -> Mat3 {
    Mat3::from_columns(frame.u, frame.v, frame.n)
}

/// Euler (redundant) parameters [λ₁, λ₂, λ₃, λ₄] with λ₄ the scalar part;
/// unit norm up to integration drift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerParams(pub [f64; 4]);

/// Scaled parameters [g₁, g₂, g₃, g₄] = √G · [λ₁..λ₄], so Σgᵢ² = G.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledParams(pub [f64; 4]);

impl ScaledParams {
    /// Σgᵢ², the angular-momentum magnitude carried by the set.
    pub fn norm_squared(&self) -> f64 {
        self.0.iter().map(|g| g * g).sum()
    }
}

/// Attitude matrix of a parameter 4-vector p with Σpᵢ² = norm_sq.
///
/// For a unit quaternion (norm_sq = 1) this is the standard
/// quaternion-to-matrix table; for scaled parameters the identity
/// λᵢλⱼ = pᵢpⱼ/Σp² lets the same matrix be formed without the square
/// root of the norm.
pub(crate) fn attitude_matrix(p: &[f64; 4], norm_sq: f64) -> Mat3 {
    let [p1, p2, p3, p4] = *p;
    let k = 2.0 / norm_sq;
    Mat3 {
        m: [
            [
                1.0 - k * (p2 * p2 + p3 * p3),
                k * (p1 * p2 - p4 * p3),
                k * (p1 * p3 + p4 * p2),
            ],
            [
                k * (p1 * p2 + p4 * p3),
                1.0 - k * (p1 * p1 + p3 * p3),
                k * (p2 * p3 - p4 * p1),
            ],
            [
                k * (p1 * p3 - p4 * p2),
                k * (p2 * p3 + p4 * p1),
                1.0 - k * (p1 * p1 + p2 * p2),
            ],
        ],
    }
}

/// Rotation matrix N(λ) of the ideal frame relative to the departure
/// frame. The caller is expected to pass a (near-)unit parameter set; no
/// normalization is applied, so norm drift shows up as a small
/// non-orthogonality that diagnostics monitor.
pub fn rotation_from_params(lam: &EulerParams) -> Mat3 {
    attitude_matrix(&lam.0, 1.0)
}

/// Rotation matrix N(g/√(Σg²)) formed directly from scaled parameters.
pub fn rotation_from_scaled(g: &ScaledParams) -> Result<Mat3, Error> {
    let norm_sq = g.norm_squared();
    if norm_sq <= 0.0 {
        return Err(Error::Singular("zero scaled-parameter norm"));
    }
    Ok(attitude_matrix(&g.0, norm_sq))
}

/// g = √G·λ.
pub fn scale_params(lam: &EulerParams, g: f64) -> Result<ScaledParams, Error> {
    if g <= 0.0 {
        return Err(Error::Singular("non-positive angular momentum"));
    }
    let s = g.sqrt();
    Ok(ScaledParams(lam.0.map(|l| s * l)))
}

/// Inverse of [`scale_params`]: λ = g/√(Σg²) and G = Σg².
pub fn unscale_params(g: &ScaledParams) -> Result<(EulerParams, f64), Error> {
    let norm_sq = g.norm_squared();
    if norm_sq <= 0.0 {
        return Err(Error::Singular("zero scaled-parameter norm"));
    }
    let inv = 1.0 / norm_sq.sqrt();
    Ok((EulerParams(g.0.map(|c| c * inv)), norm_sq))
}

/// In-plane unit vectors of the ideal frame at angle θ*:
/// u_I = (cos θ*, sin θ*, 0) and v_I = (−sin θ*, cos θ*, 0), mapped through
/// a composed rotation `a` (normally M₀·N). Returns (u_S, v_S, n_S).
pub(crate) fn axes_from_attitude(a: &Mat3, sin_t: f64, cos_t: f64) -> (Vec3, Vec3, Vec3) {
    let c0 = a.col(0);
    let c1 = a.col(1);
    (
        c0 * cos_t + c1 * sin_t,
        c1 * cos_t - c0 * sin_t,
        a.col(2),
    )
}

/// Orbital-frame unit vectors in space axes for a parameter 4-vector
/// (either λ or g; the norm is divided out) at in-plane angle θ*.
pub fn ideal_axes_in_space(
    m0: &Mat3,
    params: &[f64; 4],
    theta: f64,
) -> Result<(Vec3, Vec3, Vec3), Error> {
    let norm_sq: f64 = params.iter().map(|p| p * p).sum();
    if norm_sq <= 0.0 {
        return Err(Error::Singular("zero parameter norm"));
    }
    let a = *m0 * attitude_matrix(params, norm_sq);
    let (sin_t, cos_t) = theta.sin_cos();
    Ok(axes_from_attitude(&a, sin_t, cos_t))
}
