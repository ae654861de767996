//! State containers, gravitational parameters, and the internal unit
//! system.

use crate::math::Vec3;
use crate::Error;

/// Inertial Cartesian state: epoch, position, velocity. The universal
/// exchange format between formulations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianState {
    pub t: f64,
    pub pos: Vec3,
    pub vel: Vec3,
}

impl CartesianState {
    pub fn new(t: f64, pos: Vec3, vel: Vec3) -> CartesianState {
        CartesianState { t, pos, vel }
    }
}

/// Central-body gravitational parameters: GM, the J2 zonal coefficient,
/// and the equatorial radius the zonal term is referred to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GravParams {
    pub gm: f64,
    pub j2: f64,
    pub re: f64,
}

/// Internal units of length and time.
///
/// UL = GM / (2GM/r − v²) is the osculating semi-major axis at the epoch
/// state, and UT = UL·√(UL/GM), so that GM = 1 and the unperturbed period
/// is 2π in internal units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitSystem {
    pub ul: f64,
    pub ut: f64,
}

impl UnitSystem {
    /// Build the unit system from an epoch state. Rejects non-elliptic
    /// energies (2GM/r − v² ≤ 0).
    pub fn from_state(pos: Vec3, vel: Vec3, gm: f64) -> Result<UnitSystem, Error> {
        let r = pos.norm();
        if r <= 0.0 {
            return Err(Error::Singular("zero radius"));
        }
        let denom = 2.0 * gm / r - vel.norm_squared();
        if denom <= 0.0 {
            return Err(Error::NotBound);
        }
        let ul = gm / denom;
        let ut = ul * (ul / gm).sqrt();
        Ok(UnitSystem { ul, ut })
    }

    /// Velocity unit UL/UT.
    pub fn uv(&self) -> f64 {
        self.ul / self.ut
    }

    pub fn length_to_internal(&self, x: f64) -> f64 {
        x / self.ul
    }

    pub fn time_to_internal(&self, t: f64) -> f64 {
        t / self.ut
    }

    pub fn pos_to_internal(&self, x: Vec3) -> Vec3 {
        x / self.ul
    }

    pub fn vel_to_internal(&self, v: Vec3) -> Vec3 {
        v / self.uv()
    }

    pub fn time_from_internal(&self, t: f64) -> f64 {
        t * self.ut
    }

    pub fn pos_from_internal(&self, x: Vec3) -> Vec3 {
        x * self.ul
    }

    pub fn vel_from_internal(&self, v: Vec3) -> Vec3 {
        v * self.uv()
    }

    /// Gravitational parameter expressed in internal units; 1 for the
    /// central body by construction.
    pub fn gm_to_internal(&self, gm: f64) -> f64 {
        gm * self.ut * self.ut / (self.ul * self.ul * self.ul)
    }
}

/// Angular momentum per unit mass, G = x × v.
pub fn angular_momentum(pos: Vec3, vel: Vec3) -> Vec3 {
    pos.cross(vel)
}

/// The eccentricity vector e = (v × G)/GM − x/r. Its magnitude is the
/// osculating eccentricity; it points from the focus to periapsis.
pub fn eccentricity_vector(pos: Vec3, vel: Vec3, gm: f64) -> Result<Vec3, Error> {
    let r = pos.norm();
    if r <= 0.0 {
        return Err(Error::Singular("zero radius"));
    }
    let g = angular_momentum(pos, vel);
    Ok(vel.cross(g) / gm - pos / r)
}

/// Diagnostic G·e. Identically zero for any consistent state, so the
/// returned value measures accumulated round-off, not dynamics. NaN for a
/// zero-radius state.
pub fn orthogonality_defect(pos: Vec3, vel: Vec3, gm: f64) -> f64 {
    match eccentricity_vector(pos, vel, gm) {
        Ok(e) => angular_momentum(pos, vel).dot(e),
        Err(_) => f64::NAN,
    }
}
