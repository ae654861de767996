//! Disturbing-force models: the J2 zonal term, a circular-orbit third
//! body, and the projection of any disturbing acceleration onto the
//! ideal-frame axes.
//!
//! Forces are always evaluated in the space frame; the formulations
//! project the result afterwards. That keeps the force models agnostic of
//! which formulation is integrating them.

use crate::math::Vec3;
use crate::state::{GravParams, UnitSystem};
use crate::Error;

/// Circular-orbit third body. The orbit plane is given by inclination to
/// the equator and the node angle; `phase0` is the in-plane angle from the
/// node direction at t = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoonParams {
    pub gm: f64,
    pub radius: f64,
    pub mean_motion: f64,
    pub inclination: f64,
    pub node: f64,
    pub phase0: f64,
    plane_x: Vec3,
    plane_y: Vec3,
}

impl MoonParams {
    /// Angles in radians.
    pub fn new(
        gm: f64,
        radius: f64,
        mean_motion: f64,
        inclination: f64,
        node: f64,
        phase0: f64,
    ) -> Result<MoonParams, Error> {
        if gm <= 0.0 || radius <= 0.0 || mean_motion <= 0.0 {
            return Err(Error::Scenario(
                "moon gm, radius and mean_motion must be positive".into(),
            ));
        }
        let (sn, cn) = node.sin_cos();
        let (si, ci) = inclination.sin_cos();
        Ok(MoonParams {
            gm,
            radius,
            mean_motion,
            inclination,
            node,
            phase0,
            plane_x: Vec3::new(cn, sn, 0.0),
            plane_y: Vec3::new(-sn * ci, cn * ci, si),
        })
    }

    /// Unit normal of the moon's orbit plane.
    pub fn normal(&self) -> Vec3 {
        self.plane_x.cross(self.plane_y)
    }

    pub(crate) fn to_internal(&self, units: &UnitSystem) -> MoonParams {
        MoonParams {
            gm: units.gm_to_internal(self.gm),
            radius: self.radius / units.ul,
            mean_motion: self.mean_motion * units.ut,
            ..*self
        }
    }
}

/// Position of the moon at time t: a point of radius `radius` in the
/// configured plane at angle phase0 + mean_motion·t.
pub fn moon_position(t: f64, moon: &MoonParams) -> Vec3 {
    let (s, c) = (moon.phase0 + moon.mean_motion * t).sin_cos();
    (moon.plane_x * c + moon.plane_y * s) * moon.radius
}

/// Which perturbations act, and with what parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceConfig {
    pub grav: GravParams,
    pub enable_j2: bool,
    pub enable_moon: bool,
    pub moon: Option<MoonParams>,
}

impl ForceConfig {
    /// Pure two-body configuration: no perturbations.
    pub fn kepler(gm: f64) -> ForceConfig {
        ForceConfig {
            grav: GravParams { gm, j2: 0.0, re: 1.0 },
            enable_j2: false,
            enable_moon: false,
            moon: None,
        }
    }

    /// The same configuration expressed in internal units (GM = 1).
    pub fn to_internal(&self, units: &UnitSystem) -> ForceConfig {
        ForceConfig {
            grav: GravParams {
                gm: units.gm_to_internal(self.grav.gm),
                j2: self.grav.j2,
                re: self.grav.re / units.ul,
            },
            enable_j2: self.enable_j2,
            enable_moon: self.enable_moon,
            moon: self.moon.map(|m| m.to_internal(units)),
        }
    }
}

/// Acceleration of the J2 disturbing potential
/// U = −(GM·J2·Re²/2r³)·(3(z/r)² − 1), i.e. its analytic gradient ∇U.
pub fn j2_accel(pos: Vec3, grav: &GravParams) -> Result<Vec3, Error> {
    let r2 = pos.norm_squared();
    if r2 <= 0.0 {
        return Err(Error::Singular("zero radius in J2 term"));
    }
    let r = r2.sqrt();
    let k = grav.gm * grav.j2 * grav.re * grav.re;
    let zr2 = pos.z * pos.z / r2;
    let factor = -1.5 * k / (r2 * r2 * r);
    Ok(Vec3::new(
        factor * pos.x * (1.0 - 5.0 * zr2),
        factor * pos.y * (1.0 - 5.0 * zr2),
        factor * pos.z * (3.0 - 5.0 * zr2),
    ))
}

/// Differential attraction of a third body at `moon_pos`:
/// GMm·[(x_m − x)/‖x_m − x‖³ − x_m/‖x_m‖³].
pub fn third_body_accel(pos: Vec3, moon_pos: Vec3, gm_moon: f64) -> Result<Vec3, Error> {
    let rel = moon_pos - pos;
    let d2 = rel.norm_squared();
    if d2 <= 0.0 {
        return Err(Error::Singular("collision with third body"));
    }
    let m2 = moon_pos.norm_squared();
    if m2 <= 0.0 {
        return Err(Error::Singular("third body at origin"));
    }
    let d3 = d2 * d2.sqrt();
    let m3 = m2 * m2.sqrt();
    Ok((rel / d3 - moon_pos / m3) * gm_moon)
}

/// Sum of the enabled disturbing accelerations, in space axes.
pub fn total_perturbation(
    t: f64,
    pos: Vec3,
    _vel: Vec3,
    cfg: &ForceConfig,
) -> Result<Vec3, Error> {
    let mut p = Vec3::ZERO;
    if cfg.enable_j2 {
        p += j2_accel(pos, &cfg.grav)?;
    }
    if cfg.enable_moon {
        let moon = cfg.moon.as_ref().ok_or(Error::Singular("moon enabled without parameters"))?;
        p += third_body_accel(pos, moon_position(t, moon), moon.gm)?;
    }
    Ok(p)
}

/// A disturbing acceleration together with its non-dimensional ideal-frame
/// projections P*·u, P*·v, P*·n, where P* = (r³/G²)·P.
#[derive(Debug, Clone, Copy)]
pub struct PerturbationSample {
    pub accel: Vec3,
    pub pu: f64,
    pub pv: f64,
    pub pn: f64,
}

/// Scale P* = (r³/G²)·P and project onto the orbital-frame axes in space
/// coordinates.
pub fn project_perturbation(
    p_space: Vec3,
    axes: (Vec3, Vec3, Vec3),
    r: f64,
    g: f64,
) -> PerturbationSample {
    let scale = r * r * r / (g * g);
    let (u, v, n) = axes;
    PerturbationSample {
        accel: p_space,
        pu: scale * p_space.dot(u),
        pv: scale * p_space.dot(v),
        pn: scale * p_space.dot(n),
    }
}

/// Anything that can produce a disturbing acceleration. Implemented by
/// [`ForceConfig`] for the production models and by plain closures in
/// tests that need a synthetic force.
pub trait DisturbingForce {
    fn accel(&self, t: f64, pos: Vec3, vel: Vec3) -> Result<Vec3, Error>;
}

impl DisturbingForce for ForceConfig {
    fn accel(&self, t: f64, pos: Vec3, vel: Vec3) -> Result<Vec3, Error> {
        total_perturbation(t, pos, vel, self)
    }
}

impl<F> DisturbingForce for F
where
    F: Fn(f64, Vec3, Vec3) -> Vec3,
{
    fn accel(&self, t: f64, pos: Vec3, vel: Vec3) -> Result<Vec3, Error> {
        Ok(self(t, pos, vel))
    }
}
