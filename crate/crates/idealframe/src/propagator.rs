//! End-to-end propagation: unit conversion at ingestion, encoding into the
//! chosen formulation, integration with exact landing on every requested
//! output epoch, decoding back to Cartesian states, and constraint
//! diagnostics along the way.

use crate::forces::ForceConfig;
use crate::formulations::{
    bilinear_residual, decode, encode, Dynamics, FormulationKind,
};
use crate::frames::orbital_frame;
use crate::integrator::{Driver, Field, StepStats, Tolerances};
use crate::math::{Mat3, Vec3};
use crate::state::{
    angular_momentum, orthogonality_defect, CartesianState, GravParams, UnitSystem,
};
use crate::Error;

/// A declarative problem definition in source units (for the bundled
/// scenario files: km, km/s, seconds, km³/s²).
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub t0: f64,
    pub tf: f64,
    pub x0: Vec3,
    pub v0: Vec3,
    pub grav: GravParams,
    pub enable_j2: bool,
    pub enable_moon: bool,
    pub moon: Option<crate::forces::MoonParams>,
    /// Output epochs in (t0, tf]; the final epoch tf is always sampled
    /// whether or not it is listed.
    pub output_epochs: Vec<f64>,
}

impl Scenario {
    /// Pure two-body scenario starting at t = 0; handy for tests and
    /// oracles.
    pub fn two_body(
        name: &str,
        gm: f64,
        x0: Vec3,
        v0: Vec3,
        tf: f64,
        output_epochs: Vec<f64>,
    ) -> Scenario {
        Scenario {
            name: name.into(),
            t0: 0.0,
            tf,
            x0,
            v0,
            grav: GravParams { gm, j2: 0.0, re: 1.0 },
            enable_j2: false,
            enable_moon: false,
            moon: None,
            output_epochs,
        }
    }

    pub fn force_config(&self) -> ForceConfig {
        ForceConfig {
            grav: self.grav,
            enable_j2: self.enable_j2,
            enable_moon: self.enable_moon,
            moon: self.moon,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !self.tf.is_finite() || self.tf <= self.t0 {
            return Err(Error::Scenario("tf must be finite and exceed t0".into()));
        }
        if self.grav.gm <= 0.0 {
            return Err(Error::Scenario("gm must be positive".into()));
        }
        if !self.grav.j2.is_finite() {
            return Err(Error::Scenario("j2 must be finite".into()));
        }
        if self.enable_j2 && self.grav.re <= 0.0 {
            return Err(Error::Scenario("re must be positive when j2 is enabled".into()));
        }
        if self.enable_moon && self.moon.is_none() {
            return Err(Error::Scenario("moon parameters required when enable_moon".into()));
        }
        if !(self.x0.is_finite() && self.v0.is_finite()) {
            return Err(Error::Scenario("x0/v0 must be finite".into()));
        }
        let mut prev = self.t0;
        for (i, &e) in self.output_epochs.iter().enumerate() {
            if e <= prev {
                return Err(Error::Scenario(format!(
                    "output_epochs[{i}] must be strictly increasing and after t0"
                )));
            }
            if e > self.tf {
                return Err(Error::Scenario(format!("output_epochs[{i}] exceeds tf")));
            }
            prev = e;
        }
        // bound, non-rectilinear initial state
        orbital_frame(self.x0, self.v0)?;
        UnitSystem::from_state(self.x0, self.v0, self.grav.gm)?;
        Ok(())
    }
}

/// Constraint residuals recorded at an output sample. Energies are in
/// internal units; `norm_defect` is ‖λ‖² − 1 for the 8-dimensional
/// formulations and the relative Σg² vs decoded ‖x×v‖ consistency for the
/// 7-dimensional ones (zero for Cowell).
#[derive(Debug, Clone, Copy, Default)]
pub struct SampleDiagnostics {
    pub bilinear: f64,
    pub norm_defect: f64,
    pub ge_defect: f64,
    pub energy: f64,
    pub gz: f64,
}

#[derive(Debug, Clone)]
pub struct TrajectorySample {
    /// Decoded state in source units.
    pub state: CartesianState,
    /// Independent variable at the sample (θ* or t).
    pub s: f64,
    /// Raw integrated state vector (internal units), in the documented
    /// component order.
    pub raw: Vec<f64>,
    pub diag: SampleDiagnostics,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub kind: FormulationKind,
    pub units: UnitSystem,
    pub samples: Vec<TrajectorySample>,
    pub stats: StepStats,
    /// Max ‖λ‖² − 1 over every accepted step (8-dimensional kinds; for the
    /// others the per-sample defect is the available measure).
    pub max_norm_defect: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &CartesianState {
        &self.samples.last().expect("trajectory has at least the initial sample").state
    }

    pub fn max_bilinear(&self) -> f64 {
        self.samples.iter().map(|s| s.diag.bilinear.abs()).fold(0.0, f64::max)
    }
}

/// Keplerian (+ J2 when enabled) specific energy and the polar component
/// of the angular momentum; both conserved for the J2-only, time-independent
/// configuration and useful drift diagnostics there.
pub fn conserved_quantities(state: &CartesianState, cfg: &ForceConfig) -> (f64, f64) {
    let r = state.pos.norm();
    let mut energy = 0.5 * state.vel.norm_squared() - cfg.grav.gm / r;
    if cfg.enable_j2 {
        let k = cfg.grav.gm * cfg.grav.j2 * cfg.grav.re * cfg.grav.re;
        let zr = state.pos.z / r;
        energy += k / (2.0 * r * r * r) * (3.0 * zr * zr - 1.0);
    }
    (energy, angular_momentum(state.pos, state.vel).z)
}

/// Diagnostics for a single raw integrated state (internal units).
/// Re-evaluates the field once outside the integration work counters.
pub fn sample_diagnostics(
    kind: FormulationKind,
    s: f64,
    y: &[f64],
    m0: &Mat3,
    cfg: &ForceConfig,
) -> Result<(CartesianState, SampleDiagnostics), Error> {
    let cart = decode(kind, s, y, m0, cfg.grav.gm)?;
    let dynamics = Dynamics::new(kind, cfg.grav.gm, *m0, cfg);
    let mut dy = vec![0.0; kind.dim()];
    dynamics.eval(s, y, &mut dy)?;
    let bilinear = bilinear_residual(kind, y, &dy);
    let norm_defect = match kind {
        FormulationKind::Cowell => 0.0,
        FormulationKind::Ideal8Qq | FormulationKind::Ideal8Cs => {
            y[..4].iter().map(|l| l * l).sum::<f64>() - 1.0
        }
        _ => {
            let g: f64 = y[..4].iter().map(|c| c * c).sum();
            (g - angular_momentum(cart.pos, cart.vel).norm()) / g
        }
    };
    let ge_defect = orthogonality_defect(cart.pos, cart.vel, cfg.grav.gm);
    let (energy, gz) = conserved_quantities(&cart, cfg);
    Ok((cart, SampleDiagnostics { bilinear, norm_defect, ge_defect, energy, gz }))
}

/// Diagnostics series for a list of raw integrated states from one
/// propagation.
pub fn run_diagnostics(
    kind: FormulationKind,
    m0: &Mat3,
    cfg: &ForceConfig,
    points: &[(f64, Vec<f64>)],
) -> Result<Vec<SampleDiagnostics>, Error> {
    points
        .iter()
        .map(|(s, y)| sample_diagnostics(kind, *s, y, m0, cfg).map(|(_, d)| d))
        .collect()
}

/// Propagate a scenario under one formulation, sampling at the requested
/// output epochs (plus tf). The first sample is the initial state.
pub fn propagate(
    scn: &Scenario,
    kind: FormulationKind,
    tol: &Tolerances,
) -> Result<Trajectory, Error> {
    scn.validate()?;
    let units = UnitSystem::from_state(scn.x0, scn.v0, scn.grav.gm)?;
    let cfg_int = scn.force_config().to_internal(&units);
    let state0 = CartesianState::new(
        units.time_to_internal(scn.t0),
        units.pos_to_internal(scn.x0),
        units.vel_to_internal(scn.v0),
    );
    let enc = encode(&state0, kind, 1.0)?;
    let dynamics = Dynamics::new(kind, 1.0, enc.m0, &cfg_int);
    let mut driver = Driver::new(&dynamics, enc.s0, &enc.y, *tol)?;

    let tf_int = units.time_to_internal(scn.tf);
    // |t - T| tolerance of the epoch landing, in internal time units
    let tol_t = 64.0 * f64::EPSILON * tf_int.abs().max(1.0);
    let mut epochs: Vec<f64> =
        scn.output_epochs.iter().map(|&t| units.time_to_internal(t)).collect();
    if epochs.last().map_or(true, |&e| (e - tf_int).abs() > tol_t) {
        epochs.push(tf_int);
    }

    let mut samples = Vec::with_capacity(epochs.len() + 1);
    let push_sample = |samples: &mut Vec<TrajectorySample>, s: f64, y: &[f64]| -> Result<(), Error> {
        let (cart_int, diag) = sample_diagnostics(kind, s, y, &enc.m0, &cfg_int)?;
        let state = CartesianState::new(
            units.time_from_internal(cart_int.t),
            units.pos_from_internal(cart_int.pos),
            units.vel_from_internal(cart_int.vel),
        );
        samples.push(TrajectorySample { state, s, raw: y.to_vec(), diag });
        Ok(())
    };
    push_sample(&mut samples, enc.s0, &enc.y)?;

    let track_unit_norm =
        matches!(kind, FormulationKind::Ideal8Qq | FormulationKind::Ideal8Cs);
    let mut max_norm_defect = 0.0f64;
    let mut observer = |_s: f64, y: &[f64]| {
        if track_unit_norm {
            let defect = (y[..4].iter().map(|l| l * l).sum::<f64>() - 1.0).abs();
            max_norm_defect = max_norm_defect.max(defect);
        }
    };

    let t_index = kind.dim() - 1;
    for &te in &epochs {
        if kind.regularized() {
            driver.advance_to_epoch(t_index, te, tol_t, &mut observer)?;
        } else {
            driver.advance_to(te, &mut observer)?;
        }
        push_sample(&mut samples, driver.s, &driver.y)?;
    }

    if !track_unit_norm {
        max_norm_defect =
            samples.iter().map(|s| s.diag.norm_defect.abs()).fold(0.0, f64::max);
    }
    Ok(Trajectory { kind, units, samples, stats: driver.stats, max_norm_defect })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn circular_scenario(periods: f64) -> Scenario {
        // GM = 1 and a = 1, so internal units coincide with source units.
        Scenario::two_body(
            "circular",
            1.0,
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            periods * 2.0 * PI,
            vec![],
        )
    }

    fn eccentric_scenario(e: f64, periods: f64) -> Scenario {
        // periapsis of a = 1, GM = 1: r = 1−e, v = √((1+e)/(1−e))
        let rp = 1.0 - e;
        let vp = ((1.0 + e) / rp).sqrt();
        Scenario::two_body(
            "eccentric",
            1.0,
            Vec3::new(rp, 0.0, 0.0),
            Vec3::new(0.0, vp, 0.0),
            periods * 2.0 * PI,
            vec![],
        )
    }

    #[test]
    fn first_sample_is_initial_state() {
        let scn = circular_scenario(1.0);
        for kind in FormulationKind::ALL {
            let tr = propagate(&scn, kind, &Tolerances::default()).unwrap();
            let s0 = &tr.samples[0].state;
            assert!((s0.pos - scn.x0).norm() < 1e-13, "{kind}");
            assert!((s0.vel - scn.v0).norm() < 1e-13, "{kind}");
            assert!((s0.t - scn.t0).abs() < 1e-13, "{kind}");
        }
    }

    #[test]
    fn circular_period_returns_home() {
        let scn = circular_scenario(1.0);
        for kind in FormulationKind::ALL {
            let tr = propagate(&scn, kind, &Tolerances::default()).unwrap();
            let sf = tr.final_state();
            assert!(
                (sf.pos - scn.x0).norm() < 1e-10,
                "{kind}: came back to {:?}",
                sf.pos
            );
            assert!((sf.vel - scn.v0).norm() < 1e-10, "{kind}");
            assert!((sf.t - scn.tf).abs() < 1e-9, "{kind}: t = {}", sf.t);
        }
    }

    #[test]
    fn eccentric_period_returns_home() {
        let scn = eccentric_scenario(0.7, 1.0);
        for kind in FormulationKind::ALL {
            let tr = propagate(&scn, kind, &Tolerances::default()).unwrap();
            let sf = tr.final_state();
            assert!(
                (sf.pos - scn.x0).norm() < 1e-9,
                "{kind}: periodicity miss {:e}",
                (sf.pos - scn.x0).norm()
            );
        }
    }

    #[test]
    fn output_epochs_are_hit() {
        let mut scn = circular_scenario(2.0);
        scn.output_epochs = vec![1.0, 2.5, 7.0];
        let tr = propagate(&scn, FormulationKind::Ideal7Cs, &Tolerances::default()).unwrap();
        // samples: t0, the three epochs, tf
        assert_eq!(tr.samples.len(), 5);
        let expect = [0.0, 1.0, 2.5, 7.0, scn.tf];
        for (s, e) in tr.samples.iter().zip(expect) {
            assert!((s.state.t - e).abs() < 1e-10, "epoch {e}: got {}", s.state.t);
        }
    }

    #[test]
    fn kepler_energy_constant() {
        let scn = eccentric_scenario(0.5, 3.0);
        let tr = propagate(&scn, FormulationKind::Ideal7Qq, &Tolerances::default()).unwrap();
        let e0 = tr.samples[0].diag.energy;
        for s in &tr.samples {
            assert!((s.diag.energy - e0).abs() < 1e-12 * e0.abs());
        }
    }

    #[test]
    fn deterministic_trajectories() {
        let scn = eccentric_scenario(0.3, 2.0);
        let a = propagate(&scn, FormulationKind::Ideal8Cs, &Tolerances::default()).unwrap();
        let b = propagate(&scn, FormulationKind::Ideal8Cs, &Tolerances::default()).unwrap();
        assert_eq!(a.stats, b.stats);
        for (sa, sb) in a.samples.iter().zip(&b.samples) {
            assert_eq!(sa.raw, sb.raw);
            assert_eq!(sa.state.pos, sb.state.pos);
        }
    }

    #[test]
    fn scenario_validation_errors() {
        let mut scn = circular_scenario(1.0);
        scn.tf = scn.t0;
        assert!(matches!(scn.validate(), Err(Error::Scenario(_))));

        let mut scn = circular_scenario(1.0);
        scn.enable_moon = true;
        assert!(matches!(scn.validate(), Err(Error::Scenario(_))));

        let mut scn = circular_scenario(1.0);
        scn.output_epochs = vec![2.0, 1.0];
        assert!(matches!(scn.validate(), Err(Error::Scenario(_))));

        let mut scn = circular_scenario(1.0);
        scn.v0 = Vec3::new(0.0, 2.0, 0.0); // v² = 4 > 2GM/r: unbound
        assert!(matches!(scn.validate(), Err(Error::NotBound)));
    }

    #[test]
    fn diagnostics_at_t0_are_roundoff() {
        let scn = eccentric_scenario(0.4, 1.0);
        for kind in FormulationKind::ALL {
            let tr = propagate(&scn, kind, &Tolerances::default()).unwrap();
            let d = &tr.samples[0].diag;
            assert!(d.bilinear.abs() < 1e-14, "{kind}");
            assert!(d.norm_defect.abs() < 1e-13, "{kind}");
            assert!(d.ge_defect.abs() < 1e-13, "{kind}");
        }
    }
}
