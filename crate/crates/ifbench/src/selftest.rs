//! Embedded invariant suite behind the `selftest` subcommand: constraint
//! identities, round-trips, and the conic oracle, each reported with its
//! residual magnitude.
//!
//! Every check accepts a sabotage flag that corrupts one of its inputs;
//! the negative-control test uses it to prove the checks can fail.

use idealframe::formulations::{
    bilinear_residual, decode, encode, ideal7_qq_field, ideal8_qq_field, FormulationKind,
};
use idealframe::frames::{rotation_from_params, scale_params, unscale_params, EulerParams};
use idealframe::integrator::{integrate_adaptive, Field, Tolerances};
use idealframe::math::{Mat3, Vec3};
use idealframe::state::{
    angular_momentum, eccentricity_vector, CartesianState, UnitSystem,
};
use idealframe::Error;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub residual: f64,
    pub threshold: f64,
}

impl CheckResult {
    pub fn pass(&self) -> bool {
        self.residual.is_finite() && self.residual.abs() <= self.threshold
    }
}

fn sample_states() -> Vec<(Vec3, Vec3)> {
    vec![
        (Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.1)),
        (Vec3::new(0.8, -0.4, 0.3), Vec3::new(0.2, 0.9, -0.5)),
        (Vec3::new(-1.2, 0.5, 0.9), Vec3::new(-0.3, -0.6, 0.2)),
        (Vec3::new(0.3, 1.1, -0.7), Vec3::new(0.7, -0.1, 0.4)),
    ]
}

fn check_orthogonality(sabotage: bool) -> CheckResult {
    let mut worst = 0.0f64;
    for (pos, vel) in sample_states() {
        let g = angular_momentum(pos, vel);
        let mut e = eccentricity_vector(pos, vel, 1.0).unwrap();
        if sabotage {
            e.x += 1e-6;
        }
        let scale = (g.norm() * e.norm()).max(1e-30);
        worst = worst.max((g.dot(e) / scale).abs());
    }
    CheckResult { name: "angular-momentum/eccentricity orthogonality", residual: worst, threshold: 1e-12 }
}

fn check_unit_normalization(sabotage: bool) -> CheckResult {
    let gm = 398600.4418;
    let units = UnitSystem::from_state(
        Vec3::new(7000.0, -100.0, 3000.0),
        Vec3::new(0.5, 7.0, -0.8),
        gm,
    )
    .unwrap();
    let gm_eval = if sabotage { gm * (1.0 + 1e-6) } else { gm };
    CheckResult {
        name: "internal-unit normalization (GM -> 1)",
        residual: (units.gm_to_internal(gm_eval) - 1.0).abs(),
        threshold: 1e-14,
    }
}

fn check_rotation_orthogonality(sabotage: bool) -> CheckResult {
    let mut worst = 0.0f64;
    for raw in [[0.1, -0.3, 0.5, 0.8], [0.9, 0.1, -0.2, 0.3], [0.0, 0.0, 0.6, 0.8]] {
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut lam = raw.map(|x| x / norm);
        if sabotage {
            lam[0] += 1e-6;
        }
        let n = rotation_from_params(&EulerParams(lam));
        let p = n.transpose() * n;
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((p.m[i][j] - expect).abs());
            }
        }
        worst = worst.max((n.det() - 1.0).abs());
    }
    CheckResult { name: "attitude matrix orthogonality", residual: worst, threshold: 1e-13 }
}

fn check_scale_roundtrip(sabotage: bool) -> CheckResult {
    let lam = EulerParams([0.36, -0.48, 0.6, 0.5281098524600448]);
    let g = 2.7;
    let scaled = scale_params(&lam, g).unwrap();
    let (mut back, g_back) = unscale_params(&scaled).unwrap();
    if sabotage {
        back.0[2] += 1e-6;
    }
    let mut worst = (g_back - g).abs() / g;
    for (a, b) in back.0.iter().zip(lam.0.iter()) {
        worst = worst.max((a - b).abs());
    }
    CheckResult { name: "scaled-parameter round-trip", residual: worst, threshold: 1e-14 }
}

fn check_cs_roundtrip(sabotage: bool) -> CheckResult {
    use idealframe::formulations::{cs_from_radial, radial_from_cs};
    let (g, p, r, rdot, theta) = (1.3, 0.9, 0.7, -0.4, 2.1);
    let (c, s) = cs_from_radial(g, p, r, rdot, theta);
    let theta_eval = if sabotage { theta + 1e-6 } else { theta };
    let (g_over_r, rdot_back) = radial_from_cs(c, s, theta_eval, g, p);
    let res = ((g_over_r - g / r) / (g / r)).abs().max((rdot_back - rdot).abs());
    CheckResult { name: "ideal-element radial round-trip", residual: res, threshold: 1e-13 }
}

fn check_encode_decode(sabotage: bool) -> CheckResult {
    let state = CartesianState::new(
        1.5,
        Vec3::new(0.7, -0.4, 0.2),
        Vec3::new(0.3, 0.9, -0.6),
    );
    let mut worst = 0.0f64;
    for kind in FormulationKind::ALL {
        let mut enc = encode(&state, kind, 1.0).unwrap();
        if sabotage {
            enc.y[0] += 1e-6;
        }
        let back = decode(kind, enc.s0, &enc.y, &enc.m0, 1.0).unwrap();
        worst = worst.max((back.pos - state.pos).norm() / state.pos.norm());
        worst = worst.max((back.vel - state.vel).norm() / state.vel.norm());
    }
    CheckResult { name: "encode/decode round-trip (all kinds)", residual: worst, threshold: 1e-12 }
}

fn check_bilinear(sabotage: bool) -> CheckResult {
    let force = |_t: f64, _x: Vec3, _v: Vec3| Vec3::new(2e-3, -1e-3, 3e-3);
    let y7 = [0.6, -0.2, 0.4, 1.1, 0.8, -0.3, 0.0];
    let mut d7 = [0.0; 7];
    ideal7_qq_field(0.9, &y7, 1.0, &force, &Mat3::IDENTITY, &mut d7).unwrap();
    if sabotage {
        d7[0] += 1e-6;
    }
    let res7 = bilinear_residual(FormulationKind::Ideal7Qq, &y7, &d7).abs();

    let y8 = [0.1, -0.3, 0.5, 0.8, 1.2, 0.8, -0.3, 0.0];
    let mut d8 = [0.0; 8];
    ideal8_qq_field(0.9, &y8, 1.0, &force, &Mat3::IDENTITY, &mut d8).unwrap();
    let res8 = bilinear_residual(FormulationKind::Ideal8Qq, &y8, &d8).abs();

    CheckResult { name: "bilinear constraint of parameter rates", residual: res7.max(res8), threshold: 1e-14 }
}

fn check_product_rule(sabotage: bool) -> CheckResult {
    let force = |_t: f64, _x: Vec3, _v: Vec3| Vec3::new(-1e-3, 2e-3, 1e-3);
    let lam = [0.2, -0.4, 0.4, 0.8]; // unit
    let g: f64 = 1.7;
    let sqrt_g = g.sqrt();
    let gp = lam.map(|l| sqrt_g * l);
    let (q, qp, theta) = (0.9, 0.2, 1.3);

    let y7 = [gp[0], gp[1], gp[2], gp[3], q, qp, 0.0];
    let mut d7 = [0.0; 7];
    ideal7_qq_field(theta, &y7, 1.0, &force, &Mat3::IDENTITY, &mut d7).unwrap();
    let y8 = [lam[0], lam[1], lam[2], lam[3], g, q, qp, 0.0];
    let mut d8 = [0.0; 8];
    ideal8_qq_field(theta, &y8, 1.0, &force, &Mat3::IDENTITY, &mut d8).unwrap();

    let dg_norm: f64 = 2.0 * gp.iter().zip(&d7[..4]).map(|(gi, di)| gi * di).sum::<f64>();
    let mut worst = (d8[4] - dg_norm).abs();
    for i in 0..4 {
        let mut dlam = d7[i] / sqrt_g - gp[i] * d8[4] / (2.0 * g * sqrt_g);
        if sabotage && i == 1 {
            dlam += 1e-6;
        }
        worst = worst.max((d8[i] - dlam).abs());
    }
    CheckResult { name: "7D/8D product-rule equivalence", residual: worst, threshold: 1e-12 }
}

fn check_conic_oracle(sabotage: bool) -> CheckResult {
    // p = 1, e = 0.5 in internal units: q over one revolution of θ*
    // returns to 1.5 with Q = 0.
    let state = CartesianState::new(0.0, Vec3::new(2.0 / 3.0, 0.0, 0.0), Vec3::new(0.0, 1.5, 0.0));
    let enc = encode(&state, FormulationKind::Ideal7Qq, 1.0).unwrap();
    let cfg = idealframe::forces::ForceConfig::kepler(1.0);
    let dynamics = idealframe::formulations::Dynamics::new(
        FormulationKind::Ideal7Qq,
        1.0,
        enc.m0,
        &cfg,
    );
    let tol = Tolerances::with_rtol_atol(1e-12, 1e-12);
    let theta_end = if sabotage {
        2.0 * std::f64::consts::PI + 1e-5
    } else {
        2.0 * std::f64::consts::PI
    };
    let (y, _) =
        integrate_adaptive(&dynamics, &enc.y, enc.s0, theta_end, &tol, &mut |_, _| {}).unwrap();
    let res = (y[4] - 1.5).abs().max(y[5].abs());
    CheckResult { name: "conic oracle (q over one revolution)", residual: res, threshold: 1e-9 }
}

struct ExpDecay;
impl Field for ExpDecay {
    fn dim(&self) -> usize {
        1
    }
    fn eval(&self, _s: f64, y: &[f64], dy: &mut [f64]) -> Result<(), Error> {
        dy[0] = -y[0];
        Ok(())
    }
}

fn check_integrator_exp(sabotage: bool) -> CheckResult {
    let tol = Tolerances::with_rtol_atol(1e-12, 1e-12);
    let (y, _) = integrate_adaptive(&ExpDecay, &[1.0], 0.0, 1.0, &tol, &mut |_, _| {}).unwrap();
    let exact = if sabotage { (-1.0f64).exp() * (1.0 + 1e-6) } else { (-1.0f64).exp() };
    CheckResult { name: "adaptive integrator vs exp(-1)", residual: (y[0] - exact).abs(), threshold: 1e-10 }
}

/// Run every check; `sabotage` names one check to corrupt (used by the
/// negative-control test).
pub fn run_selftest(sabotage: Option<&str>) -> Vec<CheckResult> {
    type CheckFn = fn(bool) -> CheckResult;
    let checks: [(&str, CheckFn); 10] = [
        ("orthogonality", check_orthogonality),
        ("units", check_unit_normalization),
        ("rotation", check_rotation_orthogonality),
        ("scale", check_scale_roundtrip),
        ("cs", check_cs_roundtrip),
        ("encode-decode", check_encode_decode),
        ("bilinear", check_bilinear),
        ("product-rule", check_product_rule),
        ("conic", check_conic_oracle),
        ("integrator", check_integrator_exp),
    ];
    checks
        .iter()
        .map(|(key, f)| f(sabotage == Some(key)))
        .collect()
}

/// Render the pass/fail table; returns true when everything passed.
pub fn print_selftest(results: &[CheckResult], out: &mut impl std::io::Write) -> std::io::Result<bool> {
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut ok = true;
    for r in results {
        ok &= r.pass();
        writeln!(
            out,
            "{:width$}  residual {:10.3e}  threshold {:8.1e}  {}",
            r.name,
            r.residual,
            r.threshold,
            if r.pass() { "PASS" } else { "FAIL" },
        )?;
    }
    let n_pass = results.iter().filter(|r| r.pass()).count();
    writeln!(out, "overall: {} ({n_pass}/{} checks passed)", if ok { "PASS" } else { "FAIL" }, results.len())?;
    Ok(ok)
}
