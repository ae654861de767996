//! Algebraic consistency between the formulations: the regularized fields
//! must be the d/dθ* = (r²/G)·d/dt images of the time-domain ones, the
//! 8-dimensional rates must follow from the 7-dimensional ones by the
//! product rule on gᵢ = √G·λᵢ, and every parameter-rate system must
//! satisfy the bilinear constraint identically.

use idealframe::formulations::*;
use idealframe::math::{Mat3, Vec3};
use idealframe::state::CartesianState;
use idealframe::Vec3 as V;

/// Small deterministic PRNG so the identity checks sweep many states
/// without a rand dependency.
struct XorShift(u64);

impl XorShift {
    fn next_f64(&mut self) -> f64 {
        // xorshift64*, mapped to [0, 1)
        let mut x = self.0;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.0 = x;
        (x.wrapping_mul(0x2545F4914F6CDD1D) >> 11) as f64 / (1u64 << 53) as f64
    }

    fn in_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

fn close(a: f64, b: f64, tol: f64, what: &str) {
    let scale = a.abs().max(b.abs()).max(1.0);
    assert!(
        (a - b).abs() <= tol * scale,
        "{what}: {a} vs {b} (scaled diff {:e})",
        (a - b).abs() / scale
    );
}

#[test]
fn regularized_qq_is_chain_rule_image_of_time_domain() {
    let mut rng = XorShift(0x9E3779B97F4A7C15);
    let force = |_t: f64, _x: Vec3, _v: Vec3| Vec3::new(1.3e-3, -0.7e-3, 2.1e-3);
    for _ in 0..200 {
        let gp: [f64; 4] = std::array::from_fn(|_| rng.in_range(-1.2, 1.2));
        let g: f64 = gp.iter().map(|x| x * x).sum();
        if g < 0.05 {
            continue;
        }
        let r = rng.in_range(0.2, 3.0);
        let rdot = rng.in_range(-0.8, 0.8);
        let theta = rng.in_range(-6.0, 6.0);
        let t = rng.in_range(0.0, 10.0);

        let y_time = [gp[0], gp[1], gp[2], gp[3], r, rdot, theta];
        let mut d_time = [0.0; 7];
        ideal7_qq_time_field(t, &y_time, 1.0, &force, &Mat3::IDENTITY, &mut d_time).unwrap();

        let y_reg = [gp[0], gp[1], gp[2], gp[3], 1.0 / r, -rdot / g, t];
        let mut d_reg = [0.0; 7];
        ideal7_qq_field(theta, &y_reg, 1.0, &force, &Mat3::IDENTITY, &mut d_reg).unwrap();

        let jac = r * r / g; // dt/dθ*
        for i in 0..4 {
            close(d_reg[i], jac * d_time[i], 1e-13, "dg chain rule");
        }
        // q = 1/r: dq/dθ* = (r²/G)·(−ṙ/r²) = −ṙ/G
        close(d_reg[4], -rdot / g, 1e-13, "dq chain rule");
        // Q = −ṙ/G: dQ/dt = −r̈/G + ṙ·Ġ/G², with Ġ = 2·Σ g·ġ
        let g_dot: f64 = 2.0 * gp.iter().zip(&d_time[..4]).map(|(gi, dgi)| gi * dgi).sum::<f64>();
        let q_rate_time = -d_time[5] / g + rdot * g_dot / (g * g);
        close(d_reg[5], jac * q_rate_time, 1e-12, "dQ chain rule");
        close(d_reg[6], jac, 1e-14, "dt/dθ*");
        // and the angle rate itself
        close(d_time[6], g / (r * r), 1e-14, "dθ*/dt");
    }
}

#[test]
fn regularized_cs_is_chain_rule_image_of_time_domain() {
    let mut rng = XorShift(0x5851F42D4C957F2D);
    let force = |_t: f64, x: Vec3, _v: Vec3| Vec3::new(2e-3 * x.y, -1e-3 * x.z, 5e-4);
    let mut checked = 0;
    while checked < 200 {
        let gp: [f64; 4] = std::array::from_fn(|_| rng.in_range(-1.2, 1.2));
        let g: f64 = gp.iter().map(|x| x * x).sum();
        let c_star = rng.in_range(-0.5, 0.5);
        let s_star = rng.in_range(-0.5, 0.5);
        let theta = rng.in_range(-6.0, 6.0);
        let t = rng.in_range(0.0, 10.0);
        if g < 0.05 {
            continue;
        }
        let g_over_r = c_star * theta.cos() + s_star * theta.sin() + 1.0 / g;
        if g_over_r < 0.05 {
            continue;
        }
        checked += 1;

        let y = [gp[0], gp[1], gp[2], gp[3], c_star, s_star, theta];
        let mut d_time = [0.0; 7];
        ideal7_cs_time_field(t, &y, 1.0, &force, &Mat3::IDENTITY, &mut d_time).unwrap();

        let y_reg = [gp[0], gp[1], gp[2], gp[3], c_star, s_star, t];
        let mut d_reg = [0.0; 7];
        ideal7_cs_field(theta, &y_reg, 1.0, &force, &Mat3::IDENTITY, &mut d_reg).unwrap();

        let r = g / g_over_r;
        let jac = r * r / g;
        for i in 0..4 {
            close(d_reg[i], jac * d_time[i], 1e-13, "dg chain rule (cs)");
        }
        close(d_reg[4], jac * d_time[4], 1e-12, "dC* chain rule");
        close(d_reg[5], jac * d_time[5], 1e-12, "dS* chain rule");
        close(d_reg[6], jac, 1e-14, "dt/dθ* (cs)");
    }
}

#[test]
fn eight_dim_rates_follow_from_seven_dim_by_product_rule() {
    let mut rng = XorShift(0xA24BAED4963EE407);
    let force = |_t: f64, _x: Vec3, _v: Vec3| Vec3::new(-1.1e-3, 0.6e-3, 0.9e-3);
    for _ in 0..200 {
        let raw: [f64; 4] = std::array::from_fn(|_| rng.in_range(-1.0, 1.0));
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 0.1 {
            continue;
        }
        let lam = raw.map(|x| x / norm);
        let g = rng.in_range(0.3, 3.0);
        let sqrt_g = g.sqrt();
        let gp = lam.map(|l| sqrt_g * l);
        let q = rng.in_range(0.3, 3.0);
        let qp = rng.in_range(-0.8, 0.8);
        let theta = rng.in_range(-6.0, 6.0);

        let y7 = [gp[0], gp[1], gp[2], gp[3], q, qp, 0.0];
        let mut d7 = [0.0; 7];
        ideal7_qq_field(theta, &y7, 1.0, &force, &Mat3::IDENTITY, &mut d7).unwrap();

        let y8 = [lam[0], lam[1], lam[2], lam[3], g, q, qp, 0.0];
        let mut d8 = [0.0; 8];
        ideal8_qq_field(theta, &y8, 1.0, &force, &Mat3::IDENTITY, &mut d8).unwrap();

        // dG/dθ* computed by the 8D field must equal d(Σg²)/dθ* from the 7D
        // field — identically, to round-off.
        let dg_norm: f64 = 2.0 * gp.iter().zip(&d7[..4]).map(|(gi, di)| gi * di).sum::<f64>();
        close(d8[4], dg_norm, 1e-13, "dG vs d(Σg²)");

        // product rule: dλᵢ = dgᵢ/√G − gᵢ·dG/(2G^{3/2})
        for i in 0..4 {
            let dlam = d7[i] / sqrt_g - gp[i] * d8[4] / (2.0 * g * sqrt_g);
            close(d8[i], dlam, 1e-13, "dλ product rule");
        }

        // and the radial subsystem is shared verbatim
        close(d8[5], d7[4], 1e-14, "dq");
        close(d8[6], d7[5], 1e-14, "dQ");
        close(d8[7], d7[6], 1e-14, "dt");
    }
}

#[test]
fn bilinear_residual_vanishes_for_all_param_kinds() {
    let mut rng = XorShift(0x41C64E6D3039);
    let force = |_t: f64, x: Vec3, _v: Vec3| Vec3::new(3e-3 * x.z, 1e-3, -2e-3 * x.x);
    let m0 = Mat3::from_columns(
        Vec3::new(0.0, 1.0, 0.0),
        Vec3::new(0.0, 0.0, 1.0),
        Vec3::new(1.0, 0.0, 0.0),
    );
    let mut checked = 0;
    while checked < 300 {
        let p: [f64; 4] = std::array::from_fn(|_| rng.in_range(-1.0, 1.0));
        let norm_sq: f64 = p.iter().map(|x| x * x).sum();
        if norm_sq < 0.05 {
            continue;
        }
        let theta = rng.in_range(-6.0, 6.0);
        let q = rng.in_range(0.3, 3.0);
        let qp = rng.in_range(-0.8, 0.8);
        checked += 1;

        let y7 = [p[0], p[1], p[2], p[3], q, qp, 1.0];
        let mut d7 = [0.0; 7];
        ideal7_qq_field(theta, &y7, 1.0, &force, &m0, &mut d7).unwrap();
        let res7 = bilinear_residual(FormulationKind::Ideal7Qq, &y7, &d7);
        assert!(res7.abs() < 1e-15, "7D bilinear residual {res7}");

        let unit = p.map(|x| x / norm_sq.sqrt());
        let y8 = [unit[0], unit[1], unit[2], unit[3], norm_sq, q, qp, 1.0];
        let mut d8 = [0.0; 8];
        ideal8_qq_field(theta, &y8, 1.0, &force, &m0, &mut d8).unwrap();
        let res8 = bilinear_residual(FormulationKind::Ideal8Qq, &y8, &d8);
        assert!(res8.abs() < 1e-15, "8D bilinear residual {res8}");

        // the unit-parameter system also preserves the norm exactly
        let norm_rate: f64 = unit.iter().zip(&d8[..4]).map(|(l, d)| l * d).sum();
        assert!(norm_rate.abs() < 1e-15, "Σλ·dλ = {norm_rate}");
    }
}

#[test]
fn unperturbed_fields_are_exactly_frozen() {
    let none = |_t: f64, _x: Vec3, _v: Vec3| Vec3::ZERO;
    let mut rng = XorShift(0xDEADBEEFCAFE);
    for _ in 0..100 {
        let gp: [f64; 4] = std::array::from_fn(|_| rng.in_range(-1.0, 1.0));
        if gp.iter().map(|x| x * x).sum::<f64>() < 0.05 {
            continue;
        }
        let y = [gp[0], gp[1], gp[2], gp[3], rng.in_range(0.3, 2.0), rng.in_range(-0.5, 0.5), 0.0];
        let mut dy = [0.0; 7];
        ideal7_qq_field(rng.in_range(-3.0, 3.0), &y, 1.0, &none, &Mat3::IDENTITY, &mut dy)
            .unwrap();
        // dg must be exactly zero bit-for-bit, not merely small
        assert_eq!(&dy[..4], &[0.0, 0.0, 0.0, 0.0]);
    }
}

#[test]
fn decode_encode_roundtrip_random_bound_states() {
    let mut rng = XorShift(0x123456789ABCDEF);
    let mut checked = 0;
    while checked < 50 {
        let pos = V::new(rng.in_range(-1.5, 1.5), rng.in_range(-1.5, 1.5), rng.in_range(-1.5, 1.5));
        let vel = V::new(rng.in_range(-0.9, 0.9), rng.in_range(-0.9, 0.9), rng.in_range(-0.9, 0.9));
        let r = pos.norm();
        if r < 0.2 || pos.cross(vel).norm() < 0.05 {
            continue;
        }
        if 2.0 / r - vel.norm_squared() <= 0.05 {
            continue; // keep it comfortably elliptic
        }
        checked += 1;
        let state = CartesianState::new(rng.in_range(0.0, 5.0), pos, vel);
        for kind in FormulationKind::ALL {
            let enc = encode(&state, kind, 1.0).unwrap();
            let back = decode(kind, enc.s0, &enc.y, &enc.m0, 1.0).unwrap();
            assert!(
                (back.pos - state.pos).norm() <= 1e-13 * r,
                "{kind}: pos roundtrip off by {:e}",
                (back.pos - state.pos).norm()
            );
            assert!(
                (back.vel - state.vel).norm() <= 1e-13 * vel.norm().max(1.0),
                "{kind}: vel roundtrip"
            );
            assert!((back.t - state.t).abs() <= 1e-13 * state.t.abs().max(1.0));
        }
    }
}
