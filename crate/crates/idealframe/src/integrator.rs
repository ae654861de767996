//! Adaptive Dormand–Prince 8(5,3) integration of any formulation field,
//! a fixed-step RK4 oracle, and exact landing on requested epochs.
//!
//! The tableau and the combined 5th/3rd-order error estimate follow
//! Hairer's DOP853. Stage 1 of each step reuses the derivative evaluated
//! at the previous accepted point, so an attempted step costs 11 field
//! evaluations and an accepted one costs 12.

use crate::Error;

/// Right-hand side of a first-order ODE system ẏ = f(s, y).
pub trait Field {
    fn dim(&self) -> usize;
    fn eval(&self, s: f64, y: &[f64], dy: &mut [f64]) -> Result<(), Error>;

    /// Largest step the field considers well-resolved starting from
    /// (s, y) with derivative `k1`. The driver caps trial steps at this
    /// value; the default is no cap.
    ///
    /// The orbital fields use it to bound the in-plane phase advance per
    /// step: the physical-time (or angle) component is slaved to the
    /// phase, and its error-norm allowance grows with the elapsed value,
    /// so the controller alone under-resolves it on long runs.
    fn max_step(&self, _s: f64, _y: &[f64], _k1: &[f64]) -> f64 {
        f64::INFINITY
    }
}

/// Integration control parameters.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step guess, in units of the independent variable.
    pub h0: f64,
    pub h_max: f64,
    pub max_steps: u64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rtol: 1e-12,
            atol: 1e-12,
            h0: 1e-2,
            h_max: f64::INFINITY,
            max_steps: 10_000_000,
        }
    }
}

impl Tolerances {
    pub fn with_rtol_atol(rtol: f64, atol: f64) -> Self {
        Tolerances { rtol, atol, ..Tolerances::default() }
    }
}

/// Work counters. `field_evals` is the deterministic work measure used by
/// the benchmark harness.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: u64,
    pub rejected: u64,
    pub field_evals: u64,
}

// --- DOP853 tableau ---------------------------------------------------------

const C: [f64; 12] = [
    0.0,
    0.526001519587677318785587544488e-1,
    0.789002279381515978178381316732e-1,
    0.118350341907227396726757197510,
    0.281649658092772603273242802490,
    1.0 / 3.0,
    0.25,
    0.307692307692307692307692307692,
    0.651282051282051282051282051282,
    0.6,
    0.857142857142857142857142857142,
    1.0,
];

const A2: [f64; 1] = [5.26001519587677318785587544488e-2];
const A3: [f64; 2] = [
    1.97250569845378994544595329183e-2,
    5.91751709536136983633785987549e-2,
];
const A4: [f64; 3] = [2.95875854768068491816892993775e-2, 0.0, 8.87627564304205475450678981324e-2];
const A5: [f64; 4] = [
    2.41365134159266685502369798665e-1,
    0.0,
    -8.84549479328286085344864962717e-1,
    9.24834003261792003115737966543e-1,
];
const A6: [f64; 5] = [
    3.7037037037037037037037037037e-2,
    0.0,
    0.0,
    1.70828608729473871279604482173e-1,
    1.25467687566822425016691814123e-1,
];
const A7: [f64; 6] = [
    3.7109375e-2,
    0.0,
    0.0,
    1.70252211019544039314978060272e-1,
    6.02165389804559606850219397283e-2,
    -1.7578125e-2,
];
const A8: [f64; 7] = [
    3.70920001185047927108779319836e-2,
    0.0,
    0.0,
    1.70383925712239993810214054705e-1,
    1.07262030446373284651809199168e-1,
    -1.53194377486244017527936158236e-2,
    8.27378916381402288758473766002e-3,
];
const A9: [f64; 8] = [
    6.24110958716075717114429577812e-1,
    0.0,
    0.0,
    -3.36089262944694129406857109825,
    -8.68219346841726006818189891453e-1,
    2.75920996994467083049415600797e1,
    2.01540675504778934086186788979e1,
    -4.34898841810699588477366255144e1,
];
const A10: [f64; 9] = [
    4.77662536438264365890433908527e-1,
    0.0,
    0.0,
    -2.48811461997166764192642586468,
    -5.90290826836842996371446475743e-1,
    2.12300514481811942347288949897e1,
    1.52792336328824235832596922938e1,
    -3.32882109689848629194453265587e1,
    -2.03312017085086261358222928593e-2,
];
const A11: [f64; 10] = [
    -9.3714243008598732571704021658e-1,
    0.0,
    0.0,
    5.18637242884406370830023853209,
    1.09143734899672957818500254654,
    -8.14978701074692612513997267357,
    -1.85200656599969598641566180701e1,
    2.27394870993505042818970056734e1,
    2.49360555267965238987089396762,
    -3.0467644718982195003823669022,
];
const A12: [f64; 11] = [
    2.27331014751653820792359768449,
    0.0,
    0.0,
    -1.05344954667372501984066689879e1,
    -2.00087205822486249909675718444,
    -1.79589318631187989172765950534e1,
    2.79488845294199600508499808837e1,
    -2.85899827713502369474065508674,
    -8.87285693353062954433549289258,
    1.23605671757943030647266201528e1,
    6.43392746015763530355970484046e-1,
];

const A_ROWS: [&[f64]; 11] = [
    &A2, &A3, &A4, &A5, &A6, &A7, &A8, &A9, &A10, &A11, &A12,
];

const B: [f64; 12] = [
    5.42937341165687622380535766363e-2,
    0.0,
    0.0,
    0.0,
    0.0,
    4.45031289275240888144113950566,
    1.89151789931450038304281599044,
    -5.8012039600105847814672114227,
    3.1116436695781989440891606237e-1,
    -1.52160949662516078556178806805e-1,
    2.01365400804030348374776537501e-1,
    4.47106157277725905176885569043e-2,
];

/// 3rd-order comparison weights; applied to stages 1, 9 and 12.
const BHH: [f64; 3] = [
    0.244094488188976377952755905512,
    0.733846688281611857341361741547,
    0.220588235294117647058823529412e-1,
];

/// 5th-order error weights.
const E5: [f64; 12] = [
    0.1312004499419488073250102996e-1,
    0.0,
    0.0,
    0.0,
    0.0,
    -0.1225156446376204440720569753e1,
    -0.4957589496572501915214079952,
    0.1664377182454986536961530415e1,
    -0.3503288487499736816886487290,
    0.3341791187130174790297318841,
    0.8192320648511571246570742613e-1,
    -0.2235530786388629525884427845e-1,
];

// step-size controller, Hairer's defaults with a mild PI term
const SAFE: f64 = 0.9;
const BETA: f64 = 0.04;
const ALPHA: f64 = 1.0 / 8.0 - BETA * 0.2;
const FAC_SHRINK_MAX: f64 = 3.0; // at most h/3 after a rejection
const FAC_GROW_MAX: f64 = 1.0 / 6.0; // at most 6·h after an acceptance

const LANDING_MAX_ITERS: usize = 100;

/// One integration in progress: the stepper state plus its workspace.
/// A driver is cheap to create and owns no heap besides the stage storage;
/// independent drivers may run concurrently.
pub struct Driver<'a, F: Field> {
    field: &'a F,
    pub tol: Tolerances,
    pub s: f64,
    pub y: Vec<f64>,
    pub stats: StepStats,
    h: f64,
    k: Vec<Vec<f64>>, // k[0] is the derivative at (s, y); k[1..12] stage slots
    y_stage: Vec<f64>,
    y_new: Vec<f64>,
    b_sum: Vec<f64>,
    k_new: Vec<f64>,
    fac_old: f64,
    last_rejected: bool,
}

impl<'a, F: Field> Driver<'a, F> {
    pub fn new(field: &'a F, s0: f64, y0: &[f64], tol: Tolerances) -> Result<Self, Error> {
        let dim = field.dim();
        assert_eq!(y0.len(), dim, "state vector length must match field dimension");
        let mut k0 = vec![0.0; dim];
        field.eval(s0, y0, &mut k0)?;
        let mut k = vec![vec![0.0; dim]; 12];
        k[0] = k0;
        Ok(Driver {
            field,
            tol,
            s: s0,
            y: y0.to_vec(),
            stats: StepStats { field_evals: 1, ..StepStats::default() },
            h: tol.h0.abs().min(tol.h_max),
            k,
            y_stage: vec![0.0; dim],
            y_new: vec![0.0; dim],
            b_sum: vec![0.0; dim],
            k_new: vec![0.0; dim],
            fac_old: 1e-4,
            last_rejected: false,
        })
    }

    fn check_budget(&self, h: f64) -> Result<(), Error> {
        if self.stats.accepted + self.stats.rejected >= self.tol.max_steps {
            return Err(Error::MaxSteps { s: self.s, max_steps: self.tol.max_steps });
        }
        if 0.1 * h.abs() <= f64::EPSILON * self.s.abs() {
            return Err(Error::StepUnderflow { s: self.s });
        }
        Ok(())
    }

    /// Compute stages 2..12 and the candidate solution for step length h.
    /// Returns the scaled error estimate (accept when ≤ 1).
    fn try_step(&mut self, h: f64) -> Result<f64, Error> {
        let dim = self.y.len();
        for (row_idx, row) in A_ROWS.iter().enumerate() {
            let stage = row_idx + 1; // destination slot in k
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, a) in row.iter().enumerate() {
                    acc += a * self.k[j][i];
                }
                self.y_stage[i] = self.y[i] + h * acc;
            }
            let s_stage = self.s + C[stage] * h;
            // split borrow: stages already written stay immutable
            let (done, rest) = self.k.split_at_mut(stage);
            let _ = done;
            self.stats.field_evals += 1;
            self.field.eval(s_stage, &self.y_stage, &mut rest[0])?;
        }

        // candidate y_new = y + h·Σ bᵢ kᵢ
        for i in 0..dim {
            let mut acc = 0.0;
            for (j, b) in B.iter().enumerate() {
                acc += b * self.k[j][i];
            }
            self.b_sum[i] = acc;
            self.y_new[i] = self.y[i] + h * acc;
        }

        // combined 8(5,3) error estimate
        let mut err5_sq = 0.0;
        let mut err3_sq = 0.0;
        for i in 0..dim {
            let sk = self.tol.atol + self.tol.rtol * self.y[i].abs().max(self.y_new[i].abs());
            let mut e5 = 0.0;
            for (j, e) in E5.iter().enumerate() {
                e5 += e * self.k[j][i];
            }
            let e3 = self.b_sum[i] - BHH[0] * self.k[0][i] - BHH[1] * self.k[8][i]
                - BHH[2] * self.k[11][i];
            err5_sq += (e5 / sk) * (e5 / sk);
            err3_sq += (e3 / sk) * (e3 / sk);
        }
        let mut deno = err5_sq + 0.01 * err3_sq;
        if deno <= 0.0 {
            deno = 1.0;
        }
        Ok(h.abs() * err5_sq * (1.0 / (deno * dim as f64)).sqrt())
    }

    /// Derivative at the candidate point, needed as stage 1 of the next
    /// step. A singular result here rejects the step like an error test
    /// failure would.
    fn eval_new(&mut self, s_new: f64) -> Result<(), Error> {
        self.stats.field_evals += 1;
        self.field.eval(s_new, &self.y_new, &mut self.k_new)
    }

    fn commit(&mut self, s_new: f64) {
        std::mem::swap(&mut self.y, &mut self.y_new);
        std::mem::swap(&mut self.k[0], &mut self.k_new);
        self.s = s_new;
        self.stats.accepted += 1;
    }

    fn controller_accept(&mut self, err: f64, h: f64) {
        let fac11 = err.powf(ALPHA);
        let fac = (fac11 * self.fac_old.powf(-BETA) / SAFE).clamp(FAC_GROW_MAX, FAC_SHRINK_MAX);
        let mut h_new = h / fac;
        self.fac_old = err.max(1e-4);
        if self.last_rejected {
            h_new = h_new.min(h);
            self.last_rejected = false;
        }
        self.h = h_new.min(self.tol.h_max);
    }

    fn controller_reject(&mut self, err: f64, h: f64) {
        let fac11 = err.powf(ALPHA);
        self.h = h / FAC_SHRINK_MAX.min(fac11 / SAFE);
        self.last_rejected = true;
        self.stats.rejected += 1;
    }

    fn reject_singular(&mut self, h: f64) {
        self.h = 0.5 * h;
        self.last_rejected = true;
        self.stats.rejected += 1;
    }

    /// Advance to an exact value of the independent variable, clamping the
    /// final step.
    pub fn advance_to(
        &mut self,
        s_end: f64,
        observer: &mut impl FnMut(f64, &[f64]),
    ) -> Result<(), Error> {
        if s_end < self.s {
            return Err(Error::EpochInPast { target: s_end, current: self.s });
        }
        while self.s < s_end {
            let cap = self.field.max_step(self.s, &self.y, &self.k[0]);
            let mut h = self.h.min(self.tol.h_max).min(cap);
            self.check_budget(h)?;
            let mut last = false;
            if self.s + 1.01 * h >= s_end {
                h = s_end - self.s;
                last = true;
            }
            if h <= 0.0 {
                break;
            }
            match self.try_step(h) {
                Err(e) if e.is_recoverable() => {
                    self.reject_singular(h);
                    continue;
                }
                Err(e) => return Err(e),
                Ok(err) if err <= 1.0 => {
                    match self.eval_new(self.s + h) {
                        Err(e) if e.is_recoverable() => {
                            self.reject_singular(h);
                            continue;
                        }
                        Err(e) => return Err(e),
                        Ok(()) => {}
                    }
                    self.commit(if last { s_end } else { self.s + h });
                    self.controller_accept(err, h);
                    observer(self.s, &self.y);
                }
                Ok(err) => self.controller_reject(err, h),
            }
        }
        Ok(())
    }

    /// Advance until the state component `t_index` (physical time, strictly
    /// increasing along the flow) reaches `t_target` within `tol_t`,
    /// shrinking the final step by secant iteration with bisection
    /// fallback.
    pub fn advance_to_epoch(
        &mut self,
        t_index: usize,
        t_target: f64,
        tol_t: f64,
        observer: &mut impl FnMut(f64, &[f64]),
    ) -> Result<(), Error> {
        let t_cur = self.y[t_index];
        if t_cur > t_target + tol_t {
            return Err(Error::EpochInPast { target: t_target, current: t_cur });
        }
        if (t_cur - t_target).abs() <= tol_t {
            return Ok(());
        }
        loop {
            let cap = self.field.max_step(self.s, &self.y, &self.k[0]);
            let h = self.h.min(self.tol.h_max).min(cap);
            self.check_budget(h)?;
            match self.try_step(h) {
                Err(e) if e.is_recoverable() => {
                    self.reject_singular(h);
                    continue;
                }
                Err(e) => return Err(e),
                Ok(err) if err > 1.0 => {
                    self.controller_reject(err, h);
                    continue;
                }
                Ok(err) => {
                    let t_cur = self.y[t_index];
                    let t_new = self.y_new[t_index];
                    if t_new < t_cur {
                        return Err(Error::NonMonotoneTime);
                    }
                    if t_new <= t_target + tol_t {
                        // whole step fits (and may already land inside the
                        // tolerance band)
                        match self.eval_new(self.s + h) {
                            Err(e) if e.is_recoverable() => {
                                self.reject_singular(h);
                                continue;
                            }
                            Err(e) => return Err(e),
                            Ok(()) => {}
                        }
                        self.commit(self.s + h);
                        self.controller_accept(err, h);
                        observer(self.s, &self.y);
                        if (t_new - t_target).abs() <= tol_t {
                            return Ok(());
                        }
                        continue;
                    }
                    // the epoch lies strictly inside this step
                    let (mut lo, mut f_lo) = (0.0f64, t_cur - t_target);
                    let (mut hi, mut f_hi) = (h, t_new - t_target);
                    for _ in 0..LANDING_MAX_ITERS {
                        let mut hm = if f_hi.is_finite() && f_lo.is_finite() && f_hi != f_lo {
                            hi - f_hi * (hi - lo) / (f_hi - f_lo)
                        } else {
                            f64::NAN
                        };
                        if !(hm > lo && hm < hi) || !hm.is_finite() {
                            hm = 0.5 * (lo + hi);
                        }
                        match self.try_step(hm) {
                            Err(e) if e.is_recoverable() => {
                                hi = hm;
                                f_hi = f64::NAN;
                                continue;
                            }
                            Err(e) => return Err(e),
                            Ok(err_m) => {
                                let f_m = self.y_new[t_index] - t_target;
                                if f_m.abs() <= tol_t && err_m <= 1.0 {
                                    self.eval_new(self.s + hm)?;
                                    self.commit(self.s + hm);
                                    // keep the controller state of the last
                                    // full-length step; the landing step is
                                    // artificially short
                                    observer(self.s, &self.y);
                                    return Ok(());
                                }
                                if f_m < 0.0 {
                                    lo = hm;
                                    f_lo = f_m;
                                } else {
                                    hi = hm;
                                    f_hi = f_m;
                                }
                            }
                        }
                    }
                    return Err(Error::EpochLanding("iteration cap exceeded"));
                }
            }
        }
    }
}

/// Integrate ẏ = f(s, y) from s0 to s_end with adaptive stepping. The
/// observer sees every accepted step.
pub fn integrate_adaptive<F: Field>(
    field: &F,
    y0: &[f64],
    s0: f64,
    s_end: f64,
    tol: &Tolerances,
    observer: &mut impl FnMut(f64, &[f64]),
) -> Result<(Vec<f64>, StepStats), Error> {
    let mut driver = Driver::new(field, s0, y0, *tol)?;
    driver.advance_to(s_end, observer)?;
    Ok((driver.y, driver.stats))
}

/// Step until the physical-time component reaches `t_target` within
/// `tol_t`. Returns the landed state and the value of the independent
/// variable there.
pub fn land_on_epoch<F: Field>(
    field: &F,
    y0: &[f64],
    s0: f64,
    t_index: usize,
    t_target: f64,
    tol: &Tolerances,
    tol_t: f64,
) -> Result<(Vec<f64>, f64, StepStats), Error> {
    let mut driver = Driver::new(field, s0, y0, *tol)?;
    driver.advance_to_epoch(t_index, t_target, tol_t, &mut |_, _| {})?;
    Ok((driver.y, driver.s, driver.stats))
}

/// Classical fixed-step RK4; the low-order convergence oracle used in
/// tests.
pub fn integrate_fixed_rk4<F: Field>(
    field: &F,
    y0: &[f64],
    s0: f64,
    s_end: f64,
    n: usize,
) -> Result<Vec<f64>, Error> {
    assert!(n >= 1);
    let dim = field.dim();
    let h = (s_end - s0) / n as f64;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];
    for step in 0..n {
        let s = s0 + step as f64 * h;
        field.eval(s, &y, &mut k1)?;
        for i in 0..dim {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        field.eval(s + 0.5 * h, &tmp, &mut k2)?;
        for i in 0..dim {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        field.eval(s + 0.5 * h, &tmp, &mut k3)?;
        for i in 0..dim {
            tmp[i] = y[i] + h * k3[i];
        }
        field.eval(s + h, &tmp, &mut k4)?;
        for i in 0..dim {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    Ok(y)
}
