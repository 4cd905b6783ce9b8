//! Adaptive Dormand–Prince 5(4) integration with steady-state detection.
//!
//! Step control is the proportional-integral scheme from Hairer, Nørsett and
//! Wanner (`beta = 0.04`). States are never clipped: a step producing a
//! component below `-abs_tol` is rejected and retried with half the step.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::{ln, pow, sqrt};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// `None` means unbounded.
    pub max_step: Option<f64>,
    /// `None` picks the step automatically.
    pub initial_step: Option<f64>,
    pub t_end: f64,
    /// Sup-norm of the right-hand side below which a step counts as steady.
    pub steady_state_threshold: f64,
    /// Consecutive steady accepted steps needed to declare a steady state.
    pub steady_state_window: usize,
    /// Stop as soon as a steady state is detected.
    pub stop_at_steady_state: bool,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_step: None,
            initial_step: None,
            t_end: 1.0,
            steady_state_threshold: 1e-10,
            steady_state_window: 5,
            stop_at_steady_state: true,
            max_steps: 1_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn with_t_end(t_end: f64) -> Self {
        IntegratorConfig {
            t_end,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        positive("rel_tol", self.rel_tol)?;
        positive("abs_tol", self.abs_tol)?;
        positive("steady_state_threshold", self.steady_state_threshold)?;
        if let Some(h) = self.max_step {
            positive("max_step", h)?;
        }
        if let Some(h) = self.initial_step {
            positive("initial_step", h)?;
        }
        // t_end = 0 is allowed and returns the initial state unchanged.
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "t_end must be finite and non-negative, got {}",
                self.t_end
            )));
        }
        if self.steady_state_window == 0 || self.max_steps == 0 {
            return Err(Error::InvalidParameter(String::from(
                "steady_state_window and max_steps must be at least 1",
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum TerminalReason {
    ReachedTEnd,
    SteadyState,
    StepFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Accepted step times, strictly increasing from 0.
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Right-hand side at every stored state.
    pub derivatives: Vec<Vec<f64>>,
    /// Scaled local error estimate of the step ending at each state (0 for
    /// the initial state).
    pub local_errors: Vec<f64>,
    pub terminal_reason: TerminalReason,
    pub steady_state: Option<Vec<f64>>,
    /// Set when `terminal_reason` is `StepFailure`.
    pub failure: Option<String>,
    pub abs_tol: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory has at least the initial state")
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least the initial state")
    }

    /// Steady state if one was detected, otherwise the last state.
    pub fn limit_estimate(&self) -> &[f64] {
        self.steady_state.as_deref().unwrap_or_else(|| self.final_state())
    }

    /// Cubic Hermite interpolation between the stored neighbours of `t`.
    pub fn interpolate(&self, t: f64) -> Vec<f64> {
        let k = match self.times.iter().position(|&tk| tk >= t) {
            Some(0) => return self.states[0].clone(),
            Some(k) => k,
            None => return self.final_state().to_vec(),
        };
        (0..self.dimension()).map(|i| self.hermite(k - 1, i, t)).collect()
    }

    fn hermite(&self, k: usize, i: usize, t: f64) -> f64 {
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (y0, y1) = (self.states[k][i], self.states[k + 1][i]);
        let (f0, f1) = (self.derivatives[k][i], self.derivatives[k + 1][i]);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * h * f0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * h * f1
    }
}

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const UNDERFLOW: f64 = 1e-14;
const LARGE_STATE: f64 = 100.0;
const LARGE_STATE_STEP: f64 = 1e-4;
/// Cap on `h * lipschitz`. The real stability boundary is about 3.3; near a
/// fixed point the controller otherwise parks there and the deviation stops
/// decaying at the tolerance level, which defeats steady-state detection.
const STABLE_STEP: f64 = 2.0;

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn check_x0(x0: &[f64]) -> Result<()> {
    for (i, &v) in x0.iter().enumerate() {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::NegativeConcentration {
                species: format!("state[{i}]"),
                value: v,
            });
        }
    }
    Ok(())
}

struct Stepper<F> {
    rhs: F,
    rel_tol: f64,
    abs_tol: f64,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
    /// Local Lipschitz estimate from the last two stages of the last trial.
    lipschitz: f64,
}

impl<F: FnMut(&[f64], &mut [f64])> Stepper<F> {
    fn new(rhs: F, n: usize, cfg: &IntegratorConfig) -> Self {
        Stepper {
            rhs,
            rel_tol: cfg.rel_tol,
            abs_tol: cfg.abs_tol,
            k: core::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            y_new: vec![0.0; n],
            lipschitz: 0.0,
        }
    }

    fn scaled_rms(&self, v: &[f64], y: &[f64], y2: &[f64]) -> f64 {
        if v.is_empty() {
            return 0.0;
        }
        let sum: f64 = v
            .iter()
            .zip(y.iter().zip(y2))
            .map(|(e, (a, b))| {
                let sc = self.abs_tol + self.rel_tol * a.abs().max(b.abs());
                (e / sc) * (e / sc)
            })
            .sum();
        sqrt(sum / v.len() as f64)
    }

    /// Hairer's starting step heuristic for an order-5 method. Expects
    /// `k[0] = f(y)`.
    fn initial_step(&mut self, y: &[f64]) -> f64 {
        let d0 = self.scaled_rms(y, y, y);
        let d1 = self.scaled_rms(&self.k[0], y, y);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        for i in 0..y.len() {
            self.tmp[i] = y[i] + h0 * self.k[0][i];
        }
        (self.rhs)(&self.tmp, &mut self.k[1]);
        for i in 0..y.len() {
            self.y_new[i] = self.k[1][i] - self.k[0][i];
        }
        let d2 = self.scaled_rms(&self.y_new, y, y) / h0;
        let m = d1.max(d2);
        let h1 = if m <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            pow(0.01 / m, 0.2)
        };
        (100.0 * h0).min(h1)
    }

    /// One trial step from `y` (with `k[0] = f(y)`) into `y_new`, returning
    /// the scaled error norm. On return `k[6] = f(y_new)`.
    fn attempt(&mut self, y: &[f64], h: f64) -> f64 {
        let n = y.len();
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        let tmp = &mut self.tmp;
        for i in 0..n {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        (self.rhs)(tmp, k2);
        for i in 0..n {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        (self.rhs)(tmp, k3);
        for i in 0..n {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        (self.rhs)(tmp, k4);
        for i in 0..n {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        (self.rhs)(tmp, k5);
        for i in 0..n {
            tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        (self.rhs)(tmp, k6);
        for i in 0..n {
            self.y_new[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        (self.rhs)(&self.y_new, k7);
        // stages 6 and 7 share c = 1, so their difference quotient
        // estimates the dominant eigenvalue magnitude
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            num += (k7[i] - k6[i]) * (k7[i] - k6[i]);
            den += (self.y_new[i] - tmp[i]) * (self.y_new[i] - tmp[i]);
        }
        self.lipschitz = if den > 0.0 { sqrt(num / den) } else { 0.0 };
        for i in 0..n {
            tmp[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        self.scaled_rms(&self.tmp, y, &self.y_new)
    }
}

/// Integrate `dx/dt = rhs(x)` from `x0 >= 0` over `[0, cfg.t_end]`.
///
/// Integration stops early when the sup-norm of the right-hand side stays
/// below `cfg.steady_state_threshold` for `cfg.steady_state_window`
/// consecutive accepted steps (and `cfg.stop_at_steady_state` is set). A
/// step size underflow or exhausting `max_steps` ends the run with
/// [`TerminalReason::StepFailure`] and the partial trajectory; invalid
/// configurations and initial states are errors.
pub fn integrate<F>(rhs: F, x0: &[f64], cfg: &IntegratorConfig) -> Result<Trajectory>
where
    F: FnMut(&[f64], &mut [f64]),
{
    cfg.validate()?;
    check_x0(x0)?;
    let n = x0.len();
    let mut st = Stepper::new(rhs, n, cfg);
    (st.rhs)(x0, &mut st.k[0]);

    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![x0.to_vec()],
        derivatives: vec![st.k[0].clone()],
        local_errors: vec![0.0],
        terminal_reason: TerminalReason::ReachedTEnd,
        steady_state: None,
        failure: None,
        abs_tol: cfg.abs_tol,
    };
    if cfg.t_end == 0.0 {
        return Ok(traj);
    }

    let max_step = cfg.max_step.unwrap_or(cfg.t_end).min(cfg.t_end);
    let mut h = match cfg.initial_step {
        Some(h) => h,
        None => {
            let mut h = st.initial_step(x0);
            let f0 = sup_norm(&st.k[0]);
            if sup_norm(x0) > LARGE_STATE && f0 > 0.0 {
                h = h.min(LARGE_STATE_STEP / f0);
            }
            h
        }
    };
    h = h.min(max_step);

    let mut t = 0.0_f64;
    let mut y = x0.to_vec();
    let mut steady_count = 0usize;
    let mut fac_old = 1e-4_f64;
    let mut last_rejected = false;
    let expo1 = 0.2 - BETA * 0.75;
    let mut steps = 0usize;

    loop {
        if steps >= cfg.max_steps {
            traj.terminal_reason = TerminalReason::StepFailure;
            traj.failure = Some(format!("max_steps = {} exhausted at t = {t}", cfg.max_steps));
            return Ok(traj);
        }
        steps += 1;

        let remaining = cfg.t_end - t;
        let last = h >= remaining * (1.0 - 1e-12);
        if last {
            h = remaining;
        }
        if !(h > 0.0) || h < UNDERFLOW * t || t + h == t {
            traj.terminal_reason = TerminalReason::StepFailure;
            traj.failure = Some(format!("step size {h:e} underflowed at t = {t}"));
            return Ok(traj);
        }

        let err = st.attempt(&y, h);
        let fac11 = pow(err, expo1);

        let negative = st.y_new.iter().any(|&v| v < -cfg.abs_tol);
        if !err.is_finite() || negative {
            h *= 0.5;
            last_rejected = true;
            continue;
        }

        if err <= 1.0 {
            let fac = (fac11 / pow(fac_old, BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            fac_old = err.max(1e-4);
            if last_rejected {
                h_new = h_new.min(h);
            }
            if st.lipschitz > 0.0 {
                h_new = h_new.min(STABLE_STEP / st.lipschitz);
            }
            last_rejected = false;

            t = if last { cfg.t_end } else { t + h };
            core::mem::swap(&mut y, &mut st.y_new);
            st.k.swap(0, 6);
            traj.times.push(t);
            traj.states.push(y.clone());
            traj.derivatives.push(st.k[0].clone());
            traj.local_errors.push(err);

            if sup_norm(&st.k[0]) <= cfg.steady_state_threshold {
                steady_count += 1;
                if steady_count >= cfg.steady_state_window && traj.steady_state.is_none() {
                    traj.steady_state = Some(y.clone());
                    if cfg.stop_at_steady_state {
                        traj.terminal_reason = TerminalReason::SteadyState;
                        return Ok(traj);
                    }
                }
            } else {
                steady_count = 0;
            }

            if last {
                traj.terminal_reason = TerminalReason::ReachedTEnd;
                return Ok(traj);
            }
            h = h_new.min(max_step);
        } else {
            h /= (1.0 / FAC_MIN).min(fac11 / SAFETY);
            last_rejected = true;
        }
    }
}

/// Classical fixed-step RK4 for a time-dependent right-hand side, used for
/// systems whose right-hand side is discontinuous (adaptive control is
/// meaningless there). The final step is shortened to land on `t_end`.
pub fn integrate_fixed_rk4<F>(mut rhs: F, x0: &[f64], dt: f64, t_end: f64) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    if !(dt > 0.0 && dt.is_finite()) || !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "fixed-step RK4 needs dt > 0 and t_end >= 0, got dt={dt}, t_end={t_end}"
        )));
    }
    let n = x0.len();
    let mut k = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut tmp = vec![0.0; n];
    let mut y = x0.to_vec();
    rhs(0.0, &y, &mut k[0]);
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![y.clone()],
        derivatives: vec![k[0].clone()],
        local_errors: vec![0.0],
        terminal_reason: TerminalReason::ReachedTEnd,
        steady_state: None,
        failure: None,
        abs_tol: 0.0,
    };
    let steps = (t_end / dt).ceil() as usize;
    for s in 0..steps {
        let t = s as f64 * dt;
        let h = dt.min(t_end - t);
        if h <= 0.0 {
            break;
        }
        rhs(t, &y, &mut k[0]);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k[0][i];
        }
        rhs(t + 0.5 * h, &tmp, &mut k[1]);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k[1][i];
        }
        rhs(t + 0.5 * h, &tmp, &mut k[2]);
        for i in 0..n {
            tmp[i] = y[i] + h * k[2][i];
        }
        rhs(t + h, &tmp, &mut k[3]);
        for i in 0..n {
            y[i] += h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
        }
        let t_new = if s + 1 == steps { t_end } else { t + h };
        rhs(t_new, &y, &mut k[0]);
        traj.times.push(t_new);
        traj.states.push(y.clone());
        traj.derivatives.push(k[0].clone());
        traj.local_errors.push(0.0);
    }
    Ok(traj)
}

/// First time after which every component stays at or below `box_bound`.
///
/// The crossing inside the last step that leaves the box behind is located
/// by bisection on the cubic Hermite interpolant. `Some(0.0)` if the
/// trajectory starts inside the box, `None` if it never settles into it.
pub fn hitting_time(traj: &Trajectory, box_bound: f64) -> Option<f64> {
    let outside = |s: &[f64]| s.iter().any(|&v| v > box_bound);
    let last_out = match traj.states.iter().rposition(|s| outside(s)) {
        None => return Some(0.0),
        Some(k) if k + 1 == traj.len() => return None,
        Some(k) => k,
    };
    let excess = |t: f64| {
        (0..traj.dimension())
            .map(|i| traj.hermite(last_out, i, t))
            .fold(f64::NEG_INFINITY, f64::max)
            - box_bound
    };
    let (mut lo, mut hi) = (traj.times[last_out], traj.times[last_out + 1]);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(hi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RateFit {
    pub lambda: f64,
    pub r_squared: f64,
    /// Number of samples in the regression.
    pub samples: usize,
}

pub const MIN_FIT_SAMPLES: usize = 10;

/// Least-squares fit of `log ||x(t) - limit||_2 ~ a - lambda t`.
///
/// Only the prefix of samples whose distance exceeds `10 * abs_tol` is
/// usable; of those the last `tail_fraction` enter the regression.
pub fn exponential_rate_fit(traj: &Trajectory, limit: &[f64], tail_fraction: f64) -> Result<RateFit> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "tail_fraction must lie in (0, 1], got {tail_fraction}"
        )));
    }
    if limit.len() != traj.dimension() {
        return Err(Error::DimensionMismatch {
            what: "rate-fit limit",
            expected: traj.dimension(),
            got: limit.len(),
        });
    }
    let floor = 10.0 * traj.abs_tol;
    let mut samples: Vec<(f64, f64)> = Vec::new();
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let d = sqrt(s.iter().zip(limit).map(|(a, b)| (a - b) * (a - b)).sum::<f64>());
        if !(d > floor) {
            break;
        }
        samples.push((*t, ln(d)));
    }
    let usable = samples.len();
    let take = ((usable as f64) * tail_fraction).ceil() as usize;
    let tail = &samples[usable - take.min(usable)..];
    if tail.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientSamples {
            usable: tail.len(),
            required: MIN_FIT_SAMPLES,
        });
    }

    let m = tail.len() as f64;
    let mean_t = tail.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = tail.iter().map(|p| p.1).sum::<f64>() / m;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for &(t, y) in tail {
        stt += (t - mean_t) * (t - mean_t);
        sty += (t - mean_t) * (y - mean_y);
        syy += (y - mean_y) * (y - mean_y);
    }
    if stt == 0.0 {
        return Err(Error::InsufficientSamples {
            usable: 1,
            required: MIN_FIT_SAMPLES,
        });
    }
    let slope = sty / stt;
    let r_squared = if syy == 0.0 { 1.0 } else { (sty * sty) / (stt * syy) };
    Ok(RateFit {
        lambda: -slope,
        r_squared,
        samples: tail.len(),
    })
}
