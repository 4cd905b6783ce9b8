//! Empirical checks that a compiled reaction network behaves like the
//! neural network it came from.
//!
//! - [`verify_implementation`]: every node's limiting concentration matches
//!   the forward-pass activation (hidden layers included).
//! - [`verify_convergence_from_infinity`]: runs from initial states of very
//!   different magnitude enter a box in comparable time and end at the same
//!   state.
//! - [`verify_exponential_reliability`]: the distance to the limit decays
//!   exponentially.
//! - [`demo_non_feedforward_counterexample`]: a forced scalar system whose
//!   forcing converges while the state does not.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::compiler::{compile_network, CompilationResult};
use crate::integrator::{
    exponential_rate_fit, hitting_time, integrate, integrate_fixed_rk4, IntegratorConfig, TerminalReason, Trajectory,
};
use crate::math::exp;
use crate::neural_net::HardwiredNetwork;
use crate::{Error, Result};

/// Default tolerance for long-horizon (`t_final = 50`) equivalence checks.
pub const TIGHT_TOLERANCE: f64 = 1e-6;
/// Default tolerance for the short-horizon (`t_final = 5`) reproduction.
pub const SHORT_HORIZON_TOLERANCE: f64 = 1e-3;
/// Minimum `R^2` for an exponential rate fit to count.
pub const MIN_R_SQUARED: f64 = 0.99;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NodeComparison {
    pub layer: usize,
    pub node: usize,
    pub ode_value: f64,
    pub nn_value: f64,
    pub abs_diff: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EquivalenceReport {
    /// Every hidden and output node, layer-major.
    pub per_node: Vec<NodeComparison>,
    pub max_abs_diff: f64,
    /// Time actually reached (earlier than requested on a steady state).
    pub t_final: f64,
    /// Sup-norm of the initial state.
    pub initial_condition_scale: f64,
    pub terminal_reason: TerminalReason,
    pub tolerance: f64,
    pub passed: bool,
    pub diagnostics: Option<String>,
}

impl EquivalenceReport {
    /// Comparisons of one layer (1-based).
    pub fn layer(&self, layer: usize) -> impl Iterator<Item = &NodeComparison> {
        self.per_node.iter().filter(move |c| c.layer == layer)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HittingTime {
    pub scale: f64,
    /// `None` when the run never settled into the box.
    pub time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReliabilityReport {
    pub lambda_fit: Option<f64>,
    pub r_squared: Option<f64>,
    pub hitting_times: Vec<HittingTime>,
    /// Ratio of the largest to the smallest hitting time.
    pub hitting_time_spread: Option<f64>,
    /// Largest componentwise difference between terminal states of the runs.
    pub steady_state_agreement: Option<f64>,
    pub terminal_states: Vec<Vec<f64>>,
    pub passed: bool,
    pub diagnostics: Option<String>,
}

fn compile_with_input(net: &HardwiredNetwork, d: &[f64]) -> Result<CompilationResult> {
    let mut compiled = compile_network(net)?;
    compiled.set_input(d)?;
    Ok(compiled)
}

fn run(compiled: &CompilationResult, x0: &[f64], cfg: &IntegratorConfig) -> Result<Trajectory> {
    if x0.len() != compiled.dimension() {
        return Err(Error::DimensionMismatch {
            what: "initial state",
            expected: compiled.dimension(),
            got: x0.len(),
        });
    }
    let system = &compiled.system;
    integrate(|x, out| system.rhs_into(x, out), x0, cfg)
}

/// Uniform draw from `[0, scale]^n`.
pub fn random_initial_state(n: usize, scale: f64, rng: &mut crate::Rng) -> Vec<f64> {
    (0..n).map(|_| scale * rng.random_range(0.0..=1.0)).collect()
}

/// Compare the compiled system's state at `t_final` (or at a detected steady
/// state) with the forward pass, node by node, using default integrator
/// settings.
pub fn verify_implementation(
    net: &HardwiredNetwork,
    d: &[f64],
    x0: &[f64],
    t_final: f64,
    tol: f64,
) -> Result<EquivalenceReport> {
    verify_implementation_with(net, d, x0, &IntegratorConfig::with_t_end(t_final), tol)
}

pub fn verify_implementation_with(
    net: &HardwiredNetwork,
    d: &[f64],
    x0: &[f64],
    cfg: &IntegratorConfig,
    tol: f64,
) -> Result<EquivalenceReport> {
    let compiled = compile_with_input(net, d)?;
    let traj = run(&compiled, x0, cfg)?;
    let forward = net.forward(d)?;
    let terminal = traj.limit_estimate();

    let sizes = net.architecture().layer_sizes();
    let mut per_node = Vec::with_capacity(terminal.len());
    let mut max_abs_diff: f64 = 0.0;
    for l in 1..sizes.len() {
        let offset = net.architecture().state_offset(l);
        for i in 0..sizes[l] {
            let ode_value = terminal[offset + i];
            let nn_value = forward.activations[l][i];
            let abs_diff = (ode_value - nn_value).abs();
            max_abs_diff = max_abs_diff.max(abs_diff);
            per_node.push(NodeComparison {
                layer: l,
                node: i,
                ode_value,
                nn_value,
                abs_diff,
            });
        }
    }
    let failed_run = traj.terminal_reason == TerminalReason::StepFailure;
    Ok(EquivalenceReport {
        per_node,
        max_abs_diff,
        t_final: traj.final_time(),
        initial_condition_scale: x0.iter().fold(0.0, |m, v| m.max(*v)),
        terminal_reason: traj.terminal_reason,
        tolerance: tol,
        passed: !failed_run && max_abs_diff <= tol,
        diagnostics: traj.failure.clone(),
    })
}

/// How initial states are drawn for each scale.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum InitialDirection {
    /// One uniform draw `u` from `[0, 1]^n` with this seed, shared by all
    /// scales: `x0 = s u`.
    Uniform { seed: u64 },
    /// `x0 = s u` for a fixed `u`.
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FromInfinityOptions {
    pub scales: Vec<f64>,
    pub box_bound: f64,
    pub direction: InitialDirection,
    pub integrator: IntegratorConfig,
    /// Fail when the hitting-time spread exceeds this.
    pub max_spread: Option<f64>,
    /// Fail when terminal states differ by more than this.
    pub max_disagreement: Option<f64>,
}

impl FromInfinityOptions {
    pub fn new(scales: Vec<f64>, box_bound: f64, t_final: f64, seed: u64) -> Self {
        FromInfinityOptions {
            scales,
            box_bound,
            direction: InitialDirection::Uniform { seed },
            integrator: IntegratorConfig::with_t_end(t_final),
            max_spread: None,
            max_disagreement: None,
        }
    }
}

/// Run from `x0 = s u` for every scale `s` and report box hitting times,
/// their spread and the disagreement between terminal states.
pub fn verify_convergence_from_infinity(
    net: &HardwiredNetwork,
    d: &[f64],
    opts: &FromInfinityOptions,
) -> Result<ReliabilityReport> {
    if opts.scales.is_empty() || opts.scales.iter().any(|s| !(*s >= 1.0 && s.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "scales must be finite and >= 1, got {:?}",
            opts.scales
        )));
    }
    if !(opts.box_bound > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "box bound must be positive, got {}",
            opts.box_bound
        )));
    }
    let compiled = compile_with_input(net, d)?;
    let n = compiled.dimension();
    let direction = match &opts.direction {
        InitialDirection::Uniform { seed } => random_initial_state(n, 1.0, &mut crate::seeded_rng(*seed)),
        InitialDirection::Fixed(u) => u.clone(),
    };

    let mut report = ReliabilityReport::default();
    let mut problems: Vec<String> = Vec::new();
    for &scale in &opts.scales {
        let x0: Vec<f64> = direction.iter().map(|u| scale * u).collect();
        let traj = run(&compiled, &x0, &opts.integrator)?;
        if let Some(why) = &traj.failure {
            problems.push(format!("scale {scale}: {why}"));
        }
        let time = hitting_time(&traj, opts.box_bound);
        if time.is_none() {
            problems.push(format!("scale {scale}: never entered [0, {}]^{n}", opts.box_bound));
        }
        report.hitting_times.push(HittingTime { scale, time });
        report.terminal_states.push(traj.limit_estimate().to_vec());
    }

    let times: Vec<f64> = report.hitting_times.iter().filter_map(|h| h.time).collect();
    if times.len() == report.hitting_times.len() {
        let max = times.iter().fold(f64::NEG_INFINITY, |m, t| m.max(*t));
        let min = times.iter().fold(f64::INFINITY, |m, t| m.min(*t));
        report.hitting_time_spread = Some(if max == 0.0 { 1.0 } else { max / min });
    }
    let first = &report.terminal_states[0];
    let agreement = report
        .terminal_states
        .iter()
        .flat_map(|s| s.iter().zip(first).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);
    report.steady_state_agreement = Some(agreement);

    if let (Some(limit), Some(spread)) = (opts.max_spread, report.hitting_time_spread) {
        if spread > limit {
            problems.push(format!("hitting-time spread {spread} exceeds {limit}"));
        }
    }
    if let Some(limit) = opts.max_disagreement {
        if agreement > limit {
            problems.push(format!("terminal states differ by {agreement}, more than {limit}"));
        }
    }
    report.passed = problems.is_empty();
    if !problems.is_empty() {
        report.diagnostics = Some(problems.join("; "));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityOptions {
    pub tail_fraction: f64,
    pub integrator: IntegratorConfig,
}

impl Default for ReliabilityOptions {
    /// Tighter than the integrator defaults so the tail of the distance
    /// curve is not dominated by local error, and a bounded step so the
    /// tail has enough samples.
    fn default() -> Self {
        ReliabilityOptions {
            tail_fraction: 0.5,
            integrator: IntegratorConfig {
                rel_tol: 1e-12,
                abs_tol: 1e-13,
                max_step: Some(0.05),
                t_end: 200.0,
                ..IntegratorConfig::default()
            },
        }
    }
}

/// Integrate from `x0` and fit an exponential rate to the distance from the
/// forward-pass activations.
pub fn verify_exponential_reliability(
    net: &HardwiredNetwork,
    d: &[f64],
    x0: &[f64],
    opts: &ReliabilityOptions,
) -> Result<ReliabilityReport> {
    let compiled = compile_with_input(net, d)?;
    let limit: Vec<f64> = net.forward(d)?.activations[1..].iter().flatten().copied().collect();
    let displacement = crate::math::sqrt(x0.iter().zip(&limit).map(|(a, b)| (a - b) * (a - b)).sum::<f64>());
    if !(displacement >= 1e-3) {
        return Err(Error::InvalidParameter(format!(
            "initial state is only {displacement:e} from the limit; displace it by at least 1e-3"
        )));
    }
    let traj = run(&compiled, x0, &opts.integrator)?;
    let fit = exponential_rate_fit(&traj, &limit, opts.tail_fraction)?;
    let passed = fit.lambda > 0.0 && fit.r_squared >= MIN_R_SQUARED;
    Ok(ReliabilityReport {
        lambda_fit: Some(fit.lambda),
        r_squared: Some(fit.r_squared),
        terminal_states: vec![traj.limit_estimate().to_vec()],
        passed,
        diagnostics: if passed {
            None
        } else {
            Some(format!("lambda = {}, R^2 = {}", fit.lambda, fit.r_squared))
        },
        ..ReliabilityReport::default()
    })
}

/// Forcing for the counterexample system.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Forcing {
    /// `y(t) = 1 + e^{-t}`: converges to 1 but stays above it.
    Decaying,
    /// `y(t) = 1`.
    Constant,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CounterexampleReport {
    pub forcing: Forcing,
    pub x0: f64,
    pub t_end: f64,
    pub final_value: f64,
    /// Least-squares slope of `x` against `t`.
    pub slope: f64,
    /// Whether the state ends near the fixed point 0 of the limiting system.
    pub converged: bool,
    /// Non-convergence under decaying forcing is the point of the demo.
    pub expected_failure: bool,
}

/// Step size for the discontinuous counterexample.
pub const COUNTEREXAMPLE_STEP: f64 = 1e-3;

/// `dx/dt = 1` if `y(t) > 1`, else `-x`. The limiting forcing `y = 1` has
/// the unique fixed point 0, yet under `y(t) = 1 + e^{-t}` the state grows
/// as `x0 + t`.
pub fn demo_non_feedforward_counterexample(x0: f64, t_end: f64, forcing: Forcing) -> Result<CounterexampleReport> {
    // y(t) - 1, kept apart from the 1 so the switch does not flip once
    // 1 + e^{-t} rounds to 1
    let excess = move |t: f64| match forcing {
        Forcing::Decaying => exp(-t),
        Forcing::Constant => 0.0,
    };
    let traj = integrate_fixed_rk4(
        |t, x, out| out[0] = if excess(t) > 0.0 { 1.0 } else { -x[0] },
        &[x0],
        COUNTEREXAMPLE_STEP,
        t_end,
    )?;
    let n = traj.len() as f64;
    let mean_t = traj.times.iter().sum::<f64>() / n;
    let mean_x = traj.states.iter().map(|s| s[0]).sum::<f64>() / n;
    let (mut stt, mut stx) = (0.0, 0.0);
    for (t, s) in traj.times.iter().zip(&traj.states) {
        stt += (t - mean_t) * (t - mean_t);
        stx += (t - mean_t) * (s[0] - mean_x);
    }
    let final_value = traj.final_state()[0];
    Ok(CounterexampleReport {
        forcing,
        x0,
        t_end,
        final_value,
        slope: if stt > 0.0 { stx / stt } else { 0.0 },
        converged: final_value.abs() <= 1e-3 * x0.abs().max(1.0),
        expected_failure: forcing == Forcing::Decaying,
    })
}
