//! Krotov optimal control of single-qubit gates.
//!
//! One pass propagates the current pulse forward, sends the co-state
//! `χ(t_f) = (O - G(t_f)) / 2N` backward, then sweeps forward again and
//! updates the control point by point from the freshly propagated
//! `G(t_k)`:
//!
//! ```text
//! ε_new(t_k) = clip(ε_old(t_k) + λ · 2 Re Tr[χ(t_k)† ∂Λ/∂ε G_new(t_k)])
//! ```
//!
//! [`optimize`] repeats passes behind a monotonicity safeguard that rejects
//! any pass raising the gate error and shrinks `λ` instead.

mod guess;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::bath::ExpTermList;
use crate::dynamics::{
    control_derivative, propagate, propagate_adjoint, propagate_costates, Bounds, ControlPulse,
    ForwardStepper, Mat4, Trajectory, TrajectoryRecorder, DEFAULT_BLOW_UP,
};
use crate::error::{Error, Result};

pub use guess::{initial_guess, rotation_number, GuessPolicy};

/// Dimension of the propagator in the column-vector representation.
pub const SUPEROPERATOR_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    #[serde(alias = "z_gate")]
    Z,
    #[serde(alias = "identity_gate")]
    Identity,
}

impl GateKind {
    /// Parity of `n` in the closed-system pulse `nπ/t_f`.
    pub fn phase_parity(self) -> i64 {
        match self {
            GateKind::Z => 1,
            GateKind::Identity => 0,
        }
    }

    pub fn target(self) -> GateTarget {
        GateTarget::new(self)
    }
}

/// Target superoperator: `diag(1, -1, -1, 1)` for Z, the identity otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateTarget {
    kind: GateKind,
    matrix: Mat4,
}

impl GateTarget {
    pub fn new(kind: GateKind) -> Self {
        let one = C64::new(1.0, 0.0);
        let matrix = match kind {
            GateKind::Z => Mat4::from_diagonal(&nalgebra::Vector4::new(one, -one, -one, one)),
            GateKind::Identity => Mat4::identity(),
        };
        Self { kind, matrix }
    }

    pub fn kind(&self) -> GateKind {
        self.kind
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.matrix
    }
}

/// `(1/2N) Tr[(O - G)†(O - G)]` with `N = 4`.
pub fn gate_error(g_tf: &Mat4, target: &GateTarget) -> f64 {
    let diff = target.matrix - g_tf;
    diff.norm_squared() / (2.0 * SUPEROPERATOR_DIM as f64)
}

/// `2 Re Tr[χ† D G]` with `D = ∂Λ/∂ε = diag(0, -i, +i, 0)`.
pub fn control_gradient(chi_t: &Mat4, g_t: &Mat4) -> f64 {
    // D is diagonal, so only the two coherence rows contribute.
    let mut acc = C64::new(0.0, 0.0);
    for (row, d) in [(1usize, C64::new(0.0, -1.0)), (2usize, C64::new(0.0, 1.0))] {
        for col in 0..4 {
            acc += chi_t[(row, col)].conj() * d * g_t[(row, col)];
        }
    }
    2.0 * acc.re
}

/// Reference implementation of [`control_gradient`] with dense products.
pub fn control_gradient_dense(chi_t: &Mat4, g_t: &Mat4) -> f64 {
    2.0 * (chi_t.adjoint() * control_derivative() * g_t).trace().re
}

/// How the update sweep differentiates `Λ` with respect to the control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    /// Only the explicit `ε` dependence of `Λ`; `F` is treated as frozen.
    Explicit,
    /// Adds the response of the memory functions through the co-states `μ_j`.
    #[default]
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KrotovConfig {
    /// Update gain. `None` uses `1/t_f`, which halves a pure phase error per pass.
    pub lambda: Option<f64>,
    pub max_iterations: usize,
    pub error_threshold: f64,
    /// Factor applied to `λ` when a pass is rejected.
    pub lambda_backoff: f64,
    /// `λ` may not drop below `lambda_floor_ratio × λ_initial`.
    pub lambda_floor_ratio: f64,
    pub stall_window: usize,
    pub stall_tolerance: f64,
    pub gradient: GradientMode,
}

impl Default for KrotovConfig {
    fn default() -> Self {
        Self {
            lambda: None,
            max_iterations: 5000,
            error_threshold: 1e-12,
            lambda_backoff: 0.5,
            lambda_floor_ratio: 1e-2,
            stall_window: 50,
            stall_tolerance: 1e-6,
            gradient: GradientMode::default(),
        }
    }
}

impl KrotovConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self.lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::config("krotov.lambda", "must be > 0"));
            }
        }
        if !(self.lambda_backoff > 0.0 && self.lambda_backoff < 1.0) {
            return Err(Error::config("krotov.lambda_backoff", "must lie in (0, 1)"));
        }
        if !(self.lambda_floor_ratio > 0.0 && self.lambda_floor_ratio <= 1.0) {
            return Err(Error::config("krotov.lambda_floor_ratio", "must lie in (0, 1]"));
        }
        if !(self.error_threshold >= 0.0) {
            return Err(Error::config("krotov.error_threshold", "must be >= 0"));
        }
        if self.stall_window == 0 {
            return Err(Error::config("krotov.stall_window", "must be >= 1"));
        }
        if !(self.stall_tolerance >= 0.0) {
            return Err(Error::config("krotov.stall_tolerance", "must be >= 0"));
        }
        Ok(())
    }

    pub fn initial_lambda(&self, t_f: f64) -> f64 {
        self.lambda.unwrap_or(1.0 / t_f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Threshold,
    MaxIterations,
    Stalled,
}

/// Outcome of a full optimization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationRecord {
    pub target: GateKind,
    pub omega0: f64,
    pub t_f: f64,
    pub bounds: Bounds,
    pub lambda_initial: f64,
    pub lambda_final: f64,
    pub gradient: GradientMode,
    pub iterations_run: usize,
    pub rejected_passes: usize,
    pub stop_reason: StopReason,
    #[serde(rename = "E0")]
    pub initial_error: f64,
    #[serde(rename = "Es")]
    pub final_error: f64,
    /// `log10(E0 / Es)`; absent when `Es = 0`.
    pub improvement: Option<f64>,
    pub errors_per_iteration: Vec<f64>,
    pub initial_pulse: ControlPulse,
    pub final_pulse: ControlPulse,
}

pub fn improvement(initial_error: f64, final_error: f64) -> Option<f64> {
    if final_error > 0.0 {
        Some((initial_error / final_error).log10())
    } else if initial_error == 0.0 {
        Some(0.0)
    } else {
        None
    }
}

/// Everything that defines a gate-control problem apart from the Krotov knobs.
#[derive(Debug, Clone)]
pub struct ControlProblem {
    pub terms: ExpTermList,
    pub omega0: f64,
    pub target: GateKind,
    pub t_f: f64,
    pub dt: f64,
    pub bounds: Bounds,
    pub guess: GuessPolicy,
}

impl ControlProblem {
    pub fn initial_guess(&self) -> Result<ControlPulse> {
        initial_guess(self.target, self.t_f, self.dt, self.omega0, self.bounds, self.guess)
    }
}

fn costate_gradient(chi: &Mat4, mu: &[C64], g: &Mat4, f: &[C64]) -> f64 {
    let memory: C64 = mu.iter().zip(f).map(|(m, fj)| m.conj() * fj).sum();
    control_gradient(chi, g) + 2.0 * (C64::new(0.0, 1.0) * memory).re
}

/// Backward sweep plus forward update sweep, given the forward trajectory of `pulse`.
fn update_sweep(
    pulse: &ControlPulse,
    forward: &Trajectory,
    target: &GateTarget,
    lambda: f64,
    mode: GradientMode,
) -> Result<(ControlPulse, Trajectory)> {
    let terms = forward.terms();
    let omega0 = forward.omega0();
    let chi_tf = (target.matrix - forward.final_propagator()) / C64::from(2.0 * SUPEROPERATOR_DIM as f64);
    let (chi, costates) = match mode {
        GradientMode::Explicit => (propagate_adjoint(pulse, forward, chi_tf)?, None),
        GradientMode::Full => {
            let c = propagate_costates(pulse, forward, chi_tf)?;
            (c.chi.clone(), Some(c))
        }
    };

    let mut stepper = ForwardStepper::new(terms, pulse.dt, DEFAULT_BLOW_UP);
    let mut recorder = TrajectoryRecorder::new(terms, pulse.dt, omega0, pulse.len());
    recorder.record(&stepper);
    let mut samples = Vec::with_capacity(pulse.len());
    for (k, old) in pulse.samples.iter().enumerate() {
        let gradient = match &costates {
            None => control_gradient(&chi[k], &stepper.g),
            Some(c) => costate_gradient(&chi[k], c.mu(k), &stepper.g, &stepper.f),
        };
        let updated = pulse.bounds.clip(old + lambda * gradient);
        samples.push(updated);
        stepper.step(omega0 + updated)?;
        recorder.record(&stepper);
    }
    let new_pulse = ControlPulse::new(pulse.dt, samples, pulse.bounds)?;
    Ok((new_pulse, recorder.finish()))
}

/// One Krotov pass from scratch. Returns the updated pulse and its gate error.
pub fn krotov_iterate(
    pulse: &ControlPulse,
    terms: &ExpTermList,
    omega0: f64,
    target: &GateTarget,
    lambda: f64,
    mode: GradientMode,
) -> Result<(ControlPulse, f64)> {
    let forward = propagate(pulse, terms, omega0)?;
    let (new_pulse, new_traj) = update_sweep(pulse, &forward, target, lambda, mode)?;
    let error = gate_error(new_traj.final_propagator(), target);
    Ok((new_pulse, error))
}

/// Gradient of the gate error with respect to each held control sample,
/// `∂E/∂ε_k ≈ -dt · g(t_k)`, evaluated on the trajectory of `pulse`.
pub fn error_gradient(
    pulse: &ControlPulse,
    terms: &ExpTermList,
    omega0: f64,
    target: &GateTarget,
    mode: GradientMode,
) -> Result<Vec<f64>> {
    let forward = propagate(pulse, terms, omega0)?;
    let chi_tf = (target.matrix - forward.final_propagator()) / C64::from(2.0 * SUPEROPERATOR_DIM as f64);
    let density: Vec<f64> = match mode {
        GradientMode::Explicit => {
            let chi = propagate_adjoint(pulse, &forward, chi_tf)?;
            (0..forward.len())
                .map(|k| control_gradient(&chi[k], forward.propagator(k)))
                .collect()
        }
        GradientMode::Full => {
            let c = propagate_costates(pulse, &forward, chi_tf)?;
            (0..forward.len())
                .map(|k| costate_gradient(&c.chi[k], c.mu(k), forward.propagator(k), forward.f_values(k)))
                .collect()
        }
    };
    // Average the two ends of each held step.
    Ok((0..pulse.len())
        .map(|k| -pulse.dt * 0.5 * (density[k] + density[k + 1]))
        .collect())
}

/// Runs safeguarded Krotov passes from the problem's initial guess.
pub fn optimize(problem: &ControlProblem, config: &KrotovConfig) -> Result<OptimizationRecord> {
    let guess = problem.initial_guess()?;
    optimize_from(guess, &problem.terms, problem.omega0, problem.target, config)
}

/// Runs safeguarded Krotov passes from an arbitrary admissible pulse.
pub fn optimize_from(
    initial: ControlPulse,
    terms: &ExpTermList,
    omega0: f64,
    target: GateKind,
    config: &KrotovConfig,
) -> Result<OptimizationRecord> {
    config.validate()?;
    if !initial.within_bounds() {
        return Err(Error::InvalidInput("initial pulse violates its bounds".into()));
    }
    let gate = target.target();
    let t_f = initial.duration();
    let lambda_initial = config.initial_lambda(t_f);
    let lambda_floor = lambda_initial * config.lambda_floor_ratio;
    let mut lambda = lambda_initial;

    let mut pulse = initial.clone();
    let mut trajectory = propagate(&pulse, terms, omega0)?;
    let initial_error = gate_error(trajectory.final_propagator(), &gate);
    let mut errors = vec![initial_error];
    let mut rejected = 0usize;

    let stop_reason = loop {
        let current = *errors.last().expect("seeded with E0");
        if current <= config.error_threshold {
            break StopReason::Threshold;
        }
        if errors.len() > config.stall_window {
            let earlier = errors[errors.len() - 1 - config.stall_window];
            if earlier - current <= config.stall_tolerance * earlier {
                break StopReason::Stalled;
            }
        }
        if errors.len() > config.max_iterations {
            break StopReason::MaxIterations;
        }

        let (candidate, candidate_traj) = update_sweep(&pulse, &trajectory, &gate, lambda, config.gradient)?;
        let error = gate_error(candidate_traj.final_propagator(), &gate);
        if error <= current {
            pulse = candidate;
            trajectory = candidate_traj;
            errors.push(error);
        } else {
            // Rejected: the pulse stays put and the pass still counts, so a
            // saturated run ends through the stall window.
            rejected += 1;
            lambda = (lambda * config.lambda_backoff).max(lambda_floor);
            errors.push(current);
        }
    };

    let final_error = *errors.last().expect("seeded with E0");
    Ok(OptimizationRecord {
        target,
        omega0,
        t_f,
        bounds: initial.bounds,
        lambda_initial,
        lambda_final: lambda,
        gradient: config.gradient,
        iterations_run: errors.len() - 1,
        rejected_passes: rejected,
        stop_reason,
        initial_error,
        final_error,
        improvement: improvement(initial_error, final_error),
        errors_per_iteration: errors,
        initial_pulse: initial,
        final_pulse: pulse,
    })
}
