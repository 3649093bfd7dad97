//! Fixed-step RK4 propagation of the memory functions together with the
//! propagator, and the matching backward (adjoint) sweeps.
//!
//! Forward, the state `(F_1..F_K, G)` is advanced as one vector so every
//! RK4 stage sees a stage-consistent `F`. The control is held at `ε(t_k)`
//! across step `k`. Backward sweeps reuse the stored forward grid and get
//! mid-step values of `F` and `G` from cubic Hermite interpolation with
//! one-sided derivatives, which keeps them fourth order.

use num_complex::Complex64 as C64;

use super::memory::memory_rhs;
use super::pulse::ControlPulse;
use super::superop::{build_lindbladian, memory_derivatives, Mat4};
use crate::bath::ExpTermList;
use crate::dynamics::MemoryState;
use crate::error::{Error, Result};

/// Default magnitude at which `|F_j|` or an entry of `G` aborts the integration.
pub const DEFAULT_BLOW_UP: f64 = 1e6;

/// Forward solution on the pulse grid: `F_j(t_k)` and `G(t_k)` for `k = 0..=N`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    dt: f64,
    omega0: f64,
    terms: ExpTermList,
    memory: Vec<C64>,
    f_total: Vec<C64>,
    propagators: Vec<Mat4>,
}

impl Trajectory {
    /// Number of stored grid points (`steps + 1`).
    pub fn len(&self) -> usize {
        self.propagators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.propagators.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn terms(&self) -> &ExpTermList {
        &self.terms
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn f_values(&self, k: usize) -> &[C64] {
        let width = self.terms.len();
        &self.memory[k * width..(k + 1) * width]
    }

    pub fn memory_state(&self, k: usize) -> MemoryState {
        MemoryState {
            f_values: self.f_values(k).to_vec(),
            time: self.time(k),
        }
    }

    pub fn f_total(&self, k: usize) -> C64 {
        self.f_total[k]
    }

    pub fn f_totals(&self) -> &[C64] {
        &self.f_total
    }

    pub fn propagator(&self, k: usize) -> &Mat4 {
        &self.propagators[k]
    }

    pub fn propagators(&self) -> &[Mat4] {
        &self.propagators
    }

    pub fn final_propagator(&self) -> &Mat4 {
        self.propagators.last().expect("trajectory holds at least G(0)")
    }
}

struct Scratch {
    k: [Vec<C64>; 4],
    stage: Vec<C64>,
}

impl Scratch {
    fn new(width: usize) -> Self {
        let zeros = || vec![C64::new(0.0, 0.0); width];
        Self {
            k: [zeros(), zeros(), zeros(), zeros()],
            stage: zeros(),
        }
    }
}

/// Incremental forward integrator, shared by plain propagation and the
/// control-update sweep.
pub(crate) struct ForwardStepper<'a> {
    terms: &'a ExpTermList,
    dt: f64,
    blow_up: f64,
    pub(crate) f: Vec<C64>,
    pub(crate) g: Mat4,
    pub(crate) time: f64,
    scratch: Scratch,
}

impl<'a> ForwardStepper<'a> {
    pub(crate) fn new(terms: &'a ExpTermList, dt: f64, blow_up: f64) -> Self {
        Self {
            terms,
            dt,
            blow_up,
            f: vec![C64::new(0.0, 0.0); terms.len()],
            g: Mat4::identity(),
            time: 0.0,
            scratch: Scratch::new(terms.len()),
        }
    }

    fn rhs(terms: &ExpTermList, omega: f64, f: &[C64], g: &Mat4, df: &mut [C64]) -> Mat4 {
        memory_rhs(f, terms, omega, df);
        let total: C64 = f.iter().sum();
        build_lindbladian(omega, total).apply(g)
    }

    /// Advances one grid step with the qubit frequency held at `omega`.
    pub(crate) fn step(&mut self, omega: f64) -> Result<()> {
        let h = self.dt;
        let Scratch { k, stage } = &mut self.scratch;
        let [k1, k2, k3, k4] = k;

        let g1 = Self::rhs(self.terms, omega, &self.f, &self.g, k1);
        for ((s, f), d) in stage.iter_mut().zip(&self.f).zip(k1.iter()) {
            *s = f + d * (h / 2.0);
        }
        let g2 = Self::rhs(self.terms, omega, stage, &(self.g + g1 * C64::from(h / 2.0)), k2);
        for ((s, f), d) in stage.iter_mut().zip(&self.f).zip(k2.iter()) {
            *s = f + d * (h / 2.0);
        }
        let g3 = Self::rhs(self.terms, omega, stage, &(self.g + g2 * C64::from(h / 2.0)), k3);
        for ((s, f), d) in stage.iter_mut().zip(&self.f).zip(k3.iter()) {
            *s = f + d * h;
        }
        let g4 = Self::rhs(self.terms, omega, stage, &(self.g + g3 * C64::from(h)), k4);

        for (j, f) in self.f.iter_mut().enumerate() {
            *f += (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) * (h / 6.0);
        }
        self.g += (g1 + (g2 + g3) * C64::from(2.0) + g4) * C64::from(h / 6.0);
        self.time += h;
        self.check()
    }

    fn check(&self) -> Result<()> {
        for f in &self.f {
            let v = f.norm();
            if !(v <= self.blow_up) {
                return Err(Error::IntegrationDiverged {
                    time: self.time,
                    quantity: "|F_j|",
                    value: v,
                });
            }
        }
        let g_max = self.g.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if !(g_max <= self.blow_up) {
            return Err(Error::IntegrationDiverged {
                time: self.time,
                quantity: "max |G_ij|",
                value: g_max,
            });
        }
        Ok(())
    }
}

/// Builder-side accumulator for a [`Trajectory`].
pub(crate) struct TrajectoryRecorder {
    traj: Trajectory,
}

impl TrajectoryRecorder {
    pub(crate) fn new(terms: &ExpTermList, dt: f64, omega0: f64, steps: usize) -> Self {
        let width = terms.len();
        Self {
            traj: Trajectory {
                dt,
                omega0,
                terms: terms.clone(),
                memory: Vec::with_capacity((steps + 1) * width),
                f_total: Vec::with_capacity(steps + 1),
                propagators: Vec::with_capacity(steps + 1),
            },
        }
    }

    pub(crate) fn record(&mut self, stepper: &ForwardStepper<'_>) {
        self.traj.memory.extend_from_slice(&stepper.f);
        self.traj.f_total.push(stepper.f.iter().sum());
        self.traj.propagators.push(stepper.g);
    }

    pub(crate) fn finish(self) -> Trajectory {
        self.traj
    }
}

/// Integrates the memory functions and `dG/dt = Λ(t) G` from `G(0) = I`, `F_j(0) = 0`.
pub fn propagate(pulse: &ControlPulse, terms: &ExpTermList, omega0: f64) -> Result<Trajectory> {
    propagate_with_threshold(pulse, terms, omega0, DEFAULT_BLOW_UP)
}

pub fn propagate_with_threshold(
    pulse: &ControlPulse,
    terms: &ExpTermList,
    omega0: f64,
    blow_up: f64,
) -> Result<Trajectory> {
    let mut stepper = ForwardStepper::new(terms, pulse.dt, blow_up);
    let mut recorder = TrajectoryRecorder::new(terms, pulse.dt, omega0, pulse.len());
    recorder.record(&stepper);
    for k in 0..pulse.len() {
        stepper.step(pulse.omega(k, omega0))?;
        recorder.record(&stepper);
    }
    Ok(recorder.finish())
}

/// Mid-step values on step `k`, from cubic Hermite interpolation.
struct Midpoint {
    f_total: C64,
    f_values: Vec<C64>,
    g: Mat4,
}

fn one_sided_memory_rate(traj: &Trajectory, k: usize, omega: f64) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); traj.terms.len()];
    memory_rhs(traj.f_values(k), &traj.terms, omega, &mut out);
    out
}

fn midpoint(traj: &Trajectory, k: usize, omega: f64) -> Midpoint {
    let h = traj.dt;
    let d0 = one_sided_memory_rate(traj, k, omega);
    let d1 = one_sided_memory_rate(traj, k + 1, omega);
    let (f0, f1) = (traj.f_values(k), traj.f_values(k + 1));
    let f_values: Vec<C64> = (0..f0.len())
        .map(|j| (f0[j] + f1[j]) * 0.5 + (d0[j] - d1[j]) * (h / 8.0))
        .collect();
    let (g0, g1) = (traj.propagator(k), traj.propagator(k + 1));
    let dg0 = build_lindbladian(omega, traj.f_total(k)).apply(g0);
    let dg1 = build_lindbladian(omega, traj.f_total(k + 1)).apply(g1);
    let g = (g0 + g1) * C64::from(0.5) + (dg0 - dg1) * C64::from(h / 8.0);
    Midpoint {
        f_total: f_values.iter().sum(),
        f_values,
        g,
    }
}

fn check_adjoint(chi: &Mat4, time: f64, blow_up: f64) -> Result<()> {
    let v = chi.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if v <= blow_up {
        Ok(())
    } else {
        Err(Error::IntegrationDiverged {
            time,
            quantity: "max |chi_ij|",
            value: v,
        })
    }
}

fn check_pairing(pulse: &ControlPulse, forward: &Trajectory) -> Result<()> {
    if forward.len() != pulse.len() + 1 || (forward.dt - pulse.dt).abs() > 1e-15 {
        return Err(Error::InvalidInput(
            "forward trajectory does not belong to this pulse grid".into(),
        ));
    }
    Ok(())
}

/// Backward sweep of the co-state `χ(t) = Φ(t_f, t)† χ(t_f)`.
///
/// `χ` solves `dχ/dt = -Λ(t)† χ`, i.e. `Λ†` generates it in reversed time,
/// so `Tr[χ(t)† G(t)]` is conserved along the grid. `Λ` is rebuilt from the
/// stored forward memory trajectory.
pub fn propagate_adjoint(pulse: &ControlPulse, forward: &Trajectory, chi_tf: Mat4) -> Result<Vec<Mat4>> {
    check_pairing(pulse, forward)?;
    let h = pulse.dt;
    let steps = pulse.len();
    let mut chi = vec![Mat4::zeros(); steps + 1];
    chi[steps] = chi_tf;
    for k in (0..steps).rev() {
        let omega = pulse.omega(k, forward.omega0);
        let late = build_lindbladian(omega, forward.f_total(k + 1)).0.adjoint();
        let mid = build_lindbladian(omega, midpoint(forward, k, omega).f_total).0.adjoint();
        let early = build_lindbladian(omega, forward.f_total(k)).0.adjoint();
        let x = chi[k + 1];
        let k1 = -(late * x);
        let k2 = -(mid * (x - k1 * C64::from(h / 2.0)));
        let k3 = -(mid * (x - k2 * C64::from(h / 2.0)));
        let k4 = -(early * (x - k3 * C64::from(h)));
        chi[k] = x - (k1 + (k2 + k3) * C64::from(2.0) + k4) * C64::from(h / 6.0);
        check_adjoint(&chi[k], forward.time(k), DEFAULT_BLOW_UP)?;
    }
    Ok(chi)
}

/// Co-states of the full system: `χ` for the propagator and `μ_j` for the
/// memory functions.
#[derive(Debug, Clone)]
pub struct Costates {
    width: usize,
    pub chi: Vec<Mat4>,
    mu: Vec<C64>,
}

impl Costates {
    pub fn mu(&self, k: usize) -> &[C64] {
        &self.mu[k * self.width..(k + 1) * self.width]
    }
}

/// Backward sweep that also carries `μ_j`, the sensitivity of the gate error
/// to the memory functions.
///
/// With `δE = -2 Re[Tr(χ† δG) + Σ_j conj(μ_j) δF_j]` conserved along the
/// linearized flow, `μ(t_f) = 0` and
/// `dμ_k/dt = -Σ_j conj(∂Ḟ_j/∂F_k) μ_j - conj(Tr(χ† A G) + conj(Tr(χ† B G)))`,
/// where `A`, `B` are the derivatives of `Λ` with respect to `F` and `conj(F)`.
pub fn propagate_costates(pulse: &ControlPulse, forward: &Trajectory, chi_tf: Mat4) -> Result<Costates> {
    check_pairing(pulse, forward)?;
    let h = pulse.dt;
    let steps = pulse.len();
    let width = forward.terms.len();
    let (wrt_f, wrt_conj) = memory_derivatives();
    let rates: Vec<C64> = forward.terms.terms().iter().map(|t| t.rate).collect();

    // Right-hand side of the backward system at one stage.
    let rhs = |omega: f64, f: &[C64], g: &Mat4, chi: &Mat4, mu: &[C64], out_mu: &mut [C64]| -> Mat4 {
        let total: C64 = f.iter().sum();
        let lambda = build_lindbladian(omega, total).0;
        let source = (chi.adjoint() * wrt_f * g).trace() + (chi.adjoint() * wrt_conj * g).trace().conj();
        let coupling: C64 = f.iter().zip(mu).map(|(fj, mj)| fj.conj() * mj).sum();
        let spin = C64::new(0.0, omega);
        for k in 0..f.len() {
            out_mu[k] = -((rates[k] + spin + total).conj() * mu[k] + coupling) - source.conj();
        }
        -(lambda.adjoint() * chi)
    };

    let mut chi = vec![Mat4::zeros(); steps + 1];
    let mut mu = vec![C64::new(0.0, 0.0); (steps + 1) * width];
    chi[steps] = chi_tf;
    let zeros = || vec![C64::new(0.0, 0.0); width];
    let (mut m1, mut m2, mut m3, mut m4, mut stage) = (zeros(), zeros(), zeros(), zeros(), zeros());
    for k in (0..steps).rev() {
        let omega = pulse.omega(k, forward.omega0);
        let mid = midpoint(forward, k, omega);
        let x = chi[k + 1];
        let y: Vec<C64> = mu[(k + 1) * width..(k + 2) * width].to_vec();

        let c1 = rhs(omega, forward.f_values(k + 1), forward.propagator(k + 1), &x, &y, &mut m1);
        for j in 0..width {
            stage[j] = y[j] - m1[j] * (h / 2.0);
        }
        let c2 = rhs(omega, &mid.f_values, &mid.g, &(x - c1 * C64::from(h / 2.0)), &stage, &mut m2);
        for j in 0..width {
            stage[j] = y[j] - m2[j] * (h / 2.0);
        }
        let c3 = rhs(omega, &mid.f_values, &mid.g, &(x - c2 * C64::from(h / 2.0)), &stage, &mut m3);
        for j in 0..width {
            stage[j] = y[j] - m3[j] * h;
        }
        let c4 = rhs(omega, forward.f_values(k), forward.propagator(k), &(x - c3 * C64::from(h)), &stage, &mut m4);

        chi[k] = x - (c1 + (c2 + c3) * C64::from(2.0) + c4) * C64::from(h / 6.0);
        for j in 0..width {
            mu[k * width + j] = y[j] - (m1[j] + 2.0 * m2[j] + 2.0 * m3[j] + m4[j]) * (h / 6.0);
        }
        check_adjoint(&chi[k], forward.time(k), DEFAULT_BLOW_UP)?;
    }
    Ok(Costates { width, chi, mu })
}
