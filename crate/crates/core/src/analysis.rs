//! Post-hoc diagnostics: dissipation/phase split of the coherence and
//! tabulation of parameter sweeps.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::{memory_derivative, ControlPulse, Trajectory, GE};
use crate::optimizer::{GateKind, OptimizationRecord, StopReason};

/// Split of the coherence `ρ_ge(t_f) = ρ_ge(0) e^{-κ} e^{iφ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceDecomposition {
    /// `∫ Re F`, endpoint-corrected trapezoid on the grid.
    pub kappa: f64,
    /// Unwrapped phase of the propagated `ρ_ge` coherence.
    pub phi: f64,
    /// `∫ ω₀(s) ds` of the applied pulse.
    pub phi_applied: f64,
    /// Ideal gate phase: the target-parity multiple of π closest to `phi_applied`.
    pub phi_target: f64,
    /// `φ - phi_target`, the residual phase error at the end of the gate.
    pub phi_environment: f64,
    /// `φ - phi_applied`, the bath-induced frequency shift integrated over the gate.
    pub lamb_shift_phase: f64,
    /// `|ρ_ge(t_f)/ρ_ge(0)|` read off the propagator.
    pub coherence_modulus: f64,
}

impl CoherenceDecomposition {
    /// `|e^{-κ} - |ρ_ge(t_f)/ρ_ge(0)||`.
    pub fn modulus_mismatch(&self) -> f64 {
        ((-self.kappa).exp() - self.coherence_modulus).abs()
    }
}

/// `∫ Re F` between grid points `from` and `to`.
///
/// Trapezoid plus the `h²/12 (F'_k - F'_{k+1})` end correction, with `F'`
/// taken from the memory equations under the control held on each step.
/// Fourth order, like the propagator it is compared against.
pub fn kappa_between(trajectory: &Trajectory, pulse: &ControlPulse, from: usize, to: usize) -> f64 {
    let h = trajectory.dt();
    let slope = |k: usize, step: usize| -> f64 {
        let omega = pulse.omega(step, trajectory.omega0());
        memory_derivative(&trajectory.memory_state(k), trajectory.terms(), omega)
            .iter()
            .map(|d| d.re)
            .sum()
    };
    let f = trajectory.f_totals();
    (from..to)
        .map(|k| 0.5 * h * (f[k].re + f[k + 1].re) + h * h / 12.0 * (slope(k, k) - slope(k + 1, k)))
        .sum()
}

/// Accumulated argument of `G[ge,ge](t)`, one increment per step.
fn unwrapped_coherence_phase(trajectory: &Trajectory) -> f64 {
    let mut phase = 0.0;
    for k in 0..trajectory.len() - 1 {
        let a = trajectory.propagator(k)[(GE, GE)];
        let b = trajectory.propagator(k + 1)[(GE, GE)];
        phase += (b * a.conj()).arg();
    }
    phase
}

pub fn decompose_coherence(
    trajectory: &Trajectory,
    pulse: &ControlPulse,
    target: GateKind,
) -> CoherenceDecomposition {
    let kappa = kappa_between(trajectory, pulse, 0, trajectory.len() - 1);
    let phi = unwrapped_coherence_phase(trajectory);
    let phi_applied: f64 = pulse
        .samples
        .iter()
        .map(|e| (trajectory.omega0() + e) * pulse.dt)
        .sum();
    let parity = target.phase_parity() as f64;
    let n = ((phi_applied / PI - parity) / 2.0).round() * 2.0 + parity;
    let phi_target = n * PI;
    CoherenceDecomposition {
        kappa,
        phi,
        phi_applied,
        phi_target,
        phi_environment: phi - phi_target,
        lamb_shift_phase: phi - phi_applied,
        coherence_modulus: trajectory.final_propagator()[(GE, GE)].norm(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BathFamily {
    Lorentzian,
    Ohmic,
}

/// Grid coordinates of one sweep cell.
///
/// `coupling` is α (or α_o), `width` is γ (or ω_c), `center` is Ω for the
/// Lorentzian family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    pub family: BathFamily,
    pub coupling: f64,
    pub width: f64,
    pub center: Option<f64>,
    pub t_f: f64,
}

/// Scalars kept from a finished optimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    #[serde(rename = "E0")]
    pub initial_error: f64,
    #[serde(rename = "Es")]
    pub final_error: f64,
    pub improvement: Option<f64>,
    pub iterations_run: usize,
    pub stop_reason: StopReason,
    pub before: Option<CoherenceDecomposition>,
    pub after: Option<CoherenceDecomposition>,
}

impl CellSummary {
    pub fn from_record(
        record: &OptimizationRecord,
        before: Option<CoherenceDecomposition>,
        after: Option<CoherenceDecomposition>,
    ) -> Self {
        Self {
            initial_error: record.initial_error,
            final_error: record.final_error,
            improvement: record.improvement,
            iterations_run: record.iterations_run,
            stop_reason: record.stop_reason,
            before,
            after,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellOutcome {
    Ok(CellSummary),
    Failed { kind: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub index: usize,
    pub params: CellParams,
    pub outcome: CellOutcome,
}

impl SweepCell {
    pub fn summary(&self) -> Option<&CellSummary> {
        match &self.outcome {
            CellOutcome::Ok(s) => Some(s),
            CellOutcome::Failed { .. } => None,
        }
    }
}

/// Coupling × width matrix for one `(family, center, t_f)` block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockTable {
    pub family: BathFamily,
    pub center: Option<f64>,
    pub t_f: f64,
    pub couplings: Vec<f64>,
    pub widths: Vec<f64>,
    /// `final_error[row][col]`; `None` marks a failed or missing cell.
    pub final_error: Vec<Vec<Option<f64>>>,
    pub improvement: Vec<Vec<Option<f64>>>,
}

/// `E⁽ˢ⁾(t_f)` and `𝓘(t_f)` for one bath setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatingTimeSeries {
    pub family: BathFamily,
    pub coupling: f64,
    pub width: f64,
    pub center: Option<f64>,
    pub t_f: Vec<f64>,
    pub final_error: Vec<Option<f64>>,
    pub improvement: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub cells: Vec<SweepCell>,
    pub blocks: Vec<BlockTable>,
    pub series: Vec<GatingTimeSeries>,
}

impl SweepResult {
    pub fn failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.summary().is_none()).count()
    }
}

/// Total-order key for grid values.
fn key(x: f64) -> u64 {
    let bits = x.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

fn center_key(c: Option<f64>) -> Option<u64> {
    c.map(key)
}

fn sorted_unique(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut map = BTreeMap::new();
    for v in values {
        map.insert(key(v), v);
    }
    map.into_values().collect()
}

/// Groups sweep cells into coupling × width blocks and gating-time series.
pub fn tabulate_sweep(mut cells: Vec<SweepCell>) -> SweepResult {
    cells.sort_by_key(|c| c.index);

    let mut blocks_by_key: BTreeMap<(BathFamily, Option<u64>, u64), Vec<&SweepCell>> = BTreeMap::new();
    let mut series_by_key: BTreeMap<(BathFamily, u64, u64, Option<u64>), Vec<&SweepCell>> = BTreeMap::new();
    for cell in &cells {
        let p = &cell.params;
        blocks_by_key
            .entry((p.family, center_key(p.center), key(p.t_f)))
            .or_default()
            .push(cell);
        series_by_key
            .entry((p.family, key(p.coupling), key(p.width), center_key(p.center)))
            .or_default()
            .push(cell);
    }

    let blocks = blocks_by_key
        .values()
        .map(|members| {
            let first = members[0].params;
            let couplings = sorted_unique(members.iter().map(|c| c.params.coupling));
            let widths = sorted_unique(members.iter().map(|c| c.params.width));
            let mut final_error = vec![vec![None; widths.len()]; couplings.len()];
            let mut improvement = vec![vec![None; widths.len()]; couplings.len()];
            for cell in members {
                let row = couplings.iter().position(|v| key(*v) == key(cell.params.coupling));
                let col = widths.iter().position(|v| key(*v) == key(cell.params.width));
                if let (Some(r), Some(c), Some(s)) = (row, col, cell.summary()) {
                    final_error[r][c] = Some(s.final_error);
                    improvement[r][c] = s.improvement;
                }
            }
            BlockTable {
                family: first.family,
                center: first.center,
                t_f: first.t_f,
                couplings,
                widths,
                final_error,
                improvement,
            }
        })
        .collect();

    let series = series_by_key
        .values()
        .filter_map(|members| {
            let times = sorted_unique(members.iter().map(|c| c.params.t_f));
            if times.len() < 2 {
                return None;
            }
            let first = members[0].params;
            let lookup = |t: f64| members.iter().find(|c| key(c.params.t_f) == key(t)).and_then(|c| c.summary());
            Some(GatingTimeSeries {
                family: first.family,
                coupling: first.coupling,
                width: first.width,
                center: first.center,
                final_error: times.iter().map(|t| lookup(*t).map(|s| s.final_error)).collect(),
                improvement: times.iter().map(|t| lookup(*t).and_then(|s| s.improvement)).collect(),
                t_f: times,
            })
        })
        .collect();

    SweepResult { cells, blocks, series }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{lorentzian_terms, ExpTermList, LorentzianBath};
    use crate::dynamics::{propagate, Bounds};
    use crate::optimizer::{initial_guess, GuessPolicy};

    fn guess_trajectory(terms: &ExpTermList) -> (ControlPulse, Trajectory) {
        let pulse = initial_guess(GateKind::Z, 2.0, 1e-3, 1.0, Bounds::small_range(), GuessPolicy::Nearest)
            .unwrap();
        let traj = propagate(&pulse, terms, 1.0).unwrap();
        (pulse, traj)
    }

    #[test]
    fn closed_system_has_no_environment_terms() {
        let terms = lorentzian_terms(&LorentzianBath::new(0.0, 0.1, 5.0).unwrap());
        let (pulse, traj) = guess_trajectory(&terms);
        let d = decompose_coherence(&traj, &pulse, GateKind::Z);
        assert_eq!(d.kappa, 0.0);
        assert!(d.phi_environment.abs() < 1e-10, "{d:?}");
        assert!((d.phi_target - PI).abs() < 1e-15);
    }

    #[test]
    fn modulus_matches_dissipation_exponent() {
        let terms = lorentzian_terms(&LorentzianBath::new(0.1, 0.1, 5.0).unwrap());
        let (pulse, traj) = guess_trajectory(&terms);
        let d = decompose_coherence(&traj, &pulse, GateKind::Z);
        assert!(d.modulus_mismatch() < 1e-8, "{}", d.modulus_mismatch());
        assert!((d.lamb_shift_phase - d.phi_environment).abs() < 1e-12);
    }

    #[test]
    fn kappa_is_additive() {
        let terms = lorentzian_terms(&LorentzianBath::new(0.1, 1.0, 1.0).unwrap());
        let (pulse, traj) = guess_trajectory(&terms);
        let end = traj.len() - 1;
        for split in [1, 700, 1999] {
            let whole = kappa_between(&traj, &pulse, 0, end);
            let parts = kappa_between(&traj, &pulse, 0, split) + kappa_between(&traj, &pulse, split, end);
            assert!((whole - parts).abs() < 1e-15);
        }
    }

    #[test]
    fn weak_coupling_scales_linearly() {
        let at = |alpha: f64| {
            let terms = lorentzian_terms(&LorentzianBath::new(alpha, 0.1, 1.0).unwrap());
            let (pulse, traj) = guess_trajectory(&terms);
            decompose_coherence(&traj, &pulse, GateKind::Z)
        };
        let (one, two) = (at(0.01), at(0.02));
        let kappa_slope = two.kappa / one.kappa;
        let phase_slope = two.phi_environment / one.phi_environment;
        assert!((kappa_slope - 2.0).abs() < 0.2, "{kappa_slope}");
        assert!((phase_slope - 2.0).abs() < 0.2, "{phase_slope}");
    }

    fn cell(index: usize, coupling: f64, width: f64, t_f: f64, es: Option<f64>) -> SweepCell {
        let outcome = match es {
            Some(es) => CellOutcome::Ok(CellSummary {
                initial_error: 2.0 * es,
                final_error: es,
                improvement: Some(2f64.log10()),
                iterations_run: 3,
                stop_reason: StopReason::Stalled,
                before: None,
                after: None,
            }),
            None => CellOutcome::Failed {
                kind: "IntegrationDiverged".into(),
                message: "boom".into(),
            },
        };
        SweepCell {
            index,
            params: CellParams {
                family: BathFamily::Lorentzian,
                coupling,
                width,
                center: Some(1.0),
                t_f,
            },
            outcome,
        }
    }

    #[test]
    fn single_cell_table() {
        let result = tabulate_sweep(vec![cell(0, 0.01, 0.1, 2.0, Some(3e-7))]);
        assert_eq!(result.blocks.len(), 1);
        assert_eq!(result.blocks[0].final_error, vec![vec![Some(3e-7)]]);
        assert!(result.series.is_empty());
    }

    #[test]
    fn grid_layout_and_failures() {
        let cells = vec![
            cell(3, 0.1, 1.0, 2.0, Some(4.0)),
            cell(0, 0.01, 0.1, 2.0, Some(1.0)),
            cell(2, 0.1, 0.1, 2.0, None),
            cell(1, 0.01, 1.0, 2.0, Some(2.0)),
        ];
        let result = tabulate_sweep(cells);
        assert_eq!(result.failed_cells(), 1);
        let b = &result.blocks[0];
        assert_eq!(b.couplings, vec![0.01, 0.1]);
        assert_eq!(b.widths, vec![0.1, 1.0]);
        assert_eq!(b.final_error, vec![vec![Some(1.0), Some(2.0)], vec![None, Some(4.0)]]);
        assert_eq!(result.cells.iter().map(|c| c.index).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn gating_time_series() {
        let cells = vec![
            cell(0, 0.01, 0.1, 5.0, Some(1e-5)),
            cell(1, 0.01, 0.1, 10.0, Some(2e-5)),
            cell(2, 0.01, 0.1, 20.0, Some(3e-5)),
        ];
        let result = tabulate_sweep(cells);
        assert_eq!(result.blocks.len(), 3);
        assert_eq!(result.series.len(), 1);
        assert_eq!(result.series[0].t_f, vec![5.0, 10.0, 20.0]);
        assert_eq!(result.series[0].final_error, vec![Some(1e-5), Some(2e-5), Some(3e-5)]);
    }
}
