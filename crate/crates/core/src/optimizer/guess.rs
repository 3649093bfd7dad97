use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::GateKind;
use crate::dynamics::{Bounds, ControlPulse};
use crate::error::{Error, Result};

/// Which closed-system pulse `ω₀(t) = nπ/t_f` seeds the optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GuessPolicy {
    /// `n` closest to the bare frequency, ties toward larger `n`.
    #[default]
    Nearest,
    /// Largest admissible `n` (fastest rotation the bounds allow).
    Largest,
    /// A specific `n`; must have the right parity and fit the bounds.
    Explicit(i64),
}

/// Admissible `n` of the parity the target requires.
fn admissible(target: GateKind, t_f: f64, omega0: f64, bounds: &Bounds) -> Vec<i64> {
    let slack = 1e-12;
    let lo = ((omega0 + bounds.lower) * t_f / PI - slack).ceil() as i64;
    let hi = ((omega0 + bounds.upper) * t_f / PI + slack).floor() as i64;
    (lo..=hi)
        .filter(|n| n.rem_euclid(2) == target.phase_parity())
        .collect()
}

/// Constant pulse `ε = nπ/t_f - ω₀` that realizes the target exactly in the
/// absence of the bath.
pub fn initial_guess(
    target: GateKind,
    t_f: f64,
    dt: f64,
    omega0: f64,
    bounds: Bounds,
    policy: GuessPolicy,
) -> Result<ControlPulse> {
    let candidates = admissible(target, t_f, omega0, &bounds);
    let n = match policy {
        GuessPolicy::Nearest => candidates.iter().copied().min_by(|a, b| {
            let da = (*a as f64 * PI / t_f - omega0).abs();
            let db = (*b as f64 * PI / t_f - omega0).abs();
            da.total_cmp(&db).then(b.cmp(a))
        }),
        GuessPolicy::Largest => candidates.iter().copied().max(),
        GuessPolicy::Explicit(n) => candidates.contains(&n).then_some(n),
    };
    let Some(n) = n else {
        return Err(Error::NoAdmissibleGuess(format!(
            "no {} n with nπ/t_f in [{}, {}] for t_f = {t_f} ({policy:?})",
            if target.phase_parity() == 0 { "even" } else { "odd" },
            omega0 + bounds.lower,
            omega0 + bounds.upper,
        )));
    };
    let epsilon = bounds.clip(n as f64 * PI / t_f - omega0);
    ControlPulse::constant(t_f, dt, epsilon, bounds)
}

/// The `n` a constant pulse corresponds to, if it is one of the closed-system guesses.
pub fn rotation_number(pulse: &ControlPulse, omega0: f64) -> f64 {
    let total: f64 = pulse.samples.iter().map(|e| omega0 + e).sum::<f64>() * pulse.dt;
    total / PI
}
