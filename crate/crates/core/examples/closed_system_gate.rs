//! Without a bath the constant pulse ω₀(t) = nπ/t_f realizes the gate exactly.

use nonmarkov_krotov::bath::{lorentzian_terms, LorentzianBath};
use nonmarkov_krotov::dynamics::{propagate, Bounds};
use nonmarkov_krotov::optimizer::{gate_error, initial_guess, rotation_number, GateKind, GuessPolicy};

fn main() -> nonmarkov_krotov::Result<()> {
    let silent = lorentzian_terms(&LorentzianBath::new(0.0, 0.1, 1.0)?);
    for (kind, t_f) in [(GateKind::Z, 2.0), (GateKind::Z, 5.0), (GateKind::Identity, 4.0), (GateKind::Identity, 20.0)] {
        let pulse = initial_guess(kind, t_f, 1e-3, 1.0, Bounds::small_range(), GuessPolicy::Nearest)?;
        let traj = propagate(&pulse, &silent, 1.0)?;
        println!(
            "{kind:?} t_f = {t_f:>4}: n = {:.0}, ε = {:+.6}, E = {:.2e}",
            rotation_number(&pulse, 1.0),
            pulse.samples[0],
            gate_error(traj.final_propagator(), &kind.target())
        );
    }
    Ok(())
}
