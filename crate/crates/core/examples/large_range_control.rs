//! Fast rotation with |ε| ≤ 20 ω₀ against the |ε| ≤ ω₀ control at the same t_f.

use nonmarkov_krotov::bath::{lorentzian_terms, LorentzianBath};
use nonmarkov_krotov::dynamics::Bounds;
use nonmarkov_krotov::optimizer::{optimize, ControlProblem, GateKind, GuessPolicy, KrotovConfig};

fn main() -> nonmarkov_krotov::Result<()> {
    let terms = lorentzian_terms(&LorentzianBath::new(0.1, 0.1, 1.0)?);
    let config = KrotovConfig {
        max_iterations: 300,
        ..Default::default()
    };
    for (label, bounds, guess) in [
        ("|ε| ≤ 1 ", Bounds::small_range(), GuessPolicy::Nearest),
        ("|ε| ≤ 20", Bounds::large_range(), GuessPolicy::Largest),
    ] {
        let problem = ControlProblem {
            terms: terms.clone(),
            omega0: 1.0,
            target: GateKind::Z,
            t_f: 2.0,
            dt: 1e-3,
            bounds,
            guess,
        };
        let record = optimize(&problem, &config)?;
        println!(
            "{label}: ε0 = {:+.4}, E0 = {:.3e}, Es = {:.3e}",
            record.initial_pulse.samples[0], record.initial_error, record.final_error
        );
    }
    Ok(())
}
