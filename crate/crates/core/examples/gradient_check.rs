//! Adjoint gradient of the gate error against central differences.

use nonmarkov_krotov::bath::{lorentzian_terms, LorentzianBath};
use nonmarkov_krotov::dynamics::{propagate, Bounds, ControlPulse};
use nonmarkov_krotov::optimizer::{error_gradient, gate_error, GateKind, GradientMode};

fn main() -> nonmarkov_krotov::Result<()> {
    let terms = lorentzian_terms(&LorentzianBath::new(0.1, 1.0, 1.0)?);
    let target = GateKind::Z.target();
    let samples = (0..2000).map(|k| 0.45 + 0.2 * (2.3e-3 * k as f64).sin()).collect();
    let pulse = ControlPulse::new(1e-3, samples, Bounds::small_range())?;
    let error = |p: &ControlPulse| -> nonmarkov_krotov::Result<f64> {
        Ok(gate_error(propagate(p, &terms, 1.0)?.final_propagator(), &target))
    };

    for mode in [GradientMode::Explicit, GradientMode::Full] {
        let grad = error_gradient(&pulse, &terms, 1.0, &target, mode)?;
        println!("{mode:?}");
        for start in [0usize, 500, 1000, 1500] {
            let block = start..start + 100;
            let mut up = pulse.clone();
            let mut down = pulse.clone();
            for k in block.clone() {
                up.samples[k] += 1e-4;
                down.samples[k] -= 1e-4;
            }
            let fd = (error(&up)? - error(&down)?) / 2e-4;
            let adjoint: f64 = grad[block].iter().sum();
            println!("  samples {start:>4}..{:<4}  fd {fd:+.6e}  adjoint {adjoint:+.6e}", start + 100);
        }
    }
    Ok(())
}
