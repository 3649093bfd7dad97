//! Multi-exponential fits of the Ohmic kernel for growing term counts.

use nonmarkov_krotov::bath::{best_fit, terms_to_json, OhmicBath};

fn main() -> nonmarkov_krotov::Result<()> {
    let t_f = 2.0;
    for omega_c in [1.0, 5.0, 20.0] {
        let bath = OhmicBath::new(1e-3, omega_c)?;
        let horizon = bath.default_fit_horizon(t_f);
        let samples = bath.kernel_samples(horizon, 2000);
        print!("ω_c = {omega_c:>4}, horizon {horizon:.2}:");
        for k in 1..=6 {
            let (_, report) = best_fit(&samples, k, &bath.fit_options())?;
            print!("  K={k} {:.1e}", report.relative_l2_residual);
        }
        println!();
    }

    let bath = OhmicBath::new(1e-3, 5.0)?;
    let samples = bath.kernel_samples(bath.default_fit_horizon(t_f), 2000);
    let (terms, report) = best_fit(&samples, 6, &bath.fit_options())?;
    println!("{}", terms_to_json(&terms, &report)?);
    Ok(())
}
