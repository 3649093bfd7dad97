//! A coupling × width table of optimized Z-gate errors for one bath detuning,
//! written as CSV and JSON through the sweep runner.

use nonmarkov_krotov::cli::{run_sweep, write_sweep, ExperimentConfig};

fn main() -> nonmarkov_krotov::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "out/lorentzian_table".into());
    let config = ExperimentConfig::from_json_str(
        r#"{
            "bath": {"kind": "lorentzian", "alpha": 0.01, "gamma": 0.1, "omega_big": 5.0},
            "target": "z",
            "t_f": 2.0,
            "dt": 2e-3,
            "krotov": {"max_iterations": 100},
            "sweep": {"alpha": [0.01, 0.1, 1.0], "gamma": [0.1, 1.0, 10.0]}
        }"#,
    )?;
    let result = run_sweep(&config, out.as_ref(), None)?;
    write_sweep(&result, out.as_ref())?;
    for block in &result.blocks {
        println!("Ω = {:?}, t_f = {}", block.center, block.t_f);
        print!("{:>8}", "α \\ γ");
        for g in &block.widths {
            print!("{g:>12}");
        }
        println!();
        for (alpha, row) in block.couplings.iter().zip(&block.final_error) {
            print!("{alpha:>8}");
            for e in row {
                match e {
                    Some(e) => print!("{e:>12.2e}"),
                    None => print!("{:>12}", "error"),
                }
            }
            println!();
        }
    }
    Ok(())
}
