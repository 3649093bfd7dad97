//! Identity gate over several gating times, run as a sweep.

use nonmarkov_krotov::cli::{run_sweep, write_sweep, ExperimentConfig};

fn main() -> nonmarkov_krotov::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "out/identity_scan".into());
    let config = ExperimentConfig::from_json_str(
        r#"{
            "bath": {"kind": "lorentzian", "alpha": 0.01, "gamma": 0.1, "omega_big": 1.0},
            "target": "identity",
            "t_f": 5.0,
            "dt": 0.01,
            "krotov": {"max_iterations": 300},
            "sweep": {"t_f": [5.0, 10.0, 20.0, 40.0]}
        }"#,
    )?;
    let result = run_sweep(&config, out.as_ref(), None)?;
    write_sweep(&result, out.as_ref())?;
    for series in &result.series {
        for ((t, es), i) in series.t_f.iter().zip(&series.final_error).zip(&series.improvement) {
            println!("t_f = {t:>4}: Es = {:.3e}, I = {:.4}", es.unwrap_or(f64::NAN), i.unwrap_or(f64::NAN));
        }
    }
    println!("tables written to {out}");
    Ok(())
}
