//! A 1-D Coulomb well under the spectral operator. The bare potential aborts
//! within a few steps; a softened one runs to the end.

use chasm::harness::{run_experiment, RunConfig};
use chasm::Error;

fn main() -> chasm::Result<()> {
    for (label, extra) in [
        ("bare, zero at x = 0", "policy = zero"),
        ("bare, shifted grid", "policy = shift:0.5"),
        ("soft, eps = 0.5", "soft = 0.5"),
        ("soft, eps = 1", "soft = 1"),
    ] {
        let cfg = RunConfig::from_str_config(&format!("problem = singular\n{extra}"))?;
        match run_experiment(&cfg) {
            Ok(s) => {
                let worst = s.min_marginal.iter().cloned().fold(f64::INFINITY, f64::min);
                println!("{label:<22} completed T = {}, min marginal {worst:.3e}", cfg.t_final);
            }
            Err(e @ Error::Unstable { .. }) => println!("{label:<22} {e}"),
            Err(e) => return Err(e),
        }
    }
    Ok(())
}
