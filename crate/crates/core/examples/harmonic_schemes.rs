//! Harmonic oscillator with each time scheme. Pass `--long` to also run the
//! operator-splitting instability at a fine momentum grid (about half a minute).

use chasm::harness::{run_experiment, RunConfig};
use chasm::Error;

fn main() -> chasm::Result<()> {
    println!("{:>6} {:>12} {:>12}", "scheme", "eps_inf", "eps_mass");
    for scheme in ["lpc1", "lapc2", "lapc3", "os"] {
        let cfg = RunConfig::from_str_config(&format!("problem = harmonic\ndx = 0.1\nt_final = 0.5\nscheme = {scheme}"))?;
        let s = run_experiment(&cfg)?;
        let n = s.len() - 1;
        println!("{scheme:>6} {:>12.3e} {:>12.3e}", s.eps_inf[n], s.eps_mass[n]);
    }

    if std::env::args().any(|a| a == "--long") {
        let cfg = RunConfig::from_str_config(
            "problem = harmonic\ndx = 0.1\nnk = 256\ntau = 0.0005\nt_final = 20\noutput_every = 2000\nscheme = os",
        )?;
        match run_experiment(&cfg) {
            Err(e @ Error::Unstable { .. }) => println!("\nos, nk = 256: {e}"),
            Ok(_) => println!("\nos, nk = 256: completed"),
            Err(e) => return Err(e),
        }
    }
    Ok(())
}
