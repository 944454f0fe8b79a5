//! Neumann against natural end conditions for a packet that travels close
//! to the edge of a short position domain.

use chasm::harness::{run_experiment, RunConfig};

fn main() -> chasm::Result<()> {
    println!("{:>9} {:>6} {:>12} {:>12}", "boundary", "x_max", "eps_inf", "eps_mass");
    for x_max in [12.0, 8.0, 6.0] {
        for bc in ["neumann", "natural"] {
            let text = format!("problem = free_advection\nboundary = {bc}\nx_min = -{x_max}\nx_max = {x_max}\ndx = 0.2");
            let s = run_experiment(&RunConfig::from_str_config(&text)?)?;
            let n = s.len() - 1;
            println!("{bc:>9} {x_max:>6} {:>12.3e} {:>12.3e}", s.eps_inf[n], s.eps_mass[n]);
        }
    }
    Ok(())
}
