//! Free Gaussian packet: convergence in dx for the serial spline and for a
//! four-patch PMBC decomposition.

use chasm::harness::{convergence_table, write_table, RunConfig, SweepParam};

fn main() -> chasm::Result<()> {
    let dxs = [0.6, 0.3, 0.15, 0.075];
    for closure in ["serial", "pmbc\nnnb = 10\npatches = 4\nworkers = 4"] {
        let cfg = RunConfig::from_str_config(&format!("problem = free_advection\nclosure = {closure}"))?;
        println!("closure: {}", closure.lines().next().unwrap());
        let rows = convergence_table(&cfg, SweepParam::Dx, &dxs)?;
        write_table(&rows, SweepParam::Dx, std::io::stdout()).expect("stdout");
        println!();
    }
    Ok(())
}
