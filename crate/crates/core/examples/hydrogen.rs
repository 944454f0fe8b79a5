//! Hydrogen 1s Wigner function on a coarse 3+3-D grid, followed by a few
//! LPC1 steps with the spectral Coulomb operator.

use chasm::grid::{Axis, PhaseGrid};
use chasm::integrators::{Advector, Scheme, Stepper};
use chasm::metrics::{reduced_wigner, total_mass};
use chasm::par_spline::{ClosureKind, Workers};
use chasm::problems::hydrogen_1s_wigner;
use chasm::psido::{Potential, PsmOperator, SingularPolicy};
use chasm::spline::BoundaryCondition;

fn main() -> chasm::Result<()> {
    let x = Axis::nodal(-4.0, 4.0, 9)?;
    let k = Axis::momentum(6.4, 16)?;
    let grid = PhaseGrid::new(vec![x.clone(); 3], vec![k; 3], 1.0, 1.0)?;
    let f0 = hydrogen_1s_wigner(&grid, 64)?;
    let peak = f0.values.iter().cloned().fold(f64::MIN, f64::max);
    println!("peak {peak:.6}  (1/pi^3 = {:.6})", 1.0 / std::f64::consts::PI.powi(3));

    let reduced = reduced_wigner(&f0, &grid, 0)?;
    let nk = grid.k_axes()[0].len();
    println!("reduced Wigner along x at k = 0:");
    for (i, xi) in x.points().iter().enumerate() {
        println!("  x = {xi:>5.1}  {:.5e}", reduced[i * nk + nk / 2]);
    }

    let v = Potential::coulomb(1.0, 3).with_policy(SingularPolicy::ZeroAtSingularity);
    let theta = PsmOperator::new(&v, &grid)?;
    let adv = Advector::new(&grid, BoundaryCondition::Natural, ClosureKind::Serial, 1, Workers::Sequential)?;
    let mut stepper = Stepper::new(Scheme::Lpc1, 0.025);
    let mass0 = total_mass(&f0.values, &grid)?;
    let mut f = f0;
    for n in 1..=4 {
        f = stepper.step(&f, &adv, &theta)?.0;
        let mass = total_mass(&f.values, &grid)?;
        println!("step {n}: t = {:.3}  mass drift {:.2e}", f.time, (mass - mass0) / mass0);
    }
    Ok(())
}
