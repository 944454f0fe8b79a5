//! Patched spline fits of sin(x) on [0, 8]: PMBC error against the
//! neighbour count, and the CLS-HBC closure against patch count.

use chasm::par_spline::ClosureKind;
use chasm::problems::sine_patch_error;
use chasm::Error;

fn main() -> chasm::Result<()> {
    println!("PMBC, N = 161, p = 4");
    println!("{:>6} {:>12}", "n_nb", "rel. error");
    for n_nb in [4, 6, 8, 10, 12, 16, 20, 26] {
        let e = sine_patch_error(161, 4, ClosureKind::Pmbc { n_nb })?;
        println!("{n_nb:>6} {e:>12.3e}");
    }

    println!("\nCLS-HBC");
    println!("{:>6} {:>4} {:>12}", "N", "p", "rel. error");
    for n in [41, 81, 161] {
        for p in [2, 4, 8] {
            match sine_patch_error(n, p, ClosureKind::ClsHbc) {
                Ok(e) => println!("{n:>6} {p:>4} {e:>12.3e}"),
                Err(Error::Stencil { needed, available }) => {
                    println!("{n:>6} {p:>4}   patch too small ({available} < {needed} points)")
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(())
}
