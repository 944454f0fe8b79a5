//! Initial data and reference solutions of the benchmark problems.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::StateField;
use crate::grid::{Axis, PhaseGrid};
use crate::par_spline::{ClosureKind, LineSolver};
use crate::psido::KTransforms;
use crate::spline::{solve_coeffs, BoundaryCondition};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    SineSpline,
    FreeAdvection2D,
    Harmonic2D,
    Hydrogen1s,
    /// Gaussian packet in an attractive `-strength/|x|` well.
    SingularCoulomb,
}

impl ProblemKind {
    fn required(self) -> &'static [&'static str] {
        match self {
            ProblemKind::SineSpline => &[],
            ProblemKind::FreeAdvection2D => &["a", "k0"],
            ProblemKind::Harmonic2D => &["omega"],
            ProblemKind::Hydrogen1s => &["n_y"],
            ProblemKind::SingularCoulomb => &["strength"],
        }
    }
}

/// A problem kind with its named parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub params: BTreeMap<String, f64>,
}

impl ProblemSpec {
    pub fn new(kind: ProblemKind, params: &[(&str, f64)]) -> Result<Self> {
        let spec = Self { kind, params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect() };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for key in self.kind.required() {
            if !self.params.contains_key(*key) {
                return Err(Error::config(format!("{:?} needs parameter `{key}`", self.kind)));
            }
        }
        if self.kind == ProblemKind::Harmonic2D && self.get("omega")? <= 0.0 {
            return Err(Error::config("omega must be positive"));
        }
        if self.kind == ProblemKind::FreeAdvection2D && self.get("a")? <= 0.0 {
            return Err(Error::config("a must be positive"));
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Result<f64> {
        self.params.get(key).copied().ok_or_else(|| Error::config(format!("missing parameter `{key}`")))
    }

    /// Parameters of the free-advection example: `a = 1`, `k0 = 0.5`.
    pub fn free_advection_default() -> Self {
        Self::new(ProblemKind::FreeAdvection2D, &[("a", 1.0), ("k0", 0.5)]).unwrap()
    }

    /// Harmonic well with `omega = (pi/5)^2`, period 10.
    pub fn harmonic_default() -> Self {
        Self::new(ProblemKind::Harmonic2D, &[("omega", (PI / 5.0).powi(2))]).unwrap()
    }
}

/// `(1/pi) exp(-(x - hbar k t / m)^2 / (2a^2) - 2 a^2 (k - k0)^2)`.
pub fn free_gaussian_exact(x: f64, k: f64, t: f64, a: f64, k0: f64, hbar: f64, m: f64) -> f64 {
    let xs = x - hbar * k * t / m;
    (-(xs * xs) / (2.0 * a * a) - 2.0 * a * a * (k - k0).powi(2)).exp() / PI
}

/// Foot `(x(t), k(t))` of the backward characteristic through `(x, k)` in the
/// well `V = m omega x^2 / 2`.
pub fn harmonic_characteristic(x: f64, k: f64, t: f64, omega: f64, hbar: f64, m: f64) -> (f64, f64) {
    let w = omega.sqrt();
    let (s, c) = (w * t).sin_cos();
    (c * x - hbar / (m * w) * s * k, m * w / hbar * s * x + c * k)
}

/// `f0(x(t), k(t))`.
pub fn harmonic_exact(x: f64, k: f64, t: f64, omega: f64, hbar: f64, m: f64, f0: impl Fn(f64, f64) -> f64) -> f64 {
    let (xt, kt) = harmonic_characteristic(x, k, t, omega, hbar, m);
    f0(xt, kt)
}

/// `(1/pi) exp(-(x-1)^2/2 - 2k^2)`.
pub fn harmonic_initial(x: f64, k: f64) -> f64 {
    (-(x - 1.0).powi(2) / 2.0 - 2.0 * k * k).exp() / PI
}

/// `pi^-3 exp(-((x1-1)^2 + x2^2 + x3^2)/2 - 2|k|^2)`.
pub fn initial_gaussian_6d(x: &[f64], k: &[f64]) -> f64 {
    let r2 = (x[0] - 1.0).powi(2) + x[1] * x[1] + x[2] * x[2];
    let k2: f64 = k.iter().map(|v| v * v).sum();
    (-r2 / 2.0 - 2.0 * k2).exp() / PI.powi(3)
}

/// Largest output the 1s generator produces without complaint.
pub const HYDROGEN_MAX_POINTS: usize = 10_000_000;

/// Wigner function of the hydrogen ground state by a discrete Fourier sum over
/// `n_y^3` nodes with `dy = 2 pi / (N_k dk)` per axis.
pub fn hydrogen_1s_wigner(grid: &PhaseGrid, n_y: usize) -> Result<StateField> {
    if grid.dim() != 3 {
        return Err(Error::config(format!("the 1s state lives in 3+3 dimensions, grid has {}", grid.dim())));
    }
    if !n_y.is_power_of_two() {
        return Err(Error::config(format!("n_y = {n_y} must be a power of two")));
    }
    if grid.len() > HYDROGEN_MAX_POINTS {
        return Err(Error::Size(format!("1s generator limited to {HYDROGEN_MAX_POINTS} points, grid has {}", grid.len())));
    }
    for a in grid.k_axes() {
        if !a.is_periodic() || a.len() % 2 != 0 {
            return Err(Error::config("momentum axes must be periodic with an even point count"));
        }
    }
    let kshape: Vec<usize> = grid.k_axes().iter().map(Axis::len).collect();
    let dy: Vec<f64> = grid.k_axes().iter().map(|a| 2.0 * PI / (a.len() as f64 * a.spacing())).collect();
    let c2 = 1.0 / (8.0 * PI.powi(4));
    let vol: f64 = dy.iter().product();
    let etas: Vec<i64> = (-(n_y as i64) / 2..n_y as i64 / 2).collect();
    let fold = |e: i64, n: usize| e.rem_euclid(n as i64) as usize;
    let tr = KTransforms::new(&kshape);
    let nk = grid.nk_total();
    // k index j sits at frequency j - N/2
    let slot: Vec<usize> = (0..nk)
        .map(|j| {
            let m = grid.k_multi(j);
            let mut s = 0;
            for (a, &ja) in m.iter().enumerate() {
                s = s * kshape[a] + (ja + kshape[a] / 2) % kshape[a];
            }
            s
        })
        .collect();
    let mut values = Vec::with_capacity(grid.len());
    let mut g = vec![Complex64::default(); nk];
    for i in 0..grid.nx_total() {
        let x = grid.x_coords(i);
        g.iter_mut().for_each(|c| *c = Complex64::default());
        for &e1 in &etas {
            let y1 = 0.5 * e1 as f64 * dy[0];
            let r1 = fold(e1, kshape[0]);
            for &e2 in &etas {
                let y2 = 0.5 * e2 as f64 * dy[1];
                let r2 = fold(e2, kshape[1]);
                let base = (r1 * kshape[1] + r2) * kshape[2];
                let (am, ap) = ((x[0] - y1).powi(2) + (x[1] - y2).powi(2), (x[0] + y1).powi(2) + (x[1] + y2).powi(2));
                for &e3 in &etas {
                    let y3 = 0.5 * e3 as f64 * dy[2];
                    let minus = (am + (x[2] - y3).powi(2)).sqrt();
                    let plus = (ap + (x[2] + y3).powi(2)).sqrt();
                    g[base + fold(e3, kshape[2])].re += (-minus - plus).exp();
                }
            }
        }
        tr.run(&mut g, false);
        values.extend(slot.iter().map(|&s| c2 * vol * g[s].re));
    }
    StateField::from_values(grid, values, 0.0)
}

/// Sine test of the decomposed spline: `sin` on `[0, 8]` with Neumann ends.
/// Returns the largest patch-coefficient deviation from the global spline,
/// relative to the largest global coefficient.
pub fn sine_patch_error(n_points: usize, patches: usize, closure: ClosureKind) -> Result<f64> {
    let axis = Axis::nodal(0.0, 8.0, n_points)?;
    let samples: Vec<f64> = axis.points().iter().map(|x| x.sin()).collect();
    let global = solve_coeffs(&samples, BoundaryCondition::Neumann, &axis)?;
    let solver = LineSolver::new(&axis, BoundaryCondition::Neumann, closure, patches)?;
    let mut local = vec![0.0; solver.coeffs_per_line()];
    solver.solve_line(&samples, &mut local);
    let scale = global.eta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if solver.is_serial() {
        let e = local.iter().zip(&global.eta).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        return Ok(e / scale);
    }
    let m = solver.layout().m();
    let mut err: f64 = 0.0;
    for l in 0..solver.layout().patches() {
        for q in 0..m + 3 {
            err = err.max((local[l * (m + 3) + q] - global.eta[l * m + q]).abs());
        }
    }
    Ok(err / scale)
}
