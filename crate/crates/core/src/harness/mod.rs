//! Experiment runner: builds the grid, initial data, reference and operators
//! from a [`RunConfig`], runs the time loop and reports metrics.

pub mod config;

use std::io::Write;
use std::path::Path;

pub use config::{parse_closure, parse_key_values, RunConfig, ThetaMethod};

use crate::error::{Error, Result};
use crate::field::StateField;
use crate::grid::PhaseGrid;
use crate::integrators::{Advector, Stepper};
use crate::metrics::ErrorSeries;
use crate::par_spline::ClosureKind;
use crate::problems::{
    free_gaussian_exact, harmonic_exact, harmonic_initial, hydrogen_1s_wigner, sine_patch_error, ProblemKind,
};
use crate::psido::{LocalGradient, Potential, PsmOperator, QuadratureTheta, ThetaOperator, ZeroTheta};

/// Grid points above which a run counts as heavy.
pub const HEAVY_POINTS: usize = 2_000_000;
/// Point updates (points x steps) above which a run counts as heavy.
pub const HEAVY_UPDATES: f64 = 4e9;

/// Rough work estimate for a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostEstimate {
    pub points: usize,
    pub steps: usize,
    pub point_updates: f64,
    /// Single-core wall time guess.
    pub seconds: f64,
}

impl CostEstimate {
    pub fn is_heavy(&self) -> bool {
        self.points > HEAVY_POINTS || self.point_updates > HEAVY_UPDATES
    }
}

impl std::fmt::Display for CostEstimate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} grid points x {} steps = {:.2e} point updates (~{:.0} s on one core)",
            self.points, self.steps, self.point_updates, self.seconds
        )
    }
}

pub fn estimate_cost(cfg: &RunConfig) -> CostEstimate {
    let d = cfg.dim() as i32;
    let points = if cfg.problem.kind == ProblemKind::SineSpline { cfg.nx } else { cfg.nx.pow(d as u32) * cfg.nk.pow(d as u32) };
    let steps = if cfg.problem.kind == ProblemKind::SineSpline { 0 } else { cfg.steps() };
    let point_updates = points as f64 * steps.max(1) as f64;
    // two spline shifts and two spectral applications per point and step
    let per_update = 4e-8 * (1.0 + (cfg.nk as f64).log2() / 6.0) * d as f64;
    CostEstimate { points, steps, point_updates, seconds: point_updates * per_update }
}

/// Refuse heavy runs unless `allow_heavy` is set.
pub fn check_heavy(cfg: &RunConfig) -> Result<CostEstimate> {
    let est = estimate_cost(cfg);
    if est.is_heavy() && !cfg.allow_heavy {
        return Err(Error::config(format!("heavy run refused: {est}; pass --allow-heavy to run it anyway")));
    }
    Ok(est)
}

/// Initial state, potential and exact solution of one configured problem.
pub struct Experiment {
    pub grid: PhaseGrid,
    pub f0: StateField,
    pub potential: Option<Potential>,
    reference: Option<Box<dyn Fn(f64) -> Vec<f64>>>,
}

impl Experiment {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = cfg.grid()?;
        let (hbar, m) = (cfg.hbar, cfg.mass);
        let p = &cfg.problem;
        Ok(match p.kind {
            ProblemKind::FreeAdvection2D => {
                let (a, k0) = (p.get("a")?, p.get("k0")?);
                let g = grid.clone();
                let exact = move |t: f64| {
                    StateField::from_fn(&g, t, |x, k| free_gaussian_exact(x[0], k[0], t, a, k0, hbar, m)).values
                };
                let f0 = StateField::from_values(&grid, exact(0.0), 0.0)?;
                Self { grid, f0, potential: None, reference: Some(Box::new(exact)) }
            }
            ProblemKind::Harmonic2D => {
                let omega = p.get("omega")?;
                let g = grid.clone();
                let exact = move |t: f64| {
                    StateField::from_fn(&g, t, |x, k| harmonic_exact(x[0], k[0], t, omega, hbar, m, harmonic_initial))
                        .values
                };
                let f0 = StateField::from_values(&grid, exact(0.0), 0.0)?;
                Self { grid, f0, potential: Some(Potential::harmonic(m * omega)), reference: Some(Box::new(exact)) }
            }
            ProblemKind::SingularCoulomb => {
                let f0 = StateField::from_fn(&grid, 0.0, |x, k| harmonic_initial(x[0], k[0]));
                let strength = p.get("strength")?;
                let v = match p.params.get("soft") {
                    Some(&eps) if eps > 0.0 => Potential::soft_coulomb(strength, eps),
                    _ => Potential::coulomb(strength, 1).with_policy(cfg.policy),
                };
                Self { grid, f0, potential: Some(v), reference: None }
            }
            ProblemKind::Hydrogen1s => {
                let n_y = p.get("n_y")?;
                if n_y < 1.0 || n_y.fract() != 0.0 {
                    return Err(Error::config(format!("n_y must be a positive integer, got {n_y}")));
                }
                let f0 = hydrogen_1s_wigner(&grid, n_y as usize)?;
                let v = Potential::coulomb(p.get("strength").unwrap_or(1.0), 3).with_policy(cfg.policy);
                let stationary = f0.values.clone();
                Self { grid, f0, potential: Some(v), reference: Some(Box::new(move |_| stationary.clone())) }
            }
            ProblemKind::SineSpline => return Err(Error::config("the sine test has no phase-space state")),
        })
    }

    pub fn reference(&self, t: f64) -> Option<Vec<f64>> {
        self.reference.as_ref().map(|r| r(t))
    }

    pub fn theta(&self, method: ThetaMethod) -> Result<Box<dyn ThetaOperator>> {
        let Some(v) = &self.potential else { return Ok(Box::new(ZeroTheta)) };
        Ok(match method {
            ThetaMethod::Psm => Box::new(PsmOperator::new(v, &self.grid)?),
            ThetaMethod::Local => Box::new(LocalGradient::new(v, &self.grid)?),
            ThetaMethod::Quadrature => Box::new(QuadratureTheta { potential: v.clone(), grid: self.grid.clone() }),
        })
    }

    pub fn advector(&self, cfg: &RunConfig) -> Result<Advector> {
        Advector::new(&self.grid, cfg.boundary, cfg.closure, cfg.patches, cfg.worker_mode())
    }
}

fn write_series(series: &ErrorSeries, path: &Path) -> Result<()> {
    let io = |source| Error::Io { path: path.to_path_buf(), source };
    let mut file = std::fs::File::create(path).map_err(io)?;
    series.write_csv(&mut file).map_err(io)?;
    file.flush().map_err(io)
}

fn sine_series(cfg: &RunConfig) -> Result<ErrorSeries> {
    let closure = if cfg.patches == 1 { ClosureKind::Serial } else { cfg.closure };
    let err = sine_patch_error(cfg.nx, cfg.patches, closure)?;
    let mut series = ErrorSeries::default();
    series.push(0.0, err, f64::NAN, f64::NAN, f64::NAN);
    Ok(series)
}

/// Run one experiment, writing the CSV when `cfg.out` is set.
///
/// A non-finite state or `max|f| > blowup_factor * max|f0|` stops the run with
/// [`Error::Unstable`]; the rows recorded so far are still written.
pub fn run_experiment(cfg: &RunConfig) -> Result<ErrorSeries> {
    check_heavy(cfg)?;
    let (series, outcome) = if cfg.problem.kind == ProblemKind::SineSpline {
        (sine_series(cfg)?, Ok(()))
    } else {
        let exp = Experiment::new(cfg)?;
        let theta = exp.theta(cfg.theta)?;
        let adv = exp.advector(cfg)?;
        let mut series = ErrorSeries::default();
        let outcome = time_loop(cfg, &exp, theta.as_ref(), &adv, &mut series);
        (series, outcome)
    };
    if let Some(path) = &cfg.out {
        write_series(&series, path)?;
    }
    outcome.map(|_| series)
}

fn time_loop(
    cfg: &RunConfig,
    exp: &Experiment,
    theta: &dyn ThetaOperator,
    adv: &Advector,
    series: &mut ErrorSeries,
) -> Result<()> {
    let grid = &exp.grid;
    let f0 = &exp.f0;
    let limit = cfg.blowup_factor * f0.max_abs();
    let steps = cfg.steps();
    series.record(f0, exp.reference(0.0).as_deref(), &f0.values, grid)?;
    let mut stepper = Stepper::new(cfg.scheme, cfg.tau);
    let mut f = f0.clone();
    for n in 1..=steps {
        f = stepper.step(&f, adv, theta)?.0;
        f.time = n as f64 * cfg.tau;
        let reason = if !f.all_finite() {
            Some("non-finite values".to_string())
        } else if f.max_abs() > limit {
            Some(format!("max|f| = {:.3e} exceeds {} x max|f0|", f.max_abs(), cfg.blowup_factor))
        } else {
            None
        };
        if let Some(reason) = reason {
            return Err(Error::Unstable { step: n, time: f.time, reason });
        }
        if n % cfg.output_every == 0 || n == steps {
            series.record(&f, exp.reference(f.time).as_deref(), &f0.values, grid)?;
        }
    }
    Ok(())
}

/// Parameter varied by a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    Dx,
    Nnb,
    Nk,
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dx" => Ok(SweepParam::Dx),
            "nnb" => Ok(SweepParam::Nnb),
            "nk" => Ok(SweepParam::Nk),
            other => Err(Error::config(format!("cannot sweep `{other}` (dx, nnb, nk)"))),
        }
    }
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Dx => "dx",
            SweepParam::Nnb => "nnb",
            SweepParam::Nk => "nk",
        }
    }

    /// `base` with this parameter set to `value`.
    pub fn configure(self, base: &RunConfig, value: f64) -> Result<RunConfig> {
        let mut cfg = base.clone();
        let whole = |v: f64| {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::config(format!("{} must be a positive integer, got {v}", self.name())))
            }
        };
        match self {
            SweepParam::Dx => cfg.set_dx(value)?,
            SweepParam::Nnb => cfg.closure = ClosureKind::Pmbc { n_nb: whole(value)? },
            SweepParam::Nk => cfg.nk = whole(value)?,
        }
        cfg.out = None;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One line of a convergence table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub param: f64,
    pub eps_inf: f64,
    pub eps_2: f64,
    /// Least-squares slope of `log eps_inf` against `log param` over this and
    /// all earlier rows; `None` for the first row.
    pub order: Option<f64>,
}

/// Least-squares slope of `log errors` against `log params`.
pub fn fit_order(params: &[f64], errors: &[f64]) -> Option<f64> {
    if params.len() < 2 || params.len() != errors.len() {
        return None;
    }
    let xs: Vec<f64> = params.iter().map(|p| p.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    slope.is_finite().then_some(slope)
}

/// Rows with running order fits from `(param, eps_inf, eps_2)` triples.
pub fn tabulate(points: &[(f64, f64, f64)]) -> Vec<ConvergenceRow> {
    let params: Vec<f64> = points.iter().map(|p| p.0).collect();
    let errs: Vec<f64> = points.iter().map(|p| p.1).collect();
    points
        .iter()
        .enumerate()
        .map(|(i, &(param, eps_inf, eps_2))| ConvergenceRow {
            param,
            eps_inf,
            eps_2,
            order: fit_order(&params[..=i], &errs[..=i]),
        })
        .collect()
}

/// Run `base` once per value and tabulate the final errors.
pub fn convergence_table(base: &RunConfig, vary: SweepParam, values: &[f64]) -> Result<Vec<ConvergenceRow>> {
    let mut points = Vec::with_capacity(values.len());
    for &v in values {
        let series = run_experiment(&vary.configure(base, v)?)?;
        let last = series.len() - 1;
        points.push((v, series.eps_inf[last], series.eps2[last]));
    }
    Ok(tabulate(&points))
}

/// CSV with columns `param,eps_inf,eps_2,order`; the order is blank when undefined.
pub fn write_table(rows: &[ConvergenceRow], vary: SweepParam, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "{},eps_inf,eps_2,order", vary.name())?;
    for r in rows {
        let order = r.order.map(|o| format!("{o:.6}")).unwrap_or_default();
        writeln!(w, "{},{:.16e},{:.16e},{}", r.param, r.eps_inf, r.eps_2, order)?;
    }
    Ok(())
}
