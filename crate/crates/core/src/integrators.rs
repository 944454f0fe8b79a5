//! Time stepping for `f_t + (hbar k / m) . grad_x f = Theta_V[f]`.
//!
//! Free transport is solved exactly by the characteristic shift
//! `A_t: (x, k) -> (x - hbar k t / m, k)`; the schemes below combine shifted
//! fields with evaluations of `Theta`. Past `Theta` fields are stored unshifted
//! and shifted when used.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};
use crate::field::StateField;
use crate::grid::PhaseGrid;
use crate::par_spline::{ClosureKind, LineSolver, Workers};
use crate::psido::ThetaOperator;
use crate::spline::BoundaryCondition;

/// Exact free transport on a fixed grid.
pub trait Transport {
    /// `fields[i].0 ∘ A_{fields[i].1}` for every pair, computed in one sweep.
    fn shift(&self, fields: &[(&[f64], f64)]) -> Result<Vec<Vec<f64>>>;
}

/// Spline-based characteristic shifts, optionally patch-decomposed in x.
pub struct Advector {
    grid: PhaseGrid,
    solvers: Vec<LineSolver>,
    workers: Workers,
    messages: AtomicUsize,
}

impl Advector {
    pub fn new(
        grid: &PhaseGrid,
        bc: BoundaryCondition,
        closure: ClosureKind,
        patches: usize,
        workers: Workers,
    ) -> Result<Self> {
        let solvers =
            grid.x_axes().iter().map(|a| LineSolver::new(a, bc, closure, patches)).collect::<Result<Vec<_>>>()?;
        Ok(Self { grid: grid.clone(), solvers, workers, messages: AtomicUsize::new(0) })
    }

    /// Serial spline with Neumann ends.
    pub fn serial(grid: &PhaseGrid) -> Result<Self> {
        Self::new(grid, BoundaryCondition::Neumann, ClosureKind::Serial, 1, Workers::Sequential)
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    /// Junction messages sent so far.
    pub fn messages_sent(&self) -> usize {
        self.messages.load(Ordering::Relaxed)
    }

    fn shift_axis(&self, a: usize, fields: &mut [Vec<f64>], times: &[f64]) -> Result<()> {
        let grid = &self.grid;
        let solver = &self.solvers[a];
        let np = grid.x_axes()[a].len();
        let nk = grid.nk_total();
        let stride = grid.x_stride(a) * nk;
        let h = grid.x_axes()[a].spacing();
        let speed = grid.hbar() / (grid.mass() * h);
        let k_axis = &grid.k_axes()[a];
        let k_of: Vec<f64> = (0..nk).map(|j| k_axis.point(grid.k_multi(j)[a])).collect();
        // line starts: every flat index whose x_a coordinate is 0
        let block = np * stride;
        let starts: Vec<usize> =
            (0..grid.len() / block).flat_map(|o| (0..stride).map(move |r| o * block + r)).collect();
        let n_lines = starts.len() * fields.len();
        let mut samples = Vec::with_capacity(n_lines * np);
        for f in fields.iter() {
            for &s in &starts {
                samples.extend((0..np).map(|i| f[s + i * stride]));
            }
        }
        let (coeffs, sent) = solver.solve_lines(&samples, n_lines, self.workers)?;
        self.messages.fetch_add(sent, Ordering::Relaxed);
        let cpl = solver.coeffs_per_line();
        for (fi, f) in fields.iter_mut().enumerate() {
            for (li, &s) in starts.iter().enumerate() {
                let c = &coeffs[(fi * starts.len() + li) * cpl..][..cpl];
                let shift = speed * k_of[s % nk] * times[fi];
                for i in 0..np {
                    f[s + i * stride] = solver.eval(c, i as f64 - shift);
                }
            }
        }
        Ok(())
    }
}

impl Transport for Advector {
    fn shift(&self, fields: &[(&[f64], f64)]) -> Result<Vec<Vec<f64>>> {
        for (f, _) in fields {
            if f.len() != self.grid.len() {
                return Err(Error::ShapeMismatch { expected: self.grid.shape(), got: vec![f.len()] });
            }
        }
        let mut out: Vec<Vec<f64>> = fields.iter().map(|(f, _)| f.to_vec()).collect();
        let times: Vec<f64> = fields.iter().map(|(_, t)| *t).collect();
        for a in 0..self.grid.dim() {
            self.shift_axis(a, &mut out, &times)?;
        }
        Ok(out)
    }
}

/// `f ∘ A_tau`.
pub fn advect(f: &StateField, transport: &dyn Transport, tau: f64) -> Result<StateField> {
    let mut out = transport.shift(&[(&f.values, tau)])?;
    Ok(StateField { values: out.pop().unwrap(), shape: f.shape.clone(), time: f.time + tau })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    Lpc1,
    Lapc2,
    Lapc3,
    /// Strang splitting.
    Strang,
}

impl Scheme {
    /// Past `Theta` evaluations the scheme needs.
    pub fn history_depth(self) -> usize {
        match self {
            Scheme::Lapc2 => 1,
            Scheme::Lapc3 => 2,
            _ => 0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Lpc1 => "lpc1",
            Scheme::Lapc2 => "lapc2",
            Scheme::Lapc3 => "lapc3",
            Scheme::Strang => "os",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lpc1" => Ok(Scheme::Lpc1),
            "lapc2" => Ok(Scheme::Lapc2),
            "lapc3" => Ok(Scheme::Lapc3),
            "os" | "strang" => Ok(Scheme::Strang),
            other => Err(Error::config(format!("unknown scheme `{other}` (lpc1, lapc2, lapc3, os)"))),
        }
    }
}

/// Work done by one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepCost {
    /// Batched interpolation sweeps.
    pub sweeps: usize,
    /// Fields shifted across all sweeps.
    pub shifted_fields: usize,
    pub theta_evals: usize,
}

/// Past `Theta[f^{n-1}]`, `Theta[f^{n-2}]`, most recent first.
#[derive(Clone, Debug, Default)]
pub struct SchemeHistory {
    theta: VecDeque<Vec<f64>>,
    capacity: usize,
}

impl SchemeHistory {
    pub fn new(capacity: usize) -> Self {
        Self { theta: VecDeque::with_capacity(capacity), capacity }
    }

    pub fn depth(&self) -> usize {
        self.theta.len()
    }

    /// `Theta[f^{n-j}]`, `j >= 1`.
    pub fn get(&self, j: usize) -> Option<&[f64]> {
        self.theta.get(j - 1).map(Vec::as_slice)
    }

    pub fn push(&mut self, theta: Vec<f64>) {
        if self.capacity == 0 {
            return;
        }
        if self.theta.len() == self.capacity {
            self.theta.pop_back();
        }
        self.theta.push_front(theta);
    }

    fn require(&self, needed: usize) -> Result<()> {
        if self.theta.len() < needed {
            return Err(Error::BootstrapRequired { needed, available: self.theta.len() });
        }
        Ok(())
    }
}

/// A step result with `Theta[f^n]` for the history.
#[derive(Clone, Debug)]
pub struct StepOutput {
    pub field: StateField,
    pub theta: Vec<f64>,
    pub cost: StepCost,
}

fn combine(base: &[f64], terms: &[(f64, &[f64])]) -> Vec<f64> {
    let mut out = base.to_vec();
    for (c, v) in terms {
        for (o, x) in out.iter_mut().zip(v.iter()) {
            *o += c * x;
        }
    }
    out
}

fn finish(f: &StateField, values: Vec<f64>, tau: f64) -> StateField {
    StateField { values, shape: f.shape.clone(), time: f.time + tau }
}

fn pure_transport(f: &StateField, transport: &dyn Transport, tau: f64) -> Result<StepOutput> {
    let field = advect(f, transport, tau)?;
    Ok(StepOutput {
        field,
        theta: vec![0.0; f.len()],
        cost: StepCost { sweeps: 1, shifted_fields: 1, theta_evals: 0 },
    })
}

/// One-stage Lawson predictor-corrector.
pub fn lpc1_step(f: &StateField, transport: &dyn Transport, theta: &dyn ThetaOperator, tau: f64) -> Result<StepOutput> {
    if theta.is_zero() {
        return pure_transport(f, transport, tau);
    }
    let th = theta.apply(&f.values)?;
    let mut s = transport.shift(&[(&f.values, tau), (&th, tau)])?;
    let b = s.pop().unwrap();
    let a = s.pop().unwrap();
    let pred = combine(&a, &[(tau, &b)]);
    let tp = theta.apply(&pred)?;
    let corr = combine(&a, &[(0.5 * tau, &tp), (0.5 * tau, &b)]);
    Ok(StepOutput {
        field: finish(f, corr, tau),
        theta: th,
        cost: StepCost { sweeps: 1, shifted_fields: 2, theta_evals: 2 },
    })
}

/// Two-stage Lawson-Adams predictor-corrector; needs `Theta[f^{n-1}]`.
pub fn lapc2_step(
    f: &StateField,
    history: &SchemeHistory,
    transport: &dyn Transport,
    theta: &dyn ThetaOperator,
    tau: f64,
) -> Result<StepOutput> {
    history.require(1)?;
    if theta.is_zero() {
        return pure_transport(f, transport, tau);
    }
    let th = theta.apply(&f.values)?;
    let mut s = transport.shift(&[(&f.values, tau), (&th, tau), (history.get(1).unwrap(), 2.0 * tau)])?;
    let c = s.pop().unwrap();
    let b = s.pop().unwrap();
    let a = s.pop().unwrap();
    let pred = combine(&a, &[(1.5 * tau, &b), (-0.5 * tau, &c)]);
    let tp = theta.apply(&pred)?;
    let corr = combine(&a, &[(5.0 / 12.0 * tau, &tp), (8.0 / 12.0 * tau, &b), (-1.0 / 12.0 * tau, &c)]);
    Ok(StepOutput {
        field: finish(f, corr, tau),
        theta: th,
        cost: StepCost { sweeps: 1, shifted_fields: 3, theta_evals: 2 },
    })
}

/// Three-stage Lawson-Adams predictor-corrector; needs `Theta[f^{n-1}]`, `Theta[f^{n-2}]`.
pub fn lapc3_step(
    f: &StateField,
    history: &SchemeHistory,
    transport: &dyn Transport,
    theta: &dyn ThetaOperator,
    tau: f64,
) -> Result<StepOutput> {
    history.require(2)?;
    if theta.is_zero() {
        return pure_transport(f, transport, tau);
    }
    let th = theta.apply(&f.values)?;
    let mut s = transport.shift(&[
        (&f.values, tau),
        (&th, tau),
        (history.get(1).unwrap(), 2.0 * tau),
        (history.get(2).unwrap(), 3.0 * tau),
    ])?;
    let d = s.pop().unwrap();
    let c = s.pop().unwrap();
    let b = s.pop().unwrap();
    let a = s.pop().unwrap();
    let pred = combine(&a, &[(23.0 / 12.0 * tau, &b), (-16.0 / 12.0 * tau, &c), (5.0 / 12.0 * tau, &d)]);
    let tp = theta.apply(&pred)?;
    let corr = combine(
        &a,
        &[(9.0 / 24.0 * tau, &tp), (19.0 / 24.0 * tau, &b), (-5.0 / 24.0 * tau, &c), (1.0 / 24.0 * tau, &d)],
    );
    Ok(StepOutput {
        field: finish(f, corr, tau),
        theta: th,
        cost: StepCost { sweeps: 1, shifted_fields: 4, theta_evals: 2 },
    })
}

/// Half shift, explicit full step of `Theta`, half shift.
pub fn strang_step(f: &StateField, transport: &dyn Transport, theta: &dyn ThetaOperator, tau: f64) -> Result<StepOutput> {
    let h = transport.shift(&[(&f.values, 0.5 * tau)])?.pop().unwrap();
    let (g, evals) = if theta.is_zero() {
        (h, 0)
    } else {
        let th = theta.apply(&h)?;
        (combine(&h, &[(tau, &th)]), 1)
    };
    let out = transport.shift(&[(&g, 0.5 * tau)])?.pop().unwrap();
    Ok(StepOutput {
        field: finish(f, out, tau),
        theta: Vec::new(),
        cost: StepCost { sweeps: 2, shifted_fields: 2, theta_evals: evals },
    })
}

/// Run the LPC1 start-up steps a multistep scheme needs. Returns the filled
/// history and the state after those steps.
pub fn bootstrap(
    scheme: Scheme,
    f0: &StateField,
    transport: &dyn Transport,
    theta: &dyn ThetaOperator,
    tau: f64,
) -> Result<(SchemeHistory, StateField)> {
    let depth = scheme.history_depth();
    let mut history = SchemeHistory::new(depth);
    let mut f = f0.clone();
    for _ in 0..depth {
        let out = lpc1_step(&f, transport, theta, tau)?;
        history.push(out.theta);
        f = out.field;
    }
    Ok((history, f))
}

/// Drives a scheme step by step, bootstrapping multistep schemes with LPC1.
#[derive(Clone, Debug)]
pub struct Stepper {
    pub scheme: Scheme,
    pub tau: f64,
    history: SchemeHistory,
}

impl Stepper {
    pub fn new(scheme: Scheme, tau: f64) -> Self {
        Self { scheme, tau, history: SchemeHistory::new(scheme.history_depth()) }
    }

    pub fn history(&self) -> &SchemeHistory {
        &self.history
    }

    pub fn step(&mut self, f: &StateField, transport: &dyn Transport, theta: &dyn ThetaOperator) -> Result<(StateField, StepCost)> {
        let tau = self.tau;
        let need = self.scheme.history_depth();
        let out = if self.history.depth() < need {
            lpc1_step(f, transport, theta, tau)?
        } else {
            match self.scheme {
                Scheme::Lpc1 => lpc1_step(f, transport, theta, tau)?,
                Scheme::Lapc2 => lapc2_step(f, &self.history, transport, theta, tau)?,
                Scheme::Lapc3 => lapc3_step(f, &self.history, transport, theta, tau)?,
                Scheme::Strang => strang_step(f, transport, theta, tau)?,
            }
        };
        if need > 0 {
            self.history.push(out.theta);
        }
        Ok((out.field, out.cost))
    }
}
