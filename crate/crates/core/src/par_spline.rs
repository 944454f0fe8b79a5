//! Patch-decomposed spline solves.
//!
//! A line is cut into `p` patches of `M` intervals. Each patch solves its own
//! clamped system; the end slopes at a junction are assembled from two partial
//! sums, one computed by each neighbour, so only one scalar per junction and
//! direction crosses a patch boundary.

use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::grid::{make_patch_layout, Axis, PatchLayout};
use crate::spline::{eval_index, BoundaryCondition, EndKind, LuFactors, SplineCoeffs, INDEX_EPS};

/// Half-width of the finite-difference junction stencil.
pub const CLS_HBC_WIDTH: usize = 10;

const CLS_HBC_MINUS: [f64; CLS_HBC_WIDTH] = [
    0.2214309755e-5,
    -1.771447804e-5,
    7.971515119e-5,
    -3.011461267e-4,
    1.113797807e-3,
    -4.145187862e-3,
    0.01546473933,
    -0.05771376946,
    0.2153903385,
    -0.8038475846,
];

/// Finite-difference derivative stencil for junction slopes, unit spacing.
#[derive(Clone, Debug, PartialEq)]
pub struct ClsHbcStencil {
    /// Weights of `phi(x_{i-10}) .. phi(x_{i-1})`.
    pub weights_minus: [f64; CLS_HBC_WIDTH],
    /// Weights of `phi(x_{i+10}) .. phi(x_{i+1})`, mirrored from `weights_minus`.
    pub weights_plus: [f64; CLS_HBC_WIDTH],
}

impl Default for ClsHbcStencil {
    fn default() -> Self {
        Self { weights_minus: CLS_HBC_MINUS, weights_plus: CLS_HBC_MINUS.map(|w| -w) }
    }
}

impl ClsHbcStencil {
    /// Partial sum over the left samples `phi(x_{i-10})..phi(x_{i-1})`.
    pub fn left_partial(&self, left: &[f64], h: f64) -> f64 {
        self.weights_minus.iter().zip(left).map(|(w, v)| w * v).sum::<f64>() / h
    }

    /// Partial sum over the right samples `phi(x_{i+1})..phi(x_{i+10})`.
    pub fn right_partial(&self, right: &[f64], h: f64) -> f64 {
        // weights_plus[j] multiplies the sample at distance 10 - j
        let mut s = 0.0;
        for (d, v) in right.iter().enumerate() {
            s += self.weights_plus[CLS_HBC_WIDTH - 1 - d] * v;
        }
        s / h
    }
}

/// Junction slope from 10 samples on each side of a node on a grid of spacing `h`.
pub fn cls_hbc_derivative(left_samples: &[f64], right_samples: &[f64], h: f64) -> Result<f64> {
    let available = left_samples.len().min(right_samples.len());
    if available < CLS_HBC_WIDTH {
        return Err(Error::Stencil { needed: CLS_HBC_WIDTH, available });
    }
    let st = ClsHbcStencil::default();
    let left = &left_samples[left_samples.len() - CLS_HBC_WIDTH..];
    let right = &right_samples[..CLS_HBC_WIDTH];
    Ok(st.left_partial(left, h) + st.right_partial(right, h))
}

/// Which global inverse the closure rows were taken from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PmbcVariant {
    /// Interior junction of a globally clamped line.
    Clamped,
    /// Interior junction of a globally natural line.
    Natural,
    /// Slope at a natural global end (`junction_index` 0 or `N`).
    NaturalEnd,
}

/// Truncated inverse-row closure for one junction.
#[derive(Clone, Debug, PartialEq)]
pub struct PmbcClosure {
    pub n_nb: usize,
    pub c0: f64,
    /// `c_minus[j-1]` multiplies `phi(x_{lM-j})`.
    pub c_minus: Vec<f64>,
    /// `c_plus[j-1]` multiplies `phi(x_{lM+j})`.
    pub c_plus: Vec<f64>,
    pub junction_index: usize,
    pub variant: PmbcVariant,
}

impl PmbcClosure {
    /// Partial held by the patch left of the junction; `left[j]` is `phi(x_{lM-n_nb+j})`,
    /// the last entry being the junction sample.
    pub fn left_partial(&self, left: &[f64]) -> f64 {
        let n = left.len() - 1;
        let mut s = 0.5 * self.c0 * left[n];
        for (j, c) in self.c_minus.iter().enumerate() {
            s += c * left[n - 1 - j];
        }
        s
    }

    /// Partial held by the patch right of the junction; `right[0]` is the junction sample.
    pub fn right_partial(&self, right: &[f64]) -> f64 {
        let mut s = 0.5 * self.c0 * right[0];
        for (j, c) in self.c_plus.iter().enumerate() {
            s += c * right[j + 1];
        }
        s
    }

    /// Full slope at a natural global end from samples of the end patch.
    /// `samples[j]` is `phi` at distance `j` from the end.
    pub fn end_value(&self, samples: &[f64]) -> f64 {
        let c = if self.junction_index == 0 { &self.c_plus } else { &self.c_minus };
        let mut s = self.c0 * samples[0];
        for (j, cj) in c.iter().enumerate() {
            s += cj * samples[j + 1];
        }
        s
    }
}

/// Build the closure at global node `junction` of a line with `m * p` intervals.
///
/// `global` selects the end rows of the global matrix whose inverse rows are
/// truncated. With natural ends, `junction` 0 or `N` gives the end-slope
/// conversion instead of a junction closure.
pub fn build_pmbc_closure(
    m: usize,
    p: usize,
    n_nb: usize,
    junction: usize,
    global: EndKind,
    h: f64,
) -> Result<PmbcClosure> {
    let lu = LuFactors::new(m * p, h, global, global)?;
    build_pmbc_closure_with(&lu, m, n_nb, junction)
}

fn build_pmbc_closure_with(lu: &LuFactors, m: usize, n_nb: usize, junction: usize) -> Result<PmbcClosure> {
    let n = lu.intervals();
    let h = lu.spacing();
    if n_nb == 0 || n_nb > m {
        return Err(Error::config(format!("n_nb = {n_nb} must lie in 1..={m} (patch size M)")));
    }
    if junction > n {
        return Err(Error::config(format!("junction {junction} outside 0..={n}")));
    }
    let natural = lu.end_kinds().0 == EndKind::SecondDifference;
    let is_end = junction == 0 || junction == n;
    if is_end && !natural {
        return Err(Error::config("clamped lines take their end slopes from the boundary condition"));
    }
    // Rows of eta_{lM-1} and eta_{lM+1}; storage is shifted by one.
    let b_lo = lu.inverse_row(junction);
    let b_hi = lu.inverse_row(junction + 2);
    let c = |q: usize| (b_hi[q + 1] - b_lo[q + 1]) / (2.0 * h);
    let c0 = c(junction);
    let c_minus: Vec<f64> = (1..=n_nb).map(|j| if j <= junction { c(junction - j) } else { 0.0 }).collect();
    let c_plus: Vec<f64> = (1..=n_nb).map(|j| if junction + j <= n { c(junction + j) } else { 0.0 }).collect();
    let variant = match (is_end, natural) {
        (true, _) => PmbcVariant::NaturalEnd,
        (false, true) => PmbcVariant::Natural,
        (false, false) => PmbcVariant::Clamped,
    };
    Ok(PmbcClosure { n_nb, c0, c_minus, c_plus, junction_index: junction, variant })
}

/// Side of the junction a partial sum was computed on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    FromLeft = 0,
    FromRight = 1,
}

/// The single value a patch sends to a neighbour for one junction and one line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JunctionMessage {
    pub junction_index: usize,
    pub direction: Direction,
    pub partial_sum: f64,
}

impl JunctionMessage {
    pub const WIRE_LEN: usize = 13;

    /// Little-endian `{u32 junction, u8 direction, f64 partial}`.
    pub fn encode(&self) -> [u8; Self::WIRE_LEN] {
        let mut out = [0u8; Self::WIRE_LEN];
        out[..4].copy_from_slice(&(self.junction_index as u32).to_le_bytes());
        out[4] = self.direction as u8;
        out[5..].copy_from_slice(&self.partial_sum.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != Self::WIRE_LEN {
            return Err(Error::Size(format!("junction message is {} bytes, expected {}", bytes.len(), Self::WIRE_LEN)));
        }
        let junction_index = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
        let direction = match bytes[4] {
            0 => Direction::FromLeft,
            1 => Direction::FromRight,
            b => return Err(Error::Size(format!("bad direction byte {b}"))),
        };
        let partial_sum = f64::from_le_bytes(bytes[5..].try_into().unwrap());
        Ok(Self { junction_index, direction, partial_sum })
    }
}

/// Shared boundary value `phi_R^(l) = phi_L^(l+1)` from the two partials.
pub fn pmbc_boundary_value(closure: &PmbcClosure, left: &JunctionMessage, right: &JunctionMessage) -> Result<f64> {
    junction_value(closure.junction_index, left, right)
}

fn junction_value(junction: usize, left: &JunctionMessage, right: &JunctionMessage) -> Result<f64> {
    for msg in [left, right] {
        if msg.junction_index != junction {
            return Err(Error::JunctionMismatch { expected: junction, got: msg.junction_index });
        }
    }
    if left.direction != Direction::FromLeft || right.direction != Direction::FromRight {
        return Err(Error::config(format!("partials at junction {junction} arrived with swapped directions")));
    }
    Ok(left.partial_sum + right.partial_sum)
}

/// Clamped solve of one patch, `M+1` samples and two end slopes.
pub fn solve_patch_coeffs(patch_samples: &[f64], phi_l: f64, phi_r: f64, axis: &Axis) -> Result<SplineCoeffs> {
    crate::spline::solve_coeffs(patch_samples, BoundaryCondition::Clamped { left: phi_l, right: phi_r }, axis)
}

/// How the patch junctions are closed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ClosureKind {
    /// One global spline, no decomposition.
    Serial,
    ClsHbc,
    Pmbc { n_nb: usize },
}

/// How patch workers are run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Workers {
    /// All patches in one loop on the calling thread.
    Sequential,
    /// One scoped thread per patch, exchanging messages over channels.
    Threads { timeout: Duration },
}

impl Workers {
    pub fn threads() -> Self {
        Workers::Threads { timeout: Duration::from_secs(30) }
    }
}

#[derive(Clone, Debug)]
enum JunctionClosure {
    Cls(ClsHbcStencil),
    Pmbc(PmbcClosure),
}

#[derive(Clone, Debug)]
enum EndSlope {
    Zero,
    Natural(PmbcClosure),
}

#[derive(Clone, Debug)]
enum Mode {
    Serial(LuFactors),
    Patched { lu: LuFactors, junctions: Vec<JunctionClosure>, left: EndSlope, right: EndSlope },
}

/// Coefficient solver for every line along one axis.
///
/// Closures are computed once here and reused for every line and step.
#[derive(Clone, Debug)]
pub struct LineSolver {
    n: usize,
    h: f64,
    layout: PatchLayout,
    mode: Mode,
}

impl LineSolver {
    /// `global` must be `Neumann` or `Natural`.
    pub fn new(axis: &Axis, global: BoundaryCondition, closure: ClosureKind, patches: usize) -> Result<Self> {
        if axis.is_periodic() {
            return Err(Error::Unsupported("spline lines need a nodal axis".into()));
        }
        let kind = match global {
            BoundaryCondition::Neumann => EndKind::Slope,
            BoundaryCondition::Natural => EndKind::SecondDifference,
            BoundaryCondition::Clamped { .. } => {
                return Err(Error::config("decomposed lines take Neumann or natural global ends"))
            }
        };
        let n = axis.intervals();
        let h = axis.spacing();
        if closure == ClosureKind::Serial {
            let layout = make_patch_layout(axis.len(), 1)?;
            return Ok(Self { n, h, layout, mode: Mode::Serial(LuFactors::new(n, h, kind, kind)?) });
        }
        let layout = make_patch_layout(axis.len(), patches)?;
        let m = layout.m();
        let lu = LuFactors::new(m, h, EndKind::Slope, EndKind::Slope)?;
        let global_lu = match closure {
            ClosureKind::Pmbc { .. } => Some(LuFactors::new(n, h, kind, kind)?),
            _ if kind == EndKind::SecondDifference => Some(LuFactors::new(n, h, kind, kind)?),
            _ => None,
        };
        let mut junctions = Vec::with_capacity(patches.saturating_sub(1));
        for &j in layout.junctions() {
            junctions.push(match closure {
                ClosureKind::ClsHbc => {
                    if m < CLS_HBC_WIDTH {
                        return Err(Error::Stencil { needed: CLS_HBC_WIDTH, available: m });
                    }
                    JunctionClosure::Cls(ClsHbcStencil::default())
                }
                ClosureKind::Pmbc { n_nb } => {
                    JunctionClosure::Pmbc(build_pmbc_closure_with(global_lu.as_ref().unwrap(), m, n_nb, j)?)
                }
                ClosureKind::Serial => unreachable!(),
            });
        }
        let (left, right) = if kind == EndKind::SecondDifference {
            let n_nb = match closure {
                ClosureKind::Pmbc { n_nb } => n_nb,
                _ => m,
            };
            let glu = global_lu.as_ref().unwrap();
            (
                EndSlope::Natural(build_pmbc_closure_with(glu, m, n_nb, 0)?),
                EndSlope::Natural(build_pmbc_closure_with(glu, m, n_nb, n)?),
            )
        } else {
            (EndSlope::Zero, EndSlope::Zero)
        };
        Ok(Self { n, h, layout, mode: Mode::Patched { lu, junctions, left, right } })
    }

    pub fn layout(&self) -> &PatchLayout {
        &self.layout
    }

    pub fn intervals(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn is_serial(&self) -> bool {
        matches!(self.mode, Mode::Serial(_))
    }

    /// Coefficients stored per line: `N+3` serially, `p (M+3)` when patched.
    pub fn coeffs_per_line(&self) -> usize {
        match self.mode {
            Mode::Serial(_) => self.n + 3,
            Mode::Patched { .. } => self.layout.patches() * (self.layout.m() + 3),
        }
    }

    /// Messages exchanged per line and solve.
    pub fn messages_per_line(&self) -> usize {
        match self.mode {
            Mode::Serial(_) => 0,
            Mode::Patched { .. } => 2 * (self.layout.patches() - 1),
        }
    }

    /// Partial that patch `l` sends for its right junction (`l < p-1`).
    fn partial_from_left(&self, k: usize, line: &[f64]) -> f64 {
        let Mode::Patched { junctions, .. } = &self.mode else { unreachable!() };
        let j = self.layout.junctions()[k];
        match &junctions[k] {
            JunctionClosure::Cls(st) => st.left_partial(&line[j - CLS_HBC_WIDTH..j], self.h),
            JunctionClosure::Pmbc(c) => c.left_partial(&line[j - c.n_nb..=j]),
        }
    }

    /// Partial that patch `k+1` sends for its left junction.
    fn partial_from_right(&self, k: usize, line: &[f64]) -> f64 {
        let Mode::Patched { junctions, .. } = &self.mode else { unreachable!() };
        let j = self.layout.junctions()[k];
        match &junctions[k] {
            JunctionClosure::Cls(st) => st.right_partial(&line[j + 1..=j + CLS_HBC_WIDTH], self.h),
            JunctionClosure::Pmbc(c) => c.right_partial(&line[j..=j + c.n_nb]),
        }
    }

    fn end_slopes(&self, l: usize, line: &[f64]) -> (Option<f64>, Option<f64>) {
        let Mode::Patched { left, right, .. } = &self.mode else { unreachable!() };
        let p = self.layout.patches();
        let lv = (l == 0).then(|| match left {
            EndSlope::Zero => 0.0,
            EndSlope::Natural(c) => c.end_value(&line[..=c.n_nb]),
        });
        let rv = (l + 1 == p).then(|| match right {
            EndSlope::Zero => 0.0,
            EndSlope::Natural(c) => {
                let tail: Vec<f64> = line[self.n - c.n_nb..].iter().rev().copied().collect();
                c.end_value(&tail)
            }
        });
        (lv, rv)
    }

    fn solve_patch(&self, l: usize, line: &[f64], phi_l: f64, phi_r: f64, out: &mut [f64]) {
        let Mode::Patched { lu, .. } = &self.mode else { unreachable!() };
        let span = self.layout.span(l);
        lu.solve_into(&line[span], phi_l, phi_r, out);
    }

    /// Solve one line on the calling thread.
    pub fn solve_line(&self, line: &[f64], out: &mut [f64]) {
        debug_assert_eq!(line.len(), self.n + 1);
        match &self.mode {
            Mode::Serial(lu) => lu.solve_into(line, 0.0, 0.0, out),
            Mode::Patched { .. } => {
                let p = self.layout.patches();
                let stride = self.layout.m() + 3;
                let values: Vec<f64> =
                    (0..p - 1).map(|k| self.partial_from_left(k, line) + self.partial_from_right(k, line)).collect();
                for l in 0..p {
                    let (le, re) = self.end_slopes(l, line);
                    let phi_l = le.unwrap_or_else(|| values[l - 1]);
                    let phi_r = re.unwrap_or_else(|| values[l]);
                    self.solve_patch(l, line, phi_l, phi_r, &mut out[l * stride..(l + 1) * stride]);
                }
            }
        }
    }

    /// Evaluate line coefficients at the continuous global index `u`; zero outside `[0, N]`.
    #[inline]
    pub fn eval(&self, coeffs: &[f64], u: f64) -> f64 {
        match self.mode {
            Mode::Serial(_) => eval_index(coeffs, u),
            Mode::Patched { .. } => {
                if !(u >= -INDEX_EPS && u <= self.n as f64 + INDEX_EPS) {
                    return 0.0;
                }
                let m = self.layout.m();
                let l = self.layout.patch_of(u);
                let stride = m + 3;
                eval_index(&coeffs[l * stride..(l + 1) * stride], u - (l * m) as f64)
            }
        }
    }

    /// Solve `n_lines` lines stored contiguously in `samples`. Returns the
    /// coefficient block (line-major) and the number of junction messages sent.
    pub fn solve_lines(&self, samples: &[f64], n_lines: usize, workers: Workers) -> Result<(Vec<f64>, usize)> {
        let np = self.n + 1;
        if samples.len() != n_lines * np {
            return Err(Error::ShapeMismatch { expected: vec![n_lines, np], got: vec![samples.len()] });
        }
        let cpl = self.coeffs_per_line();
        let mut out = vec![0.0; n_lines * cpl];
        let threaded = matches!(workers, Workers::Threads { .. }) && !self.is_serial() && self.layout.patches() > 1;
        if !threaded {
            for (line, block) in samples.chunks_exact(np).zip(out.chunks_exact_mut(cpl)) {
                self.solve_line(line, block);
            }
            return Ok((out, n_lines * self.messages_per_line()));
        }
        let Workers::Threads { timeout } = workers else { unreachable!() };
        let p = self.layout.patches();
        let (senders, receivers): (Vec<Sender<Vec<JunctionMessage>>>, Vec<Receiver<Vec<JunctionMessage>>>) =
            (0..p).map(|_| mpsc::channel()).unzip();
        let blocks: Vec<Result<(Vec<f64>, usize)>> = std::thread::scope(|s| {
            let handles: Vec<_> = receivers
                .into_iter()
                .enumerate()
                .map(|(l, inbox)| {
                    let links = PatchLinks {
                        to_left: (l > 0).then(|| senders[l - 1].clone()),
                        to_right: (l + 1 < p).then(|| senders[l + 1].clone()),
                        inbox,
                    };
                    s.spawn(move || patch_worker(self, l, samples, n_lines, links, timeout))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("patch worker panicked")).collect()
        });
        let stride = self.layout.m() + 3;
        let mut messages = 0;
        for (l, block) in blocks.into_iter().enumerate() {
            let (block, sent) = block?;
            messages += sent;
            for (i, chunk) in block.chunks_exact(stride).enumerate() {
                out[i * cpl + l * stride..i * cpl + (l + 1) * stride].copy_from_slice(chunk);
            }
        }
        Ok((out, messages))
    }
}

/// Channel ends of one patch worker.
pub struct PatchLinks {
    pub to_left: Option<Sender<Vec<JunctionMessage>>>,
    pub to_right: Option<Sender<Vec<JunctionMessage>>>,
    pub inbox: Receiver<Vec<JunctionMessage>>,
}

/// Work of patch `l` for a batch of lines: send partials, wait for the
/// neighbours' partials, then solve. Returns `n_lines * (M+3)` coefficients
/// and the number of messages sent.
pub fn patch_worker(
    solver: &LineSolver,
    l: usize,
    samples: &[f64],
    n_lines: usize,
    links: PatchLinks,
    timeout: Duration,
) -> Result<(Vec<f64>, usize)> {
    let np = solver.n + 1;
    let p = solver.layout.patches();
    let lines = || samples.chunks_exact(np).take(n_lines);
    let mut sent = 0;
    let left_junction = (l > 0).then(|| solver.layout.junctions()[l - 1]);
    let right_junction = (l + 1 < p).then(|| solver.layout.junctions()[l]);
    // own partials are kept for the final sum
    let mut own_left = Vec::new();
    let mut own_right = Vec::new();
    if let Some(j) = left_junction {
        own_left = lines()
            .map(|line| JunctionMessage {
                junction_index: j,
                direction: Direction::FromRight,
                partial_sum: solver.partial_from_right(l - 1, line),
            })
            .collect();
        sent += own_left.len();
        if let Some(tx) = &links.to_left {
            let _ = tx.send(own_left.clone());
        }
    }
    if let Some(j) = right_junction {
        own_right = lines()
            .map(|line| JunctionMessage {
                junction_index: j,
                direction: Direction::FromLeft,
                partial_sum: solver.partial_from_left(l, line),
            })
            .collect();
        sent += own_right.len();
        if let Some(tx) = &links.to_right {
            let _ = tx.send(own_right.clone());
        }
    }
    drop(links.to_left);
    drop(links.to_right);

    let mut from_left: Option<Vec<JunctionMessage>> = None;
    let mut from_right: Option<Vec<JunctionMessage>> = None;
    let deadline = Instant::now() + timeout;
    while (left_junction.is_some() && from_left.is_none()) || (right_junction.is_some() && from_right.is_none()) {
        let missing = if left_junction.is_some() && from_left.is_none() { left_junction } else { right_junction };
        let wait = deadline.saturating_duration_since(Instant::now());
        let batch = match links.inbox.recv_timeout(wait) {
            Ok(b) => b,
            Err(RecvTimeoutError::Timeout) | Err(RecvTimeoutError::Disconnected) => {
                return Err(Error::ExchangeTimeout { junction: missing.unwrap() })
            }
        };
        let Some(first) = batch.first() else { continue };
        match first.direction {
            Direction::FromLeft => {
                let expected = left_junction.ok_or(Error::JunctionMismatch { expected: usize::MAX, got: first.junction_index })?;
                if first.junction_index != expected {
                    return Err(Error::JunctionMismatch { expected, got: first.junction_index });
                }
                from_left = Some(batch);
            }
            Direction::FromRight => {
                let expected =
                    right_junction.ok_or(Error::JunctionMismatch { expected: usize::MAX, got: first.junction_index })?;
                if first.junction_index != expected {
                    return Err(Error::JunctionMismatch { expected, got: first.junction_index });
                }
                from_right = Some(batch);
            }
        }
    }
    for batch in [&from_left, &from_right].into_iter().flatten() {
        if batch.len() != n_lines {
            return Err(Error::Size(format!("expected {n_lines} partials, got {}", batch.len())));
        }
    }

    let stride = solver.layout.m() + 3;
    let mut out = vec![0.0; n_lines * stride];
    for (i, line) in lines().enumerate() {
        let (le, re) = solver.end_slopes(l, line);
        let phi_l = match le {
            Some(v) => v,
            None => junction_value(left_junction.unwrap(), &from_left.as_ref().unwrap()[i], &own_left[i])?,
        };
        let phi_r = match re {
            Some(v) => v,
            None => junction_value(right_junction.unwrap(), &own_right[i], &from_right.as_ref().unwrap()[i])?,
        };
        solver.solve_patch(l, line, phi_l, phi_r, &mut out[i * stride..(i + 1) * stride]);
    }
    Ok((out, sent))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spline::solve_coeffs;
    use crate::testutil::{dense_solve, max_abs};
    use proptest::prelude::*;

    fn sin_axis(n_points: usize) -> (Axis, Vec<f64>) {
        let ax = Axis::nodal(0.0, 8.0, n_points).unwrap();
        let s = ax.points().iter().map(|x| x.sin()).collect();
        (ax, s)
    }

    /// Max relative deviation of patch coefficients from the global Neumann spline.
    fn patch_error(n_points: usize, closure: ClosureKind) -> f64 {
        let (ax, s) = sin_axis(n_points);
        let global = solve_coeffs(&s, BoundaryCondition::Neumann, &ax).unwrap();
        let solver = LineSolver::new(&ax, BoundaryCondition::Neumann, closure, 4).unwrap();
        let mut out = vec![0.0; solver.coeffs_per_line()];
        solver.solve_line(&s, &mut out);
        let m = solver.layout().m();
        let mut err: f64 = 0.0;
        for l in 0..4 {
            for q in 0..m + 3 {
                err = err.max((out[l * (m + 3) + q] - global.eta[l * m + q]).abs());
            }
        }
        err / max_abs(&global.eta)
    }

    #[test]
    fn cls_weights_mirror_and_linear_exactness() {
        let st = ClsHbcStencil::default();
        for j in 0..CLS_HBC_WIDTH {
            assert_eq!(st.weights_plus[j], -st.weights_minus[j]);
        }
        let h = 0.05;
        let a = 1.7;
        let left: Vec<f64> = (1..=10).rev().map(|j| 3.0 - a * j as f64 * h).collect();
        let right: Vec<f64> = (1..=10).map(|j| 3.0 + a * j as f64 * h).collect();
        let d = cls_hbc_derivative(&left, &right, h).unwrap();
        assert!((d - a).abs() <= 1e-10 * a);
        assert!(cls_hbc_derivative(&[2.0; 10], &[2.0; 10], h).unwrap().abs() < 1e-12);
        assert!(matches!(cls_hbc_derivative(&[0.0; 9], &[0.0; 10], h), Err(Error::Stencil { .. })));
    }

    #[test]
    fn cls_cubic_and_sine_derivative() {
        let h = 0.1;
        let q = |x: f64| 0.3 - x + 0.5 * x * x + 0.25 * x * x * x;
        let x0 = 0.4;
        let left: Vec<f64> = (1..=10).rev().map(|j| q(x0 - j as f64 * h)).collect();
        let right: Vec<f64> = (1..=10).map(|j| q(x0 + j as f64 * h)).collect();
        let want = -1.0 + x0 + 0.75 * x0 * x0;
        assert!((cls_hbc_derivative(&left, &right, h).unwrap() - want).abs() <= 1e-6 * want.abs());

        let (ax, s) = sin_axis(161);
        let i = 80;
        let d = cls_hbc_derivative(&s[i - 10..i], &s[i + 1..=i + 10], ax.spacing()).unwrap();
        assert!((d - 4f64.cos()).abs() < 1e-5);
    }

    /// Rebuild the stencil from the exact slope relation of the spline,
    /// closed by fourth-order differences eight nodes away.
    #[test]
    fn cls_weights_match_slope_recursion() {
        let half = 7usize;
        let n = 2 * half + 1;
        // unknown slopes s_{-7..7} as linear functionals of phi_{-10..10}
        let mut weights = vec![0.0; 21];
        let offset = 10i64;
        let idx = |j: i64| (j + offset) as usize;
        let mut basis_rhs = vec![vec![0.0; n]; 21];
        for (r, row_j) in (-(half as i64)..=half as i64).enumerate() {
            basis_rhs[idx(row_j + 1)][r] += 3.0;
            basis_rhs[idx(row_j - 1)][r] -= 3.0;
        }
        // known s_{+-8} enter rows -7 and 7
        let fd = |c: i64| [(c - 2, 1.0 / 12.0), (c - 1, -8.0 / 12.0), (c + 1, 8.0 / 12.0), (c + 2, -1.0 / 12.0)];
        for (k, w) in fd(-8) {
            basis_rhs[idx(k)][0] -= w;
        }
        for (k, w) in fd(8) {
            basis_rhs[idx(k)][n - 1] -= w;
        }
        let mut a = vec![vec![0.0; n]; n];
        for r in 0..n {
            a[r][r] = 4.0;
            if r > 0 {
                a[r][r - 1] = 1.0;
            }
            if r + 1 < n {
                a[r][r + 1] = 1.0;
            }
        }
        for (q, rhs) in basis_rhs.into_iter().enumerate() {
            weights[q] = dense_solve(a.clone(), rhs)[half];
        }
        let st = ClsHbcStencil::default();
        for j in 1..=10 {
            assert!((weights[idx(-(j as i64))] - st.weights_minus[10 - j]).abs() < 1e-10, "j={j}");
            assert!((weights[idx(j as i64)] - st.weights_plus[10 - j]).abs() < 1e-10, "j={j}");
        }
        assert!(weights[idx(0)].abs() < 1e-15);
    }

    #[test]
    fn pmbc_interior_symmetry_and_decay() {
        let c = build_pmbc_closure(40, 4, 26, 80, EndKind::Slope, 0.05).unwrap();
        assert_eq!(c.variant, PmbcVariant::Clamped);
        assert!(c.c0.abs() < 1e-12 * c.c_plus[0].abs());
        for j in 0..26 {
            assert!((c.c_plus[j] + c.c_minus[j]).abs() <= 1e-12 * c.c_plus[0].abs());
        }
        for j in 0..10 {
            let ratio = c.c_plus[j + 1].abs() / c.c_plus[j].abs();
            assert!(ratio < 0.3, "j={j} ratio={ratio}");
        }
    }

    #[test]
    fn pmbc_too_wide() {
        assert!(matches!(build_pmbc_closure(10, 4, 11, 20, EndKind::Slope, 0.1), Err(Error::Config(_))));
        let ax = Axis::nodal(0.0, 1.0, 41).unwrap();
        assert!(LineSolver::new(&ax, BoundaryCondition::Neumann, ClosureKind::Pmbc { n_nb: 11 }, 4).is_err());
        assert!(matches!(
            LineSolver::new(&ax, BoundaryCondition::Neumann, ClosureKind::ClsHbc, 8),
            Err(Error::Stencil { needed: 10, available: 5 })
        ));
    }

    #[test]
    fn pmbc_full_width_matches_global_slope() {
        for (n_points, p) in [(41, 2), (61, 3), (81, 4)] {
            let ax = Axis::nodal(0.0, 8.0, n_points).unwrap();
            let s: Vec<f64> = ax.points().iter().map(|x| (0.9 * x).sin() + 0.2).collect();
            let g = solve_coeffs(&s, BoundaryCondition::Neumann, &ax).unwrap();
            let m = (n_points - 1) / p;
            for l in 1..p {
                let c = build_pmbc_closure(m, p, m, l * m, EndKind::Slope, ax.spacing()).unwrap();
                let left = c.left_partial(&s[l * m - m..=l * m]);
                let right = c.right_partial(&s[l * m..=l * m + m]);
                // truncation beyond one patch leaves (2 - sqrt 3)^M-sized terms
                let e = (left + right - g.node_slope(l * m)).abs();
                assert!(e < 1e-10, "{n_points}/{p} junction {l}: {e:e}");
            }
        }
    }

    #[test]
    fn pmbc_boundary_values() {
        let (ax, s) = sin_axis(161);
        let c = build_pmbc_closure(40, 4, 26, 80, EndKind::Slope, ax.spacing()).unwrap();
        let l = JunctionMessage { junction_index: 80, direction: Direction::FromLeft, partial_sum: c.left_partial(&s[54..=80]) };
        let r = JunctionMessage { junction_index: 80, direction: Direction::FromRight, partial_sum: c.right_partial(&s[80..=106]) };
        assert!((pmbc_boundary_value(&c, &l, &r).unwrap() - 4f64.cos()).abs() < 1e-6);
        let g = solve_coeffs(&s, BoundaryCondition::Neumann, &ax).unwrap();
        assert!((pmbc_boundary_value(&c, &l, &r).unwrap() - g.node_slope(80)).abs() < 1e-12);

        let cl = JunctionMessage { partial_sum: c.left_partial(&[3.0; 27]), ..l };
        let cr = JunctionMessage { partial_sum: c.right_partial(&[3.0; 27]), ..r };
        assert!(pmbc_boundary_value(&c, &cl, &cr).unwrap().abs() < 1e-12);

        let other = JunctionMessage { junction_index: 120, ..r };
        assert!(matches!(pmbc_boundary_value(&c, &l, &other), Err(Error::JunctionMismatch { expected: 80, got: 120 })));
        assert!(pmbc_boundary_value(&c, &r, &l).is_err());
    }

    #[test]
    fn sine_slope_at_centre_to_twelve_digits() {
        // global spline slope differs from cos by the spline error, so compare against
        // the analytic slope only up to that, and against the global spline tightly
        let (ax, s) = sin_axis(161);
        let clamped = BoundaryCondition::Clamped { left: 1.0, right: 8f64.cos() };
        let g = solve_coeffs(&s, clamped, &ax).unwrap();
        assert!((g.node_slope(80) - 4f64.cos()).abs() < 1e-6);
    }

    #[test]
    fn pmbc_error_decays_with_stencil() {
        let errs: Vec<f64> = [5, 10, 15, 20].iter().map(|&k| patch_error(161, ClosureKind::Pmbc { n_nb: k })).collect();
        for w in errs.windows(2) {
            assert!(w[1] < w[0] * 1e-2, "{errs:?}");
        }
        assert!(patch_error(161, ClosureKind::Pmbc { n_nb: 26 }) <= 1e-14);
    }

    #[test]
    fn cls_junction_error_shrinks_with_h() {
        let e81 = patch_error(81, ClosureKind::ClsHbc);
        let e161 = patch_error(161, ClosureKind::ClsHbc);
        let e321 = patch_error(321, ClosureKind::ClsHbc);
        assert!(e81 < 0.05);
        assert!(e161 * 8.0 <= e81, "{e81} {e161}");
        assert!(e321 < e161, "{e161} {e321}");
    }

    #[test]
    fn cls_errors_sit_at_junctions() {
        let (ax, s) = sin_axis(81);
        let g = solve_coeffs(&s, BoundaryCondition::Neumann, &ax).unwrap();
        let solver = LineSolver::new(&ax, BoundaryCondition::Neumann, ClosureKind::ClsHbc, 4).unwrap();
        let mut out = vec![0.0; solver.coeffs_per_line()];
        solver.solve_line(&s, &mut out);
        let m = 20;
        let diff = |l: usize, q: usize| (out[l * (m + 3) + q] - g.eta[l * m + q]).abs();
        // patch 1 spans nodes 20..40; its worst coefficient sits at one of its ends
        let worst_end = diff(1, 0).max(diff(1, 1)).max(diff(1, m + 1)).max(diff(1, m + 2));
        let centre = diff(1, m / 2 + 1);
        assert!(centre < worst_end * 1e-3, "{centre} {worst_end}");
    }

    #[test]
    fn single_patch_equals_serial() {
        let (ax, s) = sin_axis(41);
        let serial = solve_coeffs(&s, BoundaryCondition::Neumann, &ax).unwrap();
        let one = LineSolver::new(&ax, BoundaryCondition::Neumann, ClosureKind::Pmbc { n_nb: 5 }, 1).unwrap();
        let mut out = vec![0.0; one.coeffs_per_line()];
        one.solve_line(&s, &mut out);
        assert_eq!(out, serial.eta);
        assert_eq!(one.messages_per_line(), 0);

        let local = solve_patch_coeffs(&s, 1.0, 8f64.cos(), &ax).unwrap();
        let direct = solve_coeffs(&s, BoundaryCondition::Clamped { left: 1.0, right: 8f64.cos() }, &ax).unwrap();
        assert_eq!(local.eta, direct.eta);
    }

    #[test]
    fn natural_global_ends() {
        let ax = Axis::nodal(-4.0, 4.0, 161).unwrap();
        let s: Vec<f64> = ax.points().iter().map(|x| (0.8 * x).cos() + 0.3 * x).collect();
        let g = solve_coeffs(&s, BoundaryCondition::Natural, &ax).unwrap();
        let solver = LineSolver::new(&ax, BoundaryCondition::Natural, ClosureKind::Pmbc { n_nb: 30 }, 4).unwrap();
        let mut out = vec![0.0; solver.coeffs_per_line()];
        solver.solve_line(&s, &mut out);
        for l in 0..4 {
            for q in 0..43 {
                assert!((out[l * 43 + q] - g.eta[l * 40 + q]).abs() < 1e-12 * max_abs(&g.eta), "{l} {q}");
            }
        }
        let cls = LineSolver::new(&ax, BoundaryCondition::Natural, ClosureKind::ClsHbc, 4).unwrap();
        cls.solve_line(&s, &mut out);
        for (i, &x) in ax.points().iter().enumerate().step_by(7) {
            assert!((cls.eval(&out, i as f64) - s[i]).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn message_encoding_round_trip() {
        let m = JunctionMessage { junction_index: 120, direction: Direction::FromRight, partial_sum: -0.123456789 };
        let b = m.encode();
        assert_eq!(b.len(), 13);
        assert_eq!(&b[..4], &120u32.to_le_bytes());
        assert_eq!(b[4], 1);
        assert_eq!(JunctionMessage::decode(&b).unwrap(), m);
        assert!(JunctionMessage::decode(&b[..12]).is_err());
    }

    #[test]
    fn threads_match_sequential_bitwise() {
        let (ax, _) = sin_axis(161);
        let n_lines = 7;
        let samples: Vec<f64> =
            (0..n_lines).flat_map(|r| ax.points().into_iter().map(move |x| (x * (1.0 + r as f64 * 0.1)).sin())).collect();
        for closure in [ClosureKind::ClsHbc, ClosureKind::Pmbc { n_nb: 12 }] {
            let solver = LineSolver::new(&ax, BoundaryCondition::Neumann, closure, 4).unwrap();
            let (seq, m1) = solver.solve_lines(&samples, n_lines, Workers::Sequential).unwrap();
            let (thr, m2) = solver.solve_lines(&samples, n_lines, Workers::threads()).unwrap();
            let (thr2, _) = solver.solve_lines(&samples, n_lines, Workers::threads()).unwrap();
            assert_eq!(m1, n_lines * 6);
            assert_eq!(m2, n_lines * 6);
            assert!(seq.iter().zip(&thr).all(|(a, b)| a.to_bits() == b.to_bits()));
            assert!(thr.iter().zip(&thr2).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    #[test]
    fn missing_neighbour_times_out() {
        let (ax, s) = sin_axis(81);
        let solver = LineSolver::new(&ax, BoundaryCondition::Neumann, ClosureKind::Pmbc { n_nb: 8 }, 4).unwrap();
        let (_keep_alive, inbox) = mpsc::channel();
        let links = PatchLinks { to_left: None, to_right: None, inbox };
        let err = patch_worker(&solver, 1, &s, 1, links, Duration::from_millis(20)).unwrap_err();
        assert!(matches!(err, Error::ExchangeTimeout { junction: 20 }), "{err}");
    }

    proptest! {
        #[test]
        fn patched_eval_interpolates_nodes(seed in proptest::collection::vec(-1.0f64..1.0, 41)) {
            let ax = Axis::nodal(0.0, 4.0, 41).unwrap();
            let solver = LineSolver::new(&ax, BoundaryCondition::Neumann, ClosureKind::Pmbc { n_nb: 6 }, 4).unwrap();
            let mut out = vec![0.0; solver.coeffs_per_line()];
            solver.solve_line(&seed, &mut out);
            for (i, v) in seed.iter().enumerate() {
                prop_assert!((solver.eval(&out, i as f64) - v).abs() < 1e-12);
            }
        }
    }
}
