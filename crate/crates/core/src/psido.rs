//! The nonlocal operator `Theta_V[f]` of the Wigner equation.
//!
//! With `D_V(x, y) = V(x + y/2) - V(x - y/2)` the operator is a convolution in
//! momentum. On a periodic momentum grid of `N` points over `[-L, L)` it is
//! diagonal in the discrete Fourier basis: the mode `n` is multiplied by
//! `i D_V(x, pi n / L) / hbar`.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{Axis, PhaseGrid};

/// What to do when the potential is evaluated at one of its singular points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SingularPolicy {
    /// `V = 0` exactly at a singular point.
    ZeroAtSingularity,
    /// Every position argument is shifted by `delta` in each component.
    GridShift(f64),
    /// Hitting a singular point is an error.
    None,
}

#[derive(Clone)]
pub enum PotentialShape {
    Constant(f64),
    /// `V = m_omega |x|^2 / 2`.
    Harmonic { m_omega: f64 },
    /// `V = -strength / |x|`.
    Coulomb { strength: f64 },
    /// `V = -strength / sqrt(|x|^2 + eps^2)`.
    SoftCoulomb { strength: f64, eps: f64 },
    Custom(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl fmt::Debug for PotentialShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialShape::Constant(c) => write!(f, "Constant({c})"),
            PotentialShape::Harmonic { m_omega } => write!(f, "Harmonic {{ m_omega: {m_omega} }}"),
            PotentialShape::Coulomb { strength } => write!(f, "Coulomb {{ strength: {strength} }}"),
            PotentialShape::SoftCoulomb { strength, eps } => {
                write!(f, "SoftCoulomb {{ strength: {strength}, eps: {eps} }}")
            }
            PotentialShape::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Potential {
    pub shape: PotentialShape,
    pub singular_points: Vec<Vec<f64>>,
    pub policy: SingularPolicy,
}

impl Potential {
    pub fn constant(c: f64) -> Self {
        Self { shape: PotentialShape::Constant(c), singular_points: vec![], policy: SingularPolicy::None }
    }

    pub fn harmonic(m_omega: f64) -> Self {
        Self { shape: PotentialShape::Harmonic { m_omega }, singular_points: vec![], policy: SingularPolicy::None }
    }

    /// Attractive Coulomb potential in `dim` dimensions, singular at the origin.
    pub fn coulomb(strength: f64, dim: usize) -> Self {
        Self {
            shape: PotentialShape::Coulomb { strength },
            singular_points: vec![vec![0.0; dim]],
            policy: SingularPolicy::ZeroAtSingularity,
        }
    }

    pub fn soft_coulomb(strength: f64, eps: f64) -> Self {
        Self { shape: PotentialShape::SoftCoulomb { strength, eps }, singular_points: vec![], policy: SingularPolicy::None }
    }

    pub fn custom(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static, singular_points: Vec<Vec<f64>>) -> Self {
        Self { shape: PotentialShape::Custom(Arc::new(f)), singular_points, policy: SingularPolicy::None }
    }

    pub fn with_policy(mut self, policy: SingularPolicy) -> Self {
        self.policy = policy;
        self
    }

    /// The formula itself, without any singularity handling.
    pub fn raw(&self, x: &[f64]) -> f64 {
        let r2 = || x.iter().map(|v| v * v).sum::<f64>();
        match &self.shape {
            PotentialShape::Constant(c) => *c,
            PotentialShape::Harmonic { m_omega } => 0.5 * m_omega * r2(),
            PotentialShape::Coulomb { strength } => -strength / r2().sqrt(),
            PotentialShape::SoftCoulomb { strength, eps } => -strength / (r2() + eps * eps).sqrt(),
            PotentialShape::Custom(f) => f(x),
        }
    }

    fn at_singularity(&self, x: &[f64]) -> bool {
        let scale = 1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.singular_points
            .iter()
            .any(|p| p.len() == x.len() && p.iter().zip(x).all(|(a, b)| (a - b).abs() <= 1e-12 * scale))
    }

    /// `V(x)` under the singularity policy.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let shifted;
        let x = match self.policy {
            SingularPolicy::GridShift(d) => {
                shifted = x.iter().map(|v| v + d).collect::<Vec<_>>();
                &shifted[..]
            }
            _ => x,
        };
        if self.at_singularity(x) {
            return match self.policy {
                SingularPolicy::ZeroAtSingularity => Ok(0.0),
                _ => Err(Error::Singularity { point: x.to_vec() }),
            };
        }
        Ok(self.raw(x))
    }

    /// `D_V(x, y) = V(x + y/2) - V(x - y/2)`.
    pub fn symbol(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let plus: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + 0.5 * b).collect();
        let minus: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - 0.5 * b).collect();
        Ok(self.eval(&plus)? - self.eval(&minus)?)
    }

    /// `m omega` when the potential is the quadratic well.
    pub fn quadratic_coefficient(&self) -> Option<f64> {
        match self.shape {
            PotentialShape::Harmonic { m_omega } => Some(m_omega),
            _ => None,
        }
    }
}

/// Frequency index of FFT slot `q` for an even length `n`; `None` marks the Nyquist slot.
fn slot_frequency(q: usize, n: usize) -> Option<i64> {
    let half = n / 2;
    if q < half {
        Some(q as i64)
    } else if q == half {
        None
    } else {
        Some(q as i64 - n as i64)
    }
}

/// Dual coordinate `y_n = pi n / L` of a periodic momentum axis, `2L` its period.
fn dual_step(axis: &Axis) -> f64 {
    2.0 * std::f64::consts::PI / axis.extent()
}

fn check_k_axes(axes: &[Axis]) -> Result<()> {
    for a in axes {
        if !a.is_periodic() {
            return Err(Error::config("momentum axes must be periodic"));
        }
        if a.len() % 2 != 0 {
            return Err(Error::config(format!("momentum axis needs an even point count, got {}", a.len())));
        }
    }
    Ok(())
}

/// `D_V(x_i, y_n)` at every position and every Fourier slot, in FFT order.
///
/// A slot at the Nyquist frequency of some axis stands for both `+N/2` and
/// `-N/2`; its entry is the average over those sign choices.
#[derive(Clone, Debug)]
pub struct SymbolTable {
    pub d_v: Vec<f64>,
    nk: usize,
}

impl SymbolTable {
    pub fn row(&self, x_flat: usize) -> &[f64] {
        &self.d_v[x_flat * self.nk..(x_flat + 1) * self.nk]
    }
}

/// Tabulate `D_V` over the grid positions with the potential's singularity policy.
pub fn apply_singular_policy(v: &Potential, grid: &PhaseGrid) -> Result<SymbolTable> {
    check_k_axes(grid.k_axes())?;
    let d = grid.dim();
    let nk = grid.nk_total();
    let steps: Vec<f64> = grid.k_axes().iter().map(dual_step).collect();
    // per slot: list of (y vector) to average
    let mut slot_points: Vec<Vec<Vec<f64>>> = Vec::with_capacity(nk);
    for q in 0..nk {
        let multi = grid.k_multi(q);
        let mut ys: Vec<Vec<f64>> = vec![Vec::with_capacity(d)];
        for (a, &qa) in multi.iter().enumerate() {
            let n = grid.k_axes()[a].len();
            match slot_frequency(qa, n) {
                Some(f) => ys.iter_mut().for_each(|y| y.push(f as f64 * steps[a])),
                None => {
                    let nyq = (n / 2) as f64 * steps[a];
                    let mut next = Vec::with_capacity(ys.len() * 2);
                    for y in ys {
                        let mut p = y.clone();
                        p.push(nyq);
                        let mut m = y;
                        m.push(-nyq);
                        next.push(p);
                        next.push(m);
                    }
                    ys = next;
                }
            }
        }
        slot_points.push(ys);
    }
    let mut d_v = Vec::with_capacity(grid.nx_total() * nk);
    for i in 0..grid.nx_total() {
        let x = grid.x_coords(i);
        for ys in &slot_points {
            let mut s = 0.0;
            for y in ys {
                s += v.symbol(&x, y)?;
            }
            d_v.push(s / ys.len() as f64);
        }
    }
    Ok(SymbolTable { d_v, nk })
}

/// Forward and inverse transforms along each momentum axis of a field block.
pub(crate) struct KTransforms {
    shape: Vec<usize>,
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
}

impl KTransforms {
    pub(crate) fn new(shape: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            shape: shape.to_vec(),
            fwd: shape.iter().map(|&n| planner.plan_fft_forward(n)).collect(),
            inv: shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect(),
        }
    }

    /// Transform `data` (any number of consecutive k-blocks) along every k axis.
    pub(crate) fn run(&self, data: &mut [Complex64], inverse: bool) {
        let plans = if inverse { &self.inv } else { &self.fwd };
        let block: usize = self.shape.iter().product();
        let d = self.shape.len();
        for a in 0..d {
            let n = self.shape[a];
            let inner: usize = self.shape[a + 1..].iter().product();
            if inner == 1 {
                plans[a].process(data);
                continue;
            }
            let mut line = vec![Complex64::default(); n];
            let mut scratch = vec![Complex64::default(); plans[a].get_inplace_scratch_len()];
            for blk in data.chunks_exact_mut(block) {
                let outer = block / (n * inner);
                for o in 0..outer {
                    for i in 0..inner {
                        let base = o * n * inner + i;
                        for (j, c) in line.iter_mut().enumerate() {
                            *c = blk[base + j * inner];
                        }
                        plans[a].process_with_scratch(&mut line, &mut scratch);
                        for (j, c) in line.iter().enumerate() {
                            blk[base + j * inner] = *c;
                        }
                    }
                }
            }
        }
    }
}

/// PSM on one momentum slice: `f_slice` over the k-grid at fixed x, `d_row` the
/// matching symbol row. Returns `Theta_V[f]` and the largest imaginary residue.
pub fn psm_apply(f_slice: &[f64], d_row: &[f64], k_axes: &[Axis], hbar: f64) -> Result<(Vec<f64>, f64)> {
    if f_slice.len() % 2 != 0 {
        return Err(Error::config(format!("momentum slice needs an even point count, got {}", f_slice.len())));
    }
    check_k_axes(k_axes)?;
    let shape: Vec<usize> = k_axes.iter().map(Axis::len).collect();
    let total: usize = shape.iter().product();
    if f_slice.len() != total || d_row.len() != total {
        return Err(Error::ShapeMismatch { expected: shape, got: vec![f_slice.len(), d_row.len()] });
    }
    let tr = KTransforms::new(&shape);
    let mut buf: Vec<Complex64> = f_slice.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    tr.run(&mut buf, false);
    for (c, d) in buf.iter_mut().zip(d_row) {
        *c = Complex64::new(0.0, d / hbar) * *c;
    }
    tr.run(&mut buf, true);
    let scale = 1.0 / total as f64;
    let residue = buf.iter().fold(0.0f64, |m, c| m.max((c.im * scale).abs()));
    Ok((buf.iter().map(|c| c.re * scale).collect(), residue))
}

/// An applicator of `Theta_V` to a whole field.
pub trait ThetaOperator: Send + Sync {
    fn apply(&self, f: &[f64]) -> Result<Vec<f64>>;

    /// True if the operator is identically zero (pure transport).
    fn is_zero(&self) -> bool {
        false
    }
}

/// `Theta = 0`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroTheta;

impl ThetaOperator for ZeroTheta {
    fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![0.0; f.len()])
    }

    fn is_zero(&self) -> bool {
        true
    }
}

/// Pseudo-spectral `Theta_V` over a full phase-space field.
pub struct PsmOperator {
    table: SymbolTable,
    hbar: f64,
    len: usize,
    transforms: KTransforms,
}

impl PsmOperator {
    pub fn new(v: &Potential, grid: &PhaseGrid) -> Result<Self> {
        let table = apply_singular_policy(v, grid)?;
        let shape: Vec<usize> = grid.k_axes().iter().map(Axis::len).collect();
        Ok(Self { table, hbar: grid.hbar(), len: grid.len(), transforms: KTransforms::new(&shape) })
    }

    pub fn table(&self) -> &SymbolTable {
        &self.table
    }

    /// `Theta_V[f]` and the largest imaginary residue of the inverse transform.
    pub fn apply_with_residue(&self, f: &[f64]) -> Result<(Vec<f64>, f64)> {
        if f.len() != self.len {
            return Err(Error::ShapeMismatch { expected: vec![self.len], got: vec![f.len()] });
        }
        let mut buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transforms.run(&mut buf, false);
        let inv_hbar = 1.0 / self.hbar;
        for (c, d) in buf.iter_mut().zip(&self.table.d_v) {
            let m = d * inv_hbar;
            *c = Complex64::new(-m * c.im, m * c.re);
        }
        self.transforms.run(&mut buf, true);
        let scale = 1.0 / self.table.nk as f64;
        let residue = buf.iter().fold(0.0f64, |m, c| m.max((c.im * scale).abs()));
        Ok((buf.iter().map(|c| c.re * scale).collect(), residue))
    }
}

impl ThetaOperator for PsmOperator {
    fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        Ok(self.apply_with_residue(f)?.0)
    }
}

/// `(1/hbar) grad V . grad_k f` for a quadratic potential, with spectral `grad_k`.
pub struct LocalGradient {
    grid: PhaseGrid,
    m_omega: f64,
    transforms: KTransforms,
}

impl LocalGradient {
    pub fn new(v: &Potential, grid: &PhaseGrid) -> Result<Self> {
        let m_omega = v
            .quadratic_coefficient()
            .ok_or_else(|| Error::Unsupported(format!("local gradient path needs a quadratic potential, got {:?}", v.shape)))?;
        check_k_axes(grid.k_axes())?;
        let shape: Vec<usize> = grid.k_axes().iter().map(Axis::len).collect();
        Ok(Self { grid: grid.clone(), m_omega, transforms: KTransforms::new(&shape) })
    }
}

impl ThetaOperator for LocalGradient {
    fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        local_gradient_with(self, f)
    }
}

fn local_gradient_with(op: &LocalGradient, f: &[f64]) -> Result<Vec<f64>> {
    let grid = &op.grid;
    if f.len() != grid.len() {
        return Err(Error::ShapeMismatch { expected: grid.shape(), got: vec![f.len()] });
    }
    let nk = grid.nk_total();
    let mut spectrum: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    op.transforms.run(&mut spectrum, false);
    let mut out = vec![0.0; f.len()];
    let scale = 1.0 / nk as f64;
    for a in 0..grid.dim() {
        let axis = &grid.k_axes()[a];
        let step = dual_step(axis);
        let wavenumber: Vec<f64> =
            (0..nk).map(|q| slot_frequency(grid.k_multi(q)[a], axis.len()).map_or(0.0, |n| n as f64 * step)).collect();
        let mut buf = spectrum.clone();
        for blk in buf.chunks_exact_mut(nk) {
            for (c, w) in blk.iter_mut().zip(&wavenumber) {
                *c = Complex64::new(-w * c.im, w * c.re);
            }
        }
        op.transforms.run(&mut buf, true);
        for i in 0..grid.nx_total() {
            let grad = op.m_omega * grid.x_axes()[a].point(grid.x_multi(i)[a]) / grid.hbar();
            for q in 0..nk {
                out[i * nk + q] += grad * buf[i * nk + q].re * scale;
            }
        }
    }
    Ok(out)
}

/// `(1/hbar) grad V . grad_k f` for the quadratic well.
pub fn local_gradient_apply(f: &[f64], v: &Potential, grid: &PhaseGrid) -> Result<Vec<f64>> {
    LocalGradient::new(v, grid)?.apply(f)
}

/// Largest grid the direct-sum oracle accepts.
pub const QUADRATURE_MAX_POINTS: usize = 1_000_000;

/// Direct double sum over dual nodes `y_n`, `n = -N/2..=N/2` (end nodes half
/// weighted), and momentum nodes `k'`, with `D_V` evaluated from the potential.
pub fn quadrature_oracle(f: &[f64], v: &Potential, grid: &PhaseGrid) -> Result<Vec<f64>> {
    if grid.len() > QUADRATURE_MAX_POINTS {
        return Err(Error::Size(format!(
            "quadrature oracle limited to {QUADRATURE_MAX_POINTS} grid points, got {}",
            grid.len()
        )));
    }
    if f.len() != grid.len() {
        return Err(Error::ShapeMismatch { expected: grid.shape(), got: vec![f.len()] });
    }
    check_k_axes(grid.k_axes())?;
    let d = grid.dim();
    let kshape: Vec<usize> = grid.k_axes().iter().map(Axis::len).collect();
    let yshape: Vec<usize> = kshape.iter().map(|n| n + 1).collect();
    // phase[a][n][j] = exp(-i y_n k_j)
    let mut y_nodes = Vec::with_capacity(d);
    let mut weights = Vec::with_capacity(d);
    let mut phase = Vec::with_capacity(d);
    for axis in grid.k_axes() {
        let n = axis.len();
        let step = dual_step(axis);
        let ys: Vec<f64> = (0..=n).map(|q| (q as f64 - (n / 2) as f64) * step).collect();
        let w: Vec<f64> = (0..=n).map(|q| if q == 0 || q == n { 0.5 } else { 1.0 }).collect();
        let ph: Vec<Vec<Complex64>> =
            ys.iter().map(|&y| (0..n).map(|j| Complex64::from_polar(1.0, -y * axis.point(j))).collect()).collect();
        y_nodes.push(ys);
        weights.push(w);
        phase.push(ph);
    }
    let ny: usize = yshape.iter().product();
    let nk = grid.nk_total();
    let norm: f64 = kshape.iter().map(|&n| 1.0 / n as f64).product();
    let mut out = vec![0.0; f.len()];
    for i in 0..grid.nx_total() {
        let x = grid.x_coords(i);
        let mut cur: Vec<Complex64> = f[i * nk..(i + 1) * nk].iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut shape = kshape.clone();
        for a in 0..d {
            cur = transform_axis(&cur, &mut shape, a, yshape[a], |n, j| phase[a][n][j]);
        }
        for (q, c) in cur.iter_mut().enumerate() {
            let mut rem = q;
            let mut y = vec![0.0; d];
            let mut w = 1.0;
            for a in (0..d).rev() {
                let idx = rem % yshape[a];
                rem /= yshape[a];
                y[a] = y_nodes[a][idx];
                w *= weights[a][idx];
            }
            let dv = v.symbol(&x, &y)?;
            *c *= Complex64::new(0.0, w * dv / grid.hbar());
        }
        debug_assert_eq!(cur.len(), ny);
        for a in 0..d {
            cur = transform_axis(&cur, &mut shape, a, kshape[a], |j, n| phase[a][n][j].conj());
        }
        for (o, c) in out[i * nk..(i + 1) * nk].iter_mut().zip(&cur) {
            *o = c.re * norm;
        }
    }
    Ok(out)
}

/// Dense transform along axis `a` of a row-major block; `kernel(out_idx, in_idx)`.
fn transform_axis(
    data: &[Complex64],
    shape: &mut [usize],
    a: usize,
    n_out: usize,
    kernel: impl Fn(usize, usize) -> Complex64,
) -> Vec<Complex64> {
    let n_in = shape[a];
    let outer: usize = shape[..a].iter().product();
    let inner: usize = shape[a + 1..].iter().product();
    let mut out = vec![Complex64::default(); outer * n_out * inner];
    for o in 0..outer {
        for p in 0..n_out {
            for j in 0..n_in {
                let kv = kernel(p, j);
                let src = (o * n_in + j) * inner;
                let dst = (o * n_out + p) * inner;
                for i in 0..inner {
                    out[dst + i] += kv * data[src + i];
                }
            }
        }
    }
    shape[a] = n_out;
    out
}

/// `Theta_V` by the direct-sum oracle; only for small grids.
pub struct QuadratureTheta {
    pub potential: Potential,
    pub grid: PhaseGrid,
}

impl ThetaOperator for QuadratureTheta {
    fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        quadrature_oracle(f, &self.potential, &self.grid)
    }
}
