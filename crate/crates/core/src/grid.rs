//! Uniform phase-space grids and the patch decomposition of a grid line.
//!
//! Position axes are node-centred and include both endpoints. Momentum axes
//! used by the spectral operator are periodic: an even number of points on
//! `[lo, hi)` with the right endpoint excluded, so that the discrete dual
//! index set is `-N/2 .. N/2-1`.

use std::ops::Range;

use crate::error::{Error, Result};

/// One uniform coordinate axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    lo: f64,
    hi: f64,
    n_points: usize,
    spacing: f64,
    periodic: bool,
}

impl Axis {
    /// Node-centred axis with `n_points` points on `[lo, hi]`, both ends included.
    pub fn nodal(lo: f64, hi: f64, n_points: usize) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::config(format!("axis needs at least 2 points, got {n_points}")));
        }
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::config(format!("invalid axis bounds [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi, n_points, spacing: (hi - lo) / (n_points - 1) as f64, periodic: false })
    }

    /// Periodic axis with an even number of points on `[lo, hi)`.
    pub fn periodic(lo: f64, hi: f64, n_points: usize) -> Result<Self> {
        if n_points < 2 || n_points % 2 != 0 {
            return Err(Error::config(format!(
                "periodic axis needs an even point count >= 2, got {n_points}"
            )));
        }
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::config(format!("invalid axis bounds [{lo}, {hi})")));
        }
        Ok(Self { lo, hi, n_points, spacing: (hi - lo) / n_points as f64, periodic: true })
    }

    /// Symmetric periodic momentum axis `[-half_width, half_width)`.
    pub fn momentum(half_width: f64, n_points: usize) -> Result<Self> {
        Self::periodic(-half_width, half_width, n_points)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    /// Number of intervals for a nodal axis (the `N` of `x_0..x_N`).
    pub fn intervals(&self) -> usize {
        if self.periodic {
            self.n_points
        } else {
            self.n_points - 1
        }
    }

    /// Measure of the axis domain.
    pub fn extent(&self) -> f64 {
        self.hi - self.lo
    }

    #[inline]
    pub fn point(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.spacing
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.point(i)).collect()
    }

    /// Nearest grid index to `x`, clamped into the axis.
    pub fn nearest_index(&self, x: f64) -> usize {
        let u = ((x - self.lo) / self.spacing).round();
        if u <= 0.0 {
            0
        } else {
            (u as usize).min(self.n_points - 1)
        }
    }

    /// Trapezoid weight of point `i`; nodal endpoints carry half a cell.
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        if !self.periodic && (i == 0 || i + 1 == self.n_points) {
            0.5 * self.spacing
        } else {
            self.spacing
        }
    }
}

/// Tensor grid over position x momentum space with the physical constants.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseGrid {
    x_axes: Vec<Axis>,
    k_axes: Vec<Axis>,
    hbar: f64,
    mass: f64,
}

impl PhaseGrid {
    pub fn new(x_axes: Vec<Axis>, k_axes: Vec<Axis>, hbar: f64, mass: f64) -> Result<Self> {
        if x_axes.is_empty() || x_axes.len() != k_axes.len() {
            return Err(Error::config(format!(
                "position and momentum dimensions must agree and be non-zero (got {} and {})",
                x_axes.len(),
                k_axes.len()
            )));
        }
        if !(hbar > 0.0) || !(mass > 0.0) {
            return Err(Error::config(format!("hbar and mass must be positive (hbar={hbar}, m={mass})")));
        }
        Ok(Self { x_axes, k_axes, hbar, mass })
    }

    /// 1+1 dimensional grid, the common desk-scale case.
    pub fn two_d(x: Axis, k: Axis, hbar: f64, mass: f64) -> Result<Self> {
        Self::new(vec![x], vec![k], hbar, mass)
    }

    pub fn dim(&self) -> usize {
        self.x_axes.len()
    }

    pub fn x_axes(&self) -> &[Axis] {
        &self.x_axes
    }

    pub fn k_axes(&self) -> &[Axis] {
        &self.k_axes
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn nx_total(&self) -> usize {
        self.x_axes.iter().map(Axis::len).product()
    }

    pub fn nk_total(&self) -> usize {
        self.k_axes.iter().map(Axis::len).product()
    }

    pub fn len(&self) -> usize {
        self.nx_total() * self.nk_total()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Array shape, position axes first.
    pub fn shape(&self) -> Vec<usize> {
        self.x_axes.iter().chain(&self.k_axes).map(Axis::len).collect()
    }

    /// Phase-space cell volume `prod(dx) * prod(dk)`.
    pub fn cell_volume(&self) -> f64 {
        self.x_axes.iter().chain(&self.k_axes).map(Axis::spacing).product()
    }

    /// Flat storage index; x-major, each block row-major.
    #[inline]
    pub fn index(&self, x_flat: usize, k_flat: usize) -> usize {
        x_flat * self.nk_total() + k_flat
    }

    pub fn x_multi(&self, x_flat: usize) -> Vec<usize> {
        unflatten(x_flat, &self.x_axes)
    }

    pub fn k_multi(&self, k_flat: usize) -> Vec<usize> {
        unflatten(k_flat, &self.k_axes)
    }

    pub fn x_coords(&self, x_flat: usize) -> Vec<f64> {
        coords(x_flat, &self.x_axes)
    }

    pub fn k_coords(&self, k_flat: usize) -> Vec<f64> {
        coords(k_flat, &self.k_axes)
    }

    /// Stride (in x_flat units) of position axis `a`.
    pub fn x_stride(&self, a: usize) -> usize {
        self.x_axes[a + 1..].iter().map(Axis::len).product()
    }

    /// Stride (in k_flat units) of momentum axis `a`.
    pub fn k_stride(&self, a: usize) -> usize {
        self.k_axes[a + 1..].iter().map(Axis::len).product()
    }

    /// Same constants and momentum axes with new position axes.
    pub fn with_x_axes(&self, x_axes: Vec<Axis>) -> Result<Self> {
        Self::new(x_axes, self.k_axes.clone(), self.hbar, self.mass)
    }

    /// Same constants and position axes with new momentum axes.
    pub fn with_k_axes(&self, k_axes: Vec<Axis>) -> Result<Self> {
        Self::new(self.x_axes.clone(), k_axes, self.hbar, self.mass)
    }
}

fn unflatten(mut flat: usize, axes: &[Axis]) -> Vec<usize> {
    let mut out = vec![0; axes.len()];
    for (slot, axis) in out.iter_mut().zip(axes).rev() {
        *slot = flat % axis.len();
        flat /= axis.len();
    }
    out
}

fn coords(flat: usize, axes: &[Axis]) -> Vec<f64> {
    unflatten(flat, axes).into_iter().zip(axes).map(|(i, a)| a.point(i)).collect()
}

/// Non-overlapping decomposition of a line of `N+1` nodes into `p` patches of
/// `M = N/p` intervals. Junction nodes `M, 2M, ..` are shared by neighbours.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatchLayout {
    n_points: usize,
    patches: usize,
    m: usize,
    owned: Vec<Range<usize>>,
    junctions: Vec<usize>,
}

impl PatchLayout {
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn patches(&self) -> usize {
        self.patches
    }

    /// Intervals per patch.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Indices owned exclusively by each patch (junctions excluded).
    pub fn owned_ranges(&self) -> &[Range<usize>] {
        &self.owned
    }

    pub fn junctions(&self) -> &[usize] {
        &self.junctions
    }

    /// Global node range covered by the spline of patch `l` (0-based), ends inclusive.
    pub fn span(&self, l: usize) -> Range<usize> {
        l * self.m..(l + 1) * self.m + 1
    }

    /// Patch holding the continuous global index coordinate `u` in `[0, N]`.
    #[inline]
    pub fn patch_of(&self, u: f64) -> usize {
        if u <= 0.0 {
            return 0;
        }
        ((u / self.m as f64) as usize).min(self.patches - 1)
    }
}

/// Split `n_points` nodes into `p` patches.
pub fn make_patch_layout(n_points: usize, p: usize) -> Result<PatchLayout> {
    if n_points < 2 || p == 0 {
        return Err(Error::config(format!("cannot decompose {n_points} points into {p} patches")));
    }
    let n = n_points - 1;
    if n % p != 0 {
        return Err(Error::config(format!(
            "n_points - 1 = {n} is not divisible by p = {p} (n_points = {n_points})"
        )));
    }
    let m = n / p;
    let junctions: Vec<usize> = (1..p).map(|l| l * m).collect();
    let owned = (0..p)
        .map(|l| {
            let start = if l == 0 { 0 } else { l * m + 1 };
            let end = if l + 1 == p { n + 1 } else { (l + 1) * m };
            start..end
        })
        .collect();
    Ok(PatchLayout { n_points, patches: p, m, owned, junctions })
}
