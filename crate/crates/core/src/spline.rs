//! Serial cubic B-spline interpolation on a uniform line.
//!
//! A line `x_0..x_N` carries `N+3` coefficients `eta_{-1}..eta_{N+1}` (stored at
//! offset +1). The interpolation conditions give `N+1` three-term rows; two end
//! rows close the system, either a prescribed first derivative (clamped,
//! Neumann) or a vanishing second difference (natural). The resulting matrix is
//! tridiagonal apart from its first and last rows and is factored in O(N).

use crate::error::{Error, Result};
use crate::grid::Axis;

/// End condition of a spline line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundaryCondition {
    /// Prescribed end slopes `s'(x_0) = left`, `s'(x_N) = right`.
    Clamped { left: f64, right: f64 },
    /// Clamped with zero slopes.
    Neumann,
    /// `eta_{-1} - 2 eta_0 + eta_1 = 0` at both ends.
    Natural,
}

impl BoundaryCondition {
    fn end_kinds(self) -> (EndKind, EndKind) {
        match self {
            BoundaryCondition::Natural => (EndKind::SecondDifference, EndKind::SecondDifference),
            _ => (EndKind::Slope, EndKind::Slope),
        }
    }

    fn end_values(self) -> (f64, f64) {
        match self {
            BoundaryCondition::Clamped { left, right } => (left, right),
            _ => (0.0, 0.0),
        }
    }
}

/// Kind of closing row at one end of the coefficient system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EndKind {
    /// `(eta_{+1} - eta_{-1}) / 2h = value`.
    Slope,
    /// `(eta_{-1} - 2 eta_0 + eta_1) / h^2 = 0`.
    SecondDifference,
}

impl EndKind {
    /// Row entries of `6A` (outer, middle, inner) and the rhs scale for the end value.
    fn row(self, h: f64) -> ([f64; 3], f64) {
        match self {
            EndKind::Slope => ([-3.0 / h, 0.0, 3.0 / h], 6.0),
            EndKind::SecondDifference => ([1.0 / (h * h), -2.0 / (h * h), 1.0 / (h * h)], 0.0),
        }
    }
}

/// LU factors of `6A`, where `A` is the `(N+3) x (N+3)` spline coefficient matrix.
///
/// `U` has pivots `d[r]` and super-diagonal `s[r]`, plus the two extra entries of
/// the first row. `L` is unit lower with one sub-diagonal and two entries in the
/// last row.
#[derive(Clone, Debug)]
pub struct LuFactors {
    n: usize,
    h: f64,
    left: EndKind,
    right: EndKind,
    first_row: [f64; 3],
    last_row: [f64; 3],
    d: Vec<f64>,
    s: Vec<f64>,
    l: Vec<f64>,
    last_mult: [f64; 2],
}

impl LuFactors {
    /// Factor the system for `n` intervals of width `h`.
    pub fn new(n: usize, h: f64, left: EndKind, right: EndKind) -> Result<Self> {
        if n < 3 {
            return Err(Error::Size(format!("spline line needs N >= 3 intervals, got {n}")));
        }
        let m = n + 3;
        let (first_row, _) = left.row(h);
        // The last row mirrors the first: (inner, middle, outer) order in columns N..N+2.
        let (r, _) = right.row(h);
        let last_row = match right {
            EndKind::Slope => [-r[2], 0.0, -r[0]],
            EndKind::SecondDifference => [r[2], r[1], r[0]],
        };
        let mut d = vec![0.0; m];
        let mut s = vec![0.0; m];
        let mut l = vec![0.0; m];
        d[0] = first_row[0];
        l[1] = 1.0 / first_row[0];
        d[1] = 4.0 - l[1] * first_row[1];
        s[1] = 1.0 - l[1] * first_row[2];
        for r in 2..=n + 1 {
            l[r] = 1.0 / d[r - 1];
            d[r] = 4.0 - l[r] * s[r - 1];
            s[r] = 1.0;
        }
        let m1 = last_row[0] / d[n];
        let b1 = last_row[1] - m1 * s[n];
        let m2 = b1 / d[n + 1];
        d[n + 2] = last_row[2] - m2 * s[n + 1];
        Ok(Self { n, h, left, right, first_row, last_row, d, s, l, last_mult: [m1, m2] })
    }

    pub fn for_bc(n: usize, h: f64, bc: BoundaryCondition) -> Result<Self> {
        let (l, r) = bc.end_kinds();
        Self::new(n, h, l, r)
    }

    pub fn intervals(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn end_kinds(&self) -> (EndKind, EndKind) {
        (self.left, self.right)
    }

    /// Pivots of `U` by row, `d[0]` being the first-row diagonal.
    pub fn pivots(&self) -> &[f64] {
        &self.d
    }

    /// Super-diagonal of `U` for rows `1..=N+1`.
    pub fn upper(&self) -> &[f64] {
        &self.s
    }

    /// Sub-diagonal multipliers of `L` by row (`l[1]` eliminates the first row).
    pub fn multipliers(&self) -> &[f64] {
        &self.l
    }

    /// The two multipliers of the last row of `L` (columns `N`, `N+1`).
    pub fn last_row_multipliers(&self) -> [f64; 2] {
        self.last_mult
    }

    /// Solve `A eta = (left, phi_0..phi_N, right)` into `eta` (length `N+3`).
    pub fn solve_into(&self, samples: &[f64], left: f64, right: f64, eta: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(samples.len(), n + 1);
        debug_assert_eq!(eta.len(), n + 3);
        let (_, lscale) = self.left.row(self.h);
        let (_, rscale) = self.right.row(self.h);
        // forward: L y = 6 rhs, stored in eta
        eta[0] = lscale * left;
        eta[1] = 6.0 * samples[0] - self.l[1] * eta[0];
        for r in 2..=n + 1 {
            eta[r] = 6.0 * samples[r - 1] - self.l[r] * eta[r - 1];
        }
        eta[n + 2] = rscale * right - self.last_mult[0] * eta[n] - self.last_mult[1] * eta[n + 1];
        // backward: U eta = y
        eta[n + 2] /= self.d[n + 2];
        for r in (1..=n + 1).rev() {
            eta[r] = (eta[r] - self.s[r] * eta[r + 1]) / self.d[r];
        }
        eta[0] = (eta[0] - self.first_row[1] * eta[1] - self.first_row[2] * eta[2]) / self.first_row[0];
    }

    /// Solve `A^T z = rhs` in place. Row `r` of `A^{-1}` is the solution for `rhs = e_r`.
    pub fn solve_transpose_in_place(&self, z: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(z.len(), n + 3);
        // A = (1/6) L U, so A^T z = rhs  <=>  U^T L^T z = 6 rhs.
        for v in z.iter_mut() {
            *v *= 6.0;
        }
        // U^T w = rhs (forward)
        z[0] /= self.first_row[0];
        z[1] = (z[1] - self.first_row[1] * z[0]) / self.d[1];
        z[2] = (z[2] - self.first_row[2] * z[0] - self.s[1] * z[1]) / self.d[2];
        for c in 3..=n + 2 {
            z[c] = (z[c] - self.s[c - 1] * z[c - 1]) / self.d[c];
        }
        // L^T z = w (backward)
        let [m1, m2] = self.last_mult;
        z[n + 1] -= m2 * z[n + 2];
        z[n] -= self.l[n + 1] * z[n + 1] + m1 * z[n + 2];
        for c in (0..n).rev() {
            z[c] -= self.l[c + 1] * z[c + 1];
        }
    }

    /// Row `row` of `A^{-1}`, indices in storage order (`eta_{-1}` at 0).
    pub fn inverse_row(&self, row: usize) -> Vec<f64> {
        let mut z = vec![0.0; self.n + 3];
        z[row] = 1.0;
        self.solve_transpose_in_place(&mut z);
        z
    }

    /// Dense `L` and `U` (row-major) for inspection.
    pub fn dense_factors(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let m = self.n + 3;
        let n = self.n;
        let mut lo = vec![vec![0.0; m]; m];
        let mut up = vec![vec![0.0; m]; m];
        for (r, row) in lo.iter_mut().enumerate() {
            row[r] = 1.0;
            if (1..=n + 1).contains(&r) {
                row[r - 1] = self.l[r];
            }
        }
        lo[n + 2][n] = self.last_mult[0];
        lo[n + 2][n + 1] = self.last_mult[1];
        up[0][..3].copy_from_slice(&self.first_row);
        for r in 1..=n + 1 {
            up[r][r] = self.d[r];
            up[r][r + 1] = self.s[r];
        }
        up[n + 2][n + 2] = self.d[n + 2];
        (lo, up)
    }

    /// Dense `6A` as assembled from its defining rows.
    pub fn dense_matrix(&self) -> Vec<Vec<f64>> {
        let m = self.n + 3;
        let mut a = vec![vec![0.0; m]; m];
        a[0][..3].copy_from_slice(&self.first_row);
        for r in 1..=self.n + 1 {
            a[r][r - 1] = 1.0;
            a[r][r] = 4.0;
            a[r][r + 1] = 1.0;
        }
        a[m - 1][m - 3..].copy_from_slice(&self.last_row);
        a
    }
}

/// Cubic B-spline `B_nu` on `axis`, supported on `[x_{nu-2}, x_{nu+2}]`.
pub fn bspline_value(nu: isize, x: f64, axis: &Axis) -> f64 {
    let h = axis.spacing();
    let node = |j: isize| axis.lo() + j as f64 * h;
    let (xm2, xm1, x0, xp1, xp2) = (node(nu - 2), node(nu - 1), node(nu), node(nu + 1), node(nu + 2));
    let h2 = h * h;
    let h3 = h2 * h;
    if x < xm2 || x > xp2 {
        0.0
    } else if x <= xm1 {
        (x - xm2).powi(3) / (6.0 * h3)
    } else if x <= x0 {
        let t = x - xm1;
        -t.powi(3) / (2.0 * h3) + t * t / (2.0 * h2) + t / (2.0 * h) + 1.0 / 6.0
    } else if x <= xp1 {
        let t = xp1 - x;
        -t.powi(3) / (2.0 * h3) + t * t / (2.0 * h2) + t / (2.0 * h) + 1.0 / 6.0
    } else {
        (xp2 - x).powi(3) / (6.0 * h3)
    }
}

/// Weights of `B_{j-1}, B_j, B_{j+1}, B_{j+2}` at `x_j + s h`, `s` in `[0, 1]`.
#[inline]
pub fn basis_weights(s: f64) -> [f64; 4] {
    let t = 1.0 - s;
    let s2 = s * s;
    let t2 = t * t;
    [t2 * t / 6.0, 2.0 / 3.0 - s2 + 0.5 * s2 * s, 2.0 / 3.0 - t2 + 0.5 * t2 * t, s2 * s / 6.0]
}

/// Evaluate coefficients `eta` (length `N+3`) at the index coordinate `u`.
/// Outside `[0, N]` the spline is zero-extended.
#[inline]
pub fn eval_index(eta: &[f64], u: f64) -> f64 {
    let n = eta.len() - 3;
    if !(u >= -INDEX_EPS && u <= n as f64 + INDEX_EPS) {
        return 0.0;
    }
    let u = u.clamp(0.0, n as f64);
    let j = (u.floor() as usize).min(n - 1);
    let s = u - j as f64;
    let w = basis_weights(s);
    w[0] * eta[j] + w[1] * eta[j + 1] + w[2] * eta[j + 2] + w[3] * eta[j + 3]
}

/// Tolerance (in cells) for treating a point as lying on the domain end.
pub(crate) const INDEX_EPS: f64 = 1e-10;

/// Spline coefficients of one line.
#[derive(Clone, Debug, PartialEq)]
pub struct SplineCoeffs {
    pub eta: Vec<f64>,
    pub axis: Axis,
    pub bc: BoundaryCondition,
}

impl SplineCoeffs {
    /// `eta_nu` for `nu` in `-1..=N+1`.
    pub fn coeff(&self, nu: isize) -> f64 {
        self.eta[(nu + 1) as usize]
    }

    pub fn value(&self, x: f64) -> f64 {
        eval_spline(self, x)
    }

    /// `s'(x_i) = (eta_{i+1} - eta_{i-1}) / 2h`.
    pub fn node_slope(&self, i: usize) -> f64 {
        (self.eta[i + 2] - self.eta[i]) / (2.0 * self.axis.spacing())
    }

    /// Second difference `eta_{i-1} - 2 eta_i + eta_{i+1}` at node `i`.
    pub fn node_second_difference(&self, i: usize) -> f64 {
        self.eta[i] - 2.0 * self.eta[i + 1] + self.eta[i + 2]
    }
}

/// Solve for the `N+3` coefficients interpolating `samples` on `axis`.
pub fn solve_coeffs(samples: &[f64], bc: BoundaryCondition, axis: &Axis) -> Result<SplineCoeffs> {
    if samples.len() != axis.len() {
        return Err(Error::ShapeMismatch { expected: vec![axis.len()], got: vec![samples.len()] });
    }
    if axis.is_periodic() {
        return Err(Error::Unsupported("spline lines need a nodal axis".into()));
    }
    let lu = LuFactors::for_bc(axis.intervals(), axis.spacing(), bc)?;
    let (left, right) = bc.end_values();
    let mut eta = vec![0.0; samples.len() + 2];
    lu.solve_into(samples, left, right, &mut eta);
    Ok(SplineCoeffs { eta, axis: axis.clone(), bc })
}

/// Evaluate the spline at `x`; zero outside `[x_0, x_N]`.
pub fn eval_spline(coeffs: &SplineCoeffs, x: f64) -> f64 {
    eval_index(&coeffs.eta, (x - coeffs.axis.lo()) / coeffs.axis.spacing())
}

/// Tensor-product spline over several nodal axes.
#[derive(Clone, Debug)]
pub struct TensorSpline {
    axes: Vec<Axis>,
    /// Coefficient block, row-major with `axes[a].len() + 2` entries per axis.
    coeffs: Vec<f64>,
}

impl TensorSpline {
    /// Interpolate row-major `values` on the tensor grid of `axes`, with `bc` on every axis.
    pub fn new(values: &[f64], axes: &[Axis], bc: BoundaryCondition) -> Result<Self> {
        let shape: Vec<usize> = axes.iter().map(Axis::len).collect();
        let total: usize = shape.iter().product();
        if values.len() != total {
            return Err(Error::ShapeMismatch { expected: shape, got: vec![values.len()] });
        }
        let (left, right) = bc.end_values();
        let mut cur_shape = shape.clone();
        let mut data = values.to_vec();
        for (a, axis) in axes.iter().enumerate() {
            if axis.is_periodic() {
                return Err(Error::Unsupported("tensor splines need nodal axes".into()));
            }
            let lu = LuFactors::for_bc(axis.intervals(), axis.spacing(), bc)?;
            let n_in = cur_shape[a];
            let n_out = n_in + 2;
            let outer: usize = cur_shape[..a].iter().product();
            let inner: usize = cur_shape[a + 1..].iter().product();
            let mut next = vec![0.0; outer * n_out * inner];
            let mut line = vec![0.0; n_in];
            let mut eta = vec![0.0; n_out];
            for o in 0..outer {
                for i in 0..inner {
                    for (j, v) in line.iter_mut().enumerate() {
                        *v = data[(o * n_in + j) * inner + i];
                    }
                    lu.solve_into(&line, left, right, &mut eta);
                    for (j, &e) in eta.iter().enumerate() {
                        next[(o * n_out + j) * inner + i] = e;
                    }
                }
            }
            cur_shape[a] = n_out;
            data = next;
        }
        Ok(Self { axes: axes.to_vec(), coeffs: data })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }
}

/// Evaluate a tensor spline at `point`; zero outside the box.
pub fn eval_spline_tensor(spline: &TensorSpline, point: &[f64]) -> Result<f64> {
    let d = spline.axes.len();
    if point.len() != d {
        return Err(Error::ShapeMismatch { expected: vec![d], got: vec![point.len()] });
    }
    let mut base = Vec::with_capacity(d);
    let mut weights = Vec::with_capacity(d);
    for (axis, &x) in spline.axes.iter().zip(point) {
        let n = axis.intervals();
        let u = (x - axis.lo()) / axis.spacing();
        if !(u >= -INDEX_EPS && u <= n as f64 + INDEX_EPS) {
            return Ok(0.0);
        }
        let u = u.clamp(0.0, n as f64);
        let j = (u.floor() as usize).min(n - 1);
        base.push(j);
        weights.push(basis_weights(u - j as f64));
    }
    let dims: Vec<usize> = spline.axes.iter().map(|a| a.len() + 2).collect();
    let mut total = 0.0;
    for combo in 0..4usize.pow(d as u32) {
        let mut c = combo;
        let mut w = 1.0;
        let mut idx = 0;
        for a in 0..d {
            let q = c % 4;
            c /= 4;
            w *= weights[a][q];
            idx = idx * dims[a] + base[a] + q;
        }
        // row-major index needs axis 0 outermost; the loop above builds it in order
        total += w * spline.coeffs[idx];
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{dense_solve, max_abs};
    use proptest::prelude::*;

    fn axis(lo: f64, hi: f64, n: usize) -> Axis {
        Axis::nodal(lo, hi, n).unwrap()
    }

    #[test]
    fn nodal_basis_values() {
        let ax = axis(0.0, 1.0, 11);
        for nu in 2..9isize {
            let x = ax.point(nu as usize);
            assert!((bspline_value(nu, x, &ax) - 2.0 / 3.0).abs() < 1e-15);
            assert!((bspline_value(nu, ax.point(nu as usize + 1), &ax) - 1.0 / 6.0).abs() < 1e-15);
            assert!((bspline_value(nu, ax.point(nu as usize - 1), &ax) - 1.0 / 6.0).abs() < 1e-15);
            assert!(bspline_value(nu, ax.point(nu as usize + 2), &ax).abs() < 1e-15);
            assert!(bspline_value(nu, ax.point(nu as usize - 2), &ax).abs() < 1e-15);
        }
    }

    #[test]
    fn basis_weights_match_basis_functions() {
        let ax = axis(0.0, 2.0, 9);
        for &s in &[0.0, 0.125, 0.5, 0.77, 1.0] {
            let j = 3usize;
            let x = ax.point(j) + s * ax.spacing();
            let w = basis_weights(s);
            for q in 0..4 {
                let nu = j as isize - 1 + q as isize;
                assert!((w[q] - bspline_value(nu, x, &ax)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn clamped_lu_coefficients() {
        let n = 20;
        let h = 0.1;
        let lu = LuFactors::new(n, h, EndKind::Slope, EndKind::Slope).unwrap();
        let d = lu.pivots();
        let l = lu.multipliers();
        assert_eq!(d[1], 4.0);
        assert_eq!(lu.upper()[1], 2.0);
        assert_eq!(d[2], 3.5);
        assert_eq!(l[2], 0.25);
        for i in 3..=n + 1 {
            assert!((l[i] - 1.0 / d[i - 1]).abs() < 1e-15);
            assert!((d[i] - (4.0 - 1.0 / d[i - 1])).abs() < 1e-15);
        }
        // last row: -3 l_N / h and 3 l_{N+1} / h with l_N = 1/d_N, l_{N+1} = 1/(d_N d_{N+1})
        let [m1, m2] = lu.last_row_multipliers();
        assert!((m1 - (-3.0 / (h * d[n]))).abs() < 1e-12);
        assert!((m2 - 3.0 / (h * d[n] * d[n + 1])).abs() < 1e-12);
        let d_last = 1.0 - 1.0 / (d[n] * d[n + 1]);
        assert!((d[n + 2] - 3.0 * d_last / h).abs() < 1e-12);
    }

    fn check_reconstruction(lu: &LuFactors) {
        let (l, u) = lu.dense_factors();
        let a = lu.dense_matrix();
        let m = a.len();
        let scale = a.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
        for r in 0..m {
            for c in 0..m {
                let lu_rc: f64 = (0..m).map(|k| l[r][k] * u[k][c]).sum();
                assert!((lu_rc - a[r][c]).abs() <= 1e-13 * scale, "({r},{c}) {lu_rc} vs {}", a[r][c]);
            }
        }
    }

    #[test]
    fn lu_reconstructs_matrix() {
        for kinds in [
            (EndKind::Slope, EndKind::Slope),
            (EndKind::SecondDifference, EndKind::SecondDifference),
            (EndKind::SecondDifference, EndKind::Slope),
            (EndKind::Slope, EndKind::SecondDifference),
        ] {
            check_reconstruction(&LuFactors::new(12, 0.05, kinds.0, kinds.1).unwrap());
            check_reconstruction(&LuFactors::new(3, 1.3, kinds.0, kinds.1).unwrap());
        }
    }

    #[test]
    fn transpose_solve_gives_inverse_rows() {
        let lu = LuFactors::new(9, 0.2, EndKind::SecondDifference, EndKind::Slope).unwrap();
        let a: Vec<Vec<f64>> = lu.dense_matrix().into_iter().map(|r| r.into_iter().map(|v| v / 6.0).collect()).collect();
        let m = a.len();
        for row in 0..m {
            let z = lu.inverse_row(row);
            // z^T A = e_row^T
            for c in 0..m {
                let v: f64 = (0..m).map(|k| z[k] * a[k][c]).sum();
                let want = if c == row { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-12, "row {row} col {c}: {v}");
            }
        }
    }

    #[test]
    fn too_short_line() {
        let ax = axis(0.0, 1.0, 3);
        assert!(matches!(solve_coeffs(&[1.0, 2.0, 3.0], BoundaryCondition::Neumann, &ax), Err(Error::Size(_))));
    }

    #[test]
    fn constant_samples_give_constant_coefficients() {
        let ax = axis(-1.0, 3.0, 17);
        let c = solve_coeffs(&vec![2.5; 17], BoundaryCondition::Neumann, &ax).unwrap();
        assert!(c.eta.iter().all(|&e| (e - 2.5).abs() < 1e-14));
    }

    #[test]
    fn sine_coefficients_match_dense_solve() {
        let ax = axis(0.0, 8.0, 161);
        let samples: Vec<f64> = ax.points().iter().map(|x| x.sin()).collect();
        let c = solve_coeffs(&samples, BoundaryCondition::Clamped { left: 0.0, right: 0.0 }, &ax).unwrap();
        let lu = LuFactors::for_bc(160, ax.spacing(), BoundaryCondition::Neumann).unwrap();
        let a: Vec<Vec<f64>> = lu.dense_matrix().into_iter().map(|r| r.into_iter().map(|v| v / 6.0).collect()).collect();
        let mut rhs = vec![0.0];
        rhs.extend(&samples);
        rhs.push(0.0);
        let dense = dense_solve(a, rhs);
        let scale = max_abs(&dense);
        for (x, y) in c.eta.iter().zip(&dense) {
            assert!((x - y).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn natural_coefficients_satisfy_end_rows() {
        let ax = axis(0.0, 8.0, 41);
        let samples: Vec<f64> = ax.points().iter().map(|x| (0.7 * x).cos() + 0.1 * x).collect();
        let c = solve_coeffs(&samples, BoundaryCondition::Natural, &ax).unwrap();
        let scale = max_abs(&samples);
        assert!(c.node_second_difference(0).abs() <= 1e-12 * scale);
        assert!(c.node_second_difference(40).abs() <= 1e-12 * scale);
        for (i, &phi) in samples.iter().enumerate() {
            assert!((c.value(ax.point(i)) - phi).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn outside_the_domain_is_zero() {
        let ax = axis(0.0, 8.0, 161);
        let samples: Vec<f64> = ax.points().iter().map(|x| x.sin() + 2.0).collect();
        let c = solve_coeffs(&samples, BoundaryCondition::Neumann, &ax).unwrap();
        assert_eq!(c.value(-1e-3), 0.0);
        assert_eq!(c.value(8.0 + 1e-3), 0.0);
        assert!((c.value(8.0) - samples[160]).abs() < 1e-12);
    }

    #[test]
    fn midpoint_error_is_fourth_order_small() {
        let ax = axis(0.0, 8.0, 161);
        let samples: Vec<f64> = ax.points().iter().map(|x| x.sin()).collect();
        let c = solve_coeffs(&samples, BoundaryCondition::Clamped { left: 1.0, right: 8f64.cos() }, &ax).unwrap();
        let h = ax.spacing();
        let err = (0..160).map(|i| {
            let x = ax.point(i) + 0.5 * h;
            (c.value(x) - x.sin()).abs()
        });
        let e = err.fold(0.0, f64::max);
        // 5/384 h^4 max|f''''| bounds the clamped interpolation error
        assert!(e < 5.0 / 384.0 * h.powi(4) * 1.01, "{e}");
    }

    #[test]
    fn tensor_dimension_mismatch() {
        let ax = axis(0.0, 1.0, 5);
        let t = TensorSpline::new(&vec![1.0; 25], &[ax.clone(), ax], BoundaryCondition::Neumann).unwrap();
        assert!(eval_spline_tensor(&t, &[0.5]).is_err());
        assert!((eval_spline_tensor(&t, &[0.3, 0.71]).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn tensor_separable_interpolates() {
        let ax = axis(-2.0, 2.0, 9);
        let ak = axis(-1.0, 1.0, 7);
        let g = |x: f64| (-x * x).exp();
        let w = |k: f64| 1.0 + k * k * k;
        let mut vals = Vec::new();
        for x in ax.points() {
            for k in ak.points() {
                vals.push(g(x) * w(k));
            }
        }
        let t = TensorSpline::new(&vals, &[ax.clone(), ak.clone()], BoundaryCondition::Neumann).unwrap();
        for (i, x) in ax.points().into_iter().enumerate() {
            for (j, k) in ak.points().into_iter().enumerate() {
                let v = eval_spline_tensor(&t, &[x, k]).unwrap();
                assert!((v - vals[i * 7 + j]).abs() < 1e-12, "{i},{j}");
            }
        }
    }

    proptest! {
        #[test]
        fn partition_of_unity(x in 0.0f64..8.0) {
            let ax = axis(0.0, 8.0, 33);
            let total: f64 = (-1..=33).map(|nu| bspline_value(nu, x, &ax)).sum();
            prop_assert!((total - 1.0).abs() < 1e-13);
        }

        #[test]
        fn cubic_reproduction(c0 in -2.0f64..2.0, c1 in -2.0f64..2.0, c2 in -2.0f64..2.0, c3 in -2.0f64..2.0, x in -1.0f64..2.0) {
            let ax = axis(-1.0, 2.0, 25);
            let q = |x: f64| c0 + x * (c1 + x * (c2 + x * c3));
            let dq = |x: f64| c1 + x * (2.0 * c2 + 3.0 * x * c3);
            let samples: Vec<f64> = ax.points().iter().map(|&x| q(x)).collect();
            let c = solve_coeffs(&samples, BoundaryCondition::Clamped { left: dq(-1.0), right: dq(2.0) }, &ax).unwrap();
            let scale = 1.0 + max_abs(&samples);
            prop_assert!((c.value(x) - q(x)).abs() <= 1e-12 * scale);
        }

        #[test]
        fn three_term_residual_and_end_slopes(seed in proptest::collection::vec(-1.0f64..1.0, 20), l in -3.0f64..3.0, r in -3.0f64..3.0) {
            let ax = axis(0.0, 1.9, 20);
            let c = solve_coeffs(&seed, BoundaryCondition::Clamped { left: l, right: r }, &ax).unwrap();
            let scale = max_abs(&seed).max(l.abs()).max(r.abs()).max(1.0);
            for i in 0..20 {
                let rel = c.eta[i] / 6.0 + 2.0 * c.eta[i + 1] / 3.0 + c.eta[i + 2] / 6.0;
                prop_assert!((rel - seed[i]).abs() <= 1e-12 * scale);
            }
            prop_assert!((c.node_slope(0) - l).abs() <= 1e-12 * scale);
            prop_assert!((c.node_slope(19) - r).abs() <= 1e-12 * scale);
        }
    }
}
