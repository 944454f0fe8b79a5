//! Error norms and diagnostics over phase-space fields.
//!
//! Integrals use trapezoid weights (half cells at nodal ends) and compensated
//! summation in storage order, so every value is reproducible bit for bit.

use std::io::Write;

use crate::error::{Error, Result};
use crate::field::StateField;
use crate::grid::{Axis, PhaseGrid};

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

fn block_weights(axes: &[Axis]) -> Vec<f64> {
    let mut w = vec![1.0];
    for axis in axes {
        let mut next = Vec::with_capacity(w.len() * axis.len());
        for &a in &w {
            for i in 0..axis.len() {
                next.push(a * axis.weight(i));
            }
        }
        w = next;
    }
    w
}

/// Trapezoid weights over the position block.
pub fn x_weights(grid: &PhaseGrid) -> Vec<f64> {
    block_weights(grid.x_axes())
}

/// Trapezoid weights over the momentum block.
pub fn k_weights(grid: &PhaseGrid) -> Vec<f64> {
    block_weights(grid.k_axes())
}

fn weighted_sum(values: &[f64], grid: &PhaseGrid, g: impl Fn(usize, f64) -> f64) -> f64 {
    let wx = x_weights(grid);
    let wk = k_weights(grid);
    let nk = wk.len();
    let mut s = CompensatedSum::default();
    for (i, &a) in wx.iter().enumerate() {
        for (j, &b) in wk.iter().enumerate() {
            let idx = i * nk + j;
            s.add(a * b * g(idx, values[idx]));
        }
    }
    s.value()
}

fn check(num: &[f64], reference: &[f64]) -> Result<()> {
    if num.len() != reference.len() {
        return Err(Error::ShapeMismatch { expected: vec![num.len()], got: vec![reference.len()] });
    }
    Ok(())
}

/// `max |num - ref|` over the grid.
pub fn eps_inf(num: &StateField, reference: &[f64]) -> Result<f64> {
    check(&num.values, reference)?;
    Ok(num.values.iter().zip(reference).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
}

/// `sqrt( integral |num - ref|^2 )`.
pub fn eps_2(num: &StateField, reference: &[f64], grid: &PhaseGrid) -> Result<f64> {
    check(&num.values, reference)?;
    num.check_shape(grid)?;
    Ok(weighted_sum(&num.values, grid, |i, v| (v - reference[i]).powi(2)).sqrt())
}

/// `integral f` over the phase-space grid.
pub fn total_mass(values: &[f64], grid: &PhaseGrid) -> Result<f64> {
    if values.len() != grid.len() {
        return Err(Error::ShapeMismatch { expected: grid.shape(), got: vec![values.len()] });
    }
    Ok(weighted_sum(values, grid, |_, v| v))
}

/// `| integral num - integral f0 |`.
pub fn eps_mass(num: &StateField, f0: &[f64], grid: &PhaseGrid) -> Result<f64> {
    check(&num.values, f0)?;
    Ok((total_mass(&num.values, grid)? - total_mass(f0, grid)?).abs())
}

/// Spatial density `P(x) = integral f dk` at every position.
pub fn marginal_density(f: &StateField, grid: &PhaseGrid) -> Result<Vec<f64>> {
    f.check_shape(grid)?;
    let wk = k_weights(grid);
    Ok(f
        .values
        .chunks_exact(wk.len())
        .map(|row| {
            let mut s = CompensatedSum::default();
            for (v, w) in row.iter().zip(&wk) {
                s.add(v * w);
            }
            s.value()
        })
        .collect())
}

/// `min_x P(x)`; negative values flag loss of positivity.
pub fn min_marginal(f: &StateField, grid: &PhaseGrid) -> Result<f64> {
    Ok(marginal_density(f, grid)?.into_iter().fold(f64::INFINITY, f64::min))
}

/// Projection onto the `(x_a, k_a)` plane, integrating out every other axis.
/// Returned row-major over `x_a` then `k_a`.
pub fn reduced_wigner(f: &StateField, grid: &PhaseGrid, axis: usize) -> Result<Vec<f64>> {
    f.check_shape(grid)?;
    let d = grid.dim();
    if axis >= d {
        return Err(Error::config(format!("axis {axis} out of range for dimension {d}")));
    }
    let nxa = grid.x_axes()[axis].len();
    let nka = grid.k_axes()[axis].len();
    let wx = |i: usize| -> (usize, f64) {
        let m = grid.x_multi(i);
        let w: f64 = (0..d).filter(|&b| b != axis).map(|b| grid.x_axes()[b].weight(m[b])).product();
        (m[axis], w)
    };
    let k_info: Vec<(usize, f64)> = (0..grid.nk_total())
        .map(|j| {
            let m = grid.k_multi(j);
            let w: f64 = (0..d).filter(|&b| b != axis).map(|b| grid.k_axes()[b].weight(m[b])).product();
            (m[axis], w)
        })
        .collect();
    let mut acc = vec![CompensatedSum::default(); nxa * nka];
    let nk = grid.nk_total();
    for i in 0..grid.nx_total() {
        let (ia, w_i) = wx(i);
        for (j, &(ja, w_j)) in k_info.iter().enumerate() {
            acc[ia * nka + ja].add(w_i * w_j * f.values[i * nk + j]);
        }
    }
    Ok(acc.into_iter().map(|s| s.value()).collect())
}

/// Diagnostics sampled over a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ErrorSeries {
    pub times: Vec<f64>,
    pub eps2: Vec<f64>,
    pub eps_inf: Vec<f64>,
    pub eps_mass: Vec<f64>,
    pub min_marginal: Vec<f64>,
}

impl ErrorSeries {
    pub const CSV_HEADER: &'static str = "t,eps_inf,eps_2,eps_mass,min_marginal";

    pub fn push(&mut self, t: f64, eps_inf: f64, eps2: f64, eps_mass: f64, min_marginal: f64) {
        self.times.push(t);
        self.eps_inf.push(eps_inf);
        self.eps2.push(eps2);
        self.eps_mass.push(eps_mass);
        self.min_marginal.push(min_marginal);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Sample `(f, reference, f0)` and append one row.
    pub fn record(&mut self, f: &StateField, reference: Option<&[f64]>, f0: &[f64], grid: &PhaseGrid) -> Result<()> {
        let (ei, e2) = match reference {
            Some(r) => (eps_inf(f, r)?, eps_2(f, r, grid)?),
            None => (f64::NAN, f64::NAN),
        };
        self.push(f.time, ei, e2, eps_mass(f, f0, grid)?, min_marginal(f, grid)?);
        Ok(())
    }

    /// CSV with a header row; floats carry 17 significant digits.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.times[i], self.eps_inf[i], self.eps2[i], self.eps_mass[i], self.min_marginal[i]
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> PhaseGrid {
        PhaseGrid::two_d(Axis::nodal(-2.0, 2.0, 9).unwrap(), Axis::momentum(1.5, 6).unwrap(), 1.0, 1.0).unwrap()
    }

    #[test]
    fn identical_fields() {
        let g = grid();
        let f = StateField::from_fn(&g, 0.0, |x, k| (x[0] * k[0]).cos());
        assert_eq!(eps_inf(&f, &f.values).unwrap(), 0.0);
        assert_eq!(eps_2(&f, &f.values, &g).unwrap(), 0.0);
        assert_eq!(eps_mass(&f, &f.values, &g).unwrap(), 0.0);
    }

    #[test]
    fn single_point_difference() {
        let g = grid();
        let f = StateField::zeros(&g, 0.0);
        let mut r = f.values.clone();
        r[17] = -0.25;
        assert_eq!(eps_inf(&f, &r).unwrap(), 0.25);
        assert!(eps_inf(&f, &r[1..]).is_err());
    }

    #[test]
    fn constant_difference_l2() {
        let g = grid();
        let f = StateField::from_values(&g, vec![0.5; g.len()], 0.0).unwrap();
        let zero = vec![0.0; g.len()];
        let vol = 4.0 * 3.0;
        assert!((eps_2(&f, &zero, &g).unwrap() - 0.5 * f64::sqrt(vol)).abs() < 1e-14);
        let f2 = StateField::from_values(&g, vec![1.0; g.len()], 0.0).unwrap();
        assert!((eps_2(&f2, &zero, &g).unwrap() - 2.0 * eps_2(&f, &zero, &g).unwrap()).abs() < 1e-14);
        assert!((total_mass(&f.values, &g).unwrap() - 0.5 * vol).abs() < 1e-13);
    }

    #[test]
    fn separable_marginal() {
        let g = grid();
        let f = StateField::from_fn(&g, 0.0, |x, k| (1.0 + x[0] * x[0]) * (2.0 + k[0]));
        let p = marginal_density(&f, &g).unwrap();
        let sum_w: f64 = g.k_axes()[0].points().iter().map(|k| (2.0 + k) * g.k_axes()[0].spacing()).sum();
        for (i, x) in g.x_axes()[0].points().iter().enumerate() {
            assert!((p[i] - (1.0 + x * x) * sum_w).abs() < 1e-13);
        }
        assert!(min_marginal(&f, &g).unwrap() > 0.0);
    }

    #[test]
    fn reduced_wigner_two_d_identity_and_product() {
        let g = grid();
        let f = StateField::from_fn(&g, 0.0, |x, k| x[0] + 10.0 * k[0]);
        assert_eq!(reduced_wigner(&f, &g, 0).unwrap(), f.values);

        let xa = Axis::nodal(-1.0, 1.0, 5).unwrap();
        let ka = Axis::momentum(1.0, 4).unwrap();
        let g4 = PhaseGrid::new(vec![xa.clone(), xa.clone()], vec![ka.clone(), ka.clone()], 1.0, 1.0).unwrap();
        let f4 = StateField::from_fn(&g4, 0.0, |x, k| (1.0 + x[0]) * (2.0 + k[0]) * (3.0 - x[1] * x[1]) * (1.0 + k[1] * k[1]));
        let w = reduced_wigner(&f4, &g4, 0).unwrap();
        let int_x1: f64 = (0..5).map(|i| xa.weight(i) * (3.0 - xa.point(i).powi(2))).sum();
        let int_k1: f64 = (0..4).map(|j| ka.weight(j) * (1.0 + ka.point(j).powi(2))).sum();
        for i in 0..5 {
            for j in 0..4 {
                let want = (1.0 + xa.point(i)) * (2.0 + ka.point(j)) * int_x1 * int_k1;
                assert!((w[i * 4 + j] - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn csv_layout() {
        let mut s = ErrorSeries::default();
        s.push(0.05, 1e-3, 2e-3, 0.0, -1.5);
        let csv = s.to_csv_string();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,eps_inf,eps_2,eps_mass,min_marginal");
        let row = lines.next().unwrap();
        assert_eq!(row.split(',').count(), 5);
        assert_eq!(row.split(',').next().unwrap().parse::<f64>().unwrap(), 0.05);
    }

    #[test]
    fn compensated_sum_is_order_stable() {
        let mut s = CompensatedSum::default();
        for v in [1e16, 1.0, -1e16, 1.0] {
            s.add(v);
        }
        assert_eq!(s.value(), 2.0);
    }
}
