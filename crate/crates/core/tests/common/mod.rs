//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use chasm::grid::Axis;

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Cubic B-spline of unit spacing centred at 0.
pub fn cubic_b(t: f64) -> f64 {
    let a = t.abs();
    if a >= 2.0 {
        0.0
    } else if a >= 1.0 {
        (2.0 - a).powi(3) / 6.0
    } else {
        2.0 / 3.0 - a * a + a * a * a / 2.0
    }
}

/// End conditions of the dense oracle.
#[derive(Clone, Copy)]
pub enum Ends {
    Slopes(f64, f64),
    Natural,
}

/// The `(N+3)x(N+3)` interpolation matrix assembled from basis values at the
/// nodes, closed by slope rows (`natural = false`) or second-derivative rows.
pub fn dense_system(n: usize, h: f64, natural: (bool, bool)) -> Vec<Vec<f64>> {
    let size = n + 3;
    let mut a = vec![vec![0.0; size]; size];
    // basis nu (storage nu+1) at node i: value, slope and second derivative depend on i - nu
    let slope = |d: i64| match d {
        1 => -0.5 / h,
        -1 => 0.5 / h,
        _ => 0.0,
    };
    let second = |d: i64| match d {
        0 => -2.0 / (h * h),
        1 | -1 => 1.0 / (h * h),
        _ => 0.0,
    };
    for i in 0..=n {
        for nu in -1..=(n as i64 + 1) {
            a[i + 1][(nu + 1) as usize] = cubic_b((i as i64 - nu) as f64);
        }
    }
    for (row, node, nat) in [(0usize, 0i64, natural.0), (size - 1, n as i64, natural.1)] {
        for nu in -1..=(n as i64 + 1) {
            a[row][(nu + 1) as usize] = if nat { second(node - nu) } else { slope(node - nu) };
        }
    }
    a
}

/// Coefficients `eta_{-1}..eta_{N+1}` from the full interpolation system.
pub fn dense_spline(samples: &[f64], h: f64, ends: Ends) -> Vec<f64> {
    let n = samples.len() - 1;
    let natural = matches!(ends, Ends::Natural);
    let a = dense_system(n, h, (natural, natural));
    let mut b = vec![0.0; n + 3];
    b[1..=n + 1].copy_from_slice(samples);
    if let Ends::Slopes(l, r) = ends {
        b[0] = l;
        b[n + 2] = r;
    }
    dense_solve(a, b)
}

/// Evaluate a spline from its coefficients by summing basis functions.
pub fn dense_eval(eta: &[f64], axis: &Axis, x: f64) -> f64 {
    let h = axis.spacing();
    eta.iter()
        .enumerate()
        .map(|(s, e)| e * cubic_b((x - axis.lo()) / h - (s as f64 - 1.0)))
        .sum()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
