use crate::error::{Error, Result};
use crate::grid::PhaseGrid;

/// Samples of a phase-space distribution at one time, laid out as [`PhaseGrid::index`].
#[derive(Clone, Debug, PartialEq)]
pub struct StateField {
    pub values: Vec<f64>,
    pub shape: Vec<usize>,
    pub time: f64,
}

impl StateField {
    pub fn zeros(grid: &PhaseGrid, time: f64) -> Self {
        Self { values: vec![0.0; grid.len()], shape: grid.shape(), time }
    }

    pub fn from_values(grid: &PhaseGrid, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch { expected: grid.shape(), got: vec![values.len()] });
        }
        Ok(Self { values, shape: grid.shape(), time })
    }

    /// Sample `f(x, k)` on every grid point.
    pub fn from_fn(grid: &PhaseGrid, time: f64, f: impl Fn(&[f64], &[f64]) -> f64) -> Self {
        let ks: Vec<Vec<f64>> = (0..grid.nk_total()).map(|j| grid.k_coords(j)).collect();
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.nx_total() {
            let x = grid.x_coords(i);
            for k in &ks {
                values.push(f(&x, k));
            }
        }
        Self { values, shape: grid.shape(), time }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_shape(&self, grid: &PhaseGrid) -> Result<()> {
        if self.shape != grid.shape() || self.values.len() != grid.len() {
            return Err(Error::ShapeMismatch { expected: grid.shape(), got: self.shape.clone() });
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;

    #[test]
    fn from_fn_layout() {
        let g = PhaseGrid::two_d(Axis::nodal(0.0, 1.0, 3).unwrap(), Axis::momentum(1.0, 4).unwrap(), 1.0, 1.0).unwrap();
        let f = StateField::from_fn(&g, 0.0, |x, k| 10.0 * x[0] + k[0]);
        assert_eq!(f.values.len(), 12);
        assert_eq!(f.values[g.index(1, 2)], 10.0 * 0.5 + 0.0);
        assert!(f.check_shape(&g).is_ok());
        assert!(StateField::from_values(&g, vec![0.0; 5], 0.0).is_err());
    }
}
