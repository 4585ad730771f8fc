//! Conformal-factor sources for the hamiltonise command.

use chaplygin_kit::diagnostics::Grid;
use chaplygin_kit::geometry::{gyroscopic_coefficients, SystemDefinition};
use nalgebra::DVector;

/// phi reconstructed from the gyroscopic coefficients: the gradient
/// estimate d_i phi = -mean_j C[i][j][j] is integrated along the straight
/// segment from `anchor` by composite Simpson quadrature. Valid once the
/// phi-simple detector has accepted the system.
pub struct ReconstructedPhi<'a> {
    sys: &'a SystemDefinition,
    anchor: DVector<f64>,
}

const SEGMENT_SUBDIVISIONS: usize = 32;

impl<'a> ReconstructedPhi<'a> {
    pub fn new(sys: &'a SystemDefinition, anchor: DVector<f64>) -> Self {
        Self { sys, anchor }
    }

    fn gradient(&self, s: &DVector<f64>) -> DVector<f64> {
        let r = self.sys.shape_dim();
        match gyroscopic_coefficients(self.sys, s) {
            Ok(c) => DVector::from_fn(r, |i, _| {
                let sum: f64 = (0..r).filter(|&j| j != i).map(|j| -c.get(i, j, j)).sum();
                sum / (r - 1) as f64
            }),
            Err(_) => DVector::from_element(r, f64::NAN),
        }
    }

    pub fn eval(&self, s: &DVector<f64>) -> f64 {
        let dir = s - &self.anchor;
        let mut total = 0.0;
        let h = 1.0 / SEGMENT_SUBDIVISIONS as f64;
        for node in 0..=SEGMENT_SUBDIVISIONS {
            let t = node as f64 * h;
            let x = &self.anchor + t * &dir;
            let weight = if node == 0 || node == SEGMENT_SUBDIVISIONS {
                1.0
            } else if node % 2 == 1 {
                4.0
            } else {
                2.0
            };
            total += weight * self.gradient(&x).dot(&dir);
        }
        total * h / 3.0
    }
}

/// Multilinear interpolation of tabulated phi values on a rectangular grid.
pub struct TabulatedPhi {
    grid: Grid,
    values: Vec<f64>,
}

impl TabulatedPhi {
    pub fn new(grid: Grid, values: Vec<f64>) -> Self {
        assert_eq!(grid.len(), values.len());
        Self { grid, values }
    }

    pub fn eval(&self, s: &DVector<f64>) -> f64 {
        let r = self.grid.dim();
        let mut cell = vec![0usize; r];
        let mut frac = vec![0.0f64; r];
        for a in 0..r {
            let rel = (s[a] - self.grid.origin[a]) / self.grid.spacing[a];
            let max_cell = self.grid.shape[a] - 2;
            let idx = rel.floor().clamp(0.0, max_cell as f64) as usize;
            cell[a] = idx;
            frac[a] = rel - idx as f64;
        }
        let mut value = 0.0;
        for corner in 0..(1usize << r) {
            let mut weight = 1.0;
            let mut idx = cell.clone();
            for a in 0..r {
                if corner >> a & 1 == 1 {
                    idx[a] += 1;
                    weight *= frac[a];
                } else {
                    weight *= 1.0 - frac[a];
                }
            }
            value += weight * self.values[self.grid.flat(&idx)];
        }
        value
    }
}
