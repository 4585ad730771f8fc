use nalgebra::DVector;

use crate::error::Result;
use crate::numkit::fd::fd_jacobian;

/// A vector field on a Euclidean chart of R^n, evaluated pointwise.
pub struct EuclideanVectorField {
    dimension: usize,
    evaluator: Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>,
}

impl EuclideanVectorField {
    pub fn new<F>(dimension: usize, evaluator: F) -> Self
    where
        F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        Self {
            dimension,
            evaluator: Box::new(evaluator),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn eval(&self, q: &DVector<f64>) -> DVector<f64> {
        (self.evaluator)(q)
    }
}

/// Jacobi-Lie bracket [X, Y](q) = DY(q) X(q) - DX(q) Y(q) by central differences.
pub fn lie_bracket_euclidean(
    x: &EuclideanVectorField,
    y: &EuclideanVectorField,
    q: &DVector<f64>,
    h: f64,
) -> Result<DVector<f64>> {
    assert_eq!(x.dimension(), y.dimension(), "bracket: field dimensions differ");
    let dy = fd_jacobian(|p| y.eval(p), q, h)?;
    let dx = fd_jacobian(|p| x.eval(p), q, h)?;
    Ok(dy * x.eval(q) - dx * y.eval(q))
}
