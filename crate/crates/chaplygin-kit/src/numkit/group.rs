use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default orthogonality tolerance for SO(n) membership checks.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

/// ||g^T g - I|| in the Frobenius norm.
pub fn orthogonality_defect(g: &DMatrix<f64>) -> f64 {
    let n = g.nrows();
    (g.transpose() * g - DMatrix::identity(n, n)).norm()
}

pub fn check_special_orthogonal(g: &DMatrix<f64>, tol: f64) -> Result<()> {
    let defect = orthogonality_defect(g);
    if defect > tol || g.determinant() < 0.0 {
        return Err(Error::InvalidGroupElement { defect, tol });
    }
    Ok(())
}

/// Matrix exponential of a skew matrix (scaling and squaring with Pade
/// approximation, via nalgebra).
pub fn expm_skew(xi: &DMatrix<f64>) -> DMatrix<f64> {
    xi.exp()
}

/// Nearest orthogonal matrix in the Frobenius sense, by SVD polar projection.
/// Used to remove orthogonality drift accumulated during integration.
pub fn polar_project(g: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = g.clone().svd(true, true);
    svd.u.unwrap() * svd.v_t.unwrap()
}

/// A vector field on SO(n) in left trivialization: g maps to xi = g^{-1} g'
/// in so(n).
pub struct LeftTrivializedField {
    group_dim: usize,
    evaluator: Box<dyn Fn(&DMatrix<f64>) -> DMatrix<f64> + Send + Sync>,
}

impl LeftTrivializedField {
    pub fn new<F>(group_dim: usize, evaluator: F) -> Self
    where
        F: Fn(&DMatrix<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    {
        Self {
            group_dim,
            evaluator: Box::new(evaluator),
        }
    }

    pub fn group_dim(&self) -> usize {
        self.group_dim
    }

    pub fn eval(&self, g: &DMatrix<f64>) -> DMatrix<f64> {
        (self.evaluator)(g)
    }
}

fn directional_derivative(
    y: &LeftTrivializedField,
    g: &DMatrix<f64>,
    direction: &DMatrix<f64>,
    h: f64,
) -> DMatrix<f64> {
    // d/dt|_0 Y(g exp(t xi)) by central differences.
    let step_p = g * expm_skew(&(h * direction));
    let step_m = g * expm_skew(&(-h * direction));
    (y.eval(&step_p) - y.eval(&step_m)) / (2.0 * h)
}

/// Lie bracket of left-trivialized vector fields on SO(n):
/// [X, Y](g) = D_X Y(g) - D_Y X(g) + [X(g), Y(g)].
pub fn lie_bracket_left_trivialized(
    x: &LeftTrivializedField,
    y: &LeftTrivializedField,
    g: &DMatrix<f64>,
    h: f64,
) -> Result<DMatrix<f64>> {
    check_special_orthogonal(g, ORTHOGONALITY_TOL)?;
    let xg = x.eval(g);
    let yg = y.eval(g);
    let dxy = directional_derivative(y, g, &xg, h);
    let dyx = directional_derivative(x, g, &yg, h);
    Ok(dxy - dyx + (&xg * &yg - &yg * &xg))
}
