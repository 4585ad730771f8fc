use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default central-difference step: cbrt(eps) * max(1, |x|).
///
/// Balances truncation O(h^2) against roundoff O(eps/h) for second-order
/// central differences.
pub fn default_step(x: &DVector<f64>) -> f64 {
    f64::EPSILON.cbrt() * f64::max(1.0, x.norm())
}

fn check_finite(v: &DVector<f64>) -> Result<()> {
    for (i, x) in v.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::NonFiniteEvaluation { coordinate: i });
        }
    }
    Ok(())
}

/// Central-difference Jacobian of `f: R^n -> R^m` at `x`.
///
/// Entry (i, j) is (f_i(x + h e_j) - f_i(x - h e_j)) / (2h).
pub fn fd_jacobian<F>(f: F, x: &DVector<f64>, h: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    assert!(h > 0.0, "fd_jacobian: step must be positive");
    let n = x.len();
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        let fp = f(&xp);
        check_finite(&fp)?;
        let fm = f(&xm);
        check_finite(&fm)?;
        cols.push((fp - fm) / (2.0 * h));
    }
    let m = cols[0].len();
    Ok(DMatrix::from_fn(m, n, |i, j| cols[j][i]))
}

/// Central-difference gradient of a scalar function.
pub fn fd_gradient<F>(f: F, x: &DVector<f64>, h: f64) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> f64,
{
    assert!(h > 0.0, "fd_gradient: step must be positive");
    let n = x.len();
    let mut g = DVector::zeros(n);
    for j in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        let d = (f(&xp) - f(&xm)) / (2.0 * h);
        if !d.is_finite() {
            return Err(Error::NonFiniteEvaluation { coordinate: j });
        }
        g[j] = d;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn identity_jacobian() {
        let x = dvector![0.3, -1.2];
        let jac = fd_jacobian(|v| v.clone(), &x, 1e-5).unwrap();
        assert!((jac - DMatrix::identity(2, 2)).norm() < 1e-10);
    }

    #[test]
    fn polynomial_jacobian() {
        // f(x, y) = (x*y, y^2) at (1, 2): [[2, 1], [0, 4]]
        let f = |v: &DVector<f64>| dvector![v[0] * v[1], v[1] * v[1]];
        let jac = fd_jacobian(f, &dvector![1.0, 2.0], 1e-5).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 4.0]);
        assert!((jac - expect).norm() < 1e-8);
    }

    #[test]
    fn particle_lift_jacobian() {
        // hor dx = (1, 0, y) on R^3: the only nonzero entry is d(row z)/dy = 1.
        let f = |v: &DVector<f64>| dvector![1.0, 0.0, v[1]];
        let jac = fd_jacobian(f, &dvector![0.0, 1.0, 0.0], 1e-5).unwrap();
        let mut expect = DMatrix::zeros(3, 3);
        expect[(2, 1)] = 1.0;
        assert!((jac - expect).norm() < 1e-10);
    }

    #[test]
    fn non_finite_reported() {
        let f = |v: &DVector<f64>| dvector![v[0].sqrt()];
        let err = fd_jacobian(f, &dvector![0.0], 1e-5).unwrap_err();
        assert!(matches!(err, Error::NonFiniteEvaluation { coordinate: 0 }));
    }

    #[test]
    fn quadratic_gradient_exact() {
        let f = |v: &DVector<f64>| v[0] * v[0] + 3.0 * v[0] * v[1];
        let g = fd_gradient(f, &dvector![2.0, -1.0], 1e-5).unwrap();
        assert!((g - dvector![1.0, 6.0]).norm() < 1e-9);
    }
}
