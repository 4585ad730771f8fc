use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Symmetry tolerance for SPD solves.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Lower Cholesky factor, reporting the failing pivot on breakdown.
fn cholesky_with_pivot(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        l[(j, j)] = d.sqrt();
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / l[(j, j)];
        }
    }
    Ok(l)
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    let defect = (m - m.transpose()).norm();
    if defect > SYMMETRY_TOL * f64::max(1.0, m.norm()) {
        return Err(Error::NotPositiveDefinite { pivot: 0 });
    }
    Ok(())
}

/// Check that `m` factors as SPD; returns the Cholesky factor.
pub fn spd_factor_check(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(m)?;
    cholesky_with_pivot(m)
}

/// Solve M x = b for SPD M by Cholesky factorization.
pub fn spd_solve(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if b.len() != m.nrows() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: b.len(),
        });
    }
    let l = spd_factor_check(m)?;
    let y = l
        .solve_lower_triangular(b)
        .ok_or(Error::NotPositiveDefinite { pivot: 0 })?;
    l.transpose()
        .solve_upper_triangular(&y)
        .ok_or(Error::NotPositiveDefinite { pivot: 0 })
}

/// Solve M X = B columnwise; also used for SPD inversion with B = I.
pub fn spd_solve_matrix(m: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let l = spd_factor_check(m)?;
    let mut out = DMatrix::zeros(m.nrows(), b.ncols());
    for j in 0..b.ncols() {
        let col = DVector::from(b.column(j));
        let y = l
            .solve_lower_triangular(&col)
            .ok_or(Error::NotPositiveDefinite { pivot: 0 })?;
        let x = l
            .transpose()
            .solve_upper_triangular(&y)
            .ok_or(Error::NotPositiveDefinite { pivot: 0 })?;
        out.set_column(j, &x);
    }
    Ok(out)
}
