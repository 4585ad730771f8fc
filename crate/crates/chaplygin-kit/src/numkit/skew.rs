use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// u ∧ v = u v^T - v u^T.
pub fn wedge(u: &DVector<f64>, v: &DVector<f64>) -> DMatrix<f64> {
    u * v.transpose() - v * u.transpose()
}

/// Killing pairing (xi, eta)_k = -1/2 tr(xi eta) on skew matrices.
///
/// Symmetric and positive definite on so(n); the wedge basis
/// {e_a ∧ e_b, a < b} is orthonormal with respect to it.
pub fn killing_pairing(xi: &DMatrix<f64>, eta: &DMatrix<f64>) -> Result<f64> {
    if xi.nrows() != eta.nrows() || xi.ncols() != eta.ncols() {
        return Err(Error::DimensionMismatch {
            expected: xi.nrows(),
            got: eta.nrows(),
        });
    }
    Ok(-0.5 * (xi * eta).trace())
}

/// Ordered basis e_a ∧ e_b (a < b) of skew n x n matrices, with index maps
/// between so(n) and R^{n(n-1)/2}.
pub struct SkewBasis {
    n: usize,
    pairs: Vec<(usize, usize)>,
}

impl SkewBasis {
    pub fn new(n: usize) -> Self {
        let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
        for a in 0..n {
            for b in (a + 1)..n {
                pairs.push((a, b));
            }
        }
        Self { n, pairs }
    }

    pub fn dim(&self) -> usize {
        self.pairs.len()
    }

    pub fn element(&self, idx: usize) -> DMatrix<f64> {
        let (a, b) = self.pairs[idx];
        let mut m = DMatrix::zeros(self.n, self.n);
        m[(a, b)] = 1.0;
        m[(b, a)] = -1.0;
        m
    }

    /// Coordinates of a skew matrix in the wedge basis.
    pub fn flatten(&self, xi: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.pairs.iter().map(|&(a, b)| xi[(a, b)]))
    }

    pub fn unflatten(&self, coords: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (idx, &(a, b)) in self.pairs.iter().enumerate() {
            m[(a, b)] = coords[idx];
            m[(b, a)] = -coords[idx];
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn e(n: usize, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        v
    }

    #[test]
    fn wedge_basis_is_killing_orthonormal() {
        let basis = SkewBasis::new(4);
        for i in 0..basis.dim() {
            for j in 0..basis.dim() {
                let p = killing_pairing(&basis.element(i), &basis.element(j)).unwrap();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((p - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn killing_product_formula() {
        // (u1 ∧ v1, u2 ∧ v2)_k = (u1,u2)(v1,v2) - (u1,v2)(u2,v1)
        let xi = wedge(&e(3, 0), &e(3, 1));
        let eta = wedge(&e(3, 1), &e(3, 2));
        assert!(killing_pairing(&xi, &eta).unwrap().abs() < 1e-14);
        assert!((killing_pairing(&xi, &xi).unwrap() - 1.0).abs() < 1e-14);
        assert!((killing_pairing(&(2.0 * &xi), &xi).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn flatten_round_trip() {
        let basis = SkewBasis::new(5);
        let coords = DVector::from_fn(basis.dim(), |i, _| (i as f64 + 1.0) * 0.3);
        let back = basis.flatten(&basis.unflatten(&coords));
        assert!((back - coords).norm() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_detected() {
        let a = DMatrix::zeros(3, 3);
        let b = DMatrix::zeros(4, 4);
        assert!(killing_pairing(&a, &b).is_err());
    }

    #[test]
    fn killing_on_random_wedges() {
        let u1 = dvector![0.3, -1.0, 0.7];
        let v1 = dvector![1.1, 0.2, -0.5];
        let u2 = dvector![-0.4, 0.9, 0.6];
        let v2 = dvector![0.8, -0.1, 1.3];
        let lhs = killing_pairing(&wedge(&u1, &v1), &wedge(&u2, &v2)).unwrap();
        let rhs = u1.dot(&u2) * v1.dot(&v2) - u1.dot(&v2) * u2.dot(&v1);
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
