//! Nonholonomic particle on R^3 with constraint z' = y x'.
//!
//! Lagrangian L = 1/2 (x'^2 + y'^2 + z'^2) + a y' z' - U(x, y) for |a| < 1.
//! Shape chart (x, y); horizontal lifts hor d/dx = d/dx + y d/dz and
//! hor d/dy = d/dy. The system has a basic invariant measure iff a = 0, in
//! which case it is phi-simple with phi(y) = -1/2 ln(1 + y^2).

use nalgebra::{dvector, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{ConfigModel, EuclideanModel, SystemDefinition};
use crate::numkit::EuclideanVectorField;

#[derive(Debug, Clone)]
pub enum ParticlePotential {
    Zero,
    /// U_a(x, y) = 1/4 ln(1 + (1 - a^2) y^2); with sigma = a x + p_y^2 this
    /// gives a non-basic invariant measure for every |a| < 1.
    UA,
}

#[derive(Debug, Clone)]
pub struct ParticleParams {
    pub a: f64,
    pub potential: ParticlePotential,
}

/// phi for the a = 0 particle.
pub fn particle_phi(s: &DVector<f64>) -> f64 {
    -0.5 * (1.0 + s[1] * s[1]).ln()
}

pub fn make_nonholonomic_particle(params: &ParticleParams) -> Result<SystemDefinition> {
    let a = params.a;
    if a.abs() >= 1.0 || !a.is_finite() {
        return Err(Error::InvalidParams(format!("particle requires |a| < 1, got {a}")));
    }
    let frame = vec![
        EuclideanVectorField::new(3, |q: &DVector<f64>| dvector![1.0, 0.0, q[1]]),
        EuclideanVectorField::new(3, |_: &DVector<f64>| dvector![0.0, 1.0, 0.0]),
    ];
    let metric = move |_q: &DVector<f64>| {
        DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, a, 0.0, a, 1.0])
    };
    let model = EuclideanModel {
        dim: 3,
        frame,
        metric: Box::new(metric),
        section: Box::new(|s: &DVector<f64>| dvector![s[0], s[1], 0.0]),
    };
    let sys = SystemDefinition::new(ConfigModel::Euclidean(model), 2, format!("particle(a={a})"));
    Ok(match params.potential {
        ParticlePotential::Zero => sys,
        ParticlePotential::UA => sys.with_potential(move |s: &DVector<f64>| {
            0.25 * (1.0 + (1.0 - a * a) * s[1] * s[1]).ln()
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_large_a() {
        let params = ParticleParams {
            a: 1.0,
            potential: ParticlePotential::Zero,
        };
        assert!(make_nonholonomic_particle(&params).is_err());
    }

    #[test]
    fn potential_u_a() {
        let params = ParticleParams {
            a: 0.3,
            potential: ParticlePotential::UA,
        };
        let sys = make_nonholonomic_particle(&params).unwrap();
        let expect = 0.25 * (1.0f64 + 0.91 * 4.0).ln();
        assert!((sys.potential(&dvector![5.0, 2.0]) - expect).abs() < 1e-14);
    }
}
