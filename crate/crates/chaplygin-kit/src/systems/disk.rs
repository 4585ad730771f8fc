//! Vertical rolling disk on the plane.
//!
//! Configuration (x, y, phi, theta) with rolling constraints
//! x' = R cos(phi) theta', y' = R sin(phi) theta'. The gyroscopic tensor
//! vanishes identically; the reduced dynamics is the geodesic flow of the
//! constant metric diag(I, J + m R^2) on the (phi, theta) torus.

use nalgebra::{dvector, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{ConfigModel, EuclideanModel, SystemDefinition};
use crate::numkit::EuclideanVectorField;

#[derive(Debug, Clone)]
pub struct DiskParams {
    pub mass: f64,
    pub inertia_normal: f64,
    pub inertia_axial: f64,
    pub radius: f64,
}

pub fn make_vertical_disk(params: &DiskParams) -> Result<SystemDefinition> {
    let DiskParams {
        mass,
        inertia_normal,
        inertia_axial,
        radius,
    } = *params;
    for (name, v) in [
        ("mass", mass),
        ("inertia_normal", inertia_normal),
        ("inertia_axial", inertia_axial),
        ("radius", radius),
    ] {
        if v <= 0.0 || !v.is_finite() {
            return Err(Error::InvalidParams(format!("disk {name} must be positive, got {v}")));
        }
    }
    let frame = vec![
        EuclideanVectorField::new(4, |_: &DVector<f64>| dvector![0.0, 0.0, 1.0, 0.0]),
        EuclideanVectorField::new(4, move |q: &DVector<f64>| {
            dvector![radius * q[2].cos(), radius * q[2].sin(), 0.0, 1.0]
        }),
    ];
    let metric = move |_q: &DVector<f64>| {
        DMatrix::from_diagonal(&dvector![mass, mass, inertia_normal, inertia_axial])
    };
    let model = EuclideanModel {
        dim: 4,
        frame,
        metric: Box::new(metric),
        section: Box::new(|s: &DVector<f64>| dvector![0.0, 0.0, s[0], s[1]]),
    };
    Ok(SystemDefinition::new(
        ConfigModel::Euclidean(model),
        2,
        format!("disk(m={mass},I={inertia_normal},J={inertia_axial},R={radius})"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{gyroscopic_coefficients, reduced_metric};

    fn disk() -> SystemDefinition {
        make_vertical_disk(&DiskParams {
            mass: 2.0,
            inertia_normal: 0.5,
            inertia_axial: 0.25,
            radius: 1.5,
        })
        .unwrap()
    }

    #[test]
    fn metric_is_constant_diagonal() {
        let sys = disk();
        for s in [dvector![0.0, 0.0], dvector![1.1, -2.3], dvector![3.0, 0.4]] {
            let km = reduced_metric(&sys, &s).unwrap();
            let expect = DMatrix::from_diagonal(&dvector![0.5, 0.25 + 2.0 * 2.25]);
            assert!((&km.k - expect).norm() < 1e-9);
        }
    }

    #[test]
    fn gyroscopic_tensor_vanishes() {
        let sys = disk();
        for s in [dvector![0.3, 1.0], dvector![-2.0, 0.7]] {
            let c = gyroscopic_coefficients(&sys, &s).unwrap();
            assert!(c.max_abs() < 1e-7);
        }
    }

    #[test]
    fn rejects_nonpositive_params() {
        let mut p = DiskParams {
            mass: 1.0,
            inertia_normal: 1.0,
            inertia_axial: 1.0,
            radius: 1.0,
        };
        p.radius = 0.0;
        assert!(make_vertical_disk(&p).is_err());
    }
}
