//! Multi-dimensional Veselova system on SO(n).
//!
//! Rigid body with inertia operator I(u ∧ v) = (Au) ∧ (Av), constrained so
//! that the spatial angular velocity lies in e_n ∧ R^n. The system is an
//! SO(n-1)-Chaplygin system over the sphere S^{n-1} with Poisson vector
//! gamma = g^{-1} e_n; it is phi-simple with phi = -1/2 ln(A gamma, gamma).
//!
//! Two realizations are provided. The chart realization works on the
//! northern-hemisphere chart gamma = (s, sqrt(1 - |s|^2)) and installs the
//! closed forms for K and C; it is the default for simulation. The group
//! realization carries the left-trivialized frame fields on SO(n) and
//! exercises the generic finite-difference pipeline.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{ConfigModel, GroupModel, GyroCoefficients, SystemDefinition};
use crate::numkit::{wedge, LeftTrivializedField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VeselovaRealization {
    /// Closed-form K and C on the hemisphere chart.
    Chart,
    /// Left-trivialized frame fields on SO(n), numeric pipeline.
    Group,
}

#[derive(Debug, Clone)]
pub struct VeselovaParams {
    /// Diagonal entries of A, length n >= 3.
    pub inertia_diag: Vec<f64>,
    /// Chart floor: the chart is restricted to gamma_n >= delta.
    pub delta: f64,
    pub realization: VeselovaRealization,
}

impl VeselovaParams {
    pub fn new(inertia_diag: Vec<f64>) -> Self {
        Self {
            inertia_diag,
            delta: 0.1,
            realization: VeselovaRealization::Chart,
        }
    }
}

/// Lift a chart point s in R^{n-1} to gamma on the upper hemisphere.
pub fn veselova_gamma(s: &DVector<f64>) -> DVector<f64> {
    let r = s.len();
    let sq = 1.0 - s.norm_squared();
    let gamma_n = if sq > 0.0 { sq.sqrt() } else { 0.0 };
    let mut gamma = DVector::zeros(r + 1);
    for i in 0..r {
        gamma[i] = s[i];
    }
    gamma[r] = gamma_n;
    gamma
}

fn a_gamma_gamma(a: &[f64], gamma: &DVector<f64>) -> f64 {
    gamma.iter().zip(a).map(|(g, ai)| ai * g * g).sum()
}

/// phi(gamma) = -1/2 ln(A gamma, gamma).
pub fn veselova_phi(a: &[f64], s: &DVector<f64>) -> f64 {
    -0.5 * a_gamma_gamma(a, &veselova_gamma(s)).ln()
}

/// Closed-form reduced metric:
/// K_kl = (A g, g)(a_l d_kl + a_n g_k g_l / g_n^2) - g_k g_l (a_n - a_k)(a_n - a_l).
pub fn veselova_oracle_k(a: &[f64], gamma: &DVector<f64>) -> DMatrix<f64> {
    let n = a.len();
    let r = n - 1;
    let agg = a_gamma_gamma(a, gamma);
    let gn2 = gamma[r] * gamma[r];
    DMatrix::from_fn(r, r, |k, l| {
        let delta = if k == l { a[l] } else { 0.0 };
        agg * (delta + a[n - 1] * gamma[k] * gamma[l] / gn2)
            - gamma[k] * gamma[l] * (a[n - 1] - a[k]) * (a[n - 1] - a[l])
    })
}

/// Closed-form gyroscopic coefficients:
/// C_ij^k = (-g_j (a_j - a_n) d_ik + g_i (a_i - a_n) d_jk) / (A g, g).
pub fn veselova_oracle_c(a: &[f64], gamma: &DVector<f64>) -> GyroCoefficients {
    let n = a.len();
    let r = n - 1;
    let agg = a_gamma_gamma(a, gamma);
    let s = DVector::from_fn(r, |i, _| gamma[i]);
    let mut c = GyroCoefficients::zeros(r, s);
    for i in 0..r {
        for j in (i + 1)..r {
            for k in 0..r {
                let mut v = 0.0;
                if i == k {
                    v -= gamma[j] * (a[j] - a[n - 1]);
                }
                if j == k {
                    v += gamma[i] * (a[i] - a[n - 1]);
                }
                c.set_pair(i, j, k, v / agg);
            }
        }
    }
    c
}

/// Closed-form pairing <[X_i, X_j], X_l> used to validate the group-numeric
/// pipeline term by term (indices zero-based, in 0..n-1).
pub fn oracle_bracket_pairing(
    a: &[f64],
    gamma: &DVector<f64>,
    i: usize,
    j: usize,
    l: usize,
) -> Result<f64> {
    let n = a.len();
    let r = n - 1;
    for idx in [i, j, l] {
        if idx >= r {
            return Err(Error::IndexOutOfRange(idx));
        }
    }
    let gn2 = gamma[r] * gamma[r];
    let an = a[n - 1];
    let mut v = an * gamma[i] * gamma[j] * gamma[l] / gn2 * (a[i] - a[j]);
    if j == l {
        v += a[j] * gamma[i] * (a[i] - an);
    }
    if i == l {
        v -= a[i] * gamma[j] * (a[j] - an);
    }
    Ok(v)
}

fn unit(n: usize, i: usize) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    v[i] = 1.0;
    v
}

/// Section gamma -> g with g gamma = e_n and det g = +1, built from a single
/// Householder reflection composed with a sign flip of the first axis.
pub fn veselova_section(s: &DVector<f64>) -> DMatrix<f64> {
    let gamma = veselova_gamma(s);
    let n = gamma.len();
    let en = unit(n, n - 1);
    let w = &gamma - &en;
    let ww = w.norm_squared();
    let mut g = if ww < 1e-30 {
        DMatrix::identity(n, n)
    } else {
        // Householder: maps gamma to e_n, det -1; flip the first axis to land
        // in SO(n).
        let h = DMatrix::identity(n, n) - (2.0 / ww) * (&w * w.transpose());
        let mut d = DMatrix::identity(n, n);
        d[(0, 0)] = -1.0;
        d * h
    };
    if ww < 1e-30 {
        g = DMatrix::identity(n, n);
    }
    g
}

fn validate(params: &VeselovaParams) -> Result<usize> {
    let n = params.inertia_diag.len();
    if n < 3 {
        return Err(Error::InvalidParams(format!("veselova requires n >= 3, got n = {n}")));
    }
    if params.inertia_diag.iter().any(|&ai| ai <= 0.0 || !ai.is_finite()) {
        return Err(Error::InvalidParams("inertia entries must be positive".into()));
    }
    if !(0.0 < params.delta && params.delta < 1.0) {
        return Err(Error::InvalidParams(format!(
            "chart floor delta must lie in (0, 1), got {}",
            params.delta
        )));
    }
    Ok(n)
}

pub fn make_veselova(params: &VeselovaParams) -> Result<SystemDefinition> {
    let n = validate(params)?;
    let r = n - 1;
    let a = params.inertia_diag.clone();
    let delta = params.delta;

    let frame: Vec<LeftTrivializedField> = (0..r)
        .map(|i| {
            LeftTrivializedField::new(n, move |g: &DMatrix<f64>| {
                let gamma = g.transpose() * unit(g.nrows(), g.nrows() - 1);
                let nn = gamma.len();
                let dir = unit(nn, i) - (gamma[i] / gamma[nn - 1]) * unit(nn, nn - 1);
                wedge(&gamma, &dir)
            })
        })
        .collect();

    let a_inertia = a.clone();
    let inertia = move |xi: &DMatrix<f64>| {
        let ad = DMatrix::from_diagonal(&DVector::from_column_slice(&a_inertia));
        &ad * xi * &ad
    };

    let model = GroupModel {
        n,
        frame,
        inertia: Box::new(inertia),
        section: Box::new(|s: &DVector<f64>| veselova_section(s)),
    };

    let label = format!("veselova(n={n},{:?})", params.realization);
    let mut sys = SystemDefinition::new(ConfigModel::Group(model), r, label).with_domain(
        move |s: &DVector<f64>| {
            let gamma_n = veselova_gamma(s)[s.len()];
            if gamma_n >= delta {
                Ok(())
            } else {
                Err(Error::ChartFloorViolation { gamma_n, delta })
            }
        },
    );

    if params.realization == VeselovaRealization::Chart {
        let ak = a.clone();
        let ac = a.clone();
        sys = sys
            .with_metric_closed_form(move |s: &DVector<f64>| {
                veselova_oracle_k(&ak, &veselova_gamma(s))
            })
            .with_gyro_closed_form(move |s: &DVector<f64>| {
                veselova_oracle_c(&ac, &veselova_gamma(s))
            });
    }
    Ok(sys)
}
