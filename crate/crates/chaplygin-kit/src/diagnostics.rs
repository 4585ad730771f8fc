//! Measure and Hamiltonisation diagnostics.
//!
//! Three related questions about a reduced system, each answered by a
//! sampled test on a rectangular grid in the shape chart or pointwise on
//! states:
//!
//! * is the one-form Theta_i = sum_j C_ji^j exact, i.e. does a basic
//!   invariant measure exist;
//! * is the gyroscopic tensor phi-simple, i.e. does a conformal factor
//!   e^phi Hamiltonise the flow after rescaling;
//! * does the flow satisfy the Liouville identity
//!   div X = -sum_{ij} K^{ij} Theta_i p_j pointwise and along trajectories.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::dynamics::{vector_field_flat, ReducedState, Trajectory};
use crate::geometry::{gyroscopic_coefficients, reduced_metric, theta, SystemDefinition};
use crate::numkit::{default_step, fd_gradient, fd_jacobian};

/// Rectangular sampling grid in the shape chart. Points along axis `a` are
/// `origin[a] + i * spacing[a]` for `i < shape[a]`; the flat ordering has
/// the last axis fastest.
#[derive(Debug, Clone)]
pub struct Grid {
    pub origin: DVector<f64>,
    pub spacing: DVector<f64>,
    pub shape: Vec<usize>,
}

impl Grid {
    pub fn from_bounds(lower: DVector<f64>, upper: DVector<f64>, points: &[usize]) -> Result<Self> {
        if lower.len() != upper.len() || lower.len() != points.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: points.len(),
            });
        }
        if points.iter().any(|&n| n < 3) {
            return Err(Error::InvalidParams(
                "grid needs at least 3 points per axis".into(),
            ));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| u <= l) {
            return Err(Error::InvalidParams("grid bounds must be increasing".into()));
        }
        let spacing = DVector::from_fn(lower.len(), |a, _| {
            (upper[a] - lower[a]) / (points[a] - 1) as f64
        });
        Ok(Self {
            origin: lower,
            spacing,
            shape: points.to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn indices(&self, flat: usize) -> Vec<usize> {
        let mut idx = vec![0usize; self.dim()];
        let mut rest = flat;
        for a in (0..self.dim()).rev() {
            idx[a] = rest % self.shape[a];
            rest /= self.shape[a];
        }
        idx
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(self.shape.iter())
            .fold(0, |acc, (i, n)| acc * n + i)
    }

    pub fn point_at(&self, idx: &[usize]) -> DVector<f64> {
        DVector::from_fn(self.dim(), |a, _| {
            self.origin[a] + idx[a] as f64 * self.spacing[a]
        })
    }

    pub fn point(&self, flat: usize) -> DVector<f64> {
        self.point_at(&self.indices(flat))
    }
}

#[derive(Debug, Clone)]
pub struct ExactnessReport {
    pub is_exact: bool,
    pub curl_residual_max: f64,
    pub loop_residuals: Vec<f64>,
    /// Reconstructed potential of the form, grid-flat order, pinned to 0 at
    /// the grid origin. Present only when the form tests exact.
    pub sigma_samples: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct PhiSimpleReport {
    pub is_phi_simple: bool,
    pub grad_phi_samples: Vec<DVector<f64>>,
    /// Reconstructed phi, grid-flat order, pinned to 0 at the grid origin.
    pub phi_samples: Option<Vec<f64>>,
    pub pattern_residual_max: f64,
    pub consistency_residual_max: f64,
    /// Curl residual of the gradient estimates; the integrability
    /// obstruction when the pointwise pattern holds.
    pub gradient_curl_max: f64,
    /// With two shape degrees of freedom there are no forbidden entries and
    /// the pattern test carries no information.
    pub pattern_vacuous: bool,
}

/// Composite-Simpson subdivisions per grid edge for line integrals. Node
/// level trapezoid is far too coarse for the 1e-5 verdict tolerances.
const EDGE_SUBDIVISIONS: usize = 8;

fn edge_integral<F>(form: &F, grid: &Grid, idx: &[usize], axis: usize) -> Result<f64>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>> + Sync,
{
    let start = grid.point_at(idx);
    let h = grid.spacing[axis] / EDGE_SUBDIVISIONS as f64;
    let mut total = 0.0;
    for node in 0..=EDGE_SUBDIVISIONS {
        let mut s = start.clone();
        s[axis] += node as f64 * h;
        let weight = if node == 0 || node == EDGE_SUBDIVISIONS {
            1.0
        } else if node % 2 == 1 {
            4.0
        } else {
            2.0
        };
        total += weight * form(&s)?[axis];
    }
    Ok(total * h / 3.0)
}

/// Exactness machinery shared by the Theta test and the phi-gradient test:
/// FD curl at every grid point, potential reconstruction by line integrals
/// along axis-ordered paths from the grid origin, and circulation residuals
/// around every grid plaquette.
fn one_form_exactness<F>(form: &F, grid: &Grid, tol: f64) -> Result<ExactnessReport>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>> + Sync,
{
    let r = grid.dim();
    let n = grid.len();

    let curl_residual_max = (0..n)
        .into_par_iter()
        .map(|flat| {
            let s = grid.point(flat);
            let h = default_step(&s);
            let jac = fd_jacobian(
                |x| match form(x) {
                    Ok(v) => v,
                    Err(_) => DVector::from_element(r, f64::NAN),
                },
                &s,
                h,
            )?;
            let mut worst: f64 = 0.0;
            for a in 0..r {
                for b in (a + 1)..r {
                    worst = worst.max((jac[(b, a)] - jac[(a, b)]).abs());
                }
            }
            Ok(worst)
        })
        .try_reduce(|| 0.0, |x: f64, y: f64| Ok(x.max(y)))?;

    // Per-axis edge integral tables; edges[a][flat] runs from the grid point
    // to its successor along axis a.
    let mut edges: Vec<Vec<f64>> = Vec::with_capacity(r);
    for axis in 0..r {
        let table = (0..n)
            .into_par_iter()
            .map(|flat| {
                let idx = grid.indices(flat);
                if idx[axis] + 1 >= grid.shape[axis] {
                    return Ok(0.0);
                }
                edge_integral(form, grid, &idx, axis)
            })
            .collect::<Result<Vec<f64>>>()?;
        edges.push(table);
    }

    let mut loop_residuals = Vec::new();
    for flat in 0..n {
        let idx = grid.indices(flat);
        for a in 0..r {
            for b in (a + 1)..r {
                if idx[a] + 1 >= grid.shape[a] || idx[b] + 1 >= grid.shape[b] {
                    continue;
                }
                let mut idx_a = idx.clone();
                idx_a[a] += 1;
                let mut idx_b = idx.clone();
                idx_b[b] += 1;
                let circulation = edges[a][flat] + edges[b][grid.flat(&idx_a)]
                    - edges[a][grid.flat(&idx_b)]
                    - edges[b][flat];
                loop_residuals.push(circulation.abs());
            }
        }
    }

    // Potential by axis-ordered paths: each point is reached from the
    // predecessor that decrements its highest nonzero index.
    let mut sigma = vec![0.0f64; n];
    for flat in 1..n {
        let idx = grid.indices(flat);
        let axis = (0..r).rev().find(|&a| idx[a] > 0).unwrap();
        let mut prev = idx.clone();
        prev[axis] -= 1;
        let prev_flat = grid.flat(&prev);
        sigma[flat] = sigma[prev_flat] + edges[axis][prev_flat];
    }

    let is_exact =
        curl_residual_max <= tol && loop_residuals.iter().all(|&l| l <= tol);
    Ok(ExactnessReport {
        is_exact,
        curl_residual_max,
        loop_residuals,
        sigma_samples: if is_exact { Some(sigma) } else { None },
    })
}

/// Test whether Theta is exact on the grid; on success the reconstructed
/// sigma samples give the log-density of the basic invariant measure up to
/// the exponent convention sigma = (r-1) phi.
pub fn check_exactness_theta(
    sys: &SystemDefinition,
    grid: &Grid,
    tol: f64,
) -> Result<ExactnessReport> {
    if grid.dim() != sys.shape_dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.shape_dim(),
            got: grid.dim(),
        });
    }
    let form = |s: &DVector<f64>| theta(sys, s);
    one_form_exactness(&form, grid, tol)
}

/// Test the phi-simple coordinate pattern of the gyroscopic coefficients
/// and reconstruct phi from the gradient estimates.
pub fn detect_phi_simple(
    sys: &SystemDefinition,
    grid: &Grid,
    tol: f64,
) -> Result<PhiSimpleReport> {
    let r = sys.shape_dim();
    if grid.dim() != r {
        return Err(Error::DimensionMismatch {
            expected: r,
            got: grid.dim(),
        });
    }

    // d_i phi = -C[i][j][j] for every j != i; average over j and report the
    // spread so noise on a single column cannot hide.
    let grad_estimate = |s: &DVector<f64>| -> Result<(DVector<f64>, f64, f64)> {
        let c = gyroscopic_coefficients(sys, s)?;
        let mut grad = DVector::zeros(r);
        let mut spread: f64 = 0.0;
        let mut forbidden: f64 = 0.0;
        for i in 0..r {
            let estimates: Vec<f64> = (0..r)
                .filter(|&j| j != i)
                .map(|j| -c.get(i, j, j))
                .collect();
            let mean = estimates.iter().sum::<f64>() / estimates.len() as f64;
            grad[i] = mean;
            for e in &estimates {
                spread = spread.max((e - mean).abs());
            }
            for j in 0..r {
                for k in 0..r {
                    if i != j && k != i && k != j {
                        forbidden = forbidden.max(c.get(i, j, k).abs());
                    }
                }
            }
        }
        Ok((grad, spread, forbidden))
    };

    let per_point = (0..grid.len())
        .into_par_iter()
        .map(|flat| grad_estimate(&grid.point(flat)))
        .collect::<Result<Vec<_>>>()?;
    let grad_phi_samples: Vec<DVector<f64>> =
        per_point.iter().map(|(g, _, _)| g.clone()).collect();
    let consistency_residual_max = per_point
        .iter()
        .fold(0.0f64, |m, (_, s, _)| m.max(*s));
    let pattern_residual_max = per_point
        .iter()
        .fold(0.0f64, |m, (_, _, f)| m.max(*f));

    let form = |s: &DVector<f64>| grad_estimate(s).map(|(g, _, _)| g);
    let exactness = one_form_exactness(&form, grid, tol)?;

    let is_phi_simple = pattern_residual_max <= tol
        && consistency_residual_max <= tol
        && exactness.is_exact;
    Ok(PhiSimpleReport {
        is_phi_simple,
        grad_phi_samples,
        phi_samples: if is_phi_simple {
            exactness.sigma_samples
        } else {
            None
        },
        pattern_residual_max,
        consistency_residual_max,
        gradient_curl_max: exactness.curl_residual_max,
        pattern_vacuous: r == 2,
    })
}

/// (Theta sharp)^l = sum_{ij} K^{ij} Theta_i p_j, the momentum-linear
/// function whose negative is the Liouville divergence of the reduced flow.
pub fn theta_sharp_linear(sys: &SystemDefinition, state: &ReducedState) -> Result<f64> {
    let th = theta(sys, &state.s)?;
    let km = reduced_metric(sys, &state.s)?;
    Ok(th.dot(&(&km.k_inv * &state.p)))
}

/// FD divergence of the reduced vector field at a state.
pub fn flow_divergence(sys: &SystemDefinition, state: &ReducedState, h: f64) -> Result<f64> {
    let z = state.to_vector();
    let jac = fd_jacobian(
        |x| match vector_field_flat(sys, x) {
            Ok(v) => v,
            Err(_) => DVector::from_element(z.len(), f64::NAN),
        },
        &z,
        h,
    )?;
    Ok(jac.trace())
}

/// div X + (Theta sharp)^l; vanishes identically for every Chaplygin system
/// up to FD error.
pub fn liouville_residual(sys: &SystemDefinition, state: &ReducedState, h: f64) -> Result<f64> {
    Ok(flow_divergence(sys, state, h)? + theta_sharp_linear(sys, state)?)
}

/// X[sigma_bar] - (Theta sharp)^l for a candidate log-density sigma_bar on
/// T*S; zero exactly when e^{sigma_bar} nu is invariant at the state.
pub fn measure_audit<F>(
    sys: &SystemDefinition,
    state: &ReducedState,
    sigma_bar: F,
    h: f64,
) -> Result<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let z = state.to_vector();
    let x = vector_field_flat(sys, &z)?;
    let eps = h / f64::max(1.0, x.norm());
    let forward = sigma_bar(&(&z + eps * &x));
    let backward = sigma_bar(&(&z - eps * &x));
    let directional = (forward - backward) / (2.0 * eps);
    if !directional.is_finite() {
        return Err(Error::NonFiniteEvaluation { coordinate: 0 });
    }
    Ok(directional - theta_sharp_linear(sys, state)?)
}

/// R_ij = sum_k C_ij^k p_k - (p_i d_j phi - p_j d_i phi); the zero matrix
/// exactly when e^phi rescales the almost-symplectic form to a closed one.
pub fn conformal_closedness_residual<F>(
    sys: &SystemDefinition,
    phi: F,
    state: &ReducedState,
) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let r = state.dim();
    let c = gyroscopic_coefficients(sys, &state.s)?;
    let h = default_step(&state.s);
    let grad = fd_gradient(&phi, &state.s, h)?;
    Ok(DMatrix::from_fn(r, r, |i, j| {
        let gyro: f64 = (0..r).map(|k| c.get(i, j, k) * state.p[k]).sum();
        gyro - (state.p[i] * grad[j] - state.p[j] * grad[i])
    }))
}

/// Accumulated measure defect along a trajectory: per-sample values of
/// sigma(s(t)) - sigma(s(0)) + int_0^t div X dt, by trapezoid quadrature of
/// the FD divergence over the recorded samples. Stays near 0 exactly when
/// e^sigma nu is invariant.
pub fn trajectory_measure_drift<F>(
    sys: &SystemDefinition,
    trajectory: &Trajectory,
    sigma: F,
) -> Result<Vec<f64>>
where
    F: Fn(&DVector<f64>) -> f64 + Sync,
{
    let divergences = trajectory
        .samples
        .par_iter()
        .map(|sample| {
            let h = default_step(&sample.state.to_vector());
            flow_divergence(sys, &sample.state, h)
        })
        .collect::<Result<Vec<f64>>>()?;
    let sigma0 = sigma(&trajectory.samples[0].state.s);
    let mut channel = Vec::with_capacity(trajectory.samples.len());
    let mut accumulated = 0.0;
    for (k, sample) in trajectory.samples.iter().enumerate() {
        if k > 0 {
            let dt = sample.t - trajectory.samples[k - 1].t;
            accumulated += 0.5 * dt * (divergences[k - 1] + divergences[k]);
        }
        channel.push(sigma(&sample.state.s) - sigma0 + accumulated);
    }
    Ok(channel)
}

/// Mean-removed maximum deviation between two sampled scalar fields,
/// for comparisons defined only up to an additive constant.
pub fn max_deviation_up_to_constant(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    xs.iter()
        .zip(ys.iter())
        .fold(0.0f64, |m, (x, y)| m.max(((x - mx) - (y - my)).abs()))
}
