//! System definitions and the core geometric computations: reduced metric,
//! gyroscopic coefficients, the 1-form Theta and the gyroscopic 2-form.
//!
//! The gyroscopic coefficients C_ij^k at a shape point s are defined by
//! projecting the bracket of horizontal frame fields back onto the frame:
//!
//! ```text
//! P [hor_i, hor_j] = sum_k C_ij^k hor_k
//! ```
//!
//! Pairing both sides with hor_l gives the Gram system
//! `sum_k C_ij^k <hor_k, hor_l> = <[hor_i, hor_j], hor_l>`, which is what we
//! solve; the metric-orthogonal projector P drops out because
//! `<P v, hor_l> = <v, hor_l>` for any v (P is self-adjoint and fixes the
//! span of the frame).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numkit::{
    default_step, killing_pairing, lie_bracket_euclidean, lie_bracket_left_trivialized,
    spd_factor_check, spd_solve, spd_solve_matrix, EuclideanVectorField, LeftTrivializedField,
};

/// Gram determinant threshold below which the frame counts as degenerate.
pub const FRAME_GRAM_TOL: f64 = 1e-12;

type ScalarField = Box<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
type MatrixField = Box<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
type SectionMap = Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
type GroupSectionMap = Box<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
type InertiaOperator = Box<dyn Fn(&DMatrix<f64>) -> DMatrix<f64> + Send + Sync>;
type DomainPredicate = Box<dyn Fn(&DVector<f64>) -> Result<()> + Send + Sync>;
type GyroClosedForm = Box<dyn Fn(&DVector<f64>) -> GyroCoefficients + Send + Sync>;

/// Configuration model on a Euclidean chart of R^n.
pub struct EuclideanModel {
    pub dim: usize,
    /// Horizontal lifts hor d/ds^i as ambient vector fields on the chart.
    pub frame: Vec<EuclideanVectorField>,
    /// Kinetic metric as an SPD matrix field on the chart.
    pub metric: MatrixField,
    /// Section s -> q with pi(q) = s.
    pub section: SectionMap,
}

/// Configuration model on SO(n) in left trivialization.
pub struct GroupModel {
    pub n: usize,
    /// Horizontal lifts as left-trivialized fields g -> so(n).
    pub frame: Vec<LeftTrivializedField>,
    /// Inertia operator on so(n); the kinetic metric is (I xi, eta)_kappa.
    pub inertia: InertiaOperator,
    /// Section s -> g with g^{-1} e_n = gamma(s).
    pub section: GroupSectionMap,
}

pub enum ConfigModel {
    Euclidean(EuclideanModel),
    Group(GroupModel),
}

/// Full geometric data of a Chaplygin system.
pub struct SystemDefinition {
    model: ConfigModel,
    shape_dim: usize,
    potential: ScalarField,
    domain: DomainPredicate,
    label: String,
    /// Closed-form reduced metric, bypassing the numeric pairing when known.
    metric_closed_form: Option<MatrixField>,
    /// Closed-form gyroscopic coefficients.
    gyro_closed_form: Option<GyroClosedForm>,
}

impl SystemDefinition {
    pub fn new(model: ConfigModel, shape_dim: usize, label: impl Into<String>) -> Self {
        assert!(shape_dim >= 2, "shape dimension must be at least 2");
        let r = match &model {
            ConfigModel::Euclidean(m) => m.frame.len(),
            ConfigModel::Group(m) => m.frame.len(),
        };
        assert_eq!(r, shape_dim, "frame length must equal the shape dimension");
        Self {
            model,
            shape_dim,
            potential: Box::new(|_| 0.0),
            domain: Box::new(|_| Ok(())),
            label: label.into(),
            metric_closed_form: None,
            gyro_closed_form: None,
        }
    }

    pub fn with_potential<F>(mut self, potential: F) -> Self
    where
        F: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
    {
        self.potential = Box::new(potential);
        self
    }

    pub fn with_domain<F>(mut self, domain: F) -> Self
    where
        F: Fn(&DVector<f64>) -> Result<()> + Send + Sync + 'static,
    {
        self.domain = Box::new(domain);
        self
    }

    pub fn with_metric_closed_form<F>(mut self, k: F) -> Self
    where
        F: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.metric_closed_form = Some(Box::new(k));
        self
    }

    pub fn with_gyro_closed_form<F>(mut self, c: F) -> Self
    where
        F: Fn(&DVector<f64>) -> GyroCoefficients + Send + Sync + 'static,
    {
        self.gyro_closed_form = Some(Box::new(c));
        self
    }

    pub fn shape_dim(&self) -> usize {
        self.shape_dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn model(&self) -> &ConfigModel {
        &self.model
    }

    pub fn potential(&self, s: &DVector<f64>) -> f64 {
        (self.potential)(s)
    }

    pub fn in_domain(&self, s: &DVector<f64>) -> bool {
        (self.domain)(s).is_ok()
    }

    pub fn check_domain(&self, s: &DVector<f64>) -> Result<()> {
        (self.domain)(s)
    }
}

/// A point (s, p) of T*S in bundle coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    pub s: DVector<f64>,
    pub p: DVector<f64>,
}

impl ReducedState {
    pub fn new(s: DVector<f64>, p: DVector<f64>) -> Self {
        assert_eq!(s.len(), p.len());
        Self { s, p }
    }

    pub fn dim(&self) -> usize {
        self.s.len()
    }

    /// Flatten to (s, p) in a single 2r vector.
    pub fn to_vector(&self) -> DVector<f64> {
        let r = self.dim();
        DVector::from_fn(2 * r, |i, _| if i < r { self.s[i] } else { self.p[i - r] })
    }

    pub fn from_vector(z: &DVector<f64>) -> Self {
        let r = z.len() / 2;
        Self {
            s: DVector::from_fn(r, |i, _| z[i]),
            p: DVector::from_fn(r, |i, _| z[r + i]),
        }
    }
}

/// The r x r x r array C_ij^k at a shape point, antisymmetric in (i, j).
#[derive(Debug, Clone)]
pub struct GyroCoefficients {
    r: usize,
    /// Row-major in (i, j, k).
    c: Vec<f64>,
    pub base_point: DVector<f64>,
}

impl GyroCoefficients {
    pub fn zeros(r: usize, base_point: DVector<f64>) -> Self {
        Self {
            r,
            c: vec![0.0; r * r * r],
            base_point,
        }
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.c[(i * self.r + j) * self.r + k]
    }

    /// Stores both (i,j,k) and the antisymmetric mirror (j,i,k).
    pub fn set_pair(&mut self, i: usize, j: usize, k: usize, value: f64) {
        self.c[(i * self.r + j) * self.r + k] = value;
        self.c[(j * self.r + i) * self.r + k] = -value;
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0, |m, x| f64::max(m, x.abs()))
    }
}

/// Reduced kinetic metric K and its inverse at a shape point.
#[derive(Debug, Clone)]
pub struct ReducedMetric {
    pub k: DMatrix<f64>,
    pub k_inv: DMatrix<f64>,
}

fn frame_gram_euclidean(model: &EuclideanModel, q: &DVector<f64>) -> (DMatrix<f64>, Vec<DVector<f64>>) {
    let m = (model.metric)(q);
    let hor: Vec<DVector<f64>> = model.frame.iter().map(|f| f.eval(q)).collect();
    let r = hor.len();
    let k = DMatrix::from_fn(r, r, |i, j| hor[i].dot(&(&m * &hor[j])));
    (k, hor)
}

fn frame_gram_group(model: &GroupModel, g: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
    let xs: Vec<DMatrix<f64>> = model.frame.iter().map(|f| f.eval(g)).collect();
    let r = xs.len();
    let mut k = DMatrix::zeros(r, r);
    for i in 0..r {
        let ix = (model.inertia)(&xs[i]);
        for j in 0..r {
            k[(i, j)] = killing_pairing(&ix, &xs[j])?;
        }
    }
    Ok((k, xs))
}

fn assemble_metric(k: DMatrix<f64>) -> Result<ReducedMetric> {
    let gram_det = k.determinant();
    if gram_det <= FRAME_GRAM_TOL {
        return Err(Error::DegenerateFrame { gram_det });
    }
    spd_factor_check(&k)?;
    let k_inv = spd_solve_matrix(&k, &DMatrix::identity(k.nrows(), k.ncols()))?;
    Ok(ReducedMetric { k, k_inv })
}

/// Reduced metric K_ij(s) = <hor_i, hor_j> at q = section(s).
pub fn reduced_metric(sys: &SystemDefinition, s: &DVector<f64>) -> Result<ReducedMetric> {
    sys.check_domain(s)?;
    if let Some(k) = &sys.metric_closed_form {
        return assemble_metric(k(s));
    }
    let k = match &sys.model {
        ConfigModel::Euclidean(model) => {
            let q = (model.section)(s);
            frame_gram_euclidean(model, &q).0
        }
        ConfigModel::Group(model) => {
            let g = (model.section)(s);
            frame_gram_group(model, &g)?.0
        }
    };
    assemble_metric(k)
}

/// Gyroscopic coefficients at a shape point, solved from the Gram system.
pub fn gyroscopic_coefficients(sys: &SystemDefinition, s: &DVector<f64>) -> Result<GyroCoefficients> {
    sys.check_domain(s)?;
    if let Some(cf) = &sys.gyro_closed_form {
        return Ok(cf(s));
    }
    let r = sys.shape_dim;
    let mut coeffs = GyroCoefficients::zeros(r, s.clone());
    match &sys.model {
        ConfigModel::Euclidean(model) => {
            let q = (model.section)(s);
            let h = default_step(&q);
            let (k, hor) = frame_gram_euclidean(model, &q);
            let gram_det = k.determinant();
            if gram_det <= FRAME_GRAM_TOL {
                return Err(Error::DegenerateFrame { gram_det });
            }
            let m = (model.metric)(&q);
            for i in 0..r {
                for j in (i + 1)..r {
                    let bracket =
                        lie_bracket_euclidean(&model.frame[i], &model.frame[j], &q, h)?;
                    let mb = &m * &bracket;
                    let b = DVector::from_fn(r, |l, _| hor[l].dot(&mb));
                    let c = spd_solve(&k, &b)?;
                    for kk in 0..r {
                        coeffs.set_pair(i, j, kk, c[kk]);
                    }
                }
            }
        }
        ConfigModel::Group(model) => {
            let g = (model.section)(s);
            let h = f64::EPSILON.cbrt();
            let (k, xs) = frame_gram_group(model, &g)?;
            let gram_det = k.determinant();
            if gram_det <= FRAME_GRAM_TOL {
                return Err(Error::DegenerateFrame { gram_det });
            }
            for i in 0..r {
                for j in (i + 1)..r {
                    let bracket =
                        lie_bracket_left_trivialized(&model.frame[i], &model.frame[j], &g, h)?;
                    let ib = (model.inertia)(&bracket);
                    let mut b = DVector::zeros(r);
                    for l in 0..r {
                        b[l] = killing_pairing(&ib, &xs[l])?;
                    }
                    let c = spd_solve(&k, &b)?;
                    for kk in 0..r {
                        coeffs.set_pair(i, j, kk, c[kk]);
                    }
                }
            }
        }
    }
    Ok(coeffs)
}

/// The 1-form Theta = sum_j C_ji^j ds^i as a covector of length r.
pub fn theta(sys: &SystemDefinition, s: &DVector<f64>) -> Result<DVector<f64>> {
    let c = gyroscopic_coefficients(sys, s)?;
    Ok(theta_from_coefficients(&c))
}

pub fn theta_from_coefficients(c: &GyroCoefficients) -> DVector<f64> {
    let r = c.r();
    DVector::from_fn(r, |i, _| (0..r).map(|j| c.get(j, i, j)).sum())
}

/// The gyroscopic 2-form at a state: (Omega_T)_ij = sum_k C_ij^k p_k.
pub fn gyro_two_form(sys: &SystemDefinition, state: &ReducedState) -> Result<DMatrix<f64>> {
    let c = gyroscopic_coefficients(sys, &state.s)?;
    let r = c.r();
    Ok(DMatrix::from_fn(r, r, |i, j| {
        (0..r).map(|k| c.get(i, j, k) * state.p[k]).sum()
    }))
}

/// Euclidean-model helper: horizontal lifts from translational constraint
/// one-forms.
///
/// Assumes Q = R^n with the symmetry group acting by translations of the last
/// n - r coordinates and pi the projection onto the first r. The lift of
/// d/ds^i is (e_i, v) with v solving the constraint kernel equations
/// A_z v = -A_s e_i, where A is the (n-r) x n matrix of constraint one-forms.
pub fn frame_from_constraints<F>(n: usize, r: usize, constraints: F) -> Vec<EuclideanVectorField>
where
    F: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + Clone + 'static,
{
    let k = n - r;
    (0..r)
        .map(|i| {
            let constraints = constraints.clone();
            EuclideanVectorField::new(n, move |q| {
                let a = constraints(q);
                assert_eq!(a.nrows(), k, "expected one constraint row per group direction");
                let a_s = a.columns(0, r).into_owned();
                let a_z = a.columns(r, k).into_owned();
                let rhs = -a_s.column(i).into_owned();
                let v = a_z
                    .lu()
                    .solve(&rhs)
                    .expect("constraint block is singular: distribution not complementary");
                let mut lift = DVector::zeros(n);
                lift[i] = 1.0;
                for (row, value) in v.iter().enumerate() {
                    lift[r + row] = *value;
                }
                lift
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn particle(a: f64) -> SystemDefinition {
        crate::systems::make_nonholonomic_particle(&crate::systems::ParticleParams {
            a,
            potential: crate::systems::ParticlePotential::Zero,
        })
        .unwrap()
    }

    #[test]
    fn particle_reduced_metric() {
        // K = [[1 + y^2, a y], [a y, 1]]
        let sys = particle(0.4);
        let km = reduced_metric(&sys, &dvector![0.3, 1.5]).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[1.0 + 2.25, 0.6, 0.6, 1.0]);
        assert!((&km.k - expect).norm() < 1e-9);
        assert!((&km.k * &km.k_inv - DMatrix::identity(2, 2)).norm() < 1e-9);
    }

    #[test]
    fn particle_gyro_closed_form() {
        // C_12^1 = -(1-a^2) y / det, C_12^2 = -a / det with det = 1 + (1-a^2) y^2.
        let a = 0.3;
        let sys = particle(a);
        let y = 0.8;
        let det = 1.0 + (1.0 - a * a) * y * y;
        let c = gyroscopic_coefficients(&sys, &dvector![-0.2, y]).unwrap();
        assert!((c.get(0, 1, 0) - (-(1.0 - a * a) * y / det)).abs() < 1e-7);
        assert!((c.get(0, 1, 1) - (-a / det)).abs() < 1e-7);
        assert!((c.get(1, 0, 0) + c.get(0, 1, 0)).abs() < 1e-15);
    }

    #[test]
    fn particle_a0_reference_point() {
        let sys = particle(0.0);
        let c = gyroscopic_coefficients(&sys, &dvector![0.0, 1.0]).unwrap();
        assert!((c.get(0, 1, 0) + 0.5).abs() < 1e-7);
        assert!(c.get(0, 1, 1).abs() < 1e-7);
    }

    #[test]
    fn particle_theta() {
        // Theta = (a dx - (1-a^2) y dy) / det; at a = 0.5, y = 1: (2/7, -3/7).
        let sys = particle(0.5);
        let th = theta(&sys, &dvector![0.0, 1.0]).unwrap();
        assert!((th[0] - 2.0 / 7.0).abs() < 1e-7);
        assert!((th[1] + 3.0 / 7.0).abs() < 1e-7);
    }

    #[test]
    fn particle_gyro_two_form() {
        let a = 0.7;
        let sys = particle(a);
        let y = -0.6;
        let (px, py) = (1.3, -0.4);
        let det = 1.0 + (1.0 - a * a) * y * y;
        let state = ReducedState::new(dvector![0.1, y], dvector![px, py]);
        let w = gyro_two_form(&sys, &state).unwrap();
        let expect = -((1.0 - a * a) * y * px + a * py) / det;
        assert!((w[(0, 1)] - expect).abs() < 1e-7);
        assert!((w[(0, 1)] + w[(1, 0)]).abs() < 1e-15);
        // Semi-basic: linear in p.
        let zero = gyro_two_form(&sys, &ReducedState::new(dvector![0.1, y], dvector![0.0, 0.0]))
            .unwrap();
        assert!(zero.norm() < 1e-12);
    }

    #[test]
    fn projector_route_matches_gram_route() {
        // Debug cross-check: build P = D (D^T M D)^{-1} D^T M explicitly and
        // expand P [hor_1, hor_2] in the frame.
        let a = 0.45;
        let sys = particle(a);
        let s = dvector![0.2, 0.9];
        let (model, q) = match sys.model() {
            ConfigModel::Euclidean(m) => (m, (m.section)(&s)),
            _ => unreachable!(),
        };
        let h = default_step(&q);
        let m = (model.metric)(&q);
        let hor: Vec<DVector<f64>> = model.frame.iter().map(|f| f.eval(&q)).collect();
        let d = DMatrix::from_columns(&hor);
        let gram = d.transpose() * &m * &d;
        let gram_inv = spd_solve_matrix(&gram, &DMatrix::identity(2, 2)).unwrap();
        let bracket = lie_bracket_euclidean(&model.frame[0], &model.frame[1], &q, h).unwrap();
        let coords = gram_inv * d.transpose() * &m * bracket;
        let c = gyroscopic_coefficients(&sys, &s).unwrap();
        assert!((c.get(0, 1, 0) - coords[0]).abs() < 1e-10);
        assert!((c.get(0, 1, 1) - coords[1]).abs() < 1e-10);
    }

    #[test]
    fn tensoriality_under_chart_rescaling() {
        // Rescale s^1 -> 2 s^1: C transforms by the (1,2)-tensor rule.
        let a = 0.3;
        let base = particle(a);
        // Rescaled chart: shape coordinates (u, y) with x = 2u. Frame lift of
        // d/du is 2 hor d/dx; the metric and section compose with the scaling.
        let scaled_frame = vec![
            EuclideanVectorField::new(3, |q: &DVector<f64>| dvector![2.0, 0.0, 2.0 * q[1]]),
            EuclideanVectorField::new(3, |_: &DVector<f64>| dvector![0.0, 1.0, 0.0]),
        ];
        let metric = move |_q: &DVector<f64>| {
            DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, a, 0.0, a, 1.0])
        };
        let scaled = SystemDefinition::new(
            ConfigModel::Euclidean(EuclideanModel {
                dim: 3,
                frame: scaled_frame,
                metric: Box::new(metric),
                section: Box::new(|s: &DVector<f64>| dvector![2.0 * s[0], s[1], 0.0]),
            }),
            2,
            "particle-rescaled",
        );
        let s = dvector![0.15, 0.7]; // (u, y); same shape point as (2u, y)
        let c_scaled = gyroscopic_coefficients(&scaled, &s).unwrap();
        let c_base = gyroscopic_coefficients(&base, &dvector![0.3, 0.7]).unwrap();
        // (1,2)-tensor rule for s^1 -> 2 s^1 (Jacobian diag(2, 1)):
        // C'_ij^k = C_ij^k * 2^{[i==0]+[j==0]-[k==0]}.
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let mut factor = 1.0;
                    if i == 0 {
                        factor *= 2.0;
                    }
                    if j == 0 {
                        factor *= 2.0;
                    }
                    if k == 0 {
                        factor /= 2.0;
                    }
                    assert!(
                        (c_scaled.get(i, j, k) - factor * c_base.get(i, j, k)).abs() < 1e-7,
                        "tensor rule failed at ({i},{j},{k})"
                    );
                }
            }
        }
    }

    #[test]
    fn frame_from_constraints_recovers_particle_lift() {
        // Constraint dz - y dx = 0 on R^3 with translation symmetry in z.
        let frame = frame_from_constraints(3, 2, |q: &DVector<f64>| {
            DMatrix::from_row_slice(1, 3, &[-q[1], 0.0, 1.0])
        });
        let q = dvector![0.4, 1.7, 0.0];
        assert!((frame[0].eval(&q) - dvector![1.0, 0.0, 1.7]).norm() < 1e-14);
        assert!((frame[1].eval(&q) - dvector![0.0, 1.0, 0.0]).norm() < 1e-14);
    }
}
