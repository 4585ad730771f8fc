//! Reduced dynamics on T*S: the Hamiltonian, the almost-Hamiltonian vector
//! field, direct integration, and Chaplygin Hamiltonisation.
//!
//! The reduced equations are
//!
//! ```text
//! ds^i/dt = dH/dp_i,
//! dp_i/dt = -dH/ds^i - sum_{j,k} C_ij^k p_k dH/dp_j,
//! ```
//!
//! with H = 1/2 p^T K^{-1}(s) p + U(s). For a phi-simple system the momentum
//! rescaling p~ = e^{phi} p together with the time reparametrisation
//! dt = e^{-phi} dtau turns the flow into canonical Hamilton equations for
//! H~(s, p~) = H(s, e^{-phi} p~), which we integrate with the implicit
//! midpoint rule (H~ is non-separable since K depends on s).

use nalgebra::DVector;

pub use crate::geometry::ReducedState;

use crate::error::{Error, Result};
use crate::geometry::{gyroscopic_coefficients, reduced_metric, SystemDefinition};
use crate::numkit::{default_step, fd_gradient};

/// Reduced Hamiltonian H = 1/2 p^T K^{-1} p + U(s).
pub fn hamiltonian(sys: &SystemDefinition, state: &ReducedState) -> Result<f64> {
    let km = reduced_metric(sys, &state.s)?;
    Ok(0.5 * state.p.dot(&(&km.k_inv * &state.p)) + sys.potential(&state.s))
}

/// The reduced almost-Hamiltonian vector field (ds/dt, dp/dt).
///
/// dH/dp = K^{-1} p is exact in p; dH/ds is a central difference of the
/// Hamiltonian with frozen momentum.
pub fn vector_field(sys: &SystemDefinition, state: &ReducedState) -> Result<(DVector<f64>, DVector<f64>)> {
    let r = state.dim();
    let km = reduced_metric(sys, &state.s)?;
    let s_dot = &km.k_inv * &state.p;
    let p = state.p.clone();
    let h = default_step(&state.s);
    let dh_ds = fd_gradient(
        |s| match hamiltonian(sys, &ReducedState::new(s.clone(), p.clone())) {
            Ok(v) => v,
            Err(_) => f64::NAN,
        },
        &state.s,
        h,
    )?;
    let c = gyroscopic_coefficients(sys, &state.s)?;
    let mut p_dot = -dh_ds;
    for i in 0..r {
        let mut gyro = 0.0;
        for j in 0..r {
            for k in 0..r {
                gyro += c.get(i, j, k) * state.p[k] * s_dot[j];
            }
        }
        p_dot[i] -= gyro;
    }
    Ok((s_dot, p_dot))
}

/// Flattened right-hand side on (s, p) as a 2r vector.
pub fn vector_field_flat(sys: &SystemDefinition, z: &DVector<f64>) -> Result<DVector<f64>> {
    let state = ReducedState::from_vector(z);
    let (s_dot, p_dot) = vector_field(sys, &state)?;
    let r = s_dot.len();
    Ok(DVector::from_fn(2 * r, |i, _| {
        if i < r {
            s_dot[i]
        } else {
            p_dot[i - r]
        }
    }))
}

#[derive(Debug, Clone, Copy)]
pub enum Method {
    /// Classical fixed-step Runge-Kutta.
    Rk4 { dt: f64 },
    /// Dormand-Prince 5(4) with adaptive step, `tol` as absolute and
    /// relative local error target.
    Rk45 { tol: f64 },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Rk4 { .. } => "rk4",
            Method::Rk45 { .. } => "rk45",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IntegrateOptions {
    pub method: Method,
    pub t_end: f64,
    /// Cap on the step size (also the output spacing bound for rk45).
    pub max_step: f64,
}

impl IntegrateOptions {
    pub fn rk4(dt: f64, t_end: f64) -> Self {
        Self {
            method: Method::Rk4 { dt },
            t_end,
            max_step: f64::INFINITY,
        }
    }

    pub fn rk45(tol: f64, t_end: f64) -> Self {
        Self {
            method: Method::Rk45 { tol },
            t_end,
            max_step: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Completed,
    /// The shape point left the chart; `t` is the last valid sample time.
    DomainExit { t: f64 },
}

#[derive(Debug, Clone)]
pub struct TrajectorySample {
    pub t: f64,
    /// Reparametrized time, when the sample comes from the symplectic route.
    pub tau: Option<f64>,
    pub state: ReducedState,
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub integrator: String,
    pub system_label: String,
    pub termination: Termination,
}

impl Trajectory {
    pub fn max_energy_drift(&self) -> f64 {
        let h0 = self.samples[0].energy;
        self.samples
            .iter()
            .fold(0.0, |m, s| f64::max(m, (s.energy - h0).abs()))
    }

    pub fn last(&self) -> &TrajectorySample {
        self.samples.last().expect("trajectory has at least the initial sample")
    }
}

fn rk4_step(sys: &SystemDefinition, z: &DVector<f64>, dt: f64) -> Result<DVector<f64>> {
    let k1 = vector_field_flat(sys, z)?;
    let k2 = vector_field_flat(sys, &(z + 0.5 * dt * &k1))?;
    let k3 = vector_field_flat(sys, &(z + 0.5 * dt * &k2))?;
    let k4 = vector_field_flat(sys, &(z + dt * &k3))?;
    Ok(z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

// Dormand-Prince 5(4) Butcher tableau.
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

const MIN_STEP: f64 = 1e-14;

/// Errors that mean a step attempt strayed over the chart boundary rather
/// than a genuine numerical failure.
fn is_boundary_error(err: &Error) -> bool {
    matches!(
        err,
        Error::ChartFloorViolation { .. } | Error::DomainExit { .. } | Error::NonFiniteEvaluation { .. }
    )
}

struct Dopri45Step {
    z_new: DVector<f64>,
    error_ratio: f64,
}

fn dopri45_step(sys: &SystemDefinition, z: &DVector<f64>, dt: f64, tol: f64) -> Result<Dopri45Step> {
    let _ = DP_C;
    let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
    k.push(vector_field_flat(sys, z)?);
    for stage in 0..6 {
        let mut arg = z.clone();
        for (idx, coeff) in DP_A[stage].iter().enumerate().take(stage + 1) {
            if *coeff != 0.0 {
                arg += dt * *coeff * &k[idx];
            }
        }
        k.push(vector_field_flat(sys, &arg)?);
    }
    let mut z5 = z.clone();
    let mut z4 = z.clone();
    for i in 0..7 {
        if DP_B5[i] != 0.0 {
            z5 += dt * DP_B5[i] * &k[i];
        }
        if DP_B4[i] != 0.0 {
            z4 += dt * DP_B4[i] * &k[i];
        }
    }
    let mut err_sq = 0.0;
    for i in 0..z.len() {
        let scale = tol + tol * f64::max(z[i].abs(), z5[i].abs());
        let e = (z5[i] - z4[i]) / scale;
        err_sq += e * e;
    }
    Ok(Dopri45Step {
        z_new: z5,
        error_ratio: (err_sq / z.len() as f64).sqrt(),
    })
}

/// Integrate the reduced equations, recording t, state and H at each
/// accepted step.
pub fn integrate(
    sys: &SystemDefinition,
    state0: &ReducedState,
    options: &IntegrateOptions,
) -> Result<Trajectory> {
    assert!(options.t_end > 0.0, "t_end must be positive");
    sys.check_domain(&state0.s)?;
    let mut samples = vec![TrajectorySample {
        t: 0.0,
        tau: None,
        state: state0.clone(),
        energy: hamiltonian(sys, state0)?,
    }];
    let mut z = state0.to_vector();
    let mut t = 0.0;
    let mut termination = Termination::Completed;

    let push = |t: f64, z: &DVector<f64>, samples: &mut Vec<TrajectorySample>| -> Result<()> {
        let state = ReducedState::from_vector(z);
        let energy = hamiltonian(sys, &state)?;
        samples.push(TrajectorySample {
            t,
            tau: None,
            state,
            energy,
        });
        Ok(())
    };

    match options.method {
        Method::Rk4 { dt } => {
            let dt = dt.min(options.max_step);
            while t < options.t_end - 1e-12 {
                let step = dt.min(options.t_end - t);
                let z_new = match rk4_step(sys, &z, step) {
                    Ok(z_new) => z_new,
                    Err(err) if is_boundary_error(&err) => {
                        termination = Termination::DomainExit { t };
                        break;
                    }
                    Err(err) => return Err(err),
                };
                let s_new = ReducedState::from_vector(&z_new).s;
                if !sys.in_domain(&s_new) {
                    termination = Termination::DomainExit { t };
                    break;
                }
                z = z_new;
                t += step;
                push(t, &z, &mut samples)?;
            }
        }
        Method::Rk45 { tol } => {
            let mut dt = f64::min(1e-2, options.max_step);
            while t < options.t_end - 1e-12 {
                let step = dt.min(options.t_end - t).min(options.max_step);
                let attempt = match dopri45_step(sys, &z, step, tol) {
                    Ok(attempt) => attempt,
                    Err(err) if is_boundary_error(&err) => {
                        // Retry with a shorter step; give up once the step
                        // cannot shrink further.
                        dt = 0.5 * step;
                        if dt < MIN_STEP {
                            termination = Termination::DomainExit { t };
                            break;
                        }
                        continue;
                    }
                    Err(err) => return Err(err),
                };
                if attempt.error_ratio <= 1.0 {
                    let s_new = ReducedState::from_vector(&attempt.z_new).s;
                    if !sys.in_domain(&s_new) {
                        termination = Termination::DomainExit { t };
                        break;
                    }
                    z = attempt.z_new;
                    t += step;
                    push(t, &z, &mut samples)?;
                }
                let factor = if attempt.error_ratio > 0.0 {
                    0.9 * attempt.error_ratio.powf(-0.2)
                } else {
                    5.0
                };
                dt = (step * factor.clamp(0.2, 5.0)).min(options.max_step);
                if dt < MIN_STEP {
                    return Err(Error::StepSizeUnderflow { t, h: dt });
                }
            }
        }
    }
    Ok(Trajectory {
        samples,
        integrator: options.method.name().to_string(),
        system_label: sys.label().to_string(),
        termination,
    })
}

/// A system together with a Hamiltonising conformal factor phi.
pub struct HamiltonisedSystem<'a> {
    pub base: &'a SystemDefinition,
    phi: Box<dyn Fn(&DVector<f64>) -> f64 + Send + Sync + 'a>,
}

/// Build the Darboux momentum rescaling and time reparametrisation for a
/// given phi.
pub fn hamiltonise<'a, F>(sys: &'a SystemDefinition, phi: F) -> HamiltonisedSystem<'a>
where
    F: Fn(&DVector<f64>) -> f64 + Send + Sync + 'a,
{
    HamiltonisedSystem {
        base: sys,
        phi: Box::new(phi),
    }
}

impl<'a> HamiltonisedSystem<'a> {
    pub fn phi(&self, s: &DVector<f64>) -> f64 {
        (self.phi)(s)
    }

    /// (s, p) -> (s, p~ = e^phi p).
    pub fn forward(&self, state: &ReducedState) -> ReducedState {
        let scale = self.phi(&state.s).exp();
        ReducedState::new(state.s.clone(), scale * &state.p)
    }

    /// (s, p~) -> (s, p = e^{-phi} p~).
    pub fn inverse(&self, state: &ReducedState) -> ReducedState {
        let scale = (-self.phi(&state.s)).exp();
        ReducedState::new(state.s.clone(), scale * &state.p)
    }

    /// H~(s, p~) = H(s, e^{-phi} p~); equals H on corresponding states by
    /// construction.
    pub fn new_hamiltonian(&self, state: &ReducedState) -> Result<f64> {
        hamiltonian(self.base, &self.inverse(state))
    }

    /// dt/dtau = e^{-phi(s)}.
    pub fn time_density(&self, s: &DVector<f64>) -> f64 {
        (-self.phi(s)).exp()
    }

    /// Canonical Hamiltonian vector field of H~ in (s, p~).
    fn canonical_field(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let r = z.len() / 2;
        let state = ReducedState::from_vector(z);
        // dH~/dp~ = e^{-2 phi} K^{-1} p~, exact in p~.
        let km = reduced_metric(self.base, &state.s)?;
        let scale = (-2.0 * self.phi(&state.s)).exp();
        let s_dot = scale * (&km.k_inv * &state.p);
        let p_tilde = state.p.clone();
        let h = default_step(&state.s);
        let dh_ds = fd_gradient(
            |s| match self.new_hamiltonian(&ReducedState::new(s.clone(), p_tilde.clone())) {
                Ok(v) => v,
                Err(_) => f64::NAN,
            },
            &state.s,
            h,
        )?;
        Ok(DVector::from_fn(2 * r, |i, _| {
            if i < r {
                s_dot[i]
            } else {
                -dh_ds[i - r]
            }
        }))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SymplecticOptions {
    pub tau_end: f64,
    pub dtau: f64,
    /// Record every k-th step (the initial and final states are always kept).
    pub sample_every: usize,
    pub fixed_point_tol: f64,
    pub max_fixed_point_iters: usize,
}

impl SymplecticOptions {
    pub fn new(tau_end: f64, dtau: f64) -> Self {
        Self {
            tau_end,
            dtau,
            sample_every: 1,
            fixed_point_tol: 1e-12,
            max_fixed_point_iters: 50,
        }
    }
}

/// Implicit-midpoint integration of the Hamiltonised system.
///
/// `state0` is given in physical coordinates; it is pushed through the
/// forward map, integrated in (s, p~) over tau, and the samples are mapped
/// back. Physical time is recovered by trapezoid quadrature of e^{-phi}.
pub fn integrate_symplectic(
    hsys: &HamiltonisedSystem<'_>,
    state0: &ReducedState,
    options: &SymplecticOptions,
) -> Result<Trajectory> {
    assert!(options.tau_end > 0.0 && options.dtau > 0.0);
    let sys = hsys.base;
    sys.check_domain(&state0.s)?;
    let mut z = hsys.forward(state0).to_vector();
    let mut tau = 0.0;
    let mut t = 0.0;
    let mut density = hsys.time_density(&state0.s);
    let mut termination = Termination::Completed;

    let mut samples = vec![TrajectorySample {
        t: 0.0,
        tau: Some(0.0),
        state: state0.clone(),
        energy: hamiltonian(sys, state0)?,
    }];

    let n_steps = (options.tau_end / options.dtau).round() as usize;
    let mut step_idx = 0usize;
    'steps: while step_idx < n_steps {
        let dtau = options.dtau.min(options.tau_end - tau);
        // Fixed-point iteration for z_{n+1} = z_n + dtau f((z_n + z_{n+1})/2).
        let mut w = match hsys.canonical_field(&z) {
            Ok(f0) => &z + dtau * f0,
            Err(err) if is_boundary_error(&err) => {
                termination = Termination::DomainExit { t };
                break 'steps;
            }
            Err(err) => return Err(err),
        };
        let mut converged = false;
        let mut prev_delta = f64::INFINITY;
        for _ in 0..options.max_fixed_point_iters {
            let mid = 0.5 * (&z + &w);
            let f = match hsys.canonical_field(&mid) {
                Ok(f) => f,
                Err(err) if is_boundary_error(&err) => {
                    termination = Termination::DomainExit { t };
                    break 'steps;
                }
                Err(err) => return Err(err),
            };
            let w_next = &z + dtau * f;
            let delta = (&w_next - &w).norm();
            w = w_next;
            // Accept on tolerance, or when the iteration has stalled at the
            // evaluation noise floor just above it.
            if delta <= options.fixed_point_tol
                || (delta >= prev_delta && delta <= 1e3 * options.fixed_point_tol)
            {
                converged = true;
                break;
            }
            prev_delta = delta;
        }
        if !converged {
            return Err(Error::FixedPointDivergence { tau });
        }
        let s_new = ReducedState::from_vector(&w).s;
        if !sys.in_domain(&s_new) {
            termination = Termination::DomainExit { t };
            break;
        }
        let density_new = hsys.time_density(&s_new);
        t += 0.5 * dtau * (density + density_new);
        density = density_new;
        z = w;
        tau += dtau;
        step_idx += 1;
        if step_idx % options.sample_every == 0 || step_idx == n_steps {
            let physical = hsys.inverse(&ReducedState::from_vector(&z));
            let energy = hamiltonian(sys, &physical)?;
            samples.push(TrajectorySample {
                t,
                tau: Some(tau),
                state: physical,
                energy,
            });
        }
    }
    Ok(Trajectory {
        samples,
        integrator: "implicit-midpoint".to_string(),
        system_label: sys.label().to_string(),
        termination,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ConfigModel, EuclideanModel};
    use crate::numkit::EuclideanVectorField;
    use crate::systems::{
        make_nonholonomic_particle, make_vertical_disk, make_veselova, DiskParams, ParticleParams,
        ParticlePotential, VeselovaParams,
    };
    use nalgebra::{dvector, DMatrix};

    fn particle(a: f64) -> SystemDefinition {
        make_nonholonomic_particle(&ParticleParams {
            a,
            potential: ParticlePotential::Zero,
        })
        .unwrap()
    }

    fn disk() -> SystemDefinition {
        make_vertical_disk(&DiskParams {
            mass: 1.0,
            inertia_normal: 2.0,
            inertia_axial: 0.5,
            radius: 0.8,
        })
        .unwrap()
    }

    #[test]
    fn particle_hamiltonian_value() {
        let sys = particle(0.0);
        let state = ReducedState::new(dvector![0.0, 1.0], dvector![1.0, 0.0]);
        assert!((hamiltonian(&sys, &state).unwrap() - 0.25).abs() < 1e-10);
        let rest = ReducedState::new(dvector![0.3, -0.7], dvector![0.0, 0.0]);
        assert!(hamiltonian(&sys, &rest).unwrap().abs() < 1e-14);
    }

    #[test]
    fn veselova_pole_hamiltonian() {
        let sys = make_veselova(&VeselovaParams::new(vec![1.0, 2.0, 3.0])).unwrap();
        let state = ReducedState::new(dvector![0.0, 0.0], dvector![1.0, 0.0]);
        assert!((hamiltonian(&sys, &state).unwrap() - 1.0 / 6.0).abs() < 1e-10);
    }

    #[test]
    fn particle_vector_field_reference() {
        let sys = particle(0.0);
        let state = ReducedState::new(dvector![0.0, 1.0], dvector![1.0, 0.0]);
        let (s_dot, p_dot) = vector_field(&sys, &state).unwrap();
        assert!((s_dot - dvector![0.5, 0.0]).norm() < 1e-8);
        assert!(p_dot.norm() < 1e-8);
    }

    #[test]
    fn zero_momentum_is_equilibrium() {
        for sys in [particle(0.6), disk()] {
            let state = ReducedState::new(dvector![0.4, 0.9], dvector![0.0, 0.0]);
            let (s_dot, p_dot) = vector_field(&sys, &state).unwrap();
            assert!(s_dot.norm() < 1e-10);
            assert!(p_dot.norm() < 1e-8);
        }
    }

    #[test]
    fn disk_free_motion() {
        let sys = disk();
        let state0 = ReducedState::new(dvector![0.2, -0.1], dvector![0.6, 1.1]);
        let traj = integrate(&sys, &state0, &IntegrateOptions::rk45(1e-10, 10.0)).unwrap();
        assert_eq!(traj.termination, Termination::Completed);
        // Constant momenta, linear angles.
        let last = traj.last();
        assert!((last.state.p.clone() - &state0.p).norm() < 1e-9);
        let km = reduced_metric(&sys, &state0.s).unwrap();
        let v = km.k_inv * &state0.p;
        let expect_s = &state0.s + 10.0 * v;
        assert!((last.state.s.clone() - expect_s).norm() < 1e-8);
        assert!(traj.max_energy_drift() < 1e-10);
    }

    #[test]
    fn particle_energy_conserved() {
        let sys = particle(0.0);
        let state0 = ReducedState::new(dvector![0.0, 0.4], dvector![1.0, -0.3]);
        let traj = integrate(&sys, &state0, &IntegrateOptions::rk45(1e-10, 100.0)).unwrap();
        assert!(traj.max_energy_drift() < 1e-9);
    }

    #[test]
    fn veselova_energy_conserved() {
        let sys = make_veselova(&VeselovaParams::new(vec![1.0, 2.0, 3.0])).unwrap();
        let state0 = ReducedState::new(dvector![0.2, 0.1], dvector![0.1, -0.05]);
        let traj = integrate(&sys, &state0, &IntegrateOptions::rk45(1e-9, 20.0)).unwrap();
        assert_eq!(traj.termination, Termination::Completed);
        assert!(traj.max_energy_drift() < 1e-8);
    }

    #[test]
    fn domain_exit_reports_last_valid_state() {
        let mut params = VeselovaParams::new(vec![1.0, 2.0, 3.0]);
        params.delta = 0.6;
        let sys = make_veselova(&params).unwrap();
        let state0 = ReducedState::new(dvector![0.5, 0.0], dvector![2.0, 0.0]);
        let traj = integrate(&sys, &state0, &IntegrateOptions::rk4(1e-3, 10.0)).unwrap();
        match traj.termination {
            Termination::DomainExit { t } => {
                assert!(t < 10.0);
                assert!(sys.in_domain(&traj.last().state.s));
            }
            Termination::Completed => panic!("expected domain exit"),
        }
    }

    #[test]
    fn hamiltonise_identity_for_zero_phi() {
        let sys = particle(0.0);
        let hsys = hamiltonise(&sys, |_| 0.0);
        let state = ReducedState::new(dvector![0.1, 0.2], dvector![0.3, 0.4]);
        assert_eq!(hsys.forward(&state), state);
        assert!((hsys.time_density(&state.s) - 1.0).abs() < 1e-15);
        assert!(
            (hsys.new_hamiltonian(&state).unwrap() - hamiltonian(&sys, &state).unwrap()).abs()
                < 1e-15
        );
    }

    #[test]
    fn hamiltonise_particle_scalings() {
        let sys = particle(0.0);
        let hsys = hamiltonise(&sys, crate::systems::particle_phi);
        let y: f64 = 0.8;
        let state = ReducedState::new(dvector![0.0, y], dvector![1.0, 2.0]);
        let fwd = hsys.forward(&state);
        let scale = (1.0 + y * y).sqrt();
        assert!((fwd.p[0] - 1.0 / scale).abs() < 1e-14);
        assert!((fwd.p[1] - 2.0 / scale).abs() < 1e-14);
        assert!((hsys.time_density(&state.s) - scale).abs() < 1e-14);
        let back = hsys.inverse(&fwd);
        assert!((&back.p - &state.p).norm() < 1e-12);
        // H~ composed with the forward map equals H.
        assert!(
            (hsys.new_hamiltonian(&fwd).unwrap() - hamiltonian(&sys, &state).unwrap()).abs()
                < 1e-14
        );
    }

    #[test]
    fn midpoint_conserves_quadratic_hamiltonian() {
        // Harmonic test problem: K = I, U = |s|^2 / 2. Implicit midpoint
        // conserves quadratic invariants up to the finite-difference error
        // in the potential gradient, with no secular growth in the step
        // count.
        let frame = vec![
            EuclideanVectorField::new(2, |_: &DVector<f64>| dvector![1.0, 0.0]),
            EuclideanVectorField::new(2, |_: &DVector<f64>| dvector![0.0, 1.0]),
        ];
        let sys = SystemDefinition::new(
            ConfigModel::Euclidean(EuclideanModel {
                dim: 2,
                frame,
                metric: Box::new(|_| DMatrix::identity(2, 2)),
                section: Box::new(|s: &DVector<f64>| s.clone()),
            }),
            2,
            "harmonic",
        )
        .with_potential(|s: &DVector<f64>| 0.5 * s.norm_squared());
        let hsys = hamiltonise(&sys, |_| 0.0);
        let state0 = ReducedState::new(dvector![1.0, 0.0], dvector![0.0, 1.0]);
        let traj =
            integrate_symplectic(&hsys, &state0, &SymplecticOptions::new(20.0, 1e-2)).unwrap();
        assert!(
            traj.max_energy_drift() < 1e-8,
            "drift {}",
            traj.max_energy_drift()
        );
    }

    #[test]
    fn symplectic_matches_rk45_in_physical_time() {
        let sys = particle(0.0);
        let state0 = ReducedState::new(dvector![0.0, 0.3], dvector![0.8, -0.2]);
        let reference = integrate(&sys, &state0, &IntegrateOptions::rk45(1e-11, 10.0)).unwrap();
        let hsys = hamiltonise(&sys, crate::systems::particle_phi);
        let mut opts = SymplecticOptions::new(14.0, 5e-4);
        opts.sample_every = 10;
        let traj = integrate_symplectic(&hsys, &state0, &opts).unwrap();
        // Find the symplectic sample bracketing t = 10 and interpolate.
        let target = 10.0;
        assert!(traj.last().t > target, "tau_end too short to reach t = 10");
        let idx = traj.samples.iter().position(|s| s.t >= target).unwrap();
        let (s0, s1) = (&traj.samples[idx - 1], &traj.samples[idx]);
        let w = (target - s0.t) / (s1.t - s0.t);
        let interp = (1.0 - w) * s0.state.to_vector() + w * s1.state.to_vector();
        let ref_end = reference.last().state.to_vector();
        assert!(
            (interp - ref_end).norm() < 1e-5,
            "cross-integrator deviation too large"
        );
    }
}
