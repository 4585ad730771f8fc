//! Structural identities of the reduced flow: the almost-symplectic
//! characterisation i_X Omega = dH, the Darboux pullback of the conformally
//! rescaled form, energy conservation, and the Theta = (r-1) dphi identity
//! for the phi-simple built-ins.

use chaplygin_kit::dynamics::{
    hamiltonian, hamiltonise, integrate, vector_field_flat, IntegrateOptions, ReducedState,
    Termination,
};
use chaplygin_kit::geometry::{gyro_two_form, theta, SystemDefinition};
use chaplygin_kit::numkit::{default_step, fd_gradient, fd_jacobian};
use chaplygin_kit::systems::{
    make_nonholonomic_particle, make_vertical_disk, make_veselova, particle_phi, veselova_phi,
    DiskParams, ParticleParams, ParticlePotential, VeselovaParams,
};
use nalgebra::{dvector, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

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

fn veselova3() -> SystemDefinition {
    make_veselova(&VeselovaParams::new(vec![1.0, 2.0, 3.0])).unwrap()
}

/// Matrix of Omega_nh in the (ds, dp) coordinate basis: rows (-C -I; I 0),
/// so that W X = grad H characterises the reduced field.
fn omega_matrix(sys: &SystemDefinition, state: &ReducedState) -> DMatrix<f64> {
    let r = state.dim();
    let gyro = gyro_two_form(sys, state).unwrap();
    let mut w = DMatrix::zeros(2 * r, 2 * r);
    for i in 0..r {
        for j in 0..r {
            w[(i, j)] = -gyro[(i, j)];
        }
        w[(i, r + i)] = -1.0;
        w[(r + i, i)] = 1.0;
    }
    w
}

fn random_state(rng: &mut impl Rng, bound: f64) -> ReducedState {
    ReducedState::new(
        dvector![rng.gen_range(-bound..bound), rng.gen_range(-bound..bound)],
        dvector![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
    )
}

#[test]
fn field_satisfies_almost_symplectic_equation() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for sys in [particle(0.0), particle(0.5), disk(), veselova3()] {
        for _ in 0..20 {
            let state = random_state(&mut rng, 0.5);
            let z = state.to_vector();
            let x = vector_field_flat(&sys, &z).unwrap();
            let w = omega_matrix(&sys, &state);
            let grad_h = fd_gradient(
                |z: &DVector<f64>| {
                    hamiltonian(&sys, &ReducedState::from_vector(z)).unwrap_or(f64::NAN)
                },
                &z,
                default_step(&z),
            )
            .unwrap();
            assert!(
                (w * x - grad_h).abs().max() < 1e-6,
                "i_X Omega != dH for {}",
                sys.label()
            );
        }
    }
}

#[test]
fn darboux_pullback_is_canonical() {
    let sys = particle(0.0);
    let hsys = hamiltonise(&sys, particle_phi);
    let r = 2;
    let mut canonical = DMatrix::zeros(2 * r, 2 * r);
    for i in 0..r {
        canonical[(i, r + i)] = -1.0;
        canonical[(r + i, i)] = 1.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let tilde = random_state(&mut rng, 0.8);
        let z_tilde = tilde.to_vector();
        // G maps Darboux coordinates to physical ones.
        let g_map = |z: &DVector<f64>| hsys.inverse(&ReducedState::from_vector(z)).to_vector();
        let jac = fd_jacobian(g_map, &z_tilde, default_step(&z_tilde)).unwrap();
        let physical = ReducedState::from_vector(&g_map(&z_tilde));
        let scaled = particle_phi(&physical.s).exp() * omega_matrix(&sys, &physical);
        let pulled = jac.transpose() * scaled * jac;
        assert!(
            (pulled - &canonical).abs().max() < 1e-6,
            "pullback of e^phi Omega is not canonical"
        );
    }
}

#[test]
fn energy_conserved_for_all_builtins() {
    let cases: Vec<(SystemDefinition, ReducedState)> = vec![
        (
            particle(0.0),
            ReducedState::new(dvector![0.0, 0.4], dvector![0.8, -0.3]),
        ),
        (
            particle(0.5),
            ReducedState::new(dvector![0.2, -0.3], dvector![0.5, 0.6]),
        ),
        (
            disk(),
            ReducedState::new(dvector![0.1, 0.2], dvector![1.0, -0.7]),
        ),
        (
            veselova3(),
            ReducedState::new(dvector![0.2, 0.1], dvector![0.025, -0.015]),
        ),
    ];
    for (sys, state0) in cases {
        let traj = integrate(&sys, &state0, &IntegrateOptions::rk45(1e-10, 100.0)).unwrap();
        assert_eq!(traj.termination, Termination::Completed, "{}", sys.label());
        let h0 = traj.samples[0].energy;
        assert!(
            traj.max_energy_drift() <= 1e-8 * f64::max(1.0, h0.abs()),
            "{}: drift {}",
            sys.label(),
            traj.max_energy_drift()
        );
    }
}

#[test]
fn theta_is_scaled_gradient_of_phi_for_phi_simple_builtins() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    // r = 2: Theta = dphi.
    let sys = particle(0.0);
    for _ in 0..20 {
        let s = dvector![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let th = theta(&sys, &s).unwrap();
        let grad = fd_gradient(particle_phi, &s, default_step(&s)).unwrap();
        assert!((th - grad).abs().max() < 1e-6);
    }
    // r = 3: Theta = 2 dphi.
    let a = vec![1.0, 2.0, 3.0, 4.0];
    let sys = make_veselova(&VeselovaParams::new(a.clone())).unwrap();
    for _ in 0..20 {
        let s = DVector::from_fn(3, |_, _| rng.gen_range(-0.4..0.4));
        let th = theta(&sys, &s).unwrap();
        let grad = fd_gradient(|s: &DVector<f64>| veselova_phi(&a, s), &s, default_step(&s))
            .unwrap();
        assert!((th - 2.0 * grad).abs().max() < 1e-6);
    }
}

#[test]
fn veselova_time_density_matches_closed_form() {
    let a = vec![1.0, 2.0, 3.0];
    let sys = veselova3();
    let a2 = a.clone();
    let hsys = hamiltonise(&sys, move |s: &DVector<f64>| veselova_phi(&a2, s));
    let s = dvector![0.3, -0.2];
    let gamma = chaplygin_kit::systems::veselova_gamma(&s);
    let agg: f64 = (0..3).map(|i| a[i] * gamma[i] * gamma[i]).sum();
    assert!((hsys.time_density(&s) - agg.sqrt()).abs() < 1e-12);
}
