//! Built-in Chaplygin systems with closed-form oracles.

mod disk;
mod particle;
mod veselova;

pub use disk::{make_vertical_disk, DiskParams};
pub use particle::{make_nonholonomic_particle, particle_phi, ParticleParams, ParticlePotential};
pub use veselova::{
    make_veselova, oracle_bracket_pairing, veselova_gamma, veselova_oracle_c, veselova_oracle_k,
    veselova_phi, veselova_section, VeselovaParams, VeselovaRealization,
};
