//! Run configuration: JSON schema, validation, and system construction.

use chaplygin_kit::diagnostics::Grid;
use chaplygin_kit::geometry::SystemDefinition;
use chaplygin_kit::systems::{
    make_nonholonomic_particle, make_vertical_disk, make_veselova, particle_phi, veselova_phi,
    DiskParams, ParticleParams, ParticlePotential, VeselovaParams, VeselovaRealization,
};
use nalgebra::DVector;
use serde::Deserialize;

#[derive(Debug)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error at `{}`: {}", self.field, self.message)
    }
}

fn bad(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub initial_state: StateConfig,
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub diagnostics: Option<DiagnosticsConfig>,
    #[serde(default)]
    pub hamiltonise: Option<HamiltoniseConfig>,
    pub output: OutputConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub name: String,
    #[serde(default)]
    pub params: serde_json::Value,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateConfig {
    pub s: Vec<f64>,
    pub p: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub method: String,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub tol: Option<f64>,
    pub t_end: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub grid: GridConfig,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_tol() -> f64 {
    1e-5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub points: Vec<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltoniseConfig {
    #[serde(default = "default_true")]
    pub enabled: bool,
    pub phi: PhiConfig,
    #[serde(default = "default_tau_end")]
    pub tau_end: f64,
    #[serde(default = "default_dtau")]
    pub dtau: f64,
}

fn default_true() -> bool {
    true
}

fn default_tau_end() -> f64 {
    10.0
}

fn default_dtau() -> f64 {
    1e-3
}

#[derive(Debug, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhiConfig {
    /// Use the system's known conformal factor.
    Builtin,
    /// Detect phi-simplicity on the diagnostics grid and reconstruct phi
    /// numerically.
    Auto,
    /// Sampled phi values on a grid, interpolated multilinearly.
    Table { grid: GridConfig, values: Vec<f64> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub trajectory: Option<String>,
    pub report: Option<String>,
    #[serde(default)]
    pub plot: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParticleConfig {
    a: f64,
    #[serde(default)]
    potential: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiskConfig {
    mass: f64,
    inertia_normal: f64,
    inertia_axial: f64,
    radius: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VeselovaConfig {
    inertia_diag: Vec<f64>,
    #[serde(default)]
    delta: Option<f64>,
    #[serde(default)]
    realization: Option<String>,
}

/// The built system plus its known conformal factor, when one exists.
pub struct BuiltSystem {
    pub sys: SystemDefinition,
    pub builtin_phi: Option<Box<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>>,
}

pub fn build_system(config: &SystemConfig) -> Result<BuiltSystem, ConfigError> {
    match config.name.as_str() {
        "particle" => {
            let pc: ParticleConfig = serde_json::from_value(config.params.clone())
                .map_err(|e| bad("system.params", e.to_string()))?;
            let potential = match pc.potential.as_deref() {
                None | Some("zero") => ParticlePotential::Zero,
                Some("u_a") => ParticlePotential::UA,
                Some(other) => {
                    return Err(bad(
                        "system.params.potential",
                        format!("unknown potential `{other}` (expected `zero` or `u_a`)"),
                    ))
                }
            };
            let sys = make_nonholonomic_particle(&ParticleParams { a: pc.a, potential })
                .map_err(|e| bad("system.params.a", e.to_string()))?;
            Ok(BuiltSystem {
                sys,
                builtin_phi: Some(Box::new(particle_phi)),
            })
        }
        "disk" => {
            let dc: DiskConfig = serde_json::from_value(config.params.clone())
                .map_err(|e| bad("system.params", e.to_string()))?;
            let sys = make_vertical_disk(&DiskParams {
                mass: dc.mass,
                inertia_normal: dc.inertia_normal,
                inertia_axial: dc.inertia_axial,
                radius: dc.radius,
            })
            .map_err(|e| bad("system.params", e.to_string()))?;
            Ok(BuiltSystem {
                sys,
                builtin_phi: Some(Box::new(|_: &DVector<f64>| 0.0)),
            })
        }
        "veselova" => {
            let vc: VeselovaConfig = serde_json::from_value(config.params.clone())
                .map_err(|e| bad("system.params", e.to_string()))?;
            let mut params = VeselovaParams::new(vc.inertia_diag.clone());
            if let Some(delta) = vc.delta {
                params.delta = delta;
            }
            params.realization = match vc.realization.as_deref() {
                None | Some("chart") => VeselovaRealization::Chart,
                Some("group") => VeselovaRealization::Group,
                Some(other) => {
                    return Err(bad(
                        "system.params.realization",
                        format!("unknown realization `{other}` (expected `chart` or `group`)"),
                    ))
                }
            };
            let sys = make_veselova(&params)
                .map_err(|e| bad("system.params", e.to_string()))?;
            let a = vc.inertia_diag;
            Ok(BuiltSystem {
                sys,
                builtin_phi: Some(Box::new(move |s: &DVector<f64>| veselova_phi(&a, s))),
            })
        }
        other => Err(bad(
            "system.name",
            format!("unknown system `{other}` (expected `particle`, `disk`, or `veselova`)"),
        )),
    }
}

pub fn validate(config: &RunConfig, sys: &SystemDefinition) -> Result<(), ConfigError> {
    let r = sys.shape_dim();
    if config.initial_state.s.len() != r {
        return Err(bad(
            "initial_state.s",
            format!("length {} does not match the system's {r} shape coordinates", config.initial_state.s.len()),
        ));
    }
    if config.initial_state.p.len() != r {
        return Err(bad(
            "initial_state.p",
            format!("length {} does not match the system's {r} momenta", config.initial_state.p.len()),
        ));
    }
    match config.integrator.method.as_str() {
        "rk4" | "rk45" => {}
        other => {
            return Err(bad(
                "integrator.method",
                format!("unknown method `{other}` (expected `rk4` or `rk45`)"),
            ))
        }
    }
    if config.integrator.t_end <= 0.0 {
        return Err(bad("integrator.t_end", "must be positive"));
    }
    if let Some(dt) = config.integrator.dt {
        if dt <= 0.0 {
            return Err(bad("integrator.dt", "must be positive"));
        }
    }
    if let Some(tol) = config.integrator.tol {
        if tol <= 0.0 {
            return Err(bad("integrator.tol", "must be positive"));
        }
    }
    if let Some(diag) = &config.diagnostics {
        validate_grid(&diag.grid, r, "diagnostics.grid")?;
        if diag.tol <= 0.0 {
            return Err(bad("diagnostics.tol", "must be positive"));
        }
    }
    if let Some(ham) = &config.hamiltonise {
        if ham.tau_end <= 0.0 {
            return Err(bad("hamiltonise.tau_end", "must be positive"));
        }
        if ham.dtau <= 0.0 {
            return Err(bad("hamiltonise.dtau", "must be positive"));
        }
        if let PhiConfig::Table { grid, values } = &ham.phi {
            validate_grid(grid, r, "hamiltonise.phi.grid")?;
            let expected: usize = grid.points.iter().product();
            if values.len() != expected {
                return Err(bad(
                    "hamiltonise.phi.values",
                    format!("length {} does not match the grid's {expected} points", values.len()),
                ));
            }
        }
    }
    Ok(())
}

fn validate_grid(grid: &GridConfig, r: usize, field: &str) -> Result<(), ConfigError> {
    if grid.lower.len() != r || grid.upper.len() != r || grid.points.len() != r {
        return Err(bad(
            field,
            format!("lower/upper/points must all have the system's {r} axes"),
        ));
    }
    if grid.points.iter().any(|&n| n < 3) {
        return Err(bad(field, "at least 3 points per axis"));
    }
    if grid.lower.iter().zip(&grid.upper).any(|(l, u)| u <= l) {
        return Err(bad(field, "upper bounds must exceed lower bounds"));
    }
    Ok(())
}

pub fn make_grid(grid: &GridConfig) -> Result<Grid, ConfigError> {
    Grid::from_bounds(
        DVector::from_vec(grid.lower.clone()),
        DVector::from_vec(grid.upper.clone()),
        &grid.points,
    )
    .map_err(|e| bad("diagnostics.grid", e.to_string()))
}
