//! `chaplygin-kit`: config-driven runs of reduced nonholonomic systems.
//!
//! Exit codes: 0 success, 2 config or parse error, 3 domain exit with
//! partial output, 4 precondition failure (system is not phi-simple).

mod config;
mod phi;

use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use chaplygin_kit::diagnostics::{
    check_exactness_theta, conformal_closedness_residual, detect_phi_simple, liouville_residual,
};
use chaplygin_kit::dynamics::{
    hamiltonian, hamiltonise, integrate, integrate_symplectic, IntegrateOptions, Method,
    ReducedState, SymplecticOptions, Termination, Trajectory,
};
use chaplygin_kit::geometry::SystemDefinition;

use config::{build_system, make_grid, validate, PhiConfig, RunConfig};

const EXIT_CONFIG: u8 = 2;
const EXIT_DOMAIN: u8 = 3;
const EXIT_PRECONDITION: u8 = 4;

#[derive(Parser)]
#[command(name = "chaplygin-kit", version, about = "Reduced dynamics of Chaplygin systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<String>,
    /// Worker threads for grid diagnostics (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomized residual sampling.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the reduced equations and write a CSV trajectory.
    Simulate,
    /// Run measure and phi-simplicity diagnostics, write a JSON report.
    Diagnose,
    /// Integrate the Hamiltonised system and compare against a reference.
    Hamiltonise,
    /// Emit a gnuplot script for a previously written trajectory.
    EmitPlot,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let config_path = match &cli.config {
        Some(p) => p.clone(),
        None => {
            eprintln!("config error at `--config`: a configuration file is required");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let config = match load_config(&config_path) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("{msg}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let result = match cli.command {
        Command::Simulate => cmd_simulate(&config),
        Command::Diagnose => cmd_diagnose(&config, cli.seed),
        Command::Hamiltonise => cmd_hamiltonise(&config),
        Command::EmitPlot => cmd_emit_plot(&config),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("{}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

fn config_failure(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: message.into(),
    }
}

fn run_failure(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

fn load_config(path: &str) -> Result<RunConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("config error at `--config`: cannot read {path}: {e}"))?;
    serde_json::from_str(&text).map_err(|e| format!("config error: {e}"))
}

fn built(config: &RunConfig) -> Result<config::BuiltSystem, Failure> {
    let built = build_system(&config.system).map_err(|e| config_failure(e.to_string()))?;
    validate(config, &built.sys).map_err(|e| config_failure(e.to_string()))?;
    Ok(built)
}

fn initial_state(config: &RunConfig) -> ReducedState {
    ReducedState::new(
        DVector::from_vec(config.initial_state.s.clone()),
        DVector::from_vec(config.initial_state.p.clone()),
    )
}

fn integrate_options(config: &RunConfig) -> IntegrateOptions {
    let method = match config.integrator.method.as_str() {
        "rk4" => Method::Rk4 {
            dt: config.integrator.dt.unwrap_or(1e-3),
        },
        _ => Method::Rk45 {
            tol: config.integrator.tol.unwrap_or(1e-9),
        },
    };
    IntegrateOptions {
        method,
        t_end: config.integrator.t_end,
        max_step: f64::INFINITY,
    }
}

fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_trajectory_csv(
    path: &str,
    sys: &SystemDefinition,
    trajectory: &Trajectory,
    with_tau: bool,
) -> Result<(), Failure> {
    let r = sys.shape_dim();
    let mut out = String::new();
    let mut header = String::from("t");
    for i in 1..=r {
        header.push_str(&format!(",s{i}"));
    }
    for i in 1..=r {
        header.push_str(&format!(",p{i}"));
    }
    header.push_str(",H,liouville_residual");
    if with_tau {
        header.push_str(",tau");
    }
    out.push_str(&header);
    out.push('\n');
    for sample in &trajectory.samples {
        let residual = liouville_residual(sys, &sample.state, 1e-5).unwrap_or(f64::NAN);
        let mut row = format_float(sample.t);
        for i in 0..r {
            row.push(',');
            row.push_str(&format_float(sample.state.s[i]));
        }
        for i in 0..r {
            row.push(',');
            row.push_str(&format_float(sample.state.p[i]));
        }
        row.push(',');
        row.push_str(&format_float(sample.energy));
        row.push(',');
        row.push_str(&format_float(residual));
        if with_tau {
            row.push(',');
            row.push_str(&format_float(sample.tau.unwrap_or(f64::NAN)));
        }
        out.push_str(&row);
        out.push('\n');
    }
    out.push_str(&format!("# system: {}\n", trajectory.system_label));
    out.push_str(&format!("# integrator: {}\n", trajectory.integrator));
    if let Termination::DomainExit { t } = trajectory.termination {
        out.push_str(&format!(
            "# domain exit at t = {}; trajectory truncated\n",
            format_float(t)
        ));
    }
    std::fs::write(path, out)
        .map_err(|e| run_failure(format!("cannot write trajectory {path}: {e}")))?;
    Ok(())
}

fn cmd_simulate(config: &RunConfig) -> Result<u8, Failure> {
    let built = built(config)?;
    let path = config
        .output
        .trajectory
        .as_deref()
        .ok_or_else(|| config_failure("config error at `output.trajectory`: required by simulate"))?;
    let state0 = initial_state(config);
    let trajectory = integrate(&built.sys, &state0, &integrate_options(config))
        .map_err(|e| run_failure(format!("integration failed: {e}")))?;
    write_trajectory_csv(path, &built.sys, &trajectory, false)?;
    match trajectory.termination {
        Termination::Completed => Ok(0),
        Termination::DomainExit { t } => {
            eprintln!("domain exit at t = {t}; partial trajectory written to {path}");
            Ok(EXIT_DOMAIN)
        }
    }
}

fn json_float(x: f64) -> serde_json::Value {
    serde_json::Number::from_f64(x)
        .map(serde_json::Value::Number)
        .unwrap_or(serde_json::Value::Null)
}

fn random_states(
    sys: &SystemDefinition,
    grid_lower: &[f64],
    grid_upper: &[f64],
    count: usize,
    seed: u64,
) -> Vec<ReducedState> {
    let r = sys.shape_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = Vec::with_capacity(count);
    while states.len() < count {
        let s = DVector::from_fn(r, |a, _| rng.gen_range(grid_lower[a]..grid_upper[a]));
        if !sys.in_domain(&s) {
            continue;
        }
        let p = DVector::from_fn(r, |_, _| rng.gen_range(-1.0..1.0));
        states.push(ReducedState::new(s, p));
    }
    states
}

fn cmd_diagnose(config: &RunConfig, seed: u64) -> Result<u8, Failure> {
    let built = built(config)?;
    let sys = &built.sys;
    let diag = config
        .diagnostics
        .as_ref()
        .ok_or_else(|| config_failure("config error at `diagnostics`: required by diagnose"))?;
    let grid = make_grid(&diag.grid).map_err(|e| config_failure(e.to_string()))?;

    let exactness = check_exactness_theta(sys, &grid, diag.tol)
        .map_err(|e| run_failure(format!("exactness test failed: {e}")))?;
    let phi_report = detect_phi_simple(sys, &grid, diag.tol)
        .map_err(|e| run_failure(format!("phi-simplicity test failed: {e}")))?;

    let states = random_states(sys, &diag.grid.lower, &diag.grid.upper, 100, seed);
    let residuals: Vec<f64> = states
        .iter()
        .map(|st| liouville_residual(sys, st, 1e-5).unwrap_or(f64::NAN))
        .collect();
    let max_res = residuals.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mean_res = residuals.iter().map(|x| x.abs()).sum::<f64>() / residuals.len() as f64;

    let conformal_residual_max = if phi_report.is_phi_simple {
        let anchor = grid.point(0);
        let reconstructed = phi::ReconstructedPhi::new(sys, anchor);
        let worst = states
            .iter()
            .take(20)
            .map(|st| {
                conformal_closedness_residual(sys, |s: &DVector<f64>| reconstructed.eval(s), st)
                    .map(|m| m.abs().max())
                    .unwrap_or(f64::NAN)
            })
            .fold(0.0f64, f64::max);
        json_float(worst)
    } else {
        serde_json::Value::Null
    };

    let report = serde_json::json!({
        "theta_exact": exactness.is_exact,
        "sigma_table": exactness.sigma_samples,
        "phi_simple": phi_report.is_phi_simple,
        "phi_table": phi_report.phi_samples,
        "pattern_residual_max": json_float(phi_report.pattern_residual_max),
        "liouville_residual_stats": {
            "count": residuals.len(),
            "max": json_float(max_res),
            "mean": json_float(mean_res),
        },
        "conformal_residual_max": conformal_residual_max,
    });
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    match config.output.report.as_deref() {
        Some(path) => std::fs::write(path, text + "\n")
            .map_err(|e| run_failure(format!("cannot write report {path}: {e}")))?,
        None => println!("{text}"),
    }
    Ok(0)
}

fn cmd_hamiltonise(config: &RunConfig) -> Result<u8, Failure> {
    let built = built(config)?;
    let sys = &built.sys;
    let ham = config
        .hamiltonise
        .as_ref()
        .ok_or_else(|| config_failure("config error at `hamiltonise`: required by hamiltonise"))?;
    if !ham.enabled {
        return Err(config_failure(
            "config error at `hamiltonise.enabled`: must be true for this command",
        ));
    }
    let path = config
        .output
        .trajectory
        .as_deref()
        .ok_or_else(|| config_failure("config error at `output.trajectory`: required by hamiltonise"))?;

    let phi_fn: Box<dyn Fn(&DVector<f64>) -> f64 + Send + Sync> = match &ham.phi {
        PhiConfig::Builtin => built
            .builtin_phi
            .ok_or_else(|| config_failure("config error at `hamiltonise.phi`: no builtin phi for this system"))?,
        PhiConfig::Auto => {
            let diag = config.diagnostics.as_ref().ok_or_else(|| {
                config_failure("config error at `diagnostics`: required for phi source `auto`")
            })?;
            let grid = make_grid(&diag.grid).map_err(|e| config_failure(e.to_string()))?;
            let report = detect_phi_simple(sys, &grid, diag.tol)
                .map_err(|e| run_failure(format!("phi-simplicity test failed: {e}")))?;
            if !report.is_phi_simple {
                return Err(Failure {
                    code: EXIT_PRECONDITION,
                    message: format!(
                        "system is not phi-simple: pattern residual {:.3e}, consistency residual {:.3e}, gradient curl {:.3e}",
                        report.pattern_residual_max,
                        report.consistency_residual_max,
                        report.gradient_curl_max
                    ),
                });
            }
            // The closure must own its system; build a second instance.
            let anchor = grid.point(0);
            let sys_for_phi = build_system(&config.system)
                .map_err(|e| config_failure(e.to_string()))?
                .sys;
            Box::new(move |s: &DVector<f64>| {
                phi::ReconstructedPhi::new(&sys_for_phi, anchor.clone()).eval(s)
            })
        }
        PhiConfig::Table { grid, values } => {
            let grid = make_grid(grid).map_err(|e| config_failure(e.to_string()))?;
            let table = phi::TabulatedPhi::new(grid, values.clone());
            Box::new(move |s: &DVector<f64>| table.eval(s))
        }
    };

    let state0 = initial_state(config);
    let hsys = hamiltonise(sys, phi_fn);
    let n_steps = (ham.tau_end / ham.dtau).round() as usize;
    let mut opts = SymplecticOptions::new(ham.tau_end, ham.dtau);
    opts.sample_every = (n_steps / 20_000).max(1);
    let trajectory = integrate_symplectic(&hsys, &state0, &opts)
        .map_err(|e| run_failure(format!("symplectic integration failed: {e}")))?;
    write_trajectory_csv(path, sys, &trajectory, true)?;

    // Reference comparison at the direct integrator's horizon.
    let t_ref = config.integrator.t_end;
    let reference = integrate(sys, &state0, &IntegrateOptions::rk45(1e-11, t_ref))
        .map_err(|e| run_failure(format!("reference integration failed: {e}")))?;
    let deviation = if trajectory.last().t >= t_ref
        && reference.termination == Termination::Completed
    {
        let idx = trajectory
            .samples
            .iter()
            .position(|s| s.t >= t_ref)
            .expect("reached t_ref");
        let (s0, s1) = (&trajectory.samples[idx - 1], &trajectory.samples[idx]);
        let w = (t_ref - s0.t) / (s1.t - s0.t);
        let interp = (1.0 - w) * s0.state.to_vector() + w * s1.state.to_vector();
        json_float((interp - reference.last().state.to_vector()).norm())
    } else {
        serde_json::Value::Null
    };
    let h0 = hamiltonian(sys, &state0).map_err(|e| run_failure(e.to_string()))?;
    let summary = serde_json::json!({
        "reference_time": json_float(t_ref),
        "state_deviation": deviation,
        "energy_drift_max": json_float(trajectory.max_energy_drift()),
        "initial_energy": json_float(h0),
        "tau_end": json_float(ham.tau_end),
        "dtau": json_float(ham.dtau),
        "physical_time_reached": json_float(trajectory.last().t),
    });
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    match config.output.report.as_deref() {
        Some(report_path) => std::fs::write(report_path, text + "\n")
            .map_err(|e| run_failure(format!("cannot write report {report_path}: {e}")))?,
        None => println!("{text}"),
    }
    match trajectory.termination {
        Termination::Completed => Ok(0),
        Termination::DomainExit { t } => {
            eprintln!("domain exit at t = {t}; partial trajectory written to {path}");
            Ok(EXIT_DOMAIN)
        }
    }
}

fn cmd_emit_plot(config: &RunConfig) -> Result<u8, Failure> {
    let csv_path = config
        .output
        .trajectory
        .as_deref()
        .ok_or_else(|| config_failure("config error at `output.trajectory`: required by emit-plot"))?;
    let text = std::fs::read_to_string(csv_path)
        .map_err(|e| config_failure(format!("cannot read trajectory {csv_path}: {e}")))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| config_failure(format!("trajectory {csv_path} is empty")))?;
    let columns: Vec<&str> = header.split(',').collect();
    let h_column = columns
        .iter()
        .position(|&c| c == "H")
        .ok_or_else(|| config_failure(format!("trajectory {csv_path} has no H column")))?;
    let residual_column = columns.iter().position(|&c| c == "liouville_residual");
    let data_rows = lines.filter(|l| !l.trim().is_empty()).count();
    if data_rows == 0 {
        return Err(config_failure(format!("trajectory {csv_path} has no data rows")));
    }
    let s_columns: Vec<usize> = columns
        .iter()
        .enumerate()
        .filter(|(_, c)| c.starts_with('s') && c[1..].chars().all(|ch| ch.is_ascii_digit()))
        .map(|(i, _)| i)
        .collect();

    let plot_path = config
        .output
        .plot
        .clone()
        .unwrap_or_else(|| format!("{csv_path}.gp"));
    let csv_name = Path::new(csv_path)
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| csv_path.to_string());

    let mut script = String::new();
    script.push_str("set datafile separator \",\"\n");
    script.push_str("set key outside\n");
    script.push_str("set xlabel \"t\"\n");
    script.push_str("set terminal pngcairo size 1200,900\n");
    script.push_str("set output \"trajectory.png\"\n");
    script.push_str("set multiplot layout 3,1\n");
    script.push_str("set title \"shape coordinates\"\n");
    let shape_series: Vec<String> = s_columns
        .iter()
        .map(|&i| {
            format!(
                "\"{csv_name}\" every ::1 using 1:{} with lines title \"{}\"",
                i + 1,
                columns[i]
            )
        })
        .collect();
    script.push_str(&format!("plot {}\n", shape_series.join(", \\\n     ")));
    script.push_str("set title \"energy\"\n");
    script.push_str(&format!(
        "plot \"{csv_name}\" every ::1 using 1:{} with lines title \"H\"\n",
        h_column + 1
    ));
    if let Some(res) = residual_column {
        script.push_str("set title \"Liouville residual\"\n");
        script.push_str(&format!(
            "plot \"{csv_name}\" every ::1 using 1:{} with lines title \"residual\"\n",
            res + 1
        ));
    }
    script.push_str("unset multiplot\n");

    let mut file = std::fs::File::create(&plot_path)
        .map_err(|e| run_failure(format!("cannot write plot script {plot_path}: {e}")))?;
    file.write_all(script.as_bytes())
        .map_err(|e| run_failure(format!("cannot write plot script {plot_path}: {e}")))?;
    Ok(0)
}
