use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mjls::config::ModelConfig;
use mjls::riccati::{check_finite_brl, hinf_bisection, solve_are, verify_brl_infinite, AreOptions};
use mjls::simulate::{
    empirical_second_moment, energy_csv, energy_ratio_curve, moments_csv, simulate_phi, trajectories_csv,
    Disturbance, SimulationConfig,
};
use mjls::stability::{analyze_stability, SpectralVerdict, StabilityOptions};
use mjls::MjlsSystem;
use nalgebra::DVector;
use serde_json::{json, Value};

use crate::{Command, Common, Outcome};

struct Loaded {
    config: ModelConfig,
    system: MjlsSystem,
}

fn load(common: &Common) -> Result<ModelConfig> {
    let text = fs::read_to_string(&common.config)
        .with_context(|| format!("cannot read config {}", common.config.display()))?;
    let mut config =
        ModelConfig::from_json_str(&text).with_context(|| format!("in {}", common.config.display()))?;
    if let Some(n) = common.grid_nodes {
        config = config.with_nodes(n);
    }
    if let Some(q) = common.quadrature {
        config = config.with_quadrature(q);
    }
    Ok(config)
}

fn build(config: ModelConfig, common: &Common) -> Result<Loaded> {
    let system = config
        .to_system()
        .with_context(|| format!("in {}", common.config.display()))?;
    for w in system.kernel().warnings() {
        eprintln!("warning: {w}");
    }
    Ok(Loaded { config, system })
}

/// Writes `files` and `report.json` into `--out`, returning the written paths.
fn write_outputs(out: Option<&Path>, files: Vec<(&str, String)>, report: &Value) -> Result<Vec<PathBuf>> {
    let Some(dir) = out else {
        return Ok(Vec::new());
    };
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).with_context(|| format!("cannot write {}", path.display()))?;
        written.push(path);
    }
    let path = dir.join("report.json");
    fs::write(&path, serde_json::to_string_pretty(report)?)
        .with_context(|| format!("cannot write {}", path.display()))?;
    written.push(path);
    Ok(written)
}

fn finish(common: &Common, exit: u8, status: &'static str, mut report: Value, files: Vec<(&str, String)>) -> Result<Outcome> {
    let mut full = json!({ "status": status, "exit_code": exit });
    merge(&mut full, report.clone());
    let written = write_outputs(common.out.as_deref(), files, &full)?;
    let outputs: Vec<String> = written.iter().map(|p| p.display().to_string()).collect();
    merge(&mut report, json!({ "outputs": outputs }));
    Ok(Outcome { exit, status, report })
}

fn merge(into: &mut Value, extra: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, extra) {
        a.extend(b);
    }
}

fn grid_summary(system: &MjlsSystem) -> Value {
    json!({
        "nodes": system.grid().len(),
        "quadrature": system.grid().quadrature(),
        "n": system.n(),
        "r": system.r(),
        "m": system.m(),
        "kernel_warnings": system.kernel().warnings(),
    })
}

pub fn run(command: &Command) -> Result<Outcome> {
    let common = match command {
        Command::AnalyzeStability { common }
        | Command::SolveAre { common, .. }
        | Command::Simulate { common, .. }
        | Command::HinfBound { common, .. } => common,
    };
    let config = load(common)?;
    if common.dump_config {
        config.to_system().context("dumped config does not describe a valid system")?;
        let value = serde_json::to_value(&config)?;
        return Ok(Outcome {
            exit: 0,
            status: "config",
            report: json!({ "config": value }),
        });
    }
    let loaded = build(config, common)?;
    match command {
        Command::AnalyzeStability { common } => analyze(common, &loaded),
        Command::SolveAre {
            common,
            gamma,
            eps,
            horizon,
            fidelity_algorithm1,
        } => are(common, &loaded, *gamma, *eps, *horizon, *fidelity_algorithm1),
        Command::Simulate {
            common,
            traj,
            steps,
            seed,
            disturbance,
        } => simulate(common, &loaded, *traj, *steps, *seed, disturbance),
        Command::HinfBound {
            common,
            lo,
            hi,
            tol,
            eps,
            fidelity_algorithm1,
        } => hinf(common, &loaded, *lo, *hi, *tol, *eps, *fidelity_algorithm1),
    }
}

fn analyze(common: &Common, loaded: &Loaded) -> Result<Outcome> {
    let report = analyze_stability(&loaded.system, &StabilityOptions::default())?;
    let (exit, status) = if report.is_stable() {
        (0, "stable")
    } else if report.emss_c_status == Some(SpectralVerdict::Inconclusive) {
        (2, "inconclusive")
    } else {
        (2, "unstable")
    };
    let mut files = Vec::new();
    if let Some(u) = &report.lyapunov_solution {
        files.push(("lyapunov.csv", u.to_csv()));
    }
    let body = json!({ "grid": grid_summary(&loaded.system), "report": report });
    finish(common, exit, status, body, files)
}

fn are_options(loaded: &Loaded, eps: Option<f64>, literal: bool) -> AreOptions {
    AreOptions {
        eps: eps.or(loaded.config.eps).unwrap_or(AreOptions::default().eps),
        literal,
        ..AreOptions::default()
    }
}

fn are(
    common: &Common,
    loaded: &Loaded,
    gamma: Option<f64>,
    eps: Option<f64>,
    horizon: Option<usize>,
    literal: bool,
) -> Result<Outcome> {
    let Some(gamma) = gamma.or(loaded.config.gamma) else {
        bail!("missing --gamma and the config has no `gamma`");
    };
    let opts = are_options(loaded, eps, literal);
    let finite = horizon
        .or(loaded.config.horizon)
        .map(|t| check_finite_brl(&loaded.system, gamma, t))
        .transpose()?;
    let solution = solve_are(&loaded.system, gamma, &opts)?;
    let verdict = verify_brl_infinite(&loaded.system, gamma, &solution, opts.residual_tol())?;
    let (exit, status) = if verdict.verdict {
        (0, "verified")
    } else {
        (2, "not_verified")
    };
    let body = json!({
        "grid": grid_summary(&loaded.system),
        "eps": opts.eps,
        "algorithm": if literal { "literal" } else { "incremental" },
        "solution": solution.summary(),
        "verdict": verdict,
        "finite_horizon": finite,
    });
    let files = vec![("are_k.csv", solution.k.to_csv()), ("are_gain.csv", solution.gain.to_csv())];
    finish(common, exit, status, body, files)
}

fn simulate(
    common: &Common,
    loaded: &Loaded,
    traj: usize,
    steps: Option<usize>,
    seed: Option<u64>,
    disturbance: &str,
) -> Result<Outcome> {
    if traj == 0 {
        bail!("--traj must be positive");
    }
    let disturbance = Disturbance::parse(disturbance)?;
    let system = &loaded.system;
    let cfg = SimulationConfig {
        x0: loaded.config.x0().unwrap_or_else(|| DVector::zeros(system.n())),
        horizon: steps.or(loaded.config.horizon).unwrap_or(100),
        n_traj: traj,
        seed: seed.or(loaded.config.seed).unwrap_or(0),
        initial_mode: None,
        sampling_period: loaded.config.sampling_period.unwrap_or(1.0),
    };
    let batch = simulate_phi(system, &disturbance, &cfg)?;
    let energy = energy_ratio_curve(&batch);
    let moments = empirical_second_moment(&batch, None).expect("at least one trajectory");
    let max_ratio = energy.iter().filter_map(|p| p.ratio).fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))));
    let body = json!({
        "grid": grid_summary(system),
        "trajectories": traj,
        "steps": cfg.horizon,
        "seed": cfg.seed,
        "x0": cfg.x0.as_slice(),
        "coefficient_source": batch.coefficient_source,
        "max_energy_ratio": max_ratio,
        "final_trace_mean": moments.trace_mean.last(),
        "final_trace_std_err": moments.trace_std_err.last(),
    });
    let files = vec![
        ("trajectories.csv", trajectories_csv(&batch)),
        ("energy.csv", energy_csv(&energy)),
        ("moments.csv", moments_csv(&moments)),
    ];
    finish(common, 0, "ok", body, files)
}

fn hinf(common: &Common, loaded: &Loaded, lo: f64, hi: f64, tol: f64, eps: Option<f64>, literal: bool) -> Result<Outcome> {
    let opts = are_options(loaded, eps, literal);
    let interval = hinf_bisection(&loaded.system, lo, hi, tol, &opts)?;
    let body = json!({
        "grid": grid_summary(&loaded.system),
        "eps": opts.eps,
        "tol": tol,
        "interval": interval,
    });
    finish(common, 0, "ok", body, Vec::new())
}
