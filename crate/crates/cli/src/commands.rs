//! Subcommand implementations. Every command prints a summary to the given
//! writer and writes its CSV files into the output directory.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use turnpike_core::heat::{demo_counterexample, demo_stable, truncation_study, HeatConfig};
use turnpike_core::structure::{hautus_detectable, hautus_stabilizable, unobservable_subspace, HautusReport};
use turnpike_core::turnpike::{deviation_curve, horizon_scan};
use turnpike_core::{solve_glq, steady, Error, ScanStatus, TurnpikeReport, Vector};

use crate::config::{parse_config, ConfigError, HeatDemo, ProblemSource, RunConfig};

/// Exit codes of the `turnpike` binary.
pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const PARSE: i32 = 2;
    pub const KKT: i32 = 3;
    pub const BLOW_UP: i32 = 4;
    pub const SPECTRAL: i32 = 5;
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl CliError {
    fn other(message: impl Into<String>) -> Self {
        Self {
            code: exit::OTHER,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::KktSingular { .. } => exit::KKT,
            Error::NonFiniteState { .. } => exit::BLOW_UP,
            Error::SpectralUnreliable { .. } | Error::GapViolation { .. } | Error::NoConvergence { .. } => exit::SPECTRAL,
            _ => exit::OTHER,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self {
            code: exit::PARSE,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::other(format!("i/o error: {e}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Steady,
    Solve,
    Scan,
    Hautus,
    Heat { demo: Option<HeatDemo> },
}

/// Options shared by every subcommand; `None` keeps the config value.
#[derive(Debug, Clone, PartialEq)]
pub struct Options {
    pub config: PathBuf,
    pub out: PathBuf,
    pub dt: Option<f64>,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
}

pub fn load_config(options: &Options) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(&options.config)
        .map_err(|e| CliError::other(format!("cannot read {}: {e}", options.config.display())))?;
    let mut cfg = parse_config(&text)?;
    if let Some(dt) = options.dt {
        if !(dt > 0.0) {
            return Err(ConfigError { line: 0, message: "--dt must be positive".into() }.into());
        }
        cfg.dt = dt;
    }
    if let Some(eps) = options.epsilon {
        if !(eps > 0.0) {
            return Err(ConfigError { line: 0, message: "--epsilon must be positive".into() }.into());
        }
        cfg.epsilon = eps;
    }
    if let Some(seed) = options.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

pub fn run(command: Command, options: &Options, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load_config(options)?;
    fs::create_dir_all(&options.out)
        .map_err(|e| CliError::other(format!("cannot create {}: {e}", options.out.display())))?;
    let out = options.out.as_path();
    let summary = match command {
        Command::Steady => steady_command(&cfg, out)?,
        Command::Solve => solve_command(&cfg, out)?,
        Command::Scan => scan_command(&cfg, out)?,
        Command::Hautus => hautus_command(&cfg, out)?,
        Command::Heat { demo } => heat_command(&cfg, demo.unwrap_or(cfg.heat_demo), out)?,
    };
    stdout.write_all(summary.as_bytes())?;
    Ok(())
}

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_vector(v: &Vector) -> String {
    let parts: Vec<String> = v.iter().map(|&x| fmt_float(x)).collect();
    format!("[{}]", parts.join(", "))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::other(format!("cannot write {}: {e}", path.display())))
}

/// File-name form of a horizon (`10`, `2.5`).
fn horizon_tag(t: f64) -> String {
    format!("{t}")
}

fn steady_command(cfg: &RunConfig, out: &Path) -> Result<String, CliError> {
    let problem = cfg.problem()?;
    let s = steady::solve_steady(&problem)?;
    let mut csv = String::from("quantity,index,value\n");
    for (name, v) in [("x_e", &s.x_e), ("u_e", &s.u_e), ("w", &s.w)] {
        for (i, x) in v.iter().enumerate() {
            writeln!(csv, "{name},{},{}", i + 1, fmt_float(*x)).unwrap();
        }
    }
    writeln!(csv, "kkt_residual,0,{}", fmt_float(s.kkt_residual)).unwrap();
    writeln!(csv, "unique,0,{}", u8::from(s.unique)).unwrap();
    write_file(out, "steady.csv", &csv)?;

    let mut text = String::new();
    writeln!(text, "x_e = {}", fmt_vector(&s.x_e)).unwrap();
    writeln!(text, "u_e = {}", fmt_vector(&s.u_e)).unwrap();
    writeln!(text, "w = {}", fmt_vector(&s.w)).unwrap();
    writeln!(text, "kkt_residual = {}", fmt_float(s.kkt_residual)).unwrap();
    writeln!(text, "unique = {}", s.unique).unwrap();
    Ok(text)
}

fn trajectory_csv(traj: &turnpike_core::Trajectory, deviation: &[f64]) -> String {
    let n = traj.states.first().map_or(0, Vector::len);
    let m = traj.controls.first().map_or(0, Vector::len);
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=m).map(|i| format!("u{i}")));
    header.push("d".into());
    let mut csv = header.join(",");
    csv.push('\n');
    for (i, t) in traj.times.iter().enumerate() {
        let mut row = vec![fmt_float(*t)];
        row.extend(traj.states[i].iter().map(|&x| fmt_float(x)));
        row.extend(traj.controls[i].iter().map(|&x| fmt_float(x)));
        row.push(fmt_float(deviation[i]));
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    csv
}

fn solve_command(cfg: &RunConfig, out: &Path) -> Result<String, CliError> {
    let problem = cfg.problem()?;
    let x0 = cfg.initial_state(problem.state_dim())?;
    let horizon = cfg.solve_horizon();
    let traj = solve_glq(&problem, &x0, horizon, cfg.dt)?;
    let curve = deviation_curve(&traj, &traj.reference);
    write_file(out, "trajectory.csv", &trajectory_csv(&traj, &curve.values))?;
    let mut text = String::new();
    writeln!(text, "horizon = {}", fmt_float(horizon)).unwrap();
    writeln!(text, "samples = {}", traj.times.len()).unwrap();
    writeln!(text, "cost = {}", fmt_float(traj.cost)).unwrap();
    writeln!(text, "midpoint_deviation = {}", fmt_float(curve.midpoint())).unwrap();
    Ok(text)
}

fn status_label(status: &ScanStatus) -> &'static str {
    match status {
        ScanStatus::Ok => "ok",
        ScanStatus::BlowUp { .. } => "blowup",
        ScanStatus::Failed(_) => "failed",
    }
}

fn report_csv(report: &TurnpikeReport) -> String {
    let mut csv = String::from("T,measure_outside,k,M,midpoint_deviation,status\n");
    for e in &report.entries {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            fmt_float(e.horizon),
            fmt_float(e.measure_outside),
            fmt_float(e.rate()),
            fmt_float(e.amplitude()),
            fmt_float(e.midpoint_deviation),
            status_label(&e.status)
        )
        .unwrap();
    }
    csv
}

fn deviation_csv(report: &TurnpikeReport) -> String {
    let mut csv = String::from("T,t,d\n");
    for e in &report.entries {
        if let Some(curve) = &e.curve {
            let tag = fmt_float(e.horizon);
            for (t, d) in curve.times.iter().zip(&curve.values) {
                writeln!(csv, "{tag},{},{}", fmt_float(*t), fmt_float(*d)).unwrap();
            }
        }
    }
    csv
}

fn scan_table(report: &TurnpikeReport) -> String {
    let mut text = String::new();
    writeln!(text, "epsilon = {}", fmt_float(report.epsilon)).unwrap();
    writeln!(text, "x_e = {}", fmt_vector(&report.reference.x_e)).unwrap();
    writeln!(text, "u_e = {}", fmt_vector(&report.reference.u_e)).unwrap();
    writeln!(text, "{:>10} {:>12} {:>12} {:>12} {:>14}  status", "T", "outside", "k", "M", "d(T/2)").unwrap();
    for e in &report.entries {
        let status = match &e.status {
            ScanStatus::Ok => "ok".to_string(),
            ScanStatus::BlowUp { last_finite_time } => format!("blowup after t = {last_finite_time}"),
            ScanStatus::Failed(msg) => format!("failed: {msg}"),
        };
        writeln!(
            text,
            "{:>10} {:>12.4} {:>12.4e} {:>12.4e} {:>14.4e}  {status}",
            e.horizon,
            e.measure_outside,
            e.rate(),
            e.amplitude(),
            e.midpoint_deviation
        )
        .unwrap();
    }
    text
}

fn write_scan(report: &TurnpikeReport, out: &Path, trajectories: bool) -> Result<(), CliError> {
    write_file(out, "report.csv", &report_csv(report))?;
    write_file(out, "deviation.csv", &deviation_csv(report))?;
    if trajectories {
        for e in &report.entries {
            if let (Some(traj), Some(curve)) = (&e.trajectory, &e.curve) {
                let name = format!("trajectory_T{}.csv", horizon_tag(e.horizon));
                write_file(out, &name, &trajectory_csv(traj, &curve.values))?;
            }
        }
    }
    Ok(())
}

fn scan_command(cfg: &RunConfig, out: &Path) -> Result<String, CliError> {
    let problem = cfg.problem()?;
    let x0 = cfg.initial_state(problem.state_dim())?;
    let report = horizon_scan(&problem, &x0, &cfg.horizons, cfg.dt, cfg.epsilon)?;
    write_scan(&report, out, true)?;
    Ok(scan_table(&report))
}

fn hautus_lines(text: &mut String, name: &str, r: &HautusReport) {
    writeln!(text, "{name} = {}", r.holds).unwrap();
    if let Some(w) = &r.witness {
        writeln!(text, "  witness eigenvalue = {} + {}i", fmt_float(w.eigenvalue.re), fmt_float(w.eigenvalue.im)).unwrap();
        let parts: Vec<String> = w
            .vector
            .iter()
            .map(|c| format!("{}{:+.16e}i", fmt_float(c.re), c.im))
            .collect();
        writeln!(text, "  witness vector = [{}]", parts.join(", ")).unwrap();
    }
}

fn hautus_command(cfg: &RunConfig, out: &Path) -> Result<String, CliError> {
    let problem = cfg.problem()?;
    let stab = hautus_stabilizable(problem.a(), problem.b(), cfg.gap)?;
    let det = hautus_detectable(problem.a(), problem.c(), cfg.gap)?;
    let unobs = unobservable_subspace(problem.a(), problem.c())?;
    let mut text = String::new();
    hautus_lines(&mut text, "stabilizable", &stab);
    hautus_lines(&mut text, "detectable", &det);
    writeln!(text, "unobservable_dim = {}", unobs.dim()).unwrap();
    writeln!(text, "stable_on_unobservable = {}", unobs.stable_on_unobservable).unwrap();
    writeln!(text, "turnpike_expected = {}", stab.holds && det.holds).unwrap();
    write_file(out, "hautus.txt", &text)?;
    Ok(text)
}

fn heat_config(cfg: &RunConfig) -> Result<&HeatConfig, CliError> {
    match &cfg.source {
        ProblemSource::Heat(h) => Ok(h),
        ProblemSource::Inline(_) => Err(ConfigError {
            line: 0,
            message: "the heat command needs `problem = heat`".into(),
        }
        .into()),
    }
}

fn heat_command(cfg: &RunConfig, demo: HeatDemo, out: &Path) -> Result<String, CliError> {
    let heat = heat_config(cfg)?;
    let mut text = String::new();
    writeln!(text, "demo = {}", demo.name()).unwrap();
    match demo {
        HeatDemo::Stable => {
            let r = demo_stable(heat.n_modes, heat.operator, &cfg.horizons, cfg.dt, cfg.epsilon, cfg.seed)?;
            writeln!(text, "n_modes = {}", heat.n_modes).unwrap();
            writeln!(text, "operator = {:?}", heat.operator).unwrap();
            let ev: Vec<String> = r.eigenvalues.iter().map(|x| format!("{x}")).collect();
            writeln!(text, "eigenvalues = [{}]", ev.join(", ")).unwrap();
            writeln!(text, "B1 stabilizable = {}, detectable = {}", r.b1_stabilizable.holds, r.b1_detectable.holds).unwrap();
            writeln!(text, "B2 stabilizable = {}, detectable = {}", r.b2_stabilizable.holds, r.b2_detectable.holds).unwrap();
            text.push_str(&scan_table(&r.scan));
            write_scan(&r.scan, out, false)?;
            write_file(out, "heat.txt", &text)?;
            Ok(text)
        }
        HeatDemo::Counterexample => {
            let r = demo_counterexample(heat.n_modes, &cfg.horizons, cfg.dt, cfg.epsilon)?;
            writeln!(text, "n_modes = {}", heat.n_modes).unwrap();
            writeln!(text, "mode2_coupling = {}", fmt_float(r.mode2_coupling)).unwrap();
            hautus_lines(&mut text, "stabilizable", &r.stabilizable);
            hautus_lines(&mut text, "detectable", &r.detectable);
            writeln!(text, "mode2_growth_ratio(t = {}) = {}", r.probe_time, fmt_float(r.mode2_growth_ratio)).unwrap();
            text.push_str(&scan_table(&r.scan));
            write_scan(&r.scan, out, false)?;
            write_file(out, "heat.txt", &text)?;
            Ok(text)
        }
        HeatDemo::Truncation => {
            let x0 = cfg.initial_state(*cfg.n_list.last().expect("n_list is nonempty"))?;
            let horizon = cfg.solve_horizon();
            let entries = truncation_study(heat, &x0, &cfg.n_list, horizon, cfg.dt)?;
            let mut csv = String::from("n_modes,midpoint_deviation,k,cost\n");
            writeln!(text, "horizon = {}", fmt_float(horizon)).unwrap();
            writeln!(text, "{:>8} {:>14} {:>12} {:>14}", "n", "d(T/2)", "k", "cost").unwrap();
            for e in &entries {
                writeln!(
                    csv,
                    "{},{},{},{}",
                    e.n_modes,
                    fmt_float(e.midpoint_deviation),
                    fmt_float(e.rate),
                    fmt_float(e.cost)
                )
                .unwrap();
                writeln!(text, "{:>8} {:>14.6e} {:>12.6} {:>14.8e}", e.n_modes, e.midpoint_deviation, e.rate, e.cost).unwrap();
            }
            write_file(out, "truncation.csv", &csv)?;
            Ok(text)
        }
    }
}
