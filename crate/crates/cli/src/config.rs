//! Run configuration in a flat `key = value` text format.
//!
//! ```text
//! # scalar GLQ problem
//! A = [[-1.0]]
//! B = [[1.0]]
//! C = [[1.0]]
//! K = [[1.0]]
//! z = [1.0]
//! v = [0.5]
//! x0 = [2.0]
//! horizons = [5, 10, 20]
//! dt = 0.01
//! ```
//!
//! Matrices are bracketed lists of rows, vectors bracketed lists. Text
//! after `#` is a comment. A heat-equation problem is selected with
//! `problem = heat` and the `heat.*` keys.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use turnpike_core::heat::{build_system, harmonic_state, HeatConfig, HeatOperator};
use turnpike_core::structure::DEFAULT_GAP;
use turnpike_core::{GlqProblem, Matrix, Vector};

/// A config error tied to a line of the input (`line == 0` for problems
/// not attached to one line, such as a missing key).
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "config: {}", self.message)
        } else {
            write!(f, "config line {}: {}", self.line, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSource {
    Inline(GlqProblem),
    Heat(HeatConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Zero,
    Ones,
    /// `x_k = 1/k`.
    Harmonic,
    /// Uniform entries in `[-1, 1]` drawn from the run seed.
    Random,
}

impl Preset {
    fn name(self) -> &'static str {
        match self {
            Preset::Zero => "zero",
            Preset::Ones => "ones",
            Preset::Harmonic => "harmonic",
            Preset::Random => "random",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "zero" => Some(Preset::Zero),
            "ones" => Some(Preset::Ones),
            "harmonic" => Some(Preset::Harmonic),
            "random" => Some(Preset::Random),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Explicit(Vector),
    Preset(Preset),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatDemo {
    Stable,
    Counterexample,
    Truncation,
}

impl HeatDemo {
    pub fn name(self) -> &'static str {
        match self {
            HeatDemo::Stable => "stable",
            HeatDemo::Counterexample => "counterexample",
            HeatDemo::Truncation => "truncation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "stable" => Some(HeatDemo::Stable),
            "counterexample" => Some(HeatDemo::Counterexample),
            "truncation" => Some(HeatDemo::Truncation),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: ProblemSource,
    pub horizons: Vec<f64>,
    /// Horizon of `solve`; the last scan horizon when unset.
    pub horizon: Option<f64>,
    pub dt: f64,
    pub epsilon: f64,
    pub x0: InitialState,
    pub seed: u64,
    pub gap: f64,
    pub heat_demo: HeatDemo,
    pub n_list: Vec<usize>,
}

impl RunConfig {
    pub fn new(source: ProblemSource) -> Self {
        Self {
            source,
            horizons: vec![10.0],
            horizon: None,
            dt: 0.01,
            epsilon: 0.1,
            x0: InitialState::Preset(Preset::Zero),
            seed: 0,
            gap: DEFAULT_GAP,
            heat_demo: HeatDemo::Stable,
            n_list: vec![4, 8, 16],
        }
    }

    pub fn problem(&self) -> turnpike_core::Result<GlqProblem> {
        match &self.source {
            ProblemSource::Inline(p) => Ok(p.clone()),
            ProblemSource::Heat(cfg) => build_system(cfg),
        }
    }

    pub fn solve_horizon(&self) -> f64 {
        self.horizon.unwrap_or(*self.horizons.last().expect("horizons are nonempty"))
    }

    /// The initial state for an `n`-dimensional problem.
    pub fn initial_state(&self, n: usize) -> Result<Vector, ConfigError> {
        match &self.x0 {
            InitialState::Explicit(v) if v.len() == n => Ok(v.clone()),
            InitialState::Explicit(v) => Err(err(0, format!("x0 has length {}, the problem has {n} states", v.len()))),
            InitialState::Preset(Preset::Zero) => Ok(Vector::zeros(n)),
            InitialState::Preset(Preset::Ones) => Ok(Vector::from_element(n, 1.0)),
            InitialState::Preset(Preset::Harmonic) => Ok(harmonic_state(n)),
            InitialState::Preset(Preset::Random) => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                Ok(Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)))
            }
        }
    }
}

struct Entry {
    line: usize,
    value: String,
}

fn parse_matrix(e: &Entry, key: &str) -> Result<Matrix, ConfigError> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(&e.value)
        .map_err(|x| err(e.line, format!("`{key}` is not a bracketed list of numeric rows: {x}")))?;
    let cols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
        return Err(err(
            e.line,
            format!("`{key}` row {} has {} entries, expected {cols}", bad + 1, rows[bad].len()),
        ));
    }
    Ok(Matrix::from_fn(rows.len(), cols, |r, c| rows[r][c]))
}

fn parse_list(e: &Entry, key: &str) -> Result<Vec<f64>, ConfigError> {
    serde_json::from_str(&e.value).map_err(|x| err(e.line, format!("`{key}` is not a bracketed list of numbers: {x}")))
}

fn parse_counts(e: &Entry, key: &str) -> Result<Vec<usize>, ConfigError> {
    serde_json::from_str(&e.value)
        .map_err(|x| err(e.line, format!("`{key}` is not a bracketed list of nonnegative integers: {x}")))
}

fn parse_vector(e: &Entry, key: &str) -> Result<Vector, ConfigError> {
    Ok(Vector::from_vec(parse_list(e, key)?))
}

fn parse_number<T: std::str::FromStr>(e: &Entry, key: &str) -> Result<T, ConfigError> {
    e.value
        .parse()
        .map_err(|_| err(e.line, format!("`{key}` has an invalid value `{}`", e.value)))
}

const KEYS: &[&str] = &[
    "problem",
    "A",
    "B",
    "C",
    "K",
    "z",
    "v",
    "x0",
    "horizons",
    "horizon",
    "dt",
    "epsilon",
    "seed",
    "gap",
    "heat.c",
    "heat.n_modes",
    "heat.omega",
    "heat.operator",
    "heat.kappa",
    "heat.z",
    "heat.v",
    "heat.demo",
    "heat.n_list",
];

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected `key = value`, found `{content}`")))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(err(line, format!("unknown key `{key}`")));
        }
        if let Some(prev) = entries.get(key) {
            return Err(err(line, format!("`{key}` already set on line {}", prev.line)));
        }
        entries.insert(
            key.to_string(),
            Entry {
                line,
                value: value.trim().to_string(),
            },
        );
    }

    let kind = entries.get("problem").map_or("glq", |e| e.value.as_str());
    let source = match kind {
        "glq" => ProblemSource::Inline(parse_inline(&entries)?),
        "heat" => ProblemSource::Heat(parse_heat(&entries)?),
        other => {
            return Err(err(
                entries["problem"].line,
                format!("`problem` must be `glq` or `heat`, found `{other}`"),
            ))
        }
    };
    let mut cfg = RunConfig::new(source);
    if let Some(e) = entries.get("horizons") {
        cfg.horizons = parse_list(e, "horizons")?;
        if cfg.horizons.is_empty()
            || cfg.horizons.windows(2).any(|w| !(w[0] < w[1]))
            || !(cfg.horizons[0] > 0.0)
        {
            return Err(err(e.line, "`horizons` must be nonempty, positive and strictly increasing"));
        }
    }
    if let Some(e) = entries.get("horizon") {
        let t: f64 = parse_number(e, "horizon")?;
        if !(t > 0.0) {
            return Err(err(e.line, "`horizon` must be positive"));
        }
        cfg.horizon = Some(t);
    }
    if let Some(e) = entries.get("dt") {
        cfg.dt = parse_number(e, "dt")?;
        if !(cfg.dt > 0.0) {
            return Err(err(e.line, "`dt` must be positive"));
        }
    }
    if let Some(e) = entries.get("epsilon") {
        cfg.epsilon = parse_number(e, "epsilon")?;
        if !(cfg.epsilon > 0.0) {
            return Err(err(e.line, "`epsilon` must be positive"));
        }
    }
    if let Some(e) = entries.get("seed") {
        cfg.seed = parse_number(e, "seed")?;
    }
    if let Some(e) = entries.get("gap") {
        cfg.gap = parse_number(e, "gap")?;
        if !(cfg.gap > 0.0) {
            return Err(err(e.line, "`gap` must be positive"));
        }
    }
    if let Some(e) = entries.get("x0") {
        cfg.x0 = if e.value.starts_with('[') {
            InitialState::Explicit(parse_vector(e, "x0")?)
        } else {
            InitialState::Preset(Preset::parse(&e.value).ok_or_else(|| {
                err(e.line, format!("`x0` must be a vector or one of zero, ones, harmonic, random; found `{}`", e.value))
            })?)
        };
    }
    if let Some(e) = entries.get("heat.demo") {
        cfg.heat_demo = HeatDemo::parse(&e.value).ok_or_else(|| {
            err(e.line, format!("`heat.demo` must be stable, counterexample or truncation; found `{}`", e.value))
        })?;
    }
    if let Some(e) = entries.get("heat.n_list") {
        cfg.n_list = parse_counts(e, "heat.n_list")?;
        if cfg.n_list.is_empty() || cfg.n_list.windows(2).any(|w| w[0] >= w[1]) || cfg.n_list[0] == 0 {
            return Err(err(e.line, "`heat.n_list` must be nonempty, positive and strictly increasing"));
        }
    }
    Ok(cfg)
}

fn parse_inline(entries: &BTreeMap<String, Entry>) -> Result<GlqProblem, ConfigError> {
    let get = |key: &str| entries.get(key).ok_or_else(|| err(0, format!("missing key `{key}`")));
    let a = parse_matrix(get("A")?, "A")?;
    let b = parse_matrix(get("B")?, "B")?;
    let k = parse_matrix(get("K")?, "K")?;
    let c_entry = get("C")?;
    let mut c = parse_matrix(c_entry, "C")?;
    if c.nrows() == 0 {
        c = Matrix::zeros(0, a.ncols());
    }
    let z = match entries.get("z") {
        Some(e) => parse_vector(e, "z")?,
        None => Vector::zeros(a.nrows()),
    };
    let v = match entries.get("v") {
        Some(e) => parse_vector(e, "v")?,
        None => Vector::zeros(b.ncols()),
    };
    GlqProblem::new(a, b, c, k, z, v).map_err(|x| err(entries["A"].line, format!("invalid problem: {x}")))
}

fn parse_heat(entries: &BTreeMap<String, Entry>) -> Result<HeatConfig, ConfigError> {
    let get = |key: &str| entries.get(key).ok_or_else(|| err(0, format!("missing key `{key}`")));
    let c: f64 = parse_number(get("heat.c")?, "heat.c")?;
    let n_modes: usize = parse_number(get("heat.n_modes")?, "heat.n_modes")?;
    let omega_entry = get("heat.omega")?;
    let omega: Vec<f64> = parse_list(omega_entry, "heat.omega")?;
    if omega.len() != 2 {
        return Err(err(omega_entry.line, "`heat.omega` must be `[a, b]`"));
    }
    let operator = match entries.get("heat.operator") {
        None => HeatOperator::B2,
        Some(e) => match e.value.as_str() {
            "B1" => HeatOperator::B1,
            "B2" => HeatOperator::B2,
            other => return Err(err(e.line, format!("`heat.operator` must be B1 or B2, found `{other}`"))),
        },
    };
    let mut cfg = HeatConfig::new(c, n_modes, (omega[0], omega[1]), operator);
    if let Some(e) = entries.get("heat.kappa") {
        cfg.kappa = parse_number(e, "heat.kappa")?;
    }
    if let Some(e) = entries.get("heat.z") {
        cfg.z = Some(parse_vector(e, "heat.z")?);
    }
    if let Some(e) = entries.get("heat.v") {
        cfg.v = Some(parse_vector(e, "heat.v")?);
    }
    let line = entries.get("heat.c").map_or(0, |e| e.line);
    build_system(&cfg).map_err(|x| err(line, format!("invalid heat configuration: {x}")))?;
    Ok(cfg)
}

fn json_matrix(m: &Matrix) -> String {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    serde_json::to_string(&rows).expect("finite matrix serializes")
}

fn json_vector(v: &Vector) -> String {
    serde_json::to_string(v.as_slice()).expect("finite vector serializes")
}

fn json_list(v: &[f64]) -> String {
    serde_json::to_string(v).expect("finite list serializes")
}

fn json_number(x: f64) -> String {
    serde_json::to_string(&x).expect("finite number serializes")
}

/// Writes `cfg` in the config format; [`parse_config`] reads it back to an
/// equal value.
pub fn emit_config(cfg: &RunConfig) -> String {
    let mut out = String::new();
    let mut put = |key: &str, value: String| {
        out.push_str(key);
        out.push_str(" = ");
        out.push_str(&value);
        out.push('\n');
    };
    match &cfg.source {
        ProblemSource::Inline(p) => {
            put("problem", "glq".into());
            put("A", json_matrix(p.a()));
            put("B", json_matrix(p.b()));
            put("C", json_matrix(p.c()));
            put("K", json_matrix(p.k()));
            put("z", json_vector(p.z()));
            put("v", json_vector(p.v()));
        }
        ProblemSource::Heat(h) => {
            put("problem", "heat".into());
            put("heat.c", json_number(h.c));
            put("heat.n_modes", h.n_modes.to_string());
            put("heat.omega", json_list(&[h.omega.0, h.omega.1]));
            put(
                "heat.operator",
                match h.operator {
                    HeatOperator::B1 => "B1".into(),
                    HeatOperator::B2 => "B2".into(),
                },
            );
            put("heat.kappa", json_number(h.kappa));
            if let Some(z) = &h.z {
                put("heat.z", json_vector(z));
            }
            if let Some(v) = &h.v {
                put("heat.v", json_vector(v));
            }
        }
    }
    match &cfg.x0 {
        InitialState::Explicit(v) => put("x0", json_vector(v)),
        InitialState::Preset(p) => put("x0", p.name().into()),
    }
    put("horizons", json_list(&cfg.horizons));
    if let Some(t) = cfg.horizon {
        put("horizon", json_number(t));
    }
    put("dt", json_number(cfg.dt));
    put("epsilon", json_number(cfg.epsilon));
    put("seed", cfg.seed.to_string());
    put("gap", json_number(cfg.gap));
    put("heat.demo", cfg.heat_demo.name().into());
    put("heat.n_list", serde_json::to_string(&cfg.n_list).expect("list serializes"));
    out
}
