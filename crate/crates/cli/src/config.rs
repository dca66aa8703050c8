//! Scenario configuration: command-line flags over an optional JSON file
//! over per-scenario defaults.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::Parser;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use qhj_core::{random_microstates, Grid, Microstate, PhysicalConstants, Potential};

pub const OUT_DIR_ENV: &str = "QHJ_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "qhj-out";
pub const DEFAULT_SEED: u64 = 20240917;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    BoundMicrostates,
    InitialValueUnique,
    StepBarrierNode,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::BoundMicrostates => "bound-microstates",
            Scenario::InitialValueUnique => "initial-value-unique",
            Scenario::StepBarrierNode => "step-barrier-node",
        }
    }

    /// Tolerance names accepted by `--tol` and their defaults.
    pub fn default_tolerances(&self) -> BTreeMap<String, f64> {
        let pairs: &[(&str, f64)] = match self {
            Scenario::BoundMicrostates => &[("invariance", 1e-6), ("node", 1e-6), ("residual", 1e-7), ("eigenvalue", 1e-8)],
            Scenario::InitialValueUnique => &[("round-trip", 1e-9), ("residual", 1e-7)],
            Scenario::StepBarrierNode => &[("node", 1e-6), ("reflection", 1e-9)],
        };
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("usage error: {0}")]
pub struct UsageError(pub String);

fn usage<T>(msg: impl Into<String>) -> Result<T, UsageError> {
    Err(UsageError(msg.into()))
}

/// Outcome of argument parsing that is not a config.
#[derive(Debug)]
pub enum ParseError {
    Usage(UsageError),
    /// `--help` / `--version` output, or a clap-level error.
    Clap(clap::Error),
}

impl From<UsageError> for ParseError {
    fn from(e: UsageError) -> Self {
        ParseError::Usage(e)
    }
}

#[derive(Debug, Parser)]
#[command(name = "qhj", version, about = "Trajectory representation scenarios with verification reports")]
struct Flags {
    #[arg(long, value_enum)]
    scenario: Option<Scenario>,
    /// e.g. harmonic:k=1, infinite-well:L=3.141592653589793, step:V0=2
    #[arg(long)]
    potential: Option<String>,
    #[arg(long)]
    level: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    energy: Option<f64>,
    /// min:max:n_points
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    /// a,b,c (repeatable)
    #[arg(long = "microstate", allow_hyphen_values = true)]
    microstates: Vec<String>,
    #[arg(long)]
    random_ms: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    delta_e: Option<f64>,
    #[arg(long)]
    hbar: Option<f64>,
    #[arg(long)]
    mass: Option<f64>,
    /// re,im
    #[arg(long, allow_hyphen_values = true)]
    psi0: Option<String>,
    /// re,im
    #[arg(long, allow_hyphen_values = true)]
    dpsi0: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// NAME=VALUE (repeatable)
    #[arg(long = "tol")]
    tolerances: Vec<String>,
    /// JSON file with any of the above; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Contents of a `--config` file. Keys mirror the flags.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub scenario: Option<Scenario>,
    pub potential: Option<String>,
    pub level: Option<usize>,
    pub energy: Option<f64>,
    pub grid: Option<String>,
    pub microstates: Option<Vec<[f64; 3]>>,
    pub random_ms: Option<usize>,
    pub seed: Option<u64>,
    pub delta_e: Option<f64>,
    pub hbar: Option<f64>,
    pub mass: Option<f64>,
    pub psi0: Option<[f64; 2]>,
    pub dpsi0: Option<[f64; 2]>,
    pub out: Option<PathBuf>,
    pub tol: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RandomSpec {
    pub count: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub potential: Potential,
    pub constants: PhysicalConstants,
    pub grid: Grid,
    pub level: Option<usize>,
    pub energy: Option<f64>,
    /// Explicit triples followed by the seeded ones.
    pub microstates: Vec<Microstate>,
    pub random: Option<RandomSpec>,
    pub delta_e: Option<f64>,
    pub psi0: Option<Complex64>,
    pub dpsi0: Option<Complex64>,
    pub out: PathBuf,
    pub tolerances: BTreeMap<String, f64>,
}

impl ScenarioConfig {
    pub fn tolerance(&self, name: &str) -> f64 {
        self.tolerances[name]
    }
}

fn parse_number(s: &str, what: &str) -> Result<f64, UsageError> {
    let t = s.trim();
    let v = match t {
        "pi" => std::f64::consts::PI,
        "-pi" => -std::f64::consts::PI,
        _ => t.parse().map_err(|_| UsageError(format!("{what}: '{t}' is not a number")))?,
    };
    if !v.is_finite() {
        return usage(format!("{what}: '{t}' is not finite"));
    }
    Ok(v)
}

/// `a,b,c`, checked for `a > 0`, `b > 0`, `ab - c^2/4 > 0`.
pub fn parse_microstate(s: &str) -> Result<Microstate, UsageError> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return usage(format!("--microstate expects a,b,c, got '{s}'"));
    }
    let v: Vec<f64> = parts
        .iter()
        .map(|p| parse_number(p, "--microstate"))
        .collect::<Result<_, _>>()?;
    triple(v[0], v[1], v[2])
}

fn triple(a: f64, b: f64, c: f64) -> Result<Microstate, UsageError> {
    Microstate::new(a, b, c).map_err(|_| {
        let d = a * b - 0.25 * c * c;
        if a > 0.0 && b > 0.0 {
            UsageError(format!("microstate ({a}, {b}, {c}) is inadmissible: ab - c^2/4 = {d} must be > 0"))
        } else {
            UsageError(format!("microstate ({a}, {b}, {c}) is inadmissible: a and b must be > 0"))
        }
    })
}

/// `min:max:n_points`.
pub fn parse_grid(s: &str) -> Result<Grid, UsageError> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return usage(format!("--grid expects min:max:n_points, got '{s}'"));
    }
    let lo = parse_number(parts[0], "--grid min")?;
    let hi = parse_number(parts[1], "--grid max")?;
    let n: usize = parts[2]
        .trim()
        .parse()
        .map_err(|_| UsageError(format!("--grid n_points: '{}' is not a count", parts[2])))?;
    if n < 3 {
        return usage(format!("--grid needs n_points >= 3, got {n}"));
    }
    Grid::new(lo, hi, n).map_err(|e| UsageError(format!("--grid: {e}")))
}

/// `re,im` or a bare real.
pub fn parse_complex(s: &str, what: &str) -> Result<Complex64, UsageError> {
    match s.split_once(',') {
        Some((re, im)) => Ok(Complex64::new(parse_number(re, what)?, parse_number(im, what)?)),
        None => Ok(Complex64::new(parse_number(s, what)?, 0.0)),
    }
}

fn parse_tolerance(s: &str) -> Result<(String, f64), UsageError> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| UsageError(format!("--tol expects NAME=VALUE, got '{s}'")))?;
    let v = parse_number(value, "--tol")?;
    if !(v > 0.0) {
        return usage(format!("--tol {name} must be positive"));
    }
    Ok((name.trim().to_string(), v))
}

pub fn read_config_file(path: &Path) -> Result<FileConfig, UsageError> {
    let text = std::fs::read_to_string(path).map_err(|e| UsageError(format!("--config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| UsageError(format!("--config {}: {e}", path.display())))
}

/// Parse `argv` (program name first). Reads `--config` and the
/// `QHJ_OUT_DIR` fallback but does no computation.
pub fn parse_args<I, T>(argv: I) -> Result<ScenarioConfig, ParseError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let flags = Flags::try_parse_from(argv).map_err(ParseError::Clap)?;
    let file = match &flags.config {
        Some(p) => read_config_file(p)?,
        None => FileConfig::default(),
    };
    let env_out = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    Ok(resolve(flags, file, env_out)?)
}

fn resolve(flags: Flags, file: FileConfig, env_out: Option<PathBuf>) -> Result<ScenarioConfig, UsageError> {
    let scenario = flags
        .scenario
        .or(file.scenario)
        .ok_or_else(|| UsageError("--scenario is required".into()))?;

    let potential = match flags.potential.or(file.potential) {
        Some(s) => s.parse::<Potential>().map_err(|e| UsageError(format!("--potential: {e}")))?,
        None => match scenario {
            Scenario::BoundMicrostates => Potential::Harmonic { stiffness: 1.0 },
            Scenario::InitialValueUnique => Potential::InfiniteWell { width: std::f64::consts::PI },
            Scenario::StepBarrierNode => Potential::StepBarrier { height: 2.0 },
        },
    };

    let constants = PhysicalConstants::new(flags.hbar.or(file.hbar).unwrap_or(1.0), flags.mass.or(file.mass).unwrap_or(1.0))
        .map_err(|e| UsageError(format!("constants: {e}")))?;

    let grid = match flags.grid.or(file.grid) {
        Some(s) => parse_grid(&s)?,
        None => match potential.walls() {
            (Some(lo), Some(hi)) => Grid::new(lo, hi, 1001),
            (Some(lo), None) => Grid::new(lo, lo + 12.0, 12001),
            _ => Grid::new(-10.0, 10.0, 20001),
        }
        .map_err(|e| UsageError(e.to_string()))?,
    };
    for x in [grid.x_min(), grid.x_max()] {
        potential
            .check_domain(x)
            .map_err(|e| UsageError(format!("--grid does not fit {potential}: {e}")))?;
    }

    // a level or energy given on the command line replaces both from the file
    let (level, energy) = if flags.level.is_some() || flags.energy.is_some() {
        (flags.level, flags.energy)
    } else {
        (file.level, file.energy)
    };
    if let Some(e) = energy {
        if !e.is_finite() {
            return usage("--energy must be finite");
        }
    }
    match scenario {
        Scenario::StepBarrierNode if level.is_some() => return usage("step-barrier-node takes --energy, not --level"),
        Scenario::InitialValueUnique if level.is_some() && energy.is_some() => {
            return usage("initial-value-unique takes --level or --energy, not both")
        }
        _ => {}
    }
    let level = match scenario {
        Scenario::BoundMicrostates => Some(level.unwrap_or(0)),
        _ => level,
    };
    let energy = match scenario {
        Scenario::InitialValueUnique if level.is_none() => Some(energy.unwrap_or(0.5)),
        Scenario::StepBarrierNode => Some(energy.unwrap_or(1.0)),
        _ => energy,
    };

    let mut microstates = if flags.microstates.is_empty() {
        file.microstates
            .unwrap_or_default()
            .into_iter()
            .map(|[a, b, c]| triple(a, b, c))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        flags
            .microstates
            .iter()
            .map(|s| parse_microstate(s))
            .collect::<Result<Vec<_>, _>>()?
    };
    let count = flags.random_ms.or(file.random_ms);
    let seed = flags.seed.or(file.seed);
    let random = match (count, seed) {
        (Some(count), seed) => Some(RandomSpec {
            count,
            seed: seed.unwrap_or(DEFAULT_SEED),
        }),
        (None, Some(_)) => return usage("--seed needs --random-ms"),
        (None, None) if microstates.is_empty() && scenario == Scenario::BoundMicrostates => Some(RandomSpec {
            count: 10,
            seed: DEFAULT_SEED,
        }),
        _ => None,
    };
    if let Some(r) = random {
        microstates.extend(random_microstates(r.count, r.seed));
    }
    match scenario {
        Scenario::InitialValueUnique if !microstates.is_empty() => {
            return usage("initial-value-unique derives its microstate from --psi0/--dpsi0; --microstate is not used")
        }
        Scenario::StepBarrierNode if microstates.is_empty() => microstates.push(Microstate::new(1.0, 1.0, 0.0).unwrap()),
        Scenario::BoundMicrostates if microstates.is_empty() => return usage("no microstates to check"),
        _ => {}
    }

    let delta_e = flags.delta_e.or(file.delta_e);
    if let Some(d) = delta_e {
        if !(d > 0.0 && d.is_finite()) {
            return usage(format!("--delta-e must be positive, got {d}"));
        }
    }

    let psi0 = match flags.psi0 {
        Some(s) => Some(parse_complex(&s, "--psi0")?),
        None => file.psi0.map(|[re, im]| Complex64::new(re, im)),
    };
    let dpsi0 = match flags.dpsi0 {
        Some(s) => Some(parse_complex(&s, "--dpsi0")?),
        None => file.dpsi0.map(|[re, im]| Complex64::new(re, im)),
    };
    let (psi0, dpsi0) = match scenario {
        Scenario::InitialValueUnique => {
            let p = psi0.unwrap_or(Complex64::new(1.0, 0.0));
            let d = dpsi0.unwrap_or(Complex64::new(0.0, 1.0));
            if p.norm() == 0.0 && d.norm() == 0.0 {
                return usage("--psi0 and --dpsi0 must not both vanish");
            }
            (Some(p), Some(d))
        }
        _ if psi0.is_some() || dpsi0.is_some() => {
            return usage(format!("--psi0/--dpsi0 only apply to initial-value-unique, not {}", scenario.name()))
        }
        _ => (None, None),
    };

    let mut tolerances = scenario.default_tolerances();
    let mut given: Vec<(String, f64)> = file.tol.unwrap_or_default().into_iter().collect();
    for t in &flags.tolerances {
        given.push(parse_tolerance(t)?);
    }
    for (name, value) in given {
        match tolerances.get_mut(&name) {
            Some(slot) => *slot = value,
            None => {
                let known: Vec<&str> = tolerances.keys().map(String::as_str).collect();
                return usage(format!(
                    "unknown tolerance '{name}' for {}; known: {}",
                    scenario.name(),
                    known.join(", ")
                ));
            }
        }
    }

    let out = flags
        .out
        .or(file.out)
        .or(env_out)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));

    Ok(ScenarioConfig {
        scenario,
        potential,
        constants,
        grid,
        level,
        energy,
        microstates,
        random,
        delta_e,
        psi0,
        dpsi0,
        out,
        tolerances,
    })
}
