//! The three scenarios. Each produces verification checks, curve tables and a
//! free-form `result` object; nothing is written here.

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use qhj_core::qhj::current;
use qhj_core::schrodinger::auto_bracket;
use qhj_core::trajectory::RICHARDSON_TOLERANCE;
use qhj_core::verify::{
    boundary_node_check, microstate_invariance_check, microstate_invariance_check_at, qshje_residual, step_reflection,
    FrontierStatus,
};
use qhj_core::{
    characteristic_function, conjugate_momentum, find_eigenvalue, integrate_pair, microstate_from_initial_conditions,
    microstate_to_superposition, reconstruct_polar, scale_wronskian, superposition_from_initial_conditions,
    time_of_transit, BasisPair, InitialValueMicrostate, Microstate, Potential, QhjError, TransitOptions,
};

use crate::config::{Scenario, ScenarioConfig};

pub const CSV_HEADER: &str = "x,V,phi,theta,Wp,W,psi_re,psi_im,t";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `value <= tolerance`.
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }
}

/// One row per grid point, columns as in [`CSV_HEADER`].
#[derive(Debug, Clone)]
pub struct Curve {
    pub name: String,
    pub rows: Vec<[f64; 9]>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub curves: Vec<Curve>,
    pub result: Value,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Outcome, QhjError> {
    match cfg.scenario {
        Scenario::BoundMicrostates => bound_microstates(cfg),
        Scenario::InitialValueUnique => initial_value_unique(cfg),
        Scenario::StepBarrierNode => step_barrier_node(cfg),
    }
}

fn ms_json(ms: &Microstate) -> Value {
    json!({ "a": ms.a, "b": ms.b, "c": ms.c })
}

fn complex_json(z: Complex64) -> Value {
    json!({ "re": z.re, "im": z.im })
}

fn transit_options(cfg: &ScenarioConfig, base: &BasisPair) -> TransitOptions {
    let mut opts = match cfg.potential {
        Potential::InfiniteWell { .. } => TransitOptions::closed_form(),
        _ => TransitOptions {
            anchor: base.anchor,
            ..TransitOptions::fixed_anchor(base.anchor_x0)
        },
    };
    opts.delta_e = cfg.delta_e;
    opts
}

/// `t - tau` samples (NaN where unavailable) and the Richardson check.
fn trajectory(cfg: &ScenarioConfig, base: &BasisPair, ms: &Microstate, label: &str) -> Result<(Vec<f64>, Check), QhjError> {
    let opts = transit_options(cfg, base);
    let name = format!("trajectory-richardson{label}");
    match time_of_transit(&cfg.potential, &cfg.constants, ms, base.energy, &cfg.grid, &opts) {
        Ok(curve) => Ok((curve.t_minus_tau, Check::at_most(name, curve.richardson, RICHARDSON_TOLERANCE))),
        Err(QhjError::StepSize { mismatch, .. }) => Ok((
            vec![f64::NAN; cfg.grid.len()],
            Check::at_most(name, mismatch, RICHARDSON_TOLERANCE),
        )),
        Err(e) => Err(e),
    }
}

fn curve(name: String, pair: &BasisPair, ms: &Microstate, t: &[f64]) -> Result<Curve, QhjError> {
    let wp = conjugate_momentum(pair, ms)?;
    let cf = characteristic_function(pair, ms, 0.0)?;
    let psi = reconstruct_polar(pair, ms)?;
    let grid = &pair.grid;
    let rows = (0..grid.len())
        .map(|i| {
            let x = grid.x(i);
            let p = if pair.valid.contains(&i) {
                psi[i - pair.valid.start]
            } else {
                Complex64::new(f64::NAN, f64::NAN)
            };
            [
                x,
                pair.potential.eval(x).unwrap_or(f64::NAN),
                pair.phi[i],
                pair.theta[i],
                wp.samples[i],
                cf.samples[i],
                p.re,
                p.im,
                t[i],
            ]
        })
        .collect();
    Ok(Curve { name, rows })
}

/// Largest `W'(frontier)/max W'` over the sides that are forbidden, and
/// whether every such side shows a node.
fn frontier_ratio(statuses: [&FrontierStatus; 2]) -> (f64, bool) {
    let mut worst = 0.0f64;
    let mut ok = true;
    for s in statuses {
        match *s {
            FrontierStatus::Node { ratio, .. } => worst = worst.max(ratio),
            FrontierStatus::NoNode { ratio, .. } => {
                worst = worst.max(ratio);
                ok = false;
            }
            FrontierStatus::HardWall { .. } | FrontierStatus::Allowed { .. } => {}
        }
    }
    (worst, ok)
}

fn bound_microstates(cfg: &ScenarioConfig) -> Result<Outcome, QhjError> {
    let (pot, c, grid) = (&cfg.potential, &cfg.constants, &cfg.grid);
    let level = cfg.level.unwrap_or(0);
    let tol = cfg.tolerance("invariance");
    let inv = match cfg.energy {
        Some(e) => microstate_invariance_check_at(pot, c, level, e, &cfg.microstates, grid, tol)?,
        None => microstate_invariance_check(pot, c, level, &cfg.microstates, grid, tol)?,
    };
    let mut checks = Vec::new();
    if let Some(exact) = pot.exact_level(level, c) {
        checks.push(Check::at_most("eigenvalue-error", (inv.eigenvalue - exact).abs(), cfg.tolerance("eigenvalue")));
    }

    // the basis the invariance check used, rebuilt for curves and residuals
    let base = match (pot, pot.exact_level(level, c)) {
        (Potential::InfiniteWell { .. }, Some(_)) => BasisPair::free_sine(*pot, *c, inv.energy, *grid)?,
        _ => {
            let bracket = auto_bracket(pot, c, level, grid)?;
            let eigen = find_eigenvalue(*pot, *c, level, *grid, bracket)?;
            let at_level = BasisPair::from_eigen(&eigen, *pot, *c)?;
            if inv.energy == eigen.energy {
                at_level
            } else {
                integrate_pair(*pot, *c, inv.energy, *grid, at_level.anchor_x0, at_level.anchor)?
            }
        }
    };

    let mut curves = Vec::new();
    let mut entries = Vec::new();
    for (k, (ms, entry)) in cfg.microstates.iter().zip(&inv.entries).enumerate() {
        let label = format!("[{k}]");
        checks.push(Check::at_most(format!("invariance{label}"), entry.deviation, tol));
        let pair = scale_wronskian(&base, ms, c)?;
        let residual = qshje_residual(&pair, ms, c)?;
        checks.push(Check::at_most(format!("qshje-residual{label}"), residual.max_abs, cfg.tolerance("residual")));
        let nodes = boundary_node_check(&pair, ms)?;
        let (ratio, ok) = frontier_ratio([&nodes.left, &nodes.right]);
        let node_tol = cfg.tolerance("node");
        checks.push(Check {
            name: format!("boundary-node{label}"),
            value: ratio,
            tolerance: node_tol,
            pass: ok && !nodes.skipped && ratio <= node_tol,
        });
        let (t, richardson) = trajectory(cfg, &base, ms, &label)?;
        checks.push(richardson);
        curves.push(curve(format!("ms{k:02}"), &pair, ms, &t)?);
        entries.push(json!({
            "microstate": ms_json(ms),
            "deviation": entry.deviation,
            "frontiers": [nodes.left, nodes.right],
        }));
    }

    let result = json!({
        "level": level,
        "eigenvalue": inv.eigenvalue,
        "basis-energy": inv.energy,
        "max-deviation": inv.max_deviation(),
        "trajectory-convention": transit_options(cfg, &base).convention.label(),
        "microstates": entries,
    });
    Ok(Outcome { checks, curves, result })
}

fn initial_value_unique(cfg: &ScenarioConfig) -> Result<Outcome, QhjError> {
    let (pot, c, grid) = (&cfg.potential, &cfg.constants, &cfg.grid);
    let energy = match (cfg.energy, cfg.level) {
        (Some(e), _) => e,
        (None, Some(n)) => match pot.exact_level(n, c) {
            Some(e) => e,
            None => find_eigenvalue(*pot, *c, n, *grid, auto_bracket(pot, c, n, grid)?)?.energy,
        },
        (None, None) => unreachable!("config always supplies a level or an energy"),
    };
    let base = match pot {
        Potential::InfiniteWell { .. } => BasisPair::free_sine(*pot, *c, energy, *grid)?,
        _ => {
            let mid = grid.x(grid.len() / 2);
            integrate_pair(*pot, *c, energy, *grid, mid, qhj_core::AnchorConditions::identity())?
        }
    };
    let x0 = base.anchor_x0;
    let psi0 = cfg.psi0.unwrap_or(Complex64::new(1.0, 0.0));
    let dpsi0 = cfg.dpsi0.unwrap_or(Complex64::new(0.0, 1.0));
    let raw = superposition_from_initial_conditions(psi0, dpsi0, &base, x0)?;
    let j = current(&raw);
    let common = json!({
        "energy": energy,
        "x0": x0,
        "psi0": complex_json(psi0),
        "dpsi0": complex_json(dpsi0),
        "alpha": complex_json(raw.alpha),
        "beta": complex_json(raw.beta),
        "current": j,
    });

    match microstate_from_initial_conditions(psi0, dpsi0, &base, x0, c)? {
        InitialValueMicrostate::DegenerateFamily => {
            let mut result = common;
            result["outcome"] = json!("degenerate-family");
            result["note"] = json!("zero-current data: every admissible (a, b, c) reproduces it");
            Ok(Outcome {
                checks: Vec::new(),
                curves: Vec::new(),
                result,
            })
        }
        InitialValueMicrostate::Unique { microstate, direction } => {
            let pair = scale_wronskian(&base, &microstate, c)?;
            // the recovered superposition must reproduce psi'/psi at x0
            // (conjugated data for motion toward -x)
            let s = microstate_to_superposition(&microstate)?;
            let a = &pair.anchor;
            let psi = s.alpha * a.phi + s.beta * a.theta;
            let dpsi = s.alpha * a.phi_prime + s.beta * a.theta_prime;
            let (p, d) = match direction {
                qhj_core::Direction::PositiveX => (psi0, dpsi0),
                qhj_core::Direction::NegativeX => (psi0.conj(), dpsi0.conj()),
            };
            let mismatch = (psi * d - dpsi * p).norm() / (psi.norm() * d.norm() + dpsi.norm() * p.norm());
            let mut checks = vec![Check::at_most("round-trip", mismatch, cfg.tolerance("round-trip"))];
            let residual = qshje_residual(&pair, &microstate, c)?;
            checks.push(Check::at_most("qshje-residual", residual.max_abs, cfg.tolerance("residual")));
            let (t, richardson) = trajectory(cfg, &base, &microstate, "")?;
            checks.push(richardson);
            let curves = vec![curve("unique".into(), &pair, &microstate, &t)?];
            let mut result = common;
            result["outcome"] = json!("unique");
            result["microstate"] = ms_json(&microstate);
            result["direction"] = json!(direction);
            result["trajectory-convention"] = json!(transit_options(cfg, &base).convention.label());
            Ok(Outcome { checks, curves, result })
        }
    }
}

fn step_barrier_node(cfg: &ScenarioConfig) -> Result<Outcome, QhjError> {
    let (pot, c, grid) = (&cfg.potential, &cfg.constants, &cfg.grid);
    let energy = cfg.energy.unwrap_or(1.0);
    let r = step_reflection(pot, c, energy, grid)?;
    let base = BasisPair::from_right_decay(*pot, *c, energy, *grid)?;
    let mut checks = Vec::new();
    let mut curves = Vec::new();
    let mut frontiers = Vec::new();
    for (k, ms) in cfg.microstates.iter().enumerate() {
        let label = format!("[{k}]");
        let pair = scale_wronskian(&base, ms, c)?;
        let nodes = boundary_node_check(&pair, ms)?;
        let (value, pass) = match nodes.right {
            FrontierStatus::Node { ratio, .. } => (ratio, ratio <= cfg.tolerance("node")),
            FrontierStatus::NoNode { ratio, .. } => (ratio, false),
            _ => (f64::NAN, false),
        };
        checks.push(Check {
            name: format!("barrier-node{label}"),
            value,
            tolerance: cfg.tolerance("node"),
            pass,
        });
        let (t, richardson) = trajectory(cfg, &base, ms, &label)?;
        checks.push(richardson);
        curves.push(curve(format!("ms{k:02}"), &pair, ms, &t)?);
        frontiers.push(json!({ "microstate": ms_json(ms), "left": nodes.left, "right": nodes.right }));
    }
    let tol = cfg.tolerance("reflection");
    checks.push(Check::at_most("reflection-magnitude", r.magnitude_error(), tol));
    checks.push(Check::at_most("reflection-amplitude", r.error(), tol));
    let result = json!({
        "energy": energy,
        "reflection": complex_json(r.numeric),
        "reflection-exact": complex_json(r.exact),
        "reflection-x": r.x,
        "trajectory-convention": transit_options(cfg, &base).convention.label(),
        "microstates": frontiers,
    });
    Ok(Outcome { checks, curves, result })
}
