//! Checks of a basis pair and microstate against the stationary
//! Hamilton-Jacobi equation, the Schrodinger equation, the bound-state
//! wave function, and the nodal behaviour of `W'`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, QhjError, Result};
use crate::model::{Grid, PhysicalConstants, Potential, Side};
use crate::qhj::{
    characteristic_function, check_scaled, conjugate_momentum, reconstruct_trig, CharacteristicFunction, Microstate,
};
use crate::schrodinger::{
    auto_bracket, decaying_from_right, find_eigenvalue, integrate_pair, scale_wronskian, BasisPair, EigenSolution,
};

/// Pointwise residual summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub max_abs: f64,
    /// `(h sum r_i^2)^{1/2}`.
    pub l2: f64,
    pub per_term: Vec<(String, f64)>,
    pub grid_h: f64,
}

impl ResidualReport {
    pub fn term(&self, name: &str) -> Option<f64> {
        self.per_term.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }
}

fn norms(residual: impl Iterator<Item = f64>, h: f64) -> (f64, f64) {
    let (mut max, mut sq) = (0.0f64, 0.0f64);
    for r in residual {
        max = max.max(r.abs());
        sq += r * r;
    }
    (max, (h * sq).sqrt())
}

fn require_samples(pair: &BasisPair) -> Result<()> {
    if pair.valid.is_empty() {
        return Err(QhjError::EmptyRegion("no unclamped samples to evaluate".into()));
    }
    Ok(())
}

/// Residual of `W'^2/2m + V - E + (hbar^2/4m) {W; x}` with `W''` and `W'''`
/// obtained by differentiating `W' = sqrt(2m)/Q`, `Q = a phi^2 + b theta^2 +
/// c phi theta`, and replacing `phi''`, `theta''` through the Schrodinger
/// equation. `per_term` holds the max magnitude of the kinetic, potential and
/// quantum terms.
pub fn qshje_residual(pair: &BasisPair, ms: &Microstate, constants: &PhysicalConstants) -> Result<ResidualReport> {
    ms.validate()?;
    constants.validate()?;
    require_samples(pair)?;
    let (m, hbar) = (constants.mass, constants.hbar);
    let (a, b, c) = (ms.a, ms.b, ms.c);
    let (mut kin_max, mut pot_max, mut quant_max) = (0.0f64, 0.0f64, 0.0f64);
    let mut residual = Vec::with_capacity(pair.valid.len());
    for i in pair.valid.clone() {
        let x = pair.grid.x(i);
        let v = pair.potential.eval_side(x, Side::Above)?;
        let p = constants.kinetic_factor() * (v - pair.energy);
        let (f, df, t, dt) = (pair.phi[i], pair.phi_prime[i], pair.theta[i], pair.theta_prime[i]);
        let q = a * f * f + b * t * t + c * f * t;
        if !(q > 0.0) {
            return invalid(format!("a phi^2 + b theta^2 + c phi theta = {q} at x = {x}"));
        }
        let dq = 2.0 * a * f * df + 2.0 * b * t * dt + c * (df * t + f * dt);
        let ddq = 2.0 * (a * df * df + b * dt * dt + c * df * dt) + 2.0 * p * q;
        let wp = (2.0 * m).sqrt() / q;
        let ratio = dq / q;
        let schwarzian = -ddq / q + 0.5 * ratio * ratio;
        let kinetic = wp * wp / (2.0 * m);
        let potential = v - pair.energy;
        let quantum = hbar * hbar / (4.0 * m) * schwarzian;
        kin_max = kin_max.max(kinetic.abs());
        pot_max = pot_max.max(potential.abs());
        quant_max = quant_max.max(quantum.abs());
        residual.push(kinetic + potential + quantum);
    }
    let (max_abs, l2) = norms(residual.into_iter(), pair.grid.h());
    Ok(ResidualReport {
        max_abs,
        l2,
        per_term: vec![
            ("kinetic".into(), kin_max),
            ("potential".into(), pot_max),
            ("quantum".into(), quant_max),
        ],
        grid_h: pair.grid.h(),
    })
}

/// The three expressions that must vanish when `W' = sqrt(2m)/Q` solves the
/// QSHJE: the Schrodinger residual of `phi`, of `theta` (both from the stored
/// second derivatives), and the Wronskian normalization mismatch.
pub fn substitution_residuals(
    pair: &BasisPair,
    ms: &Microstate,
    constants: &PhysicalConstants,
) -> Result<ResidualReport> {
    ms.validate()?;
    constants.validate()?;
    require_samples(pair)?;
    let (m, hbar) = (constants.mass, constants.hbar);
    let mut phi_res = Vec::with_capacity(pair.valid.len());
    let mut theta_res = Vec::with_capacity(pair.valid.len());
    for i in pair.valid.clone() {
        let v = pair.potential.eval_side(pair.grid.x(i), Side::Above)?;
        let e_minus_v = pair.energy - v;
        phi_res.push(-hbar * hbar * pair.phi_second[i] / (2.0 * m) - e_minus_v * pair.phi[i]);
        theta_res.push(-hbar * hbar * pair.theta_second[i] / (2.0 * m) - e_minus_v * pair.theta[i]);
    }
    let h = pair.grid.h();
    let (phi_max, _) = norms(phi_res.iter().copied(), h);
    let (theta_max, _) = norms(theta_res.iter().copied(), h);
    let scaling = (pair.wronskian * pair.wronskian * hbar * hbar * ms.discriminant() / (2.0 * m) - 1.0).abs();
    let (_, l2) = norms(phi_res.iter().zip(&theta_res).map(|(p, t)| p.hypot(*t)), h);
    Ok(ResidualReport {
        max_abs: phi_max.max(theta_max).max(scaling),
        l2,
        per_term: vec![
            ("phi".into(), phi_max),
            ("theta".into(), theta_max),
            ("wronskian".into(), scaling),
        ],
        grid_h: h,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceEntry {
    pub microstate: Microstate,
    pub deviation: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    pub level: usize,
    /// Energy of the eigenfunction used as reference.
    pub eigenvalue: f64,
    /// Energy at which the basis was built.
    pub energy: f64,
    pub tolerance: f64,
    pub entries: Vec<InvarianceEntry>,
    pub pass: bool,
}

impl InvarianceReport {
    pub fn max_deviation(&self) -> f64 {
        self.entries.iter().map(|e| e.deviation).fold(0.0, f64::max)
    }
}

/// Divide by the sample of largest magnitude (keeping its sign).
fn peak_normalized(v: &[f64]) -> Vec<f64> {
    let peak = v.iter().copied().fold(0.0f64, |p, x| if x.abs() > p.abs() { x } else { p });
    v.iter().map(|x| x / peak).collect()
}

/// Basis for level `n` at `energy` together with the reference
/// eigenfunction. The infinite well uses its closed form for both.
fn level_basis(
    potential: &Potential,
    constants: &PhysicalConstants,
    eigen: &EigenSolution,
    energy: f64,
) -> Result<(BasisPair, Vec<f64>)> {
    let exact = match potential {
        Potential::InfiniteWell { .. } => potential.exact_level(eigen.level, constants),
        _ => None,
    };
    if let Some(e) = exact {
        let reference = BasisPair::free_sine(*potential, *constants, e, eigen.grid)?.phi;
        let at = if energy == eigen.energy { e } else { energy };
        let pair = BasisPair::free_sine(*potential, *constants, at, eigen.grid)?;
        return Ok((pair, reference));
    }
    let at_level = BasisPair::from_eigen(eigen, *potential, *constants)?;
    if energy == eigen.energy {
        return Ok((at_level, eigen.phi.clone()));
    }
    // off the eigenvalue: same initial data at the eigenfunction's peak
    let pair = integrate_pair(*potential, *constants, energy, eigen.grid, at_level.anchor_x0, at_level.anchor)?;
    Ok((pair, eigen.phi.clone()))
}

/// Deviation of the trigonometric reconstruction from the level-`n`
/// eigenfunction for each microstate, both sides normalized to a signed peak
/// of one.
pub fn microstate_invariance_check(
    potential: &Potential,
    constants: &PhysicalConstants,
    level: usize,
    microstates: &[Microstate],
    grid: &Grid,
    tol: f64,
) -> Result<InvarianceReport> {
    invariance_at(potential, constants, level, microstates, grid, tol, None)
}

/// As [`microstate_invariance_check`], but the basis is built at `energy`
/// from the eigenfunction's initial data at its peak. Away from the
/// eigenvalue the reconstruction follows that non-normalizable solution and
/// the deviation is large.
pub fn microstate_invariance_check_at(
    potential: &Potential,
    constants: &PhysicalConstants,
    level: usize,
    energy: f64,
    microstates: &[Microstate],
    grid: &Grid,
    tol: f64,
) -> Result<InvarianceReport> {
    invariance_at(potential, constants, level, microstates, grid, tol, Some(energy))
}

fn invariance_at(
    potential: &Potential,
    constants: &PhysicalConstants,
    level: usize,
    microstates: &[Microstate],
    grid: &Grid,
    tol: f64,
    energy: Option<f64>,
) -> Result<InvarianceReport> {
    let bracket = auto_bracket(potential, constants, level, grid)?;
    let eigen = find_eigenvalue(*potential, *constants, level, *grid, bracket)?;
    let energy = energy.unwrap_or(eigen.energy);
    let (base, reference) = level_basis(potential, constants, &eigen, energy)?;
    let reference = peak_normalized(&reference);
    let mut entries = Vec::with_capacity(microstates.len());
    for ms in microstates {
        let pair = scale_wronskian(&base, ms, constants)?;
        let out = peak_normalized(&reconstruct_trig(&pair, ms)?);
        let mut deviation = pair
            .valid
            .clone()
            .zip(&out)
            .map(|(i, r)| (r - reference[i]).abs())
            .fold(0.0f64, f64::max);
        if pair.valid.len() < grid.len() || !deviation.is_finite() {
            // the reconstruction does not reach the whole grid
            deviation = deviation.max(if pair.valid.is_empty() { f64::INFINITY } else { 1.0 });
        }
        entries.push(InvarianceEntry {
            microstate: *ms,
            deviation,
            pass: deviation <= tol,
        });
    }
    let pass = entries.iter().all(|e| e.pass);
    Ok(InvarianceReport {
        level,
        eigenvalue: eigen.energy,
        energy,
        tolerance: tol,
        entries,
        pass,
    })
}

/// What was found at one end of the grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum FrontierStatus {
    /// `W'` falls monotonically to below the threshold.
    Node { x: f64, ratio: f64 },
    /// Forbidden side where `W'` does not reach a node on this grid.
    NoNode { x: f64, ratio: f64, monotone: bool },
    /// Hard wall: a turning point of the motion, not a node of `W'`.
    HardWall { x: f64, momentum: f64 },
    /// Classically allowed at the grid end, so no node is expected.
    Allowed { x: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryReport {
    pub left: FrontierStatus,
    pub right: FrontierStatus,
    /// Neither end is classically forbidden or walled: nothing to check.
    pub skipped: bool,
    pub threshold: f64,
}

impl BoundaryReport {
    /// Every forbidden frontier shows a node.
    pub fn pass(&self) -> bool {
        !self.skipped && ![&self.left, &self.right].iter().any(|s| matches!(s, FrontierStatus::NoNode { .. }))
    }
}

/// Relative size below which `W'` counts as a node.
pub const NODE_THRESHOLD: f64 = 1e-6;

/// Look for the node of `W'` toward each end of the grid, using the last
/// tenth of the unclamped samples on each side.
pub fn boundary_node_check(pair: &BasisPair, ms: &Microstate) -> Result<BoundaryReport> {
    let wp = conjugate_momentum(pair, ms)?;
    require_samples(pair)?;
    let valid = pair.valid.clone();
    let peak = valid.clone().map(|i| wp.samples[i]).fold(0.0f64, f64::max);
    let span = (valid.len() / 10).max(2).min(valid.len());
    let (wall_l, wall_r) = pair.potential.walls();
    let grid = &pair.grid;

    let side = |right: bool| -> Result<FrontierStatus> {
        let (end_x, wall) = if right { (grid.x_max(), wall_r) } else { (grid.x_min(), wall_l) };
        if let Some(w) = wall {
            if (end_x - w).abs() <= 1e-9 * grid.h() {
                let i = if right { valid.end - 1 } else { valid.start };
                return Ok(FrontierStatus::HardWall { x: w, momentum: wp.samples[i] });
            }
        }
        let v = pair.potential.eval_side(end_x, if right { Side::Below } else { Side::Above })?;
        if !(v > pair.energy) {
            return Ok(FrontierStatus::Allowed { x: end_x });
        }
        let idx: Vec<usize> = if right {
            (valid.end - span..valid.end).collect()
        } else {
            (valid.start..valid.start + span).rev().collect()
        };
        let monotone = idx.windows(2).all(|w| wp.samples[w[1]] <= wp.samples[w[0]]);
        let last = *idx.last().unwrap();
        // clamped samples beyond the frontier are exact nodes
        let clamped = if right { valid.end < pair.len() } else { valid.start > 0 };
        let ratio = if clamped { 0.0 } else { wp.samples[last] / peak };
        let x = grid.x(last);
        Ok(if monotone && ratio < NODE_THRESHOLD {
            FrontierStatus::Node { x, ratio }
        } else {
            FrontierStatus::NoNode { x, ratio, monotone }
        })
    };
    let left = side(false)?;
    let right = side(true)?;
    let skipped = matches!(left, FrontierStatus::Allowed { .. }) && matches!(right, FrontierStatus::Allowed { .. });
    Ok(BoundaryReport {
        left,
        right,
        skipped,
        threshold: NODE_THRESHOLD,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionIncrement {
    /// `W(x_max) - W(x_min)` over the unclamped region.
    pub value: f64,
    /// Part of the increment lying beyond the evaluated region,
    /// `hbar (pi/2 - |arctan g|)` summed over both ends.
    pub tail_bound: f64,
    pub warning: Option<String>,
}

/// Tail contribution above which the increment is flagged as truncated.
pub const TAIL_WARNING: f64 = 1e-6;

pub fn action_increment(pair: &BasisPair, ms: &Microstate, cf: &CharacteristicFunction) -> Result<ActionIncrement> {
    check_scaled(pair, ms)?;
    let valid = cf.valid.clone();
    if valid.is_empty() {
        return Err(QhjError::EmptyRegion("characteristic function has no unclamped samples".into()));
    }
    let root_d = ms.discriminant().sqrt();
    let half_pi = std::f64::consts::FRAC_PI_2;
    let angle = |i: usize| {
        let (f, t) = (pair.phi[i], pair.theta[i]);
        if f == 0.0 {
            half_pi
        } else {
            ((ms.b * t / f + 0.5 * ms.c) / root_d).atan()
        }
    };
    // W rises toward +pi/2 at the right end and starts above -pi/2 at the left
    let right_tail = half_pi - angle(valid.end - 1);
    let left_tail = angle(valid.start) + half_pi;
    let left_tail = if pair.phi[valid.start] == 0.0 { 0.0 } else { left_tail };
    let tail_bound = cf.hbar * (right_tail + left_tail);
    let warning = (tail_bound > TAIL_WARNING).then(|| {
        format!("W is truncated at the grid ends; up to {tail_bound:e} of the increment lies outside")
    });
    Ok(ActionIncrement {
        value: cf.increment(),
        tail_bound,
        warning,
    })
}

/// Build the scaled pair for a bound level and return its action increment.
pub fn level_action_increment(
    potential: &Potential,
    constants: &PhysicalConstants,
    level: usize,
    ms: &Microstate,
    grid: &Grid,
) -> Result<ActionIncrement> {
    let bracket = auto_bracket(potential, constants, level, grid)?;
    let eigen = find_eigenvalue(*potential, *constants, level, *grid, bracket)?;
    let (base, _) = level_basis(potential, constants, &eigen, eigen.energy)?;
    let pair = scale_wronskian(&base, ms, constants)?;
    let cf = characteristic_function(&pair, ms, 0.0)?;
    action_increment(&pair, ms, &cf)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Reflection {
    pub numeric: Complex64,
    pub exact: Complex64,
    /// Where the incident and reflected waves were separated.
    pub x: f64,
}

impl Reflection {
    pub fn magnitude_error(&self) -> f64 {
        (self.numeric.norm() - 1.0).abs()
    }

    pub fn error(&self) -> f64 {
        (self.numeric - self.exact).norm()
    }
}

/// Reflection amplitude `B/A` of `u = A e^{ikx} + B e^{-ikx}` left of a step
/// of height `V0 > E`, from the solution decaying into the barrier, against
/// `(k - i kappa)/(k + i kappa)`.
pub fn step_reflection(potential: &Potential, constants: &PhysicalConstants, energy: f64, grid: &Grid) -> Result<Reflection> {
    let Potential::StepBarrier { height } = *potential else {
        return invalid("reflection amplitude is defined for the step barrier only");
    };
    if !(energy > 0.0 && energy < height) {
        return invalid(format!("need 0 < E < V0 for total reflection, got E = {energy}, V0 = {height}"));
    }
    if !(grid.x_min() < 0.0) {
        return invalid("grid must extend left of the step");
    }
    let sol = decaying_from_right(potential, constants, energy, grid)?;
    let kf = constants.kinetic_factor();
    let k = (kf * energy).sqrt();
    let kappa = (kf * (height - energy)).sqrt();
    let i = grid.nearest(0.5 * grid.x_min()).max(sol.valid.start);
    let x = grid.x(i);
    if !(x < 0.0) {
        return invalid("no unclamped sample left of the step");
    }
    let ik = Complex64::new(0.0, k);
    let (u, du) = (Complex64::from(sol.u[i]), Complex64::from(sol.du[i]));
    let incident = (u + du / ik) * 0.5 * Complex64::from_polar(1.0, -k * x);
    let reflected = (u - du / ik) * 0.5 * Complex64::from_polar(1.0, k * x);
    Ok(Reflection {
        numeric: reflected / incident,
        exact: Complex64::new(k, -kappa) / Complex64::new(k, kappa),
        x,
    })
}

/// Corrupt `theta` by `amount * x` (derivatives untouched). Negative control
/// for the residual checks.
pub fn perturb_theta(pair: &BasisPair, amount: f64) -> BasisPair {
    let mut out = pair.clone();
    for (i, t) in out.theta.iter_mut().enumerate() {
        *t += amount * pair.grid.x(i);
    }
    out
}
