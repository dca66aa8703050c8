//! Solutions of `-hbar^2 u''/(2m) + (V - E) u = 0` on a grid.
//!
//! Everything here integrates the first-order system `(u, u')` with classical
//! fixed-step RK4, so `u'` comes out at the same order as `u`. Cells that
//! contain a jump of the potential are split at the jump and each half sees
//! the one-sided value of `V`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, QhjError, Result};
use crate::model::{Grid, PhysicalConstants, Potential, Side};
use crate::qhj::Microstate;

/// Magnitude above which a sample is considered overflowed.
pub const CLAMP_THRESHOLD: f64 = 1e120;

const EIGEN_MAX_ITERATIONS: usize = 200;
const EIGEN_REL_TOL: f64 = 1e-12;

/// `(u, u')` at one point.
type State = [f64; 2];

pub(crate) struct Propagator<'a> {
    potential: &'a Potential,
    kf: f64,
    energy: f64,
    jumps: Vec<f64>,
}

impl<'a> Propagator<'a> {
    pub(crate) fn new(potential: &'a Potential, constants: &PhysicalConstants, energy: f64) -> Self {
        Self {
            potential,
            kf: constants.kinetic_factor(),
            energy,
            jumps: potential.discontinuities(),
        }
    }

    fn q(&self, x: f64, side: Side) -> f64 {
        self.kf * (self.potential.value_unchecked(x, side) - self.energy)
    }

    /// Advance every state from `xa` to `xb`.
    pub(crate) fn advance(&self, states: &mut [State], xa: f64, xb: f64) {
        if xa == xb {
            return;
        }
        let (lo, hi) = if xa < xb { (xa, xb) } else { (xb, xa) };
        let mut cuts: Vec<f64> = self.jumps.iter().copied().filter(|&j| j > lo && j < hi).collect();
        if xb < xa {
            cuts.reverse();
        }
        let mut from = xa;
        for to in cuts.into_iter().chain(std::iter::once(xb)) {
            self.rk4(states, from, to);
            from = to;
        }
    }

    fn rk4(&self, states: &mut [State], xa: f64, xb: f64) {
        let h = xb - xa;
        let (side_a, side_b) = if h > 0.0 {
            (Side::Above, Side::Below)
        } else {
            (Side::Below, Side::Above)
        };
        let qa = self.q(xa, side_a);
        let qm = self.q(xa + 0.5 * h, side_a);
        let qb = self.q(xb, side_b);
        for s in states.iter_mut() {
            let [u, v] = *s;
            let k1 = [v, qa * u];
            let u2 = u + 0.5 * h * k1[0];
            let v2 = v + 0.5 * h * k1[1];
            let k2 = [v2, qm * u2];
            let u3 = u + 0.5 * h * k2[0];
            let v3 = v + 0.5 * h * k2[1];
            let k3 = [v3, qm * u3];
            let u4 = u + h * k3[0];
            let v4 = v + h * k3[1];
            let k4 = [v4, qb * u4];
            s[0] = u + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
            s[1] = v + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
        }
    }
}

fn overflowed(states: &[State]) -> bool {
    states
        .iter()
        .any(|s| !(s[0].abs() <= CLAMP_THRESHOLD && s[1].abs() <= CLAMP_THRESHOLD))
}

/// One solution sampled on a grid; samples past an overflow are NaN.
#[derive(Debug, Clone)]
pub struct Solution {
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    pub valid: Range<usize>,
}

/// Integrate a set of solutions from `(x0, init)` across the whole grid, in
/// both directions. Returns per-solution samples and the unclamped range.
fn integrate_from(
    prop: &Propagator<'_>,
    grid: &Grid,
    x0: f64,
    init: &[State],
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Range<usize>) {
    let n = grid.len();
    let m = init.len();
    let mut u = vec![vec![f64::NAN; n]; m];
    let mut du = vec![vec![f64::NAN; n]; m];
    let k = grid.nearest(x0);
    let mut start = init.to_vec();
    prop.advance(&mut start, x0, grid.x(k));
    let store = |u: &mut Vec<Vec<f64>>, du: &mut Vec<Vec<f64>>, i: usize, s: &[State]| {
        for (j, st) in s.iter().enumerate() {
            u[j][i] = st[0];
            du[j][i] = st[1];
        }
    };
    let mut hi = k + 1;
    let mut lo = k;
    if !overflowed(&start) {
        store(&mut u, &mut du, k, &start);
        let mut s = start.clone();
        for i in k + 1..n {
            prop.advance(&mut s, grid.x(i - 1), grid.x(i));
            if overflowed(&s) {
                break;
            }
            store(&mut u, &mut du, i, &s);
            hi = i + 1;
        }
        let mut s = start;
        for i in (0..k).rev() {
            prop.advance(&mut s, grid.x(i + 1), grid.x(i));
            if overflowed(&s) {
                break;
            }
            store(&mut u, &mut du, i, &s);
            lo = i;
        }
    } else {
        hi = k;
    }
    (u, du, lo..hi)
}

/// Integrate one solution starting at a grid end and marching across.
fn shoot(prop: &Propagator<'_>, grid: &Grid, from_left: bool, init: State) -> Solution {
    let x0 = if from_left { grid.x_min() } else { grid.x_max() };
    let (mut u, mut du, valid) = integrate_from(prop, grid, x0, &[init]);
    Solution {
        u: u.pop().unwrap(),
        du: du.pop().unwrap(),
        valid,
    }
}

fn check_grid_in_domain(potential: &Potential, grid: &Grid) -> Result<()> {
    potential.check_domain(grid.x_min())?;
    potential.check_domain(grid.x_max())?;
    Ok(())
}

/// Fourth-order central differences of `f` on `range`, with second-order
/// one-sided stencils at the two outermost points of each side.
fn derivative(f: &[f64], h: f64, range: &Range<usize>) -> Vec<f64> {
    let mut d = vec![f64::NAN; f.len()];
    let (a, b) = (range.start, range.end);
    if b - a < 5 {
        for i in a..b {
            d[i] = if i + 1 < b {
                (f[i + 1] - f[i]) / h
            } else if i > a {
                (f[i] - f[i - 1]) / h
            } else {
                f64::NAN
            };
        }
        return d;
    }
    for i in a + 2..b - 2 {
        d[i] = (-f[i + 2] + 8.0 * f[i + 1] - 8.0 * f[i - 1] + f[i - 2]) / (12.0 * h);
    }
    d[a] = (-3.0 * f[a] + 4.0 * f[a + 1] - f[a + 2]) / (2.0 * h);
    d[a + 1] = (f[a + 2] - f[a]) / (2.0 * h);
    d[b - 2] = (f[b - 1] - f[b - 3]) / (2.0 * h);
    d[b - 1] = (3.0 * f[b - 1] - 4.0 * f[b - 2] + f[b - 3]) / (2.0 * h);
    d
}

/// Values `(phi, phi', theta, theta')` at the anchor point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorConditions {
    pub phi: f64,
    pub phi_prime: f64,
    pub theta: f64,
    pub theta_prime: f64,
}

impl AnchorConditions {
    pub fn new(phi: f64, phi_prime: f64, theta: f64, theta_prime: f64) -> Self {
        Self {
            phi,
            phi_prime,
            theta,
            theta_prime,
        }
    }

    /// `(1, 0, 0, 1)`: `phi` even-like and `theta` odd-like about the anchor.
    pub fn identity() -> Self {
        Self::new(1.0, 0.0, 0.0, 1.0)
    }

    pub fn wronskian(&self) -> f64 {
        self.phi * self.theta_prime - self.phi_prime * self.theta
    }

    /// Partner conditions for a given `(phi, phi')` so that the Wronskian is 1.
    pub fn with_unit_partner(phi: f64, phi_prime: f64) -> Self {
        let n2 = phi * phi + phi_prime * phi_prime;
        Self::new(phi, phi_prime, -phi_prime / n2, phi / n2)
    }
}

/// Two independent solutions `(phi, theta)` with derivatives on a grid.
///
/// Samples outside `valid` overflowed during integration and are NaN.
#[derive(Debug, Clone)]
pub struct BasisPair {
    pub potential: Potential,
    pub constants: PhysicalConstants,
    pub energy: f64,
    pub grid: Grid,
    pub phi: Vec<f64>,
    pub phi_prime: Vec<f64>,
    pub theta: Vec<f64>,
    pub theta_prime: Vec<f64>,
    /// Second derivatives used by the substitution check. Exact for
    /// closed-form pairs, finite differences of the first derivatives
    /// otherwise (never the differential equation itself).
    pub phi_second: Vec<f64>,
    pub theta_second: Vec<f64>,
    pub wronskian: f64,
    pub anchor_x0: f64,
    pub anchor: AnchorConditions,
    pub valid: Range<usize>,
}

impl BasisPair {
    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn is_clamped(&self, i: usize) -> bool {
        !self.valid.contains(&i)
    }

    pub fn pointwise_wronskian(&self, i: usize) -> f64 {
        self.phi[i] * self.theta_prime[i] - self.phi_prime[i] * self.theta[i]
    }

    /// `max |W(x) - W| / |W|` over the unclamped region.
    pub fn wronskian_drift(&self) -> f64 {
        self.valid
            .clone()
            .map(|i| (self.pointwise_wronskian(i) - self.wronskian).abs())
            .fold(0.0, f64::max)
            / self.wronskian.abs()
    }

    /// Both solutions multiplied by `s`.
    pub fn scaled(&self, s: f64) -> BasisPair {
        let mul = |v: &Vec<f64>| v.iter().map(|x| x * s).collect::<Vec<_>>();
        BasisPair {
            phi: mul(&self.phi),
            phi_prime: mul(&self.phi_prime),
            theta: mul(&self.theta),
            theta_prime: mul(&self.theta_prime),
            phi_second: mul(&self.phi_second),
            theta_second: mul(&self.theta_second),
            wronskian: self.wronskian * s * s,
            anchor: AnchorConditions::new(
                self.anchor.phi * s,
                self.anchor.phi_prime * s,
                self.anchor.theta * s,
                self.anchor.theta_prime * s,
            ),
            ..self.clone()
        }
    }

    /// Closed-form pair `phi = sin(kx)`, `theta = -cos(kx)` with
    /// `k = sqrt(2mE)/hbar`, valid where the potential vanishes (inside the
    /// infinite well). Wronskian `k`; anchored at the first maximum of `phi`.
    pub fn free_sine(
        potential: Potential,
        constants: PhysicalConstants,
        energy: f64,
        grid: Grid,
    ) -> Result<BasisPair> {
        potential.validate()?;
        constants.validate()?;
        if !matches!(potential, Potential::InfiniteWell { .. }) {
            return invalid("closed-form sine basis needs a flat (infinite well) potential");
        }
        check_grid_in_domain(&potential, &grid)?;
        if !(energy > 0.0) {
            return invalid(format!("closed-form sine basis needs E > 0, got {energy}"));
        }
        let k = (constants.kinetic_factor() * energy).sqrt();
        let xs = grid.points();
        let phi: Vec<f64> = xs.iter().map(|x| (k * x).sin()).collect();
        let theta: Vec<f64> = xs.iter().map(|x| -(k * x).cos()).collect();
        let phi_prime: Vec<f64> = xs.iter().map(|x| k * (k * x).cos()).collect();
        let theta_prime: Vec<f64> = xs.iter().map(|x| k * (k * x).sin()).collect();
        let phi_second = phi.iter().map(|p| -k * k * p).collect();
        let theta_second = theta.iter().map(|t| -k * k * t).collect();
        let x0 = std::f64::consts::FRAC_PI_2 / k;
        Ok(BasisPair {
            potential,
            constants,
            energy,
            grid,
            phi,
            phi_prime,
            theta,
            theta_prime,
            phi_second,
            theta_second,
            wronskian: k,
            anchor_x0: x0,
            anchor: AnchorConditions::new((k * x0).sin(), k * (k * x0).cos(), -(k * x0).cos(), k * (k * x0).sin()),
            valid: 0..grid.len(),
        })
    }

    /// Pair built around a given solution `phi` (e.g. a bound eigenfunction):
    /// the anchor is placed at the largest positive sample of `phi` and
    /// `theta` is integrated outward from there with unit Wronskian.
    pub fn with_partner(
        potential: Potential,
        constants: PhysicalConstants,
        energy: f64,
        grid: Grid,
        phi: Vec<f64>,
        phi_prime: Vec<f64>,
        phi_valid: Range<usize>,
    ) -> Result<BasisPair> {
        potential.validate()?;
        constants.validate()?;
        check_grid_in_domain(&potential, &grid)?;
        if phi.len() != grid.len() || phi_prime.len() != grid.len() {
            return invalid("solution length does not match the grid");
        }
        let k = phi_valid
            .clone()
            .max_by(|&a, &b| phi[a].total_cmp(&phi[b]))
            .filter(|&i| phi[i] > 0.0)
            .ok_or_else(|| QhjError::Validation("solution has no positive sample to anchor at".into()))?;
        let x0 = grid.x(k);
        let anchor = AnchorConditions::with_unit_partner(phi[k], phi_prime[k]);
        let prop = Propagator::new(&potential, &constants, energy);
        let (mut u, mut du, valid) = integrate_from(&prop, &grid, x0, &[[anchor.theta, anchor.theta_prime]]);
        let valid = valid.start.max(phi_valid.start)..valid.end.min(phi_valid.end);
        let theta = u.pop().unwrap();
        let theta_prime = du.pop().unwrap();
        let h = grid.h();
        Ok(BasisPair {
            potential,
            constants,
            energy,
            grid,
            phi_second: derivative(&phi_prime, h, &valid),
            theta_second: derivative(&theta_prime, h, &valid),
            phi,
            phi_prime,
            theta,
            theta_prime,
            wronskian: anchor.wronskian(),
            anchor_x0: x0,
            anchor,
            valid,
        })
    }

    /// Pair whose `phi` is the bound eigenfunction.
    pub fn from_eigen(
        eigen: &EigenSolution,
        potential: Potential,
        constants: PhysicalConstants,
    ) -> Result<BasisPair> {
        Self::with_partner(
            potential,
            constants,
            eigen.energy,
            eigen.grid,
            eigen.phi.clone(),
            eigen.phi_prime.clone(),
            0..eigen.grid.len(),
        )
    }

    /// Pair whose `phi` vanishes at the left grid end (shooting solution). At
    /// an eigenvalue this is the bound state up to integration error; away
    /// from one it diverges on the right.
    pub fn from_left_boundary(
        potential: Potential,
        constants: PhysicalConstants,
        energy: f64,
        grid: Grid,
    ) -> Result<BasisPair> {
        check_grid_in_domain(&potential, &grid)?;
        let prop = Propagator::new(&potential, &constants, energy);
        let sol = shoot(&prop, &grid, true, [0.0, 1.0]);
        Self::with_partner(potential, constants, energy, grid, sol.u, sol.du, sol.valid)
    }

    /// Pair whose `phi` is the solution decaying toward the right grid end,
    /// e.g. inside a semi-infinite barrier. Requires `V(x_max) > E`; the start
    /// `(1, -kappa)` is exact when `V` is flat near `x_max`.
    pub fn from_right_decay(
        potential: Potential,
        constants: PhysicalConstants,
        energy: f64,
        grid: Grid,
    ) -> Result<BasisPair> {
        let sol = decaying_from_right(&potential, &constants, energy, &grid)?;
        Self::with_partner(potential, constants, energy, grid, sol.u, sol.du, sol.valid)
    }
}

/// Solution that decays into the right end of the grid, normalized to
/// `max |u| = 1` with a positive maximum.
pub fn decaying_from_right(
    potential: &Potential,
    constants: &PhysicalConstants,
    energy: f64,
    grid: &Grid,
) -> Result<Solution> {
    potential.validate()?;
    constants.validate()?;
    check_grid_in_domain(potential, grid)?;
    let v_end = potential.eval_side(grid.x_max(), Side::Below)?;
    if !(v_end > energy) {
        return invalid(format!(
            "right grid end must be classically forbidden (V = {v_end}, E = {energy})"
        ));
    }
    let kappa = (constants.kinetic_factor() * (v_end - energy)).sqrt();
    let prop = Propagator::new(potential, constants, energy);
    let mut sol = shoot(&prop, grid, false, [1.0, -kappa]);
    let peak = sol
        .valid
        .clone()
        .max_by(|&a, &b| sol.u[a].abs().total_cmp(&sol.u[b].abs()))
        .map(|i| sol.u[i])
        .unwrap_or(1.0);
    for v in sol.u.iter_mut().chain(sol.du.iter_mut()) {
        *v /= peak;
    }
    Ok(sol)
}

/// Integrate the anchor-conditioned pair outward from `anchor_x0` across the
/// grid. A negative anchor Wronskian is fixed by negating `theta`.
pub fn integrate_pair(
    potential: Potential,
    constants: PhysicalConstants,
    energy: f64,
    grid: Grid,
    anchor_x0: f64,
    anchor: AnchorConditions,
) -> Result<BasisPair> {
    potential.validate()?;
    constants.validate()?;
    check_grid_in_domain(&potential, &grid)?;
    if !grid.contains(anchor_x0) {
        return invalid(format!(
            "anchor x0 = {anchor_x0} outside grid [{}, {}]",
            grid.x_min(),
            grid.x_max()
        ));
    }
    let (wl, wr) = potential.walls();
    if wl.is_some_and(|w| anchor_x0 <= w) || wr.is_some_and(|w| anchor_x0 >= w) {
        return invalid(format!("anchor x0 = {anchor_x0} must lie strictly inside the walls"));
    }
    let scale = (anchor.phi.abs() + anchor.phi_prime.abs()) * (anchor.theta.abs() + anchor.theta_prime.abs());
    let w0 = anchor.wronskian();
    if !(w0.abs() > 1e-14 * scale) || !w0.is_finite() {
        return invalid("anchor conditions have zero Wronskian (phi and theta are dependent)");
    }
    let anchor = if w0 < 0.0 {
        AnchorConditions::new(anchor.phi, anchor.phi_prime, -anchor.theta, -anchor.theta_prime)
    } else {
        anchor
    };
    let prop = Propagator::new(&potential, &constants, energy);
    let (mut u, mut du, valid) = integrate_from(
        &prop,
        &grid,
        anchor_x0,
        &[[anchor.phi, anchor.phi_prime], [anchor.theta, anchor.theta_prime]],
    );
    let theta = u.pop().unwrap();
    let phi = u.pop().unwrap();
    let theta_prime = du.pop().unwrap();
    let phi_prime = du.pop().unwrap();
    let h = grid.h();
    Ok(BasisPair {
        potential,
        constants,
        energy,
        grid,
        phi_second: derivative(&phi_prime, h, &valid),
        theta_second: derivative(&theta_prime, h, &valid),
        phi,
        phi_prime,
        theta,
        theta_prime,
        wronskian: anchor.wronskian(),
        anchor_x0,
        anchor,
        valid,
    })
}

/// Multiply both solutions by a common positive factor so that
/// `W^2 = 2m / (hbar^2 (ab - c^2/4))`.
pub fn scale_wronskian(pair: &BasisPair, ms: &Microstate, constants: &PhysicalConstants) -> Result<BasisPair> {
    ms.validate()?;
    constants.validate()?;
    if !(pair.wronskian > 0.0) {
        return invalid(format!("basis Wronskian must be positive, got {}", pair.wronskian));
    }
    let target = ms.target_wronskian(constants);
    let s = (target / pair.wronskian).sqrt();
    let mut out = pair.scaled(s);
    out.wronskian = target;
    out.constants = *constants;
    Ok(out)
}

/// A bound state located by shooting.
#[derive(Debug, Clone)]
pub struct EigenSolution {
    pub level: usize,
    pub energy: f64,
    pub grid: Grid,
    /// Normalized to `max |phi| = 1`, first lobe positive.
    pub phi: Vec<f64>,
    pub phi_prime: Vec<f64>,
    pub node_count: usize,
    pub match_x: f64,
    /// `|u_L' u_R - u_R' u_L| / ((|u_L| + |u_L'|)(|u_R| + |u_R'|))` at the
    /// match point: the log-derivative mismatch, kept finite at nodes.
    pub log_derivative_mismatch: f64,
    pub iterations: usize,
}

struct Shooter<'a> {
    prop: Propagator<'a>,
    grid: &'a Grid,
}

impl Shooter<'_> {
    /// Number of Dirichlet levels on the grid lying below the propagator's
    /// energy: the node count of the left-boundary solution.
    fn count_below(&self) -> usize {
        let g = self.grid;
        let mut s = [[0.0, 1.0]];
        let mut count = 0;
        let mut last = 0.0f64;
        for i in 1..g.len() {
            self.prop.advance(&mut s, g.x(i - 1), g.x(i));
            let u = s[0][0];
            if u != 0.0 {
                if last != 0.0 && (u > 0.0) != (last > 0.0) {
                    count += 1;
                }
                last = u;
            }
            let m = s[0][0].abs().max(s[0][1].abs());
            if m > 1e100 {
                s[0][0] /= m;
                s[0][1] /= m;
                last /= m;
            }
        }
        count
    }

    /// Inward integrations from both grid ends to node `m`. Returns the
    /// samples (unnormalized, each side scaled by a positive factor).
    fn inward(&self, m: usize) -> (Vec<State>, Vec<State>) {
        let g = self.grid;
        let n = g.len();
        let mut left = Vec::with_capacity(m + 1);
        let mut s = [[0.0, 1.0]];
        left.push(s[0]);
        for i in 1..=m {
            self.prop.advance(&mut s, g.x(i - 1), g.x(i));
            left.push(s[0]);
            let mag = s[0][0].abs().max(s[0][1].abs());
            if mag > 1e100 {
                for st in left.iter_mut() {
                    st[0] /= mag;
                    st[1] /= mag;
                }
                s = [*left.last().unwrap()];
            }
        }
        let mut right = Vec::with_capacity(n - m);
        let mut s = [[0.0, -1.0]];
        right.push(s[0]);
        for i in (m..n - 1).rev() {
            self.prop.advance(&mut s, g.x(i + 1), g.x(i));
            right.push(s[0]);
            let mag = s[0][0].abs().max(s[0][1].abs());
            if mag > 1e100 {
                for st in right.iter_mut() {
                    st[0] /= mag;
                    st[1] /= mag;
                }
                s = [*right.last().unwrap()];
            }
        }
        right.reverse();
        (left, right)
    }

    /// Normalized Wronskian of the two inward solutions at the match node.
    fn mismatch(&self, m: usize) -> f64 {
        let (left, right) = self.inward(m);
        self.mismatch_of(left[m], right[0])
    }

    fn mismatch_of(&self, l: State, r: State) -> f64 {
        (l[1] * r[0] - r[1] * l[0]) / ((l[0].abs() + l[1].abs()) * (r[0].abs() + r[1].abs()))
    }
}

fn match_node(potential: &Potential, energy: f64, grid: &Grid) -> usize {
    let n = grid.len();
    let margin = (n / 20).max(2);
    potential
        .turning_points(energy)
        .into_iter()
        .map(|x| grid.nearest(x))
        .find(|&i| i >= margin && i + margin < n)
        .unwrap_or(n / 2)
}

/// Count sign changes between nonzero samples.
pub fn count_nodes(samples: &[f64]) -> usize {
    let mut last = 0.0f64;
    let mut count = 0;
    for &u in samples {
        if u != 0.0 && u.is_finite() {
            if last != 0.0 && (u > 0.0) != (last > 0.0) {
                count += 1;
            }
            last = u;
        }
    }
    count
}

/// Number of levels (Dirichlet at both grid ends) strictly below `energy`.
pub fn count_levels_below(
    potential: &Potential,
    constants: &PhysicalConstants,
    energy: f64,
    grid: &Grid,
) -> Result<usize> {
    potential.validate()?;
    constants.validate()?;
    check_grid_in_domain(potential, grid)?;
    let shooter = Shooter {
        prop: Propagator::new(potential, constants, energy),
        grid,
    };
    Ok(shooter.count_below())
}

/// Energy bracket `(min V, E_hi)` guaranteed to contain level `n`.
pub fn auto_bracket(
    potential: &Potential,
    constants: &PhysicalConstants,
    n: usize,
    grid: &Grid,
) -> Result<(f64, f64)> {
    let lo = potential.min_value();
    let mut step = match *potential {
        Potential::FiniteWell { depth, .. } => depth,
        _ => 1.0,
    };
    for _ in 0..64 {
        let hi = lo + step;
        if count_levels_below(potential, constants, hi, grid)? > n {
            return Ok((lo, hi));
        }
        step *= 2.0;
    }
    Err(QhjError::Convergence {
        iterations: 64,
        detail: format!("could not find an energy above level {n}"),
    })
}

/// Locate bound level `n` inside `bracket` by node counting and bisection on
/// the Wronskian mismatch of two inward integrations.
pub fn find_eigenvalue(
    potential: Potential,
    constants: PhysicalConstants,
    n: usize,
    grid: Grid,
    bracket: (f64, f64),
) -> Result<EigenSolution> {
    potential.validate()?;
    constants.validate()?;
    check_grid_in_domain(&potential, &grid)?;
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) {
        return invalid(format!("bracket must satisfy lo < hi, got ({lo}, {hi})"));
    }
    let count = |e: f64| {
        Shooter {
            prop: Propagator::new(&potential, &constants, e),
            grid: &grid,
        }
        .count_below()
    };
    let (c_lo, c_hi) = (count(lo), count(hi));
    if c_lo > n || c_hi <= n {
        return Err(QhjError::Bracket {
            level: n,
            lo,
            hi,
            count_lo: c_lo,
            count_hi: c_hi,
        });
    }

    let mut iterations = 0;
    let converged = |lo: f64, hi: f64| hi - lo <= EIGEN_REL_TOL * (0.5 * (lo + hi)).abs().max(1.0);
    // isolate: exactly level n between lo and hi
    let (mut cl, mut ch) = (c_lo, c_hi);
    while (cl != n || ch != n + 1) && !converged(lo, hi) {
        iterations += 1;
        if iterations > EIGEN_MAX_ITERATIONS {
            return Err(QhjError::Convergence {
                iterations,
                detail: format!("isolating level {n}"),
            });
        }
        let mid = 0.5 * (lo + hi);
        let c = count(mid);
        if c > n {
            hi = mid;
            ch = c;
        } else {
            lo = mid;
            cl = c;
        }
    }

    let m = match_node(&potential, 0.5 * (lo + hi), &grid);
    let f = |e: f64| {
        Shooter {
            prop: Propagator::new(&potential, &constants, e),
            grid: &grid,
        }
        .mismatch(m)
    };
    let f_lo = f(lo);
    let by_mismatch = f_lo.signum() != f(hi).signum();
    while !converged(lo, hi) {
        iterations += 1;
        if iterations > EIGEN_MAX_ITERATIONS {
            return Err(QhjError::Convergence {
                iterations,
                detail: format!("bisecting level {n}, bracket width {:e}", hi - lo),
            });
        }
        let mid = 0.5 * (lo + hi);
        let go_right = if by_mismatch {
            f(mid).signum() == f_lo.signum()
        } else {
            count(mid) <= n
        };
        if go_right {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let energy = 0.5 * (lo + hi);
    build_eigen(&potential, &constants, n, grid, energy, m, iterations)
}

fn build_eigen(
    potential: &Potential,
    constants: &PhysicalConstants,
    n: usize,
    grid: Grid,
    energy: f64,
    m: usize,
    iterations: usize,
) -> Result<EigenSolution> {
    let (wl, wr) = potential.walls();
    for (end, wall) in [(grid.x_min(), wl), (grid.x_max(), wr)] {
        if wall.is_none() {
            let v = potential.eval(end)?;
            if !(v > energy) {
                return invalid(format!(
                    "grid end x = {end} is classically allowed at E = {energy}; widen the grid"
                ));
            }
        }
    }
    let shooter = Shooter {
        prop: Propagator::new(potential, constants, energy),
        grid: &grid,
    };
    let (left, right) = shooter.inward(m);
    let (l, r) = (left[m], right[0]);
    let mismatch = shooter.mismatch_of(l, r).abs();
    // least-squares factor on (u, u'), well defined even when u = 0 at the match
    let s = (l[0] * r[0] + l[1] * r[1]) / (r[0] * r[0] + r[1] * r[1]);
    let mut phi: Vec<f64> = left.iter().map(|st| st[0]).collect();
    let mut dphi: Vec<f64> = left.iter().map(|st| st[1]).collect();
    phi.extend(right.iter().skip(1).map(|st| st[0] * s));
    dphi.extend(right.iter().skip(1).map(|st| st[1] * s));
    let peak = phi.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let first = phi.iter().copied().find(|v| v.abs() > 1e-8 * peak).unwrap_or(1.0);
    let norm = peak.copysign(first);
    for v in phi.iter_mut().chain(dphi.iter_mut()) {
        *v /= norm;
    }
    let node_count = count_nodes(&phi);
    if node_count != n {
        return Err(QhjError::Convergence {
            iterations,
            detail: format!("eigenfunction has {node_count} nodes, expected {n}"),
        });
    }
    Ok(EigenSolution {
        level: n,
        energy,
        grid,
        phi,
        phi_prime: dphi,
        node_count,
        match_x: grid.x(m),
        log_derivative_mismatch: mismatch,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn unit() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    #[test]
    fn well_pair_matches_trig_solutions() {
        let well = Potential::InfiniteWell { width: PI };
        let grid = Grid::new(0.0, PI, 2001).unwrap();
        let pair = integrate_pair(well, unit(), 0.5, grid, FRAC_PI_2, AnchorConditions::identity()).unwrap();
        assert_eq!(pair.valid, 0..grid.len());
        assert_eq!(pair.wronskian, 1.0);
        for i in 0..grid.len() {
            let x = grid.x(i);
            assert!((pair.phi[i] - (x - FRAC_PI_2).cos()).abs() < 1e-11);
            assert!((pair.theta[i] - (x - FRAC_PI_2).sin()).abs() < 1e-11);
        }
        assert!(pair.wronskian_drift() < 1e-8);
    }

    #[test]
    fn dependent_anchor_conditions_are_rejected() {
        let h = Potential::Harmonic { stiffness: 1.0 };
        let grid = Grid::new(-1.0, 1.0, 11).unwrap();
        let err = integrate_pair(h, unit(), 0.5, grid, 0.0, AnchorConditions::new(1.0, 0.0, 2.0, 0.0));
        assert!(matches!(err, Err(QhjError::Validation(_))));
    }

    #[test]
    fn negative_wronskian_flips_theta() {
        let h = Potential::Harmonic { stiffness: 1.0 };
        let grid = Grid::new(-1.0, 1.0, 101).unwrap();
        let pair = integrate_pair(h, unit(), 0.5, grid, 0.0, AnchorConditions::new(1.0, 0.0, 0.0, -1.0)).unwrap();
        assert!(pair.wronskian > 0.0);
        assert_eq!(pair.anchor.theta_prime, 1.0);
    }

    #[test]
    fn anchor_must_be_inside_walls() {
        let well = Potential::InfiniteWell { width: PI };
        let grid = Grid::new(0.0, PI, 101).unwrap();
        assert!(integrate_pair(well, unit(), 0.5, grid, 0.0, AnchorConditions::identity()).is_err());
        let wide = Grid::new(-1.0, PI, 101).unwrap();
        assert!(matches!(
            integrate_pair(well, unit(), 0.5, wide, 1.0, AnchorConditions::identity()),
            Err(QhjError::Domain { .. })
        ));
    }

    #[test]
    fn overflow_is_clamped_not_an_error() {
        let h = Potential::Harmonic { stiffness: 1.0 };
        let grid = Grid::new(-40.0, 40.0, 8001).unwrap();
        let pair = integrate_pair(h, unit(), 0.5, grid, 0.0, AnchorConditions::identity()).unwrap();
        assert!(pair.valid.start > 0 && pair.valid.end < grid.len());
        assert!(pair.is_clamped(0) && pair.phi[0].is_nan());
        for i in pair.valid.clone() {
            assert!(pair.phi[i].abs() <= CLAMP_THRESHOLD && pair.theta[i].abs() <= CLAMP_THRESHOLD);
        }
    }

    #[test]
    fn step_jump_is_resolved_off_grid() {
        // jump at 0 falls inside a cell; the split step must keep the
        // matching conditions so the flat-region solutions stay exact
        let step = Potential::StepBarrier { height: 2.0 };
        let grid = Grid::new(-3.05, 3.0, 1212).unwrap();
        assert!(grid.node_at(0.0).is_none());
        let sol = decaying_from_right(&step, &unit(), 1.0, &grid).unwrap();
        let kappa = 2f64.sqrt();
        let k = 2f64.sqrt();
        // left of the jump: u = A cos(kx) + B sin(kx) with A = u(0), B k = u'(0)
        let u0 = sol.u[grid.nearest(3.0)] * (kappa * 3.0).exp();
        for i in 0..grid.nearest(-0.5) {
            let x = grid.x(i);
            let expect = u0 * ((k * x).cos() - kappa / k * (k * x).sin());
            assert!((sol.u[i] - expect).abs() < 1e-8, "x = {x}");
        }
    }

    #[test]
    fn scaling_examples() {
        let well = Potential::InfiniteWell { width: PI };
        let grid = Grid::new(0.0, PI, 11).unwrap();
        let pair = BasisPair::free_sine(well, unit(), 0.5, grid).unwrap();
        let ms = Microstate::new(2f64.sqrt(), 2f64.sqrt(), 0.0).unwrap();
        let s = scale_wronskian(&pair, &ms, &unit()).unwrap();
        assert!((s.wronskian - 1.0).abs() < 1e-15);
        assert!((s.phi[3] - pair.phi[3]).abs() < 1e-15);

        let four = pair.scaled(2.0);
        assert_eq!(four.wronskian, 4.0);
        let ms = Microstate::new(1.0, 1.0, 0.0).unwrap();
        let s = scale_wronskian(&four, &ms, &unit()).unwrap();
        assert!((s.wronskian - 2f64.sqrt()).abs() < 1e-15);
        let factor = (2f64.sqrt() / 4.0).sqrt();
        assert!((s.theta[5] - four.theta[5] * factor).abs() < 1e-15);
    }

    #[test]
    fn bracket_excluding_level_is_an_error() {
        let h = Potential::Harmonic { stiffness: 1.0 };
        let grid = Grid::new(-8.0, 8.0, 4001).unwrap();
        let err = find_eigenvalue(h, unit(), 2, grid, (0.0, 1.0));
        assert!(matches!(err, Err(QhjError::Bracket { level: 2, .. })));
    }

    #[test]
    fn too_narrow_grid_is_rejected() {
        let h = Potential::Harmonic { stiffness: 1.0 };
        let grid = Grid::new(-1.0, 1.0, 401).unwrap();
        assert!(find_eigenvalue(h, unit(), 0, grid, (0.0, 10.0)).is_err());
    }

    #[test]
    fn well_ground_state() {
        let well = Potential::InfiniteWell { width: PI };
        let grid = Grid::new(0.0, PI, 2001).unwrap();
        let e = find_eigenvalue(well, unit(), 0, grid, (0.1, 1.0)).unwrap();
        assert!((e.energy - 0.5).abs() < 1e-10, "{}", e.energy);
        assert_eq!(e.node_count, 0);
        assert_eq!(e.phi[0], 0.0);
        assert_eq!(*e.phi.last().unwrap(), 0.0);
    }

    #[test]
    fn finite_well_levels_are_ordered() {
        let p = Potential::FiniteWell { depth: 10.0, width: 2.0 };
        let grid = Grid::new(-8.0, 8.0, 8001).unwrap();
        let mut last = f64::NEG_INFINITY;
        for n in 0..3 {
            let (lo, hi) = auto_bracket(&p, &unit(), n, &grid).unwrap();
            let e = find_eigenvalue(p, unit(), n, grid, (lo, hi)).unwrap();
            assert!(e.energy > last && e.energy < 0.0);
            assert_eq!(e.node_count, n);
            last = e.energy;
        }
    }

    #[test]
    fn node_counting_skips_exact_zeros() {
        assert_eq!(count_nodes(&[0.0, 1.0, 0.0, -1.0, -2.0, 3.0, 0.0]), 2);
        assert_eq!(count_nodes(&[0.0, 0.0]), 0);
    }
}
