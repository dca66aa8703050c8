//! Physical constants, the potential catalog and uniform grids.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, QhjError, Result};

/// Reduced Planck constant and particle mass. Defaults to the dimensionless
/// choice `hbar = mass = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
        }
    }
}

impl PhysicalConstants {
    pub fn new(hbar: f64, mass: f64) -> Result<Self> {
        let c = Self { hbar, mass };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return invalid(format!("hbar must be positive, got {}", self.hbar));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return invalid(format!("mass must be positive, got {}", self.mass));
        }
        Ok(())
    }

    /// `2m/hbar^2`, the factor multiplying `V - E` in `u'' = 2m(V-E)/hbar^2 u`.
    pub fn kinetic_factor(&self) -> f64 {
        2.0 * self.mass / (self.hbar * self.hbar)
    }
}

/// Which one-sided limit to take when evaluating a piecewise potential exactly
/// on a discontinuity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Below,
    Above,
}

/// Closed catalog of one-dimensional potentials.
///
/// Hard walls (the infinite well's edges, the ramp's wall at `x = 0`) are kept
/// as metadata rather than as large finite values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Potential {
    /// `V = 0` on `[0, width]`, walls at both ends.
    InfiniteWell { width: f64 },
    /// `V = stiffness * x^2 / 2`.
    Harmonic { stiffness: f64 },
    /// `V = -depth` for `|x| < width/2`, zero outside.
    FiniteWell { depth: f64, width: f64 },
    /// `V = slope * x` for `x > 0`, wall at `x = 0`.
    LinearRamp { slope: f64 },
    /// `V = 0` for `x < 0`, `height` for `x >= 0`.
    StepBarrier { height: f64 },
}

impl Potential {
    pub fn validate(&self) -> Result<()> {
        let params: &[(&str, f64)] = match self {
            Potential::InfiniteWell { width } => &[("width", *width)],
            Potential::Harmonic { stiffness } => &[("stiffness", *stiffness)],
            Potential::FiniteWell { depth, width } => &[("depth", *depth), ("width", *width)],
            Potential::LinearRamp { slope } => &[("slope", *slope)],
            Potential::StepBarrier { height } => &[("height", *height)],
        };
        for (name, v) in params {
            if !(*v > 0.0 && v.is_finite()) {
                return invalid(format!("{} parameter {name} must be positive, got {v}", self.name()));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            Potential::InfiniteWell { .. } => "infinite-well",
            Potential::Harmonic { .. } => "harmonic",
            Potential::FiniteWell { .. } => "finite-well",
            Potential::LinearRamp { .. } => "linear-ramp",
            Potential::StepBarrier { .. } => "step",
        }
    }

    /// Hard-wall positions `(left, right)`; the wave function vanishes there.
    pub fn walls(&self) -> (Option<f64>, Option<f64>) {
        match *self {
            Potential::InfiniteWell { width } => (Some(0.0), Some(width)),
            Potential::LinearRamp { .. } => (Some(0.0), None),
            _ => (None, None),
        }
    }

    pub fn has_walls(&self) -> bool {
        let (l, r) = self.walls();
        l.is_some() || r.is_some()
    }

    /// Positions where the potential jumps.
    pub fn discontinuities(&self) -> Vec<f64> {
        match *self {
            Potential::FiniteWell { width, .. } => vec![-0.5 * width, 0.5 * width],
            Potential::StepBarrier { .. } => vec![0.0],
            _ => Vec::new(),
        }
    }

    pub fn is_smooth(&self) -> bool {
        matches!(self, Potential::Harmonic { .. } | Potential::LinearRamp { .. })
    }

    pub fn min_value(&self) -> f64 {
        match *self {
            Potential::FiniteWell { depth, .. } => -depth,
            _ => 0.0,
        }
    }

    pub fn check_domain(&self, x: f64) -> Result<()> {
        let (lo, hi) = self.walls();
        let lo = lo.unwrap_or(f64::NEG_INFINITY);
        let hi = hi.unwrap_or(f64::INFINITY);
        if x.is_nan() || x < lo || x > hi {
            return Err(QhjError::Domain { x, lo, hi });
        }
        Ok(())
    }

    /// `V(x)`. Piecewise variants take the right-continuous value on a jump.
    pub fn eval(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        Ok(self.value_unchecked(x, Side::Above))
    }

    /// One-sided limit of `V` at `x`. Identical to [`Potential::eval`] away
    /// from discontinuities.
    pub fn eval_side(&self, x: f64, side: Side) -> Result<f64> {
        self.check_domain(x)?;
        Ok(self.value_unchecked(x, side))
    }

    pub(crate) fn value_unchecked(&self, x: f64, side: Side) -> f64 {
        match *self {
            Potential::InfiniteWell { .. } => 0.0,
            Potential::Harmonic { stiffness } => 0.5 * stiffness * x * x,
            Potential::FiniteWell { depth, width } => {
                let edge = 0.5 * width;
                let ax = x.abs();
                let inside = if ax == edge {
                    // approaching from the interior means moving toward zero
                    (x < 0.0) == (side == Side::Above)
                } else {
                    ax < edge
                };
                if inside {
                    -depth
                } else {
                    0.0
                }
            }
            Potential::LinearRamp { slope } => slope * x,
            Potential::StepBarrier { height } => {
                if x > 0.0 || (x == 0.0 && side == Side::Above) {
                    height
                } else {
                    0.0
                }
            }
        }
    }

    /// Classical turning points: sorted solutions of `V(x) = E`. The infinite
    /// well reports its walls.
    pub fn turning_points(&self, energy: f64) -> Vec<f64> {
        match *self {
            Potential::InfiniteWell { width } => {
                if energy > 0.0 {
                    vec![0.0, width]
                } else {
                    Vec::new()
                }
            }
            Potential::Harmonic { stiffness } => {
                if energy > 0.0 {
                    let r = (2.0 * energy / stiffness).sqrt();
                    vec![-r, r]
                } else {
                    Vec::new()
                }
            }
            Potential::FiniteWell { depth, width } => {
                if energy > -depth && energy < 0.0 {
                    vec![-0.5 * width, 0.5 * width]
                } else {
                    Vec::new()
                }
            }
            Potential::LinearRamp { slope } => {
                if energy > 0.0 {
                    vec![energy / slope]
                } else {
                    Vec::new()
                }
            }
            Potential::StepBarrier { height } => {
                if energy > 0.0 && energy < height {
                    vec![0.0]
                } else {
                    Vec::new()
                }
            }
        }
    }

    /// Closed-form bound-state energy of level `n` where one is known.
    pub fn exact_level(&self, n: usize, constants: &PhysicalConstants) -> Option<f64> {
        let PhysicalConstants { hbar, mass } = *constants;
        match *self {
            Potential::InfiniteWell { width } => {
                let k = (n as f64 + 1.0) * std::f64::consts::PI / width;
                Some(hbar * hbar * k * k / (2.0 * mass))
            }
            Potential::Harmonic { stiffness } => {
                let omega = (stiffness / mass).sqrt();
                Some(hbar * omega * (n as f64 + 0.5))
            }
            _ => None,
        }
    }
}

impl fmt::Display for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Potential::InfiniteWell { width } => write!(f, "infinite-well:L={width}"),
            Potential::Harmonic { stiffness } => write!(f, "harmonic:k={stiffness}"),
            Potential::FiniteWell { depth, width } => write!(f, "finite-well:V0={depth},L={width}"),
            Potential::LinearRamp { slope } => write!(f, "linear-ramp:g={slope}"),
            Potential::StepBarrier { height } => write!(f, "step:V0={height}"),
        }
    }
}

/// Parses `kind[:name=value,...]`, e.g. `harmonic:k=1`, `step:V0=2`,
/// `infinite-well:L=3.14159`. Omitted parameters default to 1 (the infinite
/// well's width defaults to pi).
impl FromStr for Potential {
    type Err = QhjError;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = match s.split_once(':') {
            Some((k, r)) => (k.trim(), r.trim()),
            None => (s.trim(), ""),
        };
        let mut params: Vec<(String, f64)> = Vec::new();
        for item in rest.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (name, value) = item
                .split_once('=')
                .ok_or_else(|| QhjError::Validation(format!("expected name=value, got '{item}'")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| QhjError::Validation(format!("bad number in '{item}'")))?;
            params.push((name.trim().to_ascii_lowercase(), value));
        }
        let take = |names: &[&str], default: f64| -> f64 {
            params
                .iter()
                .rev()
                .find(|(n, _)| names.contains(&n.as_str()))
                .map(|(_, v)| *v)
                .unwrap_or(default)
        };
        let known: &[&str] = match kind {
            "infinite-well" | "infinite_well" | "well" => &["l", "width"],
            "harmonic" => &["k", "stiffness"],
            "finite-well" | "finite_well" => &["v0", "depth", "l", "width"],
            "linear-ramp" | "linear_ramp" | "ramp" => &["g", "slope"],
            "step" | "step-barrier" | "step_barrier" => &["v0", "height"],
            other => return invalid(format!("unknown potential kind '{other}'")),
        };
        if let Some((n, _)) = params.iter().find(|(n, _)| !known.contains(&n.as_str())) {
            return invalid(format!("unknown parameter '{n}' for potential '{kind}'"));
        }
        let p = match kind {
            "infinite-well" | "infinite_well" | "well" => Potential::InfiniteWell {
                width: take(&["l", "width"], std::f64::consts::PI),
            },
            "harmonic" => Potential::Harmonic {
                stiffness: take(&["k", "stiffness"], 1.0),
            },
            "finite-well" | "finite_well" => Potential::FiniteWell {
                depth: take(&["v0", "depth"], 1.0),
                width: take(&["l", "width"], 1.0),
            },
            "linear-ramp" | "linear_ramp" | "ramp" => Potential::LinearRamp {
                slope: take(&["g", "slope"], 1.0),
            },
            _ => Potential::StepBarrier {
                height: take(&["v0", "height"], 1.0),
            },
        };
        p.validate()?;
        Ok(p)
    }
}

/// Uniform grid on `[x_min, x_max]` with `n_points` nodes, both ends included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n_points: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) {
            return invalid("grid bounds must be finite");
        }
        if x_min >= x_max {
            return invalid(format!("grid requires x_min < x_max, got {x_min} >= {x_max}"));
        }
        if n_points < 3 {
            return invalid(format!("grid requires n_points >= 3, got {n_points}"));
        }
        Ok(Self {
            x_min,
            x_max,
            n_points,
        })
    }

    /// Grid whose spacing is as close as possible to `h` (never larger).
    pub fn with_spacing(x_min: f64, x_max: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return invalid("grid spacing must be positive");
        }
        let cells = ((x_max - x_min) / h).ceil().max(2.0) as usize;
        Self::new(x_min, x_max, cells + 1)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.x_max
        } else {
            self.x_min + i as f64 * (self.x_max - self.x_min) / (self.n_points - 1) as f64
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// Index of the node nearest to `x` (clamped to the grid).
    pub fn nearest(&self, x: f64) -> usize {
        let t = ((x - self.x_min) / self.h()).round();
        t.clamp(0.0, (self.n_points - 1) as f64) as usize
    }

    /// Index of the node at `x`, if `x` is a node up to rounding.
    pub fn node_at(&self, x: f64) -> Option<usize> {
        let i = self.nearest(x);
        ((self.x(i) - x).abs() <= 1e-9 * self.h()).then_some(i)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    /// Same bounds, half the spacing.
    pub fn refined(&self) -> Grid {
        Grid {
            x_min: self.x_min,
            x_max: self.x_max,
            n_points: 2 * self.n_points - 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn potential_values() {
        let h = Potential::Harmonic { stiffness: 1.0 };
        assert_eq!(h.eval(0.0).unwrap(), 0.0);
        let s = Potential::StepBarrier { height: 2.0 };
        assert_eq!(s.eval(-1.0).unwrap(), 0.0);
        assert_eq!(s.eval(1.0).unwrap(), 2.0);
        assert_eq!(s.eval(0.0).unwrap(), 2.0);
        assert_eq!(s.eval_side(0.0, Side::Below).unwrap(), 0.0);
        let w = Potential::InfiniteWell { width: PI };
        assert_eq!(w.eval(PI / 2.0).unwrap(), 0.0);
    }

    #[test]
    fn hard_walls_reject_outside_points() {
        let w = Potential::InfiniteWell { width: PI };
        assert!(matches!(w.eval(-0.1), Err(QhjError::Domain { .. })));
        assert!(matches!(w.eval(PI + 0.1), Err(QhjError::Domain { .. })));
        assert!(w.eval(PI).is_ok());
        let r = Potential::LinearRamp { slope: 1.0 };
        assert!(r.eval(-1e-3).is_err());
        assert_eq!(r.eval(2.0).unwrap(), 2.0);
    }

    #[test]
    fn finite_well_edges_are_one_sided() {
        let p = Potential::FiniteWell { depth: 3.0, width: 2.0 };
        assert_eq!(p.eval(0.0).unwrap(), -3.0);
        assert_eq!(p.eval(2.0).unwrap(), 0.0);
        assert_eq!(p.eval_side(1.0, Side::Below).unwrap(), -3.0);
        assert_eq!(p.eval_side(1.0, Side::Above).unwrap(), 0.0);
        assert_eq!(p.eval_side(-1.0, Side::Below).unwrap(), 0.0);
        assert_eq!(p.eval_side(-1.0, Side::Above).unwrap(), -3.0);
    }

    #[test]
    fn turning_point_examples() {
        assert_eq!(Potential::Harmonic { stiffness: 1.0 }.turning_points(0.5), vec![-1.0, 1.0]);
        assert_eq!(Potential::InfiniteWell { width: PI }.turning_points(7.0), vec![0.0, PI]);
        assert_eq!(Potential::StepBarrier { height: 2.0 }.turning_points(1.0), vec![0.0]);
        assert!(Potential::StepBarrier { height: 2.0 }.turning_points(3.0).is_empty());
        assert_eq!(Potential::LinearRamp { slope: 2.0 }.turning_points(3.0), vec![1.5]);
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        assert!(Potential::Harmonic { stiffness: 0.0 }.validate().is_err());
        assert!(Potential::FiniteWell { depth: 1.0, width: -1.0 }.validate().is_err());
        assert!(PhysicalConstants::new(0.0, 1.0).is_err());
        assert!(PhysicalConstants::new(1.0, 1.0).is_ok());
    }

    #[test]
    fn parses_potential_specs() {
        assert_eq!("harmonic:k=2".parse::<Potential>().unwrap(), Potential::Harmonic { stiffness: 2.0 });
        assert_eq!("step:V0=2".parse::<Potential>().unwrap(), Potential::StepBarrier { height: 2.0 });
        assert_eq!(
            "infinite-well".parse::<Potential>().unwrap(),
            Potential::InfiniteWell { width: PI }
        );
        assert!("harmonic:q=1".parse::<Potential>().is_err());
        assert!("cubic".parse::<Potential>().is_err());
        assert!("harmonic:k=-1".parse::<Potential>().is_err());
        let p = Potential::FiniteWell { depth: 2.5, width: 1.5 };
        assert_eq!(p.to_string().parse::<Potential>().unwrap(), p);
    }

    #[test]
    fn grid_examples() {
        let g = Grid::new(0.0, PI, 5).unwrap();
        let expected = [0.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0, PI];
        for (x, e) in g.points().iter().zip(expected) {
            assert!((x - e).abs() <= 1e-15);
        }
        assert_eq!(g.x(4), PI);
        assert_eq!(Grid::new(-1.0, 1.0, 3).unwrap().points(), vec![-1.0, 0.0, 1.0]);
        assert!(Grid::new(1.0, 0.0, 5).is_err());
        assert!(Grid::new(0.0, 1.0, 2).is_err());
    }

    #[test]
    fn grid_node_lookup() {
        let g = Grid::new(-6.0, 6.0, 12001).unwrap();
        assert_eq!(g.node_at(0.0), Some(6000));
        assert_eq!(g.node_at(0.0005), None);
        assert_eq!(g.refined().len(), 24001);
        assert!((g.refined().h() - g.h() / 2.0).abs() < 1e-18);
    }

    #[test]
    fn exact_levels() {
        let c = PhysicalConstants::default();
        assert_eq!(Potential::Harmonic { stiffness: 1.0 }.exact_level(3, &c), Some(3.5));
        let w = Potential::InfiniteWell { width: PI }.exact_level(2, &c).unwrap();
        assert!((w - 4.5).abs() < 1e-14);
    }
}
