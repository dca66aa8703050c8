//! Trajectories `t - tau = dW/dE` at fixed microstate, by central
//! differences in the energy.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, QhjError, Result};
use crate::model::{Grid, PhysicalConstants, Potential};
use crate::qhj::{characteristic_function, Microstate};
use crate::schrodinger::{integrate_pair, scale_wronskian, AnchorConditions, BasisPair};

/// Disagreement allowed between the `delta` and `delta/2` estimates,
/// relative to the largest `|t - tau|`.
pub const RICHARDSON_TOLERANCE: f64 = 1e-4;

/// How the basis pair changes with energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// `(phi, theta)` integrated from the same energy-independent initial
    /// data at a fixed anchor.
    FixedAnchor,
    /// `phi = sin(kx)`, `theta = -cos(kx)` (infinite well only).
    ClosedFormFamily,
}

impl Convention {
    pub fn label(&self) -> &'static str {
        match self {
            Convention::FixedAnchor => "fixed-anchor",
            Convention::ClosedFormFamily => "closed-form-family",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitOptions {
    pub convention: Convention,
    /// Anchor for [`Convention::FixedAnchor`]; ignored otherwise.
    pub anchor_x0: f64,
    pub anchor: AnchorConditions,
    /// Energy step; `None` picks `max(1e-6, 1e-6 |E|)`.
    pub delta_e: Option<f64>,
    pub tau: f64,
}

impl TransitOptions {
    pub fn fixed_anchor(anchor_x0: f64) -> Self {
        Self {
            convention: Convention::FixedAnchor,
            anchor_x0,
            anchor: AnchorConditions::identity(),
            delta_e: None,
            tau: 0.0,
        }
    }

    pub fn closed_form() -> Self {
        Self {
            convention: Convention::ClosedFormFamily,
            anchor_x0: f64::NAN,
            anchor: AnchorConditions::identity(),
            delta_e: None,
            tau: 0.0,
        }
    }

    pub fn with_delta(mut self, delta_e: f64) -> Self {
        self.delta_e = Some(delta_e);
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }
}

pub fn default_delta(energy: f64) -> f64 {
    1e-6f64.max(1e-6 * energy.abs())
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryCurve {
    pub grid: Grid,
    /// NaN outside `valid`.
    pub t_minus_tau: Vec<f64>,
    pub energy: f64,
    pub microstate: Microstate,
    pub tau: f64,
    pub convention: Convention,
    pub delta_e: f64,
    /// Observed `max |t_delta - t_{delta/2}| / max |t|`.
    pub richardson: f64,
    pub valid: Range<usize>,
}

/// Basis at one energy for the chosen convention, scaled for `ms`.
pub fn basis_at(
    potential: &Potential,
    constants: &PhysicalConstants,
    ms: &Microstate,
    energy: f64,
    grid: &Grid,
    opts: &TransitOptions,
) -> Result<BasisPair> {
    let pair = match opts.convention {
        Convention::FixedAnchor => {
            integrate_pair(*potential, *constants, energy, *grid, opts.anchor_x0, opts.anchor)?
        }
        Convention::ClosedFormFamily => BasisPair::free_sine(*potential, *constants, energy, *grid)?,
    };
    scale_wronskian(&pair, ms, constants)
}

fn w_at(
    potential: &Potential,
    constants: &PhysicalConstants,
    ms: &Microstate,
    energy: f64,
    grid: &Grid,
    opts: &TransitOptions,
) -> Result<(Vec<f64>, Range<usize>)> {
    let pair = basis_at(potential, constants, ms, energy, grid, opts)?;
    let cf = characteristic_function(&pair, ms, 0.0)?;
    Ok((cf.samples, cf.valid))
}

fn intersect(a: &Range<usize>, b: &Range<usize>) -> Range<usize> {
    a.start.max(b.start)..a.end.min(b.end).max(a.start.max(b.start))
}

/// Central difference of `W` in `E` with step `delta`, on the region where
/// both probe bases are unclamped. No step-size check.
pub fn central_difference(
    potential: &Potential,
    constants: &PhysicalConstants,
    ms: &Microstate,
    energy: f64,
    grid: &Grid,
    opts: &TransitOptions,
    delta: f64,
) -> Result<(Vec<f64>, Range<usize>)> {
    let (up, vu) = w_at(potential, constants, ms, energy + delta, grid, opts)?;
    let (down, vd) = w_at(potential, constants, ms, energy - delta, grid, opts)?;
    let valid = intersect(&vu, &vd);
    let mut t = vec![f64::NAN; grid.len()];
    for i in valid.clone() {
        t[i] = (up[i] - down[i]) / (2.0 * delta);
    }
    Ok((t, valid))
}

/// `t - tau = [W(x; E+d) - W(x; E-d)] / 2d` at fixed `(a, b, c)`, with the
/// Wronskian rescaled at each probe energy. The estimate is compared with
/// the one at `d/2`; disagreement above [`RICHARDSON_TOLERANCE`] is a
/// step-size error.
pub fn time_of_transit(
    potential: &Potential,
    constants: &PhysicalConstants,
    ms: &Microstate,
    energy: f64,
    grid: &Grid,
    opts: &TransitOptions,
) -> Result<TrajectoryCurve> {
    ms.validate()?;
    constants.validate()?;
    potential.validate()?;
    let delta = opts.delta_e.unwrap_or_else(|| default_delta(energy));
    if !(delta > 0.0 && delta.is_finite()) {
        return invalid(format!("energy step must be positive, got {delta}"));
    }
    let (t, v1) = central_difference(potential, constants, ms, energy, grid, opts, delta)?;
    let (t_half, v2) = central_difference(potential, constants, ms, energy, grid, opts, 0.5 * delta)?;
    let valid = intersect(&v1, &v2);
    let scale = valid.clone().map(|i| t_half[i].abs()).fold(0.0f64, f64::max);
    let diff = valid.clone().map(|i| (t[i] - t_half[i]).abs()).fold(0.0f64, f64::max);
    let richardson = if scale > 0.0 { diff / scale } else { diff };
    if !(richardson <= RICHARDSON_TOLERANCE) {
        return Err(QhjError::StepSize {
            delta_e: delta,
            mismatch: richardson,
            limit: RICHARDSON_TOLERANCE,
        });
    }
    let mut t_minus_tau = vec![f64::NAN; grid.len()];
    t_minus_tau[valid.clone()].copy_from_slice(&t[valid.clone()]);
    Ok(TrajectoryCurve {
        grid: *grid,
        t_minus_tau,
        energy,
        microstate: *ms,
        tau: opts.tau,
        convention: opts.convention,
        delta_e: delta,
        richardson,
        valid,
    })
}

/// `(x, tau + (t - tau))` over the unclamped samples, in grid order.
pub fn sample_trajectory(curve: &TrajectoryCurve) -> Vec<(f64, f64)> {
    curve
        .valid
        .clone()
        .map(|i| (curve.grid.x(i), curve.tau + curve.t_minus_tau[i]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

    fn unit() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    fn well() -> Potential {
        Potential::InfiniteWell { width: PI }
    }

    fn grid() -> Grid {
        Grid::new(0.0, PI, 201).unwrap()
    }

    #[test]
    fn classical_transit_time() {
        let ms = Microstate::new(SQRT_2, SQRT_2, 0.0).unwrap();
        let curve = time_of_transit(&well(), &unit(), &ms, 0.5, &grid(), &TransitOptions::closed_form()).unwrap();
        assert_eq!(curve.delta_e, 1e-6);
        assert!(curve.t_minus_tau[0].abs() < 1e-9);
        assert!((curve.t_minus_tau[100] - FRAC_PI_2).abs() < 1e-6);
        for (x, t) in sample_trajectory(&curve) {
            assert!((t - x).abs() < 1e-6, "x = {x}");
        }
    }

    #[test]
    fn epoch_shifts_every_time() {
        let ms = Microstate::new(2.0, 1.0, 0.0).unwrap();
        let opts = TransitOptions::closed_form();
        let a = time_of_transit(&well(), &unit(), &ms, 0.5, &grid(), &opts).unwrap();
        let b = time_of_transit(&well(), &unit(), &ms, 0.5, &grid(), &opts.with_tau(5.0)).unwrap();
        for (p, q) in sample_trajectory(&a).iter().zip(sample_trajectory(&b)) {
            assert_eq!(p.0, q.0);
            assert!((q.1 - p.1 - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn microstates_give_different_curves() {
        let opts = TransitOptions::closed_form();
        let a = time_of_transit(&well(), &unit(), &Microstate::new(2.0, 1.0, 0.0).unwrap(), 0.5, &grid(), &opts).unwrap();
        let b = time_of_transit(&well(), &unit(), &Microstate::new(SQRT_2, SQRT_2, 0.0).unwrap(), 0.5, &grid(), &opts)
            .unwrap();
        let diff = (0..201).map(|i| (a.t_minus_tau[i] - b.t_minus_tau[i]).abs()).fold(0.0, f64::max);
        assert!(diff > 0.01, "{diff}");
    }

    #[test]
    fn oversized_step_is_rejected() {
        let ms = Microstate::new(2.0, 1.0, 0.0).unwrap();
        let opts = TransitOptions::closed_form().with_delta(0.4);
        assert!(matches!(
            time_of_transit(&well(), &unit(), &ms, 0.5, &grid(), &opts),
            Err(QhjError::StepSize { .. })
        ));
    }

    #[test]
    fn fixed_anchor_is_deterministic() {
        let ms = Microstate::new(2.0, 1.0, 0.3).unwrap();
        let g = Grid::new(-5.0, 5.0, 1001).unwrap();
        let opts = TransitOptions::fixed_anchor(0.0);
        let h = Potential::Harmonic { stiffness: 1.0 };
        let a = time_of_transit(&h, &unit(), &ms, 0.7, &g, &opts).unwrap();
        let b = time_of_transit(&h, &unit(), &ms, 0.7, &g, &opts).unwrap();
        assert_eq!(a.t_minus_tau[500].to_bits(), b.t_minus_tau[500].to_bits());
        assert_eq!(a.convention.label(), "fixed-anchor");
    }

    #[test]
    fn closed_form_needs_the_well() {
        let ms = Microstate::new(2.0, 1.0, 0.0).unwrap();
        let g = Grid::new(-5.0, 5.0, 101).unwrap();
        let h = Potential::Harmonic { stiffness: 1.0 };
        assert!(time_of_transit(&h, &unit(), &ms, 0.5, &g, &TransitOptions::closed_form()).is_err());
    }

    #[test]
    fn empty_region_gives_no_samples() {
        let ms = Microstate::new(2.0, 1.0, 0.0).unwrap();
        let mut curve = time_of_transit(&well(), &unit(), &ms, 0.5, &grid(), &TransitOptions::closed_form()).unwrap();
        curve.valid = 0..0;
        assert!(sample_trajectory(&curve).is_empty());
    }
}
