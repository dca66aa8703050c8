//! Microstates `(a, b, c)` and the quantities they generate from a basis
//! pair: the conjugate momentum `W'`, the continuous characteristic function
//! `W`, and the polar and trigonometric forms of the wave function.

use std::ops::Range;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, QhjError, Result};
use crate::model::{Grid, PhysicalConstants};
use crate::schrodinger::BasisPair;

/// Relative tolerance on `W^2 hbar^2 (ab - c^2/4) / 2m = 1` for a pair to
/// count as scaled for a microstate.
pub const SCALING_TOLERANCE: f64 = 1e-9;

/// Probability current below `CURRENT_TOLERANCE * |alpha| |beta|` is zero.
pub const CURRENT_TOLERANCE: f64 = 1e-12;

/// Coefficient triple of the general conjugate-momentum solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Microstate {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Microstate {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        let ms = Self { a, b, c };
        ms.validate()?;
        Ok(ms)
    }

    pub fn is_admissible(&self) -> bool {
        self.a > 0.0 && self.b > 0.0 && self.discriminant() > 0.0 && self.c.is_finite()
            && self.a.is_finite() && self.b.is_finite()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return invalid(format!("microstate requires a > 0, got a = {}", self.a));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return invalid(format!("microstate requires b > 0, got b = {}", self.b));
        }
        let d = self.discriminant();
        if !(d > 0.0 && self.c.is_finite()) {
            return invalid(format!("microstate requires ab - c^2/4 > 0, got {d}"));
        }
        Ok(())
    }

    /// `ab - c^2/4`.
    pub fn discriminant(&self) -> f64 {
        self.a * self.b - 0.25 * self.c * self.c
    }

    /// `[2m / (hbar^2 (ab - c^2/4))]^{1/2}`.
    pub fn target_wronskian(&self, constants: &PhysicalConstants) -> f64 {
        (2.0 * constants.mass / (constants.hbar * constants.hbar * self.discriminant())).sqrt()
    }

    pub fn scaled(&self, lambda: f64) -> Microstate {
        Microstate {
            a: self.a * lambda,
            b: self.b * lambda,
            c: self.c * lambda,
        }
    }

    /// Representative of the ray `lambda (a, b, c)` whose target Wronskian is
    /// `wronskian`, i.e. `ab - c^2/4 = 2m / (hbar^2 W^2)`.
    pub fn canonical(&self, wronskian: f64, constants: &PhysicalConstants) -> Microstate {
        let want = 2.0 * constants.mass / (constants.hbar * constants.hbar * wronskian * wronskian);
        self.scaled((want / self.discriminant()).sqrt())
    }

    /// `a - c^2/(4b)`.
    fn amplitude_denominator(&self) -> f64 {
        self.a - self.c * self.c / (4.0 * self.b)
    }

    fn form(&self, phi: f64, theta: f64) -> f64 {
        self.a * phi * phi + self.b * theta * theta + self.c * phi * theta
    }
}

/// `n` reproducible admissible triples: `a, b` uniform in `[0.5, 5]`, `c`
/// uniform in `(-0.9, 0.9) * 2 sqrt(ab)`.
pub fn random_microstates(n: usize, seed: u64) -> Vec<Microstate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let a = rng.gen_range(0.5..=5.0);
            let b = rng.gen_range(0.5..=5.0);
            let c = 1.8 * f64::sqrt(a * b) * rng.gen_range(-1.0..1.0);
            Microstate { a, b, c }
        })
        .collect()
}

/// Sign of the motion. Only `+x` is computed directly; `-x` data is mapped
/// onto it by complex conjugation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    PositiveX,
    NegativeX,
}

/// `W'(x)` on a grid. Exactly zero at clamped samples.
#[derive(Debug, Clone)]
pub struct MomentumField {
    pub grid: Grid,
    pub samples: Vec<f64>,
    pub microstate: Microstate,
    pub direction: Direction,
    pub valid: Range<usize>,
}

/// Continuous branch of `W(x)`.
#[derive(Debug, Clone)]
pub struct CharacteristicFunction {
    pub grid: Grid,
    pub samples: Vec<f64>,
    /// Number of half-turns added to the principal arctangent at each sample.
    pub branch_count: Vec<i64>,
    /// `exp(i W / hbar)`, kept separately so the trigonometric forms stay
    /// accurate where `W/hbar` sits near an odd multiple of `pi/2`. NaN at
    /// clamped samples.
    pub phase: Vec<Complex64>,
    /// Zeros of `phi` where `W/hbar` passes an odd multiple of `pi/2`: exact
    /// zero samples, or the secant root between samples of opposite sign.
    pub zeros: Vec<f64>,
    pub k: f64,
    pub hbar: f64,
    pub valid: Range<usize>,
}

impl CharacteristicFunction {
    pub fn increment(&self) -> f64 {
        self.samples[self.valid.end - 1] - self.samples[self.valid.start]
    }
}

/// `psi = alpha phi + beta theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuperpositionCoeffs {
    pub alpha: Complex64,
    pub beta: Complex64,
}

/// Result of inverting initial data for a microstate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialValueMicrostate {
    Unique {
        microstate: Microstate,
        direction: Direction,
    },
    /// Real standing wave (zero current): every admissible triple reproduces
    /// the data, so no single microstate is selected.
    DegenerateFamily,
}

/// Fails unless `pair` carries the Wronskian demanded by `ms`.
pub fn check_scaled(pair: &BasisPair, ms: &Microstate) -> Result<()> {
    ms.validate()?;
    let c = &pair.constants;
    let mismatch = pair.wronskian * pair.wronskian * c.hbar * c.hbar * ms.discriminant() / (2.0 * c.mass) - 1.0;
    if !(mismatch.abs() <= SCALING_TOLERANCE) {
        return invalid(format!(
            "basis is not scaled for microstate ({}, {}, {}): W^2 hbar^2 (ab - c^2/4)/2m - 1 = {mismatch:e}",
            ms.a, ms.b, ms.c
        ));
    }
    Ok(())
}

pub fn conjugate_momentum(pair: &BasisPair, ms: &Microstate) -> Result<MomentumField> {
    check_scaled(pair, ms)?;
    let root = (2.0 * pair.constants.mass).sqrt();
    let mut samples = vec![0.0; pair.len()];
    for i in pair.valid.clone() {
        let q = ms.form(pair.phi[i], pair.theta[i]);
        if !(q > 0.0) {
            return invalid(format!("a phi^2 + b theta^2 + c phi theta = {q} at x = {}", pair.grid.x(i)));
        }
        samples[i] = root / q;
    }
    Ok(MomentumField {
        grid: pair.grid,
        samples,
        microstate: *ms,
        direction: Direction::PositiveX,
        valid: pair.valid.clone(),
    })
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Branch index of each valid sample: zero on the lobe of `phi` holding the
/// reference sample, stepping by one across every sign change. Exact zeros
/// get the index of the lobe on their left.
fn lobe_indices(phi: &[f64], valid: &Range<usize>, reference: usize, grid: &Grid) -> Result<Vec<i64>> {
    let mut lobe = vec![0i64; phi.len()];
    let mut prev_change: Option<usize> = None;
    let note_change = |i: usize, prev_change: &mut Option<usize>| -> Result<()> {
        if let Some(p) = *prev_change {
            if p.abs_diff(i) == 1 {
                return Err(QhjError::Resolution {
                    x: grid.x(i),
                    detail: "two sign changes of phi in adjacent cells".into(),
                });
            }
        }
        *prev_change = Some(i);
        Ok(())
    };
    let mut current = 0i64;
    let mut last = sign(phi[reference]);
    for i in reference..valid.end {
        let s = sign(phi[i]);
        if s != 0 && s != last {
            current += 1;
            last = s;
            note_change(i, &mut prev_change)?;
        }
        lobe[i] = current;
    }
    let mut current = 0i64;
    let mut last = sign(phi[reference]);
    let mut prev_change = None;
    let mut pending_zero = Vec::new();
    for i in (valid.start..reference).rev() {
        let s = sign(phi[i]);
        if s == 0 {
            pending_zero.push(i);
            continue;
        }
        if s != last {
            current -= 1;
            last = s;
            note_change(i, &mut prev_change)?;
        }
        for z in pending_zero.drain(..) {
            lobe[z] = current;
        }
        lobe[i] = current;
    }
    for z in pending_zero {
        // zeros at the left edge of the grid: lobe to their left is one below
        lobe[z] = current - 1;
    }
    Ok(lobe)
}

/// Unwrapped `W = hbar arctan[(b theta/phi + c/2) / (ab - c^2/4)^{1/2}] + K`.
///
/// The arctangent is pinned to its principal branch on the lobe of `phi`
/// containing the pair's anchor and gains `hbar pi` at every zero of `phi`
/// crossed toward `+x`, so `W` is continuous and non-decreasing.
pub fn characteristic_function(pair: &BasisPair, ms: &Microstate, k: f64) -> Result<CharacteristicFunction> {
    check_scaled(pair, ms)?;
    let valid = pair.valid.clone();
    if valid.is_empty() {
        return Err(QhjError::EmptyRegion("basis has no unclamped samples".into()));
    }
    let hbar = pair.constants.hbar;
    let anchor = pair.grid.nearest(pair.anchor_x0).clamp(valid.start, valid.end - 1);
    let reference = valid
        .clone()
        .filter(|&i| pair.phi[i] != 0.0)
        .min_by_key(|&i| i.abs_diff(anchor))
        .ok_or_else(|| QhjError::EmptyRegion("phi vanishes everywhere".into()))?;
    let lobe = lobe_indices(&pair.phi, &valid, reference, &pair.grid)?;

    let root_d = ms.discriminant().sqrt();
    let n = pair.len();
    let mut samples = vec![f64::NAN; n];
    let mut phase = vec![Complex64::new(f64::NAN, f64::NAN); n];
    let k_phase = Complex64::from_polar(1.0, k / hbar);
    for i in valid.clone() {
        let (phi, theta) = (pair.phi[i], pair.theta[i]);
        let parity = if lobe[i].rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let (angle, unit) = if phi == 0.0 {
            (std::f64::consts::FRAC_PI_2, Complex64::new(0.0, 1.0))
        } else {
            let p = phi * root_d;
            let q = ms.b * theta + 0.5 * ms.c * phi;
            let r = p.hypot(q);
            let s = phi.signum();
            ((q / p).atan(), Complex64::new(s * p / r, s * q / r))
        };
        samples[i] = hbar * (angle + std::f64::consts::PI * lobe[i] as f64) + k;
        phase[i] = unit * parity * k_phase;
    }
    for i in valid.start + 1..valid.end {
        if samples[i] < samples[i - 1] - 1e-9 * hbar {
            return Err(QhjError::Resolution {
                x: pair.grid.x(i),
                detail: format!("W decreases by {:e}; a pair of zeros of phi is unresolved", samples[i - 1] - samples[i]),
            });
        }
    }
    let (first, last) = (samples[valid.start], samples[valid.end - 1]);
    let mut branch_count = lobe;
    for i in 0..valid.start {
        samples[i] = first;
        branch_count[i] = branch_count[valid.start];
    }
    for i in valid.end..n {
        samples[i] = last;
        branch_count[i] = branch_count[valid.end - 1];
    }
    Ok(CharacteristicFunction {
        grid: pair.grid,
        samples,
        branch_count,
        phase,
        zeros: zeros_of(&pair.phi, &valid, &pair.grid),
        k,
        hbar,
        valid,
    })
}

fn zeros_of(phi: &[f64], valid: &Range<usize>, grid: &Grid) -> Vec<f64> {
    let mut out = Vec::new();
    let mut last: Option<usize> = None;
    for i in valid.clone() {
        if phi[i] == 0.0 {
            out.push(grid.x(i));
            last = None;
            continue;
        }
        if let Some(j) = last {
            if j + 1 == i && (phi[i] > 0.0) != (phi[j] > 0.0) {
                let (xa, xb) = (grid.x(j), grid.x(i));
                out.push(xa - phi[j] * (xb - xa) / (phi[i] - phi[j]));
            }
        }
        last = Some(i);
    }
    out
}

fn amplitude(pair: &BasisPair, ms: &Microstate) -> Result<(MomentumField, CharacteristicFunction, f64)> {
    let wp = conjugate_momentum(pair, ms)?;
    let cf = characteristic_function(pair, ms, 0.0)?;
    let pre = (2.0 * pair.constants.mass).powf(0.25) / ms.amplitude_denominator().sqrt();
    Ok((wp, cf, pre))
}

/// `psi = (2m)^{1/4} exp(iW/hbar) / ((W')^{1/2} [a - c^2/(4b)]^{1/2})` on the
/// pair's unclamped range (`pair.valid`). With `phi` positive at the anchor
/// this equals `alpha phi + beta theta` for the microstate's coefficients.
pub fn reconstruct_polar(pair: &BasisPair, ms: &Microstate) -> Result<Vec<Complex64>> {
    let (wp, cf, pre) = amplitude(pair, ms)?;
    Ok(pair
        .valid
        .clone()
        .map(|i| cf.phase[i] * (pre / wp.samples[i].sqrt()))
        .collect())
}

/// `(2m)^{1/4} cos(W/hbar) / ((W')^{1/2} [a - c^2/(4b)]^{1/2})` on
/// `pair.valid`. Reproduces `phi` for every admissible triple.
pub fn reconstruct_trig(pair: &BasisPair, ms: &Microstate) -> Result<Vec<f64>> {
    let (wp, cf, pre) = amplitude(pair, ms)?;
    Ok(pair
        .valid
        .clone()
        .map(|i| cf.phase[i].re * pre / wp.samples[i].sqrt())
        .collect())
}

pub fn microstate_to_superposition(ms: &Microstate) -> Result<SuperpositionCoeffs> {
    ms.validate()?;
    let four = 4.0 * ms.a * ms.b - ms.c * ms.c;
    Ok(SuperpositionCoeffs {
        alpha: Complex64::new(1.0, ms.c / four.sqrt()),
        beta: Complex64::new(0.0, ms.b / ms.discriminant().sqrt()),
    })
}

/// `(phi, phi', theta, theta')` at `x0`: the anchor conditions when `x0` is
/// the anchor, otherwise the samples at the grid node `x0`.
fn frame_at(pair: &BasisPair, x0: f64) -> Result<[f64; 4]> {
    if x0 == pair.anchor_x0 {
        let a = &pair.anchor;
        return Ok([a.phi, a.phi_prime, a.theta, a.theta_prime]);
    }
    let i = pair
        .grid
        .node_at(x0)
        .ok_or_else(|| QhjError::Validation(format!("x0 = {x0} is neither the anchor nor a grid node")))?;
    if pair.is_clamped(i) {
        return invalid(format!("x0 = {x0} lies in the clamped region"));
    }
    Ok([pair.phi[i], pair.phi_prime[i], pair.theta[i], pair.theta_prime[i]])
}

/// The unique `(alpha, beta)` with `psi(x0) = psi0`, `psi'(x0) = dpsi0`.
pub fn superposition_from_initial_conditions(
    psi0: Complex64,
    dpsi0: Complex64,
    pair: &BasisPair,
    x0: f64,
) -> Result<SuperpositionCoeffs> {
    if psi0 == Complex64::new(0.0, 0.0) && dpsi0 == Complex64::new(0.0, 0.0) {
        return invalid("initial data (psi, psi') must not both vanish");
    }
    let [phi, dphi, theta, dtheta] = frame_at(pair, x0)?;
    let w = phi * dtheta - dphi * theta;
    Ok(SuperpositionCoeffs {
        alpha: (psi0 * dtheta - dpsi0 * theta) / w,
        beta: -(psi0 * dphi - dpsi0 * phi) / w,
    })
}

/// Probability-current sign `Im(conj(alpha) beta)`.
pub fn current(coeffs: &SuperpositionCoeffs) -> f64 {
    (coeffs.alpha.conj() * coeffs.beta).im
}

/// Invert initial data for the microstate consistent with the pair's
/// Wronskian. Zero-current data has no unique triple.
pub fn microstate_from_initial_conditions(
    psi0: Complex64,
    dpsi0: Complex64,
    pair: &BasisPair,
    x0: f64,
    constants: &PhysicalConstants,
) -> Result<InitialValueMicrostate> {
    constants.validate()?;
    let raw = superposition_from_initial_conditions(psi0, dpsi0, pair, x0)?;
    let j = current(&raw);
    if j.abs() <= CURRENT_TOLERANCE * raw.alpha.norm() * raw.beta.norm() {
        return Ok(InitialValueMicrostate::DegenerateFamily);
    }
    let (coeffs, direction) = if j > 0.0 {
        (raw, Direction::PositiveX)
    } else {
        (
            SuperpositionCoeffs {
                alpha: raw.alpha.conj(),
                beta: raw.beta.conj(),
            },
            Direction::NegativeX,
        )
    };
    let d = (2.0 * constants.mass).sqrt() / (constants.hbar * pair.wronskian);
    // gamma with Re(gamma alpha) = 1 and Re(gamma beta) = 0
    let det = -current(&coeffs);
    let gamma = Complex64::new(-coeffs.beta.im / det, -coeffs.beta.re / det);
    let c = 2.0 * d * (gamma * coeffs.alpha).im;
    let b = d * (gamma * coeffs.beta).im;
    let a = (d * d + 0.25 * c * c) / b;
    Ok(InitialValueMicrostate::Unique {
        microstate: Microstate::new(a, b, c)?,
        direction,
    })
}
