//! Browser demo bindings. Each export returns a JSON document; the plain
//! functions in [`demo`] hold the logic so it can be tested natively.

use wasm_bindgen::prelude::*;

pub mod demo {
    use std::f64::consts::PI;

    use num_complex::Complex64;
    use serde_json::{json, Value};

    use qhj_core::schrodinger::auto_bracket;
    use qhj_core::{
        characteristic_function, conjugate_momentum, find_eigenvalue, microstate_from_initial_conditions,
        reconstruct_trig, sample_trajectory, scale_wronskian, time_of_transit, BasisPair, Grid, InitialValueMicrostate,
        Microstate, PhysicalConstants, Potential, Result, TransitOptions,
    };

    fn unit() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    fn well() -> Potential {
        Potential::InfiniteWell { width: PI }
    }

    fn well_grid() -> Grid {
        Grid::new(0.0, PI, 401).expect("fixed grid")
    }

    /// Drop clamped samples to `null` so the page can skip them.
    fn finite(v: &[f64]) -> Vec<Value> {
        v.iter().map(|x| if x.is_finite() { json!(x) } else { Value::Null }).collect()
    }

    fn peak_normalized(v: &[f64]) -> Vec<f64> {
        let peak = v.iter().copied().fold(0.0f64, |p, x| if x.abs() > p.abs() { x } else { p });
        v.iter().map(|x| x / peak).collect()
    }

    /// Level `n` of `potential` (`harmonic` or `well`), its trigonometric
    /// reconstruction for `(a, b, c)`, and `W'`, `W`.
    pub fn explore(potential: &str, level: usize, a: f64, b: f64, c: f64) -> Result<Value> {
        let ms = Microstate::new(a, b, c)?;
        let (pot, base, grid) = match potential {
            "well" => {
                let e = well().exact_level(level, &unit()).expect("well levels are closed form");
                let grid = well_grid();
                (well(), BasisPair::free_sine(well(), unit(), e, grid)?, grid)
            }
            _ => {
                let pot = Potential::Harmonic { stiffness: 1.0 };
                let grid = Grid::new(-7.0, 7.0, 2801)?;
                let eigen = find_eigenvalue(pot, unit(), level, grid, auto_bracket(&pot, &unit(), level, &grid)?)?;
                (pot, BasisPair::from_eigen(&eigen, pot, unit())?, grid)
            }
        };
        let pair = scale_wronskian(&base, &ms, &unit())?;
        let wp = conjugate_momentum(&pair, &ms)?;
        let cf = characteristic_function(&pair, &ms, 0.0)?;
        let phi = peak_normalized(&pair.phi[pair.valid.clone()]);
        let trig = peak_normalized(&reconstruct_trig(&pair, &ms)?);
        let deviation = phi.iter().zip(&trig).map(|(p, t)| (p - t).abs()).fold(0.0, f64::max);
        let mut full_phi = vec![f64::NAN; grid.len()];
        let mut full_trig = vec![f64::NAN; grid.len()];
        full_phi[pair.valid.clone()].copy_from_slice(&phi);
        full_trig[pair.valid.clone()].copy_from_slice(&trig);
        let v: Vec<f64> = grid.points().iter().map(|&x| pot.eval(x).unwrap_or(f64::NAN)).collect();
        Ok(json!({
            "energy": pair.energy,
            "deviation": deviation,
            "x": grid.points(),
            "V": finite(&v),
            "phi": finite(&full_phi),
            "trig": finite(&full_trig),
            "Wp": finite(&wp.samples),
            "W": finite(&cf.samples),
        }))
    }

    /// `t(x)` in the infinite well for two microstates at energy `E`, with
    /// the closed-form `sin`/`cos` basis family.
    pub fn trajectories(first: [f64; 3], second: [f64; 3], energy: f64) -> Result<Value> {
        let grid = well_grid();
        let opts = TransitOptions::closed_form();
        let mut curves = Vec::new();
        for [a, b, c] in [first, second] {
            let ms = Microstate::new(a, b, c)?;
            let curve = time_of_transit(&well(), &unit(), &ms, energy, &grid, &opts)?;
            curves.push(sample_trajectory(&curve));
        }
        let diff = curves[0]
            .iter()
            .zip(&curves[1])
            .map(|(p, q)| (p.1 - q.1).abs())
            .fold(0.0, f64::max);
        let t = |k: usize| curves[k].iter().map(|p| p.1).collect::<Vec<_>>();
        Ok(json!({
            "x": curves[0].iter().map(|p| p.0).collect::<Vec<_>>(),
            "t1": t(0),
            "t2": t(1),
            "max_difference": diff,
        }))
    }

    /// Microstate selected by `psi(x0)`, `psi'(x0)` in the infinite well at
    /// energy `E`, where `x0` is the first maximum of `sin(kx)`.
    pub fn invert(psi0: Complex64, dpsi0: Complex64, energy: f64) -> Result<Value> {
        let grid = well_grid();
        let base = BasisPair::free_sine(well(), unit(), energy, grid)?;
        let x0 = base.anchor_x0;
        Ok(match microstate_from_initial_conditions(psi0, dpsi0, &base, x0, &unit())? {
            InitialValueMicrostate::DegenerateFamily => json!({ "outcome": "degenerate-family", "x0": x0 }),
            InitialValueMicrostate::Unique { microstate: ms, direction } => {
                let pair = scale_wronskian(&base, &ms, &unit())?;
                let wp = conjugate_momentum(&pair, &ms)?;
                json!({
                    "outcome": "unique",
                    "x0": x0,
                    "a": ms.a,
                    "b": ms.b,
                    "c": ms.c,
                    "direction": direction,
                    "x": grid.points(),
                    "Wp": finite(&wp.samples),
                })
            }
        })
    }
}

fn to_js(r: qhj_core::Result<serde_json::Value>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e.to_string()))
}

/// JSON with `x`, `V`, `phi`, `trig`, `Wp`, `W`, `energy`, `deviation`.
#[wasm_bindgen]
pub fn explore_microstate(potential: &str, level: u32, a: f64, b: f64, c: f64) -> Result<String, JsError> {
    to_js(demo::explore(potential, level as usize, a, b, c))
}

/// JSON with `x`, `t1`, `t2`, `max_difference`.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn well_trajectories(a1: f64, b1: f64, c1: f64, a2: f64, b2: f64, c2: f64, energy: f64) -> Result<String, JsError> {
    to_js(demo::trajectories([a1, b1, c1], [a2, b2, c2], energy))
}

/// JSON with `outcome` and, when unique, `a`, `b`, `c`, `direction`, `x`, `Wp`.
#[wasm_bindgen]
pub fn invert_initial_value(psi_re: f64, psi_im: f64, dpsi_re: f64, dpsi_im: f64, energy: f64) -> Result<String, JsError> {
    to_js(demo::invert(
        num_complex::Complex64::new(psi_re, psi_im),
        num_complex::Complex64::new(dpsi_re, dpsi_im),
        energy,
    ))
}
