//! Trajectory representation of one-dimensional bound and
//! scattering states.
//!
//! A real basis pair `(phi, theta)` of the time-independent Schrodinger
//! equation plus a microstate triple `(a, b, c)` fixes the conjugate momentum
//! `W'`, the characteristic function `W`, and through `t - tau = dW/dE` a
//! trajectory. [`verify`] checks the results against the stationary
//! Hamilton-Jacobi equation and against the wave function.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod model;
pub mod qhj;
pub mod schrodinger;
pub mod trajectory;
pub mod verify;

pub use error::{QhjError, Result};
pub use model::{Grid, PhysicalConstants, Potential};
pub use qhj::{
    characteristic_function, conjugate_momentum, microstate_from_initial_conditions, microstate_to_superposition,
    reconstruct_polar, reconstruct_trig, superposition_from_initial_conditions, CharacteristicFunction, Direction,
    InitialValueMicrostate, Microstate, MomentumField, SuperpositionCoeffs, random_microstates,
};
pub use schrodinger::{find_eigenvalue, integrate_pair, scale_wronskian, AnchorConditions, BasisPair, EigenSolution};
pub use trajectory::{sample_trajectory, time_of_transit, Convention, TrajectoryCurve, TransitOptions};
