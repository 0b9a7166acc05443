//! Simulation and iterative-deconvolution calibration of AWG control pulses
//! distorted by a continuous-time LTI channel.
//!
//! The crate is `no_std` (it needs `alloc`). Everything is a pure function of
//! immutable values, so runs can be fanned out across threads freely.
//!
//! Layering, bottom up:
//!
//! - [`lti`]: transfer functions, realization, exact ZOH discretization;
//! - [`signal`]: AWG waveforms, oversampled trajectories, error metrics;
//! - [`plant`]: the true channel (LTI plus optional saturation);
//! - [`lifted`]: lower-triangular Toeplitz models and their inverse;
//! - [`ilc`]: the learning loop and the one-shot deconvolution baseline;
//! - [`analysis`]: phase-margin stability check, inter-sample oscillation
//!   fits and parameter sweeps.
#![no_std]
// NaN-rejecting `!(x > 0.0)` checks and index loops over small dense matrices are intentional
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod analysis;
pub mod error;
pub mod ilc;
pub mod lifted;
pub mod lti;
pub mod matrix;
pub mod plant;
pub mod signal;

pub use error::{Error, Result};
pub use ilc::{
    CalibrationConfig, CalibrationResult, CalibrationStatus, IterationRecord, SnapshotPolicy,
};
pub use lifted::{LiftedModel, Lifting};
pub use lti::{DiscreteStateSpace, StateSpace, TransferFunction};
pub use plant::{Nonlinearity, Placement, Plant};
pub use signal::{AwgSignal, DesiredSignal, FineTrajectory};
