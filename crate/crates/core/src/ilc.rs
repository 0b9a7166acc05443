//! Iterative deconvolution: `r <- r + beta * Lbar^-1 e`, run against the
//! simulated plant, plus the one-shot deconvolution baseline.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lifted::{LiftedModel, Lifting};
use crate::lti::TransferFunction;
use crate::matrix::Matrix;
use crate::plant::Plant;
use crate::signal::{
    continuous_error, sample_at_awg_points, sampled_error, signed_sampled_error, AwgSignal,
    DesiredSignal, FineTrajectory,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SnapshotPolicy {
    /// Keep AWG snapshots of iterations 0, 2 and the last one.
    #[default]
    Sparse,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationConfig {
    /// `beta`.
    pub learning_rate: f64,
    /// Number of updates allowed; the history holds up to `max_iterations + 1` records.
    pub max_iterations: usize,
    /// Stop once the sampled error is at or below this.
    pub sample_error_tolerance: f64,
    /// Stop once the sampled error exceeds this multiple of the initial one.
    pub divergence_factor: f64,
    /// Largest `|r|` an update may produce.
    pub amplitude_guard: f64,
    /// Fine grid points per AWG period.
    pub oversampling: usize,
    /// Discretization of the reference model.
    pub lifting: Lifting,
    pub snapshots: SnapshotPolicy,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            max_iterations: 100,
            sample_error_tolerance: 1e-13,
            divergence_factor: 1e3,
            amplitude_guard: 1e6,
            oversampling: 20,
            lifting: Lifting::StepIncrement,
            snapshots: SnapshotPolicy::Sparse,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && !v.is_nan();
        if !positive(self.learning_rate) || !self.learning_rate.is_finite() {
            return Err(Error::NonPositive("learning rate"));
        }
        if self.max_iterations == 0 {
            return Err(Error::NonPositive("max iterations"));
        }
        if !positive(self.sample_error_tolerance) {
            return Err(Error::NonPositive("sample error tolerance"));
        }
        if !positive(self.divergence_factor) {
            return Err(Error::NonPositive("divergence factor"));
        }
        if !positive(self.amplitude_guard) {
            return Err(Error::NonPositive("amplitude guard"));
        }
        if self.oversampling == 0 {
            return Err(Error::NonPositive("oversampling"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub index: usize,
    pub sampled_error: f64,
    /// Sampled error without absolute values; can cancel.
    pub signed_sampled_error: f64,
    pub continuous_error: f64,
    pub awg_snapshot: Option<AwgSignal>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibrationStatus {
    Converged,
    MaxIterations,
    Diverged,
    AmplitudeCapped,
}

impl CalibrationStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            CalibrationStatus::Converged => "converged",
            CalibrationStatus::MaxIterations => "max_iterations",
            CalibrationStatus::Diverged => "diverged",
            CalibrationStatus::AmplitudeCapped => "amplitude_capped",
        }
    }
}

impl core::fmt::Display for CalibrationStatus {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub final_awg: AwgSignal,
    pub final_trajectory: FineTrajectory,
    pub history: Vec<IterationRecord>,
    pub status: CalibrationStatus,
}

impl CalibrationResult {
    pub fn last(&self) -> &IterationRecord {
        self.history.last().expect("history is never empty")
    }

    pub fn final_sampled_error(&self) -> f64 {
        self.last().sampled_error
    }

    pub fn final_continuous_error(&self) -> f64 {
        self.last().continuous_error
    }

    /// Number of updates applied to reach the final waveform.
    pub fn iterations(&self) -> usize {
        self.last().index
    }

    pub fn sampled_errors(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.sampled_error).collect()
    }

    pub fn continuous_errors(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.continuous_error).collect()
    }

    /// First iteration whose sampled error is at or below `level`.
    pub fn first_iteration_below(&self, level: f64) -> Option<usize> {
        self.history
            .iter()
            .find(|r| r.sampled_error <= level)
            .map(|r| r.index)
    }
}

/// `r + beta * Lbar^-1 e`.
pub fn ilc_update(
    r: &AwgSignal,
    error_samples: &[f64],
    reference: &LiftedModel,
    beta: f64,
) -> Result<AwgSignal> {
    if r.len() != error_samples.len() {
        return Err(Error::LengthMismatch {
            expected: r.len(),
            found: error_samples.len(),
        });
    }
    let correction = reference.deconvolve(error_samples)?;
    let values = r
        .values()
        .iter()
        .zip(&correction)
        .map(|(v, c)| v + beta * c)
        .collect();
    AwgSignal::new(values, r.period())
}

struct Measurement {
    trajectory: FineTrajectory,
    error: Vec<f64>,
    sampled: f64,
    signed: f64,
    continuous: f64,
}

fn measure(
    plant: &Plant,
    r: &AwgSignal,
    desired_samples: &[f64],
    desired: &DesiredSignal,
    oversampling: usize,
) -> Result<Measurement> {
    let trajectory = plant.simulate(r, oversampling)?;
    let samples = sample_at_awg_points(&trajectory);
    let error = desired_samples
        .iter()
        .zip(&samples)
        .map(|(d, u)| d - u)
        .collect();
    let tau = r.period();
    Ok(Measurement {
        sampled: sampled_error(&samples, desired_samples, tau)?,
        signed: signed_sampled_error(&samples, desired_samples, tau)?,
        continuous: continuous_error(&trajectory, desired),
        trajectory,
        error,
    })
}

/// Runs the learning loop from `initial_awg`.
///
/// Each pass simulates the plant, measures the error at the sample points,
/// records both error metrics and then checks, in order: tolerance,
/// amplitude guard on the candidate update, divergence factor, iteration
/// budget. Loop failures end up in the status; `Err` is reserved for invalid
/// inputs (bad config, singular reference).
pub fn run_calibration(
    plant: &Plant,
    reference: &TransferFunction,
    desired: &DesiredSignal,
    config: &CalibrationConfig,
    initial_awg: &AwgSignal,
) -> Result<CalibrationResult> {
    config.validate()?;
    let tau = initial_awg.period();
    let horizon = initial_awg.len();
    let lifted = LiftedModel::build_with(reference, tau, horizon, config.lifting)?;
    let desired_samples = desired.samples(tau, horizon);

    let mut r = initial_awg.clone();
    let mut current = measure(plant, &r, &desired_samples, desired, config.oversampling)?;
    let initial_error = current.sampled;
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut index = 0;

    let status = loop {
        let keep = match config.snapshots {
            SnapshotPolicy::All => true,
            SnapshotPolicy::Sparse => index == 0 || index == 2,
        };
        history.push(IterationRecord {
            index,
            sampled_error: current.sampled,
            signed_sampled_error: current.signed,
            continuous_error: current.continuous,
            awg_snapshot: keep.then(|| r.clone()),
        });

        if current.sampled <= config.sample_error_tolerance {
            break CalibrationStatus::Converged;
        }
        let candidate = match ilc_update(&r, &current.error, &lifted, config.learning_rate) {
            Ok(next) if next.peak_magnitude() <= config.amplitude_guard => next,
            Ok(_) | Err(Error::InverseOverflow { .. }) => break CalibrationStatus::AmplitudeCapped,
            Err(e) => return Err(e),
        };
        if initial_error > 0.0 && current.sampled > config.divergence_factor * initial_error {
            break CalibrationStatus::Diverged;
        }
        if index >= config.max_iterations {
            break CalibrationStatus::MaxIterations;
        }

        let next = measure(
            plant,
            &candidate,
            &desired_samples,
            desired,
            config.oversampling,
        )?;
        if !next.sampled.is_finite()
            || !next.continuous.is_finite()
            || next.trajectory.values().iter().any(|v| !v.is_finite())
        {
            break CalibrationStatus::Diverged;
        }
        r = candidate;
        current = next;
        index += 1;
    };

    if let Some(last) = history.last_mut() {
        last.awg_snapshot = Some(r.clone());
    }
    Ok(CalibrationResult {
        final_awg: r,
        final_trajectory: current.trajectory,
        history,
        status,
    })
}

/// Single-shot `r = Lbar^-1 u_d`, simulated once.
///
/// The history holds one record; the status is `Converged` when the sampled
/// error is within `tolerance`, `MaxIterations` otherwise (the one-shot
/// budget is spent).
#[allow(clippy::too_many_arguments)]
pub fn deconvolution_baseline(
    plant: &Plant,
    reference: &TransferFunction,
    desired: &DesiredSignal,
    tau: f64,
    horizon: usize,
    oversampling: usize,
    lifting: Lifting,
    tolerance: f64,
) -> Result<CalibrationResult> {
    let lifted = LiftedModel::build_with(reference, tau, horizon, lifting)?;
    let desired_samples = desired.samples(tau, horizon);
    let r = AwgSignal::new(lifted.deconvolve(&desired_samples)?, tau)?;
    let m = measure(plant, &r, &desired_samples, desired, oversampling)?;
    let status = if m.sampled <= tolerance {
        CalibrationStatus::Converged
    } else {
        CalibrationStatus::MaxIterations
    };
    Ok(CalibrationResult {
        history: alloc::vec![IterationRecord {
            index: 0,
            sampled_error: m.sampled,
            signed_sampled_error: m.signed,
            continuous_error: m.continuous,
            awg_snapshot: Some(r.clone()),
        }],
        final_awg: r,
        final_trajectory: m.trajectory,
        status,
    })
}

/// Dense lifted error-propagation operator `I - beta L_G Lbar^-1`.
///
/// The plant is always lifted exactly (ZOH); the reference uses `lifting`.
pub fn iteration_operator(
    plant_model: &TransferFunction,
    reference: &TransferFunction,
    tau: f64,
    horizon: usize,
    beta: f64,
    lifting: Lifting,
) -> Result<Matrix> {
    let lg = LiftedModel::build(plant_model, tau, horizon)?;
    let lr = LiftedModel::build_with(reference, tau, horizon, lifting)?;
    let mut op = Matrix::identity(horizon);
    // column j of L_G Lbar^-1 is L_G (Lbar^-1 e_j)
    for j in 0..horizon {
        let mut unit = alloc::vec![0.0; horizon];
        unit[j] = 1.0;
        let col = lg.apply(&lr.deconvolve_with_guard(&unit, f64::INFINITY)?)?;
        for (i, v) in col.iter().enumerate() {
            op[(i, j)] -= beta * v;
        }
    }
    Ok(op)
}

/// Spectral radius of `I - beta L_G Lbar^-1` with the default lifting.
pub fn error_contraction_check(
    plant_model: &TransferFunction,
    reference: &TransferFunction,
    tau: f64,
    horizon: usize,
    beta: f64,
) -> Result<f64> {
    error_contraction_check_with(
        plant_model,
        reference,
        tau,
        horizon,
        beta,
        Lifting::StepIncrement,
    )
}

pub fn error_contraction_check_with(
    plant_model: &TransferFunction,
    reference: &TransferFunction,
    tau: f64,
    horizon: usize,
    beta: f64,
    lifting: Lifting,
) -> Result<f64> {
    let op = iteration_operator(plant_model, reference, tau, horizon, beta, lifting)?;
    // products and inverses of lower-triangular Toeplitz matrices stay
    // lower-triangular, so the eigenvalues sit on the diagonal
    Ok((0..horizon).map(|i| op[(i, i)].abs()).fold(0.0, f64::max))
}
