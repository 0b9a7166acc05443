//! AWG waveforms, oversampled trajectories, error metrics and the Ramsey
//! phase readout.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Piecewise-constant AWG waveform: `values[k]` is held on `[k tau, (k+1) tau)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AwgSignal {
    values: Vec<f64>,
    period: f64,
}

impl AwgSignal {
    pub fn new(values: Vec<f64>, period: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument(
                "AWG signal needs at least one sample",
            ));
        }
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::NonPositive("AWG period"));
        }
        Ok(Self { values, period })
    }

    /// `len` copies of `value`.
    pub fn constant(value: f64, len: usize, period: f64) -> Result<Self> {
        Self::new(alloc::vec![value; len], period)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.period * self.values.len() as f64
    }

    pub fn peak_magnitude(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    }

    /// Start time of period `k`.
    pub fn start_time(&self, k: usize) -> f64 {
        k as f64 * self.period
    }
}

/// In situ signal sampled on a grid `M` times finer than the AWG period.
///
/// Holds `N*M + 1` points covering `[0, N tau]` inclusive. The point at
/// `t = k tau` (k >= 1) is the left limit, i.e. the end of period `k-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FineTrajectory {
    values: Vec<f64>,
    fine_step: f64,
    oversampling: usize,
}

impl FineTrajectory {
    pub fn new(values: Vec<f64>, fine_step: f64, oversampling: usize) -> Result<Self> {
        if oversampling == 0 {
            return Err(Error::NonPositive("oversampling"));
        }
        if !(fine_step > 0.0) || !fine_step.is_finite() {
            return Err(Error::NonPositive("fine step"));
        }
        if values.len() < oversampling + 1 || !(values.len() - 1).is_multiple_of(oversampling) {
            return Err(Error::InvalidArgument(
                "trajectory length must be N*M + 1 with N >= 1",
            ));
        }
        Ok(Self {
            values,
            fine_step,
            oversampling,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn fine_step(&self) -> f64 {
        self.fine_step
    }

    pub fn oversampling(&self) -> usize {
        self.oversampling
    }

    /// AWG period `tau = fine_step * M`.
    pub fn period(&self) -> f64 {
        self.fine_step * self.oversampling as f64
    }

    /// Number of AWG periods covered.
    pub fn periods(&self) -> usize {
        (self.values.len() - 1) / self.oversampling
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.fine_step
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(|i| self.time(i))
    }

    pub fn duration(&self) -> f64 {
        self.time(self.values.len() - 1)
    }

    /// Same grid, new values.
    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            values,
            fine_step: self.fine_step,
            oversampling: self.oversampling,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// `amplitude * 1(t)`, switched on at `t = 0`.
    Step,
}

/// Target in situ signal `u_d(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesiredSignal {
    pub shape: Shape,
    pub amplitude: f64,
}

impl DesiredSignal {
    pub fn unit_step() -> Self {
        Self::step(1.0)
    }

    pub fn step(amplitude: f64) -> Self {
        Self {
            shape: Shape::Step,
            amplitude,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self.shape {
            Shape::Step if t >= 0.0 => self.amplitude,
            Shape::Step => 0.0,
        }
    }

    /// `integral_0^t u_d`, the ideal accumulated phase.
    pub fn integral(&self, t: f64) -> f64 {
        match self.shape {
            Shape::Step => self.amplitude * t.max(0.0),
        }
    }

    /// `u_d(k tau)` for `k = 1..=n`.
    pub fn samples(&self, tau: f64, n: usize) -> Vec<f64> {
        (1..=n).map(|k| self.value(k as f64 * tau)).collect()
    }

    /// Staircase with `u_d(k tau)` held over period `k-1`.
    pub fn staircase(&self, tau: f64, n: usize) -> Result<AwgSignal> {
        AwgSignal::new(self.samples(tau, n), tau)
    }
}

/// `u(k tau)` for `k = 1..=N`; `t = 0` is excluded.
pub fn sample_at_awg_points(traj: &FineTrajectory) -> Vec<f64> {
    let m = traj.oversampling();
    (1..=traj.periods()).map(|k| traj.values()[k * m]).collect()
}

/// `sum_k |u(k tau) - u_d(k tau)| * tau`.
pub fn sampled_error(u: &[f64], ud: &[f64], tau: f64) -> Result<f64> {
    check_lengths(u, ud)?;
    Ok(u.iter().zip(ud).map(|(a, b)| (a - b).abs()).sum::<f64>() * tau)
}

/// `sum_k (u(k tau) - u_d(k tau)) * tau`, without absolute values.
pub fn signed_sampled_error(u: &[f64], ud: &[f64], tau: f64) -> Result<f64> {
    check_lengths(u, ud)?;
    Ok(u.iter().zip(ud).map(|(a, b)| a - b).sum::<f64>() * tau)
}

fn check_lengths(u: &[f64], ud: &[f64]) -> Result<()> {
    if u.len() != ud.len() {
        return Err(Error::LengthMismatch {
            expected: ud.len(),
            found: u.len(),
        });
    }
    Ok(())
}

/// Trapezoid approximation of `integral_0^T |u - u_d| dt` on the fine grid.
pub fn continuous_error(traj: &FineTrajectory, desired: &DesiredSignal) -> f64 {
    let dev: Vec<f64> = traj
        .values()
        .iter()
        .enumerate()
        .map(|(i, u)| (u - desired.value(traj.time(i))).abs())
        .collect();
    trapezoid(&dev, traj.fine_step())
}

/// `integral |a - b| dt` for two trajectories on the same grid.
pub fn continuous_distance(a: &FineTrajectory, b: &FineTrajectory) -> Result<f64> {
    if a.len() != b.len() || a.fine_step() != b.fine_step() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let dev: Vec<f64> = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .collect();
    Ok(trapezoid(&dev, a.fine_step()))
}

/// `integral |u| dt`.
pub fn l1_norm(traj: &FineTrajectory) -> f64 {
    let abs: Vec<f64> = traj.values().iter().map(|v| v.abs()).collect();
    trapezoid(&abs, traj.fine_step())
}

/// `max_t u(t) - target`. Negative when the signal never reaches the target.
pub fn overshoot(traj: &FineTrajectory, target: f64) -> f64 {
    traj.values()
        .iter()
        .fold(f64::NEG_INFINITY, |m, v| m.max(*v))
        - target
}

fn trapezoid(values: &[f64], step: f64) -> f64 {
    values.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum::<f64>() * step
}

fn cumulative_trapezoid(values: &[f64], step: f64) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(values.len());
    out.push(0.0);
    for w in values.windows(2) {
        acc += 0.5 * (w[0] + w[1]) * step;
        out.push(acc);
    }
    out
}

/// Accumulated qubit phase `theta(t) = integral_0^t u`, on the same grid.
pub fn accumulated_phase(traj: &FineTrajectory) -> FineTrajectory {
    traj.with_values(cumulative_trapezoid(traj.values(), traj.fine_step()))
}

/// Ramsey readout `y(t) = cos theta(t)`.
pub fn ramsey_readout(theta: &FineTrajectory) -> Vec<f64> {
    theta.values().iter().map(|v| libm::cos(*v)).collect()
}

/// `theta(t) - theta_d(t)` where `theta_d` integrates the desired signal.
pub fn phase_deviation(theta: &FineTrajectory, desired: &DesiredSignal) -> Vec<f64> {
    theta
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| v - desired.integral(theta.time(i)))
        .collect()
}

/// Running `integral_0^t |u - u_d|` on the fine grid.
pub fn cumulative_abs_error(traj: &FineTrajectory, desired: &DesiredSignal) -> Vec<f64> {
    let dev: Vec<f64> = traj
        .values()
        .iter()
        .enumerate()
        .map(|(i, u)| (u - desired.value(traj.time(i))).abs())
        .collect();
    cumulative_trapezoid(&dev, traj.fine_step())
}

/// Last grid index with `theta <= pi`, i.e. the window in which a Ramsey
/// readout determines `u` uniquely. Reporting aid only.
pub fn unique_readout_window(theta: &FineTrajectory) -> usize {
    theta
        .values()
        .iter()
        .position(|v| *v > core::f64::consts::PI || *v < 0.0)
        .map_or(theta.len() - 1, |i| i.saturating_sub(1))
}
