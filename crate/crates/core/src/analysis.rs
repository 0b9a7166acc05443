//! Stability pre-check, inter-sample oscillation characterization and the
//! second-order parameter sweeps.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::ilc::{run_calibration, CalibrationConfig, CalibrationStatus};
use crate::lti::TransferFunction;
use crate::plant::Plant;
use crate::signal::{overshoot, DesiredSignal, FineTrajectory};

/// Phase gap (degrees) beyond which the learning loop is predicted unstable.
pub const PHASE_LIMIT_DEG: f64 = 90.0;
/// Half-width of the band around [`PHASE_LIMIT_DEG`] reported as marginal.
pub const MARGINAL_BAND_DEG: f64 = 10.0;
/// Points on the logarithmic frequency grid.
pub const PHASE_GRID_POINTS: usize = 256;
/// Extrema smaller than this are ignored by [`fit_oscillation`].
pub const OSCILLATION_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityVerdict {
    Stable,
    Marginal,
    Unstable,
}

impl StabilityVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            StabilityVerdict::Stable => "stable",
            StabilityVerdict::Marginal => "marginal",
            StabilityVerdict::Unstable => "unstable",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseComparison {
    /// Ascending, rad / time unit.
    pub frequencies: Vec<f64>,
    /// Unwrapped phase of the true plant, degrees.
    pub phase_true: Vec<f64>,
    /// Unwrapped phase of the reference model, degrees.
    pub phase_model: Vec<f64>,
    /// Unwrapped phase of `G / Gbar`, degrees.
    pub difference: Vec<f64>,
    pub max_abs_difference: f64,
    /// `max_abs_difference < 90`.
    pub stable_prediction: bool,
    pub verdict: StabilityVerdict,
}

/// Compares the phases of `G(i w)` and `Gbar(i w)` on a log grid from a tenth
/// of the horizon's fundamental, `2 pi / (10 N tau)`, up to Nyquist `pi / tau`.
pub fn phase_stability_check(
    true_plant: &TransferFunction,
    reference: &TransferFunction,
    tau: f64,
    horizon: usize,
) -> Result<PhaseComparison> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::NonPositive("sampling period"));
    }
    if horizon == 0 {
        return Err(Error::NonPositive("horizon"));
    }
    let lo = 2.0 * PI / (horizon as f64 * tau * 10.0);
    let hi = PI / tau;
    let frequencies = log_grid(lo, hi, PHASE_GRID_POINTS);

    let mut g = Vec::with_capacity(frequencies.len());
    let mut gbar = Vec::with_capacity(frequencies.len());
    let mut ratio = Vec::with_capacity(frequencies.len());
    for &w in &frequencies {
        let a = true_plant.frequency_response(w)?;
        let b = reference.frequency_response(w)?;
        g.push(a.arg());
        gbar.push(b.arg());
        ratio.push((a / b).arg());
    }
    let phase_true = unwrap_degrees(&g);
    let phase_model = unwrap_degrees(&gbar);
    let difference = unwrap_degrees(&ratio);
    let max_abs_difference = difference.iter().fold(0.0, |m, d| f64::max(m, d.abs()));
    let verdict = if (max_abs_difference - PHASE_LIMIT_DEG).abs() <= MARGINAL_BAND_DEG {
        StabilityVerdict::Marginal
    } else if max_abs_difference < PHASE_LIMIT_DEG {
        StabilityVerdict::Stable
    } else {
        StabilityVerdict::Unstable
    };
    Ok(PhaseComparison {
        frequencies,
        phase_true,
        phase_model,
        difference,
        max_abs_difference,
        stable_prediction: max_abs_difference < PHASE_LIMIT_DEG,
        verdict,
    })
}

fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (libm::log(lo), libm::log(hi));
    (0..points)
        .map(|i| libm::exp(a + (b - a) * i as f64 / (points - 1) as f64))
        .collect()
}

/// Radians in, continuous degrees out: each step is shifted by whole turns
/// so that consecutive values differ by at most half a turn.
fn unwrap_degrees(radians: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(radians.len());
    let mut offset = 0.0;
    let mut previous: Option<f64> = None;
    for &p in radians {
        if let Some(prev) = previous {
            let mut jump = p + offset - prev;
            while jump > PI {
                offset -= 2.0 * PI;
                jump -= 2.0 * PI;
            }
            while jump < -PI {
                offset += 2.0 * PI;
                jump += 2.0 * PI;
            }
        }
        let value = p + offset;
        previous = Some(value);
        out.push(value.to_degrees());
    }
    out
}

/// Least-squares fit of `target + A exp(-t / Ts) sin(2 pi t / T)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationFit {
    pub overshoot_amplitude: f64,
    pub decay_time: f64,
    pub period: f64,
    /// RMS residual over the fitted points.
    pub residual: f64,
}

impl OscillationFit {
    pub fn eval(&self, t: f64, target: f64) -> f64 {
        target
            + self.overshoot_amplitude
                * libm::exp(-t / self.decay_time)
                * libm::sin(2.0 * PI * t / self.period)
    }
}

/// Fits the damped oscillation of `traj` around `settle_target` after the
/// first AWG period.
///
/// Initial guess from the extrema (period = twice the mean spacing, decay
/// from a log-linear fit of the peak magnitudes, amplitude by linear least
/// squares), then Levenberg-Marquardt on all points with `t > tau`.
pub fn fit_oscillation(traj: &FineTrajectory, settle_target: f64) -> Result<OscillationFit> {
    let start = traj.oversampling() + 1;
    let times: Vec<f64> = (start..traj.len()).map(|i| traj.time(i)).collect();
    let dev: Vec<f64> = traj.values()[start..]
        .iter()
        .map(|u| u - settle_target)
        .collect();

    let extrema: Vec<usize> = (1..dev.len().saturating_sub(1))
        .filter(|&i| {
            let (a, b, c) = (dev[i - 1], dev[i], dev[i + 1]);
            let is_max = b > a && b >= c;
            let is_min = b < a && b <= c;
            (is_max || is_min) && b.abs() > OSCILLATION_FLOOR
        })
        .collect();
    if extrema.len() < 3 {
        return Err(Error::NoOscillation {
            extrema: extrema.len(),
        });
    }

    let spacing =
        (times[*extrema.last().unwrap()] - times[extrema[0]]) / (extrema.len() - 1) as f64;
    let period = 2.0 * spacing;

    let xs: Vec<f64> = extrema.iter().map(|&i| times[i]).collect();
    let ys: Vec<f64> = extrema.iter().map(|&i| libm::log(dev[i].abs())).collect();
    let (slope, _) = linear_fit(&xs, &ys);
    if !(slope < 0.0) {
        return Err(Error::InvalidArgument("oscillation does not decay"));
    }
    let decay_time = -1.0 / slope;

    let basis = |t: f64, ts: f64, p: f64| libm::exp(-t / ts) * libm::sin(2.0 * PI * t / p);
    let (num, den) = times.iter().zip(&dev).fold((0.0, 0.0), |(n, d), (t, y)| {
        let phi = basis(*t, decay_time, period);
        (n + phi * y, d + phi * phi)
    });
    let amplitude = if den > 0.0 { num / den } else { 0.0 };

    let params = levenberg_marquardt(&times, &dev, [amplitude, decay_time, period]);
    let [a, ts, p] = params;
    let sse: f64 = times
        .iter()
        .zip(&dev)
        .map(|(t, y)| {
            let r = a * basis(*t, ts, p) - y;
            r * r
        })
        .sum();
    Ok(OscillationFit {
        overshoot_amplitude: a,
        decay_time: ts,
        period: p,
        residual: libm::sqrt(sse / times.len() as f64),
    })
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn levenberg_marquardt(times: &[f64], ys: &[f64], start: [f64; 3]) -> [f64; 3] {
    let cost = |p: &[f64; 3]| -> f64 {
        times
            .iter()
            .zip(ys)
            .map(|(t, y)| {
                let r = p[0] * libm::exp(-t / p[1]) * libm::sin(2.0 * PI * t / p[2]) - y;
                r * r
            })
            .sum()
    };
    let mut p = start;
    let mut current = cost(&p);
    let mut lambda = 1e-3;
    for _ in 0..500 {
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (t, y) in times.iter().zip(ys) {
            let e = libm::exp(-t / p[1]);
            let arg = 2.0 * PI * t / p[2];
            let (s, c) = (libm::sin(arg), libm::cos(arg));
            let r = p[0] * e * s - y;
            let j = [
                e * s,
                p[0] * e * s * t / (p[1] * p[1]),
                -p[0] * e * c * arg / p[2],
            ];
            for a in 0..3 {
                jtr[a] += j[a] * r;
                for b in 0..3 {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }

        let mut improved = false;
        while lambda < 1e16 {
            let mut m = jtj;
            for (a, row) in m.iter_mut().enumerate() {
                row[a] += lambda * jtj[a][a].max(1e-300);
            }
            let rhs = [-jtr[0], -jtr[1], -jtr[2]];
            if let Some(step) = solve3(m, rhs) {
                let trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2]];
                if trial[1] > 0.0 && trial[2] > 0.0 {
                    let c = cost(&trial);
                    if c < current {
                        let settled = current - c <= 1e-15 * current;
                        p = trial;
                        current = c;
                        lambda = (lambda / 3.0).max(1e-12);
                        improved = !settled;
                        break;
                    }
                }
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    p
}

fn solve3(mut m: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col] == 0.0 || !m[pivot][col].is_finite() {
            return None;
        }
        m.swap(pivot, col);
        b.swap(pivot, col);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let acc: f64 = (row + 1..3).map(|k| m[row][k] * x[k]).sum();
        x[row] = (b[row] - acc) / m[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Overshoot and fitted decay time over a `(T1, T2)` grid.
///
/// `overshoot[i][j]` and `decay_time[i][j]` belong to
/// `(t1_values[i], t2_values[j])`. Cells without oscillation get a decay time
/// of 0; cells whose calibration does not converge are NaN and counted in
/// `failed_cells`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub t1_values: Vec<f64>,
    pub t2_values: Vec<f64>,
    pub overshoot: Vec<Vec<f64>>,
    pub decay_time: Vec<Vec<f64>>,
    pub failed_cells: usize,
}

impl SweepGrid {
    /// Cells smaller than their predecessor along either axis. NaN cells are
    /// skipped.
    pub fn decreasing_steps(values: &[Vec<f64>]) -> usize {
        let mut count = 0;
        for (i, row) in values.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if j > 0 && *v < row[j - 1] {
                    count += 1;
                }
                if i > 0 && *v < values[i - 1][j] {
                    count += 1;
                }
            }
        }
        count
    }
}

/// Inter-sample behavior of one calibrated second-order plant.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub overshoot: f64,
    pub decay_time: f64,
    pub fit: Option<OscillationFit>,
    pub trajectory: FineTrajectory,
}

/// Calibrates `1/((T1 s + 1)(T2 s + 1))` against itself from the unit-step
/// staircase and extracts its inter-sample oscillation.
pub fn second_order_cell(
    t1: f64,
    t2: f64,
    tau: f64,
    horizon: usize,
    config: &CalibrationConfig,
) -> Result<Option<SweepCell>> {
    if !(t1 > 0.0) || !(t2 > 0.0) {
        return Err(Error::NonPositive("time constant"));
    }
    let g = TransferFunction::from_time_constants(1.0, &[], &[t1, t2])?;
    let desired = DesiredSignal::unit_step();
    let initial = desired.staircase(tau, horizon)?;
    let res = run_calibration(&Plant::linear(g.clone()), &g, &desired, config, &initial)?;
    if res.status != CalibrationStatus::Converged {
        return Ok(None);
    }
    let traj = res.final_trajectory;
    let fit = match fit_oscillation(&traj, 1.0) {
        Ok(fit) => Some(fit),
        Err(Error::NoOscillation { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(Some(SweepCell {
        overshoot: overshoot(&traj, 1.0),
        decay_time: fit.map_or(0.0, |f| f.decay_time),
        fit,
        trajectory: traj,
    }))
}

pub fn sweep_second_order(
    t1_values: &[f64],
    t2_values: &[f64],
    tau: f64,
    horizon: usize,
    config: &CalibrationConfig,
) -> Result<SweepGrid> {
    if t1_values.iter().chain(t2_values).any(|t| !(*t > 0.0)) {
        return Err(Error::NonPositive("time constant"));
    }
    let mut overshoot_grid = Vec::with_capacity(t1_values.len());
    let mut decay_grid = Vec::with_capacity(t1_values.len());
    let mut failed_cells = 0;
    for &t1 in t1_values {
        let mut o_row = Vec::with_capacity(t2_values.len());
        let mut d_row = Vec::with_capacity(t2_values.len());
        for &t2 in t2_values {
            match second_order_cell(t1, t2, tau, horizon, config) {
                Ok(Some(cell)) => {
                    o_row.push(cell.overshoot);
                    d_row.push(cell.decay_time);
                }
                Ok(None) | Err(_) => {
                    failed_cells += 1;
                    o_row.push(f64::NAN);
                    d_row.push(f64::NAN);
                }
            }
        }
        overshoot_grid.push(o_row);
        decay_grid.push(d_row);
    }
    Ok(SweepGrid {
        t1_values: t1_values.to_vec(),
        t2_values: t2_values.to_vec(),
        overshoot: overshoot_grid,
        decay_time: decay_grid,
        failed_cells,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirstOrderReport {
    /// `max |u(t) - 1|` over `(tau, N tau]`.
    pub max_deviation: f64,
    /// `R_1`, the drive over the first period.
    pub first_value: f64,
    /// `h(tau)` of the plant; `R_1 = 1 / h(tau)` at convergence.
    pub first_step_response: f64,
    /// `max - min` of `R_2..R_N`.
    pub plateau_spread: f64,
    pub status: CalibrationStatus,
}

/// Calibrates `1/(T s + 1)` against itself. `T = 0` is the identity plant.
pub fn first_order_exactness(
    time_constant: f64,
    tau: f64,
    horizon: usize,
    config: &CalibrationConfig,
) -> Result<FirstOrderReport> {
    if !(time_constant >= 0.0) {
        return Err(Error::InvalidArgument("time constant must be non-negative"));
    }
    let g = TransferFunction::from_time_constants(1.0, &[], &[time_constant])?;
    let desired = DesiredSignal::unit_step();
    let initial = desired.staircase(tau, horizon)?;
    let res = run_calibration(&Plant::linear(g.clone()), &g, &desired, config, &initial)?;

    let m = res.final_trajectory.oversampling();
    let max_deviation = res.final_trajectory.values()[m + 1..]
        .iter()
        .fold(0.0, |acc, u| f64::max(acc, (u - 1.0).abs()));
    let r = res.final_awg.values();
    let (lo, hi) = r[1..]
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        });
    let plateau_spread = if r.len() > 1 { hi - lo } else { 0.0 };
    let h_tau = g.to_state_space().step_response(&[tau])?[0];
    Ok(FirstOrderReport {
        max_deviation,
        first_value: r[0],
        first_step_response: h_tau,
        plateau_spread,
        status: res.status,
    })
}
