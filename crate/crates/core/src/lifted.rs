//! Finite-horizon lifted form of a model at the AWG rate.
//!
//! The lifted matrix maps the AWG values `r_0..r_{N-1}` to the sample-point
//! outputs `u(tau)..u(N tau)`. It is lower-triangular Toeplitz, so it is
//! stored by its first column (the Markov coefficients) and inverted by
//! forward substitution.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lti::{dot, TransferFunction};
use crate::matrix::Matrix;

/// Default bound on `|r|` accepted from [`LiftedModel::deconvolve`].
pub const DEFAULT_INVERSE_GUARD: f64 = 1e6;

/// Smallest `|m_1|` accepted as invertible.
pub const SINGULARITY_FLOOR: f64 = 1e-12;

/// How the Markov coefficients of a model are read off at the AWG rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Lifting {
    /// Exact under zero-order hold: `m_1 = h(tau)`,
    /// `m_i = h(i tau) - h((i-1) tau)` with `h` the unit-step response.
    #[default]
    StepIncrement,
    /// Sampled impulse response: `m_i = g(i tau) tau` (plus `D` in `m_1`).
    ///
    /// Not exact for piecewise-constant input, but keeps the sign of the
    /// leading coefficient for models whose step response starts with an
    /// undershoot longer than one period, where the exact lifting would flip
    /// it.
    ImpulseSampled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftedModel {
    markov: Vec<f64>,
    period: f64,
}

impl LiftedModel {
    pub fn from_markov(markov: Vec<f64>, period: f64) -> Result<Self> {
        if markov.is_empty() {
            return Err(Error::InvalidArgument("lifted horizon must be at least 1"));
        }
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::NonPositive("lifted period"));
        }
        if markov.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidCoefficients("non-finite Markov coefficient"));
        }
        Ok(Self { markov, period })
    }

    /// Exact ZOH lifting of `model` over `horizon` periods of length `tau`.
    pub fn build(model: &TransferFunction, tau: f64, horizon: usize) -> Result<Self> {
        Self::build_with(model, tau, horizon, Lifting::StepIncrement)
    }

    pub fn build_with(
        model: &TransferFunction,
        tau: f64,
        horizon: usize,
        lifting: Lifting,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidArgument("lifted horizon must be at least 1"));
        }
        let ss = model.to_state_space();
        let disc = ss.discretize_zoh(tau)?;
        let n = ss.order();
        let mut markov = Vec::with_capacity(horizon);
        match lifting {
            Lifting::StepIncrement => {
                let mut x = alloc::vec![0.0; n];
                let mut next = alloc::vec![0.0; n];
                let mut previous = 0.0;
                for _ in 0..horizon {
                    disc.advance(&x, 1.0, &mut next);
                    core::mem::swap(&mut x, &mut next);
                    let h = disc.output(&x, 1.0);
                    markov.push(h - previous);
                    previous = h;
                }
            }
            Lifting::ImpulseSampled => {
                // x_i = Ad^i B, g(i tau) = C x_i
                let mut x = ss.b.clone();
                let mut next = alloc::vec![0.0; n];
                for i in 0..horizon {
                    disc.advance(&x, 0.0, &mut next);
                    core::mem::swap(&mut x, &mut next);
                    let mut m = dot(&ss.c, &x) * tau;
                    if i == 0 {
                        m += ss.d;
                    }
                    markov.push(m);
                }
            }
        }
        let lifted = Self::from_markov(markov, tau)?;
        if !lifted.is_invertible() {
            return Err(Error::SingularLiftedModel {
                first_markov: lifted.markov[0],
            });
        }
        Ok(lifted)
    }

    pub fn markov(&self) -> &[f64] {
        &self.markov
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn horizon(&self) -> usize {
        self.markov.len()
    }

    pub fn is_invertible(&self) -> bool {
        self.markov[0].abs() >= SINGULARITY_FLOOR
    }

    /// `u_k = sum_{j <= k} m_{k-j} r_j` (zero-based).
    pub fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        self.check_len(r)?;
        Ok((0..r.len())
            .map(|k| (0..=k).map(|j| self.markov[k - j] * r[j]).sum())
            .collect())
    }

    /// Solves `L r = target` by forward substitution, refusing solutions
    /// beyond [`DEFAULT_INVERSE_GUARD`].
    pub fn deconvolve(&self, target: &[f64]) -> Result<Vec<f64>> {
        self.deconvolve_with_guard(target, DEFAULT_INVERSE_GUARD)
    }

    pub fn deconvolve_with_guard(&self, target: &[f64], guard: f64) -> Result<Vec<f64>> {
        self.check_len(target)?;
        if !self.is_invertible() {
            return Err(Error::SingularLiftedModel {
                first_markov: self.markov[0],
            });
        }
        let lead = self.markov[0];
        let mut r: Vec<f64> = Vec::with_capacity(target.len());
        for k in 0..target.len() {
            let acc: f64 = (0..k).map(|j| self.markov[k - j] * r[j]).sum();
            let value = (target[k] - acc) / lead;
            if !value.is_finite() || value.abs() > guard {
                return Err(Error::InverseOverflow {
                    index: k,
                    value,
                    guard,
                });
            }
            r.push(value);
        }
        Ok(r)
    }

    /// Dense `N x N` lower-triangular Toeplitz matrix.
    pub fn to_matrix(&self) -> Matrix {
        let n = self.horizon();
        let mut m = Matrix::zeros(n, n);
        for k in 0..n {
            for j in 0..=k {
                m[(k, j)] = self.markov[k - j];
            }
        }
        m
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.horizon() {
            return Err(Error::LengthMismatch {
                expected: self.horizon(),
                found: v.len(),
            });
        }
        Ok(())
    }
}
