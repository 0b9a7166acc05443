//! The true distortion channel: an LTI plant with an optional static
//! saturation, simulated exactly under piecewise-constant AWG input.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lti::TransferFunction;
use crate::signal::{AwgSignal, FineTrajectory};

/// `A tanh(x / A)`.
pub fn saturate(x: f64, bound: f64) -> f64 {
    bound * libm::tanh(x / bound)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Nonlinearity {
    Identity,
    /// `S_A(x) = A tanh(x / A)` with `A > 0`.
    Saturation {
        bound: f64,
    },
}

impl Nonlinearity {
    pub fn saturation(bound: f64) -> Result<Self> {
        if !(bound > 0.0) || !bound.is_finite() {
            return Err(Error::NonPositive("saturation bound"));
        }
        Ok(Nonlinearity::Saturation { bound })
    }

    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            Nonlinearity::Identity => x,
            Nonlinearity::Saturation { bound } => saturate(x, bound),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Nonlinearity::Identity)
    }
}

/// Where the static nonlinearity sits relative to `G(s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Placement {
    /// Wiener: `u = S(G r)`.
    #[default]
    PostLinear,
    /// Hammerstein: `u = G S(r)`.
    PreLinear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    pub linear: TransferFunction,
    pub nonlinearity: Nonlinearity,
    pub placement: Placement,
}

impl Plant {
    pub fn linear(linear: TransferFunction) -> Self {
        Self {
            linear,
            nonlinearity: Nonlinearity::Identity,
            placement: Placement::PostLinear,
        }
    }

    pub fn wiener(linear: TransferFunction, bound: f64) -> Result<Self> {
        Ok(Self {
            linear,
            nonlinearity: Nonlinearity::saturation(bound)?,
            placement: Placement::PostLinear,
        })
    }

    pub fn with_placement(mut self, placement: Placement) -> Self {
        self.placement = placement;
        self
    }

    pub fn is_linear(&self) -> bool {
        self.nonlinearity.is_identity()
    }

    /// Zero-state response to `r` on a grid `oversampling` times finer than
    /// the AWG period.
    ///
    /// Grid point `i >= 1` reports the output at the end of fine sub-step `i`,
    /// driven by the AWG value of the period containing that sub-step; point
    /// 0 reports the initial output under `r[0]` (so a pure gain `D` gives
    /// `D r[0]` there).
    pub fn simulate(&self, r: &AwgSignal, oversampling: usize) -> Result<FineTrajectory> {
        if oversampling == 0 {
            return Err(Error::NonPositive("oversampling"));
        }
        let fine_step = r.period() / oversampling as f64;
        let disc = self.linear.to_state_space().discretize_zoh(fine_step)?;

        let drive = |v: f64| match self.placement {
            Placement::PreLinear => self.nonlinearity.apply(v),
            Placement::PostLinear => v,
        };
        let shape = |y: f64| match self.placement {
            Placement::PreLinear => y,
            Placement::PostLinear => self.nonlinearity.apply(y),
        };

        let n = disc.order();
        let mut x = vec![0.0; n];
        let mut next = vec![0.0; n];
        let mut out = Vec::with_capacity(r.len() * oversampling + 1);
        out.push(shape(disc.output(&x, drive(r.values()[0]))));
        for &value in r.values() {
            let input = drive(value);
            for _ in 0..oversampling {
                disc.advance(&x, input, &mut next);
                core::mem::swap(&mut x, &mut next);
                out.push(shape(disc.output(&x, input)));
            }
        }
        FineTrajectory::new(out, fine_step, oversampling)
    }
}

/// Free-function form of [`Plant::simulate`].
pub fn simulate(plant: &Plant, r: &AwgSignal, oversampling: usize) -> Result<FineTrajectory> {
    plant.simulate(r, oversampling)
}
