#![allow(dead_code)]

use pulsecal_core::TransferFunction;

pub fn tc(zeros: &[f64], poles: &[f64]) -> TransferFunction {
    TransferFunction::from_time_constants(1.0, zeros, poles).unwrap()
}

/// `1/((0.008s+1)(0.001s+1))`, the distortion channel of the calibration runs.
pub fn plant() -> TransferFunction {
    tc(&[], &[0.008, 0.001])
}

pub fn good_model() -> TransferFunction {
    tc(&[], &[0.006, 0.001])
}

pub fn coarse_model() -> TransferFunction {
    tc(&[], &[0.004])
}

pub fn slow_zero_model() -> TransferFunction {
    tc(&[-0.002], &[0.006, 0.001])
}

pub fn fast_zero_model() -> TransferFunction {
    tc(&[-0.006], &[0.006, 0.001])
}

pub fn all_models() -> Vec<TransferFunction> {
    vec![
        plant(),
        good_model(),
        coarse_model(),
        slow_zero_model(),
        fast_zero_model(),
    ]
}
