use core::fmt;

/// Failures reported by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Coefficient list was empty or contained NaN/inf.
    InvalidCoefficients(&'static str),
    /// Denominator polynomial is identically zero.
    ZeroDenominator,
    /// Numerator degree exceeds denominator degree.
    Improper {
        num_degree: usize,
        den_degree: usize,
    },
    /// A time step, period or amplitude that must be strictly positive was not.
    NonPositive(&'static str),
    /// Two sequences that must have equal length did not.
    LengthMismatch { expected: usize, found: usize },
    /// Time grid was not ascending or started below zero.
    InvalidTimeGrid,
    /// Scaling-and-squaring series did not settle.
    MatrixExponential,
    /// Transfer function has a pole at exactly the requested frequency.
    Singular { omega: f64 },
    /// Lifted model has (numerically) zero first Markov coefficient.
    SingularLiftedModel { first_markov: f64 },
    /// Forward substitution produced a value beyond the amplitude guard.
    InverseOverflow {
        index: usize,
        value: f64,
        guard: f64,
    },
    /// Fewer than three oscillation extrema above the amplitude floor.
    NoOscillation { extrema: usize },
    /// Generic invalid argument with a short explanation.
    InvalidArgument(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidCoefficients(what) => write!(f, "invalid coefficients: {what}"),
            Error::ZeroDenominator => write!(f, "denominator polynomial is zero"),
            Error::Improper {
                num_degree,
                den_degree,
            } => write!(
                f,
                "improper transfer function: numerator degree {num_degree} > denominator degree {den_degree}"
            ),
            Error::NonPositive(what) => write!(f, "{what} must be strictly positive"),
            Error::LengthMismatch { expected, found } => {
                write!(f, "length mismatch: expected {expected}, found {found}")
            }
            Error::InvalidTimeGrid => write!(f, "time grid must be non-negative and ascending"),
            Error::MatrixExponential => write!(f, "matrix exponential did not converge"),
            Error::Singular { omega } => write!(f, "pole on the imaginary axis at omega = {omega}"),
            Error::SingularLiftedModel { first_markov } => write!(
                f,
                "lifted model is singular (first Markov coefficient {first_markov:e})"
            ),
            Error::InverseOverflow { index, value, guard } => write!(
                f,
                "inverse grows beyond guard {guard:e} at sample {index} (value {value:e})"
            ),
            Error::NoOscillation { extrema } => write!(
                f,
                "no oscillation: only {extrema} extrema above the amplitude floor"
            ),
            Error::InvalidArgument(what) => write!(f, "invalid argument: {what}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
