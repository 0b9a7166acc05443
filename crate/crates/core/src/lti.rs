//! Rational SISO transfer functions, their state-space realization and the
//! exact zero-order-hold discretization used by every simulation path.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// `num(s) / den(s)` with coefficients in ascending powers of `s`.
///
/// Construction trims highest-power zeros, rejects improper fractions and
/// scales both polynomials so the denominator constant term is 1 whenever it
/// is nonzero (the time-constant form `(T s + 1)` used throughout).
#[derive(Debug, Clone, PartialEq)]
pub struct TransferFunction {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl TransferFunction {
    pub fn new(numerator: &[f64], denominator: &[f64]) -> Result<Self> {
        if numerator.is_empty() || denominator.is_empty() {
            return Err(Error::InvalidCoefficients("empty coefficient sequence"));
        }
        if numerator.iter().chain(denominator).any(|c| !c.is_finite()) {
            return Err(Error::InvalidCoefficients("non-finite coefficient"));
        }
        let den = trim_high(denominator);
        if den.is_empty() {
            return Err(Error::ZeroDenominator);
        }
        let mut num = trim_high(numerator);
        if num.is_empty() {
            num.push(0.0);
        }
        if num.len() > den.len() {
            return Err(Error::Improper {
                num_degree: num.len() - 1,
                den_degree: den.len() - 1,
            });
        }

        let scale = if den[0] != 0.0 { den[0] } else { 1.0 };
        Ok(Self {
            num: num.iter().map(|c| c / scale).collect(),
            den: den.iter().map(|c| c / scale).collect(),
        })
    }

    /// `gain * prod(z s + 1) / prod(T s + 1)`.
    ///
    /// A negative zero constant places the zero in the right half plane, e.g.
    /// `zeros = [-0.006]` gives the factor `(-0.006 s + 1)`.
    pub fn from_time_constants(gain: f64, zeros: &[f64], poles: &[f64]) -> Result<Self> {
        let num = zeros
            .iter()
            .fold(vec![gain], |acc, z| poly_mul(&acc, &[1.0, *z]));
        let den = poles
            .iter()
            .fold(vec![1.0], |acc, t| poly_mul(&acc, &[1.0, *t]));
        Self::new(&num, &den)
    }

    /// The unit-gain, zero-order system `1 / 1`.
    pub fn identity() -> Self {
        Self {
            num: vec![1.0],
            den: vec![1.0],
        }
    }

    pub fn numerator(&self) -> &[f64] {
        &self.num
    }

    pub fn denominator(&self) -> &[f64] {
        &self.den
    }

    /// Denominator degree, i.e. the number of states of a minimal realization.
    pub fn order(&self) -> usize {
        self.den.len() - 1
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        poly_eval(&self.num, s) / poly_eval(&self.den, s)
    }

    /// `G(i omega)`.
    pub fn frequency_response(&self, omega: f64) -> Result<Complex64> {
        if !(omega >= 0.0) || !omega.is_finite() {
            return Err(Error::InvalidArgument(
                "omega must be finite and non-negative",
            ));
        }
        let s = Complex64::new(0.0, omega);
        let den = poly_eval(&self.den, s);
        let scale = self
            .den
            .iter()
            .enumerate()
            .map(|(k, c)| libm::fabs(*c) * libm::pow(omega, k as f64))
            .fold(0.0, f64::max);
        if den.norm() <= 1e-14 * scale {
            return Err(Error::Singular { omega });
        }
        Ok(poly_eval(&self.num, s) / den)
    }

    /// Observer-companion realization.
    ///
    /// For `1/(T s + 1)` this gives `A = [-1/T]`, `B = [1/T]`, `C = [1]`, `D = 0`.
    pub fn to_state_space(&self) -> StateSpace {
        let n = self.order();
        let lead = self.den[n];
        let a: Vec<f64> = self.den.iter().map(|c| c / lead).collect();
        let mut b = vec![0.0; n + 1];
        for (dst, c) in b.iter_mut().zip(&self.num) {
            *dst = c / lead;
        }
        let d = b[n];
        let residual: Vec<f64> = (0..n).map(|i| b[i] - d * a[i]).collect();

        let mut am = Matrix::zeros(n, n);
        let mut bm = vec![0.0; n];
        let mut cm = vec![0.0; n];
        for i in 0..n {
            am[(i, 0)] = -a[n - 1 - i];
            if i + 1 < n {
                am[(i, i + 1)] = 1.0;
            }
            bm[i] = residual[n - 1 - i];
        }
        if n > 0 {
            cm[0] = 1.0;
        }
        StateSpace {
            a: am,
            b: bm,
            c: cm,
            d,
        }
    }
}

/// Continuous-time `dx/dt = A x + B u`, `y = C x + D u`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: Matrix,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: f64,
}

impl StateSpace {
    pub fn new(a: Matrix, b: Vec<f64>, c: Vec<f64>, d: f64) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n || b.len() != n || c.len() != n {
            return Err(Error::InvalidArgument(
                "inconsistent state-space dimensions",
            ));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn order(&self) -> usize {
        self.b.len()
    }

    /// Exact ZOH image at sample spacing `step`.
    ///
    /// `Ad` and `Bd` are read off `exp([[A, B], [0, 0]] * step)`.
    pub fn discretize_zoh(&self, step: f64) -> Result<DiscreteStateSpace> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::NonPositive("discretization step"));
        }
        let n = self.order();
        let mut aug = Matrix::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..n {
                aug[(i, j)] = self.a[(i, j)] * step;
            }
            aug[(i, n)] = self.b[i] * step;
        }
        let e = aug.expm()?;
        let ad = e.block(0, 0, n, n);
        let bd = (0..n).map(|i| e[(i, n)]).collect();
        Ok(DiscreteStateSpace {
            ad,
            bd,
            c: self.c.clone(),
            d: self.d,
            step,
        })
    }

    /// Unit-step response at the given non-negative, ascending times.
    ///
    /// `h(0) = D`. Each gap is bridged with an exact ZOH transition; equal
    /// consecutive gaps reuse the previous discretization.
    pub fn step_response(&self, times: &[f64]) -> Result<Vec<f64>> {
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidTimeGrid);
        }
        if times.first().is_some_and(|t| *t < 0.0) || times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidTimeGrid);
        }
        let n = self.order();
        let mut x = vec![0.0; n];
        let mut next = vec![0.0; n];
        let mut now = 0.0;
        let mut cached: Option<DiscreteStateSpace> = None;
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            let gap = t - now;
            if gap > 0.0 {
                let reuse = cached
                    .as_ref()
                    .is_some_and(|d| libm::fabs(d.step - gap) <= 1e-12 * gap);
                if !reuse {
                    cached = Some(self.discretize_zoh(gap)?);
                }
                let disc = cached.as_ref().expect("discretization cached above");
                disc.advance(&x, 1.0, &mut next);
                core::mem::swap(&mut x, &mut next);
                now = t;
            }
            out.push(dot(&self.c, &x) + self.d);
        }
        Ok(out)
    }

    /// `C (i omega I - A)^-1 B + D`.
    pub fn frequency_response(&self, omega: f64) -> Result<Complex64> {
        let n = self.order();
        let mut m = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = Complex64::new(-self.a[(i, j)], 0.0);
            }
            m[i * n + i] += Complex64::new(0.0, omega);
        }
        let rhs: Vec<Complex64> = self.b.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        let x = complex_solve(n, m, rhs).ok_or(Error::Singular { omega })?;
        let y: Complex64 = self.c.iter().zip(&x).map(|(c, xi)| xi * *c).sum();
        Ok(y + self.d)
    }

    /// Reconstructs `num/den` via the Faddeev-LeVerrier recursion.
    pub fn transfer_function(&self) -> Result<TransferFunction> {
        let n = self.order();
        // characteristic polynomial coefficients, ascending; den[n] = 1
        let mut den = vec![0.0; n + 1];
        den[n] = 1.0;
        let mut num = vec![0.0; n + 1];
        let mut mk = Matrix::zeros(n, n);
        for k in 1..=n {
            let mut next = self.a.mul(&mk);
            for i in 0..n {
                next[(i, i)] += den[n - k + 1];
            }
            mk = next;
            let amk = self.a.mul(&mk);
            let trace: f64 = (0..n).map(|i| amk[(i, i)]).sum();
            den[n - k] = -trace / k as f64;
            num[n - k] = dot(&self.c, &mk.mul_vec(&self.b));
        }
        for (nc, dc) in num.iter_mut().zip(&den) {
            *nc += self.d * dc;
        }
        TransferFunction::new(&num, &den)
    }
}

/// `x[k+1] = Ad x[k] + Bd u[k]`, `y[k] = C x[k] + D u[k]`, sample spacing `step`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteStateSpace {
    pub ad: Matrix,
    pub bd: Vec<f64>,
    pub c: Vec<f64>,
    pub d: f64,
    pub step: f64,
}

impl DiscreteStateSpace {
    pub fn order(&self) -> usize {
        self.bd.len()
    }

    /// Writes `Ad x + Bd u` into `out`.
    pub fn advance(&self, x: &[f64], u: f64, out: &mut [f64]) {
        let n = self.order();
        for i in 0..n {
            let mut acc = self.bd[i] * u;
            for (j, xj) in x.iter().enumerate() {
                acc += self.ad[(i, j)] * xj;
            }
            out[i] = acc;
        }
    }

    pub fn output(&self, x: &[f64], u: f64) -> f64 {
        dot(&self.c, x) + self.d * u
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn trim_high(coeffs: &[f64]) -> Vec<f64> {
    let len = coeffs.iter().rposition(|c| *c != 0.0).map_or(0, |i| i + 1);
    coeffs[..len].to_vec()
}

/// Product of two ascending-power polynomials.
pub fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_eval(coeffs: &[f64], s: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, c| acc * s + *c)
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn complex_solve(
    n: usize,
    mut m: Vec<Complex64>,
    mut rhs: Vec<Complex64>,
) -> Option<Vec<Complex64>> {
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            m[i * n + col]
                .norm()
                .partial_cmp(&m[j * n + col].norm())
                .unwrap_or(core::cmp::Ordering::Equal)
        })?;
        if m[pivot * n + col].norm() == 0.0 {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                m.swap(pivot * n + j, col * n + j);
            }
            rhs.swap(pivot, col);
        }
        let p = m[col * n + col];
        for row in col + 1..n {
            let f = m[row * n + col] / p;
            if f.norm() == 0.0 {
                continue;
            }
            for j in col..n {
                let v = m[col * n + j];
                m[row * n + j] -= f * v;
            }
            let v = rhs[col];
            rhs[row] -= f * v;
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for j in row + 1..n {
            acc -= m[row * n + j] * x[j];
        }
        x[row] = acc / m[row * n + row];
    }
    Some(x)
}
