//! Hermite polynomials (real and pure-imaginary scaled arguments) and modified
//! Bessel functions I₀, I₁.
//!
//! The imaginary-argument Hermite values needed by the series evaluator are
//! housed as G_n(x) with H_n(ix) = iⁿ·G_n(x); for x ≥ 0 all G_n are
//! non-negative, so the recurrence G_{n+1} = 2x·G_n + 2n·G_{n−1} is
//! cancellation-free. [`HermiteTable`] exposes log-magnitude accessors because
//! G_n(βd) overflows f64 near n ≈ 150 for the packet widths of interest.

use std::sync::OnceLock;
use thiserror::Error;

/// Largest index served by the free Hermite functions.
pub const MAX_HERMITE_INDEX: usize = 400;

const BESSEL_SERIES_CUTOFF: f64 = 15.0;
const BESSEL_OVERFLOW_ARG: f64 = 700.0;

#[derive(Debug, Error, PartialEq)]
pub enum SpecialError {
    #[error("hermite index {n} exceeds maximum {max}")]
    IndexOverflow { n: usize, max: usize },
    #[error("bessel argument {x} exceeds overflow guard {max}")]
    Overflow { x: f64, max: f64 },
    #[error("bessel order {0} not supported (only 0 and 1)")]
    InvalidOrder(usize),
    #[error("bessel argument {0} must be >= 0")]
    NegativeArgument(f64),
}

/// Physicists' Hermite polynomial H_n(x) by forward recurrence.
pub fn hermite(n: usize, x: f64) -> Result<f64, SpecialError> {
    if n > MAX_HERMITE_INDEX {
        return Err(SpecialError::IndexOverflow { n, max: MAX_HERMITE_INDEX });
    }
    let (mut prev, mut cur) = (1.0, 2.0 * x);
    match n {
        0 => Ok(1.0),
        1 => Ok(cur),
        _ => {
            for k in 1..n {
                let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
                prev = cur;
                cur = next;
            }
            Ok(cur)
        }
    }
}

/// G_n(x) with H_n(ix) = iⁿ·G_n(x); real for real x.
///
/// Values beyond f64 range overflow to infinity; use [`HermiteTable`] for
/// log-magnitude access in that regime.
pub fn hermite_imag_scaled(n: usize, x: f64) -> Result<f64, SpecialError> {
    if n > MAX_HERMITE_INDEX {
        return Err(SpecialError::IndexOverflow { n, max: MAX_HERMITE_INDEX });
    }
    let (mut prev, mut cur) = (1.0, 2.0 * x);
    match n {
        0 => Ok(1.0),
        1 => Ok(cur),
        _ => {
            for k in 1..n {
                let next = 2.0 * x * cur + 2.0 * k as f64 * prev;
                prev = cur;
                cur = next;
            }
            Ok(cur)
        }
    }
}

/// G_0..G_N at a fixed point, stored as sign and log magnitude.
#[derive(Debug, Clone)]
pub struct HermiteTable {
    x: f64,
    ln_abs: Vec<f64>,
    sign: Vec<f64>,
}

impl HermiteTable {
    /// Build the table up to index `n_max` inclusive.
    pub fn new(x: f64, n_max: usize) -> Self {
        let ax = x.abs();
        let mut ln_abs = Vec::with_capacity(n_max + 1);
        let mut sign = Vec::with_capacity(n_max + 1);
        // rescaled recurrence for |x|: all terms non-negative
        let mut prev = 1.0f64; // G_{n-1} * 2^{-shift}
        let mut cur = 2.0 * ax; // G_n * 2^{-shift}
        let mut shift = 0i64; // binary exponent carried out of the mantissas
        ln_abs.push(0.0);
        sign.push(1.0);
        if n_max >= 1 {
            ln_abs.push(if cur > 0.0 { cur.ln() } else { f64::NEG_INFINITY });
            sign.push(if cur > 0.0 { 1.0 } else { 0.0 });
        }
        for n in 1..n_max {
            let next = 2.0 * ax * cur + 2.0 * n as f64 * prev;
            prev = cur;
            cur = next;
            if cur > 1e280 {
                let scale = (-1020f64).exp2();
                cur *= scale;
                prev *= scale;
                shift += 1020;
            }
            let ln = if cur > 0.0 {
                cur.ln() + shift as f64 * std::f64::consts::LN_2
            } else {
                f64::NEG_INFINITY
            };
            ln_abs.push(ln);
            sign.push(if cur > 0.0 { 1.0 } else { 0.0 });
        }
        // parity: G_n(-x) = (-1)^n G_n(x)
        if x < 0.0 {
            for (n, s) in sign.iter_mut().enumerate() {
                if n % 2 == 1 {
                    *s = -*s;
                }
            }
        }
        HermiteTable { x, ln_abs, sign }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn len(&self) -> usize {
        self.ln_abs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ln_abs.is_empty()
    }

    /// ln|G_n|; −∞ when G_n = 0.
    #[inline]
    pub fn ln_abs(&self, n: usize) -> f64 {
        self.ln_abs[n]
    }

    /// Sign of G_n as ±1.0, or 0.0 when G_n = 0.
    #[inline]
    pub fn sign(&self, n: usize) -> f64 {
        self.sign[n]
    }

    /// G_n itself; infinite when the magnitude exceeds f64 range.
    pub fn value(&self, n: usize) -> f64 {
        self.sign[n] * self.ln_abs[n].exp()
    }
}

/// Modified Bessel function I_ν(x) for ν ∈ {0, 1}, x ∈ [0, 700].
pub fn bessel_i(nu: usize, x: f64) -> Result<f64, SpecialError> {
    if nu > 1 {
        return Err(SpecialError::InvalidOrder(nu));
    }
    if x < 0.0 {
        return Err(SpecialError::NegativeArgument(x));
    }
    if x > BESSEL_OVERFLOW_ARG {
        return Err(SpecialError::Overflow { x, max: BESSEL_OVERFLOW_ARG });
    }
    if x < BESSEL_SERIES_CUTOFF {
        Ok(bessel_series(nu, x))
    } else {
        Ok(bessel_asymptotic_scaled(nu, x) * x.exp())
    }
}

/// Exponentially scaled e^{−x}·I₀(x); no overflow for any x ≥ 0.
pub fn bessel_i0_scaled(x: f64) -> f64 {
    if x < BESSEL_SERIES_CUTOFF {
        bessel_series(0, x) * (-x).exp()
    } else {
        bessel_asymptotic_scaled(0, x)
    }
}

/// Exponentially scaled e^{−x}·I₁(x).
pub fn bessel_i1_scaled(x: f64) -> f64 {
    if x < BESSEL_SERIES_CUTOFF {
        bessel_series(1, x) * (-x).exp()
    } else {
        bessel_asymptotic_scaled(1, x)
    }
}

/// Ascending power series; all terms positive, converges for any x but is only
/// used below the cutoff.
fn bessel_series(nu: usize, x: f64) -> f64 {
    let h = 0.5 * x;
    let h2 = h * h;
    let mut term = if nu == 0 { 1.0 } else { h };
    let mut sum = term;
    for m in 1..200 {
        term *= h2 / (m as f64 * (m + nu) as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Large-argument expansion of e^{−x}·I_ν(x); truncation error ~e^{−2x} at the
/// optimal term, below 1e-12 relative for x ≥ 15.
fn bessel_asymptotic_scaled(nu: usize, x: f64) -> f64 {
    let mu = 4.0 * (nu * nu) as f64;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut prev_abs = f64::INFINITY;
    for k in 0u32..60 {
        let odd = (2 * k + 1) as f64;
        term *= -(mu - odd * odd) / (8.0 * (k + 1) as f64 * x);
        if term.abs() >= prev_abs {
            break; // divergent tail reached
        }
        prev_abs = term.abs();
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum / (2.0 * std::f64::consts::PI * x).sqrt()
}

/// ln(n!) from a cached table.
pub fn ln_factorial(n: usize) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut v = Vec::with_capacity(2048);
        v.push(0.0);
        let mut acc = 0.0f64;
        for k in 1..2048usize {
            acc += (k as f64).ln();
            v.push(acc);
        }
        v
    });
    match table.get(n) {
        Some(&v) => v,
        None => {
            let mut acc = *table.last().unwrap();
            for k in table.len()..=n {
                acc += (k as f64).ln();
            }
            acc
        }
    }
}

/// ln C(n, k).
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    debug_assert!(k <= n);
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}
