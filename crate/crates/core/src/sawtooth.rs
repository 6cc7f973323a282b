//! The saw-tooth function `psi(x) = {x} - 1/2` and Vaaler's trigonometric
//! approximation to it, with the Fejer-kernel majorant of the error.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::exec::{map_ordered, Execution};
use crate::{Error, Result};

/// Slack allowed on top of the majorant when checking the approximation.
pub const VAALER_SLACK: f64 = 1e-9;

/// `{x} - 1/2`, with `psi(n) = -1/2` at integers.
pub fn psi(x: f64) -> f64 {
    x - x.floor() - 0.5
}

/// Vaaler's weight `phi(t) = pi t (1 - |t|) cot(pi t) + |t|` on `0 < |t| < 1`.
fn vaaler_weight(t: f64) -> f64 {
    let a = t.abs();
    PI * a * (1.0 - a) / (PI * a).tan() + a
}

/// Trigonometric polynomial `sum_{1 <= |h| <= H} a_h e(hx)` approximating `psi`.
#[derive(Debug, Clone, PartialEq)]
pub struct VaalerPolynomial {
    h_max: u32,
    // a_h for h = 1..=H; a_{-h} is the conjugate.
    coeffs: Vec<Complex64>,
}

impl VaalerPolynomial {
    pub fn degree(&self) -> u32 {
        self.h_max
    }

    /// `a_h` for `1 <= |h| <= H`, zero otherwise.
    pub fn coefficient(&self, h: i64) -> Complex64 {
        let k = h.unsigned_abs();
        if k == 0 || k > self.h_max as u64 {
            return Complex64::new(0.0, 0.0);
        }
        let a = self.coeffs[k as usize - 1];
        if h > 0 {
            a
        } else {
            a.conj()
        }
    }

    /// Real value of the polynomial at `x`.
    pub fn evaluate(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let h = (i + 1) as f64;
                2.0 * (a * Complex64::from_polar(1.0, TAU * h * x)).re
            })
            .sum()
    }

    /// `|psi(x) - P(x)| <= majorant(x) + slack`.
    pub fn check(&self, x: f64) -> bool {
        self.error(x) <= fejer_majorant(x, self.h_max) + VAALER_SLACK
    }

    pub fn error(&self, x: f64) -> f64 {
        (psi(x) - self.evaluate(x)).abs()
    }
}

/// Coefficients `a_h = -phi(h/(H+1)) / (2 pi i h)`.
pub fn vaaler_coeffs(h_max: u32) -> Result<VaalerPolynomial> {
    if h_max == 0 {
        return Err(Error::NonPositive(0));
    }
    let scale = (h_max + 1) as f64;
    let coeffs = (1..=h_max)
        .map(|h| {
            let w = vaaler_weight(h as f64 / scale);
            // -w / (2 pi i h) = i w / (2 pi h)
            Complex64::new(0.0, w / (TAU * h as f64))
        })
        .collect();
    Ok(VaalerPolynomial { h_max, coeffs })
}

/// `(1/(H+1)) sum_{|h| <= H} (1 - |h|/(H+1)) e(hx)`, which is the Fejer kernel
/// divided by `H + 1` and therefore non-negative.
pub fn fejer_majorant(x: f64, h_max: u32) -> f64 {
    let n = (h_max + 1) as f64;
    let s = (PI * x).sin();
    if s.abs() > 1e-6 {
        let r = (PI * n * x).sin() / s;
        r * r / (n * n)
    } else {
        let tail: f64 = (1..=h_max)
            .map(|h| (1.0 - h as f64 / n) * (TAU * h as f64 * x).cos())
            .sum();
        ((1.0 + 2.0 * tail) / n).max(0.0)
    }
}

/// Builds the degree-`H` polynomial and checks the bound at `x`.
pub fn vaaler_check(x: f64, h_max: u32) -> Result<bool> {
    Ok(vaaler_coeffs(h_max)?.check(x))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VaalerScan {
    pub h_max: u32,
    pub samples: usize,
    pub seed: u64,
    pub violations: usize,
    /// Largest `error - majorant` seen (negative when the bound always holds strictly).
    pub max_excess: f64,
}

/// Checks the bound at `samples` seeded uniform points of `[0, 1)`.
pub fn vaaler_scan(h_max: u32, samples: usize, seed: u64, mode: Execution) -> Result<VaalerScan> {
    let poly = vaaler_coeffs(h_max)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..samples).map(|_| rng.random::<f64>()).collect();
    let excess = map_ordered(&xs, mode, |&x| poly.error(x) - fejer_majorant(x, h_max));
    Ok(VaalerScan {
        h_max,
        samples,
        seed,
        violations: excess.iter().filter(|&&e| e > VAALER_SLACK).count(),
        max_excess: excess.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}
