//! Exact solution counts for `a x^e + b y^f = 0 (mod q)`.
//!
//! Boxes `0 < x <= X, 0 < y <= Y` are counted by residue-class tabulation;
//! regions `f-(y) < x <= f+(y)` over an interval of `y` are counted one `y` at a
//! time with the floor-bracket identity
//!
//! ```text
//! #{x in (f-, f+] : x = -inv(a) b y^2 (mod q)} = [(f+ + inv(a) b y^2)/q] - [(f- + inv(a) b y^2)/q]
//! ```
//!
//! in exact rational arithmetic. Each count comes with the predicted main term
//! and an error envelope whose implicit constant is fixed at 1, so callers
//! compare ratios rather than assert dominance.

use std::time::Instant;

use log::warn;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arith::{factorize, gcd_u64, jacobi, log_l, mod_inv, Rational};
use crate::exec::{map_ordered, Execution};
use crate::{Error, Result};

/// Above this modulus the residue table for general exponents is refused.
pub const TABLE_LIMIT: u64 = 1 << 24;

/// Cross-check against the double loop (debug builds) when `XY` is at most this.
pub const NAIVE_CROSS_CHECK_LIMIT: f64 = 1e6;

/// One counting task: `a x^e + b y^f = 0 (mod q)` in `(0, X] x (0, Y]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CongruenceInstance {
    pub a: i64,
    pub b: i64,
    pub q: u64,
    pub e: u32,
    pub f: u32,
    pub x: f64,
    pub y: f64,
}

impl CongruenceInstance {
    pub fn new(a: i64, b: i64, q: u64, e: u32, f: u32, x: f64, y: f64) -> Result<Self> {
        let inst = CongruenceInstance { a, b, q, e, f, x, y };
        inst.validate()?;
        Ok(inst)
    }

    /// The linear-quadratic case `e = 1, f = 2`.
    pub fn linear_quadratic(a: i64, b: i64, q: u64, x: f64, y: f64) -> Result<Self> {
        Self::new(a, b, q, 1, 2, x, y)
    }

    pub fn validate(&self) -> Result<()> {
        if self.a == 0 || self.b == 0 {
            return Err(Error::Invalid("a and b must be non-zero".into()));
        }
        if self.q == 0 {
            return Err(Error::NonPositive(0));
        }
        if self.e == 0 || self.f == 0 {
            return Err(Error::Invalid("exponents e and f must be positive".into()));
        }
        if !(self.x >= 1.0 && self.y >= 1.0) || !self.x.is_finite() || !self.y.is_finite() {
            return Err(Error::Invalid(format!("need X, Y >= 1, got X = {}, Y = {}", self.x, self.y)));
        }
        check_coprime_coeffs(self.a, self.b, self.q)
    }

    fn require_linear_quadratic(&self) -> Result<()> {
        if (self.e, self.f) != (1, 2) {
            return Err(Error::Invalid(format!(
                "main term and envelope need (e, f) = (1, 2), got ({}, {})",
                self.e, self.f
            )));
        }
        Ok(())
    }
}

fn check_coprime_coeffs(a: i64, b: i64, q: u64) -> Result<()> {
    let ab = (a as i128 * b as i128).unsigned_abs() % q as u128;
    if (ab as u64).gcd(&q) != 1 && q != 1 {
        return Err(Error::NotCoprime {
            what: format!("{a}*{b}"),
            modulus: q,
        });
    }
    Ok(())
}

fn residue(v: i128, q: u64) -> u64 {
    v.rem_euclid(q as i128) as u64
}

fn pow_mod(base: u64, exp: u32, q: u64) -> u64 {
    let mut acc = 1u128 % q as u128;
    let b = base as u128 % q as u128;
    for _ in 0..exp {
        acc = acc * b % q as u128;
    }
    acc as u64
}

/// Number of `z` in `(0, n]` with `z = r (mod q)`, for `r` in `1..=q`.
fn class_count(n: u64, r: u64, q: u64) -> u64 {
    if r > n {
        0
    } else {
        (n - r) / q + 1
    }
}

/// Exact count of `(x, y)` with `0 < x <= X`, `0 < y <= Y`, `gcd(xy, q) = 1` and
/// `a x^e + b y^f = 0 (mod q)`.
///
/// Runs in `O(q)`: for `e = 1` the admissible `x` class is unique per `y` class;
/// otherwise the `x` classes are binned by the value of `a x^e mod q`.
pub fn count_exact(inst: &CongruenceInstance) -> Result<u64> {
    inst.validate()?;
    let q = inst.q;
    let nx = inst.x.floor() as u64;
    let ny = inst.y.floor() as u64;
    let total = if q == 1 {
        nx as u128 * ny as u128
    } else if inst.e == 1 {
        let a_inv = mod_inv(inst.a as i128, q)? as u128;
        let b = residue(inst.b as i128, q) as u128;
        let mut total = 0u128;
        for r in (1..=q).filter(|&r| gcd_u64(r, q) == 1) {
            // x = -inv(a) b r^f (mod q)
            let c = (a_inv * b % q as u128 * pow_mod(r, inst.f, q) as u128 % q as u128) as u64;
            let xr = if c == 0 { q } else { q - c };
            if gcd_u64(xr, q) == 1 {
                total += class_count(ny, r, q) as u128 * class_count(nx, xr, q) as u128;
            }
        }
        total
    } else {
        if q > TABLE_LIMIT {
            return Err(Error::OutOfRange {
                value: q.to_string(),
                reason: "residue table for general exponents needs q <= 2^24",
            });
        }
        let a = residue(inst.a as i128, q);
        let b = residue(inst.b as i128, q);
        let mut by_value = vec![0u64; q as usize];
        for r in (1..=q).filter(|&r| gcd_u64(r, q) == 1) {
            let v = (a as u128 * pow_mod(r, inst.e, q) as u128 % q as u128) as usize;
            by_value[v] += class_count(nx, r, q);
        }
        let mut total = 0u128;
        for r in (1..=q).filter(|&r| gcd_u64(r, q) == 1) {
            let w = (b as u128 * pow_mod(r, inst.f, q) as u128 % q as u128) as u64;
            let need = ((q - w) % q) as usize;
            total += class_count(ny, r, q) as u128 * by_value[need] as u128;
        }
        total
    };
    let total = u64::try_from(total).map_err(|_| Error::OutOfRange {
        value: total.to_string(),
        reason: "count exceeds u64",
    })?;
    if cfg!(debug_assertions) && inst.x * inst.y <= NAIVE_CROSS_CHECK_LIMIT {
        debug_assert_eq!(total, count_naive(inst)?, "residue count disagrees with double loop");
    }
    Ok(total)
}

fn naive(inst: &CongruenceInstance, filter_x: bool) -> u64 {
    let q = inst.q as i128;
    let nx = inst.x.floor() as i128;
    let ny = inst.y.floor() as i128;
    let mut count = 0;
    for y in 1..=ny {
        if (y as u64).gcd(&inst.q) != 1 {
            continue;
        }
        let by = (inst.b as i128 * pow_mod(y as u64, inst.f, inst.q) as i128).rem_euclid(q);
        for x in 1..=nx {
            if filter_x && (x as u64).gcd(&inst.q) != 1 {
                continue;
            }
            let ax = (inst.a as i128 * pow_mod(x as u64, inst.e, inst.q) as i128).rem_euclid(q);
            if (ax + by) % q == 0 {
                count += 1;
            }
        }
    }
    count
}

/// Double-loop reference count, `O(XY)`.
pub fn count_naive(inst: &CongruenceInstance) -> Result<u64> {
    inst.validate()?;
    Ok(naive(inst, true))
}

/// Double loop without the `gcd(x, q) = 1` filter.
pub fn count_naive_unfiltered_x(inst: &CongruenceInstance) -> Result<u64> {
    inst.validate()?;
    Ok(naive(inst, false))
}

/// `phi(q) X Y / q^2`.
pub fn main_term_thm1(inst: &CongruenceInstance) -> Result<f64> {
    inst.require_linear_quadratic()?;
    let q = inst.q as f64;
    Ok(factorize(inst.q)?.phi() as f64 * inst.x * inst.y / (q * q))
}

/// `X/q tau(q) + L(q) sigma_{-1/2}(q) (Y/sqrt(q) tau(q) + sqrt(q) L(q))`, constant 1.
pub fn envelope_thm1(inst: &CongruenceInstance) -> Result<f64> {
    inst.require_linear_quadratic()?;
    let fq = factorize(inst.q)?;
    let q = inst.q as f64;
    let tau = fq.tau() as f64;
    let l = log_l(q);
    Ok(inst.x / q * tau + l * fq.sigma_half_inv() * (inst.y / q.sqrt() * tau + q.sqrt() * l))
}

/// One row of a box-count report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountReport {
    pub a: i64,
    pub b: i64,
    pub q: u64,
    pub e: u32,
    pub f: u32,
    #[serde(rename = "X")]
    pub x: f64,
    #[serde(rename = "Y")]
    pub y: f64,
    pub exact: u64,
    pub main_term: f64,
    pub envelope: f64,
    /// `|exact - main_term| / envelope`.
    pub ratio: f64,
    pub seconds: f64,
}

/// Exact count, main term and envelope for an `(e, f) = (1, 2)` instance.
pub fn report_thm1(inst: &CongruenceInstance) -> Result<CountReport> {
    let start = Instant::now();
    let exact = count_exact(inst)?;
    let main_term = main_term_thm1(inst)?;
    let envelope = envelope_thm1(inst)?;
    Ok(CountReport {
        a: inst.a,
        b: inst.b,
        q: inst.q,
        e: inst.e,
        f: inst.f,
        x: inst.x,
        y: inst.y,
        exact,
        main_term,
        envelope,
        ratio: (exact as f64 - main_term).abs() / envelope,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// One side of the region in `x`, as a function of `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Constant(Rational),
    Affine { intercept: Rational, slope: Rational },
}

impl Boundary {
    pub fn constant(v: i128) -> Self {
        Boundary::Constant(Rational::from_integer(v))
    }

    pub fn at(&self, y: Rational) -> Rational {
        match *self {
            Boundary::Constant(c) => c,
            Boundary::Affine { intercept, slope } => intercept + slope * y,
        }
    }

    pub fn slope(&self) -> Rational {
        match *self {
            Boundary::Constant(_) => Rational::zero(),
            Boundary::Affine { slope, .. } => slope,
        }
    }
}

/// Boundary functions `f-(y) < x <= f+(y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundarySpec {
    pub lower: Boundary,
    pub upper: Boundary,
}

impl BoundarySpec {
    /// The box case `0 < x <= X`.
    pub fn box_upto(x: i128) -> Self {
        BoundarySpec {
            lower: Boundary::constant(0),
            upper: Boundary::constant(x),
        }
    }

    /// `T` with `|df+-/dy| <= T`.
    pub fn derivative_bound(&self) -> Rational {
        self.lower.slope().abs().max(self.upper.slope().abs())
    }

    /// `X(y) = f+(y) - f-(y)`.
    pub fn length_at(&self, y: Rational) -> Rational {
        self.upper.at(y) - self.lower.at(y)
    }

    /// Both boundaries are affine, so checking the interval ends suffices.
    pub fn validate_on(&self, interval: &YInterval) -> Result<()> {
        for end in [interval.start, interval.end()] {
            let y = Rational::from_integer(end as i128);
            if self.length_at(y).is_negative() {
                return Err(Error::InvertedBoundary { y: end.to_string() });
            }
        }
        Ok(())
    }
}

/// Half-open interval `(start, start + len]` of `y` values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct YInterval {
    pub start: i64,
    pub len: u64,
}

impl YInterval {
    pub fn new(start: i64, len: u64) -> Self {
        YInterval { start, len }
    }

    pub fn end(&self) -> i64 {
        self.start + self.len as i64
    }

    pub fn points(&self) -> impl Iterator<Item = i64> {
        self.start + 1..=self.end()
    }

    /// `y` in the interval with `gcd(y, q) = 1`.
    pub fn coprime_points(&self, q: u64) -> impl Iterator<Item = i64> {
        self.points().filter(move |y| y.unsigned_abs().gcd(&q) == 1)
    }
}

fn floor_div_q(v: Rational, q: u64) -> i128 {
    (v / Rational::from_integer(q as i128)).floor().to_integer()
}

/// `sum_{y in J, gcd(y,q)=1} #{x in (f-(y), f+(y)] : a x + b y^2 = 0 (mod q)}`.
pub fn count_boundaries(a: i64, b: i64, q: u64, bounds: &BoundarySpec, interval: &YInterval) -> Result<u64> {
    if q == 0 {
        return Err(Error::NonPositive(0));
    }
    check_coprime_coeffs(a, b, q)?;
    bounds.validate_on(interval)?;
    let shift = (mod_inv(a as i128, q)? as i128 * residue(b as i128, q) as i128) % q as i128;
    let mut total: i128 = 0;
    for y in interval.coprime_points(q) {
        let yr = y.rem_euclid(q as i64) as i128;
        let c = Rational::from_integer(shift * (yr * yr % q as i128) % q as i128);
        let yq = Rational::from_integer(y as i128);
        total += floor_div_q(bounds.upper.at(yq) + c, q) - floor_div_q(bounds.lower.at(yq) + c, q);
    }
    Ok(total as u64)
}

/// A boundary supplied as an arbitrary function. Counts built from these are
/// exact only up to floating-point evaluation of the boundary (about `1e-9`).
pub trait BoundaryCurve: Sync {
    fn eval(&self, y: f64) -> f64;
    fn derivative_bound(&self) -> f64;
}

impl BoundaryCurve for Boundary {
    fn eval(&self, y: f64) -> f64 {
        let v = self.at(Rational::from_integer(0)).to_f64().unwrap_or(f64::NAN);
        v + self.slope().to_f64().unwrap_or(f64::NAN) * y
    }

    fn derivative_bound(&self) -> f64 {
        self.slope().abs().to_f64().unwrap_or(f64::NAN)
    }
}

/// [`count_boundaries`] for general boundary curves, using float floors.
pub fn count_curves<L: BoundaryCurve, U: BoundaryCurve>(
    a: i64,
    b: i64,
    q: u64,
    lower: &L,
    upper: &U,
    interval: &YInterval,
) -> Result<u64> {
    if q == 0 {
        return Err(Error::NonPositive(0));
    }
    check_coprime_coeffs(a, b, q)?;
    let shift = (mod_inv(a as i128, q)? as i128 * residue(b as i128, q) as i128) % q as i128;
    let qf = q as f64;
    let mut total: i64 = 0;
    for y in interval.coprime_points(q) {
        let (lo, hi) = (lower.eval(y as f64), upper.eval(y as f64));
        if hi < lo {
            return Err(Error::InvertedBoundary { y: y.to_string() });
        }
        let yr = y.rem_euclid(q as i64) as i128;
        let c = (shift * (yr * yr % q as i128) % q as i128) as f64;
        total += ((hi + c) / qf + 1e-12).floor() as i64 - ((lo + c) / qf + 1e-12).floor() as i64;
    }
    Ok(total as u64)
}

/// Region count next to its predicted main term and envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorollaryReport {
    pub a: i64,
    pub b: i64,
    pub q: u64,
    #[serde(rename = "H")]
    pub h: f64,
    pub exact: u64,
    /// `(1/q) sum_{y in J, (y,q)=1} X(y)`, exact.
    #[serde(skip)]
    pub main_term_exact: Option<Rational>,
    pub main_term: f64,
    pub delta_h: f64,
    pub envelope: f64,
    pub ratio: f64,
    pub seconds: f64,
}

/// Main term `(1/q) sum X(y)` and envelope
/// `Y/H + Delta_H L(H) sigma_{-1/2}(q) (Y/sqrt(q) tau(q) + sqrt(q) L(q))`
/// with `Delta_H = 1 + H T Y / q`, all constants 1.
pub fn corollary_report(
    a: i64,
    b: i64,
    q: u64,
    bounds: &BoundarySpec,
    interval: &YInterval,
    h: f64,
) -> Result<CorollaryReport> {
    if !(h > 0.0) {
        return Err(Error::Invalid(format!("H must be positive, got {h}")));
    }
    let start = Instant::now();
    let exact = count_boundaries(a, b, q, bounds, interval)?;
    let main_exact: Rational = interval
        .coprime_points(q)
        .map(|y| bounds.length_at(Rational::from_integer(y as i128)))
        .sum::<Rational>()
        / Rational::from_integer(q as i128);
    let main_term = main_exact.to_f64().unwrap_or(f64::NAN);
    let fq = factorize(q)?;
    let qf = q as f64;
    let y_len = interval.len as f64;
    let t = bounds.derivative_bound().to_f64().unwrap_or(f64::NAN);
    let delta_h = 1.0 + h * t * y_len / qf;
    let envelope = y_len / h
        + delta_h
            * log_l(h)
            * fq.sigma_half_inv()
            * (y_len / qf.sqrt() * fq.tau() as f64 + qf.sqrt() * log_l(qf));
    Ok(CorollaryReport {
        a,
        b,
        q,
        h,
        exact,
        main_term_exact: Some(main_exact),
        main_term,
        delta_h,
        envelope,
        ratio: (exact as f64 - main_term).abs() / envelope,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Value of a real-character bilinear form and its large-sieve size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BilinearResult {
    pub sum: Complex64,
    /// `(MN)^eps (M N^{1/2} + M^{1/2} N)`.
    pub bound: f64,
}

/// `sum_{m <= M odd} sum_{n <= N} a_m b_n (n/m)`, where `a_coeffs[m - 1] = a_m`
/// (entries at even `m` are ignored) and `b_coeffs[n - 1] = b_n`.
pub fn bilinear_jacobi(a_coeffs: &[Complex64], b_coeffs: &[Complex64], epsilon: f64, mode: Execution) -> Result<BilinearResult> {
    if a_coeffs.is_empty() || b_coeffs.is_empty() {
        return Err(Error::Invalid("need M, N >= 1".into()));
    }
    let odd_m: Vec<usize> = (1..=a_coeffs.len()).step_by(2).collect();
    let rows = map_ordered(&odd_m, mode, |&m| {
        let mut row = Complex64::new(0.0, 0.0);
        for (i, bn) in b_coeffs.iter().enumerate() {
            let chi = jacobi(i as i128 + 1, m as i128).expect("odd modulus");
            row += *bn * chi as f64;
        }
        a_coeffs[m - 1] * row
    });
    let sum = rows.into_iter().fold(Complex64::new(0.0, 0.0), |acc, r| acc + r);
    let (m, n) = (a_coeffs.len() as f64, b_coeffs.len() as f64);
    let bound = (m * n).powf(epsilon) * (m * n.sqrt() + m.sqrt() * n);
    Ok(BilinearResult { sum, bound })
}

/// `len` seeded coefficients drawn uniformly from `{-1, +1}`.
pub fn sign_coefficients(len: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    (0..len)
        .map(|_| Complex64::new(if rng.random::<bool>() { 1.0 } else { -1.0 }, 0.0))
        .collect()
}

/// How a scan chooses `X` or `Y` from the modulus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SizeRule {
    EqualQ,
    Fixed(f64),
    /// `c * q`.
    Scaled(f64),
    /// `q^p`.
    Power(f64),
}

impl SizeRule {
    pub fn apply(&self, q: u64) -> f64 {
        let qf = q as f64;
        match *self {
            SizeRule::EqualQ => qf,
            SizeRule::Fixed(v) => v,
            SizeRule::Scaled(c) => c * qf,
            SizeRule::Power(p) => qf.powf(p),
        }
    }
}

/// How a scan chooses `a` or `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoefRule {
    Fixed(i64),
    /// Uniform in `[1, max(q, 2))`, seeded per modulus.
    Seeded(u64),
}

impl CoefRule {
    pub fn apply(&self, q: u64, salt: u64) -> i64 {
        match *self {
            CoefRule::Fixed(v) => v,
            CoefRule::Seeded(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ q.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt);
                rng.random_range(1..q.max(2)) as i64
            }
        }
    }
}

/// A family of `(e, f) = (1, 2)` instances indexed by modulus.
#[derive(Debug, Clone, PartialEq)]
pub struct Thm1Scan {
    pub q_list: Vec<u64>,
    pub x_rule: SizeRule,
    pub y_rule: SizeRule,
    pub a_rule: CoefRule,
    pub b_rule: CoefRule,
}

impl Thm1Scan {
    /// Generated instances in `q_list` order; invalid ones are logged and dropped.
    pub fn instances(&self) -> Vec<CongruenceInstance> {
        self.q_list
            .iter()
            .filter_map(|&q| {
                let a = self.a_rule.apply(q, 1);
                let b = self.b_rule.apply(q, 2);
                match CongruenceInstance::linear_quadratic(a, b, q, self.x_rule.apply(q), self.y_rule.apply(q)) {
                    Ok(inst) => Some(inst),
                    Err(e) => {
                        warn!("skipping q = {q}, a = {a}, b = {b}: {e}");
                        None
                    }
                }
            })
            .collect()
    }
}

/// One report per valid instance, in `q_list` order.
pub fn scan_thm1(scan: &Thm1Scan, mode: Execution) -> Result<Vec<CountReport>> {
    map_ordered(&scan.instances(), mode, report_thm1).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::primes_up_to;
    use proptest::prelude::*;
    use rand::Rng;

    fn inst(a: i64, b: i64, q: u64, x: f64, y: f64) -> CongruenceInstance {
        CongruenceInstance::linear_quadratic(a, b, q, x, y).unwrap()
    }

    #[test]
    fn count_fixtures() {
        assert_eq!(count_exact(&inst(1, 1, 5, 10.0, 10.0)).unwrap(), 16);
        assert_eq!(count_exact(&inst(1, -1, 7, 7.0, 7.0)).unwrap(), 6);
        for n in [1u64, 5, 37] {
            assert_eq!(count_exact(&inst(3, -8, 1, n as f64, n as f64)).unwrap(), n * n);
        }
        // Real ranges are floored.
        assert_eq!(count_exact(&inst(1, 1, 5, 10.9, 10.2)).unwrap(), 16);
    }

    #[test]
    fn rejects_shared_factor() {
        assert!(matches!(
            CongruenceInstance::linear_quadratic(3, 1, 9, 5.0, 5.0),
            Err(Error::NotCoprime { .. })
        ));
        assert!(CongruenceInstance::linear_quadratic(1, 1, 9, 0.5, 5.0).is_err());
        assert!(CongruenceInstance::linear_quadratic(0, 1, 9, 5.0, 5.0).is_err());
    }

    #[test]
    fn main_term_fixtures() {
        assert_eq!(main_term_thm1(&inst(1, 1, 5, 10.0, 10.0)).unwrap(), 16.0);
        assert_eq!(main_term_thm1(&inst(1, 1, 1, 9.0, 9.0)).unwrap(), 81.0);
        assert_eq!(main_term_thm1(&inst(1, 1, 7, 7.0, 7.0)).unwrap(), 6.0);
        let general = CongruenceInstance::new(1, 1, 7, 2, 3, 7.0, 7.0).unwrap();
        assert!(main_term_thm1(&general).is_err());
    }

    #[test]
    fn envelope_fixtures() {
        let l6 = 6f64.ln();
        let expect = 10.0 / 5.0 * 2.0 + l6 * (1.0 + 5f64.powf(-0.5)) * (10.0 / 5f64.sqrt() * 2.0 + 5f64.sqrt() * l6);
        let got = envelope_thm1(&inst(1, 1, 5, 10.0, 10.0)).unwrap();
        assert!((got - expect).abs() < 1e-12);
        assert!((got - 37.58).abs() < 0.01);

        let l2 = 2f64.ln();
        let got = envelope_thm1(&inst(1, 1, 1, 3.0, 4.0)).unwrap();
        assert!((got - (3.0 + l2 * (4.0 + l2))).abs() < 1e-12);

        let l5 = 5f64.ln();
        let sigma4 = 1.0 + 0.5f64.sqrt() + 0.5;
        let expect = 3.0 + l5 * sigma4 * (6.0 + 2.0 * l5);
        let got = envelope_thm1(&inst(1, 1, 4, 4.0, 4.0)).unwrap();
        assert!((got - expect).abs() < 1e-12);
        assert!((got - 35.75).abs() < 0.01);
    }

    #[test]
    fn general_exponents_use_table() {
        let i = CongruenceInstance::new(2, 3, 11, 2, 3, 40.0, 33.0).unwrap();
        assert_eq!(count_exact(&i).unwrap(), count_naive(&i).unwrap());
        let big = CongruenceInstance::new(1, 1, TABLE_LIMIT + 1, 2, 3, 2.0, 2.0).unwrap();
        assert!(count_exact(&big).is_err());
        let lin = CongruenceInstance::new(1, 1, TABLE_LIMIT + 1, 1, 2, 2.0, 2.0).unwrap();
        assert_eq!(count_exact(&lin).unwrap(), 0);
    }

    #[test]
    fn oracle_equivalence_seeded() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
        let mut checked = 0;
        while checked < 100 {
            let q = rng.random_range(1..=50u64);
            let a = rng.random_range(-60..=60i64);
            let b = rng.random_range(-60..=60i64);
            let e = rng.random_range(1..=3u32);
            let f = rng.random_range(1..=3u32);
            let x = rng.random_range(1..=200u32) as f64;
            let y = rng.random_range(1..=200u32) as f64;
            let Ok(i) = CongruenceInstance::new(a, b, q, e, f, x, y) else { continue };
            assert_eq!(count_exact(&i).unwrap(), count_naive(&i).unwrap(), "{i:?}");
            checked += 1;
        }
    }

    #[test]
    fn x_coprimality_is_automatic_for_linear_quadratic() {
        for q in 1..=40u64 {
            for (a, b) in [(1, 1), (3, -2), (-5, 7)] {
                let Ok(i) = CongruenceInstance::linear_quadratic(a, b, q, 90.0, 70.0) else { continue };
                assert_eq!(count_naive(&i).unwrap(), count_naive_unfiltered_x(&i).unwrap());
            }
        }
    }

    #[test]
    fn main_term_equals_count_for_unit_modulus() {
        for (x, y) in [(1.0, 1.0), (17.0, 4.0), (250.0, 99.0)] {
            let i = inst(2, 9, 1, x, y);
            assert_eq!(count_exact(&i).unwrap() as f64, main_term_thm1(&i).unwrap());
        }
    }

    #[test]
    fn constant_boundaries_match_box_count_exhaustively() {
        for q in 1..=30u64 {
            for a in [1i64, 2, -3] {
                for b in [1i64, -1, 5] {
                    let Ok(i) = CongruenceInstance::linear_quadratic(a, b, q, 37.0, 23.0) else { continue };
                    let via_bounds =
                        count_boundaries(a, b, q, &BoundarySpec::box_upto(37), &YInterval::new(0, 23)).unwrap();
                    assert_eq!(via_bounds, count_exact(&i).unwrap(), "q={q} a={a} b={b}");
                }
            }
        }
    }

    #[test]
    fn boundary_fixtures() {
        let diag = BoundarySpec {
            lower: Boundary::constant(0),
            upper: Boundary::Affine {
                intercept: Rational::from_integer(0),
                slope: Rational::from_integer(1),
            },
        };
        assert_eq!(count_boundaries(1, 1, 3, &diag, &YInterval::new(0, 6)).unwrap(), 4);

        let empty = BoundarySpec {
            lower: diag.upper,
            upper: diag.upper,
        };
        assert_eq!(count_boundaries(1, 1, 3, &empty, &YInterval::new(0, 6)).unwrap(), 0);

        let inverted = BoundarySpec {
            lower: diag.upper,
            upper: Boundary::constant(0),
        };
        assert!(matches!(
            count_boundaries(1, 1, 3, &inverted, &YInterval::new(0, 6)),
            Err(Error::InvertedBoundary { .. })
        ));
        assert_eq!(
            count_curves(1, 1, 3, &diag.lower, &diag.upper, &YInterval::new(0, 6)).unwrap(),
            4
        );
    }

    #[test]
    fn fractional_boundaries_against_enumeration() {
        // f-(y) = y/3 - 2, f+(y) = 5/2 + 2y/7 over (-4, 40], q = 11.
        let bounds = BoundarySpec {
            lower: Boundary::Affine {
                intercept: Rational::from_integer(-2),
                slope: Rational::new(1, 3),
            },
            upper: Boundary::Affine {
                intercept: Rational::new(5, 2),
                slope: Rational::new(2, 7),
            },
        };
        let interval = YInterval::new(-4, 44);
        let (a, b, q) = (3i64, -5i64, 11u64);
        let mut brute = 0;
        for y in interval.coprime_points(q) {
            let yr = Rational::from_integer(y as i128);
            let lo = bounds.lower.at(yr).floor().to_integer() as i64;
            let hi = bounds.upper.at(yr).floor().to_integer() as i64;
            for x in lo - 1..=hi + 1 {
                let xr = Rational::from_integer(x as i128);
                if xr > bounds.lower.at(yr) && xr <= bounds.upper.at(yr) && (a * x + b * y * y).rem_euclid(q as i64) == 0 {
                    brute += 1;
                }
            }
        }
        // bounds cross near y = 55, so stay below that
        assert_eq!(count_boundaries(a, b, q, &bounds, &interval).unwrap(), brute);
    }

    #[test]
    fn corollary_fixtures() {
        let r = corollary_report(1, 1, 7, &BoundarySpec::box_upto(20), &YInterval::new(0, 30), 7.0).unwrap();
        let coprime = (1..=30).filter(|y| y % 7 != 0).count() as f64;
        assert!((r.main_term - 20.0 / 7.0 * coprime).abs() < 1e-12);
        assert_eq!(r.delta_h, 1.0);

        let diag = BoundarySpec {
            lower: Boundary::constant(0),
            upper: Boundary::Affine {
                intercept: Rational::from_integer(0),
                slope: Rational::from_integer(1),
            },
        };
        let r = corollary_report(1, 1, 3, &diag, &YInterval::new(0, 6), 3.0).unwrap();
        assert_eq!(r.exact, 4);
        assert_eq!(r.main_term_exact, Some(Rational::from_integer(4)));
        assert_eq!(r.ratio, 0.0);
        assert_eq!(r.delta_h, 7.0);
        assert!(corollary_report(1, 1, 3, &diag, &YInterval::new(0, 6), 0.0).is_err());
    }

    #[test]
    fn bilinear_fixtures() {
        let ones = vec![Complex64::new(1.0, 0.0); 3];
        let r = bilinear_jacobi(&ones, &ones, 0.0, Execution::Sequential).unwrap();
        assert_eq!(r.sum, Complex64::new(3.0, 0.0));
        assert!((r.bound - (3.0 * 3f64.sqrt() * 2.0)).abs() < 1e-12);

        let b: Vec<Complex64> = (0..7).map(|i| Complex64::new(i as f64, -1.0)).collect();
        let r = bilinear_jacobi(&[Complex64::new(1.0, 0.0)], &b, 0.1, Execution::Sequential).unwrap();
        assert_eq!(r.sum, b.iter().sum::<Complex64>());

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = sign_coefficients(256, &mut rng);
        let b = sign_coefficients(256, &mut rng);
        let seq = bilinear_jacobi(&a, &b, 0.05, Execution::Sequential).unwrap();
        let par = bilinear_jacobi(&a, &b, 0.05, Execution::Parallel).unwrap();
        assert_eq!(seq, par);
        assert!(seq.sum.norm() <= 8.0 * seq.bound);
        assert!(bilinear_jacobi(&[], &b, 0.05, Execution::Sequential).is_err());
    }

    #[test]
    fn scan_fixtures() {
        let primes = primes_up_to(100);
        let scan = Thm1Scan {
            q_list: primes.clone(),
            x_rule: SizeRule::EqualQ,
            y_rule: SizeRule::EqualQ,
            a_rule: CoefRule::Fixed(1),
            b_rule: CoefRule::Fixed(1),
        };
        let reports = scan_thm1(&scan, Execution::Parallel).unwrap();
        assert_eq!(reports.len(), 25);
        assert!(reports.iter().map(|r| r.q).eq(primes.iter().copied()));

        let single = Thm1Scan {
            q_list: vec![5],
            x_rule: SizeRule::Fixed(10.0),
            y_rule: SizeRule::Fixed(10.0),
            ..scan.clone()
        };
        let r = &scan_thm1(&single, Execution::Sequential).unwrap()[0];
        assert_eq!((r.exact, r.main_term, r.ratio), (16, 16.0, 0.0));

        let empty = Thm1Scan { q_list: vec![], ..scan.clone() };
        assert!(scan_thm1(&empty, Execution::Sequential).unwrap().is_empty());

        // a = 3 shares a factor with q = 3, 6, 9: those instances are skipped.
        let skipping = Thm1Scan {
            q_list: (2..=10).collect(),
            a_rule: CoefRule::Fixed(3),
            ..scan
        };
        let qs: Vec<u64> = scan_thm1(&skipping, Execution::Sequential).unwrap().iter().map(|r| r.q).collect();
        assert_eq!(qs, vec![2, 4, 5, 7, 8, 10]);
    }

    proptest! {
        #[test]
        fn scale_invariance(q in 1u64..60, a in 1i64..200, b in -200i64..200, k in 1i64..50, x in 1u32..150, y in 1u32..150) {
            prop_assume!(b != 0);
            let Ok(base) = CongruenceInstance::linear_quadratic(a, b, q, x as f64, y as f64) else { return Ok(()) };
            prop_assume!((k as u64).gcd(&q) == 1);
            let scaled = CongruenceInstance::linear_quadratic(k * a, k * b, q, x as f64, y as f64).unwrap();
            prop_assert_eq!(count_exact(&base).unwrap(), count_exact(&scaled).unwrap());
        }

        #[test]
        fn residue_method_matches_loop(q in 1u64..50, a in -50i64..50, b in -50i64..50, e in 1u32..4, f in 1u32..4, x in 1u32..200, y in 1u32..200) {
            let Ok(i) = CongruenceInstance::new(a, b, q, e, f, x as f64, y as f64) else { return Ok(()) };
            prop_assert_eq!(count_exact(&i).unwrap(), count_naive(&i).unwrap());
        }
    }
}
