//! Quadratic Gauss sums `G(s, t; u) = sum_{n=1}^{u} e((s n^2 + t n) / u)`.
//!
//! [`gauss_brute`] sums the definition directly; [`gauss_closed`] evaluates the
//! explicit formulae valid when `gcd(s, u) = 1`, split by the 2-adic valuation of
//! `u`. The closed form keeps its structure (coefficient, unit, Jacobi sign,
//! radicand, rational phase) so two evaluations can be compared exactly.

use std::f64::consts::TAU;

use num_complex::Complex64;
use num_integer::Integer;

use crate::arith::{delta, epsilon_quarter_turns, jacobi, mod_inv, Rational};
use crate::exec::{map_ordered, Execution};
use crate::{Error, Result};

/// Absolute tolerance per unit of `sqrt(u)` when comparing two evaluations.
pub const CLOSED_FORM_TOL: f64 = 1e-6;

/// Leading scalar of a closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coefficient {
    Zero,
    One,
    Two,
    OnePlusI,
}

impl Coefficient {
    fn value(self) -> Complex64 {
        match self {
            Coefficient::Zero => Complex64::new(0.0, 0.0),
            Coefficient::One => Complex64::new(1.0, 0.0),
            Coefficient::Two => Complex64::new(2.0, 0.0),
            Coefficient::OnePlusI => Complex64::new(1.0, 1.0),
        }
    }
}

/// Which case of the evaluation applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaussCase {
    /// `u` odd.
    Odd,
    /// `u = 2v` with `v` odd.
    TwiceOdd,
    /// `4 | u`.
    DivisibleByFour,
}

/// `coefficient * i^quarter_turns * sign * sqrt(radicand) * e(phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClosedForm {
    pub case: GaussCase,
    pub coefficient: Coefficient,
    /// Power of `i` carried by the unit factor, in `0..4`.
    pub quarter_turns: u8,
    /// Jacobi symbol factor.
    pub sign: i8,
    pub radicand: u64,
    /// Reduced into `[0, 1)`.
    pub phase: Rational,
}

impl ClosedForm {
    pub fn evaluate(&self) -> Complex64 {
        let unit = Complex64::i().powu(self.quarter_turns as u32);
        let scale = self.sign as f64 * (self.radicand as f64).sqrt();
        self.coefficient.value() * unit * scale * e_rational(self.phase)
    }

    /// Exact magnitude squared: `|coefficient|^2 * radicand` (or 0).
    pub fn norm_sqr(&self) -> u64 {
        if self.sign == 0 {
            return 0;
        }
        let c2 = match self.coefficient {
            Coefficient::Zero => 0,
            Coefficient::One => 1,
            Coefficient::Two => 4,
            Coefficient::OnePlusI => 2,
        };
        c2 * self.radicand
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussSumValue {
    pub numeric: Complex64,
    pub structure: Option<ClosedForm>,
}

/// `e(x) = exp(2 pi i x)` for a rational `x`.
fn e_rational(x: Rational) -> Complex64 {
    let frac = reduce_phase(x);
    let angle = TAU * (*frac.numer() as f64 / *frac.denom() as f64);
    Complex64::from_polar(1.0, angle)
}

fn reduce_phase(x: Rational) -> Rational {
    x - x.floor()
}

/// Table of `e(k/u)` for `k in 0..u`, reusable across many sums with the same `u`.
#[derive(Debug, Clone)]
pub struct RootTable {
    u: u64,
    roots: Vec<Complex64>,
}

impl RootTable {
    pub fn new(u: u64) -> Result<Self> {
        if u == 0 {
            return Err(Error::NonPositive(0));
        }
        let roots = (0..u)
            .map(|k| Complex64::from_polar(1.0, TAU * k as f64 / u as f64))
            .collect();
        Ok(RootTable { u, roots })
    }

    pub fn modulus(&self) -> u64 {
        self.u
    }

    /// Direct summation with exact integer phases and Neumaier-compensated
    /// accumulation of both components.
    pub fn gauss(&self, s: i64, t: i64) -> Complex64 {
        let u = self.u as u128;
        let s = (s as i128).rem_euclid(u as i128) as u128;
        let t = (t as i128).rem_euclid(u as i128) as u128;
        let mut re = Neumaier::default();
        let mut im = Neumaier::default();
        for n in 1..=u {
            let k = (s * (n * n % u) + t * n) % u;
            let z = self.roots[k as usize];
            re.add(z.re);
            im.add(z.im);
        }
        Complex64::new(re.total(), im.total())
    }
}

#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `G(s, t; u)` by direct summation. No coprimality requirement.
pub fn gauss_brute(s: i64, t: i64, u: u64) -> Result<Complex64> {
    Ok(RootTable::new(u)?.gauss(s, t))
}

/// `G(s, t; u)` from the explicit evaluation. Requires `gcd(s, u) = 1`.
pub fn gauss_closed(s: i64, t: i64, u: u64) -> Result<GaussSumValue> {
    if u == 0 {
        return Err(Error::NonPositive(0));
    }
    let ui = u as i128;
    let s = s as i128;
    let t = t as i128;
    if s.gcd(&ui) != 1 {
        return Err(Error::NotCoprime {
            what: s.to_string(),
            modulus: u,
        });
    }
    let t2 = t * t;
    let form = if u % 2 == 1 {
        // eps_u sqrt(u) (s/u) e(-inv(4s) t^2 / u)
        let inv = mod_inv(4 * s, u)? as i128;
        ClosedForm {
            case: GaussCase::Odd,
            coefficient: Coefficient::One,
            quarter_turns: epsilon_quarter_turns(ui)?,
            sign: jacobi(s, ui)?,
            radicand: u,
            phase: reduce_phase(Rational::new(-(inv * t2.rem_euclid(ui)), ui)),
        }
    } else if u % 4 == 2 {
        // 2 delta_t eps_v sqrt(v) (2s/v) e(-inv(8s) t^2 / v)
        let v = u / 2;
        let vi = v as i128;
        let inv = mod_inv(8 * s, v)? as i128;
        ClosedForm {
            case: GaussCase::TwiceOdd,
            coefficient: if delta(t) == 1 { Coefficient::Two } else { Coefficient::Zero },
            quarter_turns: epsilon_quarter_turns(vi)?,
            sign: jacobi(2 * s, vi)?,
            radicand: v,
            phase: reduce_phase(Rational::new(-(inv * t2.rem_euclid(vi)), vi)),
        }
    } else {
        // (1+i) eps_s^{-1} (1 - delta_t) sqrt(u) (u/s) e(-inv(s) t^2 / 4u)
        // The sum only sees s mod u, so the positive representative is used
        // for the Jacobi symbol and eps_s.
        let s_pos = s.rem_euclid(ui);
        let four_u = 4 * ui;
        let inv = mod_inv(s_pos, 4 * u)? as i128;
        let eps = epsilon_quarter_turns(s_pos)?;
        ClosedForm {
            case: GaussCase::DivisibleByFour,
            coefficient: if delta(t) == 0 { Coefficient::OnePlusI } else { Coefficient::Zero },
            quarter_turns: (4 - eps) % 4,
            sign: jacobi(ui, s_pos)?,
            radicand: u,
            phase: reduce_phase(Rational::new(-(inv * t2.rem_euclid(four_u)), four_u)),
        }
    };
    Ok(GaussSumValue {
        numeric: form.evaluate(),
        structure: Some(form),
    })
}

/// Checks `G(s,0;u) G(u,0;s) = G(1,0;su)` by direct summation, to
/// `1e-6 * sqrt(su)`.
pub fn reciprocity_check(s: u64, u: u64) -> Result<bool> {
    if s == 0 || u == 0 {
        return Err(Error::NonPositive(0));
    }
    if s.gcd(&u) != 1 {
        return Err(Error::NotCoprime {
            what: s.to_string(),
            modulus: u,
        });
    }
    let lhs = gauss_brute(s as i64, 0, u)? * gauss_brute(u as i64, 0, s)?;
    let rhs = gauss_brute(1, 0, s * u)?;
    Ok((lhs - rhs).norm() <= CLOSED_FORM_TOL * ((s * u) as f64).sqrt())
}

/// Outcome of comparing closed forms against direct sums over a grid.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GridCheck {
    pub cases: u64,
    pub failures: u64,
    /// Largest `|closed - brute| / sqrt(u)` seen.
    pub max_scaled_error: f64,
}

impl GridCheck {
    fn merge(self, other: GridCheck) -> GridCheck {
        GridCheck {
            cases: self.cases + other.cases,
            failures: self.failures + other.failures,
            max_scaled_error: self.max_scaled_error.max(other.max_scaled_error),
        }
    }
}

/// All `s in [1, u)` coprime to `u` and all `t in [0, u)` for a single `u`.
/// For `u = 1` the single pair `(s, t) = (1, 0)` is checked.
pub fn check_modulus(u: u64) -> GridCheck {
    let table = RootTable::new(u).expect("u >= 1");
    let mut out = GridCheck::default();
    let root_u = (u as f64).sqrt();
    let s_range = if u == 1 { 1..2 } else { 1..u };
    for s in s_range.filter(|s| s.gcd(&u) == 1) {
        for t in 0..u {
            let brute = table.gauss(s as i64, t as i64);
            let closed = gauss_closed(s as i64, t as i64, u)
                .expect("coprime by construction")
                .numeric;
            let err = (closed - brute).norm() / root_u;
            out.cases += 1;
            if err > CLOSED_FORM_TOL {
                out.failures += 1;
            }
            out.max_scaled_error = out.max_scaled_error.max(err);
        }
    }
    out
}

/// [`check_modulus`] for every `u` in `1..=u_max`.
pub fn check_closed_forms(u_max: u64, mode: Execution) -> GridCheck {
    let moduli: Vec<u64> = (1..=u_max).collect();
    map_ordered(&moduli, mode, |&u| check_modulus(u))
        .into_iter()
        .fold(GridCheck::default(), GridCheck::merge)
}
