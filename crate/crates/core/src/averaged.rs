//! Averages of congruence counts over the coefficient family
//! `(a, b, q) = (r u^l, s v^m, t w)` with `u, v, w` in dyadic cells
//! `(U, 2U] x (V, 2V] x (W, 2W]` and `gcd(rsuv, tw) = 1`.
//!
//! [`s_exact`] evaluates the weighted sum exactly, [`main_term_thm3`] its
//! predicted main term, and [`error_budget`] the two error terms `UVWY/H` and
//! `T` with implicit constants 1.

use std::f64::consts::TAU;

use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arith::Rational;
use crate::congruence::{count_boundaries, Boundary, BoundarySpec, YInterval};
use crate::exec::{map_ordered, Execution};
use crate::{Error, Result};

/// Upper limit on `#cells * Y` accepted by [`s_exact`].
pub const MAX_INNER_STEPS: u64 = 1_000_000_000;

/// How the weights `c = d_{u,v} e_w` are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientScheme {
    AllOnes,
    Zeros,
    /// `d_{u,v} = d'_u d~_v`, each seeded on the unit disc.
    Factorized { seed: u64 },
    /// `d_{u,v}` seeded independently for every pair.
    Joint { seed: u64 },
}

impl CoefficientScheme {
    /// Whether `d_{u,v}` splits as a product of a `u` part and a `v` part.
    pub fn is_factorized(&self) -> bool {
        !matches!(self, CoefficientScheme::Joint { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            CoefficientScheme::AllOnes => "ones",
            CoefficientScheme::Zeros => "zeros",
            CoefficientScheme::Factorized { .. } => "factorized",
            CoefficientScheme::Joint { .. } => "joint",
        }
    }

    pub fn seed(&self) -> u64 {
        match *self {
            CoefficientScheme::Factorized { seed } | CoefficientScheme::Joint { seed } => seed,
            _ => 0,
        }
    }
}

/// `c0 + cu u + cv v + cw w + cy y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AffineForm {
    pub c0: Rational,
    pub cu: Rational,
    pub cv: Rational,
    pub cw: Rational,
    pub cy: Rational,
}

impl AffineForm {
    pub fn constant(c: Rational) -> Self {
        AffineForm {
            c0: c,
            ..Default::default()
        }
    }

    fn at_cell(&self, u: u64, v: u64, w: u64) -> Boundary {
        let r = |n: u64| Rational::from_integer(n as i128);
        Boundary::Affine {
            intercept: self.c0 + self.cu * r(u) + self.cv * r(v) + self.cw * r(w),
            slope: self.cy,
        }
    }

    fn eval(&self, u: f64, v: f64, w: f64, y: f64) -> f64 {
        let f = |x: Rational| x.to_f64().unwrap_or(f64::NAN);
        f(self.c0) + f(self.cu) * u + f(self.cv) * v + f(self.cw) * w + f(self.cy) * y
    }
}

/// Boundary functions `f~-(u,v,w,y) < x <= f~+(u,v,w,y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FamilyBoundary {
    pub lower: AffineForm,
    pub upper: AffineForm,
}

impl FamilyBoundary {
    /// `0 < x <= X` for every member.
    pub fn box_upto(x: Rational) -> Self {
        FamilyBoundary {
            lower: AffineForm::default(),
            upper: AffineForm::constant(x),
        }
    }

    pub fn at_cell(&self, u: u64, v: u64, w: u64) -> BoundarySpec {
        BoundarySpec {
            lower: self.lower.at_cell(u, v, w),
            upper: self.upper.at_cell(u, v, w),
        }
    }
}

/// `rho, sigma, tau, F` bounding the partial derivatives of the boundaries:
/// `|d/du| <= rho F`, `|d/dv| <= sigma F`, `|d/dy| <= tau F`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeBounds {
    pub rho: f64,
    pub sigma: f64,
    pub tau: f64,
    pub big_f: f64,
}

/// The data of one averaged sum.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedFamily {
    pub l: u32,
    pub m: u32,
    pub r: i64,
    pub s: i64,
    pub t: u64,
    pub u_start: f64,
    pub v_start: f64,
    pub w_start: f64,
    pub interval: YInterval,
    pub scheme: CoefficientScheme,
    pub boundary: FamilyBoundary,
    pub derivatives: DerivativeBounds,
}

fn dyadic(start: f64) -> std::ops::RangeInclusive<u64> {
    (start.floor() as u64 + 1)..=((2.0 * start).floor() as u64)
}

fn mean_of(range: std::ops::RangeInclusive<u64>) -> f64 {
    if range.is_empty() {
        0.0
    } else {
        (*range.start() + *range.end()) as f64 / 2.0
    }
}

impl AveragedFamily {
    /// Validates the family and derives its derivative bounds, taking `F` to be
    /// the characteristic interval length (at least 1).
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        (l, m): (u32, u32),
        (r, s, t): (i64, i64, u64),
        (u_start, v_start, w_start): (f64, f64, f64),
        interval: YInterval,
        scheme: CoefficientScheme,
        boundary: FamilyBoundary,
    ) -> Result<Self> {
        if l == 0 || m == 0 || t == 0 || r == 0 || s == 0 {
            return Err(Error::Invalid("need l, m, t >= 1 and r, s non-zero".into()));
        }
        if (r as i128 * s as i128).unsigned_abs().gcd(&(t as u128)) != 1 {
            return Err(Error::NotCoprime {
                what: format!("{r}*{s}"),
                modulus: t,
            });
        }
        for (name, v) in [("U", u_start), ("V", v_start), ("W", w_start)] {
            if !(v >= 0.5) || !v.is_finite() {
                return Err(Error::Invalid(format!("{name} must be >= 1/2, got {v}")));
            }
        }
        if interval.len < 1 {
            return Err(Error::Invalid("need Y >= 1".into()));
        }
        let mut family = AveragedFamily {
            l,
            m,
            r,
            s,
            t,
            u_start,
            v_start,
            w_start,
            interval,
            scheme,
            boundary,
            derivatives: DerivativeBounds {
                rho: 0.0,
                sigma: 0.0,
                tau: 0.0,
                big_f: 1.0,
            },
        };
        family.check_boundary_order()?;
        let big_f = family.characteristic_x().max(1.0);
        let lo = family.boundary.lower;
        let hi = family.boundary.upper;
        let slope = |a: Rational, b: Rational| {
            a.abs().max(b.abs()).to_f64().unwrap_or(f64::NAN) / big_f
        };
        family.derivatives = DerivativeBounds {
            rho: slope(lo.cu, hi.cu),
            sigma: slope(lo.cv, hi.cv),
            tau: slope(lo.cy, hi.cy),
            big_f,
        };
        Ok(family)
    }

    fn check_boundary_order(&self) -> Result<()> {
        // Affine in every variable: the corners of the box decide.
        let us = dyadic(self.u_start);
        let vs = dyadic(self.v_start);
        let ws = dyadic(self.w_start);
        if us.is_empty() || vs.is_empty() || ws.is_empty() {
            return Ok(());
        }
        for &u in &[*us.start(), *us.end()] {
            for &v in &[*vs.start(), *vs.end()] {
                for &w in &[*ws.start(), *ws.end()] {
                    self.boundary.at_cell(u, v, w).validate_on(&self.interval)?;
                }
            }
        }
        Ok(())
    }

    pub fn u_range(&self) -> std::ops::RangeInclusive<u64> {
        dyadic(self.u_start)
    }

    pub fn v_range(&self) -> std::ops::RangeInclusive<u64> {
        dyadic(self.v_start)
    }

    pub fn w_range(&self) -> std::ops::RangeInclusive<u64> {
        dyadic(self.w_start)
    }

    /// `q0 = tW`.
    pub fn q0(&self) -> f64 {
        self.t as f64 * self.w_start
    }

    pub fn y_len(&self) -> f64 {
        self.interval.len as f64
    }

    /// Members `(u, v, w)` with `gcd(rsuv, tw) = 1`, lexicographic.
    pub fn cells(&self) -> Vec<(u64, u64, u64)> {
        let rs = (self.r as i128 * self.s as i128).unsigned_abs();
        let mut out = Vec::new();
        for u in self.u_range() {
            for v in self.v_range() {
                for w in self.w_range() {
                    let q = self.t as u128 * w as u128;
                    if (rs * u as u128 * v as u128).gcd(&q) == 1 {
                        out.push((u, v, w));
                    }
                }
            }
        }
        out
    }

    /// Mean of `f~+ - f~-` over the integer points of the box.
    pub fn characteristic_x(&self) -> f64 {
        let (u, v, w) = (mean_of(self.u_range()), mean_of(self.v_range()), mean_of(self.w_range()));
        let y = self.interval.start as f64 + (self.interval.len as f64 + 1.0) / 2.0;
        self.boundary.upper.eval(u, v, w, y) - self.boundary.lower.eval(u, v, w, y)
    }

    /// `(r u^l, s v^m, t w)` for one member.
    pub fn coefficients_of(&self, (u, v, w): (u64, u64, u64)) -> Result<(i64, i64, u64)> {
        let overflow = || Error::OutOfRange {
            value: format!("({u}, {v}, {w})"),
            reason: "family coefficients overflow i64",
        };
        let a = (u as i64).checked_pow(self.l).and_then(|p| p.checked_mul(self.r)).ok_or_else(overflow)?;
        let b = (v as i64).checked_pow(self.m).and_then(|p| p.checked_mul(self.s)).ok_or_else(overflow)?;
        let q = self.t.checked_mul(w).ok_or_else(overflow)?;
        Ok((a, b, q))
    }

    /// Materialises `d_{u,v}` and `e_w` for this family.
    pub fn weights(&self) -> Weights {
        let us: Vec<u64> = self.u_range().collect();
        let vs: Vec<u64> = self.v_range().collect();
        let ws: Vec<u64> = self.w_range().collect();
        let one = Complex64::new(1.0, 0.0);
        let (d, e) = match self.scheme {
            CoefficientScheme::AllOnes => (vec![one; us.len() * vs.len()], vec![one; ws.len()]),
            CoefficientScheme::Zeros => (
                vec![Complex64::new(0.0, 0.0); us.len() * vs.len()],
                vec![one; ws.len()],
            ),
            CoefficientScheme::Factorized { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let du: Vec<Complex64> = us.iter().map(|_| unit_disc(&mut rng)).collect();
                let dv: Vec<Complex64> = vs.iter().map(|_| unit_disc(&mut rng)).collect();
                let e = ws.iter().map(|_| unit_disc(&mut rng)).collect();
                let d = du.iter().flat_map(|a| dv.iter().map(move |b| a * b)).collect();
                (d, e)
            }
            CoefficientScheme::Joint { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let d = (0..us.len() * vs.len()).map(|_| unit_disc(&mut rng)).collect();
                let e = ws.iter().map(|_| unit_disc(&mut rng)).collect();
                (d, e)
            }
        };
        Weights {
            u0: us.first().copied().unwrap_or(1),
            v0: vs.first().copied().unwrap_or(1),
            w0: ws.first().copied().unwrap_or(1),
            nv: vs.len(),
            d,
            e,
        }
    }
}

/// Uniform on the closed unit disc.
fn unit_disc(rng: &mut impl Rng) -> Complex64 {
    let radius = rng.random::<f64>().sqrt();
    Complex64::from_polar(radius, TAU * rng.random::<f64>())
}

/// Weights `d_{u,v}` and `e_w` over one box.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    u0: u64,
    v0: u64,
    w0: u64,
    nv: usize,
    d: Vec<Complex64>,
    e: Vec<Complex64>,
}

impl Weights {
    pub fn d(&self, u: u64, v: u64) -> Complex64 {
        self.d[(u - self.u0) as usize * self.nv + (v - self.v0) as usize]
    }

    pub fn e(&self, w: u64) -> Complex64 {
        self.e[(w - self.w0) as usize]
    }

    pub fn weight(&self, (u, v, w): (u64, u64, u64)) -> Complex64 {
        self.d(u, v) * self.e(w)
    }

    /// Entrywise `alpha * self + beta * other` on the `d` part, keeping `e`.
    pub fn combine(&self, alpha: Complex64, other: &Weights, beta: Complex64) -> Weights {
        assert_eq!(self.d.len(), other.d.len(), "weights over different boxes");
        Weights {
            d: self.d.iter().zip(&other.d).map(|(a, b)| alpha * a + beta * b).collect(),
            ..self.clone()
        }
    }

    /// Largest modulus of any `d` or `e` entry.
    pub fn max_norm(&self) -> f64 {
        self.d.iter().chain(&self.e).map(|z| z.norm()).fold(0.0, f64::max)
    }
}

fn check_work(family: &AveragedFamily, cells: usize) -> Result<()> {
    let steps = cells as u64 * family.interval.len;
    if steps > MAX_INNER_STEPS {
        return Err(Error::OutOfRange {
            value: steps.to_string(),
            reason: "family needs more than 10^9 inner steps",
        });
    }
    Ok(())
}

fn sum_in_order(parts: Vec<Complex64>) -> Complex64 {
    parts.into_iter().fold(Complex64::new(0.0, 0.0), |acc, z| acc + z)
}

/// The weighted sum of exact counts, with the family's own weights.
pub fn s_exact(family: &AveragedFamily, mode: Execution) -> Result<Complex64> {
    s_exact_with(family, &family.weights(), mode)
}

/// [`s_exact`] with caller-supplied weights.
pub fn s_exact_with(family: &AveragedFamily, weights: &Weights, mode: Execution) -> Result<Complex64> {
    let cells = family.cells();
    check_work(family, cells.len())?;
    let parts = map_ordered(&cells, mode, |&cell| -> Result<Complex64> {
        let (a, b, q) = family.coefficients_of(cell)?;
        let bounds = family.boundary.at_cell(cell.0, cell.1, cell.2);
        let count = count_boundaries(a, b, q, &bounds, &family.interval)?;
        Ok(weights.weight(cell) * count as f64)
    });
    Ok(sum_in_order(parts.into_iter().collect::<Result<_>>()?))
}

/// `sum d_{u,v} e_w / (tw) sum_{y in J, (y, tw) = 1} X~(u, v, w, y)`.
pub fn main_term_thm3(family: &AveragedFamily, mode: Execution) -> Result<Complex64> {
    main_term_with(family, &family.weights(), mode)
}

pub fn main_term_with(family: &AveragedFamily, weights: &Weights, mode: Execution) -> Result<Complex64> {
    let cells = family.cells();
    check_work(family, cells.len())?;
    let parts = map_ordered(&cells, mode, |&cell| -> Result<Complex64> {
        let (_, _, q) = family.coefficients_of(cell)?;
        let bounds = family.boundary.at_cell(cell.0, cell.1, cell.2);
        let inner: Rational = family
            .interval
            .coprime_points(q)
            .map(|y| bounds.length_at(Rational::from_integer(y as i128)))
            .sum::<Rational>()
            / Rational::from_integer(q as i128);
        Ok(weights.weight(cell) * inner.to_f64().unwrap_or(f64::NAN))
    });
    Ok(sum_in_order(parts.into_iter().collect::<Result<_>>()?))
}

/// `(1 + HF rho U/(tW)) (1 + HF sigma V/(tW)) (1 + HF tau Y/(tW))`.
pub fn delta_h(family: &AveragedFamily, h: f64) -> f64 {
    let d = family.derivatives;
    let scale = h * d.big_f / family.q0();
    (1.0 + scale * d.rho * family.u_start)
        * (1.0 + scale * d.sigma * family.v_start)
        * (1.0 + scale * d.tau * family.y_len())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBudget {
    pub h: f64,
    pub delta_h: f64,
    pub z: f64,
    /// The envelope `T`.
    pub t_envelope: f64,
    /// `UVWY / H`.
    pub first_o: f64,
    pub epsilon: f64,
    /// `H >= tW / F`.
    pub valid: bool,
}

/// `{n/2}`: 0 for even `n`, 1/2 for odd `n`.
fn half_frac(n: u32) -> f64 {
    if n % 2 == 0 {
        0.0
    } else {
        0.5
    }
}

/// `Z`: `(tW+U)^{1/2} (tW+V)^{1/2} (UV)^{1/2} W` for factorised weights with
/// `UV >= tW`, otherwise `(tW)^{1/2} UVW`.
pub fn z_term(family: &AveragedFamily) -> f64 {
    let (u, v, w) = (family.u_start, family.v_start, family.w_start);
    let tw = family.q0();
    if family.scheme.is_factorized() && u * v >= tw {
        (tw + u).sqrt() * (tw + v).sqrt() * (u * v).sqrt() * w
    } else {
        tw.sqrt() * u * v * w
    }
}

pub fn error_budget(family: &AveragedFamily, h: f64, epsilon: f64) -> Result<ErrorBudget> {
    if !(h > 0.0) {
        return Err(Error::Invalid(format!("H must be positive, got {h}")));
    }
    if !(0.0..0.5).contains(&epsilon) {
        return Err(Error::Invalid(format!("epsilon must lie in [0, 1/2), got {epsilon}")));
    }
    let (u, v, w) = (family.u_start, family.v_start, family.w_start);
    let tw = family.q0();
    let y = family.y_len();
    let dh = delta_h(family, h);
    let z = z_term(family);
    let shape = u.powf(1.0 - half_frac(family.l)) * v.powf(1.0 - half_frac(family.m)) * w + u * v * w.sqrt();
    let t_envelope = dh * (y / tw.sqrt() * shape + z) * (h * family.t as f64 * u * v * w).powf(epsilon);
    Ok(ErrorBudget {
        h,
        delta_h: dh,
        z,
        t_envelope,
        first_o: u * v * w * y / h,
        epsilon,
        valid: h >= tw / family.derivatives.big_f,
    })
}

/// `(tW)^{1+eps} / X`, with `X` the characteristic interval length.
pub fn suggest_h(family: &AveragedFamily, epsilon: f64) -> Result<f64> {
    suggest_h_for(family.q0(), family.characteristic_x(), epsilon)
}

pub fn suggest_h_for(q0: f64, x: f64, epsilon: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Invalid(format!("characteristic length must be positive, got {x}")));
    }
    if x > q0 {
        return Err(Error::OutOfRange {
            value: x.to_string(),
            reason: "characteristic length exceeds the modulus tW",
        });
    }
    Ok(q0.powf(1.0 + epsilon) / x)
}

/// Verdicts on when the main term should dominate the error terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub q0: f64,
    #[serde(rename = "X")]
    pub x: f64,
    pub epsilon: f64,
    /// `U^{2{l/2}} V^{2{m/2}} X^2`.
    pub first_min_arg: f64,
    /// `(UV)^{1/4} (XY)^{1/2}` or `(XY)^{2/3}`.
    pub z: f64,
    pub z_case_factorized: bool,
    /// `q0^{1+eps} <= first_min_arg`.
    pub first_ok: bool,
    /// `q0^{1+eps} <= Z`.
    pub z_ok: bool,
    /// `q0^eps t^{1/2} <= X`.
    pub main_ok: bool,
    pub all_ok: bool,
    pub warnings: Vec<String>,
}

pub fn dominance_report(family: &AveragedFamily, epsilon: f64) -> DominanceReport {
    let q0 = family.q0();
    let x = family.characteristic_x();
    let (u, v) = (family.u_start, family.v_start);
    let y = family.y_len();
    let first_min_arg = u.powf(2.0 * half_frac(family.l)) * v.powf(2.0 * half_frac(family.m)) * x * x;
    let z_case_factorized = family.scheme.is_factorized() && u * v >= q0;
    let z = if z_case_factorized {
        (u * v).powf(0.25) * (x * y).sqrt()
    } else {
        (x * y).powf(2.0 / 3.0)
    };
    let lhs = q0.powf(1.0 + epsilon);
    let first_ok = lhs <= first_min_arg;
    let z_ok = lhs <= z;
    let main_ok = q0.powf(epsilon) * (family.t as f64).sqrt() <= x;
    let mut warnings = Vec::new();
    if u > q0 {
        warnings.push(format!("U = {u} exceeds tW = {q0}"));
    }
    if family.v_start > q0 {
        warnings.push(format!("V = {v} exceeds tW = {q0}"));
    }
    if x > q0 {
        warnings.push(format!("X = {x} exceeds tW = {q0}"));
    }
    DominanceReport {
        q0,
        x,
        epsilon,
        first_min_arg,
        z,
        z_case_factorized,
        first_ok,
        z_ok,
        main_ok,
        all_ok: first_ok && z_ok && main_ok,
        warnings,
    }
}

/// One row of an averaged-sum report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedReport {
    pub l: u32,
    pub m: u32,
    pub r: i64,
    pub s: i64,
    pub t: u64,
    #[serde(rename = "U")]
    pub u: f64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "Y")]
    pub y: u64,
    pub scheme: String,
    pub seed: u64,
    #[serde(rename = "H")]
    pub h: f64,
    pub epsilon: f64,
    #[serde(rename = "S_re")]
    pub s_re: f64,
    #[serde(rename = "S_im")]
    pub s_im: f64,
    #[serde(rename = "M_re")]
    pub m_re: f64,
    #[serde(rename = "M_im")]
    pub m_im: f64,
    #[serde(rename = "first_O")]
    pub first_o: f64,
    #[serde(rename = "T_envelope")]
    pub t_envelope: f64,
    /// `|S - M| / (UVWY/H + T)`.
    pub ratio: f64,
}

/// Exact sum, main term and budget for one family at a given `H`.
pub fn averaged_report(family: &AveragedFamily, h: f64, epsilon: f64, mode: Execution) -> Result<AveragedReport> {
    let weights = family.weights();
    let s = s_exact_with(family, &weights, mode)?;
    let m = main_term_with(family, &weights, mode)?;
    let budget = error_budget(family, h, epsilon)?;
    Ok(AveragedReport {
        l: family.l,
        m: family.m,
        r: family.r,
        s: family.s,
        t: family.t,
        u: family.u_start,
        v: family.v_start,
        w: family.w_start,
        y: family.interval.len,
        scheme: family.scheme.name().to_string(),
        seed: family.scheme.seed(),
        h,
        epsilon,
        s_re: s.re,
        s_im: s.im,
        m_re: m.re,
        m_im: m.im,
        first_o: budget.first_o,
        t_envelope: budget.t_envelope,
        ratio: (s - m).norm() / (budget.first_o + budget.t_envelope),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::congruence::{count_exact, main_term_thm1, CongruenceInstance};

    fn box_family(lm: (u32, u32), rst: (i64, i64, u64), uvw: (f64, f64, f64), y: u64, x: i128) -> AveragedFamily {
        AveragedFamily::new(
            lm,
            rst,
            uvw,
            YInterval::new(0, y),
            CoefficientScheme::AllOnes,
            FamilyBoundary::box_upto(Rational::from_integer(x)),
        )
        .unwrap()
    }

    #[test]
    fn cells_follow_dyadic_ranges() {
        // w = 2 shares a factor with u = 2, leaving only w = 3.
        let f = box_family((2, 1), (1, 1, 1), (1.0, 1.0, 1.5), 10, 5);
        assert_eq!(f.cells(), vec![(2, 2, 3)]);
        let f = box_family((2, 1), (1, 1, 1), (1.0, 1.0, 1.0), 10, 5);
        assert!(f.cells().is_empty());
        let f = box_family((1, 1), (1, 1, 1), (0.5, 0.5, 0.5), 10, 5);
        assert_eq!(f.cells(), vec![(1, 1, 1)]);
        // u must be coprime to tw.
        let f = box_family((1, 1), (1, 1, 3), (1.5, 0.5, 0.5), 10, 5);
        assert_eq!(f.cells(), vec![(2, 1, 1)]);
    }

    #[test]
    fn single_cell_matches_congruence_module() {
        let f = box_family((2, 1), (1, 1, 1), (1.0, 1.0, 1.5), 10, 7);
        let s = s_exact(&f, Execution::Sequential).unwrap();
        let inst = CongruenceInstance::linear_quadratic(4, 2, 3, 7.0, 10.0).unwrap();
        assert_eq!(s, Complex64::new(count_exact(&inst).unwrap() as f64, 0.0));

        // With constant bounds the main term reduces to (X/q) #{y coprime to q},
        // which differs from phi(q) X Y / q^2 by less than X tau(q) / q.
        let m = main_term_thm3(&f, Execution::Sequential).unwrap();
        assert!((m.re - 7.0 / 3.0 * 7.0).abs() < 1e-12);
        assert_eq!(m.im, 0.0);
        assert!((m.re - main_term_thm1(&inst).unwrap()).abs() <= 7.0 / 3.0 * 2.0);
    }

    #[test]
    fn empty_intervals_and_zero_weights() {
        let mut f = box_family((1, 1), (1, 1, 1), (2.0, 2.0, 2.0), 10, 0);
        assert_eq!(s_exact(&f, Execution::Parallel).unwrap(), Complex64::new(0.0, 0.0));
        f = box_family((1, 1), (1, 1, 1), (2.0, 2.0, 2.0), 10, 9);
        f.scheme = CoefficientScheme::Zeros;
        assert_eq!(s_exact(&f, Execution::Parallel).unwrap(), Complex64::new(0.0, 0.0));
        assert_eq!(main_term_thm3(&f, Execution::Parallel).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn rejects_bad_families() {
        let b = FamilyBoundary::box_upto(Rational::from_integer(3));
        let j = YInterval::new(0, 5);
        assert!(AveragedFamily::new((1, 1), (2, 1, 4), (1.0, 1.0, 1.0), j, CoefficientScheme::AllOnes, b).is_err());
        assert!(AveragedFamily::new((1, 1), (1, 1, 1), (0.4, 1.0, 1.0), j, CoefficientScheme::AllOnes, b).is_err());
        let inverted = FamilyBoundary {
            lower: AffineForm::constant(Rational::from_integer(3)),
            upper: AffineForm::default(),
        };
        assert!(AveragedFamily::new((1, 1), (1, 1, 1), (1.0, 1.0, 1.0), j, CoefficientScheme::AllOnes, inverted).is_err());
    }

    #[test]
    fn delta_h_fixtures() {
        let mut f = box_family((1, 1), (1, 1, 3), (2.0, 2.0, 4.0), 8, 6);
        assert_eq!(f.derivatives.rho, 0.0);
        assert_eq!(delta_h(&f, 1e6), 1.0);
        f.derivatives = DerivativeBounds {
            rho: 1.0 / f.u_start,
            sigma: 1.0 / f.v_start,
            tau: 1.0 / f.y_len(),
            big_f: 5.0,
        };
        let h = f.q0() / 5.0;
        assert!((delta_h(&f, h) - 8.0).abs() < 1e-12);
        for k in [0.5, 1.0, 3.0] {
            let h = k * f.q0();
            assert!(delta_h(&f, 2.0 * h) <= 8.0 * delta_h(&f, h));
            assert!(delta_h(&f, 2.0 * h) >= delta_h(&f, h));
        }
    }

    #[test]
    fn delta_h_monotone_in_every_parameter() {
        let mut f = box_family((1, 1), (1, 1, 3), (2.0, 2.0, 4.0), 8, 6);
        f.derivatives = DerivativeBounds { rho: 0.1, sigma: 0.2, tau: 0.3, big_f: 2.0 };
        let base = delta_h(&f, 5.0);
        let bumps: [fn(&mut AveragedFamily); 5] = [
            |f| f.derivatives.rho *= 2.0,
            |f| f.derivatives.sigma *= 2.0,
            |f| f.derivatives.tau *= 2.0,
            |f| f.derivatives.big_f *= 2.0,
            |f| f.interval.len *= 2,
        ];
        for bump in bumps {
            let mut g = f.clone();
            bump(&mut g);
            assert!(delta_h(&g, 5.0) >= base);
        }
        assert!(delta_h(&f, 10.0) >= base);
    }

    #[test]
    fn z_term_cases() {
        let mut f = box_family((1, 1), (1, 1, 1), (4.0, 4.0, 2.0), 8, 2);
        f.scheme = CoefficientScheme::Joint { seed: 1 };
        let (u, v, w, tw) = (4.0f64, 4.0f64, 2.0f64, 2.0f64);
        assert_eq!(z_term(&f), tw.sqrt() * u * v * w);
        f.scheme = CoefficientScheme::Factorized { seed: 1 };
        assert_eq!(z_term(&f), (tw + u).sqrt() * (tw + v).sqrt() * (u * v).sqrt() * w);

        // U = V = tW: product of (2tW)^{1/2} (2tW)^{1/2} (tW tW)^{1/2} W.
        let g = box_family((1, 1), (1, 1, 2), (4.0, 4.0, 2.0), 8, 2);
        let tw = 4.0f64;
        let expect = (2.0 * tw).sqrt() * (2.0 * tw).sqrt() * (tw * tw).sqrt() * 2.0;
        assert!((z_term(&g) - expect).abs() < 1e-12);
    }

    #[test]
    fn budget_shape_without_epsilon() {
        let mut f = box_family((1, 1), (1, 1, 1), (2.0, 3.0, 5.0), 20, 3);
        f.scheme = CoefficientScheme::Joint { seed: 3 };
        let b = error_budget(&f, 10.0, 0.0).unwrap();
        assert_eq!(b.delta_h, 1.0);
        let (u, v, w, y) = (2.0f64, 3.0f64, 5.0f64, 20.0f64);
        let expect = y / w.sqrt() * (u.sqrt() * v.sqrt() * w + u * v * w.sqrt()) + w.sqrt() * u * v * w;
        assert!((b.t_envelope - expect).abs() < 1e-9);
        assert!((b.first_o - u * v * w * y / 10.0).abs() < 1e-12);
        assert!(b.valid);
        assert!(!error_budget(&f, 1.0, 0.0).unwrap().valid);
        assert!(error_budget(&f, 10.0, 0.7).is_err());

        // Even l and m drop the square-root saving on U and V.
        let mut g = f.clone();
        g.l = 2;
        g.m = 2;
        let b2 = error_budget(&g, 10.0, 0.0).unwrap();
        let expect2 = y / w.sqrt() * (u * v * w + u * v * w.sqrt()) + w.sqrt() * u * v * w;
        assert!((b2.t_envelope - expect2).abs() < 1e-9);
    }

    #[test]
    fn suggest_h_fixtures() {
        assert!((suggest_h_for(100.0, 10.0, 0.1).unwrap() - 15.848_931_924_611_13).abs() < 1e-9);
        assert_eq!(suggest_h_for(37.0, 37.0, 0.0).unwrap(), 1.0);
        assert_eq!(suggest_h_for(100.0, 1.0, 0.0).unwrap(), 100.0);
        assert!(suggest_h_for(10.0, 11.0, 0.0).is_err());
        let f = box_family((1, 1), (1, 1, 10), (1.0, 1.0, 10.0), 8, 10);
        assert!((suggest_h(&f, 0.1).unwrap() - 15.848_931_924_611_13).abs() < 1e-9);
    }

    #[test]
    fn dominance_fixtures() {
        let f = box_family((1, 1), (1, 1, 1), (2.0, 2.0, 16.0), 1_000_000, 16);
        let d = dominance_report(&f, 0.05);
        assert!(d.first_ok && d.z_ok && d.main_ok && d.all_ok, "{d:?}");
        assert!(d.warnings.is_empty());

        let g = box_family((1, 1), (1, 1, 1), (2.0, 2.0, 64.0), 100, 1);
        assert!(!dominance_report(&g, 0.1).main_ok);

        let h = box_family((2, 2), (1, 1, 1), (3.0, 5.0, 16.0), 10, 7);
        assert_eq!(dominance_report(&h, 0.0).first_min_arg, 49.0);

        let wide = box_family((1, 1), (1, 1, 1), (40.0, 2.0, 4.0), 10, 2);
        assert!(!dominance_report(&wide, 0.0).warnings.is_empty());
    }

    #[test]
    fn linearity_in_weights() {
        let mk = |scheme| {
            AveragedFamily::new(
                (1, 2),
                (1, 3, 2),
                (2.0, 1.5, 2.0),
                YInterval::new(3, 17),
                scheme,
                FamilyBoundary {
                    lower: AffineForm::default(),
                    upper: AffineForm {
                        c0: Rational::from_integer(4),
                        cu: Rational::new(1, 2),
                        cy: Rational::new(1, 3),
                        ..Default::default()
                    },
                },
            )
            .unwrap()
        };
        let f1 = mk(CoefficientScheme::Joint { seed: 11 });
        let f2 = mk(CoefficientScheme::Factorized { seed: 12 });
        // Same e_w on both sides so only d varies.
        let w1 = f1.weights();
        let mut w2 = f2.weights();
        w2.e = w1.e.clone();
        let (alpha, beta) = (Complex64::new(0.3, -0.2), Complex64::new(-0.5, 0.1));
        let combo = w1.combine(alpha, &w2, beta);
        let lhs = s_exact_with(&f1, &combo, Execution::Sequential).unwrap();
        let rhs = alpha * s_exact_with(&f1, &w1, Execution::Sequential).unwrap()
            + beta * s_exact_with(&f1, &w2, Execution::Sequential).unwrap();
        assert!((lhs - rhs).norm() < 1e-9);
    }

    #[test]
    fn seeded_weights_are_reproducible_and_bounded() {
        let f = AveragedFamily::new(
            (1, 1),
            (1, 1, 1),
            (4.0, 4.0, 4.0),
            YInterval::new(0, 5),
            CoefficientScheme::Joint { seed: 99 },
            FamilyBoundary::box_upto(Rational::from_integer(3)),
        )
        .unwrap();
        assert_eq!(f.weights(), f.weights());
        assert!(f.weights().max_norm() <= 1.0);
        let seq = s_exact(&f, Execution::Sequential).unwrap();
        let par = s_exact(&f, Execution::Parallel).unwrap();
        assert_eq!(seq, par);
    }
}
