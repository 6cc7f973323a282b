//! Integral points on the universal torsor `eta2 a1^2 + eta3 a2 + eta4 a3 = 0`
//! of a singular sextic del Pezzo surface, their images in `P^6`, and the
//! almost-prime counts and sieve data attached to the slice `eta = (1,1,1,q)`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{factorize, is_prime, primes_up_to, Rational};
use crate::exec::{map_ordered, Execution};
use crate::{Error, Result};

/// Sieving limit for dimension 3.
pub const BETA_3: f64 = 6.640859;

/// `eta1^a eta2^b eta3^c eta4^d`.
fn eta_monomial(eta: &[i64; 4], exps: [u32; 4]) -> Option<i128> {
    eta.iter().zip(exps).try_fold(1i128, |acc, (&e, k)| acc.checked_mul((e as i128).checked_pow(k)?))
}

/// A point `(eta, alpha)` on the torsor, with positive `eta` and non-zero `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorsorPoint {
    pub eta: [i64; 4],
    pub alpha: [i64; 3],
}

impl TorsorPoint {
    pub fn new(eta: [i64; 4], alpha: [i64; 3]) -> Result<Self> {
        let p = TorsorPoint { eta, alpha };
        p.validate()?;
        Ok(p)
    }

    /// `eta2 a1^2 + eta3 a2 + eta4 a3`.
    pub fn torsor_value(&self) -> i128 {
        let [_, e2, e3, e4] = self.eta.map(|v| v as i128);
        let [a1, a2, a3] = self.alpha.map(|v| v as i128);
        e2 * a1 * a1 + e3 * a2 + e4 * a3
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Invalid(format!("{msg}: {self:?}")));
        if self.eta.iter().any(|&e| e <= 0) {
            return bad("eta must be positive");
        }
        if self.alpha.contains(&0) {
            return bad("alpha must be non-zero");
        }
        if self.torsor_value() != 0 {
            return bad("torsor equation fails");
        }
        let [e1, e2, e3, e4] = self.eta.map(|v| v as i128);
        let [a1, a2, a3] = self.alpha.map(|v| v as i128);
        let coprime = |a: i128, b: i128| a.gcd(&b) == 1;
        if !(coprime(a1, e1 * e3 * e4) && coprime(a2, e1 * e2 * e4) && coprime(a3, e1 * e2 * e3)) {
            return bad("alpha shares a factor with eta");
        }
        if !(coprime(e2, e3) && coprime(e2, e4) && coprime(e3, e4)) {
            return bad("eta2, eta3, eta4 not pairwise coprime");
        }
        Ok(())
    }
}

/// A point `(x0 : ... : x6)` of `P^6`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub x: [i128; 7],
}

impl SurfacePoint {
    /// `x3 x4 = x0 x5`.
    pub fn toric_quadric_holds(&self) -> bool {
        let x = &self.x;
        x[3] * x[4] == x[0] * x[5]
    }

    /// `x6^2 + x3 x5 + x4 x5 = 0`.
    pub fn torsor_quadric_holds(&self) -> bool {
        let x = &self.x;
        x[6] * x[6] + x[3] * x[5] + x[4] * x[5] == 0
    }

    pub fn coordinate_product(&self) -> BigInt {
        self.x.iter().map(|&v| BigInt::from(v)).product()
    }

    pub fn height(&self) -> u128 {
        self.x.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0)
    }
}

/// `eta1^13 eta2^8 eta3^9 eta4^9 (a1 a2 a3)^3`.
pub fn product_monomial(p: &TorsorPoint) -> BigInt {
    let big = |v: i64| BigInt::from(v);
    let [e1, e2, e3, e4] = p.eta.map(big);
    let a: BigInt = p.alpha.iter().map(|&v| big(v)).product();
    e1.pow(13) * e2.pow(8) * e3.pow(9) * e4.pow(9) * a.pow(3)
}

/// The monomial map from the torsor to `P^6`.
pub fn pi_map(p: &TorsorPoint) -> Result<SurfacePoint> {
    p.validate()?;
    let overflow = || Error::OutOfRange {
        value: format!("{p:?}"),
        reason: "coordinates overflow i128",
    };
    let [a1, a2, a3] = p.alpha.map(|v| v as i128);
    let m = |exps| eta_monomial(&p.eta, exps).ok_or_else(overflow);
    let mul = |a: i128, b: i128| a.checked_mul(b).ok_or_else(overflow);
    let x = [
        mul(a2, a3)?,
        mul(m([1, 1, 1, 0])?, mul(a1, a2)?)?,
        mul(m([1, 1, 0, 1])?, mul(a1, a3)?)?,
        mul(m([2, 1, 2, 1])?, a2)?,
        mul(m([2, 1, 1, 2])?, a3)?,
        m([4, 2, 3, 3])?,
        mul(m([3, 2, 2, 2])?, a1)?,
    ];
    let s = SurfacePoint { x };
    // Both quadrics are consequences of the torsor equation; only overflow can break them.
    debug_assert!(s.toric_quadric_holds());
    debug_assert!(s.torsor_quadric_holds());
    Ok(s)
}

/// A solution of `a1^2 - a2 + q a3 = 0` with `q` prime, `gcd(a1 a2, q) = 1`
/// and `a3 != 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpecialPoint {
    pub q: u64,
    pub alpha: [i64; 3],
}

impl SpecialPoint {
    pub fn new(q: u64, alpha: [i64; 3]) -> Result<Self> {
        if !is_prime(q) {
            return Err(Error::NotPrime(q));
        }
        let [a1, a2, a3] = alpha.map(|v| v as i128);
        let qi = q as i128;
        if a1 * a1 - a2 + qi * a3 != 0 {
            return Err(Error::Invalid(format!("{a1}^2 - {a2} + {q}*{a3} != 0")));
        }
        if a3 == 0 {
            return Err(Error::Invalid("a3 must be non-zero".into()));
        }
        if (a1 * a2).gcd(&qi) != 1 {
            return Err(Error::NotCoprime {
                what: format!("{a1}*{a2}"),
                modulus: q,
            });
        }
        Ok(SpecialPoint { q, alpha })
    }

    /// `0 < a1 <= B^{1/3}/2` and `0 < a2 <= B^{2/3}/2`.
    pub fn within_budget(&self, b: u64) -> bool {
        let [a1, a2, _] = self.alpha;
        a1 > 0 && a2 > 0 && a1 as u64 <= alpha1_max(b) && a2 as u64 <= alpha2_max(b)
    }

    /// `|a1 a2 a3|`.
    pub fn abs_product(&self) -> u128 {
        self.alpha.iter().map(|v| v.unsigned_abs() as u128).product()
    }
}

/// Lifts `(a1, a2, a3)` to the torsor point `eta = (1,1,1,q)`,
/// `alpha = (a1, -a2, a3)`.
pub fn special_to_torsor(p: &SpecialPoint) -> Result<TorsorPoint> {
    let checked = SpecialPoint::new(p.q, p.alpha)?;
    let [a1, a2, a3] = checked.alpha;
    TorsorPoint::new([1, 1, 1, p.q as i64], [a1, -a2, a3])
}

/// Largest integer `a` with `8 a^3 <= n`.
fn cube_budget(n: u128) -> u64 {
    let mut a = ((n as f64 / 8.0).cbrt()) as u128;
    while 8 * (a + 1).pow(3) <= n {
        a += 1;
    }
    while a > 0 && 8 * a.pow(3) > n {
        a -= 1;
    }
    a as u64
}

/// Largest `a1` with `a1 <= B^{1/3}/2`.
pub fn alpha1_max(b: u64) -> u64 {
    cube_budget(b as u128)
}

/// Largest `a2` with `a2 <= B^{2/3}/2`.
pub fn alpha2_max(b: u64) -> u64 {
    cube_budget(b as u128 * b as u128)
}

/// Primes `q` with `B^{1/3}/2 < q <= B^{1/3}`.
pub fn window_primes(b: u64) -> Vec<u64> {
    let top = cube_budget(8 * b as u128);
    primes_up_to(top)
        .into_iter()
        .filter(|&q| 8 * (q as u128).pow(3) > b as u128)
        .collect()
}

fn in_window(b: u64, q: u64) -> bool {
    let c = (q as u128).pow(3);
    c <= b as u128 && 8 * c > b as u128
}

/// `Omega(|a1 a2 a3|)`.
pub fn omega_of(p: &SpecialPoint) -> Result<u32> {
    p.alpha
        .iter()
        .map(|v| factorize(v.unsigned_abs()).map(|f| f.big_omega()))
        .sum()
}

/// All special points for `q` inside the budget `B`, by stepping `a2` through
/// the class of `a1^2` modulo `q`.
pub fn special_points(b: u64, q: u64) -> Vec<SpecialPoint> {
    let mut out = Vec::new();
    let a2_max = alpha2_max(b);
    for a1 in 1..=alpha1_max(b) {
        if a1 % q == 0 {
            continue;
        }
        let sq = a1 as u128 * a1 as u128;
        let mut a2 = (sq % q as u128) as u64;
        while a2 <= a2_max {
            let a3 = (a2 as i128 - sq as i128) / q as i128;
            if a3 != 0 {
                out.push(SpecialPoint {
                    q,
                    alpha: [a1 as i64, a2 as i64, a3 as i64],
                });
            }
            a2 += q;
        }
    }
    out
}

/// One emitted point with its image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointRecord {
    pub q: u64,
    pub a1: i64,
    pub a2: i64,
    pub a3: i64,
    pub x0: i64,
    pub x1: i64,
    pub x2: i64,
    pub x3: i64,
    pub x4: i64,
    pub x5: i64,
    pub x6: i64,
    #[serde(rename = "Omega")]
    pub omega: u32,
}

impl PointRecord {
    pub fn special(&self) -> SpecialPoint {
        SpecialPoint {
            q: self.q,
            alpha: [self.a1, self.a2, self.a3],
        }
    }

    pub fn x(&self) -> [i64; 7] {
        [self.x0, self.x1, self.x2, self.x3, self.x4, self.x5, self.x6]
    }
}

/// Runs every check on one special point and returns its record.
/// Panics if an identity fails, since that can only be an internal error.
fn verified_record(b: u64, p: &SpecialPoint, check_heights: bool) -> Result<PointRecord> {
    let torsor = special_to_torsor(p)?;
    assert_eq!(torsor.torsor_value(), 0);
    let s = pi_map(&torsor)?;
    assert!(s.toric_quadric_holds(), "x3 x4 != x0 x5 at {p:?}");
    assert!(s.torsor_quadric_holds(), "x6^2 + x3 x5 + x4 x5 != 0 at {p:?}");
    assert_eq!(s.coordinate_product(), product_monomial(&torsor), "product identity at {p:?}");
    if check_heights {
        assert!(s.height() <= b as u128, "height {} exceeds {b} at {p:?}", s.height());
    }
    let x: Vec<i64> = s.x.iter().map(|&v| v as i64).collect();
    Ok(PointRecord {
        q: p.q,
        a1: p.alpha[0],
        a2: p.alpha[1],
        a3: p.alpha[2],
        x0: x[0],
        x1: x[1],
        x2: x[2],
        x3: x[3],
        x4: x[4],
        x5: x[5],
        x6: x[6],
        omega: omega_of(p)?,
    })
}

fn records_for(b: u64, q: u64, t: u32, check_heights: bool) -> Result<Vec<PointRecord>> {
    let mut out = Vec::new();
    for p in special_points(b, q) {
        let rec = verified_record(b, &p, check_heights)?;
        if rec.omega <= t {
            out.push(rec);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enumeration {
    pub count: u64,
    /// Points in ascending `(q, a1, a2)` order.
    pub points: Vec<PointRecord>,
}

/// Almost-prime points over all primes in the dyadic window of `B^{1/3}`:
/// those with `Omega(|a1 a2 a3|) <= t`.
pub fn enumerate_lower_bound_points(b: u64, t: u32, mode: Execution) -> Result<Enumeration> {
    check_budget(b)?;
    let qs = window_primes(b);
    let per_q = map_ordered(&qs, mode, |&q| records_for(b, q, t, true));
    let mut points = Vec::new();
    for part in per_q {
        points.extend(part?);
    }
    Ok(Enumeration {
        count: points.len() as u64,
        points,
    })
}

fn check_budget(b: u64) -> Result<()> {
    if b < 8 {
        return Err(Error::OutOfRange {
            value: b.to_string(),
            reason: "budget B must be at least 8",
        });
    }
    if b > 1 << 50 {
        return Err(Error::OutOfRange {
            value: b.to_string(),
            reason: "budget B above 2^50",
        });
    }
    Ok(())
}

/// The inner count for one prime `q`. Returns 0 with a warning if `q^3 > B`.
pub fn l_t_count(b: u64, q: u64, t: u32) -> Result<u64> {
    if !is_prime(q) {
        return Err(Error::NotPrime(q));
    }
    check_budget(b)?;
    if (q as u128).pow(3) > b as u128 {
        log::warn!("q = {q} exceeds B^(1/3) for B = {b}; count taken as 0");
        return Ok(0);
    }
    Ok(records_for(b, q, t, in_window(b, q))?.len() as u64)
}

/// The sequence `a_n = #{special points with |a1 a2 a3| = n}` for one `q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SieveSequence {
    pub b: u64,
    pub q: u64,
    pub a_n: BTreeMap<u64, u64>,
    /// `phi(q) B / (4 q^2)`.
    pub x_approx: Rational,
}

impl SieveSequence {
    pub fn total(&self) -> u64 {
        self.a_n.values().sum()
    }
}

pub fn build_sieve_sequence(b: u64, q: u64) -> Result<SieveSequence> {
    if !is_prime(q) {
        return Err(Error::NotPrime(q));
    }
    check_budget(b)?;
    if !in_window(b, q) {
        return Err(Error::OutOfRange {
            value: q.to_string(),
            reason: "q must satisfy B^(1/3)/2 < q <= B^(1/3)",
        });
    }
    let mut a_n = BTreeMap::new();
    for p in special_points(b, q) {
        let n = p.abs_product();
        let n = u64::try_from(n).map_err(|_| Error::OutOfRange {
            value: n.to_string(),
            reason: "product exceeds u64",
        })?;
        *a_n.entry(n).or_insert(0) += 1;
    }
    let phi = (q - 1) as i128;
    let x_approx = Rational::new(phi * b as i128, 4 * (q as i128) * (q as i128));
    Ok(SieveSequence { b, q, a_n, x_approx })
}

/// `sum_{d | n} a_n` against its prediction `rho(d)/d X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivisorSum {
    pub d: u64,
    pub exact: u64,
    pub predicted: f64,
    pub remainder: f64,
}

pub fn sum_over_d(seq: &SieveSequence, d: u64) -> Result<DivisorSum> {
    let r = rho(d, seq.q)?;
    let exact = seq.a_n.iter().filter(|(n, _)| *n % d == 0).map(|(_, c)| c).sum();
    let predicted = (r / Rational::from_integer(d as i128) * seq.x_approx)
        .to_f64()
        .unwrap_or(f64::NAN);
    Ok(DivisorSum {
        d,
        exact,
        predicted,
        remainder: exact as f64 - predicted,
    })
}

fn phi_star_square_free(primes: &[u64]) -> Rational {
    primes
        .iter()
        .map(|&p| Rational::new(p as i128 - 1, p as i128))
        .product()
}

fn prime_list(n: u64) -> Vec<u64> {
    // n is a divisor of a square-free d here, so trial division is enough.
    let mut out = Vec::new();
    let mut m = n;
    let mut p = 2;
    while p * p <= m {
        if m % p == 0 {
            out.push(p);
            m /= p;
        }
        p += 1;
    }
    if m > 1 {
        out.push(m);
    }
    out
}

/// `mu(e1) mu(e2) mu(e3) k / (e1 e2 e3) sum_{l | f3} (1/l) phi*(f3/l) / phi*((f3/l, q))`.
fn triple_term(e: [u64; 3], q: u64) -> Rational {
    let [e1, e2, e3] = e;
    let sign: i128 = e.iter().map(|&v| prime_list(v).len()).sum::<usize>() as i128 % 2;
    let sign = if sign == 0 { 1 } else { -1 };
    let k = e1.gcd(&e2).gcd(&e3);
    let k13 = (e1 / k).gcd(&(e3 / k));
    let k23 = (e2 / k).gcd(&(e3 / k));
    let f3 = e3 / (k * k13 * k23);
    let f3_primes = prime_list(f3);
    let mut inner = Rational::zero();
    for mask in 0u32..(1 << f3_primes.len()) {
        // l is the product of the primes in the mask, m = f3 / l the rest.
        let (l_primes, m_primes): (Vec<u64>, Vec<u64>) = f3_primes
            .iter()
            .enumerate()
            .fold((vec![], vec![]), |(mut l, mut m), (i, &p)| {
                if mask >> i & 1 == 1 {
                    l.push(p)
                } else {
                    m.push(p)
                }
                (l, m)
            });
        let l: i128 = l_primes.iter().map(|&p| p as i128).product();
        let shared: Vec<u64> = m_primes.iter().copied().filter(|&p| p == q).collect();
        inner += Rational::new(1, l) * phi_star_square_free(&m_primes) / phi_star_square_free(&shared);
    }
    Rational::new(sign * k as i128, e1 as i128 * e2 as i128 * e3 as i128) * inner
}

/// The local density `rho(d)` for square-free `d`, summed directly over the
/// triples `(e1, e2, e3)` whose prime support is that of `d` and with
/// `(e1 e2, q) = 1`.
pub fn rho(d: u64, q: u64) -> Result<Rational> {
    if !is_prime(q) {
        return Err(Error::NotPrime(q));
    }
    let f = factorize(d)?;
    if !f.is_square_free() {
        return Err(Error::NotSquareFree(d));
    }
    let primes: Vec<u64> = f.primes().collect();
    // Each prime of d goes into a non-empty subset of {e1, e2, e3}; q only into e3.
    let choices: Vec<Vec<u8>> = primes
        .iter()
        .map(|&p| if p == q { vec![4] } else { (1..8).collect() })
        .collect();
    let mut idx = vec![0usize; primes.len()];
    let mut total = Rational::zero();
    loop {
        let mut e = [1u64; 3];
        for (i, &p) in primes.iter().enumerate() {
            let mask = choices[i][idx[i]];
            for (j, slot) in e.iter_mut().enumerate() {
                if mask >> j & 1 == 1 {
                    *slot *= p;
                }
            }
        }
        total += triple_term(e, q);
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                let mu = if primes.len() % 2 == 0 { 1 } else { -1 };
                return Ok(total * Rational::from_integer(mu * d as i128));
            }
            idx[pos] += 1;
            if idx[pos] < choices[pos].len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Exact density of `p | a1 a2 (a2 - a1^2)` over `F_p^2`, next to `rho(p)/p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RhoOracle {
    pub p: u64,
    pub brute: Rational,
    pub formula: Rational,
}

pub fn rho_oracle_prime(p: u64, q: u64) -> Result<RhoOracle> {
    if !is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    if p == q || p == 2 {
        return Err(Error::Invalid(format!("oracle needs p not in {{2, q}}, got p = {p}, q = {q}")));
    }
    let mut hits = 0i128;
    for a1 in 0..p {
        let sq = a1 * a1 % p;
        for a2 in 0..p {
            if a1 == 0 || a2 == 0 || a2 == sq {
                hits += 1;
            }
        }
    }
    let pp = p as i128;
    Ok(RhoOracle {
        p,
        brute: Rational::new(hits, pp * pp),
        formula: rho(p, q)? / Rational::from_integer(pp),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoEntry {
    pub d: u64,
    /// Exact value as `num/den`.
    pub rho: String,
    pub value: f64,
}

/// Minimal `c1` on one `(w, z)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct W1Point {
    pub w: u64,
    pub z: u64,
    pub product: f64,
    pub c1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SieveReport {
    #[serde(rename = "B")]
    pub b: u64,
    pub q: u64,
    #[serde(rename = "X_approx")]
    pub x_approx: f64,
    #[serde(rename = "X_approx_exact")]
    pub x_approx_exact: String,
    pub sequence_total: u64,
    pub tau_level: f64,
    pub c2: f64,
    pub c3: f64,
    /// Largest `d` in the level-of-distribution sum.
    pub d_max: u64,
    pub w2_sum: f64,
    /// `c3 X / log^4 X`.
    pub w2_bound: f64,
    pub rho_table: Vec<RhoEntry>,
    pub kappa: u32,
    pub w1_grid: Vec<W1Point>,
    pub w1_min_c1: f64,
    pub beta: f64,
    pub mu: f64,
    /// `mu - 1 + (mu - kappa)(1 - 1/beta) + (kappa + 1) log beta`.
    pub threshold: f64,
    pub target_t: u32,
    pub target_qualifies: bool,
}

/// `mu - 1 + (mu - kappa)(1 - 1/beta) + (kappa + 1) log beta`.
pub fn sieve_threshold(kappa: f64, mu: f64, beta: f64) -> f64 {
    mu - 1.0 + (mu - kappa) * (1.0 - 1.0 / beta) + (kappa + 1.0) * beta.ln()
}

const W1_POINTS: [u64; 8] = [3, 5, 10, 30, 100, 300, 1000, 3000];
const W1_Z_MAX: u64 = 100_000;

/// Evaluates the sieve input conditions on the sequence for `(B, q)`.
pub fn sieve_condition_report(b: u64, q: u64, tau_level: f64, c2: f64, c3: f64) -> Result<SieveReport> {
    if !(tau_level > 0.0 && tau_level < 1.0) {
        return Err(Error::Invalid(format!("tau must lie in (0, 1), got {tau_level}")));
    }
    let seq = build_sieve_sequence(b, q)?;
    let x = seq.x_approx.to_f64().unwrap_or(f64::NAN);
    let log_x = x.ln();
    let d_limit = if log_x > 0.0 { x.powf(tau_level) * log_x.powf(-c2) } else { 0.0 };
    let d_max = if d_limit >= 1.0 { d_limit.floor() as u64 } else { 0 };

    let mut w2_sum = 0.0;
    for d in 1..=d_max {
        let f = factorize(d)?;
        if !f.is_square_free() {
            continue;
        }
        let r = sum_over_d(&seq, d)?;
        w2_sum += 4f64.powi(f.little_omega() as i32) * r.remainder.abs();
    }

    let mut rho_table = Vec::new();
    let mut table_primes = primes_up_to(50);
    if !table_primes.contains(&q) {
        table_primes.push(q);
    }
    for p in table_primes {
        let r = rho(p, q)?;
        rho_table.push(RhoEntry {
            d: p,
            rho: r.to_string(),
            value: r.to_f64().unwrap_or(f64::NAN),
        });
    }

    // p = 2 has rho(2) = 2, so the product only makes sense from w >= 3.
    let kappa = 3u32;
    let sieve_primes = primes_up_to(W1_Z_MAX);
    let local: Vec<(u64, f64)> = sieve_primes
        .iter()
        .filter(|&&p| p >= 3)
        .map(|&p| {
            let r = rho(p, q).map(|r| r.to_f64().unwrap_or(f64::NAN))?;
            Ok((p, (1.0 - r / p as f64).recip()))
        })
        .collect::<Result<_>>()?;
    let mut w1_grid = Vec::new();
    for &w in &W1_POINTS {
        let mut z = w * 2;
        while z <= W1_Z_MAX {
            let product: f64 = local
                .iter()
                .filter(|&&(p, _)| p >= w && p < z)
                .map(|&(_, f)| f)
                .product();
            let ratio = ((z as f64).ln() / (w as f64).ln()).powi(kappa as i32);
            let c1 = ((product / ratio - 1.0) * (w as f64).ln()).max(0.0);
            w1_grid.push(W1Point { w, z, product, c1 });
            z *= 4;
        }
    }
    let w1_min_c1 = w1_grid.iter().map(|p| p.c1).fold(0.0, f64::max);

    let mu = 4.0;
    let threshold = sieve_threshold(kappa as f64, mu, BETA_3);
    let target_t = 12;
    Ok(SieveReport {
        b,
        q,
        x_approx: x,
        x_approx_exact: seq.x_approx.to_string(),
        sequence_total: seq.total(),
        tau_level,
        c2,
        c3,
        d_max,
        w2_sum,
        w2_bound: c3 * x / log_x.powi(4),
        rho_table,
        kappa,
        w1_grid,
        w1_min_c1,
        beta: BETA_3,
        mu,
        threshold,
        target_t,
        target_qualifies: (target_t as f64) > threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    #[serde(rename = "B")]
    pub b: u64,
    pub t: u32,
    pub count: u64,
    /// `count log^5 B / B`.
    pub normalized: f64,
}

/// Almost-prime point counts for strictly ascending budgets.
pub fn m_t_growth(budgets: &[u64], t: u32, mode: Execution) -> Result<Vec<GrowthRow>> {
    if budgets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid("budgets must be strictly ascending".into()));
    }
    budgets
        .iter()
        .map(|&b| {
            let count = enumerate_lower_bound_points(b, t, mode)?.count;
            let bf = b as f64;
            Ok(GrowthRow {
                b,
                t,
                count,
                normalized: count as f64 * bf.ln().powi(5) / bf,
            })
        })
        .collect()
}

/// Whether `rho(d1 d2) = rho(d1) rho(d2)`; `d1, d2` must be coprime.
pub fn rho_is_multiplicative_at(d1: u64, d2: u64, q: u64) -> Result<bool> {
    if d1.gcd(&d2) != 1 {
        return Err(Error::Invalid(format!("{d1} and {d2} are not coprime")));
    }
    Ok(rho(d1 * d2, q)? == rho(d1, q)? * rho(d2, q)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    /// Scans every `a2` in the budget rather than stepping through a class.
    fn brute_count(b: u64, t: u32) -> u64 {
        let mut count = 0;
        for q in 2u64.. {
            if q.pow(3) > b {
                break;
            }
            if !is_prime(q) || 8 * q.pow(3) <= b {
                continue;
            }
            let mut a1 = 1i64;
            while 8 * (a1 as u64).pow(3) <= b {
                let mut a2 = 1i64;
                while 8 * (a2 as u128).pow(3) <= (b as u128).pow(2) {
                    let diff = a2 - a1 * a1;
                    if a1 as u64 % q != 0 && a2 as u64 % q != 0 && diff % q as i64 == 0 && diff != 0 {
                        let a3 = diff / q as i64;
                        let omega: u32 = [a1, a2, a3]
                            .iter()
                            .map(|v| factorize(v.unsigned_abs()).unwrap().big_omega())
                            .sum();
                        if omega <= t {
                            count += 1;
                        }
                    }
                    a2 += 1;
                }
                a1 += 1;
            }
        }
        count
    }

    #[test]
    fn budget_helpers() {
        assert_eq!(alpha1_max(1000), 5);
        assert_eq!(alpha2_max(1000), 50);
        assert_eq!(alpha1_max(999), 4);
        assert_eq!(alpha1_max(8), 1);
        assert_eq!(window_primes(1000), vec![7]);
        assert_eq!(window_primes(8), vec![2]);
        assert_eq!(window_primes(10_000), vec![11, 13, 17, 19]);
    }

    #[test]
    fn pi_map_fixture() {
        let p = TorsorPoint::new([1, 1, 1, 2], [1, -3, 1]).unwrap();
        let s = pi_map(&p).unwrap();
        assert_eq!(s.x, [-3, -3, 2, -6, 4, 8, 4]);
        assert_eq!(s.coordinate_product(), BigInt::from(-13824));
        assert_eq!(product_monomial(&p), BigInt::from(-13824));
        assert!(s.toric_quadric_holds() && s.torsor_quadric_holds());
    }

    #[test]
    fn pi_map_general_eta() {
        // 2 a1^2 + 3 a2 + 5 a3 = 0.
        let p = TorsorPoint::new([7, 2, 3, 5], [1, 1, -1]).unwrap();
        let s = pi_map(&p).unwrap();
        assert!(s.toric_quadric_holds());
        assert!(s.torsor_quadric_holds());
        assert_eq!(s.coordinate_product(), product_monomial(&p));
    }

    #[test]
    fn torsor_rejections() {
        assert!(TorsorPoint::new([1, 1, 1, 2], [1, -3, 2]).is_err());
        assert!(TorsorPoint::new([0, 1, 1, 2], [1, -3, 1]).is_err());
        assert!(TorsorPoint::new([1, 1, 1, 3], [3, -9, 0]).is_err());
        // a1 shares the factor 3 with eta4.
        assert!(TorsorPoint::new([1, 1, 1, 3], [3, -12, 1]).is_err());
    }

    #[test]
    fn special_point_lift() {
        let sp = SpecialPoint::new(2, [1, 3, 1]).unwrap();
        let t = special_to_torsor(&sp).unwrap();
        assert_eq!(t.eta, [1, 1, 1, 2]);
        assert_eq!(t.alpha, [1, -3, 1]);
        assert!(SpecialPoint::new(7, [1, 1, 0]).is_err());
        assert!(SpecialPoint::new(7, [7, 49, 0]).is_err());
        assert!(SpecialPoint::new(3, [3, 12, 1]).is_err());
        assert!(SpecialPoint::new(4, [1, 5, 1]).is_err());
    }

    #[test]
    fn fixture_count_and_identities() {
        let e = enumerate_lower_bound_points(1000, 12, Execution::Parallel).unwrap();
        assert_eq!(e.count, 31);
        assert_eq!(brute_count(1000, 12), 31);
        assert!(e.points.iter().all(|p| p.omega <= 11 && p.q == 7));
        let per_a1: Vec<usize> = (1..=5).map(|a| e.points.iter().filter(|p| p.a1 == a).count()).collect();
        assert_eq!(per_a1, vec![7, 6, 6, 6, 6]);
        assert_eq!(enumerate_lower_bound_points(1000, 0, Execution::Sequential).unwrap().count, 0);
        assert_eq!(enumerate_lower_bound_points(8, 12, Execution::Sequential).unwrap().count, 0);
        assert!(enumerate_lower_bound_points(7, 12, Execution::Sequential).is_err());
    }

    #[test]
    fn stepping_matches_full_scan() {
        for b in [64, 500, 1000, 3000, 20_000] {
            for t in [1, 3, 5, 12] {
                let fast = enumerate_lower_bound_points(b, t, Execution::Parallel).unwrap().count;
                assert_eq!(fast, brute_count(b, t), "B = {b}, t = {t}");
            }
        }
    }

    #[test]
    fn l_t_count_fixtures() {
        assert_eq!(l_t_count(1000, 7, 12).unwrap(), 31);
        let one = l_t_count(1000, 7, 1).unwrap();
        assert_eq!(one, brute_count(1000, 1));
        assert!(one < 31);
        assert_eq!(l_t_count(1000, 11, 12).unwrap(), 0);
        assert!(l_t_count(1000, 9, 12).is_err());
    }

    #[test]
    fn sieve_sequence_fixture() {
        let s = build_sieve_sequence(1000, 7).unwrap();
        assert_eq!(s.total(), 31);
        assert_eq!(s.x_approx, Rational::new(1500, 49));
        let cap = (1000f64).powf(4.0 / 3.0);
        assert!(s.a_n.keys().all(|&n| (n as f64) <= cap));
        assert!(build_sieve_sequence(1000, 5).is_err());
        assert!(build_sieve_sequence(1000, 8).is_err());

        let one = sum_over_d(&s, 1).unwrap();
        assert_eq!(one.exact, 31);
        assert!((one.predicted - 1500.0 / 49.0).abs() < 1e-12);
        let d7 = sum_over_d(&s, 7).unwrap();
        assert_eq!(d7.exact, s.a_n.iter().filter(|(n, _)| *n % 7 == 0).map(|(_, c)| c).sum::<u64>());
        assert!((d7.predicted - (8.0 / 7.0) / 7.0 * 1500.0 / 49.0).abs() < 1e-12);
        let d3 = sum_over_d(&s, 3).unwrap();
        assert!((d3.predicted - (7.0 / 3.0) / 3.0 * 1500.0 / 49.0).abs() < 1e-12);
        assert!(sum_over_d(&s, 4).is_err());
    }

    #[test]
    fn rho_fixtures() {
        assert_eq!(rho(1, 7).unwrap(), Rational::one());
        assert_eq!(rho(7, 7).unwrap(), Rational::new(8, 7));
        assert_eq!(rho(3, 7).unwrap(), Rational::new(7, 3));
        assert_eq!(rho(2, 7).unwrap(), Rational::from_integer(2));
        assert_eq!(rho(15, 7).unwrap(), Rational::new(91, 15));
        assert!(rho(12, 7).is_err());
        assert!(rho(3, 9).is_err());
    }

    #[test]
    fn rho_prime_values() {
        for q in [5, 7, 101] {
            for p in primes_up_to(150) {
                let expect = if p == q {
                    Rational::new(q as i128 + 1, q as i128)
                } else {
                    Rational::new(3 * p as i128 - 2, p as i128)
                };
                assert_eq!(rho(p, q).unwrap(), expect, "p = {p}, q = {q}");
            }
        }
    }

    #[test]
    fn rho_oracle_fixtures() {
        let r = rho_oracle_prime(3, 7).unwrap();
        assert_eq!(r.brute, Rational::new(7, 9));
        assert_eq!(r.formula, Rational::new(7, 9));
        let r = rho_oracle_prime(5, 7).unwrap();
        assert_eq!(r.brute, Rational::new(13, 25));
        assert_eq!(r.brute, r.formula);
        assert!(rho_oracle_prime(7, 7).is_err());
        assert!(rho_oracle_prime(2, 7).is_err());
        assert!(rho_oracle_prime(9, 7).is_err());
    }

    #[test]
    fn rho_multiplicative_including_q() {
        let q = 7;
        for (d1, d2) in [(3, 5), (7, 11), (2, 21), (6, 35), (14, 15)] {
            assert!(rho_is_multiplicative_at(d1, d2, q).unwrap(), "{d1} {d2}");
        }
        assert!(rho_is_multiplicative_at(6, 4, q).is_err());
    }

    #[test]
    fn threshold_arithmetic() {
        let general = sieve_threshold(3.0, 4.0, BETA_3);
        assert!((general - 11.4223).abs() < 1e-3);
        assert!(general < 12.0);
        let reduced = 3.0 - 1.0 / BETA_3 + 4.0 * BETA_3.ln();
        assert!((reduced - 10.43).abs() < 1e-2);
        assert!((general - reduced - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sieve_report_fixture() {
        let r = sieve_condition_report(1000, 7, 0.4, 1.0, 1.0).unwrap();
        assert_eq!(r.x_approx_exact, "1500/49");
        assert_eq!(r.sequence_total, 31);
        assert!(r.w2_sum.is_finite() && r.w2_sum >= 0.0);
        assert!(r.target_qualifies);
        assert!(r.w1_min_c1.is_finite());
        assert!(r.rho_table.iter().any(|e| e.d == 7 && e.rho == "8/7"));
        // X^tau / log^c2 X < 1 leaves the sum empty.
        let empty = sieve_condition_report(1000, 7, 0.01, 5.0, 1.0).unwrap();
        assert_eq!(empty.d_max, 0);
        assert_eq!(empty.w2_sum, 0.0);
        assert!(sieve_condition_report(1000, 7, 1.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn growth_fixtures() {
        let rows = m_t_growth(&[1000], 12, Execution::Parallel).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].count, 31);
        let lo = m_t_growth(&[1000, 10_000, 100_000], 3, Execution::Parallel).unwrap();
        let hi = m_t_growth(&[1000, 10_000, 100_000], 12, Execution::Parallel).unwrap();
        for (a, b) in lo.iter().zip(&hi) {
            assert!(b.count >= a.count);
        }
        assert!(hi.windows(2).all(|w| w[1].count > w[0].count));
        assert!(m_t_growth(&[1000, 1000], 12, Execution::Parallel).is_err());
    }

    #[test]
    fn parallel_matches_sequential() {
        let a = enumerate_lower_bound_points(200_000, 12, Execution::Parallel).unwrap();
        let b = enumerate_lower_bound_points(200_000, 12, Execution::Sequential).unwrap();
        assert_eq!(a, b);
    }
}
