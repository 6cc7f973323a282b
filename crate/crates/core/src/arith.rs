//! Integer primitives: factorisation, primality, Jacobi symbols, modular
//! inverses and the multiplicative functions built from a factorisation.

use num_complex::Complex64;
use num_integer::Integer;
use num_rational::Ratio;

use crate::{Error, Result};

/// Exact rational number. Always reduced, with a positive denominator.
pub type Rational = Ratio<i128>;

/// Largest argument accepted by [`factorize`] and [`is_prime`] is `2^63 - 1`.
pub const MAX_ARG: u64 = (1 << 63) - 1;

const TRIAL_LIMIT: u64 = 1_000_000;

/// Prime factorisation of a positive integer.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Factorization {
    n: u64,
    factors: Vec<(u64, u32)>,
}

impl Factorization {
    pub fn n(&self) -> u64 {
        self.n
    }

    /// `(prime, exponent)` pairs, primes strictly increasing.
    pub fn factors(&self) -> &[(u64, u32)] {
        &self.factors
    }

    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.factors.iter().map(|&(p, _)| p)
    }

    /// Reconstructs `n` from the factor list.
    pub fn product(&self) -> u128 {
        self.factors
            .iter()
            .map(|&(p, e)| (p as u128).pow(e))
            .product()
    }

    pub fn is_square_free(&self) -> bool {
        self.factors.iter().all(|&(_, e)| e == 1)
    }

    /// All positive divisors in increasing order.
    pub fn divisors(&self) -> Vec<u64> {
        let mut divs = vec![1u64];
        for &(p, e) in &self.factors {
            let len = divs.len();
            let mut pk = 1u64;
            for _ in 0..e {
                pk *= p;
                for i in 0..len {
                    divs.push(divs[i] * pk);
                }
            }
        }
        divs.sort_unstable();
        divs
    }

    /// Number of divisors.
    pub fn tau(&self) -> u64 {
        self.factors.iter().map(|&(_, e)| e as u64 + 1).product()
    }

    /// Euler's totient.
    pub fn phi(&self) -> u64 {
        self.factors
            .iter()
            .map(|&(p, e)| (p - 1) * p.pow(e - 1))
            .product()
    }

    /// `phi(n) / n` as an exact rational.
    pub fn phi_star(&self) -> Rational {
        self.factors
            .iter()
            .map(|&(p, _)| Rational::new(p as i128 - 1, p as i128))
            .product()
    }

    pub fn mobius(&self) -> i8 {
        if !self.is_square_free() {
            0
        } else if self.factors.len() % 2 == 0 {
            1
        } else {
            -1
        }
    }

    /// Prime factors counted with multiplicity.
    pub fn big_omega(&self) -> u32 {
        self.factors.iter().map(|&(_, e)| e).sum()
    }

    /// Distinct prime factors.
    pub fn little_omega(&self) -> u32 {
        self.factors.len() as u32
    }

    /// `sum_{d | n} d^{-1/2}`, evaluated as an Euler product.
    pub fn sigma_half_inv(&self) -> f64 {
        self.factors
            .iter()
            .map(|&(p, e)| {
                let r = (p as f64).sqrt().recip();
                let mut acc = 1.0;
                let mut term = 1.0;
                for _ in 0..e {
                    term *= r;
                    acc += term;
                }
                acc
            })
            .product()
    }
}

/// `L(n) = log(n + 1)`.
pub fn log_l(n: f64) -> f64 {
    n.ln_1p()
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin. The first twelve primes as witnesses are
/// sufficient for every `n < 3.3 * 10^24`, so the test is exact on `u64`.
pub fn is_prime(n: u64) -> bool {
    const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &p in &WITNESSES {
        if n % p == 0 {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &a in &WITNESSES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

// Brent's variant of Pollard rho. `n` must be odd and composite.
fn pollard_brent(n: u64) -> u64 {
    let mut c = 1u64;
    loop {
        let f = |x: u64| (mul_mod(x, x, n) + c) % n;
        let (mut x, mut y, mut g) = (2u64, 2u64, 1u64);
        let mut q = 1u64;
        let mut ys = y;
        let mut r = 1u64;
        const BATCH: u64 = 128;
        while g == 1 {
            x = y;
            for _ in 0..r {
                y = f(y);
            }
            let mut k = 0;
            while k < r && g == 1 {
                ys = y;
                for _ in 0..BATCH.min(r - k) {
                    y = f(y);
                    q = mul_mod(q, x.abs_diff(y), n);
                }
                g = q.gcd(&n);
                k += BATCH;
            }
            r *= 2;
        }
        if g == n {
            // Batched product collapsed; step back one at a time.
            loop {
                ys = f(ys);
                g = x.abs_diff(ys).gcd(&n);
                if g > 1 {
                    break;
                }
            }
        }
        if g != n {
            return g;
        }
        c += 1;
    }
}

fn split_into(n: u64, out: &mut Vec<u64>) {
    if n == 1 {
        return;
    }
    if is_prime(n) {
        out.push(n);
        return;
    }
    let d = pollard_brent(n);
    split_into(d, out);
    split_into(n / d, out);
}

/// Factorises `1 <= n < 2^63`: trial division up to `10^6`, then Pollard rho
/// backed by [`is_prime`] on the cofactor.
pub fn factorize(n: u64) -> Result<Factorization> {
    if n == 0 {
        return Err(Error::NonPositive(0));
    }
    if n > MAX_ARG {
        return Err(Error::OutOfRange {
            value: n.to_string(),
            reason: "factorize expects n < 2^63",
        });
    }
    let mut factors = Vec::new();
    let mut m = n;
    let mut push = |p: u64, m: &mut u64| {
        let mut e = 0;
        while *m % p == 0 {
            *m /= p;
            e += 1;
        }
        if e > 0 {
            factors.push((p, e));
        }
    };
    push(2, &mut m);
    let mut p = 3;
    while p <= TRIAL_LIMIT && p * p <= m {
        push(p, &mut m);
        p += 2;
    }
    if m > 1 {
        let mut rest = Vec::new();
        split_into(m, &mut rest);
        rest.sort_unstable();
        for chunk in rest.chunk_by(|a, b| a == b) {
            factors.push((chunk[0], chunk.len() as u32));
        }
    }
    Ok(Factorization { n, factors })
}

/// Which multiplicative quantity [`arith_function`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithFn {
    Tau,
    SigmaHalfInv,
    Phi,
    PhiStar,
    Mobius,
    BigOmega,
    LittleOmega,
    L,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArithValue {
    Integer(i64),
    Rational(Rational),
    Real(f64),
}

impl ArithValue {
    pub fn as_f64(&self) -> f64 {
        match *self {
            ArithValue::Integer(v) => v as f64,
            ArithValue::Rational(r) => *r.numer() as f64 / *r.denom() as f64,
            ArithValue::Real(v) => v,
        }
    }
}

pub fn arith_function(kind: ArithFn, n: u64) -> Result<ArithValue> {
    if kind == ArithFn::L {
        if n == 0 {
            return Err(Error::NonPositive(0));
        }
        return Ok(ArithValue::Real(log_l(n as f64)));
    }
    let f = factorize(n)?;
    Ok(match kind {
        ArithFn::Tau => ArithValue::Integer(f.tau() as i64),
        ArithFn::SigmaHalfInv => ArithValue::Real(f.sigma_half_inv()),
        ArithFn::Phi => ArithValue::Integer(f.phi() as i64),
        ArithFn::PhiStar => ArithValue::Rational(f.phi_star()),
        ArithFn::Mobius => ArithValue::Integer(f.mobius() as i64),
        ArithFn::BigOmega => ArithValue::Integer(f.big_omega() as i64),
        ArithFn::LittleOmega => ArithValue::Integer(f.little_omega() as i64),
        ArithFn::L => unreachable!(),
    })
}

/// Jacobi symbol `(n / m)` for odd `m >= 1`.
pub fn jacobi(n: i128, m: i128) -> Result<i8> {
    if m < 1 || m % 2 == 0 {
        return Err(Error::BadJacobiModulus(m));
    }
    let mut a = n.rem_euclid(m);
    let mut m = m;
    let mut sign = 1i8;
    while a != 0 {
        while a % 2 == 0 {
            a /= 2;
            if matches!(m % 8, 3 | 5) {
                sign = -sign;
            }
        }
        std::mem::swap(&mut a, &mut m);
        if a % 4 == 3 && m % 4 == 3 {
            sign = -sign;
        }
        a %= m;
    }
    Ok(if m == 1 { sign } else { 0 })
}

/// Inverse of `a` modulo `q`, in `[0, q)`. By convention `mod_inv(a, 1) = 0`.
pub fn mod_inv(a: i128, q: u64) -> Result<u64> {
    if q == 0 {
        return Err(Error::NonPositive(0));
    }
    let m = q as i128;
    let ext = a.rem_euclid(m).extended_gcd(&m);
    if ext.gcd != 1 {
        return Err(Error::NotInvertible { a, q });
    }
    Ok(ext.x.rem_euclid(m) as u64)
}

/// `delta_n`: 0 for even `n`, 1 for odd `n`.
pub fn delta(n: i128) -> u8 {
    n.rem_euclid(2) as u8
}

/// Number of quarter turns in `epsilon_n`: 0 when `n = 1 (mod 4)`, 1 when `n = 3 (mod 4)`.
pub fn epsilon_quarter_turns(n: i128) -> Result<u8> {
    match n.rem_euclid(4) {
        1 => Ok(0),
        3 => Ok(1),
        _ => Err(Error::EvenEpsilon(n)),
    }
}

/// `epsilon_n`: 1 when `n = 1 (mod 4)`, `i` when `n = 3 (mod 4)`.
pub fn epsilon(n: i128) -> Result<Complex64> {
    Ok(match epsilon_quarter_turns(n)? {
        0 => Complex64::new(1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    })
}

/// `(delta_n, epsilon_n)`; fails for even `n` since `epsilon_n` is undefined there.
pub fn unit_symbols(n: i128) -> Result<(u8, Complex64)> {
    Ok((delta(n), epsilon(n)?))
}

/// Primes up to and including `n`, by the sieve of Eratosthenes.
pub fn primes_up_to(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let n = n as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

pub(crate) fn gcd_u64(a: u64, b: u64) -> u64 {
    a.gcd(&b)
}
