use thiserror::Error;

/// Errors raised when an operation's precondition does not hold.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("argument must be positive, got {0}")]
    NonPositive(i128),
    #[error("{value} is out of range: {reason}")]
    OutOfRange { value: String, reason: &'static str },
    #[error("Jacobi symbol needs an odd positive modulus, got {0}")]
    BadJacobiModulus(i128),
    #[error("{a} is not invertible modulo {q}")]
    NotInvertible { a: i128, q: u64 },
    #[error("epsilon symbol is only defined for odd n, got {0}")]
    EvenEpsilon(i128),
    #[error("coefficients not coprime to the modulus: gcd({what}, {modulus}) > 1")]
    NotCoprime { what: String, modulus: u64 },
    #[error("{0} is not square-free")]
    NotSquareFree(u64),
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("upper boundary lies below the lower boundary at y = {y}")]
    InvertedBoundary { y: String },
    #[error("invalid parameter: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
