//! Counting solutions of inhomogeneous quadratic congruences `ax + by^2 = 0 (mod q)`.
//!
//! The crate is organised bottom-up:
//!
//! - [`arith`]: factorisation, primality, Jacobi symbols and the multiplicative
//!   functions every other module leans on.
//! - [`gausssum`]: quadratic Gauss sums, by direct summation and in closed form.
//! - [`sawtooth`]: the saw-tooth function and its Vaaler trigonometric approximation.
//! - [`congruence`]: exact counters in boxes and between boundary curves, together
//!   with asymptotic main terms and error envelopes.
//! - [`averaged`]: sums of congruence counts over dyadic coefficient families.
//! - [`dp6`]: almost-prime points on the sextic del Pezzo surface of type A2 and
//!   the sieve data attached to them.
//!
//! Data-parallel loops run on rayon when the `parallel` feature is enabled (the
//! default); every parallel path merges its results in a fixed order so output
//! does not depend on the thread count. See [`exec`].

pub mod arith;
pub mod averaged;
pub mod congruence;
pub mod dp6;
mod error;
pub mod exec;
pub mod gausssum;
pub mod sawtooth;

pub use error::{Error, Result};
pub use exec::Execution;
