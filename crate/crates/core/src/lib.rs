//! Tabulation of `(b, P, Q)`-challenge pseudoprimes: composites `n` that are
//! simultaneously base-`b` Fermat pseudoprimes and `(P, Q)`-Lucas
//! pseudoprimes with Jacobi symbol `(D | n) = -1`, where `D = P^2 - 4Q`.
//!
//! Candidates are built as `n = k·p` from admissible pre-products `k`.
//! Small pre-products find `p` among the prime divisors of
//! `gcd(b^{k-1} - 1, U_{k-ε(k)})`; large ones scan the arithmetic
//! progression `p ≡ k^{-1} (mod L)`, `p ≡ -k^{-1} (mod W)`.

pub mod arith;
mod factor;
pub mod gcd_step;
pub mod error;
pub mod orders;
pub mod preproduct;
pub mod sieve_gen;
pub mod sieve_step;
pub mod squares;
pub mod tabulate;
pub mod verify;

pub use arith::{LucasParams, SizeBudget};
pub use error::{Error, Result};
