//! GCD step for small pre-products: every admissible `p` divides
//! `g(k) = gcd(b^{k-1} - 1, U_{k-ε(k)})`, so the candidates are the prime
//! divisors of `g(k)` in `(P(k), B/k]`.

use num_bigint::BigUint;
use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::arith::{big_gcd, lucas_u_mod_big, pow_minus_one_exact, LucasParams, SizeBudget};
use crate::error::{Error, Result};
use crate::factor::{default_rho_budget, search_bounded_divisors};
use crate::preproduct::Preproduct;
use crate::sieve_step::{for_each_in_progression, progression_len, record_for, StepOutcome};
use crate::sieve_gen::is_prime_64;
use crate::verify::{challenge_verdict, FoundBy};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepOptions {
    pub budget: SizeBudget,
    /// Seed for the randomized splitting of `g(k)`.
    pub seed: u64,
}

/// `gcd(b^{k-1} - 1, U_{k-ε(k)})`. `U` is only ever reduced modulo the first
/// operand.
pub fn g_of_k(pre: &Preproduct, params: &LucasParams, budget: &SizeBudget) -> Result<BigUint> {
    let k = pre.k();
    let a = pow_minus_one_exact(params.b(), k - 1, budget)?;
    let index = if pre.eps() == 1 { k - 1 } else { k + 1 };
    if a.is_zero() {
        return Ok(a);
    }
    let u = lucas_u_mod_big(params, index, &a);
    Ok(big_gcd(&a, &u))
}

/// Primes `p` with `lo < p <= hi` dividing `g`, increasing.
///
/// Fails with [`Error::IncompleteFactorization`] when a composite cofactor
/// resists splitting and might hide a prime in range.
pub fn bounded_prime_divisors(g: &BigUint, lo: u64, hi: u64) -> Result<Vec<u64>> {
    bounded_prime_divisors_seeded(g, lo, hi, 0)
}

pub fn bounded_prime_divisors_seeded(g: &BigUint, lo: u64, hi: u64, seed: u64) -> Result<Vec<u64>> {
    if g.is_zero() {
        return Err(Error::InvalidArgument("every prime divides 0".into()));
    }
    if hi <= lo {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let found = search_bounded_divisors(g, lo, hi, default_rho_budget(hi), &mut rng);
    match found.unresolved.first() {
        None => Ok(found.primes),
        Some(x) => Err(Error::IncompleteFactorization {
            bits: x.bits(),
            lo,
            hi,
        }),
    }
}

/// Every challenge pseudoprime `n = k·p <= bound` with `p > P(k)` prime,
/// found among the prime divisors of `g(k)`.
pub fn gcd_step(
    pre: &Preproduct,
    bound: u64,
    params: &LucasParams,
    opts: &StepOptions,
) -> Result<StepOutcome> {
    let lo = pre.largest_prime();
    let hi = bound / pre.k();
    let mut out = StepOutcome::default();
    if hi <= lo {
        return Ok(out);
    }
    let g = g_of_k(pre, params, &opts.budget)?;
    if g.is_zero() {
        return Err(Error::Domain(format!("g({}) vanishes", pre.k())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ pre.k());
    // Splitting never needs to cost more than walking the residue class.
    let rho_budget = default_rho_budget(hi).min(progression_len(pre, bound)?.max(1 << 10));
    let found = search_bounded_divisors(&g, lo, hi, rho_budget, &mut rng);
    let mut primes = found.primes;
    if !found.unresolved.is_empty() {
        log::debug!(
            "k = {}: {} cofactor(s) of g(k) left unsplit, scanning the residue class instead",
            pre.k(),
            found.unresolved.len()
        );
        for_each_in_progression(pre, bound, |p| {
            if is_prime_64(p)
                && !primes.contains(&p)
                && found.unresolved.iter().any(|x| (x % p).is_zero())
            {
                primes.push(p);
            }
            Ok(())
        })?;
        primes.sort_unstable();
    }
    for p in primes {
        out.candidates_tested += 1;
        let n = pre.k() * p;
        if challenge_verdict(n, params).is_challenge {
            out.records.push(record_for(pre, p, params, FoundBy::GcdStep));
        }
    }
    Ok(out)
}
