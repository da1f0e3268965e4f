//! `ε(p)`, the multiplicative order `ℓ_b(p)`, the rank of apparition `ω(p)`
//! and per-prime admissibility.
//!
//! Orders are found by descent: start from a known multiple (`p - 1`, or
//! `p - ε(p)` for the rank) and divide out prime factors, smallest first,
//! while the defining congruence still holds.

use serde::{Deserialize, Serialize};

use crate::arith::{gcd, jacobi, lucas_u_pair, pow_in, LucasParams, Montgomery, Plain, Ring};
use crate::error::{Error, Result};
use crate::sieve_gen::{FactoredPrime, Factorization, SegmentedSieve};

/// Default upper limit for cached small-prime profiles.
pub const DEFAULT_CACHE_LIMIT: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrimeProfile {
    pub p: u64,
    pub epsilon: i8,
    pub ell: u64,
    pub omega: u64,
    pub admissible: bool,
}

/// Why a prime never takes part in a pre-product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    Two,
    DividesBase,
    DividesQ,
    DividesD,
}

pub fn skip_reason(params: &LucasParams, p: u64) -> Option<SkipReason> {
    if p == 2 {
        Some(SkipReason::Two)
    } else if params.b() % p == 0 {
        Some(SkipReason::DividesBase)
    } else if params.q().unsigned_abs() % p == 0 {
        Some(SkipReason::DividesQ)
    } else if params.d().unsigned_abs() % p == 0 {
        Some(SkipReason::DividesD)
    } else {
        None
    }
}

/// `ε(n) = (D | n)` for odd `n` coprime to `D`.
pub fn epsilon_of(params: &LucasParams, n: u64) -> Result<i8> {
    match jacobi(params.d(), n)? {
        0 => Err(Error::Domain(format!("gcd({n}, D = {}) > 1", params.d()))),
        e => Ok(e),
    }
}

fn order_in<R: Ring>(ring: &R, base: u64, mut m: u64, factors: &[(u64, u32)]) -> u64 {
    let one = ring.one();
    for &(q, e) in factors {
        for _ in 0..e {
            if pow_in(ring, base, m / q) == one {
                m /= q;
            } else {
                break;
            }
        }
    }
    m
}

fn rank_in<R: Ring>(ring: &R, p: u64, q: u64, mut m: u64, factors: &[(u64, u32)]) -> u64 {
    for &(r, e) in factors {
        for _ in 0..e {
            if lucas_u_pair(ring, p, q, m / r).0 == ring.zero() {
                m /= r;
            } else {
                break;
            }
        }
    }
    m
}

/// Least `e >= 1` with `b^e ≡ 1 (mod p)`, given the factorization of `p - 1`.
pub fn multiplicative_order(b: u64, p: u64, factors_p_minus_1: &[(u64, u32)]) -> Result<u64> {
    if p < 2 {
        return Err(Error::InvalidArgument(format!("{p} is not a prime")));
    }
    if b % p == 0 {
        return Err(Error::Domain(format!("base {b} is divisible by {p}")));
    }
    Ok(if p % 2 == 1 {
        let ring = Montgomery::new(p);
        order_in(&ring, ring.elem(b), p - 1, factors_p_minus_1)
    } else {
        let ring = Plain::new(p);
        order_in(&ring, ring.elem(b), p - 1, factors_p_minus_1)
    })
}

/// Least `m >= 1` with `U_m ≡ 0 (mod p)`, given the factorization of `p - ε(p)`.
pub fn rank_of_apparition(
    params: &LucasParams,
    p: u64,
    factors_p_minus_eps: &[(u64, u32)],
) -> Result<u64> {
    if p == 2 || params.q().unsigned_abs() % p == 0 || params.d().unsigned_abs() % p == 0 {
        return Err(Error::Domain(format!("{p} divides 2QD")));
    }
    let eps = epsilon_of(params, p)?;
    let start = if eps == 1 { p - 1 } else { p + 1 };
    let ring = Montgomery::new(p);
    Ok(rank_in(
        &ring,
        ring.elem_signed(params.p()),
        ring.elem_signed(params.q()),
        start,
        factors_p_minus_eps,
    ))
}

/// Full profile of a factored prime; `None` when `p | 2bQD`.
pub fn prime_profile(params: &LucasParams, fp: &FactoredPrime) -> Option<PrimeProfile> {
    let p = fp.p;
    if skip_reason(params, p).is_some() {
        return None;
    }
    let eps = epsilon_of(params, p).ok()?;
    let ring = Montgomery::new(p);
    let ell = order_in(&ring, ring.elem(params.b()), p - 1, &fp.factors_p_minus_1);
    let (start, factors) = if eps == 1 {
        (p - 1, &fp.factors_p_minus_1)
    } else {
        (p + 1, &fp.factors_p_plus_1)
    };
    let omega = rank_in(
        &ring,
        ring.elem_signed(params.p()),
        ring.elem_signed(params.q()),
        start,
        factors,
    );
    Some(PrimeProfile {
        p,
        epsilon: eps,
        ell,
        omega,
        admissible: gcd(ell, omega) <= 2,
    })
}

/// Which primes a profile scan should report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpsilonFilter {
    Plus,
    Minus,
    Any,
}

impl EpsilonFilter {
    fn accepts(self, eps: i8) -> bool {
        match self {
            EpsilonFilter::Plus => eps == 1,
            EpsilonFilter::Minus => eps == -1,
            EpsilonFilter::Any => true,
        }
    }
}

/// Profile of `p` if it is admissible, `None` otherwise (including skipped
/// primes). `factor` supplies factorizations of `p - 1` and `p + 1`.
///
/// For `ε(p) = -1` admissibility is automatic (`ℓ | p - 1`, `ω | p + 1`).
/// For `ε(p) = +1` each prime `q` dividing `ℓ` is checked against `ω`
/// before `ω` is computed in full: `q | ω` exactly when `U_{(p-1)/q^a}` is
/// nonzero mod `p`, where `q^a` is the full power of `q` in `p - 1`.
pub fn admissible_profile(
    params: &LucasParams,
    p: u64,
    filter: EpsilonFilter,
    factor: impl Fn(u64) -> Factorization,
) -> Option<PrimeProfile> {
    if skip_reason(params, p).is_some() {
        return None;
    }
    let eps = epsilon_of(params, p).ok()?;
    if !filter.accepts(eps) {
        return None;
    }
    let ring = Montgomery::new(p);
    let pe = ring.elem_signed(params.p());
    let qe = ring.elem_signed(params.q());
    let below = factor(p - 1);
    let ell = order_in(&ring, ring.elem(params.b()), p - 1, &below);
    let omega = if eps == -1 {
        rank_in(&ring, pe, qe, p + 1, &factor(p + 1))
    } else {
        for &(q, a) in &below {
            if ell % q != 0 {
                continue;
            }
            let probe = if q == 2 {
                if ell % 4 != 0 {
                    continue;
                }
                (p - 1) >> (a - 1)
            } else {
                (p - 1) / q.pow(a)
            };
            if lucas_u_pair(&ring, pe, qe, probe).0 != ring.zero() {
                return None;
            }
        }
        rank_in(&ring, pe, qe, p - 1, &below)
    };
    let admissible = gcd(ell, omega) <= 2;
    admissible.then_some(PrimeProfile {
        p,
        epsilon: eps,
        ell,
        omega,
        admissible,
    })
}

/// All admissible profiles for primes in `[lo, hi]` passing `filter`, increasing.
pub fn admissible_profiles(
    params: &LucasParams,
    lo: u64,
    hi: u64,
    filter: EpsilonFilter,
    segment_size: u64,
) -> Result<Vec<PrimeProfile>> {
    let mut out = Vec::new();
    if hi < lo.max(3) {
        return Ok(out);
    }
    let sieve = SegmentedSieve::with_segment_size(lo.max(3), hi, segment_size)?;
    for (start, end) in sieve.ranges() {
        let segment = sieve.factored_segment(start, end);
        out.extend(
            segment
                .primes()
                .iter()
                .filter_map(|&p| admissible_profile(params, p, filter, |v| segment.factor(v))),
        );
    }
    Ok(out)
}
