//! Sieve step for large pre-products: every admissible `p` lies in a single
//! residue class `p ≡ k^{-1} (mod L)`, `p ≡ -k^{-1} (mod W)`, and the class is
//! walked over `(P(k), B/k]`.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};

use crate::arith::{inverse_mod, LucasParams};
use crate::error::{Error, Result};
use crate::preproduct::Preproduct;
use crate::sieve_gen::is_prime_64;
use crate::verify::{challenge_verdict, passes_fermat, FoundBy, PspRecord};

/// Records found by one step plus the number of candidate `p` examined.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StepOutcome {
    pub records: Vec<PspRecord>,
    pub candidates_tested: u64,
}

/// Solves `x ≡ r1 (mod l)`, `x ≡ r2 (mod w)`.
///
/// Returns `(r, lcm(l, w))` with `0 <= r < lcm`, or `None` when the two
/// congruences are incompatible. Fails if the lcm does not fit in 128 bits.
pub fn crt_residue(r1: u128, l: u128, r2: u128, w: u128) -> Result<Option<(u128, u128)>> {
    if l == 0 || w == 0 {
        return Err(Error::InvalidArgument("CRT moduli must be positive".into()));
    }
    let (l, w) = (BigInt::from(l), BigInt::from(w));
    let (r1, r2) = (BigInt::from(r1) % &l, BigInt::from(r2) % &w);
    let ext = l.extended_gcd(&w);
    let g = ext.gcd;
    let diff = &r2 - &r1;
    if !(&diff % &g).is_zero() {
        return Ok(None);
    }
    let m = &l / &g * &w;
    // l·x ≡ diff (mod w), with x = (diff/g)·(l/g)^{-1} mod (w/g)
    let wg = &w / &g;
    let x = (&diff / &g * &ext.x).mod_floor(&wg);
    let r = (&r1 + &l * x).mod_floor(&m);
    let to_u128 = |v: &BigInt| {
        v.to_biguint().as_ref().and_then(BigUint::to_u128).ok_or_else(|| {
            Error::InvalidArgument("CRT modulus exceeds 128 bits".into())
        })
    };
    Ok(Some((to_u128(&r)?, to_u128(&m)?)))
}

/// The residue class `(r, M)` containing every prime `p` that can complete
/// `pre`, or `None` if no integer satisfies both congruences.
pub fn progression(pre: &Preproduct) -> Result<Option<(u128, u128)>> {
    let limit = 1u128 << 126;
    if pre.l() >= limit || pre.w() >= limit {
        return Err(Error::InvalidArgument(format!(
            "moduli of pre-product {} exceed 126 bits",
            pre.k()
        )));
    }
    let k = pre.k() as u128;
    let (Some(inv_l), Some(inv_w)) = (inverse_mod(k, pre.l()), inverse_mod(k, pre.w())) else {
        return Ok(None);
    };
    let neg_inv_w = (pre.w() - inv_w) % pre.w();
    crt_residue(inv_l, pre.l(), neg_inv_w, pre.w())
}

/// First member of the class of `pre` above `P(k)`, the modulus, and the
/// last admissible value `bound / k`.
fn class_span(pre: &Preproduct, bound: u64) -> Result<Option<(u128, u128, u128)>> {
    let Some((r, m)) = progression(pre)? else {
        return Ok(None);
    };
    let lo = pre.largest_prime() as u128 + 1;
    let hi = (bound / pre.k()) as u128;
    let first = if r >= lo { r } else { r + (lo - r).div_ceil(m) * m };
    Ok((first <= hi).then_some((first, m, hi)))
}

/// Number of members of the class of `pre` in `(P(k), bound/k]`.
pub(crate) fn progression_len(pre: &Preproduct, bound: u64) -> Result<u64> {
    Ok(class_span(pre, bound)?.map_or(0, |(first, m, hi)| ((hi - first) / m + 1) as u64))
}

/// Calls `f` for every member of the class of `pre` in `(P(k), bound/k]`.
/// Returns the number of members visited.
pub(crate) fn for_each_in_progression(
    pre: &Preproduct,
    bound: u64,
    mut f: impl FnMut(u64) -> Result<()>,
) -> Result<u64> {
    let Some((mut x, m, hi)) = class_span(pre, bound)? else {
        return Ok(0);
    };
    let mut visited = 0;
    while x <= hi {
        visited += 1;
        f(x as u64)?;
        x += m;
    }
    Ok(visited)
}

pub(crate) fn record_for(pre: &Preproduct, p: u64, params: &LucasParams, found_by: FoundBy) -> PspRecord {
    let mut factors = pre.primes();
    factors.push(p);
    PspRecord {
        n: pre.k() * p,
        factors,
        params: *params,
        found_by,
    }
}

/// Every challenge pseudoprime `n = k·p <= bound` with `p > P(k)` prime,
/// found by walking the residue class of `pre`.
pub fn sieve_step(pre: &Preproduct, bound: u64, params: &LucasParams) -> Result<StepOutcome> {
    let mut out = StepOutcome::default();
    out.candidates_tested = for_each_in_progression(pre, bound, |p| {
        let n = pre.k() * p;
        if passes_fermat(n, params.b()) && is_prime_64(p) && challenge_verdict(n, params).is_challenge {
            out.records.push(record_for(pre, p, params, FoundBy::SieveStep));
        }
        Ok(())
    })?;
    Ok(out)
}
