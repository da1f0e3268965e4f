//! Admissible pre-products `k = p_1 ⋯ p_j` with strictly increasing primes.
//!
//! `L` and `W` (the lcm of the `ℓ_b(p_i)` and of the `ω(p_i)`) and `ε(k)` are
//! maintained as primes are appended. A pre-product is admissible when
//! `gcd(L, W) <= 2`; extension also requires `gcd(k, L) = gcd(k, W) = 1`.
//!
//! Enumeration is depth-first, so a subtree is identified by its first
//! prime. That root is the unit of work for scheduling and checkpointing.

use crate::arith::{checked_lcm, gcd_u128, iroot, LucasParams};
use crate::error::{Error, Result};
use crate::orders::{admissible_profile, admissible_profiles, EpsilonFilter, PrimeProfile};
use crate::sieve_gen::SegmentedSieve;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Preproduct {
    k: u64,
    factors: Vec<PrimeProfile>,
    l: u128,
    w: u128,
    eps: i8,
}

impl Preproduct {
    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn factors(&self) -> &[PrimeProfile] {
        &self.factors
    }

    pub fn primes(&self) -> Vec<u64> {
        self.factors.iter().map(|f| f.p).collect()
    }

    /// `L = lcm ℓ_b(p_i)`
    pub fn l(&self) -> u128 {
        self.l
    }

    /// `W = lcm ω(p_i)`
    pub fn w(&self) -> u128 {
        self.w
    }

    pub fn eps(&self) -> i8 {
        self.eps
    }

    /// Largest prime factor `P(k)`.
    pub fn largest_prime(&self) -> u64 {
        self.factors.last().map_or(1, |f| f.p)
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    /// The new prime does not exceed the current largest prime.
    NotIncreasing,
    InadmissiblePrime,
    /// `gcd(L', W') > 2`.
    GcdLW(u128),
    /// `gcd(k', L' W') > 1`.
    SharesFactor,
    Overflow,
}

/// Appends `profile` to `parent` (`None` is the empty pre-product).
pub fn extend(
    parent: Option<&Preproduct>,
    profile: &PrimeProfile,
) -> std::result::Result<Preproduct, Rejection> {
    if parent.is_some_and(|parent| profile.p <= parent.largest_prime()) {
        return Err(Rejection::NotIncreasing);
    }
    if !profile.admissible {
        return Err(Rejection::InadmissiblePrime);
    }
    let Some(parent) = parent else {
        return Ok(Preproduct {
            k: profile.p,
            factors: vec![*profile],
            l: profile.ell as u128,
            w: profile.omega as u128,
            eps: profile.epsilon,
        });
    };
    let k = parent.k.checked_mul(profile.p).ok_or(Rejection::Overflow)?;
    let l = checked_lcm(parent.l, profile.ell as u128).ok_or(Rejection::Overflow)?;
    let w = checked_lcm(parent.w, profile.omega as u128).ok_or(Rejection::Overflow)?;
    let g = gcd_u128(l, w);
    if g > 2 {
        return Err(Rejection::GcdLW(g));
    }
    if gcd_u128(k as u128, l) != 1 || gcd_u128(k as u128, w) != 1 {
        return Err(Rejection::SharesFactor);
    }
    let mut factors = parent.factors.clone();
    factors.push(*profile);
    Ok(Preproduct {
        k,
        factors,
        l,
        w,
        eps: parent.eps * profile.epsilon,
    })
}

/// Admissible prime profiles in increasing order: cached up to a limit,
/// regenerated segment by segment beyond it.
#[derive(Debug, Clone)]
pub struct ProfileSource {
    params: LucasParams,
    cached: Vec<PrimeProfile>,
    cache_limit: u64,
    max_prime: u64,
    segment_size: u64,
}

impl ProfileSource {
    /// Profiles for primes up to `max_prime`; those `<= cache_limit` are
    /// computed now and kept.
    pub fn new(
        params: &LucasParams,
        max_prime: u64,
        cache_limit: u64,
        segment_size: u64,
    ) -> Result<Self> {
        let top = max_prime.min(cache_limit);
        let cached = if top >= 3 {
            admissible_profiles(params, 3, top, EpsilonFilter::Any, segment_size)?
        } else {
            Vec::new()
        };
        Ok(ProfileSource {
            params: *params,
            cached,
            cache_limit: top,
            max_prime,
            segment_size,
        })
    }

    pub fn params(&self) -> &LucasParams {
        &self.params
    }

    pub fn max_prime(&self) -> u64 {
        self.max_prime
    }

    /// Calls `f` for each admissible profile with `after < p <= upto`,
    /// increasing.
    pub fn for_each(
        &self,
        after: u64,
        upto: u64,
        mut f: impl FnMut(&PrimeProfile) -> Result<()>,
    ) -> Result<()> {
        let upto = upto.min(self.max_prime);
        if upto <= after {
            return Ok(());
        }
        let start = self.cached.partition_point(|pp| pp.p <= after);
        for pp in self.cached[start..].iter().take_while(|pp| pp.p <= upto) {
            f(pp)?;
        }
        if upto > self.cache_limit {
            let lo = after.max(self.cache_limit) + 1;
            let sieve = SegmentedSieve::with_segment_size(lo.max(3), upto, self.segment_size)?;
            for (s, e) in sieve.ranges() {
                let segment = sieve.factored_segment(s, e);
                for &p in segment.primes() {
                    if let Some(pp) = admissible_profile(&self.params, p, EpsilonFilter::Any, |v| {
                        segment.factor(v)
                    }) {
                        f(&pp)?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Largest `p` with `k · p^{e} < bound`, i.e. `p^e <= (bound - 1) / k`.
fn prime_ceiling(k: u64, e: u32, bound: u64) -> u64 {
    if bound <= k {
        return 0;
    }
    iroot((bound - 1) / k, e)
}

/// First primes of every subtree of pre-products with `num_factors` primes.
pub fn subtree_roots(
    source: &ProfileSource,
    bound: u64,
    num_factors: u32,
) -> Result<Vec<PrimeProfile>> {
    check_factor_count(num_factors)?;
    let mut roots = Vec::new();
    source.for_each(2, prime_ceiling(1, num_factors + 1, bound), |pp| {
        roots.push(*pp);
        Ok(())
    })?;
    Ok(roots)
}

fn check_factor_count(num_factors: u32) -> Result<()> {
    if num_factors == 0 {
        return Err(Error::InvalidArgument(
            "pre-products need at least one prime (t >= 2)".into(),
        ));
    }
    Ok(())
}

/// Visits every admissible pre-product with `num_factors` primes whose first
/// prime is `root` and with `k · P(k) < bound`.
pub fn enumerate_subtree(
    root: &PrimeProfile,
    bound: u64,
    num_factors: u32,
    source: &ProfileSource,
    visitor: &mut impl FnMut(&Preproduct) -> Result<()>,
) -> Result<()> {
    check_factor_count(num_factors)?;
    if (root.p as u128)
        .checked_pow(num_factors + 1)
        .is_none_or(|x| x >= bound as u128)
    {
        return Ok(());
    }
    match extend(None, root) {
        Ok(pre) => descend(&pre, num_factors - 1, bound, source, visitor),
        Err(_) => Ok(()),
    }
}

fn descend(
    pre: &Preproduct,
    remaining: u32,
    bound: u64,
    source: &ProfileSource,
    visitor: &mut impl FnMut(&Preproduct) -> Result<()>,
) -> Result<()> {
    if remaining == 0 {
        return visitor(pre);
    }
    let ceiling = prime_ceiling(pre.k, remaining + 1, bound);
    source.for_each(pre.largest_prime(), ceiling, |pp| match extend(Some(pre), pp) {
        Ok(child) => descend(&child, remaining - 1, bound, source, visitor),
        Err(_) => Ok(()),
    })
}

/// Visits every admissible pre-product with `num_factors` primes and
/// `k · P(k) < bound`, each exactly once.
pub fn enumerate(
    bound: u64,
    num_factors: u32,
    source: &ProfileSource,
    mut visitor: impl FnMut(&Preproduct) -> Result<()>,
) -> Result<()> {
    for root in subtree_roots(source, bound, num_factors)? {
        enumerate_subtree(&root, bound, num_factors, source, &mut visitor)?;
    }
    Ok(())
}
