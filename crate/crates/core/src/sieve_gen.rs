//! Prime generation with factorization support.
//!
//! [`SegmentedSieve`] walks `[lo, hi]` in fixed-size segments. For each
//! segment it finds the primes and, for every even value in the segment
//! (the neighbours `p - 1` and `p + 1` of odd primes are even), records the
//! odd sieving primes that divide it. Exponents are only recovered when a
//! factorization is actually requested, so the walk itself does no division.

use crate::arith::{pow_in, Montgomery, Ring};
use crate::error::{Error, Result};

/// `(prime, exponent)` pairs in increasing prime order.
pub type Factorization = Vec<(u64, u32)>;

/// Product of a factorization, `None` on `u128` overflow.
pub fn factorization_product(factors: &[(u64, u32)]) -> Option<u128> {
    factors.iter().try_fold(1u128, |acc, &(p, e)| {
        (0..e).try_fold(acc, |acc, _| acc.checked_mul(p as u128))
    })
}

/// Default memory budget for [`smallest_factor_table`], in entries.
pub const DEFAULT_TABLE_BUDGET: u64 = 1 << 28;

/// Default number of integers covered by one sieve segment.
pub const DEFAULT_SEGMENT_SIZE: u64 = 1 << 17;

/// Largest `hi` accepted by [`SegmentedSieve`].
pub const MAX_SIEVE_BOUND: u64 = 1 << 42;

// Distinct odd primes of an even value below 2^43 number at most 10.
const SLOTS: usize = 11;

/// Entry `i` holds the least prime dividing `i`, for `2 <= i <= limit`.
#[derive(Debug, Clone)]
pub struct SmallestFactorTable {
    spf: Vec<u32>,
}

impl SmallestFactorTable {
    pub fn limit(&self) -> u64 {
        self.spf.len() as u64 - 1
    }

    /// Least prime factor of `i`, or `None` outside `[2, limit]`.
    pub fn smallest_factor(&self, i: u64) -> Option<u64> {
        if i < 2 || i > self.limit() {
            None
        } else {
            Some(self.spf[i as usize] as u64)
        }
    }

    pub fn is_prime(&self, i: u64) -> bool {
        self.smallest_factor(i) == Some(i)
    }

    /// Primes up to the table limit, increasing.
    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        (2..=self.limit()).filter(move |&i| self.spf[i as usize] as u64 == i)
    }
}

pub fn smallest_factor_table(limit: u64) -> Result<SmallestFactorTable> {
    smallest_factor_table_with_budget(limit, DEFAULT_TABLE_BUDGET)
}

pub fn smallest_factor_table_with_budget(limit: u64, budget: u64) -> Result<SmallestFactorTable> {
    if limit < 2 {
        return Err(Error::InvalidArgument(format!("table limit {limit} must be >= 2")));
    }
    if limit > budget || limit >= u32::MAX as u64 {
        return Err(Error::Budget {
            what: "smallest-factor table entries",
            requested: limit,
            limit: budget.min(u32::MAX as u64 - 1),
        });
    }
    let n = limit as usize;
    let mut spf = vec![0u32; n + 1];
    for i in 2..=n {
        if spf[i] != 0 {
            continue;
        }
        spf[i] = i as u32;
        if let Some(start) = i.checked_mul(i) {
            for j in (start..=n).step_by(i) {
                if spf[j] == 0 {
                    spf[j] = i as u32;
                }
            }
        }
    }
    Ok(SmallestFactorTable { spf })
}

/// Complete factorization of `n` by repeated smallest-factor division.
pub fn factorize(n: u64, table: &SmallestFactorTable) -> Result<Factorization> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("cannot factor {n}")));
    }
    if n > table.limit() {
        return Err(Error::OutOfTable {
            n,
            limit: table.limit(),
        });
    }
    let mut out: Factorization = Vec::new();
    let mut m = n;
    while m > 1 {
        let p = table.spf[m as usize] as u64;
        let mut e = 0;
        while m % p == 0 {
            m /= p;
            e += 1;
        }
        out.push((p, e));
    }
    Ok(out)
}

const SMALL_PRIMES: [u64; 15] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47];

// Deterministic for every n < 2^64.
const MR_BASES: [u64; 7] = [2, 325, 9375, 28178, 450775, 9780504, 1795265022];

/// Deterministic primality test for 64-bit integers (Miller-Rabin with a
/// base set that has no strong pseudoprimes below 2^64).
pub fn is_prime_64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &SMALL_PRIMES {
        if n % p == 0 {
            return n == p;
        }
    }
    if n < 53 * 53 {
        return true;
    }
    let ring = Montgomery::new(n);
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    let one = ring.one();
    let minus_one = ring.elem(n - 1);
    'bases: for &a in &MR_BASES {
        let a = a % n;
        if a == 0 {
            continue;
        }
        let mut x = pow_in(&ring, ring.elem(a), d);
        if x == one || x == minus_one {
            continue;
        }
        for _ in 1..s {
            x = ring.mul(x, x);
            if x == minus_one {
                continue 'bases;
            }
            if x == one {
                return false;
            }
        }
        return false;
    }
    true
}

/// A prime together with the factorizations of its two neighbours.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactoredPrime {
    pub p: u64,
    pub factors_p_minus_1: Factorization,
    pub factors_p_plus_1: Factorization,
}

/// Segmented sieve over `[lo, hi]`.
#[derive(Debug, Clone)]
pub struct SegmentedSieve {
    lo: u64,
    hi: u64,
    segment_size: u64,
    /// Odd primes up to `isqrt(hi + 1)`.
    sieving: Vec<u64>,
}

impl SegmentedSieve {
    pub fn new(lo: u64, hi: u64) -> Result<Self> {
        Self::with_segment_size(lo, hi, DEFAULT_SEGMENT_SIZE)
    }

    pub fn with_segment_size(lo: u64, hi: u64, segment_size: u64) -> Result<Self> {
        if lo < 2 || lo > hi {
            return Err(Error::InvalidArgument(format!("bad sieve range [{lo}, {hi}]")));
        }
        if hi > MAX_SIEVE_BOUND {
            return Err(Error::InvalidArgument(format!(
                "sieve bound {hi} exceeds {MAX_SIEVE_BOUND}"
            )));
        }
        if segment_size < 16 {
            return Err(Error::InvalidArgument("segment size must be >= 16".into()));
        }
        let root = crate::arith::iroot(hi + 1, 2).max(2);
        let table = smallest_factor_table_with_budget(root.max(2), u64::MAX)?;
        let sieving = table.primes().filter(|&p| p > 2).collect();
        Ok(SegmentedSieve {
            lo,
            hi,
            segment_size: segment_size & !1,
            sieving,
        })
    }

    pub fn lo(&self) -> u64 {
        self.lo
    }

    pub fn hi(&self) -> u64 {
        self.hi
    }

    /// Disjoint `[start, end]` ranges covering `[lo, hi]`; each may be
    /// processed independently.
    pub fn ranges(&self) -> impl Iterator<Item = (u64, u64)> {
        let (lo, hi, size) = (self.lo, self.hi, self.segment_size);
        let mut next = Some(lo);
        std::iter::from_fn(move || {
            let start = next?;
            let end = start.saturating_add(size - 1).min(hi);
            next = if end >= hi { None } else { Some(end + 1) };
            Some((start, end))
        })
    }

    /// Primes in `[start, end]` (a sub-range of `[lo, hi]`), increasing.
    pub fn primes_in(&self, start: u64, end: u64) -> Vec<u64> {
        let mut primes = Vec::new();
        if start <= 2 && end >= 2 {
            primes.push(2);
        }
        // Odd values start_odd, start_odd + 2, ..., up to end.
        let start_odd = (start.max(3)) | 1;
        if start_odd > end {
            return primes;
        }
        let count = ((end - start_odd) / 2 + 1) as usize;
        let mut composite = vec![false; count];
        for &q in &self.sieving {
            let sq = q * q;
            if sq > end {
                break;
            }
            let mut m = if sq >= start_odd {
                sq
            } else {
                let first = start_odd.div_ceil(q) * q;
                if first % 2 == 0 {
                    first + q
                } else {
                    first
                }
            };
            while m <= end {
                composite[((m - start_odd) / 2) as usize] = true;
                m += 2 * q;
            }
        }
        primes.extend(
            composite
                .iter()
                .enumerate()
                .filter(|(_, &c)| !c)
                .map(|(i, _)| start_odd + 2 * i as u64),
        );
        primes
    }

    /// Primes in `[start, end]` together with odd-divisor records for the
    /// even values in `[start - 1, end + 1]`.
    pub fn factored_segment(&self, start: u64, end: u64) -> Segment {
        let primes = self.primes_in(start, end);
        let even_base = (start - 1) & !1;
        let top = end + 1;
        let count = ((top - even_base) / 2 + 1) as usize;
        let mut counts = vec![0u8; count];
        let mut slots = vec![0u32; count * SLOTS];
        for &q in &self.sieving {
            let first = even_base.div_ceil(q) * q;
            let mut m = if first % 2 == 1 { first + q } else { first };
            if m == 0 {
                m = 2 * q;
            }
            while m <= top {
                let i = ((m - even_base) / 2) as usize;
                let c = counts[i] as usize;
                debug_assert!(c < SLOTS);
                slots[i * SLOTS + c] = q as u32;
                counts[i] += 1;
                m += 2 * q;
            }
        }
        Segment {
            even_base,
            primes,
            counts,
            slots,
        }
    }
}

/// Output of [`SegmentedSieve::factored_segment`].
#[derive(Debug, Clone)]
pub struct Segment {
    even_base: u64,
    primes: Vec<u64>,
    counts: Vec<u8>,
    slots: Vec<u32>,
}

impl Segment {
    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    /// Factorization of a value adjacent to a prime of this segment
    /// (`p - 1` or `p + 1`). Values must be `>= 1`.
    pub fn factor(&self, v: u64) -> Factorization {
        if v == 1 {
            return Vec::new();
        }
        if v == 3 {
            // p + 1 for p = 2 is the only odd neighbour.
            return vec![(3, 1)];
        }
        debug_assert!(v % 2 == 0 && v >= self.even_base);
        let i = ((v - self.even_base) / 2) as usize;
        let tz = v.trailing_zeros();
        let mut rest = v >> tz;
        let mut out = vec![(2, tz)];
        for &q in &self.slots[i * SLOTS..i * SLOTS + self.counts[i] as usize] {
            let q = q as u64;
            let mut e = 0;
            while rest % q == 0 {
                rest /= q;
                e += 1;
            }
            out.push((q, e));
        }
        if rest > 1 {
            out.push((rest, 1));
        }
        out
    }

    pub fn factored_primes(&self) -> impl Iterator<Item = FactoredPrime> + '_ {
        self.primes.iter().map(move |&p| FactoredPrime {
            p,
            factors_p_minus_1: self.factor(p - 1),
            factors_p_plus_1: self.factor(p + 1),
        })
    }
}

/// Iterator over every prime in `[lo, hi]` with factored `p - 1` and `p + 1`.
/// Memory is proportional to the segment size, not to `hi`.
pub struct PrimeStream {
    sieve: SegmentedSieve,
    ranges: Box<dyn Iterator<Item = (u64, u64)> + Send>,
    buffer: std::vec::IntoIter<FactoredPrime>,
}

impl Iterator for PrimeStream {
    type Item = FactoredPrime;

    fn next(&mut self) -> Option<FactoredPrime> {
        loop {
            if let Some(fp) = self.buffer.next() {
                return Some(fp);
            }
            let (start, end) = self.ranges.next()?;
            let segment = self.sieve.factored_segment(start, end);
            self.buffer = segment.factored_primes().collect::<Vec<_>>().into_iter();
        }
    }
}

pub fn prime_stream(lo: u64, hi: u64) -> Result<PrimeStream> {
    prime_stream_with_segment(lo, hi, DEFAULT_SEGMENT_SIZE)
}

pub fn prime_stream_with_segment(lo: u64, hi: u64, segment_size: u64) -> Result<PrimeStream> {
    let sieve = SegmentedSieve::with_segment_size(lo, hi, segment_size)?;
    let ranges: Vec<(u64, u64)> = sieve.ranges().collect();
    Ok(PrimeStream {
        sieve,
        ranges: Box::new(ranges.into_iter()),
        buffer: Vec::new().into_iter(),
    })
}
