//! Primes whose square can divide a challenge pseudoprime: base-`b`
//! Wieferich primes (`b^{p-1} ≡ 1 mod p^2`) and Wall-Sun-Sun primes for
//! `(P, Q)` (`p^2 | U_{p-ε(p)}`). A prime in both lists would break the
//! square-free assumption behind the pre-product search.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{jacobi, lucas_u_in, pow_in, LucasParams, Montgomery, Ring};
use crate::error::{Error, Result};
use crate::sieve_gen::{is_prime_64, SegmentedSieve, DEFAULT_SEGMENT_SIZE};

/// Largest scan bound; `p^2` must fit in a machine word.
pub const MAX_SQUARE_SCAN_BOUND: u64 = 1 << 32;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SquareScan {
    pub wieferich: Vec<u64>,
    pub wall_sun_sun: Vec<u64>,
    /// Primes in both lists.
    pub both: Vec<u64>,
}

fn square_ring(p: u64) -> Montgomery {
    Montgomery::new(p * p)
}

fn wieferich_in(ring: &Montgomery, p: u64, b: u64) -> bool {
    p % 2 == 1 && b % p != 0 && pow_in(ring, ring.elem(b), p - 1) == ring.one()
}

fn wall_sun_sun_in(ring: &Montgomery, p: u64, params: &LucasParams) -> bool {
    if p % 2 == 0 || params.q() % p as i64 == 0 || params.d() % p as i64 == 0 {
        return false;
    }
    let eps = jacobi(params.d(), p).expect("p is odd");
    let index = if eps == 1 { p - 1 } else { p + 1 };
    lucas_u_in(ring, params, index) == 0
}

/// `b^{p-1} ≡ 1 (mod p^2)` for an odd prime `p` not dividing `b`.
pub fn is_wieferich(p: u64, b: u64) -> bool {
    (3..MAX_SQUARE_SCAN_BOUND).contains(&p) && is_prime_64(p) && wieferich_in(&square_ring(p), p, b)
}

/// `p^2 | U_{p-ε(p)}` for an odd prime `p` not dividing `QD`.
pub fn is_wall_sun_sun(p: u64, params: &LucasParams) -> bool {
    (3..MAX_SQUARE_SCAN_BOUND).contains(&p) && is_prime_64(p) && wall_sun_sun_in(&square_ring(p), p, params)
}

/// Both conditions at once.
pub fn double_condition_check(p: u64, params: &LucasParams) -> bool {
    is_wieferich(p, params.b()) && is_wall_sun_sun(p, params)
}

fn check_bound(bound: u64) -> Result<()> {
    if bound > MAX_SQUARE_SCAN_BOUND {
        return Err(Error::Budget {
            what: "square scan bound",
            requested: bound,
            limit: MAX_SQUARE_SCAN_BOUND,
        });
    }
    Ok(())
}

fn scan(bound: u64, test: impl Fn(u64) -> (bool, bool) + Sync) -> Result<SquareScan> {
    check_bound(bound)?;
    let mut out = SquareScan::default();
    if bound < 3 {
        return Ok(out);
    }
    let sieve = SegmentedSieve::with_segment_size(3, bound, DEFAULT_SEGMENT_SIZE)?;
    let ranges: Vec<(u64, u64)> = sieve.ranges().collect();
    let hits: Vec<Vec<(u64, bool, bool)>> = ranges
        .par_iter()
        .map(|&(s, e)| {
            sieve
                .primes_in(s, e)
                .into_iter()
                .filter_map(|p| {
                    let (w, l) = test(p);
                    (w || l).then_some((p, w, l))
                })
                .collect()
        })
        .collect();
    for (p, w, l) in hits.into_iter().flatten() {
        if w {
            out.wieferich.push(p);
        }
        if l {
            out.wall_sun_sun.push(p);
        }
        if w && l {
            out.both.push(p);
        }
    }
    Ok(out)
}

/// Base-`b` Wieferich primes up to `bound`.
pub fn wieferich_scan(bound: u64, b: u64) -> Result<Vec<u64>> {
    Ok(scan(bound, |p| (wieferich_in(&square_ring(p), p, b), false))?.wieferich)
}

/// Wall-Sun-Sun primes for `(P, Q)` up to `bound`. Parameters with a square
/// discriminant are accepted.
pub fn wall_sun_sun_scan(bound: u64, params: &LucasParams) -> Result<Vec<u64>> {
    Ok(scan(bound, |p| (false, wall_sun_sun_in(&square_ring(p), p, params)))?.wall_sun_sun)
}

/// Both scans in one pass over the primes up to `bound`.
pub fn scan_squares(bound: u64, params: &LucasParams) -> Result<SquareScan> {
    scan(bound, |p| {
        let ring = square_ring(p);
        (wieferich_in(&ring, p, params.b()), wall_sun_sun_in(&ring, p, params))
    })
}
