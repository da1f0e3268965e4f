//! Exact and modular arithmetic: Jacobi symbols, modular powers, Lucas
//! sequences (modulo a word, modulo a big integer, and exact), and big
//! integer gcd.
//!
//! Word-sized modular work goes through the [`Ring`] trait, which has a
//! Montgomery implementation for odd moduli and a plain `u128 %` fallback
//! for even ones. Lucas sequences are evaluated with a division-free
//! ladder over the pair `(U_j, U_{j+1})`:
//!
//! ```text
//! U_{2j}   = U_j (2 U_{j+1} - P U_j)        (= U_j V_j)
//! U_{2j+1} = U_{j+1}^2 - Q U_j^2
//! U_{2j+2} = P U_{2j+1} - Q U_{2j}
//! ```
//!
//! and `V_n = 2 U_{n+1} - P U_n`, so the same code works for even moduli.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::{Integer, Roots};
use num_traits::{One, Pow, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fermat base and Lucas parameters `(b, P, Q)` with discriminant `D = P^2 - 4Q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct LucasParams {
    b: u64,
    p: i64,
    q: i64,
    d: i64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    b: u64,
    #[serde(rename = "P")]
    p: i64,
    #[serde(rename = "Q")]
    q: i64,
}

impl TryFrom<RawParams> for LucasParams {
    type Error = Error;
    fn try_from(raw: RawParams) -> Result<Self> {
        LucasParams::unrestricted(raw.b, raw.p, raw.q)
    }
}

impl From<LucasParams> for RawParams {
    fn from(params: LucasParams) -> Self {
        RawParams {
            b: params.b,
            p: params.p,
            q: params.q,
        }
    }
}

impl LucasParams {
    /// Parameters usable by the tabulation pipeline: `b >= 2`, `Q != 0`, and
    /// `D` neither zero nor a perfect square (otherwise `ε(n) = -1` never holds).
    pub fn new(b: u64, p: i64, q: i64) -> Result<Self> {
        let params = Self::unrestricted(b, p, q)?;
        if params.d == 0 || params.has_square_discriminant() {
            return Err(Error::InvalidArgument(format!(
                "discriminant D = {} is a perfect square; no n has ε(n) = -1",
                params.d
            )));
        }
        Ok(params)
    }

    /// Parameters for sequence-level work (square scans, direct evaluation)
    /// where a square discriminant is meaningful.
    pub fn unrestricted(b: u64, p: i64, q: i64) -> Result<Self> {
        if b < 2 {
            return Err(Error::InvalidArgument(format!("base b = {b} must be >= 2")));
        }
        if q == 0 {
            return Err(Error::InvalidArgument("Q must be nonzero".into()));
        }
        let d = (p as i128) * (p as i128) - 4 * (q as i128);
        let d = i64::try_from(d)
            .map_err(|_| Error::InvalidArgument(format!("discriminant {d} does not fit a word")))?;
        Ok(LucasParams { b, p, q, d })
    }

    pub fn b(&self) -> u64 {
        self.b
    }

    pub fn p(&self) -> i64 {
        self.p
    }

    pub fn q(&self) -> i64 {
        self.q
    }

    pub fn d(&self) -> i64 {
        self.d
    }

    pub fn has_square_discriminant(&self) -> bool {
        self.d >= 0 && {
            let r = (self.d as u64).sqrt();
            r * r == self.d as u64
        }
    }

    /// True when the prime `p` divides `2·b·Q·D`.
    pub fn divides_2bqd(&self, p: u64) -> bool {
        p == 2 || self.b % p == 0 || self.q.unsigned_abs() % p == 0 || self.d.unsigned_abs() % p == 0
    }

    /// `gcd(n, 2·Q·D) == 1`: the coprimality the Lucas test requires.
    pub fn coprime_to_2qd(&self, n: u64) -> bool {
        n % 2 == 1 && gcd(n, self.q.unsigned_abs()) == 1 && gcd(n, self.d.unsigned_abs()) == 1
    }
}

impl std::fmt::Display for LucasParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.b, self.p, self.q)
    }
}

/// Upper limit on the index (or exponent) of exactly-computed values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeBudget {
    pub max_index: u64,
}

impl Default for SizeBudget {
    fn default() -> Self {
        SizeBudget { max_index: 1 << 24 }
    }
}

impl SizeBudget {
    fn check(&self, what: &'static str, index: u64) -> Result<()> {
        if index > self.max_index {
            Err(Error::Budget {
                what,
                requested: index,
                limit: self.max_index,
            })
        } else {
            Ok(())
        }
    }
}

/// Arithmetic modulo a word-sized modulus. Elements are opaque `u64`
/// representatives (Montgomery form for [`Montgomery`]).
pub(crate) trait Ring {
    fn modulus(&self) -> u64;
    /// Representative of `x mod m`.
    fn elem(&self, x: u64) -> u64;
    /// Inverse of [`Ring::elem`]: the canonical residue in `[0, m)`.
    fn value(&self, x: u64) -> u64;
    fn one(&self) -> u64;
    fn mul(&self, a: u64, b: u64) -> u64;

    #[inline]
    fn zero(&self) -> u64 {
        0
    }

    #[inline]
    fn add(&self, a: u64, b: u64) -> u64 {
        let m = self.modulus();
        let (s, overflow) = a.overflowing_add(b);
        if overflow || s >= m {
            s.wrapping_sub(m)
        } else {
            s
        }
    }

    #[inline]
    fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a.wrapping_sub(b).wrapping_add(self.modulus())
        }
    }

    fn elem_signed(&self, x: i64) -> u64 {
        self.elem((x as i128).rem_euclid(self.modulus() as i128) as u64)
    }
}

/// Montgomery arithmetic for an odd modulus, `R = 2^64`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Montgomery {
    m: u64,
    /// `m^{-1} mod 2^64`
    inv: u64,
    /// `R^2 mod m`
    r2: u64,
    one: u64,
}

impl Montgomery {
    pub(crate) fn new(m: u64) -> Self {
        debug_assert!(m % 2 == 1 && m > 1);
        // Newton iteration doubles the number of correct low bits each step.
        let mut inv: u64 = m;
        for _ in 0..5 {
            inv = inv.wrapping_mul(2u64.wrapping_sub(m.wrapping_mul(inv)));
        }
        let r = (1u128 << 64) % m as u128;
        let r2 = ((r * r) % m as u128) as u64;
        Montgomery {
            m,
            inv,
            r2,
            one: r as u64,
        }
    }

    #[inline]
    fn redc(&self, t: u128) -> u64 {
        let lo = t as u64;
        let hi = (t >> 64) as u64;
        let q = lo.wrapping_mul(self.inv);
        let qm_hi = ((q as u128 * self.m as u128) >> 64) as u64;
        let (r, borrow) = hi.overflowing_sub(qm_hi);
        if borrow {
            r.wrapping_add(self.m)
        } else {
            r
        }
    }
}

impl Ring for Montgomery {
    #[inline]
    fn modulus(&self) -> u64 {
        self.m
    }

    #[inline]
    fn elem(&self, x: u64) -> u64 {
        self.redc((x % self.m) as u128 * self.r2 as u128)
    }

    #[inline]
    fn value(&self, x: u64) -> u64 {
        self.redc(x as u128)
    }

    #[inline]
    fn one(&self) -> u64 {
        self.one
    }

    #[inline]
    fn mul(&self, a: u64, b: u64) -> u64 {
        self.redc(a as u128 * b as u128)
    }
}

/// Plain residues, any modulus `>= 2`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Plain {
    m: u64,
}

impl Plain {
    pub(crate) fn new(m: u64) -> Self {
        Plain { m }
    }
}

impl Ring for Plain {
    #[inline]
    fn modulus(&self) -> u64 {
        self.m
    }

    #[inline]
    fn elem(&self, x: u64) -> u64 {
        x % self.m
    }

    #[inline]
    fn value(&self, x: u64) -> u64 {
        x
    }

    #[inline]
    fn one(&self) -> u64 {
        1 % self.m
    }

    #[inline]
    fn mul(&self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.m as u128) as u64
    }
}

/// `base^exp` in the ring, `base` already a ring element.
#[inline]
pub(crate) fn pow_in<R: Ring>(ring: &R, base: u64, mut exp: u64) -> u64 {
    let mut acc = ring.one();
    let mut sq = base;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = ring.mul(acc, sq);
        }
        exp >>= 1;
        if exp > 0 {
            sq = ring.mul(sq, sq);
        }
    }
    acc
}

/// `(U_n, U_{n+1})` as ring elements; `p` and `q` are ring elements.
#[inline]
pub(crate) fn lucas_u_pair<R: Ring>(ring: &R, p: u64, q: u64, n: u64) -> (u64, u64) {
    let mut u0 = ring.zero();
    let mut u1 = ring.one();
    if n == 0 {
        return (u0, u1);
    }
    for i in (0..64 - n.leading_zeros()).rev() {
        let pu0 = ring.mul(p, u0);
        let even = ring.mul(u0, ring.sub(ring.add(u1, u1), pu0));
        let odd = ring.sub(ring.mul(u1, u1), ring.mul(q, ring.mul(u0, u0)));
        if (n >> i) & 1 == 1 {
            let next = ring.sub(ring.mul(p, odd), ring.mul(q, even));
            u0 = odd;
            u1 = next;
        } else {
            u0 = even;
            u1 = odd;
        }
    }
    (u0, u1)
}

/// Evaluates `U_n mod m` in the given ring; the result is canonical.
pub(crate) fn lucas_u_in<R: Ring>(ring: &R, params: &LucasParams, n: u64) -> u64 {
    let p = ring.elem_signed(params.p);
    let q = ring.elem_signed(params.q);
    ring.value(lucas_u_pair(ring, p, q, n).0)
}

/// `base^exponent mod modulus` by square-and-multiply.
///
/// Panics if `modulus < 2`.
pub fn modexp(base: u64, exponent: u64, modulus: u64) -> u64 {
    assert!(modulus >= 2, "modulus must be >= 2");
    if modulus % 2 == 1 {
        let ring = Montgomery::new(modulus);
        ring.value(pow_in(&ring, ring.elem(base), exponent))
    } else {
        let ring = Plain::new(modulus);
        pow_in(&ring, ring.elem(base), exponent)
    }
}

/// Jacobi symbol `(a | n)` for odd positive `n`.
pub fn jacobi(a: i64, n: u64) -> Result<i8> {
    if n == 0 || n % 2 == 0 {
        return Err(Error::Domain(format!("Jacobi symbol needs odd positive n, got {n}")));
    }
    let mut a = (a as i128).rem_euclid(n as i128) as u64;
    let mut n = n;
    let mut t = 1i8;
    while a != 0 {
        let tz = a.trailing_zeros();
        a >>= tz;
        if tz % 2 == 1 && (n % 8 == 3 || n % 8 == 5) {
            t = -t;
        }
        if a % 4 == 3 && n % 4 == 3 {
            t = -t;
        }
        std::mem::swap(&mut a, &mut n);
        a %= n;
    }
    Ok(if n == 1 { t } else { 0 })
}

/// `(U_n mod m, V_n mod m)` by the doubling ladder.
///
/// Panics if `m < 2`.
pub fn lucas_uv_mod(params: &LucasParams, n: u64, m: u64) -> (u64, u64) {
    assert!(m >= 2, "modulus must be >= 2");
    fn run<R: Ring>(ring: &R, params: &LucasParams, n: u64) -> (u64, u64) {
        let p = ring.elem_signed(params.p);
        let q = ring.elem_signed(params.q);
        let (u, u_next) = lucas_u_pair(ring, p, q, n);
        let v = ring.sub(ring.add(u_next, u_next), ring.mul(p, u));
        (ring.value(u), ring.value(v))
    }
    if m % 2 == 1 {
        run(&Montgomery::new(m), params, n)
    } else {
        run(&Plain::new(m), params, n)
    }
}

fn reduce_signed_big(x: i64, m: &BigUint) -> BigUint {
    let r = BigInt::from(x).mod_floor(&BigInt::from_biguint(Sign::Plus, m.clone()));
    r.to_biguint().expect("mod_floor by a positive modulus is nonnegative")
}

/// `U_n mod m` for a big modulus `m >= 1`, without materializing `U_n`.
pub fn lucas_u_mod_big(params: &LucasParams, n: u64, m: &BigUint) -> BigUint {
    if m.is_one() {
        return BigUint::zero();
    }
    let p = reduce_signed_big(params.p, m);
    let q = reduce_signed_big(params.q, m);
    let sub = |a: &BigUint, b: &BigUint| -> BigUint {
        if a >= b {
            a - b
        } else {
            m - b + a
        }
    };
    let mut u0 = BigUint::zero();
    let mut u1 = BigUint::one();
    if n == 0 {
        return u0;
    }
    for i in (0..64 - n.leading_zeros()).rev() {
        let pu0 = (&p * &u0) % m;
        let twice = (&u1 + &u1) % m;
        let even = (&u0 * sub(&twice, &pu0)) % m;
        let qu0sq = (&q * ((&u0 * &u0) % m)) % m;
        let odd = sub(&((&u1 * &u1) % m), &qu0sq);
        if (n >> i) & 1 == 1 {
            let next = sub(&((&p * &odd) % m), &((&q * &even) % m));
            u0 = odd;
            u1 = next;
        } else {
            u0 = even;
            u1 = odd;
        }
    }
    u0
}

/// Exact `U_n(P, Q)`; the sign is carried by the returned [`BigInt`].
pub fn lucas_u_exact(params: &LucasParams, n: u64, budget: &SizeBudget) -> Result<BigInt> {
    budget.check("Lucas index", n)?;
    let p = BigInt::from(params.p);
    let q = BigInt::from(params.q);
    let mut u0 = BigInt::zero();
    let mut u1 = BigInt::one();
    if n == 0 {
        return Ok(u0);
    }
    for i in (0..64 - n.leading_zeros()).rev() {
        let even = &u0 * (&u1 + &u1 - &p * &u0);
        let odd = &u1 * &u1 - &q * &u0 * &u0;
        if (n >> i) & 1 == 1 {
            let next = &p * &odd - &q * &even;
            u0 = odd;
            u1 = next;
        } else {
            u0 = even;
            u1 = odd;
        }
    }
    Ok(u0)
}

/// Exact `b^e - 1`.
pub fn pow_minus_one_exact(b: u64, e: u64, budget: &SizeBudget) -> Result<BigUint> {
    budget.check("power exponent", e)?;
    if b == 0 {
        return Err(Error::InvalidArgument("b^e - 1 needs b >= 1".into()));
    }
    let power: BigUint = Pow::pow(BigUint::from(b), e);
    Ok(power - 1u32)
}

/// Greatest common divisor of two big naturals; `gcd(0, a) = a`.
///
/// Callers only see this function, so a subquadratic algorithm can replace
/// the backend without touching them.
pub fn big_gcd(a: &BigUint, b: &BigUint) -> BigUint {
    a.gcd(b)
}

/// `|x|` of a signed big integer as a natural.
pub fn magnitude(x: &BigInt) -> BigUint {
    x.abs().to_biguint().expect("absolute value is nonnegative")
}

pub fn gcd(a: u64, b: u64) -> u64 {
    a.gcd(&b)
}

pub fn gcd_u128(a: u128, b: u128) -> u128 {
    a.gcd(&b)
}

/// `lcm(a, b)`, or `None` on overflow.
pub fn checked_lcm(a: u128, b: u128) -> Option<u128> {
    if a == 0 || b == 0 {
        return Some(0);
    }
    (a / gcd_u128(a, b)).checked_mul(b)
}

/// Inverse of `a` modulo `m`, `m >= 1`; `None` if `gcd(a, m) > 1`.
/// Requires `m < 2^127`.
pub fn inverse_mod(a: u128, m: u128) -> Option<u128> {
    assert!((1..1u128 << 127).contains(&m));
    if m == 1 {
        return Some(0);
    }
    let (mut old_r, mut r) = ((a % m) as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let quotient = old_r / r;
        (old_r, r) = (r, old_r - quotient * r);
        (old_s, s) = (s, old_s - quotient * s);
    }
    if old_r != 1 {
        return None;
    }
    Some(old_s.rem_euclid(m as i128) as u128)
}

/// Largest `r` with `r^k <= n`.
pub fn iroot(n: u64, k: u32) -> u64 {
    n.nth_root(k)
}
