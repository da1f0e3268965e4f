// Integer splitting for the GCD step: Brent's variant of Pollard rho, over
// words (Montgomery form) and over big integers.

use std::sync::OnceLock;

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::arith::{gcd, Montgomery, Ring};
use crate::sieve_gen::{is_prime_64, smallest_factor_table};

/// Trial division limit applied before any randomized splitting.
pub(crate) const TRIAL_LIMIT: u64 = 100_000;

const BATCH: u64 = 128;

pub(crate) fn trial_primes() -> &'static [u64] {
    static PRIMES: OnceLock<Vec<u64>> = OnceLock::new();
    PRIMES.get_or_init(|| {
        smallest_factor_table(TRIAL_LIMIT)
            .expect("small table")
            .primes()
            .collect()
    })
}

/// A nontrivial factor of the odd composite `n`.
pub(crate) fn rho_u64(n: u64, rng: &mut ChaCha8Rng) -> u64 {
    debug_assert!(n % 2 == 1 && !is_prime_64(n));
    let ring = Montgomery::new(n);
    loop {
        let c = ring.elem(rng.gen_range(1..n));
        let step = |x: u64| ring.add(ring.mul(x, x), c);
        let mut y = ring.elem(rng.gen_range(0..n));
        let (mut x, mut ys) = (y, y);
        let mut q = ring.one();
        let mut g = 1;
        let mut r = 1u64;
        while g == 1 {
            x = y;
            for _ in 0..r {
                y = step(y);
            }
            let mut k = 0;
            while k < r && g == 1 {
                ys = y;
                for _ in 0..BATCH.min(r - k) {
                    y = step(y);
                    q = ring.mul(q, ring.sub(x, y));
                }
                g = gcd(q, n);
                k += BATCH;
            }
            r *= 2;
        }
        if g == n {
            loop {
                ys = step(ys);
                g = gcd(ring.sub(x, ys), n);
                if g > 1 {
                    break;
                }
            }
        }
        if g != n {
            return g;
        }
    }
}

/// Prime factors of `n >= 1` with multiplicity, unordered.
pub(crate) fn factor_u64(n: u64, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut out = Vec::new();
    let mut stack = vec![n];
    while let Some(mut x) = stack.pop() {
        while x % 2 == 0 {
            out.push(2);
            x /= 2;
        }
        if x == 1 {
            continue;
        }
        if is_prime_64(x) {
            out.push(x);
        } else {
            let f = rho_u64(x, rng);
            stack.push(f);
            stack.push(x / f);
        }
    }
    out
}

/// Miller-Rabin with the first sixteen primes as bases; exact below 2^64.
pub(crate) fn is_probable_prime_big(n: &BigUint) -> bool {
    if let Some(small) = n.to_u64() {
        return is_prime_64(small);
    }
    for &p in &trial_primes()[..64] {
        if (n % p).is_zero() {
            return false;
        }
    }
    let one = BigUint::one();
    let minus_one = n - 1u32;
    let s = minus_one.trailing_zeros().unwrap_or(0);
    let d = &minus_one >> s;
    'bases: for &a in &trial_primes()[..16] {
        let mut x = BigUint::from(a).modpow(&d, n);
        if x == one || x == minus_one {
            continue;
        }
        for _ in 1..s {
            x = (&x * &x) % n;
            if x == minus_one {
                continue 'bases;
            }
        }
        return false;
    }
    true
}

/// A nontrivial factor of `n`, or `None` within `max_steps` iterations.
pub(crate) fn rho_big(n: &BigUint, max_steps: u64, rng: &mut ChaCha8Rng) -> Option<BigUint> {
    let one = BigUint::one();
    let diff = |a: &BigUint, b: &BigUint| if a >= b { a - b } else { b - a };
    let c = rng.gen_biguint_range(&one, n);
    let step = |x: &BigUint| (x * x + &c) % n;
    let mut y = rng.gen_biguint_below(n);
    let mut x = y.clone();
    let mut ys = y.clone();
    let mut q = one.clone();
    let mut g = one.clone();
    let mut r = 1u64;
    let mut steps = 0u64;
    while g.is_one() {
        x = y.clone();
        for _ in 0..r {
            y = step(&y);
        }
        let mut k = 0;
        while k < r && g.is_one() {
            ys = y.clone();
            for _ in 0..BATCH.min(r - k) {
                y = step(&y);
                q = (&q * diff(&x, &y)) % n;
            }
            g = q.gcd(n);
            k += BATCH;
            steps += BATCH;
        }
        r *= 2;
        if g.is_one() && steps > max_steps {
            return None;
        }
    }
    if &g == n {
        loop {
            ys = step(&ys);
            g = diff(&x, &ys).gcd(n);
            if !g.is_one() {
                break;
            }
        }
    }
    (&g != n).then_some(g)
}

/// Outcome of a bounded prime-divisor search.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub(crate) struct DivisorSearch {
    /// Primes in `(lo, hi]` dividing the input, increasing, distinct.
    pub primes: Vec<u64>,
    /// Composite cofactors that could not be split; their prime divisors
    /// may still lie in range.
    pub unresolved: Vec<BigUint>,
}

/// Rho iterations after which a factor `<= hi` is found with high
/// probability.
pub(crate) fn default_rho_budget(hi: u64) -> u64 {
    8 * crate::arith::iroot(hi, 2) + (1 << 16)
}

/// Finds the primes in `(lo, hi]` dividing `g > 0`, spending at most
/// `rho_budget` iterations per attempt on each big composite cofactor.
pub(crate) fn search_bounded_divisors(
    g: &BigUint,
    lo: u64,
    hi: u64,
    rho_budget: u64,
    rng: &mut ChaCha8Rng,
) -> DivisorSearch {
    let mut out = DivisorSearch::default();
    let in_range = |p: u64| lo < p && p <= hi;
    let mut c = g.clone();
    for &q in trial_primes() {
        if c.is_one() {
            break;
        }
        if let Some(small) = c.to_u64() {
            if q.saturating_mul(q) > small {
                // c is a prime
                if in_range(small) {
                    out.primes.push(small);
                }
                c = BigUint::one();
                break;
            }
        }
        if (&c % q).is_zero() {
            while (&c % q).is_zero() {
                c /= q;
            }
            if in_range(q) {
                out.primes.push(q);
            }
        }
    }
    // Every prime factor left in c exceeds TRIAL_LIMIT.
    if c.is_one() || hi <= TRIAL_LIMIT {
        out.primes.sort_unstable();
        return out;
    }
    let mut stack = vec![c];
    while let Some(x) = stack.pop() {
        if let Some(x) = x.to_u64() {
            if x <= lo {
                continue;
            }
            for p in factor_u64(x, rng) {
                if in_range(p) && !out.primes.contains(&p) {
                    out.primes.push(p);
                }
            }
            continue;
        }
        if is_probable_prime_big(&x) {
            // larger than any word, so above hi
            continue;
        }
        match (0..3).find_map(|_| rho_big(&x, rho_budget, rng)) {
            Some(f) => {
                let rest = &x / &f;
                stack.push(f);
                stack.push(rest);
            }
            None => out.unresolved.push(x),
        }
    }
    out.primes.sort_unstable();
    out
}
