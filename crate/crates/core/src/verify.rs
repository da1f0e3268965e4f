//! Ground-truth predicates: the Fermat test, the Lucas test, the combined
//! challenge verdict, and a brute-force tabulator used as a test oracle.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{gcd, jacobi, lucas_u_pair, pow_in, LucasParams, Montgomery, Ring};
use crate::error::{Error, Result};
use crate::sieve_gen::{is_prime_64, smallest_factor_table};

/// Largest bound accepted by [`brute_force_tabulate`].
pub const BRUTE_FORCE_LIMIT: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FoundBy {
    GcdStep,
    SieveStep,
    BruteForce,
}

/// A challenge pseudoprime with its factorization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PspRecord {
    pub n: u64,
    /// Prime factors, increasing. Repeated for square factors.
    pub factors: Vec<u64>,
    pub params: LucasParams,
    pub found_by: FoundBy,
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    n: String,
    factors: Vec<String>,
    b: u64,
    #[serde(rename = "P")]
    p: i64,
    #[serde(rename = "Q")]
    q: i64,
    found_by: FoundBy,
}

impl PspRecord {
    /// One JSON object, numbers as decimal strings.
    pub fn to_json_line(&self) -> String {
        let line = RecordLine {
            n: self.n.to_string(),
            factors: self.factors.iter().map(u64::to_string).collect(),
            b: self.params.b(),
            p: self.params.p(),
            q: self.params.q(),
            found_by: self.found_by,
        };
        serde_json::to_string(&line).expect("record serializes")
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        let raw: RecordLine = serde_json::from_str(line)?;
        let parse = |s: &str| {
            s.parse::<u64>()
                .map_err(|_| Error::InvalidArgument(format!("bad integer {s:?} in record")))
        };
        Ok(PspRecord {
            n: parse(&raw.n)?,
            factors: raw.factors.iter().map(|f| parse(f)).collect::<Result<_>>()?,
            params: LucasParams::unrestricted(raw.b, raw.p, raw.q)?,
            found_by: raw.found_by,
        })
    }
}

/// Outcome of all three challenge conditions for one `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub n: u64,
    pub is_challenge: bool,
    pub fermat: bool,
    pub lucas: bool,
    pub epsilon: i8,
    pub composite: bool,
    /// `gcd(n, b) = 1`; when false, `fermat` is reported false.
    pub coprime_to_base: bool,
    /// `gcd(n, 2QD) = 1`; when false, `lucas` is reported false.
    pub coprime_to_2qd: bool,
}

fn fermat_in(ring: &Montgomery, b: u64, n: u64) -> bool {
    pow_in(ring, ring.elem(b), n - 1) == ring.one()
}

/// `U_{n-ε} ≡ 0 (mod n)` for the given `ε`.
fn lucas_in(ring: &Montgomery, params: &LucasParams, n: u64, eps: i8) -> bool {
    let p = ring.elem_signed(params.p());
    let q = ring.elem_signed(params.q());
    let u = if eps == 1 {
        lucas_u_pair(ring, p, q, n - 1).0
    } else {
        lucas_u_pair(ring, p, q, n).1
    };
    u == ring.zero()
}

/// `b^{n-1} ≡ 1 (mod n)`. Compositeness is not checked.
pub fn fermat_test(n: u64, b: u64) -> Result<bool> {
    if n < 3 || n % 2 == 0 {
        return Err(Error::Domain(format!("Fermat test needs odd n >= 3, got {n}")));
    }
    if gcd(n, b) != 1 {
        return Err(Error::Domain(format!("gcd({n}, {b}) > 1")));
    }
    Ok(fermat_in(&Montgomery::new(n), b, n))
}

/// `U_{n-ε(n)} ≡ 0 (mod n)` with `ε(n) = (D | n)`.
pub fn lucas_test(n: u64, params: &LucasParams) -> Result<bool> {
    if n < 3 || n % 2 == 0 {
        return Err(Error::Domain(format!("Lucas test needs odd n >= 3, got {n}")));
    }
    if !params.coprime_to_2qd(n) {
        return Err(Error::Domain(format!("gcd({n}, 2QD) > 1")));
    }
    let eps = jacobi(params.d(), n)?;
    Ok(lucas_in(&Montgomery::new(n), params, n, eps))
}

/// Evaluates every challenge condition for `n`. Never fails: coprimality
/// violations show up as `false` components with the matching flag cleared.
pub fn challenge_verdict(n: u64, params: &LucasParams) -> Verdict {
    let composite = n >= 4 && !is_prime_64(n);
    let mut v = Verdict {
        n,
        is_challenge: false,
        fermat: false,
        lucas: false,
        epsilon: 0,
        composite,
        coprime_to_base: gcd(n, params.b()) == 1,
        coprime_to_2qd: params.coprime_to_2qd(n),
    };
    if n < 3 || n % 2 == 0 {
        return v;
    }
    let ring = Montgomery::new(n);
    v.epsilon = jacobi(params.d(), n).expect("n is odd");
    if v.coprime_to_base {
        v.fermat = fermat_in(&ring, params.b(), n);
    }
    if v.coprime_to_2qd {
        v.lucas = lucas_in(&ring, params, n, v.epsilon);
    }
    v.is_challenge = v.composite && v.fermat && v.lucas && v.epsilon == -1;
    v
}

/// Quick rejection used on hot paths: the Fermat congruence alone.
pub(crate) fn passes_fermat(n: u64, b: u64) -> bool {
    n >= 3 && n % 2 == 1 && gcd(n, b) == 1 && fermat_in(&Montgomery::new(n), b, n)
}

/// Prime factors of `n` (with repetition), by trial division with `primes`
/// which must cover `isqrt(n)`.
pub(crate) fn trial_factor(mut n: u64, primes: &[u64]) -> Vec<u64> {
    let mut out = Vec::new();
    for &p in primes {
        if p.saturating_mul(p) > n {
            break;
        }
        while n % p == 0 {
            out.push(p);
            n /= p;
        }
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Every challenge pseudoprime `n <= bound`, by testing each odd composite
/// coprime to `2bQD`. Slow path; `bound <= 10^8`.
pub fn brute_force_tabulate(bound: u64, params: &LucasParams) -> Result<Vec<PspRecord>> {
    if bound > BRUTE_FORCE_LIMIT {
        return Err(Error::Budget {
            what: "brute-force bound",
            requested: bound,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    if bound < 9 {
        return Ok(Vec::new());
    }
    let root = crate::arith::iroot(bound, 2).max(2);
    let primes: Vec<u64> = smallest_factor_table(root)?.primes().collect();
    const CHUNK: u64 = 1 << 16;
    let chunks: Vec<u64> = (0..=bound / CHUNK).collect();
    let hits: Vec<Vec<PspRecord>> = chunks
        .par_iter()
        .map(|&c| {
            let lo = (c * CHUNK).max(9) | 1;
            let hi = ((c + 1) * CHUNK - 1).min(bound);
            let mut out = Vec::new();
            let mut n = lo;
            while n <= hi {
                if passes_fermat(n, params.b()) && params.coprime_to_2qd(n) {
                    let verdict = challenge_verdict(n, params);
                    if verdict.is_challenge {
                        out.push(PspRecord {
                            n,
                            factors: trial_factor(n, &primes),
                            params: *params,
                            found_by: FoundBy::BruteForce,
                        });
                    }
                }
                n += 2;
            }
            out
        })
        .collect();
    Ok(hits.into_iter().flatten().collect())
}
