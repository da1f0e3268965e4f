//! End-to-end checks of the tabulator against independent slow computations.

use psptab::arith::{gcd, LucasParams};
use psptab::gcd_step::{gcd_step, StepOptions};
use psptab::preproduct::{enumerate, ProfileSource};
use psptab::sieve_gen::is_prime_64;
use psptab::sieve_step::{progression, sieve_step};
use psptab::tabulate::{tabulate, TabulationConfig};
use psptab::verify::brute_force_tabulate;

/// Parameter sets with many challenge pseudoprimes below 10^6.
const DENSE: [(u64, i64, i64); 5] = [(5, 0, 5), (3, 0, -6), (2, 0, 2), (3, 2, 2), (5, 0, -3)];
const SPARSE: [(u64, i64, i64); 4] = [(2, 23, 131), (2, 1, -1), (3, 1, -1), (5, 5, -5)];

fn params(t: (u64, i64, i64)) -> LucasParams {
    LucasParams::new(t.0, t.1, t.2).unwrap()
}

fn tabulated(p: &LucasParams, bound: u64, t: (u32, u32), crossover: Option<u64>) -> Vec<u64> {
    let mut config = TabulationConfig::new(bound, *p, t.0, t.1);
    config.crossover = crossover;
    config.workers = 2;
    tabulate(&config).unwrap().records.iter().map(|r| r.n).collect()
}

fn brute(p: &LucasParams, bound: u64, t: (u32, u32)) -> Vec<u64> {
    brute_force_tabulate(bound, p)
        .unwrap()
        .into_iter()
        .filter(|r| {
            let mut distinct = r.factors.clone();
            distinct.dedup();
            distinct.len() == r.factors.len() && (t.0..=t.1).contains(&(distinct.len() as u32))
        })
        .map(|r| r.n)
        .collect()
}

#[test]
fn matches_brute_force() {
    for set in DENSE.iter().chain(SPARSE.iter()) {
        let p = params(*set);
        for t in [(2, 2), (3, 3), (2, 3)] {
            assert_eq!(tabulated(&p, 300_000, t, None), brute(&p, 300_000, t), "{p} t={t:?}");
        }
    }
}

#[test]
fn dense_sets_are_nonempty() {
    for set in DENSE {
        assert!(tabulated(&params(set), 100_000, (2, 3), None).len() > 20);
    }
}

#[test]
fn crossover_does_not_change_output() {
    let bound = 1_000_000u64;
    for set in DENSE.iter().chain(SPARSE.iter()) {
        let p = params(*set);
        let reference = tabulated(&p, bound, (2, 3), None);
        for x in [1, 15, 100, 1000, bound - 1] {
            assert_eq!(tabulated(&p, bound, (2, 3), Some(x)), reference, "{p} X={x}");
        }
    }
}

fn naive_order(b: u64, p: u64) -> u64 {
    let (mut x, mut i) = (b % p, 1);
    while x != 1 {
        x = x * b % p;
        i += 1;
    }
    i
}

fn naive_rank(params: &LucasParams, p: u64) -> u64 {
    let m = p as i128;
    let (pp, qq) = ((params.p() as i128).rem_euclid(m), (params.q() as i128).rem_euclid(m));
    let (mut u0, mut u1, mut i) = (0i128, 1i128, 1);
    while u1 != 0 {
        let next = (pp * u1 - qq * u0).rem_euclid(m);
        u0 = u1;
        u1 = next;
        i += 1;
    }
    i
}

fn naive_jacobi_sign(d: i64, p: u64) -> i8 {
    let a = (d as i128).rem_euclid(p as i128) as u64;
    let mut e = 1u64;
    let mut base = a;
    let mut k = (p - 1) / 2;
    while k > 0 {
        if k & 1 == 1 {
            e = (e as u128 * base as u128 % p as u128) as u64;
        }
        base = (base as u128 * base as u128 % p as u128) as u64;
        k >>= 1;
    }
    if e == 1 { 1 } else { -1 }
}

/// Pre-products with `count` primes built straight from the definitions.
fn naive_preproducts(p: &LucasParams, bound: u64, count: u32) -> Vec<u64> {
    let root = (bound as f64).sqrt() as u64 + 1;
    let profiles: Vec<(u64, u64, u64)> = (3..=root)
        .filter(|&q| is_prime_64(q))
        .filter(|&q| p.b() % q != 0 && p.q().unsigned_abs() % q != 0 && p.d().unsigned_abs() % q != 0)
        .map(|q| (q, naive_order(p.b(), q), naive_rank(p, q)))
        .filter(|&(_, l, w)| gcd(l, w) <= 2)
        .collect();
    let mut out = Vec::new();
    #[allow(clippy::too_many_arguments)]
    fn walk(
        profiles: &[(u64, u64, u64)],
        start: usize,
        k: u64,
        l: u64,
        w: u64,
        left: u32,
        bound: u64,
        out: &mut Vec<u64>,
    ) {
        for (i, &(q, lq, wq)) in profiles.iter().enumerate().skip(start) {
            let Some(k2) = k.checked_mul(q) else { return };
            if (k2 as u128) * (q as u128) >= bound as u128 {
                return;
            }
            let l2 = l / gcd(l, lq) * lq;
            let w2 = w / gcd(w, wq) * wq;
            if gcd(l2, w2) > 2 || gcd(k2, l2) != 1 || gcd(k2, w2) != 1 {
                continue;
            }
            if left == 1 {
                out.push(k2);
            } else {
                walk(profiles, i + 1, k2, l2, w2, left - 1, bound, out);
            }
        }
    }
    walk(&profiles, 0, 1, 1, 1, count, bound, &mut out);
    out.sort_unstable();
    out
}

#[test]
fn enumeration_matches_definition() {
    for set in DENSE.iter().chain(SPARSE.iter()) {
        let p = params(*set);
        let bound = 2_000_000;
        let source = ProfileSource::new(&p, 1415, 1 << 20, 1 << 10).unwrap();
        for count in 1..=3 {
            let mut got = Vec::new();
            enumerate(bound, count, &source, |pre| {
                assert_eq!(pre.eps(), pre.primes().iter().map(|&q| naive_jacobi_sign(p.d(), q)).product::<i8>());
                got.push(pre.k());
                Ok(())
            })
            .unwrap();
            got.sort_unstable();
            assert_eq!(got, naive_preproducts(&p, bound, count), "{p} count={count}");
        }
    }
}

#[test]
fn preproduct_counter_matches_enumeration() {
    let p = params((3, 0, -6));
    let bound = 1_000_000;
    let mut config = TabulationConfig::new(bound, p, 2, 3);
    config.workers = 1;
    let summary = tabulate(&config).unwrap();
    let expected = naive_preproducts(&p, bound, 1).len() + naive_preproducts(&p, bound, 2).len();
    assert_eq!(summary.preproducts_processed, expected as u64);
    assert_eq!(summary.gcd_steps + summary.sieve_steps, summary.preproducts_processed);
    assert!(summary.candidates_tested >= summary.records.len() as u64);
}

#[test]
fn steps_agree_on_small_preproducts() {
    let bound = 10_000_000;
    for set in DENSE.iter().chain(SPARSE.iter()) {
        let p = params(*set);
        let source = ProfileSource::new(&p, 3163, 1 << 20, 1 << 12).unwrap();
        for count in 1..=2 {
            enumerate(bound, count, &source, |pre| {
                if pre.k() > 2000 {
                    return Ok(());
                }
                let a = gcd_step(pre, bound, &p, &StepOptions::default())?;
                let b = sieve_step(pre, bound, &p)?;
                let ns = |o: &psptab::sieve_step::StepOutcome| o.records.iter().map(|r| r.n).collect::<Vec<_>>();
                assert_eq!(ns(&a), ns(&b), "{p} k={}", pre.k());
                Ok(())
            })
            .unwrap();
        }
    }
}

#[test]
fn sieve_candidates_bounded_by_class_size() {
    let bound = 10_000_000;
    for set in DENSE.iter().chain(SPARSE.iter()) {
        let p = params(*set);
        let source = ProfileSource::new(&p, 3163, 1 << 20, 1 << 12).unwrap();
        enumerate(bound, 2, &source, |pre| {
            let out = sieve_step(pre, bound, &p)?;
            let span = (bound / pre.k()) as u128;
            let limit = progression(pre)?.map_or(0, |(_, m)| span.div_ceil(m) + 1);
            assert!(out.candidates_tested as u128 <= limit, "{p} k={}", pre.k());
            Ok(())
        })
        .unwrap();
    }
}
