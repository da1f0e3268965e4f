//! Acceptance suite: every criterion runs at its stated size and prints one
//! PASS/FAIL line. The process exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use psptab::arith::{jacobi, lucas_uv_mod, modexp, LucasParams};
use psptab::gcd_step::{gcd_step, StepOptions};
use psptab::orders::prime_profile;
use psptab::preproduct::{enumerate, ProfileSource};
use psptab::sieve_gen::prime_stream;
use psptab::sieve_step::sieve_step;
use psptab::squares::scan_squares;
use psptab::tabulate::{tabulate, TabulationConfig};
use psptab::verify::brute_force_tabulate;
use psptab::Error;

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

const BATTERY: [(u64, i64, i64); 4] = [(2, 23, 131), (2, 1, -1), (3, 1, -1), (5, 5, -5)];
/// Extra sets with many hits, so equality checks compare nonempty outputs.
const DENSE: [(u64, i64, i64); 3] = [(3, 0, -6), (5, 0, 5), (3, 2, 2)];

fn params(t: (u64, i64, i64)) -> LucasParams {
    LucasParams::new(t.0, t.1, t.2).unwrap()
}

fn psptab_cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psptab"))
        .args(args)
        .stderr(Stdio::null())
        .output()
        .expect("binary runs")
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn records_of(p: &LucasParams, bound: u64, t: (u32, u32), crossover: Option<u64>) -> Result<Vec<u64>, String> {
    let mut config = TabulationConfig::new(bound, *p, t.0, t.1);
    config.crossover = crossover;
    let s = tabulate(&config).map_err(|e| e.to_string())?;
    Ok(s.records.iter().map(|r| r.n).collect())
}

fn criterion_1() -> Outcome {
    let out = psptab_cli(&[
        "tabulate", "--bound", "2^32", "--base", "2", "--P", "1", "--Q", "-1",
        "--min-factors", "2", "--max-factors", "3",
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    ensure(out.status.code() == Some(0), format!("exit code {:?}", out.status.code()))?;
    ensure(stdout.trim().is_empty(), format!("records found: {stdout}"))?;
    Ok("no (2,1,-1)-challenge pseudoprimes with 2 or 3 factors below 2^32".into())
}

fn criterion_2() -> Outcome {
    let out = psptab_cli(&["admissible-primes", "--bound", "2^30", "--epsilon", "+1"]);
    ensure(out.status.success(), format!("exit code {:?}", out.status.code()))?;
    let mut got = BTreeMap::new();
    for line in String::from_utf8_lossy(&out.stdout).lines() {
        let v: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        got.insert(v["p"].as_u64().unwrap(), (v["ell"].as_u64().unwrap(), v["omega"].as_u64().unwrap()));
    }
    let want = BTreeMap::from([(61681, (40, 1542)), (363101449, (171436, 1059))]);
    ensure(got == want, format!("got {got:?}"))?;
    Ok(format!("{want:?}"))
}

fn criterion_3() -> Outcome {
    let out = psptab_cli(&["verify", "2047", "--base", "2", "--P", "23", "--Q", "131"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    ensure(out.status.code() == Some(0), "verify exit code")?;
    ensure(
        v["is_challenge"] == true && v["fermat"] == true && v["lucas"] == true && v["epsilon"] == -1,
        format!("verdict {v}"),
    )?;
    let out = psptab_cli(&[
        "tabulate", "--bound", "10^4", "--base", "2", "--P", "23", "--Q", "131",
        "--min-factors", "2", "--max-factors", "2",
    ]);
    let ns: Vec<String> = String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["n"].as_str().unwrap().to_string())
        .collect();
    ensure(ns == ["2047"], format!("tabulated {ns:?}"))?;
    Ok("2047 verified and tabulated".into())
}

fn criterion_4() -> Outcome {
    let bound = 1_000_000;
    let mut sizes = Vec::new();
    for set in BATTERY.iter().chain(DENSE.iter()) {
        let p = params(*set);
        let got = records_of(&p, bound, (2, 3), None)?;
        let want: Vec<u64> = brute_force_tabulate(bound, &p)
            .map_err(|e| e.to_string())?
            .into_iter()
            .filter(|r| {
                let mut d = r.factors.clone();
                d.dedup();
                d.len() == r.factors.len() && (2..=3).contains(&d.len())
            })
            .map(|r| r.n)
            .collect();
        ensure(got == want, format!("{p}: {} tabulated vs {} brute force", got.len(), want.len()))?;
        sizes.push(format!("{p}:{}", got.len()));
    }
    Ok(sizes.join(" "))
}

fn criterion_5() -> Outcome {
    let bound = 100_000_000;
    let mut checked = 0;
    for set in BATTERY {
        let p = params(set);
        let source = ProfileSource::new(&p, 10_000, 1 << 20, 1 << 14).map_err(|e| e.to_string())?;
        let mut count = 1;
        loop {
            let mut seen = 0;
            let mut mismatch = None;
            enumerate(bound, count, &source, |pre| {
                if pre.k() > 10_000 {
                    return Ok(());
                }
                seen += 1;
                let a = gcd_step(pre, bound, &p, &StepOptions::default())?;
                let b = sieve_step(pre, bound, &p)?;
                let ns = |o: &psptab::sieve_step::StepOutcome| o.records.iter().map(|r| r.n).collect::<Vec<_>>();
                if ns(&a) != ns(&b) && mismatch.is_none() {
                    mismatch = Some(pre.k());
                }
                Ok(())
            })
            .map_err(|e| e.to_string())?;
            if let Some(k) = mismatch {
                return Err(format!("{p}: steps disagree at k = {k}"));
            }
            if seen == 0 {
                break;
            }
            checked += seen;
            count += 1;
        }
    }
    Ok(format!("{checked} pre-products"))
}

fn criterion_6() -> Outcome {
    let scan = scan_squares(1 << 30, &params((2, 1, -1))).map_err(|e| e.to_string())?;
    ensure(scan.both.is_empty(), format!("both = {:?}", scan.both))?;
    ensure(scan.wieferich == [1093, 3511], format!("wieferich = {:?}", scan.wieferich))?;
    Ok(format!("wieferich {:?}, wall-sun-sun {:?}", scan.wieferich, scan.wall_sun_sun))
}

fn mulmod(a: u64, b: u64, m: u64) -> u64 {
    (a as u128 * b as u128 % m as u128) as u64
}

fn lucas_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10_000 {
        let (p, q) = (rng.gen_range(-1_000_000i64..=1_000_000), rng.gen_range(-1_000_000i64..=1_000_000));
        if q == 0 {
            continue;
        }
        let params = LucasParams::unrestricted(2, p, q).unwrap();
        let n = rng.gen_range(0..1u64 << 40);
        let m = rng.gen_range(2..=u64::MAX);
        let (u, v) = lucas_uv_mod(&params, n, m);
        let red = |x: i64| (x as i128).rem_euclid(m as i128) as u64;
        let lhs = (mulmod(v, v, m) as u128 + m as u128 - mulmod(red(params.d()), mulmod(u, u, m), m) as u128)
            % m as u128;
        let rhs = mulmod(4 % m, modexp(red(q), n, m), m) as u128;
        ensure(lhs == rhs, format!("P={p} Q={q} n={n} m={m}"))?;
    }
    Ok("V^2 - D U^2 = 4 Q^n on 10^4 tuples".into())
}

fn divisors(n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 1;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            out.push(n / d);
        }
        d += 1;
    }
    out.sort_unstable();
    out.dedup();
    out
}

fn minimality() -> Outcome {
    let p = params((2, 1, -1));
    let mut checked = 0;
    for fp in prime_stream(3, 100_000).map_err(|e| e.to_string())? {
        let Some(profile) = prime_profile(&p, &fp) else { continue };
        let q = fp.p;
        let ell_div = divisors(q - 1);
        ensure(ell_div.contains(&profile.ell), format!("ell({q}) does not divide p-1"))?;
        for d in ell_div.into_iter().filter(|&d| d <= profile.ell) {
            ensure((modexp(2, d, q) == 1) == (d == profile.ell), format!("ell({q}) not minimal at {d}"))?;
        }
        let period = if profile.epsilon == 1 { q - 1 } else { q + 1 };
        let om_div = divisors(period);
        ensure(om_div.contains(&profile.omega), format!("omega({q}) does not divide p-eps"))?;
        for d in om_div.into_iter().filter(|&d| d <= profile.omega) {
            ensure(
                (lucas_uv_mod(&p, d, q).0 == 0) == (d == profile.omega),
                format!("omega({q}) not minimal at {d}"),
            )?;
        }
        checked += 1;
    }
    Ok(format!("{checked} primes"))
}

fn jacobi_multiplicativity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10_000 {
        let a = rng.gen_range(-1_000_000_000i64..1_000_000_000);
        let b = rng.gen_range(-1_000_000_000i64..1_000_000_000);
        let m = 2 * rng.gen_range(0..1u64 << 30) + 1;
        let n = 2 * rng.gen_range(0..1u64 << 30) + 1;
        let j = |x: i64, y: u64| jacobi(x, y).unwrap();
        let ab = ((a as i128 * b as i128).rem_euclid(m as i128)) as i64;
        ensure(j(ab, m) == j(a, m) * j(b, m), format!("(ab|m) a={a} b={b} m={m}"))?;
        ensure(j(a, m * n) == j(a, m) * j(a, n), format!("(a|mn) a={a} m={m} n={n}"))?;
    }
    Ok("10^4 tuples".into())
}

fn crossover_invariance() -> Outcome {
    let bound = 1_000_000u64;
    let xs = [psptab::arith::iroot(bound, 5), psptab::arith::iroot(bound, 3), psptab::arith::iroot(bound, 2)];
    for set in BATTERY.iter().chain(DENSE.iter()) {
        let p = params(*set);
        let reference = records_of(&p, bound, (2, 3), Some(xs[0]))?;
        for &x in &xs[1..] {
            ensure(records_of(&p, bound, (2, 3), Some(x))? == reference, format!("{p}: X = {x} differs"))?;
        }
    }
    Ok(format!("X in {xs:?}"))
}

fn tabulate_args<'a>(bound: &'a str, out: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut args = vec![
        "tabulate", "--bound", bound, "--base", "3", "--P", "0", "--Q", "-6",
        "--min-factors", "2", "--max-factors", "3", "--out", out,
    ];
    args.extend_from_slice(extra);
    args
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    let (a, b) = (a.to_str().unwrap(), b.to_str().unwrap());
    psptab_cli(&tabulate_args("10^6", a, &["--workers", "1", "--seed", "5"]));
    psptab_cli(&tabulate_args("10^6", b, &["--workers", "4", "--seed", "5"]));
    let (x, y) = (fs::read(a).map_err(|e| e.to_string())?, fs::read(b).map_err(|e| e.to_string())?);
    ensure(!x.is_empty() && x == y, "outputs differ")?;
    Ok(format!("{} bytes identical", x.len()))
}

fn kill_and_resume() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let full = dir.path().join("full.jsonl");
    let resumed = dir.path().join("resumed.jsonl");
    let ckpt = dir.path().join("run.ckpt");
    let (full, resumed, ckpt) = (full.to_str().unwrap(), resumed.to_str().unwrap(), ckpt.to_str().unwrap());

    let started = Instant::now();
    psptab_cli(&tabulate_args("10^8", full, &["--workers", "1"]));
    let uninterrupted = started.elapsed();

    let mut child = Command::new(env!("CARGO_BIN_EXE_psptab"))
        .args(tabulate_args("10^8", resumed, &["--workers", "1", "--checkpoint", ckpt]))
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| e.to_string())?;
    std::thread::sleep((uninterrupted / 3).max(Duration::from_millis(200)));
    child.kill().map_err(|e| e.to_string())?;
    child.wait().map_err(|e| e.to_string())?;
    let units_at_kill = fs::read_to_string(ckpt).map_or(0, |t| t.lines().count().saturating_sub(1));
    ensure(!std::path::Path::new(resumed).exists(), "killed run finished before the kill")?;

    psptab_cli(&tabulate_args("10^8", resumed, &["--workers", "2", "--checkpoint", ckpt]));
    let summary: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(format!("{resumed}.summary.json")).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    ensure(summary["units_resumed"].as_u64() == Some(units_at_kill as u64), "resume skipped the wrong units")?;
    ensure(units_at_kill > 0, "no unit was committed before the kill")?;

    let (x, y) = (fs::read(full).map_err(|e| e.to_string())?, fs::read(resumed).map_err(|e| e.to_string())?);
    ensure(x == y, "resumed output differs from the uninterrupted run")?;

    // library-level interruptions at fixed points
    let mut config = TabulationConfig::new(1_000_000, params((5, 0, 5)), 2, 3);
    config.checkpoint_path = Some(dir.path().join("lib.ckpt"));
    let reference = {
        let mut c = config.clone();
        c.checkpoint_path = None;
        tabulate(&c).map_err(|e| e.to_string())?
    };
    config.stop_after_units = Some(7);
    let final_summary = loop {
        match tabulate(&config) {
            Ok(s) => break s,
            Err(Error::Interrupted { .. }) => continue,
            Err(e) => return Err(e.to_string()),
        }
    };
    ensure(final_summary.records == reference.records, "library resume differs")?;
    ensure(
        final_summary.preproducts_processed == reference.preproducts_processed
            && final_summary.candidates_tested == reference.candidates_tested,
        "counters differ after resume",
    )?;
    Ok(format!("killed after {units_at_kill} units, {} bytes identical", x.len()))
}

fn criterion_7() -> Outcome {
    let parts: [(&str, Check); 6] = [
        ("lucas identity", lucas_identity),
        ("order/rank minimality", minimality),
        ("jacobi multiplicativity", jacobi_multiplicativity),
        ("crossover invariance", crossover_invariance),
        ("determinism", determinism),
        ("kill/resume", kill_and_resume),
    ];
    let mut notes = Vec::new();
    for (name, f) in parts {
        let note = f().map_err(|e| format!("{name}: {e}"))?;
        println!("      {name}: {note}");
        notes.push(name);
    }
    Ok(notes.join(", "))
}

fn main() {
    let criteria: [(&str, &str, Check); 7] = [
        ("1", "tabulate 2^32 for (2,1,-1), t = 2..3 is empty", criterion_1),
        ("2", "admissible eps=+1 primes below 2^30", criterion_2),
        ("3", "2047 under (2,23,131)", criterion_3),
        ("4", "tabulation equals brute force at 10^6", criterion_4),
        ("5", "GCD step equals sieve step for k <= 10^4 at 10^8", criterion_5),
        ("6", "square-factor scans to 2^30", criterion_6),
        ("7", "property suites", criterion_7),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(note) => println!("PASS criterion {id}: {name} ({note}) [{secs:.1}s]"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {id}: {name}: {why} [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
