//! The main loop: enumerate admissible pre-products for each factor count,
//! run the GCD step below the crossover and the sieve step above it, and
//! merge the results.
//!
//! Work is split into units `(t, root)`, one per enumeration subtree. Units
//! run on a worker pool and report to a single writer, which appends found
//! records to a journal and then marks the unit complete in the checkpoint.
//! A resumed run skips completed units and merges journaled records, so
//! units interrupted in flight are simply redone.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::arith::{iroot, LucasParams, SizeBudget};
use crate::error::{Error, Result};
use crate::gcd_step::{gcd_step, StepOptions};
use crate::orders::{PrimeProfile, DEFAULT_CACHE_LIMIT};
use crate::preproduct::{enumerate_subtree, subtree_roots, ProfileSource};
use crate::sieve_gen::DEFAULT_SEGMENT_SIZE;
use crate::sieve_step::sieve_step;
use crate::squares::{scan_squares, MAX_SQUARE_SCAN_BOUND};
use crate::verify::PspRecord;

const CHECKPOINT_MAGIC: &str = "psptab-checkpoint v1";

#[derive(Debug, Clone)]
pub struct TabulationConfig {
    pub bound: u64,
    pub params: LucasParams,
    pub min_factors: u32,
    pub max_factors: u32,
    /// Fixed crossover for every factor count; `None` selects
    /// `B^{(t-1)/(2t-1)}` per `t`.
    pub crossover: Option<u64>,
    pub workers: usize,
    pub output_path: Option<PathBuf>,
    pub checkpoint_path: Option<PathBuf>,
    pub rng_seed: u64,
    pub keep_going: bool,
    pub budget: SizeBudget,
    pub cache_limit: u64,
    pub segment_size: u64,
    /// Stop with [`Error::Interrupted`] once this many units are committed.
    pub stop_after_units: Option<usize>,
}

impl TabulationConfig {
    pub fn new(bound: u64, params: LucasParams, min_factors: u32, max_factors: u32) -> Self {
        TabulationConfig {
            bound,
            params,
            min_factors,
            max_factors,
            crossover: None,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            output_path: None,
            checkpoint_path: None,
            rng_seed: 0,
            keep_going: false,
            budget: SizeBudget::default(),
            cache_limit: DEFAULT_CACHE_LIMIT,
            segment_size: DEFAULT_SEGMENT_SIZE,
            stop_after_units: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidArgument(msg));
        if self.bound < 9 {
            return fail(format!("bound must be at least 9, got {}", self.bound));
        }
        if self.min_factors < 2 || self.max_factors < self.min_factors {
            return fail(format!(
                "factor counts need 2 <= min <= max, got {}..{}",
                self.min_factors, self.max_factors
            ));
        }
        if self.max_factors > 64 {
            return fail("at most 64 prime factors".into());
        }
        if let Some(x) = self.crossover {
            if x < 1 || x >= self.bound {
                return fail(format!("crossover must satisfy 1 <= X < B, got {x}"));
            }
        }
        if self.workers == 0 {
            return fail("workers must be positive".into());
        }
        if self.params.has_square_discriminant() {
            return fail(format!("D = {} is a perfect square", self.params.d()));
        }
        if self.segment_size < 64 {
            return fail("segment size must be at least 64".into());
        }
        Ok(())
    }

    /// Crossover used for pre-products with `t - 1` primes.
    pub fn crossover_for(&self, t: u32) -> u64 {
        if let Some(x) = self.crossover {
            return x;
        }
        let power = BigUint::from(self.bound).pow(t - 1);
        power.nth_root(2 * t - 1).to_u64().expect("root is below B")
    }

    /// Hex SHA-256 of everything that determines the output.
    pub fn config_hash(&self) -> String {
        let crossover = self.crossover.map_or("auto".to_string(), |x| x.to_string());
        let canonical = format!(
            "B={};b={};P={};Q={};t={}..{};X={}",
            self.bound,
            self.params.b(),
            self.params.p(),
            self.params.q(),
            self.min_factors,
            self.max_factors,
            crossover
        );
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct UnitCounts {
    pub preproducts: u64,
    pub candidates_tested: u64,
    pub gcd_steps: u64,
    pub sieve_steps: u64,
}

impl UnitCounts {
    fn add(&mut self, other: &UnitCounts) {
        self.preproducts += other.preproducts;
        self.candidates_tested += other.candidates_tested;
        self.gcd_steps += other.gcd_steps;
        self.sieve_steps += other.sieve_steps;
    }
}

/// A unit that failed under `keep_going`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FailedUnit {
    pub t: u32,
    pub root: u64,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct Summary {
    /// Sorted by `n`, without duplicates.
    pub records: Vec<PspRecord>,
    pub preproducts_processed: u64,
    pub candidates_tested: u64,
    pub gcd_steps: u64,
    pub sieve_steps: u64,
    pub units_total: usize,
    /// Units taken from the checkpoint rather than computed.
    pub units_resumed: usize,
    pub failed_units: Vec<FailedUnit>,
    /// Primes up to `sqrt(B)` that are both Wieferich and Wall-Sun-Sun.
    pub square_warning: Vec<u64>,
    pub wall_time: Duration,
}

impl Summary {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "records": self.records.len(),
            "preproducts_processed": self.preproducts_processed,
            "candidates_tested": self.candidates_tested,
            "gcd_steps": self.gcd_steps,
            "sieve_steps": self.sieve_steps,
            "units_total": self.units_total,
            "units_resumed": self.units_resumed,
            "failed_units": self.failed_units,
            "square_warning": self.square_warning,
            "wall_time": self.wall_time.as_secs_f64(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct UnitId {
    t: u32,
    root: u64,
}

struct Unit {
    id: UnitId,
    root: PrimeProfile,
}

/// Runs one subtree. The first failing pre-product aborts the unit.
fn run_unit(
    unit: &Unit,
    config: &TabulationConfig,
    source: &ProfileSource,
) -> Result<(UnitCounts, Vec<PspRecord>)> {
    let crossover = config.crossover_for(unit.id.t);
    let opts = StepOptions {
        budget: config.budget,
        seed: config.rng_seed,
    };
    let mut counts = UnitCounts::default();
    let mut records = Vec::new();
    enumerate_subtree(&unit.root, config.bound, unit.id.t - 1, source, &mut |pre| {
        counts.preproducts += 1;
        let outcome = if pre.k() <= crossover {
            counts.gcd_steps += 1;
            gcd_step(pre, config.bound, &config.params, &opts)
        } else {
            counts.sieve_steps += 1;
            sieve_step(pre, config.bound, &config.params)
        };
        let outcome = outcome.map_err(|e| {
            log::error!("pre-product {} ({:?}): {e}", pre.k(), pre.primes());
            Error::WorkUnit {
                k: pre.k(),
                source: Box::new(e),
            }
        })?;
        counts.candidates_tested += outcome.candidates_tested;
        records.extend(outcome.records);
        Ok(())
    })?;
    Ok((counts, records))
}

/// Progress restored from a checkpoint and its record journal.
#[derive(Default)]
struct Resumed {
    done: BTreeMap<UnitId, UnitCounts>,
    records: Vec<PspRecord>,
}

fn journal_path(checkpoint: &Path) -> PathBuf {
    let mut name = checkpoint.as_os_str().to_owned();
    name.push(".records");
    PathBuf::from(name)
}

fn corrupt(path: &Path, why: &str) -> Error {
    Error::Checkpoint(format!(
        "{} is corrupt ({why}); delete it and restart the run",
        path.display()
    ))
}

/// Non-empty lines of `text`; an unterminated last line is dropped, since
/// it was being written when the run stopped.
fn complete_lines(text: &str) -> impl Iterator<Item = &str> {
    let end = text.rfind('\n').map_or(0, |i| i + 1);
    text[..end].lines().filter(|l| !l.trim().is_empty())
}

fn parse_unit_line(line: &str) -> Option<(UnitId, UnitCounts)> {
    let mut fields = line.split_whitespace();
    let mut next = || fields.next()?.parse::<u64>().ok();
    let t = u32::try_from(next()?).ok()?;
    let root = next()?;
    let counts = UnitCounts {
        preproducts: next()?,
        candidates_tested: next()?,
        gcd_steps: next()?,
        sieve_steps: next()?,
    };
    fields.next().is_none().then_some((UnitId { t, root }, counts))
}

fn unit_line(id: UnitId, c: &UnitCounts) -> String {
    format!(
        "{} {} {} {} {} {}\n",
        id.t, id.root, c.preproducts, c.candidates_tested, c.gcd_steps, c.sieve_steps
    )
}

fn load_checkpoint(path: &Path, hash: &str, units: &HashSet<UnitId>) -> Result<Resumed> {
    let text = match fs::read_to_string(path) {
        Ok(text) => text,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Resumed::default()),
        Err(e) => return Err(e.into()),
    };
    if text.trim().is_empty() {
        return Ok(Resumed::default());
    }
    let mut lines = complete_lines(&text);
    let header = lines.next().ok_or_else(|| corrupt(path, "no header"))?;
    let Some(found) = header.strip_prefix(CHECKPOINT_MAGIC) else {
        return Err(corrupt(path, "bad header"));
    };
    if found.trim() != hash {
        return Err(Error::Checkpoint(format!(
            "{} belongs to a different configuration; delete it or use the original settings",
            path.display()
        )));
    }
    let mut resumed = Resumed::default();
    for line in lines {
        let (id, counts) = parse_unit_line(line).ok_or_else(|| corrupt(path, "malformed unit line"))?;
        if !units.contains(&id) {
            return Err(corrupt(path, "unknown work unit"));
        }
        resumed.done.entry(id).or_insert(counts);
    }
    let journal = journal_path(path);
    match fs::read_to_string(&journal) {
        Ok(text) => {
            for line in complete_lines(&text) {
                let record = PspRecord::from_json_line(line)
                    .map_err(|_| corrupt(&journal, "malformed record"))?;
                resumed.records.push(record);
            }
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
        Err(e) => return Err(e.into()),
    }
    Ok(resumed)
}

/// Rewrites the checkpoint and journal with only their valid content and
/// opens both for appending.
fn reopen_checkpoint(path: &Path, hash: &str, resumed: &Resumed) -> Result<(File, File)> {
    let mut text = format!("{CHECKPOINT_MAGIC} {hash}\n");
    for (id, counts) in &resumed.done {
        text.push_str(&unit_line(*id, counts));
    }
    fs::write(path, text)?;
    let journal = journal_path(path);
    let records: String = resumed.records.iter().map(|r| r.to_json_line() + "\n").collect();
    fs::write(&journal, records)?;
    let open = |p: &Path| OpenOptions::new().append(true).open(p);
    Ok((open(path)?, open(&journal)?))
}

fn commit(files: &mut (File, File), id: UnitId, counts: &UnitCounts, found: &[PspRecord]) -> Result<()> {
    let (checkpoint, journal) = files;
    for record in found {
        writeln!(journal, "{}", record.to_json_line())?;
    }
    journal.flush()?;
    checkpoint.write_all(unit_line(id, counts).as_bytes())?;
    checkpoint.flush()?;
    Ok(())
}

enum Message {
    Done(UnitId, UnitCounts, Vec<PspRecord>),
    Failed(UnitId, Error),
}

fn write_output(path: &Path, summary: &Summary) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for record in &summary.records {
        writeln!(out, "{}", record.to_json_line())?;
    }
    out.flush()?;
    let mut sidecar = path.as_os_str().to_owned();
    sidecar.push(".summary.json");
    fs::write(
        PathBuf::from(sidecar),
        serde_json::to_string_pretty(&summary.to_json())? + "\n",
    )?;
    Ok(())
}

/// Tabulates every challenge pseudoprime `n <= B` with between
/// `min_factors` and `max_factors` distinct prime factors.
pub fn tabulate(config: &TabulationConfig) -> Result<Summary> {
    config.validate()?;
    let started = Instant::now();
    let root_b = iroot(config.bound, 2);

    let squares = scan_squares(root_b.min(MAX_SQUARE_SCAN_BOUND), &config.params)?;
    if !squares.both.is_empty() {
        log::warn!(
            "primes {:?} are both Wieferich and Wall-Sun-Sun; pseudoprimes divisible by their squares are not searched",
            squares.both
        );
    }

    let source = ProfileSource::new(&config.params, root_b, config.cache_limit, config.segment_size)?;
    let mut units = Vec::new();
    for t in config.min_factors..=config.max_factors {
        for root in subtree_roots(&source, config.bound, t - 1)? {
            units.push(Unit {
                id: UnitId { t, root: root.p },
                root,
            });
        }
    }
    let ids: HashSet<UnitId> = units.iter().map(|u| u.id).collect();
    let hash = config.config_hash();

    let (resumed, mut files) = match &config.checkpoint_path {
        Some(path) => {
            let resumed = load_checkpoint(path, &hash, &ids)?;
            let files = reopen_checkpoint(path, &hash, &resumed)?;
            (resumed, Some(files))
        }
        None => (Resumed::default(), None),
    };
    let units_resumed = resumed.done.len();
    let mut totals = UnitCounts::default();
    for counts in resumed.done.values() {
        totals.add(counts);
    }
    let mut records = resumed.records;
    let pending: Vec<&Unit> = units.iter().filter(|u| !resumed.done.contains_key(&u.id)).collect();
    log::info!(
        "{} work units, {} already complete, crossover per t: {:?}",
        units.len(),
        units_resumed,
        (config.min_factors..=config.max_factors)
            .map(|t| config.crossover_for(t))
            .collect::<Vec<_>>()
    );

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    let cancel = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel::<Message>();
    let mut failed = Vec::new();
    let mut first_error: Option<Error> = None;
    let mut committed = 0usize;

    std::thread::scope(|scope| {
        let source = &source;
        let cancel = &cancel;
        scope.spawn(move || {
            pool.install(|| {
                pending.par_iter().for_each_with(tx, |tx, unit| {
                    if cancel.load(Ordering::Relaxed) {
                        return;
                    }
                    let msg = match run_unit(unit, config, source) {
                        Ok((counts, found)) => Message::Done(unit.id, counts, found),
                        Err(e) => Message::Failed(unit.id, e),
                    };
                    let _ = tx.send(msg);
                });
            });
        });
        for msg in rx {
            if cancel.load(Ordering::Relaxed) {
                continue;
            }
            match msg {
                Message::Done(id, counts, found) => {
                    if let Some(files) = files.as_mut() {
                        if let Err(e) = commit(files, id, &counts, &found) {
                            first_error = Some(e);
                            cancel.store(true, Ordering::Relaxed);
                            continue;
                        }
                    }
                    totals.add(&counts);
                    records.extend(found);
                    committed += 1;
                    if config.stop_after_units.is_some_and(|n| committed >= n) {
                        cancel.store(true, Ordering::Relaxed);
                    }
                }
                Message::Failed(id, e) => {
                    log::error!("work unit t={} root={} failed: {e}", id.t, id.root);
                    if config.keep_going {
                        failed.push(FailedUnit {
                            t: id.t,
                            root: id.root,
                            error: e.to_string(),
                        });
                    } else {
                        first_error = Some(e);
                        cancel.store(true, Ordering::Relaxed);
                    }
                }
            }
        }
    });

    if let Some(e) = first_error {
        return Err(e);
    }
    if cancel.load(Ordering::Relaxed) {
        return Err(Error::Interrupted {
            completed: units_resumed + committed,
        });
    }

    let mut by_n: HashMap<u64, PspRecord> = HashMap::new();
    for record in records {
        by_n.entry(record.n).or_insert(record);
    }
    let mut records: Vec<PspRecord> = by_n.into_values().collect();
    records.sort_by_key(|r| r.n);
    failed.sort_by_key(|f| (f.t, f.root));

    let summary = Summary {
        records,
        preproducts_processed: totals.preproducts,
        candidates_tested: totals.candidates_tested,
        gcd_steps: totals.gcd_steps,
        sieve_steps: totals.sieve_steps,
        units_total: units.len(),
        units_resumed,
        failed_units: failed,
        square_warning: squares.both,
        wall_time: started.elapsed(),
    };
    if let Some(path) = &config.output_path {
        write_output(path, &summary)?;
    }
    Ok(summary)
}
