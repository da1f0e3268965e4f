use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use psptab::orders::{admissible_profiles, EpsilonFilter};
use psptab::sieve_gen::DEFAULT_SEGMENT_SIZE;
use psptab::squares::scan_squares;
use psptab::tabulate::{tabulate, TabulationConfig};
use psptab::verify::{brute_force_tabulate, challenge_verdict, PspRecord};
use psptab::{Error, LucasParams};

const EXIT_FOUND: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

/// Tabulate composites that are both Fermat and Lucas pseudoprimes with
/// Jacobi symbol -1.
#[derive(Parser)]
#[command(name = "psptab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find every challenge pseudoprime up to a bound with a given number of prime factors.
    Tabulate(TabulateArgs),
    /// Evaluate the Fermat and Lucas conditions for one integer.
    Verify(VerifyArgs),
    /// Test every odd integer up to a bound directly (at most 10^8).
    BruteForce(BruteForceArgs),
    /// List Wieferich and Wall-Sun-Sun primes up to a bound.
    ScanSquare(BoundArgs),
    /// List admissible primes with their order and rank of apparition.
    AdmissiblePrimes(AdmissibleArgs),
}

#[derive(Args, Clone, Copy)]
struct ParamArgs {
    /// Fermat base b.
    #[arg(long = "base", default_value_t = 2)]
    base: u64,
    /// Lucas parameter P.
    #[arg(long = "P", default_value_t = 1, allow_negative_numbers = true)]
    p: i64,
    /// Lucas parameter Q.
    #[arg(long = "Q", default_value_t = -1, allow_negative_numbers = true)]
    q: i64,
}

impl ParamArgs {
    fn checked(&self) -> psptab::Result<LucasParams> {
        LucasParams::new(self.base, self.p, self.q)
    }

    fn unrestricted(&self) -> psptab::Result<LucasParams> {
        LucasParams::unrestricted(self.base, self.p, self.q)
    }
}

#[derive(Args)]
struct BoundArgs {
    /// Upper bound, as a decimal or a power such as 2^32 or 10^6.
    #[arg(long, value_parser = parse_bound)]
    bound: u64,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Args)]
struct TabulateArgs {
    #[arg(long, value_parser = parse_bound)]
    bound: u64,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value_t = 2)]
    min_factors: u32,
    /// Defaults to --min-factors.
    #[arg(long)]
    max_factors: Option<u32>,
    /// Pre-products k <= X use the GCD step; the default depends on the factor count.
    #[arg(long, value_parser = parse_bound)]
    crossover: Option<u64>,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    workers: Option<usize>,
    /// Write records here (JSON lines) and a summary next to it; stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Resume from and record progress in this file.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Log failed work units and continue.
    #[arg(long)]
    keep_going: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(value_parser = parse_bound)]
    n: u64,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Args)]
struct BruteForceArgs {
    #[arg(long, value_parser = parse_bound)]
    bound: u64,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Epsilon {
    #[value(name = "+1", alias = "1")]
    Plus,
    #[value(name = "-1")]
    Minus,
    #[value(name = "any")]
    Any,
}

#[derive(Args)]
struct AdmissibleArgs {
    #[arg(long, value_parser = parse_bound)]
    bound: u64,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, value_enum, default_value = "any", allow_hyphen_values = true)]
    epsilon: Epsilon,
}

/// Accepts `123`, `1_000_000`, `2^32` and `10^6`.
fn parse_bound(s: &str) -> Result<u64, String> {
    let s = s.replace('_', "");
    let parse = |t: &str| t.trim().parse::<u64>().map_err(|e| format!("{t:?}: {e}"));
    match s.split_once('^') {
        None => parse(&s),
        Some((base, exp)) => {
            let exp = u32::try_from(parse(exp)?).map_err(|_| "exponent too large".to_string())?;
            parse(base)?
                .checked_pow(exp)
                .ok_or_else(|| format!("{s} does not fit in 64 bits"))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(
            Error::InvalidArgument(_)
            | Error::Domain(_)
            | Error::Budget { .. }
            | Error::OutOfTable { .. }
            | Error::Checkpoint(_),
        ) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn write_records(records: &[PspRecord]) -> anyhow::Result<()> {
    let mut out = BufWriter::new(io::stdout().lock());
    for r in records {
        writeln!(out, "{}", r.to_json_line())?;
    }
    out.flush()?;
    Ok(())
}

fn found(any: bool) -> u8 {
    if any {
        EXIT_FOUND
    } else {
        0
    }
}

fn run_tabulate(args: TabulateArgs) -> anyhow::Result<u8> {
    let params = args.params.checked()?;
    let max_factors = args.max_factors.unwrap_or(args.min_factors);
    let mut config = TabulationConfig::new(args.bound, params, args.min_factors, max_factors);
    config.crossover = args.crossover;
    if let Some(w) = args.workers {
        config.workers = w;
    }
    config.output_path = args.out.clone();
    config.checkpoint_path = args.checkpoint;
    config.rng_seed = args.seed;
    config.keep_going = args.keep_going;
    let summary = tabulate(&config)?;
    if args.out.is_none() {
        write_records(&summary.records)?;
    }
    eprintln!("{}", summary.to_json());
    if !summary.failed_units.is_empty() {
        bail!("{} work unit(s) failed", summary.failed_units.len());
    }
    Ok(found(!summary.records.is_empty()))
}

fn run_verify(args: VerifyArgs) -> anyhow::Result<u8> {
    let params = args.params.checked()?;
    if args.n < 3 || args.n % 2 == 0 {
        return Err(Error::Domain(format!("n must be odd and at least 3, got {}", args.n)).into());
    }
    let verdict = challenge_verdict(args.n, &params);
    println!("{}", serde_json::to_string(&verdict)?);
    if !verdict.coprime_to_base || !verdict.coprime_to_2qd {
        return Ok(EXIT_CONFIG);
    }
    Ok(if verdict.is_challenge { 0 } else { 1 })
}

fn run() -> anyhow::Result<u8> {
    match Cli::parse().command {
        Command::Tabulate(args) => run_tabulate(args),
        Command::Verify(args) => run_verify(args),
        Command::BruteForce(args) => {
            let records = brute_force_tabulate(args.bound, &args.params.checked()?)?;
            write_records(&records)?;
            Ok(found(!records.is_empty()))
        }
        Command::ScanSquare(args) => {
            let scan = scan_squares(args.bound, &args.params.unrestricted()?)?;
            println!("{}", serde_json::to_string(&scan)?);
            Ok(0)
        }
        Command::AdmissiblePrimes(args) => {
            let filter = match args.epsilon {
                Epsilon::Plus => EpsilonFilter::Plus,
                Epsilon::Minus => EpsilonFilter::Minus,
                Epsilon::Any => EpsilonFilter::Any,
            };
            let params = args.params.checked()?;
            let profiles = admissible_profiles(&params, 3, args.bound, filter, DEFAULT_SEGMENT_SIZE)
                .with_context(|| format!("admissible primes up to {}", args.bound))?;
            let mut out = BufWriter::new(io::stdout().lock());
            for pp in &profiles {
                writeln!(out, "{}", serde_json::to_string(pp)?)?;
            }
            out.flush()?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
