//! `conffilt` — confidence sets for filtered time series.
//!
//! Subcommands: `build` prints the serialized confidence set for a single
//! observation; `coverage`, `growth`, and `entropy` run the batch
//! experiments and emit CSV; `oracle-check` cross-validates the lazy
//! enumeration against an exhaustive oracle on fuzzed models.
//!
//! Every flag may also be supplied by a JSON config file (`--config`)
//! keyed by the long flag name; explicit flags override the file.
//!
//! Exit codes: 0 success, 1 usage error, 2 model validation failure,
//! 3 impossible observation, 4 cap exceeded, 5 tolerance failed.

use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use conffilt::confset::build_confidence_set;
use conffilt::entropy::{
    closed_form_rate, exact_block_conditional_entropy, smb_estimate, EntropyEstimate,
};
use conffilt::experiments::{
    coverage_experiment, growth_experiment, oracle_check, write_coverage_csv, write_entropy_csv,
    write_growth_csv, CoverageConfig, GrowthConfig, OracleConfig,
};
use conffilt::inference::enumerate_descending;
use conffilt::models::{compile_trellis, ModelSpec};
use conffilt::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_MODEL: u8 = 2;
const EXIT_IMPOSSIBLE: u8 = 3;
const EXIT_CAP: u8 = 4;
const EXIT_TOLERANCE: u8 = 5;

const DEFAULT_CAP: usize = 1 << 20;
const DEFAULT_LIMIT: usize = 1 << 22;

#[derive(Parser)]
#[command(name = "conffilt", version, about = "Exact-coverage confidence sets for noisy finite-alphabet signals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the confidence set for one observation and print it.
    Build(BuildArgs),
    /// Estimate empirical coverage over many sampled trials.
    Coverage(CoverageArgs),
    /// Trace expected set size against sequence length.
    Growth(GrowthArgs),
    /// Estimate the conditional entropy rate h(X|Z).
    Entropy(EntropyArgs),
    /// Cross-validate the enumeration against an exhaustive oracle.
    OracleCheck(OracleArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Model description (JSON).
    #[arg(long)]
    model: Option<PathBuf>,

    /// Confidence level(s) in (0, 1); comma-separated list allowed where
    /// the subcommand supports it.
    #[arg(long)]
    gamma: Option<String>,

    /// Base seed for all randomized draws.
    #[arg(long)]
    seed: Option<u64>,

    /// Core-size cap per confidence set.
    #[arg(long)]
    cap: Option<usize>,

    /// Item limit for the ranked enumeration.
    #[arg(long)]
    limit: Option<usize>,

    /// Output path (defaults to stdout).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads for trial-parallel experiments (default: all cores).
    #[arg(long)]
    workers: Option<usize>,

    /// Erasure probability used only to sample observations under an
    /// `erasure_unknown` channel.
    #[arg(long = "surrogate-pi")]
    surrogate_pi: Option<f64>,

    /// JSON file supplying any of the flags by long name; explicit flags
    /// take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Observation as a glyph string over the output alphabet.
    #[arg(long)]
    z: Option<String>,
}

#[derive(Args)]
struct CoverageArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Sequence length per trial.
    #[arg(long)]
    t: Option<String>,

    /// Number of independent trials.
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Args)]
struct GrowthArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Strictly increasing comma-separated grid of sequence lengths.
    #[arg(long)]
    t: Option<String>,

    /// Observations sampled per grid point.
    #[arg(long)]
    samples: Option<usize>,

    /// Pass tolerance on |final-t mean rate − h(X|Z)|.
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Args)]
struct EntropyArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Block length for exact_block, path length for smb.
    #[arg(long)]
    t: Option<String>,

    /// Replicates for the smb estimator.
    #[arg(long)]
    samples: Option<usize>,

    /// Comma-separated methods: closed_form, exact_block, smb.
    #[arg(long)]
    method: Option<String>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Number of fuzzed cases.
    #[arg(long)]
    cases: Option<usize>,

    /// Maximum sequence length per case.
    #[arg(long)]
    t: Option<String>,
}

/// A usage problem (bad flag value, missing argument, unreadable config).
struct UsageError(String);

impl<T: Display> From<T> for UsageError {
    fn from(err: T) -> Self {
        UsageError(err.to_string())
    }
}

/// Flag-or-config resolver for one subcommand invocation.
struct Resolver {
    config: serde_json::Map<String, Value>,
}

impl Resolver {
    fn load(path: Option<&Path>) -> Result<Self, UsageError> {
        let config = match path {
            None => serde_json::Map::new(),
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
                match serde_json::from_str::<Value>(&text) {
                    Ok(Value::Object(map)) => map,
                    Ok(_) => return Err(UsageError("config must be a JSON object".into())),
                    Err(e) => return Err(UsageError(format!("config is not valid JSON: {e}"))),
                }
            }
        };
        Ok(Resolver { config })
    }

    /// Flag value if given, else the config entry parsed from a JSON
    /// scalar, else `None`.
    fn get<V: FromStr>(&self, flag: Option<V>, key: &str) -> Result<Option<V>, UsageError>
    where
        V::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        let Some(value) = self.config.get(key) else {
            return Ok(None);
        };
        let text = match value {
            Value::String(s) => s.clone(),
            Value::Number(n) => n.to_string(),
            Value::Bool(b) => b.to_string(),
            Value::Array(items) => {
                let parts: Result<Vec<String>, UsageError> = items
                    .iter()
                    .map(|v| match v {
                        Value::String(s) => Ok(s.clone()),
                        Value::Number(n) => Ok(n.to_string()),
                        _ => Err(UsageError(format!("config key '{key}' has a non-scalar list"))),
                    })
                    .collect();
                parts?.join(",")
            }
            _ => return Err(UsageError(format!("config key '{key}' must be a scalar"))),
        };
        text.parse::<V>()
            .map(Some)
            .map_err(|e| UsageError(format!("config key '{key}': {e}")))
    }

    fn require<V: FromStr>(&self, flag: Option<V>, key: &str) -> Result<V, UsageError>
    where
        V::Err: Display,
    {
        self.get(flag, key)?
            .ok_or_else(|| UsageError(format!("missing required flag --{key}")))
    }
}

fn parse_list<V: FromStr>(text: &str, what: &str) -> Result<Vec<V>, UsageError>
where
    V::Err: Display,
{
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<V>()
                .map_err(|e| UsageError(format!("bad {what} '{part}': {e}")))
        })
        .collect()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Build(args) => run_build(args),
        Command::Coverage(args) => run_coverage(args),
        Command::Growth(args) => run_growth(args),
        Command::Entropy(args) => run_entropy(args),
        Command::OracleCheck(args) => run_oracle(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Lib(err)) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<UsageError> for CliError {
    fn from(err: UsageError) -> Self {
        CliError::Usage(err.0)
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        CliError::Lib(err)
    }
}

fn exit_code_for(err: &Error) -> u8 {
    if err.is_model_validation() {
        EXIT_MODEL
    } else if matches!(err, Error::ImpossibleObservation) {
        EXIT_IMPOSSIBLE
    } else if err.is_cap() {
        EXIT_CAP
    } else if matches!(err, Error::OracleMismatch(_)) {
        EXIT_TOLERANCE
    } else {
        EXIT_USAGE
    }
}

/// Resolved values shared by all subcommands.
struct Common {
    resolver: Resolver,
    model: Option<ModelSpec>,
    gammas: Vec<f64>,
    seed: u64,
    cap: usize,
    limit: usize,
    out: Option<PathBuf>,
    workers: Option<usize>,
    surrogate_pi: Option<f64>,
}

fn resolve_common(args: CommonArgs, needs_model: bool) -> Result<Common, CliError> {
    let resolver = Resolver::load(args.config.as_deref())?;
    let model_path = resolver.get(args.model, "model")?;
    let model = match model_path {
        Some(path) => Some(ModelSpec::from_path(&path)?),
        None if needs_model => return Err(UsageError("missing required flag --model".into()).into()),
        None => None,
    };
    let gammas = match resolver.get(args.gamma, "gamma")? {
        Some(text) => parse_list::<f64>(&text, "gamma")?,
        None => Vec::new(),
    };
    Ok(Common {
        model,
        gammas,
        seed: resolver.get(args.seed, "seed")?.unwrap_or(0),
        cap: resolver.get(args.cap, "cap")?.unwrap_or(DEFAULT_CAP),
        limit: resolver.get(args.limit, "limit")?.unwrap_or(DEFAULT_LIMIT),
        out: resolver.get(args.out, "out")?,
        workers: resolver.get(args.workers, "workers")?,
        surrogate_pi: resolver.get(args.surrogate_pi, "surrogate-pi")?,
        resolver,
    })
}

fn single_gamma(common: &Common) -> Result<f64, UsageError> {
    match common.gammas.as_slice() {
        [gamma] => Ok(*gamma),
        [] => Err(UsageError("missing required flag --gamma".into())),
        _ => Err(UsageError("this subcommand takes a single --gamma".into())),
    }
}

/// Run `body` on a pool with the requested worker count, or inline on the
/// default pool.
fn with_workers<T: Send>(
    workers: Option<usize>,
    body: impl FnOnce() -> T + Send,
) -> Result<T, CliError> {
    match workers {
        None => Ok(body()),
        Some(n) => {
            if n == 0 {
                return Err(UsageError("--workers must be at least 1".into()).into());
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| UsageError(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(body))
        }
    }
}

/// Write `text` to --out or stdout.
fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Lib(Error::Io(e))),
        None => {
            print!("{text}");
            std::io::stdout()
                .flush()
                .map_err(|e| CliError::Lib(Error::Io(e)))
        }
    }
}

/// Output target for one γ of a possibly multi-γ experiment: with a list
/// of levels, the γ value is woven into the file name.
fn gamma_out(out: Option<&Path>, gamma: f64, multi: bool) -> Result<Option<PathBuf>, UsageError> {
    match (out, multi) {
        (Some(path), true) => {
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| UsageError(format!("bad output path {}", path.display())))?;
            let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
            Ok(Some(path.with_file_name(format!("{stem}.gamma{gamma}.{ext}"))))
        }
        (Some(path), false) => Ok(Some(path.to_path_buf())),
        (None, true) => Err(UsageError(
            "a --gamma list needs --out (one file per level)".into(),
        )),
        (None, false) => Ok(None),
    }
}

fn run_build(args: BuildArgs) -> Result<u8, CliError> {
    let common = resolve_common(args.common, true)?;
    let gamma = single_gamma(&common)?;
    let model = common.model.as_ref().expect("model required");
    let z_text: String = common.resolver.require(args.z, "z")?;
    let z = model.output_alphabet().parse_sequence(&z_text)?;
    let trellis = compile_trellis(model, &z);
    let mut stream = enumerate_descending(&trellis, common.limit)?;
    let set = build_confidence_set(&mut stream, gamma, common.cap)?;
    emit(common.out.as_deref(), &set.serialize(model.input_alphabet()))?;
    Ok(0)
}

fn run_coverage(args: CoverageArgs) -> Result<u8, CliError> {
    let common = resolve_common(args.common, true)?;
    if common.gammas.is_empty() {
        return Err(UsageError("missing required flag --gamma".into()).into());
    }
    let t_text: String = common.resolver.require(args.t, "t")?;
    let t_values = parse_list::<usize>(&t_text, "t")?;
    let [t] = t_values.as_slice() else {
        return Err(UsageError("coverage takes a single --t".into()).into());
    };
    let trials = common.resolver.require(args.trials, "trials")?;
    let model = common.model.as_ref().expect("model required");

    let multi = common.gammas.len() > 1;
    let mut all_pass = true;
    for &gamma in &common.gammas {
        let config = CoverageConfig {
            gamma,
            t: *t,
            trials,
            seed: common.seed,
            cap: common.cap,
            limit: common.limit,
            surrogate_pi: common.surrogate_pi,
        };
        let report = with_workers(common.workers, || coverage_experiment(model, &config))??;
        let mut csv = Vec::new();
        write_coverage_csv(&mut csv, &report).map_err(Error::Io)?;
        let out = gamma_out(common.out.as_deref(), gamma, multi)?;
        emit(out.as_deref(), &String::from_utf8(csv).expect("csv is utf-8"))?;
        eprintln!(
            "coverage γ={gamma}: empirical {:.6} over {} trials, 99% Wilson [{:.6}, {:.6}], \
             {} capped — {}",
            report.empirical_coverage,
            report.rows.len(),
            report.wilson_low,
            report.wilson_high,
            report.cap_exceeded,
            if report.pass { "pass" } else { "FAIL" }
        );
        all_pass &= report.pass;
    }
    Ok(if all_pass { 0 } else { EXIT_TOLERANCE })
}

fn run_growth(args: GrowthArgs) -> Result<u8, CliError> {
    let common = resolve_common(args.common, true)?;
    if common.gammas.is_empty() {
        return Err(UsageError("missing required flag --gamma".into()).into());
    }
    let t_text: String = common.resolver.require(args.t, "t")?;
    let t_grid = parse_list::<usize>(&t_text, "t")?;
    let samples = common.resolver.require(args.samples, "samples")?;
    let tolerance = common
        .resolver
        .get(args.tolerance, "tolerance")?
        .unwrap_or(0.03);
    let model = common.model.as_ref().expect("model required");

    let multi = common.gammas.len() > 1;
    let mut all_pass = true;
    for &gamma in &common.gammas {
        let config = GrowthConfig {
            gamma,
            t_grid: t_grid.clone(),
            samples_per_t: samples,
            seed: common.seed,
            cap: common.cap,
            limit: common.limit,
            surrogate_pi: common.surrogate_pi,
            tolerance,
        };
        let report = with_workers(common.workers, || growth_experiment(model, &config))??;
        let mut csv = Vec::new();
        write_growth_csv(&mut csv, &report).map_err(Error::Io)?;
        let out = gamma_out(common.out.as_deref(), gamma, multi)?;
        emit(out.as_deref(), &String::from_utf8(csv).expect("csv is utf-8"))?;
        eprintln!(
            "growth γ={gamma}: final-t mean rate {:.6} vs h(X|Z) {:.6} (tolerance {tolerance}), \
             {} samples excluded — {}",
            report.final_t_mean_rate,
            report.reference_rate,
            report.excluded,
            if report.pass { "pass" } else { "FAIL" }
        );
        all_pass &= report.pass;
    }
    Ok(if all_pass { 0 } else { EXIT_TOLERANCE })
}

fn run_entropy(args: EntropyArgs) -> Result<u8, CliError> {
    let common = resolve_common(args.common, true)?;
    let model = common.model.as_ref().expect("model required");
    let methods_text: String = common
        .resolver
        .get(args.method, "method")?
        .unwrap_or_else(|| "closed_form".into());
    let n = common
        .resolver
        .get(args.t.clone(), "t")?
        .map(|text: String| parse_list::<usize>(&text, "t"))
        .transpose()?
        .map(|values| match values.as_slice() {
            [n] => Ok(*n),
            _ => Err(UsageError("entropy takes a single --t".into())),
        })
        .transpose()?;
    let samples = common.resolver.get(args.samples, "samples")?;

    let mut estimates: Vec<EntropyEstimate> = Vec::new();
    for method in methods_text.split(',').map(str::trim) {
        let estimate = match method {
            "closed_form" => closed_form_rate(model)?,
            "exact_block" => {
                let n = n.ok_or_else(|| UsageError("exact_block needs --t <n>".into()))?;
                exact_block_conditional_entropy(model, n)?
            }
            "smb" => {
                let n = n.ok_or_else(|| UsageError("smb needs --t <n>".into()))?;
                let reps = samples
                    .ok_or_else(|| UsageError("smb needs --samples <replicates>".into()))?;
                smb_estimate(model, n, reps, common.seed, common.surrogate_pi)?
            }
            other => {
                return Err(UsageError(format!(
                    "unknown method '{other}' (expected closed_form, exact_block, or smb)"
                ))
                .into())
            }
        };
        estimates.push(estimate);
    }
    let mut csv = Vec::new();
    write_entropy_csv(&mut csv, &estimates).map_err(Error::Io)?;
    emit(common.out.as_deref(), &String::from_utf8(csv).expect("csv is utf-8"))?;
    Ok(0)
}

fn run_oracle(args: OracleArgs) -> Result<u8, CliError> {
    let common = resolve_common(args.common, false)?;
    let cases = common.resolver.get(args.cases, "cases")?.unwrap_or(200);
    let max_t = common
        .resolver
        .get(args.t.clone(), "t")?
        .map(|text: String| parse_list::<usize>(&text, "t"))
        .transpose()?
        .map(|values| match values.as_slice() {
            [t] => Ok(*t),
            _ => Err(UsageError("oracle-check takes a single --t".into())),
        })
        .transpose()?
        .unwrap_or(10);
    let config = OracleConfig {
        cases,
        seed: common.seed,
        max_t,
    };
    let report = oracle_check(&config)?;
    eprintln!(
        "oracle check: golden case plus {} fuzzed cases matched the exhaustive oracle",
        report.cases
    );
    Ok(0)
}
