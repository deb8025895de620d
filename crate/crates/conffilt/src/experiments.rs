//! Batch experiment drivers: empirical coverage, expected-size growth,
//! and the dual-route oracle check, plus the CSV writers the CLI uses.
//!
//! Determinism contract: every randomized quantity inside an experiment is
//! keyed by `derive_seed` from the experiment's base seed and the trial's
//! index, never by draw order. Trials run across a worker pool but results
//! are merged by index, so the report — including its CSV serialization —
//! is byte-identical for any worker count, and any single row can be
//! recomputed in isolation from the seed it carries.

use std::io::{self, Write};

use rayon::prelude::*;
use serde_json::json;

use crate::confset::{
    build_confidence_set, build_confidence_set_from_ranked, expected_log_size, posterior_factors,
    product_expected_log_size, randomized_membership,
};
use crate::entropy::{closed_form_rate, smb_estimate, EntropyEstimate};
use crate::error::{Error, Result};
use crate::inference::{brute_force_ranked, enumerate_descending};
use crate::models::{
    compile_trellis, sample_path, validate_model, ChannelFile, ErasureFile, ModelFile, ModelSpec,
    SignalFile,
};
use crate::rng::{derive_seed, rng_from_seed, uniform_f64};
use rand_chacha::ChaCha8Rng;

/// Two-sided 99% normal quantile used for the coverage experiment's
/// Wilson interval.
pub const WILSON_99_Z: f64 = 2.575_829_303_548_901;

/// Path length for the SMB reference rate in growth experiments whose
/// model has no closed-form h(X|Z).
const REFERENCE_SMB_N: usize = 5_000;
const REFERENCE_SMB_REPS: usize = 20;
/// Seed-stream index reserved for the reference-rate estimate.
const REFERENCE_STREAM: u64 = u64::MAX;

fn check_gamma(gamma: f64) -> Result<()> {
    if !gamma.is_finite() || gamma <= 0.0 || gamma >= 1.0 {
        return Err(Error::GammaOutOfRange(gamma));
    }
    Ok(())
}

/// Wilson score interval for `successes` out of `trials` at normal
/// quantile `z`.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    (center - half, center + half)
}

// ----------------------------------------------------------------------
// Coverage
// ----------------------------------------------------------------------

/// Configuration for [`coverage_experiment`].
#[derive(Debug, Clone)]
pub struct CoverageConfig {
    pub gamma: f64,
    /// Sequence length per trial.
    pub t: usize,
    /// Number of independent trials.
    pub trials: usize,
    pub seed: u64,
    /// Core-size cap per built set.
    pub cap: usize,
    /// Item limit for each trial's ranked enumeration.
    pub limit: usize,
    /// Surrogate erasure probability, required by `erasure_unknown`
    /// models for sampling only.
    pub surrogate_pi: Option<f64>,
}

/// One completed coverage trial.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRow {
    /// Trial index within the experiment (gaps mark cap-exceeded trials).
    pub trial: usize,
    /// Per-trial seed; reproduces the trial via [`run_coverage_trial`].
    pub seed: u64,
    pub covered: bool,
    pub core_size: usize,
    pub expected_size: f64,
}

/// Aggregate result of a coverage experiment.
#[derive(Debug, Clone)]
pub struct CoverageReport {
    pub gamma: f64,
    pub trials: usize,
    pub rows: Vec<CoverageRow>,
    /// Fraction of completed trials whose true signal was in the set.
    pub empirical_coverage: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    /// Trials aborted on the core cap (absent from `rows`).
    pub cap_exceeded: usize,
    /// True iff γ lies inside the 99% Wilson interval.
    pub pass: bool,
}

/// Run one coverage trial from its own seed.
///
/// The sampling stream and the membership draw use independently derived
/// child seeds, keeping the uniform draw independent of `(X, Z)`.
/// Returns `Ok(None)` when the confidence set's core exceeded the cap.
pub fn run_coverage_trial(
    model: &ModelSpec,
    config: &CoverageConfig,
    trial_seed: u64,
) -> Result<Option<(bool, usize, f64)>> {
    let sample_seed = derive_seed(trial_seed, 0);
    let membership_seed = derive_seed(trial_seed, 1);
    let (x, z) = sample_path(model, config.t, sample_seed, config.surrogate_pi)?;
    let trellis = compile_trellis(model, &z);
    let mut stream = enumerate_descending(&trellis, config.limit)?;
    let set = match build_confidence_set(&mut stream, config.gamma, config.cap) {
        Ok(set) => set,
        Err(Error::CapExceeded { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let u = uniform_f64(&mut rng_from_seed(membership_seed));
    let covered = randomized_membership(&set, &x, u)?;
    Ok(Some((covered, set.core().len(), set.expected_size())))
}

/// Sample `(x, z)` pairs, build the confidence set for each `z`, and test
/// whether the true `x` was covered, across `trials` independent trials.
///
/// Fails with [`Error::CapExceededRate`] when at least 1% of trials
/// exceed the core cap; individual capped trials below that threshold are
/// dropped from the rows and counted in the report.
pub fn coverage_experiment(model: &ModelSpec, config: &CoverageConfig) -> Result<CoverageReport> {
    check_gamma(config.gamma)?;
    if config.trials == 0 {
        return Err(Error::NoTrials(0));
    }
    if config.t == 0 {
        return Err(Error::EmptySequence);
    }

    let outcomes: Vec<Result<Option<(bool, usize, f64)>>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| run_coverage_trial(model, config, derive_seed(config.seed, trial as u64)))
        .collect();

    let mut rows = Vec::with_capacity(config.trials);
    let mut cap_exceeded = 0usize;
    for (trial, outcome) in outcomes.into_iter().enumerate() {
        match outcome? {
            None => cap_exceeded += 1,
            Some((covered, core_size, expected_size)) => rows.push(CoverageRow {
                trial,
                seed: derive_seed(config.seed, trial as u64),
                covered,
                core_size,
                expected_size,
            }),
        }
    }
    if cap_exceeded * 100 >= config.trials {
        return Err(Error::CapExceededRate {
            exceeded: cap_exceeded,
            trials: config.trials,
        });
    }

    let successes = rows.iter().filter(|r| r.covered).count();
    let completed = rows.len();
    let empirical_coverage = successes as f64 / completed as f64;
    let (wilson_low, wilson_high) = wilson_interval(successes, completed, WILSON_99_Z);
    Ok(CoverageReport {
        gamma: config.gamma,
        trials: config.trials,
        rows,
        empirical_coverage,
        wilson_low,
        wilson_high,
        cap_exceeded,
        pass: wilson_low <= config.gamma && config.gamma <= wilson_high,
    })
}

// ----------------------------------------------------------------------
// Growth
// ----------------------------------------------------------------------

/// Configuration for [`growth_experiment`].
#[derive(Debug, Clone)]
pub struct GrowthConfig {
    pub gamma: f64,
    /// Strictly increasing grid of sequence lengths.
    pub t_grid: Vec<usize>,
    pub samples_per_t: usize,
    pub seed: u64,
    pub cap: usize,
    pub limit: usize,
    pub surrogate_pi: Option<f64>,
    /// Pass tolerance on |final-t mean rate − reference rate|.
    pub tolerance: f64,
}

/// One growth observation: the exact expected set size for one sampled z.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthRow {
    pub t: usize,
    pub sample: usize,
    /// `log₂ E|Ψ|`; NaN marks a sample whose set exceeded the cap.
    pub log2_expected_size: f64,
    /// `log₂ E|Ψ| / t`.
    pub rate: f64,
}

/// Aggregate result of a growth experiment.
#[derive(Debug, Clone)]
pub struct GrowthReport {
    pub gamma: f64,
    pub rows: Vec<GrowthRow>,
    /// h(X|Z) reference: closed form when available, otherwise an SMB
    /// estimate with seeds derived from the experiment seed.
    pub reference_rate: f64,
    /// Mean rate over completed samples at the largest t.
    pub final_t_mean_rate: f64,
    /// Samples excluded for exceeding the cap (NaN rows).
    pub excluded: usize,
    pub tolerance: f64,
    /// True iff |final_t_mean_rate − reference_rate| ≤ tolerance.
    pub pass: bool,
}

/// Expected set size (log₂) for one sampled observation, or `None` when a
/// cap/guard was exceeded.
fn growth_sample(
    model: &ModelSpec,
    config: &GrowthConfig,
    t: usize,
    sample_seed: u64,
) -> Result<Option<f64>> {
    let (_, z) = sample_path(model, t, sample_seed, config.surrogate_pi)?;
    // Factorized posteriors admit an exact class-based expected size with
    // no enumeration; other models pay for the stream.
    let attempt = match posterior_factors(model, &z)? {
        Some(factors) => product_expected_log_size(&factors, config.gamma),
        None => {
            let trellis = compile_trellis(model, &z);
            enumerate_descending(&trellis, config.limit).and_then(|mut stream| {
                build_confidence_set(&mut stream, config.gamma, config.cap)
                    .map(|set| expected_log_size(&set))
            })
        }
    };
    match attempt {
        Ok(v) => Ok(Some(v)),
        Err(e) if e.is_cap() => Ok(None),
        Err(e) => Err(e),
    }
}

/// For each t in the grid, sample observations and record the exact
/// expected confidence-set size; compare the final-t mean rate against
/// the h(X|Z) reference.
pub fn growth_experiment(model: &ModelSpec, config: &GrowthConfig) -> Result<GrowthReport> {
    check_gamma(config.gamma)?;
    if config.samples_per_t == 0 {
        return Err(Error::NoTrials(0));
    }
    if config.t_grid.is_empty() || config.t_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::BadTGrid);
    }

    let reference_rate = match closed_form_rate(model) {
        Ok(est) => est.value,
        Err(Error::NoClosedForm(_)) => {
            smb_estimate(
                model,
                REFERENCE_SMB_N,
                REFERENCE_SMB_REPS,
                derive_seed(config.seed, REFERENCE_STREAM),
                config.surrogate_pi,
            )?
            .value
        }
        Err(e) => return Err(e),
    };

    let tasks: Vec<(usize, usize)> = config
        .t_grid
        .iter()
        .flat_map(|&t| (0..config.samples_per_t).map(move |s| (t, s)))
        .collect();
    let outcomes: Vec<Result<Option<f64>>> = tasks
        .par_iter()
        .map(|&(t, sample)| {
            let sample_seed = derive_seed(derive_seed(config.seed, t as u64), sample as u64);
            growth_sample(model, config, t, sample_seed)
        })
        .collect();

    let mut rows = Vec::with_capacity(tasks.len());
    let mut excluded = 0usize;
    for (&(t, sample), outcome) in tasks.iter().zip(outcomes) {
        let log2_expected_size = match outcome? {
            Some(v) => v,
            None => {
                excluded += 1;
                f64::NAN
            }
        };
        rows.push(GrowthRow {
            t,
            sample,
            log2_expected_size,
            rate: log2_expected_size / t as f64,
        });
    }

    let final_t = *config.t_grid.last().expect("grid non-empty");
    let final_rates: Vec<f64> = rows
        .iter()
        .filter(|r| r.t == final_t && r.rate.is_finite())
        .map(|r| r.rate)
        .collect();
    let final_t_mean_rate = final_rates.iter().sum::<f64>() / final_rates.len() as f64;
    Ok(GrowthReport {
        gamma: config.gamma,
        rows,
        reference_rate,
        final_t_mean_rate,
        excluded,
        tolerance: config.tolerance,
        pass: (final_t_mean_rate - reference_rate).abs() <= config.tolerance,
    })
}

// ----------------------------------------------------------------------
// Oracle check
// ----------------------------------------------------------------------

/// Configuration for [`oracle_check`].
#[derive(Debug, Clone)]
pub struct OracleConfig {
    /// Number of fuzzed cases (the golden case runs additionally).
    pub cases: usize,
    pub seed: u64,
    /// Upper bound on sequence length (further limited per alphabet size
    /// to keep the exhaustive oracle cheap).
    pub max_t: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            cases: 200,
            seed: 0,
            max_t: 10,
        }
    }
}

/// Summary of a completed oracle check.
#[derive(Debug, Clone)]
pub struct OracleReport {
    /// Fuzzed cases executed (excluding the golden case).
    pub cases: usize,
}

/// Probability vector with entries bounded away from zero, summing to 1.
fn random_distribution(rng: &mut ChaCha8Rng, k: usize, min_mass: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| min_mass + uniform_f64(rng)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Draw a random valid model over a 2–4 symbol alphabet, cycling across
/// signal kinds and all three channel kinds.
pub fn random_model_file(rng: &mut ChaCha8Rng) -> ModelFile {
    let glyphs = ["0", "1", "2", "3"];
    let a = 2 + (uniform_f64(rng) * 3.0) as usize; // 2..=4
    let alphabet: Vec<String> = glyphs[..a].iter().map(|g| g.to_string()).collect();

    let signal = if uniform_f64(rng) < 0.5 {
        SignalFile::Iid {
            marginal: random_distribution(rng, a, 0.05),
        }
    } else {
        SignalFile::Markov {
            transition: (0..a).map(|_| random_distribution(rng, a, 0.05)).collect(),
            initial: None,
        }
    };

    let channel = match (uniform_f64(rng) * 4.0) as usize {
        0 => ChannelFile::Dmc {
            matrix: (0..a).map(|_| random_distribution(rng, a, 0.05)).collect(),
            output_alphabet: None,
        },
        1 => ChannelFile::ErasureKnown {
            erasure: ErasureFile::Iid {
                pi: 0.1 + 0.8 * uniform_f64(rng),
            },
            erasure_glyph: None,
        },
        2 => ChannelFile::ErasureKnown {
            erasure: ErasureFile::Markov {
                transition: (0..2).map(|_| random_distribution(rng, 2, 0.1)).collect(),
            },
            erasure_glyph: None,
        },
        _ => ChannelFile::ErasureUnknown {
            erasure_glyph: None,
        },
    };

    ModelFile {
        alphabet,
        signal,
        channel,
    }
}

/// Longest t whose exhaustive enumeration stays cheap (≤ 2¹⁴ sequences).
fn fuzz_max_t(alphabet_size: usize, cap: usize) -> usize {
    let budget = (14.0 / (alphabet_size as f64).log2()).floor() as usize;
    budget.min(cap).max(1)
}

fn oracle_failure(
    case: usize,
    case_seed: u64,
    file: &ModelFile,
    z_text: &str,
    gamma: f64,
    detail: String,
) -> Error {
    let dump = json!({
        "case": case,
        "seed": case_seed,
        "model": file,
        "z": z_text,
        "gamma": gamma,
        "detail": detail,
    });
    Error::OracleMismatch(
        serde_json::to_string_pretty(&dump).unwrap_or(detail),
    )
}

/// Cross-validate the lazy enumeration and set construction against the
/// exhaustive oracle on randomized small models.
///
/// Per case: rank-by-rank equality of `enumerate_descending` vs
/// `brute_force_ranked` (posteriors within 1e-9), equality of the
/// confidence sets built through both routes, the greedy-minimality
/// invariant, and — for erasure channels — invariance of the ranked list
/// under substituting a known erasure law. The golden worked example runs
/// first, verbatim.
pub fn oracle_check(config: &OracleConfig) -> Result<OracleReport> {
    golden_case()?;
    for case in 0..config.cases {
        let case_seed = derive_seed(config.seed, case as u64);
        run_oracle_case(case, case_seed, config.max_t)?;
    }
    Ok(OracleReport {
        cases: config.cases,
    })
}

/// The worked example: i.i.d. (0.9, 0.1) signal, unknown-statistics
/// erasure, z = `0*1*`, γ = 0.99 → exactly {0010, 0011, 0110}.
fn golden_case() -> Result<()> {
    let file: ModelFile = serde_json::from_str(
        r#"{
            "alphabet": ["0", "1"],
            "signal": { "kind": "iid", "marginal": [0.9, 0.1] },
            "channel": { "kind": "erasure_unknown" }
        }"#,
    )?;
    let model = validate_model(file.clone())?;
    let z = model.output_alphabet().parse_sequence("0*1*")?;
    let trellis = compile_trellis(&model, &z);
    let mut stream = enumerate_descending(&trellis, 1 << 10)?;
    let set = build_confidence_set(&mut stream, 0.99, 1 << 10)?;
    let want: Vec<Vec<u8>> = vec![vec![0, 0, 1, 0], vec![0, 0, 1, 1], vec![0, 1, 1, 0]];
    let got: Vec<Vec<u8>> = set.core().iter().map(|(s, _)| s.clone()).collect();
    if got != want || set.boundary().is_some() || set.expected_size() != 3.0 {
        return Err(oracle_failure(
            usize::MAX,
            0,
            &file,
            "0*1*",
            0.99,
            format!("golden case mismatch: got core {got:?}"),
        ));
    }
    Ok(())
}

fn run_oracle_case(case: usize, case_seed: u64, max_t: usize) -> Result<()> {
    let mut rng = rng_from_seed(case_seed);
    let file = random_model_file(&mut rng);
    let model = validate_model(file.clone())?;
    let t_cap = fuzz_max_t(model.input_alphabet().len(), max_t);
    let t = 1 + (uniform_f64(&mut rng) * t_cap as f64) as usize;
    let gamma = 0.05 + 0.94 * uniform_f64(&mut rng);
    let surrogate = model.needs_surrogate().then_some(0.5);
    let (_, z) = sample_path(&model, t, derive_seed(case_seed, 1), surrogate)?;
    let z_text = model.output_alphabet().format_sequence(&z);
    let fail = |detail: String| oracle_failure(case, case_seed, &file, &z_text, gamma, detail);

    let trellis = compile_trellis(&model, &z);
    let oracle_items = brute_force_ranked(&trellis)?;
    let mut stream = enumerate_descending(&trellis, oracle_items.len() + 1)?;
    let mut streamed = Vec::with_capacity(oracle_items.len());
    while let Some(item) = stream.next_item()? {
        streamed.push(item);
    }
    if streamed.len() != oracle_items.len() {
        return Err(fail(format!(
            "stream emitted {} items, oracle has {}",
            streamed.len(),
            oracle_items.len()
        )));
    }
    for (rank, (a, b)) in streamed.iter().zip(&oracle_items).enumerate() {
        if a.sequence != b.sequence {
            return Err(fail(format!(
                "rank {rank}: stream {:?} vs oracle {:?}",
                a.sequence, b.sequence
            )));
        }
        if (a.posterior - b.posterior).abs() > 1e-9 {
            return Err(fail(format!(
                "rank {rank}: posterior {} vs {}",
                a.posterior, b.posterior
            )));
        }
    }

    let via_stream = {
        let mut stream = enumerate_descending(&trellis, oracle_items.len() + 1)?;
        build_confidence_set(&mut stream, gamma, 1 << 20)?
    };
    let via_oracle = build_confidence_set_from_ranked(&oracle_items, gamma, 1 << 20)?;
    if via_stream.core().len() != via_oracle.core().len() {
        return Err(fail(format!(
            "core sizes differ: {} vs {}",
            via_stream.core().len(),
            via_oracle.core().len()
        )));
    }
    if (via_stream.expected_size() - via_oracle.expected_size()).abs() > 1e-9 {
        return Err(fail(format!(
            "expected sizes differ: {} vs {}",
            via_stream.expected_size(),
            via_oracle.expected_size()
        )));
    }
    if let (Some(a), Some(b)) = (via_stream.boundary(), via_oracle.boundary()) {
        if a.sequence() != b.sequence() {
            return Err(fail("boundary sequences differ".to_string()));
        }
    }

    // Greedy minimality: with a boundary present, the core alone must not
    // reach γ.
    if via_stream.boundary().is_some() && via_stream.core_mass() >= gamma {
        return Err(fail(format!(
            "core mass {} already reaches gamma {gamma} despite a boundary",
            via_stream.core_mass()
        )));
    }

    // Erasure-law invariance: the ranked list may not depend on the
    // erasure process.
    if model.erasure_index().is_some() {
        let known_file = ModelFile {
            alphabet: file.alphabet.clone(),
            signal: file.signal.clone(),
            channel: ChannelFile::ErasureKnown {
                erasure: ErasureFile::Iid { pi: 0.5 },
                erasure_glyph: None,
            },
        };
        let known = validate_model(known_file)?;
        let known_trellis = compile_trellis(&known, &z);
        let mut known_stream = enumerate_descending(&known_trellis, oracle_items.len() + 1)?;
        for (rank, item) in streamed.iter().enumerate() {
            let Some(other) = known_stream.next_item()? else {
                return Err(fail(format!(
                    "known-erasure stream ended early at rank {rank}"
                )));
            };
            if other.sequence != item.sequence
                || (other.posterior - item.posterior).abs() > 1e-12
            {
                return Err(fail(format!(
                    "erasure-law invariance broken at rank {rank}"
                )));
            }
        }
    }
    Ok(())
}

// ----------------------------------------------------------------------
// CSV writers
// ----------------------------------------------------------------------

/// `trial,seed,covered,core_size,expected_size` with one header line.
pub fn write_coverage_csv<W: Write>(w: &mut W, report: &CoverageReport) -> io::Result<()> {
    writeln!(w, "trial,seed,covered,core_size,expected_size")?;
    for row in &report.rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            row.trial, row.seed, row.covered as u8, row.core_size, row.expected_size
        )?;
    }
    Ok(())
}

/// `t,sample,log2_expected_size,rate` with one header line; cap-excluded
/// samples carry NaN.
pub fn write_growth_csv<W: Write>(w: &mut W, report: &GrowthReport) -> io::Result<()> {
    writeln!(w, "t,sample,log2_expected_size,rate")?;
    for row in &report.rows {
        writeln!(
            w,
            "{},{},{},{}",
            row.t, row.sample, row.log2_expected_size, row.rate
        )?;
    }
    Ok(())
}

/// `method,n,reps,value,std_error` with one header line; inapplicable
/// fields are left empty.
pub fn write_entropy_csv<W: Write>(w: &mut W, estimates: &[EntropyEstimate]) -> io::Result<()> {
    writeln!(w, "method,n,reps,value,std_error")?;
    for est in estimates {
        let n = est.block_length.map_or(String::new(), |v| v.to_string());
        let reps = est.replicates.map_or(String::new(), |v| v.to_string());
        let se = est.std_error.map_or(String::new(), |v| v.to_string());
        writeln!(w, "{},{},{},{},{}", est.method.name(), n, reps, est.value, se)?;
    }
    Ok(())
}
