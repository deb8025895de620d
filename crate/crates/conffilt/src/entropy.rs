//! The conditional entropy rate h(X|Z): the exponent at which confidence
//! sets grow. Three routes with increasing generality and decreasing
//! precision:
//!
//! * [`closed_form_rate`] — exact standard identities, available for
//!   i.i.d. signals with a dmc or i.i.d.-erasure channel;
//! * [`exact_block_conditional_entropy`] — exhaustive evaluation of
//!   `H(X_{1..n}|Z_{1..n})/n` for any model with a known channel law,
//!   guarded to small blocks;
//! * [`smb_estimate`] — Monte-Carlo along sampled paths. Per replicate the
//!   joint term `−(1/n)·log₂ weight(x, z)` and the marginal term
//!   `−(1/n)·forward_log_marginal(z)` are differenced, leaving
//!   `−(1/n)·log₂ P(x|z)`, which concentrates at h(X|Z) by the
//!   Shannon–McMillan–Breiman theorem. Differencing per replicate (rather
//!   than pairing a closed-form joint rate with an estimated marginal
//!   rate) makes the noiseless-channel case cancel identically on every
//!   replicate and keeps the estimator defined for `erasure_unknown`
//!   models, whose weights are unnormalized but whose conditional
//!   probabilities are exact.

use crate::error::{Error, Result};
use crate::inference::{advance_odometer, forward_log_marginal};
use crate::models::{
    compile_trellis, joint_log_prob, sample_path, ChannelModel, ErasureProcess, ModelSpec,
    SignalModel,
};
use crate::numeric::{KahanSum, RunningMoments};
use crate::rng::derive_seed;

/// How an [`EntropyEstimate`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntropyMethod {
    ClosedForm,
    ExactBlock,
    Smb,
}

impl EntropyMethod {
    /// Stable identifier used in CSV output.
    pub fn name(self) -> &'static str {
        match self {
            EntropyMethod::ClosedForm => "closed_form",
            EntropyMethod::ExactBlock => "exact_block",
            EntropyMethod::Smb => "smb",
        }
    }
}

/// A conditional entropy rate in bits per symbol, tagged with the method
/// that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyEstimate {
    pub method: EntropyMethod,
    /// h(X|Z) in bits/symbol (exact or estimated).
    pub value: f64,
    /// Block/path length `n`, for the methods that have one.
    pub block_length: Option<usize>,
    /// Monte-Carlo replicates, for [`EntropyMethod::Smb`].
    pub replicates: Option<usize>,
    /// Standard error across replicates (sample sd / √reps); `None` for
    /// exact methods and single-replicate runs.
    pub std_error: Option<f64>,
}

/// Shannon entropy of a probability vector in bits, with `0·log 0 = 0`.
pub fn entropy_of_distribution(p: &[f64]) -> f64 {
    let mut h = 0.0;
    for &v in p {
        if v > 0.0 {
            h -= v * v.log2();
        }
    }
    h
}

/// Guard for [`exact_block_conditional_entropy`]: at most 2²⁴ `(x, z)`
/// pairs may be enumerated.
pub const EXACT_BLOCK_GUARD: u128 = 1 << 24;

/// Exact h(X|Z) for the closed-form model class: i.i.d. signal with a dmc
/// (`H(X₁) + H(Z₁|X₁) − H(Z₁)`) or with i.i.d. erasure (`π·H(X₁)`).
///
/// Every other model — Markov signal, Markov erasure, or unknown erasure
/// statistics — is outside the class; callers fall back to
/// [`exact_block_conditional_entropy`] or [`smb_estimate`].
pub fn closed_form_rate(model: &ModelSpec) -> Result<EntropyEstimate> {
    let SignalModel::Iid { marginal } = model.signal() else {
        return Err(Error::NoClosedForm(
            "signal is Markov; only i.i.d. signals are in the closed-form class".to_string(),
        ));
    };
    let value = match model.channel() {
        ChannelModel::Dmc { matrix } => {
            let h_x = entropy_of_distribution(marginal);
            let h_z_given_x: f64 = marginal
                .iter()
                .zip(matrix)
                .map(|(&p, row)| p * entropy_of_distribution(row))
                .sum();
            let n_out = model.output_alphabet().len();
            let mut z_marginal = vec![0.0f64; n_out];
            for (x, &p) in marginal.iter().enumerate() {
                for (z, q) in z_marginal.iter_mut().enumerate() {
                    *q += p * matrix[x][z];
                }
            }
            let h_z = entropy_of_distribution(&z_marginal);
            h_x + h_z_given_x - h_z
        }
        ChannelModel::ErasureKnown {
            process: ErasureProcess::Iid { pi },
        } => pi * entropy_of_distribution(marginal),
        ChannelModel::ErasureKnown {
            process: ErasureProcess::Markov { .. },
        } => {
            return Err(Error::NoClosedForm(
                "Markov-modulated erasure is outside the closed-form class".to_string(),
            ))
        }
        ChannelModel::ErasureUnknown => {
            return Err(Error::NoClosedForm(
                "erasure statistics unknown; h(X|Z) has no value without them".to_string(),
            ))
        }
    };
    Ok(EntropyEstimate {
        method: EntropyMethod::ClosedForm,
        value,
        block_length: None,
        replicates: None,
        std_error: None,
    })
}

/// Exhaustive `H(X_{1..n}|Z_{1..n}) / n`:
/// `(1/n) Σ_z P(z) Σ_x P(x|z) log₂(1/P(x|z))`.
///
/// Requires a known channel law (dmc or erasure_known) and
/// `|𝐗|^n · |𝐙|^n ≤ 2²⁴`.
pub fn exact_block_conditional_entropy(model: &ModelSpec, n: usize) -> Result<EntropyEstimate> {
    if n == 0 {
        return Err(Error::EmptySequence);
    }
    if matches!(model.channel(), ChannelModel::ErasureUnknown) {
        return Err(Error::ChannelLawUnknown(
            "block entropy is undefined without the erasure process law".to_string(),
        ));
    }
    let s = model.input_alphabet().len() as u128;
    let o = model.output_alphabet().len() as u128;
    let mut pairs: u128 = 1;
    for _ in 0..n {
        pairs = pairs.saturating_mul(s).saturating_mul(o);
        if pairs > EXACT_BLOCK_GUARD {
            return Err(Error::BlockTooLarge {
                n,
                pairs: (s as f64 * o as f64).powi(n as i32),
            });
        }
    }

    let n_states = model.input_alphabet().len();
    let n_out = model.output_alphabet().len();
    let mut total = KahanSum::new();
    let mut z = vec![0u8; n];
    loop {
        let trellis = compile_trellis(model, &z);
        let log2_pz = forward_log_marginal(&trellis);
        if log2_pz > f64::NEG_INFINITY {
            let mut x = vec![0u8; n];
            loop {
                let log2_joint = joint_log_prob(&trellis, &x)?;
                if log2_joint > f64::NEG_INFINITY {
                    // P(x,z)·log₂(P(z)/P(x,z))
                    total.add(log2_joint.exp2() * (log2_pz - log2_joint));
                }
                if !advance_odometer(&mut x, n_states) {
                    break;
                }
            }
        }
        if !advance_odometer(&mut z, n_out) {
            break;
        }
    }
    Ok(EntropyEstimate {
        method: EntropyMethod::ExactBlock,
        value: total.value() / n as f64,
        block_length: Some(n),
        replicates: None,
        std_error: None,
    })
}

/// Monte-Carlo h(X|Z) along sampled paths (Shannon–McMillan–Breiman).
///
/// Draws `reps` independent paths of length `n` with per-replicate seeds
/// derived from `seed`, evaluates `−(1/n)·log₂ P(x|z)` on each, and
/// reports the mean and standard error. `erasure_unknown` models need a
/// `surrogate_pi` for sampling; the evaluated conditional probabilities
/// themselves are independent of it.
pub fn smb_estimate(
    model: &ModelSpec,
    n: usize,
    reps: usize,
    seed: u64,
    surrogate_pi: Option<f64>,
) -> Result<EntropyEstimate> {
    if reps == 0 {
        return Err(Error::NoReplicates(reps));
    }
    if n == 0 {
        return Err(Error::EmptySequence);
    }
    let mut moments = RunningMoments::new();
    for rep in 0..reps {
        let rep_seed = derive_seed(seed, rep as u64);
        let (x, z) = sample_path(model, n, rep_seed, surrogate_pi)?;
        let trellis = compile_trellis(model, &z);
        let log2_joint = joint_log_prob(&trellis, &x)?;
        let log2_marginal = forward_log_marginal(&trellis);
        // Sampled pairs always have positive probability, so both terms
        // are finite; their difference is log₂ P(x|z).
        moments.push(-(log2_joint - log2_marginal) / n as f64);
    }
    Ok(EntropyEstimate {
        method: EntropyMethod::Smb,
        value: moments.mean(),
        block_length: Some(n),
        replicates: Some(reps),
        std_error: moments.std_error(),
    })
}
