//! Probability models for the signal/observation pair and their compiled
//! trellis form.
//!
//! A [`ModelSpec`] fixes the joint law of a clean signal `X_{1..t}` over a
//! finite alphabet and its observation `Z_{1..t}` through one of three
//! channel kinds:
//!
//! * `dmc` — a discrete memoryless channel given by a row-stochastic
//!   matrix `W(z|x)`;
//! * `erasure_known` — symbols are replaced by an erasure glyph according
//!   to an i.i.d. or two-state Markov erasure process with known law;
//! * `erasure_unknown` — same erasure mechanics, but no probabilities are
//!   specified. Weights use the convention that an erased position
//!   contributes a factor of 1 and an observed position an indicator, so
//!   path weights are an *unnormalized* joint measure. Conditional
//!   probabilities `P(x|z)` are nevertheless well defined because the
//!   erasure pattern is a deterministic function of `z`, so the missing
//!   constants cancel in the normalization.
//!
//! [`compile_trellis`] turns a model plus a concrete observation into a
//! position-by-state trellis of per-step log₂ weights; everything
//! downstream (marginals, ranked enumeration, confidence sets) consumes
//! only the trellis. `f64::NEG_INFINITY` encodes a forbidden transition.
//!
//! Sequences are vectors of `u8` symbol indices into an [`Alphabet`];
//! lexicographic order of sequences means index order, which coincides
//! with the declared glyph order.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, sample_categorical, uniform_f64};

/// Default glyph used for erased symbols when the model file does not
/// designate one.
pub const DEFAULT_ERASURE_GLYPH: &str = "*";

/// Tolerance for "rows sum to one" checks.
const STOCHASTIC_TOL: f64 = 1e-12;

/// Tolerance for "declared initial equals stationary" checks.
const STATIONARY_TOL: f64 = 1e-9;

// ----------------------------------------------------------------------
// Alphabet
// ----------------------------------------------------------------------

/// An ordered set of distinct glyphs. Symbol indices (`u8`) refer to
/// positions in this ordering, and all sequence comparisons use index
/// order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<String>,
    /// True when every glyph is a single `char`; such alphabets read and
    /// write sequences as plain glyph strings, otherwise sequences are
    /// comma-separated.
    single_char: bool,
}

impl Alphabet {
    pub fn new(symbols: Vec<String>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::EmptyAlphabet);
        }
        if symbols.len() > 256 {
            return Err(Error::AlphabetTooLarge(symbols.len()));
        }
        let mut seen = HashSet::new();
        for glyph in &symbols {
            if glyph.is_empty() || glyph.contains(',') || glyph.chars().any(char::is_whitespace) {
                return Err(Error::BadGlyph(glyph.clone()));
            }
            if !seen.insert(glyph.clone()) {
                return Err(Error::DuplicateGlyph(glyph.clone()));
            }
        }
        let single_char = symbols.iter().all(|g| g.chars().count() == 1);
        Ok(Self {
            symbols,
            single_char,
        })
    }

    /// Alphabet obtained by appending an erasure glyph, used as the output
    /// alphabet of erasure channels.
    pub fn with_erasure_glyph(&self, glyph: &str) -> Result<Self> {
        if self.index_of(glyph).is_some() {
            return Err(Error::ErasureGlyphCollision(glyph.to_string()));
        }
        let mut symbols = self.symbols.clone();
        symbols.push(glyph.to_string());
        Self::new(symbols)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn symbol(&self, index: u8) -> &str {
        &self.symbols[index as usize]
    }

    pub fn index_of(&self, glyph: &str) -> Option<u8> {
        self.symbols
            .iter()
            .position(|g| g == glyph)
            .map(|i| i as u8)
    }

    /// Parse a sequence string into symbol indices.
    ///
    /// Single-character alphabets use concatenated glyphs (`"0*1*"`);
    /// otherwise glyphs are comma-separated (`"lo,hi,lo"`).
    pub fn parse_sequence(&self, text: &str) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        if self.single_char {
            for (position, ch) in text.chars().enumerate() {
                let glyph = ch.to_string();
                match self.index_of(&glyph) {
                    Some(i) => out.push(i),
                    None => return Err(Error::UnknownGlyph { glyph, position }),
                }
            }
        } else {
            for (position, glyph) in text.split(',').enumerate() {
                match self.index_of(glyph) {
                    Some(i) => out.push(i),
                    None => {
                        return Err(Error::UnknownGlyph {
                            glyph: glyph.to_string(),
                            position,
                        })
                    }
                }
            }
        }
        if out.is_empty() {
            return Err(Error::EmptySequence);
        }
        Ok(out)
    }

    /// Format symbol indices back into the textual form accepted by
    /// [`Alphabet::parse_sequence`].
    pub fn format_sequence(&self, seq: &[u8]) -> String {
        let mut out = String::new();
        for (i, &s) in seq.iter().enumerate() {
            if i > 0 && !self.single_char {
                out.push(',');
            }
            let _ = write!(out, "{}", self.symbol(s));
        }
        out
    }
}

// ----------------------------------------------------------------------
// Signal and channel models
// ----------------------------------------------------------------------

/// Law of the clean signal process.
#[derive(Debug, Clone, PartialEq)]
pub enum SignalModel {
    /// Independent, identically distributed symbols.
    Iid { marginal: Vec<f64> },
    /// Stationary first-order Markov chain; `initial` always equals the
    /// stationary distribution of `transition` (validated or computed).
    Markov {
        transition: Vec<Vec<f64>>,
        initial: Vec<f64>,
    },
}

impl SignalModel {
    /// Marginal law of a single symbol under stationarity.
    pub fn stationary_marginal(&self) -> &[f64] {
        match self {
            SignalModel::Iid { marginal } => marginal,
            SignalModel::Markov { initial, .. } => initial,
        }
    }
}

/// Erasure process driving an erasure channel with known law.
#[derive(Debug, Clone, PartialEq)]
pub enum ErasureProcess {
    /// Each position erased independently with probability `pi`.
    Iid { pi: f64 },
    /// Two-state Markov chain over {transmit, erase}; row/column order is
    /// `[transmit, erase]`, and `initial` is its stationary distribution.
    Markov {
        transition: Vec<Vec<f64>>,
        initial: Vec<f64>,
    },
}

/// Law of the observation given the signal.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelModel {
    /// Discrete memoryless channel: `matrix[x][z] = W(z|x)`.
    Dmc { matrix: Vec<Vec<f64>> },
    /// Erasure channel with a known erasure process.
    ErasureKnown { process: ErasureProcess },
    /// Erasure channel with unspecified statistics; see the module docs
    /// for the weight convention.
    ErasureUnknown,
}

/// A fully validated model: signal law, channel law, and both alphabets.
///
/// Construct through [`validate_model`] (or the `from_json`/`from_path`
/// helpers); a value of this type always satisfies the structural
/// invariants, so downstream code never re-validates.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub(crate) signal: SignalModel,
    pub(crate) channel: ChannelModel,
    pub(crate) input_alphabet: Alphabet,
    pub(crate) output_alphabet: Alphabet,
    /// Index of the erasure glyph in the output alphabet, for erasure
    /// channels; `None` for dmc.
    pub(crate) erasure_index: Option<u8>,
}

impl ModelSpec {
    pub fn signal(&self) -> &SignalModel {
        &self.signal
    }

    pub fn channel(&self) -> &ChannelModel {
        &self.channel
    }

    pub fn input_alphabet(&self) -> &Alphabet {
        &self.input_alphabet
    }

    pub fn output_alphabet(&self) -> &Alphabet {
        &self.output_alphabet
    }

    pub fn erasure_index(&self) -> Option<u8> {
        self.erasure_index
    }

    /// True when the channel carries no sampling law of its own.
    pub fn needs_surrogate(&self) -> bool {
        matches!(self.channel, ChannelModel::ErasureUnknown)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        validate_model(file)
    }

    pub fn from_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}

// ----------------------------------------------------------------------
// Model files (serde surface)
// ----------------------------------------------------------------------

/// On-disk JSON form of a model, prior to validation.
///
/// ```json
/// {
///   "alphabet": ["0", "1"],
///   "signal":   { "kind": "iid", "marginal": [0.9, 0.1] },
///   "channel":  { "kind": "erasure_known",
///                 "erasure": { "kind": "iid", "pi": 0.3 } }
/// }
/// ```
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub alphabet: Vec<String>,
    pub signal: SignalFile,
    pub channel: ChannelFile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalFile {
    Iid {
        marginal: Vec<f64>,
    },
    Markov {
        transition: Vec<Vec<f64>>,
        /// Optional; when present it must equal the stationary
        /// distribution of `transition` within 1e-9, when absent the
        /// stationary distribution is computed and used.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        initial: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelFile {
    Dmc {
        matrix: Vec<Vec<f64>>,
        /// Output alphabet for channels whose output glyphs differ from
        /// the input alphabet; defaults to the input alphabet.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        output_alphabet: Option<Vec<String>>,
    },
    ErasureKnown {
        erasure: ErasureFile,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        erasure_glyph: Option<String>,
    },
    ErasureUnknown {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        erasure_glyph: Option<String>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErasureFile {
    Iid { pi: f64 },
    Markov { transition: Vec<Vec<f64>> },
}

// ----------------------------------------------------------------------
// Validation
// ----------------------------------------------------------------------

fn check_distribution(what: &str, p: &[f64], expected_len: usize) -> Result<()> {
    if p.len() != expected_len {
        return Err(Error::DimensionMismatch {
            what: "probability vector",
            expected: expected_len,
            found: p.len(),
        });
    }
    let mut sum = 0.0;
    for &v in p {
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(Error::ProbabilityOutOfRange {
                what: what.to_string(),
                value: v,
            });
        }
        sum += v;
    }
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::NotStochastic {
            what: what.to_string(),
            sum,
        });
    }
    Ok(())
}

fn check_stochastic_matrix(what: &str, m: &[Vec<f64>], rows: usize, cols: usize) -> Result<()> {
    if m.len() != rows {
        return Err(Error::DimensionMismatch {
            what: "matrix rows",
            expected: rows,
            found: m.len(),
        });
    }
    for (i, row) in m.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::DimensionMismatch {
                what: "matrix columns",
                expected: cols,
                found: row.len(),
            });
        }
        check_distribution(&format!("{what}, row {i}"), row, cols)?;
    }
    Ok(())
}

/// Strongly connected components of the support graph of `m`, in some
/// order, as lists of state indices.
fn strongly_connected_components(m: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let n = m.len();
    let edge = |u: usize, v: usize| m[u][v] > 0.0;

    // Kosaraju with explicit stacks: first pass computes finish order on
    // the forward graph, second pass collects components on the reverse.
    let mut order = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    for start in 0..n {
        if visited[start] {
            continue;
        }
        let mut stack = vec![(start, 0usize)];
        visited[start] = true;
        while let Some(&mut (u, ref mut next)) = stack.last_mut() {
            if *next < n {
                let v = *next;
                *next += 1;
                if edge(u, v) && !visited[v] {
                    visited[v] = true;
                    stack.push((v, 0));
                }
            } else {
                order.push(u);
                stack.pop();
            }
        }
    }

    let mut component = vec![usize::MAX; n];
    let mut components = Vec::new();
    for &start in order.iter().rev() {
        if component[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut members = vec![start];
        component[start] = id;
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for (v, comp) in component.iter_mut().enumerate() {
                if edge(v, u) && *comp == usize::MAX {
                    *comp = id;
                    members.push(v);
                    stack.push(v);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    components
}

/// Verify that `m` has a single recurrent class and that this class is
/// aperiodic. Transient states are permitted; they receive stationary
/// probability zero.
fn check_ergodic(m: &[Vec<f64>]) -> Result<()> {
    let n = m.len();
    let components = strongly_connected_components(m);

    let mut component_of = vec![0usize; n];
    for (id, members) in components.iter().enumerate() {
        for &u in members {
            component_of[u] = id;
        }
    }

    // A component is recurrent when no edge leaves it.
    let mut recurrent = Vec::new();
    for (id, members) in components.iter().enumerate() {
        let escapes = members
            .iter()
            .any(|&u| (0..n).any(|v| m[u][v] > 0.0 && component_of[v] != id));
        if !escapes {
            recurrent.push(id);
        }
    }
    if recurrent.len() != 1 {
        return Err(Error::NotErgodic(format!(
            "{} recurrent classes, expected exactly 1",
            recurrent.len()
        )));
    }

    // Period of the recurrent class: gcd over edges (u, v) inside the
    // class of level(u) + 1 - level(v), with levels from a BFS.
    let class: &[usize] = &components[recurrent[0]];
    let in_class = |u: usize| component_of[u] == recurrent[0];
    let mut level = vec![i64::MIN; n];
    let root = class[0];
    level[root] = 0;
    let mut queue = std::collections::VecDeque::from([root]);
    let mut gcd: i64 = 0;
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if m[u][v] <= 0.0 || !in_class(v) {
                continue;
            }
            if level[v] == i64::MIN {
                level[v] = level[u] + 1;
                queue.push_back(v);
            } else {
                let diff = level[u] + 1 - level[v];
                gcd = gcd_i64(gcd, diff.abs());
            }
        }
    }
    if gcd != 1 {
        return Err(Error::NotErgodic(format!(
            "recurrent class has period {gcd}"
        )));
    }
    Ok(())
}

fn gcd_i64(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd_i64(b, a % b)
    }
}

/// Stationary distribution of a row-stochastic matrix with a single
/// recurrent aperiodic class.
///
/// Solves `π P = π`, `Σ π_i = 1` by Gaussian elimination with partial
/// pivoting and verifies the residual `‖πP − π‖_∞ ≤ 1e-12`.
pub fn stationary_distribution(transition: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = transition.len();
    check_stochastic_matrix("transition matrix", transition, n, n)?;

    // Unknowns π as a column vector: rows of A are (Pᵀ − I) x = 0 with the
    // first equation replaced by the normalization Σ x_i = 1.
    let mut a = vec![vec![0.0f64; n + 1]; n];
    a[0].fill(1.0);
    for row in 1..n {
        for col in 0..n {
            a[row][col] = transition[col][row] - if row == col { 1.0 } else { 0.0 };
        }
    }

    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col].abs() < 1e-300 {
            return Err(Error::StationarySolveFailed(
                "singular linear system".to_string(),
            ));
        }
        a.swap(col, pivot);
        let (solved, active) = a.split_at_mut(col + 1);
        let pivot_row = &solved[col];
        for row in active.iter_mut() {
            let factor = row[col] / pivot_row[col];
            if factor != 0.0 {
                for (cell, &p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                    *cell -= factor * p;
                }
            }
        }
    }
    let mut pi = vec![0.0f64; n];
    for row in (0..n).rev() {
        let mut acc = a[row][n];
        for col in (row + 1)..n {
            acc -= a[row][col] * pi[col];
        }
        pi[row] = acc / a[row][row];
    }

    // Clean up signed zeros / tiny negative round-off on transient states.
    for v in pi.iter_mut() {
        if *v < 0.0 {
            if *v < -1e-12 {
                return Err(Error::StationarySolveFailed(format!(
                    "negative stationary probability {v:.3e}"
                )));
            }
            *v = 0.0;
        }
    }

    let mut residual: f64 = 0.0;
    for col in 0..n {
        let mut acc = 0.0;
        for row in 0..n {
            acc += pi[row] * transition[row][col];
        }
        residual = residual.max((acc - pi[col]).abs());
    }
    let sum: f64 = pi.iter().sum();
    residual = residual.max((sum - 1.0).abs());
    if residual > 1e-12 {
        return Err(Error::StationarySolveFailed(format!(
            "residual {residual:.3e} exceeds 1e-12"
        )));
    }
    Ok(pi)
}

/// Validate a raw model file into a [`ModelSpec`].
///
/// Checks alphabet integrity, stochasticity of every probability vector
/// and matrix, ergodicity and stationarity of Markov components, channel
/// dimensions, and erasure-glyph constraints.
pub fn validate_model(file: ModelFile) -> Result<ModelSpec> {
    let input_alphabet = Alphabet::new(file.alphabet)?;
    let s = input_alphabet.len();

    let signal = match file.signal {
        SignalFile::Iid { marginal } => {
            check_distribution("signal marginal", &marginal, s)?;
            SignalModel::Iid { marginal }
        }
        SignalFile::Markov {
            transition,
            initial,
        } => {
            check_stochastic_matrix("signal transition", &transition, s, s)?;
            check_ergodic(&transition)?;
            let stationary = stationary_distribution(&transition)?;
            let initial = match initial {
                Some(declared) => {
                    check_distribution("signal initial", &declared, s)?;
                    let max_dev = declared
                        .iter()
                        .zip(&stationary)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0f64, f64::max);
                    if max_dev > STATIONARY_TOL {
                        return Err(Error::InitialNotStationary { max_dev });
                    }
                    declared
                }
                None => stationary,
            };
            SignalModel::Markov {
                transition,
                initial,
            }
        }
    };

    let (channel, output_alphabet, erasure_index) = match file.channel {
        ChannelFile::Dmc {
            matrix,
            output_alphabet,
        } => {
            let output = match output_alphabet {
                Some(glyphs) => Alphabet::new(glyphs)?,
                None => input_alphabet.clone(),
            };
            check_stochastic_matrix("channel matrix", &matrix, s, output.len())?;
            (ChannelModel::Dmc { matrix }, output, None)
        }
        ChannelFile::ErasureKnown {
            erasure,
            erasure_glyph,
        } => {
            let glyph = erasure_glyph.unwrap_or_else(|| DEFAULT_ERASURE_GLYPH.to_string());
            let output = input_alphabet.with_erasure_glyph(&glyph)?;
            let process = match erasure {
                ErasureFile::Iid { pi } => {
                    if !pi.is_finite() || pi <= 0.0 || pi >= 1.0 {
                        return Err(Error::ErasureProbOutOfRange(pi));
                    }
                    ErasureProcess::Iid { pi }
                }
                ErasureFile::Markov { transition } => {
                    check_stochastic_matrix("erasure transition", &transition, 2, 2)?;
                    check_ergodic(&transition)?;
                    let initial = stationary_distribution(&transition)?;
                    ErasureProcess::Markov {
                        transition,
                        initial,
                    }
                }
            };
            (
                ChannelModel::ErasureKnown { process },
                output,
                Some(s as u8),
            )
        }
        ChannelFile::ErasureUnknown { erasure_glyph } => {
            let glyph = erasure_glyph.unwrap_or_else(|| DEFAULT_ERASURE_GLYPH.to_string());
            let output = input_alphabet.with_erasure_glyph(&glyph)?;
            (ChannelModel::ErasureUnknown, output, Some(s as u8))
        }
    };

    Ok(ModelSpec {
        signal,
        channel,
        input_alphabet,
        output_alphabet,
        erasure_index,
    })
}

// ----------------------------------------------------------------------
// Sampling
// ----------------------------------------------------------------------

/// Draw a signal/observation pair of length `t` from the model.
///
/// The draw is a pure function of `(model, t, seed, surrogate_pi)`.
/// Channels of kind `erasure_unknown` carry no sampling law, so a
/// surrogate erasure probability in `(0, 1)` must be supplied for them
/// (and is ignored for every other channel kind).
pub fn sample_path(
    model: &ModelSpec,
    t: usize,
    seed: u64,
    surrogate_pi: Option<f64>,
) -> Result<(Vec<u8>, Vec<u8>)> {
    if t == 0 {
        return Err(Error::EmptySequence);
    }
    let mut rng = rng_from_seed(seed);
    let s = model.input_alphabet.len() as u8;

    let mut x = Vec::with_capacity(t);
    let mut z = Vec::with_capacity(t);
    // Erasure-state memory for the Markov erasure process: 0 = transmit,
    // 1 = erase.
    let mut erasure_state: Option<usize> = None;

    for i in 0..t {
        let xi = match &model.signal {
            SignalModel::Iid { marginal } => sample_categorical(&mut rng, marginal) as u8,
            SignalModel::Markov {
                transition,
                initial,
            } => {
                if i == 0 {
                    sample_categorical(&mut rng, initial) as u8
                } else {
                    sample_categorical(&mut rng, &transition[x[i - 1] as usize]) as u8
                }
            }
        };
        x.push(xi);

        let zi = match &model.channel {
            ChannelModel::Dmc { matrix } => {
                sample_categorical(&mut rng, &matrix[xi as usize]) as u8
            }
            ChannelModel::ErasureKnown { process } => {
                let erased = match process {
                    ErasureProcess::Iid { pi } => uniform_f64(&mut rng) < *pi,
                    ErasureProcess::Markov {
                        transition,
                        initial,
                    } => {
                        let row = match erasure_state {
                            None => initial.as_slice(),
                            Some(prev) => transition[prev].as_slice(),
                        };
                        let state = sample_categorical(&mut rng, row);
                        erasure_state = Some(state);
                        state == 1
                    }
                };
                if erased {
                    s
                } else {
                    xi
                }
            }
            ChannelModel::ErasureUnknown => {
                let pi = surrogate_pi.ok_or(Error::SurrogateRequired)?;
                if !pi.is_finite() || pi <= 0.0 || pi >= 1.0 {
                    return Err(Error::ErasureProbOutOfRange(pi));
                }
                if uniform_f64(&mut rng) < pi {
                    s
                } else {
                    xi
                }
            }
        };
        z.push(zi);
    }
    Ok((x, z))
}

// ----------------------------------------------------------------------
// Trellis
// ----------------------------------------------------------------------

/// Per-position, per-state log₂ weights for a fixed observation.
///
/// Positions are 0-based. `initial[s]` is the weight of starting in state
/// `s` at position 0; `step(p)[prev * n_states + cur]` is the weight of
/// moving from `prev` at position `p` to `cur` at position `p + 1`. Each
/// weight already folds in the channel factor of the observed symbol at
/// the destination position, so the sum of weights along a full path is
/// the log₂ joint measure of `(x, z)` (unnormalized for
/// `erasure_unknown`). `NEG_INFINITY` marks forbidden transitions.
#[derive(Debug, Clone)]
pub struct Trellis {
    n_states: usize,
    len: usize,
    initial: Vec<f64>,
    steps: Vec<Vec<f64>>,
}

impl Trellis {
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    /// Number of positions `t`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    /// Transition weights from position `p` to position `p + 1`,
    /// row-major by previous state (`p` in `0..len-1`).
    pub fn step(&self, p: usize) -> &[f64] {
        &self.steps[p]
    }
}

/// Compile the model and a concrete observation into a [`Trellis`].
///
/// Never fails: an observation that is impossible under the model yields
/// a trellis whose forward marginal is `NEG_INFINITY`, which downstream
/// operations reject explicitly.
///
/// # Panics
///
/// Panics if `z` is empty or contains indices outside the output
/// alphabet; use [`Alphabet::parse_sequence`] to obtain valid indices.
pub fn compile_trellis(model: &ModelSpec, z: &[u8]) -> Trellis {
    assert!(!z.is_empty(), "observation must contain at least one symbol");
    let n_states = model.input_alphabet.len();
    let n_out = model.output_alphabet.len();
    for &zi in z {
        assert!(
            (zi as usize) < n_out,
            "observation symbol index {zi} outside output alphabet"
        );
    }
    let t = z.len();

    // Channel factor at position p for signal symbol x, in linear domain.
    // For erasure channels the pattern probability is a per-position
    // constant (the erasure pattern is a function of z alone), captured in
    // `pattern`; symbol consistency contributes an indicator.
    let erasure_index = model.erasure_index;
    let pattern: Vec<f64> = match &model.channel {
        ChannelModel::Dmc { .. } => Vec::new(),
        ChannelModel::ErasureUnknown => vec![1.0; t],
        ChannelModel::ErasureKnown { process } => {
            let erased: Vec<bool> = z.iter().map(|&zi| Some(zi) == erasure_index).collect();
            match process {
                ErasureProcess::Iid { pi } => erased
                    .iter()
                    .map(|&e| if e { *pi } else { 1.0 - *pi })
                    .collect(),
                ErasureProcess::Markov {
                    transition,
                    initial,
                } => {
                    let mut out = Vec::with_capacity(t);
                    for p in 0..t {
                        let cur = erased[p] as usize;
                        let prob = if p == 0 {
                            initial[cur]
                        } else {
                            transition[erased[p - 1] as usize][cur]
                        };
                        out.push(prob);
                    }
                    out
                }
            }
        }
    };
    let chan = |p: usize, x: usize| -> f64 {
        match &model.channel {
            ChannelModel::Dmc { matrix } => matrix[x][z[p] as usize],
            ChannelModel::ErasureKnown { .. } | ChannelModel::ErasureUnknown => {
                if Some(z[p]) == erasure_index || z[p] as usize == x {
                    pattern[p]
                } else {
                    0.0
                }
            }
        }
    };

    let signal_initial: &[f64] = match &model.signal {
        SignalModel::Iid { marginal } => marginal,
        SignalModel::Markov { initial, .. } => initial,
    };
    let initial: Vec<f64> = (0..n_states)
        .map(|x| (signal_initial[x] * chan(0, x)).log2())
        .collect();

    let mut steps = Vec::with_capacity(t.saturating_sub(1));
    for p in 1..t {
        let mut step = vec![f64::NEG_INFINITY; n_states * n_states];
        for cur in 0..n_states {
            let factor = chan(p, cur);
            if factor == 0.0 {
                continue;
            }
            match &model.signal {
                SignalModel::Iid { marginal } => {
                    let w = (marginal[cur] * factor).log2();
                    for prev in 0..n_states {
                        step[prev * n_states + cur] = w;
                    }
                }
                SignalModel::Markov { transition, .. } => {
                    for prev in 0..n_states {
                        step[prev * n_states + cur] = (transition[prev][cur] * factor).log2();
                    }
                }
            }
        }
        steps.push(step);
    }

    Trellis {
        n_states,
        len: t,
        initial,
        steps,
    }
}

/// Log₂ joint weight of a complete signal sequence under the trellis.
///
/// Factors are accumulated in position order, so the result is exactly
/// reproducible. Returns `NEG_INFINITY` when the pair `(x, z)` is
/// impossible.
pub fn joint_log_prob(trellis: &Trellis, x: &[u8]) -> Result<f64> {
    if x.len() != trellis.len {
        return Err(Error::LengthMismatch {
            expected: trellis.len,
            found: x.len(),
        });
    }
    let s = trellis.n_states;
    for &xi in x {
        if (xi as usize) >= s {
            return Err(Error::LengthMismatch {
                expected: s,
                found: xi as usize,
            });
        }
    }
    let mut acc = trellis.initial[x[0] as usize];
    for p in 1..x.len() {
        if acc == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        acc += trellis.steps[p - 1][x[p - 1] as usize * s + x[p] as usize];
    }
    Ok(acc)
}
