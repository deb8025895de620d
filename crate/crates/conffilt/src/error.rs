//! Error type shared across the crate.
//!
//! Variants are grouped by the stage that raises them: model construction
//! and validation, inference over a compiled trellis, confidence-set
//! assembly, entropy estimation, and batch experiments. The CLI maps these
//! groups onto process exit codes, so new variants should slot into an
//! existing group rather than invent a new failure mode.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // ------------------------------------------------------------------
    // Model construction / validation
    // ------------------------------------------------------------------
    /// Alphabet has no symbols.
    #[error("alphabet must contain at least one symbol")]
    EmptyAlphabet,

    /// Alphabet repeats a glyph.
    #[error("alphabet glyph {0:?} appears more than once")]
    DuplicateGlyph(String),

    /// Glyph is empty or contains a separator character.
    #[error("glyph {0:?} is empty or contains a separator/whitespace character")]
    BadGlyph(String),

    /// Alphabet larger than the `u8` symbol index space.
    #[error("alphabet has {0} symbols; at most 256 are supported")]
    AlphabetTooLarge(usize),

    /// A matrix or vector does not match the alphabet dimensions.
    #[error("{what}: expected {expected} entries, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    /// A probability vector does not sum to one within tolerance.
    #[error("{what}: entries sum to {sum:.17e}, expected 1 within 1e-12")]
    NotStochastic { what: String, sum: f64 },

    /// A probability entry lies outside `[0, 1]` (or is not finite).
    #[error("{what}: probability {value} lies outside [0, 1]")]
    ProbabilityOutOfRange { what: String, value: f64 },

    /// Markov transition matrix is not ergodic.
    #[error("transition matrix is not ergodic: {0}")]
    NotErgodic(String),

    /// Declared initial distribution disagrees with the stationary law.
    #[error(
        "declared initial distribution deviates from the stationary \
         distribution by {max_dev:.3e} (tolerance 1e-9)"
    )]
    InitialNotStationary { max_dev: f64 },

    /// Stationary-distribution solve failed (singular system).
    #[error("stationary distribution solve failed: {0}")]
    StationarySolveFailed(String),

    /// Erasure probability outside the open interval `(0, 1)`.
    #[error("erasure probability {0} lies outside the open interval (0, 1)")]
    ErasureProbOutOfRange(f64),

    /// Erasure glyph collides with a signal-alphabet glyph.
    #[error("erasure glyph {0:?} already appears in the signal alphabet")]
    ErasureGlyphCollision(String),

    /// A glyph in a sequence string is not part of the alphabet.
    #[error("glyph {glyph:?} at position {position} is not in the alphabet")]
    UnknownGlyph { glyph: String, position: usize },

    /// Model file is syntactically valid JSON but semantically malformed.
    #[error("model file: {0}")]
    ModelFile(String),

    /// Sampling through an `erasure_unknown` channel needs a surrogate law.
    #[error(
        "channel kind erasure_unknown has no sampling law; \
         provide a surrogate erasure probability"
    )]
    SurrogateRequired,

    /// Requested sequence length is zero.
    #[error("sequence length must be at least 1")]
    EmptySequence,

    // ------------------------------------------------------------------
    // Inference
    // ------------------------------------------------------------------
    /// The observed sequence has probability zero under the model.
    #[error("observation has probability zero under the model")]
    ImpossibleObservation,

    /// A sequence length disagrees with the trellis length.
    #[error("sequence length {found} does not match expected length {expected}")]
    LengthMismatch { expected: usize, found: usize },

    /// Ranked enumeration hit its item limit before the caller was done.
    #[error("ranked enumeration exceeded its limit of {limit} items")]
    EnumerationLimit { limit: usize },

    /// Exhaustive ranking would materialize more than 2²⁰ sequences.
    #[error(
        "brute-force ranking over {states} states at {positions} positions \
         exceeds the 2^20 sequence guard"
    )]
    BruteForceTooLarge { states: usize, positions: usize },

    // ------------------------------------------------------------------
    // Confidence sets
    // ------------------------------------------------------------------
    /// Confidence level outside the open interval `(0, 1)`.
    #[error("confidence level {0} lies outside the open interval (0, 1)")]
    GammaOutOfRange(f64),

    /// Deterministic core exceeded the configured cap before reaching mass γ.
    #[error(
        "confidence-set core exceeded cap of {cap} sequences with \
         accumulated mass {mass_attained:.17} < gamma"
    )]
    CapExceeded { cap: usize, mass_attained: f64 },

    /// Enumeration finished with total mass well below γ; the item source
    /// was not a complete descending enumeration.
    #[error(
        "ranked source exhausted at mass {attained:.17}, \
         short of gamma = {gamma}"
    )]
    MassShortfall { attained: f64, gamma: f64 },

    /// Analytic expected-size computation would materialize too many
    /// weight classes.
    #[error("analytic set-size computation needs {classes} weight classes; the guard allows at most 2^22")]
    ProductClassesTooLarge { classes: usize },

    // ------------------------------------------------------------------
    // Entropy
    // ------------------------------------------------------------------
    /// Model is outside the closed-form entropy class.
    #[error("no closed-form conditional entropy rate for this model: {0}")]
    NoClosedForm(String),

    /// Exact block entropy needs a fully specified channel law.
    #[error("exact block entropy requires a known channel law: {0}")]
    ChannelLawUnknown(String),

    /// Exact block entropy would enumerate too many sequence pairs.
    #[error(
        "exact block entropy at length {n} would enumerate {pairs:.3e} \
         sequence pairs; the guard allows at most 2^24"
    )]
    BlockTooLarge { n: usize, pairs: f64 },

    /// Monte-Carlo estimate needs at least one replicate.
    #[error("at least one replicate is required, got {0}")]
    NoReplicates(usize),

    // ------------------------------------------------------------------
    // Experiments
    // ------------------------------------------------------------------
    /// An experiment needs at least one trial or sample.
    #[error("at least one trial is required, got {0}")]
    NoTrials(usize),

    /// The growth grid must be non-empty and strictly increasing.
    #[error("the t grid must be non-empty and strictly increasing")]
    BadTGrid,

    /// Too many coverage trials aborted on the core cap.
    #[error(
        "{exceeded} of {trials} coverage trials exceeded the core cap \
         (threshold is 1%)"
    )]
    CapExceededRate { exceeded: usize, trials: usize },

    /// Dual-route oracle check found a discrepancy.
    #[error("oracle check failed:\n{0}")]
    OracleMismatch(String),

    // ------------------------------------------------------------------
    // I/O
    // ------------------------------------------------------------------
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True when the error indicates an invalid model description rather
    /// than a runtime condition. The CLI maps this class to exit code 2.
    pub fn is_model_validation(&self) -> bool {
        matches!(
            self,
            Error::EmptyAlphabet
                | Error::DuplicateGlyph(_)
                | Error::BadGlyph(_)
                | Error::AlphabetTooLarge(_)
                | Error::DimensionMismatch { .. }
                | Error::NotStochastic { .. }
                | Error::ProbabilityOutOfRange { .. }
                | Error::NotErgodic(_)
                | Error::InitialNotStationary { .. }
                | Error::StationarySolveFailed(_)
                | Error::ErasureProbOutOfRange(_)
                | Error::ErasureGlyphCollision(_)
                | Error::ModelFile(_)
                | Error::Json(_)
        )
    }

    /// True when the error indicates a resource cap or guard was hit.
    /// The CLI maps this class to exit code 4.
    pub fn is_cap(&self) -> bool {
        matches!(
            self,
            Error::EnumerationLimit { .. }
                | Error::BruteForceTooLarge { .. }
                | Error::CapExceeded { .. }
                | Error::ProductClassesTooLarge { .. }
                | Error::BlockTooLarge { .. }
                | Error::CapExceededRate { .. }
        )
    }
}
