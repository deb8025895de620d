//! Exact-coverage confidence sets for finite-alphabet signals observed
//! through noisy channels.
//!
//! Given a known joint law for a signal `X_{1..t}` and its observation
//! `Z_{1..t}` (i.i.d. or Markov signal; memoryless, erasure, or
//! Markov-modulated-erasure channel), this crate constructs the smallest
//! probability-ranked set of candidate signals whose coverage probability
//! is *exactly* a requested level γ: a deterministic core of the
//! highest-posterior sequences plus one boundary sequence included with a
//! calibrated probability. Supporting machinery computes observation
//! marginals, ranked posterior enumerations, conditional entropy rates
//! (the growth exponent of the set size), and batch experiments for
//! coverage and growth, all deterministically seeded.
//!
//! Quick tour:
//!
//! ```
//! use conffilt::models::{compile_trellis, ModelSpec};
//! use conffilt::inference::enumerate_descending;
//! use conffilt::confset::{build_confidence_set, DEFAULT_CORE_CAP};
//!
//! let model = ModelSpec::from_json(r#"{
//!     "alphabet": ["0", "1"],
//!     "signal":   { "kind": "iid", "marginal": [0.9, 0.1] },
//!     "channel":  { "kind": "erasure_unknown" }
//! }"#).unwrap();
//!
//! let z = model.output_alphabet().parse_sequence("0*1*").unwrap();
//! let trellis = compile_trellis(&model, &z);
//! let mut stream = enumerate_descending(&trellis, 1 << 20).unwrap();
//! let set = build_confidence_set(&mut stream, 0.99, DEFAULT_CORE_CAP).unwrap();
//!
//! // Three sequences cover probability 0.99 exactly: no boundary needed.
//! assert_eq!(set.core().len(), 3);
//! assert!(set.boundary().is_none());
//! ```

#![forbid(unsafe_code)]

pub mod confset;
pub mod entropy;
pub mod error;
pub mod experiments;
pub mod inference;
pub mod models;
pub mod numeric;
pub mod rng;

pub use error::{Error, Result};
