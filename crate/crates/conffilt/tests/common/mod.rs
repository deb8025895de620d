//! Helpers shared by the integration-test targets.

#![allow(dead_code)]

use conffilt::confset::{build_confidence_set, ConfidenceSet};
use conffilt::experiments::random_model_file;
use conffilt::inference::{enumerate_descending, RankedItem};
use conffilt::models::{compile_trellis, sample_path, validate_model, ModelSpec};
use conffilt::rng::{derive_seed, rng_from_seed, uniform_f64};

pub const FUZZ_LIMIT: usize = 1 << 16;
pub const FUZZ_CAP: usize = 1 << 16;

/// Model, observation, and confidence level drawn deterministically from
/// one seed. Sequence lengths are budgeted so the exhaustive oracle stays
/// under 2¹⁰ sequences.
pub fn fuzz_case(seed: u64) -> (ModelSpec, Vec<u8>, f64) {
    let mut rng = rng_from_seed(seed);
    let file = random_model_file(&mut rng);
    let model = validate_model(file).expect("fuzzed model must validate");
    let a = model.input_alphabet().len() as f64;
    let t_cap = ((10.0 / a.log2()).floor() as usize).max(1);
    let t = 1 + (uniform_f64(&mut rng) * t_cap as f64) as usize;
    let gamma = 0.05 + 0.9 * uniform_f64(&mut rng);
    let surrogate = model.needs_surrogate().then_some(0.5);
    let (_, z) = sample_path(&model, t, derive_seed(seed, 1), surrogate).unwrap();
    (model, z, gamma)
}

/// Drain the ranked stream to exhaustion.
pub fn exhaust(model: &ModelSpec, z: &[u8]) -> Vec<RankedItem> {
    let trellis = compile_trellis(model, z);
    let mut stream = enumerate_descending(&trellis, FUZZ_LIMIT).unwrap();
    let mut items = Vec::new();
    while let Some(item) = stream.next_item().unwrap() {
        items.push(item);
    }
    items
}

/// Build the γ-confidence set through the lazy enumeration route.
pub fn build(model: &ModelSpec, z: &[u8], gamma: f64) -> ConfidenceSet {
    let trellis = compile_trellis(model, z);
    let mut stream = enumerate_descending(&trellis, FUZZ_LIMIT).unwrap();
    build_confidence_set(&mut stream, gamma, FUZZ_CAP).unwrap()
}
