//! Confidence sets with exact coverage: a deterministic core of the
//! highest-posterior sequences plus one randomized boundary element.
//!
//! Construction consumes sequences in descending posterior order until the
//! cumulative mass first reaches the confidence level γ. Sequences that
//! fit entirely below γ form the *core*; the first sequence that would
//! overshoot becomes the *boundary*, included with probability
//! `(γ − core_mass) / posterior` so that total coverage equals γ exactly.
//! When the core mass hits γ on the nose (within [`COVERAGE_TOL`]) there
//! is no boundary at all.
//!
//! Two construction paths are provided:
//!
//! * [`build_confidence_set`] materializes the core from a
//!   [`RankedStream`] — exact, any model, memory proportional to the core.
//! * [`product_expected_log_size`] computes only the *expected size*, in
//!   closed form, for models whose posterior factorizes across positions
//!   (i.i.d. signal, memoryless-given-z channel). Sequences with identical
//!   posteriors collapse into counted weight classes, so the expected size
//!   at block lengths far beyond anything enumerable (e.g. t = 200 with a
//!   core of ~2²⁶ sequences) costs only thousands of class terms. The two
//!   paths agree to ~1e-12 wherever both are feasible, which is asserted
//!   in tests.

use crate::error::{Error, Result};
use crate::inference::{RankedItem, RankedStream};
use crate::models::{Alphabet, ChannelModel, ModelSpec, SignalModel};
use crate::numeric::KahanSum;
use std::fmt::Write as _;

/// Tolerance for the exact-coverage identity and the boundary-absent
/// ("core mass equals γ on the nose") branch.
pub const COVERAGE_TOL: f64 = 1e-12;

/// Default cap on the number of core sequences (2²⁰).
pub const DEFAULT_CORE_CAP: usize = 1 << 20;

/// Mass shortfall tolerated when a *complete* enumeration ends just shy of
/// γ through accumulated rounding (the true total mass is exactly 1).
const EXHAUSTION_TOL: f64 = 1e-9;

/// The randomized boundary element of a confidence set.
#[derive(Debug, Clone, PartialEq)]
pub struct Boundary {
    sequence: Vec<u8>,
    posterior: f64,
    inclusion_prob: f64,
}

impl Boundary {
    pub fn sequence(&self) -> &[u8] {
        &self.sequence
    }

    pub fn posterior(&self) -> f64 {
        self.posterior
    }

    /// Probability with which the boundary sequence belongs to the set.
    pub fn inclusion_prob(&self) -> f64 {
        self.inclusion_prob
    }
}

/// A built confidence set Ψ_γ: immutable, safe to share.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceSet {
    gamma: f64,
    core: Vec<(Vec<u8>, f64)>,
    boundary: Option<Boundary>,
    core_mass: f64,
    /// Length of member sequences; `None` only for the degenerate empty
    /// set (γ below coverage tolerance).
    seq_len: Option<usize>,
}

impl ConfidenceSet {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Core elements in rank order, as `(sequence, posterior)` pairs.
    pub fn core(&self) -> &[(Vec<u8>, f64)] {
        &self.core
    }

    pub fn boundary(&self) -> Option<&Boundary> {
        self.boundary.as_ref()
    }

    /// Total posterior mass of the core.
    pub fn core_mass(&self) -> f64 {
        self.core_mass
    }

    /// Coverage probability delivered by the set: core mass plus the
    /// boundary's inclusion probability times its posterior. Equals γ
    /// within [`COVERAGE_TOL`] by construction.
    pub fn coverage_mass(&self) -> f64 {
        match &self.boundary {
            Some(b) => self.core_mass + b.inclusion_prob * b.posterior,
            None => self.core_mass,
        }
    }

    /// Expected cardinality: |core| + inclusion probability.
    pub fn expected_size(&self) -> f64 {
        self.core.len() as f64
            + self
                .boundary
                .as_ref()
                .map_or(0.0, |b| b.inclusion_prob)
    }

    /// Length of member sequences.
    pub fn seq_len(&self) -> Option<usize> {
        self.seq_len
    }

    /// Serialize in rank order: one `<sequence> TAB <posterior>` line per
    /// core element (posteriors with 17 significant digits), then the
    /// boundary line, if any, with a trailing `TAB p=<inclusion_prob>`.
    pub fn serialize(&self, alphabet: &Alphabet) -> String {
        let mut out = String::new();
        for (seq, posterior) in &self.core {
            let _ = writeln!(
                out,
                "{}\t{:.16e}",
                alphabet.format_sequence(seq),
                posterior
            );
        }
        if let Some(b) = &self.boundary {
            let _ = writeln!(
                out,
                "{}\t{:.16e}\tp={:.16e}",
                alphabet.format_sequence(&b.sequence),
                b.posterior,
                b.inclusion_prob
            );
        }
        out
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !gamma.is_finite() || gamma <= 0.0 || gamma >= 1.0 {
        return Err(Error::GammaOutOfRange(gamma));
    }
    Ok(())
}

/// Core construction loop shared by the streaming and oracle paths.
fn build_from_source<F>(mut next: F, gamma: f64, cap: usize) -> Result<ConfidenceSet>
where
    F: FnMut() -> Result<Option<RankedItem>>,
{
    check_gamma(gamma)?;
    let mut core: Vec<(Vec<u8>, f64)> = Vec::new();
    let mut mass = KahanSum::new();
    let mut seq_len = None;

    loop {
        let attained = mass.value();
        if (attained - gamma).abs() <= COVERAGE_TOL {
            // Exact hit: no randomized boundary element is needed.
            return Ok(ConfidenceSet {
                gamma,
                core,
                boundary: None,
                core_mass: attained,
                seq_len,
            });
        }
        let Some(item) = next()? else {
            // A finished enumeration carries total mass 1 > γ, so any
            // shortfall here beyond rounding noise means the source was
            // not a complete descending enumeration.
            if gamma - attained <= EXHAUSTION_TOL {
                return Ok(ConfidenceSet {
                    gamma,
                    core,
                    boundary: None,
                    core_mass: attained,
                    seq_len,
                });
            }
            return Err(Error::MassShortfall {
                attained,
                gamma,
            });
        };
        seq_len.get_or_insert(item.sequence.len());

        let new_mass = attained + item.posterior;
        if new_mass > gamma + COVERAGE_TOL {
            // Overshoot: this item is the randomized boundary.
            let inclusion_prob = (gamma - attained) / item.posterior;
            return Ok(ConfidenceSet {
                gamma,
                core,
                boundary: Some(Boundary {
                    sequence: item.sequence,
                    posterior: item.posterior,
                    inclusion_prob,
                }),
                core_mass: attained,
                seq_len,
            });
        }
        // The item fits below (or exactly at) γ: it joins the core.
        if core.len() >= cap {
            return Err(Error::CapExceeded {
                cap,
                mass_attained: attained,
            });
        }
        mass.add(item.posterior);
        core.push((item.sequence, item.posterior));
    }
}

/// Build the confidence set at level `gamma` from a fresh ranked stream.
///
/// `cap` bounds the number of core sequences; [`DEFAULT_CORE_CAP`] is the
/// conventional choice. The stream's own item limit, if hit, propagates
/// as [`Error::EnumerationLimit`].
pub fn build_confidence_set(
    stream: &mut RankedStream,
    gamma: f64,
    cap: usize,
) -> Result<ConfidenceSet> {
    build_from_source(|| stream.next_item(), gamma, cap)
}

/// Build the confidence set from an already-ranked item list (e.g. the
/// output of [`crate::inference::brute_force_ranked`]). Used to
/// cross-check the streaming path against the exhaustive oracle.
pub fn build_confidence_set_from_ranked(
    items: &[RankedItem],
    gamma: f64,
    cap: usize,
) -> Result<ConfidenceSet> {
    let mut iter = items.iter();
    build_from_source(|| Ok(iter.next().cloned()), gamma, cap)
}

/// Randomized membership test: true iff `x` is in the core, or `x` is the
/// boundary sequence and the caller's uniform draw `u ∈ [0, 1)` falls
/// below the inclusion probability.
///
/// `u` must be drawn independently of `(X, Z)`; passing it explicitly
/// keeps that independence auditable and the test reproducible.
pub fn randomized_membership(set: &ConfidenceSet, x: &[u8], u: f64) -> Result<bool> {
    if let Some(len) = set.seq_len {
        if x.len() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                found: x.len(),
            });
        }
    }
    if set.core.iter().any(|(seq, _)| seq == x) {
        return Ok(true);
    }
    if let Some(b) = &set.boundary {
        if b.sequence == x {
            return Ok(u < b.inclusion_prob);
        }
    }
    Ok(false)
}

/// log₂ of the expected cardinality, with the empty set mapped to −∞.
pub fn expected_log_size(set: &ConfidenceSet) -> f64 {
    set.expected_size().log2()
}

// ----------------------------------------------------------------------
// Product-form analytic path
// ----------------------------------------------------------------------

/// Per-position posterior factors, when the posterior factorizes.
///
/// For an i.i.d. signal, every supported channel kind is memoryless given
/// the observation (erasure-pattern probabilities are per-position
/// constants once `z` is fixed), so
/// `P(x|z) = ∏_i v_i(x_i)` with `v_i(x) ∝ P_sig(x)·w_i(z_i|x)`.
/// Returns `Ok(None)` for Markov signals (no product form) and
/// `Err(ImpossibleObservation)` when some position admits no symbol.
pub fn posterior_factors(model: &ModelSpec, z: &[u8]) -> Result<Option<Vec<Vec<f64>>>> {
    let SignalModel::Iid { marginal } = model.signal() else {
        return Ok(None);
    };
    let s = model.input_alphabet().len();
    let erasure_index = model.erasure_index();

    let mut factors = Vec::with_capacity(z.len());
    for &zi in z {
        let mut v: Vec<f64> = (0..s)
            .map(|x| {
                let chan = match model.channel() {
                    ChannelModel::Dmc { matrix } => matrix[x][zi as usize],
                    ChannelModel::ErasureKnown { .. } | ChannelModel::ErasureUnknown => {
                        // Pattern constants are shared by every x at this
                        // position and cancel in the normalization below.
                        if Some(zi) == erasure_index || zi as usize == x {
                            1.0
                        } else {
                            0.0
                        }
                    }
                };
                marginal[x] * chan
            })
            .collect();
        let total: f64 = v.iter().sum();
        if total <= 0.0 {
            return Err(Error::ImpossibleObservation);
        }
        for q in v.iter_mut() {
            *q /= total;
        }
        factors.push(v);
    }
    Ok(Some(factors))
}

/// Precomputed log₂ factorials for multinomial coefficients.
struct Log2Factorial {
    table: Vec<f64>,
}

impl Log2Factorial {
    fn new(max_n: usize) -> Self {
        let mut table = Vec::with_capacity(max_n + 1);
        table.push(0.0);
        let mut acc = 0.0f64;
        for k in 1..=max_n {
            acc += (k as f64).log2();
            table.push(acc);
        }
        Self { table }
    }

    fn log2_multinomial(&self, n: usize, counts: &[usize]) -> f64 {
        let mut v = self.table[n];
        for &c in counts {
            v -= self.table[c];
        }
        v
    }
}

/// Guard on the total number of weight classes materialized by
/// [`product_expected_log_size`].
const MAX_PRODUCT_CLASSES: usize = 1 << 22;

/// Expected confidence-set size, in log₂, for a factorized posterior —
/// without enumerating individual sequences.
///
/// Positions with identical factor vectors are interchangeable, so all
/// sequences sharing a per-position symbol *count* profile share one
/// posterior value. The classes (count = multinomial coefficient,
/// probability = product of factor powers) are accumulated in descending
/// probability order with exactly the same core/boundary/exact-hit rules
/// as [`build_confidence_set`], which the tests confirm by comparing the
/// two paths wherever enumeration is feasible.
pub fn product_expected_log_size(factors: &[Vec<f64>], gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    let t = factors.len();
    let lf = Log2Factorial::new(t);

    // Group equal factor vectors (bitwise equality: equal positions are
    // computed by identical arithmetic, so they round identically).
    // Deterministic positions (single supported symbol) contribute a
    // factor of exactly 1 to both count and probability and are dropped.
    let mut groups: Vec<(&Vec<f64>, usize)> = Vec::new();
    for v in factors {
        match groups.iter_mut().find(|(rep, _)| *rep == v) {
            Some((_, n)) => *n += 1,
            None => groups.push((v, 1)),
        }
    }
    groups.retain(|(rep, _)| rep.iter().filter(|&&q| q > 0.0).count() > 1);

    // Per-group classes: distribute the group's n positions over its
    // supported symbols; (log₂ probability, log₂ count) per composition.
    let mut per_group: Vec<Vec<(f64, f64)>> = Vec::new();
    let mut total_classes: usize = 1;
    for (rep, n) in &groups {
        let qs: Vec<f64> = rep.iter().copied().filter(|&q| q > 0.0).collect();
        let mut classes = Vec::new();
        let mut counts = vec![0usize; qs.len()];
        compositions(*n, 0, &mut counts, &mut |counts| {
            let log2_p: f64 = counts
                .iter()
                .zip(&qs)
                .map(|(&c, &q)| c as f64 * q.log2())
                .sum();
            let log2_count = lf.log2_multinomial(*n, counts);
            classes.push((log2_p, log2_count));
        });
        total_classes = total_classes.saturating_mul(classes.len());
        if total_classes > MAX_PRODUCT_CLASSES {
            return Err(Error::ProductClassesTooLarge {
                classes: total_classes,
            });
        }
        per_group.push(classes);
    }

    // Cartesian product over groups, then rank classes by probability.
    let mut classes: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    for group in &per_group {
        let mut next = Vec::with_capacity(classes.len() * group.len());
        for &(lp, lc) in &classes {
            for &(glp, glc) in group {
                next.push((lp + glp, lc + glc));
            }
        }
        classes = next;
    }
    classes.sort_by(|a, b| b.0.total_cmp(&a.0));

    // Accumulate classes with the same semantics as the item-level loop.
    let mut mass = KahanSum::new();
    let mut items = 0.0f64;
    for &(lp, lc) in &classes {
        let attained = mass.value();
        if (attained - gamma).abs() <= COVERAGE_TOL {
            return Ok(items.log2());
        }
        let count = lc.exp2();
        let p = lp.exp2();
        let class_mass = (lp + lc).exp2();
        // Number of whole items from this class that keep the cumulative
        // mass at or below γ (+ tolerance).
        let full = ((gamma + COVERAGE_TOL - attained) / p).floor().min(count);
        if full >= count {
            mass.add(class_mass);
            items += count;
            continue;
        }
        let after_full = attained + full * p;
        if (after_full - gamma).abs() <= COVERAGE_TOL {
            return Ok((items + full).log2());
        }
        // Boundary element lands inside this class.
        let inclusion_prob = (gamma - after_full) / p;
        return Ok((items + full + inclusion_prob).log2());
    }
    let attained = mass.value();
    if gamma - attained <= EXHAUSTION_TOL {
        return Ok(items.log2());
    }
    Err(Error::MassShortfall {
        attained,
        gamma,
    })
}

/// Enumerate all compositions of `n` into `counts.len()` non-negative
/// parts, in place.
fn compositions<F: FnMut(&[usize])>(n: usize, idx: usize, counts: &mut [usize], f: &mut F) {
    if idx + 1 == counts.len() {
        counts[idx] = n;
        f(counts);
        return;
    }
    for c in 0..=n {
        counts[idx] = c;
        compositions(n - c, idx + 1, counts, f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::enumerate_descending;
    use crate::models::compile_trellis;

    fn golden_model() -> ModelSpec {
        ModelSpec::from_json(
            r#"{
                "alphabet": ["0", "1"],
                "signal": { "kind": "iid", "marginal": [0.9, 0.1] },
                "channel": { "kind": "erasure_unknown" }
            }"#,
        )
        .unwrap()
    }

    fn golden_set(gamma: f64) -> ConfidenceSet {
        let model = golden_model();
        let z = model.output_alphabet().parse_sequence("0*1*").unwrap();
        let trellis = compile_trellis(&model, &z);
        let mut stream = enumerate_descending(&trellis, 1 << 10).unwrap();
        build_confidence_set(&mut stream, gamma, DEFAULT_CORE_CAP).unwrap()
    }

    #[test]
    fn golden_gamma_099_is_three_core_no_boundary() {
        let set = golden_set(0.99);
        let seqs: Vec<Vec<u8>> = set.core().iter().map(|(s, _)| s.clone()).collect();
        assert_eq!(
            seqs,
            vec![vec![0, 0, 1, 0], vec![0, 0, 1, 1], vec![0, 1, 1, 0]]
        );
        assert!(set.boundary().is_none());
        assert_eq!(set.expected_size(), 3.0);
        assert!((set.core_mass() - 0.99).abs() <= COVERAGE_TOL);
        assert!((expected_log_size(&set) - 3f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn golden_gamma_05_is_pure_boundary() {
        let set = golden_set(0.5);
        assert!(set.core().is_empty());
        let b = set.boundary().expect("boundary present");
        assert_eq!(b.sequence(), &[0, 0, 1, 0]);
        assert!((b.posterior() - 0.81).abs() < 1e-12);
        // 0.5 / 0.81 = 50/81
        assert!((b.inclusion_prob() - 50.0 / 81.0).abs() < 1e-12);
        assert!((set.expected_size() - 50.0 / 81.0).abs() < 1e-12);
        // Exact coverage identity.
        assert!((set.coverage_mass() - 0.5).abs() <= COVERAGE_TOL);
        assert!((expected_log_size(&set) - (50.0f64 / 81.0).log2()).abs() < 1e-12);
    }

    #[test]
    fn identity_channel_boundary_is_gamma() {
        let model = ModelSpec::from_json(
            r#"{
                "alphabet": ["0", "1"],
                "signal": { "kind": "iid", "marginal": [0.7, 0.3] },
                "channel": { "kind": "dmc", "matrix": [[1.0, 0.0], [0.0, 1.0]] }
            }"#,
        )
        .unwrap();
        let trellis = compile_trellis(&model, &[1, 0, 1]);
        let mut stream = enumerate_descending(&trellis, 16).unwrap();
        let set = build_confidence_set(&mut stream, 0.75, DEFAULT_CORE_CAP).unwrap();
        assert!(set.core().is_empty());
        let b = set.boundary().unwrap();
        assert_eq!(b.sequence(), &[1, 0, 1]);
        assert!((b.posterior() - 1.0).abs() < 1e-12);
        assert!((b.inclusion_prob() - 0.75).abs() < 1e-12);
        assert!((expected_log_size(&set) - 0.75f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn membership_rules() {
        let set = golden_set(0.99);
        // Core members ignore u entirely.
        assert!(randomized_membership(&set, &[0, 0, 1, 0], 0.999).unwrap());
        assert!(randomized_membership(&set, &[0, 1, 1, 0], 0.0).unwrap());
        // 0111 is outside the set for any u.
        assert!(!randomized_membership(&set, &[0, 1, 1, 1], 0.0).unwrap());
        assert!(matches!(
            randomized_membership(&set, &[0, 0, 1], 0.1),
            Err(Error::LengthMismatch { .. })
        ));

        let set = golden_set(0.5);
        let p = set.boundary().unwrap().inclusion_prob();
        assert!(randomized_membership(&set, &[0, 0, 1, 0], p - 1e-9).unwrap());
        assert!(!randomized_membership(&set, &[0, 0, 1, 0], p + 1e-9).unwrap());
    }

    #[test]
    fn membership_frequency_matches_inclusion_prob() {
        let set = golden_set(0.5);
        let p = set.boundary().unwrap().inclusion_prob();
        let mut rng = crate::rng::rng_from_seed(99);
        let n = 100_000;
        let mut hits = 0usize;
        for _ in 0..n {
            let u = crate::rng::uniform_f64(&mut rng);
            if randomized_membership(&set, &[0, 0, 1, 0], u).unwrap() {
                hits += 1;
            }
        }
        let freq = hits as f64 / n as f64;
        assert!((freq - p).abs() < 0.005, "freq {freq} vs p {p}");
    }

    #[test]
    fn gamma_must_be_interior() {
        let model = golden_model();
        let z = model.output_alphabet().parse_sequence("0*").unwrap();
        let trellis = compile_trellis(&model, &z);
        for gamma in [0.0, 1.0, -0.5, 1.5, f64::NAN] {
            let mut stream = enumerate_descending(&trellis, 16).unwrap();
            let err = build_confidence_set(&mut stream, gamma, 16).unwrap_err();
            assert!(matches!(err, Error::GammaOutOfRange(_)), "gamma {gamma}");
        }
    }

    #[test]
    fn cap_exceeded_reports_mass() {
        let model = golden_model();
        let z = model.output_alphabet().parse_sequence("0*1*").unwrap();
        let trellis = compile_trellis(&model, &z);
        let mut stream = enumerate_descending(&trellis, 16).unwrap();
        let err = build_confidence_set(&mut stream, 0.99, 1).unwrap_err();
        match err {
            Error::CapExceeded { cap, mass_attained } => {
                assert_eq!(cap, 1);
                assert!((mass_attained - 0.81).abs() < 1e-12);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn serialization_layout() {
        let model = golden_model();
        let set = golden_set(0.5);
        let text = set.serialize(model.input_alphabet());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1);
        let fields: Vec<&str> = lines[0].split('\t').collect();
        assert_eq!(fields.len(), 3);
        assert_eq!(fields[0], "0010");
        let posterior: f64 = fields[1].parse().unwrap();
        assert!((posterior - 0.81).abs() < 1e-12);
        let p: f64 = fields[2].strip_prefix("p=").unwrap().parse().unwrap();
        assert!((p - 50.0 / 81.0).abs() < 1e-12);

        let set = golden_set(0.99);
        let text = set.serialize(model.input_alphabet());
        assert_eq!(text.lines().count(), 3);
        assert!(text.ends_with('\n'));
        assert!(!text.contains("p="));
    }

    #[test]
    fn oracle_route_agrees_with_stream_route() {
        let model = golden_model();
        let z = model.output_alphabet().parse_sequence("0*1**0").unwrap();
        let trellis = compile_trellis(&model, &z);
        for gamma in [0.1, 0.3, 0.5, 0.77, 0.9, 0.99] {
            let mut stream = enumerate_descending(&trellis, 1 << 10).unwrap();
            let via_stream =
                build_confidence_set(&mut stream, gamma, DEFAULT_CORE_CAP).unwrap();
            let items = crate::inference::brute_force_ranked(&trellis).unwrap();
            let via_oracle =
                build_confidence_set_from_ranked(&items, gamma, DEFAULT_CORE_CAP).unwrap();
            assert_eq!(via_stream.core().len(), via_oracle.core().len());
            assert!(
                (via_stream.expected_size() - via_oracle.expected_size()).abs() < 1e-9,
                "gamma {gamma}"
            );
        }
    }

    #[test]
    fn product_factors_match_stream_posteriors() {
        let model = ModelSpec::from_json(
            r#"{
                "alphabet": ["0", "1"],
                "signal": { "kind": "iid", "marginal": [0.9, 0.1] },
                "channel": { "kind": "erasure_known",
                             "erasure": { "kind": "iid", "pi": 0.3 } }
            }"#,
        )
        .unwrap();
        let z = model.output_alphabet().parse_sequence("0**1*0**").unwrap();
        let factors = posterior_factors(&model, &z).unwrap().unwrap();
        assert_eq!(factors.len(), 8);
        let trellis = compile_trellis(&model, &z);
        let mut stream = enumerate_descending(&trellis, 1 << 10).unwrap();
        while let Some(item) = stream.next_item().unwrap() {
            let product: f64 = item
                .sequence
                .iter()
                .enumerate()
                .map(|(i, &x)| factors[i][x as usize])
                .product();
            assert!(
                (product - item.posterior).abs() < 1e-12,
                "sequence {:?}",
                item.sequence
            );
        }
    }

    #[test]
    fn product_path_matches_stream_path_expected_size() {
        let model = ModelSpec::from_json(
            r#"{
                "alphabet": ["0", "1"],
                "signal": { "kind": "iid", "marginal": [0.9, 0.1] },
                "channel": { "kind": "erasure_known",
                             "erasure": { "kind": "iid", "pi": 0.3 } }
            }"#,
        )
        .unwrap();
        let out = model.output_alphabet();
        for z_text in ["0*1*", "***", "0*********1", "00000", "*0*1*0*1*0*"] {
            let z = out.parse_sequence(z_text).unwrap();
            let factors = posterior_factors(&model, &z).unwrap().unwrap();
            let trellis = compile_trellis(&model, &z);
            for gamma in [0.25, 0.5, 0.9, 0.99] {
                let analytic = product_expected_log_size(&factors, gamma).unwrap();
                let mut stream = enumerate_descending(&trellis, 1 << 16).unwrap();
                let set =
                    build_confidence_set(&mut stream, gamma, DEFAULT_CORE_CAP).unwrap();
                let streamed = expected_log_size(&set);
                assert!(
                    (analytic - streamed).abs() < 1e-9,
                    "z {z_text} gamma {gamma}: {analytic} vs {streamed}"
                );
            }
        }
    }

    #[test]
    fn product_factors_none_for_markov_signal() {
        let model = ModelSpec::from_json(
            r#"{
                "alphabet": ["0", "1"],
                "signal": { "kind": "markov",
                            "transition": [[0.9, 0.1], [0.2, 0.8]] },
                "channel": { "kind": "dmc", "matrix": [[0.9, 0.1], [0.1, 0.9]] }
            }"#,
        )
        .unwrap();
        assert!(posterior_factors(&model, &[0, 1]).unwrap().is_none());
    }

    #[test]
    fn product_factors_reject_impossible_observation() {
        let model = ModelSpec::from_json(
            r#"{
                "alphabet": ["0", "1"],
                "signal": { "kind": "iid", "marginal": [1.0, 0.0] },
                "channel": { "kind": "erasure_unknown" }
            }"#,
        )
        .unwrap();
        // Observing "1" is impossible when P(1) = 0.
        assert!(matches!(
            posterior_factors(&model, &[1]),
            Err(Error::ImpossibleObservation)
        ));
    }

    #[test]
    fn product_path_identity_channel_gamma() {
        // Fully revealed observation: expected size is exactly γ.
        let model = ModelSpec::from_json(
            r#"{
                "alphabet": ["0", "1"],
                "signal": { "kind": "iid", "marginal": [0.9, 0.1] },
                "channel": { "kind": "erasure_known",
                             "erasure": { "kind": "iid", "pi": 0.3 } }
            }"#,
        )
        .unwrap();
        let z = model.output_alphabet().parse_sequence("0101").unwrap();
        let factors = posterior_factors(&model, &z).unwrap().unwrap();
        let got = product_expected_log_size(&factors, 0.75).unwrap();
        assert!((got - 0.75f64.log2()).abs() < 1e-12);
    }
}
