//! Property tests for the library's structural invariants, driven by
//! randomized models over small alphabets where exhaustive oracles are
//! affordable.

use proptest::prelude::*;

use conffilt::confset::{
    expected_log_size, posterior_factors, product_expected_log_size, randomized_membership,
    COVERAGE_TOL,
};
use conffilt::entropy::{
    closed_form_rate, entropy_of_distribution, exact_block_conditional_entropy, smb_estimate,
};
use conffilt::experiments::random_model_file;
use conffilt::inference::{brute_force_ranked, TIE_TOL};
use conffilt::models::{
    compile_trellis, sample_path, stationary_distribution, validate_model, SignalModel,
};
use conffilt::rng::{rng_from_seed, uniform_f64};

mod common;
use common::{build, exhaust, fuzz_case};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// A stationary vector of a strictly positive stochastic matrix:
    /// non-negative, sums to one, fixed under the transition.
    #[test]
    fn stationary_vector_satisfies_balance(seed: u64, k in 2usize..6) {
        let mut rng = rng_from_seed(seed);
        let transition: Vec<Vec<f64>> = (0..k)
            .map(|_| {
                let raw: Vec<f64> = (0..k).map(|_| 0.05 + uniform_f64(&mut rng)).collect();
                let total: f64 = raw.iter().sum();
                raw.into_iter().map(|v| v / total).collect()
            })
            .collect();
        let pi = stationary_distribution(&transition).unwrap();
        prop_assert!((pi.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for j in 0..k {
            let image: f64 = (0..k).map(|i| pi[i] * transition[i][j]).sum();
            prop_assert!((image - pi[j]).abs() <= 1e-12);
            prop_assert!(pi[j] >= 0.0);
        }
    }

    /// Sampling is a pure function of (model, t, seed).
    #[test]
    fn sampling_is_deterministic_in_seed(seed: u64, t in 1usize..40) {
        let mut rng = rng_from_seed(seed);
        let model = validate_model(random_model_file(&mut rng)).unwrap();
        let surrogate = model.needs_surrogate().then_some(0.5);
        let a = sample_path(&model, t, seed, surrogate).unwrap();
        let b = sample_path(&model, t, seed, surrogate).unwrap();
        prop_assert_eq!(a, b);
    }

    /// The lazy enumeration is sound (weakly descending, ties broken
    /// lexicographically) and complete (posterior mass sums to one, and
    /// it agrees item-for-item with the exhaustive oracle).
    #[test]
    fn enumeration_is_sound_complete_and_matches_oracle(seed: u64) {
        let (model, z, _) = fuzz_case(seed);
        let items = exhaust(&model, &z);
        prop_assert!(!items.is_empty());

        let mass: f64 = items.iter().map(|i| i.posterior).sum();
        prop_assert!((mass - 1.0).abs() <= 1e-9, "total mass {mass}");

        for w in items.windows(2) {
            prop_assert!(
                w[0].posterior >= w[1].posterior - 1e-12,
                "order violated: {} then {}",
                w[0].posterior,
                w[1].posterior
            );
            if (w[0].log2_posterior - w[1].log2_posterior).abs() <= TIE_TOL {
                prop_assert!(
                    w[0].sequence < w[1].sequence,
                    "tie not lexicographic: {:?} before {:?}",
                    w[0].sequence,
                    w[1].sequence
                );
            }
        }

        let trellis = compile_trellis(&model, &z);
        let oracle = brute_force_ranked(&trellis).unwrap();
        prop_assert_eq!(items.len(), oracle.len());
        for (a, b) in items.iter().zip(&oracle) {
            prop_assert_eq!(&a.sequence, &b.sequence);
            prop_assert!((a.posterior - b.posterior).abs() <= 1e-9);
        }
    }

    /// Exact coverage: the set's total coverage mass equals γ, either
    /// through the core alone or through the randomized boundary.
    #[test]
    fn coverage_identity_holds(seed: u64) {
        let (model, z, gamma) = fuzz_case(seed);
        let set = build(&model, &z, gamma);
        match set.boundary() {
            Some(boundary) => {
                prop_assert!(set.core_mass() < gamma);
                prop_assert!(boundary.inclusion_prob() > 0.0);
                prop_assert!(boundary.inclusion_prob() <= 1.0);
                prop_assert!(
                    (set.coverage_mass() - gamma).abs() <= COVERAGE_TOL,
                    "coverage {} vs gamma {}",
                    set.coverage_mass(),
                    gamma
                );
            }
            None => {
                // Exact hit, or the whole support was exhausted just
                // short of γ; never an overshoot.
                prop_assert!(
                    set.core_mass() <= gamma + COVERAGE_TOL
                        && gamma - set.core_mass() <= 1e-9,
                    "no boundary but core mass {} vs gamma {}",
                    set.core_mass(),
                    gamma
                );
            }
        }
        // Expected size is consistent with its parts.
        let want = set.core().len() as f64
            + set.boundary().map_or(0.0, |b| b.inclusion_prob());
        prop_assert!((set.expected_size() - want).abs() <= 1e-15);
    }

    /// Raising γ never shrinks the set: the lower-γ core is a prefix of
    /// the higher-γ core and expected size is monotone.
    #[test]
    fn confidence_sets_are_monotone_in_gamma(seed: u64) {
        let (model, z, gamma) = fuzz_case(seed);
        let (lo, hi) = if gamma < 0.5 {
            (gamma, 1.0 - gamma)
        } else {
            (1.0 - gamma, gamma)
        };
        prop_assume!(lo < hi);
        let small = build(&model, &z, lo);
        let large = build(&model, &z, hi);
        prop_assert!(small.core().len() <= large.core().len());
        for (a, b) in small.core().iter().zip(large.core()) {
            prop_assert_eq!(&a.0, &b.0);
        }
        prop_assert!(large.expected_size() >= small.expected_size() - 1e-12);
    }

    /// Membership semantics: every core member is in regardless of the
    /// uniform draw; the boundary member is in exactly when u < p; a
    /// sequence outside core and boundary is never in.
    #[test]
    fn membership_follows_core_and_boundary(seed: u64) {
        let (model, z, gamma) = fuzz_case(seed);
        let items = exhaust(&model, &z);
        let set = build(&model, &z, gamma);
        for (x, _) in set.core() {
            prop_assert!(randomized_membership(&set, x, 0.9999999).unwrap());
        }
        if let Some(boundary) = set.boundary() {
            let p = boundary.inclusion_prob();
            let x = boundary.sequence();
            prop_assert_eq!(randomized_membership(&set, x, p * 0.5).unwrap(), true);
            if p < 1.0 {
                prop_assert_eq!(
                    randomized_membership(&set, x, p + (1.0 - p) * 0.5).unwrap(),
                    false
                );
            }
        }
        let in_set: std::collections::HashSet<&[u8]> = set
            .core()
            .iter()
            .map(|(x, _)| x.as_slice())
            .chain(set.boundary().map(|b| b.sequence()))
            .collect();
        for item in items.iter().rev().take(3) {
            if !in_set.contains(item.sequence.as_slice()) {
                prop_assert!(!randomized_membership(&set, &item.sequence, 0.0).unwrap());
            }
        }
    }

    /// For factorizing posteriors the class-based expected size agrees
    /// with the enumeration route.
    #[test]
    fn product_path_agrees_with_stream(seed: u64) {
        let (model, z, gamma) = fuzz_case(seed);
        prop_assume!(matches!(model.signal(), SignalModel::Iid { .. }));
        let factors = posterior_factors(&model, &z).unwrap();
        prop_assume!(factors.is_some());
        let analytic = product_expected_log_size(&factors.unwrap(), gamma).unwrap();
        let set = build(&model, &z, gamma);
        prop_assert!(
            (analytic - expected_log_size(&set)).abs() <= 1e-9,
            "analytic {analytic} vs stream {}",
            expected_log_size(&set)
        );
    }

    /// Serialized sets parse back: one line per member, tab-separated,
    /// posteriors matching the set's own values.
    #[test]
    fn serialization_round_trips(seed: u64) {
        let (model, z, gamma) = fuzz_case(seed);
        let set = build(&model, &z, gamma);
        let text = set.serialize(model.input_alphabet());
        let lines: Vec<&str> = text.lines().collect();
        let want_lines = set.core().len() + set.boundary().map_or(0, |_| 1);
        prop_assert_eq!(lines.len(), want_lines);
        for (line, (x, posterior)) in lines.iter().zip(set.core()) {
            let mut fields = line.split('\t');
            let seq = fields.next().unwrap();
            let value: f64 = fields.next().unwrap().parse().unwrap();
            prop_assert_eq!(
                model.input_alphabet().parse_sequence(seq).unwrap(),
                x.clone()
            );
            prop_assert!((value - posterior).abs() <= 1e-15 * posterior.abs().max(1.0));
        }
        if let Some(boundary) = set.boundary() {
            let last = lines.last().unwrap();
            prop_assert!(last.contains("\tp="));
            let p: f64 = last.rsplit("p=").next().unwrap().parse().unwrap();
            prop_assert!((p - boundary.inclusion_prob()).abs() <= 1e-15);
        }
    }

    /// Entropy estimates respect information bounds: rates lie in
    /// [0, log₂|𝐗|] and conditioning never increases entropy.
    #[test]
    fn entropy_estimates_respect_bounds(seed: u64) {
        let mut rng = rng_from_seed(seed);
        let model = validate_model(random_model_file(&mut rng)).unwrap();
        let log_a = (model.input_alphabet().len() as f64).log2();

        if let Ok(est) = closed_form_rate(&model) {
            prop_assert!(est.value >= -1e-12 && est.value <= log_a + 1e-12);
        }
        if let Ok(est) = exact_block_conditional_entropy(&model, 2) {
            prop_assert!(est.value >= -1e-12 && est.value <= log_a + 1e-12);
            if let SignalModel::Iid { marginal } = model.signal() {
                prop_assert!(
                    est.value <= entropy_of_distribution(marginal) + 1e-12,
                    "conditioning increased entropy: {} > {}",
                    est.value,
                    entropy_of_distribution(marginal)
                );
            }
        }
    }

    /// The sequential estimator is a pure function of its seed.
    #[test]
    fn smb_estimate_is_deterministic(seed: u64) {
        let mut rng = rng_from_seed(seed);
        let model = validate_model(random_model_file(&mut rng)).unwrap();
        let surrogate = model.needs_surrogate().then_some(0.5);
        let a = smb_estimate(&model, 64, 3, seed, surrogate).unwrap();
        let b = smb_estimate(&model, 64, 3, seed, surrogate).unwrap();
        prop_assert_eq!(a.value.to_bits(), b.value.to_bits());
        prop_assert_eq!(
            a.std_error.unwrap().to_bits(),
            b.std_error.unwrap().to_bits()
        );
    }
}
