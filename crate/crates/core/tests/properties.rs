mod common;

use proptest::prelude::*;

use blurchain::engine::{
    conditional_query, cylinder_probability, event_probability, forward_predict,
    sweep_event_probability, Budget, ObservationPattern, Slot, Target,
};
use blurchain::model::{
    build_channel_model, invariance_residual, random_model, validate_kernel, MarkovChain,
    PairSymbol, RandomModelSpec,
};
use blurchain::quantities::{compute_alpha, compute_beta, compute_rho, BetaTable};
use blurchain::{model, Model};

use common::max_abs_diff;

fn spec(seed: u64, alphabet_size: usize, order: usize) -> RandomModelSpec {
    RandomModelSpec {
        seed,
        alphabet_size,
        order,
        floor: 0.02,
        fidelity: 0.7,
    }
}

fn build(seed: u64, alphabet_size: usize, order: usize) -> Model {
    Model::new(random_model(&spec(seed, alphabet_size, order)).unwrap()).unwrap()
}

fn any_model() -> impl Strategy<Value = Model> {
    (any::<u64>(), 2usize..=3, 1usize..=2).prop_map(|(s, a, m)| build(s, a, m))
}

fn slot(a: usize) -> impl Strategy<Value = Slot> {
    prop_oneof![
        Just(Slot::Free),
        (0..a).prop_map(Slot::X),
        (0..a).prop_map(Slot::Y),
        (0..a, 0..a).prop_map(|(x, y)| Slot::pair(x, y)),
    ]
}

fn model_and_pattern(max_depth: usize) -> impl Strategy<Value = (Model, ObservationPattern)> {
    any_model().prop_flat_map(move |m| {
        let a = m.alphabet().size();
        (
            Just(m),
            prop::collection::vec(slot(a), 0..=max_depth).prop_map(ObservationPattern::new),
        )
    })
}

fn y_word(a: usize, max_len: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..a, 0..=max_len)
}

fn stochastic_rows(rows: usize, width: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.05f64..1.0, width), rows).prop_map(|rows| {
        rows.into_iter()
            .map(|r| {
                let t: f64 = r.iter().sum();
                r.into_iter().map(|v| v / t).collect()
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn random_models_satisfy_hypotheses(seed in any::<u64>(), a in 2usize..=3, m in 1usize..=2) {
        let kernel = random_model::<f64>(&spec(seed, a, m)).unwrap();
        let report = validate_kernel(&kernel);
        prop_assert!(report.is_valid() && report.strictly_positive);
        let model = Model::new(kernel).unwrap();
        prop_assert!(invariance_residual(model.kernel(), model.law().probabilities()) < 1e-12);
        let budget = Budget::default();
        prop_assert!(compute_rho(&model, &budget).unwrap().value < 1.0);
        prop_assert!(compute_alpha(&model, &budget).unwrap().value > 0.0);
    }

    #[test]
    fn stationary_law_is_a_distribution(model in any_model()) {
        let pi = model.law().probabilities();
        prop_assert!(pi.iter().all(|&p| p >= 0.0));
        prop_assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn total_probability((model, pattern) in model_and_pattern(3), pick in any::<prop::sample::Index>()) {
        let budget = Budget::default();
        let alphabet = model.alphabet();
        let whole = event_probability(&model, &pattern, &budget).unwrap();
        let older: f64 = (0..alphabet.pair_count())
            .map(|q| event_probability(&model, &pattern.with_older(&[Slot::Pair(alphabet.pair(q))]), &budget).unwrap())
            .sum();
        prop_assert!((older - whole).abs() < 1e-12);
        if pattern.depth() > 0 {
            let i = pick.index(pattern.depth());
            let refined: f64 = pattern.slots[i]
                .options(alphabet)
                .into_iter()
                .map(|q| {
                    let mut slots = pattern.slots.clone();
                    slots[i] = Slot::Pair(alphabet.pair(q));
                    event_probability(&model, &ObservationPattern::new(slots), &budget).unwrap()
                })
                .sum();
            prop_assert!((refined - whole).abs() < 1e-12);
        }
    }

    #[test]
    fn conditionals_are_distributions((model, pattern) in model_and_pattern(3)) {
        let budget = Budget::default();
        for target in [Target::X, Target::Y, Target::Z] {
            let law = conditional_query(&model, &pattern, target, None, &budget).unwrap();
            prop_assert!((law.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(law.probabilities.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn chain_rule(model in any_model(), raw in prop::collection::vec((0usize..3, 0usize..3), 1..=4)) {
        let budget = Budget::default();
        let a = model.alphabet().size();
        let z: Vec<PairSymbol> = raw.into_iter().map(|(x, y)| PairSymbol::new(x % a, y % a)).collect();
        let mut product = event_probability(&model, &ObservationPattern::pair_history(&z[..1]), &budget).unwrap();
        for t in 1..z.len() {
            let law = conditional_query(&model, &ObservationPattern::pair_history(&z[..t]), Target::Z, None, &budget).unwrap();
            product *= law.prob(model.alphabet().pair_index(z[t]));
        }
        prop_assert!((cylinder_probability(&model, &z).unwrap() - product).abs() < 1e-12);
    }

    #[test]
    fn tower_over_deeper_y(model in any_model(), seed_word in y_word(3, 3)) {
        let budget = Budget::default();
        let a = model.alphabet().size();
        let w: Vec<usize> = seed_word.into_iter().map(|b| b % a).collect();
        let past = ObservationPattern::y_history(&w);
        let direct = conditional_query(&model, &past, Target::X, None, &budget).unwrap();
        let mut mixed = vec![0.0; a];
        for b in 0..a {
            let deeper = past.with_older(&[Slot::Y(b)]);
            let weight = event_probability(&model, &deeper, &budget).unwrap() / direct.event_mass;
            if weight == 0.0 {
                continue;
            }
            let law = conditional_query(&model, &deeper, Target::X, None, &budget).unwrap();
            for (m, p) in mixed.iter_mut().zip(&law.probabilities) {
                *m += weight * p;
            }
        }
        prop_assert!(max_abs_diff(&direct.probabilities, &mixed) < 1e-12);
    }

    #[test]
    fn free_older_slots_change_nothing((model, pattern) in model_and_pattern(3), extra in 1usize..=2) {
        prop_assume!(pattern.depth() >= model.order());
        let budget = Budget::unlimited();
        let base = conditional_query(&model, &pattern, Target::Z, None, &budget).unwrap();
        let padded = pattern.with_older(&vec![Slot::Free; extra]);
        let again = conditional_query(&model, &padded, Target::Z, None, &budget).unwrap();
        prop_assert!(max_abs_diff(&base.probabilities, &again.probabilities) < 1e-12);
    }

    #[test]
    fn forward_sweep_matches_enumeration((model, pattern) in model_and_pattern(4)) {
        let budget = Budget::default();
        let exact = conditional_query(&model, &pattern, Target::Z, None, &budget).unwrap();
        let swept = forward_predict(&model, &pattern).unwrap();
        prop_assert!(max_abs_diff(&exact.probabilities, &swept.probabilities) < 1e-10);
        let mass = sweep_event_probability(&model, &pattern).unwrap();
        prop_assert!((mass - exact.event_mass).abs() < 1e-12);
    }

    #[test]
    fn single_precision_tracks_double((model, pattern) in model_and_pattern(3)) {
        let budget = Budget::default();
        let narrow = model::Model::new(model.kernel().cast::<f32>()).unwrap();
        let wide = conditional_query(&model, &pattern, Target::X, None, &budget).unwrap();
        let law = conditional_query(&narrow, &pattern, Target::X, None, &budget).unwrap();
        let law: Vec<f64> = law.probabilities.iter().map(|&p| p as f64).collect();
        prop_assert!(max_abs_diff(&wide.probabilities, &law) < 1e-5);
    }

    #[test]
    fn beta_and_gamma_shape(seed in any::<u64>(), m in 1usize..=2) {
        let model = build(seed, 2, m);
        let depth = 3;
        let table = BetaTable::compute(&model, depth, &Budget::default()).unwrap();
        for k in 1..=depth {
            prop_assert_eq!(table.beta(k, k).value, 0.0);
            prop_assert!((table.gamma(1, k) - table.beta(1, k).value).abs() < 1e-15);
            let mut exp_sum = 0.0;
            for j in 1..=k {
                prop_assert!(table.beta(j, k).value >= 0.0);
                prop_assert!(table.gamma(j, k) >= table.gamma(j - 1, k));
                exp_sum += table.beta(j, k).value.exp_m1();
            }
            prop_assert!(exp_sum <= table.gamma(k, k).exp_m1() + 1e-12);
        }
    }

    #[test]
    fn beta_depends_on_at_most_order_extra_slots(seed in any::<u64>(), m in 1usize..=2, j in 1usize..=2) {
        let model = build(seed, 2, m);
        let budget = Budget::default();
        let base = compute_beta(&model, j, j + m, &budget).unwrap().value;
        let deeper = compute_beta(&model, j, j + m + 1, &budget).unwrap().value;
        prop_assert!((base - deeper).abs() < 1e-12);
    }

    #[test]
    fn channel_blurring_is_the_largest_flip_mass(
        (a, m, chain, channel) in (2usize..=3, 1usize..=2).prop_flat_map(|(a, m)| {
            (Just(a), Just(m), stochastic_rows(a.pow(m as u32), a), stochastic_rows(a, a))
        })
    ) {
        let x_chain = MarkovChain { alphabet_size: a, order: m, rows: chain };
        let model = Model::new(build_channel_model(&x_chain, &channel).unwrap()).unwrap();
        let off = (0..a)
            .map(|x| (0..a).filter(|&y| y != x).map(|y| channel[x][y]).sum::<f64>())
            .fold(0.0, f64::max);
        prop_assert!((compute_rho(&model, &Budget::default()).unwrap().value - off).abs() < 1e-12);
    }
}
