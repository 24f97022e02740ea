use std::sync::Arc;

use proptest::prelude::*;

use challenge_dp::counter::PrivateCounter;
use challenge_dp::games::{composed_epsilon, GameTranscript, Released};
use challenge_dp::learners::{FiniteHypothesisClass, LabeledExample, OnlineLearner, RowSet, Soa};
use challenge_dp::noise::{laplace_from_uniform, RandomSource};
use challenge_dp::params::{Constants, PrivacyBudget};
use challenge_dp::pop::{Pop, PopConfig, RewindMode, RoundOutcome};
use challenge_dp::sparse::{AboveThreshold, ChallengeAt, SparseParams};

fn class_strategy() -> impl Strategy<Value = FiniteHypothesisClass> {
    (1usize..6).prop_flat_map(|n| {
        prop::collection::vec(prop::collection::vec(any::<bool>(), n), 1..12).prop_map(
            move |mut rows| {
                rows.sort();
                rows.dedup();
                FiniteHypothesisClass::from_rows(n, rows).unwrap()
            },
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn noiseless_counter_is_prefix_sum(bits in prop::collection::vec(any::<bool>(), 1..300), seed in any::<u64>()) {
        let mut c = PrivateCounter::new(bits.len(), 1.0, RandomSource::noiseless(seed)).unwrap();
        let mut sum = 0;
        for &b in &bits {
            sum += b as u64;
            prop_assert_eq!(c.feed(b).unwrap(), sum);
        }
    }

    #[test]
    fn counter_estimates_stay_in_range(bits in prop::collection::vec(any::<bool>(), 1..200), seed in any::<u64>()) {
        let mut c = PrivateCounter::new(bits.len(), 0.5, RandomSource::new(seed)).unwrap();
        for (t, &b) in bits.iter().enumerate() {
            prop_assert!(c.feed(b).unwrap() <= t as u64 + 1);
        }
    }

    #[test]
    fn laplace_is_antisymmetric(u in 1e-9f64..(1.0 - 1e-9), gamma in 0.01f64..100.0) {
        let a = laplace_from_uniform(u, gamma);
        let b = laplace_from_uniform(1.0 - u, gamma);
        prop_assert!((a + b).abs() <= 1e-9 * gamma.max(a.abs()));
    }

    #[test]
    fn noiseless_challenge_at_matches_above_threshold(
        values in prop::collection::vec(-3.0f64..3.0, 1..60),
        reports in 1u64..6,
    ) {
        let params = SparseParams::new(0.0, 1.0, 1e-5, reports, values.len());
        let mut at = AboveThreshold::new(params, RandomSource::noiseless(1)).unwrap();
        let mut cat = ChallengeAt::new(params, RandomSource::noiseless(2)).unwrap();
        for &v in &values {
            let a = at.step(v).unwrap();
            prop_assert_eq!(a, cat.step(v).unwrap());
            if a.halted {
                break;
            }
        }
    }

    #[test]
    fn ldim_bounds(class in class_strategy()) {
        let d = class.ldim();
        prop_assert!(1u64 << d <= class.len() as u64);
        let all = class.all_rows();
        for x in 0..class.domain_size() {
            for y in [false, true] {
                let r = class.restrict(&all, x, y);
                if !r.is_empty() {
                    prop_assert!(class.ldim_of(&r) <= d);
                }
            }
        }
    }

    #[test]
    fn soa_mistakes_bounded_by_ldim(class in class_strategy(), h in any::<prop::sample::Index>(), xs in prop::collection::vec(any::<prop::sample::Index>(), 1..40)) {
        let class = Arc::new(class);
        let h = h.index(class.len());
        let mut soa = Soa::new(class.clone());
        let mut mistakes = 0;
        for x in xs {
            let x = x.index(class.domain_size());
            let y = class.label(h, x);
            mistakes += (soa.predict(x) != y) as u32;
            soa.update(LabeledExample::new(x, y)).unwrap();
        }
        prop_assert!(mistakes <= class.ldim());
    }

    #[test]
    fn rowset_algebra(a in prop::collection::vec(any::<bool>(), 1..150), b in prop::collection::vec(any::<bool>(), 1..150)) {
        let n = a.len().min(b.len());
        let build = |v: &[bool]| {
            let mut s = RowSet::empty(n);
            for (i, _) in v.iter().enumerate().take(n).filter(|(_, &x)| x) {
                s.insert(i);
            }
            s
        };
        let (sa, sb) = (build(&a), build(&b));
        let inter = sa.intersect(&sb);
        let diff = sa.minus(&sb);
        prop_assert_eq!(inter.len() + diff.len(), sa.len());
        for i in 0..n {
            prop_assert_eq!(inter.contains(i), a[i] && b[i]);
            prop_assert_eq!(diff.contains(i), a[i] && !b[i]);
        }
    }

    #[test]
    fn tally_and_snapshot_agree(seed in any::<u64>(), cut in 0usize..13, xs in prop::collection::vec(0usize..12, 1..60)) {
        let class = Arc::new(FiniteHypothesisClass::thresholds(12).unwrap());
        let labels: Vec<(usize, bool)> = xs.iter().map(|&x| (x, x >= cut)).collect();
        let budget = PrivacyBudget::new(1.0, 1e-5, 0.05, labels.len());
        let run = |mode| {
            let mut cfg = PopConfig::new(7, 1_000, budget, Constants::default());
            cfg.rewind = mode;
            let mut pop = Pop::new(cfg, Soa::new(class.clone()), RandomSource::new(seed)).unwrap();
            let mut out = Vec::new();
            for &(x, y) in &labels {
                match pop.round(x).unwrap() {
                    RoundOutcome::Predict(p) => {
                        out.push((p, pop.last_votes()));
                        pop.feed_label(y).unwrap();
                    }
                    RoundOutcome::Halted => break,
                }
            }
            out
        };
        prop_assert_eq!(run(RewindMode::Tally), run(RewindMode::Snapshot));
    }

    #[test]
    fn prefix_keys_distinguish_prefixes(a in prop::collection::vec(0u8..4, 0..6), b in prop::collection::vec(0u8..4, 0..6)) {
        let to_t = |v: &[u8]| {
            let mut t = GameTranscript::new(0);
            t.answers = v.iter().map(|&c| match c {
                0 => Released::Label(false),
                1 => Released::Label(true),
                2 => Released::Masked,
                _ => Released::Halted,
            }).collect();
            t
        };
        let pad = |v: &[u8]| { let mut p = v.to_vec(); p.resize(6, 3); p };
        prop_assert_eq!(to_t(&a).prefix_key(6) == to_t(&b).prefix_key(6), pad(&a) == pad(&b));
    }

    #[test]
    fn composition_grows_with_games(eps in 0.01f64..3.0, m in 1usize..50) {
        prop_assert!(composed_epsilon(eps, m + 1, 1e-5) > composed_epsilon(eps, m, 1e-5));
        prop_assert!(composed_epsilon(eps, m, 1e-5) >= eps * (2.0 * (1e5f64).ln()).sqrt());
    }
}
