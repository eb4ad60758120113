use atc_core::atc::{estimate_target, ThresholdModel};
use atc_core::{
    atc_estimate, doc_gap, learn_threshold, score, validate_vector, Error, MetricValue, Monotone, MonotoneTransform,
    PredictionSet, ProbabilityVector, ScoreFunctionId, Threshold,
};
use proptest::prelude::*;

fn simplex_point(k: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = ProbabilityVector> {
    k.prop_flat_map(|k| prop::collection::vec(0.0f64..1.0, k))
        .prop_filter("positive mass", |w| w.iter().sum::<f64>() > 1e-3)
        .prop_map(|w| {
            let s: f64 = w.iter().sum();
            ProbabilityVector::new(w.iter().map(|x| x / s).collect()).unwrap()
        })
}

fn labeled_set(k: usize, n: std::ops::Range<usize>) -> impl Strategy<Value = PredictionSet> {
    prop::collection::vec((prop::collection::vec(0.01f64..1.0, k), 0..k), n).prop_map(move |rows| {
        let (vs, ls): (Vec<_>, Vec<_>) = rows
            .into_iter()
            .map(|(w, l)| {
                let s: f64 = w.iter().sum();
                (ProbabilityVector::new(w.iter().map(|x| x / s).collect()).unwrap(), l)
            })
            .unzip();
        PredictionSet::labeled(vs, ls).unwrap()
    })
}

proptest! {
    #[test]
    fn scores_are_permutation_invariant(
        w in prop::collection::vec(0.0f64..1.0, 2..12),
        rot in 0usize..12,
        rev in any::<bool>(),
    ) {
        let total: f64 = w.iter().sum();
        prop_assume!(total > 1e-3);
        let c: Vec<f64> = w.iter().map(|x| x / total).collect();
        let mut d = c.clone();
        d.rotate_left(rot % c.len());
        if rev {
            d.reverse();
        }
        let p = ProbabilityVector::new(c).unwrap();
        let q = ProbabilityVector::new(d).unwrap();
        for id in ScoreFunctionId::ALL {
            prop_assert_eq!(score(&p, id), score(&q, id));
        }
    }

    #[test]
    fn scores_between_centroid_and_vertex(p in simplex_point(2..=10)) {
        let k = p.dim();
        let u = ProbabilityVector::uniform(k).unwrap();
        let e = ProbabilityVector::vertex(k, 0).unwrap();
        for id in ScoreFunctionId::ALL {
            let s = score(&p, id);
            prop_assert!(s >= score(&u, id) - 1e-12, "{} below centroid", id);
            prop_assert!(s <= score(&e, id) + 1e-12, "{} above vertex", id);
        }
    }

    #[test]
    fn validation_renormalizes_within_tolerance(
        w in prop::collection::vec(0.0f64..1.0, 2..10),
        drift in -5e-7f64..5e-7,
    ) {
        let s: f64 = w.iter().sum();
        prop_assume!(s > 1e-3);
        let mut c: Vec<f64> = w.iter().map(|x| x / s).collect();
        c[0] += drift;
        prop_assume!(c[0] >= 0.0);
        let v = validate_vector(c, 1e-6).unwrap();
        prop_assert!((v.components().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(v.components().iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn validation_rejects_off_simplex(w in prop::collection::vec(0.0f64..1.0, 2..10), excess in 1e-4f64..1.0) {
        let s: f64 = w.iter().sum();
        prop_assume!(s > 1e-3);
        let c: Vec<f64> = w.iter().map(|x| x / s * (1.0 + excess)).collect();
        let rejected = matches!(validate_vector(c, 1e-6), Err(Error::NotOnSimplex { .. }));
        prop_assert!(rejected);
    }

    #[test]
    fn threshold_hits_achievable_proportion(scores in prop::collection::vec(0u8..20, 1..80), g in 0.0f64..=1.0) {
        let scores: Vec<f64> = scores.into_iter().map(f64::from).collect();
        let n = scores.len() as f64;
        let m = learn_threshold(&scores, MetricValue::error(g).unwrap()).unwrap();
        let below = scores.iter().filter(|&&s| m.threshold.is_below(s)).count() as f64 / n;
        prop_assert_eq!(below, m.achieved_source_proportion);
        // No achievable proportion is strictly closer.
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        for i in 0..=sorted.len() {
            if i == 0 || i == sorted.len() || sorted[i] != sorted[i - 1] {
                prop_assert!((g - i as f64 / n).abs() >= (g - below).abs());
            }
        }
    }

    #[test]
    fn estimate_ignores_target_order(scores in prop::collection::vec(0.0f64..1.0, 1..60), t in 0.0f64..1.0) {
        let model = ThresholdModel {
            threshold: Threshold::Score(t),
            source_metric: MetricValue::error(0.0).unwrap(),
            achieved_source_proportion: 0.0,
        };
        let mut rev = scores.clone();
        rev.reverse();
        prop_assert_eq!(estimate_target(&model, &scores).unwrap(), estimate_target(&model, &rev).unwrap());
    }

    #[test]
    fn atc_ignores_source_order(s in labeled_set(4, 2..60), t in labeled_set(4, 1..60)) {
        let idx: Vec<usize> = (0..s.len()).rev().collect();
        let r = s.select(&idx).unwrap();
        for id in ScoreFunctionId::ALL {
            let a = atc_estimate(&s, &t, &id).unwrap().target_value;
            let b = atc_estimate(&r, &t, &id).unwrap().target_value;
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn doc_gap_is_antisymmetric(s in labeled_set(3, 1..40), t in labeled_set(3, 1..40)) {
        prop_assert_eq!(doc_gap(&s, &t).unwrap(), -doc_gap(&t, &s).unwrap());
    }

    #[test]
    fn affine_transforms_preserve_estimates(
        s in labeled_set(5, 2..60),
        t in labeled_set(5, 1..60),
        a in 0.1f64..10.0,
        b in -5.0f64..5.0,
    ) {
        for id in ScoreFunctionId::ALL {
            let base = atc_estimate(&s, &t, &id).unwrap().target_value;
            for g in [Monotone::affine(a, b).unwrap(), Monotone::odd_power(5).unwrap()] {
                let tr = atc_estimate(&s, &t, &MonotoneTransform::new(id, g)).unwrap().target_value;
                prop_assert_eq!(base, tr, "{} under {}", id, g);
            }
        }
    }
}

#[test]
fn centroid_and_vertex_bounds_on_dense_sample() {
    let mut rng = atc_core::seed::rng_for(&[42]);
    for k in 2..=10 {
        let u = ProbabilityVector::uniform(k).unwrap();
        let e = ProbabilityVector::vertex(k, k - 1).unwrap();
        for _ in 0..10_000 {
            let p = atc_core::ordering::sample_simplex(&mut rng, k);
            for id in ScoreFunctionId::ALL {
                let s = score(&p, id);
                assert!(s >= score(&u, id) - 1e-12 && s <= score(&e, id) + 1e-12, "{id} at k={k}");
            }
        }
    }
}
