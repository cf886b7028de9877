use predmult::{conflict_count, empirical_risk, Dataset, Example, Label, LinearClassifier};
use proptest::prelude::*;

fn dataset() -> impl Strategy<Value = Dataset> {
    (1usize..4).prop_flat_map(|d| {
        prop::collection::vec(
            (prop::collection::vec(-3i32..=3, d), any::<bool>(), 1u64..4),
            2..12,
        )
        .prop_map(|rows| {
            let examples = rows
                .into_iter()
                .map(|(x, positive, weight)| {
                    let raw: Vec<f64> = x.into_iter().map(f64::from).collect();
                    let label = if positive { Label::Positive } else { Label::Negative };
                    Example::from_raw(&raw, label).with_weight(weight).unwrap()
                })
                .collect();
            Dataset::new(examples).unwrap()
        })
    })
}

fn raw_vector(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-4i32..=4, d + 1).prop_map(|v| v.into_iter().map(f64::from).collect())
}

fn data_and_classifiers() -> impl Strategy<Value = (Dataset, Vec<f64>, Vec<f64>, Vec<f64>)> {
    dataset().prop_flat_map(|data| {
        let d = data.dim();
        (Just(data), raw_vector(d), raw_vector(d), raw_vector(d))
    })
}

proptest! {
    #[test]
    fn predictions_ignore_positive_scaling((data, a, _, _) in data_and_classifiers(), exponent in -20i32..20) {
        let h = LinearClassifier::from_raw(&a).unwrap();
        let scaled: Vec<f64> = a.iter().map(|c| c * 2f64.powi(exponent)).collect();
        let g = LinearClassifier::from_raw(&scaled).unwrap();
        prop_assert_eq!(h.predictions(&data).unwrap(), g.predictions(&data).unwrap());
    }

    #[test]
    fn conflicts_are_a_metric((data, a, b, c) in data_and_classifiers()) {
        let h = [a, b, c].map(|v| LinearClassifier::from_raw(&v).unwrap());
        let k = |i: usize, j: usize| conflict_count(&h[i], &h[j], &data).unwrap().conflicts;
        prop_assert_eq!(k(0, 0), 0);
        prop_assert_eq!(k(0, 1), k(1, 0));
        prop_assert!(k(0, 2) <= k(0, 1) + k(1, 2));
        let base = empirical_risk(&h[0], &data).unwrap().mistakes;
        let other = empirical_risk(&h[1], &data).unwrap().mistakes;
        prop_assert!(base.abs_diff(other) <= k(0, 1));
    }

    #[test]
    fn conflicting_pairs_cost_exactly_one_mistake((data, a, _, _) in data_and_classifiers()) {
        let h = LinearClassifier::from_raw(&a).unwrap();
        let p = h.predictions(&data).unwrap();
        for &(i, j) in data.conflict_pairs() {
            let ex = data.examples();
            let wrong = u8::from(p[i] != ex[i].label()) + u8::from(p[j] != ex[j].label());
            prop_assert_eq!(wrong, 1);
        }
    }
}
