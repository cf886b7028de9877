mod common;

use common::{cube_points, random_binary_dataset, vertex_of};
use predmult::bnb::{solve, Budget, SolveOptions, SolveStatus};
use predmult::formulation::{
    build_baseline_mip, build_disc_mip_with_allowance, build_flip_mip, decode_classifier,
    FormulationParams,
};
use predmult::{empirical_risk, Dataset};
use predmult_oracles::arrangement::CubeOracle;

fn certified(model: &predmult::bnb::MipModel) -> predmult::bnb::SolveResult {
    let r = solve(model, Budget::unlimited(), &SolveOptions::default()).unwrap();
    assert_eq!(r.status, SolveStatus::CertifiedOptimal);
    r
}

fn check_instance(data: &Dataset) {
    let params = FormulationParams::default();
    let oracle = CubeOracle::new(data.dim());
    let points = cube_points(data);
    let baseline = build_baseline_mip(data, &params).unwrap();
    let r = certified(&baseline);
    assert_eq!(r.upper_bound as u64, oracle.min_mistakes(&points));
    let h0 = decode_classifier(&baseline, r.incumbent.as_ref().unwrap()).unwrap();
    let base = empirical_risk(&h0, data).unwrap();
    assert_eq!(base.mistakes as f64, r.upper_bound);

    let preds: Vec<i8> = h0
        .predictions(data)
        .unwrap()
        .iter()
        .map(|l| l.sign() as i8)
        .collect();
    for k in 0..data.len() {
        let model = build_flip_mip(data, &h0, k, &params).unwrap();
        let r = certified(&model);
        let expected =
            oracle.min_mistakes_flipping(&points, vertex_of(&data.examples()[k]), preds[k]);
        assert_eq!(r.upper_bound as u64, expected, "flip {k}");
    }
    for extra in 0..=2u64 {
        let model = build_disc_mip_with_allowance(data, &h0, extra, &params).unwrap();
        let r = certified(&model);
        let n = data.total_weight();
        let best = oracle.max_disagreement(&points, &preds, base.mistakes + extra);
        assert_eq!(r.upper_bound as u64, n - best, "disc +{extra}");
    }
}

#[test]
fn raw_random_datasets_match_arrangement_oracle() {
    for seed in 0..40 {
        check_instance(&random_binary_dataset(seed, 24, 3));
    }
}

#[test]
fn merged_random_datasets_match_arrangement_oracle() {
    for seed in 100..200 {
        let (merged, _) = random_binary_dataset(seed, 24, 3).merge_duplicates();
        check_instance(&merged);
    }
}

fn nested_intervals(model: &predmult::bnb::MipModel, optimum: f64) {
    let mut previous: Option<(f64, f64)> = None;
    for limit in [0, 1, 2, 3, 5, 8, 13, 21, 34, 55] {
        let r = solve(model, Budget::nodes(limit), &SolveOptions::default()).unwrap();
        let lower = (r.lower_bound - 1e-6).ceil();
        let upper = r.upper_bound;
        assert!(lower <= optimum && optimum <= upper, "{limit}: [{lower}, {upper}] vs {optimum}");
        if let Some((pl, pu)) = previous {
            assert!(lower >= pl && upper <= pu, "{limit}: [{pl}, {pu}] -> [{lower}, {upper}]");
        }
        previous = Some((lower, upper));
    }
}

#[test]
fn truncated_solves_give_nested_intervals() {
    let params = FormulationParams::default();
    for seed in 600..640 {
        let data = random_binary_dataset(seed, 24, 3);
        let baseline = build_baseline_mip(&data, &params).unwrap();
        let r = certified(&baseline);
        nested_intervals(&baseline, r.upper_bound);
        let h0 = decode_classifier(&baseline, r.incumbent.as_ref().unwrap()).unwrap();
        for k in 0..data.len() {
            let model = build_flip_mip(&data, &h0, k, &params).unwrap();
            nested_intervals(&model, certified(&model).upper_bound);
        }
        for extra in 0..=2 {
            let model = build_disc_mip_with_allowance(&data, &h0, extra, &params).unwrap();
            nested_intervals(&model, certified(&model).upper_bound);
        }
    }
}
