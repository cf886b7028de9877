#![allow(dead_code)]

use predmult::{Dataset, Example, Label};
use predmult_oracles::arrangement::CubePoint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random dataset with binary features, 2..=max_n points and d in 1..=max_d.
pub fn random_binary_dataset(seed: u64, max_n: usize, max_d: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.random_range(1..=max_d);
    let n = rng.random_range(2..=max_n);
    let mut examples = Vec::with_capacity(n);
    for _ in 0..n {
        let raw: Vec<f64> = (0..d).map(|_| rng.random_range(0..2) as f64).collect();
        let label = if rng.random_bool(0.5) {
            Label::Positive
        } else {
            Label::Negative
        };
        examples.push(Example::from_raw(&raw, label));
    }
    Dataset::new(examples).unwrap()
}

pub fn vertex_of(example: &Example) -> usize {
    example.features()[1..]
        .iter()
        .enumerate()
        .map(|(j, &v)| (v as usize) << j)
        .sum()
}

pub fn cube_points(data: &Dataset) -> Vec<CubePoint> {
    data.examples()
        .iter()
        .map(|e| CubePoint {
            vertex: vertex_of(e),
            label: e.label().sign() as i8,
            weight: e.weight(),
        })
        .collect()
}
