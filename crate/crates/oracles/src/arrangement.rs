//! Exhaustive enumeration of linear dichotomies on `{0,1}^d`.
//!
//! Each point `x` of the cube induces the hyperplane `{w : w . (1, x) = 0}` in
//! weight space; the cells of that arrangement are exactly the strict linear
//! labelings of the cube. Cells are reached by sweeping an integer lattice of
//! weights with half-integer intercepts, which never lands on a cell wall.
//! The sweep is checked against the known number of threshold functions, so
//! an undersized lattice fails loudly instead of silently missing cells.

use std::collections::BTreeSet;

/// Number of linearly separable Boolean functions of `d` variables.
pub const THRESHOLD_FUNCTION_COUNTS: [usize; 5] = [2, 4, 14, 104, 1882];

/// All strict linear labelings of the `2^d` cube vertices, as bitmasks where
/// bit `v` set means vertex `v` is labeled +1. Vertex `v` has feature `j`
/// equal to `(v >> j) & 1`.
pub fn cube_dichotomies(d: usize) -> Vec<u32> {
    assert!(d <= 4, "cube enumeration supports d <= 4");
    let radius: i64 = if d <= 3 { 3 } else { 5 };
    let span = radius * d as i64 + 1;
    let vertices = 1usize << d;
    let mut seen = BTreeSet::new();
    let mut weights = vec![-radius; d];
    loop {
        for t in -span..=span {
            // Intercept t + 1/2, scaled by 2 to stay in integers.
            let mut mask = 0u32;
            for v in 0..vertices {
                let mut s = 2 * t + 1;
                for (j, w) in weights.iter().enumerate() {
                    if (v >> j) & 1 == 1 {
                        s += 2 * w;
                    }
                }
                if s > 0 {
                    mask |= 1 << v;
                }
            }
            seen.insert(mask);
        }
        // Odometer over the weight lattice.
        let mut k = 0;
        loop {
            if k == d {
                let out: Vec<u32> = seen.into_iter().collect();
                assert_eq!(
                    out.len(),
                    THRESHOLD_FUNCTION_COUNTS[d],
                    "lattice sweep missed arrangement cells"
                );
                return out;
            }
            weights[k] += 1;
            if weights[k] > radius {
                weights[k] = -radius;
                k += 1;
            } else {
                break;
            }
        }
    }
}

/// One weighted training point sitting on a cube vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CubePoint {
    pub vertex: usize,
    /// +1 or -1.
    pub label: i8,
    pub weight: u64,
}

fn label_at(mask: u32, vertex: usize) -> i8 {
    if (mask >> vertex) & 1 == 1 {
        1
    } else {
        -1
    }
}

pub struct CubeOracle {
    masks: Vec<u32>,
}

impl CubeOracle {
    pub fn new(d: usize) -> Self {
        CubeOracle {
            masks: cube_dichotomies(d),
        }
    }

    pub fn dichotomies(&self) -> &[u32] {
        &self.masks
    }

    pub fn mistakes(mask: u32, points: &[CubePoint]) -> u64 {
        points
            .iter()
            .filter(|p| label_at(mask, p.vertex) != p.label)
            .map(|p| p.weight)
            .sum()
    }

    pub fn min_mistakes(&self, points: &[CubePoint]) -> u64 {
        self.masks
            .iter()
            .map(|&m| Self::mistakes(m, points))
            .min()
            .expect("at least the constant labelings exist")
    }

    /// Fewest mistakes among labelings that give `vertex` the label opposite
    /// to `base_label`.
    pub fn min_mistakes_flipping(&self, points: &[CubePoint], vertex: usize, base_label: i8) -> u64 {
        self.masks
            .iter()
            .filter(|&&m| label_at(m, vertex) != base_label)
            .map(|&m| Self::mistakes(m, points))
            .min()
            .expect("a constant labeling always flips a vertex")
    }

    /// Largest weighted disagreement with `base` (one label per point) among
    /// labelings making at most `allowed_mistakes` mistakes.
    pub fn max_disagreement(&self, points: &[CubePoint], base: &[i8], allowed_mistakes: u64) -> u64 {
        self.masks
            .iter()
            .filter(|&&m| Self::mistakes(m, points) <= allowed_mistakes)
            .map(|&m| {
                points
                    .iter()
                    .zip(base)
                    .filter(|(p, &b)| label_at(m, p.vertex) != b)
                    .map(|(p, _)| p.weight)
                    .sum()
            })
            .max()
            .unwrap_or(0)
    }

    /// Weighted ambiguity count: points whose flip costs at most
    /// `allowed_mistakes` mistakes.
    pub fn ambiguous_weight(&self, points: &[CubePoint], base: &[i8], allowed_mistakes: u64) -> u64 {
        points
            .iter()
            .zip(base)
            .filter(|(p, &b)| self.min_mistakes_flipping(points, p.vertex, b) <= allowed_mistakes)
            .map(|(p, _)| p.weight)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_threshold_function_table() {
        for d in 0..=4 {
            assert_eq!(cube_dichotomies(d).len(), THRESHOLD_FUNCTION_COUNTS[d]);
        }
    }

    #[test]
    fn xor_cells_cost_one_cell() {
        let oracle = CubeOracle::new(2);
        // Vertex v = x1 + 2 x2; XOR labels.
        let points: Vec<CubePoint> = [(0, -1), (1, 1), (2, 1), (3, -1)]
            .iter()
            .map(|&(vertex, label)| CubePoint {
                vertex,
                label,
                weight: 25,
            })
            .collect();
        assert_eq!(oracle.min_mistakes(&points), 25);
    }
}
