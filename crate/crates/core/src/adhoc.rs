//! Pool of elastic-net logistic regression models and the multiplicity
//! estimates they give.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{conflict_count, empirical_risk, Dataset, Label, LinearClassifier, RiskReport};
use crate::error::{Error, Result};
use crate::path::{EpsilonGrid, MeasureValue, MultiplicityProfile};

pub const CONVERGENCE_TOLERANCE: f64 = 1e-7;
pub const MAX_SWEEPS: usize = 10_000;
pub const CV_FOLDS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenaltyGrid {
    /// l1 fractions in `[0, 1]`.
    pub alphas: Vec<f64>,
    pub lambdas_per_alpha: usize,
    /// Smallest lambda as a fraction of lambda_max.
    pub lambda_ratio: f64,
}

impl Default for PenaltyGrid {
    fn default() -> Self {
        PenaltyGrid {
            alphas: (0..=10).map(|k| k as f64 / 10.0).collect(),
            lambdas_per_alpha: 100,
            lambda_ratio: 1e-4,
        }
    }
}

impl PenaltyGrid {
    pub fn len(&self) -> usize {
        self.alphas.len() * self.lambdas_per_alpha
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.lambdas_per_alpha == 0 {
            return Err(Error::InvalidPenaltyGrid("grid is empty".into()));
        }
        if self.alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::InvalidPenaltyGrid("alphas must lie in [0, 1]".into()));
        }
        if !(self.lambda_ratio > 0.0 && self.lambda_ratio <= 1.0) {
            return Err(Error::InvalidPenaltyGrid("lambda ratio must lie in (0, 1]".into()));
        }
        Ok(())
    }

    /// Geometric sequence from `lambda_max` down to `lambda_max * ratio`.
    pub fn lambdas(&self, lambda_max: f64) -> Vec<f64> {
        let k = self.lambdas_per_alpha;
        if k == 1 {
            return vec![lambda_max];
        }
        (0..k)
            .map(|i| lambda_max * self.lambda_ratio.powf(i as f64 / (k - 1) as f64))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoolModel {
    pub alpha: f64,
    pub lambda: f64,
    /// Fitted coefficients, intercept first.
    pub raw_coefficients: Vec<f64>,
    pub classifier: LinearClassifier,
    pub train_risk: RiskReport,
    /// Mean 0-1 error over the held-out folds.
    pub cv_risk: f64,
    pub converged: bool,
}

/// Weighted logistic-loss problem in a column-friendly layout.
struct Problem<'a> {
    x: Vec<&'a [f64]>,
    t: Vec<f64>,
    dim: usize,
}

impl<'a> Problem<'a> {
    fn new(data: &'a Dataset) -> Self {
        Problem {
            x: data.examples().iter().map(|e| e.features()).collect(),
            t: data
                .examples()
                .iter()
                .map(|e| if e.label() == Label::Positive { 1.0 } else { 0.0 })
                .collect(),
            dim: data.dim() + 1,
        }
    }

    fn sigmoid(z: f64) -> f64 {
        if z >= 0.0 {
            1.0 / (1.0 + (-z).exp())
        } else {
            let e = z.exp();
            e / (1.0 + e)
        }
    }

    /// Gradient of the weighted mean log-loss at `beta`.
    fn gradient(&self, v: &[f64], beta: &[f64]) -> Vec<f64> {
        let total: f64 = v.iter().sum();
        let mut g = vec![0.0; self.dim];
        for (i, x) in self.x.iter().enumerate() {
            if v[i] == 0.0 {
                continue;
            }
            let eta: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum();
            let r = v[i] * (Self::sigmoid(eta) - self.t[i]) / total;
            for (gj, xj) in g.iter_mut().zip(x.iter()) {
                *gj += r * xj;
            }
        }
        g
    }

    /// Intercept-only fit.
    fn null_model(&self, v: &[f64]) -> Vec<f64> {
        let total: f64 = v.iter().sum();
        let pos: f64 = v.iter().zip(&self.t).map(|(a, b)| a * b).sum();
        let p = (pos / total).clamp(1e-12, 1.0 - 1e-12);
        let mut beta = vec![0.0; self.dim];
        beta[0] = (p / (1.0 - p)).ln();
        beta
    }

    /// Smallest lambda whose solution has all penalized coefficients at zero.
    fn lambda_max(&self, v: &[f64], alpha: f64) -> f64 {
        let g = self.gradient(v, &self.null_model(v));
        let max = g[1..].iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        max / alpha.max(1e-3)
    }

    /// Cyclic coordinate descent with quadratic majorization
    /// (curvature bound `x^2 / 4` per example). Returns convergence.
    fn fit(&self, v: &[f64], alpha: f64, lambda: f64, beta: &mut [f64]) -> bool {
        let total: f64 = v.iter().sum();
        let lipschitz: Vec<f64> = (0..self.dim)
            .map(|j| {
                self.x
                    .iter()
                    .zip(v)
                    .map(|(x, w)| w * x[j] * x[j])
                    .sum::<f64>()
                    / (4.0 * total)
            })
            .collect();
        let mut eta: Vec<f64> = self
            .x
            .iter()
            .map(|x| x.iter().zip(beta.iter()).map(|(a, b)| a * b).sum())
            .collect();
        for _ in 0..MAX_SWEEPS {
            let mut max_change: f64 = 0.0;
            for j in 0..self.dim {
                if lipschitz[j] == 0.0 {
                    continue;
                }
                let mut g = 0.0;
                for (i, x) in self.x.iter().enumerate() {
                    if v[i] != 0.0 && x[j] != 0.0 {
                        g += v[i] * (Self::sigmoid(eta[i]) - self.t[i]) * x[j];
                    }
                }
                g /= total;
                let z = lipschitz[j] * beta[j] - g;
                let updated = if j == 0 {
                    z / lipschitz[j]
                } else {
                    soft_threshold(z, lambda * alpha) / (lipschitz[j] + lambda * (1.0 - alpha))
                };
                let delta = updated - beta[j];
                if delta != 0.0 {
                    for (e, x) in eta.iter_mut().zip(&self.x) {
                        *e += delta * x[j];
                    }
                    beta[j] = updated;
                    max_change = max_change.max(delta.abs());
                }
            }
            if max_change < CONVERGENCE_TOLERANCE {
                return true;
            }
        }
        false
    }
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Solution path for one alpha: `(lambda, coefficients, converged)` for
/// each lambda, warm-started along decreasing lambda.
fn fit_path(
    problem: &Problem,
    v: &[f64],
    alpha: f64,
    lambdas: &[f64],
) -> Vec<(f64, Vec<f64>, bool)> {
    let mut beta = problem.null_model(v);
    lambdas
        .iter()
        .map(|&lambda| {
            let converged = problem.fit(v, alpha, lambda, &mut beta);
            (lambda, beta.clone(), converged)
        })
        .collect()
}

/// Elastic-net logistic regression fitted by coordinate descent at one
/// `(alpha, lambda)` from a cold start. Intercept first, unpenalized.
pub fn fit_elastic_net(data: &Dataset, alpha: f64, lambda: f64) -> (Vec<f64>, bool) {
    let problem = Problem::new(data);
    let v: Vec<f64> = data.examples().iter().map(|e| e.weight() as f64).collect();
    let mut beta = problem.null_model(&v);
    let converged = problem.fit(&v, alpha, lambda, &mut beta);
    (beta, converged)
}

/// `lambda_max` for `data` at mixing value `alpha`.
pub fn lambda_max(data: &Dataset, alpha: f64) -> f64 {
    let problem = Problem::new(data);
    let v: Vec<f64> = data.examples().iter().map(|e| e.weight() as f64).collect();
    problem.lambda_max(&v, alpha)
}

/// Per-fold example weights: every weight unit is dealt to a fold after a
/// seeded shuffle, so weighted examples may straddle folds.
fn fold_weights(data: &Dataset, seed: u64) -> Vec<Vec<f64>> {
    let mut units: Vec<usize> = data
        .examples()
        .iter()
        .enumerate()
        .flat_map(|(i, e)| std::iter::repeat_n(i, e.weight() as usize))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    units.shuffle(&mut rng);
    let mut folds = vec![vec![0.0; data.len()]; CV_FOLDS];
    for (k, &i) in units.iter().enumerate() {
        folds[k % CV_FOLDS][i] += 1.0;
    }
    folds
}

fn weighted_error(problem: &Problem, v: &[f64], beta: &[f64]) -> f64 {
    let (mut wrong, mut total) = (0.0, 0.0);
    for (i, x) in problem.x.iter().enumerate() {
        if v[i] == 0.0 {
            continue;
        }
        let eta: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum();
        let predicted = if eta > 0.0 { 1.0 } else { 0.0 };
        total += v[i];
        if predicted != problem.t[i] {
            wrong += v[i];
        }
    }
    if total == 0.0 {
        0.0
    } else {
        wrong / total
    }
}

/// Fits every `(alpha, lambda)` of the grid on the full data and scores it by
/// `CV_FOLDS`-fold cross-validated 0-1 error. Output is ordered by alpha,
/// then by decreasing lambda.
pub fn fit_pool(data: &Dataset, grid: &PenaltyGrid, seed: u64) -> Result<Vec<PoolModel>> {
    grid.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let problem = Problem::new(data);
    let full: Vec<f64> = data.examples().iter().map(|e| e.weight() as f64).collect();
    let held_out = fold_weights(data, seed);
    let training: Vec<Vec<f64>> = held_out
        .iter()
        .map(|fold| full.iter().zip(fold).map(|(a, b)| a - b).collect())
        .collect();

    let per_alpha: Vec<Result<Vec<PoolModel>>> = grid
        .alphas
        .par_iter()
        .map(|&alpha| {
            let lambdas = grid.lambdas(problem.lambda_max(&full, alpha));
            let path = fit_path(&problem, &full, alpha, &lambdas);
            let mut cv = vec![0.0; lambdas.len()];
            for (train, test) in training.iter().zip(&held_out) {
                if train.iter().all(|&w| w == 0.0) || test.iter().all(|&w| w == 0.0) {
                    continue;
                }
                for (k, (_, beta, _)) in fit_path(&problem, train, alpha, &lambdas).iter().enumerate() {
                    cv[k] += weighted_error(&problem, test, beta) / CV_FOLDS as f64;
                }
            }
            path.into_iter()
                .zip(cv)
                .map(|((lambda, beta, converged), cv_risk)| {
                    if !converged {
                        log::warn!("elastic net did not converge at alpha {alpha}, lambda {lambda}");
                    }
                    let classifier = LinearClassifier::from_raw(&beta)?;
                    let train_risk = empirical_risk(&classifier, data)?;
                    Ok(PoolModel {
                        alpha,
                        lambda,
                        raw_coefficients: beta,
                        classifier,
                        train_risk,
                        cv_risk,
                        converged,
                    })
                })
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(grid.len());
    for models in per_alpha {
        out.extend(models?);
    }
    Ok(out)
}

/// Index of the model with the smallest CV error; ties go to the larger
/// lambda, then the larger alpha.
pub fn select_baseline(pool: &[PoolModel]) -> Option<usize> {
    (0..pool.len()).min_by(|&a, &b| {
        let (x, y) = (&pool[a], &pool[b]);
        x.cv_risk
            .total_cmp(&y.cv_risk)
            .then(y.lambda.total_cmp(&x.lambda))
            .then(y.alpha.total_cmp(&x.alpha))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdhocResult {
    pub baseline: LinearClassifier,
    /// Position of the baseline in the pool, when it was chosen from it.
    pub baseline_index: Option<usize>,
    pub profile: MultiplicityProfile,
}

/// Estimates against the pool's own CV-selected baseline.
pub fn adhoc_measures(pool: &[PoolModel], data: &Dataset, grid: &EpsilonGrid) -> Result<AdhocResult> {
    let index = select_baseline(pool).ok_or(Error::EmptyCandidates)?;
    let mut result = adhoc_measures_with_baseline(pool, data, grid, &pool[index].classifier)?;
    result.baseline_index = Some(index);
    Ok(result)
}

/// Estimates against a supplied baseline. Every counted model lies in the
/// baseline's level set, so the values are lower bounds on the exact ones;
/// they are never marked certified.
pub fn adhoc_measures_with_baseline(
    pool: &[PoolModel],
    data: &Dataset,
    grid: &EpsilonGrid,
    baseline: &LinearClassifier,
) -> Result<AdhocResult> {
    let n = data.total_weight();
    if grid.n() != n {
        return Err(Error::InvalidGrid(format!("grid is for n = {}, data has {n}", grid.n())));
    }
    let base = empirical_risk(baseline, data)?.mistakes;
    let base_predictions = baseline.predictions(data)?;
    let mut scored = Vec::with_capacity(pool.len());
    for m in pool {
        let mistakes = empirical_risk(&m.classifier, data)?.mistakes;
        let flips: Vec<bool> = m
            .classifier
            .predictions(data)?
            .iter()
            .zip(&base_predictions)
            .map(|(a, b)| a != b)
            .collect();
        let conflicts = conflict_count(&m.classifier, baseline, data)?.conflicts;
        scored.push((mistakes, flips, conflicts));
    }
    let mut profile = MultiplicityProfile::new(grid, base);
    for entry in profile.entries.iter_mut() {
        let allowed = base + entry.allowance;
        let mut flipped = vec![false; data.len()];
        let mut best: Option<(u64, usize)> = None;
        for (k, (mistakes, flips, conflicts)) in scored.iter().enumerate() {
            if *mistakes > allowed {
                continue;
            }
            for (f, &x) in flipped.iter_mut().zip(flips) {
                *f |= x;
            }
            if best.is_none_or(|(c, _)| *conflicts > c) {
                best = Some((*conflicts, k));
            }
        }
        let ambiguous: u64 = data
            .examples()
            .iter()
            .zip(&flipped)
            .filter(|(_, &f)| f)
            .map(|(e, _)| e.weight())
            .sum();
        entry.ambiguity = Some(MeasureValue::estimate(ambiguous, n));
        entry.discrepancy = Some(MeasureValue::estimate(best.map_or(0, |b| b.0), n));
        if let Some((_, k)) = best {
            entry.witness = Some(pool[k].classifier.clone());
            entry.witness_mistakes = Some(scored[k].0);
        }
    }
    Ok(AdhocResult {
        baseline: baseline.clone(),
        baseline_index: None,
        profile,
    })
}
