//! Discrepancy and ambiguity over a grid of level sets.
//!
//! All level-set tests are done on integer mistake counts: the epsilon-level
//! set of a baseline with `m0` mistakes on `n` points holds the classifiers
//! with at most `m0 + floor(epsilon * n)` mistakes.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use rayon::prelude::*;
use serde::Serialize;

use crate::bnb::{check_feasible, solve, Budget, IncumbentEvent, SolveOptions, SolveResult, SolveStatus};
use crate::data::{conflict_count, empirical_risk, feature_key, Dataset, LinearClassifier};
use crate::error::{Error, Result};
use crate::formulation::{
    build_baseline_mip, build_disc_mip_with_allowance, build_flip_mip, decode_classifier,
    encode_disc, encode_flip, level_set_allowance, FormulationParams,
};

/// Flip solves are committed in waves of this many feature vectors; every
/// solve in a wave sees the pool as it stood before the wave.
pub const WAVE_SIZE: usize = 8;

/// Ascending epsilon values, each tied to its extra-mistake allowance
/// `floor(epsilon * n)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonGrid {
    n: u64,
    values: Vec<f64>,
    allowances: Vec<u64>,
}

impl EpsilonGrid {
    pub fn new(n: u64, values: &[f64]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGrid("n must be positive".into()));
        }
        if values.is_empty() {
            return Err(Error::InvalidGrid("grid is empty".into()));
        }
        let mut allowances = Vec::with_capacity(values.len());
        for (k, &v) in values.iter().enumerate() {
            if k > 0 && !(v > values[k - 1]) {
                return Err(Error::InvalidGrid(format!(
                    "values must be strictly increasing ({} then {v})",
                    values[k - 1]
                )));
            }
            allowances.push(level_set_allowance(v, n)?.min(n));
        }
        Ok(EpsilonGrid {
            n,
            values: values.to_vec(),
            allowances,
        })
    }

    /// The grid `{0, 1/n, ..., K/n}`.
    pub fn multiples(n: u64, max_steps: u64) -> Result<Self> {
        let values: Vec<f64> = (0..=max_steps).map(|k| k as f64 / n as f64).collect();
        Self::new(n, &values)
    }

    /// Multiples of `1/n` from 0 up to `min(0.1, 2 * baseline risk)`, plus
    /// the 1% level set.
    pub fn default_for(n: u64, baseline_mistakes: u64) -> Result<Self> {
        let cap = (n / 10).min(2 * baseline_mistakes);
        let mut values: Vec<f64> = (0..=cap).map(|k| k as f64 / n as f64).collect();
        let one_percent = level_set_allowance(0.01, n)?;
        if one_percent > cap {
            values.push(one_percent as f64 / n as f64);
        }
        Self::new(n, &values)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn allowances(&self) -> &[u64] {
        &self.allowances
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A proportion known to lie in `[lower / n, upper / n]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MeasureValue {
    pub lower_count: u64,
    pub upper_count: u64,
    pub n: u64,
    pub certified: bool,
}

impl MeasureValue {
    pub fn exact(count: u64, n: u64) -> Self {
        MeasureValue {
            lower_count: count,
            upper_count: count,
            n,
            certified: true,
        }
    }

    pub fn interval(lower: u64, upper: u64, n: u64) -> Self {
        let upper = upper.min(n);
        let lower = lower.min(upper);
        MeasureValue {
            lower_count: lower,
            upper_count: upper,
            n,
            certified: lower == upper,
        }
    }

    /// A point estimate that is not a certified value.
    pub fn estimate(count: u64, n: u64) -> Self {
        MeasureValue {
            lower_count: count.min(n),
            upper_count: count.min(n),
            n,
            certified: false,
        }
    }

    pub fn lower(&self) -> Ratio<u64> {
        Ratio::new(self.lower_count, self.n)
    }

    pub fn upper(&self) -> Ratio<u64> {
        Ratio::new(self.upper_count, self.n)
    }

    pub fn lower_f64(&self) -> f64 {
        self.lower_count as f64 / self.n as f64
    }

    pub fn upper_f64(&self) -> f64 {
        self.upper_count as f64 / self.n as f64
    }

    pub fn width(&self) -> u64 {
        self.upper_count - self.lower_count
    }

    pub fn contains(&self, count: u64) -> bool {
        self.lower_count <= count && count <= self.upper_count
    }
}

/// Summary of one branch-and-bound run, for manifests and debugging.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveStats {
    pub label: String,
    pub status: SolveStatus,
    pub upper_bound: f64,
    pub lower_bound: f64,
    pub nodes: usize,
    pub wall_ms: u128,
    /// Incumbent improvements, in order.
    #[serde(skip)]
    pub log: Vec<IncumbentEvent>,
}

impl SolveStats {
    fn of(label: String, r: &SolveResult) -> Self {
        SolveStats {
            label,
            status: r.status,
            upper_bound: r.upper_bound,
            lower_bound: r.lower_bound,
            nodes: r.nodes_explored,
            wall_ms: r.wall_time.as_millis(),
            log: r.log.clone(),
        }
    }
}

/// Budget for a sequence of solves: a per-solve budget plus an optional
/// deadline for the whole sequence.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PathBudget {
    pub per_solve: Budget,
    pub total_time: Option<Duration>,
}

impl PathBudget {
    pub fn nodes(limit: usize) -> Self {
        PathBudget {
            per_solve: Budget::nodes(limit),
            total_time: None,
        }
    }

    pub fn unlimited() -> Self {
        PathBudget::default()
    }

    fn for_solve(&self, started: Instant) -> Budget {
        let mut b = self.per_solve;
        if let Some(total) = self.total_time {
            let left = total.saturating_sub(started.elapsed());
            b.time_limit = Some(b.time_limit.map_or(left, |t| t.min(left)));
        }
        b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineFit {
    pub classifier: LinearClassifier,
    pub mistakes: u64,
    pub n: u64,
    pub certified: bool,
    /// Global lower bound on the optimal mistake count.
    pub lower_bound: u64,
    pub stats: SolveStats,
}

/// Solves the baseline model and decodes the 0-1 loss minimizer.
pub fn fit_baseline(data: &Dataset, params: &FormulationParams, budget: Budget) -> Result<BaselineFit> {
    let (merged, _) = data.without_groups().merge_duplicates();
    let model = build_baseline_mip(&merged, params)?;
    let r = solve(&model, budget, &SolveOptions::default())?;
    let Some(incumbent) = &r.incumbent else {
        return Err(Error::Internal(format!(
            "baseline solve ended without a classifier ({:?})",
            r.status
        )));
    };
    let classifier = decode_classifier(&model, incumbent)?;
    let risk = empirical_risk(&classifier, data)?;
    if r.is_certified() && clears_margin(&classifier, data, params.gamma)? && risk.mistakes as f64 != r.upper_bound {
        return Err(Error::Invariant(format!(
            "decoded baseline makes {} mistakes but the model reports {}",
            risk.mistakes, r.upper_bound
        )));
    }
    Ok(BaselineFit {
        classifier,
        mistakes: risk.mistakes,
        n: risk.n,
        certified: r.is_certified(),
        lower_bound: ceil_count(r.lower_bound),
        stats: SolveStats::of("baseline".into(), &r),
    })
}

fn clears_margin(h: &LinearClassifier, data: &Dataset, gamma: f64) -> Result<bool> {
    let margin = h.min_abs_score(data)?;
    if margin < gamma - 1e-9 {
        log::warn!("classifier margin {margin} is below gamma {gamma}");
        return Ok(false);
    }
    Ok(true)
}

fn ceil_count(bound: f64) -> u64 {
    if bound.is_finite() {
        (bound - 1e-6).ceil().max(0.0) as u64
    } else if bound > 0.0 {
        u64::MAX
    } else {
        0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileEntry {
    pub epsilon: f64,
    pub allowance: u64,
    pub discrepancy: Option<MeasureValue>,
    pub ambiguity: Option<MeasureValue>,
    /// Discrepancy maximizer found for this level set.
    pub witness: Option<LinearClassifier>,
    pub witness_mistakes: Option<u64>,
    /// Whether the witness was certified optimal by its solve.
    pub witness_certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplicityProfile {
    pub n: u64,
    pub baseline_mistakes: u64,
    pub entries: Vec<ProfileEntry>,
}

impl MultiplicityProfile {
    pub fn new(grid: &EpsilonGrid, baseline_mistakes: u64) -> Self {
        MultiplicityProfile {
            n: grid.n(),
            baseline_mistakes,
            entries: grid
                .values()
                .iter()
                .zip(grid.allowances())
                .map(|(&epsilon, &allowance)| ProfileEntry {
                    epsilon,
                    allowance,
                    discrepancy: None,
                    ambiguity: None,
                    witness: None,
                    witness_mistakes: None,
                    witness_certified: false,
                })
                .collect(),
        }
    }

    pub fn baseline_risk(&self) -> Ratio<u64> {
        Ratio::new(self.baseline_mistakes, self.n)
    }

    pub fn witnesses(&self) -> Vec<LinearClassifier> {
        self.entries.iter().filter_map(|e| e.witness.clone()).collect()
    }

    pub fn set_ambiguity(&mut self, values: &[MeasureValue]) -> Result<()> {
        if values.len() != self.entries.len() {
            return Err(Error::InvalidGrid("ambiguity values do not match the grid".into()));
        }
        for (e, v) in self.entries.iter_mut().zip(values) {
            e.ambiguity = Some(*v);
        }
        Ok(())
    }
}

/// Discrepancy path plus per-solve statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscrepancyRun {
    pub profile: MultiplicityProfile,
    pub stats: Vec<SolveStats>,
}

/// Maximum conflicts with `h0` over each level set of the grid, each solve
/// warm-started with the previous witness.
pub fn discrepancy_path(
    data: &Dataset,
    h0: &LinearClassifier,
    grid: &EpsilonGrid,
    budget: PathBudget,
    params: &FormulationParams,
) -> Result<DiscrepancyRun> {
    let n = data.total_weight();
    if grid.n() != n {
        return Err(Error::InvalidGrid(format!("grid is for n = {}, data has {n}", grid.n())));
    }
    let (merged, _) = data.without_groups().merge_duplicates();
    let base = empirical_risk(h0, data)?.mistakes;
    let mut profile = MultiplicityProfile::new(grid, base);
    let mut stats = Vec::with_capacity(grid.len());
    let started = Instant::now();
    let mut previous: LinearClassifier = h0.clone();

    for (k, &allowance) in grid.allowances().iter().enumerate() {
        let model = build_disc_mip_with_allowance(&merged, h0, allowance, params)?;
        let warm_start = encode_disc(&merged, h0, &previous, params.gamma)
            .filter(|a| check_feasible(&model, a).feasible);
        let options = SolveOptions {
            warm_start,
            lower_bound_hint: None,
        };
        let r = solve(&model, budget.for_solve(started), &options)?;
        stats.push(SolveStats::of(format!("disc[{k}]"), &r));
        if r.status == SolveStatus::Infeasible {
            return Err(Error::Internal(format!(
                "discrepancy model infeasible at allowance {allowance}"
            )));
        }
        // Prop. 1 in counts: conflicts <= mistakes(h) + mistakes(h0).
        let prop1 = 2 * base + allowance;
        let upper = n.saturating_sub(ceil_count(r.lower_bound)).min(prop1);
        let entry = &mut profile.entries[k];
        let value = match &r.incumbent {
            Some(incumbent) => {
                let witness = decode_classifier(&model, incumbent)?;
                let risk = empirical_risk(&witness, data)?.mistakes;
                if risk > base + allowance {
                    return Err(Error::Invariant(format!(
                        "witness at allowance {allowance} makes {risk} mistakes, above {}",
                        base + allowance
                    )));
                }
                let conflicts = conflict_count(&witness, h0, data)?.conflicts;
                let claimed = n - r.upper_bound.round() as u64;
                if conflicts != claimed {
                    return Err(Error::Invariant(format!(
                        "witness conflicts {conflicts} differ from the model's {claimed}"
                    )));
                }
                entry.witness = Some(witness.clone());
                entry.witness_mistakes = Some(risk);
                entry.witness_certified = r.is_certified();
                previous = witness;
                if r.is_certified() {
                    MeasureValue::exact(conflicts, n)
                } else {
                    MeasureValue::interval(conflicts, upper, n)
                }
            }
            None => MeasureValue::interval(0, upper, n),
        };
        entry.discrepancy = Some(value);
    }
    apply_envelope(&mut profile);
    Ok(DiscrepancyRun { profile, stats })
}

/// Tightens discrepancy intervals using monotonicity in epsilon.
fn apply_envelope(profile: &mut MultiplicityProfile) {
    let mut best_lower = 0;
    for e in profile.entries.iter_mut() {
        if let Some(v) = e.discrepancy.as_mut() {
            best_lower = best_lower.max(v.lower_count);
            v.lower_count = best_lower;
        }
    }
    let mut best_upper = u64::MAX;
    for e in profile.entries.iter_mut().rev() {
        if let Some(v) = e.discrepancy.as_mut() {
            best_upper = best_upper.min(v.upper_count);
            v.upper_count = best_upper.max(v.lower_count);
            v.certified = v.lower_count == v.upper_count;
        }
    }
}

/// Most accurate classifier forced to disagree with the baseline at one
/// example.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoolEntry {
    pub index: usize,
    pub classifier: Option<LinearClassifier>,
    /// Bounds on the flipped classifier's mistake count.
    pub risk: MeasureValue,
    pub flip_verified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathologicalPool {
    pub n: u64,
    pub baseline_mistakes: u64,
    pub entries: Vec<PoolEntry>,
}

impl PathologicalPool {
    /// Weighted bounds on the number of points whose flip fits in
    /// `baseline_mistakes + allowance` mistakes, restricted to `members`.
    fn ambiguous_weight(&self, data: &Dataset, allowance: u64, members: impl Fn(usize) -> bool) -> (u64, u64, u64) {
        let threshold = self.baseline_mistakes + allowance;
        let (mut lower, mut upper, mut total) = (0, 0, 0);
        for (e, ex) in self.entries.iter().zip(data.examples()) {
            if !members(e.index) {
                continue;
            }
            total += ex.weight();
            if e.risk.upper_count <= threshold {
                lower += ex.weight();
            }
            if e.risk.lower_count <= threshold {
                upper += ex.weight();
            }
        }
        (lower, upper, total)
    }

    pub fn ambiguity(&self, data: &Dataset, allowance: u64) -> MeasureValue {
        let (lower, upper, total) = self.ambiguous_weight(data, allowance, |_| true);
        MeasureValue::interval(lower, upper, total)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguityRun {
    pub values: Vec<MeasureValue>,
    pub pool: PathologicalPool,
    pub stats: Vec<SolveStats>,
}

struct FlipOutcome {
    classifier: Option<LinearClassifier>,
    mistakes: Option<u64>,
    lower: u64,
    certified: bool,
    stats: SolveStats,
}

/// Per-example flip costs and the resulting ambiguity at every grid point.
///
/// One flip model is solved per distinct feature vector, since every example
/// sharing that vector flips together. `seed_pool` (typically the
/// discrepancy witnesses) provides warm starts.
#[allow(clippy::too_many_arguments)]
pub fn ambiguity_path(
    data: &Dataset,
    h0: &LinearClassifier,
    baseline_certified: bool,
    grid: &EpsilonGrid,
    budget: PathBudget,
    params: &FormulationParams,
    workers: usize,
    seed_pool: &[LinearClassifier],
) -> Result<AmbiguityRun> {
    let n = data.total_weight();
    if grid.n() != n {
        return Err(Error::InvalidGrid(format!("grid is for n = {}, data has {n}", grid.n())));
    }
    let base = empirical_risk(h0, data)?.mistakes;
    let (merged, _) = data.without_groups().merge_duplicates();
    let base_predictions = h0.predictions(data)?;

    // One representative merged example per distinct feature vector.
    let mut rep_of_key: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
    let mut reps: Vec<usize> = Vec::new();
    for (i, ex) in merged.examples().iter().enumerate() {
        rep_of_key.entry(feature_key(ex.features())).or_insert_with(|| {
            reps.push(i);
            reps.len() - 1
        });
    }

    let mut pool: Vec<(LinearClassifier, u64)> = Vec::new();
    for h in seed_pool {
        pool.push((h.clone(), empirical_risk(h, data)?.mistakes));
    }
    let hint = baseline_certified.then_some(base as f64);
    let thread_pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Internal(format!("worker pool: {e}")))?;
    let started = Instant::now();
    let mut outcomes: Vec<FlipOutcome> = Vec::with_capacity(reps.len());

    for wave in reps.chunks(WAVE_SIZE) {
        let snapshot = &pool;
        let results: Vec<Result<FlipOutcome>> = thread_pool.install(|| {
            wave.par_iter()
                .map(|&rep| {
                    flip_one(&merged, data, h0, rep, snapshot, hint, budget.for_solve(started), params)
                })
                .collect()
        });
        for r in results {
            let outcome = r?;
            if let (Some(g), Some(m)) = (&outcome.classifier, outcome.mistakes) {
                pool.push((g.clone(), m));
            }
            outcomes.push(outcome);
        }
    }

    // Any known classifier that flips a point bounds that point's flip cost.
    let mut known_flip = vec![n; data.len()];
    for (g, mistakes) in &pool {
        for (i, p) in g.predictions(data)?.iter().enumerate() {
            if *p != base_predictions[i] {
                known_flip[i] = known_flip[i].min(*mistakes);
            }
        }
    }

    let mut entries = Vec::with_capacity(data.len());
    for (index, ex) in data.examples().iter().enumerate() {
        let slot = rep_of_key[&feature_key(ex.features())];
        let o = &outcomes[slot];
        let flip_verified = match &o.classifier {
            Some(g) => g.predict_features(ex.features())? != base_predictions[index],
            None => false,
        };
        let upper = o.mistakes.unwrap_or(n).min(known_flip[index]);
        let risk = if o.certified {
            MeasureValue::exact(upper, n)
        } else {
            MeasureValue::interval(o.lower, upper, n)
        };
        entries.push(PoolEntry {
            index,
            classifier: o.classifier.clone(),
            risk,
            flip_verified,
        });
    }
    let pool = PathologicalPool {
        n,
        baseline_mistakes: base,
        entries,
    };
    let values = grid
        .allowances()
        .iter()
        .map(|&a| pool.ambiguity(data, a))
        .collect();
    Ok(AmbiguityRun {
        values,
        pool,
        stats: outcomes.into_iter().map(|o| o.stats).collect(),
    })
}

#[allow(clippy::too_many_arguments)]
fn flip_one(
    merged: &Dataset,
    data: &Dataset,
    h0: &LinearClassifier,
    rep: usize,
    pool: &[(LinearClassifier, u64)],
    hint: Option<f64>,
    budget: Budget,
    params: &FormulationParams,
) -> Result<FlipOutcome> {
    let model = build_flip_mip(merged, h0, rep, params)?;
    // Most accurate pool member that already flips this example.
    let mut warm: Option<(u64, Vec<f64>)> = None;
    for (g, mistakes) in pool {
        if warm.as_ref().is_some_and(|(m, _)| *m <= *mistakes) {
            continue;
        }
        if let Some(a) = encode_flip(merged, h0, rep, g, params.gamma) {
            if check_feasible(&model, &a).feasible {
                warm = Some((*mistakes, a));
            }
        }
    }
    let options = SolveOptions {
        warm_start: warm.map(|(_, a)| a),
        lower_bound_hint: hint,
    };
    let r = solve(&model, budget, &options)?;
    let stats = SolveStats::of(format!("flip[{rep}]"), &r);
    if r.status == SolveStatus::Infeasible {
        return Err(Error::Internal(format!("flip model for example {rep} is infeasible")));
    }
    let lower = ceil_count(r.lower_bound);
    let (classifier, mistakes) = match &r.incumbent {
        Some(a) => {
            let g = decode_classifier(&model, a)?;
            let m = empirical_risk(&g, data)?.mistakes;
            if r.is_certified() && m as f64 != r.upper_bound && clears_margin(&g, data, params.gamma)? {
                return Err(Error::Invariant(format!(
                    "flip classifier for example {rep} makes {m} mistakes, model reports {}",
                    r.upper_bound
                )));
            }
            (Some(g), Some(m.min(r.upper_bound.round() as u64)))
        }
        None => (None, None),
    };
    Ok(FlipOutcome {
        classifier,
        mistakes,
        lower: lower.min(mistakes.unwrap_or(u64::MAX)),
        certified: r.is_certified(),
        stats,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prop1Row {
    pub epsilon: f64,
    /// `2 * baseline mistakes + allowance`, in counts.
    pub bound_count: u64,
    pub upper_count: u64,
    pub slack_count: u64,
}

/// Checks that every discrepancy upper value obeys
/// `delta <= 2 * risk(h0) + epsilon`.
pub fn check_prop1(profile: &MultiplicityProfile) -> Result<Vec<Prop1Row>> {
    let mut rows = Vec::new();
    for e in &profile.entries {
        let Some(d) = e.discrepancy else { continue };
        let bound_count = 2 * profile.baseline_mistakes + e.allowance;
        if d.upper_count > bound_count {
            return Err(Error::Invariant(format!(
                "discrepancy {}/{} exceeds 2 * risk + epsilon = {}/{} at epsilon {}",
                d.upper_count, profile.n, bound_count, profile.n, e.epsilon
            )));
        }
        rows.push(Prop1Row {
            epsilon: e.epsilon,
            bound_count,
            upper_count: d.upper_count,
            slack_count: bound_count - d.upper_count,
        });
    }
    Ok(rows)
}

fn groups_of(data: &Dataset) -> Result<Vec<&str>> {
    data.examples()
        .iter()
        .enumerate()
        .map(|(i, e)| e.group().ok_or(Error::MissingGroups(i)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupBurden {
    pub group: String,
    pub ambiguity: MeasureValue,
}

/// Ambiguity restricted to each group's examples.
pub fn group_burden(pool: &PathologicalPool, data: &Dataset, epsilon: f64) -> Result<Vec<GroupBurden>> {
    let groups = groups_of(data)?;
    if pool.entries.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            found: pool.entries.len(),
        });
    }
    let allowance = level_set_allowance(epsilon, pool.n)?;
    let mut names: Vec<&str> = groups.clone();
    names.sort_unstable();
    names.dedup();
    Ok(names
        .into_iter()
        .map(|g| {
            let (lower, upper, total) = pool.ambiguous_weight(data, allowance, |i| groups[i] == g);
            GroupBurden {
                group: g.to_string(),
                ambiguity: MeasureValue::interval(lower, upper, total),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TieBreak {
    pub count: usize,
    /// `(candidate index, disparity)` for the candidates within tolerance of
    /// the best disparity, best first.
    pub ranked: Vec<(usize, f64)>,
}

/// Counts candidates whose group error-rate disparity is within
/// `tolerance` of the smallest disparity among them. The count is a lower
/// bound on the number of such models in the level set, since only the
/// supplied candidates are examined.
pub fn tiebreak_count(
    candidates: &[LinearClassifier],
    data: &Dataset,
    epsilon: f64,
    baseline_mistakes: u64,
    tolerance: f64,
) -> Result<TieBreak> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let groups = groups_of(data)?;
    let allowed = baseline_mistakes + level_set_allowance(epsilon, data.total_weight())?;
    let mut disparities = Vec::with_capacity(candidates.len());
    for (index, h) in candidates.iter().enumerate() {
        let mistakes = empirical_risk(h, data)?.mistakes;
        if mistakes > allowed {
            return Err(Error::OutsideLevelSet {
                index,
                mistakes,
                allowed,
            });
        }
        let predictions = h.predictions(data)?;
        let mut per_group: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
        for ((ex, p), g) in data.examples().iter().zip(&predictions).zip(&groups) {
            let slot = per_group.entry(g).or_default();
            slot.1 += ex.weight();
            if *p != ex.label() {
                slot.0 += ex.weight();
            }
        }
        let rates: Vec<f64> = per_group
            .values()
            .map(|&(m, t)| m as f64 / t as f64)
            .collect();
        let max = rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = rates.iter().cloned().fold(f64::INFINITY, f64::min);
        disparities.push((index, max - min));
    }
    let best = disparities.iter().map(|d| d.1).fold(f64::INFINITY, f64::min);
    let mut ranked: Vec<(usize, f64)> = disparities
        .into_iter()
        .filter(|d| d.1 <= best + tolerance)
        .collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(TieBreak {
        count: ranked.len(),
        ranked,
    })
}
