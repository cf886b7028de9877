//! Best-first branch-and-bound over mixed binary/continuous programs.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::{default_iteration_limit, solve_with_bounds, LinearProgram, LpStatus, Relation};

/// Tolerance for integrality of binaries and for constraint checks on
/// candidate assignments.
pub const INTEGRALITY_TOLERANCE: f64 = 1e-6;
/// Bound comparisons (pruning, certification) use this slack.
pub const BOUND_TOLERANCE: f64 = 1e-6;

/// Turns LP relaxation values into a candidate assignment. Candidates are
/// always checked for feasibility before they are accepted.
pub trait PrimalHeuristic: Send + Sync {
    fn propose(&self, relaxation: &[f64]) -> Option<Vec<f64>>;
}

#[derive(Clone)]
pub struct MipModel {
    pub lp: LinearProgram,
    binary_vars: Vec<usize>,
    is_binary: Vec<bool>,
    pub name: String,
    pub var_names: Vec<String>,
    pub row_names: Vec<String>,
    /// Named variable groups such as "mistake_indicators" or "coef_pos".
    pub groups: BTreeMap<String, Vec<usize>>,
    /// Free-form facts recorded by builders (e.g. algebraic identities).
    pub notes: BTreeMap<String, String>,
    integral_objective: bool,
    heuristic: Option<Arc<dyn PrimalHeuristic>>,
}

impl fmt::Debug for MipModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MipModel")
            .field("name", &self.name)
            .field("vars", &self.lp.num_vars())
            .field("rows", &self.lp.rows.len())
            .field("binary_vars", &self.binary_vars.len())
            .field("integral_objective", &self.integral_objective)
            .field("heuristic", &self.heuristic.is_some())
            .finish()
    }
}

impl MipModel {
    pub fn new(lp: LinearProgram, mut binary_vars: Vec<usize>) -> Result<Self> {
        lp.validate()?;
        binary_vars.sort_unstable();
        binary_vars.dedup();
        let mut is_binary = vec![false; lp.num_vars()];
        for &j in &binary_vars {
            let Some(&(lo, hi)) = lp.bounds.get(j) else {
                return Err(Error::InvalidModel(format!("binary variable {j} out of range")));
            };
            if lo < 0.0 || hi > 1.0 {
                return Err(Error::InvalidModel(format!(
                    "binary variable {j} has bounds [{lo}, {hi}]"
                )));
            }
            is_binary[j] = true;
        }
        // Integer coefficients on binaries only: every integral assignment has
        // an integer objective, so node bounds may be rounded up.
        let integral_objective = lp.objective.iter().enumerate().all(|(j, &c)| {
            if is_binary[j] {
                c.fract() == 0.0
            } else {
                c == 0.0
            }
        });
        let n = lp.num_vars();
        let m = lp.rows.len();
        Ok(MipModel {
            lp,
            binary_vars,
            is_binary,
            name: "model".into(),
            var_names: (0..n).map(|j| format!("C{j:04}")).collect(),
            row_names: (0..m).map(|i| format!("R{i:04}")).collect(),
            groups: BTreeMap::new(),
            notes: BTreeMap::new(),
            integral_objective,
            heuristic: None,
        })
    }

    pub fn with_heuristic(mut self, heuristic: Arc<dyn PrimalHeuristic>) -> Self {
        self.heuristic = Some(heuristic);
        self
    }

    pub fn binary_vars(&self) -> &[usize] {
        &self.binary_vars
    }

    pub fn is_binary(&self, j: usize) -> bool {
        self.is_binary.get(j).copied().unwrap_or(false)
    }

    pub fn integral_objective(&self) -> bool {
        self.integral_objective
    }

    pub fn group(&self, name: &str) -> Option<&[usize]> {
        self.groups.get(name).map(|v| v.as_slice())
    }

    pub fn objective_value(&self, assignment: &[f64]) -> f64 {
        let raw = self.lp.objective_value(assignment);
        if self.integral_objective {
            raw.round()
        } else {
            raw
        }
    }

    /// A bound no assignment can beat: each variable at its cheaper bound.
    fn trivial_lower_bound(&self) -> f64 {
        self.lp
            .objective
            .iter()
            .zip(&self.lp.bounds)
            .map(|(&c, &(lo, hi))| (c * lo).min(c * hi))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Budget {
    pub time_limit: Option<Duration>,
    pub node_limit: Option<usize>,
}

impl Budget {
    pub fn nodes(limit: usize) -> Self {
        Budget {
            time_limit: None,
            node_limit: Some(limit),
        }
    }

    pub fn time(limit: Duration) -> Self {
        Budget {
            time_limit: Some(limit),
            node_limit: None,
        }
    }

    pub fn unlimited() -> Self {
        Budget::default()
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    pub warm_start: Option<Vec<f64>>,
    /// Trusted global lower bound supplied by the caller.
    pub lower_bound_hint: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    CertifiedOptimal,
    FeasibleWithGap,
    Infeasible,
    NoIncumbent,
}

/// One line of the node log, emitted whenever the incumbent improves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IncumbentEvent {
    pub wall_ms: u128,
    pub nodes: usize,
    pub upper: f64,
    pub lower: f64,
}

impl fmt::Display for IncumbentEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {}",
            self.wall_ms, self.nodes, self.upper, self.lower
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub incumbent: Option<Vec<f64>>,
    pub upper_bound: f64,
    pub lower_bound: f64,
    pub nodes_explored: usize,
    pub wall_time: Duration,
    pub lower_bound_hint: Option<f64>,
    pub log: Vec<IncumbentEvent>,
}

impl SolveResult {
    pub fn is_certified(&self) -> bool {
        self.status == SolveStatus::CertifiedOptimal
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Length { expected: usize, found: usize },
    Bound { var: usize, value: f64, lo: f64, hi: f64 },
    Integrality { var: usize, value: f64 },
    Row { row: usize, name: String, activity: f64, rhs: f64, amount: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

pub fn check_feasible(model: &MipModel, assignment: &[f64]) -> FeasibilityReport {
    let mut violations = Vec::new();
    let n = model.lp.num_vars();
    if assignment.len() != n {
        violations.push(Violation::Length {
            expected: n,
            found: assignment.len(),
        });
        return FeasibilityReport {
            feasible: false,
            violations,
        };
    }
    for (j, (&v, &(lo, hi))) in assignment.iter().zip(&model.lp.bounds).enumerate() {
        if !v.is_finite() || v < lo - INTEGRALITY_TOLERANCE || v > hi + INTEGRALITY_TOLERANCE {
            violations.push(Violation::Bound { var: j, value: v, lo, hi });
        }
        if model.is_binary[j] && (v - v.round()).abs() > INTEGRALITY_TOLERANCE {
            violations.push(Violation::Integrality { var: j, value: v });
        }
    }
    for (i, row) in model.lp.rows.iter().enumerate() {
        let amount = row.violation(assignment);
        if amount > INTEGRALITY_TOLERANCE {
            violations.push(Violation::Row {
                row: i,
                name: model.row_names.get(i).cloned().unwrap_or_default(),
                activity: row.activity(assignment),
                rhs: row.rhs,
                amount,
            });
        }
    }
    FeasibilityReport {
        feasible: violations.is_empty(),
        violations,
    }
}

struct Node {
    bound: f64,
    seq: u64,
    fixings: Vec<(usize, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap is a max-heap: the smallest bound, then the oldest node,
    // compares greatest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Search<'a> {
    model: &'a MipModel,
    start: Instant,
    nodes: usize,
    upper: f64,
    incumbent: Option<Vec<f64>>,
    log: Vec<IncumbentEvent>,
}

impl Search<'_> {
    fn round_bound(&self, value: f64) -> f64 {
        if self.model.integral_objective {
            (value - BOUND_TOLERANCE).ceil()
        } else {
            value
        }
    }

    fn improves(&self, objective: f64) -> bool {
        if self.model.integral_objective {
            objective <= self.upper - 1.0 + BOUND_TOLERANCE
        } else {
            objective < self.upper - BOUND_TOLERANCE
        }
    }

    fn prunes(&self, bound: f64) -> bool {
        if self.model.integral_objective {
            bound > self.upper - 1.0 + BOUND_TOLERANCE
        } else {
            bound >= self.upper - BOUND_TOLERANCE
        }
    }

    fn offer(&mut self, mut candidate: Vec<f64>, lower: f64) -> bool {
        for &j in &self.model.binary_vars {
            candidate[j] = candidate[j].round();
        }
        if !check_feasible(self.model, &candidate).feasible {
            return false;
        }
        let objective = self.model.objective_value(&candidate);
        if self.incumbent.is_none() || self.improves(objective) {
            self.upper = objective;
            self.incumbent = Some(candidate);
            self.log.push(IncumbentEvent {
                wall_ms: self.start.elapsed().as_millis(),
                nodes: self.nodes,
                upper: objective,
                lower: lower.min(objective),
            });
        }
        true
    }
}

pub fn solve(model: &MipModel, budget: Budget, options: &SolveOptions) -> Result<SolveResult> {
    let start = Instant::now();
    let mut search = Search {
        model,
        start,
        nodes: 0,
        upper: f64::INFINITY,
        incumbent: None,
        log: Vec::new(),
    };
    let hint = options.lower_bound_hint;
    let mut floor_bound = model.trivial_lower_bound();
    if let Some(h) = hint {
        floor_bound = floor_bound.max(h);
    }
    floor_bound = search.round_bound(floor_bound);

    if let Some(warm) = &options.warm_start {
        let report = check_feasible(model, warm);
        if !report.feasible {
            return Err(Error::InfeasibleWarmStart(format!(
                "{} violation(s), first: {:?}",
                report.violations.len(),
                report.violations[0]
            )));
        }
        search.offer(warm.clone(), floor_bound);
    }

    let iteration_limit = default_iteration_limit(&model.lp);
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Node {
        bound: floor_bound,
        seq,
        fixings: Vec::new(),
    });
    let mut exhausted = false;

    loop {
        let Some(top) = heap.peek() else { break };
        if search.prunes(top.bound) {
            // Every open node is at least as bad as the best one.
            heap.clear();
            break;
        }
        if budget.node_limit.is_some_and(|limit| search.nodes >= limit)
            || budget.time_limit.is_some_and(|limit| start.elapsed() >= limit)
        {
            exhausted = true;
            break;
        }
        let node = heap.pop().expect("peeked");
        search.nodes += 1;

        let mut bounds = model.lp.bounds.clone();
        for &(j, v) in &node.fixings {
            bounds[j] = (v, v);
        }
        let relaxation = solve_with_bounds(&model.lp, &bounds, iteration_limit);
        let (node_bound, branch_var) = match relaxation.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                return Err(Error::InvalidModel("unbounded relaxation".into()));
            }
            LpStatus::IterationLimit => {
                log::warn!("node relaxation hit the iteration limit; branching blind");
                let free = model
                    .binary_vars
                    .iter()
                    .copied()
                    .find(|&j| bounds[j].0 != bounds[j].1);
                (node.bound, free)
            }
            LpStatus::Optimal => {
                let bound = search.round_bound(relaxation.objective_value).max(node.bound);
                if search.prunes(bound) {
                    continue;
                }
                let lower = heap.peek().map_or(bound, |n| n.bound.min(bound));
                if let Some(h) = &model.heuristic {
                    // Only candidates inside this node's subtree are kept, so
                    // the incumbent never improves by more than the node's
                    // bound allows; this keeps truncated runs monotone in
                    // the node budget.
                    if let Some(candidate) = h.propose(&relaxation.values) {
                        let inside = node
                            .fixings
                            .iter()
                            .all(|&(j, v)| candidate.get(j).is_some_and(|c| c.round() == v));
                        if inside {
                            let _ = search.offer(candidate, lower);
                        }
                    }
                }
                let branch = most_fractional(model, &relaxation.values);
                if branch.is_none() {
                    if !search.offer(relaxation.values.clone(), lower) {
                        // Re-solve the continuous part with binaries pinned
                        // to clear round-off in the relaxation values.
                        for &j in &model.binary_vars {
                            let v = relaxation.values[j].round();
                            bounds[j] = (v, v);
                        }
                        let pinned = solve_with_bounds(&model.lp, &bounds, iteration_limit);
                        if pinned.status == LpStatus::Optimal {
                            search.offer(pinned.values, lower);
                        }
                    }
                    continue;
                }
                if search.prunes(bound) {
                    continue;
                }
                (bound, branch)
            }
        };
        let Some(j) = branch_var else {
            continue;
        };
        for value in [0.0, 1.0] {
            seq += 1;
            let mut fixings = node.fixings.clone();
            fixings.push((j, value));
            heap.push(Node {
                bound: node_bound,
                seq,
                fixings,
            });
        }
    }

    let open_bound = heap.peek().map(|n| n.bound);
    let mut lower = match open_bound {
        Some(b) => b.min(search.upper),
        None => search.upper,
    };
    if !lower.is_finite() && search.incumbent.is_none() && open_bound.is_none() {
        lower = f64::INFINITY;
    }
    if let Some(h) = hint {
        if search.incumbent.is_some() && h > search.upper + BOUND_TOLERANCE {
            log::warn!("lower bound hint {h} exceeds incumbent {}", search.upper);
        }
    }
    let certified = search.incumbent.is_some()
        && if model.integral_objective {
            search.upper - lower < 1.0 - BOUND_TOLERANCE
        } else {
            search.upper - lower < BOUND_TOLERANCE
        };
    let status = if certified {
        lower = search.upper;
        SolveStatus::CertifiedOptimal
    } else if search.incumbent.is_some() {
        SolveStatus::FeasibleWithGap
    } else if exhausted {
        SolveStatus::NoIncumbent
    } else {
        SolveStatus::Infeasible
    };
    Ok(SolveResult {
        status,
        incumbent: search.incumbent,
        upper_bound: search.upper,
        lower_bound: lower,
        nodes_explored: search.nodes,
        wall_time: start.elapsed(),
        lower_bound_hint: hint,
        log: search.log,
    })
}

/// Binary with fractional part closest to 0.5; lowest index on ties.
fn most_fractional(model: &MipModel, values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &j in &model.binary_vars {
        let frac = values[j] - values[j].floor();
        if frac <= INTEGRALITY_TOLERANCE || frac >= 1.0 - INTEGRALITY_TOLERANCE {
            continue;
        }
        let distance = (frac - 0.5).abs();
        if best.is_none_or(|(_, d)| distance < d - 1e-12) {
            best = Some((j, distance));
        }
    }
    best.map(|(j, _)| j)
}

/// Expresses a row as `coefficients . x (relation) rhs` for display.
pub fn describe_row(model: &MipModel, row: usize) -> String {
    let r = &model.lp.rows[row];
    let rel = match r.relation {
        Relation::LessEq => "<=",
        Relation::Equal => "=",
        Relation::GreaterEq => ">=",
    };
    let terms: Vec<String> = r
        .coefficients
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(j, c)| format!("{c} {}", model.var_names[j]))
        .collect();
    format!("{}: {} {rel} {}", model.row_names[row], terms.join(" + "), r.rhs)
}
