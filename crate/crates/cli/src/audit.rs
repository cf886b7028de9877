//! Stage orchestration and report files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use predmult::adhoc::{
    adhoc_measures, adhoc_measures_with_baseline, fit_pool, select_baseline, AdhocResult, PenaltyGrid, PoolModel,
};
use predmult::bnb::Budget;
use predmult::formulation::FormulationParams;
use predmult::path::{
    ambiguity_path, check_prop1, discrepancy_path, fit_baseline, group_burden, BaselineFit, EpsilonGrid,
    MeasureValue, MultiplicityProfile, PathBudget, PathologicalPool, Prop1Row, SolveStats,
};
use predmult::{empirical_risk, synthetic, Dataset, RiskReport};
use serde::Serialize;

use crate::config::{EpsilonSpec, RunConfig};
use crate::ingest::{ingest_csv, IngestReport};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verb {
    Audit,
    Baseline,
    Discrepancy,
    Ambiguity,
    Adhoc,
}

impl Verb {
    fn discrepancy(self) -> bool {
        matches!(self, Verb::Audit | Verb::Discrepancy)
    }

    fn ambiguity(self) -> bool {
        matches!(self, Verb::Audit | Verb::Ambiguity)
    }

    fn exact_baseline(self) -> bool {
        self != Verb::Adhoc
    }
}

pub const PROFILE_CSV_HEADER: &str = "epsilon,disc_lower,disc_upper,disc_certified,amb_lower,amb_upper,amb_certified";

/// Training data plus the untouched test split.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub name: String,
    pub train: Dataset,
    pub test: Option<Dataset>,
    pub ingest: Option<IngestReport>,
}

/// Generators produce the whole dataset as the training set; CSV input is
/// split and oversampled.
pub fn load(config: &RunConfig) -> Result<LoadedData, CliError> {
    if let Some(name) = &config.generator {
        let train = synthetic::generate(name, config.scale).map_err(|e| CliError::Input(e.to_string()))?;
        return Ok(LoadedData {
            name: name.clone(),
            train,
            test: None,
            ingest: None,
        });
    }
    let path = config
        .dataset
        .as_ref()
        .ok_or_else(|| CliError::Input("no dataset or generator given".into()))?;
    let out = ingest_csv(path, config)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    Ok(LoadedData {
        name,
        train: out.train,
        test: out.test,
        ingest: Some(out.report),
    })
}

pub fn formulation_params(config: &RunConfig) -> FormulationParams {
    FormulationParams {
        gamma: config.gamma,
        big_m_override: config.big_m,
        per_example_big_m: config.per_example_big_m,
    }
}

pub fn epsilon_grid(spec: &EpsilonSpec, n: u64, baseline_mistakes: u64) -> Result<EpsilonGrid, CliError> {
    let grid = match spec {
        EpsilonSpec::Default => EpsilonGrid::default_for(n, baseline_mistakes),
        EpsilonSpec::Multiples(k) => EpsilonGrid::multiples(n, *k),
        EpsilonSpec::Values(v) => EpsilonGrid::new(n, v),
    };
    grid.map_err(|e| CliError::Input(e.to_string()))
}

fn solve_budget(config: &RunConfig, seconds: f64) -> Budget {
    Budget {
        time_limit: Some(RunConfig::seconds(seconds)),
        node_limit: config.node_limit,
    }
}

fn path_budget(config: &RunConfig, seconds: f64) -> PathBudget {
    PathBudget {
        per_solve: solve_budget(config, seconds),
        total_time: Some(RunConfig::seconds(seconds)),
    }
}

#[derive(Debug, Clone, Serialize)]
struct MeasureReport {
    lower: f64,
    upper: f64,
    lower_count: u64,
    upper_count: u64,
    n: u64,
    certified: bool,
}

impl From<MeasureValue> for MeasureReport {
    fn from(m: MeasureValue) -> Self {
        MeasureReport {
            lower: m.lower_f64(),
            upper: m.upper_f64(),
            lower_count: m.lower_count,
            upper_count: m.upper_count,
            n: m.n,
            certified: m.certified,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct EntryReport {
    epsilon: f64,
    allowance: u64,
    discrepancy: Option<MeasureReport>,
    ambiguity: Option<MeasureReport>,
    witness: Option<Vec<f64>>,
    witness_mistakes: Option<u64>,
    witness_certified: bool,
}

#[derive(Debug, Clone, Serialize)]
struct ProfileReport {
    n: u64,
    baseline_mistakes: u64,
    baseline_risk: f64,
    baseline_certified: bool,
    entries: Vec<EntryReport>,
}

fn profile_report(profile: &MultiplicityProfile, baseline_certified: bool) -> ProfileReport {
    ProfileReport {
        n: profile.n,
        baseline_mistakes: profile.baseline_mistakes,
        baseline_risk: profile.baseline_mistakes as f64 / profile.n as f64,
        baseline_certified,
        entries: profile
            .entries
            .iter()
            .map(|e| EntryReport {
                epsilon: e.epsilon,
                allowance: e.allowance,
                discrepancy: e.discrepancy.map(Into::into),
                ambiguity: e.ambiguity.map(Into::into),
                witness: e.witness.as_ref().map(|w| w.coefficients().to_vec()),
                witness_mistakes: e.witness_mistakes,
                witness_certified: e.witness_certified,
            })
            .collect(),
    }
}

/// One row per epsilon; missing measures leave their three fields empty.
pub fn profile_csv(profile: &MultiplicityProfile) -> String {
    let mut out = String::from(PROFILE_CSV_HEADER);
    out.push('\n');
    let cells = |m: Option<MeasureValue>| match m {
        Some(m) => format!("{:?},{:?},{}", m.lower_f64(), m.upper_f64(), m.certified),
        None => ",,".to_string(),
    };
    for e in &profile.entries {
        out.push_str(&format!("{},{},{}\n", e.epsilon, cells(e.discrepancy), cells(e.ambiguity)));
    }
    out
}

#[derive(Debug, Clone, Serialize)]
struct RiskSummary {
    mistakes: u64,
    n: u64,
    rate: f64,
}

impl From<RiskReport> for RiskSummary {
    fn from(r: RiskReport) -> Self {
        RiskSummary {
            mistakes: r.mistakes,
            n: r.n,
            rate: r.rate_f64(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct BaselineReport {
    coefficients: Vec<f64>,
    certified: bool,
    lower_bound: u64,
    train_risk: RiskSummary,
    /// On the held-out split as read, before any oversampling.
    test_risk: Option<RiskSummary>,
}

#[derive(Debug, Clone, Serialize)]
struct StageRecord {
    stage: String,
    ok: bool,
    wall_ms: u128,
    detail: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
struct Versions {
    predmult: &'static str,
    predmult_cli: &'static str,
}

#[derive(Debug, Clone, Serialize)]
struct Manifest<'a> {
    verb: Verb,
    config: &'a RunConfig,
    seeds: Seeds,
    versions: Versions,
    ingest: Option<IngestReport>,
    train_examples: Option<usize>,
    train_weight: Option<u64>,
    stages: Vec<StageRecord>,
    solves: Vec<SolveStats>,
    prop1: Vec<Prop1Row>,
    outputs: Vec<String>,
    failed_stage: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
struct Seeds {
    split: u64,
    oversample: u64,
    adhoc_folds: u64,
}

/// What a finished run produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub baseline: Option<BaselineFit>,
    pub profile: Option<MultiplicityProfile>,
    pub adhoc: Option<AdhocResult>,
}

struct Run<'a> {
    config: &'a RunConfig,
    dir: PathBuf,
    manifest: Manifest<'a>,
}

impl<'a> Run<'a> {
    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        fs::write(self.dir.join(name), contents)
            .map_err(|e| CliError::Io(format!("cannot write {name}: {e}")))?;
        if !self.manifest.outputs.iter().any(|o| o == name) {
            self.manifest.outputs.push(name.to_string());
        }
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }

    fn save_manifest(&mut self) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(&self.manifest).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        fs::write(self.dir.join("run_manifest.json"), text)
            .map_err(|e| CliError::Io(format!("cannot write run_manifest.json: {e}")))
    }

    /// Runs one stage, records it in the manifest and saves the manifest, so
    /// a failure leaves earlier outputs and the failure point on disk.
    fn stage<T>(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut Self) -> Result<T, CliError>,
    ) -> Result<T, CliError> {
        let start = Instant::now();
        log::info!("stage {name}");
        let result = body(self);
        let wall_ms = start.elapsed().as_millis();
        let detail = result.as_ref().err().map(|e| e.to_string());
        self.manifest.stages.push(StageRecord {
            stage: name.to_string(),
            ok: result.is_ok(),
            wall_ms,
            detail,
        });
        if result.is_err() {
            self.manifest.failed_stage = Some(name.to_string());
        }
        self.save_manifest()?;
        result
    }

    fn record_solves(&mut self, stats: &[SolveStats]) -> Result<(), CliError> {
        self.manifest.solves.extend(stats.iter().cloned());
        if self.config.node_log {
            let mut text = String::new();
            for s in &self.manifest.solves {
                for event in &s.log {
                    text.push_str(&format!("{} {event}\n", s.label));
                }
            }
            self.write("node_log.txt", &text)?;
        }
        Ok(())
    }
}

fn stage_error(stage: &str) -> impl Fn(predmult::Error) -> CliError + '_ {
    move |e| match e {
        predmult::Error::Invariant(msg) => CliError::Invariant(msg),
        other => CliError::Stage {
            stage: stage.to_string(),
            message: other.to_string(),
        },
    }
}

fn adhoc_grid(config: &RunConfig) -> PenaltyGrid {
    let k = config.adhoc_alphas;
    PenaltyGrid {
        alphas: if k == 1 {
            vec![1.0]
        } else {
            (0..k).map(|i| i as f64 / (k - 1) as f64).collect()
        },
        lambdas_per_alpha: config.adhoc_lambdas,
        ..PenaltyGrid::default()
    }
}

#[derive(Serialize)]
struct PoolModelReport<'a> {
    alpha: f64,
    lambda: f64,
    coefficients: &'a [f64],
    train_mistakes: u64,
    cv_risk: f64,
    converged: bool,
}

#[derive(Serialize)]
struct AdhocReport<'a> {
    baseline_index: Option<usize>,
    profile: ProfileReport,
    shared_baseline_profile: Option<ProfileReport>,
    models: Vec<PoolModelReport<'a>>,
}

/// Checks the relations every profile must satisfy: the discrepancy bound
/// in terms of the baseline risk, monotonicity in epsilon, and ambiguity at
/// least discrepancy wherever the witness is certified.
pub fn check_profile(profile: &MultiplicityProfile) -> Result<Vec<Prop1Row>, CliError> {
    let rows = check_prop1(profile).map_err(stage_error("invariants"))?;
    let pick = |f: fn(&predmult::path::ProfileEntry) -> Option<MeasureValue>| -> Vec<MeasureValue> {
        profile.entries.iter().filter_map(f).collect()
    };
    for (name, values) in [("discrepancy", pick(|e| e.discrepancy)), ("ambiguity", pick(|e| e.ambiguity))] {
        for w in values.windows(2) {
            if w[1].lower_count < w[0].lower_count || w[1].upper_count < w[0].upper_count {
                return Err(CliError::Invariant(format!("{name} decreases along the epsilon grid")));
            }
        }
    }
    for e in &profile.entries {
        if let (Some(d), Some(a), true) = (e.discrepancy, e.ambiguity, e.witness_certified) {
            if a.upper_count < d.lower_count {
                return Err(CliError::Invariant(format!(
                    "ambiguity below a certified discrepancy at epsilon {}",
                    e.epsilon
                )));
            }
        }
    }
    Ok(rows)
}

pub fn run(config: &RunConfig, verb: Verb) -> Result<RunSummary, CliError> {
    config.validate()?;
    let dir = config.output_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let mut run = Run {
        config,
        dir: dir.clone(),
        manifest: Manifest {
            verb,
            config,
            seeds: Seeds {
                split: config.split_seed,
                oversample: config.split_seed,
                adhoc_folds: config.adhoc_seed,
            },
            versions: Versions {
                predmult: predmult::VERSION,
                predmult_cli: env!("CARGO_PKG_VERSION"),
            },
            ingest: None,
            train_examples: None,
            train_weight: None,
            stages: Vec::new(),
            solves: Vec::new(),
            prop1: Vec::new(),
            outputs: Vec::new(),
            failed_stage: None,
        },
    };
    let params = formulation_params(config);

    let data = run.stage("load", |r| {
        let d = load(config)?;
        r.manifest.ingest = d.ingest.clone();
        r.manifest.train_examples = Some(d.train.len());
        r.manifest.train_weight = Some(d.train.total_weight());
        Ok(d)
    })?;
    let train = &data.train;

    let baseline = if verb.exact_baseline() {
        Some(run.stage("baseline", |r| {
            let fit = fit_baseline(train, &params, solve_budget(config, config.baseline_time_limit))
                .map_err(stage_error("baseline"))?;
            r.record_solves(std::slice::from_ref(&fit.stats))?;
            let test_risk = match &data.test {
                Some(t) => Some(empirical_risk(&fit.classifier, t).map_err(stage_error("baseline"))?.into()),
                None => None,
            };
            let report = BaselineReport {
                coefficients: fit.classifier.coefficients().to_vec(),
                certified: fit.certified,
                lower_bound: fit.lower_bound,
                train_risk: RiskReport {
                    mistakes: fit.mistakes,
                    n: fit.n,
                }
                .into(),
                test_risk,
            };
            r.write_json("baseline.json", &report)?;
            Ok(fit)
        })?)
    } else {
        None
    };

    let mut profile: Option<MultiplicityProfile> = None;
    let mut pool: Option<PathologicalPool> = None;
    if let Some(fit) = &baseline {
        let grid = epsilon_grid(&config.epsilons, fit.n, fit.mistakes)?;
        if verb.discrepancy() {
            let disc = run.stage("discrepancy", |r| {
                let out = discrepancy_path(
                    train,
                    &fit.classifier,
                    &grid,
                    path_budget(config, config.disc_time_limit),
                    &params,
                )
                .map_err(stage_error("discrepancy"))?;
                r.record_solves(&out.stats)?;
                Ok(out.profile)
            })?;
            profile = Some(disc);
        }
        if verb.ambiguity() {
            let seeds = profile.as_ref().map(|p| p.witnesses()).unwrap_or_default();
            let amb = run.stage("ambiguity", |r| {
                let out = ambiguity_path(
                    train,
                    &fit.classifier,
                    fit.certified,
                    &grid,
                    path_budget(config, config.flip_time_limit),
                    &params,
                    config.workers,
                    &seeds,
                )
                .map_err(stage_error("ambiguity"))?;
                r.record_solves(&out.stats)?;
                r.write_json("pool.json", &out.pool)?;
                Ok(out)
            })?;
            let p = profile.get_or_insert_with(|| MultiplicityProfile::new(&grid, fit.mistakes));
            p.set_ambiguity(&amb.values).map_err(stage_error("ambiguity"))?;
            pool = Some(amb.pool);
        }
        if let Some(p) = &profile {
            let report = profile_report(p, fit.certified);
            run.write_json("profile.json", &report)?;
            run.write("profile.csv", &profile_csv(p))?;
            run.stage("invariants", |r| {
                r.manifest.prop1 = check_profile(p)?;
                Ok(())
            })?;
        }
    }

    let run_adhoc = verb == Verb::Adhoc || (verb == Verb::Audit && config.adhoc);
    let mut adhoc = None;
    if run_adhoc {
        adhoc = Some(run.stage("adhoc", |r| {
            let models = fit_pool(train, &adhoc_grid(config), config.adhoc_seed).map_err(stage_error("adhoc"))?;
            let base = select_baseline(&models).ok_or_else(|| CliError::Stage {
                stage: "adhoc".into(),
                message: "empty model pool".into(),
            })?;
            let base_mistakes = models[base].train_risk.mistakes;
            let grid = epsilon_grid(&config.epsilons, train.total_weight(), base_mistakes)?;
            let own = adhoc_measures(&models, train, &grid).map_err(stage_error("adhoc"))?;
            let shared = match (&baseline, &profile) {
                (Some(fit), Some(exact)) => {
                    let shared_grid = epsilon_grid(&config.epsilons, fit.n, fit.mistakes)?;
                    let s = adhoc_measures_with_baseline(&models, train, &shared_grid, &fit.classifier)
                        .map_err(stage_error("adhoc"))?;
                    check_lower_bound(&s.profile, exact)?;
                    Some(s)
                }
                _ => None,
            };
            let report = AdhocReport {
                baseline_index: own.baseline_index,
                profile: profile_report(&own.profile, false),
                shared_baseline_profile: shared.as_ref().map(|s| profile_report(&s.profile, false)),
                models: models.iter().map(model_report).collect(),
            };
            r.write_json("adhoc.json", &report)?;
            r.write("adhoc_profile.csv", &profile_csv(&own.profile))?;
            Ok(own)
        })?);
    }

    if verb == Verb::Audit {
        if let (Some(pool), Some(p)) = (&pool, &profile) {
            run.stage("burden", |r| {
                let mut text = String::from("group,epsilon,amb_lower,amb_upper,amb_certified\n");
                if train.has_groups() {
                    for e in &p.entries {
                        for b in group_burden(pool, train, e.epsilon).map_err(stage_error("burden"))? {
                            let a = b.ambiguity;
                            text.push_str(&format!(
                                "{},{},{:?},{:?},{}\n",
                                b.group,
                                e.epsilon,
                                a.lower_f64(),
                                a.upper_f64(),
                                a.certified
                            ));
                        }
                    }
                }
                r.write("burden.csv", &text)
            })?;
        }
    }
    run.save_manifest()?;
    Ok(RunSummary {
        output_dir: dir,
        baseline,
        profile,
        adhoc,
    })
}

fn model_report(m: &PoolModel) -> PoolModelReport<'_> {
    PoolModelReport {
        alpha: m.alpha,
        lambda: m.lambda,
        coefficients: m.classifier.coefficients(),
        train_mistakes: m.train_risk.mistakes,
        cv_risk: m.cv_risk,
        converged: m.converged,
    }
}

/// Pool estimates against the exact baseline must stay within the exact
/// upper values.
pub fn check_lower_bound(adhoc: &MultiplicityProfile, exact: &MultiplicityProfile) -> Result<(), CliError> {
    for (a, x) in adhoc.entries.iter().zip(&exact.entries) {
        for (name, est, truth) in [
            ("discrepancy", a.discrepancy, x.discrepancy),
            ("ambiguity", a.ambiguity, x.ambiguity),
        ] {
            if let (Some(est), Some(truth)) = (est, truth) {
                if est.lower_count > truth.upper_count {
                    return Err(CliError::Invariant(format!(
                        "ad hoc {name} {}/{} exceeds the exact upper value {}/{} at epsilon {}",
                        est.lower_count, est.n, truth.upper_count, truth.n, a.epsilon
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Which model `export-mps` writes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MpsTarget {
    Baseline,
    Disc { epsilon: f64 },
    Flip { index: usize },
}

/// Builds the requested model on the training data and writes it to the
/// output directory. Disc and flip models are built around the fitted
/// baseline.
pub fn export_model(config: &RunConfig, target: MpsTarget) -> Result<PathBuf, CliError> {
    use predmult::formulation::{build_baseline_mip, build_disc_mip, build_flip_mip, export_mps, mps_file_name};
    config.validate()?;
    let data = load(config)?;
    let params = formulation_params(config);
    let h0 = || -> Result<_, CliError> {
        Ok(fit_baseline(&data.train, &params, solve_budget(config, config.baseline_time_limit))
            .map_err(stage_error("baseline"))?
            .classifier)
    };
    let (model, extra) = match target {
        MpsTarget::Baseline => (build_baseline_mip(&data.train, &params), String::new()),
        MpsTarget::Disc { epsilon } => (
            build_disc_mip(&data.train, &h0()?, epsilon, &params),
            format!("epsilon={epsilon}"),
        ),
        MpsTarget::Flip { index } => (
            build_flip_mip(&data.train, &h0()?, index, &params),
            format!("index={index}"),
        ),
    };
    let model = model.map_err(|e| CliError::Input(e.to_string()))?;
    fs::create_dir_all(&config.output_dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", config.output_dir.display())))?;
    let path = config
        .output_dir
        .join(mps_file_name(&data.name, &model, &params, &extra));
    export_mps(&model, &path).map_err(|e| CliError::Io(e.to_string()))?;
    Ok(path)
}

/// Writes a generated dataset as CSV, one row per point.
pub fn write_generated(name: &str, scale: u64, path: &Path) -> Result<(), CliError> {
    let data = synthetic::generate(name, scale).map_err(|e| CliError::Input(e.to_string()))?;
    crate::ingest::write_dataset_csv(&data, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_formats_match_plotting_layout() {
        let grid = EpsilonGrid::new(100, &[0.0, 0.01]).unwrap();
        let mut p = MultiplicityProfile::new(&grid, 25);
        p.entries[0].discrepancy = Some(MeasureValue::exact(50, 100));
        p.entries[0].ambiguity = Some(MeasureValue::exact(100, 100));
        p.entries[1].discrepancy = Some(MeasureValue::interval(50, 53, 100));
        let text = profile_csv(&p);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], PROFILE_CSV_HEADER);
        assert_eq!(lines[1], "0,0.5,0.5,true,1.0,1.0,true");
        assert_eq!(lines[2], "0.01,0.5,0.53,false,,,");
    }

    #[test]
    fn decreasing_profiles_are_invariant_errors() {
        let grid = EpsilonGrid::new(10, &[0.0, 0.1]).unwrap();
        let mut p = MultiplicityProfile::new(&grid, 2);
        p.entries[0].discrepancy = Some(MeasureValue::exact(3, 10));
        p.entries[1].discrepancy = Some(MeasureValue::exact(2, 10));
        assert!(matches!(check_profile(&p), Err(CliError::Invariant(_))));
        p.entries[0].discrepancy = Some(MeasureValue::exact(5, 10));
        p.entries[1].discrepancy = Some(MeasureValue::exact(5, 10));
        assert!(matches!(check_profile(&p), Err(CliError::Invariant(_))));
    }
}
