//! Builders for the baseline, discrepancy and flip mixed-integer programs.
//!
//! Variable layout for every model: `n` binaries (one per example), then the
//! positive coefficient parts `w+_0..w+_d` in `[0, 1]`, then the negative
//! parts `w-_0..w-_d` in `[-1, 0]`. The classifier is `w = w+ + w-`, and the
//! normalization row fixes `sum(w+) - sum(w-) = 1`.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::bnb::{MipModel, PrimalHeuristic};
use crate::data::{dot, empirical_risk, Dataset, Label, LinearClassifier};
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, Relation};

pub const DEFAULT_GAMMA: f64 = 1e-4;

pub const MISTAKE_INDICATORS: &str = "mistake_indicators";
pub const AGREEMENT_INDICATORS: &str = "agreement_indicators";
pub const COEF_POS: &str = "coef_pos";
pub const COEF_NEG: &str = "coef_neg";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormulationParams {
    pub gamma: f64,
    /// Replaces the computed Big-M constant. Must still be valid, i.e. at
    /// least `gamma + max ||x||_inf`.
    pub big_m_override: Option<f64>,
    /// Use `gamma + ||x_i||_inf` per example instead of the global maximum.
    pub per_example_big_m: bool,
}

impl Default for FormulationParams {
    fn default() -> Self {
        FormulationParams {
            gamma: DEFAULT_GAMMA,
            big_m_override: None,
            per_example_big_m: false,
        }
    }
}

impl FormulationParams {
    fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidModel(format!("gamma must be positive, got {}", self.gamma)));
        }
        Ok(())
    }

    fn describe(&self) -> String {
        format!(
            "gamma={};big_m={:?};per_example={}",
            self.gamma, self.big_m_override, self.per_example_big_m
        )
    }
}

fn linf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `M_i = gamma + max_k ||x_k||_inf`, broadcast to every example.
pub fn compute_big_m(data: &Dataset, gamma: f64) -> Vec<f64> {
    let max = data
        .examples()
        .iter()
        .map(|e| linf(e.features()))
        .fold(0.0, f64::max);
    vec![gamma + max; data.len()]
}

fn big_m_for(data: &Dataset, params: &FormulationParams) -> Result<Vec<f64>> {
    params.validate()?;
    let global = compute_big_m(data, params.gamma);
    if let Some(m) = params.big_m_override {
        if !(m >= global[0]) {
            return Err(Error::InvalidModel(format!(
                "big-M override {m} is below the valid bound {}",
                global[0]
            )));
        }
        return Ok(vec![m; data.len()]);
    }
    if params.per_example_big_m {
        return Ok(data
            .examples()
            .iter()
            .map(|e| params.gamma + linf(e.features()))
            .collect());
    }
    Ok(global)
}

/// Column positions shared by all three models.
#[derive(Debug, Clone, Copy)]
struct Layout {
    n: usize,
    coefs: usize,
}

impl Layout {
    fn of(data: &Dataset) -> Self {
        Layout {
            n: data.len(),
            coefs: data.dim() + 1,
        }
    }

    fn num_vars(&self) -> usize {
        self.n + 2 * self.coefs
    }

    fn pos(&self, j: usize) -> usize {
        self.n + j
    }

    fn neg(&self, j: usize) -> usize {
        self.n + self.coefs + j
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        let mut b = vec![(0.0, 1.0); self.n + self.coefs];
        b.extend(std::iter::repeat_n((-1.0, 0.0), self.coefs));
        b
    }

    /// Row coefficients for `scale * (w . x)` over the split variables.
    fn score_row(&self, x: &[f64], scale: f64) -> Vec<f64> {
        let mut row = vec![0.0; self.num_vars()];
        for (j, &v) in x.iter().enumerate() {
            row[self.pos(j)] = scale * v;
            row[self.neg(j)] = scale * v;
        }
        row
    }

    fn l1_row(&self) -> Vec<f64> {
        let mut row = vec![0.0; self.num_vars()];
        for j in 0..self.coefs {
            row[self.pos(j)] = 1.0;
            row[self.neg(j)] = -1.0;
        }
        row
    }

    fn name_columns(&self, model: &mut MipModel, binary_prefix: &str) {
        model.var_names = (0..self.num_vars())
            .map(|c| {
                if c < self.n {
                    format!("{binary_prefix}{:04}", c + 1)
                } else if c < self.n + self.coefs {
                    format!("WP{:02}", c - self.n)
                } else {
                    format!("WN{:02}", c - self.n - self.coefs)
                }
            })
            .collect();
        model.groups.insert(
            COEF_POS.into(),
            (self.n..self.n + self.coefs).collect(),
        );
        model.groups.insert(
            COEF_NEG.into(),
            (self.n + self.coefs..self.num_vars()).collect(),
        );
    }
}

/// Which model an assignment is being built for.
#[derive(Debug, Clone)]
enum Kind {
    /// Mistake indicators, optionally forcing a flip at one example whose
    /// reference prediction is the given sign.
    Mistakes { flip: Option<(usize, f64)> },
    /// Agreement indicators against reference predictions.
    Agreement { reference: Vec<f64> },
}

/// Builds full assignments from classifiers; also serves as the primal
/// heuristic by decoding LP relaxations.
#[derive(Debug, Clone)]
struct Encoder {
    layout: Layout,
    features: Vec<Vec<f64>>,
    labels: Vec<f64>,
    gamma: f64,
    kind: Kind,
}

impl Encoder {
    fn new(data: &Dataset, gamma: f64, kind: Kind) -> Self {
        Encoder {
            layout: Layout::of(data),
            features: data.examples().iter().map(|e| e.features().to_vec()).collect(),
            labels: data.examples().iter().map(|e| e.label().as_f64()).collect(),
            gamma,
            kind,
        }
    }

    /// Assignment realizing the direction `w` (rescaled to unit l1 norm), or
    /// None if some score needed by the model fails to clear the margin.
    fn encode(&self, w: &[f64]) -> Option<Vec<f64>> {
        let norm: f64 = w.iter().map(|v| v.abs()).sum();
        if !(norm > 0.0) || !norm.is_finite() {
            return None;
        }
        let w: Vec<f64> = w.iter().map(|v| v / norm).collect();
        let mut out = vec![0.0; self.layout.num_vars()];
        for (j, &v) in w.iter().enumerate() {
            out[self.layout.pos(j)] = v.max(0.0);
            out[self.layout.neg(j)] = v.min(0.0);
        }
        for (i, x) in self.features.iter().enumerate() {
            let s = dot(&w, x);
            out[i] = match &self.kind {
                Kind::Mistakes { .. } => {
                    if self.labels[i] * s >= self.gamma {
                        0.0
                    } else {
                        1.0
                    }
                }
                Kind::Agreement { reference } => {
                    let agreement = reference[i] * s;
                    if agreement >= self.gamma {
                        1.0
                    } else if agreement <= -self.gamma {
                        0.0
                    } else {
                        return None;
                    }
                }
            };
        }
        if let Kind::Mistakes { flip: Some((k, p)) } = self.kind {
            if -p * dot(&w, &self.features[k]) < self.gamma {
                return None;
            }
        }
        Some(out)
    }

    fn direction(&self, values: &[f64]) -> Vec<f64> {
        (0..self.layout.coefs)
            .map(|j| values[self.layout.pos(j)] + values[self.layout.neg(j)])
            .collect()
    }
}

impl PrimalHeuristic for Encoder {
    fn propose(&self, relaxation: &[f64]) -> Option<Vec<f64>> {
        self.encode(&self.direction(relaxation))
    }
}

fn mistake_rows(lp: &mut LinearProgram, model_rows: &mut Vec<String>, data: &Dataset, layout: &Layout, big_m: &[f64], gamma: f64) {
    // M_i e_i + y_i (w . x_i) >= gamma: e_i = 0 forces a correct margin.
    for (i, ex) in data.examples().iter().enumerate() {
        let mut row = layout.score_row(ex.features(), ex.label().as_f64());
        row[i] = big_m[i];
        lp.add_row(row, Relation::GreaterEq, gamma);
        model_rows.push(format!("ERR{:04}", i + 1));
    }
}

fn conflict_rows(lp: &mut LinearProgram, model_rows: &mut Vec<String>, data: &Dataset, layout: &Layout) {
    for (k, &(i, j)) in data.conflict_pairs().iter().enumerate() {
        let mut row = vec![0.0; layout.num_vars()];
        row[i] = 1.0;
        row[j] = 1.0;
        lp.add_row(row, Relation::Equal, 1.0);
        model_rows.push(format!("CNF{:04}", k + 1));
    }
}

fn weights_objective(data: &Dataset, layout: &Layout) -> Vec<f64> {
    let mut c = vec![0.0; layout.num_vars()];
    for (i, ex) in data.examples().iter().enumerate() {
        c[i] = ex.weight() as f64;
    }
    c
}

fn finish(
    lp: LinearProgram,
    mut rows: Vec<String>,
    layout: Layout,
    name: &str,
    indicator_group: &str,
    binary_prefix: &str,
    encoder: Encoder,
) -> Result<MipModel> {
    let mut lp = lp;
    lp.add_row(layout.l1_row(), Relation::Equal, 1.0);
    rows.push("L1NORM".into());
    let mut model = MipModel::new(lp, (0..layout.n).collect())?.with_heuristic(Arc::new(encoder));
    model.name = name.into();
    model.row_names = rows;
    layout.name_columns(&mut model, binary_prefix);
    model
        .groups
        .insert(indicator_group.into(), (0..layout.n).collect());
    Ok(model)
}

/// Minimizes weighted training mistakes.
pub fn build_baseline_mip(data: &Dataset, params: &FormulationParams) -> Result<MipModel> {
    let big_m = big_m_for(data, params)?;
    let layout = Layout::of(data);
    let mut lp = LinearProgram::new(weights_objective(data, &layout), layout.bounds());
    let mut rows = Vec::new();
    mistake_rows(&mut lp, &mut rows, data, &layout, &big_m, params.gamma);
    conflict_rows(&mut lp, &mut rows, data, &layout);
    let encoder = Encoder::new(data, params.gamma, Kind::Mistakes { flip: None });
    let mut model = finish(lp, rows, layout, "baseline", MISTAKE_INDICATORS, "E", encoder)?;
    model.notes.insert("big_m".into(), format!("{}", big_m[0]));
    Ok(model)
}

/// Largest mistake count allowed in the epsilon-level set of a classifier
/// making `baseline_mistakes` mistakes on `n` points.
pub fn level_set_allowance(epsilon: f64, n: u64) -> Result<u64> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::NegativeEpsilon(epsilon));
    }
    // Grid values are multiples of 1/n; absorb round-off before flooring.
    Ok((epsilon * n as f64 + 1e-9).floor() as u64)
}

/// Minimizes weighted agreements with `h0` over its epsilon-level set.
pub fn build_disc_mip(
    data: &Dataset,
    h0: &LinearClassifier,
    epsilon: f64,
    params: &FormulationParams,
) -> Result<MipModel> {
    let allowance = level_set_allowance(epsilon, data.total_weight())?;
    build_disc_mip_with_allowance(data, h0, allowance, params)
}

/// As [`build_disc_mip`] with the level set given as an extra-mistake count.
pub fn build_disc_mip_with_allowance(
    data: &Dataset,
    h0: &LinearClassifier,
    allowance: u64,
    params: &FormulationParams,
) -> Result<MipModel> {
    let big_m = big_m_for(data, params)?;
    let layout = Layout::of(data);
    let reference: Vec<f64> = h0.predictions(data)?.iter().map(|l| l.as_f64()).collect();
    let base = empirical_risk(h0, data)?;
    let gamma = params.gamma;
    let mut lp = LinearProgram::new(weights_objective(data, &layout), layout.bounds());
    let mut rows = Vec::new();
    for (i, ex) in data.examples().iter().enumerate() {
        // M a_i - p_i (w . x_i) >= gamma: a_i = 0 forces disagreement.
        let mut row = layout.score_row(ex.features(), -reference[i]);
        row[i] = big_m[i];
        lp.add_row(row, Relation::GreaterEq, gamma);
        rows.push(format!("AGR{:04}", i + 1));
    }
    for (i, ex) in data.examples().iter().enumerate() {
        // M a_i - p_i (w . x_i) <= M - gamma: a_i = 1 forces agreement.
        let mut row = layout.score_row(ex.features(), -reference[i]);
        row[i] = big_m[i];
        lp.add_row(row, Relation::LessEq, big_m[i] - gamma);
        rows.push(format!("AGU{:04}", i + 1));
    }
    // sum_i weight_i y_i p_i (1 - a_i) <= allowance.
    let mut level = vec![0.0; layout.num_vars()];
    let mut constant = 0.0;
    for (i, ex) in data.examples().iter().enumerate() {
        let c = ex.weight() as f64 * ex.label().as_f64() * reference[i];
        level[i] = -c;
        constant += c;
    }
    lp.add_row(level, Relation::LessEq, allowance as f64 - constant);
    rows.push("LEVEL".into());
    let encoder = Encoder::new(data, gamma, Kind::Agreement { reference });
    let mut model = finish(lp, rows, layout, "disc", AGREEMENT_INDICATORS, "A", encoder)?;
    model.notes.insert("baseline_mistakes".into(), base.mistakes.to_string());
    model.notes.insert("allowed_extra_mistakes".into(), allowance.to_string());
    model.notes.insert(
        "risk_identity".into(),
        format!(
            "mistakes(h) = {} + sum_i weight_i * y_i * h0(x_i) * (1 - a_i)",
            base.mistakes
        ),
    );
    model.notes.insert("big_m".into(), format!("{}", big_m[0]));
    Ok(model)
}

/// Minimizes weighted mistakes among classifiers that disagree with `h0` at
/// example `index`.
pub fn build_flip_mip(
    data: &Dataset,
    h0: &LinearClassifier,
    index: usize,
    params: &FormulationParams,
) -> Result<MipModel> {
    let ex = data.examples().get(index).ok_or(Error::IndexOutOfRange {
        index,
        len: data.len(),
    })?;
    let big_m = big_m_for(data, params)?;
    let layout = Layout::of(data);
    let p = h0.predict_features(ex.features())?.as_f64();
    let mut lp = LinearProgram::new(weights_objective(data, &layout), layout.bounds());
    let mut rows = Vec::new();
    mistake_rows(&mut lp, &mut rows, data, &layout, &big_m, params.gamma);
    conflict_rows(&mut lp, &mut rows, data, &layout);
    lp.add_row(layout.score_row(ex.features(), -p), Relation::GreaterEq, params.gamma);
    rows.push("FLIP".into());
    let encoder = Encoder::new(
        data,
        params.gamma,
        Kind::Mistakes {
            flip: Some((index, p)),
        },
    );
    let mut model = finish(lp, rows, layout, "flip", MISTAKE_INDICATORS, "E", encoder)?;
    model.notes.insert("flip_index".into(), index.to_string());
    model.notes.insert("big_m".into(), format!("{}", big_m[0]));
    Ok(model)
}

/// Reads the classifier `w = w+ + w-` out of an assignment and rescales it to
/// unit l1 norm.
pub fn decode_classifier(model: &MipModel, assignment: &[f64]) -> Result<LinearClassifier> {
    let (Some(pos), Some(neg)) = (model.group(COEF_POS), model.group(COEF_NEG)) else {
        return Err(Error::InvalidModel("model has no coefficient groups".into()));
    };
    let raw: Vec<f64> = pos
        .iter()
        .zip(neg)
        .map(|(&p, &n)| assignment[p] + assignment[n])
        .collect();
    LinearClassifier::from_raw(&raw)
}

/// Assignment of a baseline model realizing `h`, if every score needed by the
/// model clears the margin.
pub fn encode_baseline(data: &Dataset, h: &LinearClassifier, gamma: f64) -> Option<Vec<f64>> {
    Encoder::new(data, gamma, Kind::Mistakes { flip: None }).encode(h.coefficients())
}

pub fn encode_flip(
    data: &Dataset,
    h0: &LinearClassifier,
    index: usize,
    h: &LinearClassifier,
    gamma: f64,
) -> Option<Vec<f64>> {
    let p = h0.predict_features(data.examples().get(index)?.features()).ok()?.as_f64();
    Encoder::new(data, gamma, Kind::Mistakes { flip: Some((index, p)) }).encode(h.coefficients())
}

pub fn encode_disc(
    data: &Dataset,
    h0: &LinearClassifier,
    h: &LinearClassifier,
    gamma: f64,
) -> Option<Vec<f64>> {
    let reference = h0
        .predictions(data)
        .ok()?
        .iter()
        .map(|l: &Label| l.as_f64())
        .collect();
    Encoder::new(data, gamma, Kind::Agreement { reference }).encode(h.coefficients())
}

/// `<dataset>_<formulation>_<hash>.mps`, the hash covering the parameters
/// and any extra model arguments.
pub fn mps_file_name(dataset: &str, model: &MipModel, params: &FormulationParams, extra: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(params.describe().as_bytes());
    hasher.update(b";");
    hasher.update(extra.as_bytes());
    let digest = hasher.finalize();
    let hash: String = digest[..4].iter().map(|b| format!("{b:02x}")).collect();
    format!("{dataset}_{}_{hash}.mps", model.name)
}

/// Shortest decimal text of at most 12 characters; exact whenever the
/// shortest round-trip form fits.
fn mps_number(v: f64) -> String {
    let plain = format!("{v}");
    if plain.len() <= 12 {
        return plain;
    }
    let sci = format!("{v:e}");
    if sci.len() <= 12 {
        return sci;
    }
    (0..12)
        .rev()
        .map(|p| format!("{v:.p$e}"))
        .find(|s| s.len() <= 12)
        .expect("a one-digit mantissa fits")
}

fn check_name(name: &str) -> Result<()> {
    if name.is_empty() || name.len() > 8 || name.contains(' ') || !name.is_ascii() {
        return Err(Error::InvalidModel(format!("`{name}` is not a valid MPS name")));
    }
    Ok(())
}

fn field_line(f1: &str, f2: &str, f3: &str, f4: &str, f5: &str, f6: &str) -> String {
    let line = format!(" {f1:<2} {f2:<8}  {f3:<8}  {f4:>12}   {f5:<8}  {f6:>12}");
    line.trim_end().to_string()
}

/// Fixed-format MPS text of `model`.
pub fn to_mps(model: &MipModel) -> Result<String> {
    let lp = &model.lp;
    for name in model.var_names.iter().chain(&model.row_names) {
        check_name(name)?;
    }
    if model.var_names.len() != lp.num_vars() || model.row_names.len() != lp.rows.len() {
        return Err(Error::InvalidModel("name tables do not match the model".into()));
    }
    let mut out = Vec::new();
    out.push(format!("NAME          {}", model.name));
    out.push("ROWS".into());
    out.push(field_line("N", "OBJ", "", "", "", ""));
    for (row, name) in lp.rows.iter().zip(&model.row_names) {
        let kind = match row.relation {
            Relation::LessEq => "L",
            Relation::Equal => "E",
            Relation::GreaterEq => "G",
        };
        out.push(field_line(kind, name, "", "", "", ""));
    }
    out.push("COLUMNS".into());
    let mut in_marker = false;
    for j in 0..lp.num_vars() {
        let binary = model.is_binary(j);
        if binary != in_marker {
            let tag = if binary { "'INTORG'" } else { "'INTEND'" };
            out.push(field_line("", "MARKER", "'MARKER'", "", tag, ""));
            in_marker = binary;
        }
        let col = &model.var_names[j];
        out.push(field_line("", col, "OBJ", &mps_number(lp.objective[j]), "", ""));
        for (row, name) in lp.rows.iter().zip(&model.row_names) {
            let v = row.coefficients[j];
            if v != 0.0 {
                out.push(field_line("", col, name, &mps_number(v), "", ""));
            }
        }
    }
    if in_marker {
        out.push(field_line("", "MARKER", "'MARKER'", "", "'INTEND'", ""));
    }
    out.push("RHS".into());
    for (row, name) in lp.rows.iter().zip(&model.row_names) {
        if row.rhs != 0.0 {
            out.push(field_line("", "RHS", name, &mps_number(row.rhs), "", ""));
        }
    }
    out.push("BOUNDS".into());
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        let col = &model.var_names[j];
        if model.is_binary(j) && lo == 0.0 && hi == 1.0 {
            out.push(field_line("BV", "BND", col, "", "", ""));
        } else if lo == hi {
            out.push(field_line("FX", "BND", col, &mps_number(lo), "", ""));
        } else {
            if lo != 0.0 {
                out.push(field_line("LO", "BND", col, &mps_number(lo), "", ""));
            }
            out.push(field_line("UP", "BND", col, &mps_number(hi), "", ""));
        }
    }
    out.push("ENDATA".into());
    let mut text = out.join("\n");
    text.push('\n');
    Ok(text)
}

pub fn export_mps(model: &MipModel, path: &Path) -> Result<()> {
    let text = to_mps(model)?;
    let mut file = fs::File::create(path)?;
    file.write_all(text.as_bytes())?;
    Ok(())
}
