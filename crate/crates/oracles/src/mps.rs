//! Strict fixed-format MPS reader.
//!
//! Data lines must place every field in its fixed column window
//! (2-3, 5-12, 15-22, 25-36, 40-47, 50-61, 1-based) with blanks elsewhere.
//! Any deviation is reported with its line number.

use std::collections::HashMap;

const FIELDS: [(usize, usize); 6] = [(1, 3), (4, 12), (14, 22), (24, 36), (39, 47), (49, 61)];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseModel {
    pub name: String,
    pub column_names: Vec<String>,
    pub row_names: Vec<String>,
    pub objective: Vec<f64>,
    pub rows: Vec<(Vec<f64>, RowKind, f64)>,
    pub bounds: Vec<(f64, f64)>,
    pub integer: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Bounds,
    End,
}

fn split_fields(line: &str, lineno: usize) -> Result<Vec<String>, String> {
    if !line.is_ascii() {
        return Err(format!("line {lineno}: non-ASCII content"));
    }
    let bytes = line.as_bytes();
    if bytes.len() > 61 {
        return Err(format!("line {lineno}: longer than 61 columns"));
    }
    let mut covered = vec![false; bytes.len()];
    let mut out = Vec::new();
    for &(start, end) in FIELDS.iter() {
        if start >= bytes.len() {
            out.push(String::new());
            continue;
        }
        let stop = end.min(bytes.len());
        covered[start..stop].iter_mut().for_each(|c| *c = true);
        out.push(line[start..stop].trim().to_string());
    }
    for (i, &b) in bytes.iter().enumerate() {
        if !covered[i] && b != b' ' {
            return Err(format!("line {lineno}: content outside field windows at column {}", i + 1));
        }
    }
    Ok(out)
}

fn number(text: &str, lineno: usize) -> Result<f64, String> {
    text.parse::<f64>()
        .map_err(|_| format!("line {lineno}: `{text}` is not a number"))
}

pub fn parse(text: &str) -> Result<DenseModel, String> {
    let mut section = Section::None;
    let mut name = String::new();
    let mut objective_row: Option<String> = None;
    let mut row_names: Vec<String> = Vec::new();
    let mut row_kinds: Vec<RowKind> = Vec::new();
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut column_names: Vec<String> = Vec::new();
    let mut column_index: HashMap<String, usize> = HashMap::new();
    let mut integer: Vec<bool> = Vec::new();
    let mut entries: Vec<(usize, Option<usize>, f64)> = Vec::new();
    let mut rhs: HashMap<usize, f64> = HashMap::new();
    let mut bounds: HashMap<usize, (f64, f64)> = HashMap::new();
    let mut in_integer_block = false;

    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() || line.starts_with('*') {
            continue;
        }
        if !line.starts_with(' ') {
            let mut parts = line.split_whitespace();
            let head = parts.next().unwrap_or_default();
            section = match head {
                "NAME" => {
                    if line.len() > 14 {
                        name = line[14..].trim().to_string();
                    }
                    Section::None
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::End,
                other => return Err(format!("line {lineno}: unknown section `{other}`")),
            };
            continue;
        }
        let f = split_fields(line, lineno)?;
        match section {
            Section::Rows => {
                let kind = match f[0].as_str() {
                    "N" => {
                        if objective_row.is_some() {
                            return Err(format!("line {lineno}: second objective row"));
                        }
                        objective_row = Some(f[1].clone());
                        continue;
                    }
                    "L" => RowKind::Le,
                    "G" => RowKind::Ge,
                    "E" => RowKind::Eq,
                    other => return Err(format!("line {lineno}: bad row type `{other}`")),
                };
                if row_index.insert(f[1].clone(), row_names.len()).is_some() {
                    return Err(format!("line {lineno}: duplicate row `{}`", f[1]));
                }
                row_names.push(f[1].clone());
                row_kinds.push(kind);
            }
            Section::Columns => {
                if f[2] == "'MARKER'" {
                    match f[4].as_str() {
                        "'INTORG'" => in_integer_block = true,
                        "'INTEND'" => in_integer_block = false,
                        other => return Err(format!("line {lineno}: bad marker `{other}`")),
                    }
                    continue;
                }
                let col = match column_index.get(&f[1]) {
                    Some(&c) => c,
                    None => {
                        column_index.insert(f[1].clone(), column_names.len());
                        column_names.push(f[1].clone());
                        integer.push(in_integer_block);
                        column_names.len() - 1
                    }
                };
                for (rname, value) in [(&f[2], &f[3]), (&f[4], &f[5])] {
                    if rname.is_empty() {
                        continue;
                    }
                    let v = number(value, lineno)?;
                    if Some(rname) == objective_row.as_ref() {
                        entries.push((col, None, v));
                    } else {
                        let r = *row_index
                            .get(rname)
                            .ok_or(format!("line {lineno}: unknown row `{rname}`"))?;
                        entries.push((col, Some(r), v));
                    }
                }
            }
            Section::Rhs => {
                for (rname, value) in [(&f[2], &f[3]), (&f[4], &f[5])] {
                    if rname.is_empty() {
                        continue;
                    }
                    let r = *row_index
                        .get(rname)
                        .ok_or(format!("line {lineno}: unknown row `{rname}`"))?;
                    rhs.insert(r, number(value, lineno)?);
                }
            }
            Section::Bounds => {
                let col = *column_index
                    .get(&f[2])
                    .ok_or(format!("line {lineno}: unknown column `{}`", f[2]))?;
                let entry = bounds.entry(col).or_insert((0.0, f64::INFINITY));
                match f[0].as_str() {
                    "UP" => entry.1 = number(&f[3], lineno)?,
                    "LO" => entry.0 = number(&f[3], lineno)?,
                    "FX" => {
                        let v = number(&f[3], lineno)?;
                        *entry = (v, v);
                    }
                    "BV" => *entry = (0.0, 1.0),
                    "MI" => entry.0 = f64::NEG_INFINITY,
                    "PL" => entry.1 = f64::INFINITY,
                    "FR" => *entry = (f64::NEG_INFINITY, f64::INFINITY),
                    other => return Err(format!("line {lineno}: bad bound type `{other}`")),
                }
            }
            Section::None | Section::End => {
                return Err(format!("line {lineno}: data outside a section"));
            }
        }
    }
    if section != Section::End {
        return Err("missing ENDATA".into());
    }
    if objective_row.is_none() {
        return Err("missing objective row".into());
    }

    let n = column_names.len();
    let mut objective = vec![0.0; n];
    let mut rows: Vec<(Vec<f64>, RowKind, f64)> = row_kinds
        .iter()
        .enumerate()
        .map(|(r, &k)| (vec![0.0; n], k, rhs.get(&r).copied().unwrap_or(0.0)))
        .collect();
    for (col, row, v) in entries {
        match row {
            None => objective[col] = v,
            Some(r) => rows[r].0[col] = v,
        }
    }
    let bounds = (0..n)
        .map(|c| bounds.get(&c).copied().unwrap_or((0.0, f64::INFINITY)))
        .collect();
    Ok(DenseModel {
        name,
        column_names,
        row_names,
        objective,
        rows,
        bounds,
        integer,
    })
}
