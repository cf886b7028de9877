//! Small synthetic datasets with known multiplicity structure.

use crate::data::{Dataset, Example, Label};
use crate::error::{Error, Result};

/// Cells `(x1, x2, positives, negatives)` of the two-feature XOR problem.
const XOR_CELLS: [(f64, f64, u64, u64); 4] = [
    (0.0, 0.0, 0, 25),
    (0.0, 1.0, 25, 0),
    (1.0, 0.0, 25, 0),
    (1.0, 1.0, 0, 25),
];

/// Cells `(x1, x2, positives, negatives)` per group for the two-group
/// problem where group B's conditional label distribution mirrors group A's.
const TYRANNY_A: [(f64, f64, u64, u64); 4] = [
    (0.0, 0.0, 50, 101),
    (0.0, 1.0, 101, 50),
    (1.0, 0.0, 101, 50),
    (1.0, 1.0, 101, 50),
];
const TYRANNY_B: [(f64, f64, u64, u64); 4] = [
    (0.0, 0.0, 100, 50),
    (0.0, 1.0, 50, 100),
    (1.0, 0.0, 50, 100),
    (1.0, 1.0, 50, 100),
];

fn push_cells(
    out: &mut Vec<Example>,
    cells: &[(f64, f64, u64, u64)],
    scale: u64,
    group: Option<&str>,
) -> Result<()> {
    for &(x1, x2, pos, neg) in cells {
        for (label, count) in [(Label::Positive, pos), (Label::Negative, neg)] {
            if count == 0 {
                continue;
            }
            let mut ex = Example::from_raw(&[x1, x2], label).with_weight(count * scale)?;
            if let Some(g) = group {
                ex = ex.with_group(g);
            }
            out.push(ex);
        }
    }
    Ok(())
}

fn check_scale(scale: u64) -> Result<()> {
    if scale == 0 {
        return Err(Error::InvalidArgument("scale must be at least 1".into()));
    }
    Ok(())
}

/// Four cells of 25 points each, labeled by XOR, with weights scaled by
/// `scale`.
pub fn xor(scale: u64) -> Result<Dataset> {
    check_scale(scale)?;
    let mut examples = Vec::new();
    push_cells(&mut examples, &XOR_CELLS, scale, None)?;
    Dataset::new(examples)
}

/// Two groups, "A" (604 points) and "B" (600 points), over the same four
/// cells with opposite majority labels.
pub fn tyranny(scale: u64) -> Result<Dataset> {
    check_scale(scale)?;
    let mut examples = Vec::new();
    push_cells(&mut examples, &TYRANNY_A, scale, Some("A"))?;
    push_cells(&mut examples, &TYRANNY_B, scale, Some("B"))?;
    Dataset::new(examples)
}

pub const GENERATORS: [&str; 2] = ["xor", "tyranny"];

pub fn generate(name: &str, scale: u64) -> Result<Dataset> {
    match name {
        "xor" => xor(scale),
        "tyranny" => tyranny(scale),
        other => Err(Error::InvalidArgument(format!(
            "unknown generator `{other}` (expected one of {GENERATORS:?})"
        ))),
    }
}
