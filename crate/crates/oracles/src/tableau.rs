//! Textbook two-phase tableau simplex with Bland's rule on every pivot.
//!
//! Bounded variables are shifted to `u = v - lo >= 0` and their upper bounds
//! become explicit `u <= hi - lo` rows, so the tableau only ever sees
//! nonnegative variables.

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Optimal { objective: f64, values: Vec<f64> },
    Infeasible,
    Unbounded,
}

/// Minimizes `c . v` subject to `rows` and `lo <= v <= hi`.
pub fn minimize(c: &[f64], rows: &[(Vec<f64>, Rel, f64)], bounds: &[(f64, f64)]) -> Outcome {
    let n = c.len();
    // Rows over shifted variables, plus explicit upper-bound rows.
    let mut std_rows: Vec<(Vec<f64>, Rel, f64)> = Vec::new();
    for (a, rel, b) in rows {
        let shift: f64 = a.iter().zip(bounds).map(|(ai, (lo, _))| ai * lo).sum();
        std_rows.push((a.clone(), *rel, b - shift));
    }
    for (j, (lo, hi)) in bounds.iter().enumerate() {
        let mut a = vec![0.0; n];
        a[j] = 1.0;
        std_rows.push((a, Rel::Le, hi - lo));
    }
    // Nonnegative right-hand sides.
    for row in std_rows.iter_mut() {
        if row.2 < 0.0 {
            row.0.iter_mut().for_each(|v| *v = -*v);
            row.2 = -row.2;
            row.1 = match row.1 {
                Rel::Le => Rel::Ge,
                Rel::Ge => Rel::Le,
                Rel::Eq => Rel::Eq,
            };
        }
    }

    let m = std_rows.len();
    let n_slack = std_rows.iter().filter(|r| r.1 != Rel::Eq).count();
    let n_art = std_rows.iter().filter(|r| r.1 != Rel::Le).count();
    let width = n + n_slack + n_art;
    // Tableau rows hold [coefficients..., rhs].
    let mut t = vec![vec![0.0; width + 1]; m];
    let mut basis = vec![0usize; m];
    let mut is_art = vec![false; width];
    let (mut s_col, mut a_col) = (n, n + n_slack);
    for (i, (a, rel, b)) in std_rows.iter().enumerate() {
        t[i][..n].copy_from_slice(a);
        t[i][width] = *b;
        match rel {
            Rel::Le => {
                t[i][s_col] = 1.0;
                basis[i] = s_col;
                s_col += 1;
            }
            Rel::Ge => {
                t[i][s_col] = -1.0;
                s_col += 1;
                t[i][a_col] = 1.0;
                is_art[a_col] = true;
                basis[i] = a_col;
                a_col += 1;
            }
            Rel::Eq => {
                t[i][a_col] = 1.0;
                is_art[a_col] = true;
                basis[i] = a_col;
                a_col += 1;
            }
        }
    }

    // Phase one.
    let phase1: Vec<f64> = (0..width).map(|j| if is_art[j] { 1.0 } else { 0.0 }).collect();
    if !run(&mut t, &mut basis, &phase1, &vec![true; width]) {
        return Outcome::Infeasible;
    }
    let infeas: f64 = (0..m).filter(|&i| is_art[basis[i]]).map(|i| t[i][width]).sum();
    if infeas > 1e-7 {
        return Outcome::Infeasible;
    }
    // Drive zero-valued artificials out of the basis where possible.
    for i in 0..m {
        if is_art[basis[i]] {
            if let Some(j) = (0..width).find(|&j| !is_art[j] && t[i][j].abs() > EPS) {
                pivot(&mut t, &mut basis, i, j);
            }
        }
    }

    // Phase two over the shifted objective.
    let mut cost = vec![0.0; width];
    cost[..n].copy_from_slice(c);
    let allowed: Vec<bool> = (0..width).map(|j| !is_art[j]).collect();
    if !run(&mut t, &mut basis, &cost, &allowed) {
        return Outcome::Unbounded;
    }
    let mut values: Vec<f64> = bounds.iter().map(|(lo, _)| *lo).collect();
    for i in 0..m {
        if basis[i] < n {
            values[basis[i]] += t[i][width];
        }
    }
    let objective = c.iter().zip(&values).map(|(a, b)| a * b).sum();
    Outcome::Optimal { objective, values }
}

/// Runs simplex iterations with Bland's rule. Returns false when unbounded.
fn run(t: &mut [Vec<f64>], basis: &mut [usize], cost: &[f64], allowed: &[bool]) -> bool {
    let width = cost.len();
    loop {
        // Reduced costs c_j - c_B B^-1 A_j.
        let entering = (0..width).find(|&j| {
            if !allowed[j] || basis.contains(&j) {
                return false;
            }
            let z: f64 = (0..t.len()).map(|i| cost[basis[i]] * t[i][j]).sum();
            cost[j] - z < -EPS
        });
        let Some(q) = entering else {
            return true;
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..t.len() {
            if t[i][q] > EPS {
                let ratio = t[i][width] / t[i][q];
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - EPS || (ratio <= lr + EPS && basis[i] < basis[li]) {
                            Some((i, ratio))
                        } else {
                            Some((li, lr))
                        }
                    }
                };
            }
        }
        let Some((r, _)) = leave else {
            return false;
        };
        pivot(t, basis, r, q);
    }
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], r: usize, q: usize) {
    let p = t[r][q];
    t[r].iter_mut().for_each(|v| *v /= p);
    let pivot_row = t[r].clone();
    for (i, row) in t.iter_mut().enumerate() {
        if i != r {
            let f = row[q];
            if f != 0.0 {
                row.iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
            }
        }
    }
    basis[r] = q;
}
