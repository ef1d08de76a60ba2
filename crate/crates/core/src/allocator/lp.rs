//! Dense two-phase tableau simplex for small linear programs:
//! maximize `c·y` subject to `A y <= b` (any sign of `b`) and `0 <= y <= u`.
//! Bland's rule throughout, so it terminates on degenerate problems.

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal { y: Vec<f64>, value: f64 },
    Infeasible,
}

struct Tableau {
    rows: Vec<Vec<f64>>, // each row: columns then rhs
    obj: Vec<f64>,       // reduced costs (maximize); last entry is -value
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let piv = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= piv;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f.abs() > 0.0 {
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
                row[c] = 0.0;
            }
        }
        let f = self.obj[c];
        if f.abs() > 0.0 {
            for (v, p) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= f * p;
            }
            self.obj[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Runs primal simplex on the current objective over columns `< active`.
    fn optimize(&mut self, active: usize) {
        loop {
            let Some(enter) = (0..active).find(|&j| self.obj[j] > EPS) else { return };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[enter];
                if a > EPS {
                    let ratio = row[self.cols] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - EPS || (ratio <= lr + EPS && self.basis[i] < self.basis[li]) {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            // Bounded problems only reach here with a leaving row.
            let Some((r, _)) = leave else { return };
            self.pivot(r, enter);
        }
    }
}

/// Solves `max c·y, A y <= b, 0 <= y <= upper`.
pub(crate) fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64], upper: &[f64]) -> LpOutcome {
    let n = c.len();
    let bound_rows: Vec<usize> = (0..n).filter(|&j| upper[j].is_finite()).collect();
    let m = a.len() + bound_rows.len();
    let mut constraints: Vec<(Vec<f64>, f64)> = a.iter().cloned().zip(b.iter().copied()).collect();
    for &j in &bound_rows {
        let mut row = vec![0.0; n];
        row[j] = 1.0;
        constraints.push((row, upper[j]));
    }

    let negative: Vec<usize> = (0..m).filter(|&i| constraints[i].1 < 0.0).collect();
    let n_art = negative.len();
    let cols = n + m + n_art;
    let mut rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut art = 0;
    for (i, (coef, rhs)) in constraints.iter().enumerate() {
        let mut row = vec![0.0; cols + 1];
        if *rhs < 0.0 {
            for j in 0..n {
                row[j] = -coef[j];
            }
            row[n + i] = -1.0;
            row[n + m + art] = 1.0;
            row[cols] = -rhs;
            basis.push(n + m + art);
            art += 1;
        } else {
            row[..n].copy_from_slice(coef);
            row[n + i] = 1.0;
            row[cols] = *rhs;
            basis.push(n + i);
        }
        rows.push(row);
    }
    let mut t = Tableau { rows, obj: vec![0.0; cols + 1], basis, cols };

    if n_art > 0 {
        // phase 1: maximize -sum(artificials)
        for j in n + m..cols {
            t.obj[j] = -1.0;
        }
        for i in 0..m {
            if t.basis[i] >= n + m {
                let row = t.rows[i].clone();
                for (o, v) in t.obj.iter_mut().zip(&row) {
                    *o += v;
                }
            }
        }
        t.optimize(cols);
        let scale = b.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        if t.obj[cols] > 1e-9 * scale {
            return LpOutcome::Infeasible;
        }
        // drive remaining artificials out of the basis
        for i in 0..m {
            if t.basis[i] >= n + m {
                if let Some(j) = (0..n + m).find(|&j| t.rows[i][j].abs() > EPS) {
                    t.pivot(i, j);
                }
            }
        }
        for row in t.rows.iter_mut() {
            for v in row[n + m..cols].iter_mut() {
                *v = 0.0;
            }
        }
    }

    // phase 2
    t.obj = vec![0.0; cols + 1];
    t.obj[..n].copy_from_slice(c);
    for i in 0..m {
        let bj = t.basis[i];
        if bj < n {
            let f = c[bj];
            if f != 0.0 {
                let row = t.rows[i].clone();
                for (o, v) in t.obj.iter_mut().zip(&row) {
                    *o -= f * v;
                }
            }
        }
    }
    t.optimize(n + m);

    let mut y = vec![0.0; n];
    for (i, &bj) in t.basis.iter().enumerate() {
        if bj < n {
            y[bj] = t.rows[i][cols].max(0.0);
        }
    }
    let value = c.iter().zip(&y).map(|(ci, yi)| ci * yi).sum();
    LpOutcome::Optimal { y, value }
}
