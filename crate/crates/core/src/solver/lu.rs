//! Sparse LU factorization of the simplex basis with product-form updates.
//!
//! The basis is factored column by column (left-looking) with partial row
//! pivoting, sparsest columns first. After factorization each basis change
//! appends one eta column; callers refactor once the eta file grows long.

const NONE: usize = usize::MAX;
const SINGULAR_TOL: f64 = 1e-9;
const DROP_TOL: f64 = 1e-14;

#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

/// Outcome of a failed factorization: basis positions whose columns were
/// dependent, and rows left without a pivot.
#[derive(Debug, Clone)]
pub(crate) struct Singular {
    pub positions: Vec<usize>,
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct BasisFactor {
    m: usize,
    step_pos: Vec<usize>,
    step_row: Vec<usize>,
    row_step: Vec<usize>,
    lcols: Vec<Vec<(usize, f64)>>,
    ucols: Vec<Vec<(usize, f64)>>,
    udiag: Vec<f64>,
    etas: Vec<Eta>,
    work: Vec<f64>,
}

impl BasisFactor {
    pub fn num_etas(&self) -> usize {
        self.etas.len()
    }

    /// Factors the basis whose column at position `p` is `columns[p]`.
    pub fn factor(&mut self, columns: &[&[(usize, f64)]]) -> Result<(), Singular> {
        let m = columns.len();
        self.m = m;
        self.step_pos.clear();
        self.step_row.clear();
        self.row_step.clear();
        self.row_step.resize(m, NONE);
        self.lcols.clear();
        self.ucols.clear();
        self.udiag.clear();
        self.etas.clear();
        self.work.clear();
        self.work.resize(m, 0.0);

        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&p| columns[p].len());
        let mut singular = Vec::new();
        let mut touched: Vec<usize> = Vec::new();
        let mut marked = vec![false; m];
        for &pos in &order {
            for &(i, v) in columns[pos] {
                if !marked[i] {
                    marked[i] = true;
                    touched.push(i);
                }
                self.work[i] += v;
            }
            let mut ucol = Vec::new();
            for j in 0..self.step_row.len() {
                let v = self.work[self.step_row[j]];
                if v == 0.0 {
                    continue;
                }
                ucol.push((j, v));
                for &(i, l) in &self.lcols[j] {
                    if !marked[i] {
                        marked[i] = true;
                        touched.push(i);
                    }
                    self.work[i] -= l * v;
                }
            }
            let mut pivot_row = NONE;
            let mut best = 0.0;
            for &i in &touched {
                if self.row_step[i] != NONE {
                    continue;
                }
                let a = self.work[i].abs();
                if a > best || (a == best && a > 0.0 && i < pivot_row) {
                    best = a;
                    pivot_row = i;
                }
            }
            if best < SINGULAR_TOL {
                singular.push(pos);
            } else {
                let k = self.step_row.len();
                let piv = self.work[pivot_row];
                let mut lcol = Vec::new();
                for &i in &touched {
                    if i != pivot_row && self.row_step[i] == NONE && self.work[i].abs() > DROP_TOL {
                        lcol.push((i, self.work[i] / piv));
                    }
                }
                self.step_pos.push(pos);
                self.step_row.push(pivot_row);
                self.row_step[pivot_row] = k;
                self.udiag.push(piv);
                self.lcols.push(lcol);
                self.ucols.push(ucol);
            }
            for &i in &touched {
                self.work[i] = 0.0;
                marked[i] = false;
            }
            touched.clear();
        }
        if singular.is_empty() {
            Ok(())
        } else {
            let rows = (0..m).filter(|&r| self.row_step[r] == NONE).collect();
            Err(Singular { positions: singular, rows })
        }
    }

    /// Solves `B x = a`. `a` is indexed by row and is overwritten with `x`,
    /// indexed by basis position.
    pub fn ftran(&mut self, a: &mut [f64]) {
        let m = self.m;
        for j in 0..m {
            let v = a[self.step_row[j]];
            if v != 0.0 {
                for &(i, l) in &self.lcols[j] {
                    a[i] -= l * v;
                }
            }
        }
        let y = &mut self.work;
        for k in 0..m {
            y[k] = a[self.step_row[k]];
        }
        for k in (0..m).rev() {
            let xk = y[k] / self.udiag[k];
            y[k] = xk;
            if xk != 0.0 {
                for &(j, u) in &self.ucols[k] {
                    y[j] -= u * xk;
                }
            }
        }
        for k in 0..m {
            a[self.step_pos[k]] = y[k];
            y[k] = 0.0;
        }
        for eta in &self.etas {
            let xp = a[eta.pos] / eta.pivot;
            a[eta.pos] = xp;
            if xp != 0.0 {
                for &(i, d) in &eta.entries {
                    a[i] -= d * xp;
                }
            }
        }
    }

    /// Solves `y^T B = c^T`. `c` is indexed by basis position and is
    /// overwritten with `y`, indexed by row.
    pub fn btran(&mut self, c: &mut [f64]) {
        let m = self.m;
        for eta in self.etas.iter().rev() {
            let s: f64 = eta.entries.iter().map(|&(i, d)| d * c[i]).sum();
            c[eta.pos] = (c[eta.pos] - s) / eta.pivot;
        }
        let z = &mut self.work;
        for k in 0..m {
            let s: f64 = self.ucols[k].iter().map(|&(j, u)| u * z[j]).sum();
            z[k] = (c[self.step_pos[k]] - s) / self.udiag[k];
        }
        for k in 0..m {
            c[self.step_row[k]] = z[k];
            z[k] = 0.0;
        }
        for j in (0..m).rev() {
            let s: f64 = self.lcols[j].iter().map(|&(i, l)| l * c[i]).sum();
            if s != 0.0 {
                c[self.step_row[j]] -= s;
            }
        }
    }

    /// Records that position `pos` now holds a column whose FTRAN image is `alpha`.
    pub fn update(&mut self, pos: usize, alpha: &[f64]) {
        let entries = alpha
            .iter()
            .enumerate()
            .filter(|&(i, v)| i != pos && v.abs() > DROP_TOL)
            .map(|(i, &v)| (i, v))
            .collect();
        self.etas.push(Eta { pos, pivot: alpha[pos], entries });
    }
}
