//! Bounded-variable primal simplex in revised form.
//!
//! Every row `i` gets a logical variable `r_i = a_i x` carrying the row's
//! bounds, so the working system is `A x - r = 0` with bounds on all `n + m`
//! variables. Phase one minimizes the sum of bound violations of the basic
//! variables; phase two the true cost. Pricing is Dantzig's rule, switching to
//! Bland's rule after a run of degenerate pivots. The ratio test is Harris'
//! two-pass variant.

use std::time::Instant;

use super::lu::BasisFactor;

const FEAS_TOL: f64 = 1e-9;
const PHASE_TOL: f64 = 1e-8;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
const BLAND_AFTER: usize = 1000;
const NONE: usize = usize::MAX;

/// Column-and-row sparse LP in minimization form.
#[derive(Debug, Clone, Default)]
pub(crate) struct LpData {
    pub n: usize,
    pub m: usize,
    pub cols: Vec<Vec<(usize, f64)>>,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub row_lb: Vec<f64>,
    pub row_ub: Vec<f64>,
    pub cost: Vec<f64>,
}

impl LpData {
    pub fn new(n: usize) -> Self {
        LpData { n, cols: vec![Vec::new(); n], cost: vec![0.0; n], ..Default::default() }
    }

    pub fn add_row(&mut self, terms: Vec<(usize, f64)>, lb: f64, ub: f64) {
        let i = self.m;
        for &(j, v) in &terms {
            self.cols[j].push((i, v));
        }
        self.rows.push(terms);
        self.row_lb.push(lb);
        self.row_ub.push(ub);
        self.m += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Lower,
    Upper,
    Free,
    Basic,
}

/// Basis snapshot used to warm start a later solve of the same LP.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct WarmBasis {
    head: Vec<usize>,
    at_upper: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Iteration cap, deadline, or unrecoverable numerical trouble.
    Interrupted,
}

#[derive(Debug, Clone)]
pub(crate) struct LpOutcome {
    pub status: LpStatus,
    pub objective: f64,
    pub x: Vec<f64>,
    pub basis: Option<WarmBasis>,
    pub iterations: usize,
}

struct Simplex<'a> {
    lp: &'a LpData,
    lb: Vec<f64>,
    ub: Vec<f64>,
    x: Vec<f64>,
    state: Vec<State>,
    head: Vec<usize>,
    factor: BasisFactor,
    logical_cols: Vec<[(usize, f64); 1]>,
}

/// Solves `min c^T x` over `lb <= x <= ub` (structural bounds) and the row
/// bounds of `lp`.
pub(crate) fn solve(
    lp: &LpData,
    lb: &[f64],
    ub: &[f64],
    warm: Option<&WarmBasis>,
    deadline: Option<Instant>,
) -> LpOutcome {
    let n = lp.n;
    let m = lp.m;
    if let Some(j) = (0..n).find(|&j| lb[j] > ub[j] + FEAS_TOL) {
        log::trace!("column {j} has crossed bounds");
        return infeasible(n);
    }
    let mut all_lb = lb.to_vec();
    all_lb.extend_from_slice(&lp.row_lb);
    let mut all_ub = ub.to_vec();
    all_ub.extend_from_slice(&lp.row_ub);
    let mut s = Simplex {
        lp,
        lb: all_lb,
        ub: all_ub,
        x: vec![0.0; n + m],
        state: vec![State::Lower; n + m],
        head: Vec::with_capacity(m),
        factor: BasisFactor::default(),
        logical_cols: (0..m).map(|i| [(i, -1.0)]).collect(),
    };
    match warm {
        Some(w) if w.head.len() == m && w.at_upper.len() == n + m => s.load_basis(w),
        _ => s.slack_basis(),
    }
    if !s.refactor() {
        s.slack_basis();
        if !s.refactor() {
            return interrupted(n, 0);
        }
    }
    s.run(deadline)
}

fn infeasible(n: usize) -> LpOutcome {
    LpOutcome { status: LpStatus::Infeasible, objective: f64::INFINITY, x: vec![0.0; n], basis: None, iterations: 0 }
}

fn interrupted(n: usize, iterations: usize) -> LpOutcome {
    LpOutcome { status: LpStatus::Interrupted, objective: f64::NAN, x: vec![0.0; n], basis: None, iterations }
}

impl<'a> Simplex<'a> {
    fn total(&self) -> usize {
        self.lp.n + self.lp.m
    }

    fn column(&self, j: usize) -> &[(usize, f64)] {
        if j < self.lp.n { &self.lp.cols[j] } else { &self.logical_cols[j - self.lp.n] }
    }

    fn nonbasic_state(&self, j: usize, prefer_upper: bool) -> State {
        let (l, u) = (self.lb[j], self.ub[j]);
        match (l.is_finite(), u.is_finite()) {
            (true, true) => {
                if prefer_upper { State::Upper } else { State::Lower }
            }
            (true, false) => State::Lower,
            (false, true) => State::Upper,
            (false, false) => State::Free,
        }
    }

    fn set_nonbasic(&mut self, j: usize, state: State) {
        self.state[j] = state;
        self.x[j] = match state {
            State::Lower => self.lb[j],
            State::Upper => self.ub[j],
            _ => 0.0,
        };
    }

    fn slack_basis(&mut self) {
        let n = self.lp.n;
        self.head = (n..n + self.lp.m).collect();
        for j in 0..n {
            let st = self.nonbasic_state(j, false);
            self.set_nonbasic(j, st);
        }
        for j in n..self.total() {
            self.state[j] = State::Basic;
        }
    }

    fn load_basis(&mut self, w: &WarmBasis) {
        self.head = w.head.clone();
        for j in 0..self.total() {
            let st = self.nonbasic_state(j, w.at_upper[j]);
            self.set_nonbasic(j, st);
        }
        for &j in &self.head {
            self.state[j] = State::Basic;
        }
    }

    /// Factors the current basis, swapping in logicals for dependent
    /// columns, then recomputes the basic values.
    fn refactor(&mut self) -> bool {
        for _ in 0..3 {
            let (lp, logical) = (self.lp, &self.logical_cols);
            let cols: Vec<&[(usize, f64)]> =
                self.head.iter().map(|&j| if j < lp.n { &lp.cols[j][..] } else { &logical[j - lp.n][..] }).collect();
            match self.factor.factor(&cols) {
                Ok(()) => {
                    self.recompute_basics();
                    return true;
                }
                Err(sing) => {
                    let n = self.lp.n;
                    for (&p, &r) in sing.positions.iter().zip(&sing.rows) {
                        let out = self.head[p];
                        let st = self.nonbasic_state(out, false);
                        self.set_nonbasic(out, st);
                        self.head[p] = n + r;
                        self.state[n + r] = State::Basic;
                    }
                }
            }
        }
        false
    }

    fn recompute_basics(&mut self) {
        let n = self.lp.n;
        let mut rhs = vec![0.0; self.lp.m];
        for j in 0..self.total() {
            if self.state[j] == State::Basic || self.x[j] == 0.0 {
                continue;
            }
            let xj = self.x[j];
            if j < n {
                for &(i, a) in &self.lp.cols[j] {
                    rhs[i] -= a * xj;
                }
            } else {
                rhs[j - n] += xj;
            }
        }
        self.factor.ftran(&mut rhs);
        for (p, &j) in self.head.iter().enumerate() {
            self.x[j] = rhs[p];
        }
    }

    fn snapshot(&self) -> WarmBasis {
        WarmBasis { head: self.head.clone(), at_upper: self.state.iter().map(|&s| s == State::Upper).collect() }
    }

    fn run(&mut self, deadline: Option<Instant>) -> LpOutcome {
        let n = self.lp.n;
        let m = self.lp.m;
        let total = n + m;
        let max_iter = 20 * total + 10_000;
        let mut degenerate = 0usize;
        let mut cb = vec![0.0; m];
        let mut alpha = vec![0.0; m];
        let mut unbounded_retry = false;
        for iter in 0..max_iter {
            if self.factor.num_etas() >= REFACTOR_EVERY && !self.refactor() {
                return interrupted(n, iter);
            }
            if iter % 64 == 63 && deadline.is_some_and(|d| Instant::now() >= d) {
                return interrupted(n, iter);
            }
            let mut phase_one = false;
            for (p, &j) in self.head.iter().enumerate() {
                cb[p] = if self.x[j] < self.lb[j] - PHASE_TOL {
                    phase_one = true;
                    -1.0
                } else if self.x[j] > self.ub[j] + PHASE_TOL {
                    phase_one = true;
                    1.0
                } else {
                    0.0
                };
            }
            if !phase_one {
                for (p, &j) in self.head.iter().enumerate() {
                    cb[p] = if j < n { self.lp.cost[j] } else { 0.0 };
                }
            }
            let mut y = cb.clone();
            self.factor.btran(&mut y);

            let bland = degenerate >= BLAND_AFTER;
            let mut entering = NONE;
            let mut entering_d = 0.0;
            let mut best = 0.0;
            for j in 0..total {
                let st = self.state[j];
                if st == State::Basic || self.lb[j] == self.ub[j] {
                    continue;
                }
                let d = if j < n {
                    let c = if phase_one { 0.0 } else { self.lp.cost[j] };
                    c - self.lp.cols[j].iter().map(|&(i, a)| a * y[i]).sum::<f64>()
                } else {
                    y[j - n]
                };
                let eligible = match st {
                    State::Lower => d < -DUAL_TOL,
                    State::Upper => d > DUAL_TOL,
                    State::Free => d.abs() > DUAL_TOL,
                    State::Basic => false,
                };
                if !eligible {
                    continue;
                }
                if bland {
                    entering = j;
                    entering_d = d;
                    break;
                }
                if d.abs() > best {
                    best = d.abs();
                    entering = j;
                    entering_d = d;
                }
            }
            if entering == NONE {
                if phase_one {
                    return LpOutcome {
                        status: LpStatus::Infeasible,
                        objective: f64::INFINITY,
                        x: self.x[..n].to_vec(),
                        basis: Some(self.snapshot()),
                        iterations: iter,
                    };
                }
                let objective = (0..n).map(|j| self.lp.cost[j] * self.x[j]).sum();
                return LpOutcome {
                    status: LpStatus::Optimal,
                    objective,
                    x: self.x[..n].to_vec(),
                    basis: Some(self.snapshot()),
                    iterations: iter,
                };
            }

            let q = entering;
            let dir = if entering_d < 0.0 { 1.0 } else { -1.0 };
            alpha.iter_mut().for_each(|a| *a = 0.0);
            for &(i, a) in self.column(q) {
                alpha[i] = a;
            }
            self.factor.ftran(&mut alpha);

            // Harris pass one: largest step keeping every basic within its
            // bounds relaxed by the feasibility tolerance.
            let mut theta_max = f64::INFINITY;
            for (p, &j) in self.head.iter().enumerate() {
                let rate = -dir * alpha[p];
                if rate.abs() < PIVOT_TOL {
                    continue;
                }
                if let Some((target, _)) = self.target(j, rate) {
                    let slack = if rate < 0.0 { self.x[j] - (target - FEAS_TOL) } else { (target + FEAS_TOL) - self.x[j] };
                    theta_max = theta_max.min(slack.max(0.0) / rate.abs());
                }
            }
            // Pass two: among rows whose exact ratio fits, take the largest pivot.
            let mut leave = NONE;
            let mut leave_theta = 0.0;
            let mut leave_to_upper = false;
            let mut leave_mag = 0.0;
            for (p, &j) in self.head.iter().enumerate() {
                let rate = -dir * alpha[p];
                if rate.abs() < PIVOT_TOL {
                    continue;
                }
                if let Some((target, to_upper)) = self.target(j, rate) {
                    let ratio = ((target - self.x[j]) / rate).max(0.0);
                    if ratio <= theta_max {
                        let mag = alpha[p].abs();
                        let better = if bland {
                            leave == NONE || ratio < leave_theta || (ratio == leave_theta && j < self.head[leave])
                        } else {
                            mag > leave_mag
                        };
                        if better {
                            leave = p;
                            leave_theta = ratio;
                            leave_to_upper = to_upper;
                            leave_mag = mag;
                        }
                    }
                }
            }
            let flip = self.ub[q] - self.lb[q];
            if leave == NONE && !flip.is_finite() {
                if phase_one || !unbounded_retry {
                    // Recover from drift before concluding anything.
                    unbounded_retry = true;
                    if !self.refactor() {
                        return interrupted(n, iter);
                    }
                    continue;
                }
                return LpOutcome {
                    status: LpStatus::Unbounded,
                    objective: f64::NEG_INFINITY,
                    x: self.x[..n].to_vec(),
                    basis: None,
                    iterations: iter,
                };
            }
            unbounded_retry = false;
            if leave == NONE || flip <= leave_theta {
                let theta = flip;
                for (p, &j) in self.head.iter().enumerate() {
                    self.x[j] -= theta * dir * alpha[p];
                }
                let st = if self.state[q] == State::Lower { State::Upper } else { State::Lower };
                self.set_nonbasic(q, st);
                degenerate = 0;
                continue;
            }
            let theta = leave_theta;
            if theta < 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            for (p, &j) in self.head.iter().enumerate() {
                self.x[j] -= theta * dir * alpha[p];
            }
            let entering_value = self.x[q] + theta * dir;
            let out = self.head[leave];
            self.set_nonbasic(out, if leave_to_upper { State::Upper } else { State::Lower });
            self.head[leave] = q;
            self.state[q] = State::Basic;
            self.x[q] = entering_value;
            self.factor.update(leave, &alpha);
        }
        interrupted(n, max_iter)
    }

    /// Bound that basic variable `j` moves toward at the given rate, if that
    /// bound limits the step. Infeasible basics moving away from feasibility
    /// are unlimited; those moving toward it stop at the violated bound.
    fn target(&self, j: usize, rate: f64) -> Option<(f64, bool)> {
        let (l, u, x) = (self.lb[j], self.ub[j], self.x[j]);
        if rate < 0.0 {
            if x > u + PHASE_TOL {
                Some((u, true))
            } else if x < l - PHASE_TOL || !l.is_finite() {
                None
            } else {
                Some((l, false))
            }
        } else if x < l - PHASE_TOL {
            Some((l, false))
        } else if x > u + PHASE_TOL || !u.is_finite() {
            None
        } else {
            Some((u, true))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(n: usize, cost: &[f64], rows: &[(&[(usize, f64)], f64, f64)]) -> LpData {
        let mut d = LpData::new(n);
        d.cost = cost.to_vec();
        for (terms, lo, hi) in rows {
            d.add_row(terms.to_vec(), *lo, *hi);
        }
        d
    }

    #[test]
    fn single_bound_row() {
        let d = lp(1, &[1.0], &[(&[(0, 1.0)], 0.3, f64::INFINITY)]);
        let out = solve(&d, &[0.0], &[1.0], None, None);
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.objective - 0.3).abs() < 1e-12);
    }

    #[test]
    fn tight_covering_row() {
        let d = lp(2, &[1.0, 1.0], &[(&[(0, 1.0), (1, 1.0)], 1.0, f64::INFINITY)]);
        let out = solve(&d, &[0.0, 0.0], &[1.0, 1.0], None, None);
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn contradiction_is_infeasible() {
        let d = lp(1, &[1.0], &[(&[(0, 1.0)], f64::NEG_INFINITY, -1.0)]);
        assert_eq!(solve(&d, &[0.0], &[1.0], None, None).status, LpStatus::Infeasible);
    }

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 -> 36 at (2, 6)
        let d = lp(
            2,
            &[-3.0, -5.0],
            &[
                (&[(0, 1.0)], f64::NEG_INFINITY, 4.0),
                (&[(1, 2.0)], f64::NEG_INFINITY, 12.0),
                (&[(0, 3.0), (1, 2.0)], f64::NEG_INFINITY, 18.0),
            ],
        );
        let out = solve(&d, &[0.0, 0.0], &[100.0, 100.0], None, None);
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.objective + 36.0).abs() < 1e-9);
        assert!((out.x[0] - 2.0).abs() < 1e-9 && (out.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_warm_start() {
        // min x - y s.t. x + y = 1, x - y >= -0.5
        let d = lp(
            2,
            &[1.0, -1.0],
            &[(&[(0, 1.0), (1, 1.0)], 1.0, 1.0), (&[(0, 1.0), (1, -1.0)], -0.5, f64::INFINITY)],
        );
        let cold = solve(&d, &[0.0, 0.0], &[1.0, 1.0], None, None);
        assert_eq!(cold.status, LpStatus::Optimal);
        assert!((cold.objective + 0.5).abs() < 1e-9);
        // tighten y <= 0.6 and resolve from the previous basis
        let warm = solve(&d, &[0.0, 0.0], &[1.0, 0.6], cold.basis.as_ref(), None);
        assert_eq!(warm.status, LpStatus::Optimal);
        assert!((warm.objective + 0.2).abs() < 1e-9);
    }

    #[test]
    fn free_row_unbounded_column() {
        let d = lp(1, &[-1.0], &[(&[(0, 1.0)], f64::NEG_INFINITY, f64::INFINITY)]);
        let out = solve(&d, &[0.0], &[f64::INFINITY], None, None);
        assert_eq!(out.status, LpStatus::Unbounded);
    }
}
