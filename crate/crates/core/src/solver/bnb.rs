//! Best-bound branch-and-bound.
//!
//! Nodes are kept in a heap ordered by their parent's relaxation bound, ties
//! resolved first-in first-out. Each node re-derives its bounds from the root
//! plus its branching decisions, tightens them by propagation, and re-solves
//! the relaxation from the parent's basis. Until the first incumbent is
//! found the search dives depth-first, following the rounding direction of
//! the branching variable.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Instant;

use num_rational::BigRational;
use num_traits::ToPrimitive;

use super::propagate::propagate;
use super::simplex::{self, LpStatus, WarmBasis};
use super::{big_to_f64, check_exact, lower, Lowered, SolveConfig, SolveResult, SolveStatus};
use crate::milp::{float_to_big, MilpModel};

struct Node {
    bound: f64,
    seq: u64,
    changes: Vec<(usize, f64, f64)>,
    basis: Option<Arc<WarmBasis>>,
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
    // BinaryHeap is a max-heap: the "greatest" node is the one with the
    // smallest bound, then the smallest sequence number.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Incumbent {
    /// Internal (sign-adjusted, offset-free) objective.
    obj: f64,
    values: Vec<BigRational>,
    x: Vec<f64>,
}

enum Outcome {
    Infeasible,
    Pruned,
    Integral(Incumbent),
    Branch { bound: f64, var: usize, value: f64, basis: Option<Arc<WarmBasis>> },
    Interrupted,
    Unbounded,
    Unresolved,
}

struct Ctx<'a> {
    model: &'a MilpModel,
    low: Lowered,
    root_lb: Vec<f64>,
    root_ub: Vec<f64>,
    /// Objective values of integer points lie on multiples of `1 / lattice`.
    lattice: Option<f64>,
    cfg: &'a SolveConfig,
    deadline: Instant,
}

#[derive(Default)]
struct Shared {
    heap: BinaryHeap<Node>,
    dive: Vec<Node>,
    incumbent: Option<Incumbent>,
    active: usize,
    nodes: u64,
    seq: u64,
    stop: bool,
    limit_hit: bool,
    incomplete: bool,
    unbounded: bool,
}

/// Solves `model` to proven optimality or until a limit is reached.
pub fn solve_milp(model: &MilpModel, config: &SolveConfig) -> SolveResult {
    let start = Instant::now();
    let low = lower(model);
    let n = low.lp.n;
    let mut root_lb = low.lb.clone();
    let mut root_ub = low.ub.clone();
    let deadline = start + config.time_limit;
    let root_ok = propagate(&low.lp, &low.is_int, &mut root_lb, &mut root_ub);
    let ctx = Ctx { model, lattice: lattice(model), low, root_lb, root_ub, cfg: config, deadline };
    if !root_ok {
        return finish(&ctx, Shared::default(), start);
    }

    let mut shared = Shared::default();
    if let Some(ws) = model.warm_start() {
        let fixes: Vec<(usize, f64, f64)> = ws.iter().map(|&(v, x)| (v.0, x as f64, x as f64)).collect();
        let probe = Node { bound: f64::NEG_INFINITY, seq: 0, changes: fixes, basis: None };
        match ctx.process(&probe, f64::INFINITY) {
            Outcome::Integral(inc) => {
                log::debug!("warm start accepted with objective {}", ctx.low.sign * inc.obj + ctx.low.offset);
                shared.incumbent = Some(inc);
            }
            _ => log::warn!("warm start is infeasible or incomplete; starting cold"),
        }
    }
    shared.heap.push(Node { bound: f64::NEG_INFINITY, seq: 0, changes: Vec::new(), basis: None });
    shared.seq = 1;
    debug_assert_eq!(ctx.root_lb.len(), n);

    let state = Mutex::new(shared);
    let cv = Condvar::new();
    let threads = config.threads.max(1);
    if threads == 1 {
        worker(&ctx, &state, &cv);
    } else {
        std::thread::scope(|s| {
            for _ in 0..threads {
                s.spawn(|| worker(&ctx, &state, &cv));
            }
        });
    }
    finish(&ctx, state.into_inner().unwrap_or_else(|e| e.into_inner()), start)
}

fn worker(ctx: &Ctx<'_>, state: &Mutex<Shared>, cv: &Condvar) {
    loop {
        let (node, cutoff) = {
            let mut st = state.lock().unwrap_or_else(|e| e.into_inner());
            let picked = loop {
                if st.stop {
                    break None;
                }
                let next = match st.dive.pop() {
                    Some(node) => Some(node),
                    None => st.heap.pop(),
                };
                if let Some(node) = next {
                    let cutoff = st.incumbent.as_ref().map_or(f64::INFINITY, |inc| inc.obj);
                    if ctx.prunable(node.bound, cutoff) {
                        // best-first: everything left is at least as bad
                        st.heap.clear();
                        continue;
                    }
                    if ctx.cfg.node_limit.is_some_and(|lim| st.nodes >= lim) || Instant::now() >= ctx.deadline {
                        st.heap.push(node);
                        st.stop = true;
                        st.limit_hit = true;
                        cv.notify_all();
                        break None;
                    }
                    st.active += 1;
                    st.nodes += 1;
                    break Some((node, cutoff));
                }
                if st.active == 0 {
                    st.stop = true;
                    cv.notify_all();
                    break None;
                }
                st = cv.wait(st).unwrap_or_else(|e| e.into_inner());
            };
            match picked {
                Some(p) => p,
                None => return,
            }
        };

        let outcome = ctx.process(&node, cutoff);

        let mut st = state.lock().unwrap_or_else(|e| e.into_inner());
        match outcome {
            Outcome::Infeasible | Outcome::Pruned => {}
            Outcome::Integral(inc) => {
                if st.incumbent.as_ref().is_none_or(|cur| inc.obj < cur.obj - 1e-12) {
                    log::debug!("incumbent {} at node {}", ctx.low.sign * inc.obj + ctx.low.offset, st.nodes);
                    st.incumbent = Some(inc);
                    let dived = std::mem::take(&mut st.dive);
                    st.heap.extend(dived);
                }
            }
            Outcome::Branch { bound, var, value, basis } => {
                let lo = ctx.root_lb[var].max(
                    node.changes.iter().filter(|c| c.0 == var).map(|c| c.1).fold(f64::NEG_INFINITY, f64::max),
                );
                let hi = ctx.root_ub[var]
                    .min(node.changes.iter().filter(|c| c.0 == var).map(|c| c.2).fold(f64::INFINITY, f64::min));
                let down = value.floor();
                let up = value.ceil().max(down + 1.0);
                let diving = st.incumbent.is_none();
                // while diving the preferred child goes on top of the stack
                let mut children = [(lo, down), (up, hi)];
                if diving && value - down < 0.5 {
                    children.swap(0, 1);
                }
                for (l, u) in children {
                    let mut changes = node.changes.clone();
                    changes.push((var, l, u));
                    let seq = st.seq;
                    st.seq += 1;
                    let child = Node { bound, seq, changes, basis: basis.clone() };
                    if diving {
                        st.dive.push(child);
                    } else {
                        st.heap.push(child);
                    }
                }
            }
            Outcome::Interrupted => {
                st.heap.push(node);
                st.stop = true;
                st.limit_hit = true;
            }
            Outcome::Unbounded => {
                st.unbounded = true;
                st.incomplete = true;
            }
            Outcome::Unresolved => st.incomplete = true,
        }
        st.active -= 1;
        cv.notify_all();
    }
}

fn finish(ctx: &Ctx<'_>, st: Shared, start: Instant) -> SolveResult {
    let sign = ctx.low.sign;
    let offset = ctx.low.offset;
    let open_bound = st.heap.iter().chain(&st.dive).map(|n| n.bound).fold(f64::INFINITY, f64::min);
    let (objective, objective_exact, incumbent) = match &st.incumbent {
        Some(inc) => {
            let exact = ctx.model.objective_value(&inc.values);
            (Some(big_to_f64(&exact)), Some(exact), Some(inc.x.clone()))
        }
        None => (None, None, None),
    };
    let inc_internal = st.incumbent.as_ref().map(|i| i.obj);
    let (status, internal_bound) = if st.limit_hit {
        let b = inc_internal.map_or(open_bound, |o| o.min(open_bound));
        (SolveStatus::TimeLimit, b)
    } else if st.unbounded && inc_internal.is_none() {
        (SolveStatus::Unbounded, f64::NEG_INFINITY)
    } else if let Some(o) = inc_internal {
        (if st.incomplete { SolveStatus::Feasible } else { SolveStatus::Optimal }, o)
    } else if st.incomplete {
        (SolveStatus::TimeLimit, f64::NEG_INFINITY)
    } else {
        (SolveStatus::Infeasible, f64::INFINITY)
    };
    let mut best_bound = sign * internal_bound + offset;
    if status == SolveStatus::Optimal {
        best_bound = objective.unwrap_or(best_bound);
    }
    SolveResult {
        status,
        objective,
        objective_exact,
        best_bound,
        incumbent,
        node_count: st.nodes,
        wall_time: start.elapsed(),
    }
}

impl Ctx<'_> {
    fn round_bound(&self, b: f64) -> f64 {
        match self.lattice {
            Some(l) if b.is_finite() => ((b * l) - 1e-6).ceil() / l,
            _ => b,
        }
    }

    fn prunable(&self, bound: f64, cutoff: f64) -> bool {
        if !cutoff.is_finite() {
            return false;
        }
        let slack = match self.lattice {
            Some(l) => 0.5 / l,
            None => 1e-9,
        };
        let gap = self.cfg.gap_tolerance * cutoff.abs().max(1.0);
        bound > cutoff - slack || bound >= cutoff - gap
    }

    fn process(&self, node: &Node, cutoff: f64) -> Outcome {
        let low = &self.low;
        let mut lb = self.root_lb.clone();
        let mut ub = self.root_ub.clone();
        for &(j, l, u) in &node.changes {
            lb[j] = lb[j].max(l);
            ub[j] = ub[j].min(u);
            if lb[j] > ub[j] {
                return Outcome::Infeasible;
            }
        }
        if !propagate(&low.lp, &low.is_int, &mut lb, &mut ub) {
            return Outcome::Infeasible;
        }
        let mut out = simplex::solve(&low.lp, &lb, &ub, node.basis.as_deref(), Some(self.deadline));
        if out.status == LpStatus::Interrupted {
            if Instant::now() >= self.deadline {
                return Outcome::Interrupted;
            }
            out = simplex::solve(&low.lp, &lb, &ub, None, Some(self.deadline));
        }
        log::trace!("relaxation {:?} after {} iterations", out.status, out.iterations);
        match out.status {
            LpStatus::Infeasible => return Outcome::Infeasible,
            LpStatus::Unbounded => return Outcome::Unbounded,
            LpStatus::Interrupted => {
                if Instant::now() >= self.deadline {
                    return Outcome::Interrupted;
                }
                // No usable relaxation: branch blindly on an unfixed column.
                return match self.pick_unfixed(&lb, &ub) {
                    Some(var) => Outcome::Branch { bound: node.bound, var, value: lb[var] + 0.5, basis: None },
                    None => Outcome::Unresolved,
                };
            }
            LpStatus::Optimal => {}
        }
        let bound = self.round_bound(out.objective).max(node.bound);
        if self.prunable(bound, cutoff) {
            return Outcome::Pruned;
        }
        let basis = out.basis.map(Arc::new);
        match self.pick_fractional(&out.x) {
            Some(var) => Outcome::Branch { bound, var, value: out.x[var], basis },
            None => match self.certify(&out.x, &lb, &ub, basis.as_deref()) {
                Some(inc) if !self.prunable(inc.obj, cutoff) || !cutoff.is_finite() => Outcome::Integral(inc),
                Some(_) => Outcome::Pruned,
                None => Outcome::Unresolved,
            },
        }
    }

    /// Rounds an integral relaxation solution and verifies it exactly,
    /// polishing the continuous part once if the first check fails.
    fn certify(&self, x: &[f64], lb: &[f64], ub: &[f64], basis: Option<&WarmBasis>) -> Option<Incumbent> {
        let low = &self.low;
        let mut cand = self.rounded(x);
        if let Some(inc) = self.verify(&cand) {
            return Some(inc);
        }
        let mut flb = lb.to_vec();
        let mut fub = ub.to_vec();
        for j in 0..low.lp.n {
            if low.is_int[j] {
                flb[j] = cand[j];
                fub[j] = cand[j];
            }
        }
        let out = simplex::solve(&low.lp, &flb, &fub, basis, Some(self.deadline));
        if out.status != LpStatus::Optimal {
            return None;
        }
        cand = self.rounded(&out.x);
        let inc = self.verify(&cand);
        if inc.is_none() {
            log::debug!("integral relaxation point failed exact verification");
        }
        inc
    }

    fn rounded(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, &v)| {
                let v = v.clamp(self.low.lb[j], self.low.ub[j]);
                if self.low.is_int[j] { v.round() } else { v }
            })
            .collect()
    }

    fn verify(&self, cand: &[f64]) -> Option<Incumbent> {
        let values: Vec<BigRational> = cand.iter().map(|&v| float_to_big(v)).collect();
        let chk = check_exact(self.model, &values, self.cfg.feasibility_tol, self.cfg.integrality_tol);
        if !chk.feasible {
            return None;
        }
        let exact = self.model.objective_value(&values);
        let obj = self.low.sign * (exact.to_f64().unwrap_or(f64::NAN) - self.low.offset);
        Some(Incumbent { obj, values, x: cand.to_vec() })
    }

    /// Branching column: highest priority class, binaries before general
    /// integers, then most fractional, then lowest id.
    fn pick_fractional(&self, x: &[f64]) -> Option<usize> {
        let low = &self.low;
        let tol = self.cfg.integrality_tol;
        let mut best: Option<(usize, (i32, bool, f64))> = None;
        for (j, &v) in x.iter().enumerate() {
            if !low.is_int[j] {
                continue;
            }
            let frac = v - v.floor();
            let dist = frac.min(1.0 - frac);
            if dist <= tol {
                continue;
            }
            let key = (low.priority[j], low.is_binary[j], dist);
            let better = match &best {
                None => true,
                Some((_, bk)) => {
                    (key.0, key.1).cmp(&(bk.0, bk.1)).then(key.2.total_cmp(&bk.2)) == Ordering::Greater
                }
            };
            if better {
                best = Some((j, key));
            }
        }
        best.map(|(j, _)| j)
    }

    fn pick_unfixed(&self, lb: &[f64], ub: &[f64]) -> Option<usize> {
        let low = &self.low;
        (0..low.lp.n)
            .filter(|&j| low.is_int[j] && lb[j] < ub[j])
            .max_by(|&a, &b| low.priority[a].cmp(&low.priority[b]).then(b.cmp(&a)))
    }
}

/// Granularity of the objective over integer points: if every objective
/// column is integral, the objective is a multiple of one over the least
/// common multiple of the coefficient denominators.
fn lattice(model: &MilpModel) -> Option<f64> {
    if model.objective().is_empty() {
        return None;
    }
    let mut l: i64 = 1;
    for (v, c) in model.objective() {
        if !model.variable(*v).domain.is_integral() {
            return None;
        }
        let d = *c.denom();
        l = l.checked_mul(d / gcd(l, d))?;
        if l > 1_000_000_000 {
            return None;
        }
    }
    Some(l as f64)
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{Coef, Direction, Domain, LinearConstraint, Sense, VarId};

    fn c(n: i64) -> Coef {
        Coef::from(n)
    }

    #[test]
    fn two_binaries_packing() {
        let mut m = MilpModel::new("p");
        let x0 = m.add_variable("x0", Domain::Binary).unwrap();
        let x1 = m.add_variable("x1", Domain::Binary).unwrap();
        m.add_constraint(LinearConstraint::new(vec![(x0, c(1)), (x1, c(1))], Sense::Le, c(1))).unwrap();
        m.set_objective(vec![(x0, c(-1)), (x1, c(-1))], c(0), Direction::Minimize).unwrap();
        let r = solve_milp(&m, &SolveConfig::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.objective, Some(-1.0));
    }

    #[test]
    fn knapsack_maximize() {
        let mut m = MilpModel::new("k");
        let a = m.add_variable("a", Domain::Binary).unwrap();
        let b = m.add_variable("b", Domain::Binary).unwrap();
        m.add_constraint(LinearConstraint::new(vec![(a, c(1)), (b, c(1))], Sense::Le, c(1))).unwrap();
        m.set_objective(vec![(a, c(3)), (b, c(2))], c(0), Direction::Maximize).unwrap();
        let r = solve_milp(&m, &SolveConfig::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.objective, Some(3.0));
        assert_eq!(r.best_bound, 3.0);
    }

    #[test]
    fn general_integers_and_continuous() {
        // max x + y, 2x + 2y <= 7, x integer in [0,5], y continuous in [0, 0.4]
        let mut m = MilpModel::new("g");
        let x = m.add_variable("x", Domain::Integer { lb: 0, ub: 5 }).unwrap();
        let y = m.add_variable("y", Domain::Continuous { lb: c(0), ub: Coef::new(2, 5) }).unwrap();
        m.add_constraint(LinearConstraint::new(vec![(x, c(2)), (y, c(2))], Sense::Le, c(7))).unwrap();
        m.set_objective(vec![(x, c(1)), (y, c(1))], c(0), Direction::Maximize).unwrap();
        let r = solve_milp(&m, &SolveConfig::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective.unwrap() - 3.4).abs() < 1e-9);
    }

    #[test]
    fn infeasible_integer_program() {
        // 2x = 1 over binaries
        let mut m = MilpModel::new("i");
        let x = m.add_variable("x", Domain::Binary).unwrap();
        m.add_constraint(LinearConstraint::new(vec![(x, c(2))], Sense::Eq, c(1))).unwrap();
        m.set_objective(vec![(x, c(1))], c(0), Direction::Minimize).unwrap();
        assert_eq!(solve_milp(&m, &SolveConfig::default()).status, SolveStatus::Infeasible);
    }

    #[test]
    fn warm_start_is_used_and_never_worse() {
        let mut m = MilpModel::new("w");
        let v: Vec<VarId> = (0..6).map(|i| m.add_variable(format!("x{i}"), Domain::Binary).unwrap()).collect();
        m.add_constraint(LinearConstraint::new(v.iter().map(|&x| (x, c(2))).collect(), Sense::Le, c(7))).unwrap();
        m.set_objective(v.iter().enumerate().map(|(i, &x)| (x, c(-(i as i64) - 1))).collect(), c(0), Direction::Minimize)
            .unwrap();
        m.set_warm_start(Some(v.iter().enumerate().map(|(i, &x)| (x, (i == 0) as i64)).collect())).unwrap();
        let r = solve_milp(&m, &SolveConfig::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.objective, Some(-15.0));
        // a node budget of zero leaves only the warm start
        let r0 = solve_milp(&m, &SolveConfig { node_limit: Some(0), ..Default::default() });
        assert_eq!(r0.status, SolveStatus::TimeLimit);
        assert_eq!(r0.objective, Some(-1.0));
        assert!(r0.best_bound <= -15.0);
    }
}
