//! MILP solving: a bounded-variable primal simplex for relaxations and a
//! best-bound branch-and-bound on top of it.
//!
//! Incumbents are always re-verified against the exact rational data of the
//! [`MilpModel`] before they are accepted, so floating-point drift inside the
//! LP engine can slow the search down but cannot produce a wrong answer.

mod bnb;
mod lu;
mod propagate;
mod simplex;

use std::time::Duration;

use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::milp::{coef_to_f64, float_to_big, ConstraintId, Direction, Domain, MilpModel, Sense};

pub use bnb::solve_milp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub time_limit: Duration,
    /// Relative gap at which the search may stop early (0 = prove optimality).
    pub gap_tolerance: f64,
    pub feasibility_tol: f64,
    pub integrality_tol: f64,
    pub node_limit: Option<u64>,
    pub threads: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            time_limit: Duration::from_secs(3600),
            gap_tolerance: 0.0,
            feasibility_tol: 1e-6,
            integrality_tol: 1e-6,
            node_limit: None,
            threads: 1,
        }
    }
}

impl SolveConfig {
    pub fn with_time_limit(secs: f64) -> Self {
        SolveConfig { time_limit: Duration::from_secs_f64(secs), ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.time_limit.is_zero() {
            return Err(Error::Argument("time limit must be positive".into()));
        }
        if !(self.feasibility_tol > 0.0 && self.integrality_tol > 0.0 && self.gap_tolerance >= 0.0) {
            return Err(Error::Argument("tolerances must be positive".into()));
        }
        if self.threads == 0 {
            return Err(Error::Argument("threads must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolveStatus {
    /// Search finished; the incumbent is optimal within the gap tolerance.
    Optimal,
    /// An incumbent exists but part of the tree could not be resolved.
    Feasible,
    Infeasible,
    Unbounded,
    /// Time or node limit reached; the incumbent (if any) and bound are valid.
    TimeLimit,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "Optimal",
            SolveStatus::Feasible => "Feasible",
            SolveStatus::Infeasible => "Infeasible",
            SolveStatus::Unbounded => "Unbounded",
            SolveStatus::TimeLimit => "TimeLimit",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Objective of the incumbent in the model's own direction.
    pub objective: Option<f64>,
    /// The same objective evaluated exactly from the verified incumbent.
    pub objective_exact: Option<BigRational>,
    /// Proven bound in the model's direction (a lower bound when minimizing).
    pub best_bound: f64,
    /// Value per variable, indexed by variable id. Integer variables hold
    /// exact integers.
    pub incumbent: Option<Vec<f64>>,
    pub node_count: u64,
    pub wall_time: Duration,
}

impl SolveResult {
    /// Relative gap between incumbent and bound (infinite without incumbent).
    pub fn gap(&self) -> f64 {
        match self.objective {
            Some(obj) if self.best_bound.is_finite() => (obj - self.best_bound).abs() / obj.abs().max(1.0),
            Some(_) if self.status == SolveStatus::Optimal => 0.0,
            _ => f64::INFINITY,
        }
    }
}

pub use simplex::LpStatus;

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: Option<f64>,
    pub values: Vec<f64>,
}

pub(crate) struct Lowered {
    pub lp: simplex::LpData,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    pub is_int: Vec<bool>,
    pub is_binary: Vec<bool>,
    pub priority: Vec<i32>,
    /// +1 when minimizing, -1 when maximizing (internal costs are `sign * c`).
    pub sign: f64,
    pub offset: f64,
}

pub(crate) fn lower(model: &MilpModel) -> Lowered {
    let n = model.variables().len();
    let mut lp = simplex::LpData::new(n);
    let mut lb = Vec::with_capacity(n);
    let mut ub = Vec::with_capacity(n);
    for v in model.variables() {
        let (l, u) = v.domain.bounds();
        lb.push(coef_to_f64(l));
        ub.push(coef_to_f64(u));
    }
    for c in model.constraints() {
        let terms: Vec<(usize, f64)> =
            c.terms.iter().filter(|(_, a)| *a.numer() != 0).map(|(v, a)| (v.0, coef_to_f64(*a))).collect();
        let rhs = coef_to_f64(c.rhs);
        let (lo, hi) = match c.sense {
            Sense::Le => (f64::NEG_INFINITY, rhs),
            Sense::Ge => (rhs, f64::INFINITY),
            Sense::Eq => (rhs, rhs),
        };
        lp.add_row(terms, lo, hi);
    }
    let sign = match model.direction() {
        Direction::Minimize => 1.0,
        Direction::Maximize => -1.0,
    };
    for (v, c) in model.objective() {
        lp.cost[v.0] += sign * coef_to_f64(*c);
    }
    Lowered {
        lp,
        lb,
        ub,
        is_int: model.variables().iter().map(|v| v.domain.is_integral()).collect(),
        is_binary: model.variables().iter().map(|v| matches!(v.domain, Domain::Binary)).collect(),
        priority: model.variables().iter().map(|v| v.priority).collect(),
        sign,
        offset: coef_to_f64(model.objective_offset()),
    }
}

/// Solves the continuous relaxation of `model`.
pub fn solve_lp(model: &MilpModel) -> LpSolution {
    let low = lower(model);
    let out = simplex::solve(&low.lp, &low.lb, &low.ub, None, None);
    let objective = (out.status == LpStatus::Optimal).then_some(low.sign * out.objective + low.offset);
    LpSolution { status: out.status, objective, values: out.x }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentCheck {
    pub feasible: bool,
    pub violated: Vec<ConstraintId>,
}

/// Evaluates every constraint exactly at `assignment` (one value per
/// variable id). Variable domains are checked too; a domain violation makes
/// the assignment infeasible without naming a constraint.
pub fn check_assignment(model: &MilpModel, assignment: &[f64], feasibility_tol: f64) -> Result<AssignmentCheck> {
    let n = model.variables().len();
    if assignment.len() < n {
        return Err(Error::MissingValue(model.variables()[assignment.len()].name.clone()));
    }
    let exact: Vec<BigRational> = assignment[..n].iter().map(|&x| float_to_big(x)).collect();
    Ok(check_exact(model, &exact, feasibility_tol, feasibility_tol))
}

pub(crate) fn check_exact(model: &MilpModel, values: &[BigRational], feas_tol: f64, int_tol: f64) -> AssignmentCheck {
    let tol = float_to_big(feas_tol);
    let itol = float_to_big(int_tol);
    let mut domain_ok = true;
    for (v, x) in model.variables().iter().zip(values) {
        let (l, u) = v.domain.bounds();
        let (l, u) = (crate::milp::to_big(l), crate::milp::to_big(u));
        if *x < &l - &tol || *x > &u + &tol {
            domain_ok = false;
        }
        if v.domain.is_integral() && (x - x.round()).abs() > itol {
            domain_ok = false;
        }
    }
    let violated: Vec<ConstraintId> = model
        .constraints()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.violation(values) > tol)
        .map(|(k, _)| ConstraintId(k))
        .collect();
    AssignmentCheck { feasible: domain_ok && violated.is_empty(), violated }
}

pub(crate) fn big_to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
