//! Brute-force ground truth for small instances.
//!
//! Nothing here touches the MILP or solver code: predictions, losses and
//! metric values are recomputed from the raw data with exact integer and
//! rational arithmetic.

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::dataio::{Dataset, GroupSpec};
use crate::diagrams::DiagramSkeleton;
use crate::error::{Error, Result};
use crate::fairness::FairnessMetric;
use crate::scoring::CoefficientDomain;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationBound {
    pub scoring: u128,
    pub diagrams: u128,
}

impl Default for EnumerationBound {
    fn default() -> Self {
        EnumerationBound { scoring: 1_000_000, diagrams: 1_000_000 }
    }
}

/// Extremes of the metric over the enumerated feasible models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRange<T> {
    pub min: Rational64,
    pub max: Rational64,
    pub argmin: T,
    pub argmax: T,
    pub feasible: u64,
    pub scanned: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OracleResult<T> {
    Range(OracleRange<T>),
    /// No enumerated model meets the sparsity and loss budget.
    Infeasible { scanned: u64 },
}

impl<T> OracleResult<T> {
    pub fn range(&self) -> Option<&OracleRange<T>> {
        match self {
            OracleResult::Range(r) => Some(r),
            OracleResult::Infeasible { .. } => None,
        }
    }

    pub fn scanned(&self) -> u64 {
        match self {
            OracleResult::Range(r) => r.scanned,
            OracleResult::Infeasible { scanned } => *scanned,
        }
    }
}

/// Counts-based metric: positive-rate difference between the two index sets.
fn metric_value(pred_pos: &[bool], a: &[usize], b: &[usize]) -> Rational64 {
    let ca = a.iter().filter(|&&i| pred_pos[i]).count() as i64;
    let cb = b.iter().filter(|&&i| pred_pos[i]).count() as i64;
    Rational64::new(ca, a.len() as i64) - Rational64::new(cb, b.len() as i64)
}

fn index_sets(metric: FairnessMetric, groups: &GroupSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    let (a, b) = match metric {
        FairnessMetric::StatisticalParity => (groups.g1.clone(), groups.g2.clone()),
        FairnessMetric::EqualOpportunity => (groups.g1_pos.clone(), groups.g2_pos.clone()),
    };
    if a.is_empty() || b.is_empty() {
        return Err(Error::MetricUndefined("a compared group is empty".into()));
    }
    Ok((a, b))
}

struct Tracker<T> {
    best: Option<OracleRange<T>>,
    scanned: u64,
}

impl<T: Clone> Tracker<T> {
    fn new() -> Self {
        Tracker { best: None, scanned: 0 }
    }

    fn offer(&mut self, value: Rational64, model: impl FnOnce() -> T) {
        match &mut self.best {
            None => {
                let m = model();
                self.best = Some(OracleRange { min: value, max: value, argmin: m.clone(), argmax: m, feasible: 1, scanned: 0 });
            }
            Some(r) => {
                r.feasible += 1;
                if value < r.min {
                    r.min = value;
                    r.argmin = model();
                } else if value > r.max {
                    r.max = value;
                    r.argmax = model();
                }
            }
        }
    }

    fn finish(self) -> OracleResult<T> {
        match self.best {
            Some(mut r) => {
                r.scanned = self.scanned;
                OracleResult::Range(r)
            }
            None => OracleResult::Infeasible { scanned: self.scanned },
        }
    }
}

/// Scans every coefficient vector with at most `alpha` nonzeros whose
/// misclassification count is within `count_budget`. Predictions are `+1`
/// iff the score is strictly positive.
pub fn enumerate_scoring(
    ds: &Dataset,
    dom: &CoefficientDomain,
    alpha: usize,
    count_budget: u64,
    metric: FairnessMetric,
    groups: &GroupSpec,
    bound: EnumerationBound,
) -> Result<OracleResult<Vec<i64>>> {
    if dom.len() != ds.m() {
        return Err(Error::LengthMismatch { expected: ds.m(), actual: dom.len() });
    }
    let total = dom.num_configurations();
    if total > bound.scoring {
        return Err(Error::EnumerationBound { configurations: total, bound: bound.scoring });
    }
    let (a, b) = index_sets(metric, groups)?;
    let m = ds.m();
    let n = ds.n();
    // choice k of feature j: 0 means zero, k > 0 means values[k - 1]
    let choices: Vec<Vec<i64>> =
        (0..m).map(|j| std::iter::once(0).chain(dom.values(j).iter().copied()).collect()).collect();
    let mut idx = vec![0usize; m];
    let mut tracker = Tracker::new();
    let mut scores = vec![0i64; n];
    let mut pred = vec![false; n];
    loop {
        tracker.scanned += 1;
        let lambda: Vec<i64> = (0..m).map(|j| choices[j][idx[j]]).collect();
        let nnz = lambda.iter().filter(|&&c| c != 0).count();
        if nnz <= alpha {
            let mut errors = 0u64;
            for i in 0..n {
                scores[i] = ds.row(i).iter().zip(&lambda).map(|(&x, &c)| x as i64 * c).sum();
                pred[i] = scores[i] > 0;
                if pred[i] != (ds.label(i) == 1) {
                    errors += 1;
                }
            }
            if errors <= count_budget {
                tracker.offer(metric_value(&pred, &a, &b), || lambda.clone());
            }
        }
        // odometer
        let mut j = 0;
        loop {
            if j == m {
                return Ok(tracker.finish());
            }
            idx[j] += 1;
            if idx[j] < choices[j].len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

/// An axis-aligned diagram: per internal node, `None` when unused, else
/// `(feature, x_j = 1 goes positive, negative target, positive target)`.
pub type AxisDiagram = Vec<Option<(usize, bool, usize, usize)>>;

/// Enumerates diagrams on `skel` whose splits test a single binary feature
/// (`a = ±e_j`, `b = ±1/2`), over every link topology that the diagram
/// formulation admits: the negative target precedes the positive target,
/// used nodes are exactly those reached from the root, and from the third
/// level on the in-degrees are non-increasing in node order. The extremes
/// found are achievable, hence inner bounds on the true extremes.
pub fn enumerate_univariate_diagrams(
    ds: &Dataset,
    skel: &DiagramSkeleton,
    alpha: usize,
    count_budget: u64,
    metric: FairnessMetric,
    groups: &GroupSpec,
    bound: EnumerationBound,
) -> Result<OracleResult<AxisDiagram>> {
    let ni = skel.num_internal();
    let m = ds.m();
    let mut total: u128 = 1;
    for u in 0..ni {
        let k = skel.succ(u).len() as u128;
        total = total.saturating_mul(1 + k * k.saturating_sub(1) / 2 * 2 * m as u128);
    }
    if total > bound.diagrams {
        return Err(Error::EnumerationBound { configurations: total, bound: bound.diagrams });
    }
    let (a, b) = index_sets(metric, groups)?;
    let mut tracker = Tracker::new();
    let mut diag: AxisDiagram = vec![None; ni];
    let ctx = Enum { ds, skel, alpha, count_budget, a: &a, b: &b };
    ctx.recurse(0, &mut diag, &mut vec![0usize; ni], &mut tracker);
    Ok(tracker.finish())
}

struct Enum<'a> {
    ds: &'a Dataset,
    skel: &'a DiagramSkeleton,
    alpha: usize,
    count_budget: u64,
    a: &'a [usize],
    b: &'a [usize],
}

impl Enum<'_> {
    fn recurse(&self, u: usize, diag: &mut AxisDiagram, indeg: &mut Vec<usize>, tracker: &mut Tracker<AxisDiagram>) {
        let ni = self.skel.num_internal();
        if u == ni {
            self.evaluate(diag, indeg, tracker);
            return;
        }
        let used_so_far = diag.iter().filter(|d| d.is_some()).count();
        let reached = u == 0 || indeg[u] > 0;
        if !reached {
            diag[u] = None;
            self.recurse(u + 1, diag, indeg, tracker);
            return;
        }
        if used_so_far + 1 > self.alpha {
            return;
        }
        let succ = self.skel.succ(u);
        for (ki, &neg) in succ.iter().enumerate() {
            for &pos in &succ[ki + 1..] {
                for j in 0..self.ds.m() {
                    for one_pos in [true, false] {
                        diag[u] = Some((j, one_pos, neg, pos));
                        for t in [neg, pos] {
                            if t < ni {
                                indeg[t] += 1;
                            }
                        }
                        self.recurse(u + 1, diag, indeg, tracker);
                        for t in [neg, pos] {
                            if t < ni {
                                indeg[t] -= 1;
                            }
                        }
                    }
                }
            }
        }
        diag[u] = None;
    }

    fn evaluate(&self, diag: &AxisDiagram, indeg: &[usize], tracker: &mut Tracker<AxisDiagram>) {
        tracker.scanned += 1;
        let skel = self.skel;
        for l in 2..skel.depth() {
            let nodes: Vec<usize> = skel.level_nodes(l).collect();
            if nodes.windows(2).any(|w| indeg[w[0]] < indeg[w[1]]) {
                return;
            }
        }
        let ni = skel.num_internal();
        let n = self.ds.n();
        let mut pred = vec![false; n];
        let mut errors = 0u64;
        for (i, p) in pred.iter_mut().enumerate() {
            let x = self.ds.row(i);
            let mut v = 0;
            while v < ni {
                let (j, one_pos, neg, pos) = diag[v].expect("reached nodes are used");
                let positive = (x[j] == 1) == one_pos;
                v = if positive { pos } else { neg };
            }
            *p = v == ni + 1;
            if *p != (self.ds.label(i) == 1) {
                errors += 1;
            }
        }
        if errors <= self.count_budget {
            tracker.offer(metric_value(&pred, self.a, self.b), || diag.clone());
        }
    }
}
