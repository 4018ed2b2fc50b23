//! Multivariate decision diagrams over a fixed skeleton: training and
//! fairness MILPs, decoding, routing and rendering.
//!
//! Node ids: internal nodes are numbered level by level in construction
//! order starting at the root (0), followed by the negative terminal and the
//! positive terminal. Variable names use 1-based ids: `d_{v}`, `a_{v}_{j}`,
//! `b_{v}`, `wp_{i}_{v}`/`wn_{i}_{v}` (side flows), `fp_{i}_{u}_{v}`/
//! `fn_{i}_{u}_{v}` (arc flows), `tp_{u}_{v}`/`tn_{u}_{v}` (links),
//! `g_{i}_{l}` (side at level `l`, 0-based), `wt_{i}_{v}` (terminal
//! assignment), `z_{i}` and `yhat_{i}`.
//!
//! Examples with identical feature vectors necessarily take the same path
//! (the two split tests of a node exclude each other), so by default they
//! share the routing variables of their first occurrence; only `z_{i}` and
//! `yhat_{i}` exist for every example.

use std::fmt::Write;

use num_rational::Rational64;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::dataio::{Dataset, GroupSpec};
use crate::error::{Error, Result};
use crate::fairness::{FairnessMetric, Predictions};
use crate::milp::{coef_to_f64, Coef, Direction, Domain, LinearConstraint, MilpModel, Sense, VarId};
use crate::scoring::{add_predictions_and_objective, RangeDirection};
use crate::solver::SolveResult;

/// Margin separating the negative side of a split from the hyperplane.
pub const DEFAULT_GAMMA: Rational64 = Rational64::new_raw(1, 20);

/// The skeleton used in the experiments: 12 internal nodes on 5 levels.
pub const DEFAULT_LEVELS: [usize; 5] = [1, 2, 3, 3, 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Connectivity {
    /// Every internal node may link to all nodes of the next level and to
    /// both terminals, so a diagram can stop early.
    #[default]
    TerminalShortcuts,
    /// Internal nodes link to the next level only; the last level links to
    /// the terminals.
    Layered,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagramSkeleton {
    levels: Vec<usize>,
    connectivity: Connectivity,
    level_of: Vec<usize>,
    level_start: Vec<usize>,
    succ: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
}

pub fn build_skeleton(levels: &[usize]) -> Result<DiagramSkeleton> {
    build_skeleton_with(levels, Connectivity::TerminalShortcuts)
}

pub fn build_skeleton_with(levels: &[usize], connectivity: Connectivity) -> Result<DiagramSkeleton> {
    if levels.is_empty() || levels[0] != 1 {
        return Err(Error::Argument("skeleton levels must be nonempty and start with a single root".into()));
    }
    if levels.contains(&0) {
        return Err(Error::Argument("every skeleton level needs at least one node".into()));
    }
    let internal: usize = levels.iter().sum();
    let (tneg, tpos) = (internal, internal + 1);
    let mut level_of = Vec::with_capacity(internal);
    let mut level_start = Vec::with_capacity(levels.len() + 1);
    for (l, &c) in levels.iter().enumerate() {
        level_start.push(level_of.len());
        level_of.extend(std::iter::repeat_n(l, c));
    }
    level_start.push(internal);
    let mut succ = vec![Vec::new(); internal + 2];
    let mut pred = vec![Vec::new(); internal + 2];
    for u in 0..internal {
        let l = level_of[u];
        let last = l + 1 == levels.len();
        if !last {
            succ[u].extend(level_start[l + 1]..level_start[l + 2]);
        }
        if last || connectivity == Connectivity::TerminalShortcuts {
            succ[u].extend([tneg, tpos]);
        }
        for &v in &succ[u] {
            pred[v].push(u);
        }
    }
    Ok(DiagramSkeleton { levels: levels.to_vec(), connectivity, level_of, level_start, succ, pred })
}

impl DiagramSkeleton {
    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn connectivity(&self) -> Connectivity {
        self.connectivity
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn num_internal(&self) -> usize {
        self.level_of.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.num_internal() + 2
    }

    pub fn is_terminal(&self, v: usize) -> bool {
        v >= self.num_internal()
    }

    /// Class of terminal `v`: -1 for the first terminal, +1 for the second.
    pub fn terminal_class(&self, v: usize) -> i8 {
        if v == self.num_internal() { -1 } else { 1 }
    }

    pub fn level(&self, v: usize) -> usize {
        self.level_of[v]
    }

    pub fn level_nodes(&self, l: usize) -> std::ops::Range<usize> {
        self.level_start[l]..self.level_start[l + 1]
    }

    pub fn succ(&self, u: usize) -> &[usize] {
        &self.succ[u]
    }

    pub fn pred(&self, v: usize) -> &[usize] {
        &self.pred[v]
    }

    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_internal()).flat_map(move |u| self.succ[u].iter().map(move |&v| (u, v)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagramOptions {
    pub gamma: Rational64,
    /// Route duplicate rows through one set of flow variables.
    pub share_duplicate_rows: bool,
}

impl Default for DiagramOptions {
    fn default() -> Self {
        DiagramOptions { gamma: DEFAULT_GAMMA, share_duplicate_rows: true }
    }
}

/// Index of the first example with the same feature vector, per example.
fn first_occurrences(ds: &Dataset) -> Vec<usize> {
    let mut seen: std::collections::HashMap<&[u8], usize> = std::collections::HashMap::new();
    (0..ds.n()).map(|i| *seen.entry(ds.row(i)).or_insert(i)).collect()
}

/// Example whose routing variables example `i` uses in `model`.
fn routing_owners(model: &MilpModel, ds: &Dataset) -> Vec<usize> {
    first_occurrences(ds)
        .into_iter()
        .enumerate()
        .map(|(i, first)| if model.var_by_name(&format!("wn_{}_1", i + 1)).is_some() { i } else { first })
        .collect()
}

/// Handles of the variables of a diagram model.
struct DiagramVars {
    d: Vec<VarId>,
    z: Vec<VarId>,
}

fn build_core(model: &mut MilpModel, ds: &Dataset, skel: &DiagramSkeleton, opts: DiagramOptions) -> Result<DiagramVars> {
    if ds.bias_appended() {
        return Err(Error::InvalidState("decision diagrams carry their own intercept; remove the bias column".into()));
    }
    let one = Coef::one();
    let zero = Coef::zero();
    let gamma = opts.gamma;
    let n = ds.n();
    let m = ds.m();
    let ni = skel.num_internal();
    let nn = skel.num_nodes();
    let unit = Domain::Continuous { lb: zero, ub: one };
    let big_m = Coef::from(m as i64 + 2) + gamma;

    let mut d = Vec::with_capacity(ni);
    let mut a = Vec::with_capacity(ni);
    let mut b = Vec::with_capacity(ni);
    for v in 0..ni {
        let dv = model.add_variable(format!("d_{}", v + 1), Domain::Binary)?;
        model.set_priority(dv, 3);
        d.push(dv);
        let av: Vec<VarId> = (0..m)
            .map(|j| model.add_variable(format!("a_{}_{}", v + 1, j + 1), Domain::Continuous { lb: -one, ub: one }))
            .collect::<Result<_>>()?;
        a.push(av);
        b.push(model.add_variable(format!("b_{}", v + 1), Domain::Continuous { lb: -one - gamma, ub: one })?);
    }
    model.add_constraint(LinearConstraint::new(vec![(d[0], one)], Sense::Eq, one).named("root_used"))?;

    // links
    let mut tp = vec![Vec::new(); nn];
    let mut tn = vec![Vec::new(); nn];
    for u in 0..ni {
        for &v in skel.succ(u) {
            let p = model.add_variable(format!("tp_{}_{}", u + 1, v + 1), Domain::Binary)?;
            let q = model.add_variable(format!("tn_{}_{}", u + 1, v + 1), Domain::Binary)?;
            model.set_priority(p, 3);
            model.set_priority(q, 3);
            tp[u].push((v, p));
            tn[u].push((v, q));
        }
    }
    let link = |tp: &Vec<Vec<(usize, VarId)>>, u: usize, v: usize| tp[u].iter().find(|e| e.0 == v).map(|e| e.1);
    for u in 0..ni {
        let mut row = vec![(d[u], one)];
        row.extend(tp[u].iter().map(|&(_, t)| (t, -one)));
        model.add_constraint(LinearConstraint::new(row, Sense::Eq, zero).named(format!("use_pos_{}", u + 1)))?;
        let mut row = vec![(d[u], one)];
        row.extend(tn[u].iter().map(|&(_, t)| (t, -one)));
        model.add_constraint(LinearConstraint::new(row, Sense::Eq, zero).named(format!("use_neg_{}", u + 1)))?;
    }
    for v in 1..ni {
        let mut row = vec![(d[v], one)];
        for &u in skel.pred(v) {
            row.push((link(&tp, u, v).expect("arc"), -one));
            row.push((link(&tn, u, v).expect("arc"), -one));
        }
        model.add_constraint(LinearConstraint::new(row, Sense::Le, zero).named(format!("reached_{}", v + 1)))?;
    }
    for u in 0..ni {
        for &v in skel.succ(u) {
            if skel.is_terminal(v) {
                continue;
            }
            let row = vec![(link(&tp, u, v).expect("arc"), one), (link(&tn, u, v).expect("arc"), one), (d[v], -one)];
            model.add_constraint(LinearConstraint::new(row, Sense::Le, zero).named(format!("target_{}_{}", u + 1, v + 1)))?;
        }
    }
    // symmetry breaking: the negative target precedes the positive one
    for u in 0..ni {
        for &v in skel.succ(u) {
            let mut row = vec![(link(&tn, u, v).expect("arc"), one)];
            row.extend(tp[u].iter().filter(|e| e.0 <= v).map(|e| (e.1, one)));
            model.add_constraint(LinearConstraint::new(row, Sense::Le, one).named(format!("sym_{}_{}", u + 1, v + 1)))?;
        }
    }
    // weak in-degree ordering from the third level on
    for l in 2..skel.depth() {
        let nodes: Vec<usize> = skel.level_nodes(l).collect();
        for (k, &u) in nodes.iter().enumerate() {
            for &v in &nodes[k + 1..] {
                let mut row = Vec::new();
                for &w in skel.pred(u) {
                    row.push((link(&tp, w, u).expect("arc"), one));
                    row.push((link(&tn, w, u).expect("arc"), one));
                }
                for &w in skel.pred(v) {
                    row.push((link(&tp, w, v).expect("arc"), -one));
                    row.push((link(&tn, w, v).expect("arc"), -one));
                }
                model.add_constraint(
                    LinearConstraint::new(row, Sense::Ge, zero).named(format!("indeg_{}_{}", u + 1, v + 1)),
                )?;
            }
        }
    }

    let owner: Vec<usize> = if opts.share_duplicate_rows { first_occurrences(ds) } else { (0..n).collect() };
    let mut terminal_flow: Vec<Vec<(usize, VarId)>> = vec![Vec::new(); n];
    for i in (0..n).filter(|&i| owner[i] == i) {
        let x = ds.row(i);
        let ii = i + 1;
        let mut wp = Vec::with_capacity(ni);
        let mut wn = Vec::with_capacity(ni);
        for v in 0..ni {
            wp.push(model.add_variable(format!("wp_{ii}_{}", v + 1), unit)?);
            wn.push(model.add_variable(format!("wn_{ii}_{}", v + 1), unit)?);
        }
        let mut fp = vec![Vec::new(); nn];
        let mut fnn = vec![Vec::new(); nn];
        for u in 0..ni {
            for &v in skel.succ(u) {
                fp[u].push((v, model.add_variable(format!("fp_{ii}_{}_{}", u + 1, v + 1), unit)?));
                fnn[u].push((v, model.add_variable(format!("fn_{ii}_{}_{}", u + 1, v + 1), unit)?));
            }
        }
        let inflow = |v: usize, sign: Coef| -> Vec<(VarId, Coef)> {
            let mut t = Vec::new();
            for &u in skel.pred(v) {
                t.push((link(&fp, u, v).expect("arc"), sign));
                t.push((link(&fnn, u, v).expect("arc"), sign));
            }
            t
        };
        for v in 0..ni {
            let mut row = vec![(wp[v], one), (wn[v], one)];
            let rhs = if v == 0 {
                one
            } else {
                row.extend(inflow(v, -one));
                zero
            };
            model.add_constraint(LinearConstraint::new(row, Sense::Eq, rhs).named(format!("flow_{ii}_{}", v + 1)))?;
            let mut row = vec![(wn[v], one)];
            row.extend(fnn[v].iter().map(|&(_, f)| (f, -one)));
            model.add_constraint(LinearConstraint::new(row, Sense::Eq, zero).named(format!("out_neg_{ii}_{}", v + 1)))?;
            let mut row = vec![(wp[v], one)];
            row.extend(fp[v].iter().map(|&(_, f)| (f, -one)));
            model.add_constraint(LinearConstraint::new(row, Sense::Eq, zero).named(format!("out_pos_{ii}_{}", v + 1)))?;
        }
        for l in 0..skel.depth() {
            let g = model.add_variable(format!("g_{ii}_{l}"), Domain::Binary)?;
            model.set_priority(g, 1);
            let mut row: Vec<(VarId, Coef)> = skel.level_nodes(l).map(|u| (wn[u], one)).collect();
            row.push((g, one));
            model.add_constraint(LinearConstraint::new(row, Sense::Le, one).named(format!("side_neg_{ii}_{l}")))?;
            let mut row: Vec<(VarId, Coef)> = skel.level_nodes(l).map(|u| (wp[u], one)).collect();
            row.push((g, -one));
            model.add_constraint(LinearConstraint::new(row, Sense::Le, zero).named(format!("side_pos_{ii}_{l}")))?;
        }
        for u in 0..ni {
            for k in 0..fp[u].len() {
                let (v, f) = fp[u][k];
                let t = link(&tp, u, v).expect("arc");
                model.add_constraint(
                    LinearConstraint::new(vec![(f, one), (t, -one)], Sense::Le, zero)
                        .named(format!("carry_pos_{ii}_{}_{}", u + 1, v + 1)),
                )?;
                let (v, f) = fnn[u][k];
                let t = link(&tn, u, v).expect("arc");
                model.add_constraint(
                    LinearConstraint::new(vec![(f, one), (t, -one)], Sense::Le, zero)
                        .named(format!("carry_neg_{ii}_{}_{}", u + 1, v + 1)),
                )?;
            }
        }
        // hyperplanes: wn = 1 => a x + gamma <= b;  wp = 1 => a x >= b
        for v in 0..ni {
            let mut ax: Vec<(VarId, Coef)> =
                x.iter().enumerate().filter(|(_, &xv)| xv == 1).map(|(j, _)| (a[v][j], one)).collect();
            ax.push((b[v], -one));
            let mut row = ax.clone();
            row.push((wn[v], big_m));
            model.add_constraint(
                LinearConstraint::new(row, Sense::Le, big_m - gamma).named(format!("split_neg_{ii}_{}", v + 1)),
            )?;
            let mut row = ax;
            row.push((wp[v], -big_m));
            model.add_constraint(LinearConstraint::new(row, Sense::Ge, -big_m).named(format!("split_pos_{ii}_{}", v + 1)))?;
        }
        for v in ni..nn {
            let wt = model.add_variable(format!("wt_{ii}_{}", v + 1), unit)?;
            let mut row = vec![(wt, one)];
            row.extend(inflow(v, -one));
            model.add_constraint(LinearConstraint::new(row, Sense::Eq, zero).named(format!("leaf_{ii}_{}", v + 1)))?;
            terminal_flow[i].push((v, wt));
        }
    }
    let mut z = Vec::with_capacity(n);
    for i in 0..n {
        let zi = model.add_variable(format!("z_{}", i + 1), Domain::Binary)?;
        let mut loss = vec![(zi, one)];
        for &(v, wt) in &terminal_flow[owner[i]] {
            if skel.terminal_class(v) != ds.label(i) {
                loss.push((wt, -one));
            }
        }
        model.add_constraint(LinearConstraint::new(loss, Sense::Eq, zero).named(format!("loss_{}", i + 1)))?;
        z.push(zi);
    }
    Ok(DiagramVars { d, z })
}

/// Minimizes `sum_i z_i + C * sum_v d_v`.
pub fn build_training_milp(ds: &Dataset, skel: &DiagramSkeleton, c: Rational64) -> Result<MilpModel> {
    build_training_milp_with(ds, skel, c, DiagramOptions::default())
}

pub fn build_training_milp_with(
    ds: &Dataset,
    skel: &DiagramSkeleton,
    c: Rational64,
    opts: DiagramOptions,
) -> Result<MilpModel> {
    let mut model = MilpModel::new("diagram_training");
    let vars = build_core(&mut model, ds, skel, opts)?;
    let mut obj: Vec<(VarId, Coef)> = vars.z.iter().map(|&z| (z, Coef::one())).collect();
    if !c.is_zero() {
        obj.extend(vars.d.iter().map(|&d| (d, c)));
    }
    model.set_objective(obj, Coef::zero(), Direction::Minimize)?;
    Ok(model)
}

/// Extremizes the fairness metric subject to `sum d <= alpha` and
/// `sum z <= loss_budget`.
#[allow(clippy::too_many_arguments)]
pub fn build_fairness_milp(
    ds: &Dataset,
    skel: &DiagramSkeleton,
    groups: &GroupSpec,
    metric: FairnessMetric,
    direction: RangeDirection,
    alpha: usize,
    loss_budget: u64,
) -> Result<MilpModel> {
    build_fairness_milp_with(ds, skel, groups, metric, direction, alpha, loss_budget, DiagramOptions::default())
}

#[allow(clippy::too_many_arguments)]
pub fn build_fairness_milp_with(
    ds: &Dataset,
    skel: &DiagramSkeleton,
    groups: &GroupSpec,
    metric: FairnessMetric,
    direction: RangeDirection,
    alpha: usize,
    loss_budget: u64,
    opts: DiagramOptions,
) -> Result<MilpModel> {
    metric.groups(groups)?;
    let mut model = MilpModel::new(format!("diagram_{}_{}", metric.short_name(), direction.as_str()));
    let vars = build_core(&mut model, ds, skel, opts)?;
    let one = Coef::one();
    model.add_constraint(
        LinearConstraint::new(vars.d.iter().map(|&d| (d, one)).collect(), Sense::Le, Coef::from(alpha as i64))
            .named("sparsity"),
    )?;
    model.add_constraint(
        LinearConstraint::new(vars.z.iter().map(|&z| (z, one)).collect(), Sense::Le, Coef::from(loss_budget as i64))
            .named("performance"),
    )?;
    let obj = add_predictions_and_objective(&mut model, ds, &vars.z, groups, metric)?;
    model.set_objective(obj, Coef::zero(), direction.milp_direction())?;
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramNode {
    pub id: usize,
    pub level: usize,
    pub used: bool,
    pub a: Vec<f64>,
    pub b: f64,
    /// Targets on the negative and positive side (used nodes only).
    pub neg: Option<usize>,
    pub pos: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionDiagram {
    pub feature_names: Vec<String>,
    pub gamma: f64,
    pub nodes: Vec<DiagramNode>,
    /// Class per terminal; terminal `k` has node id `nodes.len() + k`.
    pub terminals: Vec<i8>,
}

fn dot(a: &[f64], x: &[u8]) -> f64 {
    a.iter().zip(x).filter(|(_, &xv)| xv == 1).map(|(a, _)| *a).sum()
}

impl DecisionDiagram {
    pub fn num_used(&self) -> usize {
        self.nodes.iter().filter(|n| n.used).count()
    }

    /// Follows the split tests from the root: the negative side is taken iff
    /// `a^T x + gamma <= b`.
    pub fn route(&self, x: &[u8]) -> Result<(usize, i8)> {
        if x.len() != self.feature_names.len() {
            return Err(Error::LengthMismatch { expected: self.feature_names.len(), actual: x.len() });
        }
        let ni = self.nodes.len();
        let mut v = 0;
        for _ in 0..=ni {
            if v >= ni {
                return Ok((v, self.terminals[v - ni]));
            }
            let node = &self.nodes[v];
            if !node.used {
                return Err(Error::Consistency(format!("route reached unused node {}", v + 1)));
            }
            let neg = dot(&node.a, x) + self.gamma <= node.b;
            let next = if neg { node.neg } else { node.pos };
            v = next.ok_or_else(|| Error::Consistency(format!("node {} lacks a link", v + 1)))?;
        }
        Err(Error::Consistency("routing does not terminate".into()))
    }

    pub fn predict(&self, x: &[u8]) -> Result<i8> {
        Ok(self.route(x)?.1)
    }

    pub fn predict_all(&self, ds: &Dataset) -> Result<Predictions> {
        Predictions::new(ds.rows().iter().map(|r| self.predict(r)).collect::<Result<Vec<_>>>()?)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        Ok(serde_json::from_value(value.clone())?)
    }

    /// Adjacency listing of the used nodes.
    pub fn render_text(&self) -> String {
        let ni = self.nodes.len();
        let name = |v: usize| {
            if v < ni { format!("n{}", v + 1) } else { format!("leaf{}({:+})", v - ni + 1, self.terminals[v - ni]) }
        };
        let mut out = String::new();
        for node in self.nodes.iter().filter(|n| n.used) {
            let mut terms: Vec<String> = Vec::new();
            for (j, &c) in node.a.iter().enumerate() {
                if c.abs() > 1e-12 {
                    terms.push(format!("{c:+.4}*{}", self.feature_names[j]));
                }
            }
            let lhs = if terms.is_empty() { "0".to_string() } else { terms.join(" ") };
            let _ = writeln!(
                out,
                "{} [level {}]: {lhs} > {:.4} ? -> {} : -> {}",
                name(node.id),
                node.level,
                node.b,
                node.pos.map_or("-".into(), name),
                node.neg.map_or("-".into(), name),
            );
        }
        out
    }
}

/// Extracts the diagram from the incumbent and re-routes every example,
/// checking terminal assignment, loss and prediction indicators.
///
/// The intercept of each used node is re-centered inside the interval that
/// the incumbent's routing allows, so that the floating-point split test
/// reproduces the certified routing exactly.
pub fn decode_diagram(model: &MilpModel, result: &SolveResult, ds: &Dataset, skel: &DiagramSkeleton) -> Result<DecisionDiagram> {
    let x = result.incumbent.as_ref().ok_or(Error::NoIncumbent)?;
    let var = |name: String| model.var_by_name(&name).ok_or_else(|| Error::Consistency(format!("model lacks `{name}`")));
    let val = |name: String| -> Result<f64> { Ok(x[var(name)?.0]) };
    let ni = skel.num_internal();
    let m = ds.m();
    let gamma_exact = gamma_of(model).unwrap_or(DEFAULT_GAMMA);
    let gamma = coef_to_f64(gamma_exact);
    let mut nodes = Vec::with_capacity(ni);
    for v in 0..ni {
        let used = val(format!("d_{}", v + 1))?.round() == 1.0;
        let a = (0..m).map(|j| val(format!("a_{}_{}", v + 1, j + 1))).collect::<Result<Vec<_>>>()?;
        let b = val(format!("b_{}", v + 1))?;
        let mut neg = None;
        let mut pos = None;
        if used {
            for &w in skel.succ(v) {
                if val(format!("tn_{}_{}", v + 1, w + 1))?.round() == 1.0 {
                    neg = Some(w);
                }
                if val(format!("tp_{}_{}", v + 1, w + 1))?.round() == 1.0 {
                    pos = Some(w);
                }
            }
        }
        nodes.push(DiagramNode { id: v, level: skel.level(v), used, a, b, neg, pos });
    }
    for node in &nodes {
        for t in [node.neg, node.pos].into_iter().flatten() {
            if t < ni && !nodes[t].used {
                return Err(Error::Consistency(format!("node {} links to unused node {}", node.id + 1, t + 1)));
            }
        }
    }

    // sides taken by each example according to the incumbent
    let owner = routing_owners(model, ds);
    let mut sides: Vec<Vec<(usize, bool)>> = vec![Vec::new(); ni];
    let mut leaf = vec![usize::MAX; ds.n()];
    for i in (0..ds.n()).filter(|&i| owner[i] == i) {
        for (v, s) in sides.iter_mut().enumerate() {
            if val(format!("wn_{}_{}", i + 1, v + 1))? > 0.5 {
                s.push((i, false));
            } else if val(format!("wp_{}_{}", i + 1, v + 1))? > 0.5 {
                s.push((i, true));
            }
        }
        let mut t = None;
        for v in ni..ni + 2 {
            if val(format!("wt_{}_{}", i + 1, v + 1))? > 0.5 {
                t = Some(v);
            }
        }
        leaf[i] = t.ok_or_else(|| Error::Consistency(format!("example {} reaches no terminal", i + 1)))?;
    }
    for (v, node) in nodes.iter_mut().enumerate() {
        if !node.used {
            continue;
        }
        let max_neg = sides[v].iter().filter(|s| !s.1).map(|s| dot(&node.a, ds.row(s.0))).fold(f64::NEG_INFINITY, f64::max);
        let min_pos = sides[v].iter().filter(|s| s.1).map(|s| dot(&node.a, ds.row(s.0))).fold(f64::INFINITY, f64::min);
        let lo = max_neg + gamma;
        if lo.is_finite() && min_pos.is_finite() {
            if lo < min_pos {
                node.b = 0.5 * (lo + min_pos);
            } else if let Some((a, b)) = widest_split(ds, &sides[v], gamma_exact) {
                // tight within the solver tolerance: re-fit with maximal slack
                node.a = a;
                node.b = b;
            }
        } else if lo.is_finite() && node.b < lo {
            node.b = lo;
        } else if min_pos.is_finite() && node.b > min_pos {
            node.b = min_pos;
        }
    }
    let diagram = DecisionDiagram { feature_names: ds.feature_names().to_vec(), gamma, nodes, terminals: vec![-1, 1] };
    for i in 0..ds.n() {
        let (t, class) = diagram.route(ds.row(i))?;
        if t != leaf[owner[i]] {
            return Err(Error::Consistency(format!("example {} routes to a different terminal", i + 1)));
        }
        if (val(format!("z_{}", i + 1))?.round() == 1.0) != (class != ds.label(i)) {
            return Err(Error::Consistency(format!("loss indicator of example {} disagrees", i + 1)));
        }
        if let Some(y) = model.var_by_name(&format!("yhat_{}", i + 1)) {
            if (x[y.0].round() == 1.0) != (class == 1) {
                return Err(Error::Consistency(format!("prediction of example {} disagrees", i + 1)));
            }
        }
    }
    Ok(diagram)
}

/// Recovers the split margin from the intercept's lower bound `-1 - gamma`.
fn gamma_of(model: &MilpModel) -> Option<Rational64> {
    let b = model.var_by_name("b_1")?;
    match model.variable(b).domain {
        Domain::Continuous { lb, .. } => Some(-lb - Rational64::one()),
        _ => None,
    }
}

/// Hyperplane `(a, b)` reproducing the given sides (`true` = positive) with
/// the largest extra slack `s`: `a x + gamma + s <= b` on the negative side,
/// `a x >= b + s` on the positive side. `None` if no positive slack exists.
fn widest_split(ds: &Dataset, sides: &[(usize, bool)], gamma: Rational64) -> Option<(Vec<f64>, f64)> {
    let one = Coef::one();
    let mut lp = MilpModel::new("split");
    let unit = Domain::Continuous { lb: -one, ub: one };
    let a: Vec<VarId> = (0..ds.m()).map(|j| lp.add_variable(format!("a{j}"), unit)).collect::<Result<_>>().ok()?;
    let b = lp.add_variable("b", Domain::Continuous { lb: -one - gamma, ub: one }).ok()?;
    let slack = lp.add_variable("s", Domain::Continuous { lb: Coef::zero(), ub: one }).ok()?;
    for &(i, pos) in sides {
        let mut row: Vec<(VarId, Coef)> =
            ds.row(i).iter().enumerate().filter(|(_, &x)| x == 1).map(|(j, _)| (a[j], one)).collect();
        row.push((b, -one));
        let c = if pos {
            row.push((slack, -one));
            LinearConstraint::new(row, Sense::Ge, Coef::zero())
        } else {
            row.push((slack, one));
            LinearConstraint::new(row, Sense::Le, -gamma)
        };
        lp.add_constraint(c).ok()?;
    }
    lp.set_objective(vec![(slack, one)], Coef::zero(), Direction::Maximize).ok()?;
    let sol = crate::solver::solve_lp(&lp);
    match sol.objective {
        Some(obj) if obj > 1e-9 => Some((a.iter().map(|v| sol.values[v.0]).collect(), sol.values[b.0])),
        _ => None,
    }
}

/// Integer assignment (links, node use, sides, losses, predictions)
/// realizing `diag` on `ds`, suitable as a warm start.
pub fn diagram_assignment(
    diag: &DecisionDiagram,
    model: &MilpModel,
    ds: &Dataset,
    skel: &DiagramSkeleton,
) -> Result<Vec<(VarId, i64)>> {
    let var = |name: String| model.var_by_name(&name).ok_or_else(|| Error::Consistency(format!("model lacks `{name}`")));
    let ni = skel.num_internal();
    let owner = routing_owners(model, ds);
    let mut out = Vec::new();
    for (v, node) in diag.nodes.iter().enumerate() {
        out.push((var(format!("d_{}", v + 1))?, node.used as i64));
        for &w in skel.succ(v) {
            out.push((var(format!("tn_{}_{}", v + 1, w + 1))?, (node.used && node.neg == Some(w)) as i64));
            out.push((var(format!("tp_{}_{}", v + 1, w + 1))?, (node.used && node.pos == Some(w)) as i64));
        }
    }
    for i in 0..ds.n() {
        let x = ds.row(i);
        let mut g = vec![0i64; skel.depth()];
        let mut v = 0;
        while v < ni {
            let node = &diag.nodes[v];
            let neg = dot(&node.a, x) + diag.gamma <= node.b;
            g[skel.level(v)] = (!neg) as i64;
            v = if neg { node.neg } else { node.pos }.ok_or_else(|| Error::Consistency("missing link".into()))?;
        }
        if owner[i] == i {
            for (l, &gv) in g.iter().enumerate() {
                out.push((var(format!("g_{}_{}", i + 1, l))?, gv));
            }
        }
        let class = skel.terminal_class(v);
        out.push((var(format!("z_{}", i + 1))?, (class != ds.label(i)) as i64));
        if let Some(y) = model.var_by_name(&format!("yhat_{}", i + 1)) {
            out.push((y, (class == 1) as i64));
        }
    }
    Ok(out)
}
