//! Rashomon-set exploration: the reference fit, loss budgets, single range
//! queries, warm-started sweeps with restarts, and result persistence.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use num_rational::Rational64;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::dataio::{append_bias, majority_loss, Dataset, GroupSpec};
use crate::diagrams::{self, DecisionDiagram, DiagramOptions, DiagramSkeleton};
use crate::error::{Error, Result};
use crate::fairness::{mismatches, to_f64, FairnessMetric, Predictions};
use crate::milp::{MilpModel, VarId};
use crate::scoring::{self, CoefficientDomain, RangeDirection, ScoringOptions, ScoringSystem};
use crate::solver::{solve_milp, SolveConfig, SolveResult, SolveStatus};

/// Budget fractions used when a plan does not list its own.
pub const DEFAULT_P: [f64; 4] = [0.01, 0.05, 0.10, 0.20];
pub const DEFAULT_MAX_RESTARTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "lowercase")]
pub enum ModelClass {
    Scoring { domain: CoefficientDomain, options: ScoringOptions },
    Diagram { skeleton: DiagramSkeleton, options: DiagramOptions },
}

impl ModelClass {
    pub fn scoring(domain: CoefficientDomain) -> Self {
        ModelClass::Scoring { domain, options: ScoringOptions::default() }
    }

    pub fn diagram(skeleton: DiagramSkeleton) -> Self {
        ModelClass::Diagram { skeleton, options: DiagramOptions::default() }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelClass::Scoring { .. } => "scoring",
            ModelClass::Diagram { .. } => "diagram",
        }
    }

    /// Scoring systems need the bias column; diagrams must not have it.
    pub fn prepare(&self, raw: &Dataset) -> Result<Dataset> {
        match self {
            ModelClass::Scoring { .. } if !raw.bias_appended() => append_bias(raw),
            ModelClass::Diagram { .. } if raw.bias_appended() => Ok(raw.without_bias()),
            _ => Ok(raw.clone()),
        }
    }

    pub fn build_training(&self, ds: &Dataset, c: Rational64) -> Result<MilpModel> {
        match self {
            ModelClass::Scoring { domain, options } => scoring::build_training_milp_with(ds, domain, c, *options),
            ModelClass::Diagram { skeleton, options } => diagrams::build_training_milp_with(ds, skeleton, c, *options),
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn build_query(
        &self,
        ds: &Dataset,
        groups: &GroupSpec,
        metric: FairnessMetric,
        direction: RangeDirection,
        alpha: usize,
        count_budget: u64,
    ) -> Result<MilpModel> {
        match self {
            ModelClass::Scoring { domain, options } => {
                scoring::build_fairness_milp_with(ds, domain, groups, metric, direction, alpha, count_budget, *options)
            }
            ModelClass::Diagram { skeleton, options } => {
                diagrams::build_fairness_milp_with(ds, skeleton, groups, metric, direction, alpha, count_budget, *options)
            }
        }
    }

    pub fn decode(&self, model: &MilpModel, result: &SolveResult, ds: &Dataset) -> Result<FittedModel> {
        match self {
            ModelClass::Scoring { .. } => Ok(FittedModel::Scoring(scoring::decode_scoring_system(model, result, ds)?)),
            ModelClass::Diagram { skeleton, .. } => {
                Ok(FittedModel::Diagram(diagrams::decode_diagram(model, result, ds, skeleton)?))
            }
        }
    }

    pub fn warm_start(&self, fitted: &FittedModel, model: &MilpModel, ds: &Dataset) -> Result<Vec<(VarId, i64)>> {
        match (self, fitted) {
            (ModelClass::Scoring { .. }, FittedModel::Scoring(s)) => s.assignment(model, ds),
            (ModelClass::Diagram { skeleton, .. }, FittedModel::Diagram(d)) => {
                diagrams::diagram_assignment(d, model, ds, skeleton)
            }
            _ => Err(Error::Argument("model does not belong to this hypothesis class".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "lowercase")]
pub enum FittedModel {
    Scoring(ScoringSystem),
    Diagram(DecisionDiagram),
}

impl FittedModel {
    pub fn class_name(&self) -> &'static str {
        match self {
            FittedModel::Scoring(_) => "scoring",
            FittedModel::Diagram(_) => "diagram",
        }
    }

    pub fn predict_all(&self, ds: &Dataset) -> Result<Predictions> {
        match self {
            FittedModel::Scoring(s) => s.predict_all(ds),
            FittedModel::Diagram(d) => d.predict_all(ds),
        }
    }

    /// Nonzero coefficients (bias included) or used internal nodes.
    pub fn sparsity(&self) -> usize {
        match self {
            FittedModel::Scoring(s) => s.sparsity(),
            FittedModel::Diagram(d) => d.num_used(),
        }
    }

    pub fn loss_count(&self, ds: &Dataset) -> Result<u64> {
        Ok(mismatches(self.predict_all(ds)?.values(), ds.labels())? as u64)
    }

    /// Re-expresses the model over `ds`'s columns, matching features by
    /// name. A feature the model relies on but `ds` lacks is an error;
    /// columns unknown to the model get weight zero.
    pub fn align_to(&self, ds: &Dataset) -> Result<FittedModel> {
        let index = |name: &str| {
            ds.feature_index(name).ok_or_else(|| Error::Argument(format!("feature `{name}` missing from the dataset")))
        };
        match self {
            FittedModel::Scoring(s) => {
                let mut coef = vec![0; ds.m()];
                for (name, &c) in s.feature_names.iter().zip(&s.coefficients) {
                    if c != 0 {
                        coef[index(name)?] = c;
                    }
                }
                Ok(FittedModel::Scoring(ScoringSystem::new(ds.feature_names().to_vec(), coef)?))
            }
            FittedModel::Diagram(d) => {
                let mut out = d.clone();
                out.feature_names = ds.feature_names().to_vec();
                for (node, src) in out.nodes.iter_mut().zip(&d.nodes) {
                    node.a = vec![0.0; ds.m()];
                    for (name, &w) in d.feature_names.iter().zip(&src.a) {
                        if w != 0.0 && src.used {
                            node.a[index(name)?] = w;
                        }
                    }
                }
                Ok(FittedModel::Diagram(out))
            }
        }
    }

    pub fn render(&self) -> String {
        match self {
            FittedModel::Scoring(s) => s.render_table(),
            FittedModel::Diagram(d) => d.render_text(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        Ok(serde_json::from_value(value.clone())?)
    }
}

/// Outcome of training with no sparsity penalty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFit {
    pub status: SolveStatus,
    /// Misclassifications of the reference model.
    pub loss_count: u64,
    /// Proven lower bound on the misclassifications of any model.
    pub lower_bound_count: u64,
    pub l_star: f64,
    pub model: FittedModel,
    pub wall_time: f64,
}

/// Solves the training problem with `C = 0`. A time limit without an
/// incumbent is a [`Error::Solver`] failure; with an incumbent the fit is
/// returned with its status and proven bound.
pub fn reference_loss(ds: &Dataset, class: &ModelClass, cfg: &SolveConfig) -> Result<ReferenceFit> {
    let model = class.build_training(ds, Rational64::zero())?;
    let result = solve_milp(&model, cfg);
    if result.incumbent.is_none() {
        return Err(Error::Solver(format!("training problem ended {} without a model", result.status)));
    }
    let fitted = class.decode(&model, &result, ds)?;
    let loss_count = fitted.loss_count(ds)?;
    let lower_bound_count = if result.status == SolveStatus::Optimal {
        loss_count
    } else {
        (result.best_bound - 1e-6).ceil().max(0.0) as u64
    };
    Ok(ReferenceFit {
        status: result.status,
        loss_count,
        lower_bound_count,
        l_star: loss_count as f64 / ds.n() as f64,
        model: fitted,
        wall_time: result.wall_time.as_secs_f64(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RashomonBudget {
    pub p: f64,
    pub l_star: f64,
    pub l_maj: f64,
    pub loss_bound: f64,
    pub count_budget: u64,
}

/// Interpolates between the optimal and the majority loss.
pub fn make_budget(p: f64, l_star: f64, l_maj: f64, n: usize) -> Result<RashomonBudget> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Argument(format!("budget fraction {p} outside [0, 1]")));
    }
    let loss_bound = (1.0 - p) * l_star + p * l_maj;
    Ok(RashomonBudget { p, l_star, l_maj, loss_bound, count_budget: count_of(loss_bound, n) })
}

/// Budget `L_star + epsilon` given as a raw loss tolerance.
pub fn budget_from_epsilon(epsilon: f64, l_star: f64, l_maj: f64, n: usize) -> Result<RashomonBudget> {
    if !epsilon.is_finite() {
        return Err(Error::Argument("epsilon must be finite".into()));
    }
    let loss_bound = l_star + epsilon;
    let p = if l_maj > l_star { epsilon / (l_maj - l_star) } else { 0.0 };
    Ok(RashomonBudget { p, l_star, l_maj, loss_bound, count_budget: count_of(loss_bound, n) })
}

fn count_of(loss_bound: f64, n: usize) -> u64 {
    (n as f64 * loss_bound + 1e-9).floor().max(0.0) as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowStatus {
    Optimal,
    Feasible,
    Infeasible,
    Unbounded,
    TimeLimit,
    /// The query could not be run; see the row's `error`.
    Error,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Optimal => "Optimal",
            RowStatus::Feasible => "Feasible",
            RowStatus::Infeasible => "Infeasible",
            RowStatus::Unbounded => "Unbounded",
            RowStatus::TimeLimit => "TimeLimit",
            RowStatus::Error => "Error",
        }
    }

    /// Rows that a restart could still improve.
    pub fn is_open(self) -> bool {
        matches!(self, RowStatus::Feasible | RowStatus::TimeLimit)
    }
}

impl From<SolveStatus> for RowStatus {
    fn from(s: SolveStatus) -> Self {
        match s {
            SolveStatus::Optimal => RowStatus::Optimal,
            SolveStatus::Feasible => RowStatus::Feasible,
            SolveStatus::Infeasible => RowStatus::Infeasible,
            SolveStatus::Unbounded => RowStatus::Unbounded,
            SolveStatus::TimeLimit => RowStatus::TimeLimit,
        }
    }
}

impl std::fmt::Display for RowStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub metric: FairnessMetric,
    pub direction: RangeDirection,
    pub alpha: usize,
    pub budget: RashomonBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeResult {
    pub class: String,
    pub metric: FairnessMetric,
    pub direction: RangeDirection,
    pub alpha: usize,
    pub p: f64,
    pub seed: u64,
    pub count_budget: u64,
    /// Metric value of the certified model.
    pub value: Option<f64>,
    pub value_exact: Option<Rational64>,
    pub best_bound: Option<f64>,
    pub gap: Option<f64>,
    pub status: RowStatus,
    pub model: Option<FittedModel>,
    pub loss_count: Option<u64>,
    pub sparsity: Option<usize>,
    pub wall_time: f64,
    pub nodes: u64,
    pub restarts: usize,
    /// Set for infeasible-by-construction rows and failed queries.
    pub note: Option<String>,
}

impl RangeResult {
    fn empty(class: &ModelClass, q: &Query, seed: u64, status: RowStatus, note: Option<String>) -> Self {
        RangeResult {
            class: class.name().into(),
            metric: q.metric,
            direction: q.direction,
            alpha: q.alpha,
            p: q.budget.p,
            seed,
            count_budget: q.budget.count_budget,
            value: None,
            value_exact: None,
            best_bound: None,
            gap: None,
            status,
            model: None,
            loss_count: None,
            sparsity: None,
            wall_time: 0.0,
            nodes: 0,
            restarts: 0,
            note,
        }
    }

    fn key(&self) -> CellKey {
        CellKey::new(&self.class, self.seed, self.metric, self.direction, self.alpha, self.p)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CellKey(String, u64, FairnessMetric, RangeDirection, usize, u64);

impl CellKey {
    fn new(class: &str, seed: u64, metric: FairnessMetric, dir: RangeDirection, alpha: usize, p: f64) -> Self {
        CellKey(class.into(), seed, metric, dir, alpha, p.to_bits())
    }
}

/// `true` if `a` is strictly better than `b` in direction `dir`.
fn better(dir: RangeDirection, a: Rational64, b: Rational64) -> bool {
    match dir {
        RangeDirection::Min => a < b,
        RangeDirection::Max => a > b,
    }
}

/// Solves one range query. A budget below the proven minimum loss is
/// answered `Infeasible` without calling the solver. The decoded model is
/// re-checked against the budget, the sparsity limit and the certified
/// objective before the row is returned.
#[allow(clippy::too_many_arguments)]
pub fn explore(
    ds: &Dataset,
    groups: &GroupSpec,
    class: &ModelClass,
    query: &Query,
    reference: &ReferenceFit,
    warm: Option<&FittedModel>,
    cfg: &SolveConfig,
    seed: u64,
) -> Result<RangeResult> {
    query.metric.groups(groups)?;
    if query.budget.count_budget < reference.lower_bound_count {
        let note = format!(
            "budget {} is below the minimum loss {}; no model qualifies",
            query.budget.count_budget, reference.lower_bound_count
        );
        return Ok(RangeResult::empty(class, query, seed, RowStatus::Infeasible, Some(note)));
    }
    let mut model = class.build_query(ds, groups, query.metric, query.direction, query.alpha, query.budget.count_budget)?;
    if let Some(w) = warm {
        if admissible(w, ds, query)? {
            model.set_warm_start(Some(class.warm_start(w, &model, ds)?))?;
        }
    }
    let result = solve_milp(&model, cfg);
    let mut row = RangeResult::empty(class, query, seed, result.status.into(), None);
    row.wall_time = result.wall_time.as_secs_f64();
    row.nodes = result.node_count;
    if result.best_bound.is_finite() {
        row.best_bound = Some(result.best_bound);
    }
    if result.incumbent.is_some() {
        let fitted = class.decode(&model, &result, ds)?;
        let value = query.metric.evaluate(&fitted.predict_all(ds)?, groups)?;
        verify_row(&fitted, ds, query, value, &result)?;
        row.value = Some(to_f64(value));
        row.value_exact = Some(value);
        row.gap = Some(if result.status == SolveStatus::Optimal { 0.0 } else { result.gap() });
        row.loss_count = Some(fitted.loss_count(ds)?);
        row.sparsity = Some(fitted.sparsity());
        row.model = Some(fitted);
    }
    Ok(row)
}

fn admissible(m: &FittedModel, ds: &Dataset, q: &Query) -> Result<bool> {
    Ok(m.sparsity() <= q.alpha && m.loss_count(ds)? <= q.budget.count_budget)
}

fn verify_row(m: &FittedModel, ds: &Dataset, q: &Query, value: Rational64, result: &SolveResult) -> Result<()> {
    if !admissible(m, ds, q)? {
        return Err(Error::Consistency("decoded model violates the sparsity or loss budget".into()));
    }
    if let Some(obj) = &result.objective_exact {
        let exact = num_rational::BigRational::new((*value.numer()).into(), (*value.denom()).into());
        if exact != *obj {
            return Err(Error::Consistency(format!("decoded metric {value} differs from the certified objective {obj}")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub class: ModelClass,
    pub alphas: Vec<usize>,
    pub ps: Vec<f64>,
    pub metrics: Vec<FairnessMetric>,
    pub directions: Vec<RangeDirection>,
    pub seeds: Vec<u64>,
    pub time_limit: Duration,
    pub threads: usize,
    pub max_restarts: usize,
}

impl SweepPlan {
    pub fn new(class: ModelClass, alphas: Vec<usize>) -> Self {
        SweepPlan {
            class,
            alphas,
            ps: DEFAULT_P.to_vec(),
            metrics: vec![FairnessMetric::StatisticalParity, FairnessMetric::EqualOpportunity],
            directions: vec![RangeDirection::Min, RangeDirection::Max],
            seeds: vec![0],
            time_limit: Duration::from_secs(60),
            threads: 1,
            max_restarts: DEFAULT_MAX_RESTARTS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.ps.is_empty() || self.metrics.is_empty() || self.directions.is_empty() {
            return Err(Error::Argument("sweep lists must be nonempty".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Argument("sweep needs at least one seed".into()));
        }
        if self.alphas.contains(&0) {
            return Err(Error::Argument("sparsity limits must be positive".into()));
        }
        if let Some(p) = self.ps.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Argument(format!("budget fraction {p} outside [0, 1]")));
        }
        self.solve_config().validate()
    }

    pub fn solve_config(&self) -> SolveConfig {
        SolveConfig { time_limit: self.time_limit, threads: self.threads, ..Default::default() }
    }

    /// Cells in execution order: α ascending, then p ascending.
    fn cells(&self) -> Vec<(usize, f64, FairnessMetric, RangeDirection)> {
        let mut alphas = self.alphas.clone();
        alphas.sort_unstable();
        alphas.dedup();
        let mut ps = self.ps.clone();
        ps.sort_by(f64::total_cmp);
        ps.dedup();
        let mut out = Vec::new();
        for &a in &alphas {
            for &p in &ps {
                for &metric in &self.metrics {
                    for &dir in &self.directions {
                        out.push((a, p, metric, dir));
                    }
                }
            }
        }
        out
    }
}

/// Append-only JSON-lines record of completed rows. Re-opening a log
/// returns the latest record per cell.
pub struct ResumeLog {
    path: PathBuf,
}

impl ResumeLog {
    pub fn open(path: impl Into<PathBuf>) -> Result<(Self, Vec<RangeResult>)> {
        let path = path.into();
        let mut rows: Vec<RangeResult> = Vec::new();
        if path.exists() {
            let file = File::open(&path)?;
            let mut index: HashMap<CellKey, usize> = HashMap::new();
            for line in BufReader::new(file).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let row: RangeResult = serde_json::from_str(&line)?;
                match index.get(&row.key()) {
                    Some(&k) => rows[k] = row,
                    None => {
                        index.insert(row.key(), rows.len());
                        rows.push(row);
                    }
                }
            }
        }
        Ok((ResumeLog { path }, rows))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, row: &RangeResult) -> Result<()> {
        let mut f = OpenOptions::new().create(true).append(true).open(&self.path)?;
        writeln!(f, "{}", serde_json::to_string(row)?)?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub reference: ReferenceFit,
    pub results: Vec<RangeResult>,
}

/// Runs every cell of `plan` on one prepared dataset, labelling rows with
/// `seed`.
///
/// Each query is warm-started from the best admissible incumbent among the
/// completed cells with smaller or equal α and p (same metric and
/// direction) and the reference model. Rows that end without proof of
/// optimality are revisited in up to `plan.max_restarts` further passes,
/// whenever a tighter cell offers a better starting model. Failed queries
/// become `Error` rows. Cells already present in `done` (e.g. from a
/// [`ResumeLog`]) are not re-run; every new row is appended to `log`.
pub fn run_sweep(
    ds: &Dataset,
    groups: &GroupSpec,
    plan: &SweepPlan,
    seed: u64,
    done: &[RangeResult],
    mut log: Option<&mut ResumeLog>,
) -> Result<SweepOutcome> {
    plan.validate()?;
    let cfg = plan.solve_config();
    let reference = reference_loss(ds, &plan.class, &cfg)?;
    let l_maj = to_f64(majority_loss(ds));
    let class = &plan.class;
    let cells = plan.cells();

    let prior: HashMap<CellKey, &RangeResult> = done.iter().map(|r| (r.key(), r)).collect();
    let mut rows: Vec<RangeResult> = Vec::with_capacity(cells.len());
    let mut queries: Vec<Query> = Vec::with_capacity(cells.len());
    for &(alpha, p, metric, direction) in &cells {
        let budget = make_budget(p, reference.l_star, l_maj, ds.n())?;
        let q = Query { metric, direction, alpha, budget };
        queries.push(q);
        let key = CellKey::new(class.name(), seed, metric, direction, alpha, p);
        if let Some(r) = prior.get(&key) {
            rows.push((*r).clone());
            continue;
        }
        let warm = best_start(ds, groups, &q, &rows, &queries, &reference)?;
        let row = run_cell(ds, groups, class, &q, &reference, warm.as_ref().map(|w| &w.0), &cfg, seed);
        if let Some(l) = log.as_deref_mut() {
            l.append(&row)?;
        }
        rows.push(row);
    }

    for pass in 1..=plan.max_restarts {
        let mut changed = false;
        for k in 0..rows.len() {
            if !rows[k].status.is_open() {
                continue;
            }
            let q = queries[k];
            let Some((start, start_value)) = best_start(ds, groups, &q, &rows[..k], &queries[..k], &reference)? else {
                continue;
            };
            if rows[k].value_exact.is_some_and(|v| !better(q.direction, start_value, v)) {
                continue;
            }
            log::info!("restart pass {pass}: alpha {} p {} {} {}", q.alpha, q.budget.p, q.metric, q.direction);
            let mut row = run_cell(ds, groups, class, &q, &reference, Some(&start), &cfg, seed);
            row.restarts = rows[k].restarts + 1;
            let improves = match (row.value_exact, rows[k].value_exact) {
                (Some(a), Some(b)) => better(q.direction, a, b) || row.status == RowStatus::Optimal,
                (Some(_), None) => true,
                _ => false,
            };
            if improves {
                if let Some(l) = log.as_deref_mut() {
                    l.append(&row)?;
                }
                rows[k] = row;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(SweepOutcome { reference, results: rows })
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    ds: &Dataset,
    groups: &GroupSpec,
    class: &ModelClass,
    q: &Query,
    reference: &ReferenceFit,
    warm: Option<&FittedModel>,
    cfg: &SolveConfig,
    seed: u64,
) -> RangeResult {
    match explore(ds, groups, class, q, reference, warm, cfg, seed) {
        Ok(row) => row,
        Err(e) => {
            log::warn!("query alpha {} p {} {} {} failed: {e}", q.alpha, q.budget.p, q.metric, q.direction);
            RangeResult::empty(class, q, seed, RowStatus::Error, Some(e.to_string()))
        }
    }
}

/// Best admissible model for `q` among the reference and the incumbents of
/// completed cells that are at least as constrained, with its metric value.
fn best_start(
    ds: &Dataset,
    groups: &GroupSpec,
    q: &Query,
    rows: &[RangeResult],
    queries: &[Query],
    reference: &ReferenceFit,
) -> Result<Option<(FittedModel, Rational64)>> {
    let tighter = rows.iter().zip(queries).filter(|(r, rq)| {
        r.metric == q.metric && r.direction == q.direction && rq.alpha <= q.alpha && rq.budget.p <= q.budget.p
    });
    let mut best: Option<(FittedModel, Rational64)> = None;
    let candidates = std::iter::once(&reference.model).chain(tighter.filter_map(|(r, _)| r.model.as_ref()));
    for m in candidates {
        if !admissible(m, ds, q)? {
            continue;
        }
        let Ok(v) = q.metric.evaluate(&m.predict_all(ds)?, groups) else { continue };
        if best.as_ref().is_none_or(|b| better(q.direction, v, b.1)) {
            best = Some((m.clone(), v));
        }
    }
    Ok(best)
}

/// Violations of interval nesting: for each class, seed and metric, the
/// `[min, max]` interval of a cell must contain that of every cell with
/// smaller or equal α and p. Only optimal rows are compared.
pub fn nesting_violations(results: &[RangeResult], slack: f64) -> Vec<String> {
    let mut out = Vec::new();
    let find = |r: &RangeResult, dir: RangeDirection| {
        results
            .iter()
            .find(|o| {
                o.class == r.class && o.seed == r.seed && o.metric == r.metric && o.alpha == r.alpha && o.p == r.p
                    && o.direction == dir
            })
            .filter(|o| o.status == RowStatus::Optimal)
            .and_then(|o| o.value)
    };
    for inner in results.iter().filter(|r| r.status == RowStatus::Optimal) {
        for outer in results.iter().filter(|r| r.status == RowStatus::Optimal) {
            let comparable = inner.class == outer.class
                && inner.seed == outer.seed
                && inner.metric == outer.metric
                && inner.direction == outer.direction
                && inner.alpha <= outer.alpha
                && inner.p <= outer.p;
            if !comparable {
                continue;
            }
            let (Some(a), Some(b)) = (inner.value, outer.value) else { continue };
            let ok = match inner.direction {
                RangeDirection::Min => b <= a + slack,
                RangeDirection::Max => b >= a - slack,
            };
            if !ok {
                out.push(format!(
                    "{} {} {}: alpha {} p {} gives {a} but alpha {} p {} gives {b}",
                    inner.class, inner.metric, inner.direction, inner.alpha, inner.p, outer.alpha, outer.p
                ));
            }
        }
        // min <= max within the cell
        if inner.direction == RangeDirection::Min {
            if let (Some(lo), Some(hi)) = (inner.value, find(inner, RangeDirection::Max)) {
                if lo > hi + slack {
                    out.push(format!("{} {}: alpha {} p {} has min {lo} > max {hi}", inner.class, inner.metric, inner.alpha, inner.p));
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

impl ExportFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => ExportFormat::Json,
            _ => ExportFormat::Csv,
        }
    }
}

pub const RESULT_COLUMNS: [&str; 11] =
    ["class", "metric", "direction", "alpha", "p", "value", "bound", "gap", "status", "time", "seed"];

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes one row per result, in the given order.
pub fn export_results(results: &[RangeResult], path: &Path, format: ExportFormat) -> Result<()> {
    if results.is_empty() {
        return Err(Error::Argument("no results to export".into()));
    }
    match format {
        ExportFormat::Json => {
            let f = File::create(path)?;
            serde_json::to_writer_pretty(std::io::BufWriter::new(f), results)?;
        }
        ExportFormat::Csv => {
            let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
            w.write_record(RESULT_COLUMNS).map_err(csv_err)?;
            for r in results {
                w.write_record([
                    r.class.clone(),
                    r.metric.short_name().into(),
                    r.direction.as_str().into(),
                    r.alpha.to_string(),
                    r.p.to_string(),
                    opt(r.value),
                    opt(r.best_bound),
                    opt(r.gap),
                    r.status.as_str().into(),
                    r.wall_time.to_string(),
                    r.seed.to_string(),
                ])
                .map_err(csv_err)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

pub fn load_results_json(path: &Path) -> Result<Vec<RangeResult>> {
    let f = File::open(path).map_err(|e| Error::Load { path: path.into(), reason: e.to_string() })?;
    Ok(serde_json::from_reader(BufReader::new(f))?)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Mean and standard deviation of a cell's value over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub class: String,
    pub metric: FairnessMetric,
    pub direction: RangeDirection,
    pub alpha: usize,
    pub p: f64,
    pub mean: Option<f64>,
    /// Sample standard deviation (0 for a single seed).
    pub std: Option<f64>,
    /// Seeds contributing a value.
    pub count: usize,
    pub seeds: usize,
}

/// Groups rows by (class, metric, direction, α, p) in first-seen order.
pub fn summarize(results: &[RangeResult]) -> Vec<SummaryRow> {
    let mut order: Vec<SummaryRow> = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    for r in results {
        let k = order.iter().position(|s| {
            s.class == r.class && s.metric == r.metric && s.direction == r.direction && s.alpha == r.alpha && s.p == r.p
        });
        let k = match k {
            Some(k) => k,
            None => {
                order.push(SummaryRow {
                    class: r.class.clone(),
                    metric: r.metric,
                    direction: r.direction,
                    alpha: r.alpha,
                    p: r.p,
                    mean: None,
                    std: None,
                    count: 0,
                    seeds: 0,
                });
                values.push(Vec::new());
                order.len() - 1
            }
        };
        order[k].seeds += 1;
        if let Some(v) = r.value {
            values[k].push(v);
        }
    }
    for (row, vals) in order.iter_mut().zip(&values) {
        row.count = vals.len();
        if vals.is_empty() {
            continue;
        }
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = if vals.len() > 1 { vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        row.mean = Some(mean);
        row.std = Some(var.sqrt());
    }
    order
}

pub fn export_summary(rows: &[SummaryRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Argument("no rows to summarize".into()));
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["class", "metric", "direction", "alpha", "p", "mean", "std", "count", "seeds"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.class.clone(),
            r.metric.short_name().into(),
            r.direction.as_str().into(),
            r.alpha.to_string(),
            r.p.to_string(),
            opt(r.mean),
            opt(r.std),
            r.count.to_string(),
            r.seeds.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::groups_from_feature;
    use crate::synth::random_dataset;

    #[test]
    fn budget_examples() {
        let b = make_budget(0.2, 0.1, 0.3, 100).unwrap();
        assert!((b.loss_bound - 0.14).abs() < 1e-12);
        assert_eq!(b.count_budget, 14);
        assert_eq!(make_budget(0.0, 0.25, 0.5, 24).unwrap().count_budget, 6);
        assert_eq!(make_budget(1.0, 0.25, 0.5, 24).unwrap().loss_bound, 0.5);
        assert!(make_budget(1.5, 0.1, 0.3, 10).is_err());
        assert_eq!(budget_from_epsilon(-0.05, 0.1, 0.3, 100).unwrap().count_budget, 5);
    }

    fn setup() -> (Dataset, GroupSpec, ModelClass) {
        let raw = random_dataset(16, 2, 0.2, 7).unwrap();
        let class = ModelClass::scoring(CoefficientDomain::uniform(3, &[-1, 1]).unwrap());
        let ds = class.prepare(&raw).unwrap();
        let g = groups_from_feature(&ds, "f1").unwrap();
        (ds, g, class)
    }

    #[test]
    fn sweep_rows_nest_and_resume() {
        let (ds, g, class) = setup();
        let mut plan = SweepPlan::new(class, vec![1, 2, 3]);
        plan.ps = vec![0.0, 0.2];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("resume.jsonl");
        let (mut log, done) = ResumeLog::open(&path).unwrap();
        assert!(done.is_empty());
        let out = run_sweep(&ds, &g, &plan, 0, &done, Some(&mut log)).unwrap();
        assert_eq!(out.results.len(), 3 * 2 * 2 * 2);
        assert!(out.results.iter().all(|r| r.status == RowStatus::Optimal || r.status == RowStatus::Infeasible));
        assert!(nesting_violations(&out.results, 1e-9).is_empty());

        let (_, done) = ResumeLog::open(&path).unwrap();
        assert_eq!(done, out.results);
        let again = run_sweep(&ds, &g, &plan, 0, &done, None).unwrap();
        assert_eq!(again.results, out.results);
    }

    #[test]
    fn export_round_trip_and_summary() {
        let (ds, g, class) = setup();
        let mut plan = SweepPlan::new(class, vec![2]);
        plan.ps = vec![0.2];
        plan.metrics = vec![FairnessMetric::StatisticalParity];
        let rows = run_sweep(&ds, &g, &plan, 3, &[], None).unwrap().results;
        let dir = tempfile::tempdir().unwrap();
        let json = dir.path().join("r.json");
        export_results(&rows, &json, ExportFormat::Json).unwrap();
        assert_eq!(load_results_json(&json).unwrap(), rows);
        let csv_path = dir.path().join("r.csv");
        export_results(&rows, &csv_path, ExportFormat::Csv).unwrap();
        let text = std::fs::read_to_string(&csv_path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("class,metric,direction,alpha,p,value,bound,gap,status,time,seed"));
        assert!(export_results(&[], &csv_path, ExportFormat::Csv).is_err());

        let mut two = rows.clone();
        for r in &rows {
            let mut r = r.clone();
            r.seed = 4;
            r.value = r.value.map(|v| v + 0.5);
            two.push(r);
        }
        let s = summarize(&two);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].count, 2);
        assert!((s[0].std.unwrap() - (0.125f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn budget_below_minimum_loss_skips_solver() {
        let (ds, g, class) = setup();
        let cfg = SolveConfig::default();
        let reference = reference_loss(&ds, &class, &cfg).unwrap();
        if reference.loss_count == 0 {
            return;
        }
        let l_maj = to_f64(majority_loss(&ds));
        let budget = budget_from_epsilon(-1.0 / ds.n() as f64, reference.l_star, l_maj, ds.n()).unwrap();
        let q = Query { metric: FairnessMetric::StatisticalParity, direction: RangeDirection::Min, alpha: 3, budget };
        let row = explore(&ds, &g, &class, &q, &reference, None, &cfg, 0).unwrap();
        assert_eq!(row.status, RowStatus::Infeasible);
        assert_eq!(row.nodes, 0);
        assert!(row.note.is_some());
    }
}
