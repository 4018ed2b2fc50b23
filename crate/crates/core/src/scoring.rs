//! Integer-coefficient scoring systems: the training and fairness MILPs,
//! decoding of incumbents, prediction, and rendering.
//!
//! Variable names in the built models (features and examples are 1-based):
//! `u_{j}_{w}` selects value `w` for coefficient `j` (negative values are
//! written with an `m` prefix, e.g. `u_2_m5`), `lambda_{j}` is the
//! coefficient, `z_{i}` the loss indicator and `yhat_{i}` the positive
//! prediction indicator.

use std::collections::BTreeMap;
use std::fmt::Write;

use num_rational::Rational64;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::dataio::{Dataset, GroupSpec, BIAS_NAME};
use crate::error::{Error, Result};
use crate::fairness::{FairnessMetric, Predictions};
use crate::milp::{Coef, Direction, Domain, LinearConstraint, MilpModel, Sense, VarId};
use crate::solver::SolveResult;

/// Nonzero coefficient values used throughout the experiments.
pub const DEFAULT_OMEGA: [i64; 14] = [-50, -30, -20, -10, -5, -2, -1, 1, 2, 5, 10, 20, 30, 50];

/// Candidate nonzero values per coefficient. Zero is always available and
/// is encoded by selecting no value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoefficientDomain {
    values: Vec<Vec<i64>>,
}

impl CoefficientDomain {
    /// One candidate list per coefficient; an empty list pins it to zero.
    pub fn per_feature(values: Vec<Vec<i64>>) -> Result<Self> {
        let mut clean = Vec::with_capacity(values.len());
        for (j, mut vals) in values.into_iter().enumerate() {
            if vals.contains(&0) {
                return Err(Error::Argument(format!("coefficient {j}: zero is implicit, do not list it")));
            }
            let len = vals.len();
            vals.sort_unstable();
            vals.dedup();
            if vals.len() != len {
                return Err(Error::Argument(format!("coefficient {j}: candidate values must be distinct")));
            }
            clean.push(vals);
        }
        Ok(CoefficientDomain { values: clean })
    }

    pub fn uniform(m: usize, values: &[i64]) -> Result<Self> {
        Self::per_feature(vec![values.to_vec(); m])
    }

    /// `{±1, ±2, ±5, ±10, ±20, ±30, ±50}` for each of `m` coefficients.
    pub fn default_for(m: usize) -> Self {
        CoefficientDomain { values: vec![DEFAULT_OMEGA.to_vec(); m] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self, j: usize) -> &[i64] {
        &self.values[j]
    }

    pub fn max_abs(&self, j: usize) -> i64 {
        self.values[j].iter().map(|v| v.abs()).max().unwrap_or(0)
    }

    pub fn contains(&self, j: usize, v: i64) -> bool {
        v == 0 || self.values[j].contains(&v)
    }

    /// Number of coefficient vectors, `prod_j (|values_j| + 1)`.
    pub fn num_configurations(&self) -> u128 {
        self.values.iter().fold(1u128, |acc, v| acc.saturating_mul(v.len() as u128 + 1))
    }
}

/// How the loss indicators treat an example whose score is exactly zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LossMargins {
    /// `z_i = 1` exactly when the prediction (with `sign(0) = -1`) differs
    /// from the label, so a zero score is correct for a negative example.
    #[default]
    SignConsistent,
    /// `z_i = 1[y_i x_i^T lambda <= 0]` for both labels: a zero score is
    /// always a loss. Kept for comparison; the prediction linking is then
    /// not consistent with `sign(0) = -1` on negative examples.
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoringOptions {
    pub gamma: Rational64,
    pub margins: LossMargins,
}

impl Default for ScoringOptions {
    fn default() -> Self {
        ScoringOptions { gamma: Rational64::new(1, 2), margins: LossMargins::SignConsistent }
    }
}

/// Per-example big-M constants of the loss constraints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BigMData {
    pub gamma: Rational64,
    pub m1: Vec<Rational64>,
    pub m2: Vec<Rational64>,
}

/// `M1_i = gamma + sum_j x_ij max|w_j|`, `M2_i = sum_j x_ij max|w_j|`.
pub fn compute_big_m(ds: &Dataset, dom: &CoefficientDomain, gamma: Rational64) -> Result<BigMData> {
    check_dims(ds, dom)?;
    let mut m1 = Vec::with_capacity(ds.n());
    let mut m2 = Vec::with_capacity(ds.n());
    for row in ds.rows() {
        let reach: i64 = row.iter().enumerate().map(|(j, &x)| x as i64 * dom.max_abs(j)).sum();
        m1.push(gamma + Rational64::from(reach));
        m2.push(Rational64::from(reach));
    }
    Ok(BigMData { gamma, m1, m2 })
}

fn check_dims(ds: &Dataset, dom: &CoefficientDomain) -> Result<()> {
    if dom.len() != ds.m() {
        return Err(Error::LengthMismatch { expected: ds.m(), actual: dom.len() });
    }
    Ok(())
}

fn u_name(j: usize, w: i64) -> String {
    if w < 0 { format!("u_{}_m{}", j + 1, -w) } else { format!("u_{}_{}", j + 1, w) }
}

/// Handles of the variables shared by the training and fairness models.
struct Core {
    u: Vec<Vec<(i64, VarId)>>,
    z: Vec<VarId>,
}

fn build_core(model: &mut MilpModel, ds: &Dataset, dom: &CoefficientDomain, opts: ScoringOptions) -> Result<Core> {
    check_dims(ds, dom)?;
    if !ds.bias_appended() {
        return Err(Error::InvalidState("scoring models need the bias column appended".into()));
    }
    let one = Coef::one();
    let mut u = Vec::with_capacity(ds.m());
    let mut lambda = Vec::with_capacity(ds.m());
    for j in 0..ds.m() {
        let vals = dom.values(j);
        let mut uj = Vec::with_capacity(vals.len());
        for &w in vals {
            let id = model.add_variable(u_name(j, w), Domain::Binary)?;
            model.set_priority(id, 2);
            uj.push((w, id));
        }
        let lo = vals.iter().copied().min().unwrap_or(0).min(0);
        let hi = vals.iter().copied().max().unwrap_or(0).max(0);
        let l = model.add_variable(format!("lambda_{}", j + 1), Domain::Integer { lb: lo, ub: hi })?;
        let mut link = vec![(l, one)];
        link.extend(uj.iter().map(|&(w, id)| (id, -Coef::from(w))));
        model.add_constraint(LinearConstraint::new(link, Sense::Eq, Coef::zero()).named(format!("coef_{}", j + 1)))?;
        if !uj.is_empty() {
            model.add_constraint(
                LinearConstraint::new(uj.iter().map(|&(_, id)| (id, one)).collect(), Sense::Le, one)
                    .named(format!("choice_{}", j + 1)),
            )?;
        }
        u.push(uj);
        lambda.push(l);
    }
    let bigm = compute_big_m(ds, dom, opts.gamma)?;
    let gamma = opts.gamma;
    let mut z = Vec::with_capacity(ds.n());
    for i in 0..ds.n() {
        let zi = model.add_variable(format!("z_{}", i + 1), Domain::Binary)?;
        z.push(zi);
        let y = Coef::from(ds.label(i) as i64);
        // y * score as terms over lambda
        let ys: Vec<(VarId, Coef)> =
            ds.row(i).iter().enumerate().filter(|(_, &x)| x == 1).map(|(j, _)| (lambda[j], y)).collect();
        let (m1, m2) = (bigm.m1[i], bigm.m2[i]);
        let negative_shift = ds.label(i) == -1 && opts.margins == LossMargins::SignConsistent;
        // M1 z + y s >= gamma (shifted down by one for negatives)
        let mut r1 = vec![(zi, m1)];
        r1.extend(ys.iter().copied());
        let rhs1 = if negative_shift { gamma - one } else { gamma };
        model.add_constraint(LinearConstraint::new(r1, Sense::Ge, rhs1).named(format!("loss_a_{}", i + 1)))?;
        // M2 (1 - z) >= y s, or (M2 + 1 - gamma)(1 - z) >= y s + 1 - gamma for negatives
        let zcoef = if negative_shift { m2 + one - gamma } else { m2 };
        let mut r2 = vec![(zi, zcoef)];
        r2.extend(ys.iter().copied());
        model.add_constraint(LinearConstraint::new(r2, Sense::Le, m2).named(format!("loss_b_{}", i + 1)))?;
    }
    Ok(Core { u, z })
}

pub fn build_training_milp(ds: &Dataset, dom: &CoefficientDomain, c: Rational64) -> Result<MilpModel> {
    build_training_milp_with(ds, dom, c, ScoringOptions::default())
}

/// Minimizes `sum_i z_i + C * sum_{j,w} u_jw`.
pub fn build_training_milp_with(
    ds: &Dataset,
    dom: &CoefficientDomain,
    c: Rational64,
    opts: ScoringOptions,
) -> Result<MilpModel> {
    let mut model = MilpModel::new("scoring_training");
    let core = build_core(&mut model, ds, dom, opts)?;
    let mut obj: Vec<(VarId, Coef)> = core.z.iter().map(|&z| (z, Coef::one())).collect();
    if !c.is_zero() {
        obj.extend(core.u.iter().flatten().map(|&(_, id)| (id, c)));
    }
    model.set_objective(obj, Coef::zero(), Direction::Minimize)?;
    Ok(model)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RangeDirection {
    Min,
    Max,
}

impl RangeDirection {
    pub fn as_str(self) -> &'static str {
        match self {
            RangeDirection::Min => "min",
            RangeDirection::Max => "max",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "min" | "minimize" => Some(RangeDirection::Min),
            "max" | "maximize" => Some(RangeDirection::Max),
            _ => None,
        }
    }

    pub fn milp_direction(self) -> Direction {
        match self {
            RangeDirection::Min => Direction::Minimize,
            RangeDirection::Max => Direction::Maximize,
        }
    }
}

impl std::fmt::Display for RangeDirection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Adds prediction indicators `yhat_i` linked to the loss indicators and
/// returns the fairness objective over them.
pub(crate) fn add_predictions_and_objective(
    model: &mut MilpModel,
    ds: &Dataset,
    z: &[VarId],
    groups: &GroupSpec,
    metric: FairnessMetric,
) -> Result<Vec<(VarId, Coef)>> {
    let (a, b) = metric.groups(groups)?;
    if a.iter().chain(b).any(|&i| i >= ds.n()) {
        return Err(Error::Group("group index outside the dataset".into()));
    }
    let one = Coef::one();
    let mut yhat = Vec::with_capacity(ds.n());
    for i in 0..ds.n() {
        let v = model.add_variable(format!("yhat_{}", i + 1), Domain::Binary)?;
        // y = +1: yhat = 1 - z;  y = -1: yhat = z
        let (zc, rhs) = if ds.label(i) == 1 { (one, one) } else { (-one, Coef::zero()) };
        model.add_constraint(
            LinearConstraint::new(vec![(v, one), (z[i], zc)], Sense::Eq, rhs).named(format!("pred_{}", i + 1)),
        )?;
        yhat.push(v);
    }
    let wa = Coef::new(1, a.len() as i64);
    let wb = Coef::new(1, b.len() as i64);
    let mut obj: Vec<(VarId, Coef)> = a.iter().map(|&i| (yhat[i], wa)).collect();
    obj.extend(b.iter().map(|&i| (yhat[i], -wb)));
    Ok(obj)
}

/// Extremizes the fairness metric subject to `sum u <= alpha` and
/// `sum z <= loss_budget`. The objective value is the metric itself in both
/// directions.
#[allow(clippy::too_many_arguments)]
pub fn build_fairness_milp(
    ds: &Dataset,
    dom: &CoefficientDomain,
    groups: &GroupSpec,
    metric: FairnessMetric,
    direction: RangeDirection,
    alpha: usize,
    loss_budget: u64,
) -> Result<MilpModel> {
    build_fairness_milp_with(ds, dom, groups, metric, direction, alpha, loss_budget, ScoringOptions::default())
}

#[allow(clippy::too_many_arguments)]
pub fn build_fairness_milp_with(
    ds: &Dataset,
    dom: &CoefficientDomain,
    groups: &GroupSpec,
    metric: FairnessMetric,
    direction: RangeDirection,
    alpha: usize,
    loss_budget: u64,
    opts: ScoringOptions,
) -> Result<MilpModel> {
    metric.groups(groups)?;
    let mut model = MilpModel::new(format!("scoring_{}_{}", metric.short_name(), direction.as_str()));
    let core = build_core(&mut model, ds, dom, opts)?;
    let one = Coef::one();
    model.add_constraint(
        LinearConstraint::new(core.u.iter().flatten().map(|&(_, id)| (id, one)).collect(), Sense::Le, Coef::from(alpha as i64))
            .named("sparsity"),
    )?;
    model.add_constraint(
        LinearConstraint::new(core.z.iter().map(|&z| (z, one)).collect(), Sense::Le, Coef::from(loss_budget as i64))
            .named("performance"),
    )?;
    let obj = add_predictions_and_objective(&mut model, ds, &core.z, groups, metric)?;
    model.set_objective(obj, Coef::zero(), direction.milp_direction())?;
    Ok(model)
}

/// Integer-coefficient linear classifier; the last coefficient multiplies
/// the bias column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoringSystem {
    pub feature_names: Vec<String>,
    pub coefficients: Vec<i64>,
}

impl ScoringSystem {
    pub fn new(feature_names: Vec<String>, coefficients: Vec<i64>) -> Result<Self> {
        if feature_names.len() != coefficients.len() {
            return Err(Error::LengthMismatch { expected: feature_names.len(), actual: coefficients.len() });
        }
        Ok(ScoringSystem { feature_names, coefficients })
    }

    pub fn zero(ds: &Dataset) -> Self {
        ScoringSystem { feature_names: ds.feature_names().to_vec(), coefficients: vec![0; ds.m()] }
    }

    pub fn score(&self, x: &[u8]) -> Result<i64> {
        if x.len() != self.coefficients.len() {
            return Err(Error::LengthMismatch { expected: self.coefficients.len(), actual: x.len() });
        }
        Ok(x.iter().zip(&self.coefficients).map(|(&x, &l)| x as i64 * l).sum())
    }

    /// `+1` iff the score is strictly positive.
    pub fn predict(&self, x: &[u8]) -> Result<i8> {
        Ok(if self.score(x)? > 0 { 1 } else { -1 })
    }

    pub fn predict_all(&self, ds: &Dataset) -> Result<Predictions> {
        let v = ds.rows().iter().map(|r| self.predict(r)).collect::<Result<Vec<_>>>()?;
        Predictions::new(v)
    }

    /// Number of nonzero coefficients, bias included.
    pub fn sparsity(&self) -> usize {
        self.coefficients.iter().filter(|&&c| c != 0).count()
    }

    /// `{feature: coefficient, ..., "threshold": bias}` with zero feature
    /// coefficients omitted.
    pub fn to_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        let mut threshold = 0;
        for (name, &c) in self.feature_names.iter().zip(&self.coefficients) {
            if name == BIAS_NAME {
                threshold = c;
            } else if c != 0 {
                map.insert(name.clone(), c.into());
            }
        }
        map.insert("threshold".into(), threshold.into());
        serde_json::Value::Object(map)
    }

    /// Rebuilds a system over `ds`'s features (bias appended) from
    /// [`to_json`](Self::to_json) output.
    pub fn from_json(value: &serde_json::Value, ds: &Dataset) -> Result<Self> {
        let obj = value.as_object().ok_or_else(|| Error::Argument("scoring system must be a JSON object".into()))?;
        if !ds.bias_appended() {
            return Err(Error::InvalidState("dataset needs the bias column".into()));
        }
        let mut sys = ScoringSystem::zero(ds);
        for (name, v) in obj {
            let c = v.as_i64().ok_or_else(|| Error::Argument(format!("coefficient of `{name}` is not an integer")))?;
            let key = if name == "threshold" { BIAS_NAME } else { name.as_str() };
            let j = ds.feature_index(key).ok_or_else(|| Error::Argument(format!("feature `{name}` not in dataset")))?;
            sys.coefficients[j] = c;
        }
        Ok(sys)
    }

    /// Two-column table of the nonzero coefficients and the threshold.
    pub fn render_table(&self) -> String {
        let mut rows: Vec<(String, String)> = Vec::new();
        let mut threshold = 0;
        for (name, &c) in self.feature_names.iter().zip(&self.coefficients) {
            if name == BIAS_NAME {
                threshold = c;
            } else if c != 0 {
                rows.push((name.clone(), c.to_string()));
            }
        }
        rows.push(("Threshold".into(), threshold.to_string()));
        let w1 = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max("Feature".len());
        let w2 = rows.iter().map(|r| r.1.len()).max().unwrap_or(0).max("Coefficient".len());
        let rule = format!("+-{}-+-{}-+\n", "-".repeat(w1), "-".repeat(w2));
        let mut out = String::new();
        out.push_str(&rule);
        let _ = writeln!(out, "| {:<w1$} | {:>w2$} |", "Feature", "Coefficient");
        out.push_str(&rule);
        for (a, b) in &rows {
            let _ = writeln!(out, "| {a:<w1$} | {b:>w2$} |");
        }
        out.push_str(&rule);
        out.push_str("Predict +1 if total is >0, -1 otherwise\n");
        out
    }

    /// Integer assignment of `model`'s variables realizing this system,
    /// suitable as a warm start.
    pub fn assignment(&self, model: &MilpModel, ds: &Dataset) -> Result<Vec<(VarId, i64)>> {
        let mut out = Vec::new();
        let find = |name: &str| model.var_by_name(name);
        for (j, &c) in self.coefficients.iter().enumerate() {
            if let Some(l) = find(&format!("lambda_{}", j + 1)) {
                out.push((l, c));
            }
            for v in model.variables() {
                let prefix = format!("u_{}_", j + 1);
                if let Some(rest) = v.name.strip_prefix(&prefix) {
                    let w = match rest.strip_prefix('m') {
                        Some(r) => -r.parse::<i64>().unwrap_or(0),
                        None => rest.parse::<i64>().unwrap_or(0),
                    };
                    out.push((v.id, (w == c) as i64));
                }
            }
            if c != 0 && find(&u_name(j, c)).is_none() {
                return Err(Error::Argument(format!("coefficient {c} not in the domain of feature {}", j + 1)));
            }
        }
        for i in 0..ds.n() {
            let p = self.predict(ds.row(i))?;
            if let Some(z) = find(&format!("z_{}", i + 1)) {
                out.push((z, (p != ds.label(i)) as i64));
            }
            if let Some(y) = find(&format!("yhat_{}", i + 1)) {
                out.push((y, (p == 1) as i64));
            }
        }
        Ok(out)
    }
}

/// Reads the coefficients from the incumbent and verifies that the loss and
/// prediction indicators agree with the decoded system on every example.
pub fn decode_scoring_system(model: &MilpModel, result: &SolveResult, ds: &Dataset) -> Result<ScoringSystem> {
    let x = result.incumbent.as_ref().ok_or(Error::NoIncumbent)?;
    let mut coef = vec![0i64; ds.m()];
    for (j, c) in coef.iter_mut().enumerate() {
        let prefix = format!("u_{}_", j + 1);
        for v in model.variables() {
            if let Some(rest) = v.name.strip_prefix(&prefix) {
                if x[v.id.0].round() as i64 == 1 {
                    let w = match rest.strip_prefix('m') {
                        Some(r) => -r.parse::<i64>().unwrap_or(0),
                        None => rest.parse::<i64>().unwrap_or(0),
                    };
                    *c += w;
                }
            }
        }
        if let Some(l) = model.var_by_name(&format!("lambda_{}", j + 1)) {
            if x[l.0].round() as i64 != *c {
                return Err(Error::Consistency(format!("lambda_{} disagrees with its selection variables", j + 1)));
            }
        }
    }
    let sys = ScoringSystem::new(ds.feature_names().to_vec(), coef)?;
    for i in 0..ds.n() {
        let p = sys.predict(ds.row(i))?;
        if let Some(z) = model.var_by_name(&format!("z_{}", i + 1)) {
            if (x[z.0].round() as i64 == 1) != (p != ds.label(i)) {
                return Err(Error::Consistency(format!("loss indicator of example {} disagrees with the model", i + 1)));
            }
        }
        if let Some(y) = model.var_by_name(&format!("yhat_{}", i + 1)) {
            if (x[y.0].round() as i64 == 1) != (p == 1) {
                return Err(Error::Consistency(format!("prediction of example {} disagrees with the model", i + 1)));
            }
        }
    }
    Ok(sys)
}

/// Coefficients keyed by feature name, for reports.
pub fn nonzero_coefficients(sys: &ScoringSystem) -> BTreeMap<String, i64> {
    sys.feature_names.iter().zip(&sys.coefficients).filter(|(_, &c)| c != 0).map(|(n, &c)| (n.clone(), c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::append_bias;
    use crate::fairness::{empirical_loss, statistical_parity};
    use crate::solver::{solve_milp, SolveConfig, SolveStatus};

    fn toy() -> Dataset {
        let ds = Dataset::new(vec![vec![1], vec![1], vec![0], vec![0]], vec![1, 1, -1, -1], vec!["f".into()]).unwrap();
        append_bias(&ds).unwrap()
    }

    fn pm1(m: usize) -> CoefficientDomain {
        CoefficientDomain::uniform(m, &[-1, 1]).unwrap()
    }

    #[test]
    fn big_m_examples() {
        let ds = append_bias(&Dataset::new(vec![vec![1], vec![0]], vec![1, -1], vec!["f".into()]).unwrap()).unwrap();
        let bm = compute_big_m(&ds, &CoefficientDomain::default_for(2), Rational64::new(1, 2)).unwrap();
        assert_eq!(bm.m1[0], Rational64::new(201, 2));
        assert_eq!(bm.m2[0], Rational64::from(100));
        assert_eq!(bm.m1[1], Rational64::new(101, 2));
        let ds3 = Dataset::new(vec![vec![1, 0, 1]], vec![1], vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let bm = compute_big_m(&ds3, &pm1(3), Rational64::new(1, 2)).unwrap();
        assert_eq!(bm.m1[0], Rational64::new(5, 2));
    }

    #[test]
    fn separable_training() {
        let ds = toy();
        let m = build_training_milp(&ds, &pm1(2), Rational64::zero()).unwrap();
        m.audit().unwrap();
        let r = solve_milp(&m, &SolveConfig::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.objective, Some(0.0));
        let sys = decode_scoring_system(&m, &r, &ds).unwrap();
        assert_eq!(sys.coefficients, vec![1, 0]);
    }

    #[test]
    fn flipped_labels_training() {
        let ds = append_bias(&Dataset::new(vec![vec![1], vec![1], vec![0], vec![0]], vec![-1, -1, 1, 1], vec!["f".into()]).unwrap())
            .unwrap();
        let m = build_training_milp(&ds, &pm1(2), Rational64::zero()).unwrap();
        let r = solve_milp(&m, &SolveConfig::default());
        assert_eq!(r.objective, Some(0.0));
        let sys = decode_scoring_system(&m, &r, &ds).unwrap();
        assert_eq!(sys.coefficients, vec![-1, 1]);
    }

    #[test]
    fn heavy_regularization_gives_zero_model() {
        let ds = toy();
        let m = build_training_milp(&ds, &pm1(2), Rational64::from(1000)).unwrap();
        let r = solve_milp(&m, &SolveConfig::default());
        let sys = decode_scoring_system(&m, &r, &ds).unwrap();
        assert_eq!(sys.sparsity(), 0);
        assert_eq!(r.objective, Some(ds.positives() as f64));
    }

    #[test]
    fn forced_fairness_case() {
        let ds = toy();
        let g = crate::dataio::groups_from_feature(&ds, "f").unwrap();
        for dir in [RangeDirection::Min, RangeDirection::Max] {
            let m = build_fairness_milp(&ds, &pm1(2), &g, FairnessMetric::StatisticalParity, dir, 2, 0).unwrap();
            let r = solve_milp(&m, &SolveConfig::default());
            assert_eq!(r.status, SolveStatus::Optimal);
            assert_eq!(r.objective, Some(1.0));
            let sys = decode_scoring_system(&m, &r, &ds).unwrap();
            let p = sys.predict_all(&ds).unwrap();
            assert_eq!(statistical_parity(&p, &g).unwrap(), Rational64::one());
            assert_eq!(empirical_loss(&p, ds.labels()).unwrap(), Rational64::zero());
        }
    }

    #[test]
    fn zero_sparsity_only_zero_model() {
        let ds = toy();
        let g = crate::dataio::groups_from_feature(&ds, "f").unwrap();
        let m = build_fairness_milp(&ds, &pm1(2), &g, FairnessMetric::StatisticalParity, RangeDirection::Max, 0, 4).unwrap();
        let r = solve_milp(&m, &SolveConfig::default());
        assert_eq!(r.objective, Some(0.0));
    }

    #[test]
    fn predict_examples() {
        let s = ScoringSystem::new(vec!["a".into(), BIAS_NAME.into()], vec![2, -10]).unwrap();
        assert_eq!(s.predict(&[1, 1]).unwrap(), -1);
        let names: Vec<String> = (0..6).map(|k| format!("f{k}")).chain([BIAS_NAME.to_string()]).collect();
        let t = ScoringSystem::new(names, vec![5, 5, 2, 2, 2, 2, -10]).unwrap();
        assert_eq!(t.score(&[1, 1, 1, 0, 0, 0, 1]).unwrap(), 2);
        assert_eq!(t.predict(&[1, 1, 1, 0, 0, 0, 1]).unwrap(), 1);
        let z = ScoringSystem::new(vec!["a".into()], vec![0]).unwrap();
        assert_eq!(z.predict(&[1]).unwrap(), -1);
        assert!(z.predict(&[1, 1]).is_err());
    }

    #[test]
    fn table_and_json() {
        let names: Vec<String> = ["EDU", "PAY0", "SEX_F", BIAS_NAME].iter().map(|s| s.to_string()).collect();
        let s = ScoringSystem::new(names.clone(), vec![2, 5, 0, -10]).unwrap();
        let t = s.render_table();
        assert!(t.contains("| PAY0"));
        assert!(!t.contains("SEX_F"));
        assert!(t.contains("Threshold"));
        assert!(t.ends_with("Predict +1 if total is >0, -1 otherwise\n"));
        let ds = Dataset::new(vec![vec![1, 1, 0, 1]], vec![1], names).unwrap();
        assert_eq!(ScoringSystem::from_json(&s.to_json(), &ds).unwrap(), s);
    }

    #[test]
    fn decode_rejects_inconsistent_incumbent() {
        let ds = toy();
        let m = build_training_milp(&ds, &pm1(2), Rational64::zero()).unwrap();
        let mut r = solve_milp(&m, &SolveConfig::default());
        let z1 = m.var_by_name("z_1").unwrap();
        r.incumbent.as_mut().unwrap()[z1.0] = 1.0;
        assert!(matches!(decode_scoring_system(&m, &r, &ds), Err(Error::Consistency(_))));
        r.incumbent = None;
        assert!(matches!(decode_scoring_system(&m, &r, &ds), Err(Error::NoIncumbent)));
    }
}
