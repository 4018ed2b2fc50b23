use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact coefficient type of the IR.
pub type Coef = Rational64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConstraintId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    Binary,
    Integer { lb: i64, ub: i64 },
    Continuous { lb: Coef, ub: Coef },
}

impl Domain {
    pub fn is_integral(&self) -> bool {
        !matches!(self, Domain::Continuous { .. })
    }

    pub fn bounds(&self) -> (Coef, Coef) {
        match *self {
            Domain::Binary => (Coef::zero(), Coef::from(1)),
            Domain::Integer { lb, ub } => (Coef::from(lb), Coef::from(ub)),
            Domain::Continuous { lb, ub } => (lb, ub),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub id: VarId,
    pub name: String,
    pub domain: Domain,
    /// Branching priority; higher values are branched on first.
    pub priority: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub name: Option<String>,
    pub terms: Vec<(VarId, Coef)>,
    pub sense: Sense,
    pub rhs: Coef,
}

impl LinearConstraint {
    pub fn new(terms: Vec<(VarId, Coef)>, sense: Sense, rhs: Coef) -> Self {
        LinearConstraint { name: None, terms, sense, rhs }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    /// Exact left-hand side value under `values`.
    pub fn activity(&self, values: &[BigRational]) -> BigRational {
        self.terms.iter().fold(BigRational::zero(), |acc, (v, c)| acc + to_big(*c) * &values[v.0])
    }

    /// Amount by which the row is violated (zero when satisfied).
    pub fn violation(&self, values: &[BigRational]) -> BigRational {
        let lhs = self.activity(values);
        let rhs = to_big(self.rhs);
        let gap = match self.sense {
            Sense::Le => lhs - rhs,
            Sense::Ge => rhs - lhs,
            Sense::Eq => (lhs - rhs).abs(),
        };
        if gap.is_positive() { gap } else { BigRational::zero() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Minimize,
    Maximize,
}

/// Solver-agnostic mixed-integer linear model with exact coefficients.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MilpModel {
    pub name: String,
    variables: Vec<Variable>,
    constraints: Vec<LinearConstraint>,
    objective: Vec<(VarId, Coef)>,
    objective_offset: Coef,
    direction: Option<Direction>,
    warm_start: Option<Vec<(VarId, i64)>>,
    #[serde(skip)]
    by_name: HashMap<String, VarId>,
}

impl MilpModel {
    pub fn new(name: impl Into<String>) -> Self {
        MilpModel { name: name.into(), ..Default::default() }
    }

    pub fn add_variable(&mut self, name: impl Into<String>, domain: Domain) -> Result<VarId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(Error::DuplicateVariable(name));
        }
        let (lb, ub) = domain.bounds();
        if lb > ub {
            return Err(Error::Argument(format!("variable `{name}` has lb > ub")));
        }
        let id = VarId(self.variables.len());
        self.by_name.insert(name.clone(), id);
        self.variables.push(Variable { id, name, domain, priority: 0 });
        Ok(id)
    }

    pub fn set_priority(&mut self, var: VarId, priority: i32) {
        self.variables[var.0].priority = priority;
    }

    /// Stores the constraint verbatim after checking its variable ids.
    pub fn add_constraint(&mut self, constraint: LinearConstraint) -> Result<ConstraintId> {
        self.check_terms(&constraint.terms)?;
        self.constraints.push(constraint);
        Ok(ConstraintId(self.constraints.len() - 1))
    }

    pub fn set_objective(&mut self, terms: Vec<(VarId, Coef)>, offset: Coef, direction: Direction) -> Result<()> {
        self.check_terms(&terms)?;
        self.objective = terms;
        self.objective_offset = offset;
        self.direction = Some(direction);
        Ok(())
    }

    /// Sets (or clears) the initial assignment of some integer variables.
    pub fn set_warm_start(&mut self, values: Option<Vec<(VarId, i64)>>) -> Result<()> {
        if let Some(vals) = &values {
            for &(v, x) in vals {
                let var = self.variables.get(v.0).ok_or(Error::UnknownVariable(v.0))?;
                if !var.domain.is_integral() {
                    return Err(Error::Argument(format!("warm start names continuous variable `{}`", var.name)));
                }
                let (lb, ub) = var.domain.bounds();
                let x = Coef::from(x);
                if x < lb || x > ub {
                    return Err(Error::Argument(format!("warm start value out of domain for `{}`", var.name)));
                }
            }
        }
        self.warm_start = values;
        Ok(())
    }

    fn check_terms(&self, terms: &[(VarId, Coef)]) -> Result<()> {
        let mut seen = std::collections::HashSet::with_capacity(terms.len());
        for (v, _) in terms {
            if v.0 >= self.variables.len() {
                return Err(Error::UnknownVariable(v.0));
            }
            if !seen.insert(*v) {
                return Err(Error::Argument(format!("variable `{}` repeated in one row", self.variables[v.0].name)));
            }
        }
        Ok(())
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.by_name.get(name).copied()
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[(VarId, Coef)] {
        &self.objective
    }

    pub fn objective_offset(&self) -> Coef {
        self.objective_offset
    }

    pub fn direction(&self) -> Direction {
        self.direction.unwrap_or(Direction::Minimize)
    }

    pub fn warm_start(&self) -> Option<&[(VarId, i64)]> {
        self.warm_start.as_deref()
    }

    pub fn num_integral(&self) -> usize {
        self.variables.iter().filter(|v| v.domain.is_integral()).count()
    }

    /// Exact objective value under `values`.
    pub fn objective_value(&self, values: &[BigRational]) -> BigRational {
        self.objective
            .iter()
            .fold(to_big(self.objective_offset), |acc, (v, c)| acc + to_big(*c) * &values[v.0])
    }

    /// Rebuilds the name index (needed after deserialization).
    pub fn reindex(&mut self) {
        self.by_name = self.variables.iter().map(|v| (v.name.clone(), v.id)).collect();
    }

    /// Well-formedness audit: every name unique, every id housed, bounds
    /// ordered, warm start inside domains.
    pub fn audit(&self) -> Result<()> {
        let mut names = std::collections::HashSet::new();
        for (k, v) in self.variables.iter().enumerate() {
            if v.id.0 != k {
                return Err(Error::Consistency(format!("variable `{}` has id {} at slot {k}", v.name, v.id.0)));
            }
            if !names.insert(v.name.as_str()) {
                return Err(Error::DuplicateVariable(v.name.clone()));
            }
            let (lb, ub) = v.domain.bounds();
            if lb > ub {
                return Err(Error::Consistency(format!("variable `{}` has lb > ub", v.name)));
            }
        }
        for c in &self.constraints {
            self.check_terms(&c.terms)?;
        }
        self.check_terms(&self.objective)?;
        if let Some(ws) = &self.warm_start {
            for (v, _) in ws {
                if v.0 >= self.variables.len() {
                    return Err(Error::UnknownVariable(v.0));
                }
            }
        }
        Ok(())
    }
}

pub fn to_big(c: Coef) -> BigRational {
    BigRational::new(BigInt::from(*c.numer()), BigInt::from(*c.denom()))
}

/// Exact rational value of a float (every finite `f64` is a dyadic rational).
pub fn float_to_big(x: f64) -> BigRational {
    BigRational::from_float(x).unwrap_or_else(BigRational::zero)
}

pub fn coef_to_f64(c: Coef) -> f64 {
    *c.numer() as f64 / *c.denom() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(n: i64) -> Coef {
        Coef::from(n)
    }

    #[test]
    fn variable_handles() {
        let mut m = MilpModel::new("t");
        assert_eq!(m.add_variable("u_1_5", Domain::Binary).unwrap(), VarId(0));
        let b = m.add_variable("b_node3", Domain::Continuous { lb: c(-1), ub: c(1) }).unwrap();
        assert_eq!(b, VarId(1));
        assert!(matches!(m.add_variable("u_1_5", Domain::Binary), Err(Error::DuplicateVariable(_))));
        assert!(m.add_variable("bad", Domain::Integer { lb: 2, ub: 1 }).is_err());
    }

    #[test]
    fn constraint_storage() {
        let mut m = MilpModel::new("t");
        let x0 = m.add_variable("x0", Domain::Binary).unwrap();
        let x1 = m.add_variable("x1", Domain::Binary).unwrap();
        let id = m.add_constraint(LinearConstraint::new(vec![(x0, c(1)), (x1, c(1))], Sense::Le, c(1))).unwrap();
        assert_eq!(id, ConstraintId(0));
        assert_eq!(m.constraints()[0].terms.len(), 2);
        let err = m.add_constraint(LinearConstraint::new(vec![(VarId(999), c(1))], Sense::Le, c(1)));
        assert!(matches!(err, Err(Error::UnknownVariable(999))));
        m.add_constraint(LinearConstraint::new(vec![], Sense::Eq, c(0))).unwrap();
        assert_eq!(m.constraints().len(), 2);
        assert!(m.add_constraint(LinearConstraint::new(vec![(x0, c(1)), (x0, c(2))], Sense::Le, c(1))).is_err());
        m.audit().unwrap();
    }

    #[test]
    fn exact_violation() {
        let row = LinearConstraint::new(vec![(VarId(0), Coef::new(1, 3))], Sense::Le, Coef::new(1, 3));
        let at = |x: i64| vec![BigRational::from_integer(x.into())];
        assert!(row.violation(&at(1)).is_zero());
        assert_eq!(row.violation(&at(4)), BigRational::from_integer(1.into()));
    }

    #[test]
    fn warm_start_domains() {
        let mut m = MilpModel::new("t");
        let x = m.add_variable("x", Domain::Binary).unwrap();
        let y = m.add_variable("y", Domain::Continuous { lb: c(0), ub: c(1) }).unwrap();
        assert!(m.set_warm_start(Some(vec![(x, 2)])).is_err());
        assert!(m.set_warm_start(Some(vec![(y, 0)])).is_err());
        m.set_warm_start(Some(vec![(x, 1)])).unwrap();
        assert_eq!(m.warm_start(), Some(&[(x, 1)][..]));
    }
}
