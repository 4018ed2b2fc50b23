//! Solver-agnostic MILP intermediate representation and LP-format export.

mod lp_format;
mod model;

pub use lp_format::export_lp;
pub use model::{
    coef_to_f64, float_to_big, to_big, Coef, ConstraintId, Direction, Domain, LinearConstraint, MilpModel, Sense,
    VarId, Variable,
};
