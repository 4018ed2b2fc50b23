//! Writer for the CPLEX-style LP text format.
//!
//! Output is a pure function of the model: sections appear in the fixed order
//! objective, `Subject To`, `Bounds`, `Binaries`, `Generals`, `End`, and
//! variables within each section follow their id order.

use std::fmt::Write;

use num_traits::{One, Signed, Zero};

use super::model::{Coef, Direction, Domain, MilpModel, VarId};

const MAX_LINE: usize = 200;

pub fn export_lp(model: &MilpModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\\ Problem: {}", if model.name.is_empty() { "model" } else { &model.name });
    let _ = writeln!(
        out,
        "\\ {} variables, {} constraints",
        model.variables().len(),
        model.constraints().len()
    );
    out.push_str(match model.direction() {
        Direction::Minimize => "Minimize\n",
        Direction::Maximize => "Maximize\n",
    });
    let mut obj = linear_expr(model, model.objective());
    let offset = model.objective_offset();
    if !offset.is_zero() {
        obj.push(format!("{} {}", if offset.is_negative() { "-" } else { "+" }, number(offset.abs())));
    }
    write_wrapped(&mut out, " obj:", &obj);

    out.push_str("Subject To\n");
    for (k, row) in model.constraints().iter().enumerate() {
        let label = match &row.name {
            Some(name) => format!(" {name}:"),
            None => format!(" c{k}:"),
        };
        let mut parts = linear_expr(model, &row.terms);
        parts.push(format!("{} {}", row.sense.symbol(), signed(row.rhs)));
        write_wrapped(&mut out, &label, &parts);
    }

    out.push_str("Bounds\n");
    for var in model.variables() {
        match var.domain {
            Domain::Binary => {}
            Domain::Integer { lb, ub } => {
                let _ = writeln!(out, " {lb} <= {} <= {ub}", var.name);
            }
            Domain::Continuous { lb, ub } => {
                let _ = writeln!(out, " {} <= {} <= {}", signed(lb), var.name, signed(ub));
            }
        }
    }
    write_names(&mut out, "Binaries", model, |d| matches!(d, Domain::Binary));
    write_names(&mut out, "Generals", model, |d| matches!(d, Domain::Integer { .. }));
    out.push_str("End\n");
    out
}

fn linear_expr(model: &MilpModel, terms: &[(VarId, Coef)]) -> Vec<String> {
    let mut parts = Vec::with_capacity(terms.len().max(1));
    for (k, (v, c)) in terms.iter().enumerate() {
        let name = &model.variable(*v).name;
        let sign = if c.is_negative() { "-" } else if k == 0 { "" } else { "+" };
        let mag = c.abs();
        let body = if mag.is_one() { name.clone() } else { format!("{} {name}", number(mag)) };
        parts.push(if sign.is_empty() { body } else { format!("{sign} {body}") });
    }
    if parts.is_empty() {
        // LP readers need at least one term per expression.
        if let Some(first) = model.variables().first() {
            parts.push(format!("0 {}", first.name));
        }
    }
    parts
}

fn write_wrapped(out: &mut String, label: &str, parts: &[String]) {
    let mut line = label.to_string();
    for p in parts {
        if line.len() + p.len() + 1 > MAX_LINE && line.len() > label.len() {
            out.push_str(&line);
            out.push('\n');
            line = String::from("  ");
        }
        line.push(' ');
        line.push_str(p);
    }
    out.push_str(&line);
    out.push('\n');
}

fn write_names(out: &mut String, section: &str, model: &MilpModel, pick: impl Fn(&Domain) -> bool) {
    let names: Vec<&str> = model.variables().iter().filter(|v| pick(&v.domain)).map(|v| v.name.as_str()).collect();
    if names.is_empty() {
        return;
    }
    out.push_str(section);
    out.push('\n');
    let parts: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    write_wrapped(out, "", &parts);
}

/// Non-negative number: an integer when exact, otherwise the shortest
/// decimal that round-trips through `f64`.
fn number(c: Coef) -> String {
    if c.is_integer() {
        c.to_integer().to_string()
    } else {
        let v = *c.numer() as f64 / *c.denom() as f64;
        format!("{v:?}")
    }
}

fn signed(c: Coef) -> String {
    if c.is_negative() { format!("-{}", number(c.abs())) } else { number(c) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{LinearConstraint, Sense};

    fn toy() -> MilpModel {
        let mut m = MilpModel::new("toy");
        let x = m.add_variable("x", Domain::Continuous { lb: Coef::from(0), ub: Coef::from(1) }).unwrap();
        m.set_objective(vec![(x, Coef::from(1))], Coef::from(0), Direction::Minimize).unwrap();
        m
    }

    #[test]
    fn skeleton_sections() {
        let text = export_lp(&toy());
        assert!(text.contains("Minimize"));
        assert!(text.contains("Bounds\n 0 <= x <= 1"));
        assert!(text.contains(" obj: x"));
        assert!(text.ends_with("End\n"));
    }

    #[test]
    fn binaries_and_generals() {
        let mut m = toy();
        let u = m.add_variable("u_1_5", Domain::Binary).unwrap();
        let l = m.add_variable("lambda_1", Domain::Integer { lb: -5, ub: 5 }).unwrap();
        m.add_constraint(
            LinearConstraint::new(vec![(l, Coef::from(1)), (u, Coef::from(-5))], Sense::Eq, Coef::from(0)).named("link_1"),
        )
        .unwrap();
        m.add_constraint(LinearConstraint::new(vec![(u, Coef::new(1, 3))], Sense::Ge, Coef::new(-1, 2))).unwrap();
        let text = export_lp(&m);
        assert!(text.contains("Binaries\n u_1_5\n"));
        assert!(text.contains("Generals\n lambda_1\n"));
        assert!(text.contains(" link_1: lambda_1 - 5 u_1_5 = 0"));
        assert!(text.contains(" c1: 0.3333333333333333 u_1_5 >= -0.5"));
        assert!(text.contains(" -5 <= lambda_1 <= 5"));
    }

    #[test]
    fn deterministic_bytes() {
        let m = toy();
        assert_eq!(export_lp(&m), export_lp(&m));
        assert_eq!(export_lp(&m), export_lp(&m.clone()));
    }

    #[test]
    fn long_rows_wrap() {
        let mut m = MilpModel::new("wide");
        let vars: Vec<_> = (0..100).map(|i| m.add_variable(format!("variable_{i}"), Domain::Binary).unwrap()).collect();
        m.add_constraint(LinearConstraint::new(vars.iter().map(|&v| (v, Coef::from(3))).collect(), Sense::Le, Coef::from(7)))
            .unwrap();
        let text = export_lp(&m);
        assert!(text.lines().all(|l| l.len() <= MAX_LINE + 40));
    }
}
