//! Writes a fairness query in LP format for an external MILP solver.
//!
//!     cargo run --example export_lp > query.lp

use rashomon::dataio::{append_bias, groups_from_feature};
use rashomon::fairness::FairnessMetric;
use rashomon::milp::export_lp;
use rashomon::scoring::{build_fairness_milp, CoefficientDomain, RangeDirection};
use rashomon::synth::random_dataset;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = append_bias(&random_dataset(12, 3, 0.1, 1)?)?;
    let groups = groups_from_feature(&ds, "f1")?;
    let dom = CoefficientDomain::uniform(ds.m(), &[-1, 1])?;
    let model = build_fairness_milp(&ds, &dom, &groups, FairnessMetric::StatisticalParity, RangeDirection::Max, 2, 3)?;
    model.audit()?;
    eprintln!("{} variables, {} constraints", model.variables().len(), model.constraints().len());
    print!("{}", export_lp(&model));
    Ok(())
}
