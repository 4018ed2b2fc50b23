//! Certified minimal and maximal statistical parity over the 20%-Rashomon
//! set of small scoring systems, checked against brute-force enumeration.

use rashomon::dataio::{append_bias, groups_from_feature, majority_loss};
use rashomon::explorer::{explore, make_budget, reference_loss, ModelClass, Query};
use rashomon::fairness::{to_f64, FairnessMetric};
use rashomon::oracle::{enumerate_scoring, EnumerationBound};
use rashomon::scoring::{CoefficientDomain, RangeDirection};
use rashomon::solver::SolveConfig;
use rashomon::synth::random_dataset;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = append_bias(&random_dataset(40, 4, 0.15, 11)?)?;
    let groups = groups_from_feature(&ds, "f1")?;
    let domain = CoefficientDomain::uniform(ds.m(), &[-2, -1, 1, 2])?;
    let class = ModelClass::scoring(domain.clone());
    let cfg = SolveConfig::with_time_limit(30.0);

    let reference = reference_loss(&ds, &class, &cfg)?;
    let budget = make_budget(0.2, reference.l_star, to_f64(majority_loss(&ds)), ds.n())?;
    println!("optimal loss {}/{}; budget {} mistakes", reference.loss_count, ds.n(), budget.count_budget);

    let alpha = 3;
    let metric = FairnessMetric::StatisticalParity;
    for direction in [RangeDirection::Min, RangeDirection::Max] {
        let q = Query { metric, direction, alpha, budget };
        let row = explore(&ds, &groups, &class, &q, &reference, Some(&reference.model), &cfg, 0)?;
        println!("{direction} SP = {:?} ({}, {} nodes)", row.value_exact, row.status, row.nodes);
        if let Some(m) = &row.model {
            print!("{}", m.render());
        }
    }

    let brute = enumerate_scoring(&ds, &domain, alpha, budget.count_budget, metric, &groups, EnumerationBound::default())?;
    if let Some(r) = brute.range() {
        println!("enumeration over {} systems: [{}, {}]", r.scanned, r.min, r.max);
    }
    Ok(())
}
