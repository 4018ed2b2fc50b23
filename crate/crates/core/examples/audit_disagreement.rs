//! Models in one Rashomon set cannot disagree much: every pair of certified
//! extremes stays within twice the loss budget of each other.

use num_rational::Rational64;
use rashomon::dataio::{append_bias, groups_from_feature, majority_loss};
use rashomon::explorer::{run_sweep, ModelClass, SweepPlan};
use rashomon::fairness::{disagreement, to_f64};
use rashomon::scoring::CoefficientDomain;
use rashomon::synth::random_dataset;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = append_bias(&random_dataset(30, 4, 0.2, 3)?)?;
    let groups = groups_from_feature(&ds, "f1")?;
    let mut plan = SweepPlan::new(ModelClass::scoring(CoefficientDomain::uniform(5, &[-2, -1, 1, 2])?), vec![4]);
    plan.ps = vec![0.1, 0.3];
    let out = run_sweep(&ds, &groups, &plan, 0, &[], None)?;
    let n = ds.n() as i64;
    println!("majority loss {}", to_f64(majority_loss(&ds)));

    let reference = out.reference.model.predict_all(&ds)?;
    for p in &plan.ps {
        let rows: Vec<_> = out.results.iter().filter(|r| r.p == *p && r.model.is_some()).collect();
        let budget = rows.first().map_or(0, |r| r.count_budget) as i64;
        // pairwise: at most twice the budget; against the reference: budget plus optimal loss
        let pair_bound = Rational64::new(2 * budget, n);
        let ref_bound = Rational64::new(budget + out.reference.loss_count as i64, n);
        let mut worst = Rational64::from(0);
        for a in &rows {
            let pa = a.model.as_ref().unwrap().predict_all(&ds)?;
            assert!(disagreement(&pa, &reference)? <= ref_bound);
            for b in &rows {
                let pb = b.model.as_ref().unwrap().predict_all(&ds)?;
                worst = worst.max(disagreement(&pa, &pb)?);
            }
        }
        println!("p={p}: {} models, max disagreement {worst} <= {pair_bound}", rows.len());
        assert!(worst <= pair_bound);
    }
    Ok(())
}
