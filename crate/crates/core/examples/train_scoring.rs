//! Fit the most accurate sparse scoring system on a CSV file and print it.
//!
//!     cargo run --example train_scoring [path.csv label_column positive_label]

use rashomon::dataio::{append_bias, load_csv};
use rashomon::explorer::{reference_loss, ModelClass};
use rashomon::fairness::{empirical_loss, to_f64};
use rashomon::scoring::CoefficientDomain;
use rashomon::solver::SolveConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (path, label, positive) = match args.as_slice() {
        [p, l, v] => (p.clone(), l.clone(), v.clone()),
        _ => (concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/toy.csv").to_string(), "reoffend".into(), "yes".into()),
    };
    let ds = append_bias(&load_csv(&path, &label, &positive)?)?;
    println!("{} examples, {} features (bias included)", ds.n(), ds.m());

    // the default coefficient set, shared by every feature and the bias
    let class = ModelClass::scoring(CoefficientDomain::default_for(ds.m()));
    let fit = reference_loss(&ds, &class, &SolveConfig::with_time_limit(60.0))?;
    let preds = fit.model.predict_all(&ds)?;
    println!("status {}, {} mistakes, accuracy {:.3}", fit.status, fit.loss_count, 1.0 - to_f64(empirical_loss(&preds, ds.labels())?));
    print!("{}", fit.model.render());
    Ok(())
}
