//! XOR needs three nodes: a single split misclassifies, a two-level
//! diagram is exact.

use num_rational::Rational64;
use rashomon::dataio::Dataset;
use rashomon::diagrams::{build_skeleton, build_training_milp, decode_diagram};
use rashomon::solver::{solve_milp, SolveConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = Dataset::new(
        vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]],
        vec![-1, 1, 1, -1],
        vec!["p".into(), "q".into()],
    )?;
    for levels in [vec![1], vec![1, 2]] {
        let skel = build_skeleton(&levels)?;
        let model = build_training_milp(&ds, &skel, Rational64::from(0))?;
        let result = solve_milp(&model, &SolveConfig::default());
        println!("skeleton {levels:?}: {} mistakes ({})", result.objective.unwrap_or(f64::NAN), result.status);
        let diagram = decode_diagram(&model, &result, &ds, &skel)?;
        print!("{}", diagram.render_text());
        for (x, y) in ds.rows().iter().zip(ds.labels()) {
            println!("  {x:?} -> {:+} (label {y:+})", diagram.predict(x)?);
        }
    }
    Ok(())
}
