//! Acceptance suite: one PASS/FAIL/SKIP line per criterion.
//!
//! Runs without the libtest harness so the lines always reach stdout. The
//! COMPAS trend check needs `RASHOMON_COMPAS_CSV` (see `a8`); the LP
//! cross-check needs a Python interpreter with `highspy`.

use std::collections::HashMap;
use std::process::Command;
use std::time::{Duration, Instant};

use num_rational::Rational64;
use rashomon::dataio::{append_bias, groups_from_feature, load_csv, split, Dataset, GroupSpec, SplitMix64, SplitSpec};
use rashomon::diagrams::{build_skeleton, build_training_milp as diagram_training};
use rashomon::explorer::{
    explore, make_budget, nesting_violations, reference_loss, run_sweep, ModelClass, Query, RangeResult, ReferenceFit,
    RowStatus, SweepPlan,
};
use rashomon::fairness::{disagreement, to_f64, FairnessMetric};
use rashomon::milp::export_lp;
use rashomon::oracle::{enumerate_scoring, enumerate_univariate_diagrams, EnumerationBound};
use rashomon::scoring::{
    build_training_milp_with, CoefficientDomain, LossMargins, RangeDirection, ScoringOptions, ScoringSystem,
    DEFAULT_OMEGA,
};
use rashomon::solver::{check_assignment, solve_milp, SolveConfig, SolveStatus};
use rashomon::synth::random_dataset;

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

struct Instance {
    ds: Dataset,
    groups: GroupSpec,
    reference: ReferenceFit,
    rows: Vec<RangeResult>,
}

fn scoring_plan(domain: CoefficientDomain) -> SweepPlan {
    let mut plan = SweepPlan::new(ModelClass::scoring(domain), vec![1, 2, 3, 4]);
    plan.ps = vec![0.0, 0.2];
    plan
}

fn a1_datasets() -> Vec<Dataset> {
    (0..20).map(|s| append_bias(&random_dataset(24, 3, 0.15, 1000 + s).unwrap()).unwrap()).collect()
}

fn sweep_all(data: &[Dataset], plan: &SweepPlan, swap: bool) -> rashomon::error::Result<Vec<Instance>> {
    let mut out = Vec::new();
    for (k, ds) in data.iter().enumerate() {
        let mut groups = groups_from_feature(ds, "f1")?;
        if swap {
            groups = groups.swapped();
        }
        let sweep = run_sweep(ds, &groups, plan, k as u64, &[], None)?;
        out.push(Instance { ds: ds.clone(), groups, reference: sweep.reference, rows: sweep.results });
    }
    Ok(out)
}

fn a1(instances: &[Instance], elapsed: Duration) -> Verdict {
    let dom = CoefficientDomain::uniform(4, &[-1, 1]).unwrap();
    let mut compared = 0;
    let mut infeasible = 0;
    let mut bad = Vec::new();
    for (k, inst) in instances.iter().enumerate() {
        for r in &inst.rows {
            let oracle =
                enumerate_scoring(&inst.ds, &dom, r.alpha, r.count_budget, r.metric, &inst.groups, EnumerationBound::default())
                    .unwrap();
            let want = oracle.range().map(|o| if r.direction == RangeDirection::Min { o.min } else { o.max });
            let ok = match (want, r.value_exact) {
                (None, None) => r.status == RowStatus::Infeasible,
                (Some(w), Some(g)) => w == g && r.status == RowStatus::Optimal,
                _ => false,
            };
            compared += 1;
            if want.is_none() {
                infeasible += 1;
            }
            if !ok {
                bad.push(format!(
                    "dataset {k} alpha {} p {} {} {}: solver {:?} ({}) oracle {:?}",
                    r.alpha, r.p, r.metric.short_name(), r.direction, r.value_exact, r.status, want
                ));
            }
        }
    }
    let detail = format!("{compared} queries ({infeasible} infeasible), solver time {:.2}s", elapsed.as_secs_f64());
    if bad.is_empty() && compared == 20 * 4 * 2 * 2 * 2 && elapsed <= Duration::from_secs(60) {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(format!("{detail}; {} mismatches; first: {}", bad.len(), bad.first().cloned().unwrap_or_default()))
    }
}

fn show(v: Option<Rational64>) -> String {
    v.map_or("none".into(), |v| v.to_string())
}

fn a2() -> Verdict {
    let start = Instant::now();
    // label equals the protected attribute, and the attribute is a feature
    let ds = append_bias(
        &Dataset::new(
            vec![vec![1, 0], vec![1, 1], vec![1, 0], vec![0, 1], vec![0, 0], vec![0, 1]],
            vec![1, 1, 1, -1, -1, -1],
            vec!["s".into(), "x".into()],
        )
        .unwrap(),
    )
    .unwrap();
    let groups = groups_from_feature(&ds, "s").unwrap();
    let class = ModelClass::scoring(CoefficientDomain::default_for(ds.m()));
    let cfg = SolveConfig::default();
    let reference = reference_loss(&ds, &class, &cfg).unwrap();
    let budget = make_budget(0.0, reference.l_star, 0.5, ds.n()).unwrap();
    let mut values = Vec::new();
    for direction in [RangeDirection::Min, RangeDirection::Max] {
        let q = Query { metric: FairnessMetric::StatisticalParity, direction, alpha: 3, budget };
        let row = explore(&ds, &groups, &class, &q, &reference, None, &cfg, 0).unwrap();
        values.push((row.status, row.value_exact));
    }
    let elapsed = start.elapsed();
    let one = Some(Rational64::from(1));
    let detail = format!(
        "L_star = {}, budget {}, min {}, max {}, {:.3}s",
        reference.l_star,
        budget.count_budget,
        show(values[0].1),
        show(values[1].1),
        elapsed.as_secs_f64()
    );
    let ok = reference.loss_count == 0
        && budget.count_budget == 0
        && values.iter().all(|v| v.0 == RowStatus::Optimal && v.1 == one)
        && elapsed < Duration::from_secs(1);
    if ok { Verdict::Pass(detail) } else { Verdict::Fail(detail) }
}

/// Which `z` values the loss rows admit for one example with fixed
/// coefficients (all other variables at the values the system implies).
fn admitted_z(x: &[u8], y: i8, lambda: &[i64], margins: LossMargins, dom: &CoefficientDomain) -> Vec<i64> {
    let names: Vec<String> = (1..x.len()).map(|j| format!("f{j}")).collect();
    let raw = Dataset::new(vec![x[..x.len() - 1].to_vec()], vec![y], names).unwrap();
    let ds = append_bias(&raw).unwrap();
    let opts = ScoringOptions { gamma: Rational64::new(1, 2), margins };
    let model = build_training_milp_with(&ds, dom, Rational64::from(0), opts).unwrap();
    let sys = ScoringSystem::new(ds.feature_names().to_vec(), lambda.to_vec()).unwrap();
    let mut vals = vec![0.0; model.variables().len()];
    for (id, v) in sys.assignment(&model, &ds).unwrap() {
        vals[id.0] = v as f64;
    }
    let z = model.var_by_name("z_1").unwrap().0;
    let mut admitted = Vec::new();
    for zv in [0, 1] {
        vals[z] = zv as f64;
        if check_assignment(&model, &vals, 1e-9).unwrap().feasible {
            admitted.push(zv);
        }
    }
    admitted
}

fn a3() -> Verdict {
    let start = Instant::now();
    let m = 6;
    let dom = CoefficientDomain::default_for(m + 1);
    let mut rng = SplitMix64::new(3);
    let mut wrong = 0;
    let mut zero_scores = 0;
    let mut sign_differs = 0;
    let mut default_wrong = 0;
    for _ in 0..1000 {
        let mut x: Vec<u8> = (0..m).map(|_| rng.below(2) as u8).collect();
        x.push(1);
        let y: i8 = if rng.below(2) == 0 { 1 } else { -1 };
        let lambda: Vec<i64> = (0..=m)
            .map(|_| if rng.next_f64() < 0.4 { 0 } else { DEFAULT_OMEGA[rng.below(DEFAULT_OMEGA.len() as u64) as usize] })
            .collect();
        let score: i64 = x.iter().zip(&lambda).map(|(&x, &l)| x as i64 * l).sum();
        let literal = (y as i64 * score <= 0) as i64;
        if admitted_z(&x, y, &lambda, LossMargins::Symmetric, &dom) != vec![literal] {
            wrong += 1;
        }
        // the default pair encodes the sign(0) = -1 prediction rule instead
        let pred: i8 = if score > 0 { 1 } else { -1 };
        if admitted_z(&x, y, &lambda, LossMargins::SignConsistent, &dom) != vec![(pred != y) as i64] {
            default_wrong += 1;
        }
        zero_scores += (score == 0) as usize;
        sign_differs += (score == 0 && y == -1) as usize;
    }
    let elapsed = start.elapsed();
    let detail = format!(
        "literal pair: {wrong}/1000 wrong; default pair vs 1[pred != y]: {default_wrong}/1000 wrong; \
         {zero_scores} zero scores, {sign_differs} negatives where the two rules differ; {:.2}s",
        elapsed.as_secs_f64()
    );
    if wrong == 0 && default_wrong == 0 && elapsed < Duration::from_secs(5) {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn a4(instances: &[Instance]) -> Verdict {
    let rows: Vec<RangeResult> = instances.iter().flat_map(|i| i.rows.clone()).collect();
    let v = nesting_violations(&rows, 1e-9);
    let detail = format!("{} rows checked, {} violations", rows.len(), v.len());
    if v.is_empty() { Verdict::Pass(detail) } else { Verdict::Fail(format!("{detail}; first: {}", v[0])) }
}

fn a5(instances: &[Instance]) -> Verdict {
    let mut pairs = 0u64;
    let mut bad = Vec::new();
    for (k, inst) in instances.iter().enumerate() {
        let n = inst.ds.n() as i64;
        let l_star = Rational64::new(inst.reference.loss_count as i64, n);
        let reference = inst.reference.model.predict_all(&inst.ds).unwrap();
        let mut by_budget: HashMap<u64, Vec<_>> = HashMap::new();
        for r in &inst.rows {
            if let Some(m) = &r.model {
                by_budget.entry(r.count_budget).or_default().push(m.predict_all(&inst.ds).unwrap());
            }
        }
        for (budget, preds) in &by_budget {
            let eps = Rational64::new(*budget as i64, n) - l_star;
            let pair_bound = l_star * 2 + eps * 2;
            let ref_bound = l_star * 2 + eps;
            for (a, pa) in preds.iter().enumerate() {
                let d = disagreement(pa, &reference).unwrap();
                if d > ref_bound {
                    bad.push(format!("dataset {k} budget {budget}: {d} vs reference > {ref_bound}"));
                }
                for pb in &preds[a + 1..] {
                    pairs += 1;
                    let d = disagreement(pa, pb).unwrap();
                    if d > pair_bound {
                        bad.push(format!("dataset {k} budget {budget}: pair disagreement {d} > {pair_bound}"));
                    }
                }
            }
        }
    }
    let detail = format!("{pairs} pairs, {} violations", bad.len());
    if bad.is_empty() { Verdict::Pass(detail) } else { Verdict::Fail(format!("{detail}; first: {}", bad[0])) }
}

fn a6_datasets() -> Vec<Dataset> {
    (0..10).map(|s| random_dataset(30, 3, 0.15, 2000 + s).unwrap()).collect()
}

fn diagram_plan() -> SweepPlan {
    let mut plan = SweepPlan::new(ModelClass::diagram(build_skeleton(&[1, 2]).unwrap()), vec![1, 2, 3]);
    plan.ps = vec![0.2];
    plan
}

fn a6(instances: &[Instance]) -> Verdict {
    let skel = build_skeleton(&[1, 2]).unwrap();
    let mut checked = 0;
    let mut strict = 0;
    let mut bad = Vec::new();
    for (k, inst) in instances.iter().enumerate() {
        for r in &inst.rows {
            checked += 1;
            // explore decodes every incumbent and re-routes all examples;
            // a disagreement would have produced an Error row
            if r.status != RowStatus::Optimal {
                bad.push(format!("instance {k} alpha {} {} {}: {} {:?}", r.alpha, r.metric.short_name(), r.direction, r.status, r.note));
                continue;
            }
            let model = r.model.as_ref().unwrap();
            if model.loss_count(&inst.ds).unwrap() != r.loss_count.unwrap() || model.sparsity() > r.alpha {
                bad.push(format!("instance {k}: stored diagram does not reproduce its row"));
            }
            let oracle = enumerate_univariate_diagrams(
                &inst.ds,
                &skel,
                r.alpha,
                r.count_budget,
                r.metric,
                &inst.groups,
                EnumerationBound::default(),
            )
            .unwrap();
            let v = r.value_exact.unwrap();
            if let Some(o) = oracle.range() {
                let (ok, strictly) = match r.direction {
                    RangeDirection::Min => (v <= o.min, v < o.min),
                    RangeDirection::Max => (v >= o.max, v > o.max),
                };
                strict += strictly as usize;
                if !ok {
                    bad.push(format!("instance {k} alpha {} {} {}: solver {v} less extreme than oracle", r.alpha, r.metric.short_name(), r.direction));
                }
            }
        }
    }
    let xor = Dataset::new(vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]], vec![-1, 1, 1, -1], vec!["p".into(), "q".into()])
        .unwrap();
    let xor_loss = |levels: &[usize]| {
        let m = diagram_training(&xor, &build_skeleton(levels).unwrap(), Rational64::from(0)).unwrap();
        let r = solve_milp(&m, &SolveConfig::default());
        (r.status, r.objective)
    };
    let (s2, l2) = xor_loss(&[1, 2]);
    let (s1, l1) = xor_loss(&[1]);
    let xor_ok = s2 == SolveStatus::Optimal && l2 == Some(0.0) && s1 == SolveStatus::Optimal && l1.is_some_and(|l| l >= 1.0);
    let detail = format!(
        "{checked} queries, {strict} strictly beyond the univariate oracle; XOR loss {l2:?} on (1,2), {l1:?} on (1)"
    );
    if bad.is_empty() && xor_ok && checked == 10 * 3 * 2 * 2 {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(format!("{detail}; {} problems; first: {}", bad.len(), bad.first().cloned().unwrap_or_default()))
    }
}

fn a7(pairs: &[(&str, &[Instance], &[Instance])]) -> Verdict {
    let mut compared = 0;
    let mut bad = Vec::new();
    for (class, orig, swapped) in pairs {
        for (k, (a, b)) in orig.iter().zip(swapped.iter()).enumerate() {
            for r in &a.rows {
                let mirror = b.rows.iter().find(|s| {
                    s.metric == r.metric && s.alpha == r.alpha && s.p == r.p && s.direction != r.direction
                });
                let Some(s) = mirror else {
                    bad.push(format!("{class} {k}: missing mirrored row"));
                    continue;
                };
                compared += 1;
                let ok = match (r.value_exact, s.value_exact) {
                    (Some(x), Some(y)) => x == -y && r.status == RowStatus::Optimal && s.status == RowStatus::Optimal,
                    (None, None) => r.status == s.status,
                    _ => false,
                };
                if !ok {
                    bad.push(format!(
                        "{class} {k} alpha {} p {} {} {}: {:?} vs swapped {:?}",
                        r.alpha, r.p, r.metric.short_name(), r.direction, r.value_exact, s.value_exact
                    ));
                }
            }
        }
    }
    let detail = format!("{compared} value pairs, {} mismatches", bad.len());
    if bad.is_empty() { Verdict::Pass(detail) } else { Verdict::Fail(format!("{detail}; first: {}", bad[0])) }
}

/// Reduced-scale COMPAS trend. Set `RASHOMON_COMPAS_CSV` to a binarized
/// COMPAS file; `RASHOMON_COMPAS_LABEL` (default `two_year_recid`),
/// `RASHOMON_COMPAS_POSITIVE` (default `1`) and `RASHOMON_COMPAS_SENSITIVE`
/// (default `race_african_american`) name its columns.
fn a8() -> Verdict {
    let Ok(path) = std::env::var("RASHOMON_COMPAS_CSV") else {
        return Verdict::Skip("set RASHOMON_COMPAS_CSV to a binarized COMPAS csv to run (slow: up to 30 min)".into());
    };
    let var = |k: &str, d: &str| std::env::var(k).unwrap_or_else(|_| d.to_string());
    let run = || -> rashomon::error::Result<Verdict> {
        let raw = load_csv(&path, &var("RASHOMON_COMPAS_LABEL", "two_year_recid"), &var("RASHOMON_COMPAS_POSITIVE", "1"))?;
        let (sub, _) = split(&raw, SplitSpec { train_size: 200, seed: 0 })?;
        let ds = append_bias(&sub)?;
        let groups = groups_from_feature(&ds, &var("RASHOMON_COMPAS_SENSITIVE", "race_african_american"))?;
        let class = ModelClass::scoring(CoefficientDomain::default_for(ds.m()));
        let cfg = SolveConfig { time_limit: Duration::from_secs(1800), gap_tolerance: 0.02, ..Default::default() };
        let reference = reference_loss(&ds, &class, &cfg)?;
        let l_maj = to_f64(rashomon::dataio::majority_loss(&ds));
        let budget = make_budget(0.2, reference.l_star, l_maj, ds.n())?;
        let q = Query { metric: FairnessMetric::StatisticalParity, direction: RangeDirection::Min, alpha: 5, budget };
        let row = explore(&ds, &groups, &class, &q, &reference, Some(&reference.model), &cfg, 0)?;
        let detail = format!("min SP {:?} bound {:?} gap {:?} ({})", row.value, row.best_bound, row.gap, row.status);
        let positive = row.best_bound.is_some_and(|b| b > 0.0) && row.gap.is_some_and(|g| g <= 0.02);
        Ok(if positive { Verdict::Pass(detail) } else { Verdict::Fail(detail) })
    };
    run().unwrap_or_else(|e| Verdict::Fail(format!("could not run: {e}")))
}

const HIGHS_SCRIPT: &str = r#"
import json, sys, highspy
out = []
for path in json.load(open(sys.argv[1])):
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", 0.0)
    h.readModel(path)
    h.run()
    status = h.modelStatusToString(h.getModelStatus())
    obj = h.getInfo().objective_function_value if status == "Optimal" else None
    out.append({"status": status, "objective": obj})
json.dump(out, open(sys.argv[2], "w"))
"#;

fn a9(instances: &[Instance]) -> Verdict {
    let python = std::env::var("PYTHON").unwrap_or_else(|_| "python3".into());
    let probe = Command::new(&python).args(["-c", "import highspy"]).output();
    if !probe.is_ok_and(|o| o.status.success()) {
        return Verdict::Skip("python3 with highspy not available".into());
    }
    let dir = tempfile::tempdir().unwrap();
    let dom = CoefficientDomain::uniform(4, &[-1, 1]).unwrap();
    let mut paths = Vec::new();
    let mut expected = Vec::new();
    for (k, inst) in instances.iter().enumerate() {
        for r in &inst.rows {
            let model = rashomon::scoring::build_fairness_milp(
                &inst.ds, &dom, &inst.groups, r.metric, r.direction, r.alpha, r.count_budget,
            )
            .unwrap();
            let path = dir.path().join(format!("q{k}_{}.lp", paths.len()));
            std::fs::write(&path, export_lp(&model)).unwrap();
            paths.push(path.to_string_lossy().into_owned());
            expected.push(r.value);
        }
    }
    let list = dir.path().join("models.json");
    let result = dir.path().join("highs.json");
    let script = dir.path().join("solve.py");
    std::fs::write(&list, serde_json::to_string(&paths).unwrap()).unwrap();
    std::fs::write(&script, HIGHS_SCRIPT).unwrap();
    let status = Command::new(&python).arg(&script).arg(&list).arg(&result).status();
    if !status.is_ok_and(|s| s.success()) {
        return Verdict::Fail("external solver run failed".into());
    }
    let got: Vec<serde_json::Value> = serde_json::from_str(&std::fs::read_to_string(&result).unwrap()).unwrap();
    let mut bad = Vec::new();
    for (k, (g, want)) in got.iter().zip(&expected).enumerate() {
        let status = g["status"].as_str().unwrap_or("");
        let ok = match want {
            Some(v) => status == "Optimal" && (g["objective"].as_f64().unwrap_or(f64::NAN) - v).abs() <= 1e-6,
            None => status.contains("nfeasible"),
        };
        if !ok {
            bad.push(format!("{}: expected {want:?}, external {status} {}", paths[k], g["objective"]));
        }
    }
    let detail = format!("{} LP files solved externally, {} mismatches", got.len(), bad.len());
    if bad.is_empty() && got.len() == expected.len() {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(format!("{detail}; first: {}", bad.first().cloned().unwrap_or_default()))
    }
}

fn main() {
    // stay quiet when invoked by `cargo test` with filters or --list
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        return;
    }

    let plan = scoring_plan(CoefficientDomain::uniform(4, &[-1, 1]).unwrap());
    let data = a1_datasets();
    let start = Instant::now();
    let scoring = sweep_all(&data, &plan, false).expect("scoring sweep");
    let a1_time = start.elapsed();
    let scoring_swapped = sweep_all(&data, &plan, true).expect("swapped scoring sweep");
    let ddata = a6_datasets();
    let dplan = diagram_plan();
    let diagrams = sweep_all(&ddata, &dplan, false).expect("diagram sweep");
    let diagrams_swapped = sweep_all(&ddata, &dplan, true).expect("swapped diagram sweep");

    let verdicts = [
        ("A1 scoring oracle equivalence", a1(&scoring, a1_time)),
        ("A2 forced-case sanity", a2()),
        ("A3 big-M semantics", a3()),
        ("A4 interval nesting", a4(&scoring)),
        ("A5 disagreement bound audit", a5(&scoring)),
        ("A6 diagram consistency", a6(&diagrams)),
        ("A7 direction duality", a7(&[("scoring", &scoring, &scoring_swapped), ("diagram", &diagrams, &diagrams_swapped)])),
        ("A8 reduced-scale COMPAS trend", a8()),
        ("A9 LP export cross-check", a9(&scoring)),
    ];
    let mut failed = 0;
    for (name, v) in &verdicts {
        match v {
            Verdict::Pass(d) => println!("PASS {name}: {d}"),
            Verdict::Fail(d) => {
                failed += 1;
                println!("FAIL {name}: {d}");
            }
            Verdict::Skip(d) => println!("SKIP {name}: {d}"),
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
