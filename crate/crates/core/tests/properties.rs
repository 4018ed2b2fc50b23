use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use proptest::prelude::*;

use rashomon::dataio::{append_bias, groups_from_feature, split, Dataset, SplitSpec};
use rashomon::diagrams::{self, build_skeleton};
use rashomon::fairness::{FairnessMetric, Predictions};
use rashomon::oracle::{enumerate_scoring, EnumerationBound};
use rashomon::scoring::{self, CoefficientDomain, RangeDirection, ScoringSystem};
use rashomon::solver::{check_assignment, solve_milp, SolveConfig, SolveStatus};
use rashomon::synth::random_dataset;

fn big(r: Rational64) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

fn small_case() -> impl Strategy<Value = (Dataset, u64)> {
    (6usize..12, any::<u64>()).prop_map(|(n, seed)| (append_bias(&random_dataset(n, 2, 0.25, seed).unwrap()).unwrap(), seed))
}

fn optimal_loss(model: &rashomon::milp::MilpModel) -> f64 {
    let r = solve_milp(model, &SolveConfig::default());
    assert_eq!(r.status, SolveStatus::Optimal);
    r.objective.unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn solver_matches_enumeration((ds, seed) in small_case(), alpha in 1usize..4, slack in 0u64..4, max in any::<bool>()) {
        let dom = CoefficientDomain::uniform(ds.m(), &[-2, -1, 1, 2]).unwrap();
        let groups = groups_from_feature(&ds, "f1").unwrap();
        let metric = if seed % 2 == 0 { FairnessMetric::StatisticalParity } else { FairnessMetric::EqualOpportunity };
        prop_assume!(metric.groups(&groups).is_ok());
        let budget = slack + ds.n() as u64 / 4;
        let direction = if max { RangeDirection::Max } else { RangeDirection::Min };
        let model = scoring::build_fairness_milp(&ds, &dom, &groups, metric, direction, alpha, budget).unwrap();
        let r = solve_milp(&model, &SolveConfig::default());
        let oracle = enumerate_scoring(&ds, &dom, alpha, budget, metric, &groups, EnumerationBound::default()).unwrap();
        match oracle.range() {
            None => prop_assert_eq!(r.status, SolveStatus::Infeasible),
            Some(o) => {
                prop_assert_eq!(r.status, SolveStatus::Optimal);
                let want = if max { o.max } else { o.min };
                prop_assert_eq!(r.objective_exact.unwrap(), big(want));
            }
        }
    }

    #[test]
    fn every_coefficient_vector_is_representable(
        (ds, _) in small_case(),
        coefs in proptest::collection::vec(prop_oneof![Just(0i64), Just(-5), Just(-1), Just(1), Just(2), Just(50)], 3),
    ) {
        // the big-M rows must never cut off a model in the domain
        let dom = CoefficientDomain::default_for(ds.m());
        let model = scoring::build_training_milp(&ds, &dom, Rational64::new(1, 100)).unwrap();
        let sys = ScoringSystem::new(ds.feature_names().to_vec(), coefs).unwrap();
        let mut vals = vec![0.0; model.variables().len()];
        for (id, v) in sys.assignment(&model, &ds).unwrap() {
            vals[id.0] = v as f64;
        }
        prop_assert!(check_assignment(&model, &vals, 1e-9).unwrap().feasible);
    }

    #[test]
    fn swapping_groups_negates_metrics(labels in proptest::collection::vec(any::<bool>(), 4..30), preds in proptest::collection::vec(any::<bool>(), 30), cut in 1usize..3) {
        let n = labels.len();
        let rows: Vec<Vec<u8>> = (0..n).map(|i| vec![(i % (cut + 1) == 0) as u8]).collect();
        let y: Vec<i8> = labels.iter().map(|&b| if b { 1 } else { -1 }).collect();
        let ds = Dataset::new(rows, y, vec!["g".into()]).unwrap();
        let Ok(groups) = groups_from_feature(&ds, "g") else { return Ok(()) };
        let p = Predictions::from_indicators(&preds[..n]);
        for metric in [FairnessMetric::StatisticalParity, FairnessMetric::EqualOpportunity] {
            match (metric.evaluate(&p, &groups), metric.evaluate(&p, &groups.swapped())) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a, -b),
                (a, b) => prop_assert!(a.is_err() && b.is_err()),
            }
        }
    }

    #[test]
    fn split_partitions_the_rows(n in 2usize..40, seed in any::<u64>(), frac in 0.05f64..0.95) {
        let ds = random_dataset(n.max(8), 3, 0.2, seed).unwrap();
        let train_size = ((ds.n() as f64 * frac) as usize).clamp(1, ds.n() - 1);
        let (a, b) = split(&ds, SplitSpec { train_size, seed }).unwrap();
        prop_assert_eq!(a.n(), train_size);
        prop_assert_eq!(a.n() + b.n(), ds.n());
        let key = |d: &Dataset| (0..d.n()).map(|i| (d.row(i).to_vec(), d.label(i))).collect::<Vec<_>>();
        let mut joined = key(&a);
        joined.extend(key(&b));
        joined.sort();
        let mut all = key(&ds);
        all.sort();
        prop_assert_eq!(joined, all);
        // same seed, same split
        let (a2, _) = split(&ds, SplitSpec { train_size, seed }).unwrap();
        prop_assert_eq!(key(&a), key(&a2));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn richer_classes_fit_at_least_as_well(seed in any::<u64>()) {
        let raw = random_dataset(14, 3, 0.3, seed).unwrap();
        let ds = append_bias(&raw).unwrap();
        let dom = CoefficientDomain::default_for(ds.m());
        let zero = Rational64::from(0);
        // more sparsity never hurts scoring systems
        let mut last = f64::INFINITY;
        for alpha in 1..=ds.m() {
            let mut m = scoring::build_training_milp(&ds, &dom, zero).unwrap();
            let u: Vec<_> = m.variables().iter().filter(|v| v.name.starts_with("u_")).map(|v| v.id).collect();
            m.add_constraint(rashomon::milp::LinearConstraint::new(
                u.into_iter().map(|id| (id, Rational64::from(1))).collect(),
                rashomon::milp::Sense::Le,
                Rational64::from(alpha as i64),
            )).unwrap();
            let loss = optimal_loss(&m);
            prop_assert!(loss <= last + 1e-9);
            last = loss;
        }
        // a deeper skeleton contains the shallower diagrams
        let shallow = optimal_loss(&diagrams::build_training_milp(&raw, &build_skeleton(&[1]).unwrap(), zero).unwrap());
        let deep = optimal_loss(&diagrams::build_training_milp(&raw, &build_skeleton(&[1, 2]).unwrap(), zero).unwrap());
        prop_assert!(deep <= shallow + 1e-9);
    }

    #[test]
    fn warm_start_does_not_change_the_optimum(seed in any::<u64>(), alpha in 1usize..4, max in any::<bool>()) {
        let ds = append_bias(&random_dataset(12, 2, 0.2, seed).unwrap()).unwrap();
        let dom = CoefficientDomain::uniform(ds.m(), &[-2, -1, 1, 2]).unwrap();
        let groups = groups_from_feature(&ds, "f1").unwrap();
        let direction = if max { RangeDirection::Max } else { RangeDirection::Min };
        let budget = ds.n() as u64 / 2;
        let mut model = scoring::build_fairness_milp(&ds, &dom, &groups, FairnessMetric::StatisticalParity, direction, alpha, budget).unwrap();
        let cold = solve_milp(&model, &SolveConfig::default());
        prop_assume!(cold.status == SolveStatus::Optimal);
        // warm-start from the all-zero system (always within sparsity; it
        // may or may not meet the budget)
        let zero = ScoringSystem::zero(&ds);
        model.set_warm_start(Some(zero.assignment(&model, &ds).unwrap())).unwrap();
        let warm = solve_milp(&model, &SolveConfig::default());
        prop_assert_eq!(warm.status, SolveStatus::Optimal);
        prop_assert_eq!(warm.objective_exact, cold.objective_exact);
    }
}
