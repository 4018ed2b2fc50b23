//! Command-line front end. Every subcommand is a thin shell over the library
//! calls of the same name; options come from flags and, optionally, a flat
//! JSON config file whose keys are the flag names in snake case. Flags win.

use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use num_rational::Rational64;
use serde::Deserialize;

use crate::dataio::{append_bias, groups_from_feature, load_csv, majority_loss, split, Dataset, GroupSpec, SplitSpec};
use crate::diagrams::{build_skeleton, DEFAULT_LEVELS};
use crate::error::{Error, Result};
use crate::explorer::{
    budget_from_epsilon, explore, export_results, export_summary, make_budget, reference_loss, run_sweep,
    summarize, ExportFormat, FittedModel, ModelClass, Query, RashomonBudget, ReferenceFit, ResumeLog, RowStatus,
    SweepPlan, DEFAULT_MAX_RESTARTS, DEFAULT_P,
};
use crate::fairness::{empirical_loss, to_f64, FairnessMetric};
use crate::milp::export_lp;
use crate::scoring::{CoefficientDomain, RangeDirection};
use crate::solver::{solve_milp, SolveConfig};

#[derive(Debug, Parser)]
#[command(name = "rashomon", version, about = "Certified fairness ranges over Rashomon sets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the reference model (C = 0 unless --c is given).
    Train(Opts),
    /// Solve one minimal or maximal fairness query.
    Explore(Opts),
    /// Run an (alpha, p, metric, direction) grid over one or more seeds.
    Sweep(Opts),
    /// Write the query model in LP format without solving it.
    ExportLp(Opts),
    /// Report accuracy and fairness of a saved model.
    Eval(Opts),
}

/// Options shared by all subcommands; unused ones are ignored.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Opts {
    /// Flat JSON file with default values for any of these options.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// CSV dataset with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub label_col: Option<String>,
    /// Label value mapped to +1 (default "1").
    #[arg(long)]
    pub positive_label: Option<String>,
    /// Binary feature splitting the protected groups (1 = first group).
    #[arg(long)]
    pub sensitive: Option<String>,
    /// Hypothesis class: scoring or diagram.
    #[arg(long)]
    pub class: Option<String>,
    /// Coefficient values allowed for every scoring feature.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub omega: Option<Vec<i64>>,
    /// Internal nodes per diagram level.
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<usize>>,
    /// Sparsity limit(s).
    #[arg(long, value_delimiter = ',')]
    pub alpha: Option<Vec<usize>>,
    /// Budget fraction(s) between the optimal and the majority loss.
    #[arg(long, value_delimiter = ',')]
    pub p: Option<Vec<f64>>,
    /// Raw loss tolerance over the optimal loss (explore, export-lp).
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    /// Misclassification count budget (explore, export-lp).
    #[arg(long)]
    pub budget: Option<u64>,
    /// sp and/or eo.
    #[arg(long, value_delimiter = ',')]
    pub metric: Option<Vec<String>>,
    /// min and/or max.
    #[arg(long, value_delimiter = ',')]
    pub direction: Option<Vec<String>>,
    /// Split seed(s).
    #[arg(long, value_delimiter = ',')]
    #[serde(alias = "seeds")]
    pub seed: Option<Vec<u64>>,
    /// Seconds per solve.
    #[arg(long)]
    pub time_limit: Option<f64>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Training rows per seed; the rest is held out (default: all rows).
    #[arg(long)]
    pub train_size: Option<usize>,
    /// Sparsity penalty for train, e.g. 0.01 or 1/100.
    #[arg(long)]
    pub c: Option<String>,
    /// Model JSON to evaluate.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Output file (train, explore, export-lp) or directory (sweep).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Resume log for sweep (default: <out>/resume.jsonl).
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long)]
    pub max_restarts: Option<usize>,
}

macro_rules! prefer {
    ($a:ident, $b:ident, $($f:ident),*) => { $( if $a.$f.is_none() { $a.$f = $b.$f; } )* };
}

impl Opts {
    /// Fills options missing on the command line from the config file.
    pub fn resolve(mut self) -> Result<Opts> {
        let Some(path) = self.config.clone() else { return Ok(self) };
        let text =
            std::fs::read_to_string(&path).map_err(|e| Error::Load { path: path.clone(), reason: e.to_string() })?;
        let file: Opts = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        prefer!(
            self, file, data, label_col, positive_label, sensitive, class, omega, levels, alpha, p, epsilon, budget,
            metric, direction, seed, time_limit, threads, train_size, c, model, out, resume, max_restarts
        );
        Ok(self)
    }

    fn required<'a, T>(v: &'a Option<T>, flag: &str) -> Result<&'a T> {
        v.as_ref().ok_or_else(|| Error::Config(format!("missing --{flag}")))
    }

    fn solve_config(&self) -> Result<SolveConfig> {
        let cfg = SolveConfig {
            time_limit: Duration::from_secs_f64(self.time_limit.unwrap_or(60.0).max(1e-3)),
            threads: self.threads.unwrap_or(1),
            ..Default::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn is_diagram(&self) -> Result<bool> {
        match self.class.as_deref().unwrap_or("scoring") {
            "scoring" => Ok(false),
            "diagram" => Ok(true),
            other => Err(Error::Config(format!("unknown class `{other}` (expected scoring or diagram)"))),
        }
    }

    fn metrics(&self) -> Result<Vec<FairnessMetric>> {
        match &self.metric {
            None => Ok(vec![FairnessMetric::StatisticalParity, FairnessMetric::EqualOpportunity]),
            Some(v) => v
                .iter()
                .map(|s| FairnessMetric::parse(s).ok_or_else(|| Error::Config(format!("unknown metric `{s}`"))))
                .collect(),
        }
    }

    fn directions(&self) -> Result<Vec<RangeDirection>> {
        match &self.direction {
            None => Ok(vec![RangeDirection::Min, RangeDirection::Max]),
            Some(v) => v
                .iter()
                .map(|s| RangeDirection::parse(s).ok_or_else(|| Error::Config(format!("unknown direction `{s}`"))))
                .collect(),
        }
    }

    fn alphas(&self) -> Result<Vec<usize>> {
        self.alpha.clone().filter(|a| !a.is_empty()).ok_or_else(|| Error::Config("missing --alpha".into()))
    }

    fn seeds(&self) -> Vec<u64> {
        self.seed.clone().filter(|s| !s.is_empty()).unwrap_or_else(|| vec![0])
    }

    fn load(&self) -> Result<Dataset> {
        let data = Self::required(&self.data, "data")?;
        let label = Self::required(&self.label_col, "label-col")?;
        load_csv(data, label, self.positive_label.as_deref().unwrap_or("1"))
    }

    /// Training and held-out parts for `seed`, prepared for the class.
    fn prepared(&self, raw: &Dataset, seed: u64) -> Result<(Dataset, Option<Dataset>)> {
        let (train, test) = match self.train_size {
            Some(t) => {
                let (a, b) = split(raw, SplitSpec { train_size: t, seed })?;
                (a, Some(b))
            }
            None => (raw.clone(), None),
        };
        if self.is_diagram()? {
            Ok((train, test))
        } else {
            Ok((append_bias(&train)?, test.map(|t| append_bias(&t)).transpose()?))
        }
    }

    fn model_class(&self, ds: &Dataset) -> Result<ModelClass> {
        if self.is_diagram()? {
            let levels = self.levels.clone().unwrap_or_else(|| DEFAULT_LEVELS.to_vec());
            Ok(ModelClass::diagram(build_skeleton(&levels)?))
        } else {
            let dom = match &self.omega {
                Some(vals) => CoefficientDomain::uniform(ds.m(), vals)?,
                None => CoefficientDomain::default_for(ds.m()),
            };
            Ok(ModelClass::scoring(dom))
        }
    }

    fn groups(&self, ds: &Dataset) -> Result<GroupSpec> {
        groups_from_feature(ds, Self::required(&self.sensitive, "sensitive")?)
    }

    fn single_query(&self, ds: &Dataset, reference: &ReferenceFit) -> Result<Query> {
        let first = |v: &Option<Vec<String>>, what: &str| -> Result<()> {
            if v.as_ref().is_some_and(|v| v.len() > 1) {
                return Err(Error::Config(format!("{what} takes a single value here")));
            }
            Ok(())
        };
        first(&self.metric, "--metric")?;
        first(&self.direction, "--direction")?;
        let alpha = match self.alpha.as_deref() {
            Some([a]) => *a,
            Some(_) => return Err(Error::Config("--alpha takes a single value here".into())),
            None => return Err(Error::Config("missing --alpha".into())),
        };
        if alpha == 0 {
            return Err(Error::Config("--alpha must be positive".into()));
        }
        let metric = self.metrics()?[0];
        let direction = self.directions()?[0];
        let budget = self.budget_for(ds, reference.l_star)?;
        Ok(Query { metric, direction, alpha, budget })
    }

    fn budget_for(&self, ds: &Dataset, l_star: f64) -> Result<RashomonBudget> {
        let n = ds.n();
        let l_maj = to_f64(majority_loss(ds));
        if let Some(count) = self.budget {
            let mut b = budget_from_epsilon(count as f64 / n as f64 - l_star, l_star, l_maj, n)?;
            b.count_budget = count;
            return Ok(b);
        }
        if let Some(eps) = self.epsilon {
            return budget_from_epsilon(eps, l_star, l_maj, n);
        }
        match self.p.as_deref() {
            Some([p]) => make_budget(*p, l_star, l_maj, n),
            Some(_) => Err(Error::Config("--p takes a single value here".into())),
            None => make_budget(DEFAULT_P[1], l_star, l_maj, n),
        }
    }
}

/// Maps an error to the process exit code: 2 input, 3 metric, 4 solver.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::MetricUndefined(_) | Error::Group(_) => 3,
        Error::Solver(_) | Error::NoIncumbent | Error::Consistency(_) => 4,
        _ => 2,
    }
}

/// Parses arguments, runs the subcommand and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(command: Command) -> Result<i32> {
    match command {
        Command::Train(o) => cmd_train(&o.resolve()?),
        Command::Explore(o) => cmd_explore(&o.resolve()?),
        Command::Sweep(o) => cmd_sweep(&o.resolve()?),
        Command::ExportLp(o) => cmd_export_lp(&o.resolve()?),
        Command::Eval(o) => cmd_eval(&o.resolve()?),
    }
}

fn accuracy(model: &FittedModel, ds: &Dataset) -> Result<f64> {
    Ok(1.0 - to_f64(empirical_loss(&model.predict_all(ds)?, ds.labels())?))
}

fn write_model(model: &FittedModel, path: &Path) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(&model.to_json())?)?;
    Ok(())
}

pub fn cmd_train(o: &Opts) -> Result<i32> {
    let raw = o.load()?;
    let seed = o.seeds()[0];
    let (ds, test) = o.prepared(&raw, seed)?;
    let class = o.model_class(&ds)?;
    let cfg = o.solve_config()?;
    let c = parse_rational(o.c.as_deref().unwrap_or("0"))?;
    let (model, status) = if *c.numer() == 0 {
        let r = reference_loss(&ds, &class, &cfg)?;
        println!("optimal loss: {} / {} ({})", r.loss_count, ds.n(), r.status);
        (r.model, r.status)
    } else {
        let milp = class.build_training(&ds, c)?;
        let r = solve_milp(&milp, &cfg);
        if r.incumbent.is_none() {
            return Err(Error::Solver(format!("training ended {} without a model", r.status)));
        }
        (class.decode(&milp, &r, &ds)?, r.status)
    };
    println!("status: {status}");
    println!("train accuracy: {:.6}", accuracy(&model, &ds)?);
    if let Some(t) = &test {
        println!("test accuracy: {:.6}", accuracy(&model, t)?);
    }
    println!("sparsity: {}", model.sparsity());
    print!("{}", model.render());
    let out = o.out.clone().unwrap_or_else(|| PathBuf::from("model.json"));
    write_model(&model, &out)?;
    println!("model written to {}", out.display());
    Ok(0)
}

pub fn cmd_explore(o: &Opts) -> Result<i32> {
    let raw = o.load()?;
    let seed = o.seeds()[0];
    let (ds, _) = o.prepared(&raw, seed)?;
    let class = o.model_class(&ds)?;
    let groups = o.groups(&ds)?;
    let cfg = o.solve_config()?;
    o.metrics()?[0].groups(&groups)?;
    let reference = reference_loss(&ds, &class, &cfg)?;
    let q = o.single_query(&ds, &reference)?;
    let row = explore(&ds, &groups, &class, &q, &reference, Some(&reference.model), &cfg, seed)?;
    println!("{} {} alpha={} budget={} (p={})", q.direction, q.metric.short_name(), q.alpha, q.budget.count_budget, q.budget.p);
    println!("status: {}", row.status);
    let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.6}"));
    println!("value: {}", fmt(row.value));
    if let Some(v) = row.value_exact {
        println!("value (exact): {v}");
    }
    println!("bound: {}", fmt(row.best_bound));
    println!("gap: {}", fmt(row.gap));
    if let Some(note) = &row.note {
        println!("note: {note}");
    }
    if let Some(m) = &row.model {
        println!("loss: {} / {}  sparsity: {}", row.loss_count.unwrap_or(0), ds.n(), row.sparsity.unwrap_or(0));
        print!("{}", m.render());
        if let Some(out) = &o.out {
            write_model(m, out)?;
            println!("model written to {}", out.display());
        }
    } else if row.status == RowStatus::TimeLimit {
        return Err(Error::Solver("time limit reached without a model".into()));
    }
    Ok(0)
}

pub fn cmd_sweep(o: &Opts) -> Result<i32> {
    let raw = o.load()?;
    let out = o.out.clone().unwrap_or_else(|| PathBuf::from("sweep_out"));
    std::fs::create_dir_all(&out)?;
    let resume = o.resume.clone().unwrap_or_else(|| out.join("resume.jsonl"));
    let (mut log, done) = ResumeLog::open(&resume)?;
    if !done.is_empty() {
        println!("resuming: {} completed rows in {}", done.len(), resume.display());
    }
    let seeds = o.seeds();
    let mut all = Vec::new();
    let mut failed = 0;
    for &seed in &seeds {
        let (ds, _) = o.prepared(&raw, seed)?;
        let groups = o.groups(&ds)?;
        let mut plan = SweepPlan::new(o.model_class(&ds)?, o.alphas()?);
        if let Some(p) = &o.p {
            plan.ps = p.clone();
        }
        plan.metrics = o.metrics()?;
        plan.directions = o.directions()?;
        plan.seeds = seeds.clone();
        let cfg = o.solve_config()?;
        plan.time_limit = cfg.time_limit;
        plan.threads = cfg.threads;
        plan.max_restarts = o.max_restarts.unwrap_or(DEFAULT_MAX_RESTARTS);
        for m in &plan.metrics {
            m.groups(&groups)?;
        }
        let outcome = run_sweep(&ds, &groups, &plan, seed, &done, Some(&mut log))?;
        println!("seed {seed}: optimal loss {} / {}, {} rows", outcome.reference.loss_count, ds.n(), outcome.results.len());
        failed += outcome.results.iter().filter(|r| r.status == RowStatus::Error).count();
        all.extend(outcome.results);
    }
    export_results(&all, &out.join("results.csv"), ExportFormat::Csv)?;
    export_results(&all, &out.join("results.json"), ExportFormat::Json)?;
    let summary = summarize(&all);
    export_summary(&summary, &out.join("summary.csv"))?;
    println!("{:<8} {:<4} {:<4} {:>5} {:>6} {:>10} {:>10} {:>6}", "class", "met", "dir", "alpha", "p", "mean", "std", "n");
    for s in &summary {
        let f = |x: Option<f64>| x.map_or("-".into(), |v| format!("{v:.4}"));
        println!(
            "{:<8} {:<4} {:<4} {:>5} {:>6} {:>10} {:>10} {:>6}",
            s.class,
            s.metric.short_name(),
            s.direction.as_str(),
            s.alpha,
            s.p,
            f(s.mean),
            f(s.std),
            format!("{}/{}", s.count, s.seeds)
        );
    }
    println!("{} rows written to {}", all.len(), out.display());
    if failed > 0 {
        eprintln!("{failed} queries failed; see the note column in results.json");
    }
    Ok(0)
}

pub fn cmd_export_lp(o: &Opts) -> Result<i32> {
    let raw = o.load()?;
    let (ds, _) = o.prepared(&raw, o.seeds()[0])?;
    let class = o.model_class(&ds)?;
    let groups = o.groups(&ds)?;
    // An explicit count budget needs no reference solve.
    let l_star = if o.budget.is_some() { 0.0 } else { reference_loss(&ds, &class, &o.solve_config()?)?.l_star };
    let stub = ReferenceFit {
        status: crate::solver::SolveStatus::Optimal,
        loss_count: 0,
        lower_bound_count: 0,
        l_star,
        model: FittedModel::Scoring(crate::scoring::ScoringSystem::zero(&ds)),
        wall_time: 0.0,
    };
    let q = o.single_query(&ds, &stub)?;
    let model = class.build_query(&ds, &groups, q.metric, q.direction, q.alpha, q.budget.count_budget)?;
    let out = o.out.clone().unwrap_or_else(|| PathBuf::from("model.lp"));
    std::fs::write(&out, export_lp(&model))?;
    println!(
        "{} variables, {} constraints (budget {}) written to {}",
        model.variables().len(),
        model.constraints().len(),
        q.budget.count_budget,
        out.display()
    );
    Ok(0)
}

pub fn cmd_eval(o: &Opts) -> Result<i32> {
    let path = Opts::required(&o.model, "model")?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::Load { path: path.clone(), reason: e.to_string() })?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Load { path: path.clone(), reason: e.to_string() })?;
    let model = FittedModel::from_json(&value).map_err(|e| Error::Load { path: path.clone(), reason: e.to_string() })?;
    let raw = o.load()?;
    let mut opts = o.clone();
    opts.class = Some(model.class_name().into());
    let (train, test) = opts.prepared(&raw, o.seeds()[0])?;
    let mut parts = vec![("train", train)];
    if let Some(t) = test {
        parts.push(("test", t));
    }
    if o.train_size.is_none() {
        parts[0].0 = "data";
    }
    for (name, ds) in &parts {
        let m = model.align_to(ds)?;
        let preds = m.predict_all(ds)?;
        println!("{name} accuracy: {:.6}", accuracy(&m, ds)?);
        if o.sensitive.is_some() {
            let groups = opts.groups(ds)?;
            for metric in [FairnessMetric::StatisticalParity, FairnessMetric::EqualOpportunity] {
                match metric.evaluate(&preds, &groups) {
                    Ok(v) => println!("{name} {}: {:.6}", metric.short_name(), to_f64(v)),
                    Err(e) => println!("{name} {}: undefined ({e})", metric.short_name()),
                }
            }
        }
    }
    Ok(0)
}

/// `a/b`, an integer, or a decimal such as `0.015`, read exactly.
pub fn parse_rational(s: &str) -> Result<Rational64> {
    let bad = || Error::Config(format!("cannot read `{s}` as a number"));
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let a: i64 = a.trim().parse().map_err(|_| bad())?;
        let b: i64 = b.trim().parse().map_err(|_| bad())?;
        if b == 0 {
            return Err(bad());
        }
        return Ok(Rational64::new(a, b));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    if frac.len() > 15 {
        return Err(bad());
    }
    let den = 10i64.pow(frac.len() as u32);
    let num: i64 = format!("{int}{frac}").trim_start_matches('0').parse().unwrap_or(0);
    let r = Rational64::new(num, den);
    Ok(if neg { -r } else { r })
}
