//! Runs several algorithms over a suite and summarizes the comparison.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use rebalplan::{validate_plan, Money, SearchLimits, UpdateTask};

use crate::{run, Algorithm};

#[derive(Clone, Debug)]
pub struct BenchTask {
    pub id: String,
    pub size: usize,
    pub task: UpdateTask,
}

/// One CSV row: one algorithm on one task.
///
/// Columns are stable. `wall_ms` is the only column that varies between
/// identical runs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRecord {
    pub task_id: String,
    pub size: usize,
    pub algorithm: String,
    /// Total fee cost in major units; empty when no plan was found.
    pub cost: Option<String>,
    pub cost_minor: Option<i64>,
    pub length: Option<usize>,
    pub generated_nodes: Option<u64>,
    pub first_cost_minor: Option<i64>,
    pub first_length: Option<usize>,
    pub first_generated_nodes: Option<u64>,
    pub optimal: bool,
    pub valid: bool,
    pub wall_ms: String,
    pub error: String,
}

impl BenchRecord {
    pub fn cost(&self) -> Option<Money> {
        self.cost_minor.map(Money)
    }
}

fn record(bt: &BenchTask, algorithm: Algorithm, limits: SearchLimits) -> BenchRecord {
    let mut r = BenchRecord {
        task_id: bt.id.clone(),
        size: bt.size,
        algorithm: algorithm.name().to_string(),
        cost: None,
        cost_minor: None,
        length: None,
        generated_nodes: None,
        first_cost_minor: None,
        first_length: None,
        first_generated_nodes: None,
        optimal: false,
        valid: false,
        wall_ms: String::new(),
        error: String::new(),
    };
    match run(algorithm, &bt.task, limits) {
        Ok(out) => {
            r.wall_ms = format!("{:.3}", out.wall.as_secs_f64() * 1e3);
            r.generated_nodes = out.generated_nodes;
            r.optimal = out.optimal;
            if let Some(f) = out.first_solution {
                r.first_cost_minor = Some(f.cost.0);
                r.first_length = Some(f.length);
                r.first_generated_nodes = Some(f.generated_nodes);
            }
            match out.plan {
                Some(plan) => {
                    let report = validate_plan(&bt.task, &plan);
                    r.valid = report.is_valid();
                    if !r.valid {
                        r.error = format!("invalid plan: {report}");
                    }
                    r.cost = Some(plan.total_cost().to_string());
                    r.cost_minor = Some(plan.total_cost().0);
                    r.length = Some(plan.len());
                }
                None => r.error = "node budget exhausted".into(),
            }
        }
        Err(e) => r.error = e.to_string(),
    }
    r
}

/// Runs every (task, algorithm) cell in parallel. Records come back ordered by
/// task id, then algorithm name.
pub fn run_bench(tasks: &[BenchTask], algorithms: &[Algorithm], limits: SearchLimits) -> Vec<BenchRecord> {
    let cells: Vec<(&BenchTask, Algorithm)> =
        tasks.iter().flat_map(|t| algorithms.iter().map(move |&a| (t, a))).collect();
    let mut records: Vec<BenchRecord> = cells.into_par_iter().map(|(t, a)| record(t, a, limits)).collect();
    records.sort_by(|a, b| (&a.task_id, &a.algorithm).cmp(&(&b.task_id, &b.algorithm)));
    records
}

pub fn write_csv<W: std::io::Write>(records: &[BenchRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-task references: the lowest cost found and the shortest plan at that cost.
fn best_by_task(records: &[BenchRecord]) -> BTreeMap<&str, (Money, usize)> {
    let mut best: BTreeMap<&str, (Money, usize)> = BTreeMap::new();
    for r in records {
        if let (Some(c), Some(l)) = (r.cost(), r.length) {
            let e = best.entry(&r.task_id).or_insert((c, l));
            *e = (*e).min((c, l));
        }
    }
    best
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn median(xs: &mut [f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Mean and standard deviation of cost per transaction over the best plans,
/// in major units. Tasks with an empty best plan are skipped.
pub fn cost_per_transaction(records: &[BenchRecord]) -> (f64, f64, usize) {
    let xs: Vec<f64> =
        best_by_task(records).values().filter(|(_, l)| *l > 0).map(|(c, l)| c.as_major() / *l as f64).collect();
    (mean(&xs), std_dev(&xs), xs.len())
}

const DELTA_BUCKETS: [&str; 6] = ["<0", "0", "1", "2", "3", ">=4"];

fn delta_bucket(d: i64) -> usize {
    match d {
        d if d < 0 => 0,
        d if d >= 4 => 5,
        d => d as usize + 1,
    }
}

/// The plain-text report: extra cost against the best plan, Δ-steps against
/// the shortest best plan, generated nodes, and cost per transaction.
pub fn summarize(records: &[BenchRecord]) -> String {
    let best = best_by_task(records);
    let mut by_size: BTreeMap<usize, BTreeMap<&str, Vec<&BenchRecord>>> = BTreeMap::new();
    for r in records {
        by_size.entry(r.size).or_default().entry(r.algorithm.as_str()).or_default().push(r);
    }
    let mut s = String::new();
    let tasks: std::collections::BTreeSet<&str> = records.iter().map(|r| r.task_id.as_str()).collect();
    let _ = writeln!(
        s,
        "tasks: {}  records: {}  invalid plans: {}",
        tasks.len(),
        records.len(),
        records.iter().filter(|r| r.cost.is_some() && !r.valid).count()
    );
    for (size, algos) in &by_size {
        let _ = writeln!(s, "\nsize {size}");
        let _ = writeln!(
            s,
            "  {:<7} {:>6} {:>6} {:>8} {:>9} {:>9} {:>9}   delta-steps {}",
            "algo",
            "solved",
            "best%",
            "optimal",
            "extra.avg",
            "extra.med",
            "extra.max",
            DELTA_BUCKETS.join("/")
        );
        for (algo, rs) in algos {
            let solved: Vec<&&BenchRecord> = rs.iter().filter(|r| r.cost.is_some()).collect();
            let mut extra: Vec<f64> =
                solved.iter().map(|r| (r.cost().unwrap() - best[r.task_id.as_str()].0).as_major()).collect();
            let at_best = extra.iter().filter(|&&e| e == 0.0).count();
            let mut hist = [0usize; 6];
            for r in &solved {
                hist[delta_bucket(r.length.unwrap() as i64 - best[r.task_id.as_str()].1 as i64)] += 1;
            }
            let hist: Vec<String> = hist.iter().map(usize::to_string).collect();
            let optimal = if rs.iter().any(|r| r.generated_nodes.is_some()) {
                rs.iter().filter(|r| r.optimal).count().to_string()
            } else {
                "-".into()
            };
            let _ = writeln!(
                s,
                "  {:<7} {:>6} {:>5.1}% {:>8} {:>9.2} {:>9.2} {:>9.2}   {}",
                algo,
                solved.len(),
                if solved.is_empty() { 0.0 } else { 100.0 * at_best as f64 / solved.len() as f64 },
                optimal,
                mean(&extra),
                median(&mut extra),
                extra.iter().copied().fold(0.0, f64::max),
                hist.join("/"),
            );
        }
        for (algo, rs) in algos {
            let mut nodes: Vec<f64> = rs.iter().filter_map(|r| r.generated_nodes).map(|n| n as f64).collect();
            if nodes.is_empty() {
                continue;
            }
            let (lo, hi) = (nodes.iter().copied().fold(f64::MAX, f64::min), nodes.iter().copied().fold(0.0, f64::max));
            let _ = writeln!(
                s,
                "  nodes {:<7} min {:>8.0} median {:>8.0} mean {:>10.1} max {:>8.0}",
                algo,
                lo,
                median(&mut nodes),
                mean(&nodes),
                hi
            );
        }
    }
    let (m, sd, n) = cost_per_transaction(records);
    let _ = writeln!(s, "\ncost per transaction (best plans, {n} tasks): {m:.3} ± {sd:.3}");
    s
}
