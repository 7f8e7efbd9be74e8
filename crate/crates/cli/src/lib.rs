//! Solver dispatch and the benchmark harness behind the `rebalplan` binary.

pub mod bench;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rebalplan::lp::lp_plus_plan;
use rebalplan::search::FirstSolution;
use rebalplan::{astar_fee, dfbnb, naive_plan, Plan, SearchLimits, UpdateTask};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    Naive,
    LpPlus,
    Dfbnb,
    Astar,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Naive, Algorithm::LpPlus, Algorithm::Dfbnb, Algorithm::Astar];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Naive => "naive",
            Algorithm::LpPlus => "lp+",
            Algorithm::Dfbnb => "dfbnb",
            Algorithm::Astar => "astar",
        }
    }

    pub fn is_search(self) -> bool {
        matches!(self, Algorithm::Dfbnb | Algorithm::Astar)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "naive" => Ok(Algorithm::Naive),
            "lp+" | "lpplus" | "lp-plus" | "lp" => Ok(Algorithm::LpPlus),
            "dfbnb" => Ok(Algorithm::Dfbnb),
            "astar" | "a*" | "astar-fee" => Ok(Algorithm::Astar),
            other => Err(format!("unknown algorithm `{other}` (expected naive, lp+, dfbnb or astar)")),
        }
    }
}

/// What one solver produced on one task.
#[derive(Clone, Debug)]
pub struct Run {
    pub algorithm: Algorithm,
    /// `None` when a search ran out of budget.
    pub plan: Option<Plan>,
    pub optimal: bool,
    pub generated_nodes: Option<u64>,
    pub first_solution: Option<FirstSolution>,
    pub wall: Duration,
}

/// Runs `algorithm`. Errors are task errors (infeasible, invalid); an
/// exhausted budget is a successful run without a plan.
pub fn run(algorithm: Algorithm, task: &UpdateTask, limits: SearchLimits) -> rebalplan::Result<Run> {
    let start = Instant::now();
    let mut out = Run {
        algorithm,
        plan: None,
        optimal: false,
        generated_nodes: None,
        first_solution: None,
        wall: Duration::ZERO,
    };
    match algorithm {
        Algorithm::Naive => out.plan = Some(naive_plan(task)?),
        Algorithm::LpPlus => out.plan = Some(lp_plus_plan(task)?),
        Algorithm::Dfbnb | Algorithm::Astar => {
            let r = if algorithm == Algorithm::Astar { astar_fee(task, limits) } else { dfbnb(task, limits) };
            out.optimal = r.optimal;
            out.generated_nodes = Some(r.generated_nodes);
            out.first_solution = r.first_solution;
            out.plan = r.plan;
        }
    }
    out.wall = start.elapsed();
    Ok(out)
}

/// Parses `4..8` (inclusive), `4-8`, `4,6,8` or `10`.
pub fn parse_sizes(s: &str) -> Result<Vec<usize>, String> {
    let bad = || format!("invalid --sizes `{s}`: expected e.g. 4..8, 4,5,6 or 10");
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let range = part.split_once("..=").or_else(|| part.split_once("..")).or_else(|| part.split_once('-'));
        match range {
            Some((a, b)) => {
                let (a, b): (usize, usize) =
                    (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}
