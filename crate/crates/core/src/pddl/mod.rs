//! Export of update tasks to PDDL2.1 with durative actions and numeric fluents,
//! and translation of sequential plans in both directions.
//!
//! Flows are encoded as one signed fluent per holding, `delta_target`:
//! positive for money that must leave, negative for money that must arrive.
//! Amounts are whole minor units. Trades take effect at the start of their
//! action; switches take the money out at the start and deliver it at the end,
//! so a timed plan shows transfers in flight.
//!
//! The grammar accepted back by [`interp`] is exactly what this module emits:
//! one `(define ...)` form per file, typed objects, `(= (f args) number)` and
//! `(pred args)` initial facts, conjunctive goals and a single metric.

pub mod interp;
pub mod sexpr;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use interp::{check_domain, parse_domain, parse_number, parse_problem, Domain, Num, Problem, World};

use crate::error::{Error, Result};
use crate::money::{Bps, Money};
use crate::plan::{Action, Plan};
use crate::task::{ActionKind, HoldingId, UpdateTask};

pub const DOMAIN_NAME: &str = "portfolio-update";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    #[default]
    TotalCost,
    Makespan,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PddlExportConfig {
    /// Duration of a switch, in days.
    pub switch_duration: u32,
    /// Duration of a market trade, in days.
    pub trade_duration: u32,
    pub metric: Metric,
    /// Charge switches `(transac_fee from + transac_fee to) · amount` as in the
    /// classic textbook action instead of the task's own switch rate and fixed
    /// fees. Only faithful for tasks priced with the sum rule and free funds.
    pub legacy_switch_cost: bool,
}

impl Default for PddlExportConfig {
    fn default() -> Self {
        PddlExportConfig { switch_duration: 8, trade_duration: 1, metric: Metric::TotalCost, legacy_switch_cost: false }
    }
}

impl PddlExportConfig {
    pub fn validate(&self) -> Result<()> {
        if self.switch_duration == 0 || self.trade_duration == 0 {
            return Err(Error::InvalidConfig { field: "duration".into(), reason: "durations must be positive".into() });
        }
        Ok(())
    }
}

const HEADER: &str = r#"(define (domain portfolio-update)
  (:requirements :typing :durative-actions :numeric-fluents :action-costs)
  (:types outfund infund - fund)
  (:predicates (transferable ?h - fund))
  (:functions
    (delta_target ?h - fund) - number
    (in_progress ?from - outfund ?to - infund) - number
    (transac_fee ?h - fund) - number
    (fixed_fee ?h - fund) - number
    (switch_fee ?from - outfund ?to - infund) - number
    (transfer_time ?from - outfund ?to - infund) - number
    (trade_time) - number
    (cash) - number
    (total-cost) - number)
"#;

const TRADES: &str = r#"
  (:durative-action sell
   :parameters (?from - outfund)
   :duration (= ?duration (trade_time))
   :condition (and
       (at start (> (delta_target ?from) 0)))
   :effect (and
       (at start (increase (cash) (delta_target ?from)))
       (at start (assign (delta_target ?from) 0))
       (at start (increase (total-cost)
                           (+ (fixed_fee ?from)
                              (* (transac_fee ?from) (delta_target ?from)))))))

  (:durative-action buy_available
   :parameters (?to - infund)
   :duration (= ?duration (trade_time))
   :condition (and
       (at start (< (delta_target ?to) 0))
       (at start (> (cash) 0))
       (at start (< (+ (delta_target ?to) (cash)) 0)))
   :effect (and
       (at start (increase (delta_target ?to) (cash)))
       (at start (assign (cash) 0))
       (at start (increase (total-cost)
                           (+ (fixed_fee ?to)
                              (* (transac_fee ?to) (cash)))))))

  (:durative-action buy_needed
   :parameters (?to - infund)
   :duration (= ?duration (trade_time))
   :condition (and
       (at start (< (delta_target ?to) 0))
       (at start (>= (+ (cash) (delta_target ?to)) 0)))
   :effect (and
       (at start (increase (cash) (delta_target ?to)))
       (at start (assign (delta_target ?to) 0))
       (at start (increase (total-cost)
                           (- (fixed_fee ?to)
                              (* (transac_fee ?to) (delta_target ?to)))))))
"#;

const LEGACY_SWITCH_COST: &str = r#"(+ (* (transac_fee ?from)
                                (in_progress ?from ?to))
                          (* (transac_fee ?to)
                             (in_progress ?from ?to)))"#;

const SWITCH_COST: &str = r#"(+ (+ (fixed_fee ?from) (fixed_fee ?to))
                             (* (switch_fee ?from ?to)
                                (in_progress ?from ?to)))"#;

/// The domain: five durative actions mirroring the search operators.
pub fn export_domain(config: &PddlExportConfig) -> String {
    let cost = if config.legacy_switch_cost { LEGACY_SWITCH_COST } else { SWITCH_COST };
    let mut out = String::from(HEADER);
    out.push_str(TRADES);
    let _ = write!(
        out,
        r#"
  (:durative-action switch_available
   :parameters (?from - outfund ?to - infund)
   :duration (= ?duration (transfer_time ?from ?to))
   :condition (and
       (at start (transferable ?from))
       (at start (transferable ?to))
       (at start (< (+ (delta_target ?from) (delta_target ?to)) 0))
       (at start (> (delta_target ?from) 0))
       (at start (< (delta_target ?to) 0))
       (at end (> (in_progress ?from ?to) 0))
    )
    :effect (and
        (at start (assign (delta_target ?from) 0))
        (at start (assign (in_progress ?from ?to)
                          (delta_target ?from)))
        (at end (increase (delta_target ?to)
                          (in_progress ?from ?to)))
        (at end (assign (in_progress ?from ?to) 0))
        (at end (increase (total-cost)
                          {cost}))
        )
    )

  (:durative-action switch_needed
   :parameters (?from - outfund ?to - infund)
   :duration (= ?duration (transfer_time ?from ?to))
   :condition (and
       (at start (transferable ?from))
       (at start (transferable ?to))
       (at start (>= (+ (delta_target ?from) (delta_target ?to)) 0))
       (at start (> (delta_target ?from) 0))
       (at start (< (delta_target ?to) 0))
       (at end (> (in_progress ?from ?to) 0))
    )
    :effect (and
        (at start (increase (delta_target ?from) (delta_target ?to)))
        (at start (assign (in_progress ?from ?to)
                          (- 0 (delta_target ?to))))
        (at end (increase (delta_target ?to)
                          (in_progress ?from ?to)))
        (at end (assign (in_progress ?from ?to) 0))
        (at end (increase (total-cost)
                          {cost}))
        )
    )
)
"#
    );
    out
}

fn is_pddl_name(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn problem_name(task: &UpdateTask) -> String {
    let cleaned: String =
        task.name().chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '-' }).collect();
    if is_pddl_name(&cleaned) {
        cleaned
    } else {
        format!("task-{cleaned}")
    }
}

/// A fee rate as a PDDL number (a fraction of the amount).
fn rate_literal(b: Bps) -> String {
    b.as_fraction_decimal()
}

/// The problem: objects, initial fluents, the all-settled goal and the metric.
pub fn export_problem(task: &UpdateTask, config: &PddlExportConfig) -> Result<String> {
    config.validate()?;
    for h in task.holdings() {
        if !is_pddl_name(h.id.as_str()) {
            return Err(Error::invalid(format!("holdings.{}", h.id), "id is not a valid PDDL name"));
        }
    }
    let cm = task.cost_model();
    let outs: Vec<usize> = task.outflows().map(|(i, _)| i).collect();
    let ins: Vec<usize> = task.inflows().map(|(i, _)| i).collect();
    let id = |i: usize| task.id(i).as_str();

    let mut s = String::new();
    let _ = writeln!(s, "(define (problem {})", problem_name(task));
    let _ = writeln!(s, "  (:domain {DOMAIN_NAME})");
    s.push_str("  (:objects");
    if !outs.is_empty() {
        let _ = write!(s, " {} - outfund", outs.iter().map(|&i| id(i)).collect::<Vec<_>>().join(" "));
    }
    if !ins.is_empty() {
        let _ = write!(s, " {} - infund", ins.iter().map(|&i| id(i)).collect::<Vec<_>>().join(" "));
    }
    s.push_str(")\n  (:init\n");
    let _ = writeln!(s, "    (= (cash) {})", task.initial_cash().0);
    s.push_str("    (= (total-cost) 0)\n");
    let _ = writeln!(s, "    (= (trade_time) {})", config.trade_duration);
    for &i in outs.iter().chain(&ins) {
        let signed =
            if task.outflow_vec()[i].is_positive() { task.outflow_vec()[i].0 } else { -task.inflow_vec()[i].0 };
        let _ = writeln!(s, "    (= (delta_target {}) {})", id(i), signed);
        let _ = writeln!(s, "    (= (transac_fee {}) {})", id(i), rate_literal(cm.trade_rate(i)));
        let _ = writeln!(s, "    (= (fixed_fee {}) {})", id(i), cm.fixed_fee(i).0);
        if cm.is_transferable(i) {
            let _ = writeln!(s, "    (transferable {})", id(i));
        }
    }
    for &x in &outs {
        for &y in &ins {
            let _ = writeln!(s, "    (= (in_progress {} {}) 0)", id(x), id(y));
            let _ = writeln!(s, "    (= (transfer_time {} {}) {})", id(x), id(y), config.switch_duration);
            if let Ok(r) = cm.switch_rate(x, y) {
                let _ = writeln!(s, "    (= (switch_fee {} {}) {})", id(x), id(y), rate_literal(r));
            }
        }
    }
    s.push_str("  )\n  (:goal (and");
    for &i in outs.iter().chain(&ins) {
        let _ = write!(s, "\n    (= (delta_target {}) 0)", id(i));
    }
    s.push_str("))\n");
    let metric = match config.metric {
        Metric::TotalCost => "(total-cost)",
        Metric::Makespan => "(total-time)",
    };
    let _ = writeln!(s, "  (:metric minimize {metric}))");
    Ok(s)
}

/// Flows and opening balance recovered from an exported problem.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProblemFlows {
    pub name: String,
    pub outflows: BTreeMap<HoldingId, Money>,
    pub inflows: BTreeMap<HoldingId, Money>,
    pub initial_cash: Money,
}

fn to_money(n: Num, what: &str) -> Result<Money> {
    if !n.is_integer() {
        return Err(Error::Format(format!("{what} = {n} is not a whole number of minor units")));
    }
    i64::try_from(n.to_integer()).map(Money).map_err(|_| Error::Format(format!("{what} is out of range")))
}

/// Reads the flows back from an exported problem file.
pub fn read_problem(text: &str) -> Result<ProblemFlows> {
    let p = parse_problem(text)?;
    let mut flows = ProblemFlows {
        name: p.name.clone(),
        outflows: BTreeMap::new(),
        inflows: BTreeMap::new(),
        initial_cash: Money::ZERO,
    };
    for ((f, args), v) in &p.values {
        match (f.as_str(), args.as_slice()) {
            ("delta_target", [h]) => {
                let m = to_money(*v, &format!("delta_target {h}"))?;
                if m.is_positive() {
                    flows.outflows.insert(HoldingId::new(h), m);
                } else if m < Money::ZERO {
                    flows.inflows.insert(HoldingId::new(h), -m);
                }
            }
            ("cash", []) => flows.initial_cash = to_money(*v, "cash")?,
            _ => {}
        }
    }
    Ok(flows)
}

/// Parses and checks a domain produced by [`export_domain`] (or compatible).
pub fn load_domain(text: &str) -> Result<Domain> {
    let d = parse_domain(text)?;
    check_domain(&d)?;
    Ok(d)
}

fn action_name(kind: ActionKind) -> &'static str {
    match kind {
        ActionKind::Sell => "sell",
        ActionKind::BuyAvailable => "buy_available",
        ActionKind::BuyNeeded => "buy_needed",
        ActionKind::SwitchAvailable => "switch_available",
        ActionKind::SwitchNeeded => "switch_needed",
    }
}

fn kind_of(name: &str) -> Option<ActionKind> {
    Some(match name {
        "sell" => ActionKind::Sell,
        "buy_available" => ActionKind::BuyAvailable,
        "buy_needed" => ActionKind::BuyNeeded,
        "switch_available" => ActionKind::SwitchAvailable,
        "switch_needed" => ActionKind::SwitchNeeded,
        _ => return None,
    })
}

/// Gap between consecutive actions of a sequential timed plan.
const SEPARATION: f64 = 0.001;

/// A sequential timed plan, one `start: (action args) [duration]` line per step.
pub fn plan_to_pddl(plan: &Plan, config: &PddlExportConfig) -> String {
    let mut t = 0.0f64;
    let mut out = String::new();
    for a in &plan.actions {
        let dur = if a.kind.is_switch() { config.switch_duration } else { config.trade_duration } as f64;
        let args: Vec<&str> = a.from.iter().chain(a.to.iter()).map(HoldingId::as_str).collect();
        let _ = writeln!(out, "{t:.3}: ({} {}) [{dur:.3}]", action_name(a.kind), args.join(" "));
        t += dur + SEPARATION;
    }
    out
}

/// One line of a timed plan.
#[derive(Clone, Debug, PartialEq)]
pub struct TimedStep {
    pub start: Num,
    pub action: String,
    pub args: Vec<String>,
    pub duration: Option<Num>,
}

/// Parses `time: (action args) [duration]` lines; `;` lines are comments.
pub fn parse_timed_plan(text: &str) -> Result<Vec<TimedStep>> {
    let mut steps = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with(';') {
            continue;
        }
        let bad = || Error::Format(format!("plan line {}: cannot parse `{line}`", n + 1));
        let (time, rest) = line.split_once(':').ok_or_else(bad)?;
        let start = parse_number(time.trim()).ok_or_else(bad)?;
        let open = rest.find('(').ok_or_else(bad)?;
        let close = rest.find(')').ok_or_else(bad)?;
        let mut words = rest[open + 1..close].split_whitespace();
        let action = words.next().ok_or_else(bad)?.to_ascii_lowercase();
        let args = words.map(str::to_string).collect();
        let tail = rest[close + 1..].trim();
        let duration = match tail.strip_prefix('[').and_then(|t| t.strip_suffix(']')) {
            Some(d) => Some(parse_number(d.trim()).ok_or_else(bad)?),
            None if tail.is_empty() => None,
            None => return Err(bad()),
        };
        steps.push(TimedStep { start, action, args, duration });
    }
    Ok(steps)
}

/// Result of replaying a timed plan through the exported model.
#[derive(Clone, Debug)]
pub struct Replay {
    pub plan: Plan,
    /// `total-cost` accumulated by the PDDL effects (unrounded, minor units).
    pub pddl_cost: Num,
    pub goal_reached: bool,
}

/// Replays a sequential timed plan against the task's exported model and
/// reads each step back as a core action.
///
/// Amounts are observed from the fluents each action changes; costs are priced
/// by the task's fee model. Overlapping actions are rejected.
pub fn plan_from_pddl(task: &UpdateTask, plan_text: &str, config: &PddlExportConfig) -> Result<Replay> {
    let domain = load_domain(&export_domain(config))?;
    let problem = parse_problem(&export_problem(task, config)?)?;
    replay(task, &domain, &problem, plan_text)
}

fn replay(task: &UpdateTask, domain: &Domain, problem: &Problem, plan_text: &str) -> Result<Replay> {
    let mut steps = parse_timed_plan(plan_text)?;
    steps.sort_by_key(|s| s.start);
    let mut world = World::new(domain, problem);
    let mut actions = Vec::with_capacity(steps.len());
    let mut busy_until: Option<Num> = None;
    for st in &steps {
        if busy_until.is_some_and(|t| st.start < t) {
            return Err(Error::Format(format!("({} {}) overlaps the previous action", st.action, st.args.join(" "))));
        }
        let done = world.execute(&st.action, &st.args)?;
        if let Some(d) = st.duration {
            if d != done.duration {
                return Err(Error::Format(format!(
                    "({} ...) declares duration {d}, model says {}",
                    st.action, done.duration
                )));
            }
        }
        busy_until = Some(st.start + done.duration);
        let kind =
            kind_of(&done.action).ok_or_else(|| Error::Format(format!("no core operator for `{}`", done.action)))?;
        let fl = |name: &str, args: &[String]| {
            done.before.get(&(name.to_string(), args.to_vec())).copied().unwrap_or_default()
        };
        let a0 = st.args.first().cloned().unwrap_or_default();
        let moved = match kind {
            ActionKind::Sell => fl("delta_target", std::slice::from_ref(&a0)),
            ActionKind::BuyAvailable => fl("cash", &[]),
            ActionKind::BuyNeeded => -fl("delta_target", std::slice::from_ref(&a0)),
            ActionKind::SwitchAvailable => fl("delta_target", std::slice::from_ref(&a0)),
            ActionKind::SwitchNeeded => -fl("delta_target", &[st.args[1].clone()]),
        };
        let amount = to_money(moved, "moved amount")?;
        let id = |s: &str| HoldingId::new(s);
        let action = match kind {
            ActionKind::Sell => {
                let cost = task.price_action(kind, Some(&id(&a0)), None, amount)?;
                Action::sell(id(&a0), amount, cost)
            }
            ActionKind::BuyAvailable | ActionKind::BuyNeeded => {
                let cost = task.price_action(kind, None, Some(&id(&a0)), amount)?;
                Action::buy(kind, id(&a0), amount, cost)
            }
            _ => {
                let (x, y) = (id(&a0), id(&st.args[1]));
                let cost = task.price_action(kind, Some(&x), Some(&y), amount)?;
                Action::switch(kind, x, y, amount, cost)
            }
        };
        actions.push(action);
    }
    let bind = Default::default();
    let goal_reached = world.holds(&problem.goal, &bind)?;
    let pddl_cost = world.value("total-cost", &[])?;
    Ok(Replay { plan: Plan::new(actions), pddl_cost, goal_reached })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::plan::validate_plan;

    #[test]
    fn domain_has_five_durative_actions() {
        let text = export_domain(&PddlExportConfig::default());
        assert_eq!(text.matches("(:durative-action").count(), 5);
        let d = load_domain(&text).unwrap();
        let names: Vec<_> = d.actions.iter().map(|a| a.name.as_str()).collect();
        assert_eq!(names, ["sell", "buy_available", "buy_needed", "switch_available", "switch_needed"]);
        for f in ["delta_target", "in_progress", "transac_fee", "transfer_time", "total-cost"] {
            assert!(d.functions.contains_key(f), "{f}");
        }
    }

    #[test]
    fn model_portfolio_problem_has_seven_flows() {
        let task = fixtures::model_portfolio();
        let text = export_problem(&task, &PddlExportConfig::default()).unwrap();
        let (init, goal) = text.split_once("(:goal").unwrap();
        assert_eq!(init.matches("(= (delta_target").count(), 7);
        assert_eq!(goal.matches("(= (delta_target").count(), 7);
        assert!(text.contains("(= (delta_target EQ) 10930)"));
        assert!(text.contains("(= (delta_target RE) -16585)"));
        let back = read_problem(&text).unwrap();
        assert_eq!(back.outflows, task.outflow_map());
        assert_eq!(back.inflows, task.inflow_map());
    }

    #[test]
    fn empty_task_goal_holds_initially() {
        let task = UpdateTask::builder().name("empty").build().unwrap();
        let cfg = PddlExportConfig::default();
        let r = plan_from_pddl(&task, "", &cfg).unwrap();
        assert!(r.goal_reached);
        assert!(r.plan.is_empty());
    }

    #[test]
    fn reference_plan_round_trips() {
        let task = fixtures::model_portfolio();
        let plan = fixtures::model_portfolio_plan(&task);
        let cfg = PddlExportConfig::default();
        let text = plan_to_pddl(&plan, &cfg);
        assert!(text.starts_with("0.000: (switch_available EQ MM) [8.000]"));
        let back = plan_from_pddl(&task, &text, &cfg).unwrap();
        assert!(back.goal_reached);
        assert_eq!(back.plan, plan);
        assert!(validate_plan(&task, &back.plan).is_valid());
    }

    #[test]
    fn invalid_step_is_rejected_by_the_model() {
        let task = fixtures::model_portfolio();
        let cfg = PddlExportConfig::default();
        let e = plan_from_pddl(&task, "0.000: (buy_needed RE) [1.000]", &cfg).unwrap_err();
        assert!(e.to_string().contains("buy_needed"), "{e}");
    }

    #[test]
    fn overlapping_steps_are_rejected() {
        let task = fixtures::model_portfolio();
        let cfg = PddlExportConfig::default();
        let text = "0.000: (switch_available EQ MM) [8.000]\n1.000: (sell BT) [1.000]\n";
        assert!(plan_from_pddl(&task, text, &cfg).is_err());
    }

    #[test]
    fn export_is_deterministic() {
        let task = fixtures::model_portfolio();
        let cfg = PddlExportConfig { metric: Metric::Makespan, ..Default::default() };
        assert_eq!(export_problem(&task, &cfg).unwrap(), export_problem(&task, &cfg).unwrap());
        assert!(export_problem(&task, &cfg).unwrap().contains("(:metric minimize (total-time))"));
    }
}
