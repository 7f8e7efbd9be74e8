//! Plan-finding algorithms over the state model.
//!
//! [`astar_fee`] and [`dfbnb`] run on any [`SearchSpace`]; the base model is
//! wrapped by [`BaseSpace`] and the multi-currency model by the `forex` module.
//! Plans are compared lexicographically by `(fee cost, action count)`.

mod astar;
mod dfbnb;
mod oracle;

use std::cmp::Reverse;
use std::hash::Hash;

pub use astar::astar;
pub use dfbnb::dfbnb_search;
pub use oracle::{exhaustive_oracle, Completion, OracleTable, ORACLE_FLOW_LIMIT};

use crate::error::{Error, Result};
use crate::money::Money;
use crate::plan::{Action, Plan};
use crate::statespace::{self, FeeHeuristic, State};
use crate::task::{ActionKind, UpdateTask};

/// A search problem with non-negative action costs and admissible bounds.
pub trait SearchSpace {
    type State: Clone + Eq + Hash;
    type Action: Clone;

    fn initial(&self) -> Self::State;
    fn is_goal(&self, state: &Self::State) -> bool;
    /// Calls `emit(action, cost, next_state)` for every applicable action.
    fn expand(&self, state: &Self::State, emit: &mut dyn FnMut(Self::Action, Money, Self::State));
    /// Lower bound on the remaining fee cost.
    fn h_fee(&self, state: &Self::State) -> Money;
    /// Lower bound on the remaining number of actions.
    fn h_count(&self, state: &Self::State) -> usize;
    /// Reorders successors for depth-first dives. Default keeps generation order.
    fn order_for_dive(&self, _children: &mut [(Self::Action, Money, Self::State)]) {}
}

/// The base state model of one task.
pub struct BaseSpace<'a> {
    task: &'a UpdateTask,
    heuristic: FeeHeuristic,
}

impl<'a> BaseSpace<'a> {
    pub fn new(task: &'a UpdateTask) -> Self {
        BaseSpace { task, heuristic: FeeHeuristic::new(task) }
    }

    pub fn task(&self) -> &UpdateTask {
        self.task
    }
}

/// Dive order: switches, then sells, then buys; larger amounts first.
pub(crate) fn dive_rank(a: &Action) -> (u8, Reverse<Money>) {
    let group = match a.kind {
        ActionKind::SwitchAvailable | ActionKind::SwitchNeeded => 0,
        ActionKind::Sell => 1,
        ActionKind::BuyAvailable | ActionKind::BuyNeeded => 2,
    };
    (group, Reverse(a.amount))
}

impl SearchSpace for BaseSpace<'_> {
    type State = State;
    type Action = Action;

    fn initial(&self) -> State {
        statespace::initial_state(self.task)
    }

    fn is_goal(&self, state: &State) -> bool {
        statespace::is_goal(state)
    }

    fn expand(&self, state: &State, emit: &mut dyn FnMut(Action, Money, State)) {
        statespace::expand(state, self.task, |a, s| {
            let c = a.cost;
            emit(a, c, s)
        });
    }

    fn h_fee(&self, state: &State) -> Money {
        self.heuristic.h_fee(state)
    }

    fn h_count(&self, state: &State) -> usize {
        statespace::h_count(state)
    }

    fn order_for_dive(&self, children: &mut [(Action, Money, State)]) {
        children.sort_by_key(|(a, _, _)| dive_rank(a));
    }
}

/// Resource limits for the search algorithms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchLimits {
    /// Stop once this many successors have been generated.
    pub max_generated_nodes: u64,
    /// Longest admissible plan. DFBnB defaults to the number of task flows.
    pub max_depth: Option<usize>,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits { max_generated_nodes: 100_000, max_depth: None }
    }
}

impl SearchLimits {
    pub fn with_max_nodes(max_generated_nodes: u64) -> Self {
        SearchLimits { max_generated_nodes, ..Default::default() }
    }

    pub fn unlimited() -> Self {
        SearchLimits { max_generated_nodes: u64::MAX, max_depth: None }
    }
}

/// Metrics at the first solution of an anytime search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FirstSolution {
    pub cost: Money,
    pub length: usize,
    pub generated_nodes: u64,
}

/// What a search run produced, generic over the action type.
#[derive(Clone, Debug)]
pub struct Outcome<A> {
    pub actions: Option<Vec<A>>,
    pub cost: Money,
    pub optimal: bool,
    pub generated_nodes: u64,
    pub expanded_nodes: u64,
    /// States expanded again after being reached by a strictly better path.
    pub reopened_nodes: u64,
    pub first_solution: Option<FirstSolution>,
    /// Every incumbent cost in discovery order (anytime searches only).
    pub incumbents: Vec<(Money, usize)>,
}

/// Result of a search on the base model.
#[derive(Clone, Debug)]
pub struct SearchResult {
    pub plan: Option<Plan>,
    /// Search exhausted (DFBnB) or goal popped under an admissible bound (A*).
    pub optimal: bool,
    pub generated_nodes: u64,
    pub expanded_nodes: u64,
    pub reopened_nodes: u64,
    pub first_solution: Option<FirstSolution>,
    pub incumbents: Vec<(Money, usize)>,
}

impl SearchResult {
    fn from_outcome(o: Outcome<Action>) -> Self {
        SearchResult {
            plan: o.actions.map(Plan::new),
            optimal: o.optimal,
            generated_nodes: o.generated_nodes,
            expanded_nodes: o.expanded_nodes,
            reopened_nodes: o.reopened_nodes,
            first_solution: o.first_solution,
            incumbents: o.incumbents,
        }
    }

    pub fn cost(&self) -> Option<Money> {
        self.plan.as_ref().map(Plan::total_cost)
    }

    pub fn length(&self) -> Option<usize> {
        self.plan.as_ref().map(Plan::len)
    }
}

/// Sell every outflow, then buy every inflow in full.
pub fn naive_plan(task: &UpdateTask) -> Result<Plan> {
    if task.total_outflow() + task.initial_cash() < task.total_inflow() {
        return Err(Error::Infeasible {
            outflows: task.total_outflow(),
            cash: task.initial_cash(),
            inflows: task.total_inflow(),
        });
    }
    let cm = task.cost_model();
    let mut actions = Vec::with_capacity(task.flow_count());
    for (x, amount) in task.outflows() {
        let cost = cm.price(ActionKind::Sell, Some(x), None, amount)?;
        actions.push(Action::sell(task.id(x).clone(), amount, cost));
    }
    for (y, amount) in task.inflows() {
        let cost = cm.price(ActionKind::BuyNeeded, None, Some(y), amount)?;
        actions.push(Action::buy(ActionKind::BuyNeeded, task.id(y).clone(), amount, cost));
    }
    Ok(Plan::new(actions))
}

/// A* over the base model with the fee heuristic.
///
/// The frontier is ordered by `(g_fee + h_fee, g_len + h_count)`, then lower
/// `h_fee`, then insertion order, so the first goal popped is fee-optimal and
/// shortest among fee-optimal plans.
pub fn astar_fee(task: &UpdateTask, limits: SearchLimits) -> SearchResult {
    SearchResult::from_outcome(astar(&BaseSpace::new(task), limits))
}

/// Depth-first branch and bound with the naive plan length as depth limit.
pub fn dfbnb(task: &UpdateTask, limits: SearchLimits) -> SearchResult {
    let depth = limits.max_depth.unwrap_or_else(|| task.flow_count());
    SearchResult::from_outcome(dfbnb_search(&BaseSpace::new(task), limits.max_generated_nodes, depth))
}

/// `(cost, length)` lexicographic key.
pub(crate) type Key = (Money, usize);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::money::Bps;
    use crate::plan::validate_plan;
    use crate::task::{Holding, SwitchCostRule};

    fn pair_task(cs: i64) -> UpdateTask {
        UpdateTask::builder()
            .holding(Holding::new("A", true, Money(0), Bps::from_integer(5)))
            .holding(Holding::new("B", true, Money(0), Bps::from_integer(5)))
            .switch_rule(SwitchCostRule::Flat(Bps::from_integer(cs)))
            .outflow("A", Money(10000))
            .inflow("B", Money(10000))
            .build()
            .unwrap()
    }

    #[test]
    fn naive_sells_then_buys() {
        let task = fixtures::model_portfolio();
        let plan = naive_plan(&task).unwrap();
        assert_eq!(plan.len(), 7);
        assert!(plan.actions[..3].iter().all(|a| a.kind == ActionKind::Sell));
        assert!(plan.actions[3..].iter().all(|a| a.kind == ActionKind::BuyNeeded));
        assert!(validate_plan(&task, &plan).is_valid());
    }

    #[test]
    fn naive_on_empty_task() {
        let task = UpdateTask::builder().build().unwrap();
        let plan = naive_plan(&task).unwrap();
        assert!(plan.is_empty());
        assert_eq!(plan.total_cost(), Money::ZERO);
    }

    #[test]
    fn naive_never_switches() {
        let plan = naive_plan(&pair_task(1)).unwrap();
        let kinds: Vec<_> = plan.actions.iter().map(|a| a.kind).collect();
        assert_eq!(kinds, vec![ActionKind::Sell, ActionKind::BuyNeeded]);
    }

    #[test]
    fn astar_on_empty_task() {
        let task = UpdateTask::builder().build().unwrap();
        let r = astar_fee(&task, SearchLimits::default());
        assert!(r.plan.as_ref().unwrap().is_empty());
        assert_eq!(r.generated_nodes, 0);
        assert!(r.optimal);
    }

    #[test]
    fn astar_prefers_cheap_switch() {
        let task = pair_task(1);
        let r = astar_fee(&task, SearchLimits::default());
        let plan = r.plan.unwrap();
        assert_eq!(plan.len(), 1);
        assert_eq!(plan.actions[0].kind, ActionKind::SwitchNeeded);
        assert_eq!(plan.total_cost(), Money(1));
    }

    #[test]
    fn astar_budget_exhaustion_yields_no_plan() {
        let task = fixtures::model_portfolio();
        let r = astar_fee(&task, SearchLimits::with_max_nodes(3));
        assert!(r.plan.is_none());
        assert!(!r.optimal);
        assert!(r.generated_nodes >= 3);
    }

    #[test]
    fn dfbnb_first_solution_within_naive_length() {
        let task = fixtures::model_portfolio();
        let r = dfbnb(&task, SearchLimits::default());
        let first = r.first_solution.unwrap();
        assert!(first.length <= task.flow_count());
        assert!(r.optimal);
        for w in r.incumbents.windows(2) {
            assert!(w[1] < w[0]);
        }
        assert!(validate_plan(&task, r.plan.as_ref().unwrap()).is_valid());
    }

    #[test]
    fn dfbnb_and_astar_agree_on_model_portfolio() {
        let task = fixtures::model_portfolio();
        let a = astar_fee(&task, SearchLimits::unlimited());
        let d = dfbnb(&task, SearchLimits::unlimited());
        assert_eq!(a.cost(), d.cost());
        assert!(a.generated_nodes >= a.expanded_nodes);
        assert!(d.generated_nodes >= d.expanded_nodes);
    }
}
