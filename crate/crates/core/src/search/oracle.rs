use std::collections::HashMap;

use super::Key;
use crate::error::{Error, Result};
use crate::plan::{Action, Plan};
use crate::statespace::{self, State};
use crate::task::UpdateTask;

/// Largest task, in flows, the exhaustive oracle accepts.
pub const ORACLE_FLOW_LIMIT: usize = 8;

/// Cheapest completion from a state: `(cost, length)` and the first step.
#[derive(Clone, Debug)]
pub struct Completion {
    pub key: Key,
    pub step: Option<(Action, State)>,
}

/// Memoized exact completions over the (acyclic) state graph of one task.
pub struct OracleTable<'a> {
    task: &'a UpdateTask,
    memo: HashMap<State, Option<Completion>>,
}

impl<'a> OracleTable<'a> {
    pub fn new(task: &'a UpdateTask) -> Result<Self> {
        if task.flow_count() > ORACLE_FLOW_LIMIT {
            return Err(Error::OracleGuard { flows: task.flow_count(), limit: ORACLE_FLOW_LIMIT });
        }
        Ok(OracleTable { task, memo: HashMap::new() })
    }

    /// Lexicographically cheapest `(cost, length)` to reach the goal from `state`,
    /// or `None` if the goal is unreachable.
    pub fn completion(&mut self, state: &State) -> Option<Key> {
        self.solve(state).map(|c| c.key)
    }

    pub fn states_solved(&self) -> usize {
        self.memo.len()
    }

    fn solve(&mut self, state: &State) -> Option<Completion> {
        if let Some(c) = self.memo.get(state) {
            return c.clone();
        }
        let result = if statespace::is_goal(state) {
            Some(Completion { key: (crate::money::Money::ZERO, 0), step: None })
        } else {
            let mut best: Option<Completion> = None;
            for succ in statespace::successors(state, self.task) {
                if let Some(rest) = self.solve(&succ.state) {
                    let key = (rest.key.0 + succ.action.cost, rest.key.1 + 1);
                    if best.as_ref().is_none_or(|b| key < b.key) {
                        best = Some(Completion { key, step: Some((succ.action, succ.state)) });
                    }
                }
            }
            best
        };
        self.memo.insert(state.clone(), result.clone());
        result
    }

    /// The optimal plan from `state`, following the memoized first steps.
    pub fn plan_from(&mut self, state: &State) -> Option<Plan> {
        let mut actions = Vec::new();
        let mut cur = state.clone();
        loop {
            let c = self.solve(&cur)?;
            match c.step {
                None => return Some(Plan::new(actions)),
                Some((a, next)) => {
                    actions.push(a);
                    cur = next;
                }
            }
        }
    }
}

/// Exact lexicographic `(cost, length)` optimum by exhaustive enumeration.
/// Refuses tasks with more than [`ORACLE_FLOW_LIMIT`] flows.
pub fn exhaustive_oracle(task: &UpdateTask) -> Result<Plan> {
    let mut table = OracleTable::new(task)?;
    let root = statespace::initial_state(task);
    table.plan_from(&root).ok_or_else(|| Error::Infeasible {
        outflows: task.total_outflow(),
        cash: task.initial_cash(),
        inflows: task.total_inflow(),
    })
}
