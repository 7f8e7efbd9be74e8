//! LP+: turning a transportation solution into transactions.

use std::collections::VecDeque;

use super::{build_instance, solve_transport, CellMode, Endpoint, FlowMatrix};
use crate::error::Result;
use crate::money::Money;
use crate::plan::{Action, Plan};
use crate::task::{ActionKind, HoldingId, UpdateTask};

/// Transactions read off a solution: one per switch cell, one summed sell per
/// source row and one summed buy per destination column of the trade cells.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Grouping {
    pub switches: Vec<(HoldingId, HoldingId, Money)>,
    pub sells: Vec<(HoldingId, Money)>,
    pub buys: Vec<(HoldingId, Money)>,
}

impl Grouping {
    pub fn transaction_count(&self) -> usize {
        self.switches.len() + self.sells.len() + self.buys.len()
    }

    pub fn buy_of(&self, id: &str) -> Option<Money> {
        self.buys.iter().find(|(h, _)| h.as_str() == id).map(|b| b.1)
    }

    pub fn sell_of(&self, id: &str) -> Option<Money> {
        self.sells.iter().find(|(h, _)| h.as_str() == id).map(|s| s.1)
    }
}

fn add_to(list: &mut Vec<(HoldingId, Money)>, id: &HoldingId, amount: Money) {
    match list.iter_mut().find(|(h, _)| h == id) {
        Some(e) => e.1 += amount,
        None => list.push((id.clone(), amount)),
    }
}

/// Groups the trade cells of a solution by row and by column.
pub fn group_transactions(flows: &FlowMatrix) -> Grouping {
    let mut g = Grouping::default();
    for c in &flows.cells {
        match (c.mode, &c.from, &c.to) {
            (CellMode::Switch, Endpoint::Holding(x), Endpoint::Holding(y)) => {
                g.switches.push((x.clone(), y.clone(), c.amount))
            }
            (_, from, to) => {
                if let Endpoint::Holding(x) = from {
                    add_to(&mut g.sells, x, c.amount);
                }
                if let Endpoint::Holding(y) = to {
                    add_to(&mut g.buys, y, c.amount);
                }
            }
        }
    }
    g
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Leg {
    Switch,
    Sell,
    Buy,
}

/// Directed edge `a -> b` of the pooled graph. Node `cash` stands for the
/// account balance, so a trade cell `i -> j` becomes `i -> cash -> j`.
#[derive(Clone, Copy, Debug)]
struct Edge {
    a: usize,
    b: usize,
    leg: Leg,
    amount: Money,
}

/// Realizes a solution as an executable plan: switches (leaf-first, each
/// moving exactly its cell amount), then one sell per source, then one buy per
/// destination.
///
/// Trade legs are pooled through cash, which can close cycles with switch
/// cells. At an optimum every such cycle has zero cost, so flow is pushed
/// around it until one edge vanishes; this never adds a transaction.
pub fn lp_plus_from_flows(task: &UpdateTask, flows: &FlowMatrix) -> Result<Plan> {
    let n = task.len();
    let cash = n;
    let index = |e: &Endpoint| match e {
        Endpoint::Holding(h) => task.index_of(h.as_str()).ok_or_else(|| crate::Error::UnknownHolding(h.to_string())),
        Endpoint::Cash => Ok(cash),
    };

    let mut edges: Vec<Edge> = Vec::new();
    let mut add = |a: usize, b: usize, leg: Leg, amount: Money| {
        if a == b || !amount.is_positive() {
            return;
        }
        match edges.iter_mut().find(|e| e.a == a && e.b == b) {
            Some(e) => e.amount += amount,
            None => edges.push(Edge { a, b, leg, amount }),
        }
    };
    for c in &flows.cells {
        let (i, j) = (index(&c.from)?, index(&c.to)?);
        if c.mode == CellMode::Switch && i != cash && j != cash {
            add(i, j, Leg::Switch, c.amount);
        } else {
            add(i, cash, Leg::Sell, c.amount);
            add(cash, j, Leg::Buy, c.amount);
        }
    }

    while let Some(cycle) = find_cycle(&edges, n + 1) {
        cancel(&mut edges, &cycle);
    }

    let mut u = task.outflow_vec().to_vec();
    let mut v = task.inflow_vec().to_vec();
    let cm = task.cost_model();
    let mut actions = Vec::new();
    let mut switches: Vec<Edge> = edges.iter().copied().filter(|e| e.leg == Leg::Switch).collect();
    switches.sort_by_key(|e| (e.a, e.b));
    while !switches.is_empty() {
        let k = switches
            .iter()
            .position(|e| u[e.a] == e.amount || v[e.b] == e.amount)
            .ok_or_else(|| crate::Error::Transport("switch cells do not form a forest".into()))?;
        let e = switches.remove(k);
        let kind = if u[e.a] == e.amount && v[e.b] > e.amount {
            ActionKind::SwitchAvailable
        } else {
            ActionKind::SwitchNeeded
        };
        let cost = cm.price(kind, Some(e.a), Some(e.b), e.amount)?;
        actions.push(Action::switch(kind, task.id(e.a).clone(), task.id(e.b).clone(), e.amount, cost));
        u[e.a] -= e.amount;
        v[e.b] -= e.amount;
    }
    for (x, &amount) in u.iter().enumerate().filter(|(_, a)| a.is_positive()) {
        let cost = cm.price(ActionKind::Sell, Some(x), None, amount)?;
        actions.push(Action::sell(task.id(x).clone(), amount, cost));
    }
    for (y, &amount) in v.iter().enumerate().filter(|(_, a)| a.is_positive()) {
        let cost = cm.price(ActionKind::BuyNeeded, None, Some(y), amount)?;
        actions.push(Action::buy(ActionKind::BuyNeeded, task.id(y).clone(), amount, cost));
    }
    Ok(Plan::new(actions))
}

/// Solves the task's transportation instance and realizes it with LP+.
pub fn lp_plus_plan(task: &UpdateTask) -> Result<Plan> {
    let inst = build_instance(task);
    let flows = solve_transport(&inst)?;
    lp_plus_from_flows(task, &flows)
}

/// A cycle as `(edge index, traversed along its direction)` steps.
fn find_cycle(edges: &[Edge], nodes: usize) -> Option<Vec<(usize, bool)>> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes];
    for (k, e) in edges.iter().enumerate() {
        // Is there already a path a ~> b among earlier edges?
        if let Some(path) = path_between(&adj, e.b, e.a, edges) {
            let mut cycle = vec![(k, true)];
            cycle.extend(path);
            return Some(cycle);
        }
        adj[e.a].push((e.b, k));
        adj[e.b].push((e.a, k));
    }
    None
}

/// Path from `from` to `to` as traversal steps, by BFS.
fn path_between(adj: &[Vec<(usize, usize)>], from: usize, to: usize, edges: &[Edge]) -> Option<Vec<(usize, bool)>> {
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; adj.len()];
    let mut seen = vec![false; adj.len()];
    seen[from] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(x) = queue.pop_front() {
        if x == to {
            let mut steps = Vec::new();
            let mut cur = to;
            while cur != from {
                let (p, k) = prev[cur].unwrap();
                steps.push((k, edges[k].a == p));
                cur = p;
            }
            steps.reverse();
            return Some(steps);
        }
        for &(y, k) in &adj[x] {
            if !seen[y] {
                seen[y] = true;
                prev[y] = Some((x, k));
                queue.push_back(y);
            }
        }
    }
    None
}

/// Pushes flow around `cycle` in the direction with the smaller bottleneck and
/// drops the edges that reach zero.
fn cancel(edges: &mut Vec<Edge>, cycle: &[(usize, bool)]) {
    let bottleneck = |along: bool| cycle.iter().filter(|s| s.1 != along).map(|s| edges[s.0].amount).min().unwrap();
    let (fwd, back) = (bottleneck(true), bottleneck(false));
    let (along, delta) = if fwd <= back { (true, fwd) } else { (false, back) };
    for &(k, dir) in cycle {
        if dir == along {
            edges[k].amount += delta;
        } else {
            edges[k].amount -= delta;
        }
    }
    edges.retain(|e| e.amount.is_positive());
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::lp::{build_instance, solve_transport};
    use crate::plan::validate_plan;
    use crate::search::{astar_fee, naive_plan, SearchLimits};

    #[test]
    fn model_portfolio_lp_plus_is_valid_and_optimal() {
        let task = fixtures::model_portfolio();
        let plan = lp_plus_plan(&task).unwrap();
        let r = validate_plan(&task, &plan);
        assert!(r.is_valid(), "{:?}\n{}", r.violation, plan.listing());
        let best = astar_fee(&task, SearchLimits::default()).cost().unwrap();
        assert_eq!(plan.total_cost(), best);
        assert!(plan.total_cost() <= naive_plan(&task).unwrap().total_cost());
    }

    #[test]
    fn all_switch_solution_keeps_one_action_per_cell() {
        let task = UpdateTask::builder()
            .holding(crate::task::Holding::new("A", true, Money(0), crate::Bps::from_integer(2)))
            .holding(crate::task::Holding::new("B", true, Money(0), crate::Bps::from_integer(2)))
            .holding(crate::task::Holding::new("C", true, Money(0), crate::Bps::from_integer(2)))
            .outflow("A", Money(900))
            .inflow("B", Money(400))
            .inflow("C", Money(500))
            .build()
            .unwrap();
        let flows = solve_transport(&build_instance(&task)).unwrap();
        assert!(flows.cells.iter().all(|c| c.mode == CellMode::Switch));
        let plan = lp_plus_from_flows(&task, &flows).unwrap();
        assert_eq!(plan.len(), flows.cells.len());
        assert!(validate_plan(&task, &plan).is_valid());
    }
}
