//! The search formulation: states of pending flows and cash, the goal test, the
//! five transition operators and the lower-bound heuristics.

use crate::money::{div_ceil, Bps, Money};
use crate::plan::Action;
use crate::task::{ActionKind, UpdateTask};

/// Pending outflows `u`, pending inflows `v` and cash balance `w`.
///
/// Flow vectors are dense by holding index, so equal states compare and hash
/// equal without any normalisation.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct State {
    pub u: Vec<Money>,
    pub v: Vec<Money>,
    pub w: Money,
}

impl State {
    pub fn pending_outflows(&self) -> impl Iterator<Item = (usize, Money)> + '_ {
        self.u.iter().copied().enumerate().filter(|(_, m)| m.is_positive())
    }

    pub fn pending_inflows(&self) -> impl Iterator<Item = (usize, Money)> + '_ {
        self.v.iter().copied().enumerate().filter(|(_, m)| m.is_positive())
    }

    /// `Σu + Σv`, strictly decreased by every operator.
    pub fn pending_total(&self) -> Money {
        self.u.iter().sum::<Money>() + self.v.iter().sum::<Money>()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Successor {
    pub action: Action,
    pub state: State,
}

pub fn initial_state(task: &UpdateTask) -> State {
    State { u: task.outflow_vec().to_vec(), v: task.inflow_vec().to_vec(), w: task.initial_cash() }
}

/// No pending flows; the cash balance is unconstrained.
pub fn is_goal(state: &State) -> bool {
    state.u.iter().all(|m| m.is_zero()) && state.v.iter().all(|m| m.is_zero())
}

/// All applicable ground actions in operator order: sells, buys, then switches,
/// each by ascending holding index.
pub fn successors(state: &State, task: &UpdateTask) -> Vec<Successor> {
    let mut out = Vec::new();
    expand(state, task, |action, state| out.push(Successor { action, state }));
    out
}

/// Calls `emit` for every successor of `state`, in [`successors`] order.
pub fn expand(state: &State, task: &UpdateTask, mut emit: impl FnMut(Action, State)) {
    let cm = task.cost_model();
    let price =
        |kind, from, to, amount| cm.price(kind, from, to, amount).expect("operators only emit well-formed actions");
    let w = state.w;

    for (x, ux) in state.pending_outflows() {
        let mut next = state.clone();
        next.w += ux;
        next.u[x] = Money::ZERO;
        let cost = price(ActionKind::Sell, Some(x), None, ux);
        emit(Action::sell(task.id(x).clone(), ux, cost), next);
    }

    for (x, vx) in state.pending_inflows() {
        if w.is_positive() && vx - w > Money::ZERO {
            let mut next = state.clone();
            next.v[x] = vx - w;
            next.w = Money::ZERO;
            let cost = price(ActionKind::BuyAvailable, None, Some(x), w);
            emit(Action::buy(ActionKind::BuyAvailable, task.id(x).clone(), w, cost), next);
        }
    }
    for (x, vx) in state.pending_inflows() {
        if w - vx >= Money::ZERO {
            let mut next = state.clone();
            next.v[x] = Money::ZERO;
            next.w = w - vx;
            let cost = price(ActionKind::BuyNeeded, None, Some(x), vx);
            emit(Action::buy(ActionKind::BuyNeeded, task.id(x).clone(), vx, cost), next);
        }
    }

    for (x, ux) in state.pending_outflows() {
        if !cm.is_transferable(x) {
            continue;
        }
        for (y, vy) in state.pending_inflows() {
            if !cm.is_transferable(y) {
                continue;
            }
            let mut next = state.clone();
            let (kind, moved) = if vy - ux > Money::ZERO {
                next.v[y] = vy - ux;
                next.u[x] = Money::ZERO;
                (ActionKind::SwitchAvailable, ux)
            } else {
                next.v[y] = Money::ZERO;
                next.u[x] = ux - vy;
                (ActionKind::SwitchNeeded, vy)
            };
            let cost = price(kind, Some(x), Some(y), moved);
            emit(Action::switch(kind, task.id(x).clone(), task.id(y).clone(), moved, cost), next);
        }
    }
}

/// Applies one action to a state, checking the operator's precondition.
pub fn apply(state: &State, task: &UpdateTask, action: &Action) -> Option<State> {
    let mut found = None;
    expand(state, task, |a, s| {
        if found.is_none() && &a == action {
            found = Some(s);
        }
    });
    found
}

/// `C_min(x)`: the cheapest per-unit rate at which money can leave `x`.
pub fn min_exit_rates(task: &UpdateTask) -> Vec<Bps> {
    let cm = task.cost_model();
    (0..task.len())
        .map(|x| {
            let trade = cm.trade_rate(x);
            if !cm.is_transferable(x) {
                return trade;
            }
            (0..task.len())
                .filter(|&y| y != x && cm.is_transferable(y))
                .filter_map(|y| cm.switch_rate(x, y).ok())
                .fold(trade, Bps::min)
        })
        .collect()
}

/// Precomputed fee lower bound for one task.
///
/// `h_fix` charges each pending holding's fixed fee once. `h_rel` charges the
/// variable fees that no plan can avoid, split into disjoint action groups:
///
/// * an outflow that can only be sold (non-transferable, or no transferable
///   inflow pending) leaves in one SELL at its trade rate;
/// * any other outflow leaves through sells and switches at no less than its
///   cheapest exit rate `C_min`;
/// * an inflow that can only be bought (non-transferable, or no transferable
///   outflow pending) arrives through buys at its trade rate.
///
/// Every action rounds its variable fee half-to-even. When some action amount
/// can produce a fractional fee, the split groups are lowered by half a unit
/// per action they may take. A task whose flows share a factor `G` such that
/// every rate times `G` is a whole number of minor units never rounds, and is
/// bounded exactly. For such tasks the variable part is additionally bounded
/// by the transportation relaxation of the pending flows, and the larger of
/// the two bounds is used.
#[derive(Clone, Debug)]
pub struct FeeHeuristic {
    c_min: Vec<Bps>,
    trade: Vec<Bps>,
    fixed: Vec<Money>,
    transferable: Vec<bool>,
    exact: bool,
    relaxation: Option<UpdateTask>,
}

impl FeeHeuristic {
    pub fn new(task: &UpdateTask) -> Self {
        let cm = task.cost_model();
        let n = task.len();
        let exact = fees_are_exact(task);
        FeeHeuristic {
            c_min: min_exit_rates(task),
            trade: (0..n).map(|h| cm.trade_rate(h)).collect(),
            fixed: (0..n).map(|h| cm.fixed_fee(h)).collect(),
            transferable: (0..n).map(|h| cm.is_transferable(h)).collect(),
            exact,
            relaxation: exact.then(|| task.clone()),
        }
    }

    /// The per-holding bound only, without the transportation relaxation.
    pub fn without_relaxation(mut self) -> Self {
        self.relaxation = None;
        self
    }

    pub fn c_min(&self, h: usize) -> Bps {
        self.c_min[h]
    }

    /// True when no action of the task can incur a fractional variable fee.
    pub fn is_exact(&self) -> bool {
        self.exact
    }

    pub fn h_fix(&self, state: &State) -> Money {
        state.pending_outflows().map(|(x, _)| self.fixed[x]).sum::<Money>()
            + state.pending_inflows().map(|(y, _)| self.fixed[y]).sum::<Money>()
    }

    pub fn h_rel(&self, state: &State) -> Money {
        let local = self.h_rel_local(state);
        match &self.relaxation {
            Some(task) => match crate::lp::variable_cost_bound(task, &state.u, &state.v, state.w) {
                Ok(lp) => local.max(lp),
                Err(_) => local,
            },
            None => local,
        }
    }

    /// Sum of per-holding unavoidable variable fees.
    pub fn h_rel_local(&self, state: &State) -> Money {
        let switch_targets = state.pending_inflows().filter(|&(y, _)| self.transferable[y]).count() as i128;
        let switch_sources = state.pending_outflows().filter(|&(x, _)| self.transferable[x]).count() as i128;
        let n_out = state.pending_outflows().count() as i128;
        let mut whole = Money::ZERO;
        let mut split = Fraction::zero();
        let mut pieces = 0i128;
        for (x, ux) in state.pending_outflows() {
            if !self.transferable[x] || switch_targets == 0 {
                whole += self.trade[x].apply(ux);
            } else {
                split.add(self.c_min[x].apply_exact(ux));
                pieces += 1;
            }
        }
        if pieces > 0 {
            // each such sell or switch clears a transferable outflow or inflow
            pieces += switch_targets;
        }
        let mut bought = 0i128;
        for (y, vy) in state.pending_inflows() {
            if !self.transferable[y] || switch_sources == 0 {
                split.add(self.trade[y].apply_exact(vy));
                bought += 1;
            }
        }
        if bought > 0 {
            // buys clear an inflow or spend the whole balance, which only a
            // sell or the opening balance can refill
            pieces += bought + n_out + 1;
        }
        if self.exact {
            pieces = 0;
        }
        // ceil(split - pieces / 2)
        let lowered = 2 * split.num - pieces * split.den;
        whole + Money(div_ceil(lowered, 2 * split.den).max(0) as i64)
    }

    /// `h_fix + h_rel`; never exceeds the cheapest completion cost.
    pub fn h_fee(&self, state: &State) -> Money {
        self.h_fix(state) + self.h_rel(state)
    }
}

/// Exact rational accumulator `num / den`.
struct Fraction {
    num: i128,
    den: i128,
}

impl Fraction {
    fn zero() -> Self {
        Fraction { num: 0, den: 1 }
    }

    fn add(&mut self, (n, d): (i128, i128)) {
        let g = gcd(self.den, d);
        self.num = self.num * (d / g) + n * (self.den / g);
        self.den = self.den / g * d;
        let r = gcd(self.num, self.den);
        self.num /= r;
        self.den /= r;
    }
}

/// Every moved amount is an integer combination of the flows and the opening
/// balance, hence a multiple of their gcd `G`; fees are exact when each rate
/// maps `G` to whole minor units.
fn fees_are_exact(task: &UpdateTask) -> bool {
    let g = task
        .outflow_vec()
        .iter()
        .chain(task.inflow_vec())
        .map(|m| m.0 as i128)
        .chain(std::iter::once(task.initial_cash().0 as i128))
        .fold(0i128, gcd0);
    if g == 0 {
        return true;
    }
    let cm = task.cost_model();
    let n = task.len();
    let mut rates: Vec<Bps> = (0..n).map(|h| cm.trade_rate(h)).collect();
    for x in 0..n {
        for y in 0..n {
            if x != y {
                if let Ok(r) = cm.switch_rate(x, y) {
                    rates.push(r);
                }
            }
        }
    }
    rates.iter().all(|r| {
        let (num, den) = r.apply_exact(Money(g as i64));
        num % den == 0
    })
}

fn gcd0(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd0(b, a % b)
    }
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.abs().max(1)
}

/// Fee lower bound for `state`. Builds the per-task tables on every call; use
/// [`FeeHeuristic`] inside search loops.
pub fn h_fee(state: &State, task: &UpdateTask) -> Money {
    FeeHeuristic::new(task).h_fee(state)
}

/// At least this many transactions remain: every action clears at most one
/// pending inflow and at most one pending outflow.
pub fn h_count(state: &State) -> usize {
    state.pending_inflows().count().max(state.pending_outflows().count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::task::Holding;

    fn idx(task: &UpdateTask, id: &str) -> usize {
        task.index_of(id).unwrap()
    }

    #[test]
    fn empty_task_starts_at_goal() {
        let task = UpdateTask::builder().build().unwrap();
        let s = initial_state(&task);
        assert!(is_goal(&s));
        assert!(successors(&s, &task).is_empty());
        assert_eq!(h_fee(&s, &task), Money::ZERO);
        assert_eq!(h_count(&s), 0);
    }

    #[test]
    fn model_portfolio_initial_state() {
        let task = fixtures::model_portfolio();
        let s = initial_state(&task);
        assert_eq!(s.u[idx(&task, "EQ")], Money(10930));
        assert_eq!(s.u[idx(&task, "BT")], Money(23110));
        assert_eq!(s.u[idx(&task, "GD")], Money(4110));
        assert_eq!(s.v[idx(&task, "MM")], Money(12690));
        assert_eq!(s.v[idx(&task, "GB")], Money(2790));
        assert_eq!(s.v[idx(&task, "EM")], Money(6085));
        assert_eq!(s.v[idx(&task, "RE")], Money(16585));
        assert_eq!(s.w, Money::ZERO);
        assert_eq!(h_count(&s), 4);
    }

    #[test]
    fn cash_funded_buy() {
        let task = UpdateTask::builder()
            .holding(Holding::new("A", true, Money(0), Bps::from_integer(1)))
            .inflow("A", Money(500))
            .initial_cash(Money(500))
            .build()
            .unwrap();
        let s = initial_state(&task);
        assert!(s.u.iter().all(|m| m.is_zero()));
        assert_eq!(s.v, vec![Money(500)]);
        assert_eq!(s.w, Money(500));
        let succ = successors(&s, &task);
        assert_eq!(succ.len(), 1);
        assert_eq!(succ[0].action.kind, ActionKind::BuyNeeded);
    }

    #[test]
    fn goal_ignores_cash() {
        assert!(is_goal(&State { u: vec![Money(0)], v: vec![Money(0)], w: Money(0) }));
        assert!(is_goal(&State { u: vec![Money(0)], v: vec![Money(0)], w: Money(1760) }));
        assert!(!is_goal(&State { u: vec![Money(0)], v: vec![Money(1760)], w: Money(1760) }));
    }

    #[test]
    fn switch_available_leaves_residual_inflow() {
        let task = fixtures::model_portfolio();
        let s = initial_state(&task);
        let (eq, mm) = (idx(&task, "EQ"), idx(&task, "MM"));
        let succ = successors(&s, &task);
        let sw = succ
            .iter()
            .find(|x| x.action.kind == ActionKind::SwitchAvailable && x.action.to.as_ref().unwrap().as_str() == "MM")
            .unwrap();
        assert_eq!(sw.state.v[mm], Money(1760));
        assert_eq!(sw.state.u[eq], Money::ZERO);
        assert_eq!(sw.action.amount, Money(10930));
    }

    #[test]
    fn sell_moves_outflow_to_cash() {
        let task = fixtures::model_portfolio();
        let s = initial_state(&task);
        let bt = idx(&task, "BT");
        let sell = successors(&s, &task)
            .into_iter()
            .find(|x| x.action.kind == ActionKind::Sell && x.action.from.as_ref().unwrap().as_str() == "BT")
            .unwrap();
        assert_eq!(sell.state.w, Money(23110));
        assert_eq!(sell.state.u[bt], Money::ZERO);
    }

    #[test]
    fn initial_successor_set() {
        // 3 sells, no buys (w = 0), EQ fits into MM but covers GB and EM
        let task = fixtures::model_portfolio();
        let succ = successors(&initial_state(&task), &task);
        let kinds: Vec<_> = succ.iter().map(|s| s.action.kind).collect();
        assert_eq!(kinds.iter().filter(|k| **k == ActionKind::Sell).count(), 3);
        assert_eq!(kinds.iter().filter(|k| k.is_buy()).count(), 0);
        assert_eq!(kinds.iter().filter(|k| **k == ActionKind::SwitchAvailable).count(), 1);
        assert_eq!(kinds.iter().filter(|k| **k == ActionKind::SwitchNeeded).count(), 2);
    }

    #[test]
    fn equal_amounts_route_to_needed() {
        let task = UpdateTask::builder()
            .holding(Holding::new("A", true, Money(0), Bps::from_integer(1)))
            .holding(Holding::new("B", true, Money(0), Bps::from_integer(1)))
            .outflow("A", Money(100))
            .inflow("B", Money(100))
            .build()
            .unwrap();
        let s = State { u: vec![Money(100), Money(0)], v: vec![Money(0), Money(100)], w: Money(100) };
        let kinds: Vec<_> = successors(&s, &task).into_iter().map(|x| x.action.kind).collect();
        assert!(kinds.contains(&ActionKind::BuyNeeded));
        assert!(!kinds.contains(&ActionKind::BuyAvailable));
        assert!(kinds.contains(&ActionKind::SwitchNeeded));
        assert!(!kinds.contains(&ActionKind::SwitchAvailable));
    }

    #[test]
    fn single_outflow_fee_bound() {
        let task = UpdateTask::builder()
            .holding(Holding::new("A", false, Money(100), Bps::from_integer(10)))
            .outflow("A", Money(10000))
            .build()
            .unwrap();
        assert_eq!(h_fee(&initial_state(&task), &task), Money(110));
        let task = UpdateTask::builder()
            .holding(Holding::new("A", true, Money(100), Bps::from_integer(10)))
            .outflow("A", Money(10000))
            .build()
            .unwrap();
        assert_eq!(h_fee(&initial_state(&task), &task), Money(110));
    }

    #[test]
    fn split_bound_discounts_rounding() {
        // Four half-unit products of 0.5 each: every action can round down to 0.
        let hs = ["A", "B", "C", "D"].map(|id| Holding::new(id, true, Money(0), Bps::from_integer(1)));
        let task = UpdateTask::builder()
            .holdings(hs)
            .outflow("A", Money(5000))
            .outflow("B", Money(5000))
            .inflow("C", Money(5000))
            .inflow("D", Money(5000))
            .build()
            .unwrap();
        let h = FeeHeuristic::new(&task);
        // exact 1.0 minus 4 pieces * 0.5 -> 0
        assert_eq!(h.h_rel(&initial_state(&task)), Money(0));
    }

    #[test]
    fn apply_matches_successors() {
        let task = fixtures::model_portfolio();
        let plan = fixtures::model_portfolio_plan(&task);
        let mut s = initial_state(&task);
        for a in &plan.actions {
            s = apply(&s, &task, a).expect("applicable");
        }
        assert!(is_goal(&s));
    }
}
