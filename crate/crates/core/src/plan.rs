//! Transactions, plans and plan validation by replay.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::money::Money;
use crate::task::{ActionKind, HoldingId, UpdateTask};

/// One executable transaction with its priced cost.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub kind: ActionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<HoldingId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<HoldingId>,
    pub amount: Money,
    pub cost: Money,
}

impl Action {
    pub fn sell(from: HoldingId, amount: Money, cost: Money) -> Self {
        Action { kind: ActionKind::Sell, from: Some(from), to: None, amount, cost }
    }

    pub fn buy(kind: ActionKind, to: HoldingId, amount: Money, cost: Money) -> Self {
        debug_assert!(kind.is_buy());
        Action { kind, from: None, to: Some(to), amount, cost }
    }

    pub fn switch(kind: ActionKind, from: HoldingId, to: HoldingId, amount: Money, cost: Money) -> Self {
        debug_assert!(kind.is_switch());
        Action { kind, from: Some(from), to: Some(to), amount, cost }
    }

    /// Checks the shape invariants: which endpoints are present and `amount > 0`.
    pub fn check_shape(&self) -> Result<(), String> {
        let ok = match self.kind {
            ActionKind::Sell => self.from.is_some() && self.to.is_none(),
            ActionKind::BuyAvailable | ActionKind::BuyNeeded => self.from.is_none() && self.to.is_some(),
            ActionKind::SwitchAvailable | ActionKind::SwitchNeeded => self.from.is_some() && self.to.is_some(),
        };
        if !ok {
            return Err(format!("{} has the wrong holding endpoints", self.kind));
        }
        if !self.amount.is_positive() {
            return Err(format!("{} amount must be positive", self.kind));
        }
        Ok(())
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.from, &self.to) {
            (Some(x), Some(y)) => write!(f, "{} {} {} to {}", self.kind, self.amount, x, y),
            (Some(x), None) => write!(f, "{} {} {}", self.kind, self.amount, x),
            (None, Some(y)) => write!(f, "{} {} {}", self.kind, self.amount, y),
            (None, None) => write!(f, "{} {}", self.kind, self.amount),
        }
    }
}

/// An ordered sequence of transactions.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub actions: Vec<Action>,
}

impl Plan {
    pub fn new(actions: Vec<Action>) -> Self {
        Plan { actions }
    }

    pub fn empty() -> Self {
        Plan::default()
    }

    pub fn total_cost(&self) -> Money {
        self.actions.iter().map(|a| a.cost).sum()
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn count_kind(&self, pred: impl Fn(ActionKind) -> bool) -> usize {
        self.actions.iter().filter(|a| pred(a.kind)).count()
    }

    /// A step listing: one numbered line per action.
    pub fn listing(&self) -> String {
        let mut out = String::new();
        for (i, a) in self.actions.iter().enumerate() {
            out.push_str(&format!("{:>4}  {:<48} cost {}\n", i + 1, a.to_string(), a.cost));
        }
        out.push_str(&format!("      total cost {} over {} transactions\n", self.total_cost(), self.len()));
        out
    }
}

/// Where a replay first went wrong.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    /// Zero-based index of the offending action.
    pub step: usize,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {}: {}", self.step + 1, self.message)
    }
}

/// Outcome of [`validate_plan`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationReport {
    pub goal_reached: bool,
    pub violation: Option<Violation>,
    /// Cost recomputed from the fee model for every replayed action.
    pub recomputed_cost: Money,
    pub final_cash: Money,
    pub final_outflows: Vec<Money>,
    pub final_inflows: Vec<Money>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.goal_reached && self.violation.is_none()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.violation {
            Some(v) => v.fmt(f),
            None if !self.goal_reached => f.write_str("flows still pending after the last step"),
            None => f.write_str("valid"),
        }
    }
}

/// Replays `plan` from the task's initial flows under the operator semantics.
///
/// Each action must satisfy its operator's precondition, move exactly the amount
/// the operator moves, and carry the cost the fee model assigns to it. Replay stops
/// at the first violation; failures are reported, never raised.
pub fn validate_plan(task: &UpdateTask, plan: &Plan) -> ValidationReport {
    let mut u = task.outflow_vec().to_vec();
    let mut v = task.inflow_vec().to_vec();
    let mut w = task.initial_cash();
    let mut recomputed = Money::ZERO;
    let mut violation = None;

    for (step, action) in plan.actions.iter().enumerate() {
        match replay_one(task, action, &mut u, &mut v, &mut w) {
            Ok(cost) => {
                recomputed += cost;
                if cost != action.cost {
                    violation = Some(Violation {
                        step,
                        message: format!("declared cost {} differs from priced cost {}", action.cost, cost),
                    });
                    break;
                }
            }
            Err(message) => {
                violation = Some(Violation { step, message });
                break;
            }
        }
    }

    let goal_reached = violation.is_none() && u.iter().all(|m| m.is_zero()) && v.iter().all(|m| m.is_zero());
    ValidationReport {
        goal_reached,
        violation,
        recomputed_cost: recomputed,
        final_cash: w,
        final_outflows: u,
        final_inflows: v,
    }
}

fn replay_one(task: &UpdateTask, a: &Action, u: &mut [Money], v: &mut [Money], w: &mut Money) -> Result<Money, String> {
    a.check_shape()?;
    let resolve = |id: &Option<HoldingId>| -> Result<usize, String> {
        let id = id.as_ref().expect("shape checked");
        task.index_of(id.as_str()).ok_or_else(|| format!("unknown holding `{id}`"))
    };
    let cm = task.cost_model();
    let expect_amount = |moved: Money| -> Result<(), String> {
        if moved == a.amount {
            Ok(())
        } else {
            Err(format!("{} moves {} but the action states {}", a.kind, moved, a.amount))
        }
    };

    let (from, to) = match a.kind {
        ActionKind::Sell => {
            let x = resolve(&a.from)?;
            if !u[x].is_positive() {
                return Err(format!("SELL precondition u[{}] > 0 fails (u = {})", task.id(x), u[x]));
            }
            expect_amount(u[x])?;
            *w += u[x];
            u[x] = Money::ZERO;
            (Some(x), None)
        }
        ActionKind::BuyAvailable => {
            let x = resolve(&a.to)?;
            if !(v[x].is_positive() && w.is_positive() && v[x] - *w > Money::ZERO) {
                return Err(format!(
                    "BUY-AVAILABLE precondition v[x] > 0, w > 0, v[x] - w > 0 fails (v[{}] = {}, w = {})",
                    task.id(x),
                    v[x],
                    w
                ));
            }
            expect_amount(*w)?;
            v[x] -= *w;
            *w = Money::ZERO;
            (None, Some(x))
        }
        ActionKind::BuyNeeded => {
            let x = resolve(&a.to)?;
            if !(v[x].is_positive() && *w - v[x] >= Money::ZERO) {
                return Err(format!(
                    "BUY-NEEDED precondition v[x] > 0, w - v[x] >= 0 fails (v[{}] = {}, w = {})",
                    task.id(x),
                    v[x],
                    w
                ));
            }
            expect_amount(v[x])?;
            *w -= v[x];
            v[x] = Money::ZERO;
            (None, Some(x))
        }
        ActionKind::SwitchAvailable | ActionKind::SwitchNeeded => {
            let x = resolve(&a.from)?;
            let y = resolve(&a.to)?;
            if !(cm.is_transferable(x) && cm.is_transferable(y)) {
                return Err(format!("{} needs transferable holdings ({} -> {})", a.kind, task.id(x), task.id(y)));
            }
            if !(u[x].is_positive() && v[y].is_positive()) {
                return Err(format!(
                    "{} precondition u[x] > 0, v[y] > 0 fails (u[{}] = {}, v[{}] = {})",
                    a.kind,
                    task.id(x),
                    u[x],
                    task.id(y),
                    v[y]
                ));
            }
            if a.kind == ActionKind::SwitchAvailable {
                if v[y] - u[x] <= Money::ZERO {
                    return Err(format!(
                        "SWITCH-AVAILABLE precondition v[y] - u[x] > 0 fails (u = {}, v = {})",
                        u[x], v[y]
                    ));
                }
                expect_amount(u[x])?;
                v[y] -= u[x];
                u[x] = Money::ZERO;
            } else {
                if u[x] - v[y] < Money::ZERO {
                    return Err(format!(
                        "SWITCH-NEEDED precondition u[x] - v[y] >= 0 fails (u = {}, v = {})",
                        u[x], v[y]
                    ));
                }
                expect_amount(v[y])?;
                u[x] -= v[y];
                v[y] = Money::ZERO;
            }
            (Some(x), Some(y))
        }
    };
    cm.price(a.kind, from, to, a.amount).map_err(|e| e.to_string())
}
