//! The transportation relaxation and the LP+ plan builder.
//!
//! Outflows are supplies and inflows are demands. Each cell carries the
//! cheaper of a switch and a sell-then-buy pair, per unit moved. Initial cash
//! appears as an extra supply row and any surplus as an extra demand column, so
//! instances are always balanced. Fixed fees are not part of the objective;
//! they only enter when the resulting plan is priced.

mod plus;
mod simplex;
mod vertex;

use std::fmt;

use num_rational::Ratio;

pub use plus::{group_transactions, lp_plus_from_flows, lp_plus_plan, Grouping};
pub use simplex::solve_transport;
pub use vertex::vertex_minimum;

use crate::error::{Error, Result};
use crate::money::Money;
use crate::task::{HoldingId, UpdateTask};

/// Exact per-unit cost, in basis points.
pub type Rate = Ratio<i128>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CellMode {
    Switch,
    Trade,
    Forbidden,
}

/// A supply row or demand column of the instance.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Endpoint {
    Holding(HoldingId),
    Cash,
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Holding(h) => write!(f, "{h}"),
            Endpoint::Cash => f.write_str("cash"),
        }
    }
}

/// A balanced transportation problem.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransportInstance {
    pub supplies: Vec<(Endpoint, Money)>,
    pub demands: Vec<(Endpoint, Money)>,
    /// Row-major `supplies.len() × demands.len()` per-unit costs.
    pub cost: Vec<Vec<Rate>>,
    pub mode: Vec<Vec<CellMode>>,
}

impl TransportInstance {
    /// An instance with explicit costs; every cell starts as [`CellMode::Trade`].
    pub fn new(
        supplies: Vec<(Endpoint, Money)>,
        demands: Vec<(Endpoint, Money)>,
        cost: Vec<Vec<Rate>>,
    ) -> Result<Self> {
        let mode = cost.iter().map(|r| vec![CellMode::Trade; r.len()]).collect();
        let inst = TransportInstance { supplies, demands, cost, mode };
        inst.check()?;
        Ok(inst)
    }

    pub fn rows(&self) -> usize {
        self.supplies.len()
    }

    pub fn cols(&self) -> usize {
        self.demands.len()
    }

    pub fn total_supply(&self) -> Money {
        self.supplies.iter().map(|s| s.1).sum()
    }

    pub fn total_demand(&self) -> Money {
        self.demands.iter().map(|d| d.1).sum()
    }

    pub fn is_balanced(&self) -> bool {
        self.total_supply() == self.total_demand()
    }

    /// Marks a cell as unusable. It is priced with a big-M cost in the solver.
    pub fn forbid(&mut self, row: usize, col: usize) {
        self.mode[row][col] = CellMode::Forbidden;
    }

    /// Per-unit cost with forbidden cells replaced by big-M.
    ///
    /// Integral vertices move at least one minor unit through any used cell, so
    /// M exceeds the total cost of every plan that avoids forbidden cells.
    pub(crate) fn effective_costs(&self) -> Vec<Vec<Rate>> {
        let max = self
            .cost
            .iter()
            .zip(&self.mode)
            .flat_map(|(r, m)| r.iter().zip(m).filter(|(_, m)| **m != CellMode::Forbidden).map(|(c, _)| *c))
            .max()
            .unwrap_or_else(|| Rate::from_integer(0));
        let big_m = max * Rate::from_integer(self.total_supply().0 as i128) + Rate::from_integer(1);
        self.cost
            .iter()
            .zip(&self.mode)
            .map(|(r, m)| r.iter().zip(m).map(|(c, m)| if *m == CellMode::Forbidden { big_m } else { *c }).collect())
            .collect()
    }

    /// `Σ c_ij x_ij` in bps·minor units, using the stated (not big-M) costs.
    pub fn objective(&self, flows: &FlowMatrix) -> Rate {
        flows.cells.iter().map(|c| self.cost[c.row][c.col] * Rate::from_integer(c.amount.0 as i128)).sum()
    }

    fn check(&self) -> Result<()> {
        let (m, n) = (self.rows(), self.cols());
        if self.cost.len() != m || self.cost.iter().any(|r| r.len() != n) {
            return Err(Error::Transport(format!("cost matrix must be {m}×{n}")));
        }
        if self.supplies.iter().chain(&self.demands).any(|e| e.1 < Money::ZERO) {
            return Err(Error::Transport("supplies and demands must be non-negative".into()));
        }
        if self.cost.iter().flatten().any(|c| *c < Rate::from_integer(0)) {
            return Err(Error::Transport("costs must be non-negative".into()));
        }
        if !self.is_balanced() {
            return Err(Error::Transport(format!(
                "unbalanced: supply {} vs demand {}",
                self.total_supply(),
                self.total_demand()
            )));
        }
        Ok(())
    }
}

/// One positive cell of a solution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowCell {
    pub row: usize,
    pub col: usize,
    pub from: Endpoint,
    pub to: Endpoint,
    pub amount: Money,
    pub mode: CellMode,
}

/// The positive cells of a transportation solution.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FlowMatrix {
    pub cells: Vec<FlowCell>,
}

impl FlowMatrix {
    /// Builds a matrix from `(row, col, amount)` triples, dropping zero cells.
    pub fn from_amounts(inst: &TransportInstance, amounts: impl IntoIterator<Item = (usize, usize, Money)>) -> Self {
        let mut cells: Vec<FlowCell> = amounts
            .into_iter()
            .filter(|(_, _, a)| a.is_positive())
            .map(|(row, col, amount)| FlowCell {
                row,
                col,
                from: inst.supplies[row].0.clone(),
                to: inst.demands[col].0.clone(),
                amount,
                mode: inst.mode[row][col],
            })
            .collect();
        cells.sort_by_key(|c| (c.row, c.col));
        FlowMatrix { cells }
    }

    pub fn row_sums(&self, rows: usize) -> Vec<Money> {
        let mut s = vec![Money::ZERO; rows];
        for c in &self.cells {
            s[c.row] += c.amount;
        }
        s
    }

    pub fn col_sums(&self, cols: usize) -> Vec<Money> {
        let mut s = vec![Money::ZERO; cols];
        for c in &self.cells {
            s[c.col] += c.amount;
        }
        s
    }

    pub fn amount(&self, row: usize, col: usize) -> Money {
        self.cells.iter().find(|c| c.row == row && c.col == col).map_or(Money::ZERO, |c| c.amount)
    }

    /// True when row and column sums reproduce the instance marginals.
    pub fn matches_marginals(&self, inst: &TransportInstance) -> bool {
        self.row_sums(inst.rows()).iter().zip(&inst.supplies).all(|(a, s)| *a == s.1)
            && self.col_sums(inst.cols()).iter().zip(&inst.demands).all(|(a, d)| *a == d.1)
    }
}

fn rate(b: crate::money::Bps) -> Rate {
    Rate::new(b.numer() as i128, b.denom() as i128)
}

/// The transportation instance of a task.
///
/// A transferable pair gets `min(C_S, C_K(i) + C_K(j))`, preferring the switch
/// on ties; every other pair is a sell-then-buy at `C_K(i) + C_K(j)`. The cash
/// row pays the buy leg only, the cash column the sell leg only.
pub fn build_instance(task: &UpdateTask) -> TransportInstance {
    build_instance_for(task, task.outflow_vec(), task.inflow_vec(), task.initial_cash())
}

/// The instance of the remaining flows `u`, `v` with balance `w`.
pub fn build_instance_for(task: &UpdateTask, u: &[Money], v: &[Money], w: Money) -> TransportInstance {
    let cm = task.cost_model();
    let outs: Vec<(usize, Money)> = u.iter().copied().enumerate().filter(|(_, a)| a.is_positive()).collect();
    let ins: Vec<(usize, Money)> = v.iter().copied().enumerate().filter(|(_, a)| a.is_positive()).collect();
    let cash = w.max(Money::ZERO);
    let surplus = u.iter().copied().sum::<Money>() + cash - v.iter().copied().sum::<Money>();

    let mut supplies: Vec<(Endpoint, Money)> =
        outs.iter().map(|&(i, a)| (Endpoint::Holding(task.id(i).clone()), a)).collect();
    let mut demands: Vec<(Endpoint, Money)> =
        ins.iter().map(|&(j, a)| (Endpoint::Holding(task.id(j).clone()), a)).collect();
    let mut row_idx: Vec<Option<usize>> = outs.iter().map(|&(i, _)| Some(i)).collect();
    let mut col_idx: Vec<Option<usize>> = ins.iter().map(|&(j, _)| Some(j)).collect();
    if cash.is_positive() {
        supplies.push((Endpoint::Cash, cash));
        row_idx.push(None);
    }
    if surplus.is_positive() {
        demands.push((Endpoint::Cash, surplus));
        col_idx.push(None);
    }

    let mut cost = Vec::with_capacity(row_idx.len());
    let mut mode = Vec::with_capacity(row_idx.len());
    for r in &row_idx {
        let mut crow = Vec::with_capacity(col_idx.len());
        let mut mrow = Vec::with_capacity(col_idx.len());
        for c in &col_idx {
            let (c_ij, m_ij) = match (*r, *c) {
                (Some(i), Some(j)) => {
                    let trade = rate(cm.trade_rate(i)) + rate(cm.trade_rate(j));
                    match cm.switch_rate(i, j) {
                        Ok(s) if rate(s) <= trade => (rate(s), CellMode::Switch),
                        _ => (trade, CellMode::Trade),
                    }
                }
                (Some(i), None) => (rate(cm.trade_rate(i)), CellMode::Trade),
                (None, Some(j)) => (rate(cm.trade_rate(j)), CellMode::Trade),
                (None, None) => (Rate::from_integer(0), CellMode::Trade),
            };
            crow.push(c_ij);
            mrow.push(m_ij);
        }
        cost.push(crow);
        mode.push(mrow);
    }
    TransportInstance { supplies, demands, cost, mode }
}

/// Optimal objective of the remaining flows, in minor units, rounded up.
///
/// Every plan pays at least this much in variable fees before rounding: each
/// unit leaves its outflow by a sell or a switch and enters its inflow by a buy
/// or the same switch, and the cell cost is the cheapest such route.
pub fn variable_cost_bound(task: &UpdateTask, u: &[Money], v: &[Money], w: Money) -> Result<Money> {
    let inst = build_instance_for(task, u, v, w);
    let flows = solve_transport(&inst)?;
    let z = inst.objective(&flows) / Rate::from_integer(crate::money::BPS_PER_UNIT as i128);
    Ok(Money(z.ceil().to_integer() as i64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::money::Bps;
    use crate::task::{Holding, SwitchCostRule};

    fn endpoint_str(e: &Endpoint) -> String {
        e.to_string()
    }

    #[test]
    fn model_portfolio_modes() {
        let task = fixtures::model_portfolio();
        let inst = build_instance(&task);
        assert_eq!(inst.rows(), 3);
        assert_eq!(inst.cols(), 4);
        for (r, (e, _)) in inst.supplies.iter().enumerate() {
            for (c, (d, _)) in inst.demands.iter().enumerate() {
                let non_transferable = ["BT", "GD"].contains(&endpoint_str(e).as_str()) || endpoint_str(d) == "RE";
                if non_transferable {
                    assert_eq!(inst.mode[r][c], CellMode::Trade, "{e}->{d}");
                } else {
                    assert_eq!(inst.mode[r][c], CellMode::Switch, "{e}->{d}");
                }
            }
        }
    }

    #[test]
    fn sum_rule_ties_prefer_switch() {
        let task = UpdateTask::builder()
            .holding(Holding::new("A", true, Money(0), Bps::from_integer(3)))
            .holding(Holding::new("B", true, Money(0), Bps::from_integer(4)))
            .holding(Holding::new("C", true, Money(0), Bps::from_integer(5)))
            .switch_rule(SwitchCostRule::Sum)
            .outflow("A", Money(500))
            .inflow("B", Money(200))
            .inflow("C", Money(300))
            .build()
            .unwrap();
        let inst = build_instance(&task);
        assert!(inst.mode.iter().flatten().all(|m| *m == CellMode::Switch));
    }

    #[test]
    fn single_pair_has_no_dummy() {
        let task = UpdateTask::builder()
            .holding(Holding::new("A", true, Money(0), Bps::from_integer(3)))
            .holding(Holding::new("B", true, Money(0), Bps::from_integer(4)))
            .outflow("A", Money(700))
            .inflow("B", Money(700))
            .build()
            .unwrap();
        let inst = build_instance(&task);
        assert_eq!((inst.rows(), inst.cols()), (1, 1));
        let flows = solve_transport(&inst).unwrap();
        assert_eq!(flows.cells.len(), 1);
        assert_eq!(flows.cells[0].amount, Money(700));
    }

    #[test]
    fn cash_and_surplus_become_dummies() {
        let task = UpdateTask::builder()
            .holding(Holding::new("A", true, Money(0), Bps::from_integer(3)))
            .holding(Holding::new("B", true, Money(0), Bps::from_integer(4)))
            .outflow("A", Money(700))
            .inflow("B", Money(500))
            .initial_cash(Money(100))
            .build()
            .unwrap();
        let inst = build_instance(&task);
        assert_eq!(inst.supplies.last().unwrap(), &(Endpoint::Cash, Money(100)));
        assert_eq!(inst.demands.last().unwrap(), &(Endpoint::Cash, Money(300)));
        assert!(inst.is_balanced());
    }

    #[test]
    fn unbalanced_explicit_instance_is_rejected() {
        let r = TransportInstance::new(
            vec![(Endpoint::Cash, Money(5))],
            vec![(Endpoint::Cash, Money(4))],
            vec![vec![Rate::from_integer(1)]],
        );
        assert!(r.is_err());
    }
}
