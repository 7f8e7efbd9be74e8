//! Holdings, the fee model and the update task handed to every planner.

use std::borrow::Borrow;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::money::{Bps, Money};

/// Symbolic identifier of a holding, e.g. `EQ`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub struct HoldingId(Arc<str>);

impl HoldingId {
    pub fn new(id: impl AsRef<str>) -> Self {
        HoldingId(Arc::from(id.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<String> for HoldingId {
    fn from(s: String) -> Self {
        HoldingId(Arc::from(s))
    }
}

impl From<&str> for HoldingId {
    fn from(s: &str) -> Self {
        HoldingId::new(s)
    }
}

impl From<HoldingId> for String {
    fn from(id: HoldingId) -> String {
        id.0.to_string()
    }
}

impl Borrow<str> for HoldingId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for HoldingId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for HoldingId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

/// An instrument in the portfolio together with its fee schedule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Holding {
    pub id: HoldingId,
    pub name: String,
    /// Eligible for switches (mutual funds are, ETFs are not).
    pub transferable: bool,
    /// Charged once per transaction touching the holding.
    pub fixed_fee: Money,
    /// Variable trading fee, charged on the traded amount.
    pub variable_fee_bps: Bps,
}

impl Holding {
    pub fn new(id: impl Into<HoldingId>, transferable: bool, fixed_fee: Money, variable_fee_bps: Bps) -> Self {
        let id = id.into();
        Holding { name: id.to_string(), id, transferable, fixed_fee, variable_fee_bps }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

/// How the switching rate between two transferable holdings is derived when no
/// explicit override is given.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchCostRule {
    /// Both trading legs are charged: `C_K(x) + C_K(y)`.
    Sum,
    /// Only the dearer leg is charged: `max(C_K(x), C_K(y))`.
    #[default]
    Max,
    /// Every switch costs the same rate.
    Flat(Bps),
}

/// The kind of a transaction. The five operators of the search model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ActionKind {
    Sell,
    BuyAvailable,
    BuyNeeded,
    SwitchAvailable,
    SwitchNeeded,
}

impl ActionKind {
    pub const ALL: [ActionKind; 5] = [
        ActionKind::Sell,
        ActionKind::BuyAvailable,
        ActionKind::BuyNeeded,
        ActionKind::SwitchAvailable,
        ActionKind::SwitchNeeded,
    ];

    pub fn is_switch(self) -> bool {
        matches!(self, ActionKind::SwitchAvailable | ActionKind::SwitchNeeded)
    }

    pub fn is_buy(self) -> bool {
        matches!(self, ActionKind::BuyAvailable | ActionKind::BuyNeeded)
    }

    pub fn label(self) -> &'static str {
        match self {
            ActionKind::Sell => "SELL",
            ActionKind::BuyAvailable => "BUY-AVAILABLE",
            ActionKind::BuyNeeded => "BUY-NEEDED",
            ActionKind::SwitchAvailable => "SWITCH-AVAILABLE",
            ActionKind::SwitchNeeded => "SWITCH-NEEDED",
        }
    }

    pub fn parse_label(s: &str) -> Option<ActionKind> {
        let norm = s.trim().to_ascii_uppercase().replace('_', "-");
        ActionKind::ALL.into_iter().find(|k| k.label() == norm)
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Per-holding fees plus the switching rate function.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostModel {
    ids: Vec<HoldingId>,
    fixed: Vec<Money>,
    variable: Vec<Bps>,
    transferable: Vec<bool>,
    rule: SwitchCostRule,
    overrides: BTreeMap<(usize, usize), Bps>,
}

impl CostModel {
    fn new(holdings: &[Holding], rule: SwitchCostRule) -> Self {
        CostModel {
            ids: holdings.iter().map(|h| h.id.clone()).collect(),
            fixed: holdings.iter().map(|h| h.fixed_fee).collect(),
            variable: holdings.iter().map(|h| h.variable_fee_bps).collect(),
            transferable: holdings.iter().map(|h| h.transferable).collect(),
            rule,
            overrides: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.fixed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixed.is_empty()
    }

    pub fn rule(&self) -> SwitchCostRule {
        self.rule
    }

    pub fn overrides(&self) -> impl Iterator<Item = (usize, usize, Bps)> + '_ {
        self.overrides.iter().map(|(&(i, j), &b)| (i, j, b))
    }

    pub fn fixed_fee(&self, h: usize) -> Money {
        self.fixed[h]
    }

    pub fn trade_rate(&self, h: usize) -> Bps {
        self.variable[h]
    }

    pub fn is_transferable(&self, h: usize) -> bool {
        self.transferable[h]
    }

    /// The switching rate `C_S(from, to)`; an error unless both are transferable.
    pub fn switch_rate(&self, from: usize, to: usize) -> Result<Bps> {
        if !(self.transferable[from] && self.transferable[to]) {
            return Err(Error::NonTransferableSwitch {
                from: self.ids[from].to_string(),
                to: self.ids[to].to_string(),
            });
        }
        if let Some(b) = self.overrides.get(&(from, to)) {
            return Ok(*b);
        }
        let (a, b) = (self.variable[from], self.variable[to]);
        Ok(match self.rule {
            SwitchCostRule::Sum => a + b,
            SwitchCostRule::Max => a.max(b),
            SwitchCostRule::Flat(r) => r,
        })
    }

    /// Cost of one transaction under the fee model.
    ///
    /// Trades pay `C_F(h) + C_K(h)·amount`; switches pay
    /// `C_F(from) + C_F(to) + C_S(from, to)·amount`. The variable part is rounded
    /// half-to-even to whole minor units.
    pub fn price(&self, kind: ActionKind, from: Option<usize>, to: Option<usize>, amount: Money) -> Result<Money> {
        match kind {
            ActionKind::Sell => {
                let h = from.ok_or_else(|| Error::invalid("from", "SELL needs a source holding"))?;
                Ok(self.fixed[h] + self.variable[h].apply(amount))
            }
            ActionKind::BuyAvailable | ActionKind::BuyNeeded => {
                let h = to.ok_or_else(|| Error::invalid("to", "BUY needs a target holding"))?;
                Ok(self.fixed[h] + self.variable[h].apply(amount))
            }
            ActionKind::SwitchAvailable | ActionKind::SwitchNeeded => {
                let (x, y) = from.zip(to).ok_or_else(|| Error::invalid("from/to", "SWITCH needs both holdings"))?;
                let rate = self.switch_rate(x, y)?;
                Ok(self.fixed[x] + self.fixed[y] + rate.apply(amount))
            }
        }
    }
}

/// A portfolio update: holdings, pending outflows and inflows, and the fee model.
///
/// Flows are stored densely by holding index; a zero entry means no flow.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpdateTask {
    name: String,
    holdings: Vec<Holding>,
    index: HashMap<HoldingId, usize>,
    outflows: Vec<Money>,
    inflows: Vec<Money>,
    initial_cash: Money,
    cost: CostModel,
}

/// Builder for [`UpdateTask`]; validation happens in [`TaskBuilder::build`].
#[derive(Clone, Debug, Default)]
pub struct TaskBuilder {
    name: String,
    holdings: Vec<Holding>,
    outflows: Vec<(HoldingId, Money)>,
    inflows: Vec<(HoldingId, Money)>,
    initial_cash: Money,
    rule: SwitchCostRule,
    overrides: Vec<(HoldingId, HoldingId, Bps)>,
    // flows in several currencies cannot be compared without rates
    skip_balance_check: bool,
}

impl TaskBuilder {
    pub(crate) fn skip_balance_check(mut self) -> Self {
        self.skip_balance_check = true;
        self
    }

    pub fn name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn holding(mut self, h: Holding) -> Self {
        self.holdings.push(h);
        self
    }

    pub fn holdings(mut self, hs: impl IntoIterator<Item = Holding>) -> Self {
        self.holdings.extend(hs);
        self
    }

    pub fn outflow(mut self, id: impl Into<HoldingId>, amount: Money) -> Self {
        self.outflows.push((id.into(), amount));
        self
    }

    pub fn inflow(mut self, id: impl Into<HoldingId>, amount: Money) -> Self {
        self.inflows.push((id.into(), amount));
        self
    }

    pub fn flows(
        mut self,
        outflows: impl IntoIterator<Item = (HoldingId, Money)>,
        inflows: impl IntoIterator<Item = (HoldingId, Money)>,
    ) -> Self {
        self.outflows.extend(outflows);
        self.inflows.extend(inflows);
        self
    }

    pub fn initial_cash(mut self, cash: Money) -> Self {
        self.initial_cash = cash;
        self
    }

    pub fn switch_rule(mut self, rule: SwitchCostRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn switch_override(mut self, from: impl Into<HoldingId>, to: impl Into<HoldingId>, bps: Bps) -> Self {
        self.overrides.push((from.into(), to.into(), bps));
        self
    }

    pub fn build(self) -> Result<UpdateTask> {
        let mut index = HashMap::with_capacity(self.holdings.len());
        for (i, h) in self.holdings.iter().enumerate() {
            if index.insert(h.id.clone(), i).is_some() {
                return Err(Error::invalid(format!("holdings[{i}].id"), format!("duplicate id `{}`", h.id)));
            }
            if h.fixed_fee < Money::ZERO {
                return Err(Error::invalid(format!("holdings[{i}].fixed_fee"), "must be non-negative"));
            }
            if h.variable_fee_bps.is_negative() {
                return Err(Error::invalid(format!("holdings[{i}].variable_fee_bps"), "must be non-negative"));
            }
        }
        if self.initial_cash < Money::ZERO {
            return Err(Error::invalid("initial_cash", "must be non-negative"));
        }
        if let SwitchCostRule::Flat(r) = self.rule {
            if r.is_negative() {
                return Err(Error::invalid("switch_cost_rule", "flat rate must be non-negative"));
            }
        }

        let n = self.holdings.len();
        let lookup = |field: &str, id: &HoldingId| {
            index.get(id).copied().ok_or_else(|| Error::invalid(format!("{field}.{id}"), "unknown holding"))
        };
        let mut outflows = vec![Money::ZERO; n];
        let mut inflows = vec![Money::ZERO; n];
        for (id, amount) in &self.outflows {
            let i = lookup("outflows", id)?;
            if !amount.is_positive() {
                return Err(Error::invalid(format!("outflows.{id}"), "amount must be positive"));
            }
            if !outflows[i].is_zero() {
                return Err(Error::invalid(format!("outflows.{id}"), "listed twice"));
            }
            outflows[i] = *amount;
        }
        for (id, amount) in &self.inflows {
            let i = lookup("inflows", id)?;
            if !amount.is_positive() {
                return Err(Error::invalid(format!("inflows.{id}"), "amount must be positive"));
            }
            if !inflows[i].is_zero() {
                return Err(Error::invalid(format!("inflows.{id}"), "listed twice"));
            }
            if !outflows[i].is_zero() {
                return Err(Error::invalid(format!("inflows.{id}"), "holding also has an outflow"));
            }
            inflows[i] = *amount;
        }

        let mut cost = CostModel::new(&self.holdings, self.rule);
        for (from, to, bps) in &self.overrides {
            let field = format!("switch_costs.{from}->{to}");
            let i = index.get(from).copied().ok_or_else(|| Error::invalid(&field, "unknown holding"))?;
            let j = index.get(to).copied().ok_or_else(|| Error::invalid(&field, "unknown holding"))?;
            if bps.is_negative() {
                return Err(Error::invalid(&field, "must be non-negative"));
            }
            if !(self.holdings[i].transferable && self.holdings[j].transferable) {
                return Err(Error::invalid(&field, "both holdings must be transferable"));
            }
            cost.overrides.insert((i, j), *bps);
        }

        let total_out: Money = outflows.iter().sum();
        let total_in: Money = inflows.iter().sum();
        if !self.skip_balance_check && total_out + self.initial_cash < total_in {
            return Err(Error::Infeasible { outflows: total_out, cash: self.initial_cash, inflows: total_in });
        }

        Ok(UpdateTask {
            name: self.name,
            holdings: self.holdings,
            index,
            outflows,
            inflows,
            initial_cash: self.initial_cash,
            cost,
        })
    }
}

impl UpdateTask {
    pub fn builder() -> TaskBuilder {
        TaskBuilder::default()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn holdings(&self) -> &[Holding] {
        &self.holdings
    }

    pub fn holding(&self, i: usize) -> &Holding {
        &self.holdings[i]
    }

    pub fn len(&self) -> usize {
        self.holdings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.holdings.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id(&self, i: usize) -> &HoldingId {
        &self.holdings[i].id
    }

    pub fn cost_model(&self) -> &CostModel {
        &self.cost
    }

    pub fn initial_cash(&self) -> Money {
        self.initial_cash
    }

    /// Dense outflow vector indexed by holding.
    pub fn outflow_vec(&self) -> &[Money] {
        &self.outflows
    }

    /// Dense inflow vector indexed by holding.
    pub fn inflow_vec(&self) -> &[Money] {
        &self.inflows
    }

    pub fn outflows(&self) -> impl Iterator<Item = (usize, Money)> + '_ {
        self.outflows.iter().copied().enumerate().filter(|(_, m)| m.is_positive())
    }

    pub fn inflows(&self) -> impl Iterator<Item = (usize, Money)> + '_ {
        self.inflows.iter().copied().enumerate().filter(|(_, m)| m.is_positive())
    }

    pub fn outflow_map(&self) -> BTreeMap<HoldingId, Money> {
        self.outflows().map(|(i, m)| (self.id(i).clone(), m)).collect()
    }

    pub fn inflow_map(&self) -> BTreeMap<HoldingId, Money> {
        self.inflows().map(|(i, m)| (self.id(i).clone(), m)).collect()
    }

    pub fn total_outflow(&self) -> Money {
        self.outflows.iter().sum()
    }

    pub fn total_inflow(&self) -> Money {
        self.inflows.iter().sum()
    }

    /// Number of non-zero flows; also the length of the naive plan.
    pub fn flow_count(&self) -> usize {
        self.outflows().count() + self.inflows().count()
    }

    /// A copy with the same holdings and fees but different flows.
    pub fn with_flows(&self, outflows: Vec<Money>, inflows: Vec<Money>, initial_cash: Money) -> Result<UpdateTask> {
        self.flows_builder(outflows, inflows, initial_cash)?.build()
    }

    pub(crate) fn flows_builder(
        &self,
        outflows: Vec<Money>,
        inflows: Vec<Money>,
        initial_cash: Money,
    ) -> Result<TaskBuilder> {
        let n = self.len();
        if outflows.len() != n || inflows.len() != n {
            return Err(Error::invalid("flows", "length does not match holdings"));
        }
        let mut b = self.to_builder();
        b.outflows = outflows
            .into_iter()
            .enumerate()
            .filter(|(_, m)| !m.is_zero())
            .map(|(i, m)| (self.id(i).clone(), m))
            .collect();
        b.inflows = inflows
            .into_iter()
            .enumerate()
            .filter(|(_, m)| !m.is_zero())
            .map(|(i, m)| (self.id(i).clone(), m))
            .collect();
        b.initial_cash = initial_cash;
        Ok(b)
    }

    /// A builder reproducing this task.
    pub fn to_builder(&self) -> TaskBuilder {
        TaskBuilder {
            name: self.name.clone(),
            holdings: self.holdings.clone(),
            outflows: self.outflows().map(|(i, m)| (self.id(i).clone(), m)).collect(),
            inflows: self.inflows().map(|(i, m)| (self.id(i).clone(), m)).collect(),
            initial_cash: self.initial_cash,
            rule: self.cost.rule,
            overrides: self.cost.overrides().map(|(i, j, b)| (self.id(i).clone(), self.id(j).clone(), b)).collect(),
            skip_balance_check: false,
        }
    }

    /// Prices one transaction identified by holding ids.
    pub fn price_action(
        &self,
        kind: ActionKind,
        from: Option<&HoldingId>,
        to: Option<&HoldingId>,
        amount: Money,
    ) -> Result<Money> {
        price_action(kind, from, to, amount, self)
    }
}

/// Prices a transaction under the task's fee model. Amount must be positive.
pub fn price_action(
    kind: ActionKind,
    from: Option<&HoldingId>,
    to: Option<&HoldingId>,
    amount: Money,
    task: &UpdateTask,
) -> Result<Money> {
    if !amount.is_positive() {
        return Err(Error::invalid("amount", "must be positive"));
    }
    let resolve = |id: Option<&HoldingId>| -> Result<Option<usize>> {
        id.map(|id| task.index_of(id.as_str()).ok_or_else(|| Error::UnknownHolding(id.to_string()))).transpose()
    };
    let (f, t) = (resolve(from)?, resolve(to)?);
    task.cost_model().price(kind, f, t, amount)
}

/// Money flows from the difference between target and current portfolio values.
///
/// Returns `(outflows, inflows)`: holdings above target flow out, holdings below
/// target flow in. Zero differences are omitted. Holdings missing from one side
/// count as zero there.
pub fn derive_flows(
    current: &BTreeMap<HoldingId, Money>,
    target: &BTreeMap<HoldingId, Money>,
) -> (BTreeMap<HoldingId, Money>, BTreeMap<HoldingId, Money>) {
    let mut outflows = BTreeMap::new();
    let mut inflows = BTreeMap::new();
    for id in current.keys().chain(target.keys()) {
        let c = current.get(id).copied().unwrap_or_default();
        let t = target.get(id).copied().unwrap_or_default();
        if c > t {
            outflows.insert(id.clone(), c - t);
        } else if t > c {
            inflows.insert(id.clone(), t - c);
        }
    }
    (outflows, inflows)
}
