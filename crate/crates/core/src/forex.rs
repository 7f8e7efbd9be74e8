//! Multi-currency updates: one cash balance per currency and exchange operators.
//!
//! Every holding is denominated in one currency and its flows are expressed in
//! that currency. Selling credits the holding's currency, buying debits it, and
//! switches are only possible between holdings of the same currency. Fees are
//! priced in the instrument's currency and reported in the base currency, like
//! the exchange fee, which is `fx_fee` on the source amount.
//!
//! Rates are constants for the planning horizon. Conversions round half to even.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Ratio;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::money::{div_floor, div_round_half_even, Bps, Money};
use crate::plan::Action;
use crate::search::{astar, FirstSolution, SearchLimits, SearchSpace};
use crate::statespace::{FeeHeuristic, State};
use crate::task::{ActionKind, HoldingId, UpdateTask};

pub type Rate = Ratio<i64>;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Currency(String);

impl Currency {
    pub fn new(code: impl Into<String>) -> Self {
        Currency(code.into().to_ascii_uppercase())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Currency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Currency {
    fn from(s: &str) -> Self {
        Currency::new(s)
    }
}

/// Exchange rates: `rate(a, b)` units of `b` per unit of `a`.
///
/// Setting one direction also fills in the reciprocal unless that direction
/// was set explicitly.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RateTable {
    rates: BTreeMap<(Currency, Currency), (Rate, bool)>,
}

impl RateTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, from: impl Into<Currency>, to: impl Into<Currency>, rate: Rate) -> Result<()> {
        let (from, to) = (from.into(), to.into());
        if rate <= Rate::zero() {
            return Err(Error::invalid(format!("rates.{from}/{to}"), "rate must be positive"));
        }
        if from == to {
            return Err(Error::invalid(format!("rates.{from}/{to}"), "rate between a currency and itself"));
        }
        let back = (to.clone(), from.clone());
        if !self.rates.get(&back).is_some_and(|&(_, explicit)| explicit) {
            self.rates.insert(back, (rate.recip(), false));
        }
        self.rates.insert((from, to), (rate, true));
        Ok(())
    }

    pub fn with(mut self, from: impl Into<Currency>, to: impl Into<Currency>, rate: Rate) -> Result<Self> {
        self.set(from, to, rate)?;
        Ok(self)
    }

    pub fn rate(&self, from: &Currency, to: &Currency) -> Result<Rate> {
        if from == to {
            return Ok(Rate::one());
        }
        self.rates
            .get(&(from.clone(), to.clone()))
            .map(|&(r, _)| r)
            .ok_or_else(|| Error::UnknownCurrencyPair { from: from.to_string(), to: to.to_string() })
    }

    /// Explicitly set entries, in key order.
    pub fn explicit(&self) -> impl Iterator<Item = (&Currency, &Currency, Rate)> {
        self.rates.iter().filter(|(_, &(_, e))| e).map(|((a, b), &(r, _))| (a, b, r))
    }

    /// Checks that converting one major unit there and back stays within one
    /// minor unit.
    pub fn check_consistency(&self) -> Result<()> {
        for ((a, b), &(r, _)) in &self.rates {
            let back = self.rate(b, a)?;
            let round_trip = convert_with(convert_with(Money(100), r), back);
            if (round_trip.0 - 100).abs() > 1 {
                return Err(Error::invalid(format!("rates.{a}/{b}"), format!("{r} and {back} are not reciprocal")));
            }
        }
        Ok(())
    }
}

/// `amount · rate`, rounded half to even.
pub fn convert_with(amount: Money, rate: Rate) -> Money {
    let num = amount.0 as i128 * *rate.numer() as i128;
    Money(div_round_half_even(num, *rate.denom() as i128) as i64)
}

fn convert_floor(amount: Money, rate: Rate) -> Money {
    Money(div_floor(amount.0 as i128 * *rate.numer() as i128, *rate.denom() as i128) as i64)
}

/// Smallest source amount whose conversion covers `target`.
fn source_for(target: Money, rate: Rate) -> Money {
    // ceil(target / rate) is within one unit of the answer.
    let num = target.0 as i128 * *rate.denom() as i128;
    let den = *rate.numer() as i128;
    let mut m = Money(crate::money::div_ceil(num, den) as i64);
    while m.0 > 0 && convert_with(Money(m.0 - 1), rate) >= target {
        m.0 -= 1;
    }
    while convert_with(m, rate) < target {
        m.0 += 1;
    }
    m
}

/// An update task whose holdings are spread over several currencies.
#[derive(Clone, Debug)]
pub struct ForexTask {
    task: UpdateTask,
    base: Currency,
    currencies: Vec<Currency>,
    holding_currency: Vec<usize>,
    initial: Vec<Money>,
    rates: RateTable,
    to_base: Vec<Rate>,
    fx_fee: Bps,
}

impl ForexTask {
    /// `task` carries flows in each holding's own currency; holdings missing
    /// from `currency_of` are in `base`. The task's opening cash is a `base`
    /// balance; `balances` adds opening cash in other currencies.
    pub fn new(
        task: UpdateTask,
        base: Currency,
        currency_of: &BTreeMap<HoldingId, Currency>,
        balances: &BTreeMap<Currency, Money>,
        rates: RateTable,
        fx_fee: Bps,
    ) -> Result<Self> {
        for id in currency_of.keys() {
            if task.index_of(id.as_str()).is_none() {
                return Err(Error::UnknownHolding(id.to_string()));
            }
        }
        if fx_fee.is_negative() {
            return Err(Error::invalid("fx_fee_bps", "must be non-negative"));
        }
        let mut currencies: Vec<Currency> = std::iter::once(base.clone())
            .chain(currency_of.values().cloned())
            .chain(balances.keys().cloned())
            .collect();
        currencies.sort();
        currencies.dedup();
        let pos = |c: &Currency| currencies.binary_search(c).expect("collected above");
        let holding_currency = task.holdings().iter().map(|h| pos(currency_of.get(&h.id).unwrap_or(&base))).collect();
        let mut initial = vec![Money::ZERO; currencies.len()];
        for (c, &m) in balances {
            if m < Money::ZERO {
                return Err(Error::invalid(format!("balances.{c}"), "must be non-negative"));
            }
            initial[pos(c)] += m;
        }
        initial[pos(&base)] += task.initial_cash();
        for a in &currencies {
            for b in &currencies {
                rates.rate(a, b)?;
            }
        }
        rates.check_consistency()?;
        let to_base = currencies.iter().map(|c| rates.rate(c, &base)).collect::<Result<_>>()?;
        Ok(ForexTask { task, base, currencies, holding_currency, initial, rates, to_base, fx_fee })
    }

    /// Builds a task from flows stated in the base currency, converting each
    /// flow into its holding's currency.
    pub fn from_base_flows(
        task: &UpdateTask,
        base: Currency,
        currency_of: &BTreeMap<HoldingId, Currency>,
        rates: RateTable,
        fx_fee: Bps,
    ) -> Result<Self> {
        let conv = |i: usize, m: Money| -> Result<Money> {
            let c = currency_of.get(task.id(i)).unwrap_or(&base);
            Ok(convert_with(m, rates.rate(&base, c)?))
        };
        let u = (0..task.len()).map(|i| conv(i, task.outflow_vec()[i])).collect::<Result<Vec<_>>>()?;
        let v = (0..task.len()).map(|i| conv(i, task.inflow_vec()[i])).collect::<Result<Vec<_>>>()?;
        let local = task.flows_builder(u, v, task.initial_cash())?.skip_balance_check().build()?;
        ForexTask::new(local, base, currency_of, &BTreeMap::new(), rates, fx_fee)
    }

    pub fn task(&self) -> &UpdateTask {
        &self.task
    }

    pub fn base(&self) -> &Currency {
        &self.base
    }

    pub fn currencies(&self) -> &[Currency] {
        &self.currencies
    }

    pub fn currency_of(&self, holding: usize) -> &Currency {
        &self.currencies[self.holding_currency[holding]]
    }

    pub fn rates(&self) -> &RateTable {
        &self.rates
    }

    pub fn fx_fee(&self) -> Bps {
        self.fx_fee
    }

    pub fn initial_balances(&self) -> BTreeMap<Currency, Money> {
        self.currencies.iter().cloned().zip(self.initial.iter().copied()).collect()
    }

    pub fn is_single_currency(&self) -> bool {
        self.currencies.len() == 1
    }

    fn to_base(&self, c: usize, m: Money) -> Money {
        convert_with(m, self.to_base[c])
    }

    fn rate_between(&self, a: usize, b: usize) -> Rate {
        self.rates.rate(&self.currencies[a], &self.currencies[b]).expect("checked at construction")
    }

    /// Base value of a set of balances.
    pub fn base_value(&self, balances: &[Money]) -> Money {
        balances.iter().enumerate().map(|(c, &m)| self.to_base(c, m)).sum()
    }

    pub fn initial_state(&self) -> ForexState {
        ForexState {
            u: self.task.outflow_vec().to_vec(),
            v: self.task.inflow_vec().to_vec(),
            balances: self.initial.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ForexState {
    pub u: Vec<Money>,
    pub v: Vec<Money>,
    /// Cash by currency, indexed like [`ForexTask::currencies`].
    pub balances: Vec<Money>,
}

impl ForexState {
    pub fn is_goal(&self) -> bool {
        self.u.iter().chain(&self.v).all(|m| m.is_zero())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExchangeKind {
    Available,
    Needed,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Exchange {
    pub kind: ExchangeKind,
    pub from: Currency,
    pub to: Currency,
    /// The pending buy an EXCHANGE-NEEDED covers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<HoldingId>,
    /// Amount debited, in `from`.
    pub amount: Money,
    /// Amount credited, in `to`.
    pub received: Money,
    /// Fee in the base currency.
    pub cost: Money,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ForexAction {
    /// A sell, buy or switch; amount in the holding's currency, cost in base.
    Trade(Action),
    Exchange(Exchange),
}

impl ForexAction {
    pub fn cost(&self) -> Money {
        match self {
            ForexAction::Trade(a) => a.cost,
            ForexAction::Exchange(e) => e.cost,
        }
    }

    pub fn is_exchange(&self) -> bool {
        matches!(self, ForexAction::Exchange(_))
    }
}

impl fmt::Display for ForexAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ForexAction::Trade(a) => a.fmt(f),
            ForexAction::Exchange(e) => {
                let kind = match e.kind {
                    ExchangeKind::Available => "EXCHANGE-AVAILABLE",
                    ExchangeKind::Needed => "EXCHANGE-NEEDED",
                };
                write!(f, "{kind} {} {} to {} {}", e.amount, e.from, e.received, e.to)?;
                if let Some(t) = &e.target {
                    write!(f, " for {t}")?;
                }
                Ok(())
            }
        }
    }
}

/// Calls `emit` for every applicable action, trades before exchanges.
pub fn expand(ft: &ForexTask, s: &ForexState, emit: &mut dyn FnMut(ForexAction, ForexState)) {
    let task = &ft.task;
    let cm = task.cost_model();
    let cur = &ft.holding_currency;
    let price = |kind, from: Option<usize>, to: Option<usize>, amount: Money| {
        let h = from.or(to).expect("every trade has an endpoint");
        let local = cm.price(kind, from, to, amount).expect("actions are generated from valid holdings");
        ft.to_base(cur[h], local)
    };
    let n = task.len();
    for x in (0..n).filter(|&x| s.u[x].is_positive()) {
        if cm.is_transferable(x) {
            for y in (0..n).filter(|&y| s.v[y].is_positive() && cm.is_transferable(y) && cur[x] == cur[y]) {
                let (kind, amount) = if s.v[y] > s.u[x] {
                    (ActionKind::SwitchAvailable, s.u[x])
                } else {
                    (ActionKind::SwitchNeeded, s.v[y])
                };
                let mut next = s.clone();
                next.u[x] -= amount;
                next.v[y] -= amount;
                let cost = price(kind, Some(x), Some(y), amount);
                emit(
                    ForexAction::Trade(Action::switch(kind, task.id(x).clone(), task.id(y).clone(), amount, cost)),
                    next,
                );
            }
        }
        let amount = s.u[x];
        let mut next = s.clone();
        next.u[x] = Money::ZERO;
        next.balances[cur[x]] += amount;
        let cost = price(ActionKind::Sell, Some(x), None, amount);
        emit(ForexAction::Trade(Action::sell(task.id(x).clone(), amount, cost)), next);
    }
    for y in (0..n).filter(|&y| s.v[y].is_positive()) {
        let cash = s.balances[cur[y]];
        if !cash.is_positive() {
            continue;
        }
        let (kind, amount) =
            if s.v[y] > cash { (ActionKind::BuyAvailable, cash) } else { (ActionKind::BuyNeeded, s.v[y]) };
        let mut next = s.clone();
        next.v[y] -= amount;
        next.balances[cur[y]] -= amount;
        let cost = price(kind, None, Some(y), amount);
        emit(ForexAction::Trade(Action::buy(kind, task.id(y).clone(), amount, cost)), next);
    }
    exchange_successors(ft, s, emit);
}

/// EXCHANGE-AVAILABLE and EXCHANGE-NEEDED moves.
///
/// Exchanges only go towards a currency whose pending buys exceed its balance,
/// and only spend cash the source currency does not need for its own pending
/// buys: EXCHANGE-AVAILABLE requires none, EXCHANGE-NEEDED leaves them covered.
/// This rules out exchanging back and forth, which would otherwise create
/// endless zero-fee states from rounding dust.
pub fn exchange_successors(ft: &ForexTask, s: &ForexState, emit: &mut dyn FnMut(ForexAction, ForexState)) {
    let k = ft.currencies.len();
    if k < 2 {
        return;
    }
    let mut need = vec![Money::ZERO; k];
    for (y, &m) in s.v.iter().enumerate() {
        need[ft.holding_currency[y]] += m;
    }
    let fee = |a: usize, m: Money| ft.to_base(a, ft.fx_fee.apply(m));
    for b in (0..k).filter(|&b| need[b] > s.balances[b]) {
        for a in (0..k).filter(|&a| a != b && s.balances[a].is_positive()) {
            let rate = ft.rate_between(a, b);
            let whole = s.balances[a];
            let received = convert_with(whole, rate);
            if received.is_positive() && need[a].is_zero() {
                let mut next = s.clone();
                next.balances[a] = Money::ZERO;
                next.balances[b] += received;
                let ex = Exchange {
                    kind: ExchangeKind::Available,
                    from: ft.currencies[a].clone(),
                    to: ft.currencies[b].clone(),
                    target: None,
                    amount: whole,
                    received,
                    cost: fee(a, whole),
                };
                emit(ForexAction::Exchange(ex), next);
            }
            for y in (0..s.v.len()).filter(|&y| ft.holding_currency[y] == b && s.v[y] > s.balances[b]) {
                let deficit = s.v[y] - s.balances[b];
                let amount = source_for(deficit, rate);
                if amount >= whole || whole - amount < need[a] {
                    continue;
                }
                let received = convert_with(amount, rate);
                let mut next = s.clone();
                next.balances[a] -= amount;
                next.balances[b] += received;
                let ex = Exchange {
                    kind: ExchangeKind::Needed,
                    from: ft.currencies[a].clone(),
                    to: ft.currencies[b].clone(),
                    target: Some(ft.task.id(y).clone()),
                    amount,
                    received,
                    cost: fee(a, amount),
                };
                emit(ForexAction::Exchange(ex), next);
            }
        }
    }
}

/// Search space over [`ForexState`].
///
/// With a single currency it uses the base fee heuristic. Otherwise the bound is
/// the larger of two: the fixed fees of pending holdings floored after
/// conversion, or the outflow-side fees at their cheapest exit rate lowered by
/// the worst-case rounding of every outflow-side action, plus the floored fixed
/// fees of inflows that can only be bought. Exchanges count as free.
pub struct ForexSpace<'a> {
    task: &'a ForexTask,
    base: Option<FeeHeuristic>,
    fixed_base: Vec<Money>,
    c_min: Vec<Bps>,
    rate: Vec<Ratio<i128>>,
    slack: Ratio<i128>,
}

impl<'a> ForexSpace<'a> {
    pub fn new(task: &'a ForexTask) -> Self {
        let t = &task.task;
        let cm = t.cost_model();
        let cur = &task.holding_currency;
        let rate: Vec<Ratio<i128>> = (0..t.len())
            .map(|h| {
                let r = task.to_base[cur[h]];
                Ratio::new(*r.numer() as i128, *r.denom() as i128)
            })
            .collect();
        let fixed_base = (0..t.len()).map(|h| convert_floor(cm.fixed_fee(h), task.to_base[cur[h]])).collect();
        let c_min = (0..t.len())
            .map(|x| {
                if !cm.is_transferable(x) {
                    return cm.trade_rate(x);
                }
                (0..t.len())
                    .filter(|&y| y != x && cm.is_transferable(y) && cur[x] == cur[y])
                    .filter_map(|y| cm.switch_rate(x, y).ok())
                    .fold(cm.trade_rate(x), Bps::min)
            })
            .collect();
        // each action rounds once in its own currency and once into base
        let r_max = rate.iter().copied().max().unwrap_or_else(Ratio::one);
        let slack = (r_max + Ratio::one()) / Ratio::from_integer(2);
        let base = task.is_single_currency().then(|| FeeHeuristic::new(t));
        ForexSpace { task, base, fixed_base, c_min, rate, slack }
    }

    fn bound(&self, s: &ForexState) -> Money {
        let t = &self.task.task;
        let cm = t.cost_model();
        let cur = &self.task.holding_currency;
        let outs: Vec<usize> = (0..s.u.len()).filter(|&x| s.u[x].is_positive()).collect();
        let ins: Vec<usize> = (0..s.v.len()).filter(|&y| s.v[y].is_positive()).collect();
        let fixed: Money = outs.iter().chain(&ins).map(|&h| self.fixed_base[h]).sum();

        let mut exits = Ratio::<i128>::zero();
        for &x in &outs {
            let c = self.c_min[x];
            let var = Ratio::new(
                c.numer() as i128 * s.u[x].0 as i128,
                c.denom() as i128 * crate::money::BPS_PER_UNIT as i128,
            );
            exits += self.rate[x] * (Ratio::from_integer(cm.fixed_fee(x).0 as i128) + var);
        }
        // sells and switch-available clear an outflow, switch-needed an inflow
        exits -= self.slack * Ratio::from_integer((outs.len() + ins.len()) as i128);
        let exits = Money(exits.ceil().to_integer().max(0) as i64);
        let buys: Money = ins
            .iter()
            .filter(|&&y| !cm.is_transferable(y) || !outs.iter().any(|&x| cm.is_transferable(x) && cur[x] == cur[y]))
            .map(|&y| self.fixed_base[y])
            .sum();
        fixed.max(exits + buys)
    }
}

impl SearchSpace for ForexSpace<'_> {
    type State = ForexState;
    type Action = ForexAction;

    fn initial(&self) -> ForexState {
        self.task.initial_state()
    }

    fn is_goal(&self, state: &ForexState) -> bool {
        state.is_goal()
    }

    fn expand(&self, state: &ForexState, emit: &mut dyn FnMut(ForexAction, Money, ForexState)) {
        expand(self.task, state, &mut |a, s| {
            let c = a.cost();
            emit(a, c, s)
        });
    }

    fn h_fee(&self, s: &ForexState) -> Money {
        match &self.base {
            Some(h) => h.h_fee(&State { u: s.u.clone(), v: s.v.clone(), w: s.balances[0] }),
            None => self.bound(s),
        }
    }

    fn h_count(&self, s: &ForexState) -> usize {
        let outs = s.u.iter().filter(|m| m.is_positive()).count();
        let ins = s.v.iter().filter(|m| m.is_positive()).count();
        outs.max(ins)
    }
}

#[derive(Clone, Debug)]
pub struct ForexResult {
    pub plan: Option<Vec<ForexAction>>,
    pub cost: Money,
    pub optimal: bool,
    pub generated_nodes: u64,
    pub first_solution: Option<FirstSolution>,
}

impl ForexResult {
    pub fn length(&self) -> Option<usize> {
        self.plan.as_ref().map(Vec::len)
    }

    pub fn exchanges(&self) -> usize {
        self.plan.iter().flatten().filter(|a| a.is_exchange()).count()
    }
}

/// A* over the multi-currency state model.
pub fn forex_astar(task: &ForexTask, limits: SearchLimits) -> ForexResult {
    let o = astar(&ForexSpace::new(task), limits);
    ForexResult {
        plan: o.actions,
        cost: o.cost,
        optimal: o.optimal,
        generated_nodes: o.generated_nodes,
        first_solution: o.first_solution,
    }
}

/// Replays `plan`, requiring each step to be one of the applicable actions.
/// Returns the final state.
pub fn replay(task: &ForexTask, plan: &[ForexAction]) -> Result<ForexState> {
    let mut s = task.initial_state();
    for (i, step) in plan.iter().enumerate() {
        let mut found = None;
        expand(task, &s, &mut |a, next| {
            if found.is_none() && &a == step {
                found = Some(next);
            }
        });
        s = found.ok_or_else(|| Error::Format(format!("step {} ({step}) is not applicable", i + 1)))?;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::search::astar_fee;
    use crate::task::Holding;

    fn usd_etfs() -> BTreeMap<HoldingId, Currency> {
        ["RE", "BT", "GD"].into_iter().map(|h| (HoldingId::new(h), Currency::new("USD"))).collect()
    }

    fn eur_usd(rate: Rate) -> RateTable {
        RateTable::new().with("EUR", "USD", rate).unwrap()
    }

    #[test]
    fn reciprocal_is_derived() {
        let t = eur_usd(Rate::new(6, 5));
        assert_eq!(t.rate(&"USD".into(), &"EUR".into()).unwrap(), Rate::new(5, 6));
        assert!(t.rate(&"USD".into(), &"GBP".into()).is_err());
    }

    #[test]
    fn inconsistent_explicit_rates_are_rejected() {
        let t = eur_usd(Rate::new(6, 5)).with("USD", "EUR", Rate::new(1, 1)).unwrap();
        assert!(t.check_consistency().is_err());
    }

    #[test]
    fn round_trip_without_fee_loses_at_most_two_units() {
        for (n, d) in [(11, 10), (6, 5), (7, 3), (1, 9), (1234, 1000)] {
            let r = Rate::new(n, d);
            for m in [1, 7, 99, 1000, 12345, 999_999] {
                let back = convert_with(convert_with(Money(m), r), r.recip());
                assert!((back.0 - m).abs() <= 2 + d / n, "{m} at {r}: {}", back.0);
            }
        }
    }

    #[test]
    fn source_for_is_minimal() {
        let r = Rate::new(5, 6);
        for t in [1, 2, 5, 10635, 777] {
            let m = source_for(Money(t), r);
            assert!(convert_with(m, r) >= Money(t));
            assert!(convert_with(Money(m.0 - 1), r) < Money(t));
        }
    }

    #[test]
    fn single_currency_has_no_exchanges_and_matches_base_search() {
        let task = fixtures::model_portfolio();
        let ft = ForexTask::new(
            task.clone(),
            "EUR".into(),
            &BTreeMap::new(),
            &BTreeMap::new(),
            RateTable::new(),
            Bps::from_integer(5),
        )
        .unwrap();
        let mut n = 0;
        exchange_successors(&ft, &ft.initial_state(), &mut |_, _| n += 1);
        assert_eq!(n, 0);
        let fx = forex_astar(&ft, SearchLimits::default());
        let base = astar_fee(&task, SearchLimits::default());
        assert_eq!(Some(fx.cost), base.cost());
        assert_eq!(fx.length(), base.length());
    }

    #[test]
    fn unknown_pair_is_a_domain_error() {
        let task = fixtures::model_portfolio();
        let e =
            ForexTask::new(task, "EUR".into(), &usd_etfs(), &BTreeMap::new(), RateTable::new(), Bps::from_integer(5))
                .unwrap_err();
        assert!(matches!(e, Error::UnknownCurrencyPair { .. }));
    }

    /// The worked example's instruments with USD ETFs and EUR funds, and flows
    /// on a 400.00 EUR grid so that every fee is a whole number of cents.
    fn usd_eur_scenario() -> ForexTask {
        let h = |id: &str, t: bool, fixed: i64, bps: i64| Holding::new(id, t, Money(fixed), Bps::from_integer(bps));
        let task = UpdateTask::builder()
            .name("usd-etfs-eur-funds")
            .holdings([
                h("MM", true, 0, 8),
                h("GB", true, 0, 3),
                h("EQ", true, 0, 6),
                h("EM", true, 0, 2),
                h("RE", false, 100, 4),
                h("BT", false, 50, 2),
                h("GD", false, 250, 9),
            ])
            .outflow("EQ", Money(120_000))
            .outflow("BT", Money(240_000))
            .outflow("GD", Money(80_000))
            .inflow("MM", Money(160_000))
            .inflow("GB", Money(40_000))
            .inflow("EM", Money(80_000))
            .inflow("RE", Money(160_000))
            .build()
            .unwrap();
        ForexTask::from_base_flows(&task, "EUR".into(), &usd_etfs(), eur_usd(Rate::new(5, 4)), Bps::from_integer(5))
            .unwrap()
    }

    #[test]
    fn usd_etfs_and_eur_funds_need_an_exchange() {
        let ft = usd_eur_scenario();
        let t = ft.task();
        assert_eq!(t.outflow_vec()[t.index_of("BT").unwrap()], Money(300_000));
        assert_eq!(t.inflow_vec()[t.index_of("RE").unwrap()], Money(200_000));
        let r = forex_astar(&ft, SearchLimits::default());
        let plan = r.plan.clone().unwrap_or_else(|| panic!("no plan after {} nodes", r.generated_nodes));
        assert!(r.optimal);
        let end = replay(&ft, &plan).unwrap();
        assert!(end.is_goal());
        let exchanges: Vec<&Exchange> = plan
            .iter()
            .filter_map(|a| match a {
                ForexAction::Exchange(e) => Some(e),
                _ => None,
            })
            .collect();
        assert_eq!(exchanges.len(), 1, "{plan:?}");
        let ex = exchanges[0];
        assert_eq!((ex.from.as_str(), ex.to.as_str()), ("USD", "EUR"));
        assert_eq!((ex.amount, ex.received), (Money(200_000), Money(160_000)));
        // both USD sells precede the exchange; EUR buys follow it
        let at = plan.iter().position(ForexAction::is_exchange).unwrap();
        let sells_before =
            plan[..at].iter().filter(|a| matches!(a, ForexAction::Trade(t) if t.kind == ActionKind::Sell)).count();
        assert_eq!(sells_before, 2);
        assert!(plan[at + 1..].iter().any(|a| matches!(a, ForexAction::Trade(t) if t.kind.is_buy())));
        assert_eq!(r.cost, plan.iter().map(ForexAction::cost).sum());
    }

    #[test]
    fn exchange_conserves_base_value_up_to_rounding() {
        let task = fixtures::model_portfolio();
        let ft = ForexTask::from_base_flows(
            &task,
            "EUR".into(),
            &usd_etfs(),
            eur_usd(Rate::new(11, 10)),
            Bps::from_integer(5),
        )
        .unwrap();
        let mut s = ft.initial_state();
        let usd = ft.currencies().iter().position(|c| c.as_str() == "USD").unwrap();
        s.balances[usd] = Money(29_942);
        let before = ft.base_value(&s.balances);
        let mut seen = 0;
        exchange_successors(&ft, &s, &mut |a, next| {
            seen += 1;
            let after = ft.base_value(&next.balances);
            assert!((before.0 - after.0).abs() <= 2, "{a}: {before} -> {after}");
            assert!(a.cost().is_positive());
        });
        assert!(seen > 0);
    }
}
