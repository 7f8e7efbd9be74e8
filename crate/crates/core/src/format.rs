//! TOML file formats: problem files, plan files and suite manifests.
//!
//! Money is written in major units as a decimal string (`"109.30"`); integers
//! are read as whole major units. Rates are basis points written as integers,
//! decimals or `p/q` strings. The full reference is `docs/FORMAT.md`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::forex::{Currency, ForexTask, RateTable};
use crate::money::{parse_ratio, Bps, Money};
use crate::plan::{Action, Plan};
use crate::probgen::GeneratorConfig;
use crate::task::{derive_flows, ActionKind, Holding, HoldingId, SwitchCostRule, UpdateTask};

/// A money amount as it appears in files.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Amount(pub Money);

/// Parses `"109.30"`, `"-5"` or `"0.5"` into minor units. At most two decimals.
pub fn parse_money(s: &str) -> Option<Money> {
    let t = s.trim();
    let (negative, digits) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if int.is_empty()
        || !int.bytes().all(|b| b.is_ascii_digit())
        || frac.len() > 2
        || !frac.bytes().all(|b| b.is_ascii_digit())
    {
        return None;
    }
    if digits.contains('.') && frac.is_empty() {
        return None;
    }
    let major: i64 = int.parse().ok()?;
    let minor: i64 = format!("{frac:0<2}").parse().ok()?;
    let v = major.checked_mul(100)?.checked_add(minor)?;
    Some(Money(if negative { -v } else { v }))
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl FromStr for Amount {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_money(s)
            .map(Amount)
            .ok_or_else(|| Error::Format(format!("`{s}` is not an amount with at most two decimals")))
    }
}

impl Serialize for Amount {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

impl<'de> Deserialize<'de> for Amount {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(i64),
            Text(String),
            Float(f64),
        }
        match Repr::deserialize(d)? {
            Repr::Int(i) => i
                .checked_mul(100)
                .map(|m| Amount(Money(m)))
                .ok_or_else(|| serde::de::Error::custom("amount out of range")),
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Repr::Float(f) => Err(serde::de::Error::custom(format!(
                "amount {f} must be written as a string, e.g. \"{f:.2}\", to stay exact"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoldingRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub transferable: bool,
    #[serde(default)]
    pub fixed_fee: Amount,
    #[serde(default)]
    pub variable_fee_bps: Bps,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowsRecord {
    #[serde(default)]
    pub outflows: BTreeMap<String, Amount>,
    #[serde(default)]
    pub inflows: BTreeMap<String, Amount>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortfolioRecord {
    pub current: BTreeMap<String, Amount>,
    pub target: BTreeMap<String, Amount>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchCostRecord {
    pub from: String,
    pub to: String,
    pub bps: Bps,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateRecord {
    pub from: String,
    pub to: String,
    /// Units of `to` per unit of `from`, as `"5/4"` or `"1.25"`.
    pub rate: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForexRecord {
    pub base: String,
    #[serde(default)]
    pub fx_fee_bps: Bps,
    /// Holding id → currency. Unlisted holdings are in `base`.
    #[serde(default)]
    pub currencies: BTreeMap<String, String>,
    #[serde(default)]
    pub balances: BTreeMap<String, Amount>,
    #[serde(default)]
    pub rates: Vec<RateRecord>,
}

/// A problem file. Exactly one of `flows` or `portfolio` must be present.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub initial_cash: Amount,
    #[serde(default)]
    pub switch_cost_rule: SwitchCostRule,
    #[serde(default)]
    pub holdings: Vec<HoldingRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flows: Option<FlowsRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub portfolio: Option<PortfolioRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub switch_costs: Vec<SwitchCostRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forex: Option<ForexRecord>,
}

fn toml_error(e: impl fmt::Display) -> Error {
    Error::Format(e.to_string().trim_end().to_string())
}

fn to_money_map(m: &BTreeMap<String, Amount>, field: &str) -> Result<BTreeMap<HoldingId, Money>> {
    m.iter()
        .map(|(k, a)| {
            if a.0 < Money::ZERO {
                return Err(Error::invalid(format!("{field}.{k}"), "must be non-negative"));
            }
            Ok((HoldingId::new(k), a.0))
        })
        .collect()
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(toml_error)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(toml_error)
    }

    /// The problem file of `task`, with explicit flows.
    pub fn from_task(task: &UpdateTask) -> Self {
        let cm = task.cost_model();
        let amounts = |m: BTreeMap<HoldingId, Money>| m.into_iter().map(|(k, v)| (k.to_string(), Amount(v))).collect();
        ProblemFile {
            name: task.name().to_string(),
            initial_cash: Amount(task.initial_cash()),
            switch_cost_rule: cm.rule(),
            holdings: task
                .holdings()
                .iter()
                .map(|h| HoldingRecord {
                    id: h.id.to_string(),
                    name: (h.name != h.id.as_str()).then(|| h.name.clone()),
                    transferable: h.transferable,
                    fixed_fee: Amount(h.fixed_fee),
                    variable_fee_bps: h.variable_fee_bps,
                })
                .collect(),
            flows: Some(FlowsRecord { outflows: amounts(task.outflow_map()), inflows: amounts(task.inflow_map()) }),
            portfolio: None,
            switch_costs: cm
                .overrides()
                .map(|(x, y, bps)| SwitchCostRecord { from: task.id(x).to_string(), to: task.id(y).to_string(), bps })
                .collect(),
            forex: None,
        }
    }

    /// Adds the multi-currency section of `ft` (its flows replace the task's).
    pub fn from_forex(ft: &ForexTask) -> Self {
        let mut f = ProblemFile::from_task(ft.task());
        let t = ft.task();
        f.forex = Some(ForexRecord {
            base: ft.base().to_string(),
            fx_fee_bps: ft.fx_fee(),
            currencies: (0..t.len())
                .filter(|&h| ft.currency_of(h) != ft.base())
                .map(|h| (t.id(h).to_string(), ft.currency_of(h).to_string()))
                .collect(),
            balances: ft
                .initial_balances()
                .into_iter()
                .filter(|(c, m)| c != ft.base() && m.is_positive())
                .map(|(c, m)| (c.to_string(), Amount(m)))
                .collect(),
            rates: ft
                .rates()
                .explicit()
                .map(|(a, b, r)| RateRecord { from: a.to_string(), to: b.to_string(), rate: r.to_string() })
                .collect(),
        });
        f
    }

    /// The single-currency task. Files with a `[forex]` section state flows in
    /// each holding's currency; read those with [`ProblemFile::to_forex`].
    pub fn to_task(&self) -> Result<UpdateTask> {
        if self.forex.is_some() {
            return Err(Error::invalid("forex", "multi-currency problem; flows are not in one currency"));
        }
        self.build_task(true)
    }

    fn build_task(&self, check_balance: bool) -> Result<UpdateTask> {
        let (outflows, inflows) = match (&self.flows, &self.portfolio) {
            (Some(f), None) => {
                (to_money_map(&f.outflows, "flows.outflows")?, to_money_map(&f.inflows, "flows.inflows")?)
            }
            (None, Some(p)) => derive_flows(
                &to_money_map(&p.current, "portfolio.current")?,
                &to_money_map(&p.target, "portfolio.target")?,
            ),
            (Some(_), Some(_)) => return Err(Error::invalid("flows", "give either [flows] or [portfolio], not both")),
            (None, None) => (BTreeMap::new(), BTreeMap::new()),
        };
        let mut b = UpdateTask::builder()
            .name(if self.name.is_empty() { "task" } else { &self.name })
            .initial_cash(self.initial_cash.0)
            .switch_rule(self.switch_cost_rule);
        for (k, h) in self.holdings.iter().enumerate() {
            if h.id.trim().is_empty() {
                return Err(Error::invalid(format!("holdings[{k}].id"), "must not be empty"));
            }
            if h.fixed_fee.0 < Money::ZERO {
                return Err(Error::invalid(format!("holdings.{}.fixed_fee", h.id), "must be non-negative"));
            }
            let mut holding = Holding::new(h.id.as_str(), h.transferable, h.fixed_fee.0, h.variable_fee_bps);
            if let Some(n) = &h.name {
                holding = holding.with_name(n.clone());
            }
            b = b.holding(holding);
        }
        b = b.flows(outflows, inflows);
        for s in &self.switch_costs {
            b = b.switch_override(s.from.as_str(), s.to.as_str(), s.bps);
        }
        if !check_balance {
            b = b.skip_balance_check();
        }
        b.build()
    }

    /// The multi-currency task, when the file has a `[forex]` section.
    pub fn to_forex(&self) -> Result<Option<ForexTask>> {
        let Some(fx) = &self.forex else { return Ok(None) };
        let task = self.build_task(false)?;
        let mut rates = RateTable::new();
        for r in &fx.rates {
            let rate = parse_ratio(&r.rate)
                .map_err(|e| Error::invalid(format!("forex.rates.{}/{}", r.from, r.to), e.to_string()))?;
            rates.set(r.from.as_str(), r.to.as_str(), rate)?;
        }
        let currency_of = fx.currencies.iter().map(|(h, c)| (HoldingId::new(h), Currency::new(c.as_str()))).collect();
        let balances = fx.balances.iter().map(|(c, a)| (Currency::new(c.as_str()), a.0)).collect();
        ForexTask::new(task, Currency::new(fx.base.as_str()), &currency_of, &balances, rates, fx.fx_fee_bps).map(Some)
    }
}

/// Reads a problem file into a task.
pub fn parse_problem(text: &str) -> Result<UpdateTask> {
    ProblemFile::parse(text)?.to_task()
}

/// Writes a task as a problem file with explicit flows.
pub fn write_problem(task: &UpdateTask) -> Result<String> {
    ProblemFile::from_task(task).to_toml()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRecord {
    pub kind: ActionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<String>,
    pub amount: Amount,
    pub cost: Amount,
}

/// A plan file: the ordered steps with their priced costs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    #[serde(default)]
    pub task: String,
    #[serde(default)]
    pub algorithm: String,
    pub total_cost: Amount,
    pub length: usize,
    #[serde(default)]
    pub optimal: bool,
    #[serde(default)]
    pub steps: Vec<StepRecord>,
}

impl PlanFile {
    pub fn new(task: &str, algorithm: &str, plan: &Plan, optimal: bool) -> Self {
        PlanFile {
            task: task.to_string(),
            algorithm: algorithm.to_string(),
            total_cost: Amount(plan.total_cost()),
            length: plan.len(),
            optimal,
            steps: plan
                .actions
                .iter()
                .map(|a| StepRecord {
                    kind: a.kind,
                    from: a.from.as_ref().map(|h| h.to_string()),
                    to: a.to.as_ref().map(|h| h.to_string()),
                    amount: Amount(a.amount),
                    cost: Amount(a.cost),
                })
                .collect(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(toml_error)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(toml_error)
    }

    /// The plan, checking that the recorded totals match the steps.
    pub fn to_plan(&self) -> Result<Plan> {
        let actions: Vec<Action> = self
            .steps
            .iter()
            .map(|s| Action {
                kind: s.kind,
                from: s.from.as_deref().map(HoldingId::new),
                to: s.to.as_deref().map(HoldingId::new),
                amount: s.amount.0,
                cost: s.cost.0,
            })
            .collect();
        let plan = Plan::new(actions);
        if plan.len() != self.length {
            return Err(Error::invalid("length", format!("{} steps listed, length says {}", plan.len(), self.length)));
        }
        if plan.total_cost() != self.total_cost.0 {
            return Err(Error::invalid(
                "total_cost",
                format!("steps sum to {}, total_cost says {}", plan.total_cost(), self.total_cost),
            ));
        }
        Ok(plan)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub size: usize,
    pub seed: u64,
    /// Problem file path, relative to the manifest.
    pub file: String,
}

/// A generated suite: the generator settings and one entry per task.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteManifest {
    pub base_seed: u64,
    pub sizes: Vec<usize>,
    pub per_size: usize,
    pub config: GeneratorConfig,
    #[serde(default)]
    pub tasks: Vec<ManifestEntry>,
}

impl SuiteManifest {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(toml_error)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(toml_error)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn money_strings() {
        assert_eq!(parse_money("109.30"), Some(Money(10930)));
        assert_eq!(parse_money("0.5"), Some(Money(50)));
        assert_eq!(parse_money("-2"), Some(Money(-200)));
        for bad in ["", "1.", ".5", "1.234", "1,00", "abc", "--1"] {
            assert_eq!(parse_money(bad), None, "{bad}");
        }
    }

    #[test]
    fn problem_round_trip() {
        let task = fixtures::model_portfolio();
        let text = write_problem(&task).unwrap();
        assert!(text.contains("EQ = \"109.30\""), "{text}");
        let back = parse_problem(&text).unwrap();
        assert_eq!(back, task);
    }

    #[test]
    fn portfolio_section_derives_flows() {
        let text = r#"
            name = "two"
            [[holdings]]
            id = "A"
            transferable = true
            variable_fee_bps = 5
            [[holdings]]
            id = "B"
            transferable = true
            variable_fee_bps = "2.5"
            [portfolio]
            current = { A = "60.00", B = 40 }
            target = { A = "50.00", B = "50.00" }
        "#;
        let task = parse_problem(text).unwrap();
        assert_eq!(task.outflow_map(), BTreeMap::from([(HoldingId::new("A"), Money(1000))]));
        assert_eq!(task.cost_model().trade_rate(1), Bps::new(5, 2));
    }

    #[test]
    fn errors_name_the_field() {
        let missing_id = "[[holdings]]\ntransferable = true\n";
        assert!(parse_problem(missing_id).unwrap_err().to_string().contains("id"));
        let float = "[[holdings]]\nid = \"A\"\nfixed_fee = 1.5\n";
        assert!(parse_problem(float).unwrap_err().to_string().contains("fixed_fee"));
        let unknown = "[[holdings]]\nid = \"A\"\ncolour = 1\n";
        assert!(parse_problem(unknown).unwrap_err().to_string().contains("colour"));
        let neg = "[[holdings]]\nid = \"A\"\n[flows]\noutflows = { A = \"-1\" }\n";
        assert!(parse_problem(neg).unwrap_err().to_string().contains("flows.outflows.A"));
    }

    #[test]
    fn plan_file_round_trip() {
        let task = fixtures::model_portfolio();
        let plan = fixtures::model_portfolio_plan(&task);
        let file = PlanFile::new(task.name(), "astar", &plan, true);
        let back = PlanFile::parse(&file.to_toml().unwrap()).unwrap();
        assert_eq!(back.to_plan().unwrap(), plan);
    }

    #[test]
    fn plan_file_totals_are_checked() {
        let task = fixtures::model_portfolio();
        let mut file = PlanFile::new(task.name(), "astar", &fixtures::model_portfolio_plan(&task), true);
        file.total_cost = Amount(Money(1));
        assert!(file.to_plan().is_err());
    }

    #[test]
    fn forex_section_round_trip() {
        let text = r#"
            name = "fx"
            [[holdings]]
            id = "F"
            transferable = true
            variable_fee_bps = 3
            [[holdings]]
            id = "E"
            fixed_fee = "1.00"
            variable_fee_bps = 4
            [flows]
            outflows = { F = "100.00" }
            inflows = { E = "125.00" }
            [forex]
            base = "EUR"
            fx_fee_bps = 5
            currencies = { E = "USD" }
            rates = [{ from = "EUR", to = "USD", rate = "5/4" }]
        "#;
        let f = ProblemFile::parse(text).unwrap();
        let ft = f.to_forex().unwrap().unwrap();
        assert_eq!(ft.currency_of(1).as_str(), "USD");
        let again = ProblemFile::parse(&ProblemFile::from_forex(&ft).to_toml().unwrap()).unwrap();
        assert_eq!(again.forex, f.forex);
    }

    #[test]
    fn manifest_round_trip() {
        let m = SuiteManifest {
            base_seed: 7,
            sizes: vec![4, 5],
            per_size: 1,
            config: GeneratorConfig::default(),
            tasks: vec![ManifestEntry { id: "n4-000".into(), size: 4, seed: 1, file: "n4-000.toml".into() }],
        };
        assert_eq!(SuiteManifest::parse(&m.to_toml().unwrap()).unwrap(), m);
    }
}
