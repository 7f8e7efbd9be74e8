//! Seeded random update tasks for benchmarking.
//!
//! A generated portfolio has `n` holdings, `⌊ratio·n⌋` of them transferable
//! funds without fixed fees and the rest exchange-traded with a fixed fee drawn
//! from a short list. Every holding has a flow. Flows are built from transfers
//! of one to three granules between a random outflow side and inflow side, so
//! they share a common factor and some flows split across several
//! counterparts.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::money::{Bps, Money};
use crate::task::{derive_flows, Holding, HoldingId, SwitchCostRule, UpdateTask};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub n_holdings: usize,
    /// Share of transferable funds as `(numerator, denominator)`.
    pub transferable_ratio: (u32, u32),
    pub portfolio_value: Money,
    pub flow_granularity: Money,
    pub etf_fixed_fee_choices: Vec<Money>,
    pub variable_fee_bps_range: (i64, i64),
    pub switch_rule: SwitchCostRule,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_holdings: 7,
            transferable_ratio: (7, 10),
            portfolio_value: Money(1_000_000),
            flow_granularity: Money(10_000),
            etf_fixed_fee_choices: vec![Money(50), Money(100), Money(250)],
            variable_fee_bps_range: (1, 10),
            switch_rule: SwitchCostRule::Max,
            seed: 0,
        }
    }
}

/// Largest transfer, in granules.
const MAX_GRANULES: i64 = 3;

impl GeneratorConfig {
    pub fn with_size(n_holdings: usize, seed: u64) -> Self {
        GeneratorConfig { n_holdings, seed, ..Default::default() }
    }

    pub fn transferable_count(&self) -> usize {
        let (p, q) = self.transferable_ratio;
        self.n_holdings * p as usize / q as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: String| Err(Error::InvalidConfig { field: field.into(), reason });
        if self.n_holdings < 2 {
            return bad("n_holdings", format!("need at least 2 holdings, got {}", self.n_holdings));
        }
        let (p, q) = self.transferable_ratio;
        if q == 0 || p == 0 || p >= q {
            return bad("transferable_ratio", format!("must lie strictly between 0 and 1, got {p}/{q}"));
        }
        if !self.flow_granularity.is_positive() || !self.portfolio_value.is_positive() {
            return bad("flow_granularity", "granularity and portfolio value must be positive".into());
        }
        if self.portfolio_value.0 % self.flow_granularity.0 != 0 {
            return bad(
                "flow_granularity",
                format!("{} does not divide the portfolio value {}", self.flow_granularity, self.portfolio_value),
            );
        }
        let (lo, hi) = self.variable_fee_bps_range;
        if lo < 0 || lo > hi {
            return bad("variable_fee_bps_range", format!("invalid range {lo}..={hi}"));
        }
        if self.transferable_count() < self.n_holdings && self.etf_fixed_fee_choices.is_empty() {
            return bad("etf_fixed_fee_choices", "needed when the portfolio has exchange-traded holdings".into());
        }
        if self.etf_fixed_fee_choices.iter().any(|f| *f < Money::ZERO) {
            return bad("etf_fixed_fee_choices", "fees must be non-negative".into());
        }
        let worst = MAX_GRANULES * (self.n_holdings as i64 + 1) * self.flow_granularity.0;
        if worst > self.portfolio_value.0 {
            return bad(
                "flow_granularity",
                format!("flows of up to {} do not fit a portfolio of {}", Money(worst), self.portfolio_value),
            );
        }
        Ok(())
    }
}

/// A task together with the portfolios it was derived from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratedTask {
    pub task: UpdateTask,
    pub current: BTreeMap<HoldingId, Money>,
    pub target: BTreeMap<HoldingId, Money>,
}

pub fn generate_task(config: &GeneratorConfig) -> Result<UpdateTask> {
    generate_portfolios(config).map(|g| g.task)
}

pub fn generate_portfolios(config: &GeneratorConfig) -> Result<GeneratedTask> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.n_holdings;
    let n_funds = config.transferable_count();

    let (lo, hi) = config.variable_fee_bps_range;
    let mut holdings = Vec::with_capacity(n);
    for k in 0..n {
        let bps = Bps::from_integer(rng.gen_range(lo..=hi));
        let h = if k < n_funds {
            Holding::new(format!("F{}", k + 1), true, Money::ZERO, bps).with_name(format!("Fund {}", k + 1))
        } else {
            let fee = *config.etf_fixed_fee_choices.choose(&mut rng).expect("validated non-empty");
            Holding::new(format!("E{}", k - n_funds + 1), false, fee, bps).with_name(format!("ETF {}", k - n_funds + 1))
        };
        holdings.push(h);
    }

    // Random split into outflow and inflow sides, both non-empty.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_out = rng.gen_range(1..n);
    let (outs, ins) = order.split_at(n_out);

    let g = config.flow_granularity;
    let mut flow = vec![Money::ZERO; n];
    let mut add_transfer = |x: usize, y: usize, rng: &mut ChaCha8Rng| {
        let amount = Money(g.0 * rng.gen_range(1..=MAX_GRANULES));
        flow[x] += amount;
        flow[y] += amount;
    };
    for i in 0..outs.len().max(ins.len()) {
        add_transfer(outs[i % outs.len()], ins[i % ins.len()], &mut rng);
    }
    // With equal sides the pairing is a perfect matching; add a crossing
    // transfer so at least one flow is split.
    if outs.len() == ins.len() && n >= 4 {
        add_transfer(outs[0], ins[1], &mut rng);
    }

    // Current allocation: each outflow fits inside its holding, the rest of
    // the value is spread by uniform weights.
    let total_out: Money = outs.iter().map(|&x| flow[x]).sum();
    let rest = config.portfolio_value - total_out;
    let weights: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + f64::EPSILON).collect();
    let wsum: f64 = weights.iter().sum();
    let mut current: Vec<Money> = (0..n).map(|k| Money((rest.0 as f64 * weights[k] / wsum).floor() as i64)).collect();
    let spread: Money = current.iter().sum();
    current[n - 1] += rest - spread;
    for &x in outs {
        current[x] += flow[x];
    }
    let mut target = current.clone();
    for &x in outs {
        target[x] -= flow[x];
    }
    for &y in ins {
        target[y] += flow[y];
    }

    let ids: Vec<HoldingId> = holdings.iter().map(|h| h.id.clone()).collect();
    let current: BTreeMap<HoldingId, Money> = ids.iter().cloned().zip(current).collect();
    let target: BTreeMap<HoldingId, Money> = ids.iter().cloned().zip(target).collect();
    let (outflows, inflows) = derive_flows(&current, &target);

    let task = UpdateTask::builder()
        .name(format!("gen-n{}-s{}", n, config.seed))
        .holdings(holdings)
        .switch_rule(config.switch_rule)
        .flows(outflows, inflows)
        .build()?;
    Ok(GeneratedTask { task, current, target })
}

/// One task of a benchmark suite.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuiteTask {
    pub id: String,
    pub size: usize,
    pub seed: u64,
    pub task: UpdateTask,
}

/// Seed of the `k`-th task of size `size`, mixed with splitmix64.
pub fn derive_seed(base_seed: u64, size: usize, k: usize) -> u64 {
    let mut z = base_seed ^ ((size as u64) << 32 | k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `per_size` tasks for every size, named `n{size}-{k:03}`.
pub fn generate_suite(sizes: &[usize], per_size: usize, base_seed: u64) -> Result<Vec<SuiteTask>> {
    generate_suite_with(&GeneratorConfig::default(), sizes, per_size, base_seed)
}

/// Like [`generate_suite`], with every other generator setting taken from `base`.
pub fn generate_suite_with(
    base: &GeneratorConfig,
    sizes: &[usize],
    per_size: usize,
    base_seed: u64,
) -> Result<Vec<SuiteTask>> {
    if sizes.is_empty() {
        return Err(Error::InvalidConfig { field: "sizes".into(), reason: "at least one size is required".into() });
    }
    let mut suite = Vec::with_capacity(sizes.len() * per_size);
    for &size in sizes {
        for k in 0..per_size {
            let seed = derive_seed(base_seed, size, k);
            let cfg = GeneratorConfig { n_holdings: size, seed, ..base.clone() };
            let mut task = generate_task(&cfg)?;
            let id = format!("n{size}-{k:03}");
            task = task.to_builder().name(id.clone()).build()?;
            suite.push(SuiteTask { id, size, seed, task });
        }
    }
    Ok(suite)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_task() {
        let cfg = GeneratorConfig::with_size(9, 42);
        assert_eq!(generate_portfolios(&cfg).unwrap(), generate_portfolios(&cfg).unwrap());
    }

    #[test]
    fn seventy_percent_transferable() {
        let t = generate_task(&GeneratorConfig::with_size(10, 3)).unwrap();
        assert_eq!(t.holdings().iter().filter(|h| h.transferable).count(), 7);
    }

    #[test]
    fn flows_balance_on_granules() {
        for seed in 0..50 {
            let cfg = GeneratorConfig::with_size(4 + (seed as usize % 9), seed);
            let t = generate_task(&cfg).unwrap();
            assert_eq!(t.total_outflow(), t.total_inflow());
            for (_, a) in t.outflows().chain(t.inflows()) {
                assert_eq!(a.0 % cfg.flow_granularity.0, 0);
            }
            assert_eq!(t.flow_count(), cfg.n_holdings);
        }
    }

    #[test]
    fn fees_follow_conventions() {
        let cfg = GeneratorConfig::with_size(12, 5);
        let t = generate_task(&cfg).unwrap();
        for h in t.holdings() {
            if h.transferable {
                assert_eq!(h.fixed_fee, Money::ZERO);
            } else {
                assert!(cfg.etf_fixed_fee_choices.contains(&h.fixed_fee));
            }
            assert!(h.variable_fee_bps >= Bps::from_integer(1) && h.variable_fee_bps <= Bps::from_integer(10));
        }
    }

    #[test]
    fn config_errors_name_the_field() {
        let e = generate_task(&GeneratorConfig { n_holdings: 1, ..Default::default() }).unwrap_err();
        assert!(e.to_string().contains("n_holdings"));
        let e = generate_task(&GeneratorConfig { flow_granularity: Money(3), ..Default::default() }).unwrap_err();
        assert!(e.to_string().contains("flow_granularity"));
        let e = generate_task(&GeneratorConfig { transferable_ratio: (1, 1), ..Default::default() }).unwrap_err();
        assert!(e.to_string().contains("transferable_ratio"));
    }

    #[test]
    fn suite_shape() {
        let s = generate_suite(&[4, 5, 6, 7, 8], 20, 1).unwrap();
        assert_eq!(s.len(), 100);
        assert_eq!(s[0].id, "n4-000");
        assert!(generate_suite(&[4], 0, 1).unwrap().is_empty());
        assert!(generate_suite(&[], 3, 1).is_err());
    }

    #[test]
    fn current_portfolio_covers_outflows() {
        let g = generate_portfolios(&GeneratorConfig::with_size(8, 11)).unwrap();
        let total: Money = g.current.values().copied().sum();
        assert_eq!(total, Money(1_000_000));
        assert_eq!(g.target.values().copied().sum::<Money>(), total);
        assert!(g.target.values().all(|m| *m >= Money::ZERO));
    }
}
