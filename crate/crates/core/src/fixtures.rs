//! The seven-holding model portfolio used throughout the docs and tests.
//!
//! A 100k account with four transferable mutual funds and three exchange-traded
//! instruments. Fees follow the generator conventions: funds carry no fixed fee,
//! exchange-traded instruments pay a fixed commission, every holding has an
//! integer variable fee between 1 and 10 bps, and switches pay the dearer leg.

use crate::money::{Bps, Money};
use crate::plan::{Action, Plan};
use crate::task::{ActionKind, Holding, HoldingId, SwitchCostRule, UpdateTask};

/// `(id, name, transferable, fixed fee, variable bps, outflow, inflow)`
///
/// The bps values are chosen so that the seven-step plan is the unique
/// lexicographic optimum; with per-action rounding some fee choices let a
/// split buy undercut it by a cent.
pub const MODEL_PORTFOLIO: [(&str, &str, bool, i64, i64, i64, i64); 7] = [
    ("MM", "Money Market Fund", true, 0, 8, 0, 12690),
    ("GB", "Europe Gov. Bonds Fund", true, 0, 3, 0, 2790),
    ("EQ", "Global Equities Fund", true, 0, 6, 10930, 0),
    ("EM", "Emerging Market Fund", true, 0, 2, 0, 6085),
    ("RE", "European REITs ETF", false, 100, 4, 0, 16585),
    ("BT", "Biotech ETF", false, 50, 2, 23110, 0),
    ("GD", "Gold (ETC)", false, 250, 9, 4110, 0),
];

pub fn model_portfolio() -> UpdateTask {
    let mut b = UpdateTask::builder().name("model-portfolio").switch_rule(SwitchCostRule::Max);
    for (id, name, transferable, fixed, bps, out, inflow) in MODEL_PORTFOLIO {
        b = b.holding(Holding::new(id, transferable, Money(fixed), Bps::from_integer(bps)).with_name(name));
        if out > 0 {
            b = b.outflow(id, Money(out));
        }
        if inflow > 0 {
            b = b.inflow(id, Money(inflow));
        }
    }
    b.build().expect("model portfolio is valid")
}

/// The seven-step reference plan: switch EQ into MM, sell the two outflowing
/// ETFs, then buy what each inflow still needs.
pub fn model_portfolio_plan(task: &UpdateTask) -> Plan {
    let steps: [(ActionKind, Option<&str>, Option<&str>, i64); 7] = [
        (ActionKind::SwitchAvailable, Some("EQ"), Some("MM"), 10930),
        (ActionKind::Sell, Some("BT"), None, 23110),
        (ActionKind::Sell, Some("GD"), None, 4110),
        (ActionKind::BuyNeeded, None, Some("RE"), 16585),
        (ActionKind::BuyNeeded, None, Some("EM"), 6085),
        (ActionKind::BuyNeeded, None, Some("GB"), 2790),
        (ActionKind::BuyNeeded, None, Some("MM"), 1760),
    ];
    Plan::new(
        steps
            .into_iter()
            .map(|(kind, from, to, amount)| {
                let from = from.map(HoldingId::new);
                let to = to.map(HoldingId::new);
                let cost = task.price_action(kind, from.as_ref(), to.as_ref(), Money(amount)).expect("priced");
                Action { kind, from, to, amount: Money(amount), cost }
            })
            .collect(),
    )
}
