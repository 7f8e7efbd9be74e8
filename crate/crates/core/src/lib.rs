//! Minimum-cost transaction planning for portfolio updates.
//!
//! A task lists holdings with their fees and the amount each one must shed
//! (outflow) or gain (inflow). A plan is a sequence of sells, buys and in-kind
//! switches that settles every flow. The crate finds cheap plans by heuristic
//! search ([`search`]) and by a transportation relaxation ([`lp`]), generates
//! random benchmark tasks ([`probgen`]), exports tasks to a temporal planning
//! language ([`pddl`]) and extends the model to several currencies ([`forex`]).

pub mod error;
pub mod fixtures;
pub mod forex;
pub mod format;
pub mod lp;
pub mod money;
pub mod pddl;
pub mod plan;
pub mod probgen;
pub mod search;
pub mod statespace;
pub mod task;

pub use error::{Error, Result};
pub use money::{Bps, Money};
pub use plan::{validate_plan, Action, Plan, ValidationReport, Violation};
pub use search::{astar_fee, dfbnb, exhaustive_oracle, naive_plan, SearchLimits, SearchResult};
pub use statespace::State;
pub use task::{
    derive_flows, price_action, ActionKind, CostModel, Holding, HoldingId, SwitchCostRule, TaskBuilder, UpdateTask,
};
