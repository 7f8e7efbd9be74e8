use thiserror::Error;

use crate::money::Money;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid task: `{field}`: {reason}")]
    InvalidTask { field: String, reason: String },

    #[error("unknown holding `{0}`")]
    UnknownHolding(String),

    #[error("switch between `{from}` and `{to}` requires both holdings to be transferable")]
    NonTransferableSwitch { from: String, to: String },

    #[error("infeasible task: outflows {outflows} plus initial cash {cash} cannot fund inflows {inflows}")]
    Infeasible { outflows: Money, cash: Money, inflows: Money },

    #[error("exhaustive oracle refuses tasks with {flows} flows (limit {limit})")]
    OracleGuard { flows: usize, limit: usize },

    #[error("invalid generator config: `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("no exchange rate between `{from}` and `{to}`")]
    UnknownCurrencyPair { from: String, to: String },

    #[error("transport instance: {0}")]
    Transport(String),

    #[error("{0}")]
    Format(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidTask { field: field.into(), reason: reason.into() }
    }
}
