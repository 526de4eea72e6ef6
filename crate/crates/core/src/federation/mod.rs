//! Oracle layer between optimizers and objectives.

mod oracle;
mod problem;

pub use oracle::{grad_query, sample_clients, value_query, Comm, Counters, Env, OracleConfig, QueryEvent, QueryLog};
pub use problem::{Family, FederatedProblem};
