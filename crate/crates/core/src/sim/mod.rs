//! Monte-Carlo simulation of the embedded polling chain and an exact
//! truncated-chain oracle.

mod engine;
mod functional;
pub mod laws;
mod oracle;

pub use engine::{
    simulate, Estimate, InstabilityReport, PooledEstimate, ReplicationResult, SimConfig, SimulationEstimate,
    MIN_HORIZON,
};
pub use functional::{functional_residual, ResidualPoint, BOOTSTRAP_SAMPLES};
pub use laws::{BatchLaw, StationLaws, TravelChoice, TravelLaw};
pub use oracle::{truncated_chain_oracle, truncated_chain_oracle_with, OracleResult};
