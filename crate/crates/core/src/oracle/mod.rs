//! Brute-force references for small instances.

mod exhaustive;
mod quadrature;

pub use exhaustive::{
    exhaustive_ber, exhaustive_path_probability, OracleConfig, OracleReport, DEFAULT_BUDGET, MAX_ORACLE_BRANCHES,
};
pub use quadrature::{integrate, marcum_q1_quadrature, scaled_i0};
