//! Independent oracles shared by the integration tests and the acceptance
//! harness in the CLI crate.
#![allow(dead_code)]

pub mod gradient_check;
pub mod influence_check;
pub mod metric_oracle;
pub mod svd_checks;
