//! Oracles and checkers shared by the property tests and the acceptance run.
#![allow(dead_code)]

pub mod fsm;
pub mod fuzz;
pub mod gradient;
pub mod oracle;
