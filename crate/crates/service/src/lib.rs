//! Command-line tools and the live service around `gestibot-core`.

pub mod cli;
pub mod config;
pub mod envelope;
pub mod replay;
pub mod serve;
