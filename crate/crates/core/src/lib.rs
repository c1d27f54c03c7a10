//! Laboratory for the three-player GHZ game: exact classical and quantum
//! values, loophole adversaries, Monte Carlo play, and causal audits of
//! experiment timelines.

pub mod cli;
pub mod error;
pub mod game;
pub mod harness;
pub mod lhv;
pub mod loopholes;
pub mod lp;
pub mod quantum;
pub mod rational;
pub mod spacetime;

pub use error::{Error, Result};
