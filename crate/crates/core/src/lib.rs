//! Finite-time analysis toolkit for Q-learning with decaying exploration:
//! MDP solving, Markov-chain analysis, exploration policies, a generic
//! Markovian stochastic-approximation engine, Q-learning runs and regret.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmarks;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod markov;
pub mod mdp;
pub mod policy;
pub mod qlearn;
pub mod regret;
pub mod rng;
pub mod sa;
pub mod schedule;

pub use error::{Error, Result};
pub use mdp::{Mdp, QTable, RawMdp};
pub use policy::ControlValue;
pub use schedule::Schedule;
