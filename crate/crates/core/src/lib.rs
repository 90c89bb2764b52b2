//! Decentralized channel and power selection for a multi-user wireless
//! network, learned by bandit no-regret strategies.

pub mod common;
pub mod env;
pub mod equilibrium;
pub mod error;
pub mod harness;
pub mod regret;
pub mod strategies;
pub mod swap;
pub mod verify;

pub use common::{ActionSpace, MixedStrategy, Purpose, RngStream, StreamId};
pub use error::{Error, Result};
