//! Domain primitives shared by every other module: the per-player action
//! space, mixed strategies and seeded random streams.

mod action_space;
mod rng;
mod strategy;

pub use action_space::ActionSpace;
pub use rng::{Purpose, RngStream, StreamId, ENVIRONMENT_OWNER};
pub use strategy::{project_to_simplex, sample_from, MixedStrategy, PROB_TOLERANCE};

pub(crate) use strategy::renormalize_checked;
