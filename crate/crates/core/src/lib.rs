//! Uncertainty-aware reinforcement learning for tactical driving decisions.
//!
//! The crate implements four value-based agents over a shared small network
//! approximator:
//!
//! - **DQN** — plain double-DQN baseline,
//! - **IQN** — implicit quantile networks (distribution over returns, CVaR
//!   action selection, aleatoric uncertainty),
//! - **RPF** — bootstrapped ensemble with randomized prior functions
//!   (epistemic uncertainty),
//! - **EQN** — ensemble quantile networks, combining the two.
//!
//! Training and evaluation run in a built-in occluded-intersection simulator
//! ([`sim`]), and the distributional machinery is cross-checked against exact
//! tabular oracles ([`oracle`]).

pub mod agents;
pub mod env;
pub mod error;
pub mod eval;
pub mod nn;
pub mod oracle;
pub mod replay;
pub mod rng;
pub mod sim;
pub mod trainer;
pub mod uncertainty;

pub use error::{Error, Result};
