//! Chained Bell correlations for bipartite qudits and what they imply about
//! the predictive power of any theory extending quantum mechanics.
//!
//! - [`qudit`]: Schmidt states, phase-measurement bases, Born-rule tables.
//! - [`chained`]: the chained Bell quantity `I_N` and its minimum over `N`.
//! - [`hidden_variable`]: Bell- and Leggett-model lower bounds on `I_N`.
//! - [`polytope`]: nonsignaling boxes, the predictive-power bound and an LP
//!   explorer of its tightness.
//! - [`simplex`]: the dense LP solver behind the explorer.
//! - [`experiment`]: simulated and recorded coincidence counts.

pub mod chained;
pub mod error;
pub mod experiment;
pub mod hidden_variable;
pub mod polytope;
pub mod qudit;
pub mod simplex;

pub use error::{Error, Result};
