//! Exact simulation, coupling and statistical verification for the
//! telegraph process whose switching rates pull it towards the origin.
//!
//! The particle moves at unit speed on the line; its velocity flips at rate
//! `b` while it moves away from the origin and at rate `a < b` while it moves
//! towards it. The crate provides
//!
//! * [`model`]: closed forms (excursion transforms, invariant laws, bounds),
//! * [`simulate`]: exact event-driven paths of the free and reflected process,
//! * [`excursions`]: samplers from the recursive excursion decomposition and
//!   the regenerative estimator of invariant expectations,
//! * [`coupling`]: the crossing, sticking and coalescent couplings,
//! * [`analysis`]: KS tests, total-variation curves and the diffusion-limit
//!   check,
//! * [`cli`]: the `telegraph` command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod analysis;
pub mod cli;
pub mod coupling;
pub mod error;
pub mod excursions;
pub mod model;
pub mod path;
pub mod rng;
pub mod simulate;

pub use error::{Error, Result};
pub use model::{BoundConstants, LaplaceValue, ModelParams, Process};
pub use path::{Event, PiecewisePath, State, Velocity};
pub use rng::RngStream;
