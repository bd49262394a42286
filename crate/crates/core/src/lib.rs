//! Belief aggregation from first- and second-order reports.
//!
//! A population reports posteriors over a finite set of states; a few
//! agents also report what they expect the population average to be.
//! Inverting the reporters' beliefs against those expectations recovers
//! the mean belief in every state, and the realised average then picks out
//! the true one. Surprisingly-popular variants, a payment scheme, and finite
//! belief-hierarchy tools sit alongside.

pub mod aggregate;
pub mod error;
pub mod fixtures;
pub mod generate;
pub mod hierarchy;
pub mod incentives;
pub mod linalg;
pub mod model;
pub mod population;
pub mod rng;
pub mod structure_file;

pub use aggregate::{AggregationOutcome, MatchOptions, Procedure, ReporterSelection, SpVerdict};
pub use error::{Error, Result};
pub use model::{BeliefVector, ExpectedBeliefMatrix, InfoStructure, State, StateSpace};
pub use population::{AgentReport, CorrelationSpec, MisspecSpec, PopulationDraw};
