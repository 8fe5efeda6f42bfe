//! Graded small-cancellation toolkit over the rank-4 free group.
//!
//! The crate is organized around a pipeline: word combinatorics
//! ([`words`]), piece analysis and small-cancellation conditions
//! ([`cancellation`]), graded parameter schedules ([`schedule`]),
//! forbidden-factor extraction and census bounds ([`forbidden`]),
//! avoidance counting and growth certificates ([`avoidance`]), pruned
//! choice trees ([`tree`]), Dehn-style quotient checks ([`quotient`]),
//! and the end-to-end driver ([`pipeline`]).

pub mod avoidance;
pub mod cancellation;
pub mod error;
pub mod forbidden;
pub mod pipeline;
pub mod quotient;
pub mod schedule;
pub mod tree;
pub mod words;

pub use error::GscError;
