use thiserror::Error;

use crate::allocator::AllocationPlan;
use crate::time::ClassLabel;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invariant violated for `{field}`: {message}")]
    Invariant { field: String, message: String },

    #[error("slot {slot} is not covered by any slot class")]
    UnpartitionedSlot { slot: usize },

    #[error("no {0} supplied")]
    EmptyInput(&'static str),

    #[error("class {0} has no samples")]
    EmptyClass(ClassLabel),

    #[error("show rate estimate must be positive, got {0}")]
    NonPositiveShowRate(f64),

    #[error("committed load alone violates the {constraint} constraint at slot {slot}")]
    InfeasibleCommitments { constraint: &'static str, slot: usize, plan: Box<AllocationPlan> },

    #[error("instance too large for exhaustive search: {0}")]
    InstanceTooLarge(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("arrival count must be at least 1")]
    NonPositiveArrivals,

    #[error("arrival times are not sorted at index {index}")]
    UnsortedArrivals { index: usize },

    #[error("event at t={ts}s precedes the last ingested event at t={last}s")]
    OutOfOrderEvent { ts: f64, last: f64 },

    #[error("slot boundary {boundary} was already ticked (last tick {last})")]
    DoubleTick { boundary: usize, last: usize },

    #[error("{location}: {message}")]
    Parse { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invariant(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invariant { field: field.into(), message: message.into() }
    }

    pub fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse { location: location.into(), message: message.into() }
    }
}
