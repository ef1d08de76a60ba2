//! Occupancy-capped ticket slot allocation with visit-duration and no-show
//! models, a MAPE-K adaptation loop and a discrete-event visitor simulator.

pub mod allocator;
pub mod duration;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod kiosk;
pub mod mapek;
pub mod noshow;
pub mod sim;
pub mod time;

pub use error::{Error, Result};
