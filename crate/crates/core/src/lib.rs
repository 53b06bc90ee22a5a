//! Analysis toolkit for state-dependent 1-limited polling systems with two
//! routing matrices: one used after a service, one after finding a station
//! empty.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod document;
pub mod ergodicity;
pub mod error;
mod linalg;
pub mod model;
pub mod server;
pub mod sim;
pub mod symmetric;
pub mod waiting;

pub use error::{Error, Result};
pub use linalg::stationary_vector;
pub use model::{BatchMoments, PollingModel, StationSet};
pub use document::ModelDocument;
