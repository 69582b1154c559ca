//! Two-party private radius-nearest-neighbor imputation.
//!
//! Alice and Bob each hold part of a table with missing cells. Bob wants a
//! missing cell of one of his tuples filled in from the neighbors of that
//! tuple across both parties' data, without either side revealing its
//! records. Horizontal splits (disjoint rows) and vertical splits (disjoint
//! columns over shared row ids) are both supported, each in plain and blind
//! variants that differ in what Alice learns about the neighbor set.

pub mod crypto;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod mpc;
pub mod net;
pub mod proto;
pub mod radius;
pub mod rnn;

pub use error::{Error, Result};
