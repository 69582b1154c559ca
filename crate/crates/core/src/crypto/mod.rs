//! Hashing, cuckoo hashing, OPRF/OPPRF and set intersection.

pub mod cuckoo;
pub mod gf128;
pub mod hash;
pub mod opprf;
pub mod oprf;
pub mod psi;

pub use opprf::{Hints, OpprfProgram};
pub use oprf::{OprfKey, PrfOutput};
