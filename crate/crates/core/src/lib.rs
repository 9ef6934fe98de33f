//! Synthesis, optimization and certification of entanglement witnesses for
//! chains of singlets coupled by sqrt-SWAP gates.

pub mod cli;
pub mod dense;
pub mod error;
pub mod gate;
pub mod genstab;
pub mod layout;
pub mod lms;
pub mod pauli;
pub mod rational;
pub mod search;
pub mod witness;

pub use error::{Error, Result};
