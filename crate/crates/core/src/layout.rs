//! Qubit layout of the singlet chain.
//!
//! Singlet i (1-based) sits on qubits (2i-1, 2i); coupling gates act on
//! (2i, 2i+1) for i = 1..N-1, plus (2N, 1) when the chain is closed. Internally
//! qubits are zero-based, so singlet i occupies (2i-2, 2i-1).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Open,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Periodic => "periodic",
            Boundary::Open => "open",
        })
    }
}

impl FromStr for Boundary {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "periodic" => Ok(Boundary::Periodic),
            "open" => Ok(Boundary::Open),
            _ => Err(Error::Parse(format!("unknown boundary {s:?} (periodic|open)"))),
        }
    }
}

pub fn n_qubits(n_pairs: usize) -> usize {
    2 * n_pairs
}

/// Zero-based qubits of singlet `i` (zero-based).
pub fn singlet_qubits(i: usize) -> (usize, usize) {
    (2 * i, 2 * i + 1)
}

/// Zero-based qubit pairs of the coupling layer, in gate order.
pub fn gate_pairs(n_pairs: usize, boundary: Boundary) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = (0..n_pairs.saturating_sub(1)).map(|i| (2 * i + 1, 2 * i + 2)).collect();
    if boundary == Boundary::Periodic && n_pairs >= 1 {
        out.push((2 * n_pairs - 1, 0));
    }
    out
}

/// Number of coupling gates ("blocks"): block b (zero-based) is the gate
/// between singlet b and singlet b+1 (mod N when periodic).
pub fn n_blocks(n_pairs: usize, boundary: Boundary) -> usize {
    gate_pairs(n_pairs, boundary).len()
}
