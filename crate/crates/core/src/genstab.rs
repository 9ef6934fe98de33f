//! Generalized stabilizers of the coupled singlet chain and products of their projectors.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gate::{conjugate_by_gate, sqrt_swap};
use crate::layout::{gate_pairs, n_qubits, singlet_qubits, Boundary};
use crate::pauli::{Coeff, ExactComplex, ExactSum, Letter, Pauli};
use crate::rational::{pow2_neg, rat, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Family {
    XX,
    ZZ,
}

impl Family {
    pub const BOTH: [Family; 2] = [Family::XX, Family::ZZ];

    pub fn letter(self) -> Letter {
        match self {
            Family::XX => Letter::X,
            Family::ZZ => Letter::Z,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::XX => "xx",
            Family::ZZ => "zz",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Selection of projectors forming one product term: bit i of `xx` picks the
/// XX-family projector of singlet i (zero-based), likewise `zz`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TermMask {
    pub n_pairs: usize,
    pub boundary: Boundary,
    pub xx: u64,
    pub zz: u64,
}

impl TermMask {
    pub fn new(n_pairs: usize, boundary: Boundary, xx: u64, zz: u64) -> TermMask {
        let full = full_mask(n_pairs);
        assert!(xx & !full == 0 && zz & !full == 0, "mask exceeds singlet count");
        TermMask { n_pairs, boundary, xx, zz }
    }

    pub fn empty(n_pairs: usize, boundary: Boundary) -> TermMask {
        TermMask::new(n_pairs, boundary, 0, 0)
    }

    pub fn family(n_pairs: usize, boundary: Boundary, family: Family, bits: u64) -> TermMask {
        match family {
            Family::XX => TermMask::new(n_pairs, boundary, bits, 0),
            Family::ZZ => TermMask::new(n_pairs, boundary, 0, bits),
        }
    }

    /// Mask from 1-based singlet indices.
    pub fn from_singlets(n_pairs: usize, boundary: Boundary, family: Family, singlets: &[usize]) -> TermMask {
        let bits = singlets.iter().fold(0u64, |acc, &i| {
            assert!(i >= 1 && i <= n_pairs, "singlet {i} out of range");
            acc | 1 << (i - 1)
        });
        TermMask::family(n_pairs, boundary, family, bits)
    }

    pub fn bits(&self, family: Family) -> u64 {
        match family {
            Family::XX => self.xx,
            Family::ZZ => self.zz,
        }
    }

    pub fn with_bits(&self, family: Family, bits: u64) -> TermMask {
        let mut t = *self;
        match family {
            Family::XX => t.xx = bits,
            Family::ZZ => t.zz = bits,
        }
        t
    }

    pub fn is_empty(&self) -> bool {
        self.xx == 0 && self.zz == 0
    }

    /// Total number of selected projectors (the Hamming weight s).
    pub fn weight(&self) -> u32 {
        self.xx.count_ones() + self.zz.count_ones()
    }

    /// The family of a nonempty single-family term.
    pub fn single_family(&self) -> Option<Family> {
        match (self.xx != 0, self.zz != 0) {
            (true, false) => Some(Family::XX),
            (false, true) => Some(Family::ZZ),
            _ => None,
        }
    }

    pub fn and(&self, other: &TermMask) -> TermMask {
        TermMask { xx: self.xx & other.xx, zz: self.zz & other.zz, ..*self }
    }

    pub fn or(&self, other: &TermMask) -> TermMask {
        TermMask { xx: self.xx | other.xx, zz: self.zz | other.zz, ..*self }
    }

    pub fn minus(&self, other: &TermMask) -> TermMask {
        TermMask { xx: self.xx & !other.xx, zz: self.zz & !other.zz, ..*self }
    }

    pub fn contains(&self, other: &TermMask) -> bool {
        other.xx & !self.xx == 0 && other.zz & !self.zz == 0
    }
}

impl fmt::Display for TermMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("I");
        }
        let mut first = true;
        for fam in Family::BOTH {
            let bits = self.bits(fam);
            if bits == 0 {
                continue;
            }
            if !first {
                f.write_str(";")?;
            }
            first = false;
            let list: Vec<String> = (0..self.n_pairs).filter(|i| bits >> i & 1 == 1).map(|i| (i + 1).to_string()).collect();
            write!(f, "{}:{}", fam.name(), list.join(","))?;
        }
        Ok(())
    }
}

pub fn full_mask(n_pairs: usize) -> u64 {
    if n_pairs >= 64 {
        u64::MAX
    } else {
        (1u64 << n_pairs) - 1
    }
}

/// Parse "xx:1,2,3;zz:4-5" (1-based singlets, ranges allowed).
pub fn parse_term(s: &str, n_pairs: usize, boundary: Boundary) -> Result<TermMask> {
    let mut t = TermMask::empty(n_pairs, boundary);
    for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (fam, list) = part.split_once(':').ok_or_else(|| Error::Parse(format!("expected family:list in {part:?}")))?;
        let fam = match fam.trim() {
            "xx" | "XX" => Family::XX,
            "zz" | "ZZ" => Family::ZZ,
            other => return Err(Error::Parse(format!("unknown family {other:?}"))),
        };
        let mut bits = 0u64;
        for item in list.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            let (lo, hi) = match item.split_once('-') {
                Some((a, b)) => (a.trim(), b.trim()),
                None => (item, item),
            };
            let lo: usize = lo.parse().map_err(|_| Error::Parse(format!("bad singlet index {item:?}")))?;
            let hi: usize = hi.parse().map_err(|_| Error::Parse(format!("bad singlet index {item:?}")))?;
            if lo == 0 || hi > n_pairs || lo > hi {
                return Err(Error::Parse(format!("singlet range {item:?} outside 1..={n_pairs}")));
            }
            for i in lo..=hi {
                bits |= 1 << (i - 1);
            }
        }
        t = t.with_bits(fam, t.bits(fam) | bits);
    }
    Ok(t)
}

/// The 2N stabilizers of the target state with their projectors.
#[derive(Debug)]
pub struct GeneralizedStabilizerSet {
    pub n_pairs: usize,
    pub boundary: Boundary,
    stabilizers: Vec<ExactSum>,
    projectors: Vec<ExactSum>,
    memo: Mutex<HashMap<(u64, u64), Arc<ExactSum>>>,
}

impl GeneralizedStabilizerSet {
    /// Stabilizer of singlet `i` (zero-based) in `family`.
    pub fn stabilizer(&self, family: Family, i: usize) -> &ExactSum {
        &self.stabilizers[family.index() * self.n_pairs + i]
    }

    pub fn projector(&self, family: Family, i: usize) -> &ExactSum {
        &self.projectors[family.index() * self.n_pairs + i]
    }

    /// All stabilizers, XX family first.
    pub fn all(&self) -> impl Iterator<Item = (Family, usize, &ExactSum)> {
        Family::BOTH
            .into_iter()
            .flat_map(move |f| (0..self.n_pairs).map(move |i| (f, i, self.stabilizer(f, i))))
    }

    pub fn n_qubits(&self) -> usize {
        n_qubits(self.n_pairs)
    }

    /// Product of the projectors selected by `t`; the empty mask gives the identity.
    pub fn expand_term(&self, t: &TermMask) -> Arc<ExactSum> {
        assert_eq!(t.n_pairs, self.n_pairs, "mask singlet count");
        let key = (t.xx, t.zz);
        if let Some(v) = self.memo.lock().unwrap().get(&key) {
            return Arc::clone(v);
        }
        let result = if t.is_empty() {
            ExactSum::identity(self.n_qubits())
        } else {
            // Peel the highest selected projector; the prefix is memoized too.
            let (fam, bit) = if t.zz != 0 { (Family::ZZ, 63 - t.zz.leading_zeros()) } else { (Family::XX, 63 - t.xx.leading_zeros()) };
            let rest = t.with_bits(fam, t.bits(fam) & !(1u64 << bit));
            let prefix = self.expand_term(&rest);
            prefix.mul(self.projector(fam, bit as usize)).expect("matching widths")
        };
        let arc = Arc::new(result);
        self.memo.lock().unwrap().insert(key, Arc::clone(&arc));
        arc
    }
}

/// Stabilizers -U P_j P_{j+1} U^dagger (P = X, Z) for every singlet, by exact conjugation.
pub fn build_stabilizers(n_pairs: usize, boundary: Boundary) -> Result<GeneralizedStabilizerSet> {
    if n_pairs == 0 || n_qubits(n_pairs) > crate::pauli::MAX_QUBITS {
        return Err(Error::Invalid(format!("unsupported singlet count {n_pairs}")));
    }
    let n = n_qubits(n_pairs);
    let gate = sqrt_swap();
    let gates = gate_pairs(n_pairs, boundary);
    let mut stabilizers = Vec::with_capacity(2 * n_pairs);
    for fam in Family::BOTH {
        for i in 0..n_pairs {
            let (a, b) = singlet_qubits(i);
            let mut p = Pauli::identity(n);
            p.set(a, fam.letter());
            p.set(b, fam.letter());
            let mut s = ExactSum::from_terms(n, [(p, -ExactComplex::one())]);
            for &(qa, qb) in gates.iter().filter(|(qa, qb)| [a, b].contains(qa) || [a, b].contains(qb)) {
                s = conjugate_by_gate(&s, &gate, (qa, qb))?;
            }
            stabilizers.push(s);
        }
    }
    let projectors = stabilizers.iter().map(projector).collect::<Result<Vec<_>>>()?;
    Ok(GeneralizedStabilizerSet { n_pairs, boundary, stabilizers, projectors, memo: Mutex::new(HashMap::new()) })
}

/// (S + I)/2 for a Hermitian involution S.
pub fn projector(s: &ExactSum) -> Result<ExactSum> {
    if !s.is_hermitian() {
        return Err(Error::NotHermitian);
    }
    let id = ExactSum::identity(s.n());
    if s.mul(s)? != id {
        return Err(Error::NotInvolution);
    }
    Ok(s.add(&id)?.scale(&ExactComplex::from_rational(&rat(1, 2))))
}

/// tr(P[t]) / 2^{2N} = 2^{-s}.
pub fn term_trace_fraction(t: &TermMask) -> Rational {
    pow2_neg(t.weight())
}
