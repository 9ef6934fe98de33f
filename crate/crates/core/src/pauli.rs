//! Pauli strings and sums of Pauli strings with exact or floating coefficients.
//!
//! A string on n qubits is stored as two bit masks; bit q of `x`/`z` refers to
//! qubit q (zero-based, qubit 0 is the leftmost letter). The phaseless string
//! P(x, z) denotes the tensor product of I, X, Z, Y = iXZ letters, so every
//! phaseless string is Hermitian.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::{Complex, Complex64};
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::rational::Rational;

pub const MAX_QUBITS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Letter {
    I,
    X,
    Y,
    Z,
}

impl Letter {
    pub const ALL: [Letter; 4] = [Letter::I, Letter::X, Letter::Y, Letter::Z];

    pub fn from_bits(x: bool, z: bool) -> Letter {
        match (x, z) {
            (false, false) => Letter::I,
            (true, false) => Letter::X,
            (true, true) => Letter::Y,
            (false, true) => Letter::Z,
        }
    }

    pub fn bits(self) -> (bool, bool) {
        match self {
            Letter::I => (false, false),
            Letter::X => (true, false),
            Letter::Y => (true, true),
            Letter::Z => (false, true),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn to_char(self) -> char {
        match self {
            Letter::I => 'I',
            Letter::X => 'X',
            Letter::Y => 'Y',
            Letter::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Letter> {
        match c {
            'I' | '.' => Some(Letter::I),
            'X' => Some(Letter::X),
            'Y' => Some(Letter::Y),
            'Z' => Some(Letter::Z),
            _ => None,
        }
    }
}

/// Phaseless Pauli string.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pauli {
    n: u32,
    x: u64,
    z: u64,
}

fn low_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl Pauli {
    pub fn identity(n: usize) -> Pauli {
        assert!(n <= MAX_QUBITS, "at most {MAX_QUBITS} qubits");
        Pauli { n: n as u32, x: 0, z: 0 }
    }

    pub fn from_masks(n: usize, x: u64, z: u64) -> Pauli {
        assert!(n <= MAX_QUBITS, "at most {MAX_QUBITS} qubits");
        let m = low_mask(n);
        assert!(x & !m == 0 && z & !m == 0, "mask bits beyond qubit count");
        Pauli { n: n as u32, x, z }
    }

    pub fn from_letters(letters: &[Letter]) -> Pauli {
        let mut p = Pauli::identity(letters.len());
        for (q, &l) in letters.iter().enumerate() {
            p.set(q, l);
        }
        p
    }

    pub fn parse(s: &str) -> Result<Pauli> {
        let letters = s
            .chars()
            .map(|c| Letter::from_char(c).ok_or_else(|| Error::Parse(format!("bad Pauli letter {c:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if letters.len() > MAX_QUBITS {
            return Err(Error::Parse(format!("more than {MAX_QUBITS} qubits")));
        }
        Ok(Pauli::from_letters(&letters))
    }

    /// Single letter `l` on qubit `q`, identity elsewhere.
    pub fn single(n: usize, q: usize, l: Letter) -> Pauli {
        let mut p = Pauli::identity(n);
        p.set(q, l);
        p
    }

    pub fn n(&self) -> usize {
        self.n as usize
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn letter(&self, q: usize) -> Letter {
        Letter::from_bits(self.x >> q & 1 == 1, self.z >> q & 1 == 1)
    }

    pub fn set(&mut self, q: usize, l: Letter) {
        assert!(q < self.n(), "qubit {q} out of range");
        let (x, z) = l.bits();
        self.x = (self.x & !(1 << q)) | ((x as u64) << q);
        self.z = (self.z & !(1 << q)) | ((z as u64) << q);
    }

    pub fn letters(&self) -> Vec<Letter> {
        (0..self.n()).map(|q| self.letter(q)).collect()
    }

    /// Qubits carrying a non-identity letter.
    pub fn support(&self) -> u64 {
        self.x | self.z
    }

    pub fn weight(&self) -> u32 {
        self.support().count_ones()
    }

    pub fn is_identity(&self) -> bool {
        self.support() == 0
    }

    pub fn commutes_with(&self, other: &Pauli) -> bool {
        ((self.x & other.z) ^ (self.z & other.x)).count_ones() % 2 == 0
    }

    /// Product `self * other` as (i-exponent mod 4, phaseless string).
    pub fn mul(&self, other: &Pauli) -> (u8, Pauli) {
        debug_assert_eq!(self.n, other.n);
        let (x1, z1, x2, z2) = (self.x, self.z, other.x, other.z);
        let (px, py, pz) = (x1 & !z1, x1 & z1, !x1 & z1);
        let (qx, qy, qz) = (x2 & !z2, x2 & z2, !x2 & z2);
        // XY = iZ, YZ = iX, ZX = iY; reversed orders pick up -i.
        let plus = (px & qy) | (py & qz) | (pz & qx);
        let minus = (py & qx) | (pz & qy) | (px & qz);
        let k = (plus.count_ones() as i64 - minus.count_ones() as i64).rem_euclid(4) as u8;
        (k, Pauli { n: self.n, x: x1 ^ x2, z: z1 ^ z2 })
    }

    /// Keep only the letters on qubits in `mask`.
    pub fn restrict(&self, mask: u64) -> Pauli {
        Pauli { n: self.n, x: self.x & mask, z: self.z & mask }
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n() {
            write!(f, "{}", self.letter(q).to_char())?;
        }
        Ok(())
    }
}

/// Pauli string with a phase i^phase, phase in {0, 1, 2, 3}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    pub phase: u8,
    pub pauli: Pauli,
}

impl PauliString {
    pub fn new(phase: u8, pauli: Pauli) -> PauliString {
        PauliString { phase: phase % 4, pauli }
    }

    pub fn parse(s: &str) -> Result<PauliString> {
        let s = s.trim();
        let (phase, rest) = if let Some(r) = s.strip_prefix("-i") {
            (3, r)
        } else if let Some(r) = s.strip_prefix("+i").or_else(|| s.strip_prefix('i')) {
            (1, r)
        } else if let Some(r) = s.strip_prefix('-') {
            (2, r)
        } else {
            (0, s.strip_prefix('+').unwrap_or(s))
        };
        Ok(PauliString::new(phase, Pauli::parse(rest)?))
    }

    pub fn n(&self) -> usize {
        self.pauli.n()
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = ["+", "+i", "-", "-i"][self.phase as usize];
        write!(f, "{p}{}", self.pauli)
    }
}

pub fn pauli_mul(a: &PauliString, b: &PauliString) -> Result<PauliString> {
    if a.n() != b.n() {
        return Err(Error::Dimension(a.n(), b.n()));
    }
    let (k, p) = a.pauli.mul(&b.pauli);
    Ok(PauliString::new(a.phase + b.phase + k, p))
}

/// Scalar field for operator sums.
pub trait Coeff:
    Clone
    + fmt::Debug
    + PartialEq
    + Send
    + Sync
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn imag_unit() -> Self;
    fn conj(&self) -> Self;
    /// Below the drop tolerance (exactly zero for exact coefficients).
    fn negligible(&self) -> bool;
    fn is_real(&self) -> bool;
    fn to_c64(&self) -> Complex64;
    fn from_rational(r: &Rational) -> Self;

    fn times_i_pow(&self, k: u8) -> Self {
        match k % 4 {
            0 => self.clone(),
            1 => self.clone() * Self::imag_unit(),
            2 => -self.clone(),
            _ => -(self.clone() * Self::imag_unit()),
        }
    }
}

pub type ExactComplex = Complex<Rational>;

/// Drop tolerance for floating coefficients.
pub const FLOAT_DROP_TOL: f64 = 1e-12;

impl Coeff for ExactComplex {
    fn imag_unit() -> Self {
        Complex::new(Rational::zero(), Rational::one())
    }
    fn conj(&self) -> Self {
        Complex::new(self.re, -self.im)
    }
    fn negligible(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
    fn is_real(&self) -> bool {
        self.im.is_zero()
    }
    fn to_c64(&self) -> Complex64 {
        Complex64::new(crate::rational::to_f64(&self.re), crate::rational::to_f64(&self.im))
    }
    fn from_rational(r: &Rational) -> Self {
        Complex::new(*r, Rational::zero())
    }
}

impl Coeff for Complex64 {
    fn imag_unit() -> Self {
        Complex64::new(0.0, 1.0)
    }
    fn conj(&self) -> Self {
        Complex::conj(self)
    }
    fn negligible(&self) -> bool {
        self.norm() < FLOAT_DROP_TOL
    }
    fn is_real(&self) -> bool {
        self.im.abs() < FLOAT_DROP_TOL
    }
    fn to_c64(&self) -> Complex64 {
        *self
    }
    fn from_rational(r: &Rational) -> Self {
        Complex64::new(crate::rational::to_f64(r), 0.0)
    }
}

/// Linear combination of phaseless Pauli strings on `n` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorSum<C: Coeff> {
    n: usize,
    terms: BTreeMap<Pauli, C>,
}

pub type ExactSum = OperatorSum<ExactComplex>;
pub type FloatSum = OperatorSum<Complex64>;

impl<C: Coeff> OperatorSum<C> {
    pub fn zero(n: usize) -> Self {
        OperatorSum { n, terms: BTreeMap::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::scalar(n, C::one())
    }

    pub fn scalar(n: usize, c: C) -> Self {
        let mut s = Self::zero(n);
        s.add_term(Pauli::identity(n), c);
        s
    }

    pub fn from_string(s: &PauliString, c: C) -> Self {
        let mut out = Self::zero(s.n());
        out.add_term(s.pauli, c.times_i_pow(s.phase));
        out
    }

    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = (Pauli, C)>) -> Self {
        let mut out = Self::zero(n);
        for (p, c) in terms {
            out.add_term(p, c);
        }
        out
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Pauli, &C)> {
        self.terms.iter()
    }

    pub fn coeff(&self, p: &Pauli) -> C {
        self.terms.get(p).cloned().unwrap_or_else(C::zero)
    }

    pub fn identity_coeff(&self) -> C {
        self.coeff(&Pauli::identity(self.n))
    }

    pub fn add_term(&mut self, p: Pauli, c: C) {
        assert_eq!(p.n(), self.n, "term width");
        if c.negligible() {
            return;
        }
        let merged = match self.terms.remove(&p) {
            Some(old) => old + c,
            None => c,
        };
        if !merged.negligible() {
            self.terms.insert(p, merged);
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::Dimension(self.n, other.n));
        }
        let mut out = self.clone();
        for (p, c) in &other.terms {
            out.add_term(*p, c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(&-C::one()))
    }

    pub fn scale(&self, c: &C) -> Self {
        Self::from_terms(self.n, self.terms.iter().map(|(p, v)| (*p, v.clone() * c.clone())))
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        opsum_mul(self, other)
    }

    pub fn adjoint(&self) -> Self {
        Self::from_terms(self.n, self.terms.iter().map(|(p, v)| (*p, v.conj())))
    }

    /// Hermitian iff every coefficient is real, since phaseless strings are Hermitian.
    pub fn is_hermitian(&self) -> bool {
        self.terms.values().all(|c| c.is_real())
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    pub fn paulis(&self) -> impl Iterator<Item = &Pauli> {
        self.terms.keys()
    }

    pub fn to_float(&self) -> FloatSum {
        FloatSum::from_terms(self.n, self.terms.iter().map(|(p, c)| (*p, c.to_c64())))
    }

    /// Embed into a larger register; qubit q maps to `offset + q`.
    pub fn map_terms(&self, n: usize, f: impl Fn(&Pauli) -> Pauli) -> Self {
        Self::from_terms(n, self.terms.iter().map(|(p, c)| (f(p), c.clone())))
    }
}

impl<C: Coeff> fmt::Display for OperatorSum<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (p, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({:?}){}", c, p)?;
        }
        Ok(())
    }
}

pub fn opsum_mul<C: Coeff>(a: &OperatorSum<C>, b: &OperatorSum<C>) -> Result<OperatorSum<C>> {
    if a.n != b.n {
        return Err(Error::Dimension(a.n, b.n));
    }
    let mut out = OperatorSum::zero(a.n);
    for (pa, ca) in &a.terms {
        for (pb, cb) in &b.terms {
            let (k, p) = pa.mul(pb);
            out.add_term(p, (ca.clone() * cb.clone()).times_i_pow(k));
        }
    }
    Ok(out)
}
