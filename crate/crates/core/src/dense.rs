//! Dense state-vector and matrix ground truth for small registers.
//!
//! Qubit 0 (the first letter of a Pauli string) is the most significant bit of
//! the computational-basis index.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gate::{sqrt_swap, TwoQubitGate};
use crate::layout::{gate_pairs, n_qubits, Boundary};
use crate::pauli::{Coeff, OperatorSum, Pauli};

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// Size limits for dense computations, in qubits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DenseCaps {
    /// State vectors and pure-state expectations.
    pub vector_qubits: usize,
    /// Full matrices, density operators, eigensolves.
    pub matrix_qubits: usize,
    /// Exhaustive bipartition scans.
    pub schmidt_qubits: usize,
}

impl Default for DenseCaps {
    fn default() -> Self {
        DenseCaps { vector_qubits: 16, matrix_qubits: 10, schmidt_qubits: 12 }
    }
}

impl DenseCaps {
    pub fn check(cap: usize, n: usize, what: &str) -> Result<()> {
        if n > cap {
            Err(Error::CapExceeded { what: format!("{what} on {n} qubits"), cap })
        } else {
            Ok(())
        }
    }
}

#[derive(Clone, Debug)]
pub struct StateVector {
    pub n: usize,
    pub amplitudes: CVector,
}

impl StateVector {
    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn projector(&self) -> CMatrix {
        &self.amplitudes * self.amplitudes.adjoint()
    }
}

#[derive(Clone, Debug)]
pub struct DensityOperator {
    pub n: usize,
    pub matrix: CMatrix,
}

/// Bit mask over basis-index bits for a qubit mask.
fn index_bits(n: usize, qubit_mask: u64) -> usize {
    if n == 0 {
        return 0;
    }
    (qubit_mask.reverse_bits() >> (64 - n)) as usize
}

/// (target index, phase) for P|b>.
#[derive(Clone, Copy)]
struct PauliAction {
    flip: usize,
    zbits: usize,
    base: Complex64,
}

impl PauliAction {
    fn new(p: &Pauli) -> PauliAction {
        let n = p.n();
        let y = (p.x_mask() & p.z_mask()).count_ones();
        let base = match y % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        PauliAction { flip: index_bits(n, p.x_mask()), zbits: index_bits(n, p.z_mask()), base }
    }

    #[inline]
    fn apply(&self, b: usize) -> (usize, Complex64) {
        let sign = if (self.zbits & b).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        (b ^ self.flip, self.base * sign)
    }
}

/// A|psi> for an operator sum A.
pub fn apply_to_vector<C: Coeff>(a: &OperatorSum<C>, psi: &CVector) -> Result<CVector> {
    let dim = 1usize << a.n();
    if psi.len() != dim {
        return Err(Error::Dimension(a.n(), psi.len().trailing_zeros() as usize));
    }
    let mut out = CVector::zeros(dim);
    for (p, c) in a.iter() {
        let act = PauliAction::new(p);
        let c = c.to_c64();
        for b in 0..dim {
            let (t, ph) = act.apply(b);
            out[t] += c * ph * psi[b];
        }
    }
    Ok(out)
}

/// A·M for an operator sum A and a dense matrix M.
pub fn apply_to_matrix<C: Coeff>(a: &OperatorSum<C>, m: &CMatrix) -> Result<CMatrix> {
    let dim = 1usize << a.n();
    if m.nrows() != dim {
        return Err(Error::Dimension(a.n(), m.nrows().trailing_zeros() as usize));
    }
    let acts: Vec<(PauliAction, Complex64)> = a.iter().map(|(p, c)| (PauliAction::new(p), c.to_c64())).collect();
    let mut out = CMatrix::zeros(dim, m.ncols());
    let cols: Vec<CVector> = (0..m.ncols())
        .into_par_iter()
        .map(|j| {
            let col = m.column(j);
            let mut o = CVector::zeros(dim);
            for (act, c) in &acts {
                for b in 0..dim {
                    let (t, ph) = act.apply(b);
                    o[t] += *c * ph * col[b];
                }
            }
            o
        })
        .collect();
    for (j, c) in cols.into_iter().enumerate() {
        out.set_column(j, &c);
    }
    Ok(out)
}

pub fn to_dense<C: Coeff>(a: &OperatorSum<C>, caps: &DenseCaps) -> Result<CMatrix> {
    DenseCaps::check(caps.matrix_qubits, a.n(), "dense matrix")?;
    let dim = 1usize << a.n();
    let mut out = CMatrix::zeros(dim, dim);
    for (p, c) in a.iter() {
        let act = PauliAction::new(p);
        let c = c.to_c64();
        for b in 0..dim {
            let (t, ph) = act.apply(b);
            out[(t, b)] += c * ph;
        }
    }
    Ok(out)
}

/// Dense matrix of a single phaseless Pauli string.
pub fn pauli_matrix(p: &Pauli) -> CMatrix {
    let dim = 1usize << p.n();
    let act = PauliAction::new(p);
    let mut out = CMatrix::zeros(dim, dim);
    for b in 0..dim {
        let (t, ph) = act.apply(b);
        out[(t, b)] = ph;
    }
    out
}

/// Apply a two-qubit gate to qubits (qa, qb) of a state vector in place.
pub fn apply_gate(psi: &mut CVector, n: usize, g: &TwoQubitGate<Complex64>, qa: usize, qb: usize) {
    let (ba, bb) = (1usize << (n - 1 - qa), 1usize << (n - 1 - qb));
    let e = g.entries();
    for base in 0..psi.len() {
        if base & ba != 0 || base & bb != 0 {
            continue;
        }
        let idx = [base, base | bb, base | ba, base | ba | bb];
        let v: [Complex64; 4] = std::array::from_fn(|k| psi[idx[k]]);
        for r in 0..4 {
            psi[idx[r]] = (0..4).map(|c| e[r][c] * v[c]).sum();
        }
    }
}

/// Full coupling layer as a dense matrix.
pub fn coupling_unitary(n_pairs: usize, boundary: Boundary, caps: &DenseCaps) -> Result<CMatrix> {
    let n = n_qubits(n_pairs);
    DenseCaps::check(caps.matrix_qubits, n, "coupling unitary")?;
    let g = float_gate(&sqrt_swap());
    let dim = 1usize << n;
    let mut u = CMatrix::identity(dim, dim);
    for j in 0..dim {
        let mut col = u.column(j).into_owned();
        for (qa, qb) in gate_pairs(n_pairs, boundary) {
            apply_gate(&mut col, n, &g, qa, qb);
        }
        u.set_column(j, &col);
    }
    Ok(u)
}

pub fn float_gate<C: Coeff>(g: &TwoQubitGate<C>) -> TwoQubitGate<Complex64> {
    let e = g.entries();
    TwoQubitGate::new(std::array::from_fn(|r| std::array::from_fn(|c| e[r][c].to_c64())))
}

/// N singlets on (2i-1, 2i) followed by sqrt-SWAP on (2i, 2i+1), and on (2N, 1) when periodic.
pub fn build_target_state(n_pairs: usize, boundary: Boundary, caps: &DenseCaps) -> Result<StateVector> {
    if n_pairs == 0 {
        return Err(Error::Invalid("need at least one singlet".into()));
    }
    let n = n_qubits(n_pairs);
    DenseCaps::check(caps.vector_qubits, n, "target state")?;
    let dim = 1usize << n;
    let amp = std::f64::consts::FRAC_1_SQRT_2;
    let mut psi = CVector::zeros(dim);
    for b in 0..dim {
        let mut v = 1.0;
        for i in 0..n_pairs {
            let pair = (b >> (n - 2 - 2 * i)) & 3;
            v *= match pair {
                0b01 => amp,
                0b10 => -amp,
                _ => 0.0,
            };
            if v == 0.0 {
                break;
            }
        }
        psi[b] = Complex64::new(v, 0.0);
    }
    let g = float_gate(&sqrt_swap());
    for (qa, qb) in gate_pairs(n_pairs, boundary) {
        apply_gate(&mut psi, n, &g, qa, qb);
    }
    Ok(StateVector { n, amplitudes: psi })
}

/// (1-p)|Psi><Psi| + p I / 2^{2N}.
pub fn noisy_state(n_pairs: usize, p: f64, boundary: Boundary, caps: &DenseCaps) -> Result<DensityOperator> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::NoiseOutOfRange(p));
    }
    let n = n_qubits(n_pairs);
    DenseCaps::check(caps.matrix_qubits, n, "density operator")?;
    let psi = build_target_state(n_pairs, boundary, caps)?;
    let dim = 1usize << n;
    let mut m = psi.projector() * Complex64::new(1.0 - p, 0.0);
    let w = Complex64::new(p / dim as f64, 0.0);
    for k in 0..dim {
        m[(k, k)] += w;
    }
    Ok(DensityOperator { n, matrix: m })
}

/// tr(A rho), after checking A is Hermitian and the trace is real.
pub fn expectation<C: Coeff>(a: &OperatorSum<C>, rho: &DensityOperator) -> Result<f64> {
    if a.n() != rho.n {
        return Err(Error::Dimension(a.n(), rho.n));
    }
    if !a.is_hermitian() {
        return Err(Error::NotHermitian);
    }
    let dim = 1usize << rho.n;
    let mut acc = Complex64::new(0.0, 0.0);
    for (p, c) in a.iter() {
        let act = PauliAction::new(p);
        let mut t = Complex64::new(0.0, 0.0);
        for b in 0..dim {
            let (target, ph) = act.apply(b);
            t += ph * rho.matrix[(b, target)];
        }
        acc += c.to_c64() * t;
    }
    if acc.im.abs() > 1e-10 {
        return Err(Error::Invalid(format!("expectation has imaginary part {}", acc.im)));
    }
    Ok(acc.re)
}

/// <psi|A|psi> for a pure state.
pub fn expectation_pure<C: Coeff>(a: &OperatorSum<C>, psi: &StateVector) -> Result<f64> {
    if !a.is_hermitian() {
        return Err(Error::NotHermitian);
    }
    let v = apply_to_vector(a, &psi.amplitudes)?;
    let e = psi.amplitudes.dotc(&v);
    if e.im.abs() > 1e-10 {
        return Err(Error::Invalid(format!("expectation has imaginary part {}", e.im)));
    }
    Ok(e.re)
}

/// Largest squared Schmidt coefficient over one bipartition (qubit mask `side`).
pub fn schmidt_sq_for_cut(psi: &StateVector, side: u64) -> f64 {
    let n = psi.n;
    let a: Vec<usize> = (0..n).filter(|q| side >> q & 1 == 1).collect();
    let b: Vec<usize> = (0..n).filter(|q| side >> q & 1 == 0).collect();
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let (ds, dl) = (1usize << small.len(), 1usize << large.len());
    let mut m = CMatrix::zeros(ds, dl);
    for idx in 0..psi.amplitudes.len() {
        let bit = |q: usize| (idx >> (n - 1 - q)) & 1;
        let r = small.iter().fold(0, |acc, &q| (acc << 1) | bit(q));
        let c = large.iter().fold(0, |acc, &q| (acc << 1) | bit(q));
        m[(r, c)] = psi.amplitudes[idx];
    }
    let gram = &m * m.adjoint();
    gram.symmetric_eigenvalues().iter().cloned().fold(f64::MIN, f64::max)
}

/// Maximum over all nontrivial bipartitions of the largest squared Schmidt coefficient.
pub fn max_schmidt_sq(psi: &StateVector, caps: &DenseCaps) -> Result<f64> {
    let n = psi.n;
    DenseCaps::check(caps.schmidt_qubits, n, "bipartition scan")?;
    if n < 2 {
        return Ok(1.0);
    }
    // Every cut once: the side containing qubit 0, excluding the full set.
    let full = (1u64 << n) - 1;
    let cuts: Vec<u64> = (0..(1u64 << (n - 1))).map(|m| (m << 1) | 1).filter(|&s| s != full).collect();
    let best = cuts.par_iter().map(|&s| schmidt_sq_for_cut(psi, s)).reduce(|| f64::MIN, f64::max);
    Ok(best)
}

/// Smallest eigenvalue of a Hermitian matrix. When the matrix commutes with
/// the global Z parity and the global bit flip (checked entrywise), the
/// eigensolve runs on the four symmetry blocks instead of the full matrix.
pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    match parity_blocks(m) {
        Some(blocks) => blocks.iter().map(min_eigenvalue_full).fold(f64::INFINITY, f64::min),
        None => min_eigenvalue_full(m),
    }
}

const SYMMETRY_TOL: f64 = 1e-12;

/// Blocks of `m` in the basis (|b> + s|~b>)/sqrt2 within each Z-parity
/// sector, where ~b flips every bit; None unless both symmetries hold.
fn parity_blocks(m: &CMatrix) -> Option<Vec<CMatrix>> {
    let dim = m.nrows();
    if dim < 4 || !dim.is_power_of_two() || dim.trailing_zeros() % 2 == 1 || m.ncols() != dim {
        return None;
    }
    let flip = dim - 1;
    let parity = |b: usize| b.count_ones() & 1;
    for i in 0..dim {
        for j in 0..dim {
            let v = m[(i, j)];
            if parity(i) != parity(j) && v.norm() > SYMMETRY_TOL {
                return None;
            }
            if (v - m[(i ^ flip, j ^ flip)]).norm() > SYMMETRY_TOL {
                return None;
            }
        }
    }
    let mut blocks = Vec::with_capacity(4);
    for p in 0..2 {
        let reps: Vec<usize> = (0..dim).filter(|&b| parity(b) == p && b < b ^ flip).collect();
        for sign in [1.0, -1.0] {
            let k = reps.len();
            blocks.push(CMatrix::from_fn(k, k, |i, j| m[(reps[i], reps[j])] + m[(reps[i], reps[j] ^ flip)] * sign));
        }
    }
    Some(blocks)
}

fn min_eigenvalue_full(m: &CMatrix) -> f64 {
    let min = |ev: &DVector<f64>| ev.iter().cloned().fold(f64::INFINITY, f64::min);
    let ev = m.symmetric_eigenvalues();
    if ev.iter().all(|x| x.is_finite()) {
        return min(&ev);
    }
    // The QR iteration can break down on matrices that are zero up to rounding; shifting by s fixes the scale.
    let s = 1.0 + m.norm();
    let n = m.nrows();
    let shifted = m + CMatrix::identity(n, n) * Complex64::new(s, 0.0);
    min(&shifted.symmetric_eigenvalues()) - s
}

pub fn hermitian_defect(m: &CMatrix) -> f64 {
    (m - m.adjoint()).norm()
}

/// (min eigenvalue >= -tol, min eigenvalue).
pub fn psd_check<C: Coeff>(a: &OperatorSum<C>, tol: f64, caps: &DenseCaps) -> Result<(bool, f64)> {
    let m = to_dense(a, caps)?;
    Ok(psd_check_matrix(&m, tol))
}

pub fn psd_check_matrix(m: &CMatrix, tol: f64) -> (bool, f64) {
    let e = min_eigenvalue(m);
    (e >= -tol, e)
}

/// Dense sum of Z over all qubits.
pub fn total_z(n: usize) -> CMatrix {
    let dim = 1usize << n;
    CMatrix::from_diagonal(&CVector::from_fn(dim, |b, _| {
        let ones = (b as u64).count_ones() as f64;
        Complex64::new(n as f64 - 2.0 * ones, 0.0)
    }))
}
