//! Two-qubit gates and conjugation of operator sums by them.

use num_complex::Complex64;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::pauli::{Coeff, ExactComplex, Letter, OperatorSum, Pauli};
use crate::rational::rat;

pub type Mat4<C> = [[C; 4]; 4];

/// 4x4 gate in the basis |ab>, a = first qubit of the pair (most significant).
#[derive(Clone, Debug, PartialEq)]
pub struct TwoQubitGate<C: Coeff> {
    entries: Mat4<C>,
    unitary: bool,
    /// table[p][q]: coefficient of two-qubit Pauli q in g p g^dagger.
    table: Box<[[C; 16]; 16]>,
}

fn zero4<C: Coeff>() -> Mat4<C> {
    std::array::from_fn(|_| std::array::from_fn(|_| C::zero()))
}

fn matmul<C: Coeff>(a: &Mat4<C>, b: &Mat4<C>) -> Mat4<C> {
    let mut out = zero4::<C>();
    for r in 0..4 {
        for c in 0..4 {
            let mut acc = C::zero();
            for k in 0..4 {
                acc = acc + a[r][k].clone() * b[k][c].clone();
            }
            out[r][c] = acc;
        }
    }
    out
}

fn dagger<C: Coeff>(a: &Mat4<C>) -> Mat4<C> {
    std::array::from_fn(|r| std::array::from_fn(|c| a[c][r].conj()))
}

fn letter_matrix<C: Coeff>(l: Letter) -> [[C; 2]; 2] {
    let (o, z, i) = (C::one(), C::zero(), C::imag_unit());
    match l {
        Letter::I => [[o.clone(), z.clone()], [z, o]],
        Letter::X => [[z.clone(), o.clone()], [o, z]],
        Letter::Y => [[z.clone(), -i.clone()], [i, z]],
        Letter::Z => [[o.clone(), z.clone()], [z, -o]],
    }
}

/// Dense 4x4 matrix of the two-qubit Pauli with letters (a, b).
pub fn pauli_pair_matrix<C: Coeff>(a: Letter, b: Letter) -> Mat4<C> {
    let (ma, mb) = (letter_matrix::<C>(a), letter_matrix::<C>(b));
    std::array::from_fn(|r| std::array::from_fn(|c| ma[r >> 1][c >> 1].clone() * mb[r & 1][c & 1].clone()))
}

fn pair_index(a: Letter, b: Letter) -> usize {
    4 * a.index() + b.index()
}

impl<C: Coeff> TwoQubitGate<C> {
    pub fn new(entries: Mat4<C>) -> Self {
        let prod = matmul(&entries, &dagger(&entries));
        let unitary = (0..4).all(|r| {
            (0..4).all(|c| {
                let target = if r == c { C::one() } else { C::zero() };
                let diff = prod[r][c].clone() - target;
                diff.negligible() || diff.to_c64().norm() < 1e-12
            })
        });
        let gd = dagger(&entries);
        let quarter = C::from_rational(&rat(1, 4));
        let mut table: Box<[[C; 16]; 16]> = Box::new(std::array::from_fn(|_| std::array::from_fn(|_| C::zero())));
        for pa in Letter::ALL {
            for pb in Letter::ALL {
                let m = matmul(&matmul(&entries, &pauli_pair_matrix(pa, pb)), &gd);
                for qa in Letter::ALL {
                    for qb in Letter::ALL {
                        let qm = pauli_pair_matrix::<C>(qa, qb);
                        let mut tr = C::zero();
                        for r in 0..4 {
                            for s in 0..4 {
                                tr = tr + qm[r][s].clone() * m[s][r].clone();
                            }
                        }
                        let v = tr * quarter.clone();
                        table[pair_index(pa, pb)][pair_index(qa, qb)] = if v.negligible() { C::zero() } else { v };
                    }
                }
            }
        }
        TwoQubitGate { entries, unitary, table }
    }

    pub fn entries(&self) -> &Mat4<C> {
        &self.entries
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    /// Coefficients of g (a⊗b) g^dagger in the two-qubit Pauli basis.
    pub fn conjugation_row(&self, a: Letter, b: Letter) -> Vec<((Letter, Letter), C)> {
        let row = &self.table[pair_index(a, b)];
        let mut out = Vec::new();
        for qa in Letter::ALL {
            for qb in Letter::ALL {
                let c = &row[pair_index(qa, qb)];
                if !c.negligible() {
                    out.push(((qa, qb), c.clone()));
                }
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Mat4<C> {
        matmul(&self.entries, &other.entries)
    }
}

/// The sqrt-SWAP gate with exact entries, [[1,0,0,0],[0,(1+i)/2,(1-i)/2,0],[0,(1-i)/2,(1+i)/2,0],[0,0,0,1]].
pub fn sqrt_swap() -> TwoQubitGate<ExactComplex> {
    let h = rat(1, 2);
    let p = ExactComplex::new(h, h);
    let m = ExactComplex::new(h, -h);
    let (o, z) = (ExactComplex::one(), ExactComplex::zero());
    TwoQubitGate::new([
        [o, z, z, z],
        [z, p, m, z],
        [z, m, p, z],
        [z, z, z, o],
    ])
}

/// exp(-i H t) for H = (J/2)(XX + YY + ZZ), in closed form.
pub fn heisenberg_evolution(j: f64, t: f64) -> TwoQubitGate<Complex64> {
    let th = j * t;
    let outer = Complex64::from_polar(1.0, -th / 2.0);
    let inner = Complex64::from_polar(1.0, th / 2.0);
    let c = inner * th.cos();
    let s = inner * Complex64::new(0.0, -th.sin());
    let z = Complex64::zero();
    TwoQubitGate::new([
        [outer, z, z, z],
        [z, c, s, z],
        [z, s, c, z],
        [z, z, z, outer],
    ])
}

/// g A g^dagger where g acts on qubits (qa, qb) of A.
pub fn conjugate_by_gate<C: Coeff>(a: &OperatorSum<C>, g: &TwoQubitGate<C>, pair: (usize, usize)) -> Result<OperatorSum<C>> {
    let (qa, qb) = pair;
    let n = a.n();
    for q in [qa, qb] {
        if q >= n {
            return Err(Error::IndexOutOfRange { index: q, n });
        }
    }
    if qa == qb {
        return Err(Error::DuplicateQubit(qa, qb));
    }
    let mut out = OperatorSum::zero(n);
    for (p, c) in a.iter() {
        let (la, lb) = (p.letter(qa), p.letter(qb));
        if la == Letter::I && lb == Letter::I {
            out.add_term(*p, c.clone());
            continue;
        }
        for ((ra, rb), v) in g.conjugation_row(la, lb) {
            let mut np: Pauli = *p;
            np.set(qa, ra);
            np.set(qb, rb);
            out.add_term(np, c.clone() * v);
        }
    }
    Ok(out)
}
