use ewsynth::dense::{apply_gate, float_gate, pauli_matrix, to_dense, CMatrix, DenseCaps};
use ewsynth::gate::{conjugate_by_gate, heisenberg_evolution, sqrt_swap, TwoQubitGate};
use ewsynth::pauli::{opsum_mul, pauli_mul, ExactComplex, ExactSum, FloatSum, Letter, Pauli, PauliString};
use ewsynth::rational::rat;
use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use num_traits::One;
use proptest::prelude::*;

fn phase(k: u8) -> Complex64 {
    [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(-1.0, 0.0), Complex64::new(0.0, -1.0)][k as usize % 4]
}

fn string_matrix(s: &PauliString) -> CMatrix {
    pauli_matrix(&s.pauli) * phase(s.phase)
}

#[test]
fn two_qubit_products_match_dense_exhaustively() {
    let all: Vec<Pauli> = Letter::ALL
        .iter()
        .flat_map(|&a| Letter::ALL.iter().map(move |&b| Pauli::from_letters(&[a, b])))
        .collect();
    for a in &all {
        for b in &all {
            for pa in 0..4 {
                let sa = PauliString::new(pa, *a);
                let sb = PauliString::new((pa + 1) % 4, *b);
                let prod = pauli_mul(&sa, &sb).unwrap();
                let dense = string_matrix(&sa) * string_matrix(&sb);
                assert!((dense - string_matrix(&prod)).norm() == 0.0, "{sa} * {sb}");
            }
        }
    }
}

#[test]
fn xz_zx_dense() {
    let a = PauliString::parse("XZ").unwrap();
    let b = PauliString::parse("ZX").unwrap();
    let d = string_matrix(&a) * string_matrix(&b);
    assert!((d - pauli_matrix(&Pauli::parse("YY").unwrap())).norm() == 0.0);
}

fn letter_strategy() -> impl Strategy<Value = Letter> {
    prop_oneof![Just(Letter::I), Just(Letter::X), Just(Letter::Y), Just(Letter::Z)]
}

fn pauli_strategy(n: usize) -> impl Strategy<Value = Pauli> {
    proptest::collection::vec(letter_strategy(), n).prop_map(|l| Pauli::from_letters(&l))
}

fn coeff_strategy() -> impl Strategy<Value = ExactComplex> {
    (-8i128..=8, -8i128..=8, 0u32..3).prop_map(|(re, im, k)| ExactComplex::new(rat(re, 1 << k), rat(im, 1 << k)))
}

fn sum_strategy(n: usize) -> impl Strategy<Value = ExactSum> {
    proptest::collection::vec((pauli_strategy(n), coeff_strategy()), 0..=8).prop_map(move |t| ExactSum::from_terms(n, t))
}

fn gate_matrix(g: &TwoQubitGate<Complex64>, n: usize, qa: usize, qb: usize) -> CMatrix {
    let dim = 1usize << n;
    let mut m = CMatrix::identity(dim, dim);
    for j in 0..dim {
        let mut col = m.column(j).into_owned();
        apply_gate(&mut col, n, g, qa, qb);
        m.set_column(j, &col);
    }
    m
}

fn spectrum(m: &CMatrix) -> Vec<f64> {
    let mut e: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().cloned().collect();
    e.sort_by(|a, b| a.partial_cmp(b).unwrap());
    e
}

proptest! {
    #[test]
    fn products_match_dense(n in 1usize..=5, seed in any::<u64>()) {
        let mut rng = seed;
        let mut next = || { rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); rng >> 33 };
        let letters = |next: &mut dyn FnMut() -> u64| (0..n).map(|_| Letter::ALL[(next() % 4) as usize]).collect::<Vec<_>>();
        let a = PauliString::new((next() % 4) as u8, Pauli::from_letters(&letters(&mut next)));
        let b = PauliString::new((next() % 4) as u8, Pauli::from_letters(&letters(&mut next)));
        let c = PauliString::new((next() % 4) as u8, Pauli::from_letters(&letters(&mut next)));
        let ab = pauli_mul(&a, &b).unwrap();
        prop_assert!((string_matrix(&a) * string_matrix(&b) - string_matrix(&ab)).norm() == 0.0);
        let left = pauli_mul(&ab, &c).unwrap();
        let right = pauli_mul(&a, &pauli_mul(&b, &c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
        let aa = pauli_mul(&PauliString::new(0, a.pauli), &PauliString::new(0, a.pauli)).unwrap();
        prop_assert!(aa.pauli.is_identity() && aa.phase == 0);
    }

    #[test]
    fn opsum_mul_matches_dense(a in (1usize..=4).prop_flat_map(sum_strategy), b in (1usize..=4).prop_flat_map(sum_strategy)) {
        prop_assume!(a.n() == b.n());
        let caps = DenseCaps::default();
        let prod = opsum_mul(&a, &b).unwrap();
        let d = to_dense(&a, &caps).unwrap() * to_dense(&b, &caps).unwrap();
        prop_assert!((d - to_dense(&prod, &caps).unwrap()).norm() < 1e-10);
    }

    #[test]
    fn exact_conjugation_matches_dense(a in (2usize..=4).prop_flat_map(sum_strategy), qa in 0usize..4, qb in 0usize..4) {
        let n = a.n();
        prop_assume!(qa < n && qb < n && qa != qb);
        let caps = DenseCaps::default();
        let g = sqrt_swap();
        let c = conjugate_by_gate(&a, &g, (qa, qb)).unwrap();
        let gm = gate_matrix(&float_gate(&g), n, qa, qb);
        let want = &gm * to_dense(&a, &caps).unwrap() * gm.adjoint();
        prop_assert!((want - to_dense(&c, &caps).unwrap()).norm() < 1e-10);
        prop_assert_eq!(c.identity_coeff(), a.identity_coeff());
    }

    #[test]
    fn float_conjugation_preserves_hermiticity_trace_spectrum(a in (2usize..=4).prop_flat_map(sum_strategy), t in -3.0f64..3.0, j in 0.2f64..2.0) {
        let n = a.n();
        let caps = DenseCaps::default();
        // Hermitian part, as a float sum.
        let h: FloatSum = a.add(&a.adjoint()).unwrap().to_float();
        let g = heisenberg_evolution(j, t);
        let c = conjugate_by_gate(&h, &g, (0, n - 1)).unwrap();
        prop_assert!(c.is_hermitian());
        let (dh, dc) = (to_dense(&h, &caps).unwrap(), to_dense(&c, &caps).unwrap());
        prop_assert!((dh.trace() - dc.trace()).norm() < 1e-10);
        let gm = gate_matrix(&g, n, 0, n - 1);
        prop_assert!((&gm * &dh * gm.adjoint() - &dc).norm() < 1e-10);
        let (sh, sc) = (spectrum(&dh), spectrum(&dc));
        for (x, y) in sh.iter().zip(&sc) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }
}

#[test]
fn evolution_matches_matrix_exponential() {
    // exp(-iHt) from the eigendecomposition of H = (J/2)(XX + YY + ZZ).
    let mut h = CMatrix::zeros(4, 4);
    for s in ["XX", "YY", "ZZ"] {
        h += pauli_matrix(&Pauli::parse(s).unwrap());
    }
    for &(j, t) in &[(1.0, 0.3), (0.5, std::f64::consts::PI), (2.0, std::f64::consts::FRAC_PI_8), (1.0, std::f64::consts::FRAC_PI_2)] {
        let hj = &h * Complex64::new(j / 2.0, 0.0);
        let eig = SymmetricEigen::new(hj);
        let d = CMatrix::from_diagonal(&eig.eigenvalues.map(|e| Complex64::from_polar(1.0, -e * t)));
        let u = &eig.eigenvectors * d * eig.eigenvectors.adjoint();
        let g = heisenberg_evolution(j, t);
        let e = g.entries();
        for r in 0..4 {
            for c in 0..4 {
                assert!((u[(r, c)] - e[r][c]).norm() < 1e-12, "J={j} t={t}");
            }
        }
    }
}

#[test]
fn float_and_exact_sqrt_swap_conjugations_agree() {
    let j = 1.7;
    let gf = heisenberg_evolution(j, std::f64::consts::FRAC_PI_4 / j);
    let ge = sqrt_swap();
    for a in Letter::ALL {
        for b in Letter::ALL {
            let p = Pauli::from_letters(&[a, b]);
            let exact = conjugate_by_gate(&ExactSum::from_terms(2, [(p, ExactComplex::one())]), &ge, (0, 1)).unwrap();
            let float = conjugate_by_gate(&FloatSum::from_terms(2, [(p, Complex64::new(1.0, 0.0))]), &gf, (0, 1)).unwrap();
            let diff = exact.to_float().sub(&float).unwrap();
            assert!(diff.is_empty(), "{p}: {diff}");
        }
    }
}
