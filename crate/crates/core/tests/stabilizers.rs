use ewsynth::dense::{apply_to_matrix, apply_to_vector, build_target_state, coupling_unitary, total_z, CMatrix, DenseCaps};
use ewsynth::genstab::{build_stabilizers, Family, TermMask};
use ewsynth::layout::Boundary;
use ewsynth::pauli::{Coeff, ExactComplex, ExactSum, Pauli};
use ewsynth::rational::rat;
use num_complex::Complex64;

const BOUNDARIES: [Boundary; 2] = [Boundary::Periodic, Boundary::Open];

#[test]
fn stabilizers_fix_the_target_state() {
    let caps = DenseCaps::default();
    for n in 1..=5 {
        for b in BOUNDARIES {
            let set = build_stabilizers(n, b).unwrap();
            let psi = build_target_state(n, b, &caps).unwrap();
            for (f, i, s) in set.all() {
                let v = apply_to_vector(s, &psi.amplitudes).unwrap();
                let r = (v - &psi.amplitudes).norm();
                assert!(r < 1e-10, "N={n} {b} {f} {i}: residual {r}");
            }
        }
    }
}

#[test]
fn two_pair_expansion_matches_printed_sign_pattern() {
    // Singlet 1 with j = 1: left factor on qubits (2N, 1), right factor on (2, 3).
    let set = build_stabilizers(2, Boundary::Periodic).unwrap();
    let s = set.stabilizer(Family::XX, 0);
    let q = |str: &str| s.coeff(&Pauli::parse(str).unwrap());
    let quarter = ExactComplex::from_rational(&rat(1, 4));
    // -(X_{j-1} I_j)(X_{j+1} I_{j+2}) with qubit order 1,2,3,4 and j-1 = 4.
    assert_eq!(q("IIXX"), -quarter);
    // -(-Y_{j-1} Z_j)(X_{j+1} I_{j+2}) = +1/4 Z_1 X_3 Y_4
    assert_eq!(q("ZIXY"), quarter);
    // -(Z_{j-1} Y_j)(Y_{j+1} Z_{j+2}): j-1 = 4 -> Z, j = 1 -> Y, qubit 2 -> Y, qubit 3 -> Z
    assert_eq!(q("YYZZ"), -quarter);
}

#[test]
fn stabilizers_are_hermitian_involutions_and_commute() {
    for n in 2..=5 {
        for b in BOUNDARIES {
            let set = build_stabilizers(n, b).unwrap();
            let all: Vec<&ExactSum> = set.all().map(|(_, _, s)| s).collect();
            let id = ExactSum::identity(2 * n);
            for (k, s) in all.iter().enumerate() {
                assert!(s.is_hermitian());
                assert_eq!(s.mul(s).unwrap(), id);
                for t in &all[k + 1..] {
                    assert!(s.commutator(t).unwrap().is_empty(), "N={n} {b}");
                }
            }
        }
    }
}

#[test]
fn dense_commutators_vanish() {
    let caps = DenseCaps::default();
    for n in 2..=4 {
        for b in BOUNDARIES {
            let set = build_stabilizers(n, b).unwrap();
            let dense: Vec<CMatrix> = set.all().map(|(_, _, s)| ewsynth::dense::to_dense(s, &caps).unwrap()).collect();
            for i in 0..dense.len() {
                for j in i + 1..dense.len() {
                    let c = &dense[i] * &dense[j] - &dense[j] * &dense[i];
                    assert!(c.norm() < 1e-10);
                }
            }
        }
    }
}

#[test]
fn stabilizers_are_independent() {
    // No nonempty product equals +-I: every product is traceless.
    for n in 2..=4 {
        for b in BOUNDARIES {
            let set = build_stabilizers(n, b).unwrap();
            let all: Vec<&ExactSum> = set.all().map(|(_, _, s)| s).collect();
            let dim = 1usize << (2 * n);
            // Gray-code walk over all subsets keeps one multiplication per step.
            let mut cur = CMatrix::identity(dim, dim);
            let mut in_set = vec![false; all.len()];
            for step in 1..(1u64 << all.len()) {
                let k = step.trailing_zeros() as usize;
                cur = apply_to_matrix(all[k], &cur).unwrap();
                in_set[k] = !in_set[k];
                let tr: Complex64 = cur.trace();
                assert!(tr.norm() < 1e-8, "N={n} {b}: product {in_set:?} has trace {tr}");
            }
        }
    }
}

#[test]
fn product_of_all_projectors_is_target_projector() {
    let caps = DenseCaps::default();
    for n in 1..=4 {
        for b in BOUNDARIES {
            let set = build_stabilizers(n, b).unwrap();
            let dim = 1usize << (2 * n);
            let mut m = CMatrix::identity(dim, dim);
            for f in Family::BOTH {
                for i in 0..n {
                    m = apply_to_matrix(set.projector(f, i), &m).unwrap();
                }
            }
            let psi = build_target_state(n, b, &caps).unwrap();
            let diff = (m - psi.projector()).norm();
            assert!(diff < 1e-10, "N={n} {b}: {diff}");
        }
    }
}

#[test]
fn full_term_expansion_matches_dense_projector() {
    let caps = DenseCaps::default();
    for b in BOUNDARIES {
        let set = build_stabilizers(3, b).unwrap();
        let full = TermMask::new(3, b, 0b111, 0b111);
        let e = set.expand_term(&full);
        let m = ewsynth::dense::to_dense(&*e, &caps).unwrap();
        let psi = build_target_state(3, b, &caps).unwrap();
        assert!((m - psi.projector()).norm() < 1e-10);
    }
}

#[test]
fn adjacent_pair_trace_fraction() {
    let caps = DenseCaps { matrix_qubits: 10, ..DenseCaps::default() };
    let set = build_stabilizers(5, Boundary::Open).unwrap();
    let t = TermMask::from_singlets(5, Boundary::Open, Family::XX, &[1, 2]);
    let m = ewsynth::dense::to_dense(&*set.expand_term(&t), &caps).unwrap();
    let frac = m.trace().re / 1024.0;
    assert!((frac - 0.25).abs() < 1e-12);
}

#[test]
fn trace_fraction_matches_dense_trace() {
    for n in 2..=4 {
        let set = build_stabilizers(n, Boundary::Periodic).unwrap();
        let dim = (1usize << (2 * n)) as f64;
        for xx in 0..(1u64 << n) {
            for zz in 0..(1u64 << n) {
                let t = TermMask::new(n, Boundary::Periodic, xx, zz);
                if t.weight() > 4 {
                    continue;
                }
                let mut m = CMatrix::identity(dim as usize, dim as usize);
                for f in Family::BOTH {
                    for i in 0..n {
                        if t.bits(f) >> i & 1 == 1 {
                            m = apply_to_matrix(set.projector(f, i), &m).unwrap();
                        }
                    }
                }
                let frac = m.trace().re / dim;
                let want = ewsynth::rational::to_f64(&ewsynth::genstab::term_trace_fraction(&t));
                assert!((frac - want).abs() < 1e-12, "N={n} {t}");
            }
        }
    }
}

#[test]
fn magnetization_sector_and_symmetry() {
    let caps = DenseCaps::default();
    for n in 1..=5 {
        for b in BOUNDARIES {
            let psi = build_target_state(n, b, &caps).unwrap();
            assert!((psi.norm() - 1.0).abs() < 1e-12);
            let z = total_z(2 * n);
            let v = &z * &psi.amplitudes;
            assert!(v.norm() < 1e-10, "N={n} {b}: sum Z |Psi> != 0");
        }
    }
    for n in 1..=4 {
        for b in BOUNDARIES {
            let u = coupling_unitary(n, b, &caps).unwrap();
            let z = total_z(2 * n);
            assert!((&u * &z - &z * &u).norm() < 1e-10);
        }
    }
}
