use std::collections::BTreeSet;

use ewsynth::genstab::{build_stabilizers, full_mask, Family, TermMask};
use ewsynth::layout::{gate_pairs, n_qubits, Boundary};
use ewsynth::lms::{
    cover_fits, covers, explicit_requirements, lmc_exact, lmc_formula, lmc_of_requirements, required_strings, structural_requirements,
    BlockAlphabet, CoverOptions,
};
use ewsynth::pauli::{Letter, Pauli};

const BOUNDARIES: [Boundary; 2] = [Boundary::Periodic, Boundary::Open];

/// Strings of the projector product over `a`, generated block by block from
/// the conjugation rules rather than by operator multiplication.
fn block_model_strings(a: u64, family: Family, n: usize, boundary: Boundary) -> BTreeSet<Pauli> {
    let f = family.letter();
    let alphabet = BlockAlphabet::new(family);
    let one_sided = [(f, Letter::I), (Letter::I, f), alphabet.pair(1), alphabet.pair(2)];
    let gates = gate_pairs(n, boundary);
    let evens = (0..n).step_by(2).fold(0u64, |m, i| m | 1 << i);
    let ambiguous = boundary == Boundary::Periodic && n % 2 == 0 && a == full_mask(n);
    let mut out = BTreeSet::new();
    let mut b = a;
    while b != 0 {
        let mut partial = vec![(Pauli::identity(n_qubits(n)), 0u32)];
        if boundary == Boundary::Open {
            for (bit, q) in [(0usize, 0usize), (n - 1, 2 * n - 1)] {
                if b >> bit & 1 == 1 {
                    for (p, _) in partial.iter_mut() {
                        p.set(q, f);
                    }
                }
            }
        }
        for (k, &(qa, qb)) in gates.iter().enumerate() {
            let left = b >> k & 1 == 1;
            let right = b >> ((k + 1) % n) & 1 == 1;
            let opts: Vec<((Letter, Letter), u32)> = match (left, right) {
                (true, true) => vec![((f, f), 0)],
                (false, false) => vec![((Letter::I, Letter::I), 0)],
                _ => one_sided.iter().enumerate().map(|(i, &pr)| (pr, (i >= 2) as u32)).collect(),
            };
            let mut next = Vec::new();
            for (p, odd) in &partial {
                for &((la, lb), o) in &opts {
                    let mut q = *p;
                    if la != Letter::I {
                        q.set(qa, la);
                    }
                    if lb != Letter::I {
                        q.set(qb, lb);
                    }
                    next.push((q, odd + o));
                }
            }
            partial = next;
        }
        let alternating = b == evens || b == evens ^ full_mask(n);
        for (p, odd) in partial {
            if ambiguous && alternating && odd % 2 == 1 {
                continue;
            }
            out.insert(p);
        }
        b = (b - 1) & a;
    }
    out.remove(&Pauli::identity(n_qubits(n)));
    out
}

#[test]
fn block_model_matches_operator_expansion() {
    for n in 1..=4 {
        for boundary in BOUNDARIES {
            let set = build_stabilizers(n, boundary).unwrap();
            for family in Family::BOTH {
                for a in 1..=full_mask(n) {
                    let t = TermMask::family(n, boundary, family, a);
                    let explicit = required_strings(&set, &[t]);
                    let model = block_model_strings(a, family, n, boundary);
                    assert_eq!(explicit, model, "N={n} {boundary} {t}");
                }
            }
        }
    }
}

#[test]
fn single_projector_strings() {
    // 4 one-sided strings on each neighbouring block, none of them identity.
    let set = build_stabilizers(5, Boundary::Periodic).unwrap();
    let t = TermMask::from_singlets(5, Boundary::Periodic, Family::XX, &[2]);
    assert_eq!(required_strings(&set, &[t]).len(), 16);
    let open = build_stabilizers(5, Boundary::Open).unwrap();
    let edge = TermMask::from_singlets(5, Boundary::Open, Family::XX, &[1]);
    assert_eq!(required_strings(&open, &[edge]).len(), 4);
    assert!(required_strings(&set, &[]).is_empty());
}

#[test]
fn strings_factor_into_block_letters() {
    for n in 2..=4 {
        for boundary in BOUNDARIES {
            let set = build_stabilizers(n, boundary).unwrap();
            for family in Family::BOTH {
                for a in 1..=full_mask(n) {
                    let t = TermMask::family(n, boundary, family, a);
                    let reqs = explicit_requirements(&set, &[t]).unwrap();
                    let other = match family {
                        Family::XX => Family::ZZ,
                        Family::ZZ => Family::XX,
                    };
                    assert!(reqs[other.index()].is_empty());
                    assert!(!reqs[family.index()].is_empty());
                }
            }
        }
    }
}

#[test]
fn mixed_term_is_structural_error() {
    let t = TermMask::new(3, Boundary::Open, 0b001, 0b100);
    assert!(matches!(lmc_exact(&[t], &CoverOptions::default()), Err(ewsynth::Error::Structural(_))));
    let set = build_stabilizers(3, Boundary::Open).unwrap();
    assert!(matches!(explicit_requirements(&set, &[t]), Err(ewsynth::Error::Structural(_))));
}

#[test]
fn structural_and_explicit_covers_agree() {
    let opts = CoverOptions::default();
    for n in 2..=4 {
        for boundary in BOUNDARIES {
            let set = build_stabilizers(n, boundary).unwrap();
            for a in 1..=full_mask(n) {
                let t = TermMask::family(n, boundary, Family::XX, a);
                let explicit = explicit_requirements(&set, &[t]).unwrap();
                let structural = structural_requirements(&[t], Family::XX).unwrap();
                let e = lmc_of_requirements(&explicit[..1], &opts);
                let s = lmc_of_requirements(std::slice::from_ref(&structural), &opts);
                assert!(e.optimal && s.optimal, "N={n} {boundary} {t}");
                assert_eq!(e.count, s.count, "N={n} {boundary} {t}");
            }
        }
    }
}

#[test]
fn settings_cover_every_required_string() {
    let opts = CoverOptions::default();
    for n in 2..=4 {
        for boundary in BOUNDARIES {
            let set = build_stabilizers(n, boundary).unwrap();
            for family in Family::BOTH {
                for a in 1..=full_mask(n) {
                    let t = TermMask::family(n, boundary, family, a);
                    let report = lmc_exact(&[t], &opts).unwrap();
                    let settings = report.settings(1 << 16).unwrap();
                    assert_eq!(settings.len() as u128, report.count);
                    for s in required_strings(&set, &[t]) {
                        assert!(settings.iter().any(|m| covers(m, &s)), "N={n} {boundary} {t}: {s} uncovered");
                    }
                }
            }
        }
    }
}

#[test]
fn known_cover_sizes() {
    let opts = CoverOptions::default();
    let lmc = |n: usize, b: Boundary, s: &[usize]| {
        let r = lmc_exact(&[TermMask::from_singlets(n, b, Family::XX, s)], &opts).unwrap();
        assert!(r.optimal, "N={n} {b} {s:?}");
        r.count
    };
    for n in 3..=6 {
        for i in 1..=n {
            assert_eq!(lmc(n, Boundary::Periodic, &[i]), 9);
            assert_eq!(lmc(n, Boundary::Periodic, &[i, i % n + 1]), 15);
        }
        for i in 2..n {
            assert_eq!(lmc(n, Boundary::Open, &[i]), 9);
        }
        for i in 2..n - 1 {
            assert_eq!(lmc(n, Boundary::Open, &[i, i + 1]), 15);
        }
        assert_eq!(lmc(n, Boundary::Open, &[1]), 3);
        assert_eq!(lmc(n, Boundary::Open, &[1, 2]), 9);
        let all: Vec<usize> = (1..=n).collect();
        assert_eq!(lmc(n, Boundary::Open, &all), 3u128.pow(n as u32 - 1));
    }
    assert_eq!(lmc(5, Boundary::Periodic, &[1, 2, 3, 4, 5]), 211);
    assert_eq!(lmc(4, Boundary::Periodic, &[1, 2, 3, 4]), 49);
    assert_eq!(lmc(6, Boundary::Open, &[2, 3, 4]), 81);
}

#[test]
fn exact_never_exceeds_formula_and_matches_small_cases() {
    let opts = CoverOptions::default();
    for n in 3..=6 {
        for boundary in [Boundary::Periodic, Boundary::Open] {
            for a in 1..=full_mask(n) {
                let t = TermMask::family(n, boundary, Family::ZZ, a);
                let exact = lmc_exact(&[t], &opts).unwrap();
                let formula = lmc_formula(&t).unwrap();
                assert!(exact.count <= formula, "N={n} {boundary} {t}: {} > {formula}", exact.count);
            }
        }
    }
}

#[test]
fn adding_terms_never_lowers_the_count() {
    let opts = CoverOptions::default();
    for boundary in BOUNDARIES {
        let n = 4;
        let masks: Vec<u64> = (1..=full_mask(n)).collect();
        for &a in &masks {
            for &b in &masks {
                let ta = TermMask::family(n, boundary, Family::XX, a);
                let tb = TermMask::family(n, boundary, Family::XX, b);
                let one = lmc_exact(&[ta], &opts).unwrap();
                let two = lmc_exact(&[ta, tb], &opts).unwrap();
                assert!(one.optimal && two.optimal, "{ta} + {tb}: {} {} {} {} nodes {:?}", one.count, one.lower_bound, two.count, two.lower_bound, two.families.iter().map(|f| f.cover.nodes).collect::<Vec<_>>());
                assert!(two.count >= one.count, "{ta} + {tb}");
            }
        }
    }
}

#[test]
fn families_are_summed() {
    let opts = CoverOptions::default();
    for n in [5, 8, 10] {
        let mut terms = Vec::new();
        for f in Family::BOTH {
            for i in 1..=n {
                terms.push(TermMask::from_singlets(n, Boundary::Periodic, f, &[i]));
            }
        }
        let r = lmc_exact(&terms, &opts).unwrap();
        assert_eq!(r.count, 18, "N={n}");
        assert!(r.optimal);
    }
    assert_eq!(lmc_exact(&[], &opts).unwrap().count, 0);
}

fn xx_terms(n: usize, boundary: Boundary, masks: &[u64]) -> Vec<TermMask> {
    masks.iter().map(|&m| TermMask::family(n, boundary, Family::XX, m)).collect()
}

#[test]
fn counts_are_invariant_under_chain_symmetries() {
    let opts = CoverOptions::default();
    let count = |terms: &[TermMask]| {
        let r = lmc_exact(terms, &opts).unwrap();
        assert!(r.optimal);
        r.count
    };
    let n = 7;
    let cases: [&[u64]; 4] = [&[0b0000110], &[0b0001110, 0b0011000], &[0b0000010, 0b0001000], &[0b0001110, 0b0000110, 0b0001100]];
    for masks in cases {
        let base = count(&xx_terms(n, Boundary::Open, masks));
        let mut s = 1;
        while masks.iter().all(|&m| (m << s) >> (n - 1) == 0) {
            let moved: Vec<u64> = masks.iter().map(|&m| m << s).collect();
            assert_eq!(count(&xx_terms(n, Boundary::Open, &moved)), base, "{masks:?} << {s}");
            s += 1;
        }
        let ring = count(&xx_terms(n, Boundary::Periodic, masks));
        for s in 1..n {
            let rot: Vec<u64> = masks.iter().map(|&m| ((m << s) | (m >> (n - s))) & full_mask(n)).collect();
            assert_eq!(count(&xx_terms(n, Boundary::Periodic, &rot)), ring, "{masks:?} rot {s}");
        }
        for boundary in BOUNDARIES {
            let zz: Vec<TermMask> = masks.iter().map(|&m| TermMask::family(n, boundary, Family::ZZ, m)).collect();
            assert_eq!(count(&zz), count(&xx_terms(n, boundary, masks)));
        }
    }
}

#[test]
fn cover_fits_agrees_with_exact_counts() {
    let opts = CoverOptions::default();
    for boundary in BOUNDARIES {
        let n = 5;
        for a in 1..=full_mask(n) {
            for b in [a, a.rotate_left(1) & full_mask(n), !a & full_mask(n)] {
                if b == 0 {
                    continue;
                }
                let terms = xx_terms(n, boundary, &[a, b]);
                let exact = lmc_exact(&terms, &opts).unwrap();
                assert!(exact.optimal, "{a:b} {b:b} {boundary}: {} lb {} nodes {:?}", exact.count, exact.lower_bound, exact.families.iter().map(|f| f.cover.nodes).collect::<Vec<_>>());
                let req = structural_requirements(&terms, Family::XX).unwrap();
                assert!(cover_fits(&req, &opts, exact.count), "{a:b} {b:b} {boundary}");
                assert!(!cover_fits(&req, &opts, exact.count - 1), "{a:b} {b:b} {boundary}");
            }
        }
    }
}
