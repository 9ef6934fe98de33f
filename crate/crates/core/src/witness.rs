//! Witness operators beta*I + sum_j c_j P[t_j] built from stabilizer projector
//! products, their white-noise tolerance, and validation.

use std::fmt;
use std::str::FromStr;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::dense::{self, max_schmidt_sq, min_eigenvalue, noisy_state, CMatrix, DenseCaps};
use crate::error::{Error, Result};
use crate::genstab::{build_stabilizers, full_mask, Family, GeneralizedStabilizerSet, TermMask};
use crate::layout::{n_qubits, Boundary};
use crate::lms::{lmc_exact, CoverOptions, LmcReport};
use crate::pauli::{Coeff, ExactComplex, ExactSum};
use crate::rational::{self, int, pow2_neg, rat, to_f64, Rational};

pub const SCHEMA_VERSION: u32 = 1;

/// Default biseparable bound: the largest squared Schmidt coefficient of the target.
pub fn default_alpha() -> Rational {
    rat(5, 8)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WitnessTerm {
    pub coeff: Rational,
    pub mask: TermMask,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub n_pairs: usize,
    pub boundary: Boundary,
    pub alpha: Rational,
    pub beta: Rational,
    pub terms: Vec<WitnessTerm>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WitnessKind {
    /// alpha I - |Psi><Psi|
    Projector,
    /// 13/8 I - (prod P_XX + prod P_ZZ)
    Xz,
    /// (2N - 3/8) I - sum_i (P_XX^(i) + P_ZZ^(i))
    Singles,
    /// N = 5: 29/8 I - sum_gamma (P1 P2 P3 + P4 P5)
    W1,
    /// N = 5: 13/8 I - sum_gamma (P1 P2 P3 + P3 P4 P5 - P3)
    W2,
}

impl WitnessKind {
    pub const ALL: [WitnessKind; 5] = [WitnessKind::Projector, WitnessKind::Xz, WitnessKind::Singles, WitnessKind::W1, WitnessKind::W2];

    pub fn name(self) -> &'static str {
        match self {
            WitnessKind::Projector => "projector",
            WitnessKind::Xz => "xz",
            WitnessKind::Singles => "singles",
            WitnessKind::W1 => "w1",
            WitnessKind::W2 => "w2",
        }
    }
}

impl fmt::Display for WitnessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WitnessKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        WitnessKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown witness kind {s:?} (projector|xz|singles|w1|w2)")))
    }
}

impl Witness {
    /// Witness with identity weight `beta`; empty masks are folded into beta.
    pub fn new(n_pairs: usize, boundary: Boundary, alpha: Rational, beta: Rational, terms: Vec<WitnessTerm>) -> Self {
        let mut w = Witness { n_pairs, boundary, alpha, beta, terms: Vec::new() };
        for t in terms {
            if t.mask.is_empty() {
                w.beta += t.coeff;
            } else if !t.coeff.is_zero() {
                w.terms.push(t);
            }
        }
        w
    }

    /// Witness with beta chosen so that it evaluates to alpha - 1 on the target.
    pub fn tight(n_pairs: usize, boundary: Boundary, alpha: Rational, terms: Vec<WitnessTerm>) -> Self {
        let sum: Rational = terms.iter().map(|t| t.coeff).sum();
        Witness::new(n_pairs, boundary, alpha, alpha - int(1) - sum, terms)
    }

    pub fn coeff_sum(&self) -> Rational {
        self.terms.iter().map(|t| t.coeff).sum()
    }

    /// beta + sum c_j - (alpha - 1); zero for a tight witness.
    pub fn tightness_defect(&self) -> Rational {
        self.beta + self.coeff_sum() - (self.alpha - int(1))
    }

    pub fn is_tight(&self) -> bool {
        self.tightness_defect().is_zero()
    }

    pub fn masks(&self) -> Vec<TermMask> {
        self.terms.iter().map(|t| t.mask).collect()
    }

    /// beta I + sum c_j P[t_j] as an exact Pauli sum.
    pub fn operator(&self, set: &GeneralizedStabilizerSet) -> ExactSum {
        let n = n_qubits(self.n_pairs);
        let mut op = ExactSum::scalar(n, ExactComplex::from_rational(&self.beta));
        for t in &self.terms {
            let e = set.expand_term(&t.mask);
            op = op.add(&e.scale(&ExactComplex::from_rational(&t.coeff))).expect("matching widths");
        }
        op
    }

    /// Dense matrix of the witness, built by applying projectors to identity columns.
    pub fn dense_operator(&self, set: &GeneralizedStabilizerSet, caps: &DenseCaps) -> Result<CMatrix> {
        let n = n_qubits(self.n_pairs);
        DenseCaps::check(caps.matrix_qubits, n, "witness matrix")?;
        let dim = 1usize << n;
        let id = CMatrix::identity(dim, dim);
        let mut w = &id * num_complex::Complex64::new(to_f64(&self.beta), 0.0);
        for t in &self.terms {
            let mut m = id.clone();
            for f in Family::BOTH {
                let bits = t.mask.bits(f);
                for i in 0..self.n_pairs {
                    if bits >> i & 1 == 1 {
                        m = dense::apply_to_matrix(set.projector(f, i), &m)?;
                    }
                }
            }
            w += m * num_complex::Complex64::new(to_f64(&t.coeff), 0.0);
        }
        Ok(w)
    }
}

/// The named witness in canonical form.
pub fn canonical_witness(kind: WitnessKind, n_pairs: usize, boundary: Boundary) -> Result<Witness> {
    if n_pairs == 0 {
        return Err(Error::Unsupported { kind: kind.to_string(), n: n_pairs });
    }
    let alpha = default_alpha();
    let full = full_mask(n_pairs);
    let fam = |f: Family, s: &[usize]| TermMask::from_singlets(n_pairs, boundary, f, s);
    let term = |coeff: i128, mask: TermMask| WitnessTerm { coeff: int(coeff), mask };
    let terms = match kind {
        WitnessKind::Projector => vec![term(-1, TermMask::new(n_pairs, boundary, full, full))],
        WitnessKind::Xz => Family::BOTH.iter().map(|&f| term(-1, TermMask::family(n_pairs, boundary, f, full))).collect(),
        WitnessKind::Singles => Family::BOTH
            .iter()
            .flat_map(|&f| (1..=n_pairs).map(move |i| (f, i)))
            .map(|(f, i)| term(-1, fam(f, &[i])))
            .collect(),
        WitnessKind::W1 | WitnessKind::W2 => {
            if n_pairs != 5 {
                return Err(Error::Unsupported { kind: kind.to_string(), n: n_pairs });
            }
            let mut v = Vec::new();
            for f in Family::BOTH {
                if kind == WitnessKind::W1 {
                    v.push(term(-1, fam(f, &[1, 2, 3])));
                    v.push(term(-1, fam(f, &[4, 5])));
                } else {
                    v.push(term(-1, fam(f, &[1, 2, 3])));
                    v.push(term(-1, fam(f, &[3, 4, 5])));
                    v.push(term(1, fam(f, &[3])));
                }
            }
            v
        }
    };
    Ok(Witness::tight(n_pairs, boundary, alpha, terms))
}

/// tr(W rho) for rho = (1-p)|Psi><Psi| + p I/2^{2N}:
/// beta + sum_j c_j [(1-p) + p 2^{-s_j}].
pub fn noisy_expectation(w: &Witness, p: &Rational) -> Result<Rational> {
    if p.is_negative() || *p > int(1) {
        return Err(Error::NoiseOutOfRange(to_f64(p)));
    }
    let one = int(1);
    let mut v = w.beta;
    for t in &w.terms {
        v += t.coeff * ((one - p) + p * pow2_neg(t.mask.weight()));
    }
    Ok(v)
}

/// Noise weight at which the expectation crosses zero.
pub fn p_max(w: &Witness) -> Result<Rational> {
    let v0 = w.beta + w.coeff_sum();
    if !v0.is_negative() {
        return Err(Error::NonDetecting(format!("expectation {} at p = 0 is not negative", rational::format(&v0))));
    }
    // Slope in p: sum_j c_j (2^{-s_j} - 1) = sum_j (-c_j)(1 - 2^{-s_j}).
    let slope: Rational = w.terms.iter().map(|t| t.coeff * (pow2_neg(t.mask.weight()) - int(1))).sum();
    if !slope.is_positive() {
        return Err(Error::NonDetecting("expectation does not increase with noise".into()));
    }
    Ok(-v0 / slope)
}

/// Minimum eigenvalue of Q = W - (alpha I - |Psi><Psi|), exactly.
///
/// All 2N projectors commute and have one-dimensional joint eigenspaces
/// labelled by eigenvalue patterns (x, y) in {0,1}^N x {0,1}^N, the target
/// being all ones. W is diagonal there: W(x, y) = beta + sum_j c_j prod x_i y_i.
/// Single-family terms separate, so the scan costs 2^N per family.
pub fn exact_min_q_eigenvalue(w: &Witness) -> Result<Rational> {
    let n = w.n_pairs;
    let full = full_mask(n);
    let mixed = w.terms.iter().any(|t| t.mask.single_family().is_none());
    let shift = w.beta - w.alpha;
    if mixed {
        if 2 * n > 24 {
            return Err(Error::CapExceeded { what: format!("joint eigenvalue scan over {} patterns", 2 * n), cap: 24 });
        }
        let mut best: Option<Rational> = None;
        for x in 0..=full {
            for y in 0..=full {
                let mut v = shift;
                for t in &w.terms {
                    if t.mask.xx & !x == 0 && t.mask.zz & !y == 0 {
                        v += t.coeff;
                    }
                }
                if x == full && y == full {
                    v += int(1);
                }
                best = Some(best.map_or(v, |b: Rational| b.min(v)));
            }
        }
        return Ok(best.unwrap());
    }
    if n > 26 {
        return Err(Error::CapExceeded { what: format!("joint eigenvalue scan over {n} singlets"), cap: 26 });
    }
    // Per family: minimum over all patterns, over patterns other than all-ones, and the all-ones value.
    let mut stats = Vec::new();
    for f in Family::BOTH {
        let terms: Vec<(u64, Rational)> = w.terms.iter().filter(|t| t.mask.single_family() == Some(f)).map(|t| (t.mask.bits(f), t.coeff)).collect();
        let mut min_all: Option<Rational> = None;
        let mut min_rest: Option<Rational> = None;
        let mut at_one = Rational::zero();
        for x in 0..=full {
            let v: Rational = terms.iter().filter(|(m, _)| m & !x == 0).map(|(_, c)| *c).sum();
            min_all = Some(min_all.map_or(v, |b| b.min(v)));
            if x == full {
                at_one = v;
            } else {
                min_rest = Some(min_rest.map_or(v, |b| b.min(v)));
            }
        }
        stats.push((min_all.unwrap(), min_rest, at_one));
    }
    let (ax, rx, ox) = stats[0];
    let (az, rz, oz) = stats[1];
    let mut best = shift + ox + oz + int(1);
    if let Some(rx) = rx {
        best = best.min(shift + rx + az);
    }
    if let Some(rz) = rz {
        best = best.min(shift + ax + rz);
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Fail).collect()
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: &str, status: CheckStatus, detail: String) {
        self.checks.push(Check { name: name.into(), status, detail });
    }
}

pub const PSD_TOL: f64 = 1e-9;

/// Tightness, Q >= 0 (exact joint-eigenvalue scan and dense eigensolve), the
/// sign change of the noisy expectation around p_max, and the stored alpha
/// against the Schmidt scan.
pub fn validate(w: &Witness, caps: &DenseCaps) -> Result<ValidationReport> {
    let mut r = ValidationReport { checks: Vec::new() };
    let defect = w.tightness_defect();
    if defect.is_zero() {
        r.push("tightness", CheckStatus::Pass, format!("beta + sum c = {}", rational::format(&(w.alpha - int(1)))));
    } else {
        r.push("tightness", CheckStatus::Fail, format!("beta + sum c - (alpha - 1) = {}", rational::format(&defect)));
    }
    if w.terms.iter().any(|t| t.mask.n_pairs != w.n_pairs || t.mask.boundary != w.boundary) {
        r.push("shape", CheckStatus::Fail, "term mask does not match the witness chain".into());
        return Ok(r);
    }

    match exact_min_q_eigenvalue(w) {
        Ok(m) if !m.is_negative() => r.push("q_spectrum", CheckStatus::Pass, format!("min eigenvalue of Q = {}", rational::format(&m))),
        Ok(m) => r.push("q_spectrum", CheckStatus::Fail, format!("Q not PSD: min eigenvalue {}", rational::format(&m))),
        Err(e) => r.push("q_spectrum", CheckStatus::Skipped, e.to_string()),
    }

    let n = n_qubits(w.n_pairs);
    let pm = p_max(w);
    if n <= caps.matrix_qubits {
        let set = build_stabilizers(w.n_pairs, w.boundary)?;
        let wm = w.dense_operator(&set, caps)?;
        let psi = dense::build_target_state(w.n_pairs, w.boundary, caps)?;
        let dim = 1usize << n;
        let alpha = to_f64(&w.alpha);
        let mut q = &wm - CMatrix::identity(dim, dim) * num_complex::Complex64::new(alpha, 0.0) + psi.projector();
        q = (&q + q.adjoint()) * num_complex::Complex64::new(0.5, 0.0);
        let e = min_eigenvalue(&q);
        if e >= -PSD_TOL {
            r.push("q_psd", CheckStatus::Pass, format!("dense min eigenvalue of Q = {e:.3e}"));
        } else {
            r.push("q_psd", CheckStatus::Fail, format!("Q not PSD: dense min eigenvalue {e:.3e}"));
        }
        match &pm {
            Ok(p) => {
                let p = to_f64(p);
                let eps = 1e-3 * p.max(1e-3);
                let below = p - eps;
                let above = p + eps;
                let value = |x: f64| -> Result<f64> {
                    let rho = noisy_state(w.n_pairs, x, w.boundary, caps)?;
                    // tr(W rho) without forming the product.
                    Ok(wm.component_mul(&rho.matrix.transpose()).sum().re)
                };
                let vb = if below >= 0.0 { Some(value(below)?) } else { None };
                let va = if above <= 1.0 { Some(value(above)?) } else { None };
                let ok = vb.map_or(true, |v| v < 0.0) && va.map_or(true, |v| v > 0.0);
                let detail = format!("tr(W rho) = {vb:?} at p = {below:.6}, {va:?} at p = {above:.6}");
                r.push("sign_change", if ok { CheckStatus::Pass } else { CheckStatus::Fail }, detail);
            }
            Err(e) => r.push("sign_change", CheckStatus::Fail, e.to_string()),
        }
    } else {
        r.push("q_psd", CheckStatus::Skipped, format!("PSD check skipped: {n} qubits exceed the dense cap of {}", caps.matrix_qubits));
        match &pm {
            Ok(_) => r.push("sign_change", CheckStatus::Skipped, "dense expectation skipped beyond the cap".into()),
            Err(e) => r.push("sign_change", CheckStatus::Fail, e.to_string()),
        }
    }

    if n <= caps.schmidt_qubits {
        let psi = dense::build_target_state(w.n_pairs, w.boundary, caps)?;
        let a = max_schmidt_sq(&psi, caps)?;
        let stored = to_f64(&w.alpha);
        if stored >= a - 1e-10 {
            r.push("alpha", CheckStatus::Pass, format!("stored alpha {stored} >= max Schmidt^2 {a:.12}"));
        } else {
            r.push("alpha", CheckStatus::Fail, format!("stored alpha {stored} below max Schmidt^2 {a:.12}"));
        }
    } else {
        r.push("alpha", CheckStatus::Skipped, format!("Schmidt scan skipped: {n} qubits exceed the cap of {}", caps.schmidt_qubits));
    }
    Ok(r)
}

/// Exact LMC of the witness: per-family covers over the union of its terms.
pub fn witness_lmc(w: &Witness, opts: &CoverOptions) -> Result<LmcReport> {
    lmc_exact(&w.masks(), opts)
}

/// prod_{i in ones} P_i * prod_{j in zeros} (I - P_j), a positive operator for
/// any disjoint selections of the commuting projectors.
pub fn tight_inequality(set: &GeneralizedStabilizerSet, ones: &TermMask, zeros: &TermMask) -> Result<ExactSum> {
    if !ones.and(zeros).is_empty() {
        return Err(Error::Invalid("index sets overlap".into()));
    }
    let n = set.n_qubits();
    let id = ExactSum::identity(n);
    let mut op = (*set.expand_term(ones)).clone();
    for f in Family::BOTH {
        for i in 0..set.n_pairs {
            if zeros.bits(f) >> i & 1 == 1 {
                op = op.mul(&id.sub(set.projector(f, i))?)?;
            }
        }
    }
    Ok(op)
}

// ---- JSON ----

#[derive(Serialize, Deserialize)]
struct TermJson {
    coeff: String,
    xx_mask: String,
    zz_mask: String,
}

#[derive(Serialize, Deserialize)]
struct WitnessJson {
    version: u32,
    n_pairs: usize,
    boundary: Boundary,
    alpha: String,
    beta: String,
    terms: Vec<TermJson>,
    lmc: Option<u128>,
    p_max: Option<String>,
}

fn parse_hex(s: &str) -> Result<u64> {
    let digits = s.strip_prefix("0x").ok_or_else(|| Error::Parse(format!("mask {s:?} must start with 0x")))?;
    u64::from_str_radix(digits, 16).map_err(|e| Error::Parse(format!("mask {s:?}: {e}")))
}

impl Witness {
    pub fn to_json(&self, lmc: Option<u128>) -> String {
        let j = WitnessJson {
            version: SCHEMA_VERSION,
            n_pairs: self.n_pairs,
            boundary: self.boundary,
            alpha: rational::format(&self.alpha),
            beta: rational::format(&self.beta),
            terms: self
                .terms
                .iter()
                .map(|t| TermJson { coeff: rational::format(&t.coeff), xx_mask: format!("{:#x}", t.mask.xx), zz_mask: format!("{:#x}", t.mask.zz) })
                .collect(),
            lmc,
            p_max: p_max(self).ok().map(|p| rational::format(&p)),
        };
        serde_json::to_string_pretty(&j).expect("serializable")
    }

    /// Parse witness JSON. The recorded LMC and p_max are returned as stored,
    /// not checked against the terms.
    pub fn from_json(s: &str) -> Result<WitnessFile> {
        let j: WitnessJson = serde_json::from_str(s).map_err(|e| Error::Parse(format!("witness JSON: {e}")))?;
        if j.version != SCHEMA_VERSION {
            return Err(Error::Parse(format!("unsupported schema version {}", j.version)));
        }
        if j.n_pairs == 0 || j.n_pairs > 32 {
            return Err(Error::Parse(format!("n_pairs {} out of range", j.n_pairs)));
        }
        let full = full_mask(j.n_pairs);
        let mut terms = Vec::new();
        for t in &j.terms {
            let (xx, zz) = (parse_hex(&t.xx_mask)?, parse_hex(&t.zz_mask)?);
            if xx & !full != 0 || zz & !full != 0 {
                return Err(Error::Parse(format!("mask {}/{} exceeds {} singlets", t.xx_mask, t.zz_mask, j.n_pairs)));
            }
            terms.push(WitnessTerm { coeff: rational::parse(&t.coeff)?, mask: TermMask::new(j.n_pairs, j.boundary, xx, zz) });
        }
        let witness = Witness::new(j.n_pairs, j.boundary, rational::parse(&j.alpha)?, rational::parse(&j.beta)?, terms);
        let p_max = j.p_max.as_deref().map(rational::parse).transpose()?;
        Ok(WitnessFile { witness, lmc: j.lmc, p_max })
    }
}

/// Contents of a witness JSON file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WitnessFile {
    pub witness: Witness,
    pub lmc: Option<u128>,
    pub p_max: Option<Rational>,
}

/// 1 - p_max.
pub fn f_min(p: &Rational) -> Rational {
    Rational::one() - p
}
