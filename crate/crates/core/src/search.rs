//! Witness search under a total measurement budget: candidate covers,
//! common-divisor extraction, truncation and exact scoring.

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde_json::json;

use crate::genstab::{full_mask, Family, TermMask};
use crate::layout::Boundary;
use crate::lms::{cover_fits, cover_requirements, lmc_formula, structural_requirements, CoverOptions, CoverResult, LmcReport, Requirements};
use crate::rational::{self, int, Rational};
use crate::witness::{self, default_alpha, Witness, WitnessTerm};
use crate::{Error, Result};

/// Largest chain length accepted by the search.
pub const MAX_PAIRS: usize = 32;
/// Largest N for which arbitrary (non-run) masks are enumerated as terms.
pub const SMALL_N: usize = 6;

/// How a single term's measurement cost is judged by the per-term filter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TermCost {
    /// Exact cover of the term's strings.
    Exact,
    /// Closed-form gap formula.
    Formula,
}

/// How the total budget is divided between the XX and ZZ families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SplitMode {
    /// Both families use the same decomposition and half the budget each.
    Symmetric,
    /// Every split of the budget; small N only.
    Scan,
}

#[derive(Clone, Debug)]
pub struct SearchOptions {
    pub term_cost: TermCost,
    pub split: SplitMode,
    pub beam_width: usize,
    /// Largest N whose run partitions are enumerated exhaustively; beam search beyond.
    pub exhaustive_max_n: usize,
    pub cover: CoverOptions,
    pub alpha: Rational,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            term_cost: TermCost::Exact,
            split: SplitMode::Symmetric,
            beam_width: 64,
            exhaustive_max_n: 12,
            cover: CoverOptions { node_budget: 20_000, ..CoverOptions::default() },
            alpha: default_alpha(),
        }
    }
}

/// Single-family masks whose individual cost fits a per-family budget.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidateSet {
    pub n_pairs: usize,
    pub boundary: Boundary,
    pub budget: u128,
    pub candidates: Vec<u64>,
}

impl CandidateSet {
    pub fn contains(&self, mask: u64) -> bool {
        self.candidates.binary_search(&mask).is_ok()
    }
}

/// One truncation step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Truncation {
    DropTerm(u64),
    DropBit { term: u64, bit: u64 },
}

impl Truncation {
    fn describe(&self) -> String {
        match self {
            Truncation::DropTerm(t) => format!("drop {}", fmt_bits(*t)),
            Truncation::DropBit { term, bit } => format!("trim {} from {}", fmt_bits(*bit), fmt_bits(*term)),
        }
    }
}

/// Bounding decomposition of one family's product projector:
/// prod P >= sum_j q_j - (t - 1) P_cd, with P_cd = I when `gcd` is empty.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Decomposition {
    pub terms: Vec<u64>,
    pub gcd: u64,
}

impl Decomposition {
    /// Slope contribution times 2^N: 2^N (1 - sum 2^{-s_j} + (t - 1) 2^{-g}).
    pub fn scaled_objective(&self, n_pairs: usize) -> u128 {
        let one = 1u128 << n_pairs;
        let t = self.terms.len() as u128;
        let sum: u128 = self.terms.iter().map(|q| one >> q.count_ones()).sum();
        one + (t - 1) * (one >> self.gcd.count_ones()) - sum
    }

    pub fn objective(&self, n_pairs: usize) -> Rational {
        Rational::new(self.scaled_objective(n_pairs) as i128, 1i128 << n_pairs)
    }
}

/// Singlet list (1-based) of a family mask.
pub fn fmt_bits(bits: u64) -> String {
    let v: Vec<String> = (0..64).filter(|i| bits >> i & 1 == 1).map(|i| (i + 1).to_string()).collect();
    if v.is_empty() {
        "-".into()
    } else {
        v.join(",")
    }
}

fn arc(n: usize, start: usize, len: usize) -> u64 {
    (0..len).fold(0u64, |m, i| m | 1 << ((start + i) % n))
}

fn and_all(terms: &[u64]) -> u64 {
    terms.iter().fold(u64::MAX, |a, &t| a & t)
}

fn or_all(terms: &[u64]) -> u64 {
    terms.iter().fold(0, |a, &t| a | t)
}

/// Common divisor of all terms, extracted repeatedly until the remaining parts share nothing.
pub fn extract_gcd(terms: &[u64]) -> (u64, Vec<u64>) {
    if terms.is_empty() {
        return (0, Vec::new());
    }
    let mut gcd = 0;
    let mut reduced = terms.to_vec();
    loop {
        let g = and_all(&reduced);
        if g == 0 {
            break;
        }
        gcd |= g;
        reduced.iter_mut().for_each(|t| *t &= !g);
    }
    (gcd, reduced)
}

/// Removes whole terms, then single divisors, while the common divisor and
/// coverage of `full` are preserved. Terms are visited by decreasing degree,
/// ties by increasing mask.
pub fn truncate(terms: &[u64], gcd: u64, full: u64) -> (Vec<u64>, Vec<Truncation>) {
    let mut cur = terms.to_vec();
    let mut log = Vec::new();
    let ok = |v: &[u64]| !v.is_empty() && and_all(v) == gcd && or_all(v) == full;
    'outer: loop {
        let mut order: Vec<usize> = (0..cur.len()).collect();
        order.sort_by_key(|&i| (std::cmp::Reverse(cur[i].count_ones()), cur[i]));
        for &i in &order {
            let mut next = cur.clone();
            next.remove(i);
            if ok(&next) {
                log.push(Truncation::DropTerm(cur[i]));
                cur = next;
                continue 'outer;
            }
        }
        for &i in &order {
            let term = cur[i];
            for b in 0..64 {
                let bit = 1u64 << b;
                if term & bit == 0 || gcd & bit != 0 || term == bit {
                    continue;
                }
                let mut next = cur.clone();
                next[i] = term & !bit;
                if ok(&next) {
                    log.push(Truncation::DropBit { term, bit });
                    cur = next;
                    continue 'outer;
                }
            }
        }
        break;
    }
    cur.sort_unstable();
    (cur, log)
}

/// Witness alpha I - (D_XX + D_ZZ - I) from one decomposition per family.
pub fn assemble_witness(n_pairs: usize, boundary: Boundary, decomps: &[Decomposition; 2], alpha: Rational) -> Result<Witness> {
    let mut terms = Vec::new();
    let mut beta = alpha + int(1);
    for (f, d) in Family::BOTH.into_iter().zip(decomps) {
        if d.terms.is_empty() {
            return Err(Error::Invalid(format!("empty decomposition for the {} family", f.name())));
        }
        let t = d.terms.len() as i128;
        for &q in &d.terms {
            terms.push(WitnessTerm { coeff: int(-1), mask: TermMask::family(n_pairs, boundary, f, q) });
        }
        if d.gcd == 0 {
            beta += int(t - 1);
        } else if t > 1 {
            terms.push(WitnessTerm { coeff: int(t - 1), mask: TermMask::family(n_pairs, boundary, f, d.gcd) });
        }
    }
    let w = Witness::new(n_pairs, boundary, alpha, beta, terms);
    if !w.is_tight() {
        return Err(Error::Invalid(format!("assembled witness is not tight (defect {})", w.tightness_defect())));
    }
    Ok(w)
}

/// Single-family masks with individual cost at most `family_budget`.
pub fn enumerate_candidates(n_pairs: usize, boundary: Boundary, family_budget: u128, cost: TermCost, opts: &CoverOptions) -> Result<CandidateSet> {
    check_n(n_pairs)?;
    if family_budget < 9 {
        return Err(Error::Infeasible(family_budget));
    }
    let mut kmax = 0u32;
    while 3u128.pow(kmax + 1) <= family_budget && kmax < 2 * MAX_PAIRS as u32 {
        kmax += 1;
    }
    let mut found = BTreeSet::new();
    let ctx = FormulaDfs { n: n_pairs, boundary, budget: family_budget, kmax };
    for first in 0..n_pairs {
        let e0 = match boundary {
            Boundary::Open => 2,
            Boundary::Periodic => 0,
        };
        ctx.walk(1 << first, first, first, e0, &mut found)?;
    }
    if cost == TermCost::Exact {
        for start in 0..n_pairs {
            for len in 1..=n_pairs {
                let a = arc(n_pairs, start, len);
                if found.contains(&a) || (boundary == Boundary::Open && start + len > n_pairs) {
                    continue;
                }
                if single_term_cost(n_pairs, boundary, a, opts)? <= family_budget {
                    found.insert(a);
                }
            }
        }
    }
    let candidates: Vec<u64> = found.into_iter().collect();
    if or_all(&candidates) != full_mask(n_pairs) {
        return Err(Error::Infeasible(family_budget));
    }
    Ok(CandidateSet { n_pairs, boundary, budget: family_budget, candidates })
}

const MAX_CANDIDATES: usize = 1 << 22;

struct FormulaDfs {
    n: usize,
    boundary: Boundary,
    budget: u128,
    kmax: u32,
}

impl FormulaDfs {
    fn walk(&self, mask: u64, first: usize, last: usize, e: u32, out: &mut BTreeSet<u64>) -> Result<()> {
        let t = TermMask::family(self.n, self.boundary, Family::XX, mask);
        if lmc_formula(&t)? <= self.budget {
            out.insert(mask);
            if out.len() > MAX_CANDIDATES {
                return Err(Error::CapExceeded { what: "candidate set".into(), cap: MAX_CANDIDATES });
            }
        }
        let k = mask.count_ones();
        for j in last + 1..self.n {
            let e2 = e + (j - last).min(2) as u32;
            let wrap = match self.boundary {
                Boundary::Periodic => (first + self.n - j).min(2) as u32,
                Boundary::Open => 0,
            };
            let special_pair = k == 1 && self.budget >= 15;
            if e2 + wrap <= self.kmax || special_pair {
                self.walk(mask | 1 << j, first, j, e2, out)?;
            }
        }
        Ok(())
    }
}

fn check_n(n_pairs: usize) -> Result<()> {
    if n_pairs == 0 || n_pairs > MAX_PAIRS {
        return Err(Error::Invalid(format!("N = {n_pairs} outside 1..={MAX_PAIRS}")));
    }
    Ok(())
}

fn single_term_cost(n: usize, boundary: Boundary, mask: u64, opts: &CoverOptions) -> Result<u128> {
    let req = structural_requirements(&[TermMask::family(n, boundary, Family::XX, mask)], Family::XX)?;
    Ok(cover_requirements(&req, opts).count)
}

/// Outcome of a budgeted search.
#[derive(Clone, Debug)]
pub struct SearchResult {
    pub n_pairs: usize,
    pub boundary: Boundary,
    pub budget: u128,
    /// XX then ZZ.
    pub decompositions: [Decomposition; 2],
    pub witness: Witness,
    pub lmc: LmcReport,
    pub p_max: Rational,
    pub p_cd: TermMask,
    pub t_star: Vec<TermMask>,
    /// True when a smaller budget's result was carried forward.
    pub carried: bool,
    pub audit: Vec<String>,
}

impl SearchResult {
    pub fn f_min(&self) -> Rational {
        witness::f_min(&self.p_max)
    }

    pub fn audit_jsonl(&self) -> String {
        let mut s = self.audit.join("\n");
        if !s.is_empty() {
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Debug)]
struct Cand {
    key: u128,
    decomp: Decomposition,
    raw: Vec<u64>,
    trunc: Vec<Truncation>,
}

impl Cand {
    fn order(&self) -> (u128, usize, &[u64]) {
        (self.key, self.decomp.terms.len(), &self.decomp.terms)
    }
}

struct Evaluated {
    cand: Cand,
    cover: Arc<CoverResult>,
}

struct Searcher<'a> {
    n: usize,
    boundary: Boundary,
    full: u64,
    opts: &'a SearchOptions,
    term_fits_cache: Mutex<HashMap<(u64, u128), bool>>,
    audit: Mutex<Vec<String>>,
}

impl<'a> Searcher<'a> {
    fn new(n: usize, boundary: Boundary, opts: &'a SearchOptions) -> Self {
        Searcher { n, boundary, full: full_mask(n), opts, term_fits_cache: Mutex::new(HashMap::new()), audit: Mutex::new(Vec::new()) }
    }

    /// Whether a single term's cost is at most `limit`; the gap formula is an
    /// upper bound on the exact cover, so it settles most cases.
    fn term_fits(&self, mask: u64, limit: u128) -> Result<bool> {
        let t = TermMask::family(self.n, self.boundary, Family::XX, mask);
        let formula = lmc_formula(&t)?;
        if formula <= limit || self.opts.term_cost == TermCost::Formula {
            return Ok(formula <= limit);
        }
        if let Some(&ok) = self.term_fits_cache.lock().unwrap().get(&(mask, limit)) {
            return Ok(ok);
        }
        let ok = cover_fits(&structural_requirements(&[t], Family::XX)?, &self.opts.cover, limit);
        self.term_fits_cache.lock().unwrap().insert((mask, limit), ok);
        Ok(ok)
    }

    fn terms_fit(&self, terms: &[u64], limit: u128) -> Result<bool> {
        for &t in terms {
            if !self.term_fits(t, limit)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn req(&self, terms: &[u64]) -> Result<Requirements> {
        let masks: Vec<TermMask> = terms.iter().map(|&t| TermMask::family(self.n, self.boundary, Family::XX, t)).collect();
        structural_requirements(&masks, Family::XX)
    }

    fn family_fits(&self, terms: &[u64], limit: u128) -> Result<bool> {
        Ok(cover_fits(&self.req(terms)?, &self.opts.cover, limit))
    }

    fn family_cover(&self, terms: &[u64]) -> Result<Arc<CoverResult>> {
        Ok(cover_requirements(&self.req(terms)?, &self.opts.cover))
    }

    fn pipeline(&self, raw: Vec<u64>) -> Cand {
        let (gcd, _) = extract_gcd(&raw);
        let (terms, trunc) = truncate(&raw, gcd, self.full);
        let decomp = Decomposition { terms, gcd };
        Cand { key: decomp.scaled_objective(self.n), decomp, raw, trunc }
    }

    fn log(&self, c: &Cand, cover: Option<&CoverResult>, admissible: bool) {
        let line = json!({
            "candidate": c.raw.iter().map(|&t| fmt_bits(t)).collect::<Vec<_>>(),
            "gcd": fmt_bits(c.decomp.gcd),
            "truncations": c.trunc.iter().map(|t| t.describe()).collect::<Vec<_>>(),
            "terms": c.decomp.terms.iter().map(|&t| fmt_bits(t)).collect::<Vec<_>>(),
            "score": rational::format(&c.decomp.objective(self.n)),
            "family_lmc": cover.map(|c| c.count.to_string()),
            "admissible": admissible,
        });
        self.audit.lock().unwrap().push(line.to_string());
    }

    /// Candidate structures for one family, each passed through gcd extraction and truncation.
    fn candidates(&self, family_budget: u128) -> Result<Vec<Cand>> {
        let n = self.n;
        let mut raws: BTreeSet<Vec<u64>> = BTreeSet::new();
        raws.insert(vec![self.full]);
        for pair in self.arc_pairs() {
            raws.insert(pair);
        }
        if n <= self.opts.exhaustive_max_n {
            for p in self.run_partitions() {
                raws.insert(p);
            }
        } else {
            for p in self.beam_partitions(family_budget)? {
                raws.insert(p);
            }
        }
        if n <= SMALL_N {
            let cs = enumerate_candidates(n, self.boundary, family_budget, self.opts.term_cost, &self.opts.cover)?;
            for v in small_structures(n, &cs.candidates) {
                raws.insert(v);
            }
        }
        let mut cands: Vec<Cand> = raws.into_par_iter().map(|r| self.pipeline(r)).collect();
        cands.sort_by(|a, b| a.order().cmp(&b.order()));
        cands.dedup_by(|a, b| a.decomp == b.decomp);
        Ok(cands)
    }

    /// Two arcs whose union is the whole chain and whose overlap is nonempty.
    fn arc_pairs(&self) -> Vec<Vec<u64>> {
        let n = self.n;
        let mut out = Vec::new();
        match self.boundary {
            Boundary::Open => {
                for a in 1..n {
                    for b in 1..a {
                        out.push(vec![arc(n, 0, a), arc(n, b, n - b)]);
                    }
                }
            }
            Boundary::Periodic => {
                let arcs: BTreeSet<u64> = (0..n).flat_map(|s| (1..n).map(move |l| arc(n, s, l))).collect();
                let arcs: Vec<u64> = arcs.into_iter().collect();
                for (i, &a) in arcs.iter().enumerate() {
                    for &b in &arcs[i + 1..] {
                        if a | b == self.full && a & b != 0 {
                            out.push(vec![a, b]);
                        }
                    }
                }
            }
        }
        out
    }

    /// Every partition of the chain (cycle) into at least two runs.
    fn run_partitions(&self) -> Vec<Vec<u64>> {
        let n = self.n;
        let mut out = Vec::new();
        match self.boundary {
            Boundary::Open => {
                for cuts in 1u64..(1 << (n - 1)) {
                    out.push(runs_from_cuts(n, cuts << 1, 0));
                }
            }
            Boundary::Periodic => {
                for cuts in 1u64..(1 << n) {
                    if cuts.count_ones() >= 2 {
                        out.push(runs_from_cuts(n, cuts, cuts.trailing_zeros() as usize));
                    }
                }
            }
        }
        out
    }

    /// Run partitions grown left to right, keeping the `beam_width` best
    /// admissible prefixes ending at each position.
    fn beam_partitions(&self, family_budget: u128) -> Result<Vec<Vec<u64>>> {
        let n = self.n;
        let width = self.opts.beam_width.max(1);
        let offsets: Vec<usize> = match self.boundary {
            Boundary::Open => vec![0],
            Boundary::Periodic => (0..n).collect(),
        };
        let one = 1u128 << n;
        let mut out = BTreeSet::new();
        for o in offsets {
            let mut pending: Vec<Vec<(u128, Vec<u64>)>> = vec![Vec::new(); n + 1];
            pending[0].push((0, Vec::new()));
            for k in 0..n {
                let mut layer = std::mem::take(&mut pending[k]);
                layer.sort();
                layer.dedup();
                let mut beam = Vec::new();
                for (key, runs) in layer {
                    if beam.len() >= width {
                        break;
                    }
                    if runs.len() >= 2 {
                        let mut sorted = runs.clone();
                        sorted.sort_unstable();
                        if !self.family_fits(&sorted, family_budget)? {
                            continue;
                        }
                    }
                    beam.push((key, runs));
                }
                for (key, runs) in beam {
                    for len in 1..=n - k {
                        if k == 0 && len == n {
                            continue;
                        }
                        let run = arc(n, o + k, len);
                        if !self.term_fits(run, family_budget)? {
                            continue;
                        }
                        let mut next = runs.clone();
                        next.push(run);
                        pending[k + len].push((key + one - (one >> len), next));
                    }
                }
            }
            let mut last = std::mem::take(&mut pending[n]);
            last.sort();
            last.dedup();
            let mut kept = 0;
            for (_, mut runs) in last {
                if kept >= width {
                    break;
                }
                runs.sort_unstable();
                if self.family_fits(&runs, family_budget)? {
                    out.insert(runs);
                    kept += 1;
                }
            }
        }
        Ok(out.into_iter().collect())
    }

    /// Best admissible candidate: lowest objective, then fewer terms, then smaller cover, then mask order.
    fn first_admissible(&self, cands: &[Cand], family_budget: u128) -> Result<Option<Evaluated>> {
        let mut i = 0;
        while i < cands.len() {
            let mut j = i;
            while j < cands.len() && cands[j].key == cands[i].key && cands[j].decomp.terms.len() == cands[i].decomp.terms.len() {
                j += 1;
            }
            let group = &cands[i..j];
            let fitting: Vec<&Cand> = group
                .iter()
                .map(|c| Ok((c, self.terms_fit(&c.decomp.terms, family_budget)?)))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .filter(|(_, ok)| *ok)
                .map(|(c, _)| c)
                .collect();
            let fits: Vec<bool> = fitting.par_iter().map(|c| self.family_fits(&self.with_gcd(&c.decomp), family_budget)).collect::<Result<Vec<_>>>()?;
            let mut best: Option<Evaluated> = None;
            for (c, ok) in fitting.into_iter().zip(fits) {
                // Exact covers only for admissible candidates: they break ties and are reported.
                let cover = if ok { Some(self.family_cover(&self.with_gcd(&c.decomp))?) } else { None };
                self.log(c, cover.as_deref(), ok);
                if let Some(cover) = cover {
                    if best.as_ref().map_or(true, |b| cover.count < b.cover.count) {
                        best = Some(Evaluated { cand: c.clone(), cover });
                    }
                }
            }
            if best.is_some() {
                return Ok(best);
            }
            i = j;
        }
        Ok(None)
    }

    fn with_gcd(&self, d: &Decomposition) -> Vec<u64> {
        let mut v = d.terms.clone();
        if d.terms.len() > 1 && d.gcd != 0 {
            v.push(d.gcd);
        }
        v
    }

    /// (cost, candidate) frontier: each entry is strictly cheaper than every better-scoring one.
    fn frontier(&self, cands: &[Cand], limit: u128) -> Result<Vec<Evaluated>> {
        let mut out: Vec<Evaluated> = Vec::new();
        let mut cheapest = u128::MAX;
        for c in cands {
            if !self.terms_fit(&c.decomp.terms, limit.min(cheapest.saturating_sub(1)))? {
                continue;
            }
            let terms = self.with_gcd(&c.decomp);
            if !self.family_fits(&terms, limit.min(cheapest.saturating_sub(1)))? {
                continue;
            }
            let cover = self.family_cover(&terms)?;
            let useful = cover.count <= limit && cover.count < cheapest;
            self.log(c, Some(&cover), useful);
            if useful {
                cheapest = cover.count;
                out.push(Evaluated { cand: c.clone(), cover });
            }
        }
        Ok(out)
    }
}

fn runs_from_cuts(n: usize, cuts: u64, first: usize) -> Vec<u64> {
    let mut runs = Vec::new();
    let mut cur = 0u64;
    for i in 0..n {
        let p = (first + i) % n;
        if i > 0 && cuts >> p & 1 == 1 {
            runs.push(cur);
            cur = 0;
        }
        cur |= 1 << p;
    }
    runs.push(cur);
    runs.sort_unstable();
    runs
}

/// Covering pairs with a shared divisor and set partitions, over arbitrary candidate masks.
fn small_structures(n: usize, candidates: &[u64]) -> Vec<Vec<u64>> {
    let full = full_mask(n);
    let mut out = Vec::new();
    for (i, &a) in candidates.iter().enumerate() {
        for &b in &candidates[i + 1..] {
            if a | b == full && a & b != 0 && a != full && b != full {
                out.push(vec![a, b]);
            }
        }
    }
    let set: BTreeSet<u64> = candidates.iter().copied().collect();
    let mut stack = Vec::new();
    set_partitions(full, &set, &mut stack, &mut out);
    out
}

fn set_partitions(rest: u64, set: &BTreeSet<u64>, stack: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
    if rest == 0 {
        if stack.len() >= 2 {
            let mut v = stack.clone();
            v.sort_unstable();
            out.push(v);
        }
        return;
    }
    let low = rest & rest.wrapping_neg();
    let others = rest & !low;
    let mut sub = others;
    loop {
        let block = sub | low;
        if set.contains(&block) {
            stack.push(block);
            set_partitions(rest & !block, set, stack, out);
            stack.pop();
        }
        if sub == 0 {
            break;
        }
        sub = (sub - 1) & others;
    }
}

fn finish(
    n: usize,
    boundary: Boundary,
    budget: u128,
    decomps: [Decomposition; 2],
    opts: &SearchOptions,
    mut audit: Vec<String>,
) -> Result<SearchResult> {
    let w = assemble_witness(n, boundary, &decomps, opts.alpha)?;
    let p = witness::p_max(&w)?;
    let obj = decomps[0].objective(n) + decomps[1].objective(n);
    if p != (int(1) - opts.alpha) / obj {
        return Err(Error::Invalid(format!("p_max {} disagrees with the decomposition score", rational::format(&p))));
    }
    let q = witness::exact_min_q_eigenvalue(&w)?;
    if q < int(0) {
        return Err(Error::Invalid(format!("search produced Q with eigenvalue {}", rational::format(&q))));
    }
    let lmc = witness::witness_lmc(&w, &opts.cover)?;
    if lmc.count > budget {
        return Err(Error::Invalid(format!("search result needs {} settings, over the budget {budget}", lmc.count)));
    }
    let p_cd = TermMask::new(n, boundary, decomps[0].gcd, decomps[1].gcd);
    let t_star = Family::BOTH
        .into_iter()
        .zip(&decomps)
        .flat_map(|(f, d)| d.terms.iter().map(move |&q| TermMask::family(n, boundary, f, q)))
        .collect();
    audit.push(
        json!({
            "selected": {
                "xx": decomps[0].terms.iter().map(|&t| fmt_bits(t)).collect::<Vec<_>>(),
                "zz": decomps[1].terms.iter().map(|&t| fmt_bits(t)).collect::<Vec<_>>(),
                "gcd": [fmt_bits(decomps[0].gcd), fmt_bits(decomps[1].gcd)],
                "lmc": lmc.count.to_string(),
                "p_max": rational::format(&p),
            }
        })
        .to_string(),
    );
    Ok(SearchResult { n_pairs: n, boundary, budget, decompositions: decomps, witness: w, lmc, p_max: p, p_cd, t_star, carried: false, audit })
}

/// Witness with the largest white-noise tolerance whose exact union cover fits `budget` settings.
pub fn search_optimal(n_pairs: usize, boundary: Boundary, budget: u128, opts: &SearchOptions) -> Result<SearchResult> {
    check_n(n_pairs)?;
    if budget < 18 {
        return Err(Error::Infeasible(budget));
    }
    let s = Searcher::new(n_pairs, boundary, opts);
    let decomps = match opts.split {
        SplitMode::Symmetric => {
            let fb = budget / 2;
            let cands = s.candidates(fb)?;
            let best = s.first_admissible(&cands, fb)?.ok_or(Error::Infeasible(budget))?;
            [best.cand.decomp.clone(), best.cand.decomp]
        }
        SplitMode::Scan => {
            if n_pairs > opts.exhaustive_max_n {
                return Err(Error::Invalid(format!("scan split needs N <= {}", opts.exhaustive_max_n)));
            }
            let limit = budget - 1;
            let cands = s.candidates(limit)?;
            let front = s.frontier(&cands, limit)?;
            let mut best: Option<((u128, usize, u128), usize, usize)> = None;
            for (i, a) in front.iter().enumerate() {
                for (j, b) in front.iter().enumerate() {
                    if a.cover.count + b.cover.count > budget {
                        continue;
                    }
                    let key = (a.cand.key + b.cand.key, a.cand.decomp.terms.len() + b.cand.decomp.terms.len(), a.cover.count + b.cover.count);
                    if best.as_ref().map_or(true, |(k, bi, bj)| {
                        key < *k || (key == *k && (&front[i].cand.decomp, &front[j].cand.decomp) < (&front[*bi].cand.decomp, &front[*bj].cand.decomp))
                    }) {
                        best = Some((key, i, j));
                    }
                }
            }
            let (_, i, j) = best.ok_or(Error::Infeasible(budget))?;
            [front[i].cand.decomp.clone(), front[j].cand.decomp.clone()]
        }
    };
    let audit = std::mem::take(&mut *s.audit.lock().unwrap());
    finish(n_pairs, boundary, budget, decomps, opts, audit)
}

/// Searches each budget in increasing order, carrying the best result forward
/// so that p_max never decreases with the budget.
pub fn search_budgets(n_pairs: usize, boundary: Boundary, budgets: &[u128], opts: &SearchOptions) -> Vec<Result<SearchResult>> {
    let mut order: Vec<usize> = (0..budgets.len()).collect();
    order.sort_by_key(|&i| budgets[i]);
    let mut out: Vec<Option<Result<SearchResult>>> = vec![None; budgets.len()];
    let mut best: Option<SearchResult> = None;
    for i in order {
        let mut r = search_optimal(n_pairs, boundary, budgets[i], opts);
        if let Some(prev) = &best {
            match &r {
                Ok(cur) if cur.p_max >= prev.p_max => {}
                _ if prev.lmc.count <= budgets[i] => {
                    let mut carried = prev.clone();
                    carried.budget = budgets[i];
                    carried.carried = true;
                    carried.audit.push(json!({ "carried_from_budget": prev.budget.to_string() }).to_string());
                    r = Ok(carried);
                }
                _ => {}
            }
        }
        if let Ok(res) = &r {
            best = Some(res.clone());
        }
        out[i] = Some(r);
    }
    out.into_iter().map(|r| r.expect("every budget searched")).collect()
}

/// Ceiling on p_max within the projector-product construction: 3/(16(1 - 2^{-N})).
pub fn p_max_ceiling(n_pairs: usize) -> Rational {
    (int(1) - default_alpha()) / (int(2) * (int(1) - rational::pow2_neg(n_pairs as u32)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(s: &[usize]) -> u64 {
        s.iter().fold(0, |m, &i| m | 1 << (i - 1))
    }

    #[test]
    fn gcd_examples() {
        let (g, r) = extract_gcd(&[bits(&[1, 2, 3]), bits(&[3, 4, 5])]);
        assert_eq!(g, bits(&[3]));
        assert_eq!(r, vec![bits(&[1, 2]), bits(&[4, 5])]);
        let (g, r) = extract_gcd(&[bits(&[1, 2]), bits(&[4])]);
        assert_eq!(g, 0);
        assert_eq!(r, vec![bits(&[1, 2]), bits(&[4])]);
        let (g, r) = extract_gcd(&[bits(&[2, 4])]);
        assert_eq!(g, bits(&[2, 4]));
        assert_eq!(r, vec![0]);
    }

    #[test]
    fn truncation_examples() {
        let full = full_mask(5);
        let t = [bits(&[1, 2, 3]), bits(&[2, 3]), bits(&[3, 4]), bits(&[3, 4, 5])];
        let (out, log) = truncate(&t, bits(&[3]), full);
        assert_eq!(out, vec![bits(&[1, 2, 3]), bits(&[3, 4, 5])]);
        assert_eq!(log, vec![Truncation::DropTerm(bits(&[2, 3])), Truncation::DropTerm(bits(&[3, 4]))]);
        let chain = [bits(&[1, 2]), bits(&[3, 4, 5])];
        assert_eq!(truncate(&chain, 0, full).0, chain.to_vec());
        // Dropping {1,2} would uncover singlet 1.
        let t = [bits(&[1, 2]), bits(&[2, 3, 4, 5])];
        assert_eq!(truncate(&t, bits(&[2]), full).0, t.to_vec());
        // Trimming singlet 1 from {1,3,4,5} keeps the divisor {3}; {2,3,5} then drops out.
        let t = [bits(&[1, 2, 3]), bits(&[1, 3, 4, 5]), bits(&[2, 3, 5])];
        let (out, log) = truncate(&t, bits(&[3]), full);
        assert_eq!(out, vec![bits(&[1, 2, 3]), bits(&[3, 4, 5])]);
        assert_eq!(log, vec![Truncation::DropBit { term: bits(&[1, 3, 4, 5]), bit: 1 }, Truncation::DropTerm(bits(&[2, 3, 5]))]);
    }

    #[test]
    fn assembly_examples() {
        let n = 5;
        let d = Decomposition { terms: vec![bits(&[1, 2, 3]), bits(&[3, 4, 5])], gcd: bits(&[3]) };
        let w = assemble_witness(n, Boundary::Open, &[d.clone(), d], default_alpha()).unwrap();
        assert_eq!(witness::p_max(&w).unwrap(), Rational::new(3, 20));
        let w2 = witness::canonical_witness(witness::WitnessKind::W2, 5, Boundary::Open).unwrap();
        assert_eq!(w.beta, w2.beta);
        let key = |w: &Witness| {
            let mut v: Vec<(u64, u64, Rational)> = w.terms.iter().map(|t| (t.mask.xx, t.mask.zz, t.coeff)).collect();
            v.sort();
            v
        };
        assert_eq!(key(&w), key(&w2));
        for n in 2..=10 {
            let full = Decomposition { terms: vec![full_mask(n)], gcd: full_mask(n) };
            let w = assemble_witness(n, Boundary::Periodic, &[full.clone(), full], default_alpha()).unwrap();
            assert_eq!(witness::p_max(&w).unwrap(), p_max_ceiling(n));
            let singles = Decomposition { terms: (0..n).map(|i| 1u64 << i).collect(), gcd: 0 };
            let w = assemble_witness(n, Boundary::Periodic, &[singles.clone(), singles], default_alpha()).unwrap();
            let ws = witness::canonical_witness(witness::WitnessKind::Singles, n, Boundary::Periodic).unwrap();
            assert_eq!(witness::p_max(&w).unwrap(), witness::p_max(&ws).unwrap());
            assert_eq!(w.beta, ws.beta);
        }
        let empty = Decomposition { terms: vec![], gcd: 0 };
        assert!(assemble_witness(3, Boundary::Open, &[empty.clone(), empty], default_alpha()).is_err());
    }

    #[test]
    fn objective_matches_p_max() {
        let d = Decomposition { terms: vec![bits(&[1, 2, 3]), bits(&[4, 5])], gcd: 0 };
        assert_eq!(d.objective(5), Rational::new(13, 8));
        let w = assemble_witness(5, Boundary::Open, &[d.clone(), d], default_alpha()).unwrap();
        assert_eq!(witness::p_max(&w).unwrap(), Rational::new(3, 26));
    }

    #[test]
    fn candidate_examples() {
        let opts = CoverOptions::default();
        let cs = enumerate_candidates(5, Boundary::Open, 81, TermCost::Formula, &opts).unwrap();
        for m in [bits(&[1, 2, 3]), bits(&[3, 4, 5]), bits(&[1, 2]), bits(&[4, 5]), bits(&[3])] {
            assert!(cs.contains(m), "{}", fmt_bits(m));
        }
        assert!(!cs.contains(full_mask(5)));
        let cs = enumerate_candidates(6, Boundary::Periodic, 9, TermCost::Formula, &opts).unwrap();
        assert_eq!(cs.candidates, (0..6).map(|i| 1u64 << i).collect::<Vec<_>>());
        let cs = enumerate_candidates(5, Boundary::Open, 81, TermCost::Exact, &opts).unwrap();
        assert!(cs.contains(full_mask(5)));
        assert!(matches!(enumerate_candidates(5, Boundary::Open, 8, TermCost::Formula, &opts), Err(Error::Infeasible(8))));
    }

    #[test]
    fn formula_enumeration_is_complete() {
        let opts = CoverOptions::default();
        for n in 3..=8 {
            for b in [Boundary::Open, Boundary::Periodic] {
                for budget in [9u128, 15, 27, 81, 243, 729] {
                    let cs = enumerate_candidates(n, b, budget, TermCost::Formula, &opts).unwrap();
                    let brute: Vec<u64> = (1..=full_mask(n))
                        .filter(|&m| lmc_formula(&TermMask::family(n, b, Family::XX, m)).unwrap() <= budget)
                        .collect();
                    assert_eq!(cs.candidates, brute, "N={n} {b} {budget}");
                }
            }
        }
    }

    #[test]
    fn partitions_are_exhaustive() {
        let opts = SearchOptions::default();
        for (n, b, count) in [(5, Boundary::Open, 15), (5, Boundary::Periodic, 26), (6, Boundary::Periodic, 57)] {
            let s = Searcher::new(n, b, &opts);
            let parts = s.run_partitions();
            assert_eq!(parts.len(), count);
            assert!(parts.iter().all(|p| or_all(p) == full_mask(n) && p.iter().map(|t| t.count_ones()).sum::<u32>() == n as u32));
        }
    }
}
