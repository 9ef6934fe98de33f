//! Local measurement settings and local measurement complexity (LMC).
//!
//! Every string in a single-family projector product factors into 2-qubit
//! blocks (one per coupling gate) that are either identity or one of three
//! block letters, plus the two edge qubits of an open chain which only ever
//! carry the family letter. A setting is therefore a block assignment in
//! {0, 1, 2}^blocks, and the LMC is a minimum covering of partial block
//! assignments by full ones.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::genstab::{full_mask, Family, GeneralizedStabilizerSet, TermMask};
use crate::layout::{gate_pairs, n_blocks, n_qubits, Boundary};
use crate::pauli::{Letter, Pauli};

/// Per-qubit measurement letters; `I` means the qubit is not measured.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MeasurementSetting {
    letters: Vec<Letter>,
}

impl MeasurementSetting {
    pub fn new(letters: Vec<Letter>) -> Self {
        MeasurementSetting { letters }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let letters = s
            .chars()
            .map(|c| Letter::from_char(c).ok_or_else(|| Error::Parse(format!("bad setting letter {c:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(MeasurementSetting { letters })
    }

    /// Setting from block letters (`None` leaves the block unmeasured).
    pub fn from_blocks(family: Family, n_pairs: usize, boundary: Boundary, blocks: &[Option<u8>], edges: u8) -> Self {
        let alphabet = BlockAlphabet::new(family);
        let mut letters = vec![Letter::I; n_qubits(n_pairs)];
        for (&(qa, qb), b) in gate_pairs(n_pairs, boundary).iter().zip(blocks) {
            if let Some(k) = b {
                let (la, lb) = alphabet.pair(*k);
                letters[qa] = la;
                letters[qb] = lb;
            }
        }
        if boundary == Boundary::Open {
            if edges & 1 != 0 {
                letters[0] = family.letter();
            }
            if edges & 2 != 0 {
                letters[2 * n_pairs - 1] = family.letter();
            }
        }
        MeasurementSetting { letters }
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn as_pauli(&self) -> Pauli {
        Pauli::from_letters(&self.letters)
    }
}

impl fmt::Display for MeasurementSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.letters {
            let c = if *l == Letter::I { '.' } else { l.to_char() };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// True iff at every qubit the string is I or equals the setting's letter.
pub fn covers(m: &MeasurementSetting, s: &Pauli) -> bool {
    assert_eq!(m.letters.len(), s.n(), "setting and string lengths differ");
    let mp = m.as_pauli();
    let supp = s.support();
    (mp.x_mask() ^ s.x_mask()) & supp == 0 && (mp.z_mask() ^ s.z_mask()) & supp == 0
}

/// The three block letters of a family: XX: {XX, YZ, ZY}; ZZ: {ZZ, YX, XY}.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockAlphabet {
    pub family: Family,
}

impl BlockAlphabet {
    pub fn new(family: Family) -> Self {
        BlockAlphabet { family }
    }

    pub fn pair(&self, k: u8) -> (Letter, Letter) {
        use Letter::*;
        match (self.family, k) {
            (Family::XX, 0) => (X, X),
            (Family::XX, 1) => (Y, Z),
            (Family::XX, 2) => (Z, Y),
            (Family::ZZ, 0) => (Z, Z),
            (Family::ZZ, 1) => (Y, X),
            (Family::ZZ, 2) => (X, Y),
            _ => panic!("block letter {k} out of range"),
        }
    }

    /// Block letter needed to measure the pair (a, b): `Some(None)` for II,
    /// `Some(Some(k))` when letter k covers it, `None` if foreign to the family.
    /// One-sided pairs (family letter on one qubit only) need letter 0.
    pub fn classify(&self, a: Letter, b: Letter) -> Option<Option<u8>> {
        let f = self.family.letter();
        if a == Letter::I && b == Letter::I {
            return Some(None);
        }
        if (a == f || a == Letter::I) && (b == f || b == Letter::I) {
            return Some(Some(0));
        }
        (1..3).find(|&k| self.pair(k) == (a, b)).map(Some)
    }
}

/// Partial block assignment: blocks in `care` must take the 2-bit letter stored in `vals`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Point {
    pub care: u64,
    pub vals: u64,
}

impl Point {
    pub fn letter(&self, b: usize) -> Option<u8> {
        (self.care >> b & 1 == 1).then(|| (self.vals >> (2 * b) & 3) as u8)
    }

    fn compatible(&self, other: &Point) -> bool {
        let common = self.care & other.care;
        spread2(common) & (self.vals ^ other.vals) == 0
    }

    /// True iff every full assignment matching `self` also matches `other`.
    fn implies(&self, other: &Point) -> bool {
        other.care & !self.care == 0 && self.compatible(other)
    }
}

/// Duplicate every bit of a block mask into the 2-bit letter lanes.
fn spread2(mask: u64) -> u64 {
    let mut out = 0u64;
    let mut m = mask;
    while m != 0 {
        let b = m.trailing_zeros();
        out |= 3 << (2 * b);
        m &= m - 1;
    }
    out
}

/// All assignments of `single` x {0,1,2} with `double` blocks at letter 0; with
/// `even_only`, only assignments with an even number of nonzero letters on `single`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cylinder {
    pub single: u64,
    pub double: u64,
    pub even_only: bool,
}

impl Cylinder {
    fn blocks(&self) -> u64 {
        self.single | self.double
    }

    /// Number of distinct points, which are pairwise incompatible.
    fn size(&self) -> u128 {
        let s = self.single.count_ones();
        let full = 3u128.pow(s);
        if self.even_only {
            // (3^s + (-1)^s) / 2 even-weight words over {0, 1, 2}.
            if s % 2 == 0 {
                (full + 1) / 2
            } else {
                (full - 1) / 2
            }
        } else {
            full
        }
    }

    /// True iff covering `other` covers `self`.
    fn dominated_by(&self, other: &Cylinder) -> bool {
        if self.single & !other.single != 0 || self.double & !(other.single | other.double) != 0 {
            return false;
        }
        if !other.even_only {
            return true;
        }
        if self.even_only && self.single == other.single && self.double & !other.double == 0 {
            return true;
        }
        // A free block of `other` outside self can repair the parity.
        other.single & !self.single & !self.double != 0
    }

    fn points(&self) -> Vec<Point> {
        let blocks: Vec<u32> = bit_list(self.single);
        let mut out = Vec::new();
        let total = 3u64.pow(blocks.len() as u32);
        for code in 0..total {
            let mut c = code;
            let mut vals = 0u64;
            let mut nonzero = 0;
            for &b in &blocks {
                let d = c % 3;
                c /= 3;
                if d != 0 {
                    nonzero += 1;
                }
                vals |= d << (2 * b);
            }
            if self.even_only && nonzero % 2 == 1 {
                continue;
            }
            out.push(Point { care: self.single | self.double, vals });
        }
        out
    }
}

fn bit_list(mut m: u64) -> Vec<u32> {
    let mut v = Vec::new();
    while m != 0 {
        v.push(m.trailing_zeros());
        m &= m - 1;
    }
    v
}

/// Block masks (single, double) of the stabilizer product over singlet set `b`.
fn blocks_of(b: u64, n_pairs: usize, boundary: Boundary) -> (u64, u64) {
    let full = full_mask(n_pairs);
    let right = match boundary {
        Boundary::Open => b >> 1,
        Boundary::Periodic => ((b >> 1) | (b << (n_pairs - 1))) & full,
    };
    let bmask = full_mask(n_blocks(n_pairs, boundary));
    (((b ^ right) & bmask), (b & right & bmask))
}

fn rotate_left(b: u64, n: usize) -> u64 {
    ((b << 1) | (b >> (n - 1))) & full_mask(n)
}

fn rotate_right(b: u64, n: usize) -> u64 {
    ((b >> 1) | (b << (n - 1))) & full_mask(n)
}

/// Requirement set of one family: cylinders from the structural model and/or
/// points from an explicit string expansion.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Requirements {
    pub family: Family,
    pub n_pairs: usize,
    pub boundary: Boundary,
    /// Open chain: bit 0 / bit 1 set when the left / right edge qubit is needed.
    pub edges: u8,
    pub cylinders: Vec<Cylinder>,
    pub points: Vec<Point>,
}

impl Requirements {
    pub fn empty(family: Family, n_pairs: usize, boundary: Boundary) -> Self {
        Requirements { family, n_pairs, boundary, edges: 0, cylinders: Vec::new(), points: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.cylinders.is_empty() && self.points.is_empty()
    }

    /// Blocks touched by any requirement.
    pub fn footprint(&self) -> u64 {
        self.cylinders.iter().map(Cylinder::blocks).chain(self.points.iter().map(|p| p.care)).fold(0, |a, b| a | b)
    }

    fn add_cylinder(&mut self, c: Cylinder) {
        if self.cylinders.iter().any(|o| c.dominated_by(o)) {
            return;
        }
        self.cylinders.retain(|o| !o.dominated_by(&c));
        self.cylinders.push(c);
    }

    /// Add the strings of the projector product over singlet set `a`.
    pub fn add_term_bits(&mut self, a: u64) {
        let (n, boundary) = (self.n_pairs, self.boundary);
        if a == 0 {
            return;
        }
        if boundary == Boundary::Open {
            if a & 1 != 0 {
                self.edges |= 1;
            }
            if a >> (n - 1) & 1 != 0 {
                self.edges |= 2;
            }
        }
        // Only maximal subsets matter; the filters need a proper cycle (N >= 3).
        let prune = boundary == Boundary::Open || n >= 3;
        // Even N periodic full chain: the alternating subsets give the same
        // strings and the odd-parity ones cancel.
        let ambiguous = boundary == Boundary::Periodic && n % 2 == 0 && a == full_mask(n);
        let evens = (0..n).step_by(2).fold(0u64, |m, i| m | 1 << i);
        let mut found: BTreeSet<Cylinder> = BTreeSet::new();
        let mut b = a;
        loop {
            let alternating = |x: u64| ambiguous && (x == evens || x == evens ^ full_mask(n));
            if b != 0 && (!prune || self.is_maximal(a, b, &alternating)) {
                let (single, double) = blocks_of(b, n, boundary);
                let even_only = alternating(b);
                found.insert(Cylinder { single, double, even_only });
            }
            if b == 0 {
                break;
            }
            b = (b - 1) & a;
        }
        for c in found.into_iter().rev() {
            self.add_cylinder(c);
        }
        self.cylinders.sort();
    }

    /// False when `b` is dominated by a one-step neighbour: dropping the middle
    /// of three consecutive members, or adding a member with no neighbour in `b`.
    /// Neighbours whose strings partly cancel (`alternating`) do not count.
    fn is_maximal(&self, a: u64, b: u64, alternating: &dyn Fn(u64) -> bool) -> bool {
        let n = self.n_pairs;
        let full = full_mask(n);
        let (l, r) = match self.boundary {
            Boundary::Open => ((b << 1) & full, b >> 1),
            Boundary::Periodic => (rotate_left(b, n), rotate_right(b, n)),
        };
        let triple = b & l & r;
        let addable = a & !b & !l & !r;
        !bit_list(triple).iter().any(|&i| !alternating(b ^ 1 << i)) && !bit_list(addable).iter().any(|&i| !alternating(b | 1 << i))
    }

    /// Merge another requirement set of the same family.
    pub fn merge(&mut self, other: &Requirements) {
        self.edges |= other.edges;
        for c in &other.cylinders {
            self.add_cylinder(*c);
        }
        self.cylinders.sort();
        let mut pts: BTreeSet<Point> = self.points.iter().copied().collect();
        pts.extend(other.points.iter().copied());
        self.points = pts.into_iter().collect();
    }

    /// Every point required, or `None` if that would exceed `limit`.
    pub fn all_points(&self, limit: usize) -> Option<Vec<Point>> {
        let mut total: u128 = self.points.len() as u128;
        for c in &self.cylinders {
            total += c.size();
        }
        if total > limit as u128 {
            return None;
        }
        let mut pts: BTreeSet<Point> = self.points.iter().copied().collect();
        for c in &self.cylinders {
            pts.extend(c.points());
        }
        Some(pts.into_iter().collect())
    }

    /// Lower bound from the largest pairwise-incompatible requirement group.
    pub fn simple_lower_bound(&self) -> u128 {
        let mut lb = if self.points.is_empty() { 0 } else { 1 };
        for c in &self.cylinders {
            lb = lb.max(c.size());
        }
        lb
    }
}

/// Structural requirements of single-family terms. Mixed-family terms are
/// rejected: their strings never factor into one family's alphabet.
pub fn structural_requirements(terms: &[TermMask], family: Family) -> Result<Requirements> {
    let (n, boundary) = match terms.first() {
        Some(t) => (t.n_pairs, t.boundary),
        None => return Err(Error::Invalid("no terms".into())),
    };
    let mut req = Requirements::empty(family, n, boundary);
    for t in terms {
        if t.xx != 0 && t.zz != 0 {
            return Err(Error::Structural(format!("mixed-family term {t}")));
        }
        req.add_term_bits(t.bits(family));
    }
    Ok(req)
}

/// Union of non-identity strings in the expansions of `terms`.
pub fn required_strings(set: &GeneralizedStabilizerSet, terms: &[TermMask]) -> BTreeSet<Pauli> {
    let mut out = BTreeSet::new();
    for t in terms {
        let e = set.expand_term(t);
        out.extend(e.paulis().filter(|p| !p.is_identity()).copied());
    }
    out
}

/// Factor a string into the block letters of one family.
pub fn factor_string(p: &Pauli, n_pairs: usize, boundary: Boundary) -> Result<(Family, Point, u8)> {
    'family: for family in Family::BOTH {
        let alphabet = BlockAlphabet::new(family);
        let mut point = Point { care: 0, vals: 0 };
        let mut covered = 0u64;
        for (b, &(qa, qb)) in gate_pairs(n_pairs, boundary).iter().enumerate() {
            covered |= 1 << qa | 1 << qb;
            match alphabet.classify(p.letter(qa), p.letter(qb)) {
                None => continue 'family,
                Some(None) => {}
                Some(Some(k)) => {
                    point.care |= 1 << b;
                    point.vals |= (k as u64) << (2 * b);
                }
            }
        }
        let mut edges = 0u8;
        for (bit, q) in [(1u8, 0usize), (2, 2 * n_pairs - 1)] {
            if covered >> q & 1 == 1 {
                continue;
            }
            match p.letter(q) {
                Letter::I => {}
                l if l == family.letter() => edges |= bit,
                _ => continue 'family,
            }
        }
        return Ok((family, point, edges));
    }
    Err(Error::Structural(p.to_string()))
}

/// Requirements from the explicit string expansion, split per family.
pub fn explicit_requirements(set: &GeneralizedStabilizerSet, terms: &[TermMask]) -> Result<[Requirements; 2]> {
    let (n, b) = (set.n_pairs, set.boundary);
    let mut out = [Requirements::empty(Family::XX, n, b), Requirements::empty(Family::ZZ, n, b)];
    let mut pts: [BTreeSet<Point>; 2] = [BTreeSet::new(), BTreeSet::new()];
    for s in required_strings(set, terms) {
        let (f, p, e) = factor_string(&s, n, b)?;
        pts[f.index()].insert(p);
        out[f.index()].edges |= e;
    }
    for f in Family::BOTH {
        out[f.index()].points = std::mem::take(&mut pts[f.index()]).into_iter().collect();
    }
    Ok(out)
}

/// How the covering settings are represented.
#[derive(Clone, Debug, PartialEq)]
pub enum BlockSettings {
    /// Explicit block assignments; `None` marks blocks outside the footprint.
    Explicit(Vec<Vec<Option<u8>>>),
    /// Linear code over GF(3): the setting for u in GF(3)^rank gives block k
    /// the letter <vectors[k], u>; `None` marks blocks outside the footprint.
    Linear { rank: usize, vectors: Vec<Option<Vec<u8>>> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverResult {
    pub count: u128,
    pub lower_bound: u128,
    pub optimal: bool,
    pub nodes: u64,
    pub settings: BlockSettings,
}

impl CoverResult {
    fn empty() -> Self {
        CoverResult { count: 0, lower_bound: 0, optimal: true, nodes: 0, settings: BlockSettings::Explicit(Vec::new()) }
    }

    /// Block assignments of every setting, if there are at most `limit`.
    pub fn block_rows(&self, limit: u128) -> Option<Vec<Vec<Option<u8>>>> {
        if self.count > limit {
            return None;
        }
        match &self.settings {
            BlockSettings::Explicit(rows) => Some(rows.clone()),
            BlockSettings::Linear { rank, vectors } => {
                let mut rows = Vec::new();
                for code in 0..3u64.pow(*rank as u32) {
                    let mut u = Vec::with_capacity(*rank);
                    let mut c = code;
                    for _ in 0..*rank {
                        u.push((c % 3) as u8);
                        c /= 3;
                    }
                    rows.push(
                        vectors
                            .iter()
                            .map(|v| v.as_ref().map(|v| (v.iter().zip(&u).map(|(a, b)| (a * b) as u32).sum::<u32>() % 3) as u8))
                            .collect(),
                    );
                }
                Some(rows)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CoverOptions {
    /// Branch-and-bound node budget.
    pub node_budget: u64,
    /// Largest footprint (in blocks) searched exactly over explicit assignments.
    pub explicit_blocks: usize,
    /// Largest number of explicit points handed to branch and bound.
    pub max_points: usize,
}

impl Default for CoverOptions {
    fn default() -> Self {
        CoverOptions { node_budget: 1_000_000, explicit_blocks: 8, max_points: 20_000 }
    }
}

/// Cover of one family's requirements together with enough context to print settings.
#[derive(Clone, Debug)]
pub struct FamilyCover {
    pub family: Family,
    pub n_pairs: usize,
    pub boundary: Boundary,
    pub edges: u8,
    pub cover: Arc<CoverResult>,
}

impl FamilyCover {
    pub fn settings(&self, limit: u128) -> Option<Vec<MeasurementSetting>> {
        let rows = self.cover.block_rows(limit)?;
        Some(rows.iter().map(|r| MeasurementSetting::from_blocks(self.family, self.n_pairs, self.boundary, r, self.edges)).collect())
    }
}

/// LMC of a list of terms: per-family covers, summed.
#[derive(Clone, Debug)]
pub struct LmcReport {
    pub count: u128,
    pub lower_bound: u128,
    pub optimal: bool,
    pub families: Vec<FamilyCover>,
}

impl LmcReport {
    /// All settings of both families, if there are at most `limit`.
    pub fn settings(&self, limit: u128) -> Option<Vec<MeasurementSetting>> {
        if self.count > limit {
            return None;
        }
        let mut out = Vec::new();
        for f in &self.families {
            out.extend(f.settings(limit)?);
        }
        Some(out)
    }
}

type CacheKey = (usize, Boundary, Vec<Cylinder>, Vec<Point>, CoverOptions);

fn cache() -> &'static Mutex<HashMap<CacheKey, Arc<CoverResult>>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<CoverResult>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Minimum covering of one family's requirements.
pub fn cover_requirements(req: &Requirements, opts: &CoverOptions) -> Arc<CoverResult> {
    if req.is_empty() {
        return Arc::new(CoverResult::empty());
    }
    let key = (req.n_pairs, req.boundary, req.cylinders.clone(), req.points.clone(), *opts);
    if let Some(r) = cache().lock().unwrap().get(&key) {
        return Arc::clone(r);
    }
    let r = Arc::new(solve_cover(req, opts));
    cache().lock().unwrap().insert(key, Arc::clone(&r));
    r
}

/// Requirements up to the chain's symmetries: translation away from the open
/// edges, rotation on the cycle. Cover counts depend only on this key.
type ShapeKey = (Boundary, usize, Vec<Cylinder>, Vec<Point>, CoverOptions);

fn shape_key(req: &Requirements, opts: &CoverOptions) -> ShapeKey {
    let nb = n_blocks(req.n_pairs, req.boundary);
    let fp = req.footprint();
    let (shift, width) = match req.boundary {
        Boundary::Open if req.edges == 0 => (fp.trailing_zeros() as usize, 0),
        Boundary::Open => (0, nb),
        Boundary::Periodic => (block_order(fp, nb, req.boundary).first().copied().unwrap_or(0), nb),
    };
    let rot = |m: u64, lanes: usize| -> u64 {
        let bits = nb * lanes;
        let full = if bits >= 64 { u64::MAX } else { (1u64 << bits) - 1 };
        if req.boundary == Boundary::Periodic && shift > 0 {
            ((m >> (shift * lanes)) | (m << (bits - shift * lanes))) & full
        } else {
            m >> (shift * lanes)
        }
    };
    let mut cyl: Vec<Cylinder> =
        req.cylinders.iter().map(|c| Cylinder { single: rot(c.single, 1), double: rot(c.double, 1), even_only: c.even_only }).collect();
    let mut pts: Vec<Point> = req.points.iter().map(|p| Point { care: rot(p.care, 1), vals: rot(p.vals, 2) }).collect();
    cyl.sort();
    pts.sort();
    (req.boundary, width + (req.edges as usize) * 64, cyl, pts, *opts)
}

fn count_cache() -> &'static Mutex<HashMap<ShapeKey, u128>> {
    static CACHE: OnceLock<Mutex<HashMap<ShapeKey, u128>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Whether `req` can be covered with at most `limit` settings. The exact
/// solver only runs when the code bound and the simple lower bound straddle `limit`.
pub fn cover_fits(req: &Requirements, opts: &CoverOptions, limit: u128) -> bool {
    if req.is_empty() {
        return true;
    }
    let lb = req.simple_lower_bound().max(1);
    if lb > limit {
        return false;
    }
    let key = shape_key(req, opts);
    if let Some(&c) = count_cache().lock().unwrap().get(&key) {
        return c <= limit;
    }
    let nb = n_blocks(req.n_pairs, req.boundary);
    if 3u128.pow(best_code(req, nb, lb).0 as u32) <= limit {
        return true;
    }
    let c = cover_requirements(req, opts).count;
    count_cache().lock().unwrap().insert(key, c);
    c <= limit
}

fn solve_cover(req: &Requirements, opts: &CoverOptions) -> CoverResult {
    let nb = n_blocks(req.n_pairs, req.boundary);
    let fp = req.footprint();
    let lb0 = req.simple_lower_bound().max(1);
    let code = best_code(req, nb, lb0);
    let code_count = 3u128.pow(code.0 as u32);
    let code_result = CoverResult {
        count: code_count,
        lower_bound: lb0,
        optimal: code_count == lb0,
        nodes: 0,
        settings: BlockSettings::Linear { rank: code.0, vectors: code.1 },
    };
    if code_result.optimal || (fp.count_ones() as usize) > opts.explicit_blocks {
        return code_result;
    }
    let Some(points) = req.all_points(opts.max_points) else {
        return code_result;
    };
    let blocks = bit_list(fp);
    let mut bb = BranchAndBound::new(&blocks, &points, opts.node_budget);
    let seed = code_result.block_rows(u128::MAX).unwrap();
    bb.seed(&seed);
    bb.run(lb0 as usize);
    let lower = bb.proven_lower().max(lb0);
    if bb.best_count() as u128 >= code_count {
        return CoverResult { lower_bound: lower, optimal: bb.complete(), nodes: bb.nodes, ..code_result };
    }
    let rows = bb.best_rows(nb);
    CoverResult {
        count: rows.len() as u128,
        lower_bound: if bb.complete() { rows.len() as u128 } else { lower },
        optimal: bb.complete(),
        nodes: bb.nodes,
        settings: BlockSettings::Explicit(rows),
    }
}

// ---- GF(3) linear codes ----

fn rank3(rows: &[&[u8]], width: usize) -> usize {
    let mut m: Vec<Vec<u8>> = rows.iter().map(|r| r.to_vec()).collect();
    let mut rank = 0;
    for col in 0..width {
        let Some(piv) = (rank..m.len()).find(|&i| m[i][col] != 0) else { continue };
        m.swap(rank, piv);
        // Scale pivot to 1 (2 is its own inverse mod 3).
        if m[rank][col] == 2 {
            for v in m[rank].iter_mut() {
                *v = (*v * 2) % 3;
            }
        }
        for i in 0..m.len() {
            if i != rank && m[i][col] != 0 {
                let f = m[i][col];
                for c in 0..width {
                    m[i][c] = (m[i][c] + 3 * 3 - f * m[rank][c]) % 3;
                }
            }
        }
        rank += 1;
    }
    rank
}

fn cylinder_ok(c: &Cylinder, vecs: &[Option<Vec<u8>>], r: usize) -> bool {
    let rows = |mask: u64| -> Vec<&[u8]> { bit_list(mask).iter().map(|&b| vecs[b as usize].as_deref().unwrap()).collect() };
    let all = rows(c.single | c.double);
    let dbl = rows(c.double);
    rank3(&all, r) == c.single.count_ones() as usize + rank3(&dbl, r)
}

fn point_ok(p: &Point, vecs: &[Option<Vec<u8>>], r: usize) -> bool {
    let blocks = bit_list(p.care);
    let rows: Vec<&[u8]> = blocks.iter().map(|&b| vecs[b as usize].as_deref().unwrap()).collect();
    let aug: Vec<Vec<u8>> = blocks
        .iter()
        .zip(&rows)
        .map(|(&b, row)| {
            let mut v = row.to_vec();
            v.push(p.letter(b as usize).unwrap());
            v
        })
        .collect();
    let aug_refs: Vec<&[u8]> = aug.iter().map(|v| v.as_slice()).collect();
    rank3(&rows, r) == rank3(&aug_refs, r + 1)
}

fn code_ok(req: &Requirements, vecs: &[Option<Vec<u8>>], r: usize) -> bool {
    req.cylinders.iter().all(|c| cylinder_ok(c, vecs, r)) && req.points.iter().all(|p| point_ok(p, vecs, r))
}

/// Footprint blocks in walk order; on a cycle the walk starts after a gap.
fn block_order(fp: u64, nb: usize, boundary: Boundary) -> Vec<usize> {
    let start = match boundary {
        Boundary::Open => 0,
        Boundary::Periodic => (0..nb).find(|&b| fp >> b & 1 == 1 && fp >> ((b + nb - 1) % nb) & 1 == 0).unwrap_or(0),
    };
    (0..nb).map(|i| (start + i) % nb).filter(|&b| fp >> b & 1 == 1).collect()
}

/// Smallest-rank code found: cyclic codes e_{pos mod r}, falling back to the identity code.
fn best_code(req: &Requirements, nb: usize, lb: u128) -> (usize, Vec<Option<Vec<u8>>>) {
    let fp = req.footprint();
    let order = block_order(fp, nb, req.boundary);
    let f = order.len();
    let mut r0 = 0usize;
    while 3u128.pow(r0 as u32) < lb {
        r0 += 1;
    }
    for r in r0..=f {
        // Each footprint block sits at its walk position; blocks are contiguous
        // runs separated by gaps, so use the position along the chain.
        for pos_mode in [true, false] {
            let mut vecs: Vec<Option<Vec<u8>>> = vec![None; nb];
            for (i, &b) in order.iter().enumerate() {
                let pos = if pos_mode { walk_pos(b, order[0], nb) } else { i };
                let mut v = vec![0u8; r];
                if r > 0 {
                    v[pos % r] = 1;
                }
                vecs[b] = Some(v);
            }
            if code_ok(req, &vecs, r) {
                return (r, vecs);
            }
        }
    }
    let mut vecs: Vec<Option<Vec<u8>>> = vec![None; nb];
    for (i, &b) in order.iter().enumerate() {
        let mut v = vec![0u8; f];
        v[i] = 1;
        vecs[b] = Some(v);
    }
    (f, vecs)
}

fn walk_pos(b: usize, start: usize, nb: usize) -> usize {
    (b + nb - start) % nb
}

// ---- exact covering over explicit block assignments ----

/// Clique-bound work allowed per unit of node budget.
const WORK_PER_NODE: u64 = 2048;

struct BranchAndBound {
    blocks: Vec<u32>,
    points: Vec<Point>,
    order: Vec<usize>,
    /// Settings (as local digit vectors) covering each point.
    point_settings: Vec<Vec<u32>>,
    setting_points: Vec<Vec<u32>>,
    budget: u64,
    nodes: u64,
    /// Compatibility checks spent on clique bounds.
    work: u64,
    aborted: bool,
    best: Vec<u32>,
    best_known: bool,
    root_lower: usize,
}

impl BranchAndBound {
    fn new(blocks: &[u32], points: &[Point], budget: u64) -> Self {
        let f = blocks.len();
        let n_set = 3usize.pow(f as u32);
        // Drop points implied by others.
        let mut sorted: Vec<Point> = points.to_vec();
        sorted.sort_by_key(|p| std::cmp::Reverse(p.care.count_ones()));
        let mut kept: Vec<Point> = Vec::new();
        for p in sorted {
            if !kept.iter().any(|q| q.implies(&p)) {
                kept.push(p);
            }
        }
        kept.sort();
        let mut point_settings = Vec::with_capacity(kept.len());
        let mut setting_points = vec![Vec::new(); n_set];
        for (pi, p) in kept.iter().enumerate() {
            let mut fixed = 0usize;
            let mut free = Vec::new();
            for (i, &b) in blocks.iter().enumerate() {
                match p.letter(b as usize) {
                    Some(k) => fixed += k as usize * 3usize.pow(i as u32),
                    None => free.push(3usize.pow(i as u32)),
                }
            }
            let mut list = Vec::with_capacity(3usize.pow(free.len() as u32));
            for code in 0..3usize.pow(free.len() as u32) {
                let mut c = code;
                let mut idx = fixed;
                for &w in &free {
                    idx += (c % 3) * w;
                    c /= 3;
                }
                list.push(idx as u32);
            }
            list.sort_unstable();
            for &s in &list {
                setting_points[s as usize].push(pi as u32);
            }
            point_settings.push(list);
        }
        // Clique order: most incompatible points first.
        let order: Vec<usize> = if kept.len() <= 4000 {
            let deg: Vec<usize> = kept.iter().map(|p| kept.iter().filter(|q| !p.compatible(q)).count()).collect();
            let mut o: Vec<usize> = (0..kept.len()).collect();
            o.sort_by(|&a, &b| deg[b].cmp(&deg[a]).then(a.cmp(&b)));
            o
        } else {
            let mut o: Vec<usize> = (0..kept.len()).collect();
            o.sort_by_key(|&i| std::cmp::Reverse(kept[i].care.count_ones()));
            o
        };
        BranchAndBound {
            blocks: blocks.to_vec(),
            order,
            points: kept,
            point_settings,
            setting_points,
            budget,
            nodes: 0,
            work: 0,
            aborted: false,
            best: Vec::new(),
            best_known: false,
            root_lower: 0,
        }
    }

    fn local_index(&self, row: &[Option<u8>]) -> u32 {
        self.blocks.iter().enumerate().map(|(i, &b)| row[b as usize].unwrap_or(0) as u32 * 3u32.pow(i as u32)).sum()
    }

    fn seed(&mut self, rows: &[Vec<Option<u8>>]) {
        let mut s: Vec<u32> = rows.iter().map(|r| self.local_index(r)).collect();
        s.sort_unstable();
        s.dedup();
        self.best = s;
        self.best_known = true;
        let greedy = self.greedy();
        if greedy.len() < self.best.len() {
            self.best = greedy;
        }
    }

    /// Greedy cover: most newly covered points, smallest assignment on ties.
    fn greedy(&self) -> Vec<u32> {
        let n = self.points.len();
        let mut covered = vec![false; n];
        let mut gain: Vec<usize> = self.setting_points.iter().map(|v| v.len()).collect();
        let mut left = n;
        let mut chosen = Vec::new();
        while left > 0 {
            let (s, _) = gain.iter().enumerate().fold((0usize, 0usize), |acc, (i, &g)| if g > acc.1 { (i, g) } else { acc });
            chosen.push(s as u32);
            for &p in &self.setting_points[s] {
                if !covered[p as usize] {
                    covered[p as usize] = true;
                    left -= 1;
                    for &t in &self.point_settings[p as usize] {
                        gain[t as usize] -= 1;
                    }
                }
            }
        }
        chosen.sort_unstable();
        chosen
    }

    /// Greedy clique of pairwise incompatible uncovered points.
    fn clique_bound(&mut self, uncovered: &[bool]) -> usize {
        let mut clique: Vec<usize> = Vec::new();
        for &i in &self.order {
            if uncovered[i] {
                self.work += clique.len() as u64 + 1;
                if clique.iter().all(|&j| !self.points[i].compatible(&self.points[j])) {
                    clique.push(i);
                }
            }
        }
        clique.len()
    }

    /// `floor` is a lower bound known from outside; reaching it ends the search.
    fn run(&mut self, floor: usize) {
        let n = self.points.len();
        let uncovered = vec![true; n];
        self.root_lower = self.clique_bound(&uncovered).max(floor);
        if self.root_lower >= self.best.len() {
            return;
        }
        let mut excluded = vec![false; self.setting_points.len()];
        let mut chosen = Vec::new();
        self.search(uncovered, n, &mut chosen, &mut excluded);
    }

    fn search(&mut self, uncovered: Vec<bool>, left: usize, chosen: &mut Vec<u32>, excluded: &mut Vec<bool>) {
        if self.best.len() <= self.root_lower {
            return;
        }
        if left == 0 {
            if chosen.len() < self.best.len() {
                let mut s = chosen.clone();
                s.sort_unstable();
                self.best = s;
            }
            return;
        }
        self.nodes += 1;
        if self.nodes > self.budget || self.work > self.budget.saturating_mul(WORK_PER_NODE) {
            self.aborted = true;
            return;
        }
        if chosen.len() + self.clique_bound(&uncovered) >= self.best.len() {
            return;
        }
        // Branch on the uncovered point with the fewest available settings.
        let mut pick = None;
        let mut fewest = usize::MAX;
        for (i, &u) in uncovered.iter().enumerate() {
            if u {
                let c = self.point_settings[i].iter().filter(|&&s| !excluded[s as usize]).count();
                if c < fewest {
                    fewest = c;
                    pick = Some(i);
                }
            }
        }
        let Some(p) = pick else { return };
        let mut cands: Vec<(usize, u32)> = self.point_settings[p]
            .iter()
            .filter(|&&s| !excluded[s as usize])
            .map(|&s| (self.setting_points[s as usize].iter().filter(|&&q| uncovered[q as usize]).count(), s))
            .collect();
        cands.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut newly_excluded = Vec::new();
        for (_, s) in cands {
            let mut next = uncovered.clone();
            let mut next_left = left;
            for &q in &self.setting_points[s as usize] {
                if next[q as usize] {
                    next[q as usize] = false;
                    next_left -= 1;
                }
            }
            chosen.push(s);
            self.search(next, next_left, chosen, excluded);
            chosen.pop();
            if self.aborted {
                break;
            }
            excluded[s as usize] = true;
            newly_excluded.push(s);
        }
        for s in newly_excluded {
            excluded[s as usize] = false;
        }
    }

    fn complete(&self) -> bool {
        !self.aborted
    }

    fn best_count(&self) -> usize {
        self.best.len()
    }

    fn proven_lower(&self) -> u128 {
        if self.complete() {
            self.best.len() as u128
        } else {
            self.root_lower as u128
        }
    }

    fn best_rows(&self, nb: usize) -> Vec<Vec<Option<u8>>> {
        self.best
            .iter()
            .map(|&s| {
                let mut row = vec![None; nb];
                let mut c = s;
                for &b in &self.blocks {
                    row[b as usize] = Some((c % 3) as u8);
                    c /= 3;
                }
                row
            })
            .collect()
    }
}

/// Exact LMC of `terms` (per-family covers summed).
pub fn lmc_exact(terms: &[TermMask], opts: &CoverOptions) -> Result<LmcReport> {
    if terms.is_empty() {
        return Ok(LmcReport { count: 0, lower_bound: 0, optimal: true, families: Vec::new() });
    }
    let mut reqs = Vec::new();
    for f in Family::BOTH {
        reqs.push(structural_requirements(terms, f)?);
    }
    Ok(lmc_of_requirements(&reqs, opts))
}

/// Exact LMC from precomputed requirement sets (one per family).
pub fn lmc_of_requirements(reqs: &[Requirements], opts: &CoverOptions) -> LmcReport {
    let mut report = LmcReport { count: 0, lower_bound: 0, optimal: true, families: Vec::new() };
    for r in reqs {
        let cover = cover_requirements(r, opts);
        report.count += cover.count;
        report.lower_bound += cover.lower_bound;
        report.optimal &= cover.optimal;
        report.families.push(FamilyCover { family: r.family, n_pairs: r.n_pairs, boundary: r.boundary, edges: r.edges, cover });
    }
    report
}

/// Closed-form LMC of a single-family product term.
pub fn lmc_formula(t: &TermMask) -> Result<u128> {
    let family = t.single_family().ok_or(if t.is_empty() { Error::EmptyMask } else { Error::Structural(format!("mixed-family term {t}")) })?;
    let bits = t.bits(family);
    let n = t.n_pairs as i64;
    let idx: Vec<i64> = (0..t.n_pairs).filter(|i| bits >> i & 1 == 1).map(|i| i as i64 + 1).collect();
    let k = idx.len();
    if k == 1 {
        return Ok(9);
    }
    if k == 2 {
        let d = idx[1] - idx[0];
        if d == 1 || (t.boundary == Boundary::Periodic && d == n - 1) {
            return Ok(15);
        }
    }
    let i0 = match t.boundary {
        Boundary::Periodic => idx[k - 1] - n,
        Boundary::Open => idx[0] - 2,
    };
    let mut prev = i0;
    let mut e = 0u32;
    for &i in &idx {
        e += (i - prev).min(2) as u32;
        prev = i;
    }
    Ok(3u128.pow(e))
}
