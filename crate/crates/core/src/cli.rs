//! Command-line frontend.
//!
//! Exit codes: 0 success, 1 I/O or other runtime error, 2 validation failure
//! or bad input, 3 infeasible budget, 4 dense cap exceeded.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::dense::{self, build_target_state, max_schmidt_sq, DenseCaps};
use crate::genstab::{build_stabilizers, parse_term, TermMask};
use crate::layout::{n_qubits, Boundary};
use crate::lms::{lmc_exact, lmc_formula, CoverOptions, LmcReport};
use crate::rational::{self, to_f64, Rational};
use crate::search::{self, fmt_bits, search_budgets, search_optimal, SearchOptions, SearchResult, SplitMode, TermCost};
use crate::witness::{self, canonical_witness, default_alpha, p_max, validate, witness_lmc, Check, CheckStatus, Witness, WitnessFile, WitnessKind, SCHEMA_VERSION};
use crate::Error;

/// Environment variable naming the default directory for witness files.
pub const OUT_DIR_ENV: &str = "EWSYNTH_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "ewsynth_out";
/// Most settings listed by `lmc --settings`.
const SETTINGS_LIMIT: u128 = 4096;

#[derive(Parser, Debug)]
#[command(name = "ewsynth", version, about = "Entanglement witnesses for sqrt-SWAP coupled singlet chains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build the target state and check it against its stabilizers and the Schmidt bound.
    GenState(GenStateArgs),
    /// List the 2N stabilizers as exact Pauli expansions.
    Stabilizers(StabilizersArgs),
    /// Local measurement complexity of a witness or a list of projector products.
    Lmc(LmcArgs),
    /// Noise tolerance p_max and minimum fidelity of a witness.
    Pmax(PmaxArgs),
    /// Best witness within a measurement budget.
    Search(SearchArgs),
    /// Searches over a grid of chain lengths and budgets.
    Table(TableArgs),
    /// Validate a witness: tightness, Q >= 0, sign change at p_max, alpha.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ChainArgs {
    /// Number of singlets N.
    #[arg(short = 'n', long = "pairs")]
    pub n_pairs: usize,
    /// Chain boundary (open|periodic).
    #[arg(long, default_value = "open")]
    pub boundary: Boundary,
}

#[derive(Args, Debug, Clone, Default)]
pub struct OutputArgs {
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Omit the generation timestamp so reruns are byte-identical.
    #[arg(long)]
    pub no_timestamp: bool,
}

#[derive(Args, Debug, Clone, Default)]
pub struct CapArgs {
    /// Qubit cap for dense vectors, matrices and Schmidt scans [default: 16 / 10 / 12].
    #[arg(long)]
    pub dense_cap: Option<usize>,
}

impl CapArgs {
    fn caps(&self) -> DenseCaps {
        match self.dense_cap {
            Some(q) => DenseCaps { vector_qubits: q, matrix_qubits: q, schmidt_qubits: q },
            None => DenseCaps::default(),
        }
    }
}

/// Witness given as a canonical kind on a chain, or as a JSON file.
#[derive(Args, Debug, Clone)]
pub struct WitnessSource {
    /// Canonical witness (projector|xz|singles|w1|w2); needs --pairs.
    #[arg(long, conflicts_with = "witness")]
    pub kind: Option<WitnessKind>,
    /// Witness JSON file.
    #[arg(long)]
    pub witness: Option<PathBuf>,
    /// Number of singlets N for --kind.
    #[arg(short = 'n', long = "pairs")]
    pub n_pairs: Option<usize>,
    /// Chain boundary for --kind (open|periodic).
    #[arg(long, default_value = "open")]
    pub boundary: Boundary,
}

impl WitnessSource {
    fn load(&self) -> Result<Witness, CliError> {
        Ok(self.load_file()?.witness)
    }

    fn load_file(&self) -> Result<WitnessFile, CliError> {
        match (&self.kind, &self.witness) {
            (Some(kind), None) => {
                let n = self.n_pairs.ok_or_else(|| CliError::usage("--kind needs --pairs"))?;
                Ok(WitnessFile { witness: canonical_witness(*kind, n, self.boundary)?, lmc: None, p_max: None })
            }
            (None, Some(path)) => {
                let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                Ok(Witness::from_json(&text)?)
            }
            _ => Err(CliError::usage("give exactly one of --kind or --witness")),
        }
    }
}

#[derive(Args, Debug)]
pub struct GenStateArgs {
    #[command(flatten)]
    pub chain: ChainArgs,
    #[command(flatten)]
    pub caps: CapArgs,
    /// Include all amplitudes as [re, im] pairs.
    #[arg(long)]
    pub amplitudes: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
pub struct StabilizersArgs {
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct LmcArgs {
    /// Projector product such as "xx:1-3" or "zz:2,3"; repeatable. Needs --pairs.
    #[arg(long = "term")]
    pub terms: Vec<String>,
    #[command(flatten)]
    pub source: WitnessSource,
    /// List the measurement settings when there are at most 4096.
    #[arg(long)]
    pub settings: bool,
    /// Branch-and-bound node budget per family.
    #[arg(long, default_value_t = CoverOptions::default().node_budget)]
    pub node_budget: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct PmaxArgs {
    #[command(flatten)]
    pub source: WitnessSource,
    /// Branch-and-bound node budget per family for the LMC.
    #[arg(long, default_value_t = CoverOptions::default().node_budget)]
    pub node_budget: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Symmetric,
    Scan,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TermCostArg {
    Exact,
    Formula,
}

#[derive(Args, Debug, Clone)]
pub struct SearchModeArgs {
    /// How the budget is divided between the XX and ZZ families.
    #[arg(long, value_enum, default_value = "symmetric")]
    pub split: SplitArg,
    /// Per-term cost used to prune candidates.
    #[arg(long, value_enum, default_value = "exact")]
    pub term_cost: TermCostArg,
    /// Beam width for partitions beyond --exhaustive-max-n.
    #[arg(long, default_value_t = SearchOptions::default().beam_width)]
    pub beam_width: usize,
    /// Largest N with exhaustive partition enumeration.
    #[arg(long, default_value_t = SearchOptions::default().exhaustive_max_n)]
    pub exhaustive_max_n: usize,
    /// Branch-and-bound node budget per cover.
    #[arg(long, default_value_t = SearchOptions::default().cover.node_budget)]
    pub node_budget: u64,
    /// Directory for witness files [default: $EWSYNTH_OUT_DIR or ./ewsynth_out].
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

impl SearchModeArgs {
    fn options(&self) -> Result<SearchOptions, CliError> {
        if self.beam_width == 0 {
            return Err(CliError::usage("--beam-width must be positive"));
        }
        let d = SearchOptions::default();
        Ok(SearchOptions {
            term_cost: match self.term_cost {
                TermCostArg::Exact => TermCost::Exact,
                TermCostArg::Formula => TermCost::Formula,
            },
            split: match self.split {
                SplitArg::Symmetric => SplitMode::Symmetric,
                SplitArg::Scan => SplitMode::Scan,
            },
            beam_width: self.beam_width,
            exhaustive_max_n: self.exhaustive_max_n,
            cover: CoverOptions { node_budget: self.node_budget, ..d.cover },
            alpha: d.alpha,
        })
    }

    fn out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}

#[derive(Args, Debug)]
pub struct SearchArgs {
    #[command(flatten)]
    pub chain: ChainArgs,
    /// Total number of local measurement settings allowed.
    #[arg(long)]
    pub budget: u128,
    #[command(flatten)]
    pub mode: SearchModeArgs,
    /// Write the candidate audit trail (JSON lines) here.
    #[arg(long)]
    pub audit: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct TableArgs {
    /// Chain lengths, comma separated.
    #[arg(short = 'n', long = "pairs", value_delimiter = ',', required = true)]
    pub n_pairs: Vec<usize>,
    /// Budgets, comma separated [default: the six standard budgets of each N].
    #[arg(long = "budgets", value_delimiter = ',')]
    pub budgets: Vec<u128>,
    /// Chain boundary (open|periodic).
    #[arg(long, default_value = "open")]
    pub boundary: Boundary,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[command(flatten)]
    pub mode: SearchModeArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub source: WitnessSource,
    #[command(flatten)]
    pub caps: CapArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Error with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(msg: &str) -> Self {
        CliError { code: 2, message: msg.into() }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        CliError { code: 1, message: format!("{}: {e}", path.display()) }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = exit_code(&e);
        let mut message = e.to_string();
        if code == 4 {
            message.push_str("; the symbolic commands (stabilizers, lmc, pmax, search, table) have no cap");
        }
        CliError { code, message }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::CapExceeded { .. } => 4,
        Error::Infeasible(_) => 3,
        _ => 2,
    }
}

/// Budgets of the published table for N in {8, 10, 15, 20}; 2*3^k, k = 2..7 otherwise.
pub fn default_budgets(n_pairs: usize) -> Vec<u128> {
    let ks: Vec<u32> = match n_pairs {
        15 => vec![2, 4, 6, 8, 10, 12],
        20 => vec![2, 5, 8, 11, 14, 17],
        _ => (2..=7).collect(),
    };
    ks.into_iter().map(|k| 2 * 3u128.pow(k)).collect()
}

fn rat_json(r: &Rational) -> Value {
    json!(rational::format(r))
}

/// "3/20 (15.0%)".
pub fn display_percent(r: &Rational) -> String {
    format!("{} ({:.1}%)", rational::format(r), 100.0 * to_f64(r))
}

fn stamp(v: &mut Value, output: &OutputArgs) {
    let obj = v.as_object_mut().expect("report object");
    obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
    if !output.no_timestamp {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        obj.insert("generated_unix".into(), json!(secs));
    }
}

fn emit(text: &str, output: &OutputArgs) -> Result<(), CliError> {
    match &output.out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::io(path, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| CliError { code: 1, message: e.to_string() })
        }
    }
}

fn emit_json(mut v: Value, output: &OutputArgs) -> Result<(), CliError> {
    stamp(&mut v, output);
    let mut s = serde_json::to_string_pretty(&v).expect("serializable");
    s.push('\n');
    emit(&s, output)
}

fn gen_state(a: &GenStateArgs) -> Result<i32, CliError> {
    let (n, b) = (a.chain.n_pairs, a.chain.boundary);
    let caps = a.caps.caps();
    let q = n_qubits(n);
    DenseCaps::check(caps.vector_qubits, q, "state vector")?;
    let psi = build_target_state(n, b, &caps)?;
    let set = build_stabilizers(n, b)?;

    let mut worst = 0.0f64;
    let mut stabs = Vec::new();
    for (fam, i, s) in set.all() {
        let r = (dense::apply_to_vector(s, &psi.amplitudes)? - &psi.amplitudes).norm();
        worst = worst.max(r);
        stabs.push(json!({ "family": fam.name(), "singlet": i + 1, "residual": r }));
    }
    // (sum_i Z_i)|b> = (n - 2|b|)|b>.
    let (mut mz, mut mz_sq) = (0.0, 0.0);
    for (idx, amp) in psi.amplitudes.iter().enumerate() {
        let m = q as f64 - 2.0 * idx.count_ones() as f64;
        mz += amp.norm_sqr() * m;
        mz_sq += amp.norm_sqr() * m * m;
    }
    let alpha = default_alpha();
    let schmidt = if q <= caps.schmidt_qubits {
        let s = max_schmidt_sq(&psi, &caps)?;
        json!({ "max_schmidt_sq": s, "status": if s <= to_f64(&alpha) + 1e-10 { "pass" } else { "fail" } })
    } else {
        json!({ "max_schmidt_sq": null, "status": "skipped" })
    };
    let passed = worst < 1e-10 && mz_sq.sqrt() < 1e-10 && schmidt["status"] != "fail";
    let mut v = json!({
        "n_pairs": n,
        "boundary": b,
        "n_qubits": q,
        "norm": psi.norm(),
        "alpha": rational::format(&alpha),
        "alpha_float": to_f64(&alpha),
        "alpha_check": schmidt,
        "magnetization": { "expectation": mz, "residual": mz_sq.sqrt() },
        "stabilizers": { "max_residual": worst, "all_pass": worst < 1e-10, "each": stabs },
        "passed": passed,
    });
    if a.amplitudes {
        let amps: Vec<[f64; 2]> = psi.amplitudes.iter().map(|c| [c.re, c.im]).collect();
        v["amplitudes"] = json!(amps);
    }
    emit_json(v, &a.output)?;
    Ok(if passed { 0 } else { 2 })
}

fn stabilizers(a: &StabilizersArgs) -> Result<i32, CliError> {
    let set = build_stabilizers(a.chain.n_pairs, a.chain.boundary)?;
    let mut rows = Vec::new();
    for (fam, i, s) in set.all() {
        for (p, c) in s.iter() {
            rows.push((fam.name(), i + 1, p.to_string(), rational::format(&c.re), rational::format(&c.im)));
        }
    }
    match a.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["family", "singlet", "pauli", "re", "im"]).map_err(csv_err)?;
            for r in &rows {
                w.serialize(r).map_err(csv_err)?;
            }
            emit(&String::from_utf8(w.into_inner().map_err(|e| csv_err(e.into_error().into()))?).expect("utf8"), &a.output)?;
        }
        Format::Json => {
            let list: Vec<Value> = set
                .all()
                .map(|(fam, i, s)| {
                    let terms: Vec<Value> = s
                        .iter()
                        .map(|(p, c)| json!({ "pauli": p.to_string(), "re": rational::format(&c.re), "im": rational::format(&c.im) }))
                        .collect();
                    json!({ "family": fam.name(), "singlet": i + 1, "terms": terms })
                })
                .collect();
            emit_json(json!({ "n_pairs": set.n_pairs, "boundary": set.boundary, "stabilizers": list }), &a.output)?;
        }
    }
    Ok(0)
}

fn csv_err(e: csv::Error) -> CliError {
    CliError { code: 1, message: format!("csv: {e}") }
}

/// Sum of the per-term closed forms, an upper bound on the exact LMC; None for mixed-family terms.
fn formula_sum(masks: &[TermMask]) -> Option<u128> {
    masks.iter().map(|t| lmc_formula(t).ok()).sum()
}

fn lmc_json(r: &LmcReport, masks: &[TermMask], settings: bool) -> Value {
    let families: Vec<Value> = r
        .families
        .iter()
        .map(|f| json!({ "family": f.family.name(), "count": f.cover.count.to_string(), "lower_bound": f.cover.lower_bound.to_string(), "optimal": f.cover.optimal }))
        .collect();
    let mut v = json!({
        "lmc": r.count.to_string(),
        "lower_bound": r.lower_bound.to_string(),
        "optimal": r.optimal,
        "lmc_formula": formula_sum(masks).map(|c| c.to_string()),
        "families": families,
    });
    if settings {
        v["settings"] = match r.settings(SETTINGS_LIMIT) {
            Some(s) => json!(s.iter().map(|m| m.to_string()).collect::<Vec<_>>()),
            None => json!(null),
        };
    }
    v
}

fn lmc(a: &LmcArgs) -> Result<i32, CliError> {
    let opts = CoverOptions { node_budget: a.node_budget, ..CoverOptions::default() };
    let masks = if a.terms.is_empty() {
        a.source.load()?.masks()
    } else {
        if a.source.kind.is_some() || a.source.witness.is_some() {
            return Err(CliError::usage("--term cannot be combined with --kind or --witness"));
        }
        let n = a.source.n_pairs.ok_or_else(|| CliError::usage("--term needs --pairs"))?;
        a.terms.iter().map(|s| parse_term(s, n, a.source.boundary)).collect::<crate::Result<Vec<_>>>()?
    };
    let r = lmc_exact(&masks, &opts)?;
    let terms: Vec<String> = masks.iter().map(|t| t.to_string()).collect();
    let mut v = lmc_json(&r, &masks, a.settings);
    v["terms"] = json!(terms);
    emit_json(v, &a.output)?;
    Ok(0)
}

fn pmax(a: &PmaxArgs) -> Result<i32, CliError> {
    let w = a.source.load()?;
    let p = p_max(&w)?;
    let f = witness::f_min(&p);
    let opts = CoverOptions { node_budget: a.node_budget, ..CoverOptions::default() };
    let lmc = match witness_lmc(&w, &opts) {
        Ok(r) => json!({ "exact": r.count.to_string(), "optimal": r.optimal, "formula": formula_sum(&w.masks()).map(|c| c.to_string()) }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let v = json!({
        "n_pairs": w.n_pairs,
        "boundary": w.boundary,
        "p_max": rational::format(&p),
        "p_max_float": to_f64(&p),
        "p_max_display": display_percent(&p),
        "f_min": rational::format(&f),
        "f_min_float": to_f64(&f),
        "f_min_display": display_percent(&f),
        "lmc": lmc,
    });
    emit_json(v, &a.output)?;
    Ok(0)
}

fn result_json(r: &SearchResult, witness_path: Option<&Path>) -> Value {
    let decomps: Vec<Value> = r
        .decompositions
        .iter()
        .zip(["xx", "zz"])
        .map(|(d, fam)| {
            json!({
                "family": fam,
                "terms": d.terms.iter().map(|&t| fmt_bits(t)).collect::<Vec<_>>(),
                "gcd": fmt_bits(d.gcd),
                "objective": rational::format(&d.objective(r.n_pairs)),
            })
        })
        .collect();
    let f = r.f_min();
    json!({
        "n_pairs": r.n_pairs,
        "boundary": r.boundary,
        "budget": r.budget.to_string(),
        "achieved_lmc": r.lmc.count.to_string(),
        "lmc_optimal": r.lmc.optimal,
        "p_max": rat_json(&r.p_max),
        "p_max_float": to_f64(&r.p_max),
        "f_min": rat_json(&f),
        "f_min_float": to_f64(&f),
        "carried": r.carried,
        "decompositions": decomps,
        "t_star": r.t_star.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
        "p_cd": r.p_cd.to_string(),
        "witness": witness_path.map(|p| p.display().to_string()),
    })
}

fn witness_file(dir: &Path, r: &SearchResult) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(format!("witness_N{}_B{}.json", r.n_pairs, r.budget));
    let mut text = r.witness.to_json(Some(r.lmc.count));
    text.push('\n');
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

fn search_cmd(a: &SearchArgs) -> Result<i32, CliError> {
    let opts = a.mode.options()?;
    let r = search_optimal(a.chain.n_pairs, a.chain.boundary, a.budget, &opts)?;
    let path = witness_file(&a.mode.out_dir(), &r)?;
    if let Some(audit) = &a.audit {
        fs::write(audit, r.audit_jsonl()).map_err(|e| CliError::io(audit, e))?;
    }
    emit_json(result_json(&r, Some(&path)), &a.output)?;
    Ok(0)
}

/// One table row; failed cells keep their error in `status`.
#[derive(serde::Serialize)]
struct Row {
    n_pairs: usize,
    boundary: Boundary,
    budget: String,
    achieved_lmc: Option<String>,
    p_max: Option<String>,
    p_max_float: Option<f64>,
    f_min: Option<String>,
    f_min_float: Option<f64>,
    carried: Option<bool>,
    witness: Option<String>,
    status: String,
}

fn table(a: &TableArgs) -> Result<i32, CliError> {
    let opts = a.mode.options()?;
    let dir = a.mode.out_dir();
    for &n in &a.n_pairs {
        if n == 0 || n > search::MAX_PAIRS {
            return Err(CliError::usage(&format!("N = {n} outside 1..={}", search::MAX_PAIRS)));
        }
    }
    let cells: Vec<Vec<(u128, crate::Result<SearchResult>)>> = a
        .n_pairs
        .par_iter()
        .map(|&n| {
            let budgets = if a.budgets.is_empty() { default_budgets(n) } else { a.budgets.clone() };
            let results = search_budgets(n, a.boundary, &budgets, &opts);
            budgets.into_iter().zip(results).collect()
        })
        .collect();
    let mut rows = Vec::new();
    for (&n, cells) in a.n_pairs.iter().zip(cells) {
        for (budget, res) in cells {
            let row = match res {
                Ok(r) => {
                    let path = witness_file(&dir, &r)?;
                    let f = r.f_min();
                    Row {
                        n_pairs: n,
                        boundary: a.boundary,
                        budget: budget.to_string(),
                        achieved_lmc: Some(r.lmc.count.to_string()),
                        p_max: Some(rational::format(&r.p_max)),
                        p_max_float: Some(to_f64(&r.p_max)),
                        f_min: Some(rational::format(&f)),
                        f_min_float: Some(to_f64(&f)),
                        carried: Some(r.carried),
                        witness: Some(path.display().to_string()),
                        status: "ok".into(),
                    }
                }
                Err(e) => Row {
                    n_pairs: n,
                    boundary: a.boundary,
                    budget: budget.to_string(),
                    achieved_lmc: None,
                    p_max: None,
                    p_max_float: None,
                    f_min: None,
                    f_min_float: None,
                    carried: None,
                    witness: None,
                    status: e.to_string(),
                },
            };
            rows.push(row);
        }
    }
    match a.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in &rows {
                w.serialize(r).map_err(csv_err)?;
            }
            if rows.is_empty() {
                w.write_record(["n_pairs", "boundary", "budget", "achieved_lmc", "p_max", "p_max_float", "f_min", "f_min_float", "carried", "witness", "status"])
                    .map_err(csv_err)?;
            }
            emit(&String::from_utf8(w.into_inner().map_err(|e| csv_err(e.into_error().into()))?).expect("utf8"), &a.output)?;
        }
        Format::Json => emit_json(json!({ "rows": rows }), &a.output)?,
    }
    Ok(0)
}

fn verify(a: &VerifyArgs) -> Result<i32, CliError> {
    let file = a.source.load_file()?;
    let w = file.witness;
    let mut report = validate(&w, &a.caps.caps())?;
    if let Some(stored) = file.p_max {
        let computed = p_max(&w).ok();
        let (status, detail) = if computed == Some(stored) {
            (CheckStatus::Pass, format!("stored p_max {} matches the terms", rational::format(&stored)))
        } else {
            let c = computed.map_or("none".into(), |p| rational::format(&p));
            (CheckStatus::Fail, format!("stored p_max {} but the terms give {c}", rational::format(&stored)))
        };
        report.checks.push(Check { name: "stored_p_max".into(), status, detail });
    }
    let failures: Vec<&str> = report.failures().iter().map(|c| c.name.as_str()).collect();
    let v = json!({
        "n_pairs": w.n_pairs,
        "boundary": w.boundary,
        "passed": report.passed(),
        "p_max": p_max(&w).ok().map(|p| rational::format(&p)),
        "failures": failures,
        "checks": report.checks,
    });
    emit_json(v, &a.output)?;
    Ok(if report.passed() { 0 } else { 2 })
}

pub fn run(cli: &Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::GenState(a) => gen_state(a),
        Command::Stabilizers(a) => stabilizers(a),
        Command::Lmc(a) => lmc(a),
        Command::Pmax(a) => pmax(a),
        Command::Search(a) => search_cmd(a),
        Command::Table(a) => table(a),
        Command::Verify(a) => verify(a),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
