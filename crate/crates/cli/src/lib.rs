//! The `twistedbad` command line: argument parsing, pipelines and export.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use twistedbad_core::arith::{max_bits_from_env, parse_rational, TargetVector, WeightVector};
use twistedbad_core::badness::{
    classical_badness, coordinate_badness, dual_badness, proposition_bound, twisted_badness, verify_proposition,
};
use twistedbad_core::bestapprox::{
    enumerate_best_approximations, verify_lacunarity, verify_minkowski, BestApproxSequence, CheckStatus,
    EnumerationOptions,
};
use twistedbad_core::cantor::{
    build_tree, export_records, minimal_strict_r, sample_point, strict_branching, strict_condition_value,
    strict_conditions_hold, target_count, verify_fact_counts, CantorParams, CantorTree, Mode, Selector,
};
use twistedbad_core::measure::{
    dimension_lower_bound, empirical_dimension, lambda_of, mass_distribution_check, DimensionCheckParams,
    MeasureWeights,
};
use twistedbad_core::Error;

pub const TOOL: &str = "twistedbad";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_PRECISION: i32 = 2;
pub const EXIT_RELATION: i32 = 3;
pub const EXIT_VIOLATION: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "twistedbad", version, about = "Best approximations, twisted badness and Cantor-type sets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Enumerate weighted best approximations and check the Minkowski and lacunarity bounds.
    Bestapprox(BestApproxArgs),
    /// Twisted, classical, coordinate and dual badness, with the proposition check.
    Badness(BadnessArgs),
    /// Build the Cantor tree, export its boxes and verify the counting facts.
    Cantor(CantorArgs),
    /// Mass distribution check, the n − λ(R) bound and an empirical exponent.
    Dimension(DimensionArgs),
    /// Tabulate target_count, the STRICT conditions and λ over R = 2^a.
    ScanR(ScanArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "jsonl")]
    pub format: Format,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; does not affect output.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Progress messages on standard error.
    #[arg(short, long, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Args)]
pub struct BestApproxArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub theta: String,
    #[arg(long)]
    pub j: String,
    /// Height bound, e.g. `1e6`, `1000` or `7/2`.
    #[arg(long)]
    pub bound: String,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TreeArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<String>,
    #[arg(long)]
    pub j: Option<String>,
    #[arg(long = "R")]
    pub r: Option<u64>,
    #[arg(long)]
    pub epsilon: Option<String>,
    #[arg(long, default_value = "exploratory")]
    pub mode: String,
    #[arg(long)]
    pub depth: Option<u32>,
    /// Parameter file (as written by `cantor --save-params`) instead of inline flags.
    #[arg(long, alias = "tree")]
    pub params: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BadnessArgs {
    #[command(flatten)]
    pub tree: TreeArgs,
    /// Inhomogeneous target; sampled from the tree when absent and a tree is given, zero otherwise.
    #[arg(long, allow_hyphen_values = true)]
    pub eta: Option<String>,
    /// Scan bound for the minima over q.
    #[arg(long = "Q")]
    pub q: u64,
    /// Height bound of the best approximations used for the dual badness, without a tree.
    #[arg(long)]
    pub bound: Option<String>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CantorArgs {
    #[command(flatten)]
    pub tree: TreeArgs,
    /// Largest number of boxes materialized per level.
    #[arg(long, default_value_t = 200_000)]
    pub cap: usize,
    /// Also write the parameter file here.
    #[arg(long)]
    pub save_params: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DimensionArgs {
    #[command(flatten)]
    pub tree: TreeArgs,
    /// Random cubes per level.
    #[arg(long, default_value_t = 1000)]
    pub samples: u64,
    /// Depths for the empirical exponent fit, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub depths: Vec<u32>,
    #[arg(long, default_value_t = 100)]
    pub fit_samples: u64,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    #[arg(long)]
    pub j: String,
    /// Smallest exponent a of R = 2^a.
    #[arg(long, default_value_t = 1)]
    pub from: u32,
    #[arg(long, default_value_t = 40)]
    pub to: u32,
    #[command(flatten)]
    pub common: CommonArgs,
}

impl Command {
    pub fn common(&self) -> &CommonArgs {
        match self {
            Command::Bestapprox(a) => &a.common,
            Command::Badness(a) => &a.common,
            Command::Cantor(a) => &a.common,
            Command::Dimension(a) => &a.common,
            Command::ScanR(a) => &a.common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Bestapprox(_) => "bestapprox",
            Command::Badness(_) => "badness",
            Command::Cantor(_) => "cantor",
            Command::Dimension(_) => "dimension",
            Command::ScanR(_) => "scan-r",
        }
    }
}

/// A failure with its exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::PrecisionExhausted { .. } => EXIT_PRECISION,
            Error::IntegerRelation { .. } | Error::SuspectedRelation { .. } => EXIT_RELATION,
            Error::ConstructionViolation(_) => EXIT_VIOLATION,
            _ => EXIT_USAGE,
        };
        Failure { code, message: e.to_string() }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: msg.into() }
}

/// Records of one run, written in order after the computation finishes.
struct Output {
    format: Format,
    config: BTreeMap<String, String>,
    command: &'static str,
    records: Vec<Value>,
    /// CSV header and rows for the command's primary table.
    table: Option<(String, Vec<String>)>,
}

impl Output {
    fn new(command: &'static str, format: Format, config: BTreeMap<String, String>) -> Self {
        Output { format, config, command, records: Vec::new(), table: None }
    }

    fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.command.as_bytes());
        h.update(b"\n");
        h.update(serde_json::to_string(&self.config).expect("serializable").as_bytes());
        hex::encode(&h.finalize()[..8])
    }

    fn push<T: Serialize>(&mut self, kind: &str, v: &T) {
        let mut val = serde_json::to_value(v).expect("serializable");
        if let Value::Object(m) = &mut val {
            m.insert("type".into(), Value::String(kind.into()));
        }
        self.records.push(val);
    }

    fn render(&self) -> String {
        let meta = json!({"meta": {
            "tool": TOOL,
            "version": VERSION,
            "command": self.command,
            "config_hash": self.hash(),
            "config": self.config,
        }});
        let mut s = String::new();
        match self.format {
            Format::Jsonl => {
                let _ = writeln!(s, "{meta}");
                if let Some((header, rows)) = &self.table {
                    let cols: Vec<&str> = header.split(',').collect();
                    for r in rows {
                        let vals = split_csv(r);
                        let obj: serde_json::Map<String, Value> =
                            cols.iter().zip(vals).map(|(c, v)| (c.to_string(), Value::String(v))).collect();
                        let mut obj = obj;
                        obj.insert("type".into(), Value::String("row".into()));
                        let _ = writeln!(s, "{}", Value::Object(obj));
                    }
                }
                for r in &self.records {
                    let _ = writeln!(s, "{r}");
                }
            }
            Format::Csv => {
                let _ = writeln!(s, "# {meta}");
                for r in &self.records {
                    let _ = writeln!(s, "# {r}");
                }
                if let Some((header, rows)) = &self.table {
                    let _ = writeln!(s, "{header}");
                    for r in rows {
                        let _ = writeln!(s, "{r}");
                    }
                }
            }
        }
        s
    }
}

/// Splits one row of our own CSV, where only quoted fields contain commas.
fn split_csv(row: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    for ch in row.chars() {
        match ch {
            '"' => quoted = !quoted,
            ',' if !quoted => out.push(std::mem::take(&mut cur)),
            c => cur.push(c),
        }
    }
    out.push(cur);
    out
}

fn say(common: &CommonArgs, msg: impl AsRef<str>) {
    if common.verbose > 0 {
        eprintln!("{TOOL}: {}", msg.as_ref());
    }
}

/// Parses and runs; returns the exit status. Output goes to `--out` or stdout,
/// diagnostics to stderr.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    run(&cli)
}

pub fn run(cli: &Cli) -> i32 {
    let common = cli.command.common();
    let result = match common.threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build() {
            Ok(pool) => pool.install(|| execute(&cli.command)),
            Err(e) => Err(usage(format!("thread pool: {e}"))),
        },
        None => execute(&cli.command),
    };
    match result {
        Ok((out, code)) => {
            let text = out.render();
            let written = match &common.out {
                Some(p) => fs::write(p, text).map_err(|e| format!("cannot write {}: {e}", p.display())),
                None => {
                    print!("{text}");
                    Ok(())
                }
            };
            match written {
                Ok(()) => code,
                Err(m) => {
                    eprintln!("{TOOL}: {m}");
                    EXIT_USAGE
                }
            }
        }
        Err(f) => {
            eprintln!("{TOOL}: {}", f.message);
            f.code
        }
    }
}

fn execute(cmd: &Command) -> Result<(Output, i32), Failure> {
    match cmd {
        Command::Bestapprox(a) => cmd_bestapprox(a),
        Command::Badness(a) => cmd_badness(a),
        Command::Cantor(a) => cmd_cantor(a),
        Command::Dimension(a) => cmd_dimension(a),
        Command::ScanR(a) => cmd_scan_r(a),
    }
    .map(|(mut out, code)| {
        out.command = cmd.name();
        (out, code)
    })
}

fn base_config(common: &CommonArgs) -> BTreeMap<String, String> {
    let mut c = BTreeMap::new();
    c.insert("seed".into(), common.seed.to_string());
    c.insert("format".into(), format!("{:?}", common.format).to_lowercase());
    c.insert("max_bits".into(), max_bits_from_env().to_string());
    c
}

fn opts() -> EnumerationOptions {
    EnumerationOptions::default()
}

// ---------------------------------------------------------------------------
// bestapprox

#[derive(Serialize)]
struct CheckSummary {
    name: &'static str,
    checked: usize,
    pass: usize,
    fail: usize,
    inconclusive: usize,
    /// Index of each failing or inconclusive line.
    flagged: Vec<usize>,
}

fn summarize(r: &twistedbad_core::bestapprox::VerificationReport) -> CheckSummary {
    CheckSummary {
        name: r.name,
        checked: r.lines.len(),
        pass: r.count(CheckStatus::Pass),
        fail: r.count(CheckStatus::Fail),
        inconclusive: r.count(CheckStatus::Inconclusive),
        flagged: r.lines.iter().filter(|l| l.status != CheckStatus::Pass).map(|l| l.index).collect(),
    }
}

fn cmd_bestapprox(a: &BestApproxArgs) -> Result<(Output, i32), Failure> {
    let theta: TargetVector = a.theta.parse()?;
    let j: WeightVector = a.j.parse()?;
    let bound = parse_rational(&a.bound)?;
    let mut config = base_config(&a.common);
    config.insert("theta".into(), theta.to_string());
    config.insert("j".into(), j.to_string());
    config.insert("bound".into(), bound.to_string());
    let mut out = Output::new("bestapprox", a.common.format, config);
    say(&a.common, format!("enumerating up to M ≤ {bound}"));
    let seq = enumerate_best_approximations(&theta, &j, &bound, &opts())?;
    let mink = verify_minkowski(&seq, max_bits_from_env());
    let lac = verify_lacunarity(&seq, j.n());
    let rows = seq
        .export_records()
        .into_iter()
        .map(|r| format!("{},\"{}\",{},{}", r.index, r.m_text(), r.height, r.residual))
        .collect();
    out.table = Some(("index,m,height,residual".into(), rows));
    let (ms, ls) = (summarize(&mink), summarize(&lac));
    let ok = ms.fail == 0 && ms.inconclusive == 0 && ls.fail == 0;
    out.push("check", &ms);
    out.push("check", &ls);
    out.push(
        "summary",
        &json!({"entries": seq.len(), "method": format!("{:?}", seq.method).to_lowercase(), "pass": ok}),
    );
    Ok((out, if ok { EXIT_OK } else { EXIT_VIOLATION }))
}

// ---------------------------------------------------------------------------
// tree parameters

fn load_tree_params(t: &TreeArgs, seed: u64) -> Result<(CantorParams, u32), Failure> {
    if let Some(p) = &t.params {
        let text = fs::read_to_string(p).map_err(|e| usage(format!("cannot read {}: {e}", p.display())))?;
        return Ok(CantorParams::from_param_file(&text)?);
    }
    let need = |v: &Option<String>, name: &str| {
        v.clone().ok_or_else(|| usage(format!("--{name} is required without --params")))
    };
    let theta: TargetVector = need(&t.theta, "theta")?.parse()?;
    let j: WeightVector = need(&t.j, "j")?.parse()?;
    let r = t.r.ok_or_else(|| usage("--R is required without --params"))?;
    let eps = parse_rational(&need(&t.epsilon, "epsilon")?)?;
    let mode: Mode = t.mode.parse()?;
    let depth = t.depth.ok_or_else(|| usage("--depth is required without --params"))?;
    Ok((CantorParams::new(j, r, eps, theta, mode, seed)?, depth))
}

fn tree_config(common: &CommonArgs, p: &CantorParams, depth: u32) -> BTreeMap<String, String> {
    let mut c = base_config(common);
    for line in p.to_param_file(depth).lines() {
        if let Some((k, v)) = line.split_once('=') {
            c.insert(k.to_string(), v.to_string());
        }
    }
    c
}

fn build(p: CantorParams, depth: u32, common: &CommonArgs) -> Result<CantorTree, Failure> {
    say(common, format!("building tree R = {}, depth {depth}", p.r));
    Ok(build_tree(p, depth, &opts())?)
}

// ---------------------------------------------------------------------------
// cantor

fn cmd_cantor(a: &CantorArgs) -> Result<(Output, i32), Failure> {
    let (params, depth) = load_tree_params(&a.tree, a.common.seed)?;
    if let Some(path) = &a.save_params {
        fs::write(path, params.to_param_file(depth))
            .map_err(|e| usage(format!("cannot write {}: {e}", path.display())))?;
    }
    let mut config = tree_config(&a.common, &params, depth);
    config.insert("cap".into(), a.cap.to_string());
    let mut out = Output::new("cantor", a.common.format, config);
    let strict = params.mode == Mode::Strict;
    let tree = build(params, depth, &a.common)?;
    let m = tree.materialize(depth, a.cap)?;
    say(&a.common, format!("materialized {} levels", m.levels.len()));
    let rows = export_records(&tree, &m)?
        .into_iter()
        .map(|r| {
            format!(
                "{},\"{}\",{},{}",
                r.level,
                r.lower_corner.join(","),
                r.survivor_count.map(|c| c.to_string()).unwrap_or_default(),
                r.selected
            )
        })
        .collect();
    out.table = Some(("level,lower_corner,survivor_count,selected".into(), rows));
    for s in &m.stats {
        out.push("level_stats", s);
    }
    let masses = MeasureWeights::new(&tree).level_masses(&m)?;
    let conserved = masses.iter().all(|x| *x == BigRational::from_integer(BigInt::from(1)));
    for (k, mass) in masses.iter().enumerate() {
        out.push("level_mass", &json!({"level": k, "mass": mass.to_string()}));
    }
    let mut facts_ok = true;
    for k in 0..m.levels.len().saturating_sub(1) {
        let rep = verify_fact_counts(&tree, k as u32, &m.levels[k])?;
        facts_ok &= rep.pass();
        out.push("facts", &rep);
    }
    out.push(
        "summary",
        &json!({
            "levels": m.levels.len() - 1,
            "complete": m.complete,
            "boxes": m.levels.iter().map(|l| l.len()).collect::<Vec<_>>(),
            "mass_conserved": conserved,
            "facts_pass": facts_ok,
        }),
    );
    let code = if strict && !(facts_ok && conserved) { EXIT_VIOLATION } else { EXIT_OK };
    Ok((out, code))
}

// ---------------------------------------------------------------------------
// dimension

fn cmd_dimension(a: &DimensionArgs) -> Result<(Output, i32), Failure> {
    let (params, depth) = load_tree_params(&a.tree, a.common.seed)?;
    let mut config = tree_config(&a.common, &params, depth);
    config.insert("samples".into(), a.samples.to_string());
    config.insert("depths".into(), a.depths.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(","));
    config.insert("fit_samples".into(), a.fit_samples.to_string());
    let mut out = Output::new("dimension", a.common.format, config);
    let strict = params.mode == Mode::Strict;
    let r = params.r_big();
    let j = params.j.clone();
    let tree = build(params, depth, &a.common)?;
    let w = MeasureWeights::new(&tree);
    let mut pass = true;
    if a.samples > 0 {
        let dp = DimensionCheckParams::for_tree(&tree)?;
        say(&a.common, format!("sampling {} cubes per level from level {}", a.samples, dp.k_min));
        let rep = mass_distribution_check(&w, &dp, a.samples, a.common.seed)?;
        pass = rep.pass;
        out.push("mass_distribution", &rep);
    } else {
        out.push("mass_distribution", &json!({"samples": 0, "pass": true}));
    }
    let lambda = lambda_of(&r, &j)?;
    match dimension_lower_bound(&r, &j) {
        Ok(b) => out.push(
            "dimension_bound",
            &json!({"lambda": lambda.to_decimal(20), "bound": b.to_decimal(20), "precision_bits": (!b.is_point()).then(|| b.precision_bits())}),
        ),
        Err(e) => out.push(
            "dimension_bound",
            &json!({"lambda": lambda.to_decimal(20), "bound": Value::Null, "refused": e.to_string()}),
        ),
    }
    if !a.depths.is_empty() {
        let est = empirical_dimension(&w, &a.depths, a.fit_samples, a.common.seed)?;
        out.push("empirical_dimension", &est);
    }
    Ok((out, if strict && !pass { EXIT_VIOLATION } else { EXIT_OK }))
}

// ---------------------------------------------------------------------------
// badness

fn cmd_badness(a: &BadnessArgs) -> Result<(Output, i32), Failure> {
    let max_bits = max_bits_from_env();
    let has_tree = a.tree.params.is_some() || a.tree.r.is_some();
    let mut config;
    let (theta, j, eta, seq): (TargetVector, WeightVector, TargetVector, Option<Arc<BestApproxSequence>>);
    if has_tree {
        let (params, depth) = load_tree_params(&a.tree, a.common.seed)?;
        config = tree_config(&a.common, &params, depth);
        let tree = build(params, depth, &a.common)?;
        theta = tree.params().theta.clone();
        j = tree.params().j.clone();
        eta = match &a.eta {
            Some(e) => e.parse()?,
            None => TargetVector::from_rationals(&sample_point(
                &tree,
                &Selector::Random { seed: a.common.seed, stream: 0 },
                depth,
            )?),
        };
        seq = Some(Arc::new(tree.sequence().clone()));
    } else {
        config = base_config(&a.common);
        theta = a.tree.theta.as_deref().ok_or_else(|| usage("--theta is required"))?.parse()?;
        j = a.tree.j.as_deref().ok_or_else(|| usage("--j is required"))?.parse()?;
        eta = match &a.eta {
            Some(e) => e.parse()?,
            None => TargetVector::zero(theta.n()),
        };
        seq = match &a.bound {
            Some(b) => Some(Arc::new(enumerate_best_approximations(&theta, &j, &parse_rational(b)?, &opts())?)),
            None => None,
        };
        config.insert("theta".into(), theta.to_string());
        config.insert("j".into(), j.to_string());
        if let Some(b) = &a.bound {
            config.insert("bound".into(), parse_rational(b)?.to_string());
        }
    }
    if eta.n() != theta.n() {
        return Err(usage("η and θ have different dimensions"));
    }
    config.insert("eta".into(), eta.to_string());
    config.insert("Q".into(), a.q.to_string());
    let mut out = Output::new("badness", a.common.format, config);
    say(&a.common, format!("scanning q ≤ {}", a.q));
    let mut profiles =
        vec![twisted_badness(&theta, &eta, &j, a.q, max_bits)?, classical_badness(&theta, &j, a.q, max_bits)?];
    for c in eta.components() {
        profiles.push(coordinate_badness(c, a.q, max_bits)?);
    }
    let rows = profiles
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let name = if i >= 2 { format!("coordinate_{}", i - 1) } else { p.functional.clone() };
            let js = p.to_json();
            let bits = js.precision_bits.map(|b| b.to_string()).unwrap_or_else(|| "exact".into());
            format!("{name},{},{},{bits},{},{}", js.q, js.value, js.argmin_q, js.certified)
        })
        .collect();
    out.table = Some(("functional,Q,value,precision_bits,argmin_q,certified".into(), rows));
    let mut code = EXIT_OK;
    if let Some(seq) = seq {
        let dual = dual_badness(&eta, &seq, max_bits)?;
        let mut rec = json!({
            "dual_badness": dual.to_decimal(30),
            "precision_bits": (!dual.is_point()).then(|| dual.precision_bits()),
            "sequence_len": seq.len(),
        });
        if dual.is_positive() && dual.certainly_lt(&twistedbad_core::arith::CertifiedReal::one()) {
            let pc = proposition_bound(&dual.rescale(dual.scale().max(64)), &j, j.n())?;
            rec["floor"] = Value::String(pc.bound.to_decimal(30));
        }
        out.push("dual", &rec);
        let rep = verify_proposition(&theta, &eta, &j, &seq, max_bits)?;
        if rep.precondition_met && !rep.pass {
            code = if rep.violations.is_empty() { EXIT_PRECISION } else { EXIT_VIOLATION };
        }
        out.push("proposition", &rep);
    }
    Ok((out, code))
}

// ---------------------------------------------------------------------------
// scan-r

fn cmd_scan_r(a: &ScanArgs) -> Result<(Output, i32), Failure> {
    let j: WeightVector = a.j.parse()?;
    if a.from == 0 || a.to < a.from || a.to > 256 {
        return Err(usage("need 1 ≤ --from ≤ --to ≤ 256"));
    }
    let mut config = base_config(&a.common);
    config.insert("j".into(), j.to_string());
    config.insert("from".into(), a.from.to_string());
    config.insert("to".into(), a.to.to_string());
    let mut out = Output::new("scan-r", a.common.format, config);
    let mut rows = Vec::new();
    for e in a.from..=a.to {
        let r = BigInt::from(1) << e;
        let lambda = lambda_of(&r, &j)?;
        let strict = strict_conditions_hold(&r, &j)?;
        rows.push(format!(
            "{e},{r},{},{},{},{},{},{}",
            target_count(&r, &j)?,
            strict_branching(&r, &j)?,
            strict_condition_value(&r, &j, 96).to_decimal(12),
            strict,
            lambda.to_decimal(12),
            twistedbad_core::arith::CertifiedReal::exact_int(j.n() as u64).sub(&lambda).to_decimal(12),
        ));
    }
    out.table = Some(("log2_R,R,target_count,strict_branching,condition,strict_ok,lambda,n_minus_lambda".into(), rows));
    out.push("summary", &json!({"minimal_strict_R": minimal_strict_r(&j)?.to_string()}));
    Ok((out, EXIT_OK))
}
