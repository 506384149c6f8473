//! Config-driven experiments with CSV output and run manifests.
//!
//! A config is a flat `key = value` file. `#` starts a comment line, keys
//! are namespaced by prefix (`seq.*`, `pc.*`, `mc.*`, ...) and unknown keys
//! are rejected. The command-line front end builds the same structure from
//! flags, so both paths share every runner below.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::energy::{
    additive_energy_with, energy_scaling_with, levels_with_arithmetic_blocks, EnergyMethod, EnergyReport,
};
use crate::error::{Error, Result};
use crate::growth::{parse_growth, parse_theta, GrowthFunction, ThetaFunction};
use crate::interval::{bohr_set, borel_cantelli_ratio, IntervalSet};
use crate::numeric::{fmt_decimal, fmt_fraction, parse_bigint, parse_rational, parse_real, to_f64, Rational};
use crate::pair::{
    divergence_probe, exceptional_alpha_candidates, monte_carlo_ppc, pair_correlation, perturbed_alpha,
    rank_proxy, targeted_alpha, Alpha, RegularSystemParams,
};
use crate::sequence::{
    parse_classic_family, BlockParams, BlockSequence, ClassicSequence, SequenceFile,
};

pub const TOOL_NAME: &str = "ppclab";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default cap on estimated work, in pair comparisons.
pub const DEFAULT_BUDGET: u128 = 10_000_000_000;

/// Every key a config may contain.
pub const KNOWN_KEYS: &[&str] = &[
    "experiment",
    "seed",
    "budget",
    "theta",
    "seq.file",
    "seq.f",
    "seq.beta",
    "seq.gamma",
    "seq.jmax",
    "seq.family",
    "seq.count",
    "energy.n",
    "energy.method",
    "scaling.levels",
    "pc.alpha",
    "pc.n",
    "pc.s",
    "pc.levels",
    "pc.regular_j",
    "pc.rank",
    "pc.scale",
    "mc.trials",
    "mc.schedule",
    "mc.s",
    "mc.delta",
    "bohr.d",
    "bohr.delta",
    "bc.files",
    "corollary.r",
    "corollary.eps",
    "out.csv",
    "out.seq",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    BuildSeq,
    Energy,
    Scaling,
    Pc,
    Probe,
    Mc,
    Bohr,
    BcRatio,
    Corollary,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::BuildSeq,
        Experiment::Energy,
        Experiment::Scaling,
        Experiment::Pc,
        Experiment::Probe,
        Experiment::Mc,
        Experiment::Bohr,
        Experiment::BcRatio,
        Experiment::Corollary,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::BuildSeq => "build-seq",
            Experiment::Energy => "energy",
            Experiment::Scaling => "scaling",
            Experiment::Pc => "pc",
            Experiment::Probe => "probe",
            Experiment::Mc => "mc",
            Experiment::Bohr => "bohr",
            Experiment::BcRatio => "bc-ratio",
            Experiment::Corollary => "corollary",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s.trim())
            .ok_or_else(|| {
                let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
                format!("unknown experiment `{}` (expected one of {})", s.trim(), names.join(", "))
            })
    }
}

/// Where a config entry came from, for error messages.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Flag(String),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Flag(name) => write!(f, "{name}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Entry {
    value: String,
    origin: Origin,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExperimentConfig {
    entries: BTreeMap<String, Entry>,
    /// The bytes the config hash is computed over.
    source: String,
    /// Directory relative paths in the config resolve against.
    base_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(line_no, format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            let value = value.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(Error::parse(line_no, format!("unknown key `{key}`")));
            }
            if value.is_empty() {
                return Err(Error::parse(line_no, format!("empty value for `{key}`")));
            }
            let entry = Entry {
                value: value.to_string(),
                origin: Origin::Line(line_no),
            };
            if let Some(prev) = entries.insert(key.to_string(), entry) {
                return Err(Error::parse(
                    line_no,
                    format!("duplicate key `{key}` (first set at {})", prev.origin),
                ));
            }
        }
        Ok(ExperimentConfig {
            entries,
            source: text.to_string(),
            base_dir: None,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    /// Builds a config from `(key, value, flag)` triples; the hashed source
    /// is the canonical `key = value` rendering.
    pub fn from_flags<'a>(items: impl IntoIterator<Item = (&'a str, String, &'a str)>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (key, value, flag) in items {
            if !KNOWN_KEYS.contains(&key) {
                return Err(Error::invalid(format!("internal: unknown key `{key}` for {flag}")));
            }
            entries.insert(
                key.to_string(),
                Entry {
                    value: value.trim().to_string(),
                    origin: Origin::Flag(flag.to_string()),
                },
            );
        }
        let mut cfg = ExperimentConfig {
            entries,
            source: String::new(),
            base_dir: None,
        };
        cfg.source = cfg.canonical_text();
        Ok(cfg)
    }

    /// `key = value` lines in key order.
    pub fn canonical_text(&self) -> String {
        self.entries
            .iter()
            .map(|(k, e)| format!("{k} = {}\n", e.value))
            .collect()
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.source.as_bytes())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    pub fn experiment(&self) -> Result<Experiment> {
        self.require("experiment", |v| v.parse())
    }

    fn error(&self, key: &str, msg: impl fmt::Display) -> Error {
        match self.entries.get(key).map(|e| &e.origin) {
            Some(Origin::Line(line)) => Error::Parse {
                line: *line,
                msg: format!("{key}: {msg}"),
            },
            Some(Origin::Flag(flag)) => Error::Config {
                at: flag.clone(),
                msg: msg.to_string(),
            },
            None => Error::Config {
                at: key.to_string(),
                msg: msg.to_string(),
            },
        }
    }

    fn opt<T>(&self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => parse(v).map(Some).map_err(|e| self.error(key, e)),
        }
    }

    fn require<T>(&self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<T> {
        self.opt(key, parse)?
            .ok_or_else(|| self.error(key, format!("missing required key `{key}`")))
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(|v| self.resolve(v))
    }

    fn resolve(&self, v: &str) -> PathBuf {
        let p = PathBuf::from(v);
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn parse_u64(v: &str) -> Result<u64, String> {
    v.trim()
        .replace('_', "")
        .parse()
        .map_err(|_| format!("expected a nonnegative integer, got `{v}`"))
}

fn parse_usize(v: &str) -> Result<usize, String> {
    parse_u64(v).map(|x| x as usize)
}

fn parse_u32(v: &str) -> Result<u32, String> {
    parse_u64(v)?
        .try_into()
        .map_err(|_| format!("value `{v}` is too large"))
}

/// `a..b` (inclusive) or a comma list.
pub fn parse_levels(v: &str) -> Result<Vec<u32>, String> {
    let v = v.trim();
    if let Some((a, b)) = v.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let (a, b) = (parse_u32(a)?, parse_u32(b)?);
        if a > b {
            return Err(format!("empty level range `{v}`"));
        }
        if b - a > 10_000 {
            return Err(format!("level range `{v}` is too long"));
        }
        return Ok((a..=b).collect());
    }
    parse_list(v, parse_u32)
}

pub fn parse_list<T>(v: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    let out: Vec<T> = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(item)
        .collect::<Result<_, _>>()?;
    if out.is_empty() {
        return Err(format!("empty list `{v}`"));
    }
    Ok(out)
}

fn parse_energy_method(v: &str) -> Result<EnergyMethod, String> {
    match v.trim() {
        "hashmap" => Ok(EnergyMethod::HashMap),
        "fingerprint" => Ok(EnergyMethod::Fingerprint),
        "merge" => Ok(EnergyMethod::SortedMerge),
        other => Err(format!("unknown energy method `{other}` (expected hashmap, fingerprint, merge)")),
    }
}

fn parse_nonneg_rational(v: &str) -> Result<Rational, String> {
    let r = parse_rational(v)?;
    if r.is_negative() {
        return Err(format!("expected a nonnegative number, got `{v}`"));
    }
    Ok(r)
}

/// A rectangular table written as RFC 4180 CSV with a header row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k].as_str()).collect())
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header).expect("write to memory");
        for row in &self.rows {
            w.write_record(row).expect("write to memory");
        }
        w.into_inner().expect("flush to memory")
    }
}

/// What an experiment produced, before anything is written to disk.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub experiment: Experiment,
    /// Human-readable result, printed to stdout.
    pub summary: String,
    pub table: Option<Table>,
    /// Sequence text for `build-seq`.
    pub sequence: Option<String>,
    /// Parameters and thresholds worth recording in the manifest.
    pub notes: BTreeMap<String, String>,
    pub estimated_cost: u128,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub experiment: Experiment,
    pub config_sha256: String,
    pub config: BTreeMap<String, String>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub estimated_cost: String,
    pub outputs: Vec<OutputFile>,
    pub notes: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }
}

/// `<csv>.manifest.json`.
pub fn manifest_path(csv: &Path) -> PathBuf {
    let mut name = csv.as_os_str().to_os_string();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<OutputFile> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    Ok(OutputFile {
        path: path.display().to_string(),
        sha256: sha256_hex(bytes),
        bytes: bytes.len() as u64,
    })
}

/// Executes the experiment and writes its outputs. A manifest is written
/// next to the CSV when `out.csv` is set.
pub fn run(cfg: &ExperimentConfig) -> Result<(Outcome, Option<RunManifest>)> {
    let started = now_ms();
    let outcome = execute(cfg)?;
    let mut outputs = Vec::new();
    if let (Some(text), Some(path)) = (&outcome.sequence, cfg.path("out.seq")) {
        outputs.push(write_file(&path, text.as_bytes())?);
    }
    let Some(csv_path) = cfg.path("out.csv") else {
        return Ok((outcome, None));
    };
    let table = outcome
        .table
        .as_ref()
        .ok_or_else(|| cfg.error("out.csv", format!("experiment {} has no tabular output", outcome.experiment)))?;
    outputs.push(write_file(&csv_path, &table.to_csv())?);
    let manifest = RunManifest {
        tool: TOOL_NAME.to_string(),
        version: TOOL_VERSION.to_string(),
        experiment: outcome.experiment,
        config_sha256: cfg.hash(),
        config: cfg.entries.iter().map(|(k, e)| (k.clone(), e.value.clone())).collect(),
        started_unix_ms: started,
        finished_unix_ms: now_ms(),
        estimated_cost: outcome.estimated_cost.to_string(),
        outputs,
        notes: outcome.notes.clone(),
    };
    let mpath = manifest_path(&csv_path);
    std::fs::write(&mpath, manifest.to_json()).map_err(|e| Error::io(&mpath, e))?;
    Ok((outcome, Some(manifest)))
}

/// Runs the experiment without touching the filesystem except to read
/// inputs.
pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome> {
    let experiment = cfg.experiment()?;
    let budget = cfg.opt("budget", |v| parse_u64(v).map(u128::from))?.unwrap_or(DEFAULT_BUDGET);
    let mut out = Outcome {
        experiment,
        summary: String::new(),
        table: None,
        sequence: None,
        notes: BTreeMap::new(),
        estimated_cost: 0,
    };
    let check = |estimated: u128| -> Result<()> {
        if estimated > budget {
            Err(Error::BudgetExceeded { estimated, cap: budget })
        } else {
            Ok(())
        }
    };
    match experiment {
        Experiment::BuildSeq => run_build_seq(cfg, &mut out, &check)?,
        Experiment::Energy => run_energy(cfg, &mut out, &check)?,
        Experiment::Scaling => run_scaling(cfg, &mut out, &check)?,
        Experiment::Pc => run_pc(cfg, &mut out, &check)?,
        Experiment::Probe => run_probe(cfg, &mut out, &check)?,
        Experiment::Mc => run_mc(cfg, &mut out, &check)?,
        Experiment::Bohr => run_bohr(cfg, &mut out)?,
        Experiment::BcRatio => run_bc_ratio(cfg, &mut out)?,
        Experiment::Corollary => run_corollary(cfg, &mut out, &check)?,
    }
    Ok(out)
}

type Budget<'a> = dyn Fn(u128) -> Result<()> + 'a;

/// `4^j_max`: storage of a block build grows like `T_j · bits ≈ 4^j`.
fn build_cost(jmax: u32) -> u128 {
    1u128 << (2 * jmax.min(60))
}

fn nlogn(n: usize) -> u128 {
    let n = n as u128;
    n * (128 - n.leading_zeros() as u128).max(1)
}

fn block_params(cfg: &ExperimentConfig) -> Result<Option<BlockParams>> {
    let Some(f) = cfg.opt("seq.f", parse_growth)? else {
        for key in ["seq.beta", "seq.gamma", "seq.jmax"] {
            if cfg.get(key).is_some() {
                return Err(cfg.error(key, "block parameters need `seq.f`"));
            }
        }
        return Ok(None);
    };
    let jmax = cfg.require("seq.jmax", parse_u32)?;
    let mut params = BlockParams::balanced(f, jmax);
    if let Some(beta) = cfg.opt("seq.beta", parse_real)? {
        params.beta = beta;
    }
    if let Some(gamma) = cfg.opt("seq.gamma", parse_real)? {
        params.gamma = gamma;
    }
    params.validate().map_err(|e| cfg.error("seq.f", e))?;
    Ok(Some(params))
}

fn build_blocks(params: BlockParams, check: &Budget) -> Result<BlockSequence> {
    check(build_cost(params.j_max))?;
    BlockSequence::build(params)
}

enum Loaded {
    Blocks(BlockSequence),
    Plain(Vec<BigInt>),
}

impl Loaded {
    fn elements(&self) -> &[BigInt] {
        match self {
            Loaded::Blocks(b) => b.elements(),
            Loaded::Plain(v) => v,
        }
    }

    fn blocks(&self, cfg: &ExperimentConfig) -> Result<&BlockSequence> {
        match self {
            Loaded::Blocks(b) => Ok(b),
            Loaded::Plain(_) => Err(cfg.error(
                "seq.file",
                "this experiment needs a block sequence (a file written by build-seq, or seq.f with seq.jmax)",
            )),
        }
    }
}

/// One of `seq.file`, `seq.family` (+ `seq.count`) or `seq.f` (+ block
/// parameters).
fn load_sequence(cfg: &ExperimentConfig, check: &Budget) -> Result<Loaded> {
    let sources = ["seq.file", "seq.family", "seq.f"]
        .iter()
        .filter(|k| cfg.get(k).is_some())
        .count();
    if sources != 1 {
        return Err(cfg.error(
            "seq.file",
            "exactly one of seq.file, seq.family or seq.f must be given",
        ));
    }
    if let Some(path) = cfg.path("seq.file") {
        let file = SequenceFile::read(&path)?;
        return Ok(match file.blocks {
            Some(b) => Loaded::Blocks(b),
            None => Loaded::Plain(file.elements),
        });
    }
    if let Some(family) = cfg.opt("seq.family", parse_classic_family)? {
        let count = cfg.require("seq.count", parse_usize)?;
        check(count as u128)?;
        let seq = ClassicSequence::new(family, count).map_err(|e| cfg.error("seq.family", e))?;
        return Ok(Loaded::Plain(seq.elements().to_vec()));
    }
    let params = block_params(cfg)?.expect("seq.f present");
    Ok(Loaded::Blocks(build_blocks(params, check)?))
}

fn theta(cfg: &ExperimentConfig) -> Result<ThetaFunction> {
    Ok(cfg.opt("theta", parse_theta)?.unwrap_or(ThetaFunction::OnePlusLog))
}

fn prefix_len(cfg: &ExperimentConfig, key: &str, len: usize, min: usize) -> Result<usize> {
    let n = cfg.opt(key, parse_usize)?.unwrap_or(len);
    if n < min || n > len {
        return Err(cfg.error(key, format!("N = {n} outside {min}..={len}")));
    }
    Ok(n)
}

fn run_build_seq(cfg: &ExperimentConfig, out: &mut Outcome, check: &Budget) -> Result<()> {
    let params = block_params(cfg)?.ok_or_else(|| cfg.error("seq.f", "build-seq needs `seq.f`"))?;
    out.estimated_cost = build_cost(params.j_max);
    let seq = build_blocks(params, check)?;
    let mut table = Table::new(&["level", "kind", "start_index", "len", "raw_len", "near_floor"]);
    for b in seq.blocks() {
        table.push(vec![
            b.level.to_string(),
            b.kind.tag().to_string(),
            b.start_index.to_string(),
            b.len.to_string(),
            format!("{:.6}", b.raw_len),
            b.near_floor_boundary().to_string(),
        ]);
    }
    let flagged = seq.blocks().iter().filter(|b| b.near_floor_boundary()).count();
    out.summary = format!(
        "built {} elements over {} levels; T_j = {:?}; largest element has {} bits; {} block length(s) within {:e} of a floor boundary\n",
        seq.len(),
        params.j_max,
        seq.checkpoints(),
        seq.elements().last().map_or(0, BigInt::bits),
        flagged,
        crate::sequence::FLOOR_SLACK,
    );
    out.sequence = Some(seq.to_text());
    if cfg.get("out.seq").is_none() {
        out.summary.push_str(&seq.to_text());
    }
    out.table = Some(table);
    Ok(())
}

fn run_energy(cfg: &ExperimentConfig, out: &mut Outcome, check: &Budget) -> Result<()> {
    let seq = load_sequence(cfg, check)?;
    let n = prefix_len(cfg, "energy.n", seq.elements().len(), 1)?;
    let method = cfg.opt("energy.method", parse_energy_method)?.unwrap_or_default();
    out.estimated_cost = (n as u128) * (n as u128);
    check(out.estimated_cost)?;
    let e = additive_energy_with(&seq.elements()[..n], method)?;
    let mut table = Table::new(&["N", "energy"]);
    table.push(vec![n.to_string(), e.to_string()]);
    out.summary = format!("{e}\n");
    out.table = Some(table);
    Ok(())
}

fn run_scaling(cfg: &ExperimentConfig, out: &mut Outcome, check: &Budget) -> Result<()> {
    let loaded = load_sequence(cfg, check)?;
    let seq = loaded.blocks(cfg)?;
    let levels = match cfg.opt("scaling.levels", parse_levels)? {
        Some(l) => l,
        None => levels_with_arithmetic_blocks(seq),
    };
    let method = cfg.opt("energy.method", parse_energy_method)?.unwrap_or_default();
    out.estimated_cost = levels
        .iter()
        .filter_map(|&j| seq.checkpoint(j))
        .map(|n| (n as u128) * (n as u128))
        .sum();
    check(out.estimated_cost)?;
    let summary = energy_scaling_with(seq, &levels, method).map_err(|e| match e {
        Error::InvalidArgument(msg) => cfg.error("scaling.levels", msg),
        other => other,
    })?;
    let mut table = Table::new(&["j", "N", "energy", "f_N", "normalized"]);
    for r in &summary.reports {
        table.push(vec![
            r.level.to_string(),
            r.n.to_string(),
            r.energy.to_string(),
            r.f_n.to_string(),
            r.normalized.to_string(),
        ]);
    }
    out.summary = format!(
        "levels {:?}: normalized ratio min {:.6}, max {:.6}, max/min {:.4}\n",
        levels,
        summary.min_normalized,
        summary.max_normalized,
        summary.spread()
    );
    out.notes.insert("normalized_spread".into(), summary.spread().to_string());
    out.table = Some(table);
    Ok(())
}

fn run_pc(cfg: &ExperimentConfig, out: &mut Outcome, check: &Budget) -> Result<()> {
    let seq = load_sequence(cfg, check)?;
    let n = prefix_len(cfg, "pc.n", seq.elements().len(), 2)?;
    let alpha = cfg.require("pc.alpha", Alpha::parse)?;
    let s_list = cfg.require("pc.s", |v| parse_list(v, parse_nonneg_rational))?;
    out.estimated_cost = nlogn(n) * s_list.len() as u128;
    check(out.estimated_cost)?;
    let mut table = Table::new(&["N", "s", "alpha", "pairs", "R"]);
    for s in &s_list {
        let pc = pair_correlation(&seq.elements()[..n], &alpha, s)?;
        out.summary.push_str(&format!(
            "N = {n}, s = {}: R = {} = {}\n",
            fmt_decimal(s),
            fmt_fraction(&pc.r_exact()),
            pc.r()
        ));
        table.push(vec![
            n.to_string(),
            fmt_decimal(s),
            alpha.to_string(),
            pc.ordered_pairs.to_string(),
            pc.r().to_string(),
        ]);
    }
    out.table = Some(table);
    Ok(())
}

fn run_probe(cfg: &ExperimentConfig, out: &mut Outcome, check: &Budget) -> Result<()> {
    let loaded = load_sequence(cfg, check)?;
    let seq = loaded.blocks(cfg)?;
    let levels = cfg.require("pc.levels", parse_levels)?;
    let s = cfg
        .opt("pc.s", parse_nonneg_rational)?
        .unwrap_or_else(|| Rational::from_integer(1.into()));
    if s.is_zero() {
        return Err(cfg.error("pc.s", "the probe needs s > 0"));
    }
    let theta = theta(cfg)?;
    let f = seq.params().f;
    out.estimated_cost = levels.iter().filter_map(|&j| seq.checkpoint(j)).map(nlogn).sum();
    check(out.estimated_cost)?;
    let alpha = probe_alpha(cfg, seq, f, theta, &s, &mut out.notes)?;
    let trajectory = divergence_probe(seq, &alpha, &s, &levels, &theta).map_err(|e| match e {
        Error::InvalidArgument(msg) => cfg.error("pc.levels", msg),
        other => other,
    })?;
    let mut table = Table::new(&["j", "N", "pairs", "R", "predicted", "ratio"]);
    for p in &trajectory.points {
        table.push(vec![
            p.level.to_string(),
            p.n.to_string(),
            p.ordered_pairs.to_string(),
            p.r.to_string(),
            p.predicted.to_string(),
            p.ratio_to_prediction().to_string(),
        ]);
        out.summary.push_str(&format!(
            "j = {:>2}  T_j = {:>7}  R = {:<12.6}  R/(2s) = {:.3}\n",
            p.level,
            p.n,
            p.r,
            p.r / (2.0 * to_f64(&s))
        ));
    }
    out.notes.insert("alpha".into(), alpha.to_string());
    out.notes.insert("s".into(), fmt_decimal(&s));
    out.table = Some(table);
    Ok(())
}

/// `pc.alpha`, or candidate `pc.rank` of the regular system at level
/// `pc.regular_j`, perturbed by `pc.scale · ψ(i)`; without `pc.scale` the
/// resolving scale for that level is used.
fn probe_alpha(
    cfg: &ExperimentConfig,
    seq: &BlockSequence,
    f: GrowthFunction,
    theta: ThetaFunction,
    s: &Rational,
    notes: &mut BTreeMap<String, String>,
) -> Result<Alpha> {
    let explicit = cfg.opt("pc.alpha", Alpha::parse)?;
    let regular_j = cfg.opt("pc.regular_j", parse_u32)?;
    match (explicit, regular_j) {
        (Some(a), None) => Ok(a),
        (None, Some(j)) => {
            let index = cfg.opt("pc.rank", parse_usize)?.unwrap_or(0);
            let params = RegularSystemParams::new(f, theta);
            let scale = cfg.opt("pc.scale", parse_nonneg_rational)?;
            let alpha = match scale {
                None => {
                    let (alpha, scale) = targeted_alpha(seq, &params, j, index, s)
                        .map_err(|e| cfg.error("pc.regular_j", e))?;
                    notes.insert("perturbation_scale".into(), fmt_scale(&scale));
                    alpha
                }
                Some(scale) => {
                    let cands = exceptional_alpha_candidates(&params, j, index + 1)
                        .map_err(|e| cfg.error("pc.regular_j", e))?;
                    let centre = cands
                        .get(index)
                        .ok_or_else(|| cfg.error("pc.rank", format!("level {j} has {} candidates", cands.len())))?;
                    let q = centre.as_rational().expect("candidates are rational").denom().clone();
                    notes.insert("perturbation_scale".into(), fmt_scale(&scale));
                    perturbed_alpha(centre, &params, rank_proxy(&q), &scale).map_err(|e| cfg.error("pc.scale", e))?
                }
            };
            let centre = &exceptional_alpha_candidates(&params, j, index + 1)
                .map_err(|e| cfg.error("pc.regular_j", e))?[index];
            notes.insert("alpha_centre".into(), centre.to_string());
            notes.insert("regular_system_level".into(), j.to_string());
            notes.insert("candidate_index".into(), index.to_string());
            Ok(alpha)
        }
        (Some(_), Some(_)) => Err(cfg.error("pc.alpha", "give either pc.alpha or pc.regular_j, not both")),
        (None, None) => Err(cfg.error("pc.alpha", "the probe needs pc.alpha or pc.regular_j")),
    }
}

/// `2^-k` for powers of two, otherwise the exact decimal or fraction.
fn fmt_scale(scale: &Rational) -> String {
    let den = scale.denom();
    if scale.numer() == &BigInt::from(1) && (den & (den - 1u32)).is_zero() {
        return format!("2^-{}", den.bits() - 1);
    }
    fmt_decimal(scale)
}

fn run_mc(cfg: &ExperimentConfig, out: &mut Outcome, check: &Budget) -> Result<()> {
    let seq = load_sequence(cfg, check)?;
    let trials = cfg.require("mc.trials", parse_usize)?;
    let schedule = cfg.require("mc.schedule", |v| parse_list(v, parse_usize))?;
    let s_list = cfg.require("mc.s", |v| parse_list(v, parse_nonneg_rational))?;
    let delta = cfg.opt("mc.delta", parse_real)?.unwrap_or(0.1);
    let seed = cfg.require("seed", parse_u64)?;
    if trials == 0 {
        return Err(cfg.error("mc.trials", "trials must be at least 1"));
    }
    let len = seq.elements().len();
    if let Some(&bad) = schedule.iter().find(|&&n| n < 2 || n > len) {
        return Err(cfg.error("mc.schedule", format!("N = {bad} outside 2..={len}")));
    }
    out.estimated_cost =
        trials as u128 * s_list.len() as u128 * schedule.iter().map(|&n| nlogn(n)).sum::<u128>();
    check(out.estimated_cost)?;
    let report = monte_carlo_ppc(seq.elements(), seed, trials, &schedule, &s_list, delta)?;
    let mut table = Table::new(&["trial", "seed", "N", "s", "R"]);
    for row in &report.rows {
        table.push(vec![
            row.trial.to_string(),
            row.seed.to_string(),
            row.n.to_string(),
            fmt_decimal(&row.s),
            row.r.to_string(),
        ]);
    }
    for s in &report.summary {
        out.summary.push_str(&format!(
            "N = {:>7}  s = {:<6}  mean R = {:<10.6}  P(R > (1+δ)2s) = {:.3}\n",
            s.n,
            fmt_decimal(&s.s),
            s.mean_r,
            s.frac_exceeding
        ));
    }
    out.notes.insert("delta".into(), delta.to_string());
    out.notes.insert("alpha_width_bits".into(), crate::pair::mc_width(seq.elements()).to_string());
    out.table = Some(table);
    Ok(())
}

fn run_bohr(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<()> {
    let d = cfg.require("bohr.d", parse_bigint)?;
    if d.is_zero() {
        return Err(cfg.error("bohr.d", "d must be nonzero"));
    }
    let delta = cfg.require("bohr.delta", parse_rational)?;
    let set = bohr_set(&d, &delta).map_err(|e| match e {
        Error::InvalidArgument(msg) => cfg.error("bohr.delta", msg),
        other => other,
    })?;
    let mut table = Table::new(&["lo", "hi"]);
    for iv in set.intervals() {
        table.push(vec![fmt_fraction(iv.lo()), fmt_fraction(iv.hi())]);
    }
    out.summary = format!("{}measure {}\n", set.to_text(), fmt_fraction(&set.measure()));
    out.table = Some(table);
    Ok(())
}

fn run_bc_ratio(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<()> {
    let files = cfg.require("bc.files", |v| parse_list(v, |s| Ok(s.to_string())))?;
    let mut sets = Vec::with_capacity(files.len());
    for f in &files {
        let path = cfg.resolve(f);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        sets.push(IntervalSet::parse(&text).map_err(|e| match e {
            Error::Parse { line, msg } => Error::Parse {
                line,
                msg: format!("{}: {msg}", path.display()),
            },
            other => other,
        })?);
    }
    let ratio = borel_cantelli_ratio(&sets)?;
    let mut table = Table::new(&["sets", "ratio"]);
    table.push(vec![sets.len().to_string(), fmt_fraction(&ratio)]);
    out.summary = format!("{} ≈ {}\n", fmt_fraction(&ratio), to_f64(&ratio));
    out.table = Some(table);
    Ok(())
}

fn run_corollary(cfg: &ExperimentConfig, out: &mut Outcome, check: &Budget) -> Result<()> {
    let r = cfg.require("corollary.r", parse_u32)?;
    let jmax = cfg.require("seq.jmax", parse_u32)?;
    let eps = cfg.opt("corollary.eps", parse_real)?.unwrap_or(0.5);
    let table = reproduce_corollary_table(r, jmax, eps, check).map_err(|e| match e {
        Error::InvalidArgument(msg) => cfg.error("corollary.r", msg),
        other => other,
    })?;
    out.estimated_cost = corollary_cost(r, jmax)?;
    let normalized: Vec<f64> = table
        .column("normalized")
        .expect("column exists")
        .iter()
        .map(|v| v.parse().expect("written as f64"))
        .collect();
    let min = normalized.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = normalized.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    out.summary = format!(
        "f = ilog({r}), j = 1..={jmax}: normalized max/min = {:.4}\n",
        max / min
    );
    out.notes.insert("normalized_spread".into(), (max / min).to_string());
    out.table = Some(table);
    Ok(())
}

fn corollary_cost(r: u32, jmax: u32) -> Result<u128> {
    let f = GrowthFunction::ilog(r).map_err(Error::InvalidArgument)?;
    let params = BlockParams::balanced(f, jmax);
    params.validate()?;
    // T_j ≤ 2^{j+1} for every preset.
    let pairs: u128 = (1..=jmax).map(|j| 1u128 << (2 * (j + 1))).sum();
    Ok(pairs + build_cost(jmax))
}

/// The energy table for `f = ilog(r)` with `β = 2/3 = 2γ` at every level
/// `1..=jmax`: columns `j, T_j, energy, normalized, predicted_dim`, the last
/// being the Hausdorff-dimension prediction for `ilog_eps(r, eps)`.
pub fn reproduce_corollary_table(
    r: u32,
    jmax: u32,
    eps: f64,
    check: &dyn Fn(u128) -> Result<()>,
) -> Result<Table> {
    if !(1..=2).contains(&r) {
        return Err(Error::invalid(format!("corollary tables are defined for r in {{1, 2}}, got {r}")));
    }
    let f = GrowthFunction::ilog(r).map_err(Error::InvalidArgument)?;
    let f_eps = GrowthFunction::ilog_eps(r, eps).map_err(Error::InvalidArgument)?;
    check(corollary_cost(r, jmax)?)?;
    let params = BlockParams::balanced(f, jmax);
    let seq = BlockSequence::build(params)?;
    let dim = f_eps.predicted_hausdorff_dim();
    let mut table = Table::new(&["j", "T_j", "energy", "normalized", "predicted_dim"]);
    for j in 1..=jmax {
        let n = seq.checkpoint(j).expect("level built");
        let e = additive_energy_with(seq.truncate(n)?, EnergyMethod::default())?;
        let rep = EnergyReport::new(j, n, e, &f, params.beta, params.gamma);
        table.push(vec![
            j.to_string(),
            n.to_string(),
            rep.energy.to_string(),
            rep.normalized.to_string(),
            dim.to_string(),
        ]);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::parse(text).unwrap()
    }

    fn no_budget(_: u128) -> Result<()> {
        Ok(())
    }

    #[test]
    fn config_parse_errors_carry_lines() {
        let err = ExperimentConfig::parse("experiment = pc\n# c\n\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
        let err = ExperimentConfig::parse("experiment pc\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = ExperimentConfig::parse("seed = 1\nseed = 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = ExperimentConfig::parse("seed =\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn bad_values_point_at_their_line() {
        let c = cfg("experiment = bohr\nbohr.d = 2\nbohr.delta = x\n");
        let err = execute(&c).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert_eq!(err.exit_code(), 2);
        let err = execute(&cfg("experiment = nope\n")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn bohr_experiment() {
        let out = execute(&cfg("experiment = bohr\nbohr.d = 2\nbohr.delta = 1/8\n")).unwrap();
        assert_eq!(out.table.as_ref().unwrap().rows.len(), 3);
        assert!(out.summary.ends_with("measure 1/4\n"), "{}", out.summary);
        let err = execute(&cfg("experiment = bohr\nbohr.d = 0\nbohr.delta = 1/8\n")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn corollary_first_level() {
        let t = reproduce_corollary_table(1, 1, 0.5, &no_budget).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.column("energy").unwrap(), vec!["6"]);
        assert_eq!(t.column("T_j").unwrap(), vec!["2"]);
        let t = reproduce_corollary_table(1, 3, 0.5, &no_budget).unwrap();
        for d in t.column("predicted_dim").unwrap() {
            assert_eq!(d, "1");
        }
        assert!(reproduce_corollary_table(3, 3, 0.5, &no_budget).is_err());
    }

    #[test]
    fn budget_refusal_before_work() {
        let c = cfg("experiment = corollary\ncorollary.r = 1\nseq.jmax = 30\nbudget = 1000\n");
        let err = execute(&c).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { cap: 1000, .. }));
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn energy_and_pc_on_built_sequence() {
        let out = execute(&cfg("experiment = energy\nseq.f = ilog(1)\nseq.jmax = 3\n")).unwrap();
        // {1, 2, 4, 5, 10, 11, 12, 13, 22}
        let el: Vec<BigInt> = [1, 2, 4, 5, 10, 11, 12, 13, 22].iter().map(|&x| BigInt::from(x)).collect();
        let e = crate::energy::additive_energy_bruteforce(&el).unwrap();
        assert_eq!(out.summary, format!("{e}\n"));

        let out = execute(&cfg(
            "experiment = pc\nseq.family = identity\nseq.count = 3\npc.alpha = 1/3\npc.s = 1, 1/2\n",
        ))
        .unwrap();
        assert_eq!(out.table.unwrap().column("pairs").unwrap(), vec!["6", "0"]);
    }

    #[test]
    fn sequence_source_must_be_unique() {
        let err = execute(&cfg(
            "experiment = energy\nseq.family = identity\nseq.count = 3\nseq.f = ilog(1)\nseq.jmax = 2\n",
        ))
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = execute(&cfg("experiment = energy\n")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn levels_and_lists() {
        assert_eq!(parse_levels("8..13").unwrap(), (8..=13).collect::<Vec<_>>());
        assert_eq!(parse_levels("2..=4").unwrap(), vec![2, 3, 4]);
        assert_eq!(parse_levels("5, 7").unwrap(), vec![5, 7]);
        for bad in ["", "4..2", "a..3", "1..100000", ",", "-1"] {
            assert!(parse_levels(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn csv_quotes_fields_with_commas() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["fixed(5, 16)".into(), "1".into()]);
        assert_eq!(String::from_utf8(t.to_csv()).unwrap(), "a,b\n\"fixed(5, 16)\",1\n");
    }

    #[test]
    fn flag_configs_hash_their_canonical_text() {
        let c = ExperimentConfig::from_flags([
            ("experiment", "bohr".to_string(), "<subcommand>"),
            ("bohr.delta", "1/8".to_string(), "--delta"),
            ("bohr.d", "2".to_string(), "--d"),
        ])
        .unwrap();
        assert_eq!(c.source(), "bohr.d = 2\nbohr.delta = 1/8\nexperiment = bohr\n");
        assert_eq!(c.hash(), sha256_hex(c.source().as_bytes()));
        let reparsed = ExperimentConfig::parse(c.source()).unwrap();
        assert_eq!(reparsed.hash(), c.hash());
    }

    #[test]
    fn scale_formatting() {
        assert_eq!(fmt_scale(&Rational::new(1.into(), BigInt::from(1) << 300usize)), "2^-300");
        assert_eq!(fmt_scale(&Rational::from_integer(1.into())), "2^-0");
        assert_eq!(fmt_scale(&crate::numeric::rat(3, 4)), "0.75");
    }

    #[test]
    fn manifest_path_appends_suffix() {
        assert_eq!(manifest_path(Path::new("out/x.csv")), PathBuf::from("out/x.csv.manifest.json"));
    }
}
