//! The `fpp` command line: configuration, dispatch to the experiments, and
//! result files.
//!
//! Configuration is an INI file of `key = value` lines. Keys in the
//! `[distribution]` section describe the edge-weight law; every other key may
//! sit in the root or in any other section. Precedence, lowest first: file,
//! the `FPP_SEED` environment variable, command-line flags.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::Serialize;
use serde_json::{json, Value};

use crate::coupling::SplitDraw;
use crate::error::{Error, Result};
use crate::experiments::{self as ex, Mode, Model, Setup, TruncationWindow, Verdict};
use crate::lattice::Vertex;
use crate::paths::estimate_time_constant;
use crate::rng::DEFAULT_SEED;
use crate::weights::{choose_threshold, validate_distribution, Distribution, ModeThreshold};

pub const SCHEMA_VERSION: u32 = 1;
pub const SEED_ENV: &str = "FPP_SEED";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Validate,
    Scan,
    CylinderScan,
    CouplingCheck,
    MedianFind,
    Goodset,
    Flip,
    Antichain,
    Smallball,
    Reckon,
    TimeConstant,
}

impl Command {
    pub const ALL: [Command; 11] = [
        Command::Validate,
        Command::Scan,
        Command::CylinderScan,
        Command::CouplingCheck,
        Command::MedianFind,
        Command::Goodset,
        Command::Flip,
        Command::Antichain,
        Command::Smallball,
        Command::Reckon,
        Command::TimeConstant,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Scan => "scan",
            Command::CylinderScan => "cylinder-scan",
            Command::CouplingCheck => "coupling-check",
            Command::MedianFind => "median-find",
            Command::Goodset => "goodset",
            Command::Flip => "flip",
            Command::Antichain => "antichain",
            Command::Smallball => "smallball",
            Command::Reckon => "reckon",
            Command::TimeConstant => "time-constant",
        }
    }

    pub fn parse(s: &str) -> Result<Command> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown command '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// A fully parsed run. Optional fields are checked by the command that
/// needs them.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub distribution: Distribution,
    pub d0: Option<f64>,
    pub d0_quantile: f64,
    pub k: u32,
    pub j_max: Option<u32>,
    pub pad: f64,
    pub dim: usize,
    pub x: Option<Vertex>,
    pub n_list: Option<Vec<i64>>,
    pub alpha: Option<f64>,
    pub replicates: usize,
    pub outer_draws: usize,
    pub inner_draws: usize,
    pub seed: u64,
    pub a_low: Option<f64>,
    pub tol: Option<f64>,
    pub xi: f64,
    pub good_filter: bool,
    pub epsilon: Option<f64>,
    pub r: Option<f64>,
    pub j: Option<u32>,
    pub new_n: Option<u64>,
    pub draw: u64,
    pub indices: Option<Vec<u32>>,
    pub c_grid: Vec<f64>,
    pub augment: bool,
    #[serde(skip)]
    pub output: Option<PathBuf>,
    pub format: Format,
    #[serde(skip)]
    pub workers: Option<usize>,
}

#[derive(Parser, Debug, Default)]
#[command(name = "fpp", version, about = "First-passage percolation fluctuation experiments")]
pub struct Cli {
    /// validate, scan, cylinder-scan, coupling-check, median-find, goodset,
    /// flip, antichain, smallball, reckon or time-constant
    pub command: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// csv or json
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Override any config key, e.g. `--set x=64,0` or `--set distribution.kind=exponential`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

fn norm_key(k: &str) -> String {
    k.trim().chars().filter(|c| !matches!(c, '_' | '-' | ' ')).collect::<String>().to_lowercase()
}

const KEYS: &[&str] = &[
    "command",
    "seed",
    "replicates",
    "outerdraws",
    "innerdraws",
    "k",
    "jmax",
    "pad",
    "dim",
    "x",
    "nlist",
    "alpha",
    "d0",
    "d0quantile",
    "a",
    "tol",
    "xi",
    "goodfilter",
    "epsilon",
    "r",
    "j",
    "newn",
    "draw",
    "indices",
    "cgrid",
    "augment",
    "output",
    "format",
    "workers",
];

const DIST_KEYS: &[&str] = &["spec", "kind", "rate", "low", "high", "shift", "a", "b", "p", "value", "values", "probs"];

/// Flat key/value view of every configuration source, with distribution
/// keys prefixed `dist.`.
#[derive(Debug, Default)]
struct Raw {
    map: BTreeMap<String, String>,
    errors: Vec<String>,
}

impl Raw {
    fn insert(&mut self, section: Option<&str>, key: &str, value: &str) {
        let (section, key) = match key.split_once('.') {
            Some((s, k)) if section.is_none() => (Some(s), k),
            _ => (section, key),
        };
        let is_dist = section.is_some_and(|s| matches!(norm_key(s).as_str(), "distribution" | "dist"));
        let k = norm_key(key);
        if is_dist {
            if DIST_KEYS.contains(&k.as_str()) {
                self.map.insert(format!("dist.{k}"), value.trim().to_string());
            } else {
                self.errors.push(format!("unknown distribution field '{key}'"));
            }
        } else if KEYS.contains(&k.as_str()) {
            self.map.insert(k, value.trim().to_string());
        } else {
            self.errors.push(format!("unknown field '{key}'"));
        }
    }

    fn get(&self, k: &str) -> Option<&str> {
        self.map.get(k).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&mut self, k: &str, name: &str) -> Option<T> {
        let v = self.get(k)?.to_string();
        match v.parse() {
            Ok(t) => Some(t),
            Err(_) => {
                self.errors.push(format!("{name}: cannot parse '{v}'"));
                None
            }
        }
    }

    fn list<T: std::str::FromStr>(&mut self, k: &str, name: &str) -> Option<Vec<T>> {
        let v = self.get(k)?.to_string();
        let out: std::result::Result<Vec<T>, _> = v.split(',').map(|s| s.trim().parse()).collect();
        match out {
            Ok(t) if !t.is_empty() => Some(t),
            _ => {
                self.errors.push(format!("{name}: cannot parse list '{v}'"));
                None
            }
        }
    }
}

/// Parses a compact distribution such as `exp(1)`, `uniform(0,2)`,
/// `shifted_exp(1,2)`, `two_point(1,10,0.5)`, `point(3)`,
/// `table(1:0.2, 2:0.8)` or `mixture(0.7*point(0), 0.3*exp(1))`.
pub fn parse_distribution(s: &str) -> Result<Distribution> {
    let s = s.trim();
    let bad = || Error::Config(format!("cannot parse distribution '{s}'"));
    let open = s.find('(').ok_or_else(bad)?;
    if !s.ends_with(')') {
        return Err(bad());
    }
    let name = norm_key(&s[..open]);
    let args = split_top(&s[open + 1..s.len() - 1]);
    let nums = || -> Result<Vec<f64>> { args.iter().map(|a| a.trim().parse::<f64>().map_err(|_| bad())).collect() };
    let arity = |k: usize, v: Vec<f64>| if v.len() == k { Ok(v) } else { Err(bad()) };
    match name.as_str() {
        "exp" | "exponential" => Distribution::exponential(arity(1, nums()?)?[0]),
        "uniform" => {
            let v = arity(2, nums()?)?;
            Distribution::uniform(v[0], v[1])
        }
        "shiftedexp" | "shiftedexponential" => {
            let v = arity(2, nums()?)?;
            Distribution::shifted_exponential(v[0], v[1])
        }
        "twopoint" => {
            let v = arity(3, nums()?)?;
            Distribution::two_point(v[0], v[1], v[2])
        }
        "point" | "pointmass" => Distribution::point_mass(arity(1, nums()?)?[0]),
        "table" => {
            let mut values = Vec::new();
            let mut probs = Vec::new();
            for a in &args {
                let (v, p) = a.split_once(':').ok_or_else(bad)?;
                values.push(v.trim().parse::<f64>().map_err(|_| bad())?);
                probs.push(p.trim().parse::<f64>().map_err(|_| bad())?);
            }
            Distribution::table(&values, &probs)
        }
        "mixture" => {
            let mut comps = Vec::new();
            for a in &args {
                let (w, d) = a.split_once('*').ok_or_else(bad)?;
                comps.push((w.trim().parse::<f64>().map_err(|_| bad())?, parse_distribution(d)?));
            }
            Distribution::mixture(comps)
        }
        _ => Err(bad()),
    }
}

fn split_top(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(std::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    if !cur.trim().is_empty() {
        out.push(cur);
    }
    out
}

fn distribution_from(raw: &mut Raw) -> Option<Distribution> {
    if let Some(spec) = raw.get("dist.spec").map(str::to_string) {
        return parse_distribution(&spec).map_err(|e| raw.errors.push(format!("distribution: {e}"))).ok();
    }
    let Some(kind) = raw.get("dist.kind").map(norm_key) else {
        raw.errors.push("missing field 'distribution' (give [distribution] kind = ... or spec = ...)".into());
        return None;
    };
    let need = |raw: &mut Raw, k: &str| {
        let v = raw.parse::<f64>(&format!("dist.{k}"), &format!("distribution.{k}"));
        if v.is_none() && raw.get(&format!("dist.{k}")).is_none() {
            raw.errors.push(format!("missing field 'distribution.{k}'"));
        }
        v
    };
    let built = match kind.as_str() {
        "exponential" | "exp" => need(raw, "rate").map(Distribution::exponential),
        "uniform" => match (need(raw, "low"), need(raw, "high")) {
            (Some(a), Some(b)) => Some(Distribution::uniform(a, b)),
            _ => None,
        },
        "shiftedexponential" | "shiftedexp" => match (need(raw, "shift"), need(raw, "rate")) {
            (Some(a), Some(b)) => Some(Distribution::shifted_exponential(a, b)),
            _ => None,
        },
        "twopoint" => match (need(raw, "a"), need(raw, "b"), need(raw, "p")) {
            (Some(a), Some(b), Some(p)) => Some(Distribution::two_point(a, b, p)),
            _ => None,
        },
        "pointmass" | "point" => need(raw, "value").map(Distribution::point_mass),
        "table" => match (
            raw.list::<f64>("dist.values", "distribution.values"),
            raw.list::<f64>("dist.probs", "distribution.probs"),
        ) {
            (Some(v), Some(p)) => Some(Distribution::table(&v, &p)),
            _ => {
                raw.errors.push("table distributions need 'values' and 'probs'".into());
                None
            }
        },
        other => {
            raw.errors.push(format!("unknown distribution kind '{other}'"));
            None
        }
    };
    match built {
        Some(Ok(d)) => Some(d),
        Some(Err(e)) => {
            raw.errors.push(format!("distribution: {e}"));
            None
        }
        None => None,
    }
}

fn parse_vertex(s: &str) -> Option<Vertex> {
    let v: std::result::Result<Vec<i64>, _> = s.split(',').map(|c| c.trim().parse()).collect();
    v.ok().filter(|c| !c.is_empty()).map(Vertex::new)
}

/// Builds a config from INI text, an optional seed override and flags.
pub fn config_from_sources(ini_text: Option<&str>, env_seed: Option<&str>, cli: &Cli) -> Result<RunConfig> {
    let mut raw = Raw::default();
    if let Some(text) = ini_text {
        let ini = ini::Ini::load_from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))?;
        for (sec, props) in &ini {
            for (k, v) in props.iter() {
                raw.insert(sec, k, v);
            }
        }
    }
    if let Some(s) = env_seed {
        raw.insert(None, "seed", s);
    }
    for kv in &cli.set {
        match kv.split_once('=') {
            Some((k, v)) => raw.insert(None, k, v),
            None => raw.errors.push(format!("--set expects KEY=VALUE, got '{kv}'")),
        }
    }
    if let Some(c) = &cli.command {
        raw.insert(None, "command", c);
    }
    if let Some(s) = cli.seed {
        raw.insert(None, "seed", &s.to_string());
    }
    if let Some(r) = cli.replicates {
        raw.insert(None, "replicates", &r.to_string());
    }
    if let Some(w) = cli.workers {
        raw.insert(None, "workers", &w.to_string());
    }
    if let Some(f) = &cli.format {
        raw.insert(None, "format", f);
    }
    if let Some(o) = &cli.output {
        raw.insert(None, "output", &o.to_string_lossy());
    }

    let command = match raw.get("command").map(Command::parse) {
        Some(Ok(c)) => Some(c),
        Some(Err(e)) => {
            raw.errors.push(e.to_string().trim_start_matches("config error: ").to_string());
            None
        }
        None => {
            raw.errors.push("missing field 'command'".into());
            None
        }
    };
    let distribution = distribution_from(&mut raw);
    let seed = raw.parse::<u64>("seed", "seed").unwrap_or(DEFAULT_SEED);
    let k = raw.parse::<u32>("k", "K").unwrap_or(4);
    if k < 2 {
        raw.errors.push(format!("K must be at least 2, got {k}"));
    }
    let j_max = raw.parse::<u32>("jmax", "jMax");
    let pad = raw.parse::<f64>("pad", "pad").unwrap_or(1.5);
    if !(pad >= 1.0 && pad.is_finite()) {
        raw.errors.push(format!("pad must be at least 1, got {pad}"));
    }
    let dim = raw.parse::<usize>("dim", "dim").unwrap_or(2);
    if !(1..=4).contains(&dim) {
        raw.errors.push(format!("dim must lie in 1..=4, got {dim}"));
    }
    let x = match raw.get("x").map(str::to_string) {
        Some(s) => match parse_vertex(&s) {
            Some(v) if v.is_origin() => {
                raw.errors.push("x must differ from the origin".into());
                None
            }
            Some(v) => Some(v),
            None => {
                raw.errors.push(format!("x: cannot parse '{s}'"));
                None
            }
        },
        None => None,
    };
    let n_list = raw.list::<i64>("nlist", "nList");
    let alpha = raw.parse::<f64>("alpha", "alpha");
    if let Some(a) = alpha {
        if !(a > 0.0 && a < 1.0) {
            raw.errors.push(format!("alpha must lie in (0,1), got {a}"));
        }
    }
    let d0 = raw.parse::<f64>("d0", "d0");
    let d0_quantile = raw.parse::<f64>("d0quantile", "d0Quantile").unwrap_or(0.5);
    let replicates = raw.parse::<usize>("replicates", "replicates").unwrap_or(500);
    let outer_draws = raw.parse::<usize>("outerdraws", "outerDraws").unwrap_or(200);
    let inner_draws = raw.parse::<usize>("innerdraws", "innerDraws").unwrap_or(500);
    if replicates == 0 || outer_draws == 0 || inner_draws == 0 {
        raw.errors.push("replicates, outerDraws and innerDraws must be positive".into());
    }
    let xi = raw.parse::<f64>("xi", "xi").unwrap_or(0.1);
    if !(xi > 0.0 && xi < 1.0) {
        raw.errors.push(format!("xi must lie in (0,1), got {xi}"));
    }
    let format = match raw.get("format").map(norm_key).as_deref() {
        None | Some("csv") => Format::Csv,
        Some("json") => Format::Json,
        Some(f) => {
            raw.errors.push(format!("format must be csv or json, got '{f}'"));
            Format::Csv
        }
    };
    let workers = raw.parse::<usize>("workers", "workers");
    if workers == Some(0) {
        raw.errors.push("workers must be positive".into());
    }
    let cfg = RunConfig {
        command: command.unwrap_or(Command::Validate),
        distribution: distribution.clone().unwrap_or(Distribution::Exponential { rate: 1.0 }),
        d0,
        d0_quantile,
        k,
        j_max,
        pad,
        dim,
        x,
        n_list,
        alpha,
        replicates,
        outer_draws,
        inner_draws,
        seed,
        a_low: raw.parse("a", "A"),
        tol: raw.parse("tol", "tol"),
        xi,
        good_filter: raw.parse("goodfilter", "goodFilter").unwrap_or(true),
        epsilon: raw.parse("epsilon", "epsilon"),
        r: raw.parse("r", "r"),
        j: raw.parse("j", "j"),
        new_n: raw.parse("newn", "newN"),
        draw: raw.parse("draw", "draw").unwrap_or(0),
        indices: raw.list("indices", "indices"),
        c_grid: raw.list("cgrid", "cGrid").unwrap_or_else(|| (1..=50).map(|i| i as f64 / 100.0).collect()),
        augment: raw.parse("augment", "augment").unwrap_or(false),
        output: raw.get("output").map(PathBuf::from),
        format,
        workers,
    };
    if !raw.errors.is_empty() {
        return Err(Error::Config(raw.errors.join("; ")));
    }
    Ok(cfg)
}

/// Reads `--config` (if any), applies `FPP_SEED` and the flags.
pub fn parse_config(cli: &Cli) -> Result<RunConfig> {
    let text = match &cli.config {
        Some(p) => {
            Some(std::fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?)
        }
        None => None,
    };
    let env = std::env::var(SEED_ENV).ok();
    config_from_sources(text.as_deref(), env.as_deref(), cli)
}

/// Rows of one output table plus a JSON summary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub summary: Value,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub report: Report,
}

fn table<T: Serialize>(columns: &[&str], items: &[T]) -> Result<Vec<Vec<Value>>> {
    items
        .iter()
        .map(|it| {
            let v = serde_json::to_value(it)?;
            Ok(columns.iter().map(|c| v.get(*c).cloned().unwrap_or(Value::Null)).collect())
        })
        .collect()
}

fn report(columns: &[&str], rows: Vec<Vec<Value>>, summary: Value) -> Report {
    Report { columns: columns.iter().map(|c| c.to_string()).collect(), rows, summary }
}

fn need<T: Clone>(v: &Option<T>, name: &str, cmd: Command) -> Result<T> {
    v.clone().ok_or_else(|| Error::Config(format!("missing field '{name}' for {}", cmd.name())))
}

fn threshold(cfg: &RunConfig) -> Result<ModeThreshold> {
    match cfg.d0 {
        Some(d0) => Ok(ModeThreshold::at(&cfg.distribution, d0)),
        None => choose_threshold(&cfg.distribution, cfg.d0_quantile),
    }
}

fn model(cfg: &RunConfig) -> Result<Model> {
    let target = need(&cfg.x, "x", cfg.command)?;
    Ok(Model {
        dist: cfg.distribution.clone(),
        threshold: threshold(cfg)?,
        k: cfg.k,
        j_max: cfg.j_max,
        pad: cfg.pad,
        target,
        mode: match cfg.alpha {
            Some(alpha) => Mode::Cylinder { alpha },
            None => Mode::Plane,
        },
    })
}

fn window(cfg: &RunConfig, setup: &Setup) -> Result<(TruncationWindow, Value)> {
    let width = setup.width();
    match cfg.a_low {
        Some(a) => Ok((TruncationWindow::new(a, width)?, json!({"source": "config"}))),
        None => {
            let tol = cfg.tol.unwrap_or(0.05 * width);
            let s = ex::find_truncation(setup, cfg.outer_draws, cfg.inner_draws, tol, cfg.seed)?;
            Ok((
                s.window,
                json!({"source": "search", "gap": s.gap, "tolerance": s.tolerance, "iterations": s.iterations}),
            ))
        }
    }
}

fn window_row(w: &TruncationWindow) -> Value {
    json!({"a_low": w.a_low, "b_high": w.b_high, "mid": w.mid, "width": w.width, "inner_lo": w.inner.0, "inner_hi": w.inner.1})
}

/// Runs the configured command on the current thread pool.
pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    let cmd = cfg.command;
    if cmd != Command::Validate {
        let v = validate_distribution(&cfg.distribution);
        for r in v.reasons.iter().chain(&v.warnings) {
            eprintln!("warning: {r}");
        }
    }
    let (exit_code, report) = match cmd {
        Command::Validate => {
            let v = validate_distribution(&cfg.distribution);
            let thr = threshold(cfg).ok();
            let summary = json!({"validation": v, "threshold": thr});
            let rows = vec![vec![
                json!(cfg.distribution.name()),
                json!(v.passes),
                json!(v.f_at_zero),
                json!(v.infimum),
                json!(v.f_at_infimum),
                json!(v.reasons.join(" | ")),
                json!(v.warnings.join(" | ")),
            ]];
            let cols = ["distribution", "passes", "f_at_zero", "infimum", "f_at_infimum", "reasons", "warnings"];
            (if v.passes { EXIT_PASS } else { EXIT_FAIL }, report(&cols, rows, summary))
        }
        Command::Scan | Command::CylinderScan => {
            let mode = if cmd == Command::Scan {
                Mode::Plane
            } else {
                Mode::Cylinder { alpha: need(&cfg.alpha, "alpha", cmd)? }
            };
            let n_list = need(&cfg.n_list, "nList", cmd)?;
            let r = ex::fluctuation_scan(&cfg.distribution, mode, cfg.dim, &n_list, cfg.replicates, cfg.pad, cfg.seed)?;
            let cols =
                ["n", "samples", "mean", "var", "iqr", "q20", "q80", "norm_sqrtlog", "norm_cyl", "boundary_frac"];
            (EXIT_PASS, report(&cols, table(&cols, &r.rows)?, json!({"mode": r.mode})))
        }
        Command::CouplingCheck => {
            let setup = Setup::new(Model { mode: Mode::Plane, ..model(cfg)? })?;
            let c = ex::coupling_law_check(&setup, cfg.replicates, cfg.seed)?;
            let cols = ["samples", "ks", "critical", "assembled_mean", "direct_mean", "passes"];
            (if c.passes { EXIT_PASS } else { EXIT_FAIL }, report(&cols, table(&cols, &[&c])?, json!(c)))
        }
        Command::MedianFind => {
            let setup = Setup::new(model(cfg)?)?;
            let (w, info) = window(cfg, &setup)?;
            let cols = ["a_low", "b_high", "mid", "width", "inner_lo", "inner_hi"];
            (EXIT_PASS, report(&cols, table(&cols, &[window_row(&w)])?, info))
        }
        Command::Goodset => {
            let setup = Setup::new(model(cfg)?)?;
            let (w, info) = window(cfg, &setup)?;
            let mut rows = Vec::new();
            let mut good = 0;
            for o in 0..cfg.outer_draws as u64 {
                let counts = setup.counts(cfg.seed, o);
                let g = ex::good_set_probe(&setup, &counts, &w, cfg.xi, cfg.replicates, cfg.seed)?;
                good += usize::from(g.good);
                let item2: Vec<String> = g.item2_freq.iter().map(|(j, f)| format!("{j}:{f}")).collect();
                rows.push(vec![json!(o), json!(g.good), json!(g.item1_freq), json!(item2.join(";"))]);
            }
            let frac = good as f64 / cfg.outer_draws as f64;
            let summary = json!({"window": window_row(&w), "window_search": info, "fraction_good": frac, "xi": cfg.xi});
            (EXIT_PASS, report(&["draw", "good", "item1_freq", "item2_freq"], rows, summary))
        }
        Command::Flip => {
            let setup = Setup::new(model(cfg)?)?;
            let (w, info) = window(cfg, &setup)?;
            let counts = setup.counts(cfg.seed, cfg.draw);
            let j = match cfg.j {
                Some(j) => j,
                None => setup
                    .index_range()
                    .map(|r| r.0)
                    .ok_or_else(|| Error::Config("no annulus in the index range; give j".into()))?,
            };
            if j < 1 || j as usize > counts.len() {
                return Err(Error::Config(format!("j={j} outside 1..={}", counts.len())));
            }
            let new_n = cfg.new_n.unwrap_or(counts[j as usize - 1] / 2);
            let f = ex::flip_delta(&setup, &counts, j, new_n, &w, cfg.replicates, cfg.seed)?;
            let cols = [
                "j",
                "from_n",
                "to_n",
                "replicates",
                "mean_delta",
                "stderr",
                "negative_deltas",
                "upsilon_freq",
                "marked_mean",
                "marked_second_moment",
            ];
            let mut summary = serde_json::to_value(&f)?;
            summary.as_object_mut().expect("object").remove("deltas");
            summary["window"] = window_row(&w);
            summary["window_search"] = info;
            (if f.negative_deltas == 0 { EXIT_PASS } else { EXIT_FAIL }, report(&cols, table(&cols, &[&f])?, summary))
        }
        Command::Antichain => {
            let setup = Setup::new(model(cfg)?)?;
            let (w, info) = window(cfg, &setup)?;
            let draws: Vec<SplitDraw> = setup.split_draws(cfg.seed, cfg.draw)?;
            let eligible = match &cfg.indices {
                Some(i) => i.clone(),
                None => setup.eligible(&draws).members,
            };
            let eps = cfg.epsilon.unwrap_or_else(|| ex::default_epsilon(&cfg.distribution, setup.threshold()));
            let xi = cfg.good_filter.then_some(cfg.xi);
            let a = ex::antichain_extract(&setup, &draws, &eligible, &w, eps, cfg.r, xi, cfg.replicates, cfg.seed)?;
            let rows = a
                .estimates
                .iter()
                .map(|e| {
                    let counts: Vec<String> = e.counts.iter().map(u64::to_string).collect();
                    vec![
                        json!(e.bits),
                        json!(counts.join(";")),
                        json!(e.mean),
                        json!(e.stderr),
                        json!(e.good),
                        json!(a.q.contains(&e.bits)),
                    ]
                })
                .collect();
            let code = match a.verdict {
                Verdict::Antichain => EXIT_PASS,
                Verdict::NotAntichain => EXIT_FAIL,
                Verdict::Inconclusive => EXIT_INCONCLUSIVE,
            };
            let summary = json!({
                "verdict": a.verdict, "indices": a.indices, "epsilon": a.epsilon, "r": a.r, "q": a.q,
                "is_antichain": a.is_antichain, "min_flip_decrease": a.min_flip_decrease, "flips": a.flips,
                "draws": draws, "window": window_row(&w), "window_search": info,
            });
            (code, report(&["bits", "counts", "mean", "stderr", "good", "in_q"], rows, summary))
        }
        Command::Smallball => {
            let setup = Setup::new(model(cfg)?)?;
            let (w, info) = window(cfg, &setup)?;
            let eps = cfg.epsilon.unwrap_or_else(|| ex::default_epsilon(&cfg.distribution, setup.threshold()));
            let xi = cfg.good_filter.then_some(cfg.xi);
            let s = ex::small_ball_scan(&setup, &w, eps, cfg.replicates, cfg.outer_draws, xi, cfg.seed)?;
            let rows = s.grid.iter().map(|(r, f)| vec![json!(r), json!(f)]).collect();
            let summary = json!({
                "epsilon": s.epsilon, "grid_sup": s.grid_sup, "exact_sup": s.exact_sup, "exact_r": s.exact_r,
                "n_outer": s.n_outer, "replicates": s.replicates, "window": window_row(&w), "window_search": info,
            });
            (EXIT_PASS, report(&["r", "freq"], rows, summary))
        }
        Command::Reckon => {
            let setup = Setup::new(model(cfg)?)?;
            let (w, info) = window(cfg, &setup)?;
            let r = ex::reckoning_check(&setup, &w, &cfg.c_grid, cfg.replicates, cfg.seed)?;
            let cols = ["c", "lower_freq", "upper_freq"];
            let summary = json!({"certified_c": r.certified_c, "samples": r.samples, "window": window_row(&w), "window_search": info});
            (
                if r.certified_c.is_some() { EXIT_PASS } else { EXIT_FAIL },
                report(&cols, table(&cols, &r.rows)?, summary),
            )
        }
        Command::TimeConstant => {
            let direction = cfg.x.clone().unwrap_or_else(|| {
                let mut c = vec![0; cfg.dim];
                c[0] = 1;
                Vertex::new(c)
            });
            let n_list = need(&cfg.n_list, "nList", cmd)?;
            let thr = if cfg.augment { Some(threshold(cfg)?) } else { None };
            let rows = estimate_time_constant(
                &cfg.distribution,
                &direction,
                &n_list,
                cfg.replicates,
                cfg.pad,
                thr.as_ref(),
                cfg.seed,
            )?;
            let cols =
                ["n", "replicates", "mean", "stderr", "augmented_mean", "augmented_stderr", "augmented_dominates"];
            let ok = rows.iter().all(|r| r.augmented_dominates != Some(false));
            (
                if ok { EXIT_PASS } else { EXIT_FAIL },
                report(&cols, table(&cols, &rows)?, json!({"direction": direction})),
            )
        }
    };
    Ok(Outcome { exit_code, report })
}

fn header(cfg: &RunConfig) -> Result<Value> {
    Ok(json!({
        "schema_version": SCHEMA_VERSION,
        "tool": "fpp",
        "version": env!("CARGO_PKG_VERSION"),
        "command": cfg.command.name(),
        "seed": cfg.seed,
        "config": serde_json::to_value(cfg)?,
    }))
}

/// The bytes written for a finished run. Worker count and output path are
/// left out so reruns compare equal.
pub fn render(cfg: &RunConfig, out: &Outcome) -> Result<Vec<u8>> {
    let head = header(cfg)?;
    match cfg.format {
        Format::Json => {
            let rows: Vec<Value> = out
                .report
                .rows
                .iter()
                .map(|r| Value::Object(out.report.columns.iter().cloned().zip(r.iter().cloned()).collect()))
                .collect();
            let mut doc = head;
            doc["exit_code"] = json!(out.exit_code);
            doc["rows"] = Value::Array(rows);
            doc["diagnostics"] = out.report.summary.clone();
            let mut s = serde_json::to_vec_pretty(&doc)?;
            s.push(b'\n');
            Ok(s)
        }
        Format::Csv => {
            let mut buf = Vec::new();
            for key in ["schema_version", "tool", "version", "command", "seed"] {
                writeln!(buf, "# {key}={}", head[key].to_string().trim_matches('"'))?;
            }
            writeln!(buf, "# config={}", head["config"])?;
            writeln!(buf, "# exit_code={}", out.exit_code)?;
            writeln!(buf, "# summary={}", out.report.summary)?;
            {
                let mut w = csv::Writer::from_writer(&mut buf);
                w.write_record(&out.report.columns).map_err(csv_err)?;
                for r in &out.report.rows {
                    w.write_record(r.iter().map(cell)).map_err(csv_err)?;
                }
                w.flush()?;
            }
            Ok(buf)
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Writes to a sibling temporary file, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::Config(format!("bad output path {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })?;
    Ok(())
}

/// Runs a parsed config end to end and returns the process exit code.
pub fn run(cfg: &RunConfig) -> Result<i32> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers {
        pool = pool.num_threads(w);
    }
    let pool = pool.build().map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let outcome = pool.install(|| execute(cfg))?;
    let bytes = render(cfg, &outcome)?;
    match &cfg.output {
        Some(p) => write_atomic(p, &bytes)?,
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(outcome.exit_code)
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Distribution(_) | Error::Geometry(_) | Error::TooLarge(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn report_error(e: &Error, code: i32) {
    let obj = json!({"error": {"kind": e.kind(), "message": e.to_string()}, "exit_code": code});
    eprintln!("{obj}");
}

pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) {
                let _ = e.print();
                return EXIT_PASS;
            }
            let _ = e.print();
            return EXIT_CONFIG;
        }
    };
    let result = parse_config(&cli).and_then(|cfg| run(&cfg));
    match result {
        Ok(code) => code,
        Err(e) => {
            let code = exit_code_for(&e);
            report_error(&e, code);
            code
        }
    }
}
