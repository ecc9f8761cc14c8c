//! Experiment configuration.
//!
//! The canonical form is sectioned `key = value` text (TOML):
//!
//! ```toml
//! experiment = "ids"
//!
//! [field]
//! sigma = 1.0
//! xi = 1.0
//!
//! [grid]
//! dimension = 1
//! side_length = 32.0
//! spacing = 0.125
//! bc = "both"
//!
//! [energies]
//! start = -1.0
//! stop = 1.0
//! count = 9
//!
//! [ensemble]
//! samples = 200
//! master_seed = 7
//! ```
//!
//! A JSON object with the same sections is accepted as well. Parsing reports
//! every problem it finds, not only the first.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use gauss_schrodinger::{validity_cutoff, BoundaryCondition, Grid};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    SampleField,
    CovarianceCheck,
    Ids,
    TraceIds,
    WegnerEval,
    WegnerVerify,
    Asymptotics,
    Localize,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        Self::SampleField,
        Self::CovarianceCheck,
        Self::Ids,
        Self::TraceIds,
        Self::WegnerEval,
        Self::WegnerVerify,
        Self::Asymptotics,
        Self::Localize,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::SampleField => "sample-field",
            Self::CovarianceCheck => "covariance-check",
            Self::Ids => "ids",
            Self::TraceIds => "trace-ids",
            Self::WegnerEval => "wegner-eval",
            Self::WegnerVerify => "wegner-verify",
            Self::Asymptotics => "asymptotics",
            Self::Localize => "localize",
        }
    }

    fn is_monte_carlo(self) -> bool {
        !matches!(self, Self::WegnerEval | Self::Asymptotics)
    }

    fn needs_covariance(self) -> bool {
        matches!(self, Self::CovarianceCheck | Self::WegnerEval | Self::WegnerVerify | Self::Asymptotics)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|k| k.as_str()).collect();
            format!("unknown experiment {s:?}{}; expected one of {}", suggest(s, &names), names.join(", "))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcChoice {
    Dirichlet,
    Neumann,
    Both,
}

impl BcChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Dirichlet => "dirichlet",
            Self::Neumann => "neumann",
            Self::Both => "both",
        }
    }

    pub fn conditions(self) -> Vec<BoundaryCondition> {
        match self {
            Self::Dirichlet => vec![BoundaryCondition::Dirichlet],
            Self::Neumann => vec![BoundaryCondition::Neumann],
            Self::Both => vec![BoundaryCondition::Dirichlet, BoundaryCondition::Neumann],
        }
    }

    /// The single condition, or Dirichlet for `both`.
    pub fn primary(self) -> BoundaryCondition {
        match self {
            Self::Neumann => BoundaryCondition::Neumann,
            _ => BoundaryCondition::Dirichlet,
        }
    }
}

impl FromStr for BcChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dirichlet" => Ok(Self::Dirichlet),
            "neumann" => Ok(Self::Neumann),
            "both" => Ok(Self::Both),
            _ => Err(format!("unknown boundary condition {s:?}; expected dirichlet, neumann or both")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

impl OutputFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
            Self::Both => "both",
        }
    }

    pub fn csv(self) -> bool {
        self != Self::Json
    }

    pub fn json(self) -> bool {
        self != Self::Csv
    }
}

impl FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "both" => Ok(Self::Both),
            _ => Err(format!("unknown format {s:?}; expected csv, json or both")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldConfig {
    /// Standard deviation; 0 selects the free operator `V ≡ 0`.
    pub sigma: f64,
    pub xi: f64,
    /// Correlation-window length `ℓ`.
    pub ell: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub dimension: usize,
    pub side_length: f64,
    pub spacing: f64,
    pub bc: BcChoice,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub samples: usize,
    pub master_seed: u64,
    /// Worker threads; `None` defers to the command line or environment.
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceCheckConfig {
    /// Lattice offsets at which the empirical covariance is estimated.
    pub offsets: Vec<Vec<i64>>,
    /// Lattice offsets from the origin point for the decomposition check.
    pub decomposition_points: Vec<Vec<i64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceConfig {
    pub window: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WegnerConfig {
    /// `(E₁, E₂, E)`; empty means consecutive energy pairs with `E = E₂`.
    pub triples: Vec<[f64; 3]>,
    pub t: Option<f64>,
    pub envelope_points: usize,
    pub envelope_t_min: f64,
    pub envelope_t_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticsConfig {
    pub low_energy: f64,
    pub high_energy: f64,
    pub points_per_decade: usize,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizeConfig {
    pub low_window: Option<[f64; 2]>,
    pub mid_window: Option<[f64; 2]>,
    pub min_ipr_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChecksConfig {
    pub weyl_energies: Vec<f64>,
    pub tail: bool,
    pub density: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub field: FieldConfig,
    pub grid: GridConfig,
    pub energies: Vec<f64>,
    pub ensemble: EnsembleConfig,
    pub output: OutputConfig,
    pub covariance: CovarianceCheckConfig,
    pub trace: TraceConfig,
    pub wegner: WegnerConfig,
    pub asymptotics: AsymptoticsConfig,
    pub localize: LocalizeConfig,
    pub checks: ChecksConfig,
}

#[derive(Clone, Copy)]
enum Ty {
    Float,
    Int,
    Str,
    Bool,
    FloatList,
    FloatPair,
    Offsets,
    Triples,
}

impl Ty {
    fn describe(self) -> &'static str {
        match self {
            Ty::Float => "a number",
            Ty::Int => "a non-negative integer",
            Ty::Str => "a string",
            Ty::Bool => "a boolean",
            Ty::FloatList => "a list of numbers",
            Ty::FloatPair => "a list of two numbers",
            Ty::Offsets => "a list of integers or of integer lists",
            Ty::Triples => "a list of [E1, E2, E] number triples",
        }
    }
}

const TOP_LEVEL: &[(&str, Ty)] = &[("experiment", Ty::Str)];

const SECTIONS: &[(&str, &[(&str, Ty)])] = &[
    ("field", &[("sigma", Ty::Float), ("xi", Ty::Float), ("ell", Ty::Float)]),
    (
        "grid",
        &[("dimension", Ty::Int), ("side_length", Ty::Float), ("spacing", Ty::Float), ("bc", Ty::Str)],
    ),
    ("energies", &[("values", Ty::FloatList), ("start", Ty::Float), ("stop", Ty::Float), ("count", Ty::Int)]),
    ("ensemble", &[("samples", Ty::Int), ("master_seed", Ty::Int), ("workers", Ty::Int)]),
    ("output", &[("directory", Ty::Str), ("format", Ty::Str)]),
    ("covariance", &[("offsets", Ty::Offsets), ("decomposition_points", Ty::Offsets)]),
    ("trace", &[("window", Ty::Float)]),
    (
        "wegner",
        &[
            ("triples", Ty::Triples),
            ("t", Ty::Float),
            ("envelope_points", Ty::Int),
            ("envelope_t_min", Ty::Float),
            ("envelope_t_max", Ty::Float),
        ],
    ),
    (
        "asymptotics",
        &[("low_energy", Ty::Float), ("high_energy", Ty::Float), ("points_per_decade", Ty::Int), ("tolerance", Ty::Float)],
    ),
    ("localize", &[("low_window", Ty::FloatPair), ("mid_window", Ty::FloatPair), ("min_ipr_ratio", Ty::Float)]),
    ("checks", &[("weyl_energies", Ty::FloatList), ("tail", Ty::Bool), ("density", Ty::Bool)]),
];

/// All problems found in a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

fn suggest(word: &str, candidates: &[&str]) -> String {
    candidates
        .iter()
        .map(|c| (strsim::levenshtein(word, c), *c))
        .filter(|(dist, c)| *dist <= 2.max(c.len() / 3))
        .min()
        .map(|(_, c)| format!(" (did you mean {c:?}?)"))
        .unwrap_or_default()
}

/// Parse TOML or JSON text into a validated configuration.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let doc = if text.trim_start().starts_with('{') {
        serde_json::from_str::<Value>(text).map_err(|e| ConfigErrors(vec![format!("invalid JSON: {e}")]))?
    } else {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigErrors(vec![format!("invalid TOML: {}", e.message())]))?;
        serde_json::to_value(table).map_err(|e| ConfigErrors(vec![format!("invalid TOML: {e}")]))?
    };
    from_document(&doc)
}

struct Reader<'a> {
    root: &'a Map<String, Value>,
    errors: Vec<String>,
}

impl<'a> Reader<'a> {
    fn raw(&self, section: Option<&str>, key: &str) -> Option<&'a Value> {
        match section {
            None => self.root.get(key),
            Some(s) => self.root.get(s).and_then(Value::as_object).and_then(|m| m.get(key)),
        }
    }

    fn name(section: Option<&str>, key: &str) -> String {
        match section {
            None => key.to_string(),
            Some(s) => format!("{s}.{key}"),
        }
    }

    fn mismatch(&mut self, section: Option<&str>, key: &str, ty: Ty, found: &Value) {
        let kind = match found {
            Value::Null => "null",
            Value::Bool(_) => "a boolean",
            Value::Number(_) => "a number",
            Value::String(_) => "a string",
            Value::Array(_) => "a list",
            Value::Object(_) => "a table",
        };
        self.errors.push(format!("{}: expected {}, found {kind}", Self::name(section, key), ty.describe()));
    }

    fn float(&mut self, section: Option<&str>, key: &str) -> Option<f64> {
        let v = self.raw(section, key)?;
        match v.as_f64() {
            Some(x) => Some(x),
            None => {
                self.mismatch(section, key, Ty::Float, v);
                None
            }
        }
    }

    fn int(&mut self, section: Option<&str>, key: &str) -> Option<u64> {
        let v = self.raw(section, key)?;
        match v.as_u64() {
            Some(x) => Some(x),
            None => {
                self.mismatch(section, key, Ty::Int, v);
                None
            }
        }
    }

    fn string(&mut self, section: Option<&str>, key: &str) -> Option<&'a str> {
        let v = self.raw(section, key)?;
        match v.as_str() {
            Some(x) => Some(x),
            None => {
                self.mismatch(section, key, Ty::Str, v);
                None
            }
        }
    }

    fn boolean(&mut self, section: Option<&str>, key: &str) -> Option<bool> {
        let v = self.raw(section, key)?;
        match v.as_bool() {
            Some(x) => Some(x),
            None => {
                self.mismatch(section, key, Ty::Bool, v);
                None
            }
        }
    }

    fn floats(&mut self, section: Option<&str>, key: &str, ty: Ty) -> Option<Vec<f64>> {
        let v = self.raw(section, key)?;
        let list: Option<Vec<f64>> = v.as_array().and_then(|a| a.iter().map(Value::as_f64).collect());
        match list {
            Some(l) if !matches!(ty, Ty::FloatPair) || l.len() == 2 => Some(l),
            _ => {
                self.mismatch(section, key, ty, v);
                None
            }
        }
    }

    fn offsets(&mut self, section: Option<&str>, key: &str) -> Option<Vec<Vec<i64>>> {
        let v = self.raw(section, key)?;
        let parsed: Option<Vec<Vec<i64>>> = v.as_array().and_then(|a| {
            a.iter()
                .map(|item| match item {
                    Value::Number(n) => n.as_i64().map(|x| vec![x]),
                    Value::Array(inner) => inner.iter().map(Value::as_i64).collect(),
                    _ => None,
                })
                .collect()
        });
        if parsed.is_none() {
            self.mismatch(section, key, Ty::Offsets, v);
        }
        parsed
    }

    fn triples(&mut self, section: Option<&str>, key: &str) -> Option<Vec<[f64; 3]>> {
        let v = self.raw(section, key)?;
        let parsed: Option<Vec<[f64; 3]>> = v.as_array().and_then(|a| {
            a.iter()
                .map(|item| {
                    let xs: Vec<f64> = item.as_array()?.iter().map(Value::as_f64).collect::<Option<_>>()?;
                    <[f64; 3]>::try_from(xs).ok()
                })
                .collect()
        });
        if parsed.is_none() {
            self.mismatch(section, key, Ty::Triples, v);
        }
        parsed
    }
}

fn check_keys(root: &Map<String, Value>, errors: &mut Vec<String>) {
    let section_names: Vec<&str> = SECTIONS.iter().map(|s| s.0).collect();
    let top_names: Vec<&str> = TOP_LEVEL.iter().map(|k| k.0).chain(section_names.iter().copied()).collect();
    let all_keys: Vec<(&str, &str)> = SECTIONS.iter().flat_map(|(s, keys)| keys.iter().map(move |k| (*s, k.0))).collect();
    for (key, value) in root {
        if let Some((_, keys)) = SECTIONS.iter().find(|s| s.0 == key) {
            let Some(table) = value.as_object() else {
                errors.push(format!("{key}: expected a section (table)"));
                continue;
            };
            let names: Vec<&str> = keys.iter().map(|k| k.0).collect();
            for sub in table.keys() {
                if !names.contains(&sub.as_str()) {
                    let mut hint = suggest(sub, &names);
                    if hint.is_empty() {
                        if let Some((s, _)) = all_keys.iter().find(|(_, k)| k == sub) {
                            hint = format!(" (it belongs in section [{s}])");
                        }
                    }
                    errors.push(format!("unknown key {key}.{sub}{hint}"));
                }
            }
        } else if !TOP_LEVEL.iter().any(|k| k.0 == key) {
            let mut hint = suggest(key, &top_names);
            if hint.is_empty() {
                if let Some((s, k)) = all_keys.iter().find(|(_, k)| strsim::levenshtein(key, k) <= 2) {
                    hint = format!(" (did you mean {k:?} in section [{s}]?)");
                }
            }
            errors.push(format!("unknown key {key}{hint}"));
        }
    }
}

fn offsets_default(d: usize) -> Vec<Vec<i64>> {
    vec![vec![0; d]]
}

/// Build and validate a configuration from a parsed document.
pub fn from_document(doc: &Value) -> Result<ExperimentConfig, ConfigErrors> {
    let Some(root) = doc.as_object() else {
        return Err(ConfigErrors(vec!["configuration must be a table of sections".into()]));
    };
    let mut errors = Vec::new();
    check_keys(root, &mut errors);
    let mut r = Reader { root, errors: Vec::new() };

    let experiment = match r.string(None, "experiment") {
        Some(s) => match s.parse::<ExperimentKind>() {
            Ok(k) => Some(k),
            Err(e) => {
                r.errors.push(e);
                None
            }
        },
        None => {
            if root.get("experiment").is_none() {
                r.errors.push("missing required key experiment".into());
            }
            None
        }
    };
    let sigma = r.float(Some("field"), "sigma").unwrap_or(1.0);
    let xi = r.float(Some("field"), "xi").unwrap_or(1.0);
    let ell = r.float(Some("field"), "ell").unwrap_or(xi);

    let dimension = r.int(Some("grid"), "dimension");
    let side_length = r.float(Some("grid"), "side_length");
    let spacing = r.float(Some("grid"), "spacing");
    for (key, v) in [("dimension", dimension.is_some()), ("side_length", side_length.is_some()), ("spacing", spacing.is_some())] {
        if !v && r.raw(Some("grid"), key).is_none() {
            r.errors.push(format!("missing required key grid.{key}"));
        }
    }
    let dimension = dimension.unwrap_or(1) as usize;
    let side_length = side_length.unwrap_or(1.0);
    let spacing = spacing.unwrap_or(1.0);
    let bc = match r.string(Some("grid"), "bc").map(BcChoice::from_str) {
        Some(Ok(b)) => b,
        Some(Err(e)) => {
            r.errors.push(format!("grid.bc: {e}"));
            BcChoice::Dirichlet
        }
        None => BcChoice::Dirichlet,
    };

    let values = r.floats(Some("energies"), "values", Ty::FloatList);
    let start = r.float(Some("energies"), "start");
    let stop = r.float(Some("energies"), "stop");
    let count = r.int(Some("energies"), "count");
    let energies = match (values, start, stop, count) {
        (Some(v), None, None, None) => v,
        (None, Some(a), Some(b), Some(n)) => {
            if n < 2 {
                r.errors.push("energies.count must be at least 2".into());
                Vec::new()
            } else {
                let step = (b - a) / (n - 1) as f64;
                (0..n).map(|i| if i + 1 == n { b } else { a + step * i as f64 }).collect()
            }
        }
        (None, None, None, None) => Vec::new(),
        (Some(_), ..) => {
            r.errors.push("energies: give either values or start/stop/count, not both".into());
            Vec::new()
        }
        _ => {
            r.errors.push("energies: start, stop and count must be given together".into());
            Vec::new()
        }
    };

    let samples = r.int(Some("ensemble"), "samples").unwrap_or(100) as usize;
    let master_seed = r.int(Some("ensemble"), "master_seed").unwrap_or(0);
    let workers = r.int(Some("ensemble"), "workers").map(|w| w as usize);

    let directory = PathBuf::from(r.string(Some("output"), "directory").unwrap_or("out"));
    let format = match r.string(Some("output"), "format").map(OutputFormat::from_str) {
        Some(Ok(f)) => f,
        Some(Err(e)) => {
            r.errors.push(format!("output.format: {e}"));
            OutputFormat::Both
        }
        None => OutputFormat::Both,
    };

    let offsets = r.offsets(Some("covariance"), "offsets").unwrap_or_else(|| offsets_default(dimension));
    let decomposition_points = r.offsets(Some("covariance"), "decomposition_points").unwrap_or_default();
    let window = r.float(Some("trace"), "window");
    let triples = r.triples(Some("wegner"), "triples").unwrap_or_default();
    let t = r.float(Some("wegner"), "t");
    let envelope_points = r.int(Some("wegner"), "envelope_points").unwrap_or(2000) as usize;
    let envelope_t_min = r.float(Some("wegner"), "envelope_t_min").unwrap_or(1e-6);
    let envelope_t_max = r.float(Some("wegner"), "envelope_t_max").unwrap_or(1e3);
    let low_energy = r.float(Some("asymptotics"), "low_energy").unwrap_or(-100.0);
    let high_energy = r.float(Some("asymptotics"), "high_energy").unwrap_or(1e4);
    let points_per_decade = r.int(Some("asymptotics"), "points_per_decade").unwrap_or(10) as usize;
    let tolerance = r.float(Some("asymptotics"), "tolerance").unwrap_or(0.05);
    let low_window = r.floats(Some("localize"), "low_window", Ty::FloatPair).map(|v| [v[0], v[1]]);
    let mid_window = r.floats(Some("localize"), "mid_window", Ty::FloatPair).map(|v| [v[0], v[1]]);
    let min_ipr_ratio = r.float(Some("localize"), "min_ipr_ratio");
    let weyl_energies = r.floats(Some("checks"), "weyl_energies", Ty::FloatList).unwrap_or_default();
    let tail = r.boolean(Some("checks"), "tail").unwrap_or(false);
    let density = r.boolean(Some("checks"), "density").unwrap_or(false);
    errors.extend(r.errors);

    let Some(experiment) = experiment else {
        return Err(ConfigErrors(errors));
    };
    let config = ExperimentConfig {
        experiment,
        field: FieldConfig { sigma, xi, ell },
        grid: GridConfig { dimension, side_length, spacing, bc },
        energies,
        ensemble: EnsembleConfig { samples, master_seed, workers },
        output: OutputConfig { directory, format },
        covariance: CovarianceCheckConfig { offsets, decomposition_points },
        trace: TraceConfig { window },
        wegner: WegnerConfig { triples, t, envelope_points, envelope_t_min, envelope_t_max },
        asymptotics: AsymptoticsConfig { low_energy, high_energy, points_per_decade, tolerance },
        localize: LocalizeConfig { low_window, mid_window, min_ipr_ratio },
        checks: ChecksConfig { weyl_energies, tail, density },
    };
    if errors.is_empty() {
        errors.extend(config.validate());
    }
    if errors.is_empty() {
        Ok(config)
    } else {
        Err(ConfigErrors(errors))
    }
}

fn positive(errors: &mut Vec<String>, name: &str, v: f64) {
    if !(v > 0.0 && v.is_finite()) {
        errors.push(format!("{name} must be positive (got {v})"));
    }
}

impl ExperimentConfig {
    /// Constraint violations, each naming the violated invariant.
    pub fn validate(&self) -> Vec<String> {
        let mut e = Vec::new();
        let kind = self.experiment;
        let f = &self.field;
        if !(f.sigma >= 0.0 && f.sigma.is_finite()) {
            e.push(format!("sigma must be non-negative (got {})", f.sigma));
        }
        if kind.needs_covariance() && f.sigma == 0.0 {
            e.push(format!("sigma must be positive for {kind}"));
        }
        positive(&mut e, "xi", f.xi);
        positive(&mut e, "ell", f.ell);
        let g = &self.grid;
        if !(1..=3).contains(&g.dimension) {
            e.push(format!("dimension must be 1, 2 or 3 (got {})", g.dimension));
        }
        positive(&mut e, "side_length", g.side_length);
        positive(&mut e, "spacing", g.spacing);
        if !e.is_empty() {
            return e;
        }
        if let Err(err) = self.grid() {
            e.push(format!("grid: {err}"));
            return e;
        }
        if f.sigma > 0.0 && g.spacing > f.xi / 4.0 {
            e.push(format!("spacing must resolve the correlation length: h = {} > xi/4 = {}", g.spacing, f.xi / 4.0));
        }
        let limit = validity_cutoff(g.spacing);
        let window_msg = |en: f64| {
            format!("energy {en} is outside the validity window h²E <= 0.1 (E <= {limit} for h = {})", g.spacing)
        };
        for &en in &self.energies {
            if !en.is_finite() {
                e.push(format!("energy {en} is not finite"));
            } else if en > limit && kind != ExperimentKind::WegnerEval {
                e.push(window_msg(en));
            }
        }
        if !self.energies.windows(2).all(|w| w[0] < w[1]) {
            e.push("energies must be strictly ascending".into());
        }
        let needs_energies = matches!(kind, ExperimentKind::Ids | ExperimentKind::TraceIds | ExperimentKind::WegnerEval)
            || (kind == ExperimentKind::WegnerVerify && self.wegner.triples.is_empty());
        if needs_energies && self.energies.len() < if kind == ExperimentKind::WegnerVerify { 2 } else { 1 } {
            e.push(format!("{kind} needs an energy grid in [energies]"));
        }
        if kind.is_monte_carlo() {
            let needed = if kind == ExperimentKind::Localize { 20 } else if kind == ExperimentKind::SampleField { 1 } else { 2 };
            if self.ensemble.samples < needed {
                e.push(format!("samples must be at least {needed} for {kind} (got {})", self.ensemble.samples));
            }
        }
        if self.ensemble.workers == Some(0) {
            e.push("workers must be positive when given".into());
        }
        if kind == ExperimentKind::CovarianceCheck {
            for o in self.covariance.offsets.iter().chain(&self.covariance.decomposition_points) {
                if o.len() != g.dimension {
                    e.push(format!("covariance offset {o:?} must have {} component(s)", g.dimension));
                }
            }
        }
        if kind == ExperimentKind::TraceIds {
            match self.trace.window {
                None => e.push("trace-ids needs trace.window".into()),
                Some(w) if !(w > 0.0 && w <= g.side_length) => {
                    e.push(format!("trace.window must be positive and at most side_length (got {w})"))
                }
                Some(_) => {}
            }
        }
        if kind == ExperimentKind::WegnerVerify {
            if g.bc == BcChoice::Both {
                e.push("wegner-verify needs a single boundary condition".into());
            }
            for tr in &self.wegner.triples {
                if !(tr[0] <= tr[2] && tr[1] <= tr[2]) {
                    e.push(format!("wegner triple {tr:?} must satisfy E1 <= E and E2 <= E"));
                }
                for &en in &tr[..2] {
                    if en > limit {
                        e.push(window_msg(en));
                    }
                }
            }
            if g.side_length.powi(g.dimension as i32) < f.ell.powi(g.dimension as i32) {
                e.push(format!("side_length must be at least ell = {}", f.ell));
            }
        }
        if let Some(t) = self.wegner.t {
            positive(&mut e, "wegner.t", t);
        }
        if matches!(kind, ExperimentKind::WegnerEval) {
            if self.wegner.envelope_points < 2 {
                e.push("wegner.envelope_points must be at least 2".into());
            }
            if !(self.wegner.envelope_t_min > 0.0 && self.wegner.envelope_t_min < self.wegner.envelope_t_max) {
                e.push("wegner envelope range must satisfy 0 < envelope_t_min < envelope_t_max".into());
            }
        }
        if kind == ExperimentKind::Asymptotics {
            let a = &self.asymptotics;
            if !(a.low_energy < 0.0) {
                e.push("asymptotics.low_energy must be negative".into());
            }
            if !(a.high_energy > 0.0) {
                e.push("asymptotics.high_energy must be positive".into());
            }
            if a.points_per_decade == 0 {
                e.push("asymptotics.points_per_decade must be positive".into());
            }
            positive(&mut e, "asymptotics.tolerance", a.tolerance);
        }
        if kind == ExperimentKind::Localize {
            if g.bc == BcChoice::Both {
                e.push("localize needs a single boundary condition".into());
            }
            for (name, w) in [("low_window", self.localize.low_window), ("mid_window", self.localize.mid_window)] {
                if let Some([a, b]) = w {
                    if !(a <= b) {
                        e.push(format!("localize.{name} must satisfy lo <= hi"));
                    } else if b > limit {
                        e.push(window_msg(b));
                    }
                }
            }
            if self.localize.low_window.is_some() != self.localize.mid_window.is_some() {
                e.push("localize.low_window and localize.mid_window must be given together".into());
            }
        }
        if self.checks.density && f.sigma == 0.0 {
            e.push("checks.density needs sigma to be positive".into());
        }
        for &en in &self.checks.weyl_energies {
            if !self.energies.contains(&en) {
                e.push(format!("checks.weyl_energies: energy {en} is not on the energy grid"));
            }
            if en <= 0.0 {
                e.push(format!("checks.weyl_energies: energy {en} must be positive"));
            }
        }
        e
    }

    pub fn grid(&self) -> Result<Grid, gauss_schrodinger::GridError> {
        Grid::new(self.grid.dimension, self.grid.side_length, self.grid.spacing)
    }

    /// Triples from the config, or consecutive energy pairs `(Eᵢ, Eᵢ₊₁, Eᵢ₊₁)`.
    pub fn wegner_triples(&self) -> Vec<(f64, f64, f64)> {
        if self.wegner.triples.is_empty() {
            self.energies.windows(2).map(|w| (w[0], w[1], w[1])).collect()
        } else {
            self.wegner.triples.iter().map(|t| (t[0], t[1], t[2])).collect()
        }
    }

    /// Sectioned document; every default is filled in.
    pub fn to_document(&self) -> Value {
        let offsets = |o: &Vec<Vec<i64>>| Value::from(o.iter().map(|v| Value::from(v.clone())).collect::<Vec<_>>());
        let mut doc = json!({
            "experiment": self.experiment.as_str(),
            "field": { "sigma": self.field.sigma, "xi": self.field.xi, "ell": self.field.ell },
            "grid": {
                "dimension": self.grid.dimension,
                "side_length": self.grid.side_length,
                "spacing": self.grid.spacing,
                "bc": self.grid.bc.as_str(),
            },
            "energies": { "values": self.energies },
            "ensemble": { "samples": self.ensemble.samples, "master_seed": self.ensemble.master_seed },
            "output": { "directory": self.output.directory.to_string_lossy(), "format": self.output.format.as_str() },
            "covariance": {
                "offsets": offsets(&self.covariance.offsets),
                "decomposition_points": offsets(&self.covariance.decomposition_points),
            },
            "trace": {},
            "wegner": {
                "triples": self.wegner.triples.iter().map(|t| t.to_vec()).collect::<Vec<_>>(),
                "envelope_points": self.wegner.envelope_points,
                "envelope_t_min": self.wegner.envelope_t_min,
                "envelope_t_max": self.wegner.envelope_t_max,
            },
            "asymptotics": {
                "low_energy": self.asymptotics.low_energy,
                "high_energy": self.asymptotics.high_energy,
                "points_per_decade": self.asymptotics.points_per_decade,
                "tolerance": self.asymptotics.tolerance,
            },
            "localize": {},
            "checks": {
                "weyl_energies": self.checks.weyl_energies,
                "tail": self.checks.tail,
                "density": self.checks.density,
            },
        });
        if let Some(w) = self.ensemble.workers {
            doc["ensemble"]["workers"] = w.into();
        }
        if let Some(w) = self.trace.window {
            doc["trace"]["window"] = w.into();
        }
        if let Some(t) = self.wegner.t {
            doc["wegner"]["t"] = t.into();
        }
        if let Some([a, b]) = self.localize.low_window {
            doc["localize"]["low_window"] = json!([a, b]);
        }
        if let Some([a, b]) = self.localize.mid_window {
            doc["localize"]["mid_window"] = json!([a, b]);
        }
        if let Some(r) = self.localize.min_ipr_ratio {
            doc["localize"]["min_ipr_ratio"] = r.into();
        }
        doc
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_document()).expect("document is TOML-compatible")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("document serializes")
    }

    /// SHA-256 of the canonical document without worker count and output
    /// settings, which do not affect results.
    pub fn hash(&self) -> String {
        let mut doc = self.to_document();
        doc["ensemble"].as_object_mut().expect("section").remove("workers");
        doc.as_object_mut().expect("root").remove("output");
        let digest = Sha256::digest(serde_json::to_string(&doc).expect("document serializes").as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
experiment = "ids"
[grid]
dimension = 1
side_length = 16.0
spacing = 0.125
[energies]
values = [-1.0, 0.0, 1.0]
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.field.sigma, 1.0);
        assert_eq!(c.field.ell, 1.0);
        assert_eq!(c.grid.bc, BcChoice::Dirichlet);
        assert_eq!(c.ensemble.samples, 100);
        assert_eq!(c.output.format, OutputFormat::Both);
        let echoed = c.to_toml();
        assert!(echoed.contains("sigma = 1.0"));
        assert!(echoed.contains("samples = 100"));
    }

    #[test]
    fn round_trips_through_both_forms() {
        let mut c = parse_config(MINIMAL).unwrap();
        c.ensemble.workers = Some(3);
        c.wegner.t = Some(0.25);
        c.localize.low_window = Some([-1.0, 0.0]);
        c.energies = vec![-1.0, -0.1, 0.3];
        assert_eq!(parse_config(&c.to_toml()).unwrap(), c);
        assert_eq!(parse_config(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn linspace_energies_end_exactly() {
        let text = MINIMAL.replace("values = [-1.0, 0.0, 1.0]", "start = -1.0\nstop = 1.0\ncount = 7");
        let c = parse_config(&text).unwrap();
        assert_eq!(c.energies.len(), 7);
        assert_eq!(c.energies[0], -1.0);
        assert_eq!(c.energies[6], 1.0);
        assert_eq!(parse_config(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn zero_spacing_is_named() {
        let err = parse_config(&MINIMAL.replace("spacing = 0.125", "spacing = 0.0")).unwrap_err();
        assert!(err.0.iter().any(|e| e.contains("spacing must be positive")), "{err}");
    }

    #[test]
    fn unknown_key_suggests_the_closest() {
        let text = format!("{MINIMAL}\n[field]\nsigma2 = 1.0\n");
        let err = parse_config(&text).unwrap_err();
        assert!(err.0.iter().any(|e| e.contains("sigma2") && e.contains("\"sigma\"")), "{err}");
    }

    #[test]
    fn misplaced_key_names_its_section() {
        let text = MINIMAL.replace("[energies]", "samples = 3\n[energies]");
        let err = parse_config(&text).unwrap_err();
        assert!(err.0.iter().any(|e| e.contains("grid.samples") && e.contains("[ensemble]")), "{err}");
    }

    #[test]
    fn all_errors_are_reported() {
        let text = r#"
experiment = "ids"
[field]
xi = -1.0
sigmaa = 2
[grid]
dimension = 1
side_length = "long"
spacing = 0.125
"#;
        let err = parse_config(text).unwrap_err();
        assert!(err.0.len() >= 2, "{err}");
        assert!(err.0.iter().any(|e| e.contains("sigmaa")));
        assert!(err.0.iter().any(|e| e.contains("grid.side_length: expected a number")));
    }

    #[test]
    fn energy_beyond_window_is_a_config_error() {
        let err = parse_config(&MINIMAL.replace("[-1.0, 0.0, 1.0]", "[-1.0, 0.0, 7.0]")).unwrap_err();
        assert!(err.0.iter().any(|e| e.contains("validity window")), "{err}");
    }

    #[test]
    fn unknown_experiment_suggestion() {
        let err = parse_config(&MINIMAL.replace("\"ids\"", "\"trace-id\"")).unwrap_err();
        assert!(err.0[0].contains("trace-ids"), "{err}");
    }

    #[test]
    fn hash_ignores_workers_and_output() {
        let a = parse_config(MINIMAL).unwrap();
        let mut b = a.clone();
        b.ensemble.workers = Some(8);
        b.output.directory = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.ensemble.master_seed = 1;
        assert_ne!(a.hash(), b.hash());
    }
}
