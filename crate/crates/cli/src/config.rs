//! Run configuration: INI file values, overridden by command-line flags.
//!
//! ```ini
//! [weight]
//! name = decoupled_quartic
//! n = 2
//!
//! [grid]
//! radius = 4
//! m = 16
//! radii = 3,4,5
//! m_per_r = 4
//!
//! [run]
//! q = 1
//! seed = 0
//! tol = 1e-8
//! ```

use dbar_core::weights::{builtin_weight, parse_weight, BUILTIN_WEIGHTS};
use dbar_core::weights::WeightExpr;
use ini::Ini;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("unknown key `{key}` in [{section}]")]
    UnknownKey { section: String, key: String },
    #[error("invalid value `{value}` for {key}: {reason}")]
    Value { key: String, value: String, reason: String },
    #[error("give either a weight name or an expression, not both")]
    WeightConflict,
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Analyze,
    Verify,
    Spectrum,
    Solve,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Verify => "verify",
            Command::Spectrum => "spectrum",
            Command::Solve => "solve",
        }
    }

    /// Default of `tol`: accepted relative error for `verify`, solver tolerance otherwise.
    pub fn default_tol(self) -> f64 {
        match self {
            Command::Verify => 5e-2,
            Command::Spectrum => 1e-6,
            Command::Analyze | Command::Solve => 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMode {
    Neumann,
    Canonical,
}

impl std::str::FromStr for SolveMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "neumann" => Ok(SolveMode::Neumann),
            "canonical" => Ok(SolveMode::Canonical),
            _ => Err("expected neumann or canonical".into()),
        }
    }
}

impl std::fmt::Display for SolveMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveMode::Neumann => "neumann",
            SolveMode::Canonical => "canonical",
        })
    }
}

/// Values that may come from either the file or the flags; `None` means unset.
#[derive(Clone, Debug, Default)]
pub struct Settings {
    pub weight: Option<String>,
    pub expr: Option<String>,
    pub n: Option<usize>,
    pub q: Option<usize>,
    pub radius: Option<f64>,
    pub m: Option<usize>,
    pub radii: Option<Vec<f64>>,
    pub m_per_r: Option<f64>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub k: Option<usize>,
    pub trials: Option<usize>,
    pub directions: Option<usize>,
    pub mode: Option<SolveMode>,
    pub max_iter: Option<usize>,
    pub out: Option<PathBuf>,
    pub form_out: Option<PathBuf>,
    pub matrix_out: Option<PathBuf>,
    pub threads: Option<usize>,
}

const WEIGHT_KEYS: &[&str] = &["name", "expr", "n"];
const GRID_KEYS: &[&str] = &["radius", "m", "radii", "m_per_r"];
const RUN_KEYS: &[&str] = &["q", "seed", "tol", "k", "trials", "directions", "mode", "max_iter", "out", "form_out", "matrix_out", "threads"];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e: T::Err| ConfigError::Value { key: key.into(), value: value.into(), reason: e.to_string() })
}

pub fn parse_radii(text: &str) -> Result<Vec<f64>, String> {
    text.split(',').map(|s| s.trim().parse::<f64>().map_err(|e| format!("`{s}`: {e}"))).collect()
}

impl Settings {
    pub fn from_ini_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::from_ini_str(&text)
    }

    pub fn from_ini_str(text: &str) -> Result<Self, ConfigError> {
        let ini = Ini::load_from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        let mut s = Settings::default();
        for (section, props) in ini.iter() {
            let section = section.unwrap_or("");
            let allowed = match section {
                "weight" => WEIGHT_KEYS,
                "grid" => GRID_KEYS,
                "run" => RUN_KEYS,
                // the implicit general section must stay empty
                "" if props.is_empty() => continue,
                other => return Err(ConfigError::UnknownSection(other.to_string())),
            };
            for (key, value) in props.iter() {
                if !allowed.contains(&key) {
                    return Err(ConfigError::UnknownKey { section: section.into(), key: key.into() });
                }
                s.set(key, value)?;
            }
        }
        Ok(s)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "name" => self.weight = Some(value.trim().to_string()),
            "expr" => self.expr = Some(value.trim().to_string()),
            "n" => self.n = Some(parse(key, value)?),
            "q" => self.q = Some(parse(key, value)?),
            "radius" => self.radius = Some(parse(key, value)?),
            "m" => self.m = Some(parse(key, value)?),
            "radii" => {
                self.radii = Some(parse_radii(value).map_err(|reason| ConfigError::Value { key: key.into(), value: value.into(), reason })?)
            }
            "m_per_r" => self.m_per_r = Some(parse(key, value)?),
            "seed" => self.seed = Some(parse(key, value)?),
            "tol" => self.tol = Some(parse(key, value)?),
            "k" => self.k = Some(parse(key, value)?),
            "trials" => self.trials = Some(parse(key, value)?),
            "directions" => self.directions = Some(parse(key, value)?),
            "mode" => self.mode = Some(parse(key, value)?),
            "max_iter" => self.max_iter = Some(parse(key, value)?),
            "out" => self.out = Some(PathBuf::from(value.trim())),
            "form_out" => self.form_out = Some(PathBuf::from(value.trim())),
            "matrix_out" => self.matrix_out = Some(PathBuf::from(value.trim())),
            "threads" => self.threads = Some(parse(key, value)?),
            _ => unreachable!("keys are checked against the section tables"),
        }
        Ok(())
    }

    /// Fields set in `over` replace those in `self`. A weight choice in
    /// `over` replaces both weight fields of `self`.
    pub fn overridden_by(mut self, over: Settings) -> Settings {
        if over.weight.is_some() || over.expr.is_some() {
            self.weight = over.weight;
            self.expr = over.expr;
        }
        macro_rules! take {
            ($($f:ident),*) => {$( if over.$f.is_some() { self.$f = over.$f; } )*};
        }
        take!(n, q, radius, m, radii, m_per_r, seed, tol, k, trials, directions, mode, max_iter, out, form_out, matrix_out, threads);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum WeightSource {
    Builtin(String),
    Expr(String),
}

/// A validated configuration with every default filled in.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    pub weight_source: WeightSource,
    pub weight: WeightExpr,
    pub n: usize,
    pub q: usize,
    pub radius: f64,
    pub m: usize,
    pub radii: Vec<f64>,
    pub m_per_r: f64,
    pub seed: u64,
    pub tol: f64,
    pub k: usize,
    pub trials: usize,
    pub directions: usize,
    pub mode: SolveMode,
    pub max_iter: usize,
    pub out: Option<PathBuf>,
    pub form_out: Option<PathBuf>,
    pub matrix_out: Option<PathBuf>,
    pub threads: Option<usize>,
}

pub const DEFAULT_WEIGHT: &str = "gaussian";

impl RunConfig {
    pub fn resolve(command: Command, s: Settings) -> Result<Self, ConfigError> {
        let source = match (s.weight, s.expr) {
            (Some(_), Some(_)) => return Err(ConfigError::WeightConflict),
            (None, Some(e)) => WeightSource::Expr(e),
            (Some(name), None) => WeightSource::Builtin(name),
            (None, None) => WeightSource::Builtin(DEFAULT_WEIGHT.into()),
        };
        let fixed = match &source {
            WeightSource::Builtin(name) => match BUILTIN_WEIGHTS.iter().find(|b| b.name == name) {
                Some(b) => b.fixed_dim,
                None => return Err(ConfigError::Invalid(format!("unknown built-in weight `{name}`"))),
            },
            WeightSource::Expr(_) => None,
        };
        let n = s.n.or(fixed).unwrap_or(2);
        if n == 0 || n > 16 {
            return Err(ConfigError::Invalid(format!("n = {n} is outside 1..=16")));
        }
        let weight = match &source {
            WeightSource::Builtin(name) => builtin_weight(name, n),
            WeightSource::Expr(text) => parse_weight(text, n),
        }
        .map_err(|e| ConfigError::Invalid(format!("weight: {e}")))?;

        let q = s.q.unwrap_or(1);
        let min_q = if command == Command::Spectrum { 0 } else { 1 };
        if q < min_q || q > n {
            return Err(ConfigError::Invalid(format!("q = {q} is outside {min_q}..={n}")));
        }
        let radius = s.radius.unwrap_or(4.0);
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(ConfigError::Invalid(format!("radius {radius} must be positive")));
        }
        let m = s.m.unwrap_or(if n == 1 { 48 } else { 16 });
        if m < 8 {
            return Err(ConfigError::Invalid(format!("m = {m} is below 8")));
        }
        let radii = s.radii.unwrap_or_else(|| vec![3.0, 4.0, 5.0]);
        if radii.len() < 3 || radii[0] <= 0.0 || radii.windows(2).any(|p| p[1] <= p[0]) || radii.iter().any(|r| !r.is_finite()) {
            return Err(ConfigError::Invalid("radii must be at least three positive increasing values".into()));
        }
        let m_per_r = s.m_per_r.unwrap_or(4.0);
        if !(m_per_r > 0.0 && m_per_r.is_finite()) {
            return Err(ConfigError::Invalid(format!("m_per_r {m_per_r} must be positive")));
        }
        let tol = s.tol.unwrap_or(command.default_tol());
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(ConfigError::Invalid(format!("tol {tol} must be positive")));
        }
        let k = s.k.unwrap_or(4);
        let trials = s.trials.unwrap_or(4);
        let directions = s.directions.unwrap_or(64);
        if k == 0 || trials == 0 {
            return Err(ConfigError::Invalid("k and trials must be positive".into()));
        }
        if directions < 8 {
            return Err(ConfigError::Invalid(format!("directions = {directions} is below 8")));
        }
        if s.threads == Some(0) {
            return Err(ConfigError::Invalid("threads must be positive".into()));
        }
        Ok(RunConfig {
            command,
            weight_source: source,
            weight,
            n,
            q,
            radius,
            m,
            radii,
            m_per_r,
            seed: s.seed.unwrap_or(0),
            tol,
            k,
            trials,
            directions,
            mode: s.mode.unwrap_or(SolveMode::Neumann),
            max_iter: s.max_iter.unwrap_or(20_000),
            out: s.out,
            form_out: s.form_out,
            matrix_out: s.matrix_out,
            threads: s.threads,
        })
    }

    /// `# key = value` lines describing every resolved setting.
    pub fn comment_header(&self) -> String {
        let mut h = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(h, "# {k} = {v}");
        };
        line("command", self.command.name().into());
        match &self.weight_source {
            WeightSource::Builtin(name) => line("weight.name", name.clone()),
            WeightSource::Expr(e) => line("weight.expr", e.clone()),
        }
        line("weight.resolved", self.weight.to_string());
        line("weight.n", self.n.to_string());
        line("grid.radius", self.radius.to_string());
        line("grid.m", self.m.to_string());
        line("grid.radii", self.radii.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
        line("grid.m_per_r", self.m_per_r.to_string());
        line("run.q", self.q.to_string());
        line("run.seed", self.seed.to_string());
        line("run.tol", format!("{:e}", self.tol));
        line("run.k", self.k.to_string());
        line("run.trials", self.trials.to_string());
        line("run.directions", self.directions.to_string());
        line("run.mode", self.mode.to_string());
        line("run.max_iter", self.max_iter.to_string());
        let path = |p: &Option<PathBuf>| p.as_ref().map_or("-".to_string(), |p| p.display().to_string());
        line("run.out", path(&self.out));
        line("run.form_out", path(&self.form_out));
        line("run.matrix_out", path(&self.matrix_out));
        line("run.threads", self.threads.map_or("auto".into(), |t| t.to_string()));
        h
    }
}
