//! Run configuration: `key = value` lines, `#` comments.
//!
//! Defaults follow the quadratic-benchmark protocol: `η_min = 1e-4`,
//! `σ̄_min = 0`, `G_tol = 0` and a budget of `10⁷` f-calls. Setting
//! `protocol = robust` switches the defaults of keys left unset to
//! `σ̄_min = 1e-8`, `G_tol = 1e-6`, `d_y_min = σ̄_min·√n`, a budget of `10⁶`
//! and random probes.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::Result as CoreResult;
use crate::oracle::CmaesParams;
use crate::problems::{MinimaxProblem, QuadraticSpec, TestFunction};
use crate::saddle::{AdaptParams, EtaMode, OracleKind, SolverConfig};

/// Environment variable consulted when no seed is configured.
pub const SEED_ENV: &str = "SPO_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverId {
    /// Saddle loop with (1+1)-CMA-ES oracles.
    AdvCmaes,
    /// Saddle loop with gradient-descent oracles.
    AdvGd,
    /// Sampled worst case minimized by (1+1)-CMA-ES.
    CmaesNy,
    /// Simultaneous gradient descent-ascent.
    Gda,
}

impl SolverId {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::AdvCmaes => "adv-cmaes",
            Self::AdvGd => "adv-gd",
            Self::CmaesNy => "cmaes-ny",
            Self::Gda => "gda",
        }
    }
}

impl FromStr for SolverId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "adv-cmaes" => Ok(Self::AdvCmaes),
            "adv-gd" => Ok(Self::AdvGd),
            "cmaes-ny" => Ok(Self::CmaesNy),
            "gda" => Ok(Self::Gda),
            _ => Err(format!("unknown solver {s:?}; expected adv-cmaes, adv-gd, cmaes-ny or gda")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Quadratic,
    Robust,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub protocol: Protocol,
    pub problem: String,
    pub solver: SolverId,
    pub m: usize,
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub eta_mode_fixed: bool,
    pub eta_fixed: f64,
    pub budget: u64,
    pub seed: u64,
    pub trials: u64,
    pub eta_min: f64,
    pub g_tol: f64,
    pub d_y_min: f64,
    pub sigma_min_bar: f64,
    pub tau_es: usize,
    pub tau_es_prime: usize,
    pub a_eta: f64,
    pub b_eta: f64,
    pub c_eta: f64,
    pub n_y: usize,
    pub probes: bool,
    /// Closed-form suboptimality at which a run counts as converged.
    pub target: f64,
    /// Stop a trial once the target is reached.
    pub stop_at_target: bool,
    /// Gradient steps per call of a first-order oracle.
    pub gd_iters: usize,
    pub output: String,
    /// Summary CSV path; empty means `<output stem>_summary.csv`.
    pub summary: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            protocol: Protocol::Quadratic,
            problem: "f1".into(),
            solver: SolverId::AdvCmaes,
            m: 10,
            n: 10,
            a: 1.0,
            b: 1.0,
            c: 1.0,
            eta_mode_fixed: false,
            eta_fixed: 0.5,
            budget: 10_000_000,
            seed: 0,
            trials: 1,
            eta_min: 1e-4,
            g_tol: 0.0,
            d_y_min: 0.0,
            sigma_min_bar: 0.0,
            tau_es: 5,
            tau_es_prime: 5,
            a_eta: 1.0,
            b_eta: 5.0,
            c_eta: 1.1,
            n_y: 100,
            probes: false,
            target: 1e-5,
            stop_at_target: true,
            gd_iters: 5,
            output: "trace.csv".into(),
            summary: String::new(),
        }
    }
}

pub const KEYS: &[&str] = &[
    "protocol",
    "problem",
    "solver",
    "m",
    "n",
    "a",
    "b",
    "c",
    "eta_mode",
    "eta_fixed",
    "budget",
    "seed",
    "trials",
    "eta_min",
    "g_tol",
    "d_y_min",
    "sigma_min_bar",
    "tau_es",
    "tau_es_prime",
    "a_eta",
    "b_eta",
    "c_eta",
    "n_y",
    "probes",
    "target",
    "stop_at_target",
    "gd_iters",
    "output",
    "summary",
];

/// Where a setting came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Flag,
    Env,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Line(n) => write!(f, "line {n}"),
            Self::Flag => write!(f, "command line"),
            Self::Env => write!(f, "environment {SEED_ENV}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{origin}: {key}: {message}")]
pub struct ConfigError {
    pub origin: Origin,
    pub key: String,
    pub message: String,
}

fn parse_num<T: FromStr>(value: &str, what: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("expected {what}, got {value:?}"))
}

fn parse_positive_int<T: FromStr + TryFrom<u64>>(value: &str) -> Result<T, String> {
    let v: i128 = parse_num(value, "an integer")?;
    if v <= 0 {
        return Err(format!("must be a positive integer, got {v}"));
    }
    u64::try_from(v)
        .ok()
        .and_then(|u| T::try_from(u).ok())
        .ok_or_else(|| format!("{v} is out of range"))
}

fn parse_bool(value: &str) -> Result<bool, String> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(format!("expected true or false, got {value:?}")),
    }
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "protocol" => {
                self.protocol = match value {
                    "quadratic" => Protocol::Quadratic,
                    "robust" => Protocol::Robust,
                    _ => return Err(format!("expected quadratic or robust, got {value:?}")),
                }
            }
            "problem" => {
                TestFunction::from_id(value, QuadraticSpec::default()).map_err(|e| e.to_string())?;
                self.problem = value.to_string();
            }
            "solver" => self.solver = value.parse()?,
            "m" => self.m = parse_positive_int(value)?,
            "n" => self.n = parse_positive_int(value)?,
            "a" => self.a = parse_num(value, "a number")?,
            "b" => self.b = parse_num(value, "a number")?,
            "c" => self.c = parse_num(value, "a number")?,
            "eta_mode" => {
                self.eta_mode_fixed = match value {
                    "adapt" => false,
                    "fixed" => true,
                    _ => return Err(format!("expected adapt or fixed, got {value:?}")),
                }
            }
            "eta_fixed" => self.eta_fixed = parse_num(value, "a number")?,
            "budget" => self.budget = parse_positive_int(value)?,
            "seed" => self.seed = parse_num(value, "an unsigned 64-bit integer")?,
            "trials" => self.trials = parse_positive_int(value)?,
            "eta_min" => self.eta_min = parse_num(value, "a number")?,
            "g_tol" => self.g_tol = parse_num(value, "a number")?,
            "d_y_min" => self.d_y_min = parse_num(value, "a number")?,
            "sigma_min_bar" => self.sigma_min_bar = parse_num(value, "a number")?,
            "tau_es" => self.tau_es = parse_positive_int(value)?,
            "tau_es_prime" => self.tau_es_prime = parse_num(value, "a nonnegative integer")?,
            "a_eta" => self.a_eta = parse_num(value, "a number")?,
            "b_eta" => self.b_eta = parse_num(value, "a number")?,
            "c_eta" => self.c_eta = parse_num(value, "a number")?,
            "n_y" => self.n_y = parse_positive_int(value)?,
            "probes" => self.probes = parse_bool(value)?,
            "target" => self.target = parse_num(value, "a number")?,
            "stop_at_target" => self.stop_at_target = parse_bool(value)?,
            "gd_iters" => self.gd_iters = parse_positive_int(value)?,
            "output" => self.output = value.to_string(),
            "summary" => self.summary = value.to_string(),
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// Checks cross-field constraints, returning the offending key.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if self.problem == "f1" && self.m != self.n {
            return Err(("n", format!("f1 needs m = n, got m = {} and n = {}", self.m, self.n)));
        }
        QuadraticSpec::new(self.a, self.b, self.c).map_err(|e| ("a", e.to_string()))?;
        if !(self.eta_fixed > 0.0 && self.eta_fixed.is_finite()) {
            return Err(("eta_fixed", format!("must be positive, got {}", self.eta_fixed)));
        }
        if !(self.target >= 0.0) {
            return Err(("target", "must be nonnegative".into()));
        }
        if !(self.sigma_min_bar >= 0.0 && self.sigma_min_bar.is_finite()) {
            return Err(("sigma_min_bar", "must be a finite nonnegative number".into()));
        }
        if self.solver == SolverId::CmaesNy && self.sigma_min_bar <= 0.0 {
            return Err(("sigma_min_bar", "cmaes-ny restarts need a positive sigma_min_bar".into()));
        }
        if self.output.is_empty() {
            return Err(("output", "must not be empty".into()));
        }
        let adapt = self.adapt_params();
        adapt.validate().map_err(|e| {
            let msg = match e {
                crate::error::Error::InvalidArgument(m) => m,
                other => other.to_string(),
            };
            let key = KEYS
                .iter()
                .copied()
                .find(|k| msg.starts_with(&format!("{k} ")))
                .unwrap_or("eta_min");
            (key, msg)
        })
    }

    pub fn spec(&self) -> CoreResult<QuadraticSpec> {
        QuadraticSpec::new(self.a, self.b, self.c)
    }

    pub fn problem(&self) -> CoreResult<MinimaxProblem> {
        TestFunction::from_id(&self.problem, self.spec()?)?.problem(self.m, self.n)
    }

    pub fn adapt_params(&self) -> AdaptParams {
        AdaptParams {
            a_eta: self.a_eta,
            b_eta: self.b_eta,
            c_eta: self.c_eta,
            eta_min: self.eta_min,
            g_tol: self.g_tol,
            d_y_min: self.d_y_min,
            budget: self.budget,
            use_random_probes: self.probes,
        }
    }

    pub fn cmaes_params(&self) -> CmaesParams {
        CmaesParams {
            tau_es: self.tau_es,
            tau_es_prime: self.tau_es_prime,
            sigma_min_bar: self.sigma_min_bar,
            ..CmaesParams::default()
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        let oracle = match self.solver {
            SolverId::AdvGd | SolverId::Gda => OracleKind::Gradient {
                max_iters: self.gd_iters,
            },
            _ => OracleKind::Cmaes(self.cmaes_params()),
        };
        SolverConfig {
            adapt: self.adapt_params(),
            eta_mode: if self.eta_mode_fixed {
                EtaMode::Fixed(self.eta_fixed)
            } else {
                EtaMode::Adapt
            },
            oracle_x: oracle,
            oracle_y: oracle,
            initial_sigma: None,
            initial_pair: None,
            target: self.stop_at_target.then_some(self.target),
        }
    }

    /// Summary path, derived from the trace path when unset.
    pub fn summary_path(&self) -> String {
        if !self.summary.is_empty() {
            return self.summary.clone();
        }
        match self.output.strip_suffix(".csv") {
            Some(stem) => format!("{stem}_summary.csv"),
            None => format!("{}_summary.csv", self.output),
        }
    }
}

/// Builds a configuration from file text, then flag overrides, then the
/// environment seed if neither set one.
pub fn load_config(
    text: &str,
    overrides: &[(String, String)],
    env_seed: Option<&str>,
) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut origins: HashMap<String, Origin> = HashMap::new();
    let err = |origin: Origin, key: &str, message: String| ConfigError {
        origin,
        key: key.to_string(),
        message,
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(err(Origin::Line(line_no), line, "expected `key = value`".into()));
        };
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(err(Origin::Line(line_no), key, "unknown key".into()));
        }
        if let Some(Origin::Line(prev)) = origins.get(key) {
            return Err(err(Origin::Line(line_no), key, format!("already set on line {prev}")));
        }
        cfg.set(key, value).map_err(|m| err(Origin::Line(line_no), key, m))?;
        origins.insert(key.to_string(), Origin::Line(line_no));
    }

    for (key, value) in overrides {
        if !KEYS.contains(&key.as_str()) {
            return Err(err(Origin::Flag, key, "unknown key".into()));
        }
        cfg.set(key, value).map_err(|m| err(Origin::Flag, key, m))?;
        origins.insert(key.clone(), Origin::Flag);
    }

    if cfg.protocol == Protocol::Robust {
        let sigma_min_bar = if origins.contains_key("sigma_min_bar") { cfg.sigma_min_bar } else { 1e-8 };
        let n = cfg.n as f64;
        let defaults = [
            ("sigma_min_bar", sigma_min_bar.to_string()),
            ("g_tol", "1e-6".to_string()),
            ("d_y_min", (sigma_min_bar * n.sqrt()).to_string()),
            ("budget", "1000000".to_string()),
            ("probes", "true".to_string()),
        ];
        for (key, value) in defaults {
            if !origins.contains_key(key) {
                cfg.set(key, &value).expect("valid protocol default");
            }
        }
    }

    if !origins.contains_key("seed") {
        if let Some(s) = env_seed {
            cfg.set("seed", s.trim()).map_err(|m| err(Origin::Env, "seed", m))?;
            origins.insert("seed".into(), Origin::Env);
        }
    }

    cfg.validate().map_err(|(key, message)| {
        let origin = origins.get(key).cloned().unwrap_or(Origin::Line(0));
        err(origin, key, message)
    })?;
    Ok(cfg)
}

/// Parses file text, falling back to `SPO_SEED` for the seed.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let env = std::env::var(SEED_ENV).ok();
    load_config(text, &[], env.as_deref())
}
