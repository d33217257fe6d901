//! Seeded multi-trial runs, parameter sweeps and CSV output.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{cmaes_ny_run, gda_step};
use crate::config::{ConfigError, RunConfig, SolverId};
use crate::error::Error;
use crate::numerics::{Rng, Vector};
use crate::saddle::{adapt_and_run, SaddlePair, TraceRecord};
use crate::problems::QuadraticSpec;
use crate::theory::{eta_bar, eta_star, gamma_bound, gamma_star, quadratic_constants, runtime_bound};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
}

impl ExperimentError {
    /// 1 for configuration problems, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 1,
            _ => 2,
        }
    }
}

/// One row of the summary CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSummary {
    /// Sweep label; empty for plain runs.
    pub setting: String,
    pub trial: u64,
    pub seed: u64,
    pub solver: &'static str,
    pub problem: String,
    pub f_calls: u64,
    pub f_calls_to_threshold: Option<u64>,
    pub iterations: u64,
    pub iterations_to_threshold: Option<u64>,
    pub epochs: u64,
    pub restarts: u64,
    pub final_eta: Option<f64>,
    pub x_norm: f64,
    pub y_norm: Option<f64>,
    #[serde(rename = "G_closed_form")]
    pub g_closed_form: Option<f64>,
    /// `max_y f(x, y)` at the returned `x`, when the worst response is known.
    pub worst_case: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub summary: TrialSummary,
    pub trace: Vec<TraceRecord>,
}

/// Seed of trial `trial`: the base seed plus the trial index.
pub fn trial_seed(cfg: &RunConfig, trial: u64) -> u64 {
    cfg.seed.wrapping_add(trial)
}

/// Runs one seeded trial of the configured solver.
pub fn run_trial(cfg: &RunConfig, trial: u64) -> Result<TrialOutput, Error> {
    let problem = cfg.problem()?;
    let seed = trial_seed(cfg, trial);
    let mut rng = Rng::new(seed);
    let base = TrialSummary {
        setting: String::new(),
        trial,
        seed,
        solver: cfg.solver.as_str(),
        problem: cfg.problem.clone(),
        f_calls: 0,
        f_calls_to_threshold: None,
        iterations: 0,
        iterations_to_threshold: None,
        epochs: 0,
        restarts: 0,
        final_eta: None,
        x_norm: 0.0,
        y_norm: None,
        g_closed_form: None,
        worst_case: None,
    };

    match cfg.solver {
        SolverId::AdvCmaes | SolverId::AdvGd => {
            let r = adapt_and_run(&problem, cfg.solver_config(), rng)?;
            let trace = r
                .trace
                .into_iter()
                .map(|mut t| {
                    t.trial = trial;
                    t
                })
                .collect();
            let summary = TrialSummary {
                f_calls: r.f_calls,
                f_calls_to_threshold: r.hit.map(|h| h.f_calls),
                iterations: r.iterations,
                iterations_to_threshold: r.hit.map(|h| h.iterations),
                epochs: r.epochs,
                restarts: r.restarts,
                final_eta: Some(r.adaptive.eta),
                x_norm: r.x_best.norm(),
                y_norm: Some(r.pair.y.norm()),
                g_closed_form: problem.closed_form_suboptimality(&r.pair.x, &r.pair.y),
                worst_case: problem.worst_case_value(&r.x_best),
                ..base
            };
            Ok(TrialOutput { summary, trace })
        }
        SolverId::CmaesNy => {
            let r = cmaes_ny_run(&problem, cfg.n_y, cfg.budget, cfg.sigma_min_bar, &mut rng)?;
            let summary = TrialSummary {
                f_calls: r.f_calls,
                restarts: r.restarts,
                x_norm: r.best_x.norm(),
                worst_case: problem.worst_case_value(&r.best_x),
                ..base
            };
            let trace = vec![TraceRecord {
                trial,
                epoch: 0,
                f_calls_cum: r.f_calls,
                eta: f64::NAN,
                eta_candidate: f64::NAN,
                gamma_tilde: f64::NAN,
                f_last: r.best_value,
                g_closed_form: None,
                x_norm: r.best_x.norm(),
                y_norm: f64::NAN,
                restarts: r.restarts,
            }];
            Ok(TrialOutput { summary, trace })
        }
        SolverId::Gda => run_gda_trial(cfg, &problem, &mut rng, base),
    }
}

/// GDA spends one gradient call per iteration; the budget caps iterations.
fn run_gda_trial(
    cfg: &RunConfig,
    problem: &crate::problems::MinimaxProblem,
    rng: &mut Rng,
    base: TrialSummary,
) -> Result<TrialOutput, Error> {
    let eta = cfg.eta_fixed;
    let mut p = SaddlePair::new(problem.sample_x(rng), problem.sample_y(rng));
    let record_every = (cfg.budget / 1000).max(1);
    let mut trace = Vec::new();
    let mut hit = None;
    let mut iters = 0u64;
    let record = |p: &SaddlePair, iters: u64| TraceRecord {
        trial: base.trial,
        epoch: iters,
        f_calls_cum: iters,
        eta,
        eta_candidate: eta,
        gamma_tilde: f64::NAN,
        f_last: f64::NAN,
        g_closed_form: problem.closed_form_suboptimality(&p.x, &p.y),
        x_norm: p.x.norm(),
        y_norm: p.y.norm(),
        restarts: 0,
    };
    while iters < cfg.budget {
        p = gda_step(problem, &p, eta)?;
        iters += 1;
        let g = problem.closed_form_suboptimality(&p.x, &p.y);
        if hit.is_none() && g.is_some_and(|g| g <= cfg.target) {
            hit = Some(iters);
        }
        if iters.is_multiple_of(record_every) || (hit.is_some() && cfg.stop_at_target) {
            trace.push(record(&p, iters));
        }
        if hit.is_some() && cfg.stop_at_target {
            break;
        }
    }
    let summary = TrialSummary {
        f_calls: iters,
        f_calls_to_threshold: hit,
        iterations: iters,
        iterations_to_threshold: hit,
        final_eta: Some(eta),
        x_norm: p.x.norm(),
        y_norm: Some(p.y.norm()),
        g_closed_form: problem.closed_form_suboptimality(&p.x, &p.y),
        worst_case: problem.worst_case_value(&p.x),
        ..base
    };
    Ok(TrialOutput { summary, trace })
}

/// Runs all trials in parallel; output order follows the trial index.
pub fn run_trials(cfg: &RunConfig) -> Result<Vec<TrialOutput>, Error> {
    (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, t)).collect()
}

fn create(path: &str) -> Result<File, ExperimentError> {
    let io = |source| ExperimentError::Io {
        path: path.to_string(),
        source,
    };
    if let Some(dir) = Path::new(path).parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
    }
    File::create(path).map_err(io)
}

/// Writes rows with a header line; an empty table still gets its header.
pub fn write_csv<T: Serialize, W: Write>(out: W, rows: &[T], header: &[&str]) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub const TRACE_HEADER: &[&str] = &[
    "trial",
    "epoch",
    "f_calls_cum",
    "eta",
    "eta_candidate",
    "gamma_tilde",
    "F_last",
    "G_closed_form",
    "x_norm",
    "y_norm",
    "restarts",
];

pub const SUMMARY_HEADER: &[&str] = &[
    "setting",
    "trial",
    "seed",
    "solver",
    "problem",
    "f_calls",
    "f_calls_to_threshold",
    "iterations",
    "iterations_to_threshold",
    "epochs",
    "restarts",
    "final_eta",
    "x_norm",
    "y_norm",
    "G_closed_form",
    "worst_case",
];

fn write_file<T: Serialize>(path: &str, rows: &[T], header: &[&str]) -> Result<(), ExperimentError> {
    let f = create(path)?;
    write_csv(std::io::BufWriter::new(f), rows, header).map_err(|source| ExperimentError::Csv {
        path: path.to_string(),
        source,
    })
}

/// Runs all trials and writes the trace and summary CSVs.
pub fn run_experiment(cfg: &RunConfig) -> Result<Vec<TrialSummary>, ExperimentError> {
    let outputs = run_trials(cfg)?;
    let trace: Vec<&TraceRecord> = outputs.iter().flat_map(|o| o.trace.iter()).collect();
    write_file(&cfg.output, &trace, TRACE_HEADER)?;
    let summaries: Vec<TrialSummary> = outputs.into_iter().map(|o| o.summary).collect();
    write_file(&cfg.summary_path(), &summaries, SUMMARY_HEADER)?;
    Ok(summaries)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    /// Fixed rates `η*·2^{(3−k)/3}` for `k = 1..12`, plus adaptation.
    Eta,
    /// Coupling strength `b` at `a = c = 1`.
    Coupling,
    /// Dimension `m = n`.
    Dim,
}

impl std::str::FromStr for Sweep {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "eta" => Ok(Self::Eta),
            "b" => Ok(Self::Coupling),
            "dim" => Ok(Self::Dim),
            _ => Err(format!("unknown sweep {s:?}; expected eta, b or dim")),
        }
    }
}

pub const COUPLING_GRID: &[f64] = &[0.25, 0.5, 1.0, 2.0, 4.0, 8.0];
pub const DIM_GRID: &[usize] = &[1, 2, 5, 10, 20, 40];

fn optimal_rate(spec: &QuadraticSpec) -> f64 {
    eta_star(&quadratic_constants(spec, 0.0).expect("valid quadratic"))
}

/// Labelled configurations of a sweep around `base`.
pub fn sweep_settings(base: &RunConfig, sweep: Sweep) -> Result<Vec<(String, RunConfig)>, Error> {
    let spec = base.spec()?;
    let mut out = Vec::new();
    match sweep {
        Sweep::Eta => {
            let mut adapt = base.clone();
            adapt.eta_mode_fixed = false;
            out.push(("adapt".to_string(), adapt));
            let es = optimal_rate(&spec);
            for k in 1..=12 {
                let mut c = base.clone();
                c.eta_mode_fixed = true;
                c.eta_fixed = es * 2f64.powf((3.0 - k as f64) / 3.0);
                out.push((format!("eta={}", c.eta_fixed), c));
            }
        }
        Sweep::Coupling => {
            for &b in COUPLING_GRID {
                let mut c = base.clone();
                c.b = b;
                if c.eta_mode_fixed {
                    c.eta_fixed = optimal_rate(&c.spec()?);
                }
                out.push((format!("b={b}"), c));
            }
        }
        Sweep::Dim => {
            for &d in DIM_GRID {
                let mut c = base.clone();
                c.m = d;
                c.n = d;
                out.push((format!("dim={d}"), c));
            }
        }
    }
    Ok(out)
}

/// Runs every setting of a sweep for `trials` trials each and writes one
/// summary CSV at the configured summary path.
pub fn run_bench(base: &RunConfig, sweep: Sweep) -> Result<Vec<TrialSummary>, ExperimentError> {
    let settings = sweep_settings(base, sweep)?;
    let jobs: Vec<(usize, u64)> = (0..settings.len())
        .flat_map(|s| (0..base.trials).map(move |t| (s, t)))
        .collect();
    let rows: Vec<TrialSummary> = jobs
        .into_par_iter()
        .map(|(s, t)| {
            let (label, cfg) = &settings[s];
            run_trial(cfg, t).map(|o| TrialSummary {
                setting: label.clone(),
                ..o.summary
            })
        })
        .collect::<Result<_, _>>()?;
    write_file(&base.summary_path(), &rows, SUMMARY_HEADER)?;
    Ok(rows)
}

/// Theory constants for `f(x, y) = a/2 ‖x‖² + b xᵀy − c/2 ‖y‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub spec: QuadraticSpec,
    pub eps: f64,
    pub zeta: f64,
    pub alpha_g: f64,
    pub beta_g: f64,
    pub eta_star: f64,
    pub eta_bar: f64,
    pub gamma_star: f64,
    pub gamma_at_eta_star: f64,
    pub runtime_bound: Option<u64>,
    /// Exact-oracle iterations at `η*` from `x = y = 1` until `G` shrinks by `ζ`.
    pub exact_iterations: Option<u64>,
}

pub fn verify(spec: QuadraticSpec, eps: f64, zeta: f64) -> Result<VerifyReport, Error> {
    let c = quadratic_constants(&spec, eps)?;
    let es = eta_star(&c);
    let g = gamma_bound(es, &c);
    let runtime = runtime_bound(g, zeta).ok();
    let one = Vector::from_element(1, 1.0);
    let g0 = spec.suboptimality(&one, &one);
    let exact_iterations = (es > 0.0).then(|| {
        let (mut x, mut y) = (one.clone(), one.clone());
        let mut t = 0u64;
        while spec.suboptimality(&x, &y) > zeta * g0 && t < 1_000_000 {
            let p = crate::theory::exact_oracle_step(&x, &y, es, &spec);
            x = p.x;
            y = p.y;
            t += 1;
        }
        t
    });
    Ok(VerifyReport {
        spec,
        eps,
        zeta,
        alpha_g: c.alpha_g,
        beta_g: c.beta_g,
        eta_star: es,
        eta_bar: eta_bar(&c),
        gamma_star: gamma_star(&c),
        gamma_at_eta_star: g,
        runtime_bound: runtime,
        exact_iterations,
    })
}

impl std::fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = &self.spec;
        writeln!(f, "a = {}, b = {}, c = {}, eps = {}, zeta = {}", s.a, s.b, s.c, self.eps, self.zeta)?;
        writeln!(f, "alpha_H = 1, beta_H = 1, alpha_G = {}, beta_G = {}", self.alpha_g, self.beta_g)?;
        writeln!(f, "eta_star = {}", self.eta_star)?;
        writeln!(f, "eta_bar = {}", self.eta_bar)?;
        writeln!(f, "gamma(eta_star) = {}", self.gamma_at_eta_star)?;
        writeln!(f, "gamma_star = {}", self.gamma_star)?;
        match self.runtime_bound {
            Some(t) => writeln!(f, "T_zeta <= {t}")?,
            None => writeln!(f, "T_zeta: unbounded (gamma >= 0)")?,
        }
        if let Some(t) = self.exact_iterations {
            writeln!(f, "exact-oracle iterations at eta_star = {t}")?;
        }
        Ok(())
    }
}
