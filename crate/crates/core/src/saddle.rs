//! Oracle-based saddle point optimization with learning-rate adaptation.
//!
//! Each iteration asks one oracle to improve `x` on `f_Y(·, y)` and another to
//! improve `y` on `−f(x, ·)`, then moves the pair a fraction `η` of the way
//! toward the oracle outputs:
//!
//! ```text
//! (x, y) ← (x, y) + η (x̃ − x, ỹ − y)
//! ```
//!
//! Iterations are grouped into epochs. Each epoch tries a candidate rate
//! `η_c`, fits the slope of `log F_s` where `F_s = f_Y(x, ỹ) − f_Y(x̃, y)`
//! estimates the suboptimality error, and keeps, shrinks or discards the
//! candidate. Epochs whose error clearly grew are rolled back. An archive of
//! adversarial `y`s (`f_Y(x, y) = max over Y ∪ {y}`) damps cycling, and an
//! optional restart collects local saddle points as candidate solutions.

use std::cell::Cell;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{ols_slope, Rng, Vector};
use crate::oracle::{cmaes_minimize, gd_minimize, CmaesParams, OracleResult, OracleState};
use crate::problems::MinimaxProblem;

#[derive(Debug, Clone, PartialEq)]
pub struct SaddlePair {
    pub x: Vector,
    pub y: Vector,
}

impl SaddlePair {
    pub fn new(x: Vector, y: Vector) -> Self {
        Self { x, y }
    }
}

/// Hyperparameters of the outer loop.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptParams {
    pub a_eta: f64,
    pub b_eta: f64,
    /// Granularity of the rate change; values below 2 are advisable.
    pub c_eta: f64,
    pub eta_min: f64,
    /// Restart threshold on `F_s`; zero disables restarts.
    pub g_tol: f64,
    pub d_y_min: f64,
    /// Maximum number of f-calls (gradient calls included).
    pub budget: u64,
    /// Try uniform random probes in the box after each oracle call.
    pub use_random_probes: bool,
}

impl Default for AdaptParams {
    fn default() -> Self {
        Self {
            a_eta: 1.0,
            b_eta: 5.0,
            c_eta: 1.1,
            eta_min: 1e-4,
            g_tol: 0.0,
            d_y_min: 0.0,
            budget: 10_000_000,
            use_random_probes: false,
        }
    }
}

impl AdaptParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if !(self.a_eta > 0.0 && self.a_eta.is_finite()) {
            return bad("a_eta must be positive");
        }
        if !(self.b_eta >= 0.0 && self.b_eta.is_finite()) {
            return bad("b_eta must be nonnegative");
        }
        if !(self.c_eta > 1.0 && self.c_eta.is_finite()) {
            return bad("c_eta must exceed 1");
        }
        if !(0.0..=1.0).contains(&self.eta_min) {
            return bad("eta_min must lie in [0, 1]");
        }
        if !(self.g_tol >= 0.0) {
            return bad("g_tol must be nonnegative");
        }
        if !(self.d_y_min >= 0.0) {
            return bad("d_y_min must be nonnegative");
        }
        if self.budget == 0 {
            return bad("budget must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaMode {
    /// Start at `η = 1` and adapt.
    Adapt,
    /// Keep `η` fixed; no early break, slope test or rollback.
    Fixed(f64),
}

/// Which approximate minimizer serves as an oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleKind {
    Cmaes(CmaesParams),
    /// Gradient descent with backtracking; needs a problem gradient.
    Gradient { max_iters: usize },
    /// A single step `z − κ ∇h(z)`, accepted only if it decreases `h`. Exact
    /// on isotropic quadratics whose curvature is `1/κ`; meant for testing.
    ScaledGradientStep { kappa: f64 },
}

impl Default for OracleKind {
    fn default() -> Self {
        Self::Cmaes(CmaesParams::default())
    }
}

impl OracleKind {
    fn needs_gradient(&self) -> bool {
        !matches!(self, Self::Cmaes(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub adapt: AdaptParams,
    pub eta_mode: EtaMode,
    pub oracle_x: OracleKind,
    pub oracle_y: OracleKind,
    /// Initial oracle step size; defaults to a quarter of the init box width.
    pub initial_sigma: Option<f64>,
    /// Starting pair; defaults to a uniform draw from the init box.
    pub initial_pair: Option<SaddlePair>,
    /// Stop as soon as the closed-form suboptimality drops to this value.
    pub target: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            adapt: AdaptParams::default(),
            eta_mode: EtaMode::Adapt,
            oracle_x: OracleKind::default(),
            oracle_y: OracleKind::default(),
            initial_sigma: None,
            initial_pair: None,
            target: None,
        }
    }
}

/// Learning-rate state and the two archives.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveState {
    pub eta: f64,
    pub gamma_tilde: f64,
    /// Adversary archive `Y`.
    pub archive_y: Vec<Vector>,
    /// Candidate solutions collected at restarts.
    pub archive_x: Vec<Vector>,
}

impl AdaptiveState {
    fn new(eta: f64) -> Self {
        Self {
            eta,
            gamma_tilde: 0.0,
            archive_y: Vec::new(),
            archive_x: Vec::new(),
        }
    }
}

/// One row of per-epoch telemetry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub trial: u64,
    pub epoch: u64,
    pub f_calls_cum: u64,
    pub eta: f64,
    pub eta_candidate: f64,
    pub gamma_tilde: f64,
    #[serde(rename = "F_last")]
    pub f_last: f64,
    #[serde(rename = "G_closed_form")]
    pub g_closed_form: Option<f64>,
    pub x_norm: f64,
    pub y_norm: f64,
    pub restarts: u64,
}

/// Picks one of `min(η c, 1)`, `η`, `max(η / c, η_min)` with equal probability.
pub fn propose_eta(eta: f64, params: &AdaptParams, rng: &mut Rng) -> f64 {
    match rng.index(3) {
        0 => (eta * params.c_eta).min(1.0),
        1 => eta,
        _ => (eta / params.c_eta).max(params.eta_min),
    }
}

/// Iterations per epoch: `⌊b_η + a_η / η_c⌋`.
pub fn n_steps(eta_c: f64, params: &AdaptParams) -> usize {
    (params.b_eta + params.a_eta / eta_c).floor() as usize
}

/// `max_{y' ∈ Y ∪ {y}} f(x, y')`.
pub fn worst_over_archive(problem: &MinimaxProblem, archive: &[Vector], x: &Vector, y: &Vector) -> Result<f64> {
    let mut worst = finite(problem.eval(x, y))?;
    for yy in archive {
        worst = worst.max(finite(problem.eval(x, yy))?);
    }
    Ok(worst)
}

/// True when `candidate` is farther than `d_min` from every archive member.
pub fn is_separated(archive: &[Vector], candidate: &Vector, d_min: f64) -> bool {
    archive.iter().all(|y| (y - candidate).norm() > d_min)
}

/// Adds `y_tilde` to the archive if it is at least as bad for `x` as the
/// current worst case and not within `d_min` of an archived point.
pub fn register_adversary(
    archive: &mut Vec<Vector>,
    y_tilde: &Vector,
    f_x_ytilde: f64,
    f_archive_xy: f64,
    d_min: f64,
) -> bool {
    if f_x_ytilde >= f_archive_xy && is_separated(archive, y_tilde, d_min) {
        archive.push(y_tilde.clone());
        true
    } else {
        false
    }
}

/// True when the last `window` entries strictly increase.
fn strictly_increasing_tail(trace: &[f64], window: usize) -> bool {
    let s = trace.len();
    if s < window {
        return false;
    }
    trace[s - window..].windows(2).all(|w| w[1] > w[0])
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite("objective"))
    }
}

/// f-call accounting against the budget.
#[derive(Debug)]
struct Calls {
    budget: u64,
    oracle: Cell<u64>,
    bookkeeping: Cell<u64>,
    unbudgeted: Cell<u64>,
    in_oracle: Cell<bool>,
}

impl Calls {
    fn new(budget: u64) -> Self {
        Self {
            budget,
            oracle: Cell::new(0),
            bookkeeping: Cell::new(0),
            unbudgeted: Cell::new(0),
            in_oracle: Cell::new(false),
        }
    }

    fn used(&self) -> u64 {
        self.oracle.get() + self.bookkeeping.get()
    }

    fn charge(&self) -> Result<()> {
        if self.used() >= self.budget {
            return Err(Error::BudgetExhausted(self.budget));
        }
        let c = if self.in_oracle.get() { &self.oracle } else { &self.bookkeeping };
        c.set(c.get() + 1);
        Ok(())
    }
}

/// Budgeted evaluation helpers over a problem.
struct Evaluator<'a> {
    problem: &'a MinimaxProblem,
    calls: Calls,
}

impl Evaluator<'_> {
    fn f(&self, x: &Vector, y: &Vector) -> Result<f64> {
        self.calls.charge()?;
        finite(self.problem.eval(x, y))
    }

    fn f_archive(&self, archive: &[Vector], x: &Vector, y: &Vector) -> Result<f64> {
        let mut worst = self.f(x, y)?;
        for yy in archive {
            worst = worst.max(self.f(x, yy)?);
        }
        Ok(worst)
    }

    /// `∇_x f_Y(x, y)` through the maximizing archive member.
    fn grad_x_archive(&self, archive: &[Vector], x: &Vector, y: &Vector) -> Result<Vector> {
        let mut arg = y;
        let mut worst = self.f(x, y)?;
        for yy in archive {
            let v = self.f(x, yy)?;
            if v > worst {
                worst = v;
                arg = yy;
            }
        }
        self.calls.charge()?;
        let (gx, _) = self
            .problem
            .gradient(x, arg)
            .ok_or_else(|| Error::InvalidArgument("gradient oracle on a problem without gradient".into()))?;
        Ok(gx)
    }

    fn grad_y(&self, x: &Vector, y: &Vector) -> Result<Vector> {
        self.calls.charge()?;
        let (_, gy) = self
            .problem
            .gradient(x, y)
            .ok_or_else(|| Error::InvalidArgument("gradient oracle on a problem without gradient".into()))?;
        Ok(gy)
    }
}

fn run_oracle<H, G>(
    kind: &OracleKind,
    mut h: H,
    mut grad: G,
    z_ref: &Vector,
    h_ref: f64,
    state: &mut OracleState,
    rng: &mut Rng,
) -> Result<OracleResult>
where
    H: FnMut(&Vector) -> Result<f64>,
    G: FnMut(&Vector) -> Result<Vector>,
{
    match kind {
        OracleKind::Cmaes(params) => cmaes_minimize(h, z_ref, Some(h_ref), state, params, rng),
        OracleKind::Gradient { max_iters } => gd_minimize(h, grad, z_ref, Some(h_ref), *max_iters),
        OracleKind::ScaledGradientStep { kappa } => {
            let g = grad(z_ref)?;
            let cand = z_ref - g * *kappa;
            let hc = h(&cand)?;
            let (z_out, best_value, successes) = if hc <= h_ref {
                (cand, hc, 1)
            } else {
                (z_ref.clone(), h_ref, 0)
            };
            Ok(OracleResult {
                z_out,
                best_value,
                f_calls: 1,
                grad_calls: 1,
                iterations: 1,
                successes,
                stopped_on_sigma: false,
            })
        }
    }
}

/// Outcome of the inner iterations of one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochResult {
    /// `F_1 .. F_s`.
    pub f_trace: Vec<f64>,
    pub early_break: bool,
    /// f-calls spent in this epoch.
    pub f_calls: u64,
    /// The closed-form target was reached during the epoch.
    pub target_hit: bool,
}

/// Everything that happened in one outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    pub eta_candidate: f64,
    pub n_step: usize,
    pub inner: EpochResult,
    /// Slope of `log F` and its standard error, when at least two samples exist.
    pub slope: Option<(f64, f64)>,
    pub reverted: bool,
    pub restarted: bool,
}

/// First point at which the closed-form suboptimality met the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdHit {
    pub f_calls: u64,
    pub iterations: u64,
    pub epoch: u64,
}

/// f-call breakdown of a run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CallStats {
    /// Calls made inside oracle invocations.
    pub oracle: u64,
    /// Reference resets, probes, archive checks and `F_s`.
    pub bookkeeping: u64,
    /// Calls made after the budget ran out to pick the final solution.
    pub final_selection: u64,
    /// Sum of the per-call counts reported by the oracles.
    pub oracle_reported: u64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    /// Returned solution: the best of the restart archive and the final `x`.
    pub x_best: Vector,
    /// Final iterate.
    pub pair: SaddlePair,
    pub adaptive: AdaptiveState,
    /// Budgeted f-calls used.
    pub f_calls: u64,
    pub calls: CallStats,
    pub iterations: u64,
    pub epochs: u64,
    pub restarts: u64,
    pub hit: Option<ThresholdHit>,
    pub budget_exhausted: bool,
    pub trace: Vec<TraceRecord>,
}

#[derive(Debug, Clone)]
struct Snapshot {
    pair: SaddlePair,
    theta_x: OracleState,
    theta_y: OracleState,
}

/// Stateful driver of one run.
pub struct SaddleOptimizer<'p> {
    eval: Evaluator<'p>,
    config: SolverConfig,
    rng: Rng,
    pair: SaddlePair,
    theta_x: OracleState,
    theta_y: OracleState,
    sigma0_x: f64,
    sigma0_y: f64,
    adaptive: AdaptiveState,
    iterations: u64,
    epochs: u64,
    restarts: u64,
    oracle_reported: u64,
    hit: Option<ThresholdHit>,
    trace: Vec<TraceRecord>,
}

impl<'p> SaddleOptimizer<'p> {
    pub fn new(problem: &'p MinimaxProblem, config: SolverConfig, mut rng: Rng) -> Result<Self> {
        config.adapt.validate()?;
        if let EtaMode::Fixed(eta) = config.eta_mode {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::InvalidArgument(format!("fixed learning rate must be positive, got {eta}")));
            }
        }
        if (config.oracle_x.needs_gradient() || config.oracle_y.needs_gradient()) && !problem.has_gradient() {
            return Err(Error::InvalidArgument(format!(
                "problem {} has no gradient for a first-order oracle",
                problem.name
            )));
        }
        let pair = match &config.initial_pair {
            Some(p) => {
                if p.x.len() != problem.m {
                    return Err(Error::DimensionMismatch { expected: problem.m, got: p.x.len() });
                }
                if p.y.len() != problem.n {
                    return Err(Error::DimensionMismatch { expected: problem.n, got: p.y.len() });
                }
                p.clone()
            }
            None => {
                let x = problem.sample_x(&mut rng);
                let y = problem.sample_y(&mut rng);
                SaddlePair::new(x, y)
            }
        };
        let (sigma0_x, sigma0_y) = match config.initial_sigma {
            Some(s) => (s, s),
            None => (problem.init_x.quarter_width(), problem.init_y.quarter_width()),
        };
        let eta = match config.eta_mode {
            EtaMode::Adapt => 1.0,
            EtaMode::Fixed(e) => e,
        };
        Ok(Self {
            eval: Evaluator {
                problem,
                calls: Calls::new(config.adapt.budget),
            },
            theta_x: OracleState::new(problem.m, sigma0_x),
            theta_y: OracleState::new(problem.n, sigma0_y),
            sigma0_x,
            sigma0_y,
            config,
            rng,
            pair,
            adaptive: AdaptiveState::new(eta),
            iterations: 0,
            epochs: 0,
            restarts: 0,
            oracle_reported: 0,
            hit: None,
            trace: Vec::new(),
        })
    }

    pub fn pair(&self) -> &SaddlePair {
        &self.pair
    }

    pub fn adaptive(&self) -> &AdaptiveState {
        &self.adaptive
    }

    pub fn oracle_states(&self) -> (&OracleState, &OracleState) {
        (&self.theta_x, &self.theta_y)
    }

    pub fn f_calls(&self) -> u64 {
        self.eval.calls.used()
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    pub fn hit(&self) -> Option<ThresholdHit> {
        self.hit
    }

    fn problem(&self) -> &'p MinimaxProblem {
        self.eval.problem
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            pair: self.pair.clone(),
            theta_x: self.theta_x.clone(),
            theta_y: self.theta_y.clone(),
        }
    }

    fn restore(&mut self, snap: Snapshot) {
        self.pair = snap.pair;
        self.theta_x = snap.theta_x;
        self.theta_y = snap.theta_y;
    }

    fn check_target(&mut self) -> bool {
        if self.hit.is_some() {
            return true;
        }
        let Some(target) = self.config.target else {
            return false;
        };
        match self.problem().closed_form_suboptimality(&self.pair.x, &self.pair.y) {
            Some(g) if g <= target => {
                self.hit = Some(ThresholdHit {
                    f_calls: self.f_calls(),
                    iterations: self.iterations,
                    epoch: self.epochs,
                });
                true
            }
            _ => false,
        }
    }

    /// Runs `n_step` iterations at rate `eta_c`, starting from the epoch
    /// snapshot `start`. The pair and oracle states are updated in place, so a
    /// budget error leaves the progress made so far.
    fn inner_epoch(&mut self, eta_c: f64, n_step: usize, start: &Snapshot) -> Result<EpochResult> {
        let adapt = matches!(self.config.eta_mode, EtaMode::Adapt);
        let probes = self.config.adapt.use_random_probes;
        let d_y_min = self.config.adapt.d_y_min;
        let window = self.config.adapt.b_eta.floor() as usize;
        let calls_at_start = self.f_calls();
        let problem = self.problem();

        let mut x_tilde = self.pair.x.clone();
        let mut y_tilde = self.pair.y.clone();
        let mut f_trace = Vec::with_capacity(n_step);
        let mut early_break = false;
        let mut target_hit = false;

        for s in 1..=n_step {
            let x = self.pair.x.clone();
            let y = self.pair.y.clone();
            let ev = &self.eval;
            let archive = &self.adaptive.archive_y;

            // fall back to the current point when the previous oracle output is worse
            let fy_xt = ev.f_archive(archive, &x_tilde, &y)?;
            let mut hx_ref = fy_xt;
            if x_tilde != x {
                let fy_x = ev.f_archive(archive, &x, &y)?;
                if fy_xt > fy_x {
                    x_tilde = x.clone();
                    self.theta_x = start.theta_x.clone();
                    hx_ref = fy_x;
                }
            }
            let f_yt = ev.f(&x, &y_tilde)?;
            let mut hy_ref = -f_yt;
            if y_tilde != y {
                let f_xy = ev.f(&x, &y)?;
                if f_yt < f_xy {
                    y_tilde = y.clone();
                    self.theta_y = start.theta_y.clone();
                    hy_ref = -f_xy;
                }
            }

            ev.calls.in_oracle.set(true);
            let res_x = run_oracle(
                &self.config.oracle_x,
                |z: &Vector| ev.f_archive(archive, z, &y),
                |z: &Vector| ev.grad_x_archive(archive, z, &y),
                &x_tilde,
                hx_ref,
                &mut self.theta_x,
                &mut self.rng,
            );
            let res_x = match res_x {
                Ok(r) => r,
                Err(e) => {
                    ev.calls.in_oracle.set(false);
                    return Err(e);
                }
            };
            let res_y = run_oracle(
                &self.config.oracle_y,
                |z: &Vector| ev.f(&x, z).map(|v| -v),
                |z: &Vector| ev.grad_y(&x, z).map(|g| -g),
                &y_tilde,
                hy_ref,
                &mut self.theta_y,
                &mut self.rng,
            );
            ev.calls.in_oracle.set(false);
            let res_y = res_y?;
            self.oracle_reported += res_x.f_calls + res_x.grad_calls + res_y.f_calls + res_y.grad_calls;

            x_tilde = problem.repair_x(&res_x.z_out);
            let mut fy_x_tilde = res_x.best_value;
            y_tilde = problem.repair_y(&res_y.z_out);
            let mut f_x_ytilde = -res_y.best_value;

            let mut archive_grew = false;
            if probes {
                let x_probe = problem.probe_box_x().sample(&mut self.rng);
                let v = ev.f_archive(archive, &x_probe, &y)?;
                if v < fy_x_tilde {
                    x_tilde = x_probe;
                    self.theta_x = start.theta_x.clone();
                    fy_x_tilde = v;
                }
                let y_probe = problem.probe_box_y().sample(&mut self.rng);
                let v = ev.f(&x, &y_probe)?;
                if v > f_x_ytilde {
                    let fy_xy = ev.f_archive(archive, &x, &y)?;
                    archive_grew = register_adversary(&mut self.adaptive.archive_y, &y_tilde, f_x_ytilde, fy_xy, d_y_min);
                    y_tilde = y_probe;
                    self.theta_y = start.theta_y.clone();
                    f_x_ytilde = v;
                }
            }
            let archive = &self.adaptive.archive_y;

            // F_s = f_Y(x, ỹ) − f_Y(x̃, y)
            let mut first = f_x_ytilde;
            for yy in archive {
                first = first.max(ev.f(&x, yy)?);
            }
            let second = if archive_grew {
                ev.f_archive(archive, &x_tilde, &y)?
            } else {
                fy_x_tilde
            };
            f_trace.push(first - second);

            self.pair.x = &x + (&x_tilde - &x) * eta_c;
            self.pair.y = &y + (&y_tilde - &y) * eta_c;
            self.iterations += 1;

            if self.check_target() {
                target_hit = true;
                break;
            }
            if adapt && s >= window && strictly_increasing_tail(&f_trace, window.max(1)) {
                early_break = true;
                break;
            }
        }
        Ok(EpochResult {
            f_trace,
            early_break,
            f_calls: self.f_calls() - calls_at_start,
            target_hit,
        })
    }

    fn reinitialize(&mut self) {
        let problem = self.problem();
        self.pair = SaddlePair::new(problem.sample_x(&mut self.rng), problem.sample_y(&mut self.rng));
        self.theta_x = OracleState::new(problem.m, self.sigma0_x);
        self.theta_y = OracleState::new(problem.n, self.sigma0_y);
        if matches!(self.config.eta_mode, EtaMode::Adapt) {
            self.adaptive.eta = 1.0;
        }
        self.adaptive.gamma_tilde = 0.0;
    }

    /// One outer iteration with a freshly proposed candidate rate.
    pub fn step_epoch(&mut self) -> Result<EpochReport> {
        let eta_c = match self.config.eta_mode {
            EtaMode::Adapt => propose_eta(self.adaptive.eta, &self.config.adapt, &mut self.rng),
            EtaMode::Fixed(e) => e,
        };
        self.step_epoch_with(eta_c)
    }

    /// One outer iteration with the given candidate rate.
    pub fn step_epoch_with(&mut self, eta_c: f64) -> Result<EpochReport> {
        let start = self.snapshot();
        let n_step = n_steps(eta_c, &self.config.adapt);
        let inner = self.inner_epoch(eta_c, n_step, &start)?;
        self.epochs += 1;

        let mut slope = None;
        let mut reverted = false;
        if matches!(self.config.eta_mode, EtaMode::Adapt) && inner.f_trace.len() >= 2 && !inner.target_hit {
            let logs: Vec<f64> = inner.f_trace.iter().map(|f| f.max(f64::MIN_POSITIVE).ln()).collect();
            let (gamma_c, sd) = ols_slope(&logs)?;
            slope = Some((gamma_c, sd));
            let p = &self.config.adapt;
            let st = &mut self.adaptive;
            if st.gamma_tilde >= 0.0 && gamma_c >= 0.0 {
                st.eta = (st.eta / p.c_eta.powi(3)).max(p.eta_min);
            } else if gamma_c <= st.gamma_tilde || st.eta == eta_c {
                st.eta = eta_c;
                st.gamma_tilde = gamma_c;
            }
            if gamma_c - 2.0 * sd > 0.0 {
                self.restore(start);
                reverted = true;
            }
        }

        let f_last = inner.f_trace.last().copied().unwrap_or(f64::NAN);
        let g_tol = self.config.adapt.g_tol;
        let mut restarted = false;
        if g_tol > 0.0 && f_last <= g_tol && !inner.target_hit {
            let d = self.config.adapt.d_y_min;
            self.adaptive.archive_x.push(self.pair.x.clone());
            if is_separated(&self.adaptive.archive_y, &self.pair.y, d) {
                self.adaptive.archive_y.push(self.pair.y.clone());
            }
            self.reinitialize();
            self.restarts += 1;
            restarted = true;
        }

        self.trace.push(TraceRecord {
            trial: 0,
            epoch: self.epochs,
            f_calls_cum: self.f_calls(),
            eta: self.adaptive.eta,
            eta_candidate: eta_c,
            gamma_tilde: self.adaptive.gamma_tilde,
            f_last,
            g_closed_form: self.problem().closed_form_suboptimality(&self.pair.x, &self.pair.y),
            x_norm: self.pair.x.norm(),
            y_norm: self.pair.y.norm(),
            restarts: self.restarts,
        });

        Ok(EpochReport {
            eta_candidate: eta_c,
            n_step,
            inner,
            slope,
            reverted,
            restarted,
        })
    }

    /// Runs epochs until the budget is spent or the target is met.
    pub fn run(mut self) -> Result<RunResult> {
        let mut budget_exhausted = false;
        if !self.check_target() {
            loop {
                match self.step_epoch() {
                    Ok(report) if report.inner.target_hit => break,
                    Ok(_) => {}
                    Err(Error::BudgetExhausted(_)) => {
                        budget_exhausted = true;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        self.finish(budget_exhausted)
    }

    /// Picks `argmin_{x' ∈ X ∪ {x}} f_Y(x', y)`, earliest first on ties.
    fn finish(self, budget_exhausted: bool) -> Result<RunResult> {
        let problem = self.problem();
        let archive = &self.adaptive.archive_y;
        let y = &self.pair.y;
        let mut final_calls = 0u64;
        let mut best: Option<(f64, &Vector)> = None;
        for cand in self.adaptive.archive_x.iter().chain(std::iter::once(&self.pair.x)) {
            if self.adaptive.archive_x.is_empty() {
                best = Some((f64::NAN, cand));
                break;
            }
            final_calls += archive.len() as u64 + 1;
            let v = worst_over_archive(problem, archive, cand, y)?;
            if best.is_none_or(|(b, _)| v < b) {
                best = Some((v, cand));
            }
        }
        let x_best = best.map(|(_, x)| x.clone()).unwrap_or_else(|| self.pair.x.clone());
        self.eval.calls.unbudgeted.set(final_calls);

        Ok(RunResult {
            x_best,
            f_calls: self.eval.calls.used(),
            calls: CallStats {
                oracle: self.eval.calls.oracle.get(),
                bookkeeping: self.eval.calls.bookkeeping.get(),
                final_selection: self.eval.calls.unbudgeted.get(),
                oracle_reported: self.oracle_reported,
            },
            pair: self.pair,
            adaptive: self.adaptive,
            iterations: self.iterations,
            epochs: self.epochs,
            restarts: self.restarts,
            hit: self.hit,
            budget_exhausted,
            trace: self.trace,
        })
    }
}

/// Runs the full adaptive loop on `problem`.
pub fn adapt_and_run(problem: &MinimaxProblem, config: SolverConfig, rng: Rng) -> Result<RunResult> {
    SaddleOptimizer::new(problem, config, rng)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{QuadraticSpec, TestFunction};

    fn v(xs: &[f64]) -> Vector {
        Vector::from_vec(xs.to_vec())
    }

    #[test]
    fn proposal_clamps() {
        let p = AdaptParams::default();
        let mut rng = Rng::new(1);
        for _ in 0..100 {
            let e = propose_eta(1.0, &p, &mut rng);
            assert!(e == 1.0 || e == 1.0 / 1.1);
            let e = propose_eta(p.eta_min, &p, &mut rng);
            assert!(e == p.eta_min || e == p.eta_min * 1.1);
        }
    }

    #[test]
    fn proposal_frequencies_are_uniform() {
        let p = AdaptParams::default();
        let mut rng = Rng::new(2);
        let mut counts = [0usize; 3];
        let n = 10_000;
        for _ in 0..n {
            let e = propose_eta(0.5, &p, &mut rng);
            if e == 0.5 * 1.1 {
                counts[0] += 1;
            } else if e == 0.5 {
                counts[1] += 1;
            } else {
                assert_eq!(e, 0.5 / 1.1);
                counts[2] += 1;
            }
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 1.0 / 3.0).abs() <= 0.02, "{counts:?}");
        }
    }

    #[test]
    fn epoch_lengths() {
        let p = AdaptParams::default();
        assert_eq!(n_steps(1.0, &p), 6);
        assert_eq!(n_steps(0.5, &p), 7);
        assert_eq!(n_steps(0.01, &p), 105);
    }

    #[test]
    fn archive_max() {
        let p = TestFunction::F6.problem(1, 1).unwrap();
        let x = v(&[0.3]);
        let y = v(&[0.0]);
        assert_eq!(worst_over_archive(&p, &[], &x, &y).unwrap(), p.eval(&x, &y));
        let archive = vec![v(&[1.0]), v(&[-1.0])];
        assert_eq!(worst_over_archive(&p, &archive, &x, &y).unwrap(), 0.0);
        let smaller = worst_over_archive(&p, &archive[..1], &x, &y).unwrap();
        assert!(worst_over_archive(&p, &archive, &x, &y).unwrap() >= smaller);
    }

    #[test]
    fn adversary_registration_rules() {
        let mut archive = Vec::new();
        assert!(register_adversary(&mut archive, &v(&[1.0]), 0.5, 0.5, 0.1));
        // too close to an archived point
        assert!(!register_adversary(&mut archive, &v(&[1.05]), 0.5, 0.5, 0.1));
        // not at least as bad as the current worst case
        assert!(!register_adversary(&mut archive, &v(&[3.0]), 0.4, 0.5, 0.1));
        assert!(register_adversary(&mut archive, &v(&[3.0]), 0.6, 0.5, 0.1));
        assert_eq!(archive.len(), 2);
    }

    #[test]
    fn break_rule_window() {
        assert!(strictly_increasing_tail(&[1.0, 2.0, 3.0, 4.0, 5.0], 5));
        assert!(!strictly_increasing_tail(&[1.0, 2.0, 2.0, 4.0, 5.0], 5));
        assert!(!strictly_increasing_tail(&[1.0, 2.0, 3.0, 4.0], 5));
        assert!(strictly_increasing_tail(&[9.0, 1.0, 2.0, 3.0, 4.0, 5.0], 5));
    }

    fn exact_config(eta: EtaMode, pair: SaddlePair) -> SolverConfig {
        // f1 with a = c = 1: one unit gradient step is the exact minimizer
        SolverConfig {
            eta_mode: eta,
            oracle_x: OracleKind::ScaledGradientStep { kappa: 1.0 },
            oracle_y: OracleKind::ScaledGradientStep { kappa: 1.0 },
            initial_pair: Some(pair),
            ..SolverConfig::default()
        }
    }

    #[test]
    fn exact_oracle_first_step_on_f1() {
        let p = TestFunction::F1(QuadraticSpec::default()).problem(1, 1).unwrap();
        let cfg = exact_config(EtaMode::Fixed(0.5), SaddlePair::new(v(&[1.0]), v(&[1.0])));
        let mut opt = SaddleOptimizer::new(&p, cfg, Rng::new(0)).unwrap();
        let start = opt.snapshot();
        let r = opt.inner_epoch(0.5, 1, &start).unwrap();
        assert_eq!(r.f_trace, vec![2.0]);
        assert_eq!(opt.pair(), &SaddlePair::new(v(&[0.0]), v(&[1.0])));
    }

    #[test]
    fn early_break_at_window() {
        // at η = 1 and b = 2, f1's error grows every step, so F strictly increases
        let spec = QuadraticSpec::new(1.0, 2.0, 1.0).unwrap();
        let p = TestFunction::F1(spec).problem(1, 1).unwrap();
        let mut cfg = exact_config(EtaMode::Adapt, SaddlePair::new(v(&[1.0]), v(&[0.5])));
        cfg.oracle_x = OracleKind::ScaledGradientStep { kappa: 1.0 };
        let mut opt = SaddleOptimizer::new(&p, cfg, Rng::new(0)).unwrap();
        let report = opt.step_epoch_with(1.0).unwrap();
        assert_eq!(report.n_step, 6);
        assert!(report.inner.early_break);
        assert_eq!(report.inner.f_trace.len(), 5);
        assert!(report.inner.f_trace.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn diverging_epoch_is_reverted_exactly() {
        let spec = QuadraticSpec::new(1.0, 2.0, 1.0).unwrap();
        let p = TestFunction::F1(spec).problem(2, 2).unwrap();
        let cfg = exact_config(EtaMode::Adapt, SaddlePair::new(v(&[1.0, -0.5]), v(&[0.5, 2.0])));
        let mut opt = SaddleOptimizer::new(&p, cfg, Rng::new(0)).unwrap();
        let before = opt.snapshot();
        let report = opt.step_epoch_with(1.0).unwrap();
        let (slope, sd) = report.slope.unwrap();
        assert!(slope - 2.0 * sd > 0.0);
        assert!(report.reverted);
        assert_eq!(opt.pair(), &before.pair);
        assert_eq!(opt.oracle_states(), (&before.theta_x, &before.theta_y));
        // the rollback leaves the rate decrease in place
        assert_eq!(opt.adaptive().eta, 1.0 / 1.1f64.powi(3));
    }

    #[test]
    fn zero_tolerance_disables_restart() {
        let p = TestFunction::F1(QuadraticSpec::default()).problem(2, 2).unwrap();
        let cfg = SolverConfig {
            adapt: AdaptParams {
                budget: 20_000,
                ..AdaptParams::default()
            },
            ..SolverConfig::default()
        };
        let r = adapt_and_run(&p, cfg, Rng::new(3)).unwrap();
        assert!(r.budget_exhausted);
        assert_eq!(r.restarts, 0);
        assert!(r.adaptive.archive_x.is_empty());
        assert_eq!(r.x_best, r.pair.x);
    }

    #[test]
    fn restart_archives_candidates() {
        let p = TestFunction::F1(QuadraticSpec::default()).problem(2, 2).unwrap();
        let cfg = SolverConfig {
            adapt: AdaptParams {
                budget: 60_000,
                g_tol: 1e-3,
                d_y_min: 1e-2,
                ..AdaptParams::default()
            },
            ..SolverConfig::default()
        };
        let r = adapt_and_run(&p, cfg, Rng::new(4)).unwrap();
        assert!(r.restarts >= 1);
        assert_eq!(r.adaptive.archive_x.len() as u64, r.restarts);
        let ys = &r.adaptive.archive_y;
        for i in 0..ys.len() {
            for j in 0..i {
                assert!((&ys[i] - &ys[j]).norm() > 1e-2);
            }
        }
        // the returned point is the best candidate under the archive max
        let y = &r.pair.y;
        let best = worst_over_archive(&p, ys, &r.x_best, y).unwrap();
        for x in r.adaptive.archive_x.iter().chain(std::iter::once(&r.pair.x)) {
            assert!(best <= worst_over_archive(&p, ys, x, y).unwrap());
        }
        assert!(r.calls.final_selection > 0);
    }

    #[test]
    fn eta_stays_in_range_and_accounting_adds_up() {
        let p = TestFunction::F1(QuadraticSpec::default()).problem(3, 3).unwrap();
        let cfg = SolverConfig {
            adapt: AdaptParams {
                budget: 200_000,
                ..AdaptParams::default()
            },
            target: Some(1e-8),
            ..SolverConfig::default()
        };
        let r = adapt_and_run(&p, cfg, Rng::new(5)).unwrap();
        let eta_min = AdaptParams::default().eta_min;
        for rec in &r.trace {
            assert!(rec.eta >= eta_min && rec.eta <= 1.0);
            assert!(rec.eta_candidate >= eta_min && rec.eta_candidate <= 1.0);
        }
        assert!(r.trace.windows(2).all(|w| w[0].f_calls_cum <= w[1].f_calls_cum));
        assert_eq!(r.f_calls, r.calls.oracle + r.calls.bookkeeping);
        // empty archive: one f-call per oracle evaluation
        assert!(r.adaptive.archive_y.is_empty());
        assert_eq!(r.calls.oracle, r.calls.oracle_reported);
        assert!(r.hit.is_some());
    }

    #[test]
    fn probes_keep_archive_separated() {
        let p = TestFunction::F7.problem(2, 2).unwrap();
        let cfg = SolverConfig {
            adapt: AdaptParams {
                budget: 100_000,
                use_random_probes: true,
                d_y_min: 0.5,
                ..AdaptParams::default()
            },
            ..SolverConfig::default()
        };
        let r = adapt_and_run(&p, cfg, Rng::new(6)).unwrap();
        let ys = &r.adaptive.archive_y;
        assert!(!ys.is_empty());
        for i in 0..ys.len() {
            for j in 0..i {
                assert!((&ys[i] - &ys[j]).norm() > 0.5);
            }
        }
        for rec in &r.trace {
            assert!(rec.eta >= 1e-4 && rec.eta <= 1.0);
        }
        assert_eq!(r.f_calls, r.calls.oracle + r.calls.bookkeeping);
        let dom = p.domain_x.as_ref().unwrap();
        assert!(dom.contains(&r.pair.x));
    }

    #[test]
    fn gradient_oracles_converge_on_f1() {
        let p = TestFunction::F1(QuadraticSpec::default()).problem(4, 4).unwrap();
        let cfg = SolverConfig {
            eta_mode: EtaMode::Fixed(0.5),
            oracle_x: OracleKind::Gradient { max_iters: 5 },
            oracle_y: OracleKind::Gradient { max_iters: 5 },
            target: Some(1e-5),
            ..SolverConfig::default()
        };
        let r = adapt_and_run(&p, cfg, Rng::new(7)).unwrap();
        assert!(r.hit.is_some());
    }

    #[test]
    fn first_order_oracle_needs_gradient() {
        let b = crate::problems::Bounds::uniform(1, -1.0, 1.0).unwrap();
        let p = MinimaxProblem::new("plain", |x: &Vector, y: &Vector| x[0] * y[0], b.clone(), b);
        let cfg = SolverConfig {
            oracle_x: OracleKind::Gradient { max_iters: 5 },
            ..SolverConfig::default()
        };
        assert!(SaddleOptimizer::new(&p, cfg, Rng::new(0)).is_err());
    }

    #[test]
    fn runs_are_deterministic() {
        let p = TestFunction::F3.problem(3, 2).unwrap();
        let cfg = SolverConfig {
            adapt: AdaptParams {
                budget: 30_000,
                use_random_probes: true,
                ..AdaptParams::default()
            },
            ..SolverConfig::default()
        };
        let a = adapt_and_run(&p, cfg.clone(), Rng::new(8)).unwrap();
        let b = adapt_and_run(&p, cfg, Rng::new(8)).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.x_best, b.x_best);
    }
}
