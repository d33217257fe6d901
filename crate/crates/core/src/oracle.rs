//! Approximate minimization oracles.
//!
//! An oracle receives an objective `h`, a reference point and (for the
//! evolution strategy) a persistent strategy state, and returns a point that
//! is no worse than the reference.
//!
//! [`cmaes_minimize`] is a (1+1)-CMA-ES with the simplified 1/5 success rule
//! and active covariance updates on a Cholesky-like factor `A` together with
//! its inverse. It stops after a fixed number of successful steps rather than a
//! fixed number of iterations. [`gd_minimize`] is a few steps of gradient
//! descent with Armijo backtracking for problems that expose a gradient.

use crate::error::{Error, Result};
use crate::numerics::{rank_one_pair_update_in_place, Matrix, Rng, Vector};

/// Strategy parameters shared across oracle calls: step size and covariance
/// factor with its inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleState {
    pub sigma: f64,
    pub a: Matrix,
    pub a_inv: Matrix,
}

impl OracleState {
    pub fn new(dim: usize, sigma: f64) -> Self {
        Self {
            sigma,
            a: Matrix::identity(dim, dim),
            a_inv: Matrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmaesParams {
    pub tau_es: usize,
    pub tau_es_prime: usize,
    /// Minimal step size; the call stops once `sigma` drops below it.
    pub sigma_min_bar: f64,
    /// Hard cap on iterations per call, as a multiple of the dimension.
    pub max_iters_per_dim: usize,
}

impl Default for CmaesParams {
    fn default() -> Self {
        Self {
            tau_es: 5,
            tau_es_prime: 5,
            sigma_min_bar: 0.0,
            max_iters_per_dim: 10_000,
        }
    }
}

impl CmaesParams {
    /// Successful steps after which a call returns.
    pub fn target_successes(&self, dim: usize) -> usize {
        self.tau_es * dim + self.tau_es_prime
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub z_out: Vector,
    /// `h(z_out)`.
    pub best_value: f64,
    /// Evaluations of `h` made by this call.
    pub f_calls: u64,
    /// Gradient evaluations made by this call.
    pub grad_calls: u64,
    pub iterations: usize,
    pub successes: usize,
    /// The step size fell below the minimal step size.
    pub stopped_on_sigma: bool,
}

/// Constants of the (1+1)-CMA-ES for dimension `dim`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmaesConstants {
    /// Step-size factor applied on success.
    pub c: f64,
    pub c_p: f64,
    pub c_c: f64,
    pub c_cov_plus: f64,
    pub c_cov_minus: f64,
    pub p_thre: f64,
}

impl CmaesConstants {
    pub fn new(dim: usize) -> Self {
        let l = dim as f64;
        Self {
            c: (2.0 / (2.0 + l)).exp(),
            c_p: 1.0 / 12.0,
            c_c: 2.0 / (l + 2.0),
            c_cov_plus: 2.0 / (l * l + 6.0),
            c_cov_minus: 0.4 / (l.powf(1.6) + 1.0),
            p_thre: 0.44,
        }
    }
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite("objective"))
    }
}

/// Runs the (1+1)-CMA-ES from `z_ref` until it has improved the solution
/// `tau_es·ℓ + tau_es'` times, or the step size drops below
/// `params.sigma_min_bar`, or the iteration cap is hit.
///
/// `h_ref` is `h(z_ref)` when the caller already knows it; otherwise it is
/// evaluated here. `state` is updated in place and its returned step size is
/// never below `sigma_min_bar`. Errors returned by `h` abort the call.
pub fn cmaes_minimize<H>(
    mut h: H,
    z_ref: &Vector,
    h_ref: Option<f64>,
    state: &mut OracleState,
    params: &CmaesParams,
    rng: &mut Rng,
) -> Result<OracleResult>
where
    H: FnMut(&Vector) -> Result<f64>,
{
    let dim = z_ref.len();
    if dim == 0 {
        return Err(Error::InvalidArgument("empty search point".into()));
    }
    if state.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: state.dim(),
        });
    }
    if !(state.sigma > 0.0) || !state.sigma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "step size must be positive, got {}",
            state.sigma
        )));
    }
    let k = CmaesConstants::new(dim);
    let sqrt_dim = (dim as f64).sqrt();
    let target = params.target_successes(dim);
    let max_iters = params.max_iters_per_dim.saturating_mul(dim);

    let mut f_calls = 0u64;
    let mut z = z_ref.clone();
    let mut hz = match h_ref {
        Some(v) => finite(v)?,
        None => {
            f_calls += 1;
            finite(h(&z)?)?
        }
    };

    // per-call locals; only (sigma, A, A_inv) persist between calls
    let mut p = Vector::zeros(dim);
    let mut p_succ = 0.5;
    let mut history = [hz, f64::INFINITY, f64::INFINITY, f64::INFINITY, f64::INFINITY];
    let mut successes = 0usize;
    let mut iterations = 0usize;
    let mut stopped_on_sigma = false;

    let mut normal = Vector::zeros(dim);
    while successes < target {
        if state.sigma < params.sigma_min_bar {
            stopped_on_sigma = true;
            break;
        }
        if iterations >= max_iters {
            break;
        }
        for v in normal.iter_mut() {
            *v = rng.standard_normal();
        }
        // (z' − z) / σ
        let step = &state.a * &normal;
        let candidate = &z + &step * state.sigma;
        f_calls += 1;
        let h_cand = finite(h(&candidate)?)?;

        if h_cand <= history[0] {
            history.rotate_right(1);
            history[0] = h_cand;
            p_succ = (1.0 - k.c_p) * p_succ + k.c_p;
            let c_cov = if p_succ > k.p_thre {
                p *= 1.0 - k.c_c;
                k.c_cov_plus * (1.0 - k.c_c * (2.0 - k.c_c))
            } else {
                p = &p * (1.0 - k.c_c) + &step * (k.c_c * (2.0 - k.c_c)).sqrt();
                k.c_cov_plus
            };
            let w = &state.a_inv * &p;
            let w_sq = w.norm_squared();
            if w_sq > 0.0 {
                let a = (1.0 - c_cov).sqrt();
                let b = a / w_sq * ((1.0 + c_cov / (1.0 - c_cov) * w_sq).sqrt() - 1.0);
                rank_one_pair_update_in_place(&mut state.a, &mut state.a_inv, &w, a, b)?;
            }
            state.sigma *= k.c;
            z = candidate;
            hz = h_cand;
            successes += 1;
        } else {
            p_succ *= 1.0 - k.c_p;
            if h_cand > history[4] && p_succ <= k.p_thre {
                let w = &state.a_inv * &step;
                let w_sq = w.norm_squared();
                if w_sq > 0.0 {
                    let c_cov = if k.c_cov_minus * (2.0 * w_sq - 1.0) <= 1.0 {
                        k.c_cov_minus
                    } else {
                        1.0 / (2.0 * w_sq - 1.0)
                    };
                    let shrink = 1.0 - c_cov / (1.0 + c_cov) * w_sq;
                    assert!(
                        shrink >= 0.5 - 1e-12,
                        "active update would shrink below 1/2: {shrink}"
                    );
                    let a = (1.0 + c_cov).sqrt();
                    let b = a / w_sq * (shrink.sqrt() - 1.0);
                    rank_one_pair_update_in_place(&mut state.a, &mut state.a_inv, &w, a, b)?;
                }
            }
            state.sigma *= k.c.powf(-0.25);
        }
        iterations += 1;

        if iterations.is_multiple_of(dim) {
            let norm = state.a.norm();
            let scale = norm / sqrt_dim;
            state.sigma *= scale;
            state.a /= scale;
            state.a_inv *= scale;
            p /= scale;
        }
        if state.sigma < params.sigma_min_bar {
            stopped_on_sigma = true;
            break;
        }
    }
    state.sigma = state.sigma.max(params.sigma_min_bar);

    Ok(OracleResult {
        z_out: z,
        best_value: hz,
        f_calls,
        grad_calls: 0,
        iterations,
        successes,
        stopped_on_sigma,
    })
}

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

/// At most `max_iters` gradient steps with backtracking (unit initial step,
/// halving, Armijo constant `1e-4`). Only decreasing steps are accepted.
pub fn gd_minimize<H, G>(
    mut h: H,
    mut grad_h: G,
    z_ref: &Vector,
    h_ref: Option<f64>,
    max_iters: usize,
) -> Result<OracleResult>
where
    H: FnMut(&Vector) -> Result<f64>,
    G: FnMut(&Vector) -> Result<Vector>,
{
    let mut f_calls = 0u64;
    let mut grad_calls = 0u64;
    let mut z = z_ref.clone();
    let mut hz = match h_ref {
        Some(v) => finite(v)?,
        None => {
            f_calls += 1;
            finite(h(&z)?)?
        }
    };
    let mut iterations = 0;
    let mut successes = 0;
    while iterations < max_iters {
        iterations += 1;
        let g = grad_h(&z)?;
        grad_calls += 1;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        let g_sq = g.norm_squared();
        if g_sq == 0.0 {
            break;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let cand = &z - &g * t;
            f_calls += 1;
            let hc = h(&cand)?;
            if hc.is_finite() && hc <= hz - ARMIJO * t * g_sq {
                z = cand;
                hz = hc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        successes += 1;
    }
    Ok(OracleResult {
        z_out: z,
        best_value: hz,
        f_calls,
        grad_calls,
        iterations,
        successes,
        stopped_on_sigma: false,
    })
}
