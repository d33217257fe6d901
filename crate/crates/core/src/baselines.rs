//! Comparison methods: worst-case sampling with (1+1)-CMA-ES, and simultaneous
//! gradient descent-ascent.

use std::cell::Cell;

use crate::error::{Error, Result};
use crate::numerics::{Rng, Vector};
use crate::oracle::{cmaes_minimize, CmaesParams, OracleState};
use crate::problems::MinimaxProblem;
use crate::saddle::SaddlePair;

/// A fixed set of `y` samples drawn once per run.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledWorstCase {
    pub samples: Vec<Vector>,
}

impl SampledWorstCase {
    pub fn draw(problem: &MinimaxProblem, n_y: usize, rng: &mut Rng) -> Result<Self> {
        if n_y == 0 {
            return Err(Error::InvalidArgument("N_y must be at least 1".into()));
        }
        let bx = problem.probe_box_y();
        Ok(Self {
            samples: (0..n_y).map(|_| bx.sample(rng)).collect(),
        })
    }

    pub fn from_samples(samples: Vec<Vector>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("N_y must be at least 1".into()));
        }
        Ok(Self { samples })
    }

    pub fn n_y(&self) -> usize {
        self.samples.len()
    }

    /// `max_k f(x, y^k)`.
    pub fn eval(&self, problem: &MinimaxProblem, x: &Vector) -> f64 {
        self.samples
            .iter()
            .map(|y| problem.eval(x, y))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct SampledRunResult {
    pub best_x: Vector,
    pub best_value: f64,
    /// Solutions recorded at each restart.
    pub recorded: Vec<Vector>,
    pub worst_case: SampledWorstCase,
    pub f_calls: u64,
    pub restarts: u64,
}

/// Minimizes `max_k f(x, y^k)` over a fixed sample with restarts whenever the
/// step size falls below `sigma_min_bar`, until `budget` f-calls are spent.
pub fn cmaes_ny_run(
    problem: &MinimaxProblem,
    n_y: usize,
    budget: u64,
    sigma_min_bar: f64,
    rng: &mut Rng,
) -> Result<SampledRunResult> {
    let worst_case = SampledWorstCase::draw(problem, n_y, rng)?;
    cmaes_ny_run_with(problem, worst_case, budget, sigma_min_bar, rng)
}

/// [`cmaes_ny_run`] on a given sample set.
pub fn cmaes_ny_run_with(
    problem: &MinimaxProblem,
    worst_case: SampledWorstCase,
    budget: u64,
    sigma_min_bar: f64,
    rng: &mut Rng,
) -> Result<SampledRunResult> {
    if !(sigma_min_bar > 0.0) {
        return Err(Error::InvalidArgument("sigma_min_bar must be positive".into()));
    }
    let n_y = worst_case.n_y() as u64;
    let used = Cell::new(0u64);
    let h = |z: &Vector| -> Result<f64> {
        if used.get() + n_y > budget {
            return Err(Error::BudgetExhausted(budget));
        }
        used.set(used.get() + n_y);
        let v = worst_case.eval(problem, z);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite("objective"))
        }
    };
    let params = CmaesParams {
        sigma_min_bar,
        ..CmaesParams::default()
    };
    let sigma0 = problem.init_x.quarter_width();

    let mut recorded = Vec::new();
    let mut x = problem.sample_x(rng);
    let mut state = OracleState::new(problem.m, sigma0);
    loop {
        match cmaes_minimize(h, &x, None, &mut state, &params, rng) {
            Ok(r) => {
                x = problem.repair_x(&r.z_out);
                if r.stopped_on_sigma {
                    recorded.push(x.clone());
                    x = problem.sample_x(rng);
                    state = OracleState::new(problem.m, sigma0);
                }
            }
            Err(Error::BudgetExhausted(_)) => break,
            Err(e) => return Err(e),
        }
    }

    let mut best: Option<(f64, &Vector)> = None;
    for cand in recorded.iter().chain(std::iter::once(&x)) {
        let v = worst_case.eval(problem, cand);
        if best.is_none_or(|(b, _)| v < b) {
            best = Some((v, cand));
        }
    }
    let (best_value, best_x) = best.map(|(v, x)| (v, x.clone())).expect("at least the current point");
    for r in &recorded {
        assert!(best_value <= worst_case.eval(problem, r));
    }
    Ok(SampledRunResult {
        best_x,
        best_value,
        restarts: recorded.len() as u64,
        recorded,
        worst_case,
        f_calls: used.get(),
    })
}

/// One simultaneous gradient descent-ascent step, `(x, y) + η(−∇_x f, ∇_y f)`,
/// repaired into the domain.
pub fn gda_step(problem: &MinimaxProblem, p: &SaddlePair, eta: f64) -> Result<SaddlePair> {
    let (gx, gy) = problem
        .gradient(&p.x, &p.y)
        .ok_or_else(|| Error::InvalidArgument(format!("problem {} has no gradient", problem.name)))?;
    if gx.iter().chain(gy.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    Ok(SaddlePair::new(
        problem.repair_x(&(&p.x - gx * eta)),
        problem.repair_y(&(&p.y + gy * eta)),
    ))
}

/// Runs `iters` steps of [`gda_step`] and returns all `iters + 1` iterates.
pub fn gda_run(problem: &MinimaxProblem, start: &SaddlePair, eta: f64, iters: usize) -> Result<Vec<SaddlePair>> {
    let mut traj = Vec::with_capacity(iters + 1);
    traj.push(start.clone());
    for _ in 0..iters {
        let next = gda_step(problem, traj.last().expect("nonempty"), eta)?;
        traj.push(next);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{Bounds, QuadraticSpec, TestFunction};

    fn v(xs: &[f64]) -> Vector {
        Vector::from_vec(xs.to_vec())
    }

    fn norm(p: &SaddlePair) -> f64 {
        (p.x.norm_squared() + p.y.norm_squared()).sqrt()
    }

    #[test]
    fn gda_contracts_on_f1() {
        let p = TestFunction::F1(QuadraticSpec::default()).problem(1, 1).unwrap();
        let traj = gda_run(&p, &SaddlePair::new(v(&[1.0]), v(&[1.0])), 0.1, 100).unwrap();
        assert_eq!(traj.len(), 101);
        assert!(traj.windows(2).all(|w| norm(&w[1]) < norm(&w[0])));
    }

    #[test]
    fn gda_zero_rate_is_constant() {
        let p = TestFunction::F1(QuadraticSpec::default()).problem(2, 2).unwrap();
        let s = SaddlePair::new(v(&[1.0, 2.0]), v(&[-1.0, 0.5]));
        let traj = gda_run(&p, &s, 0.0, 10).unwrap();
        assert!(traj.iter().all(|q| q == &s));
    }

    #[test]
    fn gda_bounded_on_f6() {
        let p = TestFunction::F6.problem(1, 1).unwrap();
        let traj = gda_run(&p, &SaddlePair::new(v(&[1.0]), v(&[1.0])), 0.1, 1000).unwrap();
        let max = traj.iter().map(norm).fold(0.0, f64::max);
        assert!(max <= 6.0 * 2f64.sqrt());
        assert!(traj.iter().all(|q| q.x.iter().chain(q.y.iter()).all(|c| c.is_finite())));
    }

    #[test]
    fn gda_rejects_nan_gradient() {
        let b = Bounds::uniform(1, -1.0, 1.0).unwrap();
        let p = MinimaxProblem::new("nan", |x: &Vector, y: &Vector| x[0] * y[0], b.clone(), b)
            .with_gradient(|_x: &Vector, _y: &Vector| (v(&[f64::NAN]), v(&[0.0])));
        let err = gda_run(&p, &SaddlePair::new(v(&[0.5]), v(&[0.5])), 0.1, 3).unwrap_err();
        assert_eq!(err, Error::NonFinite("gradient"));
    }

    #[test]
    fn gda_and_exact_oracle_both_contract_when_decoupled() {
        let spec = QuadraticSpec::new(1.0, 0.0, 1.0).unwrap();
        let p = TestFunction::F1(spec).problem(2, 2).unwrap();
        let s = SaddlePair::new(v(&[1.0, -2.0]), v(&[0.5, 3.0]));
        let gda = gda_run(&p, &s, 0.3, 1).unwrap();
        let ex = crate::theory::exact_oracle_step(&s.x, &s.y, 0.3, &spec);
        assert!(norm(&gda[1]) < norm(&s));
        assert!(norm(&ex) < norm(&s));
    }

    #[test]
    fn single_sample_is_plain_minimization() {
        let p = TestFunction::F1(QuadraticSpec::default()).problem(2, 2).unwrap();
        let y1 = v(&[1.0, -1.0]);
        let wc = SampledWorstCase::from_samples(vec![y1.clone()]).unwrap();
        let r = cmaes_ny_run_with(&p, wc, 20_000, 1e-10, &mut Rng::new(3)).unwrap();
        // argmin_x f(x, y1) = −b/a · y1
        assert!((&r.best_x + &y1).norm() < 1e-6, "{}", r.best_x);
        assert!(r.f_calls <= 20_000);
    }

    #[test]
    fn f5_reaches_global_optimum() {
        let p = TestFunction::F5.problem(2, 2).unwrap();
        let mut rng = Rng::new(9);
        let r = cmaes_ny_run(&p, 100, 100_000, 1e-8, &mut rng).unwrap();
        assert!(r.worst_case.samples.iter().any(|y| y.sum() > 0.0));
        assert!(r.best_x.norm() <= 0.1, "{}", r.best_x);
        for x in &r.recorded {
            assert!(r.best_value <= r.worst_case.eval(&p, x));
        }
    }

    #[test]
    fn restarts_on_small_step() {
        let p = TestFunction::F2.problem(2, 2).unwrap();
        let r = cmaes_ny_run(&p, 5, 50_000, 1e-4, &mut Rng::new(10)).unwrap();
        assert!(r.restarts >= 1);
        assert_eq!(r.recorded.len() as u64, r.restarts);
        assert!(r.f_calls <= 50_000);
    }

    #[test]
    fn rejects_empty_sample() {
        let p = TestFunction::F2.problem(2, 2).unwrap();
        assert!(cmaes_ny_run(&p, 0, 1000, 1e-8, &mut Rng::new(0)).is_err());
    }
}
