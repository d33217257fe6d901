//! Test problems for min-max optimization, box handling by mirroring, and
//! suboptimality measures.
//!
//! The catalog holds the strongly convex-concave quadratic `f1` and the six
//! functions `f2`..`f7` on the box `[-1, 5]^m × [-1, 5]^n`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{Rng, Vector};
use crate::oracle::{cmaes_minimize, CmaesParams, OracleState};
use crate::saddle::SaddlePair;

pub type ObjectiveFn = Arc<dyn Fn(&Vector, &Vector) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&Vector, &Vector) -> (Vector, Vector) + Send + Sync>;
pub type ResponseFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;

/// Lower and upper box of the test functions `f2`..`f7`, also the
/// initialization box of every catalog problem.
pub const BOX_LOWER: f64 = -1.0;
pub const BOX_UPPER: f64 = 5.0;

/// Reflects `z` into `[lower, upper]`: `U − |mod(z − L, 2(U − L)) − (U − L)|`
/// with a nonnegative modulo. Points already inside are returned unchanged.
pub fn mirror(z: f64, lower: f64, upper: f64) -> f64 {
    if (lower..=upper).contains(&z) {
        return z;
    }
    let width = upper - lower;
    let r = (z - lower).rem_euclid(2.0 * width);
    (upper - (r - width).abs()).clamp(lower, upper)
}

/// Derivative of [`mirror`] with respect to its argument (±1, taken as +1 on walls).
fn mirror_slope(z: f64, lower: f64, upper: f64) -> f64 {
    if (lower..=upper).contains(&z) {
        return 1.0;
    }
    let width = upper - lower;
    let r = (z - lower).rem_euclid(2.0 * width);
    if r <= width {
        1.0
    } else {
        -1.0
    }
}

/// Coordinate-wise box.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    lower: Vector,
    upper: Vector,
}

impl Bounds {
    pub fn new(lower: Vector, upper: Vector) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::InvalidArgument("empty bounds".into()));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| !(u > l) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::InvalidArgument("bounds need finite L < U".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn uniform(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(Vector::from_element(dim, lower), Vector::from_element(dim, upper))
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &Vector {
        &self.lower
    }

    pub fn upper(&self) -> &Vector {
        &self.upper
    }

    pub fn contains(&self, z: &Vector) -> bool {
        z.len() == self.dim()
            && z
                .iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .all(|(v, (l, u))| (*l..=*u).contains(v))
    }

    pub fn mirror(&self, z: &Vector) -> Vector {
        Vector::from_iterator(
            z.len(),
            z.iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .map(|(&v, (&l, &u))| mirror(v, l, u)),
        )
    }

    pub fn sample(&self, rng: &mut Rng) -> Vector {
        Vector::from_iterator(
            self.dim(),
            self.lower
                .iter()
                .zip(self.upper.iter())
                .map(|(&l, &u)| rng.uniform_range(l, u)),
        )
    }

    /// One quarter of the mean side length; the customary initial step size.
    pub fn quarter_width(&self) -> f64 {
        (&self.upper - &self.lower).mean() / 4.0
    }
}

/// A min-max problem `min_x max_y f(x, y)`.
///
/// `domain_*` is the feasible box (points outside are evaluated at their mirror
/// image); `init_*` is where starting points are drawn from. Unbounded problems
/// carry no domain.
#[derive(Clone)]
pub struct MinimaxProblem {
    pub name: String,
    pub m: usize,
    pub n: usize,
    f: ObjectiveFn,
    grad: Option<GradientFn>,
    pub domain_x: Option<Bounds>,
    pub domain_y: Option<Bounds>,
    pub init_x: Bounds,
    pub init_y: Bounds,
    pub known_saddle: Option<SaddlePair>,
    worst_response: Option<ResponseFn>,
    suboptimality: Option<ObjectiveFn>,
}

impl fmt::Debug for MinimaxProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MinimaxProblem")
            .field("name", &self.name)
            .field("m", &self.m)
            .field("n", &self.n)
            .field("has_gradient", &self.grad.is_some())
            .field("domain_x", &self.domain_x)
            .field("domain_y", &self.domain_y)
            .finish_non_exhaustive()
    }
}

impl MinimaxProblem {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(&Vector, &Vector) -> f64 + Send + Sync + 'static,
        init_x: Bounds,
        init_y: Bounds,
    ) -> Self {
        Self {
            name: name.into(),
            m: init_x.dim(),
            n: init_y.dim(),
            f: Arc::new(f),
            grad: None,
            domain_x: None,
            domain_y: None,
            init_x,
            init_y,
            known_saddle: None,
            worst_response: None,
            suboptimality: None,
        }
    }

    pub fn with_gradient(
        mut self,
        grad: impl Fn(&Vector, &Vector) -> (Vector, Vector) + Send + Sync + 'static,
    ) -> Self {
        self.grad = Some(Arc::new(grad));
        self
    }

    pub fn with_domain(mut self, domain_x: Bounds, domain_y: Bounds) -> Self {
        self.domain_x = Some(domain_x);
        self.domain_y = Some(domain_y);
        self
    }

    pub fn with_known_saddle(mut self, saddle: SaddlePair) -> Self {
        self.known_saddle = Some(saddle);
        self
    }

    pub fn with_worst_response(
        mut self,
        response: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        self.worst_response = Some(Arc::new(response));
        self
    }

    pub fn with_suboptimality(
        mut self,
        g: impl Fn(&Vector, &Vector) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.suboptimality = Some(Arc::new(g));
        self
    }

    pub fn has_gradient(&self) -> bool {
        self.grad.is_some()
    }

    pub fn repair_x(&self, x: &Vector) -> Vector {
        match &self.domain_x {
            Some(b) => b.mirror(x),
            None => x.clone(),
        }
    }

    pub fn repair_y(&self, y: &Vector) -> Vector {
        match &self.domain_y {
            Some(b) => b.mirror(y),
            None => y.clone(),
        }
    }

    /// `f` at the mirror images of `x` and `y`.
    pub fn eval(&self, x: &Vector, y: &Vector) -> f64 {
        match (&self.domain_x, &self.domain_y) {
            (None, None) => (self.f)(x, y),
            _ => (self.f)(&self.repair_x(x), &self.repair_y(y)),
        }
    }

    /// `(∇_x f, ∇_y f)` of the mirrored objective, when a gradient is known.
    pub fn gradient(&self, x: &Vector, y: &Vector) -> Option<(Vector, Vector)> {
        let grad = self.grad.as_ref()?;
        let (mut gx, mut gy) = grad(&self.repair_x(x), &self.repair_y(y));
        if let Some(b) = &self.domain_x {
            for i in 0..gx.len() {
                gx[i] *= mirror_slope(x[i], b.lower[i], b.upper[i]);
            }
        }
        if let Some(b) = &self.domain_y {
            for j in 0..gy.len() {
                gy[j] *= mirror_slope(y[j], b.lower[j], b.upper[j]);
            }
        }
        Some((gx, gy))
    }

    pub fn worst_response(&self, x: &Vector) -> Option<Vector> {
        self.worst_response.as_ref().map(|r| r(&self.repair_x(x)))
    }

    /// Worst-case objective `f(x, ŷ(x))`, when the worst response is known.
    pub fn worst_case_value(&self, x: &Vector) -> Option<f64> {
        self.worst_response(x).map(|y| self.eval(x, &y))
    }

    /// Closed-form suboptimality error, when known.
    pub fn closed_form_suboptimality(&self, x: &Vector, y: &Vector) -> Option<f64> {
        self.suboptimality.as_ref().map(|g| g(x, y))
    }

    pub fn sample_x(&self, rng: &mut Rng) -> Vector {
        self.init_x.sample(rng)
    }

    pub fn sample_y(&self, rng: &mut Rng) -> Vector {
        self.init_y.sample(rng)
    }

    /// Box used for random probes and uniform uncertainty samples.
    pub fn probe_box_x(&self) -> &Bounds {
        self.domain_x.as_ref().unwrap_or(&self.init_x)
    }

    pub fn probe_box_y(&self) -> &Bounds {
        self.domain_y.as_ref().unwrap_or(&self.init_y)
    }
}

/// Coefficients of `f1(x, y) = a/2 ‖x‖² + b ⟨x, y⟩ − c/2 ‖y‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticSpec {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Default for QuadraticSpec {
    fn default() -> Self {
        Self { a: 1.0, b: 1.0, c: 1.0 }
    }
}

impl QuadraticSpec {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a > 0.0 && c > 0.0 && b.is_finite() && a.is_finite() && c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "quadratic needs a > 0, c > 0 and finite b (got a={a}, b={b}, c={c})"
            )));
        }
        Ok(Self { a, b, c })
    }

    pub fn eval(&self, x: &Vector, y: &Vector) -> f64 {
        0.5 * self.a * x.norm_squared() + self.b * x.dot(y) - 0.5 * self.c * y.norm_squared()
    }

    /// `G(x, y) = max_y' f(x, y') − min_x' f(x', y)
    ///          = (ac + b²)/(2c) ‖x‖² + (ac + b²)/(2a) ‖y‖²`.
    pub fn suboptimality(&self, x: &Vector, y: &Vector) -> f64 {
        let k = self.a * self.c + self.b * self.b;
        k / (2.0 * self.c) * x.norm_squared() + k / (2.0 * self.a) * y.norm_squared()
    }

    /// `ŷ(x) = (b/c) x`.
    pub fn worst_response(&self, x: &Vector) -> Vector {
        x * (self.b / self.c)
    }

    /// `x̂(y) = −(b/a) y`.
    pub fn best_response(&self, y: &Vector) -> Vector {
        y * (-self.b / self.a)
    }
}

/// Closed-form suboptimality of `f1` (see [`QuadraticSpec::suboptimality`]).
pub fn suboptimality_f1(x: &Vector, y: &Vector, spec: &QuadraticSpec) -> f64 {
    spec.suboptimality(x, y)
}

/// The catalog of test functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFunction {
    F1(QuadraticSpec),
    F2,
    F3,
    F4,
    F5,
    F6,
    F7,
}

fn mean(v: &Vector) -> f64 {
    v.sum() / v.len() as f64
}

fn ones(n: usize) -> Vector {
    Vector::from_element(n, 1.0)
}

impl TestFunction {
    /// Looks up `"f1"`..`"f7"`; `spec` is used only by `f1`.
    pub fn from_id(id: &str, spec: QuadraticSpec) -> Result<Self> {
        Ok(match id.trim().to_ascii_lowercase().as_str() {
            "f1" => Self::F1(spec),
            "f2" => Self::F2,
            "f3" => Self::F3,
            "f4" => Self::F4,
            "f5" => Self::F5,
            "f6" => Self::F6,
            "f7" => Self::F7,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown problem id '{other}' (expected f1..f7)"
                )))
            }
        })
    }

    pub fn id(&self) -> &'static str {
        match self {
            Self::F1(_) => "f1",
            Self::F2 => "f2",
            Self::F3 => "f3",
            Self::F4 => "f4",
            Self::F5 => "f5",
            Self::F6 => "f6",
            Self::F7 => "f7",
        }
    }

    /// Exact value of the formula, without any box handling.
    pub fn eval(&self, x: &Vector, y: &Vector) -> Result<f64> {
        if x.is_empty() || y.is_empty() {
            return Err(Error::InvalidArgument("empty argument".into()));
        }
        if let Self::F1(_) = self {
            if x.len() != y.len() {
                return Err(Error::DimensionMismatch {
                    expected: x.len(),
                    got: y.len(),
                });
            }
        }
        Ok(self.eval_unchecked(x, y))
    }

    fn eval_unchecked(&self, x: &Vector, y: &Vector) -> f64 {
        let m = x.len() as f64;
        let coupling = x.sum() / m * y.sum();
        match self {
            Self::F1(spec) => spec.eval(x, y),
            Self::F2 => 0.5 * x.norm_squared() + coupling - 0.5 * y.norm_squared(),
            Self::F3 => {
                let shifted = x.map(|v| v - 4.0).norm_squared();
                0.5 * x.norm_squared().min(shifted) + coupling - 0.5 * y.norm_squared()
            }
            Self::F4 => {
                let q = 0.5 * y.norm_squared();
                0.5 * x.norm_squared() + coupling - q * q
            }
            Self::F5 => x.iter().map(|v| v.abs()).sum::<f64>() / m * y.sum(),
            Self::F6 => coupling - 0.5 * y.norm_squared(),
            Self::F7 => 0.5 * x.norm_squared() + coupling,
        }
    }

    /// `(∇_x f, ∇_y f)`. At the kinks of `f3` and `f5` a one-sided choice is returned.
    pub fn gradient(&self, x: &Vector, y: &Vector) -> (Vector, Vector) {
        let m = x.len();
        let n = y.len();
        let sy_over_m = y.sum() / m as f64;
        let mx = mean(x);
        match self {
            Self::F1(s) => (x * s.a + y * s.b, x * s.b - y * s.c),
            Self::F2 => (x + ones(m) * sy_over_m, ones(n) * mx - y),
            Self::F3 => {
                let shifted = x.map(|v| v - 4.0);
                let gq = if x.norm_squared() <= shifted.norm_squared() {
                    x.clone()
                } else {
                    shifted
                };
                (gq + ones(m) * sy_over_m, ones(n) * mx - y)
            }
            Self::F4 => (x + ones(m) * sy_over_m, ones(n) * mx - y * y.norm_squared()),
            Self::F5 => {
                let l1 = x.iter().map(|v| v.abs()).sum::<f64>() / m as f64;
                let sign = x.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
                (sign * sy_over_m, ones(n) * l1)
            }
            Self::F6 => (ones(m) * sy_over_m, ones(n) * mx - y),
            Self::F7 => (x + ones(m) * sy_over_m, ones(n) * mx),
        }
    }

    /// Worst-case response `ŷ(x) = argmax_y f(x, y)` for a `y` of dimension `n`.
    pub fn worst_response(&self, x: &Vector, n: usize) -> Vector {
        let m = x.len() as f64;
        match self {
            Self::F1(spec) => spec.worst_response(x),
            Self::F2 | Self::F3 | Self::F6 => ones(n) * mean(x),
            Self::F4 => ones(n) * (x.sum() / (m * n as f64)).cbrt(),
            Self::F5 => ones(n) * BOX_UPPER,
            Self::F7 => {
                if x.sum() >= 0.0 {
                    ones(n) * BOX_UPPER
                } else {
                    ones(n) * BOX_LOWER
                }
            }
        }
    }

    /// Builds the problem with `x ∈ R^m`, `y ∈ R^n`.
    pub fn problem(&self, m: usize, n: usize) -> Result<MinimaxProblem> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidArgument("dimensions must be at least 1".into()));
        }
        let this = *self;
        if let Self::F1(spec) = this {
            if m != n {
                return Err(Error::DimensionMismatch { expected: m, got: n });
            }
            let origin = SaddlePair::new(Vector::zeros(m), Vector::zeros(n));
            return Ok(MinimaxProblem::new(
                "f1",
                move |x, y| spec.eval(x, y),
                Bounds::uniform(m, BOX_LOWER, BOX_UPPER)?,
                Bounds::uniform(n, BOX_LOWER, BOX_UPPER)?,
            )
            .with_gradient(move |x, y| this.gradient(x, y))
            .with_worst_response(move |x| spec.worst_response(x))
            .with_suboptimality(move |x, y| spec.suboptimality(x, y))
            .with_known_saddle(origin));
        }
        let bx = Bounds::uniform(m, BOX_LOWER, BOX_UPPER)?;
        let by = Bounds::uniform(n, BOX_LOWER, BOX_UPPER)?;
        let mut p = MinimaxProblem::new(self.id(), move |x, y| this.eval_unchecked(x, y), bx.clone(), by.clone())
            .with_domain(bx, by)
            .with_gradient(move |x, y| this.gradient(x, y))
            .with_worst_response(move |x| this.worst_response(x, n));
        if matches!(this, Self::F2 | Self::F3 | Self::F4) {
            p = p.with_known_saddle(SaddlePair::new(Vector::zeros(m), Vector::zeros(n)));
        }
        Ok(p)
    }
}

/// Evaluates catalog function `id` at `(x, y)`.
pub fn testfun_eval(id: &str, x: &Vector, y: &Vector, spec: QuadraticSpec) -> Result<f64> {
    TestFunction::from_id(id, spec)?.eval(x, y)
}

/// Outcome of [`suboptimality_numeric`].
#[derive(Debug, Clone, PartialEq)]
pub struct NumericSuboptimality {
    pub estimate: f64,
    /// `max_y' f(x, y')` as found by the inner solver.
    pub worst_value: f64,
    /// `min_x' f(x', y)` as found by the inner solver.
    pub best_value: f64,
    pub restarts: usize,
    pub f_calls: u64,
}

/// Multi-start estimate of `G(x, y) = max_y' f(x, y') − min_x' f(x', y)`.
///
/// Each inner problem is solved by chained (1+1)-CMA-ES calls from `restarts`
/// starting points: the given point itself and uniform draws from the
/// initialization box. `inner_budget` f-calls are split evenly across starts.
/// Approximate solvers undershoot the max and overshoot the min, so the
/// estimate never exceeds the true value.
pub fn suboptimality_numeric(
    problem: &MinimaxProblem,
    x: &Vector,
    y: &Vector,
    inner_budget: u64,
    restarts: usize,
    rng: &mut Rng,
) -> Result<NumericSuboptimality> {
    if inner_budget == 0 || restarts == 0 {
        return Err(Error::InvalidArgument(
            "inner budget and restart count must be positive".into(),
        ));
    }
    let per_start = (inner_budget / restarts as u64).max(1);
    let mut f_calls = 0;

    let neg_worst = multistart_minimize(
        |yy: &Vector| -problem.eval(x, yy),
        y,
        &problem.init_y,
        per_start,
        restarts,
        rng,
        &mut f_calls,
    )?;
    let best = multistart_minimize(
        |xx: &Vector| problem.eval(xx, y),
        x,
        &problem.init_x,
        per_start,
        restarts,
        rng,
        &mut f_calls,
    )?;
    let worst = -neg_worst;
    Ok(NumericSuboptimality {
        estimate: worst - best,
        worst_value: worst,
        best_value: best,
        restarts,
        f_calls,
    })
}

fn multistart_minimize(
    h: impl Fn(&Vector) -> f64,
    first_start: &Vector,
    init: &Bounds,
    per_start: u64,
    restarts: usize,
    rng: &mut Rng,
    f_calls: &mut u64,
) -> Result<f64> {
    let params = CmaesParams {
        sigma_min_bar: 1e-13,
        ..CmaesParams::default()
    };
    let mut best = f64::INFINITY;
    for k in 0..restarts {
        let mut z = if k == 0 {
            first_start.clone()
        } else {
            init.sample(rng)
        };
        let mut state = OracleState::new(z.len(), init.quarter_width());
        let mut hz = h(&z);
        let mut used = 1u64;
        if !hz.is_finite() {
            return Err(Error::NonFinite("objective"));
        }
        while used < per_start {
            let res = cmaes_minimize(|v: &Vector| Ok(h(v)), &z, Some(hz), &mut state, &params, rng)?;
            used += res.f_calls;
            z = res.z_out;
            hz = res.best_value;
            if res.stopped_on_sigma {
                break;
            }
        }
        *f_calls += used;
        best = best.min(hz);
    }
    Ok(best)
}
