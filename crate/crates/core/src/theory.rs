//! Convergence-rate constants for strongly convex-concave problems.
//!
//! With Hessian bounds `α_H ≤ β_H`, suboptimality-curvature bounds
//! `α_G ≤ β_G` and oracle precision `ε`, the update with a rate below `2η*`
//! shrinks the suboptimality error by at least `e^γ` per iteration, and any
//! rate above `2η̄` makes it grow everywhere.

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector};
use crate::problems::QuadraticSpec;
use crate::saddle::SaddlePair;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexConcaveConstants {
    pub alpha_h: f64,
    pub beta_h: f64,
    pub alpha_g: f64,
    pub beta_g: f64,
    pub eps: f64,
}

impl ConvexConcaveConstants {
    pub fn new(alpha_h: f64, beta_h: f64, alpha_g: f64, beta_g: f64, eps: f64) -> Result<Self> {
        let ok = alpha_h > 0.0
            && beta_h >= alpha_h
            && alpha_g > 0.0
            && beta_g >= alpha_g
            && (0.0..1.0).contains(&eps)
            && beta_h.is_finite()
            && beta_g.is_finite();
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "constants must satisfy 0 < α_H ≤ β_H, 0 < α_G ≤ β_G, 0 ≤ ε < 1; got \
                 ({alpha_h}, {beta_h}, {alpha_g}, {beta_g}, {eps})"
            )));
        }
        Ok(Self {
            alpha_h,
            beta_h,
            alpha_g,
            beta_g,
            eps,
        })
    }

    /// Whether `ε < α_H⁵ / (β_H⁴ β_G)`, the precision the rate guarantee needs.
    pub fn precision_suffices(&self) -> bool {
        self.eps < self.alpha_h.powi(5) / (self.beta_h.powi(4) * self.beta_g)
    }
}

/// Rate that minimizes the contraction bound.
pub fn eta_star(c: &ConvexConcaveConstants) -> f64 {
    let r = c.beta_h / c.alpha_h;
    let se = c.eps.sqrt();
    (c.alpha_h / c.beta_h) * (c.alpha_h / c.beta_g) * (1.0 - r * r * (c.beta_g / c.alpha_h * c.eps).sqrt())
        / (1.0 + se).powi(2)
}

/// Upper bound `γ` on the per-iteration change of `log G` at rate `eta`.
pub fn gamma_bound(eta: f64, c: &ConvexConcaveConstants) -> f64 {
    let r = c.beta_h / c.alpha_h;
    let se = c.eps.sqrt();
    -2.0 * eta * (c.alpha_h / c.beta_h) * (1.0 - r * r * (c.beta_g / c.alpha_h * c.eps).sqrt())
        + eta * eta * (1.0 + se).powi(2) * (c.beta_g / c.alpha_h)
}

/// `γ` at `η = η*`.
pub fn gamma_star(c: &ConvexConcaveConstants) -> f64 {
    let r = c.beta_h / c.alpha_h;
    let q = (1.0 - r * r * (c.beta_g / c.alpha_h * c.eps).sqrt()) / (1.0 + c.eps.sqrt());
    -(c.alpha_h / c.beta_g) * (c.alpha_h / c.beta_h).powi(2) * q * q
}

/// Half the rate above which `G` increases at every non-saddle point.
pub fn eta_bar(c: &ConvexConcaveConstants) -> f64 {
    let up = 1.0 + (c.beta_g / c.alpha_h * c.eps).sqrt();
    let down = 1.0 - (c.beta_h / c.alpha_h * c.eps).sqrt();
    (c.beta_h / c.alpha_g) * (c.beta_h / c.alpha_h) * up / (down * down)
}

/// Iterations needed to shrink `G` by the factor `zeta` at contraction `gamma`.
pub fn runtime_bound(gamma: f64, zeta: f64) -> Result<u64> {
    if !(gamma < 0.0) {
        return Err(Error::InvalidArgument(format!("runtime bound needs γ < 0, got {gamma}")));
    }
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(Error::InvalidArgument(format!("ζ must lie in (0, 1), got {zeta}")));
    }
    // ln(1/ζ)/|γ| can land a few ulps above an integer
    let t = (1.0 / zeta).ln() / gamma.abs();
    let rounded = t.round();
    let t = if (t - rounded).abs() <= 1e-9 * rounded.max(1.0) { rounded } else { t.ceil() };
    Ok(t as u64)
}

/// Constants of `f(x, y) = a/2 ‖x‖² + b xᵀy − c/2 ‖y‖²`.
pub fn quadratic_constants(spec: &QuadraticSpec, eps: f64) -> Result<ConvexConcaveConstants> {
    let g = 1.0 + spec.b * spec.b / (spec.a * spec.c);
    ConvexConcaveConstants::new(1.0, 1.0, g, g, eps)
}

/// One update with exact oracles on the isotropic quadratic.
pub fn exact_oracle_step(x: &Vector, y: &Vector, eta: f64, spec: &QuadraticSpec) -> SaddlePair {
    let x_next = x * (1.0 - eta) - y * (eta * spec.b / spec.a);
    let y_next = y * (1.0 - eta) + x * (eta * spec.b / spec.c);
    SaddlePair::new(x_next, y_next)
}

/// `f(x, y) = ½ xᵀH_xx x + xᵀH_xy y + ½ yᵀH_yy y` with `H_xx ≻ 0` and `H_yy ≺ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockQuadratic {
    pub hxx: Matrix,
    pub hxy: Matrix,
    pub hyy: Matrix,
}

fn is_symmetric(m: &Matrix) -> bool {
    let scale = m.amax().max(1.0);
    (m - m.transpose()).amax() <= 1e-12 * scale
}

fn inverse_sqrt_spd(m: &Matrix) -> Matrix {
    let eig = SymmetricEigen::new(m.clone());
    let d = eig.eigenvalues.map(|l| 1.0 / l.sqrt());
    &eig.eigenvectors * Matrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

impl BlockQuadratic {
    pub fn new(hxx: Matrix, hxy: Matrix, hyy: Matrix) -> Result<Self> {
        let m = hxx.nrows();
        let n = hyy.nrows();
        if hxx.ncols() != m || hyy.ncols() != n || hxy.nrows() != m || hxy.ncols() != n {
            return Err(Error::InvalidArgument("block shapes must be m×m, m×n and n×n".into()));
        }
        if !is_symmetric(&hxx) || !is_symmetric(&hyy) {
            return Err(Error::InvalidArgument("diagonal blocks must be symmetric".into()));
        }
        if SymmetricEigen::new(hxx.clone()).eigenvalues.min() <= 0.0 {
            return Err(Error::InvalidArgument("H_xx must be positive definite".into()));
        }
        if SymmetricEigen::new(-hyy.clone()).eigenvalues.min() <= 0.0 {
            return Err(Error::InvalidArgument("H_yy must be negative definite".into()));
        }
        Ok(Self { hxx, hxy, hyy })
    }

    pub fn from_spec(spec: &QuadraticSpec, dim: usize) -> Self {
        let eye = Matrix::identity(dim, dim);
        Self {
            hxx: &eye * spec.a,
            hxy: &eye * spec.b,
            hyy: &eye * -spec.c,
        }
    }

    pub fn eval(&self, x: &Vector, y: &Vector) -> f64 {
        0.5 * x.dot(&(&self.hxx * x)) + x.dot(&(&self.hxy * y)) + 0.5 * y.dot(&(&self.hyy * y))
    }

    pub fn best_response(&self, y: &Vector) -> Vector {
        -self.hxx.clone().cholesky().expect("H_xx is positive definite").solve(&(&self.hxy * y))
    }

    pub fn worst_response(&self, x: &Vector) -> Vector {
        (-self.hyy.clone())
            .cholesky()
            .expect("H_yy is negative definite")
            .solve(&(self.hxy.transpose() * x))
    }

    /// `f(x, ŷ(x)) − f(x̂(y), y)`.
    pub fn suboptimality(&self, x: &Vector, y: &Vector) -> f64 {
        self.eval(x, &self.worst_response(x)) - self.eval(&self.best_response(y), y)
    }

    /// Singular values of `H_xx^{-1/2} H_xy (−H_yy)^{-1/2}`, padded with zeros
    /// to `max(m, n)` entries when the blocks are rectangular.
    pub fn coupling_singular_values(&self) -> Vec<f64> {
        let k = inverse_sqrt_spd(&self.hxx) * &self.hxy * inverse_sqrt_spd(&(-self.hyy.clone()));
        let mut sv: Vec<f64> = k.singular_values().iter().copied().collect();
        sv.resize(k.nrows().max(k.ncols()), 0.0);
        sv.sort_by(f64::total_cmp);
        sv
    }

    /// `α_H = β_H = 1`, `α_G = 1 + σ²_min`, `β_G = 1 + σ²_max`.
    pub fn constants(&self, eps: f64) -> Result<ConvexConcaveConstants> {
        let sv = self.coupling_singular_values();
        let lo = sv.first().copied().unwrap_or(0.0);
        let hi = sv.last().copied().unwrap_or(0.0);
        ConvexConcaveConstants::new(1.0, 1.0, 1.0 + lo * lo, 1.0 + hi * hi, eps)
    }

    /// One update with exact oracles.
    pub fn exact_oracle_step(&self, x: &Vector, y: &Vector, eta: f64) -> SaddlePair {
        let xh = self.best_response(y);
        let yh = self.worst_response(x);
        SaddlePair::new(x + (xh - x) * eta, y + (yh - y) * eta)
    }
}

/// Runs `steps` exact-oracle updates on the isotropic quadratic and returns
/// the closed-form suboptimality after each, starting with the initial value.
pub fn simulate_exact(spec: &QuadraticSpec, eta: f64, x0: &Vector, y0: &Vector, steps: usize) -> Vec<f64> {
    let mut x = x0.clone();
    let mut y = y0.clone();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(spec.suboptimality(&x, &y));
    for _ in 0..steps {
        let p = exact_oracle_step(&x, &y, eta, spec);
        x = p.x;
        y = p.y;
        out.push(spec.suboptimality(&x, &y));
    }
    out
}
