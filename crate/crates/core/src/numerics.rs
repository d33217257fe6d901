//! Dense vectors and matrices, the seedable random stream, and the small
//! statistics helpers shared by the optimizers.
//!
//! Vectors and matrices are `nalgebra` dynamic types. The random stream is a
//! ChaCha8 generator seeded through `seed_from_u64`; standard-normal variates
//! come from `rand_distr`'s ziggurat sampler on top of it, so a seed fixes
//! every sampled value bit for bit across platforms.

use nalgebra::{DMatrix, DVector};
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Deterministic random stream. One per trial; never shared.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform variate in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Derives an independent child stream, e.g. for nested solves.
    pub fn fork(&mut self) -> Rng {
        Rng::new(self.inner.random::<u64>())
    }
}

/// Draws `dim` independent standard-normal variates.
pub fn sample_standard_normal(rng: &mut Rng, dim: usize) -> Result<Vector> {
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    Ok(Vector::from_fn(dim, |_, _| rng.standard_normal()))
}

fn check_finite_matrix(m: &Matrix, what: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Returns `(a·A + b·(A w) wᵀ, A⁻¹/a − b/(a² + a b ‖w‖²) · w (wᵀ A⁻¹))`.
///
/// The second matrix is the Sherman–Morrison inverse of the first whenever the
/// inputs are mutual inverses.
pub fn rank_one_pair_update(
    a_mat: &Matrix,
    a_inv: &Matrix,
    w: &Vector,
    a: f64,
    b: f64,
) -> Result<(Matrix, Matrix)> {
    let mut a_new = a_mat.clone();
    let mut a_inv_new = a_inv.clone();
    rank_one_pair_update_in_place(&mut a_new, &mut a_inv_new, w, a, b)?;
    Ok((a_new, a_inv_new))
}

/// In-place form of [`rank_one_pair_update`]. On error both matrices are left untouched.
pub fn rank_one_pair_update_in_place(
    a_mat: &mut Matrix,
    a_inv: &mut Matrix,
    w: &Vector,
    a: f64,
    b: f64,
) -> Result<()> {
    let dim = a_mat.nrows();
    for m in [&*a_mat, &*a_inv] {
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: m.ncols(),
            });
        }
    }
    if w.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: w.len(),
        });
    }
    if !a.is_finite() || !b.is_finite() || w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("rank-one update coefficients"));
    }
    check_finite_matrix(a_mat, "covariance factor")?;
    check_finite_matrix(a_inv, "inverse covariance factor")?;
    if a == 0.0 {
        return Err(Error::InvalidArgument("rank-one update with a = 0".into()));
    }
    let w_sq = w.norm_squared();
    let denom = a * a + a * b * w_sq;
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::InvalidArgument(
            "rank-one update with vanishing inverse denominator".into(),
        ));
    }

    let aw = &*a_mat * w;
    // wᵀ A⁻¹ as a row
    let wt_ainv = w.transpose() * &*a_inv;

    *a_mat *= a;
    a_mat.ger(b, &aw, w, 1.0);

    *a_inv /= a;
    let k = -b / denom;
    for j in 0..dim {
        let r = k * wt_ainv[j];
        for i in 0..dim {
            a_inv[(i, j)] += r * w[i];
        }
    }
    Ok(())
}

/// Least-squares slope of `values` against the index `1..=len`, with the
/// classical standard error of that slope.
///
/// With two samples there are no residual degrees of freedom; the standard
/// error is reported as zero.
pub fn ols_slope(values: &[f64]) -> Result<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "slope needs at least two samples, got {n}"
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("slope samples"));
    }
    let nf = n as f64;
    let x_mean = (nf + 1.0) / 2.0;
    let v_mean = values.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxv = 0.0;
    for (i, &v) in values.iter().enumerate() {
        let dx = (i + 1) as f64 - x_mean;
        sxx += dx * dx;
        sxv += dx * v;
    }
    let slope = sxv / sxx;
    if n == 2 {
        return Ok((slope, 0.0));
    }
    let intercept = v_mean - slope * x_mean;
    let ssr: f64 = values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let r = v - (intercept + slope * (i + 1) as f64);
            r * r
        })
        .sum();
    let stderr = (ssr / (nf - 2.0) / sxx).sqrt();
    Ok((slope, stderr))
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Max-norm of `A·B − I`.
pub fn inverse_residual(a_mat: &Matrix, a_inv: &Matrix) -> f64 {
    let prod = a_mat * a_inv;
    let dim = prod.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((prod[(i, j)] - target).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use crate::numerics::Rng;

    #[test]
    fn identity_update_with_zero_b() {
        let eye = Matrix::identity(2, 2);
        let w = Vector::from_vec(vec![1.0, 0.0]);
        let (a, ai) = rank_one_pair_update(&eye, &eye, &w, 1.0, 0.0).unwrap();
        assert_eq!(a, eye);
        assert_eq!(ai, eye);
    }

    #[test]
    fn unit_update_along_first_axis() {
        let eye = Matrix::identity(2, 2);
        let w = Vector::from_vec(vec![1.0, 0.0]);
        let (a, ai) = rank_one_pair_update(&eye, &eye, &w, 1.0, 1.0).unwrap();
        assert_eq!(a, Matrix::from_diagonal(&Vector::from_vec(vec![2.0, 1.0])));
        assert_eq!(ai, Matrix::from_diagonal(&Vector::from_vec(vec![0.5, 1.0])));
        assert!(inverse_residual(&a, &ai) == 0.0);
    }

    fn random_factor(rng: &mut Rng, dim: usize) -> Matrix {
        // lower-triangular with a dominant positive diagonal
        Matrix::from_fn(dim, dim, |i, j| {
            if i == j {
                1.0 + rng.uniform()
            } else if i > j {
                0.3 * rng.standard_normal()
            } else {
                0.0
            }
        })
    }

    #[test]
    fn success_branch_update_matches_explicit_inverse() {
        let mut rng = Rng::new(7);
        let dim = 5;
        let a_mat = random_factor(&mut rng, dim);
        let a_inv = a_mat.clone().try_inverse().unwrap();
        let w = sample_standard_normal(&mut rng, dim).unwrap();
        let c_cov = 0.1;
        let a = (1.0f64 - c_cov).sqrt();
        let w2 = w.norm_squared();
        let b = a / w2 * ((1.0 + c_cov / (1.0 - c_cov) * w2).sqrt() - 1.0);
        let (a_new, a_inv_new) = rank_one_pair_update(&a_mat, &a_inv, &w, a, b).unwrap();
        assert!(inverse_residual(&a_new, &a_inv_new) <= 1e-10);
        let explicit = a_new.clone().try_inverse().unwrap();
        for (u, v) in explicit.iter().zip(a_inv_new.iter()) {
            assert_relative_eq!(u, v, epsilon = 1e-10);
        }
    }

    #[test]
    fn rejects_bad_coefficients() {
        let eye = Matrix::identity(2, 2);
        let w = Vector::from_vec(vec![1.0, 0.0]);
        assert!(rank_one_pair_update(&eye, &eye, &w, 0.0, 1.0).is_err());
        // a² + a·b·‖w‖² = 1 − 1 = 0
        assert!(rank_one_pair_update(&eye, &eye, &w, 1.0, -1.0).is_err());
        assert!(rank_one_pair_update(&eye, &eye, &w, f64::NAN, 1.0).is_err());
        let bad_w = Vector::from_vec(vec![f64::INFINITY, 0.0]);
        assert!(rank_one_pair_update(&eye, &eye, &bad_w, 1.0, 1.0).is_err());
    }

    #[test]
    fn chained_updates_keep_inverse_relation() {
        let mut rng = Rng::new(11);
        for &dim in &[2usize, 7, 20] {
            let mut a_mat = Matrix::identity(dim, dim);
            let mut a_inv = Matrix::identity(dim, dim);
            let mut prev: Option<(Vector, f64, f64)> = None;
            for step in 0..10_000 {
                // alternate a fresh update with the exact undo of the previous one,
                // which keeps A well conditioned while rounding errors accumulate
                let (w, a, b) = match prev.take() {
                    Some((w, a, b)) => {
                        let w2 = w.norm_squared();
                        (w, 1.0 / a, -b / (a * (a + b * w2)))
                    }
                    None => {
                        let w = sample_standard_normal(&mut rng, dim).unwrap();
                        let w2 = w.norm_squared();
                        let (a, b) = if step % 4 == 0 {
                            let c = (0.4 / ((dim as f64).powf(1.6) + 1.0)).min(1.0 / (2.0 * w2 - 1.0).max(1.0));
                            let a = (1.0 + c).sqrt();
                            (a, a / w2 * ((1.0 - c / (1.0 + c) * w2).max(0.25).sqrt() - 1.0))
                        } else {
                            let c = 2.0 / ((dim * dim) as f64 + 6.0);
                            let a = (1.0 - c).sqrt();
                            (a, a / w2 * ((1.0 + c / (1.0 - c) * w2).sqrt() - 1.0))
                        };
                        prev = Some((w.clone(), a, b));
                        (w, a, b)
                    }
                };
                rank_one_pair_update_in_place(&mut a_mat, &mut a_inv, &w, a, b).unwrap();
            }
            let r = inverse_residual(&a_mat, &a_inv);
            assert!(r <= 1e-9, "dim {dim}: residual {r}");
        }
    }

    #[test]
    fn normal_stream_is_reproducible() {
        let mut r1 = Rng::new(42);
        let mut r2 = Rng::new(42);
        let a = sample_standard_normal(&mut r1, 3).unwrap();
        let b = sample_standard_normal(&mut r2, 3).unwrap();
        assert_eq!(a, b);
        for _ in 0..1000 {
            assert_eq!(r1.standard_normal().to_bits(), r2.standard_normal().to_bits());
        }
        assert!(sample_standard_normal(&mut r1, 0).is_err());
    }

    #[test]
    fn normal_moments() {
        let mut rng = Rng::new(42);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        assert!(mean.abs() <= 0.02, "mean {mean}");
        assert!((var - 1.0).abs() <= 0.03, "var {var}");
    }

    #[test]
    fn slope_examples() {
        assert_eq!(ols_slope(&[0.0, -1.0, -2.0]).unwrap(), (-1.0, 0.0));
        assert_eq!(ols_slope(&[0.0, 0.0, 0.0]).unwrap(), (0.0, 0.0));
        let (s, _) = ols_slope(&[0.0, -1.0, -1.0]).unwrap();
        assert_eq!(s, -0.5);
        assert_eq!(ols_slope(&[3.0, 1.0]).unwrap(), (-2.0, 0.0));
        assert!(ols_slope(&[1.0]).is_err());
        assert!(ols_slope(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn slope_stderr_matches_textbook_value() {
        // residuals (−1/6, 1/3, −1/6) for fit v = 0.5·i − 0.5 + r on [0, 1, 1]
        let (s, se) = ols_slope(&[0.0, 1.0, 1.0]).unwrap();
        assert_eq!(s, 0.5);
        let ssr: f64 = 1.0 / 36.0 + 1.0 / 9.0 + 1.0 / 36.0;
        assert_relative_eq!(se, (ssr / 1.0 / 2.0).sqrt(), epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn slope_is_exact_on_affine_sequences(
            intercept in -1000i32..1000, step in -100i32..100, len in 2usize..40
        ) {
            let v: Vec<f64> = (0..len).map(|i| (intercept + step * i as i32) as f64).collect();
            let (s, se) = ols_slope(&v).unwrap();
            prop_assert_eq!(s, step as f64);
            prop_assert_eq!(se, 0.0);
        }

        #[test]
        fn slope_is_translation_invariant(
            vals in proptest::collection::vec(-1000i32..1000, 2..30), shift in -10_000i32..10_000
        ) {
            let v: Vec<f64> = vals.iter().map(|&x| x as f64).collect();
            let w: Vec<f64> = vals.iter().map(|&x| (x + shift) as f64).collect();
            prop_assert_eq!(ols_slope(&v).unwrap().0, ols_slope(&w).unwrap().0);
        }
    }
}
