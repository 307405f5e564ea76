//! Chernoff information between multivariate Gaussians.
//!
//! For `N(mu0, S0)` and `N(mu1, S1)` the alpha-divergence used here is
//!
//! ```text
//! C_a = 1/2 log|S_a| - a/2 log|S0| - (1-a)/2 log|S1|
//!       + a(1-a)/2 (mu0-mu1)^T S_a^{-1} (mu0-mu1),     S_a = a S0 + (1-a) S1
//! ```
//!
//! in nats. It is concave in `a` and vanishes at both endpoints; the Chernoff
//! information is its maximum over `a` in `[0, 1]`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::model::GaussianSurrogate;

pub const ALPHA_TOL: f64 = 1e-8;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximum of `alpha_chernoff` together with the maximizing alpha.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chernoff {
    pub value: f64,
    pub alpha_star: f64,
}

pub fn alpha_chernoff(g0: &GaussianSurrogate, g1: &GaussianSurrogate, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if g0.diagonal_only && g1.diagonal_only {
        alpha_chernoff_diagonal(g0, g1, alpha)
    } else {
        alpha_chernoff_full(g0, g1, alpha)
    }
}

/// Dense path: Cholesky of the blended covariance, log-determinants
/// accumulated from the factor's diagonal.
pub fn alpha_chernoff_full(
    g0: &GaussianSurrogate,
    g1: &GaussianSurrogate,
    alpha: f64,
) -> Result<f64> {
    check_alpha(alpha)?;
    DensePair::new(g0, g1)?.eval(alpha)
}

/// Per-entry specialization for diagonal covariances.
pub fn alpha_chernoff_diagonal(
    g0: &GaussianSurrogate,
    g1: &GaussianSurrogate,
    alpha: f64,
) -> Result<f64> {
    check_alpha(alpha)?;
    DiagonalPair::new(g0, g1)?.eval(alpha)
}

pub fn chernoff_information(g0: &GaussianSurrogate, g1: &GaussianSurrogate) -> Result<Chernoff> {
    if g0.diagonal_only && g1.diagonal_only {
        let pair = DiagonalPair::new(g0, g1)?;
        maximize(|a| pair.eval(a))
    } else {
        let pair = DensePair::new(g0, g1)?;
        maximize(|a| pair.eval(a))
    }
}

/// Golden-section maximization of a concave function on `[lo, hi]`.
/// Returns `(x*, f(x*))` once the bracket is narrower than `tol`.
pub fn golden_section_max<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1)?;
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x)?;
    Ok((x, fx))
}

fn maximize<F>(mut f: F) -> Result<Chernoff>
where
    F: FnMut(f64) -> Result<f64>,
{
    // flat (identical distributions, or numerically so): report the midpoint
    let probe = [f(0.25)?, f(0.5)?, f(0.75)?];
    if probe.iter().all(|v| v.abs() <= f64::EPSILON) {
        return Ok(Chernoff {
            value: probe[1].max(0.0),
            alpha_star: 0.5,
        });
    }
    let (alpha_star, value) = golden_section_max(&mut f, 0.0, 1.0, ALPHA_TOL)?;
    Ok(Chernoff {
        value: value.max(0.0),
        alpha_star,
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    Ok(())
}

fn check_dims(g0: &GaussianSurrogate, g1: &GaussianSurrogate) -> Result<()> {
    let d = g0.dim();
    for n in [
        g1.dim(),
        g0.cov.nrows(),
        g0.cov.ncols(),
        g1.cov.nrows(),
        g1.cov.ncols(),
    ] {
        if n != d {
            return Err(Error::DimensionMismatch { left: d, right: n });
        }
    }
    Ok(())
}

pub(crate) fn cholesky(cov: &DMatrix<f64>, alpha: f64) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(cov.clone()).ok_or_else(|| Error::NotPositiveDefinite {
        alpha,
        dim: cov.nrows(),
        min_diagonal: cov.diagonal().min(),
    })
}

pub(crate) fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol
        .l_dirty()
        .diagonal()
        .iter()
        .map(|x| x.ln())
        .sum::<f64>()
}

struct DensePair<'a> {
    s0: &'a DMatrix<f64>,
    s1: &'a DMatrix<f64>,
    diff: DVector<f64>,
    log_det0: f64,
    log_det1: f64,
}

impl<'a> DensePair<'a> {
    fn new(g0: &'a GaussianSurrogate, g1: &'a GaussianSurrogate) -> Result<Self> {
        check_dims(g0, g1)?;
        Ok(Self {
            s0: &g0.cov,
            s1: &g1.cov,
            diff: &g0.mean - &g1.mean,
            log_det0: log_det(&cholesky(&g0.cov, 1.0)?),
            log_det1: log_det(&cholesky(&g1.cov, 0.0)?),
        })
    }

    fn eval(&self, alpha: f64) -> Result<f64> {
        let blend = self.s0 * alpha + self.s1 * (1.0 - alpha);
        let chol = cholesky(&blend, alpha)?;
        let z = chol
            .l_dirty()
            .solve_lower_triangular(&self.diff)
            .expect("cholesky factor has a positive diagonal");
        let log_term =
            0.5 * (log_det(&chol) - alpha * self.log_det0 - (1.0 - alpha) * self.log_det1);
        Ok(log_term + 0.5 * alpha * (1.0 - alpha) * z.norm_squared())
    }
}

struct DiagonalPair {
    v0: Vec<f64>,
    v1: Vec<f64>,
    d2: Vec<f64>,
}

impl DiagonalPair {
    fn new(g0: &GaussianSurrogate, g1: &GaussianSurrogate) -> Result<Self> {
        check_dims(g0, g1)?;
        let v0: Vec<f64> = g0.cov.diagonal().iter().copied().collect();
        let v1: Vec<f64> = g1.cov.diagonal().iter().copied().collect();
        if let Some(&bad) = v0.iter().chain(&v1).find(|v| v.is_nan() || **v <= 0.0) {
            return Err(Error::NotPositiveDefinite {
                alpha: f64::NAN,
                dim: v0.len(),
                min_diagonal: bad,
            });
        }
        let d2 = g0
            .mean
            .iter()
            .zip(g1.mean.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .collect();
        Ok(Self { v0, v1, d2 })
    }

    fn eval(&self, alpha: f64) -> Result<f64> {
        let beta = 1.0 - alpha;
        let mut total = 0.0;
        for ((v0, v1), d2) in self.v0.iter().zip(&self.v1).zip(&self.d2) {
            let va = alpha * v0 + beta * v1;
            total += 0.5 * (va.ln() - alpha * v0.ln() - beta * v1.ln());
            total += 0.5 * alpha * beta * d2 / va;
        }
        Ok(total)
    }
}
