//! Squared-exponential covariance with jitter, positive-definite factorization
//! and Gaussian conditioning.
//!
//! The covariance between patients with covariate rows `x_i`, `x_j` is
//!
//! ```text
//! C(x_i, x_j) = exp(-Σ_m (x_im - x_jm)²) + 1[i = j] · J²
//! ```
//!
//! with no length-scale parameters; numeric covariates are standardized
//! upstream, which fixes the implicit length scale at one standard deviation.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_JITTER: f64 = 0.1;

/// Number of ×10 nugget escalations attempted before giving up.
const NUGGET_ESCALATIONS: usize = 3;
/// First nugget, relative to the mean diagonal.
const NUGGET_START: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    /// Jitter standard deviation `J`; the diagonal is inflated by `J²`.
    pub jitter: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            jitter: DEFAULT_JITTER,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "jitter must be finite and nonnegative, got {}",
                self.jitter
            )));
        }
        Ok(())
    }
}

#[inline]
pub fn kernel_value(a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-d2).exp()
}

fn check_finite(x: &DMatrix<f64>) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("covariate matrix"))
    }
}

fn row(x: &DMatrix<f64>, i: usize) -> Vec<f64> {
    x.row(i).iter().copied().collect()
}

/// Training covariance of the rows of `x` (n × M), jitter on the diagonal.
pub fn covariance_matrix(x: &DMatrix<f64>, cfg: &KernelConfig) -> Result<DMatrix<f64>> {
    cfg.validate()?;
    check_finite(x)?;
    let n = x.nrows();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| row(x, i)).collect();
    let jitter2 = cfg.jitter * cfg.jitter;
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        c[(i, i)] = 1.0 + jitter2;
        for j in 0..i {
            let v = kernel_value(&rows[i], &rows[j]);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    Ok(c)
}

/// Kernel values between one query point and every training row (no jitter:
/// the query is a different patient).
pub fn cross_covariance(x_train: &DMatrix<f64>, query: &[f64]) -> Result<DVector<f64>> {
    if query.len() != x_train.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x_train.ncols(),
            got: query.len(),
        });
    }
    if !query.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("query covariates"));
    }
    let n = x_train.nrows();
    let m = x_train.ncols();
    Ok(DVector::from_iterator(
        n,
        (0..n).map(|i| {
            let mut d2 = 0.0;
            for k in 0..m {
                let d = x_train[(i, k)] - query[k];
                d2 += d * d;
            }
            (-d2).exp()
        }),
    ))
}

/// Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    /// Diagonal nugget that had to be added, zero when none was needed.
    pub nugget: f64,
}

impl SpdFactor {
    pub fn l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn l_ref(&self) -> &DMatrix<f64> {
        self.chol.l_dirty()
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    /// `L⁻¹ b`.
    pub fn solve_lower(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol
            .l_dirty()
            .solve_lower_triangular(b)
            .expect("cholesky factor has a nonzero diagonal")
    }

    /// `L z`.
    pub fn mul_lower(&self, z: &DVector<f64>) -> DVector<f64> {
        let l = self.chol.l_dirty();
        let n = z.len();
        let mut out = DVector::zeros(n);
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..=i {
                s += l[(i, j)] * z[j];
            }
            out[i] = s;
        }
        out
    }

    pub fn ln_det(&self) -> f64 {
        let l = self.chol.l_dirty();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }
}

/// Factorizes `a = L Lᵀ`. If plain factorization fails, a diagonal nugget
/// starting at `1e-8 · mean(diag)` is added and escalated ×10 up to three times.
pub fn chol_spd(a: &DMatrix<f64>) -> Result<SpdFactor> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    if !a.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("matrix to factorize"));
    }
    if let Some(chol) = Cholesky::new(a.clone()) {
        return Ok(SpdFactor { chol, nugget: 0.0 });
    }
    let n = a.nrows();
    let scale = if n == 0 {
        1.0
    } else {
        a.trace().abs() / n as f64
    };
    let mut nugget = NUGGET_START * scale.max(f64::MIN_POSITIVE);
    for _ in 0..NUGGET_ESCALATIONS {
        let mut b = a.clone();
        for i in 0..n {
            b[(i, i)] += nugget;
        }
        if let Some(chol) = Cholesky::new(b) {
            return Ok(SpdFactor { chol, nugget });
        }
        nugget *= 10.0;
    }
    Err(Error::NotPositiveDefinite)
}

/// Conditional distribution of the `query_idx` components of N(mean, cov)
/// given `observed_idx` components equal to `observed_vals`.
pub fn mvn_conditional(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    observed_idx: &[usize],
    observed_vals: &[f64],
    query_idx: &[usize],
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = mean.len();
    if cov.nrows() != n || cov.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: cov.nrows(),
        });
    }
    if observed_idx.len() != observed_vals.len() {
        return Err(Error::DimensionMismatch {
            expected: observed_idx.len(),
            got: observed_vals.len(),
        });
    }
    let mut seen = vec![false; n];
    for &i in observed_idx.iter().chain(query_idx) {
        if i >= n {
            return Err(Error::InvalidArgument(format!(
                "index {i} out of range 0..{n}"
            )));
        }
        if seen[i] {
            return Err(Error::InvalidArgument(format!(
                "index {i} repeated or in both observed and query sets"
            )));
        }
        seen[i] = true;
    }
    let q = query_idx.len();
    let o = observed_idx.len();
    let mu_q = DVector::from_iterator(q, query_idx.iter().map(|&i| mean[i]));
    let cov_qq = DMatrix::from_fn(q, q, |a, b| cov[(query_idx[a], query_idx[b])]);
    if o == 0 {
        return Ok((mu_q, cov_qq));
    }
    let cov_oo = DMatrix::from_fn(o, o, |a, b| cov[(observed_idx[a], observed_idx[b])]);
    let cov_oq = DMatrix::from_fn(o, q, |a, b| cov[(observed_idx[a], query_idx[b])]);
    let resid = DVector::from_iterator(
        o,
        observed_idx
            .iter()
            .zip(observed_vals)
            .map(|(&i, &v)| v - mean[i]),
    );
    let factor = chol_spd(&cov_oo)?;
    let cond_mean = mu_q + cov_oq.transpose() * factor.solve(&resid);
    let w = factor.solve_mat(&cov_oq);
    let mut cond_cov = cov_qq - cov_oq.transpose() * w;
    // Symmetrize away rounding.
    for a in 0..q {
        for b in 0..a {
            let s = 0.5 * (cond_cov[(a, b)] + cond_cov[(b, a)]);
            cond_cov[(a, b)] = s;
            cond_cov[(b, a)] = s;
        }
    }
    Ok((cond_mean, cond_cov))
}
