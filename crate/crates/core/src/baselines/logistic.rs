use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::is_full_rank;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub coefficients: Vec<f64>,
    /// Inverse Fisher information, row-major.
    pub covariance: Vec<Vec<f64>>,
    pub log_likelihood: f64,
    pub iterations: usize,
}

#[inline]
fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^η), stable both ways.
#[inline]
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

fn log_lik(x: &DMatrix<f64>, z: &[bool], beta: &DVector<f64>) -> f64 {
    let eta = x * beta;
    z.iter()
        .zip(eta.iter())
        .map(|(&zi, &e)| if zi { -softplus(-e) } else { -softplus(e) })
        .sum()
}

impl LogisticFit {
    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum())
    }

    pub fn log_likelihood_at(x: &DMatrix<f64>, z: &[bool], beta: &[f64]) -> f64 {
        log_lik(x, z, &DVector::from_column_slice(beta))
    }

    pub fn gradient_at(x: &DMatrix<f64>, z: &[bool], beta: &[f64]) -> Vec<f64> {
        let eta = x * DVector::from_column_slice(beta);
        let r = DVector::from_iterator(
            z.len(),
            z.iter()
                .zip(eta.iter())
                .map(|(&zi, &e)| zi as u8 as f64 - sigmoid(e)),
        );
        (x.transpose() * r).iter().copied().collect()
    }
}

/// Iteratively reweighted least squares for `P(z = 1 | x) = logistic(x β)`.
pub fn logistic_irls(x: &DMatrix<f64>, z: &[bool]) -> Result<LogisticFit> {
    let n = z.len();
    if x.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.nrows(),
        });
    }
    if n == 0 {
        return Err(Error::Empty("logistic regression data"));
    }
    if !is_full_rank(x) {
        return Err(Error::RankDeficient);
    }
    let m = x.ncols();
    let mut beta = DVector::zeros(m);
    let mut ll = log_lik(x, z, &beta);
    const MAX_ITER: usize = 100;
    for it in 1..=MAX_ITER {
        let eta = x * &beta;
        let p: Vec<f64> = eta.iter().map(|&e| sigmoid(e)).collect();
        let w: Vec<f64> = p.iter().map(|&pi| pi * (1.0 - pi)).collect();
        let grad = DVector::from_iterator(
            m,
            (0..m).map(|j| {
                (0..n)
                    .map(|i| x[(i, j)] * (z[i] as u8 as f64 - p[i]))
                    .sum::<f64>()
            }),
        );
        let gnorm = grad.norm();
        let fitted_with_certainty = w.iter().all(|&wi| wi < 1e-10);
        if fitted_with_certainty || beta.amax() > 1e3 {
            return Err(Error::Separation);
        }
        let mut info = DMatrix::zeros(m, m);
        for i in 0..n {
            for a in 0..m {
                let xa = x[(i, a)] * w[i];
                for b in 0..=a {
                    info[(a, b)] += xa * x[(i, b)];
                }
            }
        }
        for a in 0..m {
            for b in 0..a {
                info[(b, a)] = info[(a, b)];
            }
        }
        let chol = info.clone().cholesky().ok_or(Error::Separation)?;
        if gnorm < 1e-10 {
            let cov = chol.inverse();
            // Weights collapsing on most records means a separating direction.
            let confident = w.iter().filter(|&&wi| wi < 1e-8).count();
            if confident * 10 > n * 9 {
                return Err(Error::Separation);
            }
            return Ok(LogisticFit {
                coefficients: beta.iter().copied().collect(),
                covariance: (0..m)
                    .map(|a| cov.row(a).iter().copied().collect())
                    .collect(),
                log_likelihood: ll,
                iterations: it,
            });
        }
        let dir = chol.solve(&grad);
        let mut step = 1.0;
        loop {
            let cand = &beta + &dir * step;
            let cll = log_lik(x, z, &cand);
            if cll >= ll - 1e-12 * ll.abs() || step < 1e-10 {
                beta = cand;
                ll = cll;
                break;
            }
            step *= 0.5;
        }
    }
    if beta.amax() > 30.0 {
        Err(Error::Separation)
    } else {
        Err(Error::NoConvergence(MAX_ITER))
    }
}
