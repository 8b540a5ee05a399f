//! Accelerated failure time regression, `log T = x β + σ ε`, by maximum
//! likelihood under right censoring. The error `ε` is standard normal
//! (lognormal AFT) or minimum extreme value (Weibull AFT).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use super::is_full_rank;
use crate::stats::{normal_cdf, normal_hazard, normal_ln_pdf, normal_ln_sf};
use crate::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AftDistribution {
    Lognormal,
    Weibull,
}

impl AftDistribution {
    fn ln_density(self, z: f64) -> f64 {
        match self {
            Self::Lognormal => normal_ln_pdf(z),
            Self::Weibull => z - z.exp(),
        }
    }

    fn ln_survival(self, z: f64) -> f64 {
        match self {
            Self::Lognormal => normal_ln_sf(z),
            Self::Weibull => -z.exp(),
        }
    }

    /// First and second derivatives in `z` of the per-record log-likelihood.
    fn derivatives(self, z: f64, event: bool) -> (f64, f64) {
        match (self, event) {
            (Self::Lognormal, true) => (-z, -1.0),
            (Self::Lognormal, false) => {
                let h = normal_hazard(z);
                (-h, -h * (h - z))
            }
            (Self::Weibull, true) => {
                let e = z.exp();
                (1.0 - e, -e)
            }
            (Self::Weibull, false) => {
                let e = z.exp();
                (-e, -e)
            }
        }
    }

    fn mean_error(self) -> f64 {
        match self {
            Self::Lognormal => 0.0,
            Self::Weibull => -EULER_GAMMA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AftFit {
    pub distribution: AftDistribution,
    pub coefficients: Vec<f64>,
    pub scale: f64,
    pub log_likelihood: f64,
    /// Inverse observed information over `(β, log σ)`, row-major.
    pub covariance: Vec<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct AftOptions {
    pub max_iter: usize,
    /// Convergence when `max |∂ℓ/∂θ| / n` falls below this.
    pub grad_tol: f64,
}

impl Default for AftOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            grad_tol: 1e-10,
        }
    }
}

struct Objective<'a> {
    x: &'a DMatrix<f64>,
    y: &'a [f64],
    delta: &'a [bool],
    dist: AftDistribution,
}

impl Objective<'_> {
    fn split<'p>(&self, p: &'p DVector<f64>) -> (nalgebra::DVectorView<'p, f64>, f64) {
        let m = self.x.ncols();
        (p.rows(0, m), p[m])
    }

    fn log_lik(&self, p: &DVector<f64>) -> f64 {
        let (beta, eta) = self.split(p);
        let sigma = eta.exp();
        let mu = self.x * beta;
        let mut ll = 0.0;
        for i in 0..self.y.len() {
            let z = (self.y[i] - mu[i]) / sigma;
            ll += if self.delta[i] {
                self.dist.ln_density(z) - eta
            } else {
                self.dist.ln_survival(z)
            };
        }
        ll
    }

    /// Log-likelihood, gradient and Hessian in `(β, η = log σ)`.
    fn eval(&self, p: &DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>) {
        let m = self.x.ncols();
        let (beta, eta) = self.split(p);
        let sigma = eta.exp();
        let mu = self.x * beta;
        let mut ll = 0.0;
        let mut g = DVector::zeros(m + 1);
        let mut h = DMatrix::zeros(m + 1, m + 1);
        for i in 0..self.y.len() {
            let z = (self.y[i] - mu[i]) / sigma;
            let ev = self.delta[i];
            ll += if ev {
                self.dist.ln_density(z) - eta
            } else {
                self.dist.ln_survival(z)
            };
            let (a, b) = self.dist.derivatives(z, ev);
            let xi = self.x.row(i);
            let d = ev as u8 as f64;
            for j in 0..m {
                g[j] -= a * xi[j] / sigma;
                for k in 0..=j {
                    h[(j, k)] += b * xi[j] * xi[k] / (sigma * sigma);
                }
                h[(m, j)] += xi[j] * (b * z + a) / sigma;
            }
            g[m] += -a * z - d;
            h[(m, m)] += b * z * z + a * z;
        }
        for j in 0..=m {
            for k in 0..j {
                h[(k, j)] = h[(j, k)];
            }
        }
        (ll, g, h)
    }
}

pub fn aft_mle(
    x: &DMatrix<f64>,
    y: &[f64],
    delta: &[bool],
    dist: AftDistribution,
) -> Result<AftFit> {
    aft_mle_with(x, y, delta, dist, &AftOptions::default())
}

/// Newton iterations with step halving, started from least squares.
pub fn aft_mle_with(
    x: &DMatrix<f64>,
    y: &[f64],
    delta: &[bool],
    dist: AftDistribution,
    opts: &AftOptions,
) -> Result<AftFit> {
    let n = y.len();
    if x.nrows() != n || delta.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.nrows().min(delta.len()),
        });
    }
    if !delta.iter().any(|&d| d) {
        return Err(Error::InvalidArgument(
            "AFT fit needs at least one event".into(),
        ));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("log times"));
    }
    if !is_full_rank(x) {
        return Err(Error::RankDeficient);
    }
    let m = x.ncols();

    let ls = super::least_squares(x, y)?;
    let resid_sd = (ls.rss / n as f64).sqrt();
    if resid_sd < 1e-10 {
        return Err(Error::DegenerateScale);
    }
    let mut p = DVector::zeros(m + 1);
    let sigma0 = match dist {
        AftDistribution::Lognormal => resid_sd,
        AftDistribution::Weibull => resid_sd * 6f64.sqrt() / std::f64::consts::PI,
    };
    for j in 0..m {
        p[j] = ls.coefficients[j];
    }
    // Intercept absorbs the error mean when the first column is constant.
    if (0..n).all(|i| x[(i, 0)] == 1.0) {
        p[0] -= sigma0 * dist.mean_error();
    }
    p[m] = sigma0.ln();

    let obj = Objective { x, y, delta, dist };
    let mut converged = false;
    let mut iterations = 0;
    let (mut ll, mut g, mut h) = obj.eval(&p);
    for it in 0..opts.max_iter {
        iterations = it + 1;
        if g.amax() / n as f64 <= opts.grad_tol {
            converged = true;
            break;
        }
        let neg_h = -&h;
        let dir = match neg_h.clone().cholesky() {
            Some(c) => c.solve(&g),
            None => {
                // Not concave here: damp toward gradient ascent.
                let mut damped = neg_h;
                let shift = h.diagonal().amax().max(1.0);
                for j in 0..=m {
                    damped[(j, j)] += shift;
                }
                match damped.cholesky() {
                    Some(c) => c.solve(&g),
                    None => g.clone() / shift,
                }
            }
        };
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = &p + &dir * step;
            let cll = obj.log_lik(&cand);
            if cll.is_finite() && cll >= ll - 1e-12 * ll.abs().max(1.0) {
                p = cand;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if p[m] < -30.0 {
            return Err(Error::DegenerateScale);
        }
        (ll, g, h) = obj.eval(&p);
        if !accepted {
            converged = g.amax() / n as f64 <= opts.grad_tol.max(1e-8);
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence(iterations));
    }
    let cov = (-&h).try_inverse().ok_or(Error::RankDeficient)?;
    Ok(AftFit {
        distribution: dist,
        coefficients: p.rows(0, m).iter().copied().collect(),
        scale: p[m].exp(),
        log_likelihood: ll,
        covariance: (0..=m)
            .map(|i| cov.row(i).iter().copied().collect())
            .collect(),
        converged,
        iterations,
    })
}

impl AftFit {
    pub fn n_coefficients(&self) -> usize {
        self.coefficients.len()
    }

    /// Standard errors of the regression coefficients.
    pub fn coef_std_errors(&self) -> Vec<f64> {
        (0..self.coefficients.len())
            .map(|j| self.covariance[j][j].max(0.0).sqrt())
            .collect()
    }

    pub fn location(&self, x: &[f64]) -> f64 {
        self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum()
    }

    /// log density of `y = log t`.
    pub fn ln_density(&self, y: f64, x: &[f64]) -> f64 {
        let z = (y - self.location(x)) / self.scale;
        self.distribution.ln_density(z) - self.scale.ln()
    }

    /// log P(Y > y).
    pub fn ln_survival(&self, y: f64, x: &[f64]) -> f64 {
        let z = (y - self.location(x)) / self.scale;
        self.distribution.ln_survival(z)
    }

    /// P(T > t) for `t > 0` in days.
    pub fn survival(&self, t: f64, x: &[f64]) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        let z = (t.ln() - self.location(x)) / self.scale;
        match self.distribution {
            AftDistribution::Lognormal => 1.0 - normal_cdf(z),
            AftDistribution::Weibull => (-z.exp()).exp(),
        }
    }

    pub fn sample_log_time<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> f64 {
        let eps = match self.distribution {
            AftDistribution::Lognormal => StandardNormal.sample(rng),
            AftDistribution::Weibull => {
                let e: f64 = Exp1.sample(rng);
                e.ln()
            }
        };
        self.location(x) + self.scale * eps
    }

    /// Gradient of the log-likelihood at the stored estimate.
    pub fn gradient_at(
        &self,
        x: &DMatrix<f64>,
        y: &[f64],
        delta: &[bool],
        params: &[f64],
    ) -> Vec<f64> {
        let obj = Objective {
            x,
            y,
            delta,
            dist: self.distribution,
        };
        obj.eval(&DVector::from_column_slice(params))
            .1
            .iter()
            .copied()
            .collect()
    }

    /// Log-likelihood at arbitrary `(β, log σ)`.
    pub fn log_likelihood_at(
        &self,
        x: &DMatrix<f64>,
        y: &[f64],
        delta: &[bool],
        params: &[f64],
    ) -> f64 {
        Objective {
            x,
            y,
            delta,
            dist: self.distribution,
        }
        .log_lik(&DVector::from_column_slice(params))
    }

    /// `(β, log σ)` at the estimate.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.coefficients.clone();
        p.push(self.scale.ln());
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn intercept_only_lognormal_is_normal_mle() {
        let y = [0.3, 1.2, -0.4, 2.0, 0.9];
        let x = DMatrix::from_element(5, 1, 1.0);
        let fit = aft_mle(&x, &y, &[true; 5], AftDistribution::Lognormal).unwrap();
        let mean = y.iter().sum::<f64>() / 5.0;
        let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 5.0;
        assert!((fit.coefficients[0] - mean).abs() < 1e-10);
        assert!((fit.scale * fit.scale - var).abs() < 1e-10);
    }

    #[test]
    fn zero_variance_is_degenerate() {
        let x = DMatrix::from_element(4, 1, 1.0);
        let r = aft_mle(&x, &[1.0; 4], &[true; 4], AftDistribution::Weibull);
        assert!(matches!(r, Err(Error::DegenerateScale)));
    }

    #[test]
    fn rank_deficient_and_no_events() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        assert!(matches!(
            aft_mle(&x, &[0.0, 1.0, 2.0], &[true; 3], AftDistribution::Lognormal),
            Err(Error::RankDeficient)
        ));
        let x = DMatrix::from_element(3, 1, 1.0);
        assert!(aft_mle(
            &x,
            &[0.0, 1.0, 2.0],
            &[false; 3],
            AftDistribution::Lognormal
        )
        .is_err());
    }

    #[test]
    fn weibull_recovers_truth_under_censoring() {
        let mut rng = stream(2024, &[]);
        let truth = AftFit {
            distribution: AftDistribution::Weibull,
            coefficients: vec![0.5, -0.3],
            scale: 0.7,
            log_likelihood: 0.0,
            covariance: vec![],
            converged: true,
            iterations: 0,
        };
        let n = 2000;
        let mut rows = Vec::with_capacity(2 * n);
        let mut y = Vec::with_capacity(n);
        let mut delta = Vec::with_capacity(n);
        // Censoring time drawn so that roughly 20% of records are censored.
        for _ in 0..n {
            let xv: f64 = rng.random_range(-1.5..1.5);
            let t = truth.sample_log_time(&[1.0, xv], &mut rng);
            let c: f64 = 0.2 + rng.random_range(0.0..1.5f64);
            rows.extend([1.0, xv]);
            y.push(t.min(c));
            delta.push(t <= c);
        }
        let cens = delta.iter().filter(|d| !**d).count() as f64 / n as f64;
        assert!((0.1..0.3).contains(&cens), "censoring {cens}");
        let x = DMatrix::from_row_slice(n, 2, &rows);
        let fit = aft_mle(&x, &y, &delta, AftDistribution::Weibull).unwrap();
        let se = fit.coef_std_errors();
        for j in 0..2 {
            assert!(
                (fit.coefficients[j] - truth.coefficients[j]).abs() < 3.0 * se[j],
                "coef {j}: {} ± {}",
                fit.coefficients[j],
                se[j]
            );
        }
        assert!((fit.scale - 0.7).abs() < 0.05);
    }
}
