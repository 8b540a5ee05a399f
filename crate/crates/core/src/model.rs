//! Truncated DDP-GP mixture for one transition's log sojourn time.
//!
//! For covariates `x`, the log time has density
//!
//! ```text
//! F(y | x) = Σ_h w_h N(y; θ_h(x), σ),   θ_h ~ GP(x β_h, C),   β_h ~ N(β₀, Σ₀)
//! ```
//!
//! with stick-breaking weights `w_h = v_h Π_{r<h} (1 − v_r)`, `v_H = 1`.
//! Cluster locations are carried at the training rows; at a new covariate
//! vector they are evaluated by the GP conditional mean given those values.
//! A cluster with no allocated records is evaluated at its prior mean `x β_h`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::baselines::{aft_mle, AftDistribution};
use crate::data::{Standardizer, TransitionSet};
use crate::kernel::{chol_spd, covariance_matrix, cross_covariance, KernelConfig, SpdFactor};
use crate::mcmc::PosteriorDraws;
use crate::stats::{log_sum_exp, normal_cdf, normal_ln_density};
use crate::{Error, Result};

pub const DEFAULT_TRUNCATION: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdpGpHyperparams {
    /// Prior mean of every cluster's β_h.
    pub beta0: Vec<f64>,
    /// Diagonal of the prior covariance of β_h.
    pub sigma0_diag: Vec<f64>,
    /// Gamma(shape λ₁, rate λ₂) prior on the kernel precision σ⁻².
    pub lambda1: f64,
    pub lambda2: f64,
    /// Gamma(shape λ₃, rate λ₄) prior on the total mass α.
    pub lambda3: f64,
    pub lambda4: f64,
    pub truncation: usize,
    pub kernel: KernelConfig,
}

impl DdpGpHyperparams {
    pub fn n_covariates(&self) -> usize {
        self.beta0.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.beta0.len() != self.sigma0_diag.len() {
            return Err(Error::DimensionMismatch {
                expected: self.beta0.len(),
                got: self.sigma0_diag.len(),
            });
        }
        if self.beta0.is_empty() {
            return bad("beta0 must be nonempty");
        }
        if self
            .sigma0_diag
            .iter()
            .any(|v| !(*v > 0.0 && v.is_finite()))
        {
            return bad("Sigma0 diagonal entries must be positive");
        }
        if self.beta0.iter().any(|v| !v.is_finite()) {
            return bad("beta0 must be finite");
        }
        for (name, v) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
            ("lambda4", self.lambda4),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.truncation < 2 {
            return bad("truncation H must be at least 2");
        }
        self.kernel.validate()
    }
}

/// One state of the blocked Gibbs sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdpGpState {
    /// Stick fractions `v_1..v_H`, with `v_H = 1`.
    pub sticks: Vec<f64>,
    pub weights: Vec<f64>,
    /// Per cluster, length M.
    pub betas: Vec<Vec<f64>>,
    /// Per cluster, GP values at the n training rows.
    pub thetas: Vec<Vec<f64>>,
    pub sigma: f64,
    pub alpha: f64,
    pub allocations: Vec<usize>,
    /// Current log times: observed values, or imputations for censored records.
    pub y: Vec<f64>,
}

impl DdpGpState {
    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.weights.len()];
        for &a in &self.allocations {
            c[a] += 1;
        }
        c
    }

    pub fn n_occupied(&self) -> usize {
        self.counts().iter().filter(|&&c| c > 0).count()
    }

    /// Compact copy kept as a posterior draw.
    pub fn snapshot(&self) -> DrawSnapshot {
        let counts = self.counts();
        DrawSnapshot {
            weights: self.weights.clone(),
            betas: self.betas.clone(),
            thetas: self
                .thetas
                .iter()
                .zip(&counts)
                .map(|(t, &c)| (c > 0).then(|| t.clone()))
                .collect(),
            counts,
            sigma: self.sigma,
            alpha: self.alpha,
        }
    }
}

/// A kept posterior draw. Location values are stored only for occupied
/// clusters; empty clusters are evaluated at their prior mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawSnapshot {
    pub weights: Vec<f64>,
    pub betas: Vec<Vec<f64>>,
    pub thetas: Vec<Option<Vec<f64>>>,
    pub counts: Vec<usize>,
    pub sigma: f64,
    pub alpha: f64,
}

/// Stick-breaking weights `w_h = v_h Π_{r<h} (1 − v_r)`.
pub fn stick_breaking(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::Empty("stick fractions"));
    }
    if v.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
        return Err(Error::InvalidArgument(
            "stick fractions must lie in (0, 1]".into(),
        ));
    }
    if *v.last().unwrap() != 1.0 {
        return Err(Error::InvalidArgument(
            "last stick fraction must be 1".into(),
        ));
    }
    let mut rest = 1.0;
    let mut w = Vec::with_capacity(v.len());
    for &vh in &v[..v.len() - 1] {
        w.push(vh * rest);
        rest *= 1.0 - vh;
    }
    // The final stick takes the exact remainder so the weights sum to 1.
    let head: f64 = w.iter().sum();
    w.push((1.0 - head).max(0.0));
    Ok(w)
}

/// Training covariates (standardized) and the factorized GP covariance.
#[derive(Debug, Clone)]
pub struct GpContext {
    pub x: DMatrix<f64>,
    pub cov: DMatrix<f64>,
    pub factor: SpdFactor,
}

impl GpContext {
    pub fn new(x: DMatrix<f64>, kernel: &KernelConfig) -> Result<Self> {
        let cov = covariance_matrix(&x, kernel)?;
        let factor = chol_spd(&cov)?;
        Ok(Self { x, cov, factor })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn m(&self) -> usize {
        self.x.ncols()
    }

    /// `C⁻¹ (θ − X β)`, the weights of the GP conditional mean.
    pub fn representer(&self, theta: &[f64], beta: &[f64]) -> DVector<f64> {
        let mean = &self.x * DVector::from_column_slice(beta);
        let resid = DVector::from_column_slice(theta) - mean;
        self.factor.solve(&resid)
    }
}

/// Where a cluster location is evaluated.
#[derive(Debug, Clone, Copy)]
pub enum Location<'a> {
    /// The i-th training row: the stored value itself.
    TrainingRow(usize),
    /// Standardized covariates of a new patient.
    Covariates(&'a [f64]),
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cluster locations θ_h at `loc` for one draw.
pub fn cluster_locations(
    draw: &DrawSnapshot,
    ctx: &GpContext,
    loc: Location<'_>,
) -> Result<Vec<f64>> {
    match loc {
        Location::TrainingRow(i) => {
            if i >= ctx.n() {
                return Err(Error::InvalidArgument(format!(
                    "training row {i} out of range"
                )));
            }
            let xi: Vec<f64> = ctx.x.row(i).iter().copied().collect();
            Ok(draw
                .thetas
                .iter()
                .zip(&draw.betas)
                .map(|(t, b)| match t {
                    Some(t) => t[i],
                    None => dot(&xi, b),
                })
                .collect())
        }
        Location::Covariates(x) => {
            if x.len() != ctx.m() {
                return Err(Error::DimensionMismatch {
                    expected: ctx.m(),
                    got: x.len(),
                });
            }
            let k = cross_covariance(&ctx.x, x)?;
            Ok(draw
                .thetas
                .iter()
                .zip(&draw.betas)
                .map(|(t, b)| match t {
                    Some(t) => dot(x, b) + k.dot(&ctx.representer(t, b)),
                    None => dot(x, b),
                })
                .collect())
        }
    }
}

/// log Σ_h w_h N(y; θ_h(x), σ).
pub fn mixture_log_density(
    y: f64,
    loc: Location<'_>,
    draw: &DrawSnapshot,
    ctx: &GpContext,
) -> Result<f64> {
    let theta = cluster_locations(draw, ctx, loc)?;
    Ok(ln_mixture(y, &draw.weights, &theta, draw.sigma))
}

pub(crate) fn ln_mixture(y: f64, weights: &[f64], theta: &[f64], sigma: f64) -> f64 {
    let terms: Vec<f64> = weights
        .iter()
        .zip(theta)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, t)| w.ln() + normal_ln_density(y, *t, sigma))
        .collect();
    log_sum_exp(&terms)
}

/// log P(Y > y) under the mixture.
pub(crate) fn ln_mixture_survival(y: f64, weights: &[f64], theta: &[f64], sigma: f64) -> f64 {
    let terms: Vec<f64> = weights
        .iter()
        .zip(theta)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, t)| w.ln() + crate::stats::normal_ln_sf((y - t) / sigma))
        .collect();
    log_sum_exp(&terms)
}

/// One draw prepared for repeated evaluation at new covariates.
#[derive(Debug, Clone)]
struct PreparedDraw {
    weights: Vec<f64>,
    betas: Vec<Vec<f64>>,
    /// `C⁻¹(θ_h − Xβ_h)` for occupied clusters.
    representers: Vec<Option<DVector<f64>>>,
    sigma: f64,
}

/// Posterior predictive evaluation for a fitted transition. Inputs are raw
/// covariates; the fitted standardizer is applied internally.
#[derive(Debug, Clone)]
pub struct Predictor {
    pub standardizer: Standardizer,
    ctx: GpContext,
    draws: Vec<PreparedDraw>,
}

impl Predictor {
    pub fn new(post: &PosteriorDraws) -> Result<Self> {
        if post.draws.is_empty() {
            return Err(Error::Empty("posterior draws"));
        }
        let ctx = GpContext::new(post.training_matrix(), &post.hyper.kernel)?;
        let draws = post
            .draws
            .iter()
            .map(|d| PreparedDraw {
                weights: d.weights.clone(),
                betas: d.betas.clone(),
                representers: d
                    .thetas
                    .iter()
                    .zip(&d.betas)
                    .map(|(t, b)| t.as_ref().map(|t| ctx.representer(t, b)))
                    .collect(),
                sigma: d.sigma,
            })
            .collect();
        Ok(Self {
            standardizer: post.standardizer.clone(),
            ctx,
            draws,
        })
    }

    pub fn n_draws(&self) -> usize {
        self.draws.len()
    }

    pub fn standardize(&self, raw_x: &[f64]) -> Result<Vec<f64>> {
        self.standardizer.apply(raw_x)
    }

    /// Kernel vector between standardized `x` and the training rows.
    pub fn kernel_vector(&self, x_std: &[f64]) -> Result<DVector<f64>> {
        cross_covariance(&self.ctx.x, x_std)
    }

    /// Cluster locations for draw `d` given the standardized covariates and
    /// their kernel vector.
    pub fn locations_into(&self, d: usize, x_std: &[f64], k: &DVector<f64>, out: &mut Vec<f64>) {
        let draw = &self.draws[d];
        out.clear();
        out.extend(draw.betas.iter().zip(&draw.representers).map(|(b, r)| {
            let prior = dot(x_std, b);
            match r {
                Some(r) => prior + k.dot(r),
                None => prior,
            }
        }));
    }

    pub fn weights(&self, d: usize) -> &[f64] {
        &self.draws[d].weights
    }

    pub fn sigma(&self, d: usize) -> f64 {
        self.draws[d].sigma
    }

    /// Draws a log time from the draw-`d` mixture at raw covariates.
    pub fn sample_log_time<R: Rng + ?Sized>(
        &self,
        d: usize,
        raw_x: &[f64],
        rng: &mut R,
    ) -> Result<f64> {
        let x = self.standardize(raw_x)?;
        self.sample_log_time_std(d, &x, rng)
    }

    /// As [`Predictor::sample_log_time`] for standardized covariates. Only the
    /// selected cluster's location is evaluated.
    pub fn sample_log_time_std<R: Rng + ?Sized>(
        &self,
        d: usize,
        x_std: &[f64],
        rng: &mut R,
    ) -> Result<f64> {
        let draw = &self.draws[d];
        let h = sample_index(&draw.weights, rng);
        let mut m = dot(x_std, &draw.betas[h]);
        if let Some(r) = &draw.representers[h] {
            m += self.kernel_vector(x_std)?.dot(r);
        }
        let z: f64 = StandardNormal.sample(rng);
        Ok(m + draw.sigma * z)
    }

    /// Mixture mean `Σ_h w_h θ_h(x)` of the log time under draw `d`.
    pub fn mean_log_time(&self, d: usize, raw_x: &[f64]) -> Result<f64> {
        let x = self.standardize(raw_x)?;
        let k = self.kernel_vector(&x)?;
        let mut loc = Vec::new();
        self.locations_into(d, &x, &k, &mut loc);
        Ok(dot(&self.draws[d].weights, &loc))
    }

    /// Per-draw survival `P(T > t | x)` for `t` in days.
    pub fn survival_by_draw(&self, t: f64, raw_x: &[f64]) -> Result<Vec<f64>> {
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "survival time must be positive, got {t}"
            )));
        }
        let x = self.standardize(raw_x)?;
        let k = self.kernel_vector(&x)?;
        let lt = t.ln();
        let mut loc = Vec::new();
        Ok((0..self.draws.len())
            .map(|d| {
                self.locations_into(d, &x, &k, &mut loc);
                let draw = &self.draws[d];
                let cdf: f64 = draw
                    .weights
                    .iter()
                    .zip(&loc)
                    .map(|(w, m)| w * normal_cdf((lt - m) / draw.sigma))
                    .sum();
                (1.0 - cdf).clamp(0.0, 1.0)
            })
            .collect())
    }

    /// Posterior expected survival over a grid of times, sharing the kernel
    /// evaluation across the grid. Returns per-draw curves (draw-major).
    pub fn survival_curves(&self, times: &[f64], raw_x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if times.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::InvalidArgument(
                "survival times must be positive".into(),
            ));
        }
        let x = self.standardize(raw_x)?;
        let k = self.kernel_vector(&x)?;
        let lts: Vec<f64> = times.iter().map(|t| t.ln()).collect();
        let mut loc = Vec::new();
        Ok((0..self.draws.len())
            .map(|d| {
                self.locations_into(d, &x, &k, &mut loc);
                let draw = &self.draws[d];
                lts.iter()
                    .map(|lt| {
                        let cdf: f64 = draw
                            .weights
                            .iter()
                            .zip(&loc)
                            .map(|(w, m)| w * normal_cdf((lt - m) / draw.sigma))
                            .sum();
                        (1.0 - cdf).clamp(0.0, 1.0)
                    })
                    .collect()
            })
            .collect())
    }

    pub fn survival(&self, t: f64, raw_x: &[f64]) -> Result<f64> {
        let s = self.survival_by_draw(t, raw_x)?;
        Ok(s.iter().sum::<f64>() / s.len() as f64)
    }

    /// Posterior predictive log density and log survival of log time `y`.
    pub fn ln_density_and_survival(&self, y: f64, raw_x: &[f64]) -> Result<(f64, f64)> {
        let x = self.standardize(raw_x)?;
        let k = self.kernel_vector(&x)?;
        let mut loc = Vec::new();
        let mut dens = Vec::with_capacity(self.draws.len());
        let mut surv = Vec::with_capacity(self.draws.len());
        for d in 0..self.draws.len() {
            self.locations_into(d, &x, &k, &mut loc);
            let draw = &self.draws[d];
            dens.push(ln_mixture(y, &draw.weights, &loc, draw.sigma));
            surv.push(ln_mixture_survival(y, &draw.weights, &loc, draw.sigma));
        }
        let ln_d = self.draws.len() as f64;
        Ok((
            log_sum_exp(&dens) - ln_d.ln(),
            log_sum_exp(&surv) - ln_d.ln(),
        ))
    }
}

fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return j;
        }
    }
    weights
        .iter()
        .rposition(|&w| w > 0.0)
        .unwrap_or(weights.len() - 1)
}

/// Posterior expected survival `S̄(t | x)`, averaging over draws.
pub fn predictive_survival(t: f64, raw_x: &[f64], draws: &PosteriorDraws) -> Result<f64> {
    Predictor::new(draws)?.survival(t, raw_x)
}

/// Priors from a preliminary lognormal AFT fit on the standardized design:
/// `β₀` = MLE coefficients, `Σ₀` = their estimated variances, and the
/// precision prior moment-matched to mean `σ̂⁻²`, variance 1
/// (`λ₂ = σ̂⁻²`, `λ₁ = σ̂⁻⁴`). The total mass gets Gamma(1, 1).
pub fn empirical_bayes_hyperparams(
    records: &TransitionSet,
    truncation: usize,
    kernel: KernelConfig,
) -> Result<DdpGpHyperparams> {
    let (_, x) = records.standardized()?;
    let y: Vec<f64> = records.records.iter().map(|r| r.y).collect();
    let delta: Vec<bool> = records.records.iter().map(|r| r.delta).collect();
    empirical_bayes_from_design(&x, &y, &delta, truncation, kernel)
}

pub fn empirical_bayes_from_design(
    x: &DMatrix<f64>,
    y: &[f64],
    delta: &[bool],
    truncation: usize,
    kernel: KernelConfig,
) -> Result<DdpGpHyperparams> {
    let m = x.ncols();
    if y.len() < m + 2 {
        return Err(Error::InvalidArgument(format!(
            "empirical Bayes needs at least {} records, got {}",
            m + 2,
            y.len()
        )));
    }
    let fit = aft_mle(x, y, delta, AftDistribution::Lognormal)?;
    let prec = fit.scale.powi(-2);
    let hyper = DdpGpHyperparams {
        beta0: fit.coefficients.clone(),
        sigma0_diag: (0..m).map(|j| fit.covariance[j][j]).collect(),
        lambda1: prec * prec,
        lambda2: prec,
        lambda3: 1.0,
        lambda4: 1.0,
        truncation,
        kernel,
    };
    hyper.validate()?;
    Ok(hyper)
}

impl TransitionSet {
    /// Standardizer fitted on this set and the standardized design.
    pub fn standardized(&self) -> Result<(Standardizer, DMatrix<f64>)> {
        let raw = self.design()?;
        let s = Standardizer::fit(&raw, &self.kinds)?;
        let x = s.apply_matrix(&raw)?;
        Ok((s, x))
    }
}
