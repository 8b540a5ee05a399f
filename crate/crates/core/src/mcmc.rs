//! Blocked Gibbs sampler for the truncated DDP-GP and chain diagnostics.
//!
//! One sweep updates, in order:
//!
//! 1. allocations `c_i ∝ w_h N(y_i; θ_h(x_i), σ)`;
//! 2. sticks `v_h ~ Be(1 + n_h, α + Σ_{l>h} n_l)`, `v_H = 1`;
//! 3. each cluster's `(β_h, θ_h)` jointly: `β_h` given the allocated log times
//!    with `θ_h` integrated out, then `θ_h` given `β_h` by pathwise
//!    conditioning of a prior GP draw. Empty clusters are drawn from the prior;
//! 4. the precision `σ⁻² ~ Ga(λ₁ + n/2, λ₂ + ½ Σ (y_i − θ_{c_i}(x_i))²)`;
//! 5. `α ~ Ga(λ₃ + H − 1, λ₄ − Σ_{h<H} log(1 − v_h))`;
//! 6. censored log times from `N(θ_{c_i}(x_i), σ)` truncated to `(y_i^cens, ∞)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::data::{CovariateKind, Standardizer, TransitionId, TransitionSet};
use crate::kernel::chol_spd;
use crate::model::{stick_breaking, DdpGpHyperparams, DdpGpState, DrawSnapshot, GpContext};
use crate::rng::{stream, PURPOSE_FIT};
use crate::stats::{mean, sample_truncated_normal_below, LN_SQRT_2PI};
use crate::{Error, Result};

pub const DRAWS_FORMAT_VERSION: u32 = 1;

/// Stick fractions are kept strictly inside (0, 1) so that `log(1 − v)` and
/// the weights stay finite.
const STICK_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub burn_in: usize,
    /// Total number of sweeps, including burn-in.
    pub total: usize,
    /// Keep every `thin`-th sweep after burn-in.
    pub thin: usize,
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            burn_in: 2000,
            total: 5000,
            thin: 10,
            seed: 0,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::InvalidArgument("thin must be at least 1".into()));
        }
        if self.total <= self.burn_in {
            return Err(Error::InvalidArgument(format!(
                "total iterations ({}) must exceed burn-in ({})",
                self.total, self.burn_in
            )));
        }
        if self.n_kept() == 0 {
            return Err(Error::InvalidArgument(
                "configuration keeps no draws".into(),
            ));
        }
        Ok(())
    }

    pub fn n_kept(&self) -> usize {
        self.total.saturating_sub(self.burn_in) / self.thin
    }

    /// Whether sweep `it` (1-based) is kept.
    pub fn keeps(&self, it: usize) -> bool {
        it > self.burn_in && (it - self.burn_in).is_multiple_of(self.thin)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub log_posterior: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub n_occupied_clusters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub ess_log_posterior: f64,
    pub ess_sigma: f64,
    pub ess_alpha: f64,
    pub mean_occupied_clusters: f64,
    /// Fraction of allocations that changed per sweep, averaged after burn-in.
    pub allocation_change_rate: f64,
    /// Names of traced scalars that never moved.
    pub constant_chains: Vec<String>,
}

/// Kept draws of one transition model plus what is needed to evaluate them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub format_version: u32,
    pub transition: TransitionId,
    pub name: String,
    pub hyper: DdpGpHyperparams,
    pub config: McmcConfig,
    pub kinds: Vec<CovariateKind>,
    pub standardizer: Standardizer,
    /// Standardized training covariates, one row per record.
    pub training_x: Vec<Vec<f64>>,
    pub draws: Vec<DrawSnapshot>,
    pub trace: Vec<TraceRow>,
    pub diagnostics: ChainDiagnostics,
}

impl PosteriorDraws {
    pub fn training_matrix(&self) -> DMatrix<f64> {
        let n = self.training_x.len();
        let m = self.hyper.n_covariates();
        DMatrix::from_fn(n, m, |i, j| self.training_x[i][j])
    }

    pub fn check_version(&self) -> Result<()> {
        if self.format_version != DRAWS_FORMAT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported posterior draws format version {} (expected {})",
                self.format_version, DRAWS_FORMAT_VERSION
            )));
        }
        Ok(())
    }

    /// Trace as CSV text: `iteration,log_posterior,sigma,alpha,n_occupied_clusters`.
    pub fn trace_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.trace {
            w.serialize(row)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Fixed data and priors for one chain.
#[derive(Debug, Clone)]
pub struct Sampler {
    pub hyper: DdpGpHyperparams,
    /// `None` when there are no records (prior sampling).
    ctx: Option<GpContext>,
    /// Observed log time, or the censoring bound for censored records.
    pub y_obs: Vec<f64>,
    pub censored: Vec<bool>,
}

impl Sampler {
    /// `x` is the standardized n × M design.
    pub fn new(
        x: DMatrix<f64>,
        y_obs: Vec<f64>,
        censored: Vec<bool>,
        hyper: DdpGpHyperparams,
    ) -> Result<Self> {
        hyper.validate()?;
        if x.ncols() != hyper.n_covariates() {
            return Err(Error::DimensionMismatch {
                expected: hyper.n_covariates(),
                got: x.ncols(),
            });
        }
        if y_obs.len() != x.nrows() || censored.len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: y_obs.len().min(censored.len()),
            });
        }
        if y_obs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("log times"));
        }
        let ctx = if x.nrows() == 0 {
            None
        } else {
            Some(GpContext::new(x, &hyper.kernel)?)
        };
        Ok(Self {
            hyper,
            ctx,
            y_obs,
            censored,
        })
    }

    pub fn n(&self) -> usize {
        self.y_obs.len()
    }

    pub fn context(&self) -> Option<&GpContext> {
        self.ctx.as_ref()
    }

    fn big_h(&self) -> usize {
        self.hyper.truncation
    }

    fn sample_beta_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.hyper
            .beta0
            .iter()
            .zip(&self.hyper.sigma0_diag)
            .map(|(m, v)| m + v.sqrt() * std_normal(rng))
            .collect()
    }

    /// `X β + L z`, a draw of θ from its GP prior.
    fn sample_theta_prior<R: Rng + ?Sized>(&self, beta: &[f64], rng: &mut R) -> DVector<f64> {
        match &self.ctx {
            None => DVector::zeros(0),
            Some(ctx) => {
                let z = DVector::from_fn(ctx.n(), |_, _| std_normal(rng));
                &ctx.x * DVector::from_column_slice(beta) + ctx.factor.mul_lower(&z)
            }
        }
    }

    fn sample_sticks_prior<R: Rng + ?Sized>(&self, alpha: f64, rng: &mut R) -> Vec<f64> {
        let h = self.big_h();
        let mut v: Vec<f64> = (0..h - 1).map(|_| sample_beta(1.0, alpha, rng)).collect();
        v.push(1.0);
        v
    }

    /// Starting state: prior-mean α and σ, β_h = β₀, θ_h = X β₀, random
    /// allocations, censored times placed just above their bounds.
    pub fn init_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DdpGpState> {
        let h = self.big_h();
        let alpha = self.hyper.lambda3 / self.hyper.lambda4;
        let sigma = (self.hyper.lambda1 / self.hyper.lambda2).powf(-0.5);
        let sticks = self.sample_sticks_prior(alpha, rng);
        let weights = stick_breaking(&sticks)?;
        let theta0: Vec<f64> = match &self.ctx {
            None => Vec::new(),
            Some(ctx) => (&ctx.x * DVector::from_column_slice(&self.hyper.beta0))
                .iter()
                .copied()
                .collect(),
        };
        let allocations = (0..self.n()).map(|_| rng.random_range(0..h)).collect();
        let y = self
            .y_obs
            .iter()
            .zip(&self.censored)
            .map(|(&y, &c)| if c { y + 0.5 * sigma } else { y })
            .collect();
        Ok(DdpGpState {
            sticks,
            weights,
            betas: vec![self.hyper.beta0.clone(); h],
            thetas: vec![theta0; h],
            sigma,
            alpha,
            allocations,
            y,
        })
    }

    /// A draw of every parameter from the prior and of `y` given it (no
    /// censoring). Used for prior-predictive and sampler-validation checks.
    pub fn sample_prior_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DdpGpState> {
        let h = self.big_h();
        let alpha = sample_gamma(self.hyper.lambda3, self.hyper.lambda4, rng);
        let sticks = self.sample_sticks_prior(alpha, rng);
        let weights = stick_breaking(&sticks)?;
        let mut betas = Vec::with_capacity(h);
        let mut thetas = Vec::with_capacity(h);
        for _ in 0..h {
            let b = self.sample_beta_prior(rng);
            thetas.push(self.sample_theta_prior(&b, rng).iter().copied().collect());
            betas.push(b);
        }
        let prec = sample_gamma(self.hyper.lambda1, self.hyper.lambda2, rng);
        let mut state = DdpGpState {
            sticks,
            weights,
            betas,
            thetas,
            sigma: prec.powf(-0.5),
            alpha,
            allocations: vec![0; self.n()],
            y: vec![0.0; self.n()],
        };
        for i in 0..self.n() {
            state.allocations[i] = sample_categorical(&state.weights, rng);
        }
        self.resample_data(&mut state, rng);
        Ok(state)
    }

    /// Redraws every `y_i ~ N(θ_{c_i}(x_i), σ)` given the parameters.
    pub fn resample_data<R: Rng + ?Sized>(&self, state: &mut DdpGpState, rng: &mut R) {
        for i in 0..self.n() {
            let m = state.thetas[state.allocations[i]][i];
            state.y[i] = m + state.sigma * std_normal(rng);
        }
    }

    /// One full sweep. Returns the number of allocations that changed.
    pub fn sweep<R: Rng + ?Sized>(
        &self,
        state: &mut DdpGpState,
        iteration: usize,
        rng: &mut R,
    ) -> Result<usize> {
        let h = self.big_h();
        let n = self.n();

        // 1. allocations
        let mut changed = 0;
        let ln_w: Vec<f64> = state.weights.iter().map(|w| w.ln()).collect();
        let mut lp = vec![0.0; h];
        for i in 0..n {
            let yi = state.y[i];
            for k in 0..h {
                let z = (yi - state.thetas[k][i]) / state.sigma;
                lp[k] = ln_w[k] - 0.5 * z * z;
            }
            let c = sample_from_log_weights(&mut lp, rng);
            if c != state.allocations[i] {
                changed += 1;
                state.allocations[i] = c;
            }
        }
        let counts = state.counts();

        // 2. sticks
        let mut tail: usize = counts.iter().sum();
        for k in 0..h - 1 {
            tail -= counts[k];
            state.sticks[k] = sample_beta(1.0 + counts[k] as f64, state.alpha + tail as f64, rng);
        }
        state.sticks[h - 1] = 1.0;
        state.weights = stick_breaking(&state.sticks)?;

        // 3. cluster coefficients and locations
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); h];
        for (i, &c) in state.allocations.iter().enumerate() {
            members[c].push(i);
        }
        for k in 0..h {
            let (beta, theta) = if members[k].is_empty() {
                let b = self.sample_beta_prior(rng);
                let t = self.sample_theta_prior(&b, rng);
                (b, t)
            } else {
                self.sample_cluster(&members[k], &state.y, state.sigma, rng)?
            };
            if beta.iter().any(|v| !v.is_finite()) || theta.iter().any(|v| !v.is_finite()) {
                return Err(Error::SamplerNan {
                    iteration,
                    what: "cluster locations",
                });
            }
            state.betas[k] = beta;
            state.thetas[k] = theta.iter().copied().collect();
        }

        // 4. precision
        let ss: f64 = (0..n)
            .map(|i| {
                let r = state.y[i] - state.thetas[state.allocations[i]][i];
                r * r
            })
            .sum();
        let prec = sample_gamma(
            self.hyper.lambda1 + 0.5 * n as f64,
            self.hyper.lambda2 + 0.5 * ss,
            rng,
        );
        state.sigma = prec.powf(-0.5);
        if !(state.sigma.is_finite() && state.sigma > 0.0) {
            return Err(Error::SamplerNan {
                iteration,
                what: "sigma",
            });
        }

        // 5. total mass
        let s: f64 = state.sticks[..h - 1].iter().map(|v| (1.0 - v).ln()).sum();
        state.alpha = sample_gamma(
            self.hyper.lambda3 + (h - 1) as f64,
            self.hyper.lambda4 - s,
            rng,
        );
        if !(state.alpha.is_finite() && state.alpha > 0.0) {
            return Err(Error::SamplerNan {
                iteration,
                what: "alpha",
            });
        }

        // 6. censored log times
        for i in 0..n {
            if self.censored[i] {
                let m = state.thetas[state.allocations[i]][i];
                state.y[i] = sample_truncated_normal_below(rng, m, state.sigma, self.y_obs[i]);
            }
        }
        Ok(changed)
    }

    /// Joint draw of `(β, θ)` for a cluster with members `a`.
    fn sample_cluster<R: Rng + ?Sized>(
        &self,
        a: &[usize],
        y: &[f64],
        sigma: f64,
        rng: &mut R,
    ) -> Result<(Vec<f64>, DVector<f64>)> {
        let ctx = self.ctx.as_ref().expect("nonempty cluster implies records");
        let na = a.len();
        let m = ctx.m();
        let s2 = sigma * sigma;
        let k_aa = DMatrix::from_fn(na, na, |r, c| {
            ctx.cov[(a[r], a[c])] + if r == c { s2 } else { 0.0 }
        });
        let kf = chol_spd(&k_aa)?;
        let x_a = DMatrix::from_fn(na, m, |r, j| ctx.x[(a[r], j)]);
        let y_a = DVector::from_fn(na, |r, _| y[a[r]]);

        // β | y_A with θ integrated out: y_A ~ N(X_A β, C_AA + σ² I).
        let kinv_x = kf.solve_mat(&x_a);
        let kinv_y = kf.solve(&y_a);
        let mut prec = x_a.transpose() * &kinv_x;
        let mut rhs = x_a.transpose() * &kinv_y;
        for j in 0..m {
            let p0 = 1.0 / self.hyper.sigma0_diag[j];
            prec[(j, j)] += p0;
            rhs[j] += p0 * self.hyper.beta0[j];
        }
        let pf = chol_spd(&prec)?;
        let mean = pf.solve(&rhs);
        let z = DVector::from_fn(m, |_, _| std_normal(rng));
        let dev = pf
            .l_ref()
            .tr_solve_lower_triangular(&z)
            .ok_or(Error::NotPositiveDefinite)?;
        let beta: Vec<f64> = (mean + dev).iter().copied().collect();

        // θ | β, y_A: prior draw corrected towards the noisy observations.
        let f = self.sample_theta_prior(&beta, rng);
        let r = DVector::from_fn(na, |r, _| y_a[r] - f[a[r]] - sigma * std_normal(rng));
        let v = kf.solve(&r);
        let mut theta = f;
        for (col, &ai) in a.iter().enumerate() {
            let vc = v[col];
            theta.axpy(vc, &ctx.cov.column(ai), 1.0);
        }
        Ok((beta, theta))
    }

    /// Log density of the augmented state (imputed times, allocations and all
    /// parameters), with normalizing constants.
    pub fn log_posterior(&self, state: &DdpGpState) -> f64 {
        let h = self.big_h();
        let hp = &self.hyper;
        let mut lp = 0.0;
        let ln_sigma = state.sigma.ln();
        for i in 0..self.n() {
            let c = state.allocations[i];
            let z = (state.y[i] - state.thetas[c][i]) / state.sigma;
            lp += -0.5 * z * z - ln_sigma - LN_SQRT_2PI + state.weights[c].ln();
        }
        let alpha = state.alpha;
        for v in &state.sticks[..h - 1] {
            lp += alpha.ln() + (alpha - 1.0) * (1.0 - v).ln();
        }
        lp += ln_gamma_pdf(alpha, hp.lambda3, hp.lambda4);
        lp += ln_gamma_pdf(state.sigma.powi(-2), hp.lambda1, hp.lambda2);
        for k in 0..h {
            for j in 0..hp.n_covariates() {
                let d = state.betas[k][j] - hp.beta0[j];
                lp += -0.5 * d * d / hp.sigma0_diag[j] - 0.5 * hp.sigma0_diag[j].ln() - LN_SQRT_2PI;
            }
            if let Some(ctx) = &self.ctx {
                let resid = DVector::from_column_slice(&state.thetas[k])
                    - &ctx.x * DVector::from_column_slice(&state.betas[k]);
                let w = ctx.factor.solve_lower(&resid);
                lp += -0.5 * w.norm_squared()
                    - 0.5 * ctx.factor.ln_det()
                    - ctx.n() as f64 * LN_SQRT_2PI;
            }
        }
        lp
    }
}

fn ln_gamma_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

#[inline]
fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, 1.0 / rate)
        .expect("positive gamma parameters")
        .sample(rng)
}

fn sample_beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let v = Beta::new(a, b)
        .expect("positive beta parameters")
        .sample(rng);
    v.clamp(STICK_EPS, 1.0 - STICK_EPS)
}

fn sample_categorical<R: Rng + ?Sized>(w: &[f64], rng: &mut R) -> usize {
    let total: f64 = w.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (k, wk) in w.iter().enumerate() {
        acc += wk;
        if u < acc {
            return k;
        }
    }
    w.iter().rposition(|&x| x > 0.0).unwrap_or(w.len() - 1)
}

/// Samples an index with probability ∝ exp(lp); overwrites `lp`.
fn sample_from_log_weights<R: Rng + ?Sized>(lp: &mut [f64], rng: &mut R) -> usize {
    let mx = lp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for v in lp.iter_mut() {
        *v = (*v - mx).exp();
    }
    sample_categorical(lp, rng)
}

/// Runs one chain on a transition's records. The design is standardized with
/// a standardizer fitted on these records; `hyper` must be on that scale.
pub fn fit_transition_model(
    records: &TransitionSet,
    hyper: &DdpGpHyperparams,
    config: &McmcConfig,
) -> Result<PosteriorDraws> {
    if records.records.is_empty() {
        return Err(Error::Empty("transition records"));
    }
    config.validate()?;
    let (standardizer, x) = records.standardized()?;
    let y: Vec<f64> = records.records.iter().map(|r| r.y).collect();
    let censored: Vec<bool> = records.records.iter().map(|r| !r.delta).collect();
    let training_x = (0..x.nrows())
        .map(|i| x.row(i).iter().copied().collect())
        .collect();
    let sampler = Sampler::new(x, y, censored, hyper.clone())?;
    let mut rng = stream(config.seed, &[PURPOSE_FIT, records.transition as u64]);
    let (draws, trace, diagnostics) = run_chain(&sampler, config, &mut rng)?;
    Ok(PosteriorDraws {
        format_version: DRAWS_FORMAT_VERSION,
        transition: records.transition,
        name: records.name.clone(),
        hyper: hyper.clone(),
        config: *config,
        kinds: records.kinds.clone(),
        standardizer,
        training_x,
        draws,
        trace,
        diagnostics,
    })
}

pub fn run_chain<R: Rng + ?Sized>(
    sampler: &Sampler,
    config: &McmcConfig,
    rng: &mut R,
) -> Result<(Vec<DrawSnapshot>, Vec<TraceRow>, ChainDiagnostics)> {
    config.validate()?;
    let mut state = sampler.init_state(rng)?;
    let mut draws = Vec::with_capacity(config.n_kept());
    let mut trace = Vec::with_capacity(config.n_kept());
    let mut changes = Vec::new();
    for it in 1..=config.total {
        let changed = sampler.sweep(&mut state, it, rng)?;
        if it > config.burn_in && sampler.n() > 0 {
            changes.push(changed as f64 / sampler.n() as f64);
        }
        if config.keeps(it) {
            let lp = sampler.log_posterior(&state);
            if !lp.is_finite() {
                return Err(Error::SamplerNan {
                    iteration: it,
                    what: "log posterior",
                });
            }
            trace.push(TraceRow {
                iteration: it,
                log_posterior: lp,
                sigma: state.sigma,
                alpha: state.alpha,
                n_occupied_clusters: state.n_occupied(),
            });
            draws.push(state.snapshot());
        }
    }
    let diagnostics = diagnose(&trace, &changes);
    Ok((draws, trace, diagnostics))
}

fn diagnose(trace: &[TraceRow], changes: &[f64]) -> ChainDiagnostics {
    let mut constant = Vec::new();
    let mut ess = |name: &str, xs: Vec<f64>| {
        let (e, flat) = effective_sample_size_checked(&xs);
        if flat {
            constant.push(name.to_string());
        }
        e
    };
    let ess_log_posterior = ess(
        "log_posterior",
        trace.iter().map(|r| r.log_posterior).collect(),
    );
    let ess_sigma = ess("sigma", trace.iter().map(|r| r.sigma).collect());
    let ess_alpha = ess("alpha", trace.iter().map(|r| r.alpha).collect());
    let occ: Vec<f64> = trace.iter().map(|r| r.n_occupied_clusters as f64).collect();
    ChainDiagnostics {
        ess_log_posterior,
        ess_sigma,
        ess_alpha,
        mean_occupied_clusters: if occ.is_empty() { 0.0 } else { mean(&occ) },
        allocation_change_rate: if changes.is_empty() {
            0.0
        } else {
            mean(changes)
        },
        constant_chains: constant,
    }
}

/// Effective sample size by Geyer's initial monotone positive sequence,
/// clamped to `(0, n]`. A constant chain returns `n`.
pub fn effective_sample_size(chain: &[f64]) -> f64 {
    effective_sample_size_checked(chain).0
}

/// As [`effective_sample_size`], also reporting whether the chain was constant.
pub fn effective_sample_size_checked(chain: &[f64]) -> (f64, bool) {
    let n = chain.len();
    if n < 2 {
        return (n as f64, true);
    }
    let m = mean(chain);
    let c: Vec<f64> = chain.iter().map(|x| x - m).collect();
    let c0 = c.iter().map(|x| x * x).sum::<f64>() / n as f64;
    if !(c0 > 1e-300) {
        return (n as f64, true);
    }
    let rho = |lag: usize| -> f64 {
        c[..n - lag]
            .iter()
            .zip(&c[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / (n as f64 * c0)
    };
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let g = rho(2 * k) + rho(2 * k + 1);
        if g <= 0.0 {
            break;
        }
        let g = g.min(prev);
        sum += g;
        prev = g;
        k += 1;
    }
    let tau = (2.0 * sum - 1.0).max(1e-12);
    let ess = (n as f64 / tau).min(n as f64);
    (ess.max(f64::MIN_POSITIVE), false)
}
