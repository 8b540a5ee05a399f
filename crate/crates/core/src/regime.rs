//! Regime evaluation: overall-survival composition, Monte-Carlo
//! G-computation of mean survival, IPTW, single-stage treatment effects and
//! the joint likelihood of a pathway dataset.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    aft_mle, kaplan_meier, logistic_irls, AftDistribution, AftFit, LogisticFit, StepSurvival,
};
use crate::data::{
    CompiledGraph, History, ModelKind, PatientPathway, Regime, Standardizer, TransitionSet,
};
use crate::kernel::KernelConfig;
use crate::mcmc::{fit_transition_model, McmcConfig, PosteriorDraws};
use crate::model::{empirical_bayes_hyperparams, Predictor};
use crate::rng::{stream, PURPOSE_GCOMP};
use crate::stats::{pairwise_sum, quantile};
use crate::{Error, Result};

/// Propensities are clipped to this range before inversion.
pub const PROPENSITY_CLIP: (f64, f64) = (0.01, 0.99);

/// Log-time sampler on raw covariates, for known generative models.
pub type LogTimeSampler = dyn Fn(&[f64], &mut dyn RngCore) -> f64 + Send + Sync;

/// A fitted (or known) conditional distribution of one transition's log
/// sojourn time given raw covariates.
#[derive(Clone)]
pub enum TransitionModel {
    DdpGp(Box<Predictor>),
    Aft {
        fit: AftFit,
        standardizer: Standardizer,
        /// Use only the intercept, ignoring the declared covariates.
        intercept_only: bool,
    },
    /// Sampling-only model, e.g. the true generative law of a simulation.
    Sampler(Arc<LogTimeSampler>),
}

impl fmt::Debug for TransitionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransitionModel::DdpGp(p) => write!(f, "DdpGp({} draws)", p.n_draws()),
            TransitionModel::Aft {
                fit,
                intercept_only,
                ..
            } => f
                .debug_struct("Aft")
                .field("distribution", &fit.distribution)
                .field("intercept_only", intercept_only)
                .finish(),
            TransitionModel::Sampler(_) => write!(f, "Sampler"),
        }
    }
}

impl TransitionModel {
    pub fn from_draws(draws: &PosteriorDraws) -> Result<Self> {
        Ok(TransitionModel::DdpGp(Box::new(Predictor::new(draws)?)))
    }

    pub fn sampler<F>(f: F) -> Self
    where
        F: Fn(&[f64], &mut dyn RngCore) -> f64 + Send + Sync + 'static,
    {
        TransitionModel::Sampler(Arc::new(f))
    }

    /// Number of posterior draws; 1 for plug-in models.
    pub fn n_draws(&self) -> usize {
        match self {
            TransitionModel::DdpGp(p) => p.n_draws(),
            _ => 1,
        }
    }

    fn aft_x(standardizer: &Standardizer, intercept_only: bool, raw_x: &[f64]) -> Result<Vec<f64>> {
        if intercept_only {
            Ok(vec![1.0])
        } else {
            standardizer.apply(raw_x)
        }
    }

    /// Draws a log sojourn under posterior draw `d` (ignored by plug-in models).
    pub fn sample_log_time(&self, d: usize, raw_x: &[f64], rng: &mut dyn RngCore) -> Result<f64> {
        match self {
            TransitionModel::DdpGp(p) => p.sample_log_time(d % p.n_draws(), raw_x, rng),
            TransitionModel::Aft {
                fit,
                standardizer,
                intercept_only,
            } => {
                let x = Self::aft_x(standardizer, *intercept_only, raw_x)?;
                Ok(fit.sample_log_time(&x, rng))
            }
            TransitionModel::Sampler(f) => Ok(f(raw_x, rng)),
        }
    }

    /// Log density and log survival of the log time `y` (posterior
    /// predictive for DDP-GP models).
    pub fn ln_density_and_survival(&self, y: f64, raw_x: &[f64]) -> Result<(f64, f64)> {
        match self {
            TransitionModel::DdpGp(p) => p.ln_density_and_survival(y, raw_x),
            TransitionModel::Aft {
                fit,
                standardizer,
                intercept_only,
            } => {
                let x = Self::aft_x(standardizer, *intercept_only, raw_x)?;
                Ok((fit.ln_density(y, &x), fit.ln_survival(y, &x)))
            }
            TransitionModel::Sampler(_) => Err(Error::InvalidArgument(
                "sampling-only model has no density".into(),
            )),
        }
    }

    /// `P(T > t | x)` for `t` in days.
    pub fn survival(&self, t: f64, raw_x: &[f64]) -> Result<f64> {
        match self {
            TransitionModel::DdpGp(p) => p.survival(t, raw_x),
            TransitionModel::Aft {
                fit,
                standardizer,
                intercept_only,
            } => {
                let x = Self::aft_x(standardizer, *intercept_only, raw_x)?;
                Ok(fit.survival(t, &x))
            }
            TransitionModel::Sampler(_) => Err(Error::InvalidArgument(
                "sampling-only model has no survival function".into(),
            )),
        }
    }
}

/// Settings for fitting every transition of a graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathwayFitOptions {
    pub mcmc: McmcConfig,
    pub truncation: usize,
    pub kernel: KernelConfig,
}

impl Default for PathwayFitOptions {
    fn default() -> Self {
        Self {
            mcmc: McmcConfig::default(),
            truncation: crate::model::DEFAULT_TRUNCATION,
            kernel: KernelConfig::default(),
        }
    }
}

/// A fitted transition: the evaluation model and, for DDP-GP transitions,
/// the posterior draws it was built from.
#[derive(Debug, Clone)]
pub struct FittedTransition {
    pub model: TransitionModel,
    pub draws: Option<PosteriorDraws>,
}

/// Fits one transition according to its declared model kind.
pub fn fit_transition(
    kind: ModelKind,
    set: &TransitionSet,
    opts: &PathwayFitOptions,
) -> Result<FittedTransition> {
    if set.n_events() == 0 {
        return Err(Error::InvalidArgument(format!(
            "transition `{}` has no observed events",
            set.name
        )));
    }
    match kind {
        ModelKind::Ddpgp => {
            let hyper = empirical_bayes_hyperparams(set, opts.truncation, opts.kernel)?;
            let draws = fit_transition_model(set, &hyper, &opts.mcmc)?;
            Ok(FittedTransition {
                model: TransitionModel::from_draws(&draws)?,
                draws: Some(draws),
            })
        }
        ModelKind::WeibullIntercept => {
            let n = set.records.len();
            let x = DMatrix::from_element(n, 1, 1.0);
            let y: Vec<f64> = set.records.iter().map(|r| r.y).collect();
            let delta: Vec<bool> = set.records.iter().map(|r| r.delta).collect();
            let fit = aft_mle(&x, &y, &delta, AftDistribution::Weibull)?;
            Ok(FittedTransition {
                model: TransitionModel::Aft {
                    fit,
                    standardizer: Standardizer::identity(set.n_covariates()),
                    intercept_only: true,
                },
                draws: None,
            })
        }
    }
}

/// Fits all transitions (in parallel; each chain owns its random stream).
pub fn fit_pathway(
    graph: &CompiledGraph,
    sets: &[TransitionSet],
    opts: &PathwayFitOptions,
) -> Result<Vec<FittedTransition>> {
    if sets.len() != graph.n_transitions() {
        return Err(Error::DimensionMismatch {
            expected: graph.n_transitions(),
            got: sets.len(),
        });
    }
    sets.par_iter()
        .enumerate()
        .map(|(k, set)| {
            fit_transition(graph.graph.transitions[k].model, set, opts).map_err(|e| match e {
                Error::InvalidArgument(m) => Error::InvalidArgument(format!("{}: {m}", set.name)),
                other => other,
            })
        })
        .collect()
}

/// Overall survival: the sum of sojourns along a state path given by labels.
pub fn compose_overall_survival(
    graph: &CompiledGraph,
    states: &[&str],
    sojourns: &[f64],
) -> Result<f64> {
    if states.is_empty() {
        return Err(Error::InvalidArgument("empty path".into()));
    }
    if sojourns.len() + 1 != states.len() {
        return Err(Error::InvalidArgument(format!(
            "path with {} states needs {} sojourns, got {}",
            states.len(),
            states.len() - 1,
            sojourns.len()
        )));
    }
    let idx: Vec<usize> = states
        .iter()
        .map(|s| graph.state(s))
        .collect::<Result<_>>()?;
    if idx[0] != graph.initial() {
        return Err(Error::InvalidArgument(format!(
            "path must start at `{}`",
            graph.graph.initial_state
        )));
    }
    for w in idx.windows(2) {
        if !graph
            .outgoing(w[0])
            .iter()
            .any(|&k| graph.to_state(k) == w[1])
        {
            return Err(Error::InvalidArgument(format!(
                "no transition from `{}` to `{}`",
                graph.graph.states[w[0]], graph.graph.states[w[1]]
            )));
        }
    }
    if sojourns.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::InvalidArgument(
            "sojourns must be finite and nonnegative".into(),
        ));
    }
    Ok(sojourns.iter().sum())
}

/// Mean overall survival under a regime, by one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeEstimate {
    pub regime: Regime,
    pub label: String,
    /// Days.
    pub estimate: f64,
    /// 90% credible interval; absent for point-only methods.
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    /// Per posterior draw values (G-computation only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_draw: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GcompOptions {
    /// Forward simulations per (draw, baseline subject).
    pub n_paths: usize,
    /// Use at most this many posterior draws, evenly spaced.
    pub max_draws: Option<usize>,
    pub seed: u64,
}

impl Default for GcompOptions {
    fn default() -> Self {
        Self {
            n_paths: 10,
            max_draws: None,
            seed: 0,
        }
    }
}

/// Simulates one trajectory under `actions` and returns its overall survival.
pub fn simulate_trajectory(
    graph: &CompiledGraph,
    models: &[TransitionModel],
    actions: &[usize],
    baseline: &[f64],
    draw: usize,
    n_draws: usize,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    let mut history = History::new(graph, baseline.to_vec());
    let mut state = graph.initial();
    let mut total = 0.0;
    let mut x = Vec::new();
    let max_steps = graph.graph.states.len();
    for _ in 0..max_steps {
        if graph.is_absorbing(state) {
            return Ok(total);
        }
        if let Some(d) = graph.decision_at(state) {
            history.actions[d] = Some(actions[d]);
        }
        let mut best: Option<(usize, f64)> = None;
        for &k in graph.outgoing(state) {
            graph
                .assemble_into(graph.covariate_fields(k), &history, &mut x)
                .map_err(|field| {
                    Error::InvalidArgument(format!("covariate {field} unavailable in simulation"))
                })?;
            let m = &models[k];
            let d = draw * m.n_draws() / n_draws.max(1);
            let y = m.sample_log_time(d, &x, rng)?;
            if !y.is_finite() {
                return Err(Error::NonFinite("simulated log sojourn"));
            }
            if best.is_none_or(|(_, b)| y < b) {
                best = Some((k, y));
            }
        }
        let (k, y) = best.expect("non-absorbing state has outgoing transitions");
        history.log_sojourns[k] = Some(y);
        total += y.exp();
        state = graph.to_state(k);
    }
    Err(Error::InvalidGraph(
        "trajectory did not reach an absorbing state".into(),
    ))
}

fn check_models(graph: &CompiledGraph, models: &[TransitionModel]) -> Result<()> {
    if models.len() != graph.n_transitions() {
        return Err(Error::MissingModel(format!(
            "{} models for {} transitions",
            models.len(),
            graph.n_transitions()
        )));
    }
    Ok(())
}

/// Mean overall survival under `regime` by forward simulation, marginalizing
/// over the empirical distribution of `baselines`. Competing transitions are
/// raced by drawing every latent sojourn and keeping the minimum.
pub fn g_mean_survival(
    graph: &CompiledGraph,
    models: &[TransitionModel],
    regime: &Regime,
    baselines: &[Vec<f64>],
    opts: &GcompOptions,
) -> Result<RegimeEstimate> {
    check_models(graph, models)?;
    if baselines.is_empty() {
        return Err(Error::Empty("baseline sample"));
    }
    if opts.n_paths == 0 {
        return Err(Error::InvalidArgument("n_paths must be at least 1".into()));
    }
    let actions = regime.resolve(graph)?;
    let full = models.iter().map(|m| m.n_draws()).max().unwrap_or(1);
    if full == 0 {
        return Err(Error::Empty("posterior draws"));
    }
    let n_draws = opts.max_draws.map_or(full, |m| m.clamp(1, full));
    let per_draw: Vec<f64> = (0..n_draws)
        .into_par_iter()
        .map(|d| {
            let subject_means: Vec<f64> = baselines
                .iter()
                .enumerate()
                .map(|(i, x0)| {
                    let mut rng = stream(opts.seed, &[PURPOSE_GCOMP, d as u64, i as u64]);
                    let mut s = 0.0;
                    for _ in 0..opts.n_paths {
                        s +=
                            simulate_trajectory(graph, models, &actions, x0, d, n_draws, &mut rng)?;
                    }
                    Ok(s / opts.n_paths as f64)
                })
                .collect::<Result<_>>()?;
            Ok(pairwise_sum(&subject_means) / subject_means.len() as f64)
        })
        .collect::<Result<_>>()?;
    Ok(summarize(regime, graph, per_draw))
}

fn summarize(regime: &Regime, graph: &CompiledGraph, per_draw: Vec<f64>) -> RegimeEstimate {
    let estimate = pairwise_sum(&per_draw) / per_draw.len() as f64;
    let lo = quantile(&per_draw, 0.05).min(estimate);
    let hi = quantile(&per_draw, 0.95).max(estimate);
    RegimeEstimate {
        regime: regime.clone(),
        label: regime.label(&graph.graph),
        estimate,
        ci_lo: Some(lo),
        ci_hi: Some(hi),
        per_draw,
    }
}

/// G-computation for every regime of the menu, sharing random streams
/// across regimes.
pub fn g_mean_survival_all(
    graph: &CompiledGraph,
    models: &[TransitionModel],
    baselines: &[Vec<f64>],
    opts: &GcompOptions,
) -> Result<Vec<RegimeEstimate>> {
    graph
        .regime_menu()
        .iter()
        .map(|r| g_mean_survival(graph, models, r, baselines, opts))
        .collect()
}

/// Logistic model of one binary decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityModel {
    pub decision: String,
    /// Models the probability of the decision's second action.
    pub fit: LogisticFit,
}

impl PropensityModel {
    /// Clipped probability of taking action index `action`.
    pub fn probability(&self, x: &[f64], action: usize) -> f64 {
        let p1 = self.fit.probability(x);
        let p = if action == 1 { p1 } else { 1.0 - p1 };
        p.clamp(PROPENSITY_CLIP.0, PROPENSITY_CLIP.1)
    }
}

/// A decision a patient reached: index, action taken and propensity covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachedDecision {
    pub decision: usize,
    pub action: usize,
    pub x: Vec<f64>,
}

/// Decisions reached along a pathway, in order.
pub fn reached_decisions(
    graph: &CompiledGraph,
    p: &PatientPathway,
) -> Result<Vec<ReachedDecision>> {
    let g = &graph.graph;
    let mut history = History::new(graph, p.baseline.clone());
    let mut out = Vec::new();
    let mut state = graph.initial();
    let mut visit = |state: usize, history: &mut History| -> Result<()> {
        if let Some(d) = graph.decision_at(state) {
            let dp = &g.decisions[d];
            let label = p.actions.get(&dp.name).ok_or_else(|| {
                Error::pathway(&p.patient_id, format!("missing action for `{}`", dp.name))
            })?;
            let a = dp.actions.iter().position(|x| x == label).ok_or_else(|| {
                Error::pathway(&p.patient_id, format!("unknown action `{label}`"))
            })?;
            history.actions[d] = Some(a);
            let x = graph
                .assemble(graph.propensity_fields(d), history)
                .map_err(|field| Error::HistoryOrdering {
                    patient: p.patient_id.clone(),
                    transition: dp.name.clone(),
                    field,
                })?;
            out.push(ReachedDecision {
                decision: d,
                action: a,
                x,
            });
        }
        Ok(())
    };
    for &(id, sojourn) in &p.transitions {
        let k = id
            .checked_sub(1)
            .filter(|&k| k < graph.n_transitions())
            .ok_or_else(|| Error::UnknownTransition(id.to_string()))?;
        visit(state, &mut history)?;
        history.log_sojourns[k] = Some(sojourn.ln());
        state = graph.to_state(k);
    }
    if !graph.is_absorbing(state) {
        visit(state, &mut history)?;
    }
    Ok(out)
}

/// Fits a propensity model for every non-randomized decision. Entries for
/// randomized decisions are `None`.
pub fn fit_propensities(
    graph: &CompiledGraph,
    pathways: &[PatientPathway],
) -> Result<Vec<Option<PropensityModel>>> {
    let g = &graph.graph;
    let mut rows: Vec<Vec<(Vec<f64>, bool)>> = vec![Vec::new(); g.decisions.len()];
    for p in pathways {
        for r in reached_decisions(graph, p)? {
            rows[r.decision].push((r.x, r.action == 1));
        }
    }
    g.decisions
        .iter()
        .zip(rows)
        .map(|(dp, rows)| {
            if dp.randomized {
                return Ok(None);
            }
            if dp.actions.len() != 2 {
                return Err(Error::InvalidArgument(format!(
                    "non-randomized decision `{}` must have exactly two actions",
                    dp.name
                )));
            }
            if rows.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "no patient reached decision `{}`",
                    dp.name
                )));
            }
            let m = rows[0].0.len();
            let x = DMatrix::from_fn(rows.len(), m, |i, j| rows[i].0[j]);
            let z: Vec<bool> = rows.iter().map(|r| r.1).collect();
            let fit = logistic_irls(&x, &z)?;
            Ok(Some(PropensityModel {
                decision: dp.name.clone(),
                fit,
            }))
        })
        .collect()
}

/// Kaplan-Meier estimate of the censoring distribution (event flags flipped).
pub fn censoring_survival(pathways: &[PatientPathway]) -> Result<StepSurvival> {
    let t: Vec<f64> = pathways.iter().map(|p| p.followup).collect();
    let c: Vec<bool> = pathways.iter().map(|p| !p.died).collect();
    kaplan_meier(&t, &c)
}

/// IPTW weight of one patient under a regime given resolved actions.
pub fn iptw_weight(
    graph: &CompiledGraph,
    p: &PatientPathway,
    actions: &[usize],
    propensities: &[Option<PropensityModel>],
    censoring: &StepSurvival,
) -> Result<f64> {
    if !p.died {
        return Ok(0.0);
    }
    let mut w = 1.0;
    for r in reached_decisions(graph, p)? {
        if r.action != actions[r.decision] {
            return Ok(0.0);
        }
        if let Some(pm) = &propensities[r.decision] {
            w /= pm.probability(&r.x, r.action);
        }
    }
    let k = censoring.eval_left(p.followup);
    if !(k > 0.0) {
        return Err(Error::ZeroCensoringSurvival(p.followup));
    }
    Ok(w / k)
}

/// Weighted mean of observed overall survival among uncensored,
/// regime-consistent patients.
pub fn iptw_mean_survival(
    graph: &CompiledGraph,
    pathways: &[PatientPathway],
    regime: &Regime,
    propensities: &[Option<PropensityModel>],
    censoring: &StepSurvival,
) -> Result<RegimeEstimate> {
    if propensities.len() != graph.graph.decisions.len() {
        return Err(Error::DimensionMismatch {
            expected: graph.graph.decisions.len(),
            got: propensities.len(),
        });
    }
    let actions = regime.resolve(graph)?;
    let mut wt = Vec::with_capacity(pathways.len());
    let mut w = Vec::with_capacity(pathways.len());
    for p in pathways {
        let wi = iptw_weight(graph, p, &actions, propensities, censoring)?;
        if wi > 0.0 {
            w.push(wi);
            wt.push(wi * p.followup);
        }
    }
    let total = pairwise_sum(&w);
    if !(total > 0.0) {
        return Err(Error::ZeroWeight);
    }
    Ok(RegimeEstimate {
        regime: regime.clone(),
        label: regime.label(&graph.graph),
        estimate: pairwise_sum(&wt) / total,
        ci_lo: None,
        ci_hi: None,
        per_draw: Vec::new(),
    })
}

/// IPTW for every regime of the menu with propensities and censoring
/// survival fitted on `pathways`. Regimes without consistent uncensored
/// patients get `None`.
pub fn iptw_all(
    graph: &CompiledGraph,
    pathways: &[PatientPathway],
) -> Result<Vec<Option<RegimeEstimate>>> {
    let props = fit_propensities(graph, pathways)?;
    let cens = censoring_survival(pathways)?;
    graph
        .regime_menu()
        .iter()
        .map(
            |r| match iptw_mean_survival(graph, pathways, r, &props, &cens) {
                Ok(e) => Ok(Some(e)),
                Err(Error::ZeroWeight) => Ok(None),
                Err(e) => Err(e),
            },
        )
        .collect()
}

/// `IPTW(Z=1) − IPTW(Z=0)` with a logistic propensity on `(1, L, W)`.
pub fn iptw_treatment_effect(l: &[f64], w: &[f64], z: &[bool], y: &[f64]) -> Result<f64> {
    let n = l.len();
    if w.len() != n || z.len() != n || y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if !z.iter().any(|&v| v) || z.iter().all(|&v| v) {
        return Err(Error::InvalidArgument(
            "both treatment arms must be nonempty".into(),
        ));
    }
    let x = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => 1.0,
        1 => l[i],
        _ => w[i],
    });
    let fit = logistic_irls(&x, z)?;
    let mut num = [0.0; 2];
    let mut den = [0.0; 2];
    for i in 0..n {
        let p1 = fit
            .probability(&[1.0, l[i], w[i]])
            .clamp(PROPENSITY_CLIP.0, PROPENSITY_CLIP.1);
        let (arm, p) = if z[i] { (1, p1) } else { (0, 1.0 - p1) };
        num[arm] += y[i] / p;
        den[arm] += 1.0 / p;
    }
    Ok(num[1] / den[1] - num[0] / den[0])
}

/// Average treatment effect under a fitted single-transition DDP-GP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentEffect {
    /// Posterior mean of the average effect.
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub per_draw: Vec<f64>,
    /// Per subject: posterior mean and 90% interval of `Ŷ_i(1) − Ŷ_i(0)`.
    pub subject_mean: Vec<f64>,
    pub subject_lo: Vec<f64>,
    pub subject_hi: Vec<f64>,
}

/// `(1/n) Σ_i [Ŷ_i(1) − Ŷ_i(0)]`, where `Ŷ_i(z)` is the mixture mean at the
/// subject's raw covariates with column `treat_col` set to `z`.
pub fn ddpgp_treatment_effect(
    predictor: &Predictor,
    rows: &[Vec<f64>],
    treat_col: usize,
) -> Result<TreatmentEffect> {
    if predictor.n_draws() == 0 {
        return Err(Error::Empty("posterior draws"));
    }
    if rows.is_empty() {
        return Err(Error::Empty("subjects"));
    }
    let nd = predictor.n_draws();
    // diffs[i][d]
    let diffs: Vec<Vec<f64>> = rows
        .par_iter()
        .map(|row| {
            if treat_col >= row.len() {
                return Err(Error::InvalidArgument(format!(
                    "treatment column {treat_col} out of range"
                )));
            }
            let mut x1 = row.clone();
            let mut x0 = row.clone();
            x1[treat_col] = 1.0;
            x0[treat_col] = 0.0;
            let s1 = predictor.standardize(&x1)?;
            let s0 = predictor.standardize(&x0)?;
            let k1 = predictor.kernel_vector(&s1)?;
            let k0 = predictor.kernel_vector(&s0)?;
            let mut l1 = Vec::new();
            let mut l0 = Vec::new();
            Ok((0..nd)
                .map(|d| {
                    predictor.locations_into(d, &s1, &k1, &mut l1);
                    predictor.locations_into(d, &s0, &k0, &mut l0);
                    predictor
                        .weights(d)
                        .iter()
                        .zip(l1.iter().zip(&l0))
                        .map(|(w, (a, b))| w * (a - b))
                        .sum()
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let n = rows.len() as f64;
    let per_draw: Vec<f64> = (0..nd)
        .map(|d| pairwise_sum(&diffs.iter().map(|r| r[d]).collect::<Vec<_>>()) / n)
        .collect();
    let estimate = pairwise_sum(&per_draw) / nd as f64;
    Ok(TreatmentEffect {
        estimate,
        ci_lo: quantile(&per_draw, 0.05).min(estimate),
        ci_hi: quantile(&per_draw, 0.95).max(estimate),
        subject_mean: diffs.iter().map(|r| pairwise_sum(r) / nd as f64).collect(),
        subject_lo: diffs.iter().map(|r| quantile(r, 0.05)).collect(),
        subject_hi: diffs.iter().map(|r| quantile(r, 0.95)).collect(),
        per_draw,
    })
}

/// Joint log-likelihood with its per-transition and per-origin-state parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodBreakdown {
    pub total: f64,
    pub per_transition: Vec<(String, f64)>,
    /// Factors grouped by the origin state of the transitions.
    pub per_origin: Vec<(String, f64)>,
}

/// `Σ δ log f(t | x) + (1 − δ) log S(t | x)` over all records, with `f` the
/// density of the sojourn time in days.
pub fn joint_log_likelihood(
    graph: &CompiledGraph,
    models: &[Option<TransitionModel>],
    sets: &[TransitionSet],
) -> Result<LikelihoodBreakdown> {
    if sets.len() != graph.n_transitions() || models.len() != graph.n_transitions() {
        return Err(Error::DimensionMismatch {
            expected: graph.n_transitions(),
            got: sets.len().min(models.len()),
        });
    }
    let mut per_transition = Vec::with_capacity(sets.len());
    let mut per_origin: Vec<(String, f64)> = Vec::new();
    for (k, set) in sets.iter().enumerate() {
        let mut terms = Vec::with_capacity(set.records.len());
        if !set.records.is_empty() {
            let model = models[k]
                .as_ref()
                .ok_or_else(|| Error::MissingModel(set.name.clone()))?;
            for r in &set.records {
                let (ld, ls) = model.ln_density_and_survival(r.y, &r.x)?;
                // log-time density to time density: subtract log t = y.
                terms.push(if r.delta { ld - r.y } else { ls });
            }
        }
        let v = pairwise_sum(&terms);
        per_transition.push((set.name.clone(), v));
        let origin = graph.graph.transitions[k].from.clone();
        match per_origin.iter_mut().find(|(o, _)| *o == origin) {
            Some(e) => e.1 += v,
            None => per_origin.push((origin, v)),
        }
    }
    let total = pairwise_sum(&per_transition.iter().map(|p| p.1).collect::<Vec<_>>());
    Ok(LikelihoodBreakdown {
        total,
        per_transition,
        per_origin,
    })
}

/// Posterior predictive mean of `T = e^Y` at raw covariates by numerical
/// integration of the predictive survival, for cross-checks.
pub fn predictive_mean_time(
    model: &TransitionModel,
    raw_x: &[f64],
    t_max: f64,
    n_grid: usize,
) -> Result<f64> {
    if n_grid < 2 || !(t_max > 0.0) {
        return Err(Error::InvalidArgument(
            "need a positive horizon and at least 2 grid points".into(),
        ));
    }
    let h = t_max / n_grid as f64;
    let mut s = Vec::with_capacity(n_grid);
    for j in 0..n_grid {
        let t = (j as f64 + 0.5) * h;
        s.push(model.survival(t, raw_x)? * h);
    }
    Ok(pairwise_sum(&s))
}
