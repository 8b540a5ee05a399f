//! One replicate of each simulation study, end to end: generate, fit,
//! estimate. Shared by the acceptance suite and `replicate-study`. The MCMC
//! seed in the fit options is replaced by the replicate's seed.

use serde::{Deserialize, Serialize};

use crate::baselines::{aft_mle, lr_treatment_effect, AftDistribution};
use crate::data::validate_dataset;
use crate::mcmc::{fit_transition_model, McmcConfig};
use crate::model::{empirical_bayes_hyperparams, Predictor};
use crate::regime::{
    ddpgp_treatment_effect, fit_pathway, g_mean_survival_all, iptw_all, iptw_treatment_effect,
    GcompOptions, PathwayFitOptions, TransitionModel,
};
use crate::sim::{
    gen_study1, gen_study2, gen_study3, study3_regime_actions, Study2Data, Study3Truth,
};
use crate::{Error, Result};

/// Grid size of the study-1 curve comparison.
pub const STUDY1_GRID: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Study1Replicate {
    pub replicate: u64,
    /// Mean absolute error of the posterior-mean marginal survival curve.
    pub ddpgp_error: f64,
    pub weibull_error: f64,
}

/// Study 1: DDP-GP vs Weibull AFT marginal survival against the analytic
/// truth on [`STUDY1_GRID`] log-spaced times.
pub fn study1_replicate(
    replicate: u64,
    n: usize,
    censoring: Option<f64>,
    seed: u64,
    fit: &PathwayFitOptions,
) -> Result<Study1Replicate> {
    let d = gen_study1(n, censoring, seed)?;
    let set = d.transition_set();
    let hyper = empirical_bayes_hyperparams(&set, fit.truncation, fit.kernel)?;
    let draws = fit_transition_model(&set, &hyper, &McmcConfig { seed, ..fit.mcmc })?;
    let pred = Predictor::new(&draws)?;
    let x = set.design()?;
    let y: Vec<f64> = set.records.iter().map(|r| r.y).collect();
    let delta: Vec<bool> = set.records.iter().map(|r| r.delta).collect();
    let weibull = aft_mle(&x, &y, &delta, AftDistribution::Weibull)?;

    let grid = d.evaluation_grid(STUDY1_GRID);
    let nx = d.x.len() as f64;
    let mut dp = vec![0.0; grid.len()];
    let mut wb = vec![0.0; grid.len()];
    for xi in &d.x {
        let curves = pred.survival_curves(&grid, xi)?;
        let nd = curves.len() as f64;
        for (j, &t) in grid.iter().enumerate() {
            dp[j] += curves.iter().map(|c| c[j]).sum::<f64>() / nd / nx;
            wb[j] += weibull.survival(t, xi) / nx;
        }
    }
    let (mut e_dp, mut e_wb) = (0.0, 0.0);
    for (j, &t) in grid.iter().enumerate() {
        let truth = d.true_marginal_survival(t);
        e_dp += (dp[j] - truth).abs();
        e_wb += (wb[j] - truth).abs();
    }
    let k = grid.len() as f64;
    Ok(Study1Replicate {
        replicate,
        ddpgp_error: e_dp / k,
        weibull_error: e_wb / k,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Study2Replicate {
    pub replicate: u64,
    pub ddpgp: f64,
    pub ddpgp_lo: f64,
    pub ddpgp_hi: f64,
    pub iptw: f64,
    pub lr: f64,
}

/// Study 2: average treatment effect by DDP-GP, IPTW and per-arm LR.
pub fn study2_replicate(
    replicate: u64,
    n: usize,
    seed: u64,
    fit: &PathwayFitOptions,
) -> Result<Study2Replicate> {
    let d = gen_study2(n, seed)?;
    let set = d.transition_set();
    let hyper = empirical_bayes_hyperparams(&set, fit.truncation, fit.kernel)?;
    let draws = fit_transition_model(&set, &hyper, &McmcConfig { seed, ..fit.mcmc })?;
    let te = ddpgp_treatment_effect(
        &Predictor::new(&draws)?,
        &d.rows(),
        Study2Data::TREATMENT_COLUMN,
    )?;
    Ok(Study2Replicate {
        replicate,
        ddpgp: te.estimate,
        ddpgp_lo: te.ci_lo,
        ddpgp_hi: te.ci_hi,
        iptw: iptw_treatment_effect(&d.l, &d.w, &d.z, &d.y)?,
        lr: lr_treatment_effect(&d.l, &d.w, &d.z, &d.y)?.estimate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Study3Row {
    pub replicate: u64,
    pub regime: String,
    pub ddpgp: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// `None` when no uncensored patient follows the regime.
    pub iptw: Option<f64>,
}

/// Study 3: mean overall survival of the 8 regimes by DDP-GP G-computation
/// and IPTW.
pub fn study3_replicate(
    replicate: u64,
    n: usize,
    censoring: Option<f64>,
    seed: u64,
    fit: &PathwayFitOptions,
    gcomp: &GcompOptions,
) -> Result<Vec<Study3Row>> {
    let d = gen_study3(n, censoring, seed)?;
    let g = d.graph.compile()?;
    let sets = validate_dataset(&d.graph, &d.pathways)?;
    let opts = PathwayFitOptions {
        mcmc: McmcConfig { seed, ..fit.mcmc },
        ..*fit
    };
    let models: Vec<TransitionModel> = fit_pathway(&g, &sets, &opts)?
        .into_iter()
        .map(|f| f.model)
        .collect();
    let base: Vec<Vec<f64>> = d.pathways.iter().map(|p| p.baseline.clone()).collect();
    let dp = g_mean_survival_all(&g, &models, &base, &GcompOptions { seed, ..*gcomp })?;
    let ip = iptw_all(&g, &d.pathways)?;
    Ok(dp
        .into_iter()
        .zip(ip)
        .map(|(e, i)| Study3Row {
            replicate,
            regime: e.label,
            ddpgp: e.estimate,
            ci_lo: e.ci_lo.unwrap_or(f64::NAN),
            ci_hi: e.ci_hi.unwrap_or(f64::NAN),
            iptw: i.map(|i| i.estimate),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub regime: String,
    pub eta: f64,
    pub mc_se: f64,
}

/// True mean survival of every study-3 regime by direct simulation.
pub fn study3_truth_table(truth: &Study3Truth, n_traj: usize, seed: u64) -> Result<Vec<TruthRow>> {
    if n_traj < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 trajectories".into(),
        ));
    }
    let graph = crate::sim::study3_graph();
    let g = graph.compile()?;
    g.regime_menu()
        .iter()
        .map(|r| {
            let (eta, mc_se) = truth.true_eta(study3_regime_actions(r)?, n_traj, seed);
            Ok(TruthRow {
                regime: r.label(&graph),
                eta,
                mc_se,
            })
        })
        .collect()
}
