//! Acceptance suite. Runs each criterion at its stated tolerance and prints
//! one PASS/FAIL line per criterion. Set `DDPGP_ACCEPTANCE=1,4` to run a
//! subset.

#![allow(clippy::type_complexity, clippy::same_item_push)]

use std::collections::BTreeMap;
use std::time::Instant;

use ddpgp_core::baselines::{aft_mle, kaplan_meier, logistic_irls, AftDistribution};
use ddpgp_core::data::{
    validate_dataset, BaselineCovariate, CovariateField, CovariateKind, DecisionPoint, ModelKind,
    PathwayGraph, PatientPathway, TransitionDef,
};
use ddpgp_core::io::{
    pathways_from_csv, pathways_to_csv, report_from_csv, report_rows, report_to_csv,
    RegimeReportEntry,
};
use ddpgp_core::kernel::covariance_matrix;
use ddpgp_core::mcmc::{effective_sample_size, fit_transition_model, McmcConfig, Sampler};
use ddpgp_core::model::{
    empirical_bayes_hyperparams, mixture_log_density, stick_breaking, DdpGpHyperparams, DdpGpState,
    DrawSnapshot, GpContext, Location, Predictor, DEFAULT_TRUNCATION,
};
use ddpgp_core::regime::{
    censoring_survival, fit_pathway, fit_propensities, g_mean_survival, g_mean_survival_all,
    iptw_all, iptw_mean_survival, GcompOptions, PathwayFitOptions, TransitionModel,
};
use ddpgp_core::replicate::{study1_replicate, study2_replicate, study3_replicate};
use ddpgp_core::rng::{replicate_seed, stream};
use ddpgp_core::sim::{
    gen_leukemia_shaped, gen_study1, gen_study3, study3_regime_actions, STUDY2_EFFECT,
};
use ddpgp_core::stats::{mean, median, quantile};
use ddpgp_core::{KernelConfig, Regime};
use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

const BASE_SEED: u64 = 20_240_611;

fn scaled_mcmc(seed: u64) -> McmcConfig {
    McmcConfig {
        burn_in: 1000,
        total: 2000,
        thin: 5,
        seed,
    }
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: usize, title: &str, started: Instant, out: &Outcome) {
    println!(
        "criterion {id} [{}] {title} ({:.0}s): {}",
        if out.pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64(),
        out.detail
    );
}

fn sd(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

// ------------------------------------------------------------ criterion 1

fn scaled_fit() -> PathwayFitOptions {
    PathwayFitOptions {
        mcmc: scaled_mcmc(0),
        ..Default::default()
    }
}

/// Mean absolute error of the DDP-GP and Weibull marginal survival curves
/// on the 100-point evaluation grid.
fn study1_errors(censoring: Option<f64>, rep: u64) -> (f64, f64) {
    let r = study1_replicate(
        rep,
        200,
        censoring,
        replicate_seed(BASE_SEED, rep),
        &scaled_fit(),
    )
    .unwrap();
    (r.ddpgp_error, r.weibull_error)
}

fn criterion1() -> Outcome {
    let reps = 50u64;
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, cens, offset) in [
        ("uncensored", None, 0u64),
        ("23% censored", Some(0.23), 1000),
    ] {
        let errs: Vec<(f64, f64)> = (0..reps)
            .into_par_iter()
            .map(|r| study1_errors(cens, offset + r))
            .collect();
        let wins = errs.iter().filter(|(a, b)| a < b).count();
        let ok = wins * 5 >= reps as usize * 4;
        pass &= ok;
        let m_dp = mean(&errs.iter().map(|e| e.0).collect::<Vec<_>>());
        let m_wb = mean(&errs.iter().map(|e| e.1).collect::<Vec<_>>());
        parts.push(format!(
            "{label}: DDP-GP better in {wins}/{reps} (need >= 80%), mean error {m_dp:.4} vs Weibull {m_wb:.4}"
        ));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

// ------------------------------------------------------------ criterion 2

fn criterion2() -> Outcome {
    let reps = 100u64;
    let rows: Vec<(f64, f64, f64)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let e =
                study2_replicate(r, 100, replicate_seed(BASE_SEED ^ 2, r), &scaled_fit()).unwrap();
            (e.ddpgp, e.iptw, e.lr)
        })
        .collect();
    let dp: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let iptw: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let lr: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let bias_ok = (mean(&dp) - STUDY2_EFFECT).abs() < 0.35;
    let sd_ok = sd(&dp) < sd(&iptw);
    let lr_ok = mean(&lr) > STUDY2_EFFECT + 0.5;
    Outcome {
        pass: bias_ok && sd_ok && lr_ok,
        detail: format!(
            "mean DDP-GP {:.3} (|bias| < 0.35: {}), sd DDP-GP {:.3} vs IPTW {:.3} ({}), mean LR {:.3} (> 3.0: {})",
            mean(&dp),
            bias_ok,
            sd(&dp),
            sd(&iptw),
            sd_ok,
            mean(&lr),
            lr_ok
        ),
    }
}

// ------------------------------------------------------------ criterion 3

fn study3_truth() -> Vec<f64> {
    let d = gen_study3(50, None, 0).unwrap();
    let g = d.graph.compile().unwrap();
    g.regime_menu()
        .par_iter()
        .map(|r| {
            d.truth
                .true_eta(study3_regime_actions(r).unwrap(), 1_000_000, BASE_SEED)
                .0
        })
        .collect()
}

fn criterion3() -> Outcome {
    let reps = 50u64;
    let truth = study3_truth();
    // per replicate: (DDP-GP, IPTW) estimates for the 8 regimes
    let est: Vec<Vec<(f64, f64)>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let gopts = GcompOptions {
                n_paths: 1,
                max_draws: None,
                seed: 0,
            };
            study3_replicate(
                r,
                200,
                Some(0.15),
                replicate_seed(BASE_SEED ^ 3, r),
                &scaled_fit(),
                &gopts,
            )
            .unwrap()
            .into_iter()
            .map(|row| (row.ddpgp, row.iptw.unwrap_or(f64::NAN)))
            .collect()
        })
        .collect();
    let mut closer = 0;
    let mut tighter = 0;
    let mut lines = Vec::new();
    for k in 0..truth.len() {
        let dp: Vec<f64> = est.iter().map(|e| e[k].0).collect();
        let ip: Vec<f64> = est
            .iter()
            .map(|e| e[k].1)
            .filter(|v| v.is_finite())
            .collect();
        let err_dp = median(&dp.iter().map(|v| (v - truth[k]).abs()).collect::<Vec<_>>());
        let err_ip = median(&ip.iter().map(|v| (v - truth[k]).abs()).collect::<Vec<_>>());
        let iqr = |v: &[f64]| quantile(v, 0.75) - quantile(v, 0.25);
        let (iqr_dp, iqr_ip) = (iqr(&dp), iqr(&ip));
        closer += (err_dp < err_ip) as usize;
        tighter += (iqr_dp < iqr_ip) as usize;
        lines.push(format!(
            "η={:.1} med|err| {:.1}/{:.1} IQR {:.1}/{:.1}",
            truth[k], err_dp, err_ip, iqr_dp, iqr_ip
        ));
    }
    Outcome {
        pass: closer >= 6 && tighter >= 6,
        detail: format!(
            "DDP-GP closer in {closer}/8, tighter in {tighter}/8 (need >= 6 each); per regime DDP-GP/IPTW: [{}]",
            lines.join("; ")
        ),
    }
}

// ------------------------------------------------------------ criterion 4

fn criterion4() -> Outcome {
    let truth = study3_truth();
    let big = gen_study3(200_000, None, BASE_SEED ^ 4).unwrap();
    let g = big.graph.compile().unwrap();
    let base: Vec<Vec<f64>> = big.pathways.iter().map(|p| p.baseline.clone()).collect();
    let models = big.truth.models();
    let opts = GcompOptions {
        n_paths: 1,
        max_draws: None,
        seed: BASE_SEED ^ 44,
    };
    let rel: Vec<f64> = g
        .regime_menu()
        .iter()
        .zip(&truth)
        .map(|(r, t)| {
            (g_mean_survival(&g, &models, r, &base, &opts)
                .unwrap()
                .estimate
                / t
                - 1.0)
                .abs()
        })
        .collect();
    let worst = rel.iter().cloned().fold(0.0, f64::max);
    Outcome {
        pass: worst < 0.01,
        detail: format!(
            "max relative error {:.4} over 8 regimes (need < 0.01): [{}]",
            worst,
            rel.iter()
                .map(|v| format!("{v:.4}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    }
}

// ------------------------------------------------------------ criterion 5

fn geweke_stats(s: &DdpGpState) -> [f64; 6] {
    [
        s.sigma.powi(-2),
        s.alpha,
        s.weights[0],
        s.betas[0][1],
        s.thetas[0][2],
        s.y[0],
    ]
}

fn small_hyper(truncation: usize) -> DdpGpHyperparams {
    DdpGpHyperparams {
        beta0: vec![0.5, -0.3],
        sigma0_diag: vec![0.5, 0.5],
        lambda1: 4.0,
        lambda2: 2.0,
        lambda3: 2.0,
        lambda4: 2.0,
        truncation,
        kernel: KernelConfig::default(),
    }
}

fn z_score(indep: &[f64], chain: &[f64]) -> f64 {
    let var = |v: &[f64]| {
        let m = mean(v);
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    };
    let se2 = var(indep) / indep.len() as f64 + var(chain) / effective_sample_size(chain);
    (mean(indep) - mean(chain)) / se2.sqrt()
}

fn criterion5() -> Outcome {
    let n_samp = 20_000;
    // Geweke: marginal-conditional vs successive-conditional simulation.
    let x = DMatrix::from_row_slice(5, 2, &[1.0, -1.2, 1.0, -0.4, 1.0, 0.1, 1.0, 0.6, 1.0, 0.9]);
    let sampler = Sampler::new(x, vec![0.0; 5], vec![false; 5], small_hyper(5)).unwrap();
    let mut rng = stream(BASE_SEED, &[5]);
    let mc: Vec<[f64; 6]> = (0..n_samp)
        .map(|_| geweke_stats(&sampler.sample_prior_state(&mut rng).unwrap()))
        .collect();
    let mut state = sampler.sample_prior_state(&mut rng).unwrap();
    let mut sc = Vec::with_capacity(n_samp);
    for it in 0..n_samp {
        sampler.sweep(&mut state, it, &mut rng).unwrap();
        sampler.resample_data(&mut state, &mut rng);
        sc.push(geweke_stats(&state));
    }
    let z: Vec<f64> = (0..6)
        .map(|j| {
            let a: Vec<f64> = mc.iter().map(|v| v[j]).collect();
            let b: Vec<f64> = sc.iter().map(|v| v[j]).collect();
            z_score(&a, &b)
        })
        .collect();
    let geweke_ok = z.iter().all(|v| v.abs() < 4.0);

    // Prior recovery: the sampler with no records targets the prior.
    let hyper = small_hyper(DEFAULT_TRUNCATION);
    let empty = Sampler::new(DMatrix::zeros(0, 2), vec![], vec![], hyper.clone()).unwrap();
    let mut state = empty.init_state(&mut rng).unwrap();
    let mut prec = Vec::with_capacity(n_samp);
    let mut alpha = Vec::with_capacity(n_samp);
    for it in 0..n_samp {
        empty.sweep(&mut state, it, &mut rng).unwrap();
        prec.push(state.sigma.powi(-2));
        alpha.push(state.alpha);
    }
    let check = |chain: &[f64], shape: f64, rate: f64| -> Vec<(f64, f64)> {
        // (standardized error of the mean, of the second moment)
        let sq: Vec<f64> = chain.iter().map(|v| v * v).collect();
        let m1 = shape / rate;
        let m2 = shape * (shape + 1.0) / (rate * rate);
        let se = |v: &[f64]| (crate_var(v) / effective_sample_size(v)).sqrt();
        vec![((mean(chain) - m1) / se(chain), (mean(&sq) - m2) / se(&sq))]
    };
    let rec: Vec<(f64, f64)> = check(&prec, hyper.lambda1, hyper.lambda2)
        .into_iter()
        .chain(check(&alpha, hyper.lambda3, hyper.lambda4))
        .collect();
    let prior_ok = rec.iter().all(|(a, b)| a.abs() < 3.0 && b.abs() < 3.0);

    // Bit-exact determinism.
    let d = gen_study1(60, Some(0.23), BASE_SEED).unwrap();
    let set = d.transition_set();
    let h = empirical_bayes_hyperparams(&set, DEFAULT_TRUNCATION, KernelConfig::default()).unwrap();
    let cfg = McmcConfig {
        burn_in: 100,
        total: 300,
        thin: 2,
        seed: 9,
    };
    let a = serde_json::to_string(&fit_transition_model(&set, &h, &cfg).unwrap()).unwrap();
    let b = serde_json::to_string(&fit_transition_model(&set, &h, &cfg).unwrap()).unwrap();
    let det_ok = a == b;

    Outcome {
        pass: geweke_ok && prior_ok && det_ok,
        detail: format!(
            "Geweke z [{}] (|z| < 4: {geweke_ok}); prior recovery z (mean, 2nd moment) σ⁻² ({:.2}, {:.2}) α ({:.2}, {:.2}) (< 3: {prior_ok}); rerun identical: {det_ok}",
            z.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(", "),
            rec[0].0,
            rec[0].1,
            rec[1].0,
            rec[1].1
        ),
    }
}

fn crate_var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

// ------------------------------------------------------------ criterion 6

fn single_decision_graph() -> PathwayGraph {
    PathwayGraph {
        initial_state: "0".into(),
        states: vec!["0".into(), "D".into()],
        baseline: vec![BaselineCovariate {
            name: "age".into(),
            kind: CovariateKind::Numeric,
        }],
        decisions: vec![DecisionPoint {
            name: "Z".into(),
            state: "0".into(),
            actions: vec!["a".into(), "b".into()],
            randomized: false,
            propensity_covariates: vec![CovariateField::Intercept],
        }],
        transitions: vec![TransitionDef {
            id: 1,
            name: "0D".into(),
            from: "0".into(),
            to: "D".into(),
            model: ModelKind::Ddpgp,
            covariates: vec![
                CovariateField::Intercept,
                CovariateField::Action {
                    decision: "Z".into(),
                    equals: "b".into(),
                },
            ],
        }],
        competing_groups: vec![vec![1]],
    }
}

fn criterion6() -> Outcome {
    let mut rng = stream(BASE_SEED, &[6]);
    let mut failures: Vec<String> = Vec::new();
    let mut check = |ok: bool, what: &str| {
        if !ok {
            failures.push(what.to_string());
        }
    };

    // Kernel PSD on 100 random instances.
    let mut psd = true;
    for _ in 0..100 {
        let n = rng.random_range(1..40);
        let m = rng.random_range(1..6);
        let x = DMatrix::from_fn(n, m, |_, _| rng.random_range(-3.0..3.0));
        let c = covariance_matrix(&x, &KernelConfig::default()).unwrap();
        psd &= c.symmetric_eigen().eigenvalues.min() > -1e-10;
    }
    check(psd, "kernel PSD");

    // Stick-breaking normalization.
    let mut sticks = true;
    for _ in 0..200 {
        let h = rng.random_range(1..50);
        let mut v: Vec<f64> = (0..h - 1).map(|_| rng.random_range(1e-6..1.0)).collect();
        v.push(1.0);
        let w = stick_breaking(&v).unwrap();
        sticks &= (w.iter().sum::<f64>() - 1.0).abs() < 1e-12 && w.iter().all(|&x| x >= 0.0);
    }
    check(sticks, "stick-breaking normalization");

    // Density normalization by grid integration.
    let mut dens = true;
    for _ in 0..10 {
        let n = 6;
        let x = DMatrix::from_fn(n, 2, |_, j| {
            if j == 0 {
                1.0
            } else {
                rng.random_range(-2.0..2.0)
            }
        });
        let ctx = GpContext::new(x, &KernelConfig::default()).unwrap();
        let h = 3;
        let draw = DrawSnapshot {
            weights: stick_breaking(&[0.5, 0.3, 1.0]).unwrap(),
            betas: (0..h)
                .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
                .collect(),
            thetas: vec![
                Some((0..n).map(|_| rng.random_range(-2.0..2.0)).collect()),
                Some((0..n).map(|_| rng.random_range(-2.0..2.0)).collect()),
                None,
            ],
            counts: vec![3, 3, 0],
            sigma: rng.random_range(0.3..1.0),
            alpha: 1.0,
        };
        for loc in [Location::TrainingRow(2), Location::Covariates(&[1.0, 0.3])] {
            let (lo, hi, k) = (-20.0, 20.0, 40_000usize);
            let step = (hi - lo) / k as f64;
            // Simpson's rule.
            let mut s = 0.0;
            for i in 0..=k {
                let y = lo + i as f64 * step;
                let f = mixture_log_density(y, loc, &draw, &ctx).unwrap().exp();
                let c = if i == 0 || i == k {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                s += c * f;
            }
            dens &= (s * step / 3.0 - 1.0).abs() < 1e-6;
        }
    }
    check(dens, "density normalization");

    // Predictive survival monotone in t.
    let d = gen_study1(80, Some(0.23), BASE_SEED).unwrap();
    let set = d.transition_set();
    let h = empirical_bayes_hyperparams(&set, DEFAULT_TRUNCATION, KernelConfig::default()).unwrap();
    let cfg = McmcConfig {
        burn_in: 200,
        total: 600,
        thin: 4,
        seed: 6,
    };
    let draws = fit_transition_model(&set, &h, &cfg).unwrap();
    let pred = Predictor::new(&draws).unwrap();
    let ts: Vec<f64> = (0..200).map(|i| (-6.0 + 0.06 * i as f64).exp()).collect();
    let mut mono = true;
    for xi in d.x.iter().take(20).chain([[1.0, 1.0, 0.37, 0.0]].iter()) {
        let s: Vec<f64> = ts.iter().map(|&t| pred.survival(t, xi).unwrap()).collect();
        mono &=
            s.windows(2).all(|w| w[1] <= w[0] + 1e-15) && s.iter().all(|v| (0.0..=1.0).contains(v));
    }
    check(mono, "predictive survival monotone");

    // Kaplan-Meier closed forms.
    let km1 = kaplan_meier(&[1.0, 2.0, 3.0], &[true, true, true]).unwrap();
    let km2 = kaplan_meier(&[1.0, 2.0, 3.0], &[false, false, false]).unwrap();
    let km3 = kaplan_meier(&[1.0, 2.0, 3.0], &[true, false, true]).unwrap();
    let close = |a: f64, b: f64| (a - b).abs() < 1e-15;
    check(
        close(km1.eval(1.0), 2.0 / 3.0)
            && close(km1.eval(2.0), 1.0 / 3.0)
            && km1.eval(3.0) == 0.0
            && km2.eval(10.0) == 1.0
            && close(km3.eval(1.0), 2.0 / 3.0)
            && close(km3.eval(2.5), 2.0 / 3.0)
            && km3.eval(3.0) == 0.0,
        "Kaplan-Meier closed forms",
    );

    // IPTW constant-weight reduction: balanced actions, intercept-only
    // propensity (p̂ = 0.5 exactly), no censoring.
    let graph = single_decision_graph();
    let cg = graph.compile().unwrap();
    let pathways: Vec<PatientPathway> = (0..40)
        .map(|i| {
            let t = 10.0 + rng.random_range(0.0..100.0);
            PatientPathway {
                patient_id: i.to_string(),
                baseline: vec![rng.random_range(40.0..80.0)],
                actions: BTreeMap::from([(
                    "Z".to_string(),
                    if i % 2 == 0 { "a" } else { "b" }.to_string(),
                )]),
                transitions: vec![(1, t)],
                followup: t,
                died: true,
            }
        })
        .collect();
    let props = fit_propensities(&cg, &pathways).unwrap();
    let cens = censoring_survival(&pathways).unwrap();
    let est = iptw_mean_survival(&cg, &pathways, &Regime::new([("Z", "a")]), &props, &cens)
        .unwrap()
        .estimate;
    let direct = mean(
        &pathways
            .iter()
            .filter(|p| p.actions["Z"] == "a")
            .map(|p| p.followup)
            .collect::<Vec<_>>(),
    );
    check(
        (est - direct).abs() <= 1e-12 * direct,
        "IPTW constant-weight reduction",
    );

    // Gradient checks.
    let n = 300;
    let xs = DMatrix::from_fn(n, 3, |_, j| {
        if j == 0 {
            1.0
        } else {
            rng.random_range(-1.0..1.0)
        }
    });
    let beta = [0.5, -0.3, 0.8];
    let mut y = Vec::new();
    let mut delta = Vec::new();
    let mut z = Vec::new();
    for i in 0..n {
        let eta: f64 = (0..3).map(|j| xs[(i, j)] * beta[j]).sum();
        let t = eta + 0.7 * rng.random_range(-1.5..1.5);
        let c = eta + rng.random_range(-0.5..2.5);
        y.push(t.min(c));
        delta.push(t <= c);
        z.push(rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp()));
    }
    let mut grad_ok = true;
    for dist in [AftDistribution::Lognormal, AftDistribution::Weibull] {
        let fit = aft_mle(&xs, &y, &delta, dist).unwrap();
        // Away from the optimum so the gradient is not ~0.
        let p: Vec<f64> = fit.params().iter().map(|v| v + 0.1).collect();
        let g = fit.gradient_at(&xs, &y, &delta, &p);
        for j in 0..p.len() {
            let hstep = 1e-5 * p[j].abs().max(1.0);
            let mut a = p.clone();
            let mut b = p.clone();
            a[j] += hstep;
            b[j] -= hstep;
            let fd = (fit.log_likelihood_at(&xs, &y, &delta, &a)
                - fit.log_likelihood_at(&xs, &y, &delta, &b))
                / (2.0 * hstep);
            grad_ok &= (fd - g[j]).abs() <= 1e-4 * g[j].abs().max(1e-8);
        }
        let g0 = fit.gradient_at(&xs, &y, &delta, &fit.params());
        grad_ok &= g0.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-8 * n as f64;
    }
    let lf = logistic_irls(&xs, &z).unwrap();
    let lg = ddpgp_core::baselines::LogisticFit::gradient_at(&xs, &z, &lf.coefficients);
    grad_ok &= lg.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-8;
    check(grad_ok, "AFT/logistic gradients");

    // CSV round trips.
    let s3 = gen_study3(120, Some(0.15), BASE_SEED).unwrap();
    let text = pathways_to_csv(&s3.graph, &s3.pathways).unwrap();
    let back = pathways_from_csv(&s3.graph, &text).unwrap();
    let rows = report_rows(&[RegimeReportEntry {
        ddpgp: ddpgp_core::RegimeEstimate {
            regime: Regime::new([("Z", "a")]),
            label: "(a)".into(),
            estimate: 1.0 / 3.0,
            ci_lo: Some(0.1),
            ci_hi: Some(0.7),
            per_draw: vec![],
        },
        iptw: None,
    }]);
    let rows_back = report_from_csv(&report_to_csv(&rows).unwrap()).unwrap();
    check(back == s3.pathways && rows_back == rows, "CSV round trips");

    Outcome {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            "kernel PSD, stick-breaking, density normalization, survival monotonicity, K-M, IPTW reduction, gradients, CSV round trips all hold".into()
        } else {
            format!("failed: {}", failures.join(", "))
        },
    }
}

// ------------------------------------------------------------ criterion 7

fn criterion7() -> Outcome {
    let started = Instant::now();
    let d = gen_leukemia_shaped(210, BASE_SEED).unwrap();
    let g = d.graph.compile().unwrap();
    let sets = validate_dataset(&d.graph, &d.pathways).unwrap();
    let opts = PathwayFitOptions {
        mcmc: McmcConfig {
            seed: BASE_SEED,
            ..McmcConfig::default()
        },
        ..Default::default()
    };
    let fits = fit_pathway(&g, &sets, &opts).unwrap();
    let n_ddpgp = fits.iter().filter(|f| f.draws.is_some()).count();
    let models: Vec<TransitionModel> = fits.into_iter().map(|f| f.model).collect();
    let base: Vec<Vec<f64>> = d.pathways.iter().map(|p| p.baseline.clone()).collect();
    let dp = g_mean_survival_all(
        &g,
        &models,
        &base,
        &GcompOptions {
            seed: BASE_SEED,
            ..Default::default()
        },
    )
    .unwrap();
    let ip = iptw_all(&g, &d.pathways).unwrap();
    let entries: Vec<RegimeReportEntry> = dp
        .into_iter()
        .zip(ip)
        .map(|(ddpgp, iptw)| RegimeReportEntry { ddpgp, iptw })
        .collect();
    let rows = report_rows(&entries);
    let csv = report_to_csv(&rows).unwrap();
    let ordered = rows.iter().all(|r| {
        r.ddpgp_mean.is_finite()
            && r.ci_lo <= r.ddpgp_mean
            && r.ddpgp_mean <= r.ci_hi
            && r.ci_lo.is_finite()
            && r.ci_hi.is_finite()
    });
    let secs = started.elapsed().as_secs_f64();
    let pass = d.params.synthetic
        && n_ddpgp == 6
        && rows.len() == 16
        && csv.lines().count() == 17
        && ordered
        && secs < 1200.0;
    Outcome {
        pass,
        detail: format!(
            "{} transitions fitted ({} DDP-GP), {} regimes in report, finite estimates with ordered 90% CIs: {}, {:.0}s (< 1200s)",
            sets.len(),
            n_ddpgp,
            rows.len(),
            ordered,
            secs
        ),
    }
}

fn main() {
    let selected: Option<Vec<usize>> = std::env::var("DDPGP_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let criteria: [(usize, &str, fn() -> Outcome); 7] = [
        (1, "study-1 survival curves vs Weibull AFT", criterion1),
        (2, "study-2 average treatment effect", criterion2),
        (3, "study-3 regime means vs IPTW", criterion3),
        (4, "G-computation oracle equivalence", criterion4),
        (5, "sampler correctness", criterion5),
        (6, "property suites", criterion6),
        (7, "leukemia-shaped pipeline", criterion7),
    ];
    let mut failed = Vec::new();
    for (id, title, run) in criteria {
        if selected.as_ref().is_some_and(|s| !s.contains(&id)) {
            continue;
        }
        let started = Instant::now();
        let out = run();
        report(id, title, started, &out);
        if !out.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all selected criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
