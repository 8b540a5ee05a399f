use std::sync::OnceLock;

use ddpgp_core::baselines::{aft_mle, kaplan_meier, AftDistribution};
use ddpgp_core::data::{CovariateKind, TransitionRecord, TransitionSet};
use ddpgp_core::io::{
    pathways_from_csv, pathways_to_csv, report_from_csv, report_to_csv, treatment_from_csv,
    treatment_to_csv, RegimeReportRow,
};
use ddpgp_core::kernel::covariance_matrix;
use ddpgp_core::mcmc::{fit_transition_model, McmcConfig};
use ddpgp_core::model::{
    empirical_bayes_hyperparams, mixture_log_density, stick_breaking, DrawSnapshot, GpContext,
    Location, Predictor, DEFAULT_TRUNCATION,
};
use ddpgp_core::regime::iptw_treatment_effect;
use ddpgp_core::sim::{gen_study1, gen_study2, gen_study3};
use ddpgp_core::KernelConfig;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn simpson<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, k: usize) -> f64 {
    let h = (hi - lo) / k as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..k {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(lo + i as f64 * h);
    }
    s * h / 3.0
}

fn study1_predictor() -> &'static (Predictor, Vec<[f64; 4]>) {
    static FIT: OnceLock<(Predictor, Vec<[f64; 4]>)> = OnceLock::new();
    FIT.get_or_init(|| {
        let d = gen_study1(80, Some(0.23), 17).unwrap();
        let set = d.transition_set();
        let h =
            empirical_bayes_hyperparams(&set, DEFAULT_TRUNCATION, KernelConfig::default()).unwrap();
        let cfg = McmcConfig {
            burn_in: 100,
            total: 300,
            thin: 4,
            seed: 2,
        };
        let draws = fit_transition_model(&set, &h, &cfg).unwrap();
        (Predictor::new(&draws).unwrap(), d.x)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn covariance_is_symmetric_psd(
        (n, m, vals) in (1usize..30, 1usize..5).prop_flat_map(|(n, m)| {
            (Just(n), Just(m), prop::collection::vec(-3.0f64..3.0, n * m))
        })
    ) {
        let x = DMatrix::from_fn(n, m, |i, j| vals[i * m + j]);
        let c = covariance_matrix(&x, &KernelConfig::default()).unwrap();
        prop_assert!((&c - c.transpose()).abs().max() == 0.0);
        prop_assert!(c.clone().symmetric_eigen().eigenvalues.min() > -1e-10);
        // The nugget makes every diagonal 1 + J².
        for i in 0..n {
            prop_assert!((c[(i, i)] - 1.01).abs() < 1e-15);
        }
    }

    #[test]
    fn stick_breaking_weights_sum_to_one(mut v in prop::collection::vec(1e-9f64..1.0, 0..60)) {
        v.push(1.0);
        let w = stick_breaking(&v).unwrap();
        prop_assert_eq!(w.len(), v.len());
        prop_assert!(w.iter().all(|&x| x >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kaplan_meier_matches_empirical_without_censoring(
        times in prop::collection::vec(0.1f64..100.0, 1..40),
        t in 0.0f64..110.0,
    ) {
        let delta = vec![true; times.len()];
        let km = kaplan_meier(&times, &delta).unwrap();
        let frac = times.iter().filter(|&&s| s > t).count() as f64 / times.len() as f64;
        prop_assert!((km.eval(t) - frac).abs() < 1e-12);
    }

    #[test]
    fn kaplan_meier_is_a_survival_function(
        data in prop::collection::vec((0.1f64..100.0, any::<bool>()), 1..40),
    ) {
        let (times, delta): (Vec<f64>, Vec<bool>) = data.into_iter().unzip();
        let km = kaplan_meier(&times, &delta).unwrap();
        let mut prev = 1.0;
        for i in 0..=220 {
            let s = km.eval(i as f64 * 0.5);
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!(s <= prev);
            prev = s;
        }
        if delta.iter().all(|d| !d) {
            prop_assert_eq!(km.eval(1e6), 1.0);
        }
    }

    #[test]
    fn iptw_effect_scales_with_outcome(seed in 0u64..1000, c in 0.01f64..100.0) {
        let d = gen_study2(60, seed).unwrap();
        let scaled: Vec<f64> = d.y.iter().map(|y| c * y).collect();
        let a = iptw_treatment_effect(&d.l, &d.w, &d.z, &d.y).unwrap();
        let b = iptw_treatment_effect(&d.l, &d.w, &d.z, &scaled).unwrap();
        prop_assert!((b - c * a).abs() <= 1e-9 * (c * a).abs().max(1.0));
    }

    #[test]
    fn aft_gradient_matches_finite_differences(
        seed in 0u64..500,
        shift in prop::collection::vec(-0.3f64..0.3, 4),
        weibull in any::<bool>(),
    ) {
        let d = gen_study1(120, Some(0.3), seed).unwrap();
        let set = d.transition_set();
        let x = DMatrix::from_fn(set.records.len(), 3, |i, j| set.records[i].x[[0, 2, 3][j]]);
        let y: Vec<f64> = set.records.iter().map(|r| r.y).collect();
        let delta: Vec<bool> = set.records.iter().map(|r| r.delta).collect();
        let dist = if weibull { AftDistribution::Weibull } else { AftDistribution::Lognormal };
        let fit = aft_mle(&x, &y, &delta, dist).unwrap();
        let p: Vec<f64> = fit.params().iter().zip(&shift).map(|(a, b)| a + b).collect();
        let g = fit.gradient_at(&x, &y, &delta, &p);
        for j in 0..p.len() {
            let h = 1e-5;
            let (mut a, mut b) = (p.clone(), p.clone());
            a[j] += h;
            b[j] -= h;
            let fd = (fit.log_likelihood_at(&x, &y, &delta, &a) - fit.log_likelihood_at(&x, &y, &delta, &b)) / (2.0 * h);
            prop_assert!((fd - g[j]).abs() <= 1e-4 * g[j].abs().max(1.0), "param {j}: fd {fd} vs {}", g[j]);
        }
    }

    #[test]
    fn report_csv_round_trips(
        rows in prop::collection::vec(
            ("[a-z(), ]{1,12}", prop::option::of(-1e6f64..1e6), -1e6f64..1e6, -1e6f64..1e6, -1e6f64..1e6),
            0..10,
        )
    ) {
        let rows: Vec<RegimeReportRow> = rows
            .into_iter()
            .map(|(regime, iptw, m, lo, hi)| RegimeReportRow { regime, iptw, ddpgp_mean: m, ci_lo: lo, ci_hi: hi })
            .collect();
        let back = report_from_csv(&report_to_csv(&rows).unwrap()).unwrap();
        prop_assert_eq!(back, rows);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn mixture_density_integrates_to_one(
        betas in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 2), 3),
        thetas in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 6), 2),
        xs in prop::collection::vec(-2.0f64..2.0, 6),
        sigma in 0.3f64..1.5,
        query in -2.0f64..2.0,
        row in 0usize..6,
    ) {
        let x = DMatrix::from_fn(6, 2, |i, j| if j == 0 { 1.0 } else { xs[i] });
        let ctx = GpContext::new(x, &KernelConfig::default()).unwrap();
        let draw = DrawSnapshot {
            weights: stick_breaking(&[0.5, 0.3, 1.0]).unwrap(),
            betas,
            thetas: vec![Some(thetas[0].clone()), Some(thetas[1].clone()), None],
            counts: vec![3, 3, 0],
            sigma,
            alpha: 1.0,
        };
        let q = [1.0, query];
        for loc in [Location::TrainingRow(row), Location::Covariates(&q)] {
            let total = simpson(|y| mixture_log_density(y, loc, &draw, &ctx).unwrap().exp(), -25.0, 25.0, 20_000);
            prop_assert!((total - 1.0).abs() < 1e-6, "integral {total}");
        }
    }

    #[test]
    fn predictive_survival_is_monotone(
        tumor in any::<bool>(),
        bio in any::<bool>(),
        w in -2.5f64..2.5,
        ts in prop::collection::vec(0.001f64..1e4, 2..30),
    ) {
        let (pred, _) = study1_predictor();
        let x = [1.0, tumor as u8 as f64, w, bio as u8 as f64];
        let mut ts = ts;
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let s: Vec<f64> = ts.iter().map(|&t| pred.survival(t, &x).unwrap()).collect();
        prop_assert!(s.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!(s.windows(2).all(|p| p[1] <= p[0] + 1e-15));
    }

    #[test]
    fn pathway_csv_round_trips(seed in 0u64..10_000, n in 50usize..90, censored in any::<bool>()) {
        let d = gen_study3(n, censored.then_some(0.2), seed).unwrap();
        let text = pathways_to_csv(&d.graph, &d.pathways).unwrap();
        prop_assert_eq!(pathways_from_csv(&d.graph, &text).unwrap(), d.pathways);
    }

    #[test]
    fn treatment_csv_round_trips(seed in 0u64..10_000, n in 10usize..60) {
        let d = gen_study2(n, seed).unwrap();
        prop_assert_eq!(treatment_from_csv(&treatment_to_csv(&d).unwrap()).unwrap(), d);
    }
}

fn single_cluster_set(n: usize, b: &[f64], sd: f64, seed: u64) -> TransitionSet {
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = ddpgp_core::rng::stream(seed, &[99]);
    let records = (0..n)
        .map(|i| {
            let mut x = vec![1.0];
            x.extend((1..b.len()).map(|_| rng.random_range(-2.0..2.0)));
            let e: f64 = StandardNormal.sample(&mut rng);
            let m: f64 = x.iter().zip(b).map(|(a, c)| a * c).sum();
            TransitionRecord {
                patient_id: i.to_string(),
                transition: 0,
                x,
                y: m + sd * e,
                delta: true,
            }
        })
        .collect();
    let mut kinds = vec![CovariateKind::Binary];
    kinds.extend((1..b.len()).map(|_| CovariateKind::Numeric));
    TransitionSet {
        transition: 0,
        name: "T".into(),
        kinds,
        records,
    }
}

fn fit_single_cluster(set: &TransitionSet, seed: u64) -> Predictor {
    let h = empirical_bayes_hyperparams(set, DEFAULT_TRUNCATION, KernelConfig::default()).unwrap();
    let cfg = McmcConfig {
        burn_in: 500,
        total: 1500,
        thin: 5,
        seed,
    };
    Predictor::new(&fit_transition_model(set, &h, &cfg).unwrap()).unwrap()
}

/// One lognormal cluster, n = 200: posterior mean of E[log T | x] at 10
/// probes. The noise sd is 0.1; at larger noise the GP smoother itself (exact
/// GP regression with the same kernel) misses a straight line by more than
/// 0.1 near the edges.
#[test]
fn single_cluster_mean_is_recovered() {
    for (seed, b) in [(1u64, [2.0, 0.5]), (2, [1.0, -0.8]), (3, [3.0, 0.0])] {
        let set = single_cluster_set(200, &b, 0.1, seed);
        let pred = fit_single_cluster(&set, seed);
        for j in 0..10 {
            let x1 = -1.5 + 3.0 * j as f64 / 9.0;
            let x = [1.0, x1];
            let m = (0..pred.n_draws())
                .map(|d| pred.mean_log_time(d, &x).unwrap())
                .sum::<f64>()
                / pred.n_draws() as f64;
            let truth = b[0] + b[1] * x1;
            assert!(
                (m - truth).abs() < 0.1,
                "seed {seed}, x1 {x1}: {m} vs {truth}"
            );
        }
    }
}

/// Intercept-only lognormal data: predictive survival against the analytic
/// lognormal survival on 20 points spanning its 95% to 5% range, and against
/// the lognormal MLE plug-in of the same sample. n = 800 keeps the sampling
/// error of the sample itself below the 0.02 bound.
#[test]
fn single_cluster_survival_matches_lognormal() {
    let (mu, sd) = (3.0, 0.5);
    let set = single_cluster_set(800, &[mu], sd, 0);
    let pred = fit_single_cluster(&set, 0);
    let n = set.records.len() as f64;
    let m = set.records.iter().map(|r| r.y).sum::<f64>() / n;
    let s = (set.records.iter().map(|r| (r.y - m).powi(2)).sum::<f64>() / n).sqrt();
    let (mut vs_truth, mut vs_mle): (f64, f64) = (0.0, 0.0);
    for j in 0..20 {
        let z = -1.645 + 3.29 * j as f64 / 19.0;
        let t: f64 = (mu + sd * z).exp();
        let got = pred.survival(t, &[1.0]).unwrap();
        vs_truth = vs_truth.max((got - (1.0 - ddpgp_core::stats::normal_cdf(z))).abs());
        vs_mle = vs_mle.max((got - (1.0 - ddpgp_core::stats::normal_cdf((t.ln() - m) / s))).abs());
    }
    assert!(vs_truth < 0.02, "max abs error vs truth {vs_truth}");
    assert!(vs_mle < 0.01, "max abs error vs MLE {vs_mle}");
}
