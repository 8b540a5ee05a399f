use std::fs;
use std::path::Path;

use ddpgp_core::baselines::lr_treatment_effect;
use ddpgp_core::data::validate_dataset;
use ddpgp_core::io::{self, RegimeReportEntry};
use ddpgp_core::mcmc::fit_transition_model;
use ddpgp_core::model::{empirical_bayes_hyperparams, Predictor};
use ddpgp_core::regime::{
    ddpgp_treatment_effect, fit_pathway, g_mean_survival_all, iptw_all, iptw_treatment_effect,
    GcompOptions, PathwayFitOptions, TransitionModel,
};
use ddpgp_core::replicate::{
    study1_replicate, study2_replicate, study3_replicate, study3_truth_table,
};
use ddpgp_core::rng::replicate_seed;
use ddpgp_core::sim::{self, ScenarioConfig, Study, Study2Data, Study3Truth};
use ddpgp_core::stats::{mean, median, quantile, variance};
use ddpgp_core::{Error, KernelConfig, Result};
use rayon::prelude::*;
use serde::{de::DeserializeOwned, Serialize};
use serde_json::{json, Value};

use crate::{
    Command, DiagnosticsArgs, EvaluateArgs, FitArgs, GcompArgs, McmcArgs, PredictArgs,
    ReplicateArgs, SimulateArgs, StudyArg, TreatmentArgs,
};

pub enum Output {
    Json(Value),
    Text(String),
}

pub fn run(cmd: Command) -> Result<Output> {
    match cmd {
        Command::Simulate(a) => simulate(a).map(Output::Json),
        Command::Fit(a) => fit(a).map(Output::Json),
        Command::PredictSurvival(a) => predict_survival(a),
        Command::EvaluateRegimes(a) => evaluate_regimes(a).map(Output::Json),
        Command::TreatmentEffect(a) => treatment_effect(a).map(Output::Json),
        Command::ReplicateStudy(a) => replicate_study(a).map(Output::Json),
        Command::Diagnostics(a) => diagnostics(a),
    }
}

fn study_of(s: StudyArg) -> Study {
    match s {
        StudyArg::One => Study::Study1,
        StudyArg::Two => Study::Study2,
        StudyArg::Three => Study::Study3,
        StudyArg::Leukemia => Study::LeukemiaShaped,
    }
}

fn fit_options(m: &McmcArgs, seed: u64) -> PathwayFitOptions {
    PathwayFitOptions {
        mcmc: m.config(seed),
        truncation: m.truncation,
        kernel: KernelConfig::default(),
    }
}

fn gcomp_options(g: &GcompArgs, seed: u64) -> GcompOptions {
    GcompOptions {
        n_paths: g.n_paths,
        max_draws: g.max_draws,
        seed,
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("reading {}: {e}", path.display())))
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn simulate(a: SimulateArgs) -> Result<Value> {
    let study = study_of(a.study);
    if a.censoring.is_some() && matches!(study, Study::Study2 | Study::LeukemiaShaped) {
        return Err(Error::InvalidArgument(
            "--censoring applies to studies 1 and 3 only".into(),
        ));
    }
    let out = &a.out;
    let mut files = vec![];
    let mut put_json = |name: &str, v: Value| -> Result<()> {
        let p = out.join(name);
        io::write_json(&p, &v)?;
        files.push(path_str(&p));
        Ok(())
    };
    match study {
        Study::Study1 => {
            let d = sim::gen_study1(a.n, a.censoring, a.seed)?;
            let g = sim::study1_graph();
            io::write_pathways_csv(&out.join("pathways.csv"), &g, &d.pathways())?;
            put_json("graph.json", serde_json::to_value(&g)?)?;
            put_json(
                "truth.json",
                json!({
                    "beta1": sim::STUDY1_BETA1,
                    "beta2": sim::STUDY1_BETA2,
                    "weights": sim::STUDY1_WEIGHTS,
                    "sigma2": sim::STUDY1_SIGMA2,
                }),
            )?;
        }
        Study::Study2 => {
            let d = sim::gen_study2(a.n, a.seed)?;
            io::write_atomic(
                &out.join("treatment.csv"),
                io::treatment_to_csv(&d)?.as_bytes(),
            )?;
            put_json("truth.json", json!({ "effect": sim::STUDY2_EFFECT }))?;
        }
        Study::Study3 => {
            let d = sim::gen_study3(a.n, a.censoring, a.seed)?;
            io::write_pathways_csv(&out.join("pathways.csv"), &d.graph, &d.pathways)?;
            put_json("graph.json", serde_json::to_value(&d.graph)?)?;
            put_json("truth.json", serde_json::to_value(&d.truth)?)?;
        }
        Study::LeukemiaShaped => {
            let d = sim::gen_leukemia_shaped(a.n, a.seed)?;
            io::write_pathways_csv(&out.join("pathways.csv"), &d.graph, &d.pathways)?;
            put_json("graph.json", serde_json::to_value(&d.graph)?)?;
            put_json("params.json", serde_json::to_value(&d.params)?)?;
        }
    }
    let data = if study == Study::Study2 {
        "treatment.csv"
    } else {
        "pathways.csv"
    };
    files.insert(0, path_str(&out.join(data)));
    Ok(
        json!({ "study": study, "n": a.n, "seed": a.seed, "censoring": a.censoring, "files": files }),
    )
}

fn fit(a: FitArgs) -> Result<Value> {
    let (graph, pathways) = io::ingest_pathways_csv(&a.data, &a.graph)?;
    let compiled = graph.compile()?;
    let sets = validate_dataset(&graph, &pathways)?;
    let opts = fit_options(&a.mcmc, a.seed);
    let fitted = fit_pathway(&compiled, &sets, &opts)?;
    let manifest = io::save_fit(&a.out, &graph, &sets, &fitted, &opts.mcmc, pathways.len())?;
    let transitions: Vec<Value> = manifest
        .transitions
        .iter()
        .zip(&fitted)
        .map(|(e, f)| {
            json!({
                "name": e.name,
                "model": e.model,
                "records": e.n_records,
                "events": e.n_events,
                "file": e.file,
                "diagnostics": f.draws.as_ref().map(|d| &d.diagnostics),
            })
        })
        .collect();
    Ok(json!({ "out": path_str(&a.out), "patients": pathways.len(), "transitions": transitions }))
}

fn predict_survival(a: PredictArgs) -> Result<Output> {
    if !(a.t_max > 0.0 && a.t_max.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "--t-max must be positive, got {}",
            a.t_max
        )));
    }
    if a.points == 0 {
        return Err(Error::InvalidArgument("--points must be at least 1".into()));
    }
    let (manifest, models) = io::load_fit(&a.fit)?;
    let compiled = manifest.graph.compile()?;
    let k = compiled.transition_index(&a.transition)?;
    let m = compiled.covariate_fields(k).len();
    if a.x.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: a.x.len(),
        });
    }
    let grid: Vec<f64> = (1..=a.points)
        .map(|i| a.t_max * i as f64 / a.points as f64)
        .collect();
    // S(0) = 1 exactly; the models are evaluated on t > 0 only.
    let (mut t, mut s, mut lo, mut hi) = (vec![0.0], vec![1.0], vec![1.0], vec![1.0]);
    match &models[k] {
        TransitionModel::DdpGp(p) => {
            let curves = p.survival_curves(&grid, &a.x)?;
            for (j, &tj) in grid.iter().enumerate() {
                let col: Vec<f64> = curves.iter().map(|c| c[j]).collect();
                t.push(tj);
                s.push(mean(&col));
                lo.push(quantile(&col, 0.05));
                hi.push(quantile(&col, 0.95));
            }
        }
        other => {
            for &tj in &grid {
                let v = other.survival(tj, &a.x)?;
                t.push(tj);
                s.push(v);
                lo.push(v);
                hi.push(v);
            }
        }
    }
    let text = io::survival_curve_to_csv(&t, &s, &lo, &hi)?;
    match a.out {
        None => Ok(Output::Text(text)),
        Some(p) => {
            io::write_atomic(&p, text.as_bytes())?;
            Ok(Output::Json(json!({
                "out": path_str(&p),
                "transition": a.transition,
                "points": t.len(),
                "survival_at_t_max": s.last(),
            })))
        }
    }
}

fn evaluate_regimes(a: EvaluateArgs) -> Result<Value> {
    let (manifest, models) = io::load_fit(&a.fit)?;
    let graph = &manifest.graph;
    let compiled = graph.compile()?;
    let pathways = io::pathways_from_csv(graph, &read_text(&a.data)?)?;
    validate_dataset(graph, &pathways)?;
    let baselines: Vec<Vec<f64>> = pathways.iter().map(|p| p.baseline.clone()).collect();
    let dp = g_mean_survival_all(
        &compiled,
        &models,
        &baselines,
        &gcomp_options(&a.gcomp, a.seed),
    )?;
    let ip = if a.no_iptw {
        vec![None; dp.len()]
    } else {
        iptw_all(&compiled, &pathways)?
    };
    let entries: Vec<RegimeReportEntry> = dp
        .into_iter()
        .zip(ip)
        .map(|(ddpgp, iptw)| RegimeReportEntry { ddpgp, iptw })
        .collect();
    let rows = io::report_rows(&entries);
    io::write_json(&a.out.join("report.json"), &entries)?;
    io::write_atomic(
        &a.out.join("report.csv"),
        io::report_to_csv(&rows)?.as_bytes(),
    )?;
    Ok(json!({ "out": path_str(&a.out), "regimes": rows }))
}

fn treatment_effect(a: TreatmentArgs) -> Result<Value> {
    let d = io::treatment_from_csv(&read_text(&a.data)?)?;
    let set = d.transition_set();
    let opts = fit_options(&a.mcmc, a.seed);
    let hyper = empirical_bayes_hyperparams(&set, opts.truncation, opts.kernel)?;
    let draws = fit_transition_model(&set, &hyper, &opts.mcmc)?;
    let te = ddpgp_treatment_effect(
        &Predictor::new(&draws)?,
        &d.rows(),
        Study2Data::TREATMENT_COLUMN,
    )?;
    let iptw = iptw_treatment_effect(&d.l, &d.w, &d.z, &d.y)?;
    let lr = lr_treatment_effect(&d.l, &d.w, &d.z, &d.y)?;
    // Sample average of Y(1) − Y(0), when the file carries both outcomes.
    let sample_effect = if d.y1.iter().chain(&d.y0).all(|v| v.is_finite()) {
        let diff: Vec<f64> = d.y1.iter().zip(&d.y0).map(|(a, b)| a - b).collect();
        Some(mean(&diff))
    } else {
        None
    };
    let summary = json!({
        "n": d.len(),
        "ddpgp": { "estimate": te.estimate, "ci_lo": te.ci_lo, "ci_hi": te.ci_hi },
        "iptw": { "estimate": iptw },
        "lr": { "estimate": lr.estimate, "std_error": lr.std_error },
        "sample_effect": sample_effect,
    });
    io::write_json(&a.out.join("effect.json"), &summary)?;
    io::write_atomic(
        &a.out.join("subjects.csv"),
        io::columns_to_csv(
            &["effect_mean", "effect_lo", "effect_hi"],
            &[
                te.subject_mean.clone(),
                te.subject_lo.clone(),
                te.subject_hi.clone(),
            ],
        )?
        .as_bytes(),
    )?;
    io::write_draws(&a.out.join("draws.json"), &draws)?;
    Ok(summary)
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    io::write_atomic(path, &bytes)
}

fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

/// Runs replicates `0..n` on `pool`, writing each to its own CSV under
/// `dir` before returning all rows in replicate order.
fn run_replicates<T, F>(
    pool: &rayon::ThreadPool,
    dir: &Path,
    n: usize,
    resume: bool,
    f: F,
) -> Result<Vec<T>>
where
    T: Serialize + DeserializeOwned + Send,
    F: Fn(u64) -> Result<Vec<T>> + Sync,
{
    let per: Vec<Vec<T>> = pool.install(|| {
        (0..n as u64)
            .into_par_iter()
            .map(|r| {
                let path = dir.join(format!("replicate_{r:05}.csv"));
                if resume && path.exists() {
                    return read_rows(&path);
                }
                let rows = f(r)?;
                write_rows(&path, &rows)?;
                Ok(rows)
            })
            .collect::<Result<_>>()
    })?;
    Ok(per.into_iter().flatten().collect())
}

fn sd(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

fn replicate_study(a: ReplicateArgs) -> Result<Value> {
    let study = study_of(a.study);
    ScenarioConfig {
        study,
        n: a.n,
        censoring: a.censoring,
        replicates: a.replicates,
        base_seed: a.base_seed,
    }
    .validate()?;
    if study == Study::LeukemiaShaped {
        return Err(Error::InvalidArgument(
            "replicate-study supports studies 1, 2 and 3".into(),
        ));
    }
    if study == Study::Study2 && a.censoring.is_some() {
        return Err(Error::InvalidArgument("study 2 has no censoring".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let fit = fit_options(&a.mcmc, 0);
    let dir = a.out.join("replicates");
    let seed = |r: u64| replicate_seed(a.base_seed, r);
    let header = json!({
        "study": study,
        "n": a.n,
        "censoring": a.censoring,
        "replicates": a.replicates,
        "base_seed": a.base_seed,
        "mcmc": fit.mcmc,
        "truncation": fit.truncation,
    });

    let summary = match study {
        Study::Study1 => {
            let rows = run_replicates(&pool, &dir, a.replicates, a.resume, |r| {
                Ok(vec![study1_replicate(r, a.n, a.censoring, seed(r), &fit)?])
            })?;
            write_rows(&a.out.join("replicates.csv"), &rows)?;
            let dp: Vec<f64> = rows.iter().map(|r| r.ddpgp_error).collect();
            let wb: Vec<f64> = rows.iter().map(|r| r.weibull_error).collect();
            let wins = rows
                .iter()
                .filter(|r| r.ddpgp_error < r.weibull_error)
                .count();
            json!({
                "ddpgp_mean_error": mean(&dp),
                "weibull_mean_error": mean(&wb),
                "ddpgp_win_fraction": wins as f64 / rows.len() as f64,
            })
        }
        Study::Study2 => {
            let rows = run_replicates(&pool, &dir, a.replicates, a.resume, |r| {
                Ok(vec![study2_replicate(r, a.n, seed(r), &fit)?])
            })?;
            write_rows(&a.out.join("replicates.csv"), &rows)?;
            let col = |f: fn(&ddpgp_core::replicate::Study2Replicate) -> f64| {
                rows.iter().map(f).collect::<Vec<_>>()
            };
            let (dp, ip, lr) = (col(|r| r.ddpgp), col(|r| r.iptw), col(|r| r.lr));
            let covered = rows
                .iter()
                .filter(|r| r.ddpgp_lo <= sim::STUDY2_EFFECT && sim::STUDY2_EFFECT <= r.ddpgp_hi)
                .count();
            json!({
                "true_effect": sim::STUDY2_EFFECT,
                "ddpgp": { "mean": mean(&dp), "sd": sd(&dp), "coverage": covered as f64 / rows.len() as f64 },
                "iptw": { "mean": mean(&ip), "sd": sd(&ip) },
                "lr": { "mean": mean(&lr), "sd": sd(&lr) },
            })
        }
        Study::Study3 => {
            let gcomp = gcomp_options(&a.gcomp, 0);
            let rows = run_replicates(&pool, &dir, a.replicates, a.resume, |r| {
                let s = seed(r);
                study3_replicate(
                    r,
                    a.n,
                    a.censoring,
                    s,
                    &fit,
                    &GcompOptions { seed: s, ..gcomp },
                )
            })?;
            write_rows(&a.out.join("replicates.csv"), &rows)?;
            let truth = if a.truth_trajectories > 0 {
                let t = pool.install(|| {
                    study3_truth_table(&Study3Truth::default(), a.truth_trajectories, a.base_seed)
                })?;
                write_rows(&a.out.join("truth.csv"), &t)?;
                Some(t)
            } else {
                None
            };
            let mut labels: Vec<&str> = Vec::new();
            for r in &rows {
                if !labels.contains(&r.regime.as_str()) {
                    labels.push(&r.regime);
                }
            }
            let regimes: Vec<Value> = labels
                .iter()
                .map(|&label| {
                    let of: Vec<_> = rows.iter().filter(|r| r.regime == label).collect();
                    let dp: Vec<f64> = of.iter().map(|r| r.ddpgp).collect();
                    let ip: Vec<f64> = of.iter().filter_map(|r| r.iptw).collect();
                    let iqr = |v: &[f64]| quantile(v, 0.75) - quantile(v, 0.25);
                    let eta = truth
                        .as_ref()
                        .and_then(|t| t.iter().find(|t| t.regime == label))
                        .map(|t| t.eta);
                    let mae = |v: &[f64]| eta.map(|e| median(&v.iter().map(|x| (x - e).abs()).collect::<Vec<_>>()));
                    json!({
                        "regime": label,
                        "truth": eta,
                        "ddpgp": { "median": median(&dp), "iqr": iqr(&dp), "median_abs_error": mae(&dp) },
                        "iptw": if ip.is_empty() { Value::Null } else {
                            json!({ "median": median(&ip), "iqr": iqr(&ip), "median_abs_error": mae(&ip), "available": ip.len() })
                        },
                    })
                })
                .collect();
            json!({ "regimes": regimes })
        }
        Study::LeukemiaShaped => unreachable!("rejected above"),
    };
    let out = json!({ "scenario": header, "summary": summary });
    io::write_json(&a.out.join("summary.json"), &out)?;
    Ok(out)
}

fn diagnostics(a: DiagnosticsArgs) -> Result<Output> {
    let draws = io::load_fit_draws(&a.fit)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "transition",
        "draws",
        "ess_log_posterior",
        "ess_sigma",
        "ess_alpha",
        "mean_occupied_clusters",
        "allocation_change_rate",
        "constant_chains",
    ])?;
    for d in &draws {
        let g = &d.diagnostics;
        w.write_record([
            d.name.clone(),
            d.draws.len().to_string(),
            g.ess_log_posterior.to_string(),
            g.ess_sigma.to_string(),
            g.ess_alpha.to_string(),
            g.mean_occupied_clusters.to_string(),
            g.allocation_change_rate.to_string(),
            g.constant_chains.join(";"),
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    match a.out {
        None => Ok(Output::Text(
            String::from_utf8(bytes).expect("csv output is utf-8"),
        )),
        Some(p) => {
            io::write_atomic(&p, &bytes)?;
            Ok(Output::Json(
                json!({ "out": path_str(&p), "transitions": draws.len() }),
            ))
        }
    }
}
