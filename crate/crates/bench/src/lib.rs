//! Fixtures shared by the benchmarks.

use ddpgp_core::data::validate_dataset;
use ddpgp_core::mcmc::{McmcConfig, Sampler};
use ddpgp_core::model::{empirical_bayes_hyperparams, DEFAULT_TRUNCATION};
use ddpgp_core::regime::{fit_pathway, PathwayFitOptions, TransitionModel};
use ddpgp_core::sim::{gen_study1, gen_study3};
use ddpgp_core::{data::CompiledGraph, KernelConfig};

/// Sampler on a study-1 sample of size `n`.
pub fn study1_sampler(n: usize, seed: u64) -> Sampler {
    let d = gen_study1(n, None, seed).expect("study 1 sample");
    let set = d.transition_set();
    let hyper = empirical_bayes_hyperparams(&set, DEFAULT_TRUNCATION, KernelConfig::default())
        .expect("priors");
    let (_, x) = set.standardized().expect("design");
    let y = set.records.iter().map(|r| r.y).collect();
    let censored = set.records.iter().map(|r| !r.delta).collect();
    Sampler::new(x, y, censored, hyper).expect("sampler")
}

/// Study-3 graph, short-chain fitted models and baseline sample.
pub fn study3_fit(n: usize, seed: u64) -> (CompiledGraph, Vec<TransitionModel>, Vec<Vec<f64>>) {
    let d = gen_study3(n, Some(0.15), seed).expect("study 3 sample");
    let g = d.graph.compile().expect("graph");
    let sets = validate_dataset(&d.graph, &d.pathways).expect("dataset");
    let opts = PathwayFitOptions {
        mcmc: McmcConfig {
            burn_in: 100,
            total: 300,
            thin: 5,
            seed,
        },
        ..Default::default()
    };
    let models = fit_pathway(&g, &sets, &opts)
        .expect("fit")
        .into_iter()
        .map(|f| f.model)
        .collect();
    let base = d.pathways.iter().map(|p| p.baseline.clone()).collect();
    (g, models, base)
}
