//! Data generators for the simulation studies and a leukemia-shaped cohort.
//!
//! Every generator is deterministic given its seed. Replicate `r` of a study
//! uses [`crate::rng::replicate_seed`]`(base_seed, r)`. Censoring, where
//! requested, is an independent `Unif(0, c)` follow-up time with `c` chosen
//! by bisection on a fixed 10⁵-subject pilot so that the expected censoring
//! fraction hits the target.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{
    BaselineCovariate, CovariateField, CovariateKind, DecisionPoint, ModelKind, PathwayGraph,
    PatientPathway, TransitionDef, TransitionRecord, TransitionSet,
};
use crate::regime::TransitionModel;
use crate::rng::{stream, StreamRng, PURPOSE_CENSOR_PILOT, PURPOSE_ORACLE, PURPOSE_SIMULATE};
use crate::stats::{normal_cdf, pairwise_sum};
use crate::{Error, Result};

const PILOT_SIZE: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    Study1,
    Study2,
    Study3,
    LeukemiaShaped,
}

impl Study {
    fn tag(self) -> u64 {
        match self {
            Study::Study1 => 1,
            Study::Study2 => 2,
            Study::Study3 => 3,
            Study::LeukemiaShaped => 4,
        }
    }

    pub fn min_n(self) -> usize {
        match self {
            Study::Study1 | Study::Study2 => 10,
            Study::Study3 => 50,
            Study::LeukemiaShaped => 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub study: Study,
    pub n: usize,
    /// Target censoring fraction; `None` for no censoring.
    pub censoring: Option<f64>,
    pub replicates: usize,
    pub base_seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < self.study.min_n() {
            return Err(Error::InvalidArgument(format!(
                "n must be at least {} for {:?}, got {}",
                self.study.min_n(),
                self.study,
                self.n
            )));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidArgument(
                "replicates must be at least 1".into(),
            ));
        }
        if let Some(c) = self.censoring {
            if !(0.0..0.95).contains(&c) {
                return Err(Error::InvalidArgument(format!(
                    "censoring fraction {c} out of range"
                )));
            }
        }
        Ok(())
    }
}

fn check_n(n: usize, study: Study) -> Result<()> {
    if n < study.min_n() {
        return Err(Error::InvalidArgument(format!(
            "n must be at least {} for {:?}, got {n}",
            study.min_n(),
            study
        )));
    }
    Ok(())
}

#[inline]
fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    rng.random::<f64>() < p
}

/// `c` such that `P(U < T) = target` for `U ~ Unif(0, c)`, given pilot times.
/// Uses `P(U < T) = E[min(T, c)] / c`, which decreases in `c`.
pub fn calibrate_uniform_censoring(pilot: &[f64], target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "censoring target {target} must lie in (0, 1)"
        )));
    }
    let frac = |c: f64| {
        pairwise_sum(&pilot.iter().map(|t| t.min(c)).collect::<Vec<_>>()) / (c * pilot.len() as f64)
    };
    let mut lo = pilot.iter().copied().fold(f64::INFINITY, f64::min) * 1e-6;
    let mut hi = pilot.iter().copied().fold(0.0, f64::max);
    while frac(hi) > target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if frac(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

// ---------------------------------------------------------------- study 1

pub const STUDY1_BETA1: [f64; 4] = [1.0, 2.0, -2.0, 1.0];
pub const STUDY1_BETA2: [f64; 4] = [2.0, -1.0, 3.0, -3.0];
pub const STUDY1_WEIGHTS: [f64; 2] = [0.4, 0.6];
pub const STUDY1_SIGMA2: f64 = 0.4;

/// Survival regression data: `x = (1, tumor size, standardized weight, biomarker)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Study1Data {
    pub x: Vec<[f64; 4]>,
    /// Observed time (event or censoring), days.
    pub time: Vec<f64>,
    pub delta: Vec<bool>,
}

fn study1_covariates<R: Rng + ?Sized>(rng: &mut R) -> [f64; 4] {
    let tumor = bernoulli(rng, 0.5);
    let weight: f64 = rng.random_range(80.0..150.0);
    // Population standardization of Unif(80, 150).
    let w = (weight - 115.0) / (70.0 / 12f64.sqrt());
    let bio = bernoulli(rng, if tumor { 0.3 } else { 0.7 });
    [1.0, tumor as u8 as f64, w, bio as u8 as f64]
}

fn study1_log_time<R: Rng + ?Sized>(x: &[f64; 4], rng: &mut R) -> f64 {
    let beta = if bernoulli(rng, STUDY1_WEIGHTS[0]) {
        &STUDY1_BETA1
    } else {
        &STUDY1_BETA2
    };
    let m: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum();
    m + STUDY1_SIGMA2.sqrt() * std_normal(rng)
}

/// True `S₀(t | x)` of the study-1 mixture.
pub fn study1_true_survival(t: f64, x: &[f64; 4]) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    let s = STUDY1_SIGMA2.sqrt();
    let lt = t.ln();
    [&STUDY1_BETA1, &STUDY1_BETA2]
        .iter()
        .zip(STUDY1_WEIGHTS)
        .map(|(b, w)| {
            let m: f64 = x.iter().zip(b.iter()).map(|(a, c)| a * c).sum();
            w * (1.0 - normal_cdf((lt - m) / s))
        })
        .sum()
}

fn study1_censoring_bound(target: f64) -> Result<f64> {
    let mut rng = stream(0, &[PURPOSE_CENSOR_PILOT, Study::Study1.tag()]);
    let pilot: Vec<f64> = (0..PILOT_SIZE)
        .map(|_| {
            let x = study1_covariates(&mut rng);
            study1_log_time(&x, &mut rng).exp()
        })
        .collect();
    calibrate_uniform_censoring(&pilot, target)
}

/// Study 1 sample; `censoring` is the target censored fraction.
pub fn gen_study1(n: usize, censoring: Option<f64>, seed: u64) -> Result<Study1Data> {
    check_n(n, Study::Study1)?;
    let bound = censoring.map(study1_censoring_bound).transpose()?;
    let mut rng = stream(seed, &[PURPOSE_SIMULATE, Study::Study1.tag()]);
    let mut out = Study1Data {
        x: Vec::with_capacity(n),
        time: Vec::with_capacity(n),
        delta: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let x = study1_covariates(&mut rng);
        let t = study1_log_time(&x, &mut rng).exp();
        let (time, delta) = match bound {
            Some(c) => {
                let u = rng.random::<f64>() * c;
                if u < t {
                    (u, false)
                } else {
                    (t, true)
                }
            }
            None => (t, true),
        };
        out.x.push(x);
        out.time.push(time);
        out.delta.push(delta);
    }
    Ok(out)
}

impl Study1Data {
    pub fn kinds() -> Vec<CovariateKind> {
        vec![
            CovariateKind::Binary,
            CovariateKind::Binary,
            CovariateKind::Numeric,
            CovariateKind::Binary,
        ]
    }

    pub fn transition_set(&self) -> TransitionSet {
        TransitionSet {
            transition: 1,
            name: "OS".into(),
            kinds: Self::kinds(),
            records: (0..self.time.len())
                .map(|i| TransitionRecord {
                    patient_id: (i + 1).to_string(),
                    transition: 1,
                    x: self.x[i].to_vec(),
                    y: self.time[i].ln(),
                    delta: self.delta[i],
                })
                .collect(),
        }
    }

    /// `(1/n) Σ_i S₀(t | x_i)`.
    pub fn true_marginal_survival(&self, t: f64) -> f64 {
        pairwise_sum(
            &self
                .x
                .iter()
                .map(|x| study1_true_survival(t, x))
                .collect::<Vec<_>>(),
        ) / self.x.len() as f64
    }

    /// Time at which the true marginal survival equals `s`.
    pub fn true_marginal_quantile(&self, s: f64) -> f64 {
        let (mut lo, mut hi) = (-50.0f64, 50.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.true_marginal_survival(mid.exp()) > s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi)).exp()
    }

    /// 100-point (or `k`-point) log-spaced grid between the times where the
    /// true marginal survival is 0.99 and 0.01.
    pub fn evaluation_grid(&self, k: usize) -> Vec<f64> {
        let a = self.true_marginal_quantile(0.99).ln();
        let b = self.true_marginal_quantile(0.01).ln();
        (0..k)
            .map(|j| (a + (b - a) * j as f64 / (k - 1).max(1) as f64).exp())
            .collect()
    }

    /// As a single-transition pathway dataset (`0 → D`).
    pub fn pathways(&self) -> Vec<PatientPathway> {
        (0..self.time.len())
            .map(|i| PatientPathway {
                patient_id: (i + 1).to_string(),
                baseline: self.x[i][1..].to_vec(),
                actions: BTreeMap::new(),
                transitions: if self.delta[i] {
                    vec![(1, self.time[i])]
                } else {
                    vec![]
                },
                followup: self.time[i],
                died: self.delta[i],
            })
            .collect()
    }
}

/// `0 → D` with the three study-1 baseline covariates.
pub fn study1_graph() -> PathwayGraph {
    let base = |n: &str, kind| BaselineCovariate {
        name: n.into(),
        kind,
    };
    PathwayGraph {
        initial_state: "0".into(),
        states: vec!["0".into(), "D".into()],
        baseline: vec![
            base("tumor", CovariateKind::Binary),
            base("weight", CovariateKind::Numeric),
            base("biomarker", CovariateKind::Binary),
        ],
        decisions: vec![],
        transitions: vec![TransitionDef {
            id: 1,
            name: "OS".into(),
            from: "0".into(),
            to: "D".into(),
            model: ModelKind::Ddpgp,
            covariates: vec![
                CovariateField::Intercept,
                CovariateField::Baseline("tumor".into()),
                CovariateField::Baseline("weight".into()),
                CovariateField::Baseline("biomarker".into()),
            ],
        }],
        competing_groups: vec![vec![1]],
    }
}

// ---------------------------------------------------------------- study 2

pub const STUDY2_SIGMA: f64 = 0.4;
pub const STUDY2_EFFECT: f64 = 2.5;

/// Single-stage treatment data with both potential outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Study2Data {
    pub l: Vec<f64>,
    pub w: Vec<f64>,
    pub z: Vec<bool>,
    pub y: Vec<f64>,
    pub y1: Vec<f64>,
    pub y0: Vec<f64>,
}

/// `P(Z = 1 | L)`: logistic in `(L − 30)/5`, truncated to [0.05, 0.95].
pub fn study2_propensity(l: f64) -> f64 {
    (1.0 / (1.0 + (-2.0 * (l - 30.0) / 10.0).exp())).clamp(0.05, 0.95)
}

pub fn gen_study2(n: usize, seed: u64) -> Result<Study2Data> {
    check_n(n, Study::Study2)?;
    let mut rng = stream(seed, &[PURPOSE_SIMULATE, Study::Study2.tag()]);
    let mut d = Study2Data {
        l: vec![],
        w: vec![],
        z: vec![],
        y: vec![],
        y1: vec![],
        y0: vec![],
    };
    let h = 12f64.sqrt();
    for _ in 0..n {
        // √L needs L > 0; the left tail of N(20, 10²) is redrawn.
        let l = loop {
            let m = if bernoulli(&mut rng, 0.5) { 40.0 } else { 20.0 };
            let l = m + 10.0 * std_normal(&mut rng);
            if l > 0.0 {
                break l;
            }
        };
        let w: f64 = rng.random_range(-h..h);
        let z = bernoulli(&mut rng, study2_propensity(l));
        let base = -0.2 * l + l.sqrt() - 0.1 * w;
        let shift = if bernoulli(&mut rng, 0.5) { 3.0 } else { 2.0 };
        let y1 = base + shift + STUDY2_SIGMA * std_normal(&mut rng);
        let y0 = base + STUDY2_SIGMA * std_normal(&mut rng);
        d.l.push(l);
        d.w.push(w);
        d.z.push(z);
        d.y.push(if z { y1 } else { y0 });
        d.y1.push(y1);
        d.y0.push(y0);
    }
    Ok(d)
}

impl Study2Data {
    pub fn len(&self) -> usize {
        self.l.len()
    }

    pub fn is_empty(&self) -> bool {
        self.l.is_empty()
    }

    /// Raw covariate rows `(1, L, W, z)`.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|i| vec![1.0, self.l[i], self.w[i], self.z[i] as u8 as f64])
            .collect()
    }

    /// Column of the treatment indicator in [`Study2Data::rows`].
    pub const TREATMENT_COLUMN: usize = 3;

    /// All outcomes observed; the response itself plays the role of `y`.
    pub fn transition_set(&self) -> TransitionSet {
        TransitionSet {
            transition: 1,
            name: "response".into(),
            kinds: vec![
                CovariateKind::Binary,
                CovariateKind::Numeric,
                CovariateKind::Numeric,
                CovariateKind::Binary,
            ],
            records: self
                .rows()
                .into_iter()
                .enumerate()
                .map(|(i, x)| TransitionRecord {
                    patient_id: (i + 1).to_string(),
                    transition: 1,
                    x,
                    y: self.y[i],
                    delta: true,
                })
                .collect(),
        }
    }
}

// ---------------------------------------------------------------- study 3

/// Generative parameters of study 3. Actions are coded 0/1 in covariates
/// (`a1, b11, b21 → 0`; `a2, b12, b22 → 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Study3Truth {
    pub beta_0r: Vec<f64>,
    pub beta_0c: Vec<f64>,
    pub beta_rd: Vec<f64>,
    pub beta_cp: Vec<f64>,
    pub beta_pd: Vec<f64>,
    /// Log-scale standard deviation of every transition.
    pub sigma: f64,
    /// Censoring bound `c` of `Unif(0, c)` follow-up, if censored.
    pub censoring_bound: Option<f64>,
}

impl Default for Study3Truth {
    fn default() -> Self {
        Self {
            beta_0r: vec![2.0, 0.02, 0.0],
            beta_0c: vec![1.5, 0.03, -0.8],
            beta_rd: vec![-0.5, 0.03, 0.2, 0.5, 0.3],
            beta_cp: vec![1.0, 0.05, 1.0, -0.6],
            beta_pd: vec![0.8, 0.04, 1.5, -1.0, 0.5, 0.5],
            sigma: 0.5,
            censoring_bound: None,
        }
    }
}

/// Assignment probabilities of the second action of each decision given `L`.
pub fn study3_assignment(decision: usize, l: f64) -> f64 {
    let high = l >= 100.0;
    match (decision, high) {
        // P(a2)
        (0, false) => 0.4,
        (0, true) => 0.6,
        // P(b12)
        (1, false) => 0.2,
        (1, true) => 0.8,
        // P(b22)
        (2, false) => 0.8,
        (2, true) => 0.15,
        _ => unreachable!("study 3 has three decisions"),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One uncensored study-3 course.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Course {
    l: f64,
    z1: usize,
    /// `Some((T0R, Z21, TRD))` on the resistance branch.
    resist: Option<(f64, usize, f64)>,
    /// `Some((T0C, TCP, Z22, TPD))` on the remission branch.
    remit: Option<(f64, f64, usize, f64)>,
}

impl Course {
    fn total(&self) -> f64 {
        match (self.resist, self.remit) {
            (Some((a, _, b)), _) => a + b,
            (_, Some((a, b, _, c))) => a + b + c,
            _ => unreachable!(),
        }
    }
}

impl Study3Truth {
    /// Simulates a course; `forced` overrides the assignment mechanism.
    fn course<R: Rng + ?Sized>(&self, rng: &mut R, forced: Option<[usize; 3]>) -> Course {
        let l = 100.0 + 10.0 * std_normal(rng);
        let pick = |rng: &mut R, d: usize| match forced {
            Some(a) => a[d],
            None => bernoulli(rng, study3_assignment(d, l)) as usize,
        };
        let s = self.sigma;
        let z1 = pick(rng, 0);
        let x1 = [1.0, l, z1 as f64];
        let t0r = (dot(&self.beta_0r, &x1) + s * std_normal(rng)).exp();
        let t0c = (dot(&self.beta_0c, &x1) + s * std_normal(rng)).exp();
        if t0r < t0c {
            let z21 = pick(rng, 1);
            let x = [1.0, l, z1 as f64, t0r.ln(), z21 as f64];
            let trd = (dot(&self.beta_rd, &x) + s * std_normal(rng)).exp();
            Course {
                l,
                z1,
                resist: Some((t0r, z21, trd)),
                remit: None,
            }
        } else {
            let x = [1.0, l, z1 as f64, t0c.ln()];
            let tcp = (dot(&self.beta_cp, &x) + s * std_normal(rng)).exp();
            let z22 = pick(rng, 2);
            let x = [1.0, l, z1 as f64, t0c.ln(), tcp.ln(), z22 as f64];
            let tpd = (dot(&self.beta_pd, &x) + s * std_normal(rng)).exp();
            Course {
                l,
                z1,
                resist: None,
                remit: Some((t0c, tcp, z22, tpd)),
            }
        }
    }

    /// True mean overall survival under fixed actions `[Z1, Z21, Z22]` by
    /// direct simulation; returns `(mean, Monte-Carlo SE)`.
    pub fn true_eta(&self, actions: [usize; 3], n_traj: usize, seed: u64) -> (f64, f64) {
        let code = (actions[0] * 4 + actions[1] * 2 + actions[2]) as u64;
        let mut rng = stream(seed, &[PURPOSE_ORACLE, code]);
        let t: Vec<f64> = (0..n_traj)
            .map(|_| self.course(&mut rng, Some(actions)).total())
            .collect();
        let m = pairwise_sum(&t) / n_traj as f64;
        let v = crate::stats::variance(&t);
        (m, (v / n_traj as f64).sqrt())
    }

    /// The generative law as plug-in models on the study-3 graph's raw
    /// covariate vectors.
    pub fn models(&self) -> Vec<TransitionModel> {
        let mk = |beta: Vec<f64>, s: f64| {
            TransitionModel::sampler(move |x, rng| {
                let z: f64 = StandardNormal.sample(rng);
                dot(&beta, x) + s * z
            })
        };
        vec![
            mk(self.beta_0r.clone(), self.sigma),
            mk(self.beta_0c.clone(), self.sigma),
            mk(self.beta_rd.clone(), self.sigma),
            mk(self.beta_cp.clone(), self.sigma),
            mk(self.beta_pd.clone(), self.sigma),
        ]
    }
}

/// Study-3 pathway graph. Transition ids: 1 = (0,R), 2 = (0,C), 3 = (R,D),
/// 4 = (C,P), 5 = (P,D). Baseline `L` and its indicator `L_high = 1[L ≥ 100]`;
/// the indicator enters only the propensity models.
pub fn study3_graph() -> PathwayGraph {
    use CovariateField::*;
    let act = |d: &str, a: &str| Action {
        decision: d.into(),
        equals: a.into(),
    };
    let t = |id, name: &str, from: &str, to: &str, covariates| TransitionDef {
        id,
        name: name.into(),
        from: from.into(),
        to: to.into(),
        model: ModelKind::Ddpgp,
        covariates,
    };
    let stage1 = vec![Intercept, Baseline("L".into()), act("Z1", "a2")];
    let dp = |name: &str, state: &str, acts: [&str; 2]| DecisionPoint {
        name: name.into(),
        state: state.into(),
        actions: acts.iter().map(|s| s.to_string()).collect(),
        randomized: false,
        propensity_covariates: vec![Intercept, Baseline("L_high".into())],
    };
    PathwayGraph {
        initial_state: "0".into(),
        states: ["0", "R", "C", "P", "D"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        baseline: vec![
            BaselineCovariate {
                name: "L".into(),
                kind: CovariateKind::Numeric,
            },
            BaselineCovariate {
                name: "L_high".into(),
                kind: CovariateKind::Binary,
            },
        ],
        decisions: vec![
            dp("Z1", "0", ["a1", "a2"]),
            dp("Z21", "R", ["b11", "b12"]),
            dp("Z22", "P", ["b21", "b22"]),
        ],
        transitions: vec![
            t(1, "0R", "0", "R", stage1.clone()),
            t(2, "0C", "0", "C", stage1.clone()),
            t(
                3,
                "RD",
                "R",
                "D",
                vec![
                    Intercept,
                    Baseline("L".into()),
                    act("Z1", "a2"),
                    LogSojourn("0R".into()),
                    act("Z21", "b12"),
                ],
            ),
            t(
                4,
                "CP",
                "C",
                "P",
                vec![
                    Intercept,
                    Baseline("L".into()),
                    act("Z1", "a2"),
                    LogSojourn("0C".into()),
                ],
            ),
            t(
                5,
                "PD",
                "P",
                "D",
                vec![
                    Intercept,
                    Baseline("L".into()),
                    act("Z1", "a2"),
                    LogSojourn("0C".into()),
                    LogSojourn("CP".into()),
                    act("Z22", "b22"),
                ],
            ),
        ],
        competing_groups: vec![vec![1, 2], vec![3], vec![4], vec![5]],
    }
}

/// Study-3 dataset with its generative truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Study3Data {
    pub graph: PathwayGraph,
    pub pathways: Vec<PatientPathway>,
    pub truth: Study3Truth,
}

fn study3_censoring_bound(truth: &Study3Truth, target: f64) -> Result<f64> {
    let mut rng = stream(0, &[PURPOSE_CENSOR_PILOT, Study::Study3.tag()]);
    let pilot: Vec<f64> = (0..PILOT_SIZE)
        .map(|_| truth.course(&mut rng, None).total())
        .collect();
    calibrate_uniform_censoring(&pilot, target)
}

const STUDY3_ACTIONS: [[&str; 2]; 3] = [["a1", "a2"], ["b11", "b12"], ["b21", "b22"]];

/// Censors a study-3 course at `u` and writes it as a pathway.
fn study3_pathway(id: usize, c: &Course, u: Option<f64>) -> PatientPathway {
    let mut steps: Vec<(usize, f64, Option<(usize, usize)>)> = Vec::new();
    // (transition id, sojourn, decision taken on entering the destination)
    match (c.resist, c.remit) {
        (Some((t0r, z21, trd)), _) => {
            steps.push((1, t0r, Some((1, z21))));
            steps.push((3, trd, None));
        }
        (_, Some((t0c, tcp, z22, tpd))) => {
            steps.push((2, t0c, None));
            steps.push((4, tcp, Some((2, z22))));
            steps.push((5, tpd, None));
        }
        _ => unreachable!(),
    }
    let mut actions = BTreeMap::new();
    actions.insert("Z1".to_string(), STUDY3_ACTIONS[0][c.z1].to_string());
    let total = c.total();
    let horizon = u.filter(|&u| u < total);
    let mut transitions = Vec::new();
    let mut elapsed = 0.0;
    for (k, d, next) in steps {
        if let Some(u) = horizon {
            if elapsed + d > u {
                break;
            }
        }
        elapsed += d;
        transitions.push((k, d));
        if let Some((dec, a)) = next {
            actions.insert(
                format!("Z{}", if dec == 1 { "21" } else { "22" }),
                STUDY3_ACTIONS[dec][a].to_string(),
            );
        }
    }
    let (followup, died) = match horizon {
        Some(u) => (u, false),
        None => (total, true),
    };
    PatientPathway {
        patient_id: (id + 1).to_string(),
        baseline: vec![c.l, (c.l >= 100.0) as u8 as f64],
        actions,
        transitions,
        followup,
        died,
    }
}

/// Study 3 with `censoring` as the target censored fraction (15% in the
/// reference design).
pub fn gen_study3(n: usize, censoring: Option<f64>, seed: u64) -> Result<Study3Data> {
    check_n(n, Study::Study3)?;
    let mut truth = Study3Truth::default();
    truth.censoring_bound = censoring
        .map(|c| study3_censoring_bound(&truth, c))
        .transpose()?;
    let mut rng = stream(seed, &[PURPOSE_SIMULATE, Study::Study3.tag()]);
    let pathways = (0..n)
        .map(|i| {
            let c = truth.course(&mut rng, None);
            let u = truth.censoring_bound.map(|b| rng.random::<f64>() * b);
            study3_pathway(i, &c, u)
        })
        .collect();
    Ok(Study3Data {
        graph: study3_graph(),
        pathways,
        truth,
    })
}

/// Resolved action indices of a study-3 regime label set, in `[Z1, Z21, Z22]` order.
pub fn study3_regime_actions(regime: &crate::data::Regime) -> Result<[usize; 3]> {
    let mut out = [0; 3];
    for (d, name) in ["Z1", "Z21", "Z22"].iter().enumerate() {
        let label = regime
            .actions
            .get(*name)
            .ok_or_else(|| Error::InvalidArgument(format!("regime has no action for `{name}`")))?;
        out[d] = STUDY3_ACTIONS[d]
            .iter()
            .position(|a| a == label)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown action `{label}`")))?;
    }
    Ok(out)
}

// ---------------------------------------------------------- leukemia-shaped

/// Invented generative parameters for the leukemia-shaped cohort. They are
/// not estimates from any real trial and exist only to exercise the
/// seven-transition, sixteen-regime pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeukemiaShapedParams {
    /// Marks the parameters as synthetic in serialized output.
    pub synthetic: bool,
    pub note: String,
    pub censoring: f64,
}

impl Default for LeukemiaShapedParams {
    fn default() -> Self {
        Self {
            synthetic: true,
            note: "invented parameters; not derived from real patient data".into(),
            censoring: 0.15,
        }
    }
}

pub const LEUKEMIA_ARMS: [&str; 4] = ["A", "B", "C", "D"];
pub const LEUKEMIA_SALVAGE_R: [&str; 2] = ["S1", "S2"];
pub const LEUKEMIA_SALVAGE_P: [&str; 2] = ["S1", "S2"];

/// Leukemia-shaped graph: states 0, R, C, P, D; transitions 1 = (0,D),
/// 2 = (0,R), 3 = (0,C), 4 = (R,D), 5 = (C,D), 6 = (C,P), 7 = (P,D). The rare
/// (C,D) transition uses an intercept-only Weibull model.
pub fn leukemia_graph() -> PathwayGraph {
    use CovariateField::*;
    let arm = |a: &str| Action {
        decision: "induction".into(),
        equals: a.into(),
    };
    let stage1 = vec![
        Intercept,
        Baseline("age".into()),
        Baseline("cyto".into()),
        arm("B"),
        arm("C"),
        arm("D"),
    ];
    let t = |id, name: &str, from: &str, to: &str, model, covariates| TransitionDef {
        id,
        name: name.into(),
        from: from.into(),
        to: to.into(),
        model,
        covariates,
    };
    let salvage = |name: &str, state: &str, acts: &[&str; 2]| DecisionPoint {
        name: name.into(),
        state: state.into(),
        actions: acts.iter().map(|s| s.to_string()).collect(),
        randomized: false,
        propensity_covariates: vec![Intercept, Baseline("age".into())],
    };
    PathwayGraph {
        initial_state: "0".into(),
        states: ["0", "R", "C", "P", "D"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        baseline: vec![
            BaselineCovariate {
                name: "age".into(),
                kind: CovariateKind::Numeric,
            },
            BaselineCovariate {
                name: "cyto".into(),
                kind: CovariateKind::Binary,
            },
        ],
        decisions: vec![
            DecisionPoint {
                name: "induction".into(),
                state: "0".into(),
                actions: LEUKEMIA_ARMS.iter().map(|s| s.to_string()).collect(),
                randomized: true,
                propensity_covariates: vec![],
            },
            salvage("salvage_R", "R", &LEUKEMIA_SALVAGE_R),
            salvage("salvage_P", "P", &LEUKEMIA_SALVAGE_P),
        ],
        transitions: vec![
            t(1, "0D", "0", "D", ModelKind::Ddpgp, stage1.clone()),
            t(2, "0R", "0", "R", ModelKind::Ddpgp, stage1.clone()),
            t(3, "0C", "0", "C", ModelKind::Ddpgp, stage1),
            t(
                4,
                "RD",
                "R",
                "D",
                ModelKind::Ddpgp,
                vec![
                    Intercept,
                    Baseline("age".into()),
                    LogSojourn("0R".into()),
                    Action {
                        decision: "salvage_R".into(),
                        equals: "S2".into(),
                    },
                ],
            ),
            t(
                5,
                "CD",
                "C",
                "D",
                ModelKind::WeibullIntercept,
                vec![Intercept],
            ),
            t(
                6,
                "CP",
                "C",
                "P",
                ModelKind::Ddpgp,
                vec![
                    Intercept,
                    Baseline("age".into()),
                    Baseline("cyto".into()),
                    LogSojourn("0C".into()),
                ],
            ),
            t(
                7,
                "PD",
                "P",
                "D",
                ModelKind::Ddpgp,
                vec![
                    Intercept,
                    Baseline("age".into()),
                    LogSojourn("CP".into()),
                    Action {
                        decision: "salvage_P".into(),
                        equals: "S2".into(),
                    },
                ],
            ),
        ],
        competing_groups: vec![vec![1, 2, 3], vec![4], vec![5, 6], vec![7]],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeukemiaShapedData {
    pub graph: PathwayGraph,
    pub pathways: Vec<PatientPathway>,
    pub params: LeukemiaShapedParams,
}

/// An uncensored leukemia-shaped course as (transition id, sojourn) steps
/// plus actions.
fn leukemia_course(rng: &mut StreamRng) -> (Vec<f64>, Vec<(usize, f64)>, BTreeMap<String, String>) {
    let age = std_normal(rng);
    let cyto = bernoulli(rng, 0.35) as u8 as f64;
    let arm = rng.random_range(0..4usize);
    let arm_eff = [0.0, 0.15, -0.1, 0.25][arm];
    let ln = |rng: &mut StreamRng, m: f64, s: f64| (m + s * std_normal(rng)).exp();
    let mut actions = BTreeMap::new();
    actions.insert("induction".to_string(), LEUKEMIA_ARMS[arm].to_string());
    let t0d = ln(rng, 4.6 + 0.3 * -age - 0.3 * cyto + arm_eff, 0.8);
    let t0r = ln(rng, 4.0 - 0.1 * age - 0.2 * cyto - 0.5 * arm_eff, 0.5);
    let t0c = ln(rng, 3.5 + 0.1 * age + 0.3 * cyto - arm_eff, 0.4);
    let mut steps = Vec::new();
    if t0d < t0r && t0d < t0c {
        steps.push((1, t0d));
    } else if t0r < t0c {
        steps.push((2, t0r));
        let p = 1.0 / (1.0 + (-0.8 * age).exp());
        let s = bernoulli(rng, p) as usize;
        actions.insert("salvage_R".into(), LEUKEMIA_SALVAGE_R[s].to_string());
        steps.push((
            4,
            ln(
                rng,
                4.4 - 0.2 * age + 0.2 * t0r.ln() + 0.3 * s as f64 - 0.8,
                0.6,
            ),
        ));
    } else {
        steps.push((3, t0c));
        let tcd = ln(rng, 7.0, 1.0);
        let tcp = ln(rng, 5.4 - 0.2 * age - 0.3 * cyto + 0.1 * t0c.ln(), 0.6);
        if tcd < tcp {
            steps.push((5, tcd));
        } else {
            steps.push((6, tcp));
            let p = 1.0 / (1.0 + (0.5 * age).exp());
            let s = bernoulli(rng, p) as usize;
            actions.insert("salvage_P".into(), LEUKEMIA_SALVAGE_P[s].to_string());
            steps.push((
                7,
                ln(
                    rng,
                    4.2 - 0.2 * age + 0.1 * tcp.ln() + 0.4 * s as f64 - 0.5,
                    0.6,
                ),
            ));
        }
    }
    (vec![age, cyto], steps, actions)
}

pub fn gen_leukemia_shaped(n: usize, seed: u64) -> Result<LeukemiaShapedData> {
    check_n(n, Study::LeukemiaShaped)?;
    let params = LeukemiaShapedParams::default();
    let bound = {
        let mut rng = stream(0, &[PURPOSE_CENSOR_PILOT, Study::LeukemiaShaped.tag()]);
        let pilot: Vec<f64> = (0..PILOT_SIZE)
            .map(|_| leukemia_course(&mut rng).1.iter().map(|s| s.1).sum())
            .collect();
        calibrate_uniform_censoring(&pilot, params.censoring)?
    };
    let graph = leukemia_graph();
    let mut rng = stream(seed, &[PURPOSE_SIMULATE, Study::LeukemiaShaped.tag()]);
    let pathways = (0..n)
        .map(|i| {
            let (baseline, steps, mut actions) = leukemia_course(&mut rng);
            let u = rng.random::<f64>() * bound;
            let total: f64 = steps.iter().map(|s| s.1).sum();
            if u >= total {
                return PatientPathway {
                    patient_id: (i + 1).to_string(),
                    baseline,
                    actions,
                    transitions: steps,
                    followup: total,
                    died: true,
                };
            }
            let mut kept = Vec::new();
            let mut elapsed = 0.0;
            for (k, d) in steps {
                if elapsed + d > u {
                    break;
                }
                elapsed += d;
                kept.push((k, d));
            }
            // Drop salvage actions for decisions not reached before censoring.
            let reached_r = kept.iter().any(|s| s.0 == 2);
            let reached_p = kept.iter().any(|s| s.0 == 6);
            if !reached_r {
                actions.remove("salvage_R");
            }
            if !reached_p {
                actions.remove("salvage_P");
            }
            PatientPathway {
                patient_id: (i + 1).to_string(),
                baseline,
                actions,
                transitions: kept,
                followup: u,
                died: false,
            }
        })
        .collect();
    Ok(LeukemiaShapedData {
        graph,
        pathways,
        params,
    })
}
