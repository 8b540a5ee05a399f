//! Pathway graphs, patient pathways, per-transition records and regimes.
//!
//! A [`PathwayGraph`] declares the disease states, the possible transitions
//! between them, which transitions race from a common origin, the decision
//! points where a treatment action is chosen, and which history fields form
//! the covariate vector of each transition. [`validate_dataset`] turns
//! observed [`PatientPathway`]s into censored [`TransitionRecord`]s, one per
//! transition each patient was at risk for.
//!
//! Transition times are sojourn durations measured from entry into the
//! origin state; overall survival is their sum along the realized path.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// 1-based running index of a transition.
pub type TransitionId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateKind {
    /// Standardized with training statistics before fitting.
    Numeric,
    /// Passed through unchanged.
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineCovariate {
    pub name: String,
    pub kind: CovariateKind,
}

/// One entry of a transition's covariate vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateField {
    Intercept,
    Baseline(String),
    /// Log sojourn time of an earlier transition, referenced by name.
    LogSojourn(String),
    /// 1 if the action taken at `decision` equals `equals`, else 0.
    Action {
        decision: String,
        equals: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Ddpgp,
    /// Intercept-only Weibull AFT, for transitions with too few events.
    WeibullIntercept,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionDef {
    pub id: TransitionId,
    pub name: String,
    pub from: String,
    pub to: String,
    #[serde(default)]
    pub model: ModelKind,
    pub covariates: Vec<CovariateField>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionPoint {
    pub name: String,
    /// The action is chosen on entry into this state.
    pub state: String,
    pub actions: Vec<String>,
    /// Randomized decisions carry no propensity weight in IPTW.
    #[serde(default)]
    pub randomized: bool,
    /// Covariates of the logistic propensity model (binary actions only).
    #[serde(default)]
    pub propensity_covariates: Vec<CovariateField>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathwayGraph {
    pub initial_state: String,
    pub states: Vec<String>,
    pub baseline: Vec<BaselineCovariate>,
    pub decisions: Vec<DecisionPoint>,
    pub transitions: Vec<TransitionDef>,
    /// Partition of transition ids into sets racing from a common origin.
    pub competing_groups: Vec<Vec<TransitionId>>,
}

/// A covariate field resolved to indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldRef {
    Intercept,
    Baseline(usize),
    /// Zero-based transition index.
    LogSojourn(usize),
    Action {
        decision: usize,
        action: usize,
    },
}

impl FieldRef {
    pub fn kind(&self, graph: &PathwayGraph) -> CovariateKind {
        match *self {
            FieldRef::Baseline(b) => graph.baseline[b].kind,
            FieldRef::LogSojourn(_) => CovariateKind::Numeric,
            FieldRef::Intercept | FieldRef::Action { .. } => CovariateKind::Binary,
        }
    }
}

/// A validated graph with precomputed lookup tables.
#[derive(Debug, Clone)]
pub struct CompiledGraph {
    pub graph: PathwayGraph,
    state_index: HashMap<String, usize>,
    /// Zero-based transition indices leaving each state.
    outgoing: Vec<Vec<usize>>,
    decision_at: Vec<Option<usize>>,
    covariates: Vec<Vec<FieldRef>>,
    propensity: Vec<Vec<FieldRef>>,
}

/// What has been observed about a patient so far.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    pub baseline: Vec<f64>,
    /// Per decision: index of the chosen action, if reached.
    pub actions: Vec<Option<usize>>,
    /// Per transition: log sojourn, if traversed.
    pub log_sojourns: Vec<Option<f64>>,
}

impl History {
    pub fn new(graph: &CompiledGraph, baseline: Vec<f64>) -> Self {
        Self {
            baseline,
            actions: vec![None; graph.graph.decisions.len()],
            log_sojourns: vec![None; graph.graph.transitions.len()],
        }
    }
}

impl PathwayGraph {
    pub fn compile(&self) -> Result<CompiledGraph> {
        CompiledGraph::new(self.clone())
    }

    pub fn transition_by_name(&self, name: &str) -> Option<&TransitionDef> {
        self.transitions.iter().find(|t| t.name == name)
    }

    pub fn n_transitions(&self) -> usize {
        self.transitions.len()
    }
}

fn graph_err(msg: impl Into<String>) -> Error {
    Error::InvalidGraph(msg.into())
}

impl CompiledGraph {
    pub fn new(mut graph: PathwayGraph) -> Result<Self> {
        let mut state_index = HashMap::new();
        for (i, s) in graph.states.iter().enumerate() {
            if state_index.insert(s.clone(), i).is_some() {
                return Err(graph_err(format!("duplicate state `{s}`")));
            }
        }
        let lookup = |s: &str| -> Result<usize> {
            state_index
                .get(s)
                .copied()
                .ok_or_else(|| Error::UnknownState(s.to_string()))
        };
        lookup(&graph.initial_state)?;

        graph.transitions.sort_by_key(|t| t.id);
        let n_t = graph.transitions.len();
        if n_t == 0 {
            return Err(graph_err("graph has no transitions"));
        }
        for (i, t) in graph.transitions.iter().enumerate() {
            if t.id != i + 1 {
                return Err(graph_err(format!(
                    "transition ids must be exactly 1..={n_t}, each once (found {} at position {})",
                    t.id,
                    i + 1
                )));
            }
        }
        let mut names = BTreeSet::new();
        for t in &graph.transitions {
            if !names.insert(t.name.as_str()) {
                return Err(graph_err(format!("duplicate transition name `{}`", t.name)));
            }
            if t.from == t.to {
                return Err(graph_err(format!("transition `{}` is a self-loop", t.name)));
            }
        }

        let n_s = graph.states.len();
        let mut outgoing = vec![Vec::new(); n_s];
        let mut edges = vec![Vec::new(); n_s];
        for (i, t) in graph.transitions.iter().enumerate() {
            let a = lookup(&t.from)?;
            let b = lookup(&t.to)?;
            outgoing[a].push(i);
            edges[a].push(b);
        }

        // reach[a][b]: b reachable from a (reflexive). Also rejects cycles.
        let mut reach = vec![vec![false; n_s]; n_s];
        for a in 0..n_s {
            let mut stack = vec![a];
            while let Some(u) = stack.pop() {
                if reach[a][u] {
                    continue;
                }
                reach[a][u] = true;
                stack.extend(edges[u].iter().copied());
            }
        }
        for t in &graph.transitions {
            let (a, b) = (lookup(&t.from)?, lookup(&t.to)?);
            if reach[b][a] {
                return Err(graph_err(format!(
                    "transition `{}` closes a cycle; pathways must form a DAG",
                    t.name
                )));
            }
        }

        // Competing groups must be exactly the sets of transitions sharing an origin.
        let mut seen = vec![false; n_t];
        for group in &graph.competing_groups {
            if group.is_empty() {
                return Err(graph_err("empty competing group"));
            }
            let origin = match graph.transitions.get(group[0].wrapping_sub(1)) {
                Some(t) => t.from.clone(),
                None => return Err(graph_err(format!("unknown transition id {}", group[0]))),
            };
            for &id in group {
                let t = graph
                    .transitions
                    .get(id.wrapping_sub(1))
                    .ok_or_else(|| graph_err(format!("unknown transition id {id}")))?;
                if seen[id - 1] {
                    return Err(graph_err(format!(
                        "transition {id} in two competing groups"
                    )));
                }
                seen[id - 1] = true;
                if t.from != origin {
                    return Err(graph_err(format!(
                        "competing group mixes origins `{origin}` and `{}`",
                        t.from
                    )));
                }
            }
            let all_from_origin = outgoing[lookup(&origin)?].len();
            if all_from_origin != group.len() {
                return Err(graph_err(format!(
                    "competing group for origin `{origin}` must contain all {all_from_origin} transitions leaving it"
                )));
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(graph_err(format!(
                "transition {} is in no competing group",
                i + 1
            )));
        }

        let mut decision_at = vec![None; n_s];
        for (d, dp) in graph.decisions.iter().enumerate() {
            let s = lookup(&dp.state)?;
            if outgoing[s].is_empty() {
                return Err(graph_err(format!(
                    "decision `{}` sits on absorbing state `{}`",
                    dp.name, dp.state
                )));
            }
            if decision_at[s].replace(d).is_some() {
                return Err(graph_err(format!("two decisions at state `{}`", dp.state)));
            }
            if dp.actions.is_empty() {
                return Err(graph_err(format!("decision `{}` has no actions", dp.name)));
            }
            let uniq: BTreeSet<_> = dp.actions.iter().collect();
            if uniq.len() != dp.actions.len() {
                return Err(graph_err(format!(
                    "decision `{}` repeats an action",
                    dp.name
                )));
            }
        }
        let mut dnames = BTreeSet::new();
        for dp in &graph.decisions {
            if !dnames.insert(dp.name.as_str()) {
                return Err(graph_err(format!("duplicate decision `{}`", dp.name)));
            }
        }

        // Resolve fields; a field is observable at state `at` only if it was
        // generated at a state from which `at` is reachable.
        let resolve = |field: &CovariateField, at: usize, owner: &str| -> Result<FieldRef> {
            match field {
                CovariateField::Intercept => Ok(FieldRef::Intercept),
                CovariateField::Baseline(name) => graph
                    .baseline
                    .iter()
                    .position(|b| &b.name == name)
                    .map(FieldRef::Baseline)
                    .ok_or_else(|| {
                        graph_err(format!("`{owner}` references unknown baseline `{name}`"))
                    }),
                CovariateField::LogSojourn(name) => {
                    let j = graph
                        .transitions
                        .iter()
                        .position(|t| &t.name == name)
                        .ok_or_else(|| Error::UnknownTransition(name.clone()))?;
                    let end = lookup(&graph.transitions[j].to)?;
                    if !reach[end][at] {
                        return Err(graph_err(format!(
                            "`{owner}` uses sojourn `{name}`, which cannot precede it"
                        )));
                    }
                    Ok(FieldRef::LogSojourn(j))
                }
                CovariateField::Action { decision, equals } => {
                    let d = graph
                        .decisions
                        .iter()
                        .position(|dp| &dp.name == decision)
                        .ok_or_else(|| {
                            graph_err(format!(
                                "`{owner}` references unknown decision `{decision}`"
                            ))
                        })?;
                    let dp = &graph.decisions[d];
                    let a = dp.actions.iter().position(|x| x == equals).ok_or_else(|| {
                        graph_err(format!("decision `{decision}` has no action `{equals}`"))
                    })?;
                    if !reach[lookup(&dp.state)?][at] {
                        return Err(graph_err(format!(
                            "`{owner}` uses decision `{decision}`, which cannot precede it"
                        )));
                    }
                    Ok(FieldRef::Action {
                        decision: d,
                        action: a,
                    })
                }
            }
        };
        let mut covariates = Vec::with_capacity(n_t);
        for t in &graph.transitions {
            let at = lookup(&t.from)?;
            let fields = t
                .covariates
                .iter()
                .map(|f| resolve(f, at, &t.name))
                .collect::<Result<Vec<_>>>()?;
            if fields.is_empty() {
                return Err(graph_err(format!(
                    "transition `{}` has no covariates",
                    t.name
                )));
            }
            covariates.push(fields);
        }
        let mut propensity = Vec::with_capacity(graph.decisions.len());
        for dp in &graph.decisions {
            let at = lookup(&dp.state)?;
            let fields = dp
                .propensity_covariates
                .iter()
                .map(|f| resolve(f, at, &dp.name))
                .collect::<Result<Vec<_>>>()?;
            if fields.iter().any(|f| matches!(f, FieldRef::Action { decision, .. } if graph.decisions[*decision].name == dp.name)) {
                return Err(graph_err(format!("propensity of `{}` uses its own action", dp.name)));
            }
            propensity.push(fields);
        }

        Ok(Self {
            graph,
            state_index,
            outgoing,
            decision_at,
            covariates,
            propensity,
        })
    }

    pub fn state(&self, label: &str) -> Result<usize> {
        self.state_index
            .get(label)
            .copied()
            .ok_or_else(|| Error::UnknownState(label.to_string()))
    }

    pub fn initial(&self) -> usize {
        self.state_index[&self.graph.initial_state]
    }

    pub fn outgoing(&self, state: usize) -> &[usize] {
        &self.outgoing[state]
    }

    pub fn is_absorbing(&self, state: usize) -> bool {
        self.outgoing[state].is_empty()
    }

    pub fn decision_at(&self, state: usize) -> Option<usize> {
        self.decision_at[state]
    }

    pub fn from_state(&self, t: usize) -> usize {
        self.state_index[&self.graph.transitions[t].from]
    }

    pub fn to_state(&self, t: usize) -> usize {
        self.state_index[&self.graph.transitions[t].to]
    }

    pub fn n_transitions(&self) -> usize {
        self.graph.transitions.len()
    }

    pub fn covariate_fields(&self, t: usize) -> &[FieldRef] {
        &self.covariates[t]
    }

    pub fn propensity_fields(&self, d: usize) -> &[FieldRef] {
        &self.propensity[d]
    }

    pub fn covariate_kinds(&self, t: usize) -> Vec<CovariateKind> {
        self.covariates[t]
            .iter()
            .map(|f| f.kind(&self.graph))
            .collect()
    }

    pub fn propensity_kinds(&self, d: usize) -> Vec<CovariateKind> {
        self.propensity[d]
            .iter()
            .map(|f| f.kind(&self.graph))
            .collect()
    }

    pub fn transition_index(&self, name: &str) -> Result<usize> {
        self.graph
            .transitions
            .iter()
            .position(|t| t.name == name)
            .ok_or_else(|| Error::UnknownTransition(name.to_string()))
    }

    /// Raw (unstandardized) covariate vector of transition `t`. Returns the
    /// offending field name when it has not been observed yet.
    pub fn assemble(
        &self,
        fields: &[FieldRef],
        history: &History,
    ) -> std::result::Result<Vec<f64>, String> {
        let mut x = Vec::with_capacity(fields.len());
        self.assemble_into(fields, history, &mut x)?;
        Ok(x)
    }

    pub fn assemble_into(
        &self,
        fields: &[FieldRef],
        history: &History,
        x: &mut Vec<f64>,
    ) -> std::result::Result<(), String> {
        x.clear();
        for f in fields {
            let v = match *f {
                FieldRef::Intercept => 1.0,
                FieldRef::Baseline(b) => history.baseline[b],
                FieldRef::LogSojourn(j) => history.log_sojourns[j]
                    .ok_or_else(|| format!("log_sojourn({})", self.graph.transitions[j].name))?,
                FieldRef::Action { decision, action } => match history.actions[decision] {
                    Some(a) => (a == action) as u8 as f64,
                    None => return Err(format!("action({})", self.graph.decisions[decision].name)),
                },
            };
            x.push(v);
        }
        Ok(())
    }

    /// All regimes: one action per decision point, in declaration order.
    pub fn regime_menu(&self) -> Vec<Regime> {
        let mut menu = vec![Regime::default()];
        for dp in &self.graph.decisions {
            menu = menu
                .into_iter()
                .flat_map(|r| {
                    dp.actions.iter().map(move |a| {
                        let mut r = r.clone();
                        r.actions.insert(dp.name.clone(), a.clone());
                        r
                    })
                })
                .collect();
        }
        menu
    }
}

/// One patient's observed course.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientPathway {
    pub patient_id: String,
    /// Values in the order of `PathwayGraph::baseline`.
    pub baseline: Vec<f64>,
    /// Decision name → action label, for decisions the patient reached.
    pub actions: BTreeMap<String, String>,
    /// Realized transitions in order, with sojourn durations in days.
    pub transitions: Vec<(TransitionId, f64)>,
    /// Time from start of therapy to last follow-up (days).
    pub followup: f64,
    /// Death observed at `followup`.
    pub died: bool,
}

impl PatientPathway {
    /// Sum of the realized sojourns.
    pub fn observed_time(&self) -> f64 {
        self.transitions.iter().map(|&(_, d)| d).sum()
    }
}

/// One patient's contribution to one transition's likelihood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub patient_id: String,
    pub transition: TransitionId,
    /// Raw covariates; first entry is the intercept when the spec has one.
    pub x: Vec<f64>,
    /// Log sojourn (event) or log censoring time.
    pub y: f64,
    /// `true` when the transition was observed, `false` when right-censored.
    pub delta: bool,
}

/// All records of one transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionSet {
    pub transition: TransitionId,
    pub name: String,
    pub kinds: Vec<CovariateKind>,
    pub records: Vec<TransitionRecord>,
}

impl TransitionSet {
    pub fn n_covariates(&self) -> usize {
        self.kinds.len()
    }

    /// Raw design matrix (n × M).
    pub fn design(&self) -> Result<DMatrix<f64>> {
        let m = self.kinds.len();
        for r in &self.records {
            if r.x.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: r.x.len(),
                });
            }
        }
        Ok(DMatrix::from_fn(self.records.len(), m, |i, j| {
            self.records[i].x[j]
        }))
    }

    pub fn n_events(&self) -> usize {
        self.records.iter().filter(|r| r.delta).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ValidationOptions {
    /// Added to zero-length sojourns instead of rejecting them (days).
    pub zero_time_offset: Option<f64>,
}

/// Turns pathways into per-transition censored records.
pub fn validate_dataset(
    graph: &PathwayGraph,
    pathways: &[PatientPathway],
) -> Result<Vec<TransitionSet>> {
    validate_dataset_with(&graph.compile()?, pathways, &ValidationOptions::default())
}

pub fn validate_dataset_with(
    graph: &CompiledGraph,
    pathways: &[PatientPathway],
    opts: &ValidationOptions,
) -> Result<Vec<TransitionSet>> {
    let mut sets: Vec<TransitionSet> = graph
        .graph
        .transitions
        .iter()
        .enumerate()
        .map(|(i, t)| TransitionSet {
            transition: t.id,
            name: t.name.clone(),
            kinds: graph.covariate_kinds(i),
            records: Vec::new(),
        })
        .collect();
    let mut ids = BTreeSet::new();
    for p in pathways {
        if !ids.insert(p.patient_id.as_str()) {
            return Err(Error::pathway(&p.patient_id, "duplicate patient id"));
        }
        for rec in patient_records(graph, p, opts)? {
            sets[rec.transition - 1].records.push(rec);
        }
    }
    Ok(sets)
}

fn check_time(p: &PatientPathway, what: &str, t: f64, opts: &ValidationOptions) -> Result<f64> {
    if !t.is_finite() {
        return Err(Error::pathway(
            &p.patient_id,
            format!("{what} is not finite"),
        ));
    }
    if t < 0.0 {
        return Err(Error::pathway(
            &p.patient_id,
            format!("negative {what} {t}"),
        ));
    }
    if t == 0.0 {
        return match opts.zero_time_offset {
            Some(off) if off > 0.0 => Ok(off),
            _ => Err(Error::pathway(
                &p.patient_id,
                format!("zero {what} (log undefined)"),
            )),
        };
    }
    Ok(t)
}

/// Records contributed by one patient.
pub fn patient_records(
    graph: &CompiledGraph,
    p: &PatientPathway,
    opts: &ValidationOptions,
) -> Result<Vec<TransitionRecord>> {
    let g = &graph.graph;
    if p.baseline.len() != g.baseline.len() {
        return Err(Error::DimensionMismatch {
            expected: g.baseline.len(),
            got: p.baseline.len(),
        });
    }
    if p.baseline.iter().any(|v| !v.is_finite()) {
        return Err(Error::pathway(
            &p.patient_id,
            "non-finite baseline covariate",
        ));
    }
    if !(p.followup.is_finite() && p.followup >= 0.0) {
        return Err(Error::pathway(
            &p.patient_id,
            "follow-up must be finite and nonnegative",
        ));
    }
    for name in p.actions.keys() {
        if !g.decisions.iter().any(|d| &d.name == name) {
            return Err(Error::pathway(
                &p.patient_id,
                format!("unknown decision `{name}`"),
            ));
        }
    }

    let mut history = History::new(graph, p.baseline.clone());
    let mut used_actions = BTreeSet::new();
    let mut state = graph.initial();
    let mut elapsed = 0.0;
    let mut out = Vec::new();

    let mut take_action = |state: usize, history: &mut History| -> Result<()> {
        if let Some(d) = graph.decision_at(state) {
            let dp = &g.decisions[d];
            let label = p.actions.get(&dp.name).ok_or_else(|| {
                Error::pathway(
                    &p.patient_id,
                    format!("missing action for decision `{}`", dp.name),
                )
            })?;
            let a = dp.actions.iter().position(|x| x == label).ok_or_else(|| {
                Error::pathway(
                    &p.patient_id,
                    format!("decision `{}` has no action `{label}`", dp.name),
                )
            })?;
            history.actions[d] = Some(a);
            used_actions.insert(dp.name.clone());
        }
        Ok(())
    };

    let emit = |state: usize,
                y: f64,
                realized: Option<usize>,
                history: &History,
                out: &mut Vec<TransitionRecord>|
     -> Result<()> {
        for &k in graph.outgoing(state) {
            let x = graph
                .assemble(graph.covariate_fields(k), history)
                .map_err(|field| Error::HistoryOrdering {
                    patient: p.patient_id.clone(),
                    transition: g.transitions[k].name.clone(),
                    field,
                })?;
            out.push(TransitionRecord {
                patient_id: p.patient_id.clone(),
                transition: k + 1,
                x,
                y,
                delta: realized == Some(k),
            });
        }
        Ok(())
    };

    for &(id, sojourn) in &p.transitions {
        let k = id
            .checked_sub(1)
            .filter(|&k| k < g.transitions.len())
            .ok_or_else(|| Error::UnknownTransition(id.to_string()))?;
        if graph.from_state(k) != state {
            return Err(Error::pathway(
                &p.patient_id,
                format!(
                    "transition `{}` does not leave state `{}`",
                    g.transitions[k].name, g.states[state]
                ),
            ));
        }
        take_action(state, &mut history)?;
        let d = check_time(p, "sojourn", sojourn, opts)?;
        emit(state, d.ln(), Some(k), &history, &mut out)?;
        history.log_sojourns[k] = Some(d.ln());
        elapsed += sojourn;
        state = graph.to_state(k);
    }

    let tol = 1e-9 * p.followup.max(1.0);
    if graph.is_absorbing(state) {
        if !p.died {
            return Err(Error::pathway(
                &p.patient_id,
                "reached an absorbing state but not marked died",
            ));
        }
        if (p.followup - elapsed).abs() > tol.max(1e-6) {
            return Err(Error::pathway(
                &p.patient_id,
                format!(
                    "follow-up {} differs from summed sojourns {elapsed}",
                    p.followup
                ),
            ));
        }
    } else {
        if p.died {
            return Err(Error::pathway(
                &p.patient_id,
                format!("marked died in non-absorbing state `{}`", g.states[state]),
            ));
        }
        take_action(state, &mut history)?;
        let remaining = p.followup - elapsed;
        if remaining < -tol {
            return Err(Error::pathway(
                &p.patient_id,
                format!(
                    "follow-up {} precedes summed sojourns {elapsed}",
                    p.followup
                ),
            ));
        }
        // Censored exactly on entry: no information about the next sojourn.
        if remaining > tol {
            emit(state, remaining.ln(), None, &history, &mut out)?;
        }
    }
    if used_actions.len() != p.actions.len() {
        let extra: Vec<_> = p
            .actions
            .keys()
            .filter(|k| !used_actions.contains(*k))
            .collect();
        return Err(Error::pathway(
            &p.patient_id,
            format!("actions given for unreached decisions {extra:?}"),
        ));
    }
    Ok(out)
}

/// Reconstructs a pathway's state sequence and its per-step decisions.
pub fn realized_states(graph: &CompiledGraph, p: &PatientPathway) -> Result<Vec<usize>> {
    let mut states = vec![graph.initial()];
    for &(id, _) in &p.transitions {
        let k = id
            .checked_sub(1)
            .filter(|&k| k < graph.n_transitions())
            .ok_or_else(|| Error::UnknownTransition(id.to_string()))?;
        if graph.from_state(k) != *states.last().unwrap() {
            return Err(Error::pathway(
                &p.patient_id,
                "transition does not continue the path",
            ));
        }
        states.push(graph.to_state(k));
    }
    Ok(states)
}

/// A complete assignment of actions to decision points.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Regime {
    pub actions: BTreeMap<String, String>,
}

impl Regime {
    pub fn new<I, K, V>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        Self {
            actions: pairs
                .into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
        }
    }

    /// `(a, b, c)` in the graph's decision order.
    pub fn label(&self, graph: &PathwayGraph) -> String {
        let parts: Vec<&str> = graph
            .decisions
            .iter()
            .map(|d| self.actions.get(&d.name).map(String::as_str).unwrap_or("?"))
            .collect();
        format!("({})", parts.join(", "))
    }

    /// Action indices per decision, in graph order.
    pub fn resolve(&self, graph: &CompiledGraph) -> Result<Vec<usize>> {
        let g = &graph.graph;
        if self.actions.len() != g.decisions.len() {
            return Err(Error::InvalidArgument(format!(
                "regime assigns {} actions but the graph has {} decision points",
                self.actions.len(),
                g.decisions.len()
            )));
        }
        g.decisions
            .iter()
            .map(|dp| {
                let label = self.actions.get(&dp.name).ok_or_else(|| {
                    Error::InvalidArgument(format!("regime has no action for `{}`", dp.name))
                })?;
                dp.actions.iter().position(|a| a == label).ok_or_else(|| {
                    Error::InvalidArgument(format!("`{label}` is not an action of `{}`", dp.name))
                })
            })
            .collect()
    }
}

/// Column-wise affine standardization fitted on training rows. Binary columns
/// (and the intercept) keep shift 0 and scale 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(m: usize) -> Self {
        Self {
            shift: vec![0.0; m],
            scale: vec![1.0; m],
        }
    }

    pub fn fit(x: &DMatrix<f64>, kinds: &[CovariateKind]) -> Result<Self> {
        if x.ncols() != kinds.len() {
            return Err(Error::DimensionMismatch {
                expected: kinds.len(),
                got: x.ncols(),
            });
        }
        let n = x.nrows();
        let mut s = Self::identity(kinds.len());
        for (j, kind) in kinds.iter().enumerate() {
            if *kind != CovariateKind::Numeric || n < 2 {
                continue;
            }
            let col: Vec<f64> = x.column(j).iter().copied().collect();
            let mean = crate::stats::mean(&col);
            let sd = crate::stats::variance(&col).sqrt();
            s.shift[j] = mean;
            // A constant column is centered only.
            s.scale[j] = if sd > 1e-12 { sd } else { 1.0 };
        }
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.shift.len() {
            return Err(Error::DimensionMismatch {
                expected: self.shift.len(),
                got: x.len(),
            });
        }
        Ok(x.iter()
            .zip(self.shift.iter().zip(&self.scale))
            .map(|(v, (a, b))| (v - a) / b)
            .collect())
    }

    pub fn apply_in_place(&self, x: &mut [f64]) {
        for (v, (a, b)) in x.iter_mut().zip(self.shift.iter().zip(&self.scale)) {
            *v = (*v - a) / b;
        }
    }

    pub fn apply_matrix(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.ncols(),
            });
        }
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            (x[(i, j)] - self.shift[j]) / self.scale[j]
        }))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn toy_graph() -> PathwayGraph {
        let stage1 = vec![
            CovariateField::Intercept,
            CovariateField::Baseline("age".into()),
            CovariateField::Action {
                decision: "Z1".into(),
                equals: "b".into(),
            },
        ];
        let mut after_c = stage1.clone();
        after_c.push(CovariateField::LogSojourn("0C".into()));
        let mut after_p = after_c.clone();
        after_p.push(CovariateField::LogSojourn("CP".into()));
        let t = |id, name: &str, from: &str, to: &str, cov: &Vec<CovariateField>| TransitionDef {
            id,
            name: name.into(),
            from: from.into(),
            to: to.into(),
            model: ModelKind::Ddpgp,
            covariates: cov.clone(),
        };
        PathwayGraph {
            initial_state: "0".into(),
            states: ["0", "D", "R", "C", "P"].map(String::from).to_vec(),
            baseline: vec![BaselineCovariate {
                name: "age".into(),
                kind: CovariateKind::Numeric,
            }],
            decisions: vec![DecisionPoint {
                name: "Z1".into(),
                state: "0".into(),
                actions: vec!["a".into(), "b".into()],
                randomized: true,
                propensity_covariates: vec![],
            }],
            transitions: vec![
                t(1, "0D", "0", "D", &stage1),
                t(2, "0R", "0", "R", &stage1),
                t(3, "0C", "0", "C", &stage1),
                t(4, "RD", "R", "D", &stage1),
                t(5, "CP", "C", "P", &after_c),
                t(6, "PD", "P", "D", &after_p),
            ],
            competing_groups: vec![vec![1, 2, 3], vec![4], vec![5], vec![6]],
        }
    }

    fn patient(id: &str, steps: &[(usize, f64)], followup: f64, died: bool) -> PatientPathway {
        PatientPathway {
            patient_id: id.into(),
            baseline: vec![0.5],
            actions: BTreeMap::from([("Z1".to_string(), "b".to_string())]),
            transitions: steps.to_vec(),
            followup,
            died,
        }
    }

    fn by_transition(sets: &[TransitionSet], id: usize) -> Vec<&TransitionRecord> {
        sets[id - 1].records.iter().collect()
    }

    #[test]
    fn induction_death_censors_competitors() {
        let g = toy_graph();
        let sets = validate_dataset(&g, &[patient("p", &[(1, 30.0)], 30.0, true)]).unwrap();
        let d = by_transition(&sets, 1);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].y, 30f64.ln());
        assert!(d[0].delta);
        for id in [2, 3] {
            let r = by_transition(&sets, id);
            assert_eq!(r[0].y, 30f64.ln());
            assert!(!r[0].delta);
        }
        assert!(sets[3].records.is_empty());
    }

    #[test]
    fn censored_without_events() {
        let g = toy_graph();
        let sets = validate_dataset(&g, &[patient("p", &[], 100.0, false)]).unwrap();
        for id in 1..=3 {
            let r = by_transition(&sets, id);
            assert_eq!(r.len(), 1);
            assert_eq!(r[0].y, 100f64.ln());
            assert!(!r[0].delta);
        }
        assert_eq!(sets.iter().map(|s| s.records.len()).sum::<usize>(), 3);
    }

    #[test]
    fn sojourn_clock_after_remission_and_progression() {
        let g = toy_graph();
        let p = patient("p", &[(3, 32.0), (5, 58.0)], 400.0, false);
        let sets = validate_dataset(&g, &[p]).unwrap();
        let c = by_transition(&sets, 3)[0];
        assert_eq!((c.y, c.delta), (32f64.ln(), true));
        let cp = by_transition(&sets, 5)[0];
        assert_eq!((cp.y, cp.delta), (58f64.ln(), true));
        assert_eq!(cp.x, vec![1.0, 0.5, 1.0, 32f64.ln()]);
        let pd = by_transition(&sets, 6)[0];
        assert_eq!((pd.y, pd.delta), ((400.0f64 - 90.0).ln(), false));
        assert_eq!(pd.x[4], 58f64.ln());
    }

    #[test]
    fn rejects_bad_pathways() {
        let g = toy_graph();
        // Negative time.
        let bad = patient("p", &[(1, -3.0)], 3.0, true);
        assert!(validate_dataset(&g, &[bad]).is_err());
        // Zero time unless an offset is configured.
        let zero = patient("p", &[(1, 0.0)], 0.0, true);
        assert!(validate_dataset(&g, std::slice::from_ref(&zero)).is_err());
        let cg = g.compile().unwrap();
        let opts = ValidationOptions {
            zero_time_offset: Some(0.5),
        };
        let sets = validate_dataset_with(&cg, &[zero], &opts).unwrap();
        assert_eq!(sets[0].records[0].y, 0.5f64.ln());
        // Transition not leaving the current state.
        let jump = patient("p", &[(6, 3.0)], 3.0, true);
        assert!(validate_dataset(&g, &[jump]).is_err());
        // Unknown transition id.
        let unknown = patient("p", &[(9, 3.0)], 3.0, true);
        assert!(matches!(
            validate_dataset(&g, &[unknown]),
            Err(Error::UnknownTransition(_))
        ));
        // Baseline length mismatch.
        let mut short = patient("p", &[], 3.0, false);
        short.baseline.clear();
        assert!(matches!(
            validate_dataset(&g, &[short]),
            Err(Error::DimensionMismatch { .. })
        ));
        // Died in a transient state.
        let undead = patient("p", &[(3, 3.0)], 3.0, true);
        assert!(validate_dataset(&g, &[undead]).is_err());
    }

    #[test]
    fn graph_validation_errors() {
        let mut g = toy_graph();
        g.transitions[0].to = "X".into();
        assert!(matches!(g.compile(), Err(Error::UnknownState(_))));

        let mut g = toy_graph();
        g.transitions[5].id = 5;
        assert!(g.compile().is_err());

        // A covariate from a later stage is not observable.
        let mut g = toy_graph();
        g.transitions[4]
            .covariates
            .push(CovariateField::LogSojourn("PD".into()));
        assert!(matches!(g.compile(), Err(Error::InvalidGraph(_))));

        // Cycle.
        let mut g = toy_graph();
        g.transitions.push(TransitionDef {
            id: 7,
            name: "PC".into(),
            from: "P".into(),
            to: "C".into(),
            model: ModelKind::Ddpgp,
            covariates: vec![CovariateField::Intercept],
        });
        g.competing_groups[3].push(7);
        assert!(g.compile().is_err());

        // Racing transitions split across groups.
        let mut g = toy_graph();
        g.competing_groups = vec![vec![1, 2], vec![3], vec![4], vec![5], vec![6]];
        assert!(g.compile().is_err());
    }

    #[test]
    fn history_ordering_violation_surfaces_at_runtime() {
        // R→D may use the sojourn of 0C only when the path went through C,
        // which is impossible; the static check catches it.
        let mut g = toy_graph();
        g.transitions[3]
            .covariates
            .push(CovariateField::LogSojourn("0C".into()));
        assert!(g.compile().is_err());
    }

    #[test]
    fn regime_menu_and_labels() {
        let g = toy_graph().compile().unwrap();
        let menu = g.regime_menu();
        assert_eq!(menu.len(), 2);
        assert_eq!(menu[1].label(&g.graph), "(b)");
        assert_eq!(menu[1].resolve(&g).unwrap(), vec![1]);
        assert!(Regime::new([("Z1", "zzz")]).resolve(&g).is_err());
    }

    #[test]
    fn standardizer_leaves_binary_columns() {
        let x = DMatrix::from_row_slice(3, 3, &[1.0, 10.0, 0.0, 1.0, 20.0, 1.0, 1.0, 30.0, 1.0]);
        let kinds = [
            CovariateKind::Binary,
            CovariateKind::Numeric,
            CovariateKind::Binary,
        ];
        let s = Standardizer::fit(&x, &kinds).unwrap();
        let z = s.apply_matrix(&x).unwrap();
        assert_eq!(
            z.column(0).iter().copied().collect::<Vec<_>>(),
            vec![1.0; 3]
        );
        assert_eq!(z[(0, 1)], -1.0);
        assert_eq!(z[(2, 1)], 1.0);
        assert_eq!(z[(1, 2)], 1.0);
    }
}
