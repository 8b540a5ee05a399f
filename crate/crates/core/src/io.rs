//! File formats.
//!
//! Pathway CSV, one row per patient:
//!
//! ```text
//! patient_id, <baseline...>, <decision...>, sojourn_<transition>..., followup_days, died
//! ```
//!
//! Action cells are empty for decisions the patient never reached and
//! sojourn cells are empty for transitions not traversed. The graph lives in
//! a sidecar JSON file. Floats are written in shortest round-trip form, so
//! emit → ingest is lossless. All writes go through a temporary file in the
//! target directory followed by a rename.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::baselines::AftFit;
use crate::data::{
    patient_records, CompiledGraph, ModelKind, PathwayGraph, PatientPathway, Standardizer,
    TransitionId, TransitionSet, ValidationOptions,
};
use crate::mcmc::{McmcConfig, PosteriorDraws};
use crate::regime::{FittedTransition, RegimeEstimate, TransitionModel};
use crate::sim::Study2Data;
use crate::{Error, Result};

pub const FOLLOWUP_COLUMN: &str = "followup_days";
pub const DIED_COLUMN: &str = "died";
pub const ID_COLUMN: &str = "patient_id";

pub fn sojourn_column(transition: &str) -> String {
    format!("sojourn_{transition}")
}

/// Writes `bytes` to `path` via a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("not a file path: {}", path.display())))?;
    let tmp: PathBuf = dir.join(format!(
        ".{}.tmp-{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp)
            .map_err(|e| Error::io(format!("creating {}", tmp.display()), e))?;
        f.write_all(bytes)
            .and_then(|_| f.sync_all())
            .map_err(|e| Error::io(format!("writing {}", tmp.display()), e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(format!("renaming to {}", path.display()), e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let s = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    Ok(serde_json::from_str(&s)?)
}

pub fn read_graph(path: &Path) -> Result<PathwayGraph> {
    let g: PathwayGraph = read_json(path)?;
    g.compile()?;
    Ok(g)
}

pub fn write_draws(path: &Path, draws: &PosteriorDraws) -> Result<()> {
    // Compact: draws files are large.
    let mut s = serde_json::to_string(draws)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub fn read_draws(path: &Path) -> Result<PosteriorDraws> {
    let d: PosteriorDraws = read_json(path)?;
    d.check_version()?;
    Ok(d)
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn csv_to_string(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Header of the pathway CSV for `graph`.
pub fn pathway_header(graph: &PathwayGraph) -> Vec<String> {
    let mut h = vec![ID_COLUMN.to_string()];
    h.extend(graph.baseline.iter().map(|b| b.name.clone()));
    h.extend(graph.decisions.iter().map(|d| d.name.clone()));
    h.extend(graph.transitions.iter().map(|t| sojourn_column(&t.name)));
    h.push(FOLLOWUP_COLUMN.into());
    h.push(DIED_COLUMN.into());
    h
}

pub fn pathways_to_csv(graph: &PathwayGraph, pathways: &[PatientPathway]) -> Result<String> {
    let header = pathway_header(graph);
    let rows: Vec<Vec<String>> = pathways
        .iter()
        .map(|p| {
            if p.baseline.len() != graph.baseline.len() {
                return Err(Error::DimensionMismatch {
                    expected: graph.baseline.len(),
                    got: p.baseline.len(),
                });
            }
            let mut r = vec![p.patient_id.clone()];
            r.extend(p.baseline.iter().map(|v| fmt_f64(*v)));
            r.extend(
                graph
                    .decisions
                    .iter()
                    .map(|d| p.actions.get(&d.name).cloned().unwrap_or_default()),
            );
            let mut soj = vec![String::new(); graph.transitions.len()];
            for &(id, d) in &p.transitions {
                let k = id
                    .checked_sub(1)
                    .filter(|&k| k < soj.len())
                    .ok_or_else(|| Error::UnknownTransition(id.to_string()))?;
                if !soj[k].is_empty() {
                    return Err(Error::pathway(&p.patient_id, "transition traversed twice"));
                }
                soj[k] = fmt_f64(d);
            }
            r.extend(soj);
            r.push(fmt_f64(p.followup));
            r.push(if p.died { "1" } else { "0" }.into());
            Ok(r)
        })
        .collect::<Result<_>>()?;
    csv_to_string(&header, &rows)
}

pub fn write_pathways_csv(
    path: &Path,
    graph: &PathwayGraph,
    pathways: &[PatientPathway],
) -> Result<()> {
    write_atomic(path, pathways_to_csv(graph, pathways)?.as_bytes())
}

struct Columns {
    index: HashMap<String, usize>,
}

impl Columns {
    fn new(header: &csv::StringRecord) -> Self {
        Self {
            index: header
                .iter()
                .enumerate()
                .map(|(i, h)| (h.trim().to_string(), i))
                .collect(),
        }
    }

    fn get(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }
}

fn parse_f64(cell: &str, row: usize, column: &str) -> Result<f64> {
    cell.trim().parse::<f64>().map_err(|_| Error::Parse {
        row,
        reason: format!("column `{column}`: cannot parse `{cell}` as a number"),
    })
}

/// Parses pathway rows against `graph` without validating them.
pub fn pathways_from_csv(graph: &PathwayGraph, text: &str) -> Result<Vec<PatientPathway>> {
    let compiled = graph.compile()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let cols = Columns::new(rdr.headers()?);
    let id_col = cols.get(ID_COLUMN)?;
    let base_cols: Vec<usize> = graph
        .baseline
        .iter()
        .map(|b| cols.get(&b.name))
        .collect::<Result<_>>()?;
    let dec_cols: Vec<usize> = graph
        .decisions
        .iter()
        .map(|d| cols.get(&d.name))
        .collect::<Result<_>>()?;
    let soj_names: Vec<String> = graph
        .transitions
        .iter()
        .map(|t| sojourn_column(&t.name))
        .collect();
    let soj_cols: Vec<usize> = soj_names
        .iter()
        .map(|n| cols.get(n))
        .collect::<Result<_>>()?;
    let fu_col = cols.get(FOLLOWUP_COLUMN)?;
    let died_col = cols.get(DIED_COLUMN)?;

    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        // Row numbers count the header as row 1.
        let row = i + 2;
        let rec = rec?;
        let cell = |c: usize| rec.get(c).unwrap_or("");
        let baseline = graph
            .baseline
            .iter()
            .zip(&base_cols)
            .map(|(b, &c)| parse_f64(cell(c), row, &b.name))
            .collect::<Result<Vec<_>>>()?;
        let mut actions = BTreeMap::new();
        for (d, &c) in graph.decisions.iter().zip(&dec_cols) {
            let v = cell(c).trim();
            if !v.is_empty() {
                actions.insert(d.name.clone(), v.to_string());
            }
        }
        let mut soj: Vec<Option<f64>> = Vec::with_capacity(soj_cols.len());
        for (name, &c) in soj_names.iter().zip(&soj_cols) {
            let v = cell(c).trim();
            soj.push(if v.is_empty() {
                None
            } else {
                Some(parse_f64(v, row, name)?)
            });
        }
        // Order the traversed transitions by walking the graph.
        let mut transitions = Vec::new();
        let mut state = compiled.initial();
        loop {
            let next: Vec<usize> = compiled
                .outgoing(state)
                .iter()
                .copied()
                .filter(|&k| soj[k].is_some())
                .collect();
            match next.len() {
                0 => break,
                1 => {
                    let k = next[0];
                    transitions.push((k + 1, soj[k].take().unwrap()));
                    state = compiled.to_state(k);
                }
                _ => {
                    return Err(Error::Parse {
                        row,
                        reason: format!(
                            "several transitions out of `{}` have sojourns",
                            graph.states[state]
                        ),
                    })
                }
            }
        }
        if let Some(k) = soj.iter().position(|s| s.is_some()) {
            return Err(Error::Parse {
                row,
                reason: format!(
                    "sojourn for `{}` is not on the patient's path",
                    graph.transitions[k].name
                ),
            });
        }
        let died = match cell(died_col).trim() {
            "1" | "true" => true,
            "0" | "false" => false,
            other => {
                return Err(Error::Parse {
                    row,
                    reason: format!("column `{DIED_COLUMN}`: expected 0 or 1, got `{other}`"),
                })
            }
        };
        out.push(PatientPathway {
            patient_id: cell(id_col).to_string(),
            baseline,
            actions,
            transitions,
            followup: parse_f64(cell(fu_col), row, FOLLOWUP_COLUMN)?,
            died,
        });
    }
    Ok(out)
}

/// Reads and validates a pathway CSV with its sidecar graph. Validation
/// errors carry the CSV row number.
pub fn ingest_pathways_csv(
    csv_path: &Path,
    graph_path: &Path,
) -> Result<(PathwayGraph, Vec<PatientPathway>)> {
    let graph = read_graph(graph_path)?;
    let text = fs::read_to_string(csv_path)
        .map_err(|e| Error::io(format!("reading {}", csv_path.display()), e))?;
    let pathways = pathways_from_csv(&graph, &text)?;
    validate_rows(&graph.compile()?, &pathways)?;
    Ok((graph, pathways))
}

fn validate_rows(graph: &CompiledGraph, pathways: &[PatientPathway]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for (i, p) in pathways.iter().enumerate() {
        let row = i + 2;
        if !seen.insert(p.patient_id.as_str()) {
            return Err(Error::Parse {
                row,
                reason: format!("duplicate patient id `{}`", p.patient_id),
            });
        }
        patient_records(graph, p, &ValidationOptions::default()).map_err(|e| Error::Parse {
            row,
            reason: e.to_string(),
        })?;
    }
    Ok(())
}

/// Single-stage treatment data CSV: `L, W, z, y` and, when known, `y1, y0`.
pub fn treatment_to_csv(d: &Study2Data) -> Result<String> {
    let header: Vec<String> = ["L", "W", "z", "y", "y1", "y0"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = (0..d.len())
        .map(|i| {
            vec![
                fmt_f64(d.l[i]),
                fmt_f64(d.w[i]),
                (d.z[i] as u8).to_string(),
                fmt_f64(d.y[i]),
                fmt_f64(d.y1[i]),
                fmt_f64(d.y0[i]),
            ]
        })
        .collect();
    csv_to_string(&header, &rows)
}

/// Parses a treatment CSV. Missing `y1`/`y0` columns are filled with NaN.
pub fn treatment_from_csv(text: &str) -> Result<Study2Data> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let cols = Columns::new(rdr.headers()?);
    let (cl, cw, cz, cy) = (
        cols.get("L")?,
        cols.get("W")?,
        cols.get("z")?,
        cols.get("y")?,
    );
    let c1 = cols.get("y1").ok();
    let c0 = cols.get("y0").ok();
    let mut d = Study2Data {
        l: vec![],
        w: vec![],
        z: vec![],
        y: vec![],
        y1: vec![],
        y0: vec![],
    };
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec?;
        let cell = |c: usize| rec.get(c).unwrap_or("");
        d.l.push(parse_f64(cell(cl), row, "L")?);
        d.w.push(parse_f64(cell(cw), row, "W")?);
        d.z.push(match cell(cz).trim() {
            "1" => true,
            "0" => false,
            other => {
                return Err(Error::Parse {
                    row,
                    reason: format!("column `z`: expected 0 or 1, got `{other}`"),
                })
            }
        });
        d.y.push(parse_f64(cell(cy), row, "y")?);
        let opt = |c: Option<usize>, name| -> Result<f64> {
            match c.map(cell).map(str::trim) {
                Some(v) if !v.is_empty() => parse_f64(v, row, name),
                _ => Ok(f64::NAN),
            }
        };
        d.y1.push(opt(c1, "y1")?);
        d.y0.push(opt(c0, "y0")?);
    }
    Ok(d)
}

/// One row of the regime-evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReportRow {
    pub regime: String,
    pub iptw: Option<f64>,
    pub ddpgp_mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Full report entry as written to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReportEntry {
    pub ddpgp: RegimeEstimate,
    pub iptw: Option<RegimeEstimate>,
}

pub fn report_rows(entries: &[RegimeReportEntry]) -> Vec<RegimeReportRow> {
    entries
        .iter()
        .map(|e| RegimeReportRow {
            regime: e.ddpgp.label.clone(),
            iptw: e.iptw.as_ref().map(|i| i.estimate),
            ddpgp_mean: e.ddpgp.estimate,
            ci_lo: e.ddpgp.ci_lo.unwrap_or(f64::NAN),
            ci_hi: e.ddpgp.ci_hi.unwrap_or(f64::NAN),
        })
        .collect()
}

pub fn report_to_csv(rows: &[RegimeReportRow]) -> Result<String> {
    let header: Vec<String> = ["regime", "iptw", "ddpgp_mean", "ci_lo", "ci_hi"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.regime.clone(),
                r.iptw.map(fmt_f64).unwrap_or_default(),
                fmt_f64(r.ddpgp_mean),
                fmt_f64(r.ci_lo),
                fmt_f64(r.ci_hi),
            ]
        })
        .collect();
    csv_to_string(&header, &body)
}

pub fn report_from_csv(text: &str) -> Result<Vec<RegimeReportRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let cols = Columns::new(rdr.headers()?);
    let c = [
        cols.get("regime")?,
        cols.get("iptw")?,
        cols.get("ddpgp_mean")?,
        cols.get("ci_lo")?,
        cols.get("ci_hi")?,
    ];
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec?;
        let cell = |k: usize| rec.get(c[k]).unwrap_or("").trim();
        out.push(RegimeReportRow {
            // Labels are kept verbatim; only numeric cells are trimmed.
            regime: rec.get(c[0]).unwrap_or("").to_string(),
            iptw: if cell(1).is_empty() {
                None
            } else {
                Some(parse_f64(cell(1), row, "iptw")?)
            },
            ddpgp_mean: parse_f64(cell(2), row, "ddpgp_mean")?,
            ci_lo: parse_f64(cell(3), row, "ci_lo")?,
            ci_hi: parse_f64(cell(4), row, "ci_hi")?,
        });
    }
    Ok(out)
}

/// Survival curve CSV: `t, survival, lo, hi`.
pub fn survival_curve_to_csv(t: &[f64], s: &[f64], lo: &[f64], hi: &[f64]) -> Result<String> {
    let header: Vec<String> = ["t", "survival", "lo", "hi"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = (0..t.len())
        .map(|i| vec![fmt_f64(t[i]), fmt_f64(s[i]), fmt_f64(lo[i]), fmt_f64(hi[i])])
        .collect();
    csv_to_string(&header, &rows)
}

/// Generic CSV of named numeric columns.
pub fn columns_to_csv(names: &[&str], columns: &[Vec<f64>]) -> Result<String> {
    let n = columns.first().map_or(0, |c| c.len());
    if columns.iter().any(|c| c.len() != n) || names.len() != columns.len() {
        return Err(Error::InvalidArgument(
            "columns must have equal lengths and names".into(),
        ));
    }
    let header: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = (0..n)
        .map(|i| columns.iter().map(|c| fmt_f64(c[i])).collect())
        .collect();
    csv_to_string(&header, &rows)
}

pub const FIT_MANIFEST: &str = "manifest.json";
pub const FIT_FORMAT_VERSION: u32 = 1;

/// Contents of a fit directory: the graph plus one model file per transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitManifest {
    pub format_version: u32,
    pub graph: PathwayGraph,
    pub mcmc: McmcConfig,
    pub n_patients: usize,
    pub transitions: Vec<FitManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitManifestEntry {
    pub id: TransitionId,
    pub name: String,
    pub model: ModelKind,
    /// Model file, relative to the fit directory.
    pub file: String,
    /// MCMC trace CSV, DDP-GP transitions only.
    pub trace: Option<String>,
    pub n_records: usize,
    pub n_events: usize,
}

/// Serialized plug-in AFT transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AftModelFile {
    pub name: String,
    pub fit: AftFit,
    pub standardizer: Standardizer,
    pub intercept_only: bool,
}

/// Writes fitted transitions to `dir`: `draws_<name>.json` and
/// `trace_<name>.csv` for DDP-GP transitions, `aft_<name>.json` otherwise,
/// then the manifest last.
pub fn save_fit(
    dir: &Path,
    graph: &PathwayGraph,
    sets: &[TransitionSet],
    fitted: &[FittedTransition],
    mcmc: &McmcConfig,
    n_patients: usize,
) -> Result<FitManifest> {
    if sets.len() != fitted.len() || sets.len() != graph.transitions.len() {
        return Err(Error::DimensionMismatch {
            expected: graph.transitions.len(),
            got: fitted.len(),
        });
    }
    let mut entries = Vec::with_capacity(fitted.len());
    for ((def, set), f) in graph.transitions.iter().zip(sets).zip(fitted) {
        let (file, trace) = match (&f.draws, &f.model) {
            (Some(draws), _) => {
                let file = format!("draws_{}.json", def.name);
                let trace = format!("trace_{}.csv", def.name);
                write_draws(&dir.join(&file), draws)?;
                write_atomic(&dir.join(&trace), draws.trace_csv()?.as_bytes())?;
                (file, Some(trace))
            }
            (
                None,
                TransitionModel::Aft {
                    fit,
                    standardizer,
                    intercept_only,
                },
            ) => {
                let file = format!("aft_{}.json", def.name);
                let m = AftModelFile {
                    name: def.name.clone(),
                    fit: fit.clone(),
                    standardizer: standardizer.clone(),
                    intercept_only: *intercept_only,
                };
                write_json(&dir.join(&file), &m)?;
                (file, None)
            }
            (None, _) => {
                return Err(Error::InvalidArgument(format!(
                    "transition `{}` has no serializable model",
                    def.name
                )))
            }
        };
        entries.push(FitManifestEntry {
            id: def.id,
            name: def.name.clone(),
            model: def.model,
            file,
            trace,
            n_records: set.records.len(),
            n_events: set.n_events(),
        });
    }
    let manifest = FitManifest {
        format_version: FIT_FORMAT_VERSION,
        graph: graph.clone(),
        mcmc: *mcmc,
        n_patients,
        transitions: entries,
    };
    write_json(&dir.join(FIT_MANIFEST), &manifest)?;
    Ok(manifest)
}

pub fn read_fit_manifest(dir: &Path) -> Result<FitManifest> {
    let m: FitManifest = read_json(&dir.join(FIT_MANIFEST))?;
    if m.format_version != FIT_FORMAT_VERSION {
        return Err(Error::InvalidArgument(format!(
            "unsupported fit format version {} (expected {FIT_FORMAT_VERSION})",
            m.format_version
        )));
    }
    m.graph.compile()?;
    Ok(m)
}

/// Loads the evaluation models of a fit directory, in transition order.
pub fn load_fit(dir: &Path) -> Result<(FitManifest, Vec<TransitionModel>)> {
    let m = read_fit_manifest(dir)?;
    let models = m
        .transitions
        .iter()
        .map(|e| {
            let path = dir.join(&e.file);
            match e.model {
                ModelKind::Ddpgp => TransitionModel::from_draws(&read_draws(&path)?),
                ModelKind::WeibullIntercept => {
                    let a: AftModelFile = read_json(&path)?;
                    Ok(TransitionModel::Aft {
                        fit: a.fit,
                        standardizer: a.standardizer,
                        intercept_only: a.intercept_only,
                    })
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((m, models))
}

/// Posterior draws of every DDP-GP transition in a fit directory.
pub fn load_fit_draws(dir: &Path) -> Result<Vec<PosteriorDraws>> {
    let m = read_fit_manifest(dir)?;
    m.transitions
        .iter()
        .filter(|e| e.model == ModelKind::Ddpgp)
        .map(|e| read_draws(&dir.join(&e.file)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::tests::toy_graph;

    fn rows() -> Vec<PatientPathway> {
        let p = |id: &str, age: f64, a: &str, tr: Vec<(usize, f64)>, fu: f64, died: bool| {
            PatientPathway {
                patient_id: id.into(),
                baseline: vec![age],
                actions: BTreeMap::from([("Z1".to_string(), a.to_string())]),
                transitions: tr,
                followup: fu,
                died,
            }
        };
        vec![
            p("a", 61.25, "a", vec![(1, 42.0)], 42.0, true),
            p(
                "b",
                0.1 + 0.2,
                "b",
                vec![(3, 32.5), (5, 58.0)],
                100.0,
                false,
            ),
            p("c", 70.0, "a", vec![], 3.0, false),
        ]
    }

    #[test]
    fn minimal_file_round_trips_exactly() {
        let g = toy_graph();
        let text = pathways_to_csv(&g, &rows()).unwrap();
        let back = pathways_from_csv(&g, &text).unwrap();
        assert_eq!(back, rows());
        assert_eq!(pathways_to_csv(&g, &back).unwrap(), text);
    }

    #[test]
    fn missing_column_is_named() {
        let g = toy_graph();
        let text = pathways_to_csv(&g, &rows()).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap().replace(",followup_days", ",fu");
        let broken = std::iter::once(header)
            .chain(lines.map(String::from))
            .collect::<Vec<_>>()
            .join("\n");
        match pathways_from_csv(&g, &broken) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "followup_days"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_number_reports_row() {
        let g = toy_graph();
        let text = pathways_to_csv(&g, &rows())
            .unwrap()
            .replace("61.25", "sixty");
        match pathways_from_csv(&g, &text) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn atomic_write_and_ingest() {
        let dir = tempfile::tempdir().unwrap();
        let g = toy_graph();
        let gp = dir.path().join("graph.json");
        let cp = dir.path().join("sub/data.csv");
        write_json(&gp, &g).unwrap();
        write_pathways_csv(&cp, &g, &rows()).unwrap();
        let (g2, ps) = ingest_pathways_csv(&cp, &gp).unwrap();
        assert_eq!(g2, g);
        assert_eq!(ps.len(), 3);
        let leftovers: Vec<_> = fs::read_dir(dir.path().join("sub")).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
    }

    #[test]
    fn fit_directory_round_trip() {
        let d = crate::sim::gen_leukemia_shaped(150, 3).unwrap();
        let g = d.graph.compile().unwrap();
        let sets = crate::data::validate_dataset(&d.graph, &d.pathways).unwrap();
        let opts = crate::regime::PathwayFitOptions {
            mcmc: McmcConfig {
                burn_in: 20,
                total: 40,
                thin: 4,
                seed: 1,
            },
            ..Default::default()
        };
        let fitted = crate::regime::fit_pathway(&g, &sets, &opts).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_fit(
            dir.path(),
            &d.graph,
            &sets,
            &fitted,
            &opts.mcmc,
            d.pathways.len(),
        )
        .unwrap();
        let (m, models) = load_fit(dir.path()).unwrap();
        assert_eq!(m.graph, d.graph);
        assert!(m
            .transitions
            .iter()
            .any(|e| e.model == ModelKind::WeibullIntercept));
        for (k, (f, loaded)) in fitted.iter().zip(&models).enumerate() {
            let x = vec![1.0; g.covariate_fields(k).len()];
            let a = f.model.survival(30.0, &x).unwrap();
            let b = loaded.survival(30.0, &x).unwrap();
            assert_eq!(a.to_bits(), b.to_bits(), "transition {k}");
        }
        let n_ddp = m
            .transitions
            .iter()
            .filter(|e| e.model == ModelKind::Ddpgp)
            .count();
        assert_eq!(load_fit_draws(dir.path()).unwrap().len(), n_ddp);
    }

    #[test]
    fn report_round_trip() {
        let rows = vec![
            RegimeReportRow {
                regime: "(a, b)".into(),
                iptw: Some(1.0 / 3.0),
                ddpgp_mean: 2.0,
                ci_lo: 1.0,
                ci_hi: 3.0,
            },
            RegimeReportRow {
                regime: "(b, b)".into(),
                iptw: None,
                ddpgp_mean: 2.5,
                ci_lo: 1.5,
                ci_hi: 3.5,
            },
        ];
        assert_eq!(
            report_from_csv(&report_to_csv(&rows).unwrap()).unwrap(),
            rows
        );
    }
}
