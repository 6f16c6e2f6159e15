//! CSV ingestion of play records, treatment metadata, and the JSON report.
//!
//! Input files carry a mandatory header and use one of two encodings:
//!
//! ```text
//! treatment_id,session_id,round,state
//! treatment_id,session_id,round,row_action,col_action
//! ```
//!
//! With the action encoding the state index is `2·row_action + col_action`.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::StationarityDiagnostic;
use crate::model::{StateSpace, Trajectory, TreatmentDataset};
use crate::nullmodels::BaselineSummary;
use crate::observables::{ObservableReport, ZeroFluxPolicy};
use crate::stats::{OlsFit, TestResult};

/// Default Monte-Carlo replicate count.
pub const DEFAULT_REPS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    States,
    Actions,
}

#[derive(Debug, Clone, Copy)]
struct Columns {
    treatment: usize,
    session: usize,
    round: usize,
    state: Option<usize>,
    row_action: Option<usize>,
    col_action: Option<usize>,
}

impl Columns {
    fn from_header(header: &csv::StringRecord) -> Result<Self> {
        let find = |name: &str| header.iter().position(|h| h.trim() == name);
        let required = |name: &str| {
            find(name).ok_or_else(|| Error::ParseError {
                line: 1,
                message: format!("header lacks column {name:?}"),
            })
        };
        let cols = Columns {
            treatment: required("treatment_id")?,
            session: required("session_id")?,
            round: required("round")?,
            state: find("state"),
            row_action: find("row_action"),
            col_action: find("col_action"),
        };
        let has_actions = cols.row_action.is_some() && cols.col_action.is_some();
        if cols.row_action.is_some() != cols.col_action.is_some() {
            return Err(Error::ParseError {
                line: 1,
                message: "row_action and col_action must appear together".into(),
            });
        }
        if cols.state.is_none() && !has_actions {
            return Err(Error::ParseError {
                line: 1,
                message: "header needs a state column or row_action,col_action".into(),
            });
        }
        Ok(cols)
    }
}

type Session = (String, Vec<Row>);

fn field(rec: &csv::StringRecord, idx: Option<usize>) -> Option<&str> {
    idx.and_then(|i| rec.get(i)).map(str::trim).filter(|s| !s.is_empty())
}

fn parse_int(s: &str, line: u64, what: &str) -> Result<u64> {
    s.parse().map_err(|_| Error::ParseError {
        line,
        message: format!("{what} {s:?} is not a nonnegative integer"),
    })
}

struct Row {
    round: u64,
    state: usize,
    line: u64,
}

/// Parses play records from any reader. See [`load_csv`].
pub fn read_csv<R: Read>(reader: R, space: &StateSpace) -> Result<Vec<TreatmentDataset>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
    if header.iter().all(|h| h.trim().is_empty()) {
        return Err(Error::ParseError {
            line: 1,
            message: "missing header".into(),
        });
    }
    let cols = Columns::from_header(&header)?;

    let mut treatments: Vec<(String, Vec<Session>)> = Vec::new();
    let mut treatment_index: HashMap<String, usize> = HashMap::new();
    let mut session_index: HashMap<(usize, String), usize> = HashMap::new();
    let mut encoding: Option<Encoding> = None;

    for (k, rec) in rdr.records().enumerate() {
        let line = k as u64 + 2;
        let rec = rec.map_err(|e| csv_error(e, line))?;
        let missing = |what: &str| Error::ParseError {
            line,
            message: format!("missing {what}"),
        };
        let treatment = field(&rec, Some(cols.treatment)).ok_or_else(|| missing("treatment_id"))?;
        let session = field(&rec, Some(cols.session)).ok_or_else(|| missing("session_id"))?;
        let round = parse_int(
            field(&rec, Some(cols.round)).ok_or_else(|| missing("round"))?,
            line,
            "round",
        )?;
        if round < 1 {
            return Err(Error::ParseError {
                line,
                message: "rounds are numbered from 1".into(),
            });
        }

        let state_field = field(&rec, cols.state);
        let row_field = field(&rec, cols.row_action);
        let col_field = field(&rec, cols.col_action);
        let row_encoding = match (state_field, row_field, col_field) {
            (Some(_), None, None) => Encoding::States,
            (None, Some(_), Some(_)) => Encoding::Actions,
            (Some(_), _, _) => return Err(Error::MixedEncodings { line }),
            _ => return Err(missing("state or action pair")),
        };
        match encoding {
            None => encoding = Some(row_encoding),
            Some(e) if e != row_encoding => return Err(Error::MixedEncodings { line }),
            _ => {}
        }
        let state = match row_encoding {
            Encoding::States => parse_int(state_field.unwrap_or_default(), line, "state")? as usize,
            Encoding::Actions => {
                let action = |s: Option<&str>, what| -> Result<u64> {
                    match parse_int(s.unwrap_or_default(), line, what)? {
                        a @ (0 | 1) => Ok(a),
                        a => Err(Error::ParseError {
                            line,
                            message: format!("{what} must be 0 or 1, got {a}"),
                        }),
                    }
                };
                (2 * action(row_field, "row_action")? + action(col_field, "col_action")?) as usize
            }
        };
        if state >= space.size() {
            return Err(Error::StateOutOfRange {
                state,
                size: space.size(),
                line: Some(line),
            });
        }

        let t_idx = *treatment_index.entry(treatment.to_owned()).or_insert_with(|| {
            treatments.push((treatment.to_owned(), Vec::new()));
            treatments.len() - 1
        });
        let sessions = &mut treatments[t_idx].1;
        let s_idx = *session_index.entry((t_idx, session.to_owned())).or_insert_with(|| {
            sessions.push((session.to_owned(), Vec::new()));
            sessions.len() - 1
        });
        sessions[s_idx].1.push(Row { round, state, line });
    }

    treatments
        .into_iter()
        .map(|(treatment_id, sessions)| {
            let sessions = sessions
                .into_iter()
                .map(|(session_id, mut rows)| {
                    rows.sort_by_key(|r| r.round);
                    if let Some(w) = rows.windows(2).find(|w| w[0].round == w[1].round) {
                        let dup = if w[0].line > w[1].line { &w[0] } else { &w[1] };
                        return Err(Error::NonMonotoneRounds {
                            treatment: treatment_id.clone(),
                            session: session_id,
                            round: dup.round,
                            line: dup.line,
                        });
                    }
                    Ok(Trajectory::new(session_id, rows.into_iter().map(|r| r.state).collect()))
                })
                .collect::<Result<Vec<_>>>()?;
            TreatmentDataset::new(treatment_id, space.clone(), sessions)
        })
        .collect()
}

fn csv_error(e: csv::Error, fallback_line: u64) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(fallback_line);
    Error::ParseError {
        line,
        message: e.to_string(),
    }
}

/// Loads every treatment in a CSV file, in order of first appearance.
///
/// Rows are grouped by (treatment, session) and ordered by round. Gaps in
/// round numbers are allowed; only a change of `session_id` starts a new
/// session.
pub fn load_csv(path: impl AsRef<Path>, space: &StateSpace) -> Result<Vec<TreatmentDataset>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, space)
}

/// Writes datasets back out; rounds are numbered 1.. within each session.
pub fn write_csv_to<W: Write>(writer: W, datasets: &[TreatmentDataset], encoding: Encoding) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let to_err = |e: csv::Error| Error::Internal(format!("csv writer: {e}"));
    match encoding {
        Encoding::States => w.write_record(["treatment_id", "session_id", "round", "state"]),
        Encoding::Actions => w.write_record(["treatment_id", "session_id", "round", "row_action", "col_action"]),
    }
    .map_err(to_err)?;
    for d in datasets {
        if encoding == Encoding::Actions && !d.space().is_square_2x2() {
            return Err(Error::InvalidStateSpace(
                "action encoding needs the canonical 2x2 space".into(),
            ));
        }
        for s in d.sessions() {
            for (k, &state) in s.states.iter().enumerate() {
                let round = (k + 1).to_string();
                match encoding {
                    Encoding::States => w.write_record([d.treatment_id(), &s.session_id, &round, &state.to_string()]),
                    Encoding::Actions => w.write_record([
                        d.treatment_id(),
                        &s.session_id,
                        &round,
                        &(state / 2).to_string(),
                        &(state % 2).to_string(),
                    ]),
                }
                .map_err(to_err)?;
            }
        }
    }
    w.flush().map_err(|e| Error::Internal(format!("csv flush: {e}")))
}

pub fn write_csv(path: impl AsRef<Path>, datasets: &[TreatmentDataset], encoding: Encoding) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut buf = BufWriter::new(file);
    write_csv_to(&mut buf, datasets, encoding)?;
    buf.flush().map_err(|e| Error::io(path, e))
}

/// Descriptive record for one treatment: game, size, source.
///
/// A payoff matrix may be attached as an annotation; nothing computes with it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TreatmentMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub game: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub records_per_treatment: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoff: Option<Vec<Vec<f64>>>,
    #[serde(default, flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl TreatmentMeta {
    fn to_map(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        if let Some(g) = &self.game {
            m.insert("game".into(), g.clone());
        }
        if let Some(s) = self.states {
            m.insert("states".into(), s.to_string());
        }
        if let Some(r) = &self.records_per_treatment {
            m.insert("records_per_treatment".into(), r.clone());
        }
        if let Some(r) = &self.reference {
            m.insert("reference".into(), r.clone());
        }
        if let Some(p) = &self.payoff {
            m.insert("payoff".into(), serde_json::to_string(p).unwrap_or_default());
        }
        for (k, v) in &self.extra {
            let v = match v {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            m.insert(k.clone(), v);
        }
        m
    }
}

/// Reads a JSON object mapping treatment id to [`TreatmentMeta`].
pub fn load_treatment_meta(path: impl AsRef<Path>) -> Result<BTreeMap<String, TreatmentMeta>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn attach_meta(datasets: &mut [TreatmentDataset], catalog: &BTreeMap<String, TreatmentMeta>) {
    for d in datasets {
        if let Some(meta) = catalog.get(d.treatment_id()) {
            d.meta_mut().extend(meta.to_map());
        }
    }
}

/// Resolves a state-space argument: `builtin:square2x2`, `builtin:ringN`,
/// or the path of a JSON descriptor.
pub fn load_space(arg: &str) -> Result<StateSpace> {
    if let Some(name) = arg.strip_prefix("builtin:") {
        if name == "square2x2" {
            return Ok(StateSpace::square_2x2());
        }
        if let Some(r) = name.strip_prefix("ring").and_then(|r| r.parse().ok()) {
            return StateSpace::ring(r);
        }
        return Err(Error::InvalidStateSpace(format!("unknown builtin space {name:?}")));
    }
    let text = std::fs::read_to_string(arg).map_err(|e| Error::io(arg, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Run settings shared by every subcommand; echoed into the report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisConfig {
    pub zero_flux_policy: ZeroFluxPolicy,
    pub burn_in: usize,
    pub mc_reps: usize,
    pub seed: u64,
    pub alpha: f64,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub space_source: String,
    pub space: StateSpace,
    /// Worker threads for replicates; 0 lets the pool decide. Not echoed:
    /// results are identical for every thread count.
    #[serde(skip)]
    pub threads: usize,
    pub reproducible: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            zero_flux_policy: ZeroFluxPolicy::Skip,
            burn_in: 0,
            mc_reps: DEFAULT_REPS,
            seed: 0,
            alpha: 0.001,
            input: None,
            output: None,
            space_source: "builtin:square2x2".into(),
            space: StateSpace::square_2x2(),
            threads: 0,
            reproducible: false,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        self.zero_flux_policy.validate()?;
        if self.mc_reps < 2 {
            return Err(Error::InvalidParameter(format!(
                "mc_reps must be at least 2, got {}",
                self.mc_reps
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Estimated chain in plot-ready form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainSummary {
    pub dos: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
    pub counts: Vec<Vec<u64>>,
    pub occupancy: Vec<u64>,
    pub n_observations: u64,
    pub unleft_rows: Vec<bool>,
}

/// A named test, or the reason it could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedTest {
    pub name: String,
    pub observable: String,
    pub result: Option<TestResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl NamedTest {
    pub fn from_result(name: &str, observable: &str, r: Result<TestResult>) -> Self {
        let (result, error) = match r {
            Ok(t) => (Some(t), None),
            Err(e) => (None, Some(e.to_string())),
        };
        NamedTest {
            name: name.into(),
            observable: observable.into(),
            result,
            error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Marginals {
    /// Frequency of row action 1.
    pub p: f64,
    /// Frequency of column action 1.
    pub q: f64,
    pub n: u64,
}

/// Where an empirical observable falls within its null-model samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullComparison {
    pub observable: String,
    pub empirical: f64,
    pub null_mean: f64,
    /// Share of null samples below the empirical value (ties count half).
    pub percentile: f64,
    /// `(1 + #{sample ≥ empirical}) / (reps + 1)`.
    pub monte_carlo_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleVerdict {
    pub alpha: f64,
    pub t_p_value: Option<f64>,
    pub monte_carlo_p: f64,
    pub cycle_detected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreatmentReport {
    pub treatment_id: String,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
    pub n_sessions: usize,
    pub chain: ChainSummary,
    pub observables: ObservableReport,
    pub stationarity: StationarityDiagnostic,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub marginals: Option<Marginals>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub null_models: Vec<BaselineSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub comparisons: Vec<NullComparison>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub tests: Vec<NamedTest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycle: Option<CycleVerdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedFit {
    pub name: String,
    pub x_name: String,
    pub y_name: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub labels: Vec<String>,
    pub fit: Option<OlsFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// The single JSON document every subcommand writes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated_unix_secs: Option<u64>,
    pub config: AnalysisConfig,
    pub treatments: Vec<TreatmentReport>,
    pub tests: Vec<NamedTest>,
    pub fits: Vec<NamedFit>,
}

impl Report {
    pub fn new(command: &str, config: &AnalysisConfig) -> Self {
        let generated_unix_secs = (!config.reproducible).then(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        });
        Report {
            tool: "epr".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            generated_unix_secs,
            config: config.clone(),
            treatments: Vec::new(),
            tests: Vec::new(),
            fits: Vec::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Serializes `report` to `path`. Floats use the shortest representation
/// that parses back to the identical `f64`.
pub fn write_report(report: &Report, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, report.to_json()?).map_err(|e| Error::io(path, e))
}
