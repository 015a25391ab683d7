//! Evaluation scenarios and reports.
//!
//! | scenario | given to systems           | subtasks scored            |
//! |----------|----------------------------|----------------------------|
//! | 1        | plain text                 | TS ES TA EA DR CR (P/R/F1) |
//! | 2        | entity spans               | TA EA DR (accuracy), CR    |
//! | 3        | entity spans + attributes  | DR (accuracy), CR          |

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::closure::{check_consistency, ConsistencyResult, RelationGraph};
use crate::io;
use crate::metrics::{
    self, check_entities_aligned, score_all_attributes, score_attribute, score_doc_time_rel, score_relations,
    score_spans, Attribute, MatchMode, MetricsError, RelationScoring, Score, ScoreForm,
};
use crate::model::{Corpus, EntityKind};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("subtask {subtask} is not evaluated in scenario {scenario}")]
    SubtaskNotInScenario { scenario: Scenario, subtask: Subtask },
    #[error("scenario {scenario}: {source}")]
    Alignment {
        scenario: Scenario,
        #[source]
        source: MetricsError,
    },
    #[error("scenario 3: document {doc_id}: system event `{id}` attributes differ from gold")]
    AttributesDiffer { doc_id: String, id: String },
    #[error("scenario 3: document {doc_id}: system timex `{id}` attributes differ from gold")]
    TimexAttributesDiffer { doc_id: String, id: String },
    #[error("document {doc_id}: gold relations are inconsistent: {result}")]
    InconsistentGold { doc_id: String, result: ConsistencyResult },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Corpus(#[from] io::CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scenario {
    /// Plain text only.
    #[serde(rename = "1")]
    PlainText,
    /// Gold entity spans given.
    #[serde(rename = "2")]
    SpansGiven,
    /// Gold spans and attributes given.
    #[serde(rename = "3")]
    AttributesGiven,
}

impl Scenario {
    pub fn number(&self) -> u8 {
        match self {
            Scenario::PlainText => 1,
            Scenario::SpansGiven => 2,
            Scenario::AttributesGiven => 3,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(Scenario::PlainText),
            2 => Some(Scenario::SpansGiven),
            3 => Some(Scenario::AttributesGiven),
            _ => None,
        }
    }

    pub fn permitted(&self) -> &'static [Subtask] {
        use Subtask::*;
        match self {
            Scenario::PlainText => &[TS, ES, TA, EA, DR, CR],
            Scenario::SpansGiven => &[TA, EA, DR, CR],
            Scenario::AttributesGiven => &[DR, CR],
        }
    }

    fn form(&self) -> ScoreForm {
        match self {
            Scenario::PlainText => ScoreForm::Prf,
            _ => ScoreForm::Accuracy,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

#[allow(clippy::upper_case_acronyms)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Subtask {
    /// Time expression spans.
    TS,
    /// Event spans.
    ES,
    /// Time expression attributes.
    TA,
    /// Event attributes.
    EA,
    /// Event relation to document creation time.
    DR,
    /// Narrative container relations.
    CR,
}

impl Subtask {
    pub const ALL: &'static [Subtask] = &[Subtask::TS, Subtask::ES, Subtask::TA, Subtask::EA, Subtask::DR, Subtask::CR];
}

impl fmt::Display for Subtask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Subtask {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Subtask::ALL
            .iter()
            .copied()
            .find(|t| t.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown subtask `{s}` (expected TS, ES, TA, EA, DR or CR)"))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClosureMode {
    /// Close both system and gold relations, score the closed sets.
    #[default]
    BothClosed,
    /// Precision against closed gold, recall against closed system.
    Asymmetric,
    /// No closure-based row.
    Off,
}

impl FromStr for ClosureMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "both-closed" => Ok(ClosureMode::BothClosed),
            "asymmetric" => Ok(ClosureMode::Asymmetric),
            "off" => Ok(ClosureMode::Off),
            _ => Err(format!("unknown closure mode `{s}` (expected both-closed, asymmetric or off)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub subtasks: BTreeSet<Subtask>,
    pub match_mode: MatchMode,
    pub closure_mode: ClosureMode,
}

impl ScenarioConfig {
    /// Every subtask the scenario evaluates, exact matching, both sets closed.
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            subtasks: scenario.permitted().iter().copied().collect(),
            match_mode: MatchMode::Exact,
            closure_mode: ClosureMode::BothClosed,
        }
    }

    pub fn with_subtasks(mut self, subtasks: impl IntoIterator<Item = Subtask>) -> Result<Self, RunError> {
        self.subtasks = subtasks.into_iter().collect();
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        match self.subtasks.iter().find(|t| !self.scenario.permitted().contains(t)) {
            Some(&subtask) => Err(RunError::SubtaskNotInScenario {
                scenario: self.scenario,
                subtask,
            }),
            None => Ok(()),
        }
    }
}

/// Metric names a report carries for one subtask.
pub fn mandated_metrics(scenario: Scenario, subtask: Subtask, closure: ClosureMode) -> Vec<String> {
    let suffix = match scenario.form() {
        ScoreForm::Prf => "F1",
        ScoreForm::Accuracy => "accuracy",
    };
    let attributes = |kind| {
        let mut names: Vec<String> = Attribute::overall(kind)
            .iter()
            .map(|a| format!("{}-{suffix}", a.name()))
            .collect();
        names.push(format!("overall-{suffix}"));
        names
    };
    let mut names = match subtask {
        Subtask::TS | Subtask::ES => vec!["span-F1".to_string()],
        Subtask::TA => attributes(EntityKind::Timex),
        Subtask::EA => attributes(EntityKind::Event),
        Subtask::DR => vec![format!("docTimeRel-{suffix}")],
        Subtask::CR => {
            let mut v = vec!["plain-F1".to_string()];
            if closure != ClosureMode::Off {
                v.push("closure-F1".to_string());
            }
            v
        }
    };
    names.sort();
    names
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub subtask: Subtask,
    pub metric: String,
    pub score: Score,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: Scenario,
    pub subtasks: Vec<Subtask>,
    pub match_mode: MatchMode,
    pub closure_mode: ClosureMode,
    /// SHA-256 of the canonical serialization of each corpus.
    pub system_digest: String,
    pub gold_digest: String,
    pub documents: usize,
    pub warnings: Vec<String>,
    /// Sorted by (subtask, metric).
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn get(&self, subtask: Subtask, metric: &str) -> Option<&Score> {
        self.rows
            .iter()
            .find(|r| r.subtask == subtask && r.metric == metric)
            .map(|r| &r.score)
    }
}

pub fn corpus_digest(corpus: &Corpus) -> Result<String, io::CorpusError> {
    let bytes = io::encode_corpus(corpus)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn check_alignment(config: &ScenarioConfig, system: &Corpus, gold: &Corpus) -> Result<(), RunError> {
    if config.scenario == Scenario::PlainText {
        return Ok(());
    }
    for kind in [EntityKind::Timex, EntityKind::Event] {
        check_entities_aligned(system, gold, kind).map_err(|source| RunError::Alignment {
            scenario: config.scenario,
            source,
        })?;
    }
    if config.scenario == Scenario::AttributesGiven {
        for sys_doc in &system.documents {
            let gold_doc = gold.get(&sys_doc.doc_id).expect("aligned above");
            for s in &sys_doc.timexes {
                let g = gold_doc.timexes.iter().find(|g| g.id == s.id).expect("aligned above");
                if s.timex_type != g.timex_type || s.value != g.value {
                    return Err(RunError::TimexAttributesDiffer {
                        doc_id: sys_doc.doc_id.clone(),
                        id: s.id.clone(),
                    });
                }
            }
            for s in &sys_doc.events {
                let g = gold_doc.events.iter().find(|g| g.id == s.id).expect("aligned above");
                let same = s.event_type == g.event_type
                    && s.polarity == g.polarity
                    && s.degree == g.degree
                    && s.modality == g.modality;
                if !same {
                    return Err(RunError::AttributesDiffer {
                        doc_id: sys_doc.doc_id.clone(),
                        id: s.id.clone(),
                    });
                }
            }
        }
    }
    Ok(())
}

fn check_gold_consistent(gold: &Corpus) -> Result<(), RunError> {
    for doc in &gold.documents {
        let graph = RelationGraph::from_document(doc).map_err(|source| MetricsError::Gold {
            doc_id: doc.doc_id.clone(),
            source,
        })?;
        let result = check_consistency(&graph);
        if !result.consistent {
            return Err(RunError::InconsistentGold {
                doc_id: doc.doc_id.clone(),
                result,
            });
        }
    }
    Ok(())
}

/// Scores `system` against `gold` under one evaluation scenario.
pub fn run_scenario(config: &ScenarioConfig, system: &Corpus, gold: &Corpus) -> Result<Report, RunError> {
    config.validate()?;
    check_gold_consistent(gold)?;
    check_alignment(config, system, gold)?;

    let form = config.scenario.form();
    let mode = config.match_mode;
    let suffix = match form {
        ScoreForm::Prf => "F1",
        ScoreForm::Accuracy => "accuracy",
    };
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    let mut push = |subtask, metric: String, score| rows.push(ReportRow { subtask, metric, score });

    for &subtask in &config.subtasks {
        match subtask {
            Subtask::TS | Subtask::ES => {
                let kind = if subtask == Subtask::TS {
                    EntityKind::Timex
                } else {
                    EntityKind::Event
                };
                push(subtask, "span-F1".into(), Score::Prf(score_spans(system, gold, kind, mode)?));
            }
            Subtask::TA | Subtask::EA => {
                let kind = if subtask == Subtask::TA {
                    EntityKind::Timex
                } else {
                    EntityKind::Event
                };
                for &attribute in Attribute::overall(kind) {
                    let score = score_attribute(system, gold, kind, attribute, mode, form)?;
                    push(subtask, format!("{}-{suffix}", attribute.name()), score);
                }
                push(
                    subtask,
                    format!("overall-{suffix}"),
                    score_all_attributes(system, gold, kind, mode, form)?,
                );
            }
            Subtask::DR => {
                push(subtask, format!("docTimeRel-{suffix}"), score_doc_time_rel(system, gold, mode, form)?);
            }
            Subtask::CR => {
                let plain = score_relations(system, gold, RelationScoring::Plain)?;
                push(subtask, "plain-F1".into(), Score::Prf(plain.score));
                let scoring = match config.closure_mode {
                    ClosureMode::BothClosed => Some(RelationScoring::BothClosed),
                    ClosureMode::Asymmetric => Some(RelationScoring::Asymmetric),
                    ClosureMode::Off => None,
                };
                if let Some(scoring) = scoring {
                    let closed = score_relations(system, gold, scoring)?;
                    warnings.extend(closed.warnings);
                    push(subtask, "closure-F1".into(), Score::Prf(closed.score));
                }
            }
        }
    }
    rows.sort_by(|a, b| (a.subtask, &a.metric).cmp(&(b.subtask, &b.metric)));

    Ok(Report {
        scenario: config.scenario,
        subtasks: config.subtasks.iter().copied().collect(),
        match_mode: config.match_mode,
        closure_mode: config.closure_mode,
        system_digest: corpus_digest(system)?,
        gold_digest: corpus_digest(gold)?,
        documents: gold.len(),
        warnings,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Tsv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tsv" => Ok(ReportFormat::Tsv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(format!("unknown report format `{s}` (expected tsv or json)")),
        }
    }
}

pub const TSV_HEADER: &str = "subtask\tmetric\ttp\tsys\tgold\tP\tR\tF1";

/// Deterministic rendering. TSV rows follow the report's (subtask, metric)
/// order; accuracy rows put `correct` under tp, `total` under gold and the
/// accuracy under F1, with `-` elsewhere.
pub fn emit_report(report: &Report, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Tsv => {
            let mut out = String::from(TSV_HEADER);
            out.push('\n');
            for row in &report.rows {
                out.push_str(&tsv_row(row));
                out.push('\n');
            }
            out.into_bytes()
        }
        ReportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(report).expect("report serializes");
            out.push(b'\n');
            out
        }
    }
}

fn tsv_row(row: &ReportRow) -> String {
    match &row.score {
        Score::Prf(s) => format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            row.subtask, row.metric, s.true_positives, s.system_count, s.gold_count, s.precision, s.recall, s.f1
        ),
        Score::Accuracy(s) => format!(
            "{}\t{}\t{}\t-\t{}\t-\t-\t{}",
            row.subtask, row.metric, s.correct, s.total, s.accuracy
        ),
    }
}

/// Parses a report emitted in JSON form.
pub fn parse_json_report(bytes: &[u8]) -> Result<Report, serde_json::Error> {
    serde_json::from_slice(bytes)
}

/// Parses the rows of a TSV report. Counts and ratios are read back as
/// written; symmetric PRF rows are assumed (recall tp = tp).
pub fn parse_tsv_rows(text: &str) -> Result<Vec<ReportRow>, String> {
    let mut lines = text.lines();
    if lines.next() != Some(TSV_HEADER) {
        return Err("missing TSV header".into());
    }
    lines
        .map(|line| {
            let f: Vec<&str> = line.split('\t').collect();
            let [subtask, metric, tp, sys, gold, p, r, f1] = f[..] else {
                return Err(format!("expected 8 columns in `{line}`"));
            };
            let num = |s: &str| s.parse::<usize>().map_err(|e| format!("`{s}`: {e}"));
            let real = |s: &str| s.parse::<f64>().map_err(|e| format!("`{s}`: {e}"));
            let score = if sys == "-" {
                Score::Accuracy(metrics::AccuracyScore {
                    correct: num(tp)?,
                    total: num(gold)?,
                    accuracy: real(f1)?,
                })
            } else {
                Score::Prf(metrics::PrfScore {
                    true_positives: num(tp)?,
                    recall_true_positives: num(tp)?,
                    system_count: num(sys)?,
                    gold_count: num(gold)?,
                    precision: real(p)?,
                    recall: real(r)?,
                    f1: real(f1)?,
                })
            };
            Ok(ReportRow {
                subtask: subtask.parse()?,
                metric: metric.to_string(),
                score,
            })
        })
        .collect()
}
