//! Span, attribute, docTimeRel and container-relation scoring.
//!
//! All corpus scores are micro-averaged: per-document counts are summed
//! before precision, recall and F1 are computed. The gold corpus decides
//! which documents exist; a gold document missing from the system corpus
//! is scored as an empty system document.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::closure::{close_contains, close_contains_repairing, ClosureError, RelationGraph};
use crate::model::{Corpus, Document, EntityKind, EntityRef, Span};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("system and gold documents differ ({system} vs {gold})")]
    DocMismatch { system: String, gold: String },
    #[error("system document `{0}` does not exist in the gold corpus")]
    UnknownSystemDoc(String),
    #[error("unknown {kind} attribute `{name}`")]
    UnknownAttribute { kind: EntityKind, name: String },
    #[error("attribute {attribute} does not belong to {kind} entities")]
    WrongKind { kind: EntityKind, attribute: Attribute },
    #[error("document {doc_id}: system {kind} entities are not aligned with gold: {detail}")]
    Misaligned {
        doc_id: String,
        kind: EntityKind,
        detail: String,
    },
    #[error("document {doc_id}: gold relations: {source}")]
    Gold {
        doc_id: String,
        #[source]
        source: ClosureError,
    },
    #[error("document {doc_id}: system relations: {source}")]
    System {
        doc_id: String,
        #[source]
        source: ClosureError,
    },
}

pub type Result<T, E = MetricsError> = std::result::Result<T, E>;

/// Precision, recall and F1 with their counts.
///
/// `recall_true_positives` differs from `true_positives` only for the
/// asymmetric closure mode, where precision and recall are measured
/// against different reference sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrfScore {
    pub true_positives: usize,
    pub recall_true_positives: usize,
    pub system_count: usize,
    pub gold_count: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl PrfScore {
    /// Precision uses `tp_precision / system`, recall `tp_recall / gold`.
    ///
    /// # Panics
    /// If either true-positive count exceeds its denominator.
    pub fn asymmetric(tp_precision: usize, system: usize, tp_recall: usize, gold: usize) -> Self {
        assert!(
            tp_precision <= system && tp_recall <= gold,
            "true positives ({tp_precision}, {tp_recall}) exceed counts ({system}, {gold})"
        );
        let both_empty = system == 0 && gold == 0;
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                if both_empty {
                    1.0
                } else {
                    0.0
                }
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(tp_precision, system);
        let recall = ratio(tp_recall, gold);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            true_positives: tp_precision,
            recall_true_positives: tp_recall,
            system_count: system,
            gold_count: gold,
            precision,
            recall,
            f1,
        }
    }
}

/// # Panics
/// If `tp` exceeds either count.
pub fn prf(tp: usize, system: usize, gold: usize) -> PrfScore {
    assert!(
        tp <= system && tp <= gold,
        "true positives {tp} exceed min(system {system}, gold {gold})"
    );
    PrfScore::asymmetric(tp, system, tp, gold)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyScore {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

/// Accuracy over zero items is vacuously 1.
pub fn accuracy(correct: usize, total: usize) -> AccuracyScore {
    assert!(correct <= total, "correct {correct} exceeds total {total}");
    AccuracyScore {
        correct,
        total,
        accuracy: if total == 0 {
            1.0
        } else {
            correct as f64 / total as f64
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "lowercase")]
pub enum Score {
    Prf(PrfScore),
    Accuracy(AccuracyScore),
}

impl Score {
    pub fn as_prf(&self) -> Option<&PrfScore> {
        match self {
            Score::Prf(s) => Some(s),
            Score::Accuracy(_) => None,
        }
    }

    pub fn as_accuracy(&self) -> Option<&AccuracyScore> {
        match self {
            Score::Accuracy(s) => Some(s),
            Score::Prf(_) => None,
        }
    }

    /// F1 or accuracy.
    pub fn headline(&self) -> f64 {
        match self {
            Score::Prf(s) => s.f1,
            Score::Accuracy(s) => s.accuracy,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    #[default]
    Exact,
    Overlap,
}

impl FromStr for MatchMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(MatchMode::Exact),
            "overlap" => Ok(MatchMode::Overlap),
            _ => Err(format!("unknown match mode `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScoreForm {
    Prf,
    Accuracy,
}

/// A scored entity attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Attribute {
    TimexType,
    TimexValue,
    EventType,
    Polarity,
    Degree,
    Modality,
    DocTimeRel,
}

impl Attribute {
    /// Attributes that make up the "all attributes correct" score.
    /// docTimeRel is scored on its own.
    pub fn overall(kind: EntityKind) -> &'static [Attribute] {
        match kind {
            EntityKind::Timex => &[Attribute::TimexType, Attribute::TimexValue],
            EntityKind::Event => &[
                Attribute::EventType,
                Attribute::Polarity,
                Attribute::Degree,
                Attribute::Modality,
            ],
        }
    }

    pub fn kind(&self) -> EntityKind {
        match self {
            Attribute::TimexType | Attribute::TimexValue => EntityKind::Timex,
            _ => EntityKind::Event,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Attribute::TimexType | Attribute::EventType => "type",
            Attribute::TimexValue => "value",
            Attribute::Polarity => "polarity",
            Attribute::Degree => "degree",
            Attribute::Modality => "modality",
            Attribute::DocTimeRel => "docTimeRel",
        }
    }

    pub fn parse(kind: EntityKind, name: &str) -> Result<Self> {
        let attribute = match (kind, name) {
            (EntityKind::Timex, "type") => Attribute::TimexType,
            (EntityKind::Timex, "value") => Attribute::TimexValue,
            (EntityKind::Event, "type") => Attribute::EventType,
            (EntityKind::Event, "polarity") => Attribute::Polarity,
            (EntityKind::Event, "degree") => Attribute::Degree,
            (EntityKind::Event, "modality") => Attribute::Modality,
            (EntityKind::Event, "docTimeRel") => Attribute::DocTimeRel,
            _ => {
                return Err(MetricsError::UnknownAttribute {
                    kind,
                    name: name.to_string(),
                })
            }
        };
        Ok(attribute)
    }

    /// Whether two entities agree on this attribute. An absent timex
    /// value only agrees with another absent value.
    pub fn agrees(&self, system: EntityRef<'_>, gold: EntityRef<'_>) -> bool {
        match (system, gold) {
            (EntityRef::Timex(s), EntityRef::Timex(g)) => match self {
                Attribute::TimexType => s.timex_type == g.timex_type,
                Attribute::TimexValue => s.value == g.value,
                _ => false,
            },
            (EntityRef::Event(s), EntityRef::Event(g)) => match self {
                Attribute::EventType => s.event_type == g.event_type,
                Attribute::Polarity => s.polarity == g.polarity,
                Attribute::Degree => s.degree == g.degree,
                Attribute::Modality => s.modality == g.modality,
                Attribute::DocTimeRel => s.doc_time_rel == g.doc_time_rel,
                _ => false,
            },
            _ => false,
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.kind(), self.name())
    }
}

fn entities(doc: &Document, kind: EntityKind) -> Vec<EntityRef<'_>> {
    match kind {
        EntityKind::Timex => doc.timexes.iter().map(EntityRef::Timex).collect(),
        EntityKind::Event => doc.events.iter().map(EntityRef::Event).collect(),
    }
}

/// One-to-one pairs `(system index, gold index)` into the documents'
/// entity lists of `kind`, sorted by system index.
///
/// Overlap mode is greedy over candidate pairs ordered by overlap length
/// (descending), then system begin, gold begin, system end, gold end.
pub fn match_entities(
    system: &Document,
    gold: &Document,
    kind: EntityKind,
    mode: MatchMode,
) -> Result<Vec<(usize, usize)>> {
    if system.doc_id != gold.doc_id || system.text != gold.text {
        return Err(MetricsError::DocMismatch {
            system: system.doc_id.clone(),
            gold: gold.doc_id.clone(),
        });
    }
    let sys = entities(system, kind);
    let gold = entities(gold, kind);
    Ok(match_spans(
        &sys.iter().map(|e| e.span()).collect::<Vec<_>>(),
        &gold.iter().map(|e| e.span()).collect::<Vec<_>>(),
        mode,
    ))
}

fn match_spans(sys: &[Span], gold: &[Span], mode: MatchMode) -> Vec<(usize, usize)> {
    let mut pairs = match mode {
        MatchMode::Exact => {
            let mut by_span: HashMap<Span, usize> = HashMap::with_capacity(gold.len());
            for (j, span) in gold.iter().enumerate() {
                by_span.entry(*span).or_insert(j);
            }
            let mut used = vec![false; gold.len()];
            let mut pairs = Vec::new();
            for (i, span) in sys.iter().enumerate() {
                if let Some(&j) = by_span.get(span) {
                    if !used[j] {
                        used[j] = true;
                        pairs.push((i, j));
                    }
                }
            }
            pairs
        }
        MatchMode::Overlap => {
            let mut candidates: Vec<(usize, usize, usize)> = Vec::new();
            for (i, s) in sys.iter().enumerate() {
                for (j, g) in gold.iter().enumerate() {
                    let overlap = s.overlap(g);
                    if overlap > 0 {
                        candidates.push((overlap, i, j));
                    }
                }
            }
            candidates.sort_by(|&(oa, ia, ja), &(ob, ib, jb)| {
                ob.cmp(&oa)
                    .then(sys[ia].begin.cmp(&sys[ib].begin))
                    .then(gold[ja].begin.cmp(&gold[jb].begin))
                    .then(sys[ia].end.cmp(&sys[ib].end))
                    .then(gold[ja].end.cmp(&gold[jb].end))
                    .then((ia, ja).cmp(&(ib, jb)))
            });
            let mut sys_used = vec![false; sys.len()];
            let mut gold_used = vec![false; gold.len()];
            let mut pairs = Vec::new();
            for (_, i, j) in candidates {
                if !sys_used[i] && !gold_used[j] {
                    sys_used[i] = true;
                    gold_used[j] = true;
                    pairs.push((i, j));
                }
            }
            pairs
        }
    };
    pairs.sort_unstable();
    pairs
}

/// Gold documents in id order, each with its system counterpart.
fn align<'a>(system: &'a Corpus, gold: &'a Corpus) -> Result<Vec<(Option<&'a Document>, &'a Document)>> {
    let gold_by_id = gold.by_id();
    let mut system_by_id: HashMap<&str, &Document> = HashMap::new();
    for doc in &system.documents {
        if !gold_by_id.contains_key(doc.doc_id.as_str()) {
            return Err(MetricsError::UnknownSystemDoc(doc.doc_id.clone()));
        }
        system_by_id.insert(&doc.doc_id, doc);
    }
    Ok(gold_by_id
        .into_values()
        .map(|g| (system_by_id.get(g.doc_id.as_str()).copied(), g))
        .collect())
}

fn empty_like(gold: &Document) -> Document {
    gold.without_annotations()
}

/// Counts `(tp, system, gold)` where a matched pair is a true positive
/// when `agree` holds.
fn matched_counts<F>(system: &Corpus, gold: &Corpus, kind: EntityKind, mode: MatchMode, agree: F) -> Result<PrfScore>
where
    F: Fn(EntityRef<'_>, EntityRef<'_>) -> bool,
{
    let (mut tp, mut sys_n, mut gold_n) = (0, 0, 0);
    for (sys_doc, gold_doc) in align(system, gold)? {
        let fallback;
        let sys_doc = match sys_doc {
            Some(d) => d,
            None => {
                fallback = empty_like(gold_doc);
                &fallback
            }
        };
        let sys = entities(sys_doc, kind);
        let gold = entities(gold_doc, kind);
        let pairs = match_entities(sys_doc, gold_doc, kind, mode)?;
        tp += pairs.iter().filter(|&&(i, j)| agree(sys[i], gold[j])).count();
        sys_n += sys.len();
        gold_n += gold.len();
    }
    Ok(prf(tp, sys_n, gold_n))
}

/// Per gold entity, whether the id-aligned system entity agrees.
fn aligned_counts<F>(system: &Corpus, gold: &Corpus, kind: EntityKind, agree: F) -> Result<AccuracyScore>
where
    F: Fn(EntityRef<'_>, EntityRef<'_>) -> bool,
{
    let (mut correct, mut total) = (0, 0);
    for (sys_doc, gold_doc) in align(system, gold)? {
        let sys: HashMap<&str, EntityRef<'_>> = sys_doc
            .map(|d| entities(d, kind).into_iter().map(|e| (e.id(), e)).collect())
            .unwrap_or_default();
        let gold = entities(gold_doc, kind);
        check_alignment(&gold_doc.doc_id, kind, &sys, &gold)?;
        for g in &gold {
            total += 1;
            if agree(sys[g.id()], *g) {
                correct += 1;
            }
        }
    }
    Ok(accuracy(correct, total))
}

fn check_alignment(
    doc_id: &str,
    kind: EntityKind,
    system: &HashMap<&str, EntityRef<'_>>,
    gold: &[EntityRef<'_>],
) -> Result<()> {
    let misaligned = |detail: String| MetricsError::Misaligned {
        doc_id: doc_id.to_string(),
        kind,
        detail,
    };
    if system.len() != gold.len() {
        return Err(misaligned(format!(
            "{} system vs {} gold entities",
            system.len(),
            gold.len()
        )));
    }
    for g in gold {
        match system.get(g.id()) {
            None => return Err(misaligned(format!("gold id `{}` missing from system", g.id()))),
            Some(s) if s.span() != g.span() => {
                return Err(misaligned(format!(
                    "`{}` has span {} in system but {} in gold",
                    g.id(),
                    s.span(),
                    g.span()
                )))
            }
            Some(_) => {}
        }
    }
    Ok(())
}

/// Verifies that system entities of `kind` carry the gold ids and spans.
pub fn check_entities_aligned(system: &Corpus, gold: &Corpus, kind: EntityKind) -> Result<()> {
    aligned_counts(system, gold, kind, |_, _| true).map(|_| ())
}

/// Span precision, recall and F1.
pub fn score_spans(system: &Corpus, gold: &Corpus, kind: EntityKind, mode: MatchMode) -> Result<PrfScore> {
    matched_counts(system, gold, kind, mode, |_, _| true)
}

fn score_agreement(
    system: &Corpus,
    gold: &Corpus,
    kind: EntityKind,
    attributes: &[Attribute],
    mode: MatchMode,
    form: ScoreForm,
) -> Result<Score> {
    if let Some(&attribute) = attributes.iter().find(|a| a.kind() != kind) {
        return Err(MetricsError::WrongKind { kind, attribute });
    }
    let agree = |s: EntityRef<'_>, g: EntityRef<'_>| attributes.iter().all(|a| a.agrees(s, g));
    Ok(match form {
        ScoreForm::Prf => Score::Prf(matched_counts(system, gold, kind, mode, agree)?),
        ScoreForm::Accuracy => Score::Accuracy(aligned_counts(system, gold, kind, agree)?),
    })
}

/// Score for a single attribute. In PRF form a matched pair is a true
/// positive when the attribute agrees; in accuracy form entities are
/// paired by id and must be aligned with gold.
pub fn score_attribute(
    system: &Corpus,
    gold: &Corpus,
    kind: EntityKind,
    attribute: Attribute,
    mode: MatchMode,
    form: ScoreForm,
) -> Result<Score> {
    score_agreement(system, gold, kind, &[attribute], mode, form)
}

/// An entity is correct only if every attribute of its kind is correct
/// (docTimeRel excluded).
pub fn score_all_attributes(
    system: &Corpus,
    gold: &Corpus,
    kind: EntityKind,
    mode: MatchMode,
    form: ScoreForm,
) -> Result<Score> {
    score_agreement(system, gold, kind, Attribute::overall(kind), mode, form)
}

pub fn score_doc_time_rel(system: &Corpus, gold: &Corpus, mode: MatchMode, form: ScoreForm) -> Result<Score> {
    score_attribute(system, gold, EntityKind::Event, Attribute::DocTimeRel, mode, form)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelationScoring {
    /// Relations as annotated.
    #[default]
    Plain,
    /// Both sets replaced by their transitive closure.
    BothClosed,
    /// Precision against closed gold, recall against closed system.
    Asymmetric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationScore {
    pub score: PrfScore,
    /// One entry per document whose system graph had a containment cycle.
    pub warnings: Vec<String>,
}

type EndpointKey = (EntityKind, Span);
type RelationKey = (EndpointKey, EndpointKey);

fn relation_keys(doc: &Document, graph: &RelationGraph) -> HashSet<RelationKey> {
    let index = doc.entity_index();
    graph
        .edges()
        .iter()
        .filter_map(|(a, b)| {
            let (a, b) = (index.get(a.as_str())?, index.get(b.as_str())?);
            Some(((a.kind(), a.span()), (b.kind(), b.span())))
        })
        .collect()
}

/// CONTAINS relation scoring. System and gold endpoints correspond when
/// they share kind and exact span; relations are compared as sets.
///
/// A containment cycle in gold is an error whenever closure is needed. A
/// cycle in the system graph is closed over its condensation and reported
/// in `warnings`.
pub fn score_relations(system: &Corpus, gold: &Corpus, scoring: RelationScoring) -> Result<RelationScore> {
    let (mut tp_p, mut tp_r, mut sys_n, mut gold_n) = (0, 0, 0, 0);
    let mut warnings = Vec::new();

    for (sys_doc, gold_doc) in align(system, gold)? {
        let fallback;
        let sys_doc = match sys_doc {
            Some(d) => d,
            None => {
                fallback = empty_like(gold_doc);
                &fallback
            }
        };
        let doc_id = gold_doc.doc_id.clone();
        let gold_graph = RelationGraph::from_document(gold_doc).map_err(|source| MetricsError::Gold {
            doc_id: doc_id.clone(),
            source,
        })?;
        let sys_graph = RelationGraph::from_document(sys_doc).map_err(|source| MetricsError::System {
            doc_id: doc_id.clone(),
            source,
        })?;

        let gold_plain = relation_keys(gold_doc, &gold_graph);
        let sys_plain = relation_keys(sys_doc, &sys_graph);
        if scoring == RelationScoring::Plain {
            tp_p += sys_plain.intersection(&gold_plain).count();
            tp_r = tp_p;
            sys_n += sys_plain.len();
            gold_n += gold_plain.len();
            continue;
        }

        let gold_closed = close_contains(&gold_graph).map_err(|source| MetricsError::Gold {
            doc_id: doc_id.clone(),
            source,
        })?;
        let (sys_closed, cycle) = close_contains_repairing(&sys_graph);
        if let Some(cycle) = cycle {
            warnings.push(format!(
                "document {doc_id}: system CONTAINS graph has {cycle}; closed over its condensation"
            ));
        }
        let gold_closed = relation_keys(gold_doc, &gold_closed);
        let sys_closed = relation_keys(sys_doc, &sys_closed);

        match scoring {
            RelationScoring::BothClosed => {
                let tp = sys_closed.intersection(&gold_closed).count();
                tp_p += tp;
                tp_r += tp;
                sys_n += sys_closed.len();
                gold_n += gold_closed.len();
            }
            RelationScoring::Asymmetric => {
                tp_p += sys_plain.intersection(&gold_closed).count();
                tp_r += gold_plain.intersection(&sys_closed).count();
                sys_n += sys_plain.len();
                gold_n += gold_plain.len();
            }
            RelationScoring::Plain => unreachable!(),
        }
    }

    Ok(RelationScore {
        score: PrfScore::asymmetric(tp_p, sys_n, tp_r, gold_n),
        warnings,
    })
}

/// Per-document `(tp, system, gold)` span counts, for callers that pool
/// scores themselves.
pub fn span_counts_by_document(
    system: &Corpus,
    gold: &Corpus,
    kind: EntityKind,
    mode: MatchMode,
) -> Result<BTreeMap<String, (usize, usize, usize)>> {
    let mut out = BTreeMap::new();
    for (sys_doc, gold_doc) in align(system, gold)? {
        let single_gold = Corpus::new(vec![gold_doc.clone()]);
        let single_sys = Corpus::new(sys_doc.into_iter().cloned().collect());
        let s = score_spans(&single_sys, &single_gold, kind, mode)?;
        out.insert(gold_doc.doc_id.clone(), (s.true_positives, s.system_count, s.gold_count));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::{date, event, timex};
    use crate::model::{ContainerRelation, DocTimeRel, Modality, Polarity};

    const EPS: f64 = 1e-12;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < EPS
    }

    fn doc_with_events(id: &str, spans: &[(usize, usize)]) -> Document {
        let mut d = Document::new(id, "p", date(), "x".repeat(200));
        for (i, &(b, e)) in spans.iter().enumerate() {
            d.events.push(event(&format!("E{i}"), b, e));
        }
        d
    }

    #[test]
    fn prf_examples() {
        let s = prf(2, 3, 3);
        assert!(close(s.precision, 2.0 / 3.0) && close(s.recall, 2.0 / 3.0) && close(s.f1, 2.0 / 3.0));
        let s = prf(7, 7, 7);
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        let s = prf(0, 0, 5);
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
        let s = prf(0, 0, 0);
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        let s = prf(0, 4, 0);
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    #[should_panic]
    fn prf_rejects_impossible_counts() {
        prf(4, 3, 5);
    }

    #[test]
    fn exact_and_overlap_matching() {
        let sys = doc_with_events("d", &[(5, 9)]);
        let gold = doc_with_events("d", &[(5, 9)]);
        assert_eq!(match_entities(&sys, &gold, EntityKind::Event, MatchMode::Exact).unwrap(), vec![(0, 0)]);

        let gold = doc_with_events("d", &[(7, 12)]);
        assert!(match_entities(&sys, &gold, EntityKind::Event, MatchMode::Exact).unwrap().is_empty());
        assert_eq!(match_entities(&sys, &gold, EntityKind::Event, MatchMode::Overlap).unwrap(), vec![(0, 0)]);
    }

    #[test]
    fn overlap_prefers_longer_overlap() {
        // [0,4)∩[2,6) = 2 chars, [3,8)∩[2,6) = 3 chars
        let sys = doc_with_events("d", &[(0, 4), (3, 8)]);
        let gold = doc_with_events("d", &[(2, 6)]);
        let pairs = match_entities(&sys, &gold, EntityKind::Event, MatchMode::Overlap).unwrap();
        assert_eq!(pairs, vec![(1, 0)]);
    }

    #[test]
    fn mismatched_documents() {
        let sys = doc_with_events("a", &[]);
        let gold = doc_with_events("b", &[]);
        assert!(matches!(
            match_entities(&sys, &gold, EntityKind::Event, MatchMode::Exact),
            Err(MetricsError::DocMismatch { .. })
        ));
    }

    #[test]
    fn micro_average_pools_counts() {
        // doc a: (tp, sys, gold) = (2, 3, 3); doc b: (1, 2, 1)
        let gold = Corpus::new(vec![
            doc_with_events("a", &[(0, 2), (3, 5), (6, 8)]),
            doc_with_events("b", &[(0, 2)]),
        ]);
        let sys = Corpus::new(vec![
            doc_with_events("a", &[(0, 2), (3, 5), (10, 12)]),
            doc_with_events("b", &[(0, 2), (4, 6)]),
        ]);
        let s = score_spans(&sys, &gold, EntityKind::Event, MatchMode::Exact).unwrap();
        assert_eq!((s.true_positives, s.system_count, s.gold_count), (3, 5, 4));
        assert!(close(s.precision, 0.6) && close(s.recall, 0.75) && close(s.f1, 2.0 / 3.0));
        let per_doc = span_counts_by_document(&sys, &gold, EntityKind::Event, MatchMode::Exact).unwrap();
        assert_eq!(per_doc["a"], (2, 3, 3));
        assert_eq!(per_doc["b"], (1, 2, 1));
    }

    #[test]
    fn empty_system_and_unknown_docs() {
        let gold = Corpus::new(vec![doc_with_events("a", &[(0, 2)])]);
        let s = score_spans(&Corpus::default(), &gold, EntityKind::Event, MatchMode::Exact).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
        let stray = Corpus::new(vec![doc_with_events("zz", &[])]);
        assert_eq!(
            score_spans(&stray, &gold, EntityKind::Event, MatchMode::Exact),
            Err(MetricsError::UnknownSystemDoc("zz".into()))
        );
    }

    #[test]
    fn attribute_prf_hand_computed() {
        // 4 system events, 5 gold, 3 matched, 2 of those agree on modality
        let gold = doc_with_events("d", &[(0, 2), (3, 5), (6, 8), (9, 11), (12, 14)]);
        let mut sys = doc_with_events("d", &[(0, 2), (3, 5), (6, 8), (20, 22)]);
        sys.events[2].modality = Modality::Hedged;
        let (sys, gold) = (Corpus::new(vec![sys]), Corpus::new(vec![gold]));
        let s = score_attribute(&sys, &gold, EntityKind::Event, Attribute::Modality, MatchMode::Exact, ScoreForm::Prf)
            .unwrap();
        let s = s.as_prf().unwrap();
        assert!(close(s.precision, 0.5) && close(s.recall, 0.4) && close(s.f1, 4.0 / 9.0));
    }

    #[test]
    fn attribute_equal_on_all_pairs_matches_span_score() {
        let gold = Corpus::new(vec![doc_with_events("d", &[(0, 2), (3, 5), (6, 8)])]);
        let sys = Corpus::new(vec![doc_with_events("d", &[(0, 2), (3, 5), (9, 12)])]);
        let span = score_spans(&sys, &gold, EntityKind::Event, MatchMode::Exact).unwrap();
        let pol = score_attribute(&sys, &gold, EntityKind::Event, Attribute::Polarity, MatchMode::Exact, ScoreForm::Prf)
            .unwrap();
        assert_eq!(pol, Score::Prf(span));
    }

    #[test]
    fn accuracy_form() {
        let spans: Vec<(usize, usize)> = (0..10).map(|i| (i * 3, i * 3 + 2)).collect();
        let gold = doc_with_events("d", &spans);
        let mut sys = gold.clone();
        for e in sys.events.iter_mut().take(3) {
            e.modality = Modality::Generic;
        }
        let (sys, gold) = (Corpus::new(vec![sys]), Corpus::new(vec![gold]));
        let s = score_attribute(&sys, &gold, EntityKind::Event, Attribute::Modality, MatchMode::Exact, ScoreForm::Accuracy)
            .unwrap();
        assert_eq!(s, Score::Accuracy(accuracy(7, 10)));
        assert!(close(s.headline(), 0.7));
    }

    #[test]
    fn accuracy_requires_alignment() {
        let gold = Corpus::new(vec![doc_with_events("d", &[(0, 2), (3, 5)])]);
        let sys = Corpus::new(vec![doc_with_events("d", &[(0, 2), (3, 6)])]);
        assert!(matches!(
            score_doc_time_rel(&sys, &gold, MatchMode::Exact, ScoreForm::Accuracy),
            Err(MetricsError::Misaligned { .. })
        ));
        let sys = Corpus::new(vec![doc_with_events("d", &[(0, 2)])]);
        assert!(matches!(
            score_doc_time_rel(&sys, &gold, MatchMode::Exact, ScoreForm::Accuracy),
            Err(MetricsError::Misaligned { .. })
        ));
    }

    #[test]
    fn doc_time_rel_accuracy_hand_count() {
        use DocTimeRel::*;
        let spans: Vec<(usize, usize)> = (0..5).map(|i| (i * 3, i * 3 + 2)).collect();
        let mut gold = doc_with_events("d", &spans);
        let mut sys = gold.clone();
        for (e, l) in sys.events.iter_mut().zip([Before, Before, Overlap, After, Before]) {
            e.doc_time_rel = l;
        }
        for (e, l) in gold.events.iter_mut().zip([Before, Overlap, Overlap, After, After]) {
            e.doc_time_rel = l;
        }
        let s = score_doc_time_rel(&Corpus::new(vec![sys]), &Corpus::new(vec![gold]), MatchMode::Exact, ScoreForm::Accuracy)
            .unwrap();
        assert_eq!(s, Score::Accuracy(accuracy(3, 5)));
    }

    #[test]
    fn all_wrong_doc_time_rel() {
        let gold = doc_with_events("d", &[(0, 2), (3, 5)]);
        let mut sys = gold.clone();
        for e in &mut sys.events {
            e.doc_time_rel = DocTimeRel::Overlap;
        }
        let s = score_doc_time_rel(&Corpus::new(vec![sys]), &Corpus::new(vec![gold]), MatchMode::Exact, ScoreForm::Accuracy)
            .unwrap();
        assert_eq!(s.headline(), 0.0);
    }

    #[test]
    fn overall_requires_every_attribute() {
        let gold = doc_with_events("d", &[(0, 2)]);
        let mut sys = gold.clone();
        sys.events[0].degree = crate::model::Degree::Most;
        let (sys, gold) = (Corpus::new(vec![sys]), Corpus::new(vec![gold]));
        let s = score_all_attributes(&sys, &gold, EntityKind::Event, MatchMode::Exact, ScoreForm::Prf).unwrap();
        assert_eq!(s.as_prf().unwrap().true_positives, 0);
    }

    #[test]
    fn overall_bounded_by_weakest_attribute() {
        // 10 shared events; per-attribute agreement 8, 9, 7, 9
        let spans: Vec<(usize, usize)> = (0..10).map(|i| (i * 3, i * 3 + 2)).collect();
        let gold = doc_with_events("d", &spans);
        let mut sys = gold.clone();
        sys.events[0].event_type = crate::model::EventType::Aspectual;
        sys.events[1].event_type = crate::model::EventType::Aspectual;
        sys.events[2].polarity = Polarity::Neg;
        for i in [3, 4, 5] {
            sys.events[i].degree = crate::model::Degree::Little;
        }
        sys.events[6].modality = Modality::Hedged;
        let (sys, gold) = (Corpus::new(vec![sys]), Corpus::new(vec![gold]));
        let f1 = |a| {
            score_attribute(&sys, &gold, EntityKind::Event, a, MatchMode::Exact, ScoreForm::Prf)
                .unwrap()
                .headline()
        };
        let per = [f1(Attribute::EventType), f1(Attribute::Polarity), f1(Attribute::Degree), f1(Attribute::Modality)];
        assert!(close(per[0], 0.8) && close(per[1], 0.9) && close(per[2], 0.7) && close(per[3], 0.9));
        let overall = score_all_attributes(&sys, &gold, EntityKind::Event, MatchMode::Exact, ScoreForm::Prf)
            .unwrap()
            .headline();
        assert!(overall <= 0.7 + EPS);
        assert!(close(overall, 0.3));
    }

    #[test]
    fn unknown_attribute_names() {
        assert!(Attribute::parse(EntityKind::Timex, "polarity").is_err());
        assert!(Attribute::parse(EntityKind::Event, "value").is_err());
        assert_eq!(Attribute::parse(EntityKind::Event, "docTimeRel").unwrap(), Attribute::DocTimeRel);
        let c = Corpus::default();
        assert!(matches!(
            score_attribute(&c, &c, EntityKind::Timex, Attribute::Polarity, MatchMode::Exact, ScoreForm::Prf),
            Err(MetricsError::WrongKind { .. })
        ));
    }

    #[test]
    fn timex_values() {
        let mut gold = Document::new("d", "p", date(), "x".repeat(40));
        gold.timexes.push(timex("T1", 0, 3));
        gold.timexes.push(TimexEntityExt::no_value(timex("T2", 5, 8)));
        let mut sys = gold.clone();
        sys.timexes[0].value = None;
        let (sys, gold) = (Corpus::new(vec![sys]), Corpus::new(vec![gold]));
        let s = score_attribute(&sys, &gold, EntityKind::Timex, Attribute::TimexValue, MatchMode::Exact, ScoreForm::Prf)
            .unwrap();
        // absent never matches present; absent matches absent
        assert_eq!(s.as_prf().unwrap().true_positives, 1);
    }

    trait TimexEntityExt {
        fn no_value(self) -> Self;
    }

    impl TimexEntityExt for crate::model::TimexEntity {
        fn no_value(mut self) -> Self {
            self.value = None;
            self
        }
    }

    fn chain_doc(relations: &[(&str, &str)]) -> Document {
        let mut d = Document::new("d", "p", date(), "x".repeat(40));
        d.events.push(event("A", 0, 2));
        d.events.push(event("B", 3, 5));
        d.events.push(event("C", 6, 8));
        d.relations = relations.iter().map(|&(a, b)| ContainerRelation::new(a, b)).collect();
        d
    }

    #[test]
    fn relations_identity() {
        let gold = Corpus::new(vec![chain_doc(&[("A", "B"), ("B", "C")])]);
        for mode in [RelationScoring::Plain, RelationScoring::BothClosed, RelationScoring::Asymmetric] {
            let s = score_relations(&gold, &gold, mode).unwrap().score;
            assert_eq!(s.f1, 1.0);
        }
        let closed = score_relations(&gold, &gold, RelationScoring::BothClosed).unwrap().score;
        assert_eq!(closed.gold_count, 3);
    }

    #[test]
    fn closure_based_worked_example() {
        let gold = Corpus::new(vec![chain_doc(&[("A", "B"), ("B", "C")])]);
        let sys = Corpus::new(vec![chain_doc(&[("A", "C")])]);
        let plain = score_relations(&sys, &gold, RelationScoring::Plain).unwrap().score;
        assert_eq!((plain.true_positives, plain.f1), (0, 0.0));
        let closed = score_relations(&sys, &gold, RelationScoring::BothClosed).unwrap().score;
        assert_eq!((closed.true_positives, closed.system_count, closed.gold_count), (1, 1, 3));
        assert_eq!(closed.precision, 1.0);
        assert!(close(closed.recall, 1.0 / 3.0));
        assert!(close(closed.f1, 0.5));
        // asymmetric: A→C is implied by closed gold; neither gold edge by closed system
        let asym = score_relations(&sys, &gold, RelationScoring::Asymmetric).unwrap().score;
        assert_eq!((asym.precision, asym.recall), (1.0, 0.0));
    }

    #[test]
    fn empty_system_relations() {
        let gold = Corpus::new(vec![chain_doc(&[("A", "B")])]);
        let sys = Corpus::new(vec![chain_doc(&[])]);
        for mode in [RelationScoring::Plain, RelationScoring::BothClosed] {
            let s = score_relations(&sys, &gold, mode).unwrap().score;
            assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn relation_endpoints_correspond_by_span() {
        let gold = Corpus::new(vec![chain_doc(&[("A", "B")])]);
        let mut renamed = chain_doc(&[]);
        for e in &mut renamed.events {
            e.id = format!("sys_{}", e.id);
        }
        renamed.relations.push(ContainerRelation::new("sys_A", "sys_B"));
        let s = score_relations(&Corpus::new(vec![renamed]), &gold, RelationScoring::Plain).unwrap().score;
        assert_eq!(s.f1, 1.0);
    }

    #[test]
    fn cycles() {
        let cyclic = Corpus::new(vec![chain_doc(&[("A", "B"), ("B", "A")])]);
        let gold = Corpus::new(vec![chain_doc(&[("A", "B")])]);
        let s = score_relations(&cyclic, &gold, RelationScoring::BothClosed).unwrap();
        assert_eq!(s.warnings.len(), 1);
        assert_eq!((s.score.true_positives, s.score.system_count), (1, 2));
        assert!(matches!(
            score_relations(&gold, &cyclic, RelationScoring::BothClosed),
            Err(MetricsError::Gold { .. })
        ));
        // plain scoring never closes, so a cyclic gold is tolerated there
        assert!(score_relations(&gold, &cyclic, RelationScoring::Plain).is_ok());
    }

    proptest::proptest! {
        #[test]
        fn prf_is_bounded(sys in 0usize..50, gold in 0usize..50, tp in 0usize..50) {
            let tp = tp.min(sys).min(gold);
            let s = prf(tp, sys, gold);
            for v in [s.precision, s.recall, s.f1] {
                proptest::prop_assert!((0.0..=1.0).contains(&v));
            }
            proptest::prop_assert!(s.f1 <= s.precision.max(s.recall) + 1e-12);
            proptest::prop_assert!(s.f1 + 1e-12 >= s.precision.min(s.recall));
        }

        #[test]
        fn f1_monotone_in_true_positives(sys in 1usize..50, gold in 1usize..50, tp in 0usize..49) {
            let hi = (tp + 1).min(sys).min(gold);
            let lo = hi.saturating_sub(1);
            proptest::prop_assert!(prf(lo, sys, gold).f1 <= prf(hi, sys, gold).f1);
        }
    }
}
