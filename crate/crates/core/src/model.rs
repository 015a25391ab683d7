//! Annotation data model: spans, time expressions, events, container
//! relations, documents and corpora, plus structural validation.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("unknown entity id `{0}`")]
    UnknownId(String),
    #[error("`{value}` is not a valid {vocabulary} value")]
    UnknownLabel {
        vocabulary: &'static str,
        value: String,
    },
}

/// Half-open character-offset interval `[begin, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub begin: usize,
    pub end: usize,
}

impl Span {
    pub const fn new(begin: usize, end: usize) -> Self {
        Self { begin, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.begin)
    }

    pub fn is_empty(&self) -> bool {
        self.begin >= self.end
    }

    /// Number of characters shared by the two spans.
    pub fn overlap(&self, other: &Span) -> usize {
        self.end.min(other.end).saturating_sub(self.begin.max(other.begin))
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.overlap(other) > 0
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.begin <= other.begin && other.end <= self.end
    }

    /// Distance between the nearest edges; zero when the spans overlap or touch.
    pub fn gap(&self, other: &Span) -> usize {
        other
            .begin
            .saturating_sub(self.end)
            .max(self.begin.saturating_sub(other.end))
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{})", self.begin, self.end)
    }
}

macro_rules! vocabulary {
    (
        $(#[$meta:meta])*
        $name:ident, $label:literal {
            $($variant:ident => $text:literal $(| $alias:literal)*),+ $(,)?
        }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(
                #[serde(rename = $text)]
                $variant,
            )+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(&self) -> &'static str {
                match self {
                    $($name::$variant => $text,)+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = ModelError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text $(| $alias)* => Ok($name::$variant),)+
                    _ => Err(ModelError::UnknownLabel {
                        vocabulary: $label,
                        value: s.to_string(),
                    }),
                }
            }
        }
    };
}

vocabulary!(
    /// TIMEX3 type.
    TimexType, "timex type" {
        Date => "DATE",
        Time => "TIME",
        Duration => "DURATION",
        Quantifier => "QUANTIFIER",
        Prepostexp => "PREPOSTEXP",
        Set => "SET",
    }
);

vocabulary!(
    EventType, "event type" {
        Na => "NA" | "N/A",
        Aspectual => "ASPECTUAL",
        Evidential => "EVIDENTIAL",
    }
);

vocabulary!(
    Polarity, "polarity" {
        Pos => "POS",
        Neg => "NEG",
    }
);

vocabulary!(
    Degree, "degree" {
        Na => "NA" | "N/A",
        Most => "MOST",
        Little => "LITTLE",
    }
);

vocabulary!(
    Modality, "modality" {
        Actual => "ACTUAL",
        Hedged => "HEDGED",
        Hypothetical => "HYPOTHETICAL",
        Generic => "GENERIC",
    }
);

vocabulary!(
    /// Relation of an event to the document creation time. Declaration
    /// order doubles as the majority-class tie order.
    DocTimeRel, "docTimeRel" {
        Before => "BEFORE",
        Overlap => "OVERLAP",
        After => "AFTER",
        BeforeOrOverlap => "BEFORE-OR-OVERLAP" | "BEFORE_OR_OVERLAP",
    }
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EntityKind {
    #[serde(rename = "timex")]
    Timex,
    #[serde(rename = "event")]
    Event,
}

impl EntityKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EntityKind::Timex => "timex",
            EntityKind::Event => "event",
        }
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "timex" | "TIMEX" => Ok(EntityKind::Timex),
            "event" | "EVENT" => Ok(EntityKind::Event),
            _ => Err(ModelError::UnknownLabel {
                vocabulary: "entity kind",
                value: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimexEntity {
    pub id: String,
    pub span: Span,
    pub timex_type: TimexType,
    /// Opaque TIMEX3 value; `None` when the producer emitted no value.
    pub value: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventEntity {
    pub id: String,
    pub span: Span,
    pub event_type: EventType,
    pub polarity: Polarity,
    pub degree: Degree,
    pub modality: Modality,
    pub doc_time_rel: DocTimeRel,
}

/// `source` CONTAINS `target`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ContainerRelation {
    pub source: String,
    pub target: String,
}

impl ContainerRelation {
    pub const LABEL: &'static str = "CONTAINS";

    pub fn new(source: impl Into<String>, target: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            target: target.into(),
        }
    }
}

/// Borrowed view of an entity of either kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntityRef<'a> {
    Timex(&'a TimexEntity),
    Event(&'a EventEntity),
}

impl<'a> EntityRef<'a> {
    pub fn id(&self) -> &'a str {
        match self {
            EntityRef::Timex(t) => &t.id,
            EntityRef::Event(e) => &e.id,
        }
    }

    pub fn span(&self) -> Span {
        match self {
            EntityRef::Timex(t) => t.span,
            EntityRef::Event(e) => e.span,
        }
    }

    pub fn kind(&self) -> EntityKind {
        match self {
            EntityRef::Timex(_) => EntityKind::Timex,
            EntityRef::Event(_) => EntityKind::Event,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub patient_id: String,
    pub text: String,
    /// Document creation time (date only).
    pub dct: NaiveDate,
    pub sentences: Vec<Span>,
    pub timexes: Vec<TimexEntity>,
    pub events: Vec<EventEntity>,
    pub relations: Vec<ContainerRelation>,
}

impl Document {
    /// An unannotated document.
    pub fn new(
        doc_id: impl Into<String>,
        patient_id: impl Into<String>,
        dct: NaiveDate,
        text: impl Into<String>,
    ) -> Self {
        Self {
            doc_id: doc_id.into(),
            patient_id: patient_id.into(),
            text: text.into(),
            dct,
            sentences: Vec::new(),
            timexes: Vec::new(),
            events: Vec::new(),
            relations: Vec::new(),
        }
    }

    /// Length of the text in characters.
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    pub fn entity_by_id(&self, id: &str) -> Result<EntityRef<'_>, ModelError> {
        if let Some(t) = self.timexes.iter().find(|t| t.id == id) {
            return Ok(EntityRef::Timex(t));
        }
        self.events
            .iter()
            .find(|e| e.id == id)
            .map(EntityRef::Event)
            .ok_or_else(|| ModelError::UnknownId(id.to_string()))
    }

    /// Map from id to entity for repeated lookups.
    pub fn entity_index(&self) -> HashMap<&str, EntityRef<'_>> {
        let mut index = HashMap::with_capacity(self.timexes.len() + self.events.len());
        for t in &self.timexes {
            index.entry(t.id.as_str()).or_insert(EntityRef::Timex(t));
        }
        for e in &self.events {
            index.entry(e.id.as_str()).or_insert(EntityRef::Event(e));
        }
        index
    }

    /// Same document with annotations removed.
    pub fn without_annotations(&self) -> Document {
        Document {
            timexes: Vec::new(),
            events: Vec::new(),
            relations: Vec::new(),
            ..self.clone()
        }
    }

    /// Sort sentences, entities and relations into the order used on disk.
    pub fn canonicalize(&mut self) {
        self.sentences.sort();
        self.timexes.sort_by(|a, b| (a.span, &a.id).cmp(&(b.span, &b.id)));
        self.events.sort_by(|a, b| (a.span, &a.id).cmp(&(b.span, &b.id)));
        self.relations.sort();
    }

    pub fn canonical(&self) -> Document {
        let mut doc = self.clone();
        doc.canonicalize();
        doc
    }
}

/// Byte offsets of every character of a text, for char-offset slicing.
pub struct TextIndex<'a> {
    text: &'a str,
    offsets: Vec<usize>,
}

impl<'a> TextIndex<'a> {
    pub fn new(text: &'a str) -> Self {
        let mut offsets: Vec<usize> = text.char_indices().map(|(i, _)| i).collect();
        offsets.push(text.len());
        Self { text, offsets }
    }

    pub fn char_len(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Text covered by `span`, or `None` when the span is out of bounds.
    pub fn slice(&self, span: Span) -> Option<&'a str> {
        if span.begin > span.end || span.end > self.char_len() {
            return None;
        }
        Some(&self.text[self.offsets[span.begin]..self.offsets[span.end]])
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub documents: Vec<Document>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Self {
        Self { documents }
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.doc_id == doc_id)
    }

    pub fn by_id(&self) -> BTreeMap<&str, &Document> {
        self.documents.iter().map(|d| (d.doc_id.as_str(), d)).collect()
    }

    pub fn canonicalize(&mut self) {
        self.documents.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        for doc in &mut self.documents {
            doc.canonicalize();
        }
    }

    pub fn canonical(&self) -> Corpus {
        let mut corpus = self.clone();
        corpus.canonicalize();
        corpus
    }

    pub fn patient_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.documents.iter().map(|d| d.patient_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn event_count(&self) -> usize {
        self.documents.iter().map(|d| d.events.len()).sum()
    }

    pub fn timex_count(&self) -> usize {
        self.documents.iter().map(|d| d.timexes.len()).sum()
    }

    pub fn relation_count(&self) -> usize {
        self.documents.iter().map(|d| d.relations.len()).sum()
    }

    /// Every violation in the corpus, keyed by document id, plus
    /// duplicate doc ids (reported under the duplicated id).
    pub fn validate(&self) -> Vec<(String, Violation)> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for doc in &self.documents {
            if !seen.insert(doc.doc_id.as_str()) {
                out.push((
                    doc.doc_id.clone(),
                    Violation::new(&doc.doc_id, Rule::DuplicateDocId),
                ));
            }
            out.extend(
                validate_document(doc)
                    .into_iter()
                    .map(|v| (doc.doc_id.clone(), v)),
            );
        }
        out
    }
}

/// A broken structural rule and the id of the item that breaks it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub subject: String,
    pub rule: Rule,
}

impl Violation {
    fn new(subject: impl Into<String>, rule: Rule) -> Self {
        Self {
            subject: subject.into(),
            rule,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.rule)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    EmptySpan(Span),
    SpanOutOfBounds { span: Span, text_len: usize },
    MalformedId,
    DuplicateId,
    DuplicateDocId,
    DuplicateSpan { kind: EntityKind, other: String },
    SentenceOverlap { previous: Span, span: Span },
    UnrepresentableValue(String),
    SelfContainment,
    UnknownEndpoint(String),
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::EmptySpan(span) => write!(f, "span {span} is empty"),
            Rule::SpanOutOfBounds { span, text_len } => {
                write!(f, "span {span} exceeds text length {text_len}")
            }
            Rule::MalformedId => f.write_str("id is empty or contains whitespace"),
            Rule::DuplicateId => f.write_str("id is not unique in the document"),
            Rule::DuplicateDocId => f.write_str("doc id is not unique in the corpus"),
            Rule::DuplicateSpan { kind, other } => {
                write!(f, "{kind} span duplicates that of `{other}`")
            }
            Rule::SentenceOverlap { previous, span } => {
                write!(f, "sentence {span} overlaps or precedes sentence {previous}")
            }
            Rule::UnrepresentableValue(v) => write!(f, "timex value `{v}` is not representable"),
            Rule::SelfContainment => f.write_str("relation source equals target"),
            Rule::UnknownEndpoint(id) => write!(f, "relation endpoint `{id}` is undefined"),
        }
    }
}

fn is_valid_id(id: &str) -> bool {
    !id.is_empty() && !id.chars().any(char::is_whitespace)
}

fn check_span(subject: &str, span: Span, text_len: usize, out: &mut Vec<Violation>) {
    if span.is_empty() {
        out.push(Violation::new(subject, Rule::EmptySpan(span)));
    } else if span.end > text_len {
        out.push(Violation::new(
            subject,
            Rule::SpanOutOfBounds { span, text_len },
        ));
    }
}

/// All structural violations of a document; empty iff well-formed.
pub fn validate_document(doc: &Document) -> Vec<Violation> {
    let mut out = Vec::new();
    let text_len = doc.char_len();

    for id in [&doc.doc_id, &doc.patient_id] {
        if !is_valid_id(id) {
            out.push(Violation::new(id.as_str(), Rule::MalformedId));
        }
    }

    let mut previous: Option<Span> = None;
    for (i, &span) in doc.sentences.iter().enumerate() {
        let subject = format!("sentence#{i}");
        check_span(&subject, span, text_len, &mut out);
        if let Some(prev) = previous {
            if span.begin < prev.end {
                out.push(Violation::new(
                    subject,
                    Rule::SentenceOverlap {
                        previous: prev,
                        span,
                    },
                ));
            }
        }
        previous = Some(span);
    }

    let mut ids: HashSet<&str> = HashSet::new();
    let mut timex_spans: HashMap<Span, &str> = HashMap::new();
    for t in &doc.timexes {
        if !is_valid_id(&t.id) {
            out.push(Violation::new(&t.id, Rule::MalformedId));
        }
        if !ids.insert(&t.id) {
            out.push(Violation::new(&t.id, Rule::DuplicateId));
        }
        check_span(&t.id, t.span, text_len, &mut out);
        if let Some(other) = timex_spans.insert(t.span, &t.id) {
            out.push(Violation::new(
                &t.id,
                Rule::DuplicateSpan {
                    kind: EntityKind::Timex,
                    other: other.to_string(),
                },
            ));
        }
        if let Some(v) = &t.value {
            if v.is_empty() || v == "-" || v.chars().any(char::is_whitespace) {
                out.push(Violation::new(&t.id, Rule::UnrepresentableValue(v.clone())));
            }
        }
    }

    let mut event_spans: HashMap<Span, &str> = HashMap::new();
    for e in &doc.events {
        if !is_valid_id(&e.id) {
            out.push(Violation::new(&e.id, Rule::MalformedId));
        }
        if !ids.insert(&e.id) {
            out.push(Violation::new(&e.id, Rule::DuplicateId));
        }
        check_span(&e.id, e.span, text_len, &mut out);
        if let Some(other) = event_spans.insert(e.span, &e.id) {
            out.push(Violation::new(
                &e.id,
                Rule::DuplicateSpan {
                    kind: EntityKind::Event,
                    other: other.to_string(),
                },
            ));
        }
    }

    for r in &doc.relations {
        let subject = format!("{} {} {}", r.source, ContainerRelation::LABEL, r.target);
        if r.source == r.target {
            out.push(Violation::new(&subject, Rule::SelfContainment));
        }
        for endpoint in [&r.source, &r.target] {
            if !ids.contains(endpoint.as_str()) {
                out.push(Violation::new(
                    &subject,
                    Rule::UnknownEndpoint(endpoint.clone()),
                ));
            }
        }
    }

    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2013, 5, 14).unwrap()
    }

    pub(crate) fn timex(id: &str, begin: usize, end: usize) -> TimexEntity {
        TimexEntity {
            id: id.into(),
            span: Span::new(begin, end),
            timex_type: TimexType::Date,
            value: Some("2013-05-01".into()),
        }
    }

    pub(crate) fn event(id: &str, begin: usize, end: usize) -> EventEntity {
        EventEntity {
            id: id.into(),
            span: Span::new(begin, end),
            event_type: EventType::Na,
            polarity: Polarity::Pos,
            degree: Degree::Na,
            modality: Modality::Actual,
            doc_time_rel: DocTimeRel::Before,
        }
    }

    fn well_formed() -> Document {
        let mut doc = Document::new("d1", "p1", date(), "On May 1 a colonoscopy was done.");
        doc.sentences.push(Span::new(0, 32));
        doc.timexes.push(timex("T1", 3, 8));
        doc.events.push(event("E1", 11, 22));
        doc.relations.push(ContainerRelation::new("T1", "E1"));
        doc
    }

    #[test]
    fn well_formed_document_has_no_violations() {
        assert!(validate_document(&well_formed()).is_empty());
    }

    #[test]
    fn undefined_relation_target_is_named() {
        let mut doc = well_formed();
        doc.relations.push(ContainerRelation::new("T1", "E9"));
        let v = validate_document(&doc);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::UnknownEndpoint("E9".into()));
        assert!(v[0].to_string().contains("E9"));
    }

    #[test]
    fn span_past_end_of_text() {
        let mut doc = Document::new("d1", "p1", date(), "0123456789");
        doc.events.push(event("E1", 8, 12));
        let v = validate_document(&doc);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].subject, "E1");
        assert_eq!(
            v[0].rule,
            Rule::SpanOutOfBounds {
                span: Span::new(8, 12),
                text_len: 10
            }
        );
    }

    #[test]
    fn structural_rules() {
        let mut doc = well_formed();
        doc.events.push(event("T1", 11, 22));
        doc.relations.push(ContainerRelation::new("E1", "E1"));
        doc.sentences.push(Span::new(20, 25));
        doc.timexes.push(TimexEntity {
            value: Some("two words".into()),
            ..timex("T2", 5, 5)
        });
        let rules: Vec<Rule> = validate_document(&doc).into_iter().map(|v| v.rule).collect();
        assert!(rules.contains(&Rule::DuplicateId));
        assert!(rules.contains(&Rule::SelfContainment));
        assert!(rules.contains(&Rule::EmptySpan(Span::new(5, 5))));
        assert!(rules.contains(&Rule::UnrepresentableValue("two words".into())));
        assert!(rules
            .iter()
            .any(|r| matches!(r, Rule::DuplicateSpan { kind: EntityKind::Event, .. })));
        assert!(rules
            .iter()
            .any(|r| matches!(r, Rule::SentenceOverlap { .. })));
    }

    #[test]
    fn timex_and_event_may_share_a_span() {
        let mut doc = well_formed();
        doc.events.push(event("E2", 3, 8));
        assert!(validate_document(&doc).is_empty());
    }

    #[test]
    fn offsets_are_characters() {
        let mut doc = Document::new("d1", "p1", date(), "Ödem über");
        doc.events.push(event("E1", 5, 9));
        assert!(validate_document(&doc).is_empty());
        let index = TextIndex::new(&doc.text);
        assert_eq!(index.slice(Span::new(5, 9)), Some("über"));
        assert_eq!(index.slice(Span::new(5, 10)), None);
    }

    #[test]
    fn entity_lookup() {
        let doc = well_formed();
        assert!(matches!(doc.entity_by_id("E1"), Ok(EntityRef::Event(e)) if e.span == Span::new(11, 22)));
        assert!(matches!(doc.entity_by_id("T1"), Ok(EntityRef::Timex(t)) if t.span == Span::new(3, 8)));
        assert_eq!(
            doc.entity_by_id("X"),
            Err(ModelError::UnknownId("X".into()))
        );
    }

    #[test]
    fn vocabularies_round_trip() {
        let names: Vec<&str> = TimexType::ALL.iter().map(|t| t.as_str()).collect();
        assert_eq!(
            names,
            ["DATE", "TIME", "DURATION", "QUANTIFIER", "PREPOSTEXP", "SET"]
        );
        let names: Vec<&str> = DocTimeRel::ALL.iter().map(|t| t.as_str()).collect();
        assert_eq!(names, ["BEFORE", "OVERLAP", "AFTER", "BEFORE-OR-OVERLAP"]);
        assert_eq!("N/A".parse::<Degree>(), Ok(Degree::Na));
        assert_eq!(Degree::Na.to_string(), "NA");
        assert!("na".parse::<EventType>().is_err());
        assert!("UNKNOWN".parse::<Modality>().is_err());
    }

    #[test]
    fn span_geometry() {
        let a = Span::new(40, 48);
        assert_eq!(a.gap(&Span::new(10, 20)), 20);
        assert_eq!(a.gap(&Span::new(52, 60)), 4);
        assert_eq!(a.gap(&Span::new(45, 60)), 0);
        assert_eq!(Span::new(0, 4).overlap(&Span::new(2, 6)), 2);
        assert_eq!(Span::new(0, 4).overlap(&Span::new(4, 6)), 0);
    }

    #[test]
    fn corpus_rejects_duplicate_doc_ids() {
        let corpus = Corpus::new(vec![well_formed(), well_formed()]);
        let v = corpus.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].1.rule, Rule::DuplicateDocId);
    }
}
