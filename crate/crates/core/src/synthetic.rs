//! Deterministic synthetic corpora with clinical-note-like annotation
//! densities.
//!
//! Text is built from invented surface tokens (entities) interleaved with
//! a fixed set of English filler words. Entity tokens never coincide with
//! filler words or with each other's tokens, so with
//! `unambiguous_surfaces` every occurrence of a surface in the text is an
//! annotated entity carrying the same kind and attributes everywhere.

use std::collections::HashSet;

use chrono::{Days, NaiveDate};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{
    ContainerRelation, Corpus, Degree, DocTimeRel, Document, EventEntity, EventType, Modality,
    Polarity, Span, TimexEntity, TimexType,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("{0} range is empty (min > max)")]
    EmptyRange(&'static str),
    #[error("relation density {0} is outside [0, 1]")]
    Density(f64),
}

/// Inclusive count range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountRange {
    pub min: usize,
    pub max: usize,
}

impl CountRange {
    pub const fn new(min: usize, max: usize) -> Self {
        Self { min, max }
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        rng.random_range(self.min..=self.max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub n_patients: usize,
    pub notes_per_patient: CountRange,
    pub events_per_note: CountRange,
    pub timexes_per_note: CountRange,
    /// Fraction of events placed inside a container.
    pub relation_density: f64,
    pub unambiguous_surfaces: bool,
    pub seed: u64,
}

impl GeneratorConfig {
    /// Sized like the annotated clinical corpus: 87 patients, ~232 notes,
    /// ~30k events, ~2.5k times, ~9k container relations.
    pub fn calibrated(seed: u64) -> Self {
        Self {
            n_patients: 87,
            notes_per_patient: CountRange::new(2, 3),
            events_per_note: CountRange::new(100, 160),
            timexes_per_note: CountRange::new(8, 14),
            relation_density: 0.3,
            unambiguous_surfaces: false,
            seed,
        }
    }

    /// A small corpus suited to unit and integration tests.
    pub fn small(n_patients: usize, seed: u64) -> Self {
        Self {
            n_patients,
            notes_per_patient: CountRange::new(1, 3),
            events_per_note: CountRange::new(10, 25),
            timexes_per_note: CountRange::new(2, 5),
            relation_density: 0.3,
            unambiguous_surfaces: true,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_patients == 0 {
            return Err(ConfigError::NonPositive("n_patients"));
        }
        for (name, range) in [
            ("notes_per_patient", self.notes_per_patient),
            ("events_per_note", self.events_per_note),
            ("timexes_per_note", self.timexes_per_note),
        ] {
            if range.min == 0 {
                return Err(ConfigError::NonPositive(name));
            }
            if range.min > range.max {
                return Err(ConfigError::EmptyRange(name));
            }
        }
        if !(0.0..=1.0).contains(&self.relation_density) {
            return Err(ConfigError::Density(self.relation_density));
        }
        Ok(())
    }
}

const FILLERS: &[&str] = &[
    "the", "patient", "was", "noted", "to", "have", "with", "and", "for", "after", "before",
    "during", "no", "evidence", "of", "on", "in", "at", "is", "are", "seen", "today", "reports",
    "history", "mild", "left", "right", "follow", "up", "plan", "continue", "also", "further",
    "there", "has", "been", "some", "per", "which", "this",
];

const ONSETS: &[&str] = &[
    "b", "c", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "cl",
    "dr", "gr", "pl", "st", "tr", "sk",
];
const NUCLEI: &[&str] = &["a", "e", "i", "o", "u", "ia", "eo", "ou"];
const CODAS: &[&str] = &["", "", "n", "s", "x", "l", "m", "r"];

/// Invented surface forms; every token is unique across the forge.
struct TokenForge {
    used: HashSet<String>,
}

impl TokenForge {
    fn new() -> Self {
        Self {
            used: FILLERS.iter().map(|f| f.to_string()).collect(),
        }
    }

    fn token(&mut self, rng: &mut impl Rng) -> String {
        loop {
            let syllables = rng.random_range(2..=4);
            let mut t = String::new();
            for _ in 0..syllables {
                t.push_str(ONSETS.choose(rng).unwrap());
                t.push_str(NUCLEI.choose(rng).unwrap());
            }
            t.push_str(CODAS.choose(rng).unwrap());
            if self.used.insert(t.clone()) {
                return t;
            }
        }
    }

    fn surface(&mut self, rng: &mut impl Rng, max_tokens: usize) -> String {
        let n = rng.random_range(1..=max_tokens);
        (0..n).map(|_| self.token(rng)).collect::<Vec<_>>().join(" ")
    }
}

#[derive(Debug, Clone)]
struct TimexBundle {
    timex_type: TimexType,
    value: String,
}

#[derive(Debug, Clone, Copy)]
struct EventBundle {
    event_type: EventType,
    polarity: Polarity,
    degree: Degree,
    modality: Modality,
    doc_time_rel: DocTimeRel,
}

fn weighted<T: Copy>(rng: &mut impl Rng, choices: &[(T, u32)]) -> T {
    let total: u32 = choices.iter().map(|c| c.1).sum();
    let mut pick = rng.random_range(0..total);
    for &(value, weight) in choices {
        if pick < weight {
            return value;
        }
        pick -= weight;
    }
    unreachable!()
}

fn random_event_bundle(rng: &mut impl Rng) -> EventBundle {
    EventBundle {
        event_type: weighted(rng, &[(EventType::Na, 90), (EventType::Aspectual, 6), (EventType::Evidential, 4)]),
        polarity: weighted(rng, &[(Polarity::Pos, 88), (Polarity::Neg, 12)]),
        degree: weighted(rng, &[(Degree::Na, 94), (Degree::Most, 3), (Degree::Little, 3)]),
        modality: weighted(
            rng,
            &[
                (Modality::Actual, 80),
                (Modality::Hedged, 8),
                (Modality::Hypothetical, 7),
                (Modality::Generic, 5),
            ],
        ),
        doc_time_rel: weighted(
            rng,
            &[
                (DocTimeRel::Before, 45),
                (DocTimeRel::Overlap, 35),
                (DocTimeRel::After, 10),
                (DocTimeRel::BeforeOrOverlap, 10),
            ],
        ),
    }
}

fn random_timex_bundle(rng: &mut impl Rng) -> TimexBundle {
    let timex_type = weighted(
        rng,
        &[
            (TimexType::Date, 60),
            (TimexType::Time, 5),
            (TimexType::Duration, 15),
            (TimexType::Quantifier, 5),
            (TimexType::Prepostexp, 10),
            (TimexType::Set, 5),
        ],
    );
    let date = |rng: &mut dyn rand::RngCore| {
        format!(
            "{}-{:02}-{:02}",
            rng.random_range(2008..=2014),
            rng.random_range(1..=12),
            rng.random_range(1..=28)
        )
    };
    let value = match timex_type {
        TimexType::Date => date(rng),
        TimexType::Time => format!("{}T{:02}:{:02}", date(rng), rng.random_range(0..24), rng.random_range(0..4) * 15),
        TimexType::Duration => format!("P{}{}", rng.random_range(1..=12), ["D", "W", "M", "Y"].choose(rng).unwrap()),
        TimexType::Quantifier => format!("{}X", rng.random_range(1..=4)),
        TimexType::Prepostexp => ["PREOP", "POSTOP", "INTRAOP"].choose(rng).unwrap().to_string(),
        TimexType::Set => format!("R{}P1{}", rng.random_range(1..=3), ["D", "W"].choose(rng).unwrap()),
    };
    TimexBundle { timex_type, value }
}

enum Vocabulary {
    /// Each surface carries one fixed bundle.
    Unambiguous {
        timexes: Vec<(String, TimexBundle)>,
        events: Vec<(String, EventBundle)>,
    },
    /// Surfaces shared by both kinds; bundles drawn per occurrence.
    Shared(Vec<String>),
}

impl Vocabulary {
    fn build(rng: &mut impl Rng, unambiguous: bool) -> Self {
        let mut forge = TokenForge::new();
        if unambiguous {
            let timexes = (0..150)
                .map(|_| (forge.surface(rng, 2), random_timex_bundle(rng)))
                .collect();
            let events = (0..700)
                .map(|_| (forge.surface(rng, 2), random_event_bundle(rng)))
                .collect();
            Vocabulary::Unambiguous { timexes, events }
        } else {
            Vocabulary::Shared((0..600).map(|_| forge.surface(rng, 2)).collect())
        }
    }

    fn timex(&self, rng: &mut impl Rng) -> (String, TimexBundle) {
        match self {
            Vocabulary::Unambiguous { timexes, .. } => timexes.choose(rng).unwrap().clone(),
            Vocabulary::Shared(surfaces) => (surfaces.choose(rng).unwrap().clone(), random_timex_bundle(rng)),
        }
    }

    fn event(&self, rng: &mut impl Rng) -> (String, EventBundle) {
        match self {
            Vocabulary::Unambiguous { events, .. } => events.choose(rng).unwrap().clone(),
            Vocabulary::Shared(surfaces) => (surfaces.choose(rng).unwrap().clone(), random_event_bundle(rng)),
        }
    }
}

enum Item {
    Timex(String, TimexBundle),
    Event(String, EventBundle),
}

/// Generates a valid corpus whose relation graphs are forests.
pub fn generate_synthetic(config: &GeneratorConfig) -> Result<Corpus, ConfigError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let vocabulary = Vocabulary::build(&mut rng, config.unambiguous_surfaces);
    let width = config.n_patients.to_string().len().max(3);
    let epoch = NaiveDate::from_ymd_opt(2010, 1, 1).unwrap();

    let mut documents = Vec::new();
    for p in 0..config.n_patients {
        let patient_id = format!("P{:0width$}", p + 1);
        let notes = config.notes_per_patient.sample(&mut rng);
        let mut dct = epoch + Days::new(rng.random_range(0..1500));
        for n in 0..notes {
            let doc_id = format!("{patient_id}-N{}", n + 1);
            documents.push(generate_note(&mut rng, config, &vocabulary, doc_id, patient_id.clone(), dct));
            dct = dct + Days::new(rng.random_range(1..120));
        }
    }
    Ok(Corpus::new(documents))
}

fn generate_note(
    rng: &mut ChaCha8Rng,
    config: &GeneratorConfig,
    vocabulary: &Vocabulary,
    doc_id: String,
    patient_id: String,
    dct: NaiveDate,
) -> Document {
    let n_events = config.events_per_note.sample(rng);
    let n_timexes = config.timexes_per_note.sample(rng);
    let mut items: Vec<Item> = Vec::with_capacity(n_timexes + n_events);
    for _ in 0..n_timexes {
        let (s, b) = vocabulary.timex(rng);
        items.push(Item::Timex(s, b));
    }
    for _ in 0..n_events {
        let (s, b) = vocabulary.event(rng);
        items.push(Item::Event(s, b));
    }
    rand::seq::SliceRandom::shuffle(items.as_mut_slice(), rng);

    let mut text = String::new();
    let mut len = 0usize;
    let mut push = |text: &mut String, s: &str| -> Span {
        let begin = len;
        text.push_str(s);
        len += s.chars().count();
        Span::new(begin, len)
    };

    let mut doc = Document::new(doc_id, patient_id, dct, "");
    // sentence index of every timex / event, in creation order
    let mut timex_sentence = Vec::new();
    let mut event_sentence = Vec::new();
    let mut remaining = items.into_iter().peekable();
    while remaining.peek().is_some() {
        if !text.is_empty() {
            push(&mut text, " ");
        }
        let sentence_index = doc.sentences.len();
        let opener = FILLERS.choose(rng).unwrap();
        let mut capitalized = opener.to_string();
        capitalized[..1].make_ascii_uppercase();
        let sentence_begin = push(&mut text, &capitalized).begin;

        let per_sentence = rng.random_range(3..=8);
        for item in remaining.by_ref().take(per_sentence) {
            for _ in 0..rng.random_range(0..=2) {
                push(&mut text, " ");
                push(&mut text, FILLERS.choose(rng).unwrap());
            }
            push(&mut text, " ");
            match item {
                Item::Timex(surface, bundle) => {
                    let span = push(&mut text, &surface);
                    doc.timexes.push(TimexEntity {
                        id: format!("T{}", doc.timexes.len() + 1),
                        span,
                        timex_type: bundle.timex_type,
                        value: Some(bundle.value),
                    });
                    timex_sentence.push(sentence_index);
                }
                Item::Event(surface, bundle) => {
                    let span = push(&mut text, &surface);
                    doc.events.push(EventEntity {
                        id: format!("E{}", doc.events.len() + 1),
                        span,
                        event_type: bundle.event_type,
                        polarity: bundle.polarity,
                        degree: bundle.degree,
                        modality: bundle.modality,
                        doc_time_rel: bundle.doc_time_rel,
                    });
                    event_sentence.push(sentence_index);
                }
            }
        }
        let end = push(&mut text, ".").end;
        doc.sentences.push(Span::new(sentence_begin, end));
    }
    doc.text = text;

    // Each contained event gets one container that is either a timex or an
    // earlier event, so the relation graph is a forest.
    for (i, &sentence) in event_sentence.iter().enumerate() {
        if !rng.random_bool(config.relation_density) {
            continue;
        }
        let same_timexes: Vec<usize> = (0..timex_sentence.len()).filter(|&t| timex_sentence[t] == sentence).collect();
        let same_events: Vec<usize> = (0..i).filter(|&e| event_sentence[e] == sentence).collect();
        let parent = if !same_timexes.is_empty() && rng.random_bool(0.6) {
            Some(doc.timexes[*same_timexes.choose(rng).unwrap()].id.clone())
        } else if let Some(&e) = same_events.choose(rng) {
            Some(doc.events[e].id.clone())
        } else if let Some(t) = doc.timexes.choose(rng) {
            Some(t.id.clone())
        } else if i > 0 {
            Some(doc.events[rng.random_range(0..i)].id.clone())
        } else {
            None
        };
        if let Some(parent) = parent {
            doc.relations.push(ContainerRelation::new(parent, doc.events[i].id.clone()));
        }
    }
    doc.canonicalize();
    doc
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;
    use crate::closure::{check_consistency, RelationGraph};
    use crate::model::{validate_document, TextIndex};

    #[test]
    fn deterministic_per_seed() {
        let config = GeneratorConfig::small(6, 11);
        assert_eq!(generate_synthetic(&config), generate_synthetic(&config));
        let other = GeneratorConfig { seed: 12, ..config.clone() };
        assert_ne!(generate_synthetic(&config), generate_synthetic(&other));
    }

    #[test]
    fn valid_and_acyclic() {
        for unambiguous in [true, false] {
            let config = GeneratorConfig {
                unambiguous_surfaces: unambiguous,
                ..GeneratorConfig::small(10, 3)
            };
            let corpus = generate_synthetic(&config).unwrap();
            assert!(corpus.validate().is_empty());
            for doc in &corpus.documents {
                let graph = RelationGraph::from_document(doc).unwrap();
                assert!(check_consistency(&graph).consistent);
                let mut parents = HashSet::new();
                for r in &doc.relations {
                    assert!(parents.insert(r.target.clone()), "{} has two containers", r.target);
                }
            }
        }
    }

    #[test]
    fn zero_density_has_no_relations() {
        let config = GeneratorConfig {
            relation_density: 0.0,
            ..GeneratorConfig::small(5, 1)
        };
        assert_eq!(generate_synthetic(&config).unwrap().relation_count(), 0);
    }

    #[test]
    fn unambiguous_surfaces_have_one_bundle() {
        let corpus = generate_synthetic(&GeneratorConfig::small(12, 5)).unwrap();
        let mut seen: HashMap<String, String> = HashMap::new();
        for doc in &corpus.documents {
            let index = TextIndex::new(&doc.text);
            for t in &doc.timexes {
                let key = index.slice(t.span).unwrap().to_string();
                let bundle = format!("timex {} {:?}", t.timex_type, t.value);
                assert_eq!(seen.entry(key).or_insert_with(|| bundle.clone()), &bundle);
            }
            for e in &doc.events {
                let key = index.slice(e.span).unwrap().to_string();
                let bundle = format!(
                    "event {} {} {} {} {}",
                    e.event_type, e.polarity, e.degree, e.modality, e.doc_time_rel
                );
                assert_eq!(seen.entry(key).or_insert_with(|| bundle.clone()), &bundle);
            }
        }
    }

    #[test]
    fn rejects_bad_config() {
        let bad = GeneratorConfig {
            relation_density: 1.5,
            ..GeneratorConfig::small(3, 0)
        };
        assert_eq!(generate_synthetic(&bad), Err(ConfigError::Density(1.5)));
        let bad = GeneratorConfig {
            events_per_note: CountRange::new(5, 2),
            ..GeneratorConfig::small(3, 0)
        };
        assert!(bad.validate().is_err());
        let bad = GeneratorConfig {
            n_patients: 0,
            ..GeneratorConfig::small(3, 0)
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn documents_are_well_formed_text() {
        let corpus = generate_synthetic(&GeneratorConfig::small(2, 9)).unwrap();
        let doc = &corpus.documents[0];
        assert!(validate_document(doc).is_empty());
        assert!(doc.text.ends_with('.'));
        assert!(doc.text.chars().next().unwrap().is_uppercase());
    }
}
