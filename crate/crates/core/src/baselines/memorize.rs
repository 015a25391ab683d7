//! Memorization tagger: re-emit every training surface found in new text
//! with the attributes it most often had in training.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::model::{
    Corpus, Degree, DocTimeRel, Document, EntityKind, EventEntity, EventType, Modality, Polarity, Span, TextIndex,
    TimexEntity, TimexType,
};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TimexBundle {
    pub timex_type: TimexType,
    pub value: Option<String>,
}

impl TimexBundle {
    pub fn of(t: &TimexEntity) -> Self {
        Self {
            timex_type: t.timex_type,
            value: t.value.clone(),
        }
    }

    pub fn serialize(&self) -> String {
        format!("{} {}", self.timex_type, self.value.as_deref().unwrap_or("-"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventBundle {
    pub event_type: EventType,
    pub polarity: Polarity,
    pub degree: Degree,
    pub modality: Modality,
    pub doc_time_rel: DocTimeRel,
}

impl EventBundle {
    pub fn of(e: &EventEntity) -> Self {
        Self {
            event_type: e.event_type,
            polarity: e.polarity,
            degree: e.degree,
            modality: e.modality,
            doc_time_rel: e.doc_time_rel,
        }
    }

    pub fn serialize(&self) -> String {
        format!(
            "{} {} {} {} {}",
            self.event_type, self.polarity, self.degree, self.modality, self.doc_time_rel
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconEntry<B> {
    pub bundle: B,
    /// Training occurrences with the winning bundle.
    pub frequency: usize,
    /// Training occurrences of the surface as this kind, any bundle.
    pub total: usize,
}

/// A surface seen with more than one bundle, or as both kinds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conflict {
    pub surface: String,
    /// `None` when the surface was annotated as both a timex and an event.
    pub kind: Option<EntityKind>,
    pub distinct_bundles: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MemorizationLexicon {
    case_sensitive: bool,
    timexes: BTreeMap<String, LexiconEntry<TimexBundle>>,
    events: BTreeMap<String, LexiconEntry<EventBundle>>,
    conflicts: Vec<Conflict>,
}

/// Lowercases a character only when that keeps it a single character, so
/// folded text has the same character offsets as the original.
fn fold_char(c: char) -> char {
    let mut lower = c.to_lowercase();
    match (lower.next(), lower.next()) {
        (Some(l), None) => l,
        _ => c,
    }
}

impl MemorizationLexicon {
    pub fn is_case_sensitive(&self) -> bool {
        self.case_sensitive
    }

    pub fn key(&self, surface: &str) -> String {
        if self.case_sensitive {
            surface.to_string()
        } else {
            surface.chars().map(fold_char).collect()
        }
    }

    pub fn timex(&self, surface: &str) -> Option<&LexiconEntry<TimexBundle>> {
        self.timexes.get(&self.key(surface))
    }

    pub fn event(&self, surface: &str) -> Option<&LexiconEntry<EventBundle>> {
        self.events.get(&self.key(surface))
    }

    pub fn timex_entries(&self) -> &BTreeMap<String, LexiconEntry<TimexBundle>> {
        &self.timexes
    }

    pub fn event_entries(&self) -> &BTreeMap<String, LexiconEntry<EventBundle>> {
        &self.events
    }

    pub fn conflicts(&self) -> &[Conflict] {
        &self.conflicts
    }

    pub fn len(&self) -> usize {
        self.timexes.len() + self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// One tab-separated line per entry: surface, kind, bundle, frequency;
    /// sorted by surface, timex before event.
    pub fn dump(&self) -> String {
        let mut rows: Vec<(&str, EntityKind, String, usize)> = Vec::with_capacity(self.len());
        for (s, e) in &self.timexes {
            rows.push((s, EntityKind::Timex, e.bundle.serialize(), e.frequency));
        }
        for (s, e) in &self.events {
            rows.push((s, EntityKind::Event, e.bundle.serialize(), e.frequency));
        }
        rows.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut out = String::new();
        for (surface, kind, bundle, freq) in rows {
            let _ = writeln!(out, "{surface}\t{kind}\t{bundle}\t{freq}");
        }
        out
    }
}

fn pick<B: Clone>(counts: HashMap<B, usize>, serialize: impl Fn(&B) -> String) -> (LexiconEntry<B>, usize) {
    let distinct = counts.len();
    let total = counts.values().sum();
    let (bundle, frequency) = counts
        .into_iter()
        .map(|(b, n)| (serialize(&b), b, n))
        .min_by(|a, b| b.2.cmp(&a.2).then_with(|| a.0.cmp(&b.0)))
        .map(|(_, b, n)| (b, n))
        .expect("surface with no occurrences");
    (
        LexiconEntry {
            bundle,
            frequency,
            total,
        },
        distinct,
    )
}

/// Records every annotated surface with its most frequent bundle per kind
/// (ties go to the lexicographically smaller serialized bundle).
pub fn train_memorizer(train: &Corpus, case_sensitive: bool) -> MemorizationLexicon {
    let mut lexicon = MemorizationLexicon {
        case_sensitive,
        ..Default::default()
    };
    let mut timex_counts: BTreeMap<String, HashMap<TimexBundle, usize>> = BTreeMap::new();
    let mut event_counts: BTreeMap<String, HashMap<EventBundle, usize>> = BTreeMap::new();
    for doc in &train.documents {
        let index = TextIndex::new(&doc.text);
        for t in &doc.timexes {
            if let Some(surface) = index.slice(t.span) {
                *timex_counts
                    .entry(lexicon.key(surface))
                    .or_default()
                    .entry(TimexBundle::of(t))
                    .or_default() += 1;
            }
        }
        for e in &doc.events {
            if let Some(surface) = index.slice(e.span) {
                *event_counts
                    .entry(lexicon.key(surface))
                    .or_default()
                    .entry(EventBundle::of(e))
                    .or_default() += 1;
            }
        }
    }

    for (surface, counts) in timex_counts {
        let (entry, distinct) = pick(counts, TimexBundle::serialize);
        if distinct > 1 {
            lexicon.conflicts.push(Conflict {
                surface: surface.clone(),
                kind: Some(EntityKind::Timex),
                distinct_bundles: distinct,
            });
        }
        lexicon.timexes.insert(surface, entry);
    }
    for (surface, counts) in event_counts {
        let (entry, distinct) = pick(counts, EventBundle::serialize);
        if distinct > 1 {
            lexicon.conflicts.push(Conflict {
                surface: surface.clone(),
                kind: Some(EntityKind::Event),
                distinct_bundles: distinct,
            });
        }
        if lexicon.timexes.contains_key(&surface) {
            lexicon.conflicts.push(Conflict {
                surface: surface.clone(),
                kind: None,
                distinct_bundles: 2,
            });
        }
        lexicon.events.insert(surface, entry);
    }
    lexicon.conflicts.sort_by(|a, b| (&a.surface, a.kind).cmp(&(&b.surface, b.kind)));
    lexicon
}

#[derive(Default)]
struct Node {
    children: HashMap<char, usize>,
    terminal: bool,
}

/// Longest-match scanner compiled from a lexicon.
pub struct Tagger<'a> {
    lexicon: &'a MemorizationLexicon,
    nodes: Vec<Node>,
}

impl<'a> Tagger<'a> {
    pub fn new(lexicon: &'a MemorizationLexicon) -> Self {
        let mut nodes = vec![Node::default()];
        for surface in lexicon.timexes.keys().chain(lexicon.events.keys()) {
            let mut at = 0;
            for c in surface.chars() {
                at = match nodes[at].children.get(&c) {
                    Some(&next) => next,
                    None => {
                        nodes.push(Node::default());
                        let next = nodes.len() - 1;
                        nodes[at].children.insert(c, next);
                        next
                    }
                };
            }
            nodes[at].terminal = true;
        }
        Self { lexicon, nodes }
    }

    /// Longest surface starting at `start` whose end falls on a word
    /// boundary; returns the end offset.
    fn longest_at(&self, chars: &[char], start: usize) -> Option<usize> {
        let mut at = 0;
        let mut best = None;
        for (offset, c) in chars[start..].iter().enumerate() {
            match self.nodes[at].children.get(c) {
                Some(&next) => at = next,
                None => break,
            }
            let end = start + offset + 1;
            if self.nodes[at].terminal && chars.get(end).is_none_or(|c| !c.is_alphanumeric()) {
                best = Some(end);
            }
        }
        best
    }

    /// Scans left to right, emitting non-overlapping entities sorted by
    /// position. When a surface is known as both kinds the event wins.
    pub fn tag(&self, doc: &Document) -> (Vec<TimexEntity>, Vec<EventEntity>) {
        let chars: Vec<char> = if self.lexicon.case_sensitive {
            doc.text.chars().collect()
        } else {
            doc.text.chars().map(fold_char).collect()
        };
        let mut timexes = Vec::new();
        let mut events = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let at_boundary = i == 0 || !chars[i - 1].is_alphanumeric();
            let Some(end) = at_boundary.then(|| self.longest_at(&chars, i)).flatten() else {
                i += 1;
                continue;
            };
            let key: String = chars[i..end].iter().collect();
            let span = Span::new(i, end);
            if let Some(entry) = self.lexicon.events.get(&key) {
                let b = entry.bundle;
                events.push(EventEntity {
                    id: format!("E{}", events.len() + 1),
                    span,
                    event_type: b.event_type,
                    polarity: b.polarity,
                    degree: b.degree,
                    modality: b.modality,
                    doc_time_rel: b.doc_time_rel,
                });
            } else if let Some(entry) = self.lexicon.timexes.get(&key) {
                timexes.push(TimexEntity {
                    id: format!("T{}", timexes.len() + 1),
                    span,
                    timex_type: entry.bundle.timex_type,
                    value: entry.bundle.value.clone(),
                });
            }
            i = end;
        }
        (timexes, events)
    }
}

/// Tags one document's text (its annotations are ignored).
pub fn apply_memorizer(lexicon: &MemorizationLexicon, doc: &Document) -> (Vec<TimexEntity>, Vec<EventEntity>) {
    Tagger::new(lexicon).tag(doc)
}
