//! docTimeRel baselines: majority class, optionally backed by memorization.

use std::collections::BTreeMap;

use super::memorize::MemorizationLexicon;
use super::BaselineError;
use crate::model::{Corpus, DocTimeRel, Document, EventEntity, TextIndex};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MajorityDr {
    pub label: DocTimeRel,
    pub training_counts: BTreeMap<DocTimeRel, usize>,
}

/// Most frequent docTimeRel in training. Ties follow the label order
/// BEFORE, OVERLAP, AFTER, BEFORE-OR-OVERLAP.
pub fn train_dr_majority(train: &Corpus) -> Result<MajorityDr, BaselineError> {
    let mut training_counts: BTreeMap<DocTimeRel, usize> = BTreeMap::new();
    for e in train.documents.iter().flat_map(|d| &d.events) {
        *training_counts.entry(e.doc_time_rel).or_default() += 1;
    }
    majority_of(training_counts)
}

pub fn majority_of(training_counts: BTreeMap<DocTimeRel, usize>) -> Result<MajorityDr, BaselineError> {
    let label = DocTimeRel::ALL
        .iter()
        .copied()
        .filter(|l| training_counts.get(l).copied().unwrap_or(0) > 0)
        .max_by(|a, b| training_counts[a].cmp(&training_counts[b]).then(b.cmp(a)))
        .ok_or(BaselineError::NoTrainingEvents)?;
    Ok(MajorityDr {
        label,
        training_counts,
    })
}

/// The document's events with docTimeRel reassigned: the memorized label
/// when the lexicon knows the event's surface, the majority label otherwise.
pub fn apply_dr(majority: &MajorityDr, lexicon: Option<&MemorizationLexicon>, doc: &Document) -> Vec<EventEntity> {
    let index = TextIndex::new(&doc.text);
    doc.events
        .iter()
        .map(|e| {
            let memorized = lexicon
                .zip(index.slice(e.span))
                .and_then(|(lex, surface)| lex.event(surface))
                .map(|entry| entry.bundle.doc_time_rel);
            EventEntity {
                doc_time_rel: memorized.unwrap_or(majority.label),
                ..e.clone()
            }
        })
        .collect()
}
