//! Container-relation baseline: each event is contained by the closest
//! time expression in its sentence.

use crate::model::{ContainerRelation, Document, Span, TimexEntity};

/// Sentence spans split after `.`, `?` or `!` when followed by whitespace
/// and an uppercase letter. Used when a document carries no sentences.
pub fn fallback_sentences(text: &str) -> Vec<Span> {
    let chars: Vec<char> = text.chars().collect();
    let mut sentences = Vec::new();
    let Some(mut start) = chars.iter().position(|c| !c.is_whitespace()) else {
        return sentences;
    };
    let mut i = start;
    while i < chars.len() {
        if matches!(chars[i], '.' | '?' | '!') {
            let mut next = i + 1;
            while next < chars.len() && chars[next].is_whitespace() {
                next += 1;
            }
            if next > i + 1 && next < chars.len() && chars[next].is_uppercase() {
                sentences.push(Span::new(start, i + 1));
                start = next;
                i = next;
                continue;
            }
        }
        i += 1;
    }
    let mut end = chars.len();
    while end > start && chars[end - 1].is_whitespace() {
        end -= 1;
    }
    if end > start {
        sentences.push(Span::new(start, end));
    }
    sentences
}

/// One `timex CONTAINS event` relation per event that shares a sentence
/// with at least one timex. Distance is the gap between nearest span edges
/// (0 on overlap); ties go to the earlier timex.
pub fn link_closest_time(doc: &Document) -> Vec<ContainerRelation> {
    let fallback;
    let sentences: &[Span] = if doc.sentences.is_empty() {
        fallback = fallback_sentences(&doc.text);
        &fallback
    } else {
        &doc.sentences
    };

    let mut relations = Vec::new();
    for event in &doc.events {
        let Some(sentence) = sentences.iter().find(|s| s.contains(&event.span)) else {
            continue;
        };
        let closest: Option<&TimexEntity> = doc
            .timexes
            .iter()
            .filter(|t| sentence.contains(&t.span))
            .min_by(|a, b| {
                (a.span.gap(&event.span), a.span, &a.id).cmp(&(b.span.gap(&event.span), b.span, &b.id))
            });
        if let Some(timex) = closest {
            relations.push(ContainerRelation::new(timex.id.as_str(), event.id.as_str()));
        }
    }
    relations
}
