//! Line-delimited standoff corpus format.
//!
//! ```text
//! #doc <doc_id> <patient_id> <YYYY-MM-DD>
//! #text <byte-length>
//! <exactly byte-length bytes of text>
//! S <begin> <end>
//! T <id> <begin> <end> <TYPE> <value-or-->
//! E <id> <begin> <end> <type> <polarity> <degree> <modality> <docTimeRel>
//! R <source_id> CONTAINS <target_id>
//! <blank line>
//! ```
//!
//! Offsets are character offsets into the decoded text. Writing is
//! canonical: documents sorted by id, entities by (begin, end, kind).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use thiserror::Error;

use crate::model::{
    ContainerRelation, Corpus, Document, EntityKind, EventEntity, Span, TimexEntity, Violation,
};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}{}: {message}", doc.as_ref().map(|d| format!(" (document {d})")).unwrap_or_default())]
    Parse {
        line: usize,
        doc: Option<String>,
        message: String,
    },
    #[error("{} validation violation(s); first: document {}: {}", violations.len(), violations[0].0, violations[0].1)]
    Invalid { violations: Vec<(String, Violation)> },
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

const DATE_FORMAT: &str = "%Y-%m-%d";

/// Reads and validates a corpus file.
pub fn read_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_corpus(&bytes)
}

/// Parses and validates a corpus from raw bytes.
pub fn parse_corpus(bytes: &[u8]) -> Result<Corpus> {
    let corpus = parse_corpus_unchecked(bytes)?;
    check(&corpus)?;
    Ok(corpus)
}

fn check(corpus: &Corpus) -> Result<()> {
    let violations = corpus.validate();
    if violations.is_empty() {
        Ok(())
    } else {
        Err(CorpusError::Invalid { violations })
    }
}

/// Writes `corpus` in canonical order. The corpus must be valid.
pub fn write_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_corpus(corpus)?;
    fs::write(path, bytes).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Canonical serialization of a valid corpus.
pub fn encode_corpus(corpus: &Corpus) -> Result<Vec<u8>> {
    check(corpus)?;
    Ok(encode_unchecked(corpus).into_bytes())
}

fn encode_unchecked(corpus: &Corpus) -> String {
    let mut docs: Vec<&Document> = corpus.documents.iter().collect();
    docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));

    let mut out = String::new();
    for doc in docs {
        let doc = doc.canonical();
        let _ = writeln!(
            out,
            "#doc {} {} {}",
            doc.doc_id,
            doc.patient_id,
            doc.dct.format(DATE_FORMAT)
        );
        let _ = writeln!(out, "#text {}", doc.text.len());
        out.push_str(&doc.text);
        out.push('\n');
        for s in &doc.sentences {
            let _ = writeln!(out, "S {} {}", s.begin, s.end);
        }

        let mut lines: Vec<(Span, EntityKind, &str, String)> = Vec::new();
        for t in &doc.timexes {
            let line = format!(
                "T {} {} {} {} {}",
                t.id,
                t.span.begin,
                t.span.end,
                t.timex_type,
                t.value.as_deref().unwrap_or("-")
            );
            lines.push((t.span, EntityKind::Timex, &t.id, line));
        }
        for e in &doc.events {
            let line = format!(
                "E {} {} {} {} {} {} {} {}",
                e.id,
                e.span.begin,
                e.span.end,
                e.event_type,
                e.polarity,
                e.degree,
                e.modality,
                e.doc_time_rel
            );
            lines.push((e.span, EntityKind::Event, &e.id, line));
        }
        lines.sort_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)));
        for (_, _, _, line) in lines {
            out.push_str(&line);
            out.push('\n');
        }

        for r in &doc.relations {
            let _ = writeln!(out, "R {} {} {}", r.source, ContainerRelation::LABEL, r.target);
        }
        out.push('\n');
    }
    out
}

/// Parses the format without validating document invariants.
pub fn parse_corpus_unchecked(bytes: &[u8]) -> Result<Corpus> {
    let mut reader = Reader {
        bytes,
        pos: 0,
        line: 0,
        doc: None,
    };
    let mut documents = Vec::new();
    loop {
        while reader.peek() == Some(b'\n') {
            reader.pos += 1;
            reader.line += 1;
        }
        if reader.at_end() {
            break;
        }
        documents.push(reader.record()?);
    }
    Ok(Corpus { documents })
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    /// Number of the line read most recently.
    line: usize,
    doc: Option<String>,
}

impl<'a> Reader<'a> {
    fn at_end(&self) -> bool {
        self.pos >= self.bytes.len()
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn error(&self, message: impl Into<String>) -> CorpusError {
        CorpusError::Parse {
            line: self.line,
            doc: self.doc.clone(),
            message: message.into(),
        }
    }

    /// Next newline-terminated line, without the terminator.
    fn next_line(&mut self) -> Result<&'a str> {
        let rest = &self.bytes[self.pos..];
        let Some(len) = rest.iter().position(|&b| b == b'\n') else {
            return Err(self.error("unexpected end of file (truncated record)"));
        };
        let line = std::str::from_utf8(&rest[..len]).map_err(|_| self.error("invalid UTF-8"))?;
        self.pos += len + 1;
        self.line += 1;
        Ok(line)
    }

    fn record(&mut self) -> Result<Document> {
        self.doc = None;
        let header = self.next_line()?;
        let fields: Vec<&str> = header.split(' ').collect();
        let ["#doc", doc_id, patient_id, dct] = fields[..] else {
            return Err(self.header_error(header));
        };
        self.doc = Some(doc_id.to_string());
        let dct = NaiveDate::parse_from_str(dct, DATE_FORMAT)
            .map_err(|_| self.error(format!("invalid DCT `{dct}`, expected YYYY-MM-DD")))?;

        let text_header = self.next_line()?;
        let length: usize = text_header
            .strip_prefix("#text ")
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| self.error(format!("expected `#text <byte-length>`, found `{text_header}`")))?;
        let end = self.pos.checked_add(length).filter(|&e| e < self.bytes.len());
        let Some(end) = end else {
            return Err(self.error("unexpected end of file inside document text"));
        };
        let text = std::str::from_utf8(&self.bytes[self.pos..end])
            .map_err(|_| self.error("document text is not valid UTF-8"))?;
        if self.bytes[end] != b'\n' {
            return Err(self.error("document text is not followed by a newline"));
        }
        self.line += text.matches('\n').count() + 1;
        self.pos = end + 1;

        let mut doc = Document::new(doc_id, patient_id, dct, text);
        loop {
            let line = self.next_line()?;
            if line.is_empty() {
                return Ok(doc);
            }
            self.annotation(line, &mut doc)?;
        }
    }

    fn header_error(&self, header: &str) -> CorpusError {
        self.error(format!(
            "expected `#doc <doc_id> <patient_id> <dct>`, found `{header}`"
        ))
    }

    fn annotation(&self, line: &str, doc: &mut Document) -> Result<()> {
        let fields: Vec<&str> = line.split(' ').collect();
        match fields[..] {
            ["S", begin, end] => doc.sentences.push(self.span(begin, end)?),
            ["T", id, begin, end, timex_type, value] => doc.timexes.push(TimexEntity {
                id: id.to_string(),
                span: self.span(begin, end)?,
                timex_type: self.label(timex_type)?,
                value: (value != "-").then(|| value.to_string()),
            }),
            ["E", id, begin, end, event_type, polarity, degree, modality, dtr] => {
                doc.events.push(EventEntity {
                    id: id.to_string(),
                    span: self.span(begin, end)?,
                    event_type: self.label(event_type)?,
                    polarity: self.label(polarity)?,
                    degree: self.label(degree)?,
                    modality: self.label(modality)?,
                    doc_time_rel: self.label(dtr)?,
                })
            }
            ["R", source, ContainerRelation::LABEL, target] => {
                doc.relations.push(ContainerRelation::new(source, target))
            }
            _ => return Err(self.error(format!("malformed annotation line `{line}`"))),
        }
        Ok(())
    }

    fn span(&self, begin: &str, end: &str) -> Result<Span> {
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| self.error(format!("invalid offset `{s}`")))
        };
        Ok(Span::new(parse(begin)?, parse(end)?))
    }

    fn label<T>(&self, s: &str) -> Result<T>
    where
        T: std::str::FromStr<Err = crate::model::ModelError>,
    {
        s.parse().map_err(|e: crate::model::ModelError| self.error(e.to_string()))
    }
}
