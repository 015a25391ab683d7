//! Reference baseline systems: memorization tagging for spans and
//! attributes, majority-class and memorized docTimeRel, and closest-time
//! container linking.

mod doctime;
mod linking;
mod memorize;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use doctime::{apply_dr, majority_of, train_dr_majority, MajorityDr};
pub use linking::{fallback_sentences, link_closest_time};
pub use memorize::{
    apply_memorizer, train_memorizer, Conflict, EventBundle, LexiconEntry, MemorizationLexicon, Tagger, TimexBundle,
};

use crate::model::{Corpus, Document};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BaselineError {
    #[error("training corpus contains no events")]
    NoTrainingEvents,
    #[error("unknown baseline component `{0}` (expected memorize, dr-majority, dr-memorize, cr-closest)")]
    UnknownComponent(String),
}

/// Which baseline stages to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Components {
    pub memorize: bool,
    pub dr_majority: bool,
    pub dr_memorize: bool,
    pub cr_closest: bool,
}

impl Default for Components {
    fn default() -> Self {
        Self {
            memorize: true,
            dr_majority: true,
            dr_memorize: true,
            cr_closest: true,
        }
    }
}

impl FromStr for Components {
    type Err = BaselineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut c = Components {
            memorize: false,
            dr_majority: false,
            dr_memorize: false,
            cr_closest: false,
        };
        for name in s.split(',').map(str::trim).filter(|n| !n.is_empty()) {
            match name {
                "memorize" => c.memorize = true,
                "dr-majority" => c.dr_majority = true,
                "dr-memorize" => c.dr_memorize = true,
                "cr-closest" => c.cr_closest = true,
                other => return Err(BaselineError::UnknownComponent(other.to_string())),
            }
        }
        Ok(c)
    }
}

impl fmt::Display for Components {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [
            (self.memorize, "memorize"),
            (self.dr_majority, "dr-majority"),
            (self.dr_memorize, "dr-memorize"),
            (self.cr_closest, "cr-closest"),
        ]
        .into_iter()
        .filter_map(|(on, n)| on.then_some(n))
        .collect();
        f.write_str(&names.join(","))
    }
}

/// Runs the selected baselines over `input`, trained on `train`.
///
/// With `memorize` the input's annotations are replaced by tagger output;
/// without it the input entities are kept. `dr-memorize` assigns
/// memorized docTimeRel with majority fallback, `dr-majority` alone
/// assigns the majority label. Relations come only from `cr-closest`.
pub fn run_baseline(
    train: &Corpus,
    input: &Corpus,
    components: Components,
    case_sensitive: bool,
) -> Result<Corpus, BaselineError> {
    let lexicon = train_memorizer(train, case_sensitive);
    let majority = if components.dr_majority || components.dr_memorize {
        Some(train_dr_majority(train)?)
    } else {
        None
    };
    let tagger = Tagger::new(&lexicon);

    let documents = input
        .documents
        .iter()
        .map(|doc| {
            let mut out: Document = doc.without_annotations();
            if components.memorize {
                let (timexes, events) = tagger.tag(doc);
                out.timexes = timexes;
                out.events = events;
            } else {
                out.timexes = doc.timexes.clone();
                out.events = doc.events.clone();
            }
            if let Some(majority) = &majority {
                let lex = components.dr_memorize.then_some(&lexicon);
                out.events = apply_dr(majority, lex, &out);
            }
            if components.cr_closest {
                out.relations = link_closest_time(&out);
            }
            out.canonicalize();
            out
        })
        .collect();
    Ok(Corpus::new(documents))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn component_lists() {
        let c: Components = "memorize,cr-closest".parse().unwrap();
        assert!(c.memorize && c.cr_closest && !c.dr_majority && !c.dr_memorize);
        assert_eq!(c.to_string(), "memorize,cr-closest");
        assert_eq!(Components::default().to_string(), "memorize,dr-majority,dr-memorize,cr-closest");
        assert!("memorise".parse::<Components>().is_err());
    }
}
