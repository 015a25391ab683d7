//! Patient-level train/dev/test partitioning.

use std::collections::HashMap;

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{Corpus, Document};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SplitError {
    #[error("split fractions must be positive and sum to 1 (got {0}, {1}, {2})")]
    BadFractions(Ratio<u64>, Ratio<u64>, Ratio<u64>),
    #[error("cannot parse split fractions `{0}`")]
    Unparsable(String),
    #[error("need at least 3 distinct patients to split, found {0}")]
    TooFewPatients(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    train: Ratio<u64>,
    dev: Ratio<u64>,
    test: Ratio<u64>,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(
        train: Ratio<u64>,
        dev: Ratio<u64>,
        test: Ratio<u64>,
        seed: u64,
    ) -> Result<Self, SplitError> {
        let zero = Ratio::from_integer(0);
        if train <= zero || dev <= zero || test <= zero || train + dev + test != Ratio::from_integer(1) {
            return Err(SplitError::BadFractions(train, dev, test));
        }
        Ok(Self {
            train,
            dev,
            test,
            seed,
        })
    }

    /// Half / quarter / quarter.
    pub fn with_seed(seed: u64) -> Self {
        Self {
            train: Ratio::new(1, 2),
            dev: Ratio::new(1, 4),
            test: Ratio::new(1, 4),
            seed,
        }
    }

    /// Parses `"0.5,0.25,0.25"` or `"1/2,1/4,1/4"` exactly.
    pub fn from_fractions(fractions: &str, seed: u64) -> Result<Self, SplitError> {
        let parts: Vec<Ratio<u64>> = fractions
            .split(',')
            .map(|p| parse_fraction(p.trim()).ok_or_else(|| SplitError::Unparsable(fractions.to_string())))
            .collect::<Result<_, _>>()?;
        let [train, dev, test] = parts[..] else {
            return Err(SplitError::Unparsable(fractions.to_string()));
        };
        Self::new(train, dev, test, seed)
    }

    pub fn fractions(&self) -> (Ratio<u64>, Ratio<u64>, Ratio<u64>) {
        (self.train, self.dev, self.test)
    }

    /// Patients per partition for `n` patients. Partition boundaries are
    /// the cumulative fractions of `n` rounded half up.
    pub fn partition_sizes(&self, n: usize) -> (usize, usize, usize) {
        let n = n as u128;
        let round_half_up = |r: Ratio<u64>| -> usize {
            let (num, den) = (*r.numer() as u128, *r.denom() as u128);
            ((2 * n * num + den) / (2 * den)) as usize
        };
        let train_end = round_half_up(self.train);
        let dev_end = round_half_up(self.train + self.dev).max(train_end);
        let n = n as usize;
        (train_end, dev_end - train_end, n - dev_end)
    }
}

fn parse_fraction(s: &str) -> Option<Ratio<u64>> {
    if let Some((num, den)) = s.split_once('/') {
        let (num, den): (u64, u64) = (num.trim().parse().ok()?, den.trim().parse().ok()?);
        return (den != 0).then(|| Ratio::new(num, den));
    }
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if (int.is_empty() && frac.is_empty()) || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let scale = 10u64.checked_pow(frac.len() as u32)?;
    let int: u64 = if int.is_empty() { 0 } else { int.parse().ok()? };
    let frac_value: u64 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
    Some(Ratio::new(int.checked_mul(scale)?.checked_add(frac_value)?, scale))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSplit {
    pub train: Corpus,
    pub dev: Corpus,
    pub test: Corpus,
}

/// Partitions documents so that every patient lands in exactly one of
/// train, dev and test. Input document order does not matter.
pub fn split_by_patient(corpus: &Corpus, spec: &SplitSpec) -> Result<CorpusSplit, SplitError> {
    let mut patients: Vec<&str> = corpus.patient_ids();
    if patients.len() < 3 {
        return Err(SplitError::TooFewPatients(patients.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    patients.shuffle(&mut rng);

    let (n_train, n_dev, _) = spec.partition_sizes(patients.len());
    let fold: HashMap<&str, usize> = patients
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let f = if i < n_train {
                0
            } else if i < n_train + n_dev {
                1
            } else {
                2
            };
            (p, f)
        })
        .collect();

    let mut parts: [Vec<Document>; 3] = Default::default();
    for doc in &corpus.documents {
        parts[fold[doc.patient_id.as_str()]].push(doc.clone());
    }
    let [train, dev, test] = parts.map(|mut docs| {
        docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        Corpus::new(docs)
    });
    Ok(CorpusSplit { train, dev, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::date;

    fn corpus(patients: usize, notes: usize) -> Corpus {
        let docs = (0..patients)
            .flat_map(|p| {
                (0..notes).map(move |n| Document::new(format!("d{p}_{n}"), format!("p{p:03}"), date(), "x"))
            })
            .collect();
        Corpus::new(docs)
    }

    #[test]
    fn default_sizes() {
        let spec = SplitSpec::with_seed(0);
        assert_eq!(spec.partition_sizes(8), (4, 2, 2));
        assert_eq!(spec.partition_sizes(87), (44, 21, 22));
        assert_eq!(spec.partition_sizes(4), (2, 1, 1));
        assert_eq!(spec.partition_sizes(200), (100, 50, 50));
    }

    #[test]
    fn fractions_parse_exactly() {
        let spec = SplitSpec::from_fractions("0.5,0.25,0.25", 1).unwrap();
        assert_eq!(spec.fractions(), SplitSpec::with_seed(1).fractions());
        let spec = SplitSpec::from_fractions("1/2, 1/4, 1/4", 1).unwrap();
        assert_eq!(spec.fractions(), SplitSpec::with_seed(1).fractions());
        assert!(SplitSpec::from_fractions("0.6,0.3,0.3", 1).is_err());
        assert!(SplitSpec::from_fractions("1,0,0", 1).is_err());
        assert!(SplitSpec::from_fractions("0.5,0.5", 1).is_err());
        assert!(SplitSpec::from_fractions("a,b,c", 1).is_err());
        assert!(SplitSpec::from_fractions("1/0,1/4,1/4", 1).is_err());
        let spec = SplitSpec::from_fractions("0.8,0.1,0.1", 1).unwrap();
        assert_eq!(spec.partition_sizes(10), (8, 1, 1));
    }

    #[test]
    fn too_few_patients() {
        assert_eq!(
            split_by_patient(&corpus(2, 3), &SplitSpec::with_seed(0)),
            Err(SplitError::TooFewPatients(2))
        );
    }

    #[test]
    fn split_keeps_patients_together() {
        let c = corpus(8, 3);
        let split = split_by_patient(&c, &SplitSpec::with_seed(42)).unwrap();
        let patients = |c: &Corpus| c.patient_ids().into_iter().map(String::from).collect::<Vec<_>>();
        let (tr, dv, te) = (patients(&split.train), patients(&split.dev), patients(&split.test));
        assert_eq!((tr.len(), dv.len(), te.len()), (4, 2, 2));
        assert_eq!(split.train.len() + split.dev.len() + split.test.len(), 24);
        for p in &tr {
            assert!(!dv.contains(p) && !te.contains(p));
        }
        for p in &dv {
            assert!(!te.contains(p));
        }
    }

    #[test]
    fn order_independent_and_seeded() {
        let c = corpus(10, 2);
        let mut reversed = c.clone();
        reversed.documents.reverse();
        let spec = SplitSpec::with_seed(7);
        assert_eq!(split_by_patient(&c, &spec), split_by_patient(&reversed, &spec));
        let other: Vec<_> = (0..20)
            .map(|s| split_by_patient(&c, &SplitSpec::with_seed(s)).unwrap().train)
            .collect();
        assert!(other.iter().any(|t| *t != other[0]));
    }

    proptest::proptest! {
        #[test]
        fn folds_partition_patients(patients in 3usize..40, notes in 1usize..4, seed: u64) {
            let c = corpus(patients, notes);
            let split = split_by_patient(&c, &SplitSpec::with_seed(seed)).unwrap();
            let folds = [&split.train, &split.dev, &split.test].map(|f| f.patient_ids());
            let (a, b, d) = SplitSpec::with_seed(seed).partition_sizes(patients);
            proptest::prop_assert_eq!([folds[0].len(), folds[1].len(), folds[2].len()], [a, b, d]);
            let mut all: Vec<&str> = folds.concat();
            all.sort();
            all.dedup();
            proptest::prop_assert_eq!(all.len(), patients);
            proptest::prop_assert_eq!(split.train.len() + split.dev.len() + split.test.len(), c.len());
        }

        #[test]
        fn sizes_sum_to_n(n in 0usize..10_000, t in 1u64..20, d in 1u64..20, e in 1u64..20) {
            let sum = t + d + e;
            let spec = SplitSpec::new(Ratio::new(t, sum), Ratio::new(d, sum), Ratio::new(e, sum), 0).unwrap();
            let (a, b, c) = spec.partition_sizes(n);
            proptest::prop_assert_eq!(a + b + c, n);
        }
    }
}
