//! Tables, descriptions and content-plan annotations.
//!
//! A source table is an ordered list of `(key, value)` pairs. Every value
//! token becomes one [`Record`] carrying its key and its forward/backward
//! position inside the value, which is the representation the table encoder
//! consumes.

pub mod io;
pub mod synth;
pub mod vocab;

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{PtsError, Result};

/// One linearized table cell.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Record {
    pub value_token: String,
    pub key_token: String,
    /// 1-based position counted from the start of the value.
    pub pos_fwd: usize,
    /// 1-based position counted from the end of the value.
    pub pos_bwd: usize,
}

impl Record {
    pub fn new(value: impl Into<String>, key: impl Into<String>, pos_fwd: usize, pos_bwd: usize) -> Self {
        Self {
            value_token: value.into(),
            key_token: key.into(),
            pos_fwd,
            pos_bwd,
        }
    }
}

/// A training or evaluation instance: records, reference text, and the
/// content plan as pointers into the records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableInstance {
    pub records: Vec<Record>,
    pub description: Vec<String>,
    pub plan_pointers: Vec<usize>,
    pub plan_tokens: Vec<String>,
}

impl TableInstance {
    /// Builds an instance from key/value pairs, annotating the plan
    /// heuristically.
    pub fn annotated<K, V>(pairs: &[(K, V)], description: &str, stopwords: &Stopwords) -> Result<Self>
    where
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let split: Vec<(&str, Vec<&str>)> = pairs
            .iter()
            .map(|(k, v)| (k.as_ref(), v.as_ref().split_whitespace().collect()))
            .collect();
        let records = linearize_table(&split)?;
        let description = tokenize(description);
        let (plan_tokens, plan_pointers) = annotate_plan(&records, &description, stopwords);
        Ok(Self {
            records,
            description,
            plan_pointers,
            plan_tokens,
        })
    }

    /// Checks the plan invariants.
    pub fn validate(&self) -> Result<()> {
        if self.records.is_empty() {
            return Err(PtsError::EmptyTable);
        }
        if self.plan_pointers.len() != self.plan_tokens.len() {
            return Err(PtsError::InvalidPlan(format!(
                "{} pointers but {} tokens",
                self.plan_pointers.len(),
                self.plan_tokens.len()
            )));
        }
        for (&ptr, tok) in self.plan_pointers.iter().zip(&self.plan_tokens) {
            let record = self.records.get(ptr).ok_or_else(|| {
                PtsError::InvalidPlan(format!("pointer {ptr} out of range for {} records", self.records.len()))
            })?;
            if &record.value_token != tok {
                return Err(PtsError::InvalidPlan(format!(
                    "token `{tok}` does not match record {ptr} (`{}`)",
                    record.value_token
                )));
            }
        }
        Ok(())
    }

    /// Regroups records into the original key/value pairs.
    pub fn pairs(&self) -> Vec<(String, Vec<String>)> {
        regroup(&self.records)
    }
}

/// Whitespace tokenization of pre-tokenized text.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}

/// Flattens key/value pairs into records, computing per-value positions.
pub fn linearize_table<K, V>(pairs: &[(K, Vec<V>)]) -> Result<Vec<Record>>
where
    K: AsRef<str>,
    V: AsRef<str>,
{
    if pairs.is_empty() {
        return Err(PtsError::EmptyTable);
    }
    let mut records = Vec::new();
    for (key, value) in pairs {
        let key = key.as_ref();
        if value.is_empty() {
            return Err(PtsError::EmptyValue(key.to_owned()));
        }
        let m = value.len();
        for (i, tok) in value.iter().enumerate() {
            records.push(Record::new(tok.as_ref(), key, i + 1, m - i));
        }
    }
    Ok(records)
}

/// Inverse of [`linearize_table`]: a new pair starts wherever `pos_fwd == 1`.
pub fn regroup(records: &[Record]) -> Vec<(String, Vec<String>)> {
    let mut pairs: Vec<(String, Vec<String>)> = Vec::new();
    for r in records {
        match pairs.last_mut() {
            Some((key, value)) if r.pos_fwd > 1 && *key == r.key_token => value.push(r.value_token.clone()),
            _ => pairs.push((r.key_token.clone(), vec![r.value_token.clone()])),
        }
    }
    pairs
}

/// A fixed stopword list.
#[derive(Clone, Debug, Default)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    /// The English list shipped in `data/stopwords.txt`.
    pub fn english() -> Self {
        Self::parse(include_str!("../../data/stopwords.txt"))
    }

    /// One token per line; blank lines are ignored.
    pub fn parse(text: &str) -> Self {
        Self(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_owned).collect())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(PtsError::MissingFile(path.to_owned()));
        }
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self(tokens.into_iter().map(Into::into).collect())
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Heuristic content-plan annotation.
///
/// Keeps the description tokens that also occur as record values and are
/// not stopwords, in description order. Each kept token points at the
/// earliest matching record not yet used; once every match has been used the
/// earliest one is reused.
pub fn annotate_plan(records: &[Record], description: &[String], stopwords: &Stopwords) -> (Vec<String>, Vec<usize>) {
    let mut candidates: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        candidates.entry(r.value_token.as_str()).or_default().push(i);
    }
    let mut used: HashMap<&str, usize> = HashMap::new();
    let mut tokens = Vec::new();
    let mut pointers = Vec::new();
    for tok in description {
        if stopwords.contains(tok) {
            continue;
        }
        let Some(matches) = candidates.get(tok.as_str()) else {
            continue;
        };
        let n = used.entry(tok.as_str()).or_insert(0);
        let ptr = matches.get(*n).copied().unwrap_or(matches[0]);
        *n += 1;
        tokens.push(tok.clone());
        pointers.push(ptr);
    }
    (tokens, pointers)
}

/// Word and key vocabularies of a corpus. Words come from descriptions and
/// record values, keys from record keys.
pub fn build_vocabularies(
    instances: &[TableInstance],
    max_words: usize,
    max_keys: usize,
) -> Result<(vocab::Vocab, vocab::Vocab)> {
    let words = instances
        .iter()
        .flat_map(|i| i.description.iter().chain(i.records.iter().map(|r| &r.value_token)));
    let keys = instances.iter().flat_map(|i| i.records.iter().map(|r| &r.key_token));
    Ok((vocab::Vocab::build(words, max_words)?, vocab::Vocab::build(keys, max_keys)?))
}
