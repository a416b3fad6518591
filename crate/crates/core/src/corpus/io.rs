//! JSON-lines dataset files.
//!
//! One instance per line:
//!
//! ```text
//! {"table": [["name", "sean macias"], ["occupation", "lawyer"]],
//!  "description": "sean macias is a lawyer .",
//!  "plan": {"tokens": ["sean", "macias", "lawyer"], "pointers": [0, 1, 2]}}
//! ```
//!
//! `plan` is optional; instances without it are annotated on load.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{linearize_table, regroup, tokenize, annotate_plan, Stopwords, TableInstance};
use crate::error::{PtsError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanAnnotation {
    pub tokens: Vec<String>,
    pub pointers: Vec<usize>,
}

/// One line of a dataset file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetLine {
    pub table: Vec<(String, String)>,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanAnnotation>,
}

impl DatasetLine {
    pub fn from_instance(inst: &TableInstance) -> Self {
        Self {
            table: regroup(&inst.records)
                .into_iter()
                .map(|(k, v)| (k, v.join(" ")))
                .collect(),
            description: inst.description.join(" "),
            plan: Some(PlanAnnotation {
                tokens: inst.plan_tokens.clone(),
                pointers: inst.plan_pointers.clone(),
            }),
        }
    }

    /// Lowercases the table and the description; drops the plan, whose
    /// tokens would no longer match.
    pub fn lowercased(&self) -> Self {
        Self {
            table: self
                .table
                .iter()
                .map(|(k, v)| (k.to_lowercase(), v.to_lowercase()))
                .collect(),
            description: self.description.to_lowercase(),
            plan: None,
        }
    }

    /// Converts to an instance, annotating the plan when the line has none.
    pub fn to_instance(&self, stopwords: &Stopwords) -> Result<TableInstance> {
        let pairs: Vec<(&str, Vec<&str>)> = self
            .table
            .iter()
            .map(|(k, v)| (k.as_str(), v.split_whitespace().collect()))
            .collect();
        let records = linearize_table(&pairs)?;
        let description = tokenize(&self.description);
        let (plan_tokens, plan_pointers) = match &self.plan {
            Some(p) => (p.tokens.clone(), p.pointers.clone()),
            None => annotate_plan(&records, &description, stopwords),
        };
        let inst = TableInstance {
            records,
            description,
            plan_pointers,
            plan_tokens,
        };
        inst.validate()?;
        Ok(inst)
    }
}

pub fn read_lines(path: &Path) -> Result<Vec<DatasetLine>> {
    if !path.exists() {
        return Err(PtsError::MissingFile(path.to_owned()));
    }
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str(&line).map_err(|e| PtsError::Dataset {
            path: path.to_owned(),
            line: i + 1,
            detail: e.to_string(),
        })?;
        out.push(parsed);
    }
    Ok(out)
}

pub fn write_lines(path: &Path, lines: &[DatasetLine]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for line in lines {
        serde_json::to_writer(&mut w, line)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset and converts every line to an instance.
pub fn read_dataset(path: &Path, stopwords: &Stopwords) -> Result<Vec<TableInstance>> {
    read_lines(path)?
        .iter()
        .enumerate()
        .map(|(i, l)| {
            l.to_instance(stopwords).map_err(|e| PtsError::Dataset {
                path: path.to_owned(),
                line: i + 1,
                detail: e.to_string(),
            })
        })
        .collect()
}

pub fn write_dataset(path: &Path, instances: &[TableInstance]) -> Result<()> {
    let lines: Vec<DatasetLine> = instances.iter().map(DatasetLine::from_instance).collect();
    write_lines(path, &lines)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synth::generate_synthetic_corpus;

    #[test]
    fn instances_survive_a_file_round_trip() {
        let corpus = generate_synthetic_corpus(4, 10);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        write_dataset(&path, &corpus).unwrap();
        let back = read_dataset(&path, &Stopwords::english()).unwrap();
        assert_eq!(back, corpus);
    }

    #[test]
    fn missing_plan_is_annotated() {
        let line: DatasetLine = serde_json::from_str(
            r#"{"table": [["name", "sean macias"], ["occupation", "lawyer"]], "description": "sean macias is a lawyer ."}"#,
        )
        .unwrap();
        let inst = line.to_instance(&Stopwords::english()).unwrap();
        assert_eq!(inst.plan_tokens, ["sean", "macias", "lawyer"]);
    }

    #[test]
    fn bad_plan_is_rejected() {
        let line: DatasetLine = serde_json::from_str(
            r#"{"table": [["name", "sean"]], "description": "sean", "plan": {"tokens": ["bob"], "pointers": [0]}}"#,
        )
        .unwrap();
        assert!(matches!(line.to_instance(&Stopwords::english()), Err(PtsError::InvalidPlan(_))));
    }

    #[test]
    fn malformed_line_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "{\"table\": []\n").unwrap();
        let err = read_lines(&path).unwrap_err();
        assert!(err.to_string().contains(":1:"), "{err}");
    }
}
