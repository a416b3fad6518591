//! End-to-end generation: plan, then seam.

use std::time::Instant;

use rayon::prelude::*;

use crate::corpus::Record;
use crate::encoder::encode_table;
use crate::error::{PtsError, Result};
use crate::model::Model;
use crate::planner::{PassCounter, Planner, RethinkMode};
use crate::seamer::{DecodeTrace, Seamer};
use crate::sequence::{EditSequence, Origin, Symbol};

#[derive(Clone, Debug, PartialEq)]
pub struct Generation {
    pub plan: Vec<String>,
    /// Source record of each plan token.
    pub plan_pointers: Vec<usize>,
    pub text: Vec<String>,
    pub trace: DecodeTrace,
}

#[derive(Clone, Copy, Debug)]
pub struct Generator<'m> {
    model: &'m Model,
    pub max_iter: usize,
    pub rethink: RethinkMode,
}

impl<'m> Generator<'m> {
    pub fn new(model: &'m Model, max_iter: usize) -> Self {
        Self {
            model,
            max_iter,
            rethink: Planner::new(model).mode(),
        }
    }

    pub fn with_rethink(mut self, mode: RethinkMode) -> Self {
        self.rethink = mode;
        self
    }

    pub fn generate(&self, records: &[Record]) -> Result<Generation> {
        let start = Instant::now();
        let memory = encode_table(self.model, records)?;
        let (plan, state) = Planner::with_mode(self.model, self.rethink).plan_with_memory(records, &memory)?;
        let (text, mut trace) = Seamer::new(self.model).seam_from(&plan, &memory, self.max_iter, state.passes)?;
        trace.elapsed = start.elapsed();
        Ok(Generation {
            plan: plan.words(),
            plan_pointers: plan.copied_from().into_iter().flatten().collect(),
            text,
            trace,
        })
    }

    /// Skips planning and seams a given plan (record indices).
    pub fn generate_with_plan(&self, records: &[Record], pointers: &[usize]) -> Result<Generation> {
        let start = Instant::now();
        if let Some(&bad) = pointers.iter().find(|&&p| p >= records.len()) {
            return Err(PtsError::InvalidPlan(format!("pointer {bad} outside {} records", records.len())));
        }
        let memory = encode_table(self.model, records)?;
        let plan = EditSequence::from_words(
            pointers.iter().map(|&j| Symbol::Word {
                text: records[j].value_token.clone(),
                id: self.model.vocab.id(&records[j].value_token),
                origin: Origin::Copied(j),
            }),
            self.model.config().max_length,
        );
        let (text, mut trace) = Seamer::new(self.model).seam_from(&plan, &memory, self.max_iter, PassCounter::default())?;
        trace.elapsed = start.elapsed();
        Ok(Generation {
            plan: plan.words(),
            plan_pointers: pointers.to_vec(),
            text,
            trace,
        })
    }

    /// Generates for several tables in parallel; results keep input order.
    pub fn generate_batch(&self, tables: &[&[Record]]) -> Result<Vec<Generation>> {
        tables.par_iter().map(|t| self.generate(t)).collect()
    }

    pub fn generate_batch_with_plans(&self, tables: &[(&[Record], &[usize])]) -> Result<Vec<Generation>> {
        tables.par_iter().map(|(t, p)| self.generate_with_plan(t, p)).collect()
    }
}
