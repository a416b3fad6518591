//! Non-autoregressive content planning.
//!
//! From `[BOS][EOS]` the planner predicts how many plan tokens to emit,
//! fills every placeholder at once by pointing into the table, optionally
//! re-reads the filled plan with a second pointer head, and finally drops
//! tokens the deletion head rejects. The number of decoder passes does not
//! depend on the plan length.

use ndarray::Array2;

use crate::corpus::Record;
use crate::encoder::{encode_table, TableMemory};
use crate::error::Result;
use crate::model::Model;
use crate::nnet::{softmax, Linear, Tape, Var};
use crate::sequence::{EditSequence, Origin, Symbol};

/// How the second pointer head is used.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RethinkMode {
    /// Replace the first head's choices with the second head's.
    Full,
    /// Run the rethinking block but keep the first head's choices.
    Echo,
    /// Skip rethinking.
    Off,
}

/// Decoder passes executed, by purpose.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PassCounter {
    pub placeholder: usize,
    pub pointer: usize,
    pub token: usize,
    pub deletion: usize,
}

impl PassCounter {
    pub fn total(&self) -> usize {
        self.placeholder + self.pointer + self.token + self.deletion
    }
}

#[derive(Clone, Debug)]
pub struct PlanState {
    /// Final plan.
    pub sequence: EditSequence,
    /// Plan after the first pointer head.
    pub first_pass: EditSequence,
    /// Plan before deletion.
    pub before_deletion: EditSequence,
    pub placeholder_count_dist: Vec<f32>,
    pub pointer_dists: Vec<Vec<f32>>,
    pub rethink_dists: Vec<Vec<f32>>,
    pub delete_probs: Vec<f32>,
    pub passes: PassCounter,
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f32]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Flags tokens whose delete probability strictly exceeds one half;
/// boundaries are never flagged.
pub fn deletion_flags(seq: &EditSequence, delete_probs: &[f32]) -> Vec<bool> {
    seq.symbols()
        .iter()
        .zip(delete_probs)
        .map(|(s, &p)| !s.is_boundary() && p > 0.5)
        .collect()
}

pub(crate) fn row_softmax(m: &Array2<f32>) -> Vec<Vec<f32>> {
    m.rows().into_iter().map(|r| softmax(r.as_slice().unwrap_or(&r.to_vec()))).collect()
}

/// Runs one decoder pass over `ids` against `memory`.
pub(crate) fn decoder_pass<'m>(model: &'m Model, ids: &[u32], memory: &TableMemory) -> Result<(Tape<'m, f32>, Var, Var)> {
    let mut tape = Tape::new(&model.params);
    let mem = tape.constant(memory.states.clone());
    let states = model.net.decode(&mut tape, ids, mem)?;
    Ok((tape, states, mem))
}

/// Per-token delete probabilities from one decoder pass.
pub(crate) fn deletion_probs(model: &Model, seq: &EditSequence, memory: &TableMemory) -> Result<Vec<f32>> {
    let (mut tape, states, _) = decoder_pass(model, &seq.ids(), memory)?;
    let logits = model.net.deletion_logits(&mut tape, states);
    Ok(row_softmax(tape.value(logits)).into_iter().map(|p| p[1]).collect())
}

pub struct Planner<'m> {
    model: &'m Model,
    mode: RethinkMode,
}

impl<'m> Planner<'m> {
    pub fn new(model: &'m Model) -> Self {
        let mode = if model.net.rethink.is_some() {
            RethinkMode::Full
        } else {
            RethinkMode::Off
        };
        Self { model, mode }
    }

    /// Chooses how rethinking is applied; modes other than `Off` need a
    /// model built with rethinking.
    pub fn with_mode(model: &'m Model, mode: RethinkMode) -> Self {
        assert!(
            mode == RethinkMode::Off || model.net.rethink.is_some(),
            "model has no rethinking block"
        );
        Self { model, mode }
    }

    pub fn mode(&self) -> RethinkMode {
        self.mode
    }

    pub fn placeholder_head(&self) -> &'m Linear {
        &self.model.net.placeholder_head
    }

    pub fn deletion_head(&self) -> &'m Linear {
        &self.model.net.deletion_head
    }

    fn capacity(&self) -> usize {
        self.model.config().max_length
    }

    /// Distribution over plan lengths `0..=L` from the `[BOS][EOS]` pass.
    pub fn predict_placeholder_count(&self, memory: &TableMemory, passes: &mut PassCounter) -> Result<(Vec<f32>, usize)> {
        let seq = EditSequence::empty(self.capacity());
        let (mut tape, states, _) = decoder_pass(self.model, &seq.ids(), memory)?;
        passes.placeholder += 1;
        let logits = self.model.net.placeholder_logits(&mut tape, states);
        let dist = row_softmax(tape.value(logits)).remove(0);
        let l = argmax(&dist);
        Ok((dist, l))
    }

    fn copy(&self, records: &[Record], j: usize) -> Symbol {
        let text = records[j].value_token.clone();
        Symbol::Word {
            id: self.model.vocab.id(&text),
            text,
            origin: Origin::Copied(j),
        }
    }

    /// Fills every placeholder with its most likely record. Returns the
    /// pointer distributions, the filled sequence and the decoder states of
    /// the placeholder sequence.
    pub fn point_records(
        &self,
        skeleton: &EditSequence,
        records: &[Record],
        memory: &TableMemory,
        passes: &mut PassCounter,
    ) -> Result<(Vec<Vec<f32>>, EditSequence, Array2<f32>)> {
        let (mut tape, states, mem) = decoder_pass(self.model, &skeleton.ids(), memory)?;
        passes.pointer += 1;
        let slots = skeleton.placeholder_positions();
        let rows = tape.gather(states, &slots);
        let scores = self.model.net.pointer_head().scores(&mut tape, rows, mem);
        let dists = row_softmax(tape.value(scores));
        let mut filled = skeleton.clone();
        for (&pos, d) in slots.iter().zip(&dists) {
            filled.replace(pos, self.copy(records, argmax(d)));
        }
        Ok((dists, filled, tape.value(states).clone()))
    }

    /// Re-reads the first-pass plan with the rethinking block and the second
    /// pointer head. `states` are the decoder states of the placeholder pass.
    pub fn rethink(
        &self,
        first: &EditSequence,
        states: &Array2<f32>,
        records: &[Record],
        memory: &TableMemory,
        passes: &mut PassCounter,
    ) -> Result<(Vec<Vec<f32>>, EditSequence)> {
        let mut tape = Tape::new(&self.model.params);
        let mem = tape.constant(memory.states.clone());
        let h = tape.constant(states.clone());
        let emb = tape.constant(memory.record_embeddings.clone());
        let chosen: Vec<Option<usize>> = first
            .symbols()
            .iter()
            .map(|s| match s {
                Symbol::Word {
                    origin: Origin::Copied(j), ..
                } => Some(*j),
                _ => None,
            })
            .collect();
        let slots: Vec<usize> = (0..chosen.len()).filter(|&i| chosen[i].is_some()).collect();
        let re = self.model.net.rethink_states(&mut tape, h, emb, chosen, mem)?;
        passes.pointer += 1;
        let rows = tape.gather(re, &slots);
        let head = &self.model.net.rethink.as_ref().expect("checked at construction").pointer;
        let scores = head.scores(&mut tape, rows, mem);
        let dists = row_softmax(tape.value(scores));
        let mut out = first.clone();
        if self.mode == RethinkMode::Full {
            for (&pos, d) in slots.iter().zip(&dists) {
                out.replace(pos, self.copy(records, argmax(d)));
            }
        }
        Ok((dists, out))
    }

    /// Deletes tokens whose delete probability exceeds one half.
    pub fn delete_tokens(
        &self,
        seq: &EditSequence,
        memory: &TableMemory,
        passes: &mut PassCounter,
    ) -> Result<(Vec<f32>, EditSequence)> {
        let probs = deletion_probs(self.model, seq, memory)?;
        passes.deletion += 1;
        let mut out = seq.clone();
        out.delete(&deletion_flags(seq, &probs));
        Ok((probs, out))
    }

    pub fn plan(&self, records: &[Record]) -> Result<(EditSequence, PlanState)> {
        let memory = encode_table(self.model, records)?;
        self.plan_with_memory(records, &memory)
    }

    pub fn plan_with_memory(&self, records: &[Record], memory: &TableMemory) -> Result<(EditSequence, PlanState)> {
        let mut passes = PassCounter::default();
        let (count_dist, l) = self.predict_placeholder_count(memory, &mut passes)?;
        let mut skeleton = EditSequence::empty(self.capacity());
        skeleton.insert_placeholders(&[l]);
        let (pointer_dists, first, states) = self.point_records(&skeleton, records, memory, &mut passes)?;
        let (rethink_dists, revised) = match self.mode {
            RethinkMode::Off => (Vec::new(), first.clone()),
            _ => self.rethink(&first, &states, records, memory, &mut passes)?,
        };
        let (delete_probs, plan) = self.delete_tokens(&revised, memory, &mut passes)?;
        let state = PlanState {
            sequence: plan.clone(),
            first_pass: first,
            before_deletion: revised,
            placeholder_count_dist: count_dist,
            pointer_dists,
            rethink_dists,
            delete_probs,
            passes,
        };
        Ok((plan, state))
    }
}
