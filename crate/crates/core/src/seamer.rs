//! Iterative seaming: grow a plan into a sentence by inserting vocabulary
//! tokens between existing ones until a fixed point.
//!
//! The seamer reuses the planner's placeholder and deletion heads and
//! swaps the pointer for a token head over the vocabulary.

use std::time::{Duration, Instant};

use crate::corpus::vocab::{BOS, EOS, PAD, PLH};
use crate::encoder::TableMemory;
use crate::error::Result;
use crate::model::Model;
use crate::nnet::Linear;
use crate::planner::{argmax, decoder_pass, deletion_flags, deletion_probs, row_softmax, PassCounter};
use crate::sequence::{EditSequence, Origin, Symbol};

/// What happened while decoding one input.
#[derive(Clone, Debug, Default)]
pub struct DecodeTrace {
    /// Words after each seaming iteration.
    pub snapshots: Vec<Vec<String>>,
    /// Decoder passes, planning included.
    pub passes: PassCounter,
    pub iterations: usize,
    pub elapsed: Duration,
}

/// Equality ignores wall-clock time.
impl PartialEq for DecodeTrace {
    fn eq(&self, other: &Self) -> bool {
        self.snapshots == other.snapshots && self.passes == other.passes && self.iterations == other.iterations
    }
}

impl DecodeTrace {
    /// Decoder forward passes executed.
    pub fn decoder_passes(&self) -> usize {
        self.passes.total()
    }
}

pub struct Seamer<'m> {
    model: &'m Model,
}

impl<'m> Seamer<'m> {
    pub fn new(model: &'m Model) -> Self {
        Self { model }
    }

    pub fn placeholder_head(&self) -> &'m Linear {
        &self.model.net.placeholder_head
    }

    pub fn deletion_head(&self) -> &'m Linear {
        &self.model.net.deletion_head
    }

    /// Number of tokens to insert in each of the `len - 1` gaps.
    pub fn predict_gap_insertions(
        &self,
        seq: &EditSequence,
        memory: &TableMemory,
        passes: &mut PassCounter,
    ) -> Result<Vec<usize>> {
        let (mut tape, states, _) = decoder_pass(self.model, &seq.ids(), memory)?;
        passes.placeholder += 1;
        let logits = self.model.net.placeholder_logits(&mut tape, states);
        Ok(row_softmax(tape.value(logits)).iter().map(|d| argmax(d)).collect())
    }

    /// Replaces each placeholder with the best vocabulary token (boundary,
    /// placeholder and padding symbols are never chosen). Returns the token
    /// distribution of every placeholder. Without placeholders this is the
    /// identity and runs no decoder pass.
    pub fn fill_placeholders(
        &self,
        seq: &EditSequence,
        memory: &TableMemory,
        passes: &mut PassCounter,
    ) -> Result<(Vec<Vec<f32>>, EditSequence)> {
        let slots = seq.placeholder_positions();
        if slots.is_empty() {
            return Ok((Vec::new(), seq.clone()));
        }
        let (mut tape, states, _) = decoder_pass(self.model, &seq.ids(), memory)?;
        passes.token += 1;
        let rows = tape.gather(states, &slots);
        let logits = self.model.net.token_logits(&mut tape, rows);
        let dists = row_softmax(tape.value(logits));
        let mut out = seq.clone();
        for (&pos, d) in slots.iter().zip(&dists) {
            let mut masked = d.clone();
            for banned in [BOS, EOS, PLH, PAD] {
                masked[banned as usize] = f32::NEG_INFINITY;
            }
            let id = argmax(&masked) as u32;
            out.replace(
                pos,
                Symbol::Word {
                    text: self.model.vocab.token(id).to_owned(),
                    id,
                    origin: Origin::Generated,
                },
            );
        }
        Ok((dists, out))
    }

    pub fn delete_tokens(&self, seq: &EditSequence, memory: &TableMemory, passes: &mut PassCounter) -> Result<EditSequence> {
        let probs = deletion_probs(self.model, seq, memory)?;
        passes.deletion += 1;
        let mut out = seq.clone();
        out.delete(&deletion_flags(seq, &probs));
        Ok(out)
    }

    /// Refines `plan` for at most `max_iter` insert/fill/delete cycles,
    /// stopping early once an iteration leaves the sequence unchanged.
    pub fn seam(&self, plan: &EditSequence, memory: &TableMemory, max_iter: usize) -> Result<(Vec<String>, DecodeTrace)> {
        self.seam_from(plan, memory, max_iter, PassCounter::default())
    }

    /// As [`Seamer::seam`], with passes already spent (by planning) carried
    /// into the trace.
    pub fn seam_from(
        &self,
        plan: &EditSequence,
        memory: &TableMemory,
        max_iter: usize,
        passes: PassCounter,
    ) -> Result<(Vec<String>, DecodeTrace)> {
        let start = Instant::now();
        let mut trace = DecodeTrace {
            passes,
            ..Default::default()
        };
        let mut seq = plan.clone();
        for _ in 0..max_iter {
            let previous = seq.clone();
            let counts = self.predict_gap_insertions(&seq, memory, &mut trace.passes)?;
            seq.insert_placeholders(&counts);
            seq = self.fill_placeholders(&seq, memory, &mut trace.passes)?.1;
            seq = self.delete_tokens(&seq, memory, &mut trace.passes)?;
            trace.iterations += 1;
            trace.snapshots.push(seq.words());
            if seq == previous {
                break;
            }
        }
        trace.elapsed = start.elapsed();
        Ok((seq.words(), trace))
    }
}
