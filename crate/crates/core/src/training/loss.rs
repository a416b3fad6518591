//! Joint planning and seaming objective on one instance.

use ndarray::{Array2, ArrayView1};
use rand::Rng;

use super::targets::{corrupt_reference, gaps_from_alignment, leftmost_alignment, lcs};
use crate::corpus::vocab::{TokenId, BOS, EOS, PAD, PLH};
use crate::corpus::TableInstance;
use crate::error::Result;
use crate::model::{EncodedRecord, Model, Network};
use crate::nnet::{Scalar, Tape, Var};

/// An instance converted to vocabulary ids.
#[derive(Clone, Debug)]
pub struct Example {
    pub records: Vec<EncodedRecord>,
    pub record_values: Vec<String>,
    pub record_ids: Vec<TokenId>,
    pub plan_pointers: Vec<usize>,
    pub plan_tokens: Vec<String>,
    pub reference: Vec<String>,
    pub reference_ids: Vec<TokenId>,
}

impl Example {
    pub fn new(model: &Model, inst: &TableInstance) -> Self {
        Self {
            records: inst.records.iter().map(|r| model.encode_record(r)).collect(),
            record_values: inst.records.iter().map(|r| r.value_token.clone()).collect(),
            record_ids: inst.records.iter().map(|r| model.vocab.id(&r.value_token)).collect(),
            plan_pointers: inst.plan_pointers.clone(),
            plan_tokens: inst.plan_tokens.clone(),
            reference: inst.description.clone(),
            reference_ids: inst.description.iter().map(|t| model.vocab.id(t)).collect(),
        }
    }
}

/// Seaming supervision for one corrupted reference.
#[derive(Clone, Debug, PartialEq)]
pub struct SeamTargets {
    /// `[BOS] y^m [EOS]` ids.
    pub input: Vec<TokenId>,
    /// Insertions per gap of `input`.
    pub gaps: Vec<usize>,
    /// `[BOS] y* [EOS]` with every token missing from `y^m` set to PLH.
    pub slotted: Vec<TokenId>,
    /// Positions of PLH in `slotted`.
    pub slots: Vec<usize>,
    /// Reference ids at `slots`.
    pub slot_targets: Vec<TokenId>,
}

impl SeamTargets {
    /// Targets for a given set of kept reference positions.
    pub fn from_kept(reference_ids: &[TokenId], kept: &[usize]) -> Self {
        let mut input = vec![BOS];
        input.extend(kept.iter().map(|&i| reference_ids[i]));
        input.push(EOS);
        let gaps = gaps_from_alignment(kept, reference_ids.len());
        let mut slotted = vec![BOS];
        slotted.extend_from_slice(reference_ids);
        slotted.push(EOS);
        let mut is_kept = vec![false; reference_ids.len()];
        for &k in kept {
            is_kept[k] = true;
        }
        let slots: Vec<usize> = (0..reference_ids.len()).filter(|&i| !is_kept[i]).map(|i| i + 1).collect();
        let slot_targets = slots.iter().map(|&p| slotted[p]).collect();
        for &p in &slots {
            slotted[p] = PLH;
        }
        Self {
            input,
            gaps,
            slotted,
            slots,
            slot_targets,
        }
    }

    /// Corrupts the reference around its common subsequence with the plan.
    pub fn sample<R: Rng + ?Sized>(ex: &Example, rng: &mut R) -> Result<Self> {
        let protected = lcs(&ex.plan_tokens, &ex.reference);
        let kept_tokens = corrupt_reference(&ex.reference, &protected, rng)?;
        let kept = leftmost_alignment(&kept_tokens, &ex.reference)?;
        Ok(Self::from_kept(&ex.reference_ids, &kept))
    }
}

/// Argmax choices made inside the loss. Passing them back in freezes the
/// discrete parts of the graph.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Decisions {
    pub first_pointer: Vec<usize>,
    pub final_pointer: Vec<usize>,
    pub filled: Vec<TokenId>,
}

/// The six loss terms.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts<T> {
    pub plan_count: T,
    /// Both pointer heads together.
    pub plan_pointer: T,
    pub plan_delete: T,
    pub seam_insert: T,
    pub seam_token: T,
    pub seam_delete: T,
}

impl<T: Copy + std::ops::Add<Output = T>> LossParts<T> {
    pub fn plan(&self) -> T {
        self.plan_count + self.plan_pointer + self.plan_delete
    }

    pub fn seam(&self) -> T {
        self.seam_insert + self.seam_token + self.seam_delete
    }
}

impl LossParts<f64> {
    pub fn add(&mut self, o: &Self) {
        self.plan_count += o.plan_count;
        self.plan_pointer += o.plan_pointer;
        self.plan_delete += o.plan_delete;
        self.seam_insert += o.seam_insert;
        self.seam_token += o.seam_token;
        self.seam_delete += o.seam_delete;
    }

    pub fn scale(&mut self, f: f64) {
        for v in [
            &mut self.plan_count,
            &mut self.plan_pointer,
            &mut self.plan_delete,
            &mut self.seam_insert,
            &mut self.seam_token,
            &mut self.seam_delete,
        ] {
            *v *= f;
        }
    }

    pub fn total(&self, lambda: f64) -> f64 {
        lambda * self.plan() + self.seam()
    }
}

/// Graph handles of one instance's loss.
pub struct LossGraph {
    pub total: Var,
    pub parts: LossParts<Var>,
    pub decisions: Decisions,
}

impl LossGraph {
    pub fn values<T: Scalar>(&self, tape: &Tape<T>) -> LossParts<f64> {
        let v = |x: Var| tape.scalar(x).as_f64();
        LossParts {
            plan_count: v(self.parts.plan_count),
            plan_pointer: v(self.parts.plan_pointer),
            plan_delete: v(self.parts.plan_delete),
            seam_insert: v(self.parts.seam_insert),
            seam_token: v(self.parts.seam_token),
            seam_delete: v(self.parts.seam_delete),
        }
    }
}

fn row_argmax<T: Scalar>(row: ArrayView1<T>, banned: &[TokenId]) -> usize {
    let mut best: Option<usize> = None;
    for (i, &x) in row.iter().enumerate() {
        if banned.contains(&(i as TokenId)) {
            continue;
        }
        if best.is_none_or(|b| x > row[b]) {
            best = Some(i);
        }
    }
    best.unwrap_or(0)
}

fn argmax_rows<T: Scalar>(m: &Array2<T>, banned: &[TokenId]) -> Vec<usize> {
    m.rows().into_iter().map(|r| row_argmax(r, banned)).collect()
}

fn zero<T: Scalar>(tape: &mut Tape<T>) -> Var {
    tape.constant(Array2::zeros((1, 1)))
}

/// Builds `λ·L_plan + L_seam` for one instance on `tape`.
///
/// Teacher inputs are the all-placeholder plan skeleton and the corrupted
/// reference. Deletion labels mark a position 1 (delete) when the model's
/// own filling disagrees with the reference at that position.
pub fn instance_loss<T: Scalar>(
    net: &Network,
    tape: &mut Tape<T>,
    ex: &Example,
    seam: &SeamTargets,
    lambda: f64,
    forced: Option<&Decisions>,
) -> Result<LossGraph> {
    let cap = net.config.max_placeholders;
    let mut decisions = Decisions::default();

    let emb = net.embed_records(tape, &ex.records);
    let mem = net.encode(tape, emb, None)?;

    // planning: how many plan tokens
    let s0 = net.decode(tape, &[BOS, EOS], mem)?;
    let count_logits = net.placeholder_logits(tape, s0);
    let n = ex.plan_pointers.len();
    let plan_count = tape.cross_entropy(count_logits, &[n.min(cap)]);

    let (plan_pointer, plan_delete) = if n == 0 {
        (zero(tape), zero(tape))
    } else {
        let mut skeleton = vec![BOS];
        skeleton.extend(std::iter::repeat_n(PLH, n));
        skeleton.push(EOS);
        let inner: Vec<usize> = (1..=n).collect();
        let s1 = net.decode(tape, &skeleton, mem)?;
        let rows = tape.gather(s1, &inner);
        let scores = net.pointer_head().scores(tape, rows, mem);
        let first_loss = tape.cross_entropy(scores, &ex.plan_pointers);
        decisions.first_pointer = match forced {
            Some(d) => d.first_pointer.clone(),
            None => argmax_rows(tape.value(scores), &[]),
        };
        let pointer_loss = if let Some(block) = &net.rethink {
            let mut chosen = vec![None];
            chosen.extend(decisions.first_pointer.iter().map(|&j| Some(j)));
            chosen.push(None);
            let re = net.rethink_states(tape, s1, emb, chosen, mem)?;
            let rows2 = tape.gather(re, &inner);
            let scores2 = block.pointer.scores(tape, rows2, mem);
            let second_loss = tape.cross_entropy(scores2, &ex.plan_pointers);
            decisions.final_pointer = match forced {
                Some(d) => d.final_pointer.clone(),
                None => argmax_rows(tape.value(scores2), &[]),
            };
            tape.sum(&[first_loss, second_loss])
        } else {
            decisions.final_pointer = decisions.first_pointer.clone();
            first_loss
        };
        let mut filled = vec![BOS];
        filled.extend(decisions.final_pointer.iter().map(|&j| ex.record_ids[j]));
        filled.push(EOS);
        let labels: Vec<usize> = decisions
            .final_pointer
            .iter()
            .zip(&ex.plan_tokens)
            .map(|(&j, t)| usize::from(ex.record_values[j] != *t))
            .collect();
        let s3 = net.decode(tape, &filled, mem)?;
        let rows3 = tape.gather(s3, &inner);
        let del = net.deletion_logits(tape, rows3);
        (pointer_loss, tape.cross_entropy(del, &labels))
    };

    // seaming: insertions into the corrupted reference
    let sm = net.decode(tape, &seam.input, mem)?;
    let gap_logits = net.placeholder_logits(tape, sm);
    let gap_targets: Vec<usize> = seam.gaps.iter().map(|&g| g.min(cap)).collect();
    let seam_insert = tape.cross_entropy(gap_logits, &gap_targets);

    let mut filled = seam.slotted.clone();
    let seam_token = if seam.slots.is_empty() {
        zero(tape)
    } else {
        let sl = net.decode(tape, &seam.slotted, mem)?;
        let rows = tape.gather(sl, &seam.slots);
        let logits = net.token_logits(tape, rows);
        let targets: Vec<usize> = seam.slot_targets.iter().map(|&t| t as usize).collect();
        let loss = tape.cross_entropy(logits, &targets);
        decisions.filled = match forced {
            Some(d) => d.filled.clone(),
            None => argmax_rows(tape.value(logits), &[BOS, EOS, PLH, PAD])
                .into_iter()
                .map(|i| i as TokenId)
                .collect(),
        };
        for (&p, &id) in seam.slots.iter().zip(&decisions.filled) {
            filled[p] = id;
        }
        loss
    };
    let m = ex.reference_ids.len();
    let seam_delete = if m == 0 {
        zero(tape)
    } else {
        let labels: Vec<usize> = (1..=m).map(|p| usize::from(filled[p] != ex.reference_ids[p - 1])).collect();
        let st = net.decode(tape, &filled, mem)?;
        let rows = tape.gather(st, &(1..=m).collect::<Vec<_>>());
        let del = net.deletion_logits(tape, rows);
        tape.cross_entropy(del, &labels)
    };

    let plan = tape.sum(&[plan_count, plan_pointer, plan_delete]);
    let weighted = tape.scale(plan, T::lit(lambda));
    let total = tape.sum(&[weighted, seam_insert, seam_token, seam_delete]);
    Ok(LossGraph {
        total,
        parts: LossParts {
            plan_count,
            plan_pointer,
            plan_delete,
            seam_insert,
            seam_token,
            seam_delete,
        },
        decisions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seam_targets_from_kept_positions() {
        // reference a b c, keep a and c
        let t = SeamTargets::from_kept(&[10, 11, 12], &[0, 2]);
        assert_eq!(t.input, [BOS, 10, 12, EOS]);
        assert_eq!(t.gaps, [0, 1, 0]);
        assert_eq!(t.slotted, [BOS, 10, PLH, 12, EOS]);
        assert_eq!(t.slots, [2]);
        assert_eq!(t.slot_targets, [11]);
        assert_eq!(t.gaps.iter().sum::<usize>(), t.slots.len());
    }
}
