//! Corpus BLEU, ROUGE-L, repetition, Distinct-n and decoding measurements.

use std::collections::{HashMap, HashSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corpus::TableInstance;
use crate::error::{PtsError, Result};
use crate::inference::{Generation, Generator};

/// Precision assigned to an n-gram order with no matches, as a count.
pub const BLEU_SMOOTHING: f64 = 0.1;
/// Recall weight of ROUGE-L.
pub const ROUGE_BETA: f64 = 1.2;

fn check_parallel<S>(hyps: &[Vec<S>], refs: &[Vec<S>]) -> Result<()> {
    if hyps.is_empty() {
        return Err(PtsError::EmptyCorpus);
    }
    if hyps.len() != refs.len() {
        return Err(PtsError::DimensionMismatch(format!(
            "{} hypotheses for {} references",
            hyps.len(),
            refs.len()
        )));
    }
    Ok(())
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus-level BLEU-4 in `[0, 100]` with brevity penalty.
///
/// Orders for which the hypotheses contain no n-grams at all are left out
/// of the geometric mean; an order with n-grams but no matches gets
/// [`BLEU_SMOOTHING`] matches.
pub fn bleu<S: AsRef<str>>(hyps: &[Vec<S>], refs: &[Vec<S>]) -> Result<f64> {
    check_parallel(hyps, refs)?;
    let mut matches = [0usize; 4];
    let mut totals = [0usize; 4];
    let (mut hyp_len, mut ref_len) = (0usize, 0usize);
    for (h, r) in hyps.iter().zip(refs) {
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=4 {
            let hc = ngram_counts(h, n);
            let rc = ngram_counts(r, n);
            totals[n - 1] += h.len().saturating_sub(n - 1);
            matches[n - 1] += hc.iter().map(|(g, &c)| c.min(rc.get(g).copied().unwrap_or(0))).sum::<usize>();
        }
    }
    if hyp_len == 0 {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    let mut orders = 0;
    for n in 0..4 {
        if totals[n] == 0 {
            continue;
        }
        let m = if matches[n] == 0 { BLEU_SMOOTHING } else { matches[n] as f64 };
        log_sum += (m / totals[n] as f64).ln();
        orders += 1;
    }
    let precision = (log_sum / orders as f64).exp();
    let bp = if hyp_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    Ok(100.0 * bp * precision)
}

fn lcs_len<S: AsRef<str>>(a: &[S], b: &[S]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x.as_ref() == y.as_ref() { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// ROUGE-L F-measure of one pair.
pub fn rouge_l_pair<S: AsRef<str>>(hyp: &[S], reference: &[S]) -> f64 {
    if hyp.is_empty() && reference.is_empty() {
        return 1.0;
    }
    let l = lcs_len(hyp, reference);
    if l == 0 {
        return 0.0;
    }
    let p = l as f64 / hyp.len() as f64;
    let r = l as f64 / reference.len() as f64;
    let b2 = ROUGE_BETA * ROUGE_BETA;
    (1.0 + b2) * p * r / (r + b2 * p)
}

/// Mean per-sentence ROUGE-L F-measure.
pub fn rouge_l<S: AsRef<str>>(hyps: &[Vec<S>], refs: &[Vec<S>]) -> Result<f64> {
    check_parallel(hyps, refs)?;
    let total: f64 = hyps.iter().zip(refs).map(|(h, r)| rouge_l_pair(h, r)).sum();
    Ok(total / hyps.len() as f64)
}

/// Percentage of tokens in a sentence that repeat an earlier token,
/// averaged over sentences.
pub fn repetition<S: AsRef<str>>(hyps: &[Vec<S>]) -> f64 {
    if hyps.is_empty() {
        return 0.0;
    }
    let total: f64 = hyps
        .iter()
        .map(|h| {
            if h.is_empty() {
                return 0.0;
            }
            let unique: HashSet<&str> = h.iter().map(AsRef::as_ref).collect();
            (h.len() - unique.len()) as f64 / h.len() as f64
        })
        .sum();
    100.0 * total / hyps.len() as f64
}

/// Distinct n-grams over all n-grams in the corpus.
pub fn distinct_n<S: AsRef<str>>(hyps: &[Vec<S>], n: usize) -> f64 {
    let mut unique: HashSet<Vec<&str>> = HashSet::new();
    let mut total = 0usize;
    for h in hyps {
        if h.len() >= n {
            for w in h.windows(n) {
                unique.insert(w.iter().map(AsRef::as_ref).collect());
                total += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        unique.len() as f64 / total as f64
    }
}

/// `(repetition %, Distinct-1, Distinct-2)`.
pub fn repetition_and_distinct<S: AsRef<str>>(hyps: &[Vec<S>]) -> (f64, f64, f64) {
    (repetition(hyps), distinct_n(hyps, 1), distinct_n(hyps, 2))
}

/// Micro-averaged token F1 between predicted and reference plans, counting
/// each token type up to its multiplicity in both. Returns a fraction.
pub fn plan_f1<S: AsRef<str>>(predicted: &[Vec<S>], gold: &[Vec<S>]) -> Result<f64> {
    check_parallel(predicted, gold)?;
    let (mut overlap, mut n_pred, mut n_gold) = (0usize, 0usize, 0usize);
    for (p, g) in predicted.iter().zip(gold) {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in g {
            *counts.entry(t.as_ref()).or_insert(0) += 1;
        }
        for t in p {
            if let Some(c) = counts.get_mut(t.as_ref()).filter(|c| **c > 0) {
                *c -= 1;
                overlap += 1;
            }
        }
        n_pred += p.len();
        n_gold += g.len();
    }
    if n_pred + n_gold == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * overlap as f64 / (n_pred + n_gold) as f64)
}

/// Tokens generated between plan tokens, most frequent first (ties by
/// token).
pub fn seam_token_frequency(generations: &[Generation]) -> Vec<(String, usize)> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for g in generations {
        let mut plan: HashMap<&str, usize> = HashMap::new();
        for p in &g.plan {
            *plan.entry(p.as_str()).or_insert(0) += 1;
        }
        for t in &g.text {
            match plan.get_mut(t.as_str()) {
                Some(c) if *c > 0 => *c -= 1,
                _ => *counts.entry(t.as_str()).or_insert(0) += 1,
            }
        }
    }
    let mut out: Vec<(String, usize)> = counts.into_iter().map(|(t, c)| (t.to_owned(), c)).collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub bleu: f64,
    pub rouge_l: f64,
    pub distinct_1: f64,
    pub distinct_2: f64,
    pub repetition: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_decoder_passes: Option<f64>,
}

impl EvalReport {
    pub fn evaluate<S: AsRef<str>>(hyps: &[Vec<S>], refs: &[Vec<S>]) -> Result<Self> {
        let (repetition, distinct_1, distinct_2) = repetition_and_distinct(hyps);
        Ok(Self {
            bleu: bleu(hyps, refs)?,
            rouge_l: rouge_l(hyps, refs)?,
            distinct_1,
            distinct_2,
            repetition,
            latency_ms: None,
            mean_decoder_passes: None,
        })
    }

    /// `key: value` lines.
    pub fn to_text(&self) -> String {
        let mut s = format!("# rouge_l is the mean sentence F-measure with beta={ROUGE_BETA}\n");
        s += &format!("bleu: {:.4}\n", self.bleu);
        s += &format!("rouge_l: {:.4}\n", self.rouge_l);
        s += &format!("distinct_1: {:.4}\n", self.distinct_1);
        s += &format!("distinct_2: {:.4}\n", self.distinct_2);
        s += &format!("repetition: {:.4}\n", self.repetition);
        if let Some(l) = self.latency_ms {
            s += &format!("latency_ms: {l:.3}\n");
        }
        if let Some(i) = self.mean_decoder_passes {
            s += &format!("mean_decoder_passes: {i:.3}\n");
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }
}

/// Outcome of timing a decode over a dataset.
#[derive(Clone, Debug)]
pub struct DecodeMeasurement {
    /// Mean wall-clock per batch.
    pub latency_ms: f64,
    /// Mean decoder passes per instance.
    pub mean_decoder_passes: f64,
    pub generations: Vec<Generation>,
}

/// Decodes `dataset` in batches of `batch_size` and times each batch.
/// With `gold_plan`, the reference plans replace the planner.
pub fn measure_decode(
    generator: &Generator,
    dataset: &[TableInstance],
    batch_size: usize,
    gold_plan: bool,
) -> Result<DecodeMeasurement> {
    if dataset.is_empty() {
        return Err(PtsError::EmptyCorpus);
    }
    let batch_size = batch_size.max(1);
    let mut generations = Vec::with_capacity(dataset.len());
    let mut elapsed_ms = 0.0;
    let mut batches = 0;
    for chunk in dataset.chunks(batch_size) {
        let start = Instant::now();
        let out = if gold_plan {
            let inputs: Vec<(&[_], &[usize])> = chunk.iter().map(|i| (&i.records[..], &i.plan_pointers[..])).collect();
            generator.generate_batch_with_plans(&inputs)?
        } else {
            let inputs: Vec<&[_]> = chunk.iter().map(|i| &i.records[..]).collect();
            generator.generate_batch(&inputs)?
        };
        elapsed_ms += start.elapsed().as_secs_f64() * 1e3;
        batches += 1;
        generations.extend(out);
    }
    let passes: usize = generations.iter().map(|g| g.trace.decoder_passes()).sum();
    Ok(DecodeMeasurement {
        latency_ms: elapsed_ms / batches as f64,
        mean_decoder_passes: passes as f64 / generations.len() as f64,
        generations,
    })
}
