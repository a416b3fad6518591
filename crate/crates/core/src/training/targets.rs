//! Supervision targets: longest common subsequence, reference corruption
//! and per-gap insertion counts.

use rand::Rng;

use crate::error::{PtsError, Result};

/// Index pairs `(i, j)` with `a[i] == b[j]` forming a longest common
/// subsequence. Among all longest ones, the sequence of `b` positions is the
/// lexicographically smallest.
pub fn lcs_alignment<T: PartialEq>(a: &[T], b: &[T]) -> Vec<(usize, usize)> {
    let (n, m) = (a.len(), b.len());
    // suffix table: best[i][j] = LCS length of a[i..] and b[j..]
    let mut best = vec![vec![0usize; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            best[i][j] = if a[i] == b[j] {
                1 + best[i + 1][j + 1]
            } else {
                best[i + 1][j].max(best[i][j + 1])
            };
        }
    }
    let mut out = Vec::with_capacity(best[0][0]);
    let (mut i, mut j) = (0, 0);
    while best[i][j] > 0 {
        let need = best[i][j];
        // earliest b position that can still start an optimal completion,
        // paired with the earliest a position matching it
        let (ii, jj) = (j..m)
            .flat_map(|jj| (i..n).map(move |ii| (ii, jj)))
            .find(|&(ii, jj)| a[ii] == b[jj] && 1 + best[ii + 1][jj + 1] == need)
            .expect("an optimal continuation exists while best > 0");
        out.push((ii, jj));
        (i, j) = (ii + 1, jj + 1);
    }
    out
}

/// A longest common subsequence of `a` and `b`, taken from the earliest
/// possible positions of `b`.
pub fn lcs<T: PartialEq + Clone>(a: &[T], b: &[T]) -> Vec<T> {
    lcs_alignment(a, b).into_iter().map(|(_, j)| b[j].clone()).collect()
}

/// Leftmost positions of `sub` inside `full`, or an error when `sub` is
/// not a subsequence.
pub fn leftmost_alignment<T: PartialEq>(sub: &[T], full: &[T]) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(sub.len());
    let mut at = 0;
    for (k, s) in sub.iter().enumerate() {
        match full[at..].iter().position(|f| f == s) {
            Some(off) => {
                out.push(at + off);
                at += off + 1;
            }
            None => {
                return Err(PtsError::NotSubsequence(format!(
                    "token {k} of {} has no match after position {at} of {}",
                    sub.len(),
                    full.len()
                )))
            }
        }
    }
    Ok(out)
}

/// Deletes each token of `reference` outside the leftmost alignment of
/// `protected` with probability `ratio`. Returns the kept positions.
pub fn corrupt_with_ratio<T: PartialEq, R: Rng + ?Sized>(
    reference: &[T],
    protected: &[T],
    ratio: f64,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let keep = leftmost_alignment(protected, reference)?;
    let mut guarded = vec![false; reference.len()];
    for &k in &keep {
        guarded[k] = true;
    }
    Ok((0..reference.len())
        .filter(|&i| {
            let coin: f64 = rng.random();
            guarded[i] || coin >= ratio
        })
        .collect())
}

/// Random deletion with a per-call ratio drawn uniformly from `[0, 1]`.
pub fn corrupt_reference<T: PartialEq + Clone, R: Rng + ?Sized>(
    reference: &[T],
    protected: &[T],
    rng: &mut R,
) -> Result<Vec<T>> {
    let ratio: f64 = rng.random();
    let kept = corrupt_with_ratio(reference, protected, ratio, rng)?;
    Ok(kept.into_iter().map(|i| reference[i].clone()).collect())
}

/// Number of `full` tokens to insert in each gap of `sub` framed by
/// BOS/EOS, under the leftmost alignment: `sub.len() + 1` counts.
pub fn gap_insertion_targets<T: PartialEq>(sub: &[T], full: &[T]) -> Result<Vec<usize>> {
    let pos = leftmost_alignment(sub, full)?;
    Ok(gaps_from_alignment(&pos, full.len()))
}

pub(crate) fn gaps_from_alignment(pos: &[usize], full_len: usize) -> Vec<usize> {
    let mut gaps = Vec::with_capacity(pos.len() + 1);
    let mut prev: isize = -1;
    for &p in pos.iter().chain(std::iter::once(&full_len)) {
        gaps.push((p as isize - prev - 1) as usize);
        prev = p as isize;
    }
    gaps
}
