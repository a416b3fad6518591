//! Brute-force references for the alignment routines.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pts::training::{corrupt_reference, gap_insertion_targets, lcs, lcs_alignment, leftmost_alignment};

/// All strictly increasing index vectors into `0..n`, in lexicographic order.
fn index_subsets(n: usize) -> Vec<Vec<usize>> {
    let mut all: Vec<Vec<usize>> = (0u32..1 << n)
        .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
        .collect();
    all.sort();
    all
}

fn is_subsequence(sub: &[u8], full: &[u8]) -> bool {
    let mut it = full.iter();
    sub.iter().all(|x| it.any(|y| y == x))
}

/// Longest common subsequence by enumeration: the lexicographically
/// smallest vector of `b` indices among the longest ones.
pub fn brute_lcs_indices(a: &[u8], b: &[u8]) -> Vec<usize> {
    let mut best: Option<Vec<usize>> = None;
    for idx in index_subsets(b.len()) {
        let tokens: Vec<u8> = idx.iter().map(|&j| b[j]).collect();
        if !is_subsequence(&tokens, a) {
            continue;
        }
        if best.as_ref().is_none_or(|bb| idx.len() > bb.len()) {
            best = Some(idx);
        }
    }
    best.unwrap_or_default()
}

/// Gap counts by enumerating every embedding of `sub` into `full` and
/// taking the lexicographically smallest one.
pub fn brute_gaps(sub: &[u8], full: &[u8]) -> Option<Vec<usize>> {
    let pos = index_subsets(full.len())
        .into_iter()
        .filter(|idx| idx.len() == sub.len() && idx.iter().zip(sub).all(|(&j, &s)| full[j] == s))
        .min()?;
    let mut gaps = Vec::with_capacity(sub.len() + 1);
    let mut prev: isize = -1;
    for &p in &pos {
        gaps.push((p as isize - prev - 1) as usize);
        prev = p as isize;
    }
    gaps.push((full.len() as isize - prev - 1) as usize);
    Some(gaps)
}

fn random_seq(rng: &mut ChaCha8Rng, max_len: usize, alphabet: u8) -> Vec<u8> {
    let n = rng.random_range(0..=max_len);
    (0..n).map(|_| rng.random_range(0..alphabet)).collect()
}

/// Number of mismatches between the library and the brute-force LCS over
/// `pairs` random pairs (length ≤ 8, alphabet ≤ 4).
pub fn lcs_mismatches(pairs: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    for _ in 0..pairs {
        let alphabet = rng.random_range(1..=4);
        let a = random_seq(&mut rng, 8, alphabet);
        let b = random_seq(&mut rng, 8, alphabet);
        let want = brute_lcs_indices(&a, &b);
        let got = lcs_alignment(&a, &b);
        let b_idx: Vec<usize> = got.iter().map(|&(_, j)| j).collect();
        let consistent = got.iter().all(|&(i, j)| a[i] == b[j])
            && got.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1);
        let tokens: Vec<u8> = want.iter().map(|&j| b[j]).collect();
        if !consistent || b_idx != want || lcs(&a, &b) != tokens {
            bad += 1;
        }
    }
    bad
}

/// Number of mismatches between the library gap targets and the
/// brute-force ones. Half the pairs are genuine subsequences, the other
/// half random (where both sides must agree on failure).
pub fn gap_mismatches(pairs: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    for k in 0..pairs {
        let alphabet = rng.random_range(1..=4);
        let full = random_seq(&mut rng, 8, alphabet);
        let sub: Vec<u8> = if k % 2 == 0 {
            full.iter().copied().filter(|_| rng.random_bool(0.5)).collect()
        } else {
            random_seq(&mut rng, 8, alphabet)
        };
        let want = brute_gaps(&sub, &full);
        let got = gap_insertion_targets(&sub, &full).ok();
        if want != got {
            bad += 1;
        }
    }
    bad
}

/// Number of corruption pairs violating `Σ gaps = |reference| − |corrupted|`.
pub fn gap_sum_violations(pairs: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    for _ in 0..pairs {
        let alphabet = rng.random_range(1..=6);
        let reference: Vec<u8> = (0..rng.random_range(1..=40)).map(|_| rng.random_range(0..alphabet)).collect();
        let plan: Vec<u8> = reference.iter().copied().filter(|_| rng.random_bool(0.3)).collect();
        let protected = lcs(&plan, &reference);
        let corrupted = match corrupt_reference(&reference, &protected, &mut rng) {
            Ok(c) => c,
            Err(_) => {
                bad += 1;
                continue;
            }
        };
        let ok = leftmost_alignment(&protected, &corrupted).is_ok()
            && gap_insertion_targets(&corrupted, &reference)
                .is_ok_and(|g| g.iter().sum::<usize>() == reference.len() - corrupted.len());
        if !ok {
            bad += 1;
        }
    }
    bad
}
