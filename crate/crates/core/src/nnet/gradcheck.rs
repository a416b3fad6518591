//! Central finite-difference checks of tape gradients.

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::{Gradients, ParamStore};
use crate::error::Result;

/// Smallest magnitude used as the denominator of a relative error.
pub const RELATIVE_FLOOR: f64 = 1e-4;

/// One checked parameter entry.
#[derive(Clone, Debug)]
pub struct GradCheck {
    pub name: String,
    pub entry: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
}

impl GradCheck {
    /// `|a - n| / max(|a|, |n|, floor)`.
    pub fn relative_error(&self) -> f64 {
        let scale = self.analytic.abs().max(self.numeric.abs()).max(RELATIVE_FLOOR);
        (self.analytic - self.numeric).abs() / scale
    }
}

/// Compares `analytic` with central differences of `loss`.
///
/// For each tensor, up to `per_tensor` entries with a nonzero analytic
/// gradient are checked, plus one entry drawn uniformly.
pub fn check_gradients<F>(
    store: &ParamStore<f64>,
    analytic: &Gradients<f64>,
    per_tensor: usize,
    step: f64,
    seed: u64,
    loss: F,
) -> Result<Vec<GradCheck>>
where
    F: Fn(&ParamStore<f64>) -> Result<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut work = store.clone();
    let mut out = Vec::new();
    for id in store.ids() {
        let dense = analytic.dense(id, store);
        let (rows, cols) = dense.dim();
        let all: Vec<(usize, usize)> = (0..rows).flat_map(|r| (0..cols).map(move |c| (r, c))).collect();
        let nonzero: Vec<(usize, usize)> = all.iter().copied().filter(|&e| dense[e] != 0.0).collect();
        let mut entries: Vec<(usize, usize)> = nonzero.choose_multiple(&mut rng, per_tensor).copied().collect();
        if let Some(&e) = all.choose(&mut rng) {
            entries.push(e);
        }
        for e in entries {
            let original = work.get(id)[e];
            work.get_mut(id)[e] = original + step;
            let plus = loss(&work)?;
            work.get_mut(id)[e] = original - step;
            let minus = loss(&work)?;
            work.get_mut(id)[e] = original;
            out.push(GradCheck {
                name: store.name(id).to_owned(),
                entry: e,
                analytic: dense[e],
                numeric: (plus - minus) / (2.0 * step),
            });
        }
    }
    Ok(out)
}
