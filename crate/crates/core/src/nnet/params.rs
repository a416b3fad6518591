use std::collections::HashMap;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Scalar;

/// Index of a trainable tensor in a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    Zeros,
    Ones,
    /// Uniform in `[-b, b]`.
    Uniform(f64),
    /// Uniform in `[-1/sqrt(rows), 1/sqrt(rows)]`, rows being the fan-in of
    /// a `x · W` weight.
    FanIn,
}

/// Anything that can register named tensors: the real store, or a counter
/// that only records shapes.
pub trait ParamSink {
    fn add(&mut self, name: String, rows: usize, cols: usize, init: Init) -> ParamId;
}

/// Named trainable tensors.
#[derive(Clone, Debug)]
pub struct ParamStore<T> {
    names: Vec<String>,
    values: Vec<Array2<T>>,
    index: HashMap<String, ParamId>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            values: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Registers a tensor. Panics on a duplicate name: names are the
    /// checkpoint keys and must be unique.
    pub fn insert(&mut self, name: String, value: Array2<T>) -> ParamId {
        assert!(!self.index.contains_key(&name), "duplicate parameter name `{name}`");
        let id = ParamId(self.values.len());
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.values.push(value);
        id
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Array2<T> {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Array2<T> {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn lookup(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Array2<T>)> {
        self.names
            .iter()
            .zip(&self.values)
            .enumerate()
            .map(|(i, (n, v))| (ParamId(i), n.as_str(), v))
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// Converts every tensor to another precision.
    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            names: self.names.clone(),
            values: self.values.iter().map(|v| v.mapv(|x| U::lit(x.as_f64()))).collect(),
            index: self.index.clone(),
        }
    }
}

impl<T: Scalar> Default for ParamStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Allocates and initializes tensors from a seeded generator.
pub struct ParamBuilder<T> {
    store: ParamStore<T>,
    rng: ChaCha8Rng,
}

impl<T: Scalar> ParamBuilder<T> {
    pub fn new(seed: u64) -> Self {
        Self {
            store: ParamStore::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn finish(self) -> ParamStore<T> {
        self.store
    }
}

impl<T: Scalar> ParamSink for ParamBuilder<T> {
    fn add(&mut self, name: String, rows: usize, cols: usize, init: Init) -> ParamId {
        let bound = match init {
            Init::Zeros => return self.store.insert(name, Array2::zeros((rows, cols))),
            Init::Ones => return self.store.insert(name, Array2::ones((rows, cols))),
            Init::Uniform(b) => b,
            Init::FanIn => 1.0 / (rows as f64).sqrt(),
        };
        let rng = &mut self.rng;
        let value = Array2::from_shape_fn((rows, cols), |_| T::lit(rng.random_range(-bound..=bound)));
        self.store.insert(name, value)
    }
}

/// Records parameter shapes without allocating.
#[derive(Clone, Debug, Default)]
pub struct ShapeCounter {
    pub shapes: Vec<(String, usize, usize)>,
}

impl ShapeCounter {
    pub fn count(&self) -> usize {
        self.shapes.iter().map(|(_, r, c)| r * c).sum()
    }
}

impl ParamSink for ShapeCounter {
    fn add(&mut self, name: String, rows: usize, cols: usize, _init: Init) -> ParamId {
        assert!(
            self.shapes.iter().all(|(n, _, _)| *n != name),
            "duplicate parameter name `{name}`"
        );
        self.shapes.push((name, rows, cols));
        ParamId(self.shapes.len() - 1)
    }
}

/// Gradient tensors congruent with a [`ParamStore`]; absent entries are zero.
#[derive(Clone, Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Array2<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(store: &ParamStore<T>) -> Self {
        Self {
            grads: vec![None; store.len()],
        }
    }

    pub(crate) fn with_len(n: usize) -> Self {
        Self { grads: vec![None; n] }
    }

    pub fn get(&self, id: ParamId) -> Option<&Array2<T>> {
        self.grads[id.0].as_ref()
    }

    /// Gradient for `id`, materializing zeros of the parameter's shape.
    pub fn dense(&self, id: ParamId, store: &ParamStore<T>) -> Array2<T> {
        self.grads[id.0]
            .clone()
            .unwrap_or_else(|| Array2::zeros(store.get(id).raw_dim()))
    }

    pub fn accumulate(&mut self, id: ParamId, g: &Array2<T>) {
        match &mut self.grads[id.0] {
            Some(acc) => *acc += g,
            slot @ None => *slot = Some(g.clone()),
        }
    }

    pub(crate) fn accumulate_owned(&mut self, id: ParamId, g: Array2<T>) {
        match &mut self.grads[id.0] {
            Some(acc) => *acc += &g,
            slot @ None => *slot = Some(g),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients<T>) {
        for (i, g) in other.grads.iter().enumerate() {
            if let Some(g) = g {
                self.accumulate(ParamId(i), g);
            }
        }
    }

    pub fn scale(&mut self, factor: T) {
        for g in self.grads.iter_mut().flatten() {
            g.mapv_inplace(|x| x * factor);
        }
    }

    pub fn global_norm(&self) -> T {
        self.grads
            .iter()
            .flatten()
            .map(|g| g.iter().map(|&x| x * x).sum::<T>())
            .sum::<T>()
            .sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.grads.iter().flatten().all(|g| g.iter().all(|x| x.is_finite()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Array2<T>)> {
        self.grads
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.as_ref().map(|g| (ParamId(i), g)))
    }
}
