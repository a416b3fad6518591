//! Reverse-mode automatic differentiation over row-major matrices.
//!
//! Every value is a 2-D array; sequences are `positions × features`. A
//! [`Tape`] borrows a [`ParamStore`] read-only, records each operation as a
//! node and, on [`Tape::backward`], returns gradients for every parameter the
//! loss depends on. Tapes are cheap and single-use: one per instance.

use ndarray::{s, Array2, Axis, Zip};

use super::params::{Gradients, ParamId, ParamStore};
use super::Scalar;
use crate::error::{PtsError, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op<T> {
    Leaf,
    Param(ParamId),
    MatMul { a: Var, b: Var, trans_b: bool },
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Relu(Var),
    Tanh(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        normed: Array2<T>,
        inv_std: Vec<T>,
    },
    Attention {
        q: Var,
        k: Var,
        v: Var,
        heads: usize,
        probs: Vec<Array2<T>>,
    },
    Gather { src: Var, rows: Vec<Option<usize>> },
    Concat(Vec<Var>),
    Pointer {
        query: Var,
        key: Var,
        score: Var,
        act: Vec<T>,
    },
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        probs: Array2<T>,
    },
    Sum(Vec<Var>),
}

struct Node<T> {
    value: Option<Array2<T>>,
    op: Op<T>,
}

pub struct Tape<'p, T: Scalar> {
    store: &'p ParamStore<T>,
    nodes: Vec<Node<T>>,
    param_vars: Vec<Option<Var>>,
}

/// Numerically stable softmax.
pub fn softmax<T: Scalar>(v: &[T]) -> Vec<T> {
    let max = v.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = v.iter().map(|&x| (x - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn softmax_rows_inplace<T: Scalar>(m: &mut Array2<T>) {
    for mut row in m.rows_mut() {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        if max == T::neg_infinity() {
            row.fill(T::zero());
            continue;
        }
        let mut sum = T::zero();
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            sum += *x;
        }
        row.mapv_inplace(|x| x / sum);
    }
}

fn accumulate<T: Scalar>(grads: &mut [Option<Array2<T>>], v: Var, g: Array2<T>) {
    match &mut grads[v.0] {
        Some(acc) => *acc += &g,
        slot @ None => *slot = Some(g),
    }
}

impl<'p, T: Scalar> Tape<'p, T> {
    pub fn new(store: &'p ParamStore<T>) -> Self {
        Self {
            store,
            nodes: Vec::with_capacity(512),
            param_vars: vec![None; store.len()],
        }
    }

    pub fn store(&self) -> &'p ParamStore<T> {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value: Some(value), op });
        Var(self.nodes.len() - 1)
    }

    /// The node for a parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.0] = Some(v);
        v
    }

    pub fn constant(&mut self, value: Array2<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Array2<T> {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(val), _) => val,
            (None, Op::Param(id)) => self.store.get(*id),
            (None, _) => unreachable!("only parameter nodes borrow their value"),
        }
    }

    /// Value of a `1 × 1` node.
    pub fn scalar(&self, v: Var) -> T {
        self.value(v)[[0, 0]]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).dim()
    }

    pub fn is_finite(&self, v: Var) -> bool {
        self.value(v).iter().all(|x| x.is_finite())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.ncols(), vb.nrows(), "matmul inner dimensions");
        let out = va.dot(vb);
        self.push(out, Op::MatMul { a, b, trans_b: false })
    }

    /// `a · bᵀ`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.ncols(), vb.ncols(), "matmul_t inner dimensions");
        let out = va.dot(&vb.t());
        self.push(out, Op::MatMul { a, b, trans_b: true })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a) + self.value(b);
        self.push(out, Op::Add(a, b))
    }

    /// Adds a `1 × m` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let r = self.value(row);
        assert_eq!(r.nrows(), 1, "add_row expects a single row");
        let out = self.value(a) + r;
        self.push(out, Op::AddRow(a, row))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a) * self.value(b);
        self.push(out, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let out = self.value(a) * c;
        self.push(out, Op::Scale(a, c))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(|x| x.max(T::zero()));
        self.push(out, Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(T::tanh);
        self.push(out, Op::Tanh(a))
    }

    /// Row-wise layer normalization with affine `gamma`, `beta` (`1 × d`).
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let eps = T::lit(1e-5);
        let xv = self.value(x);
        let d = T::lit(xv.ncols() as f64);
        let mut normed = xv.clone();
        let mut inv_std = Vec::with_capacity(xv.nrows());
        for mut row in normed.rows_mut() {
            let mean = row.sum() / d;
            row.mapv_inplace(|v| v - mean);
            let var = row.iter().map(|&v| v * v).sum::<T>() / d;
            let is = T::one() / (var + eps).sqrt();
            row.mapv_inplace(|v| v * is);
            inv_std.push(is);
        }
        let out = &normed * self.value(gamma) + self.value(beta);
        self.push(
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                normed,
                inv_std,
            },
        )
    }

    /// Multi-head scaled dot-product attention without any causal mask.
    ///
    /// `q` is `n × d`, `k` and `v` are `m × d`. Keys flagged in `key_mask`
    /// (true = padding) receive zero weight.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, heads: usize, key_mask: Option<&[bool]>) -> Result<Var> {
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        let d = qv.ncols();
        if heads == 0 || d % heads != 0 {
            return Err(PtsError::DimensionMismatch(format!("{d} features cannot be split into {heads} heads")));
        }
        if kv.ncols() != d || vv.ncols() != d {
            return Err(PtsError::DimensionMismatch(format!(
                "query width {d}, key width {}, value width {}",
                kv.ncols(),
                vv.ncols()
            )));
        }
        if kv.nrows() != vv.nrows() {
            return Err(PtsError::DimensionMismatch(format!(
                "{} keys but {} values",
                kv.nrows(),
                vv.nrows()
            )));
        }
        if let Some(mask) = key_mask {
            if mask.len() != kv.nrows() {
                return Err(PtsError::DimensionMismatch(format!(
                    "mask covers {} keys, got {}",
                    mask.len(),
                    kv.nrows()
                )));
            }
        }
        let dh = d / heads;
        let scale = T::one() / T::lit(dh as f64).sqrt();
        let mut out = Array2::zeros((qv.nrows(), d));
        let mut probs = Vec::with_capacity(heads);
        for h in 0..heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let mut scores = qv.slice(cols).dot(&kv.slice(cols).t());
            scores.mapv_inplace(|x| x * scale);
            if let Some(mask) = key_mask {
                for (j, &masked) in mask.iter().enumerate() {
                    if masked {
                        scores.column_mut(j).fill(T::neg_infinity());
                    }
                }
            }
            softmax_rows_inplace(&mut scores);
            out.slice_mut(cols).assign(&scores.dot(&vv.slice(cols)));
            probs.push(scores);
        }
        Ok(self.push(out, Op::Attention { q, k, v, heads, probs }))
    }

    /// Selects rows of `src`; `None` yields a zero row.
    pub fn gather_opt(&mut self, src: Var, rows: Vec<Option<usize>>) -> Var {
        let sv = self.value(src);
        let mut out = Array2::zeros((rows.len(), sv.ncols()));
        for (r, idx) in rows.iter().enumerate() {
            if let Some(i) = idx {
                out.row_mut(r).assign(&sv.row(*i));
            }
        }
        self.push(out, Op::Gather { src, rows })
    }

    pub fn gather(&mut self, src: Var, rows: &[usize]) -> Var {
        self.gather_opt(src, rows.iter().map(|&r| Some(r)).collect())
    }

    /// Column-wise concatenation.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let out = ndarray::concatenate(Axis(1), &views).expect("concat requires equal row counts");
        self.push(out, Op::Concat(parts.to_vec()))
    }

    /// Additive pointer scores: `s[i, j] = Σ_k score[k] · tanh(query[i, k] + key[j, k])`.
    pub fn pointer_scores(&mut self, query: Var, key: Var, score: Var) -> Var {
        let (qv, kv, sv) = (self.value(query), self.value(key), self.value(score));
        let (n, d) = qv.dim();
        let m = kv.nrows();
        assert_eq!(kv.ncols(), d);
        assert_eq!(sv.dim(), (1, d));
        let mut act = Vec::with_capacity(n * m * d);
        let mut out = Array2::zeros((n, m));
        let w = sv.row(0);
        for i in 0..n {
            let qi = qv.row(i);
            for j in 0..m {
                let kj = kv.row(j);
                let mut acc = T::zero();
                for t in 0..d {
                    let a = (qi[t] + kj[t]).tanh();
                    act.push(a);
                    acc += w[t] * a;
                }
                out[[i, j]] = acc;
            }
        }
        self.push(out, Op::Pointer { query, key, score, act })
    }

    /// Summed negative log-likelihood of `targets` under row-wise softmax of
    /// `logits`; a `1 × 1` node.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Var {
        let lv = self.value(logits);
        assert_eq!(lv.nrows(), targets.len(), "one target per row");
        let mut probs = lv.clone();
        softmax_rows_inplace(&mut probs);
        let mut nll = T::zero();
        for (row, &t) in lv.rows().into_iter().zip(targets) {
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let lse = max + row.iter().map(|&x| (x - max).exp()).sum::<T>().ln();
            nll += lse - row[t];
        }
        self.push(
            Array2::from_elem((1, 1), nll),
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
        )
    }

    /// Sum of `1 × 1` nodes.
    pub fn sum(&mut self, parts: &[Var]) -> Var {
        let total = parts.iter().map(|&p| self.scalar(p)).sum::<T>();
        self.push(Array2::from_elem((1, 1), total), Op::Sum(parts.to_vec()))
    }

    /// Gradients of the `1 × 1` node `loss` with respect to every parameter.
    pub fn backward(&self, loss: Var) -> Gradients<T> {
        assert_eq!(self.shape(loss), (1, 1), "backward starts from a scalar");
        let mut out = Gradients::with_len(self.store.len());
        let mut grads: Vec<Option<Array2<T>>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(Array2::ones((1, 1)));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Leaf => {}
                Op::Param(id) => out.accumulate_owned(*id, g),
                Op::MatMul { a, b, trans_b } => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    if *trans_b {
                        accumulate(&mut grads, *a, g.dot(vb));
                        accumulate(&mut grads, *b, g.t().dot(va));
                    } else {
                        accumulate(&mut grads, *a, g.dot(&vb.t()));
                        accumulate(&mut grads, *b, va.t().dot(&g));
                    }
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *b, g.clone());
                    accumulate(&mut grads, *a, g);
                }
                Op::AddRow(a, row) => {
                    accumulate(&mut grads, *row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    accumulate(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = &g * self.value(*b);
                    let gb = &g * self.value(*a);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Scale(a, c) => accumulate(&mut grads, *a, g * *c),
                Op::Relu(a) => {
                    let mut ga = g;
                    Zip::from(&mut ga).and(self.value(*a)).for_each(|g, &x| {
                        if x <= T::zero() {
                            *g = T::zero();
                        }
                    });
                    accumulate(&mut grads, *a, ga);
                }
                Op::Tanh(a) => {
                    let y = self.nodes[i].value.as_ref().unwrap();
                    let ga = Zip::from(&g).and(y).map_collect(|&g, &y| g * (T::one() - y * y));
                    accumulate(&mut grads, *a, ga);
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    normed,
                    inv_std,
                } => {
                    let gv = self.value(*gamma);
                    accumulate(&mut grads, *gamma, (&g * normed).sum_axis(Axis(0)).insert_axis(Axis(0)));
                    accumulate(&mut grads, *beta, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    let dn = &g * gv;
                    let d = T::lit(dn.ncols() as f64);
                    let mut gx = Array2::zeros(dn.raw_dim());
                    for r in 0..dn.nrows() {
                        let dnr = dn.row(r);
                        let nr = normed.row(r);
                        let sum_d = dnr.sum();
                        let sum_dn = dnr.iter().zip(nr.iter()).map(|(&a, &b)| a * b).sum::<T>();
                        let k = inv_std[r] / d;
                        for c in 0..dn.ncols() {
                            gx[[r, c]] = k * (d * dnr[c] - sum_d - nr[c] * sum_dn);
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::Attention { q, k, v, heads, probs } => {
                    let (qv, kv, vv) = (self.value(*q), self.value(*k), self.value(*v));
                    let d = qv.ncols();
                    let dh = d / heads;
                    let scale = T::one() / T::lit(dh as f64).sqrt();
                    let mut gq = Array2::zeros(qv.raw_dim());
                    let mut gk = Array2::zeros(kv.raw_dim());
                    let mut gv = Array2::zeros(vv.raw_dim());
                    for (h, p) in probs.iter().enumerate() {
                        let cols = s![.., h * dh..(h + 1) * dh];
                        let go = g.slice(cols);
                        // dP = dO · Vᵀ ; dV = Pᵀ · dO
                        let dp = go.dot(&vv.slice(cols).t());
                        gv.slice_mut(cols).assign(&p.t().dot(&go));
                        // softmax backward, then undo the scale
                        let mut ds = Zip::from(&dp).and(p).map_collect(|&a, &b| a * b);
                        let row_sums = ds.sum_axis(Axis(1));
                        Zip::from(ds.rows_mut())
                            .and(p.rows())
                            .and(&row_sums)
                            .for_each(|mut dsr, pr, &rs| {
                                Zip::from(&mut dsr).and(pr).for_each(|x, &pv| *x -= pv * rs);
                            });
                        ds.mapv_inplace(|x| x * scale);
                        gq.slice_mut(cols).assign(&ds.dot(&kv.slice(cols)));
                        gk.slice_mut(cols).assign(&ds.t().dot(&qv.slice(cols)));
                    }
                    accumulate(&mut grads, *q, gq);
                    accumulate(&mut grads, *k, gk);
                    accumulate(&mut grads, *v, gv);
                }
                Op::Gather { src, rows } => {
                    let mut gs = Array2::zeros(self.value(*src).raw_dim());
                    for (r, idx) in rows.iter().enumerate() {
                        if let Some(s) = idx {
                            let mut dst = gs.row_mut(*s);
                            dst += &g.row(r);
                        }
                    }
                    accumulate(&mut grads, *src, gs);
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let w = self.value(*p).ncols();
                        accumulate(&mut grads, *p, g.slice(s![.., offset..offset + w]).to_owned());
                        offset += w;
                    }
                }
                Op::Pointer { query, key, score, act } => {
                    let (n, d) = self.value(*query).dim();
                    let m = self.value(*key).nrows();
                    let w = self.value(*score).row(0).to_owned();
                    let mut gq = Array2::zeros((n, d));
                    let mut gk = Array2::zeros((m, d));
                    let mut gw = Array2::zeros((1, d));
                    for i in 0..n {
                        for j in 0..m {
                            let gij = g[[i, j]];
                            let base = (i * m + j) * d;
                            for t in 0..d {
                                let a = act[base + t];
                                gw[[0, t]] += gij * a;
                                let inner = gij * w[t] * (T::one() - a * a);
                                gq[[i, t]] += inner;
                                gk[[j, t]] += inner;
                            }
                        }
                    }
                    accumulate(&mut grads, *query, gq);
                    accumulate(&mut grads, *key, gk);
                    accumulate(&mut grads, *score, gw);
                }
                Op::CrossEntropy { logits, targets, probs } => {
                    let scale = g[[0, 0]];
                    let mut gl = probs.clone();
                    for (r, &t) in targets.iter().enumerate() {
                        gl[[r, t]] -= T::one();
                    }
                    gl.mapv_inplace(|x| x * scale);
                    accumulate(&mut grads, *logits, gl);
                }
                Op::Sum(parts) => {
                    for p in parts {
                        accumulate(&mut grads, *p, g.clone());
                    }
                }
            }
        }
        out
    }
}
