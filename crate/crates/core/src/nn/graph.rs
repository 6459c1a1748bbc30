//! Tape-based reverse-mode differentiation over small dense vectors and matrices.
//!
//! A [`Graph`] records every operation of one forward pass. Nodes are appended in
//! evaluation order, so walking them backwards visits each node after all of its
//! consumers. Parameters are read from a borrowed [`ParamStore`] and their
//! gradients land in a [`Gradients`] buffer.

use super::tensor::{Gradients, ParamId, ParamStore};
use crate::crf::{self, CrfGradient, CrfParams, EmissionMatrix, TagLoss};
use crate::error::Result;
use crate::synth::{TagLabel, NUM_LABELS};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Probabilities are clamped to this distance from 0 and 1 before taking logs.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    Row { table: ParamId, row: usize },
    MatVec { m: Var, x: Var },
    MatMulT { a: Var, w: Var },
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Concat(Vec<Var>),
    Slice { x: Var, start: usize },
    Stack(Vec<Var>),
    Mean(Vec<Var>),
    Softmax(Var),
    WeightedSum { weights: Var, rows: Var },
    AdditiveScores { query: Var, keys: Var, v: Var },
    Crf { emissions: Var, transitions: Var, start: Var, end: Var, grad: Box<CrfGradient> },
    Bce { p: Var, target: f64 },
}

#[derive(Debug)]
struct Node {
    value: Vec<f64>,
    rows: usize,
    cols: usize,
    op: Op,
}

pub struct Graph<'p> {
    store: &'p ParamStore,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<Var>>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl<'p> Graph<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Self { store, nodes: Vec::new(), param_nodes: vec![None; store.len()] }
    }

    pub fn store(&self) -> &'p ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Vec<f64>, rows: usize, cols: usize, op: Op) -> Var {
        debug_assert!(matches!(op, Op::Param(_)) || value.len() == rows * cols);
        self.nodes.push(Node { value, rows, cols, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        match self.nodes[v.0].op {
            Op::Param(p) => self.store.value(p).data(),
            _ => &self.nodes[v.0].value,
        }
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[0]
    }

    /// (rows, cols); vectors have one row.
    pub fn dims(&self, v: Var) -> (usize, usize) {
        (self.nodes[v.0].rows, self.nodes[v.0].cols)
    }

    pub fn width(&self, v: Var) -> usize {
        self.nodes[v.0].cols
    }

    pub fn input(&mut self, values: Vec<f64>) -> Var {
        let n = values.len();
        self.push(values, 1, n, Op::Input)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_nodes[id.index()] {
            return v;
        }
        let (rows, cols) = self.store.value(id).dims2();
        let v = self.push(Vec::new(), rows, cols, Op::Param(id));
        self.param_nodes[id.index()] = Some(v);
        v
    }

    /// Row `row` of a parameter matrix (embedding lookup).
    pub fn row(&mut self, table: ParamId, row: usize) -> Var {
        let (rows, cols) = self.store.value(table).dims2();
        assert!(row < rows, "row {row} out of range for table with {rows} rows");
        let value = self.store.value(table).data()[row * cols..(row + 1) * cols].to_vec();
        self.push(value, 1, cols, Op::Row { table, row })
    }

    /// `m · x` for an r×c matrix and a c-vector.
    pub fn matvec(&mut self, m: Var, x: Var) -> Var {
        let (r, c) = self.dims(m);
        assert_eq!(c, self.value(x).len(), "matvec: matrix has {c} columns, vector has {}", self.value(x).len());
        let (mv, xv) = (self.value(m), self.value(x));
        let out: Vec<f64> = mv.chunks_exact(c).map(|row| row.iter().zip(xv).map(|(a, b)| a * b).sum()).collect();
        self.push(out, 1, r, Op::MatVec { m, x })
    }

    /// `a · wᵀ` for a k×d matrix `a` and an r×d matrix `w`.
    pub fn matmul_t(&mut self, a: Var, w: Var) -> Var {
        let (k, d) = self.dims(a);
        let (r, d2) = self.dims(w);
        assert_eq!(d, d2, "matmul_t: inner dimensions {d} and {d2} differ");
        let (av, wv) = (self.value(a), self.value(w));
        let mut out = Vec::with_capacity(k * r);
        for arow in av.chunks_exact(d) {
            for wrow in wv.chunks_exact(d) {
                out.push(arow.iter().zip(wrow).map(|(x, y)| x * y).sum());
            }
        }
        self.push(out, k, r, Op::MatMulT { a, w })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.value(a).len(), self.value(b).len(), "add: length mismatch");
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x + y).collect();
        let (r, c) = self.dims(a);
        self.push(out, r, c, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.value(a).len(), self.value(b).len(), "mul: length mismatch");
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x * y).collect();
        let (r, c) = self.dims(a);
        self.push(out, r, c, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let out = self.value(a).iter().map(|x| x * factor).collect();
        let (r, c) = self.dims(a);
        self.push(out, r, c, Op::Scale(a, factor))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).iter().map(|&x| sigmoid(x)).collect();
        let (r, c) = self.dims(a);
        self.push(out, r, c, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).iter().map(|x| x.tanh()).collect();
        let (r, c) = self.dims(a);
        self.push(out, r, c, Op::Tanh(a))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let out: Vec<f64> = parts.iter().flat_map(|&p| self.value(p).iter().copied()).collect();
        let n = out.len();
        self.push(out, 1, n, Op::Concat(parts.to_vec()))
    }

    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Var {
        let out = self.value(x)[start..start + len].to_vec();
        self.push(out, 1, len, Op::Slice { x, start })
    }

    /// Stack equally long vectors into the rows of a matrix.
    pub fn stack(&mut self, rows: &[Var]) -> Var {
        assert!(!rows.is_empty(), "stack: no rows");
        let d = self.value(rows[0]).len();
        let mut out = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            assert_eq!(self.value(r).len(), d, "stack: ragged rows");
            out.extend_from_slice(self.value(r));
        }
        self.push(out, rows.len(), d, Op::Stack(rows.to_vec()))
    }

    pub fn mean(&mut self, items: &[Var]) -> Var {
        assert!(!items.is_empty(), "mean: no inputs");
        let d = self.value(items[0]).len();
        let mut out = vec![0.0; d];
        for &it in items {
            for (o, v) in out.iter_mut().zip(self.value(it)) {
                *o += v;
            }
        }
        let k = items.len() as f64;
        out.iter_mut().for_each(|o| *o /= k);
        self.push(out, 1, d, Op::Mean(items.to_vec()))
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let out: Vec<f64> = exps.into_iter().map(|e| e / total).collect();
        let n = out.len();
        self.push(out, 1, n, Op::Softmax(a))
    }

    /// `Σ_i weights_i · rows_i` for a k-vector of weights and a k×d matrix.
    pub fn weighted_sum(&mut self, weights: Var, rows: Var) -> Var {
        let (k, d) = self.dims(rows);
        assert_eq!(self.value(weights).len(), k, "weighted_sum: weight count");
        let mut out = vec![0.0; d];
        for (w, row) in self.value(weights).iter().zip(self.value(rows).chunks_exact(d)) {
            for (o, r) in out.iter_mut().zip(row) {
                *o += w * r;
            }
        }
        self.push(out, 1, d, Op::WeightedSum { weights, rows })
    }

    /// `s_i = vᵀ tanh(query + keys_i)` for projected query and key rows.
    pub fn additive_scores(&mut self, query: Var, keys: Var, v: Var) -> Var {
        let (k, a) = self.dims(keys);
        assert_eq!(self.value(query).len(), a, "additive_scores: query width");
        assert_eq!(self.value(v).len(), a, "additive_scores: v width");
        let (q, kv, vv) = (self.value(query), self.value(keys), self.value(v));
        let out: Vec<f64> = kv
            .chunks_exact(a)
            .map(|row| row.iter().zip(q).zip(vv).map(|((kk, qq), w)| w * (kk + qq).tanh()).sum())
            .collect();
        self.push(out, 1, k, Op::AdditiveScores { query, keys, v })
    }

    /// CRF tag loss of `gold` for an n×5 emission matrix.
    pub fn crf_loss(
        &mut self,
        emissions: Var,
        transitions: Var,
        start: Var,
        end: Var,
        gold: &[TagLabel],
        mode: TagLoss,
    ) -> Result<Var> {
        assert_eq!(self.dims(emissions).1, NUM_LABELS, "crf_loss: emissions need 5 columns");
        let em = EmissionMatrix::from_flat(self.value(emissions));
        let params = CrfParams::from_slices(self.value(transitions), self.value(start), self.value(end));
        let grad = crf::loss_and_gradient(&em, gold, &params, mode)?;
        Ok(self.push(vec![grad.loss], 1, 1, Op::Crf { emissions, transitions, start, end, grad: Box::new(grad) }))
    }

    /// Binary cross-entropy of probability `p` against `target` ∈ [0, 1].
    pub fn bce(&mut self, p: Var, target: f64) -> Var {
        let pc = self.scalar(p).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        let loss = -(target * pc.ln() + (1.0 - target) * (1.0 - pc).ln());
        self.push(vec![loss], 1, 1, Op::Bce { p, target })
    }

    /// Accumulate `d loss / d param` into `out`.
    pub fn backward(&self, loss: Var, out: &mut Gradients) {
        self.backward_scaled(loss, 1.0, out)
    }

    /// Accumulate `seed · d loss / d param` into `out`.
    pub fn backward_scaled(&self, loss: Var, seed: f64, out: &mut Gradients) {
        assert_eq!(self.value(loss).len(), 1, "backward needs a scalar loss");
        let mut grads: Vec<Option<Vec<f64>>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        grads[loss.0] = Some(vec![seed]);

        fn acc(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut [f64] {
            grads[v.0].get_or_insert_with(|| vec![0.0; len])
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Input => {}
                Op::Param(p) => {
                    if !self.store.get(*p).frozen {
                        for (o, gv) in out.get_mut(*p).iter_mut().zip(&g) {
                            *o += gv;
                        }
                    }
                }
                Op::Row { table, row } => {
                    if !self.store.get(*table).frozen {
                        let cols = node.cols;
                        let dst = &mut out.get_mut(*table)[row * cols..(row + 1) * cols];
                        for (o, gv) in dst.iter_mut().zip(&g) {
                            *o += gv;
                        }
                    }
                }
                Op::MatVec { m, x } => {
                    let (r, c) = self.dims(*m);
                    let (mv, xv) = (self.value(*m), self.value(*x));
                    {
                        let gm = acc(&mut grads, *m, r * c);
                        for (ri, gr) in g.iter().enumerate() {
                            if *gr != 0.0 {
                                for (o, xc) in gm[ri * c..(ri + 1) * c].iter_mut().zip(xv) {
                                    *o += gr * xc;
                                }
                            }
                        }
                    }
                    let gx = acc(&mut grads, *x, c);
                    for (row, gr) in mv.chunks_exact(c).zip(&g) {
                        for (o, mc) in gx.iter_mut().zip(row) {
                            *o += gr * mc;
                        }
                    }
                }
                Op::MatMulT { a, w } => {
                    let (k, d) = self.dims(*a);
                    let (r, _) = self.dims(*w);
                    let (av, wv) = (self.value(*a), self.value(*w));
                    {
                        let ga = acc(&mut grads, *a, k * d);
                        for ki in 0..k {
                            for ri in 0..r {
                                let gkr = g[ki * r + ri];
                                for (o, wd) in ga[ki * d..(ki + 1) * d].iter_mut().zip(&wv[ri * d..(ri + 1) * d]) {
                                    *o += gkr * wd;
                                }
                            }
                        }
                    }
                    let gw = acc(&mut grads, *w, r * d);
                    for ki in 0..k {
                        for ri in 0..r {
                            let gkr = g[ki * r + ri];
                            for (o, ad) in gw[ri * d..(ri + 1) * d].iter_mut().zip(&av[ki * d..(ki + 1) * d]) {
                                *o += gkr * ad;
                            }
                        }
                    }
                }
                Op::Add(a, b) => {
                    for v in [*a, *b] {
                        for (o, gv) in acc(&mut grads, v, g.len()).iter_mut().zip(&g) {
                            *o += gv;
                        }
                    }
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    for (o, (gv, bb)) in acc(&mut grads, *a, g.len()).iter_mut().zip(g.iter().zip(bv)) {
                        *o += gv * bb;
                    }
                    for (o, (gv, aa)) in acc(&mut grads, *b, g.len()).iter_mut().zip(g.iter().zip(av)) {
                        *o += gv * aa;
                    }
                }
                Op::Scale(a, f) => {
                    for (o, gv) in acc(&mut grads, *a, g.len()).iter_mut().zip(&g) {
                        *o += gv * f;
                    }
                }
                Op::Sigmoid(a) => {
                    for (o, (gv, y)) in acc(&mut grads, *a, g.len()).iter_mut().zip(g.iter().zip(&node.value)) {
                        *o += gv * y * (1.0 - y);
                    }
                }
                Op::Tanh(a) => {
                    for (o, (gv, y)) in acc(&mut grads, *a, g.len()).iter_mut().zip(g.iter().zip(&node.value)) {
                        *o += gv * (1.0 - y * y);
                    }
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let n = self.value(p).len();
                        for (o, gv) in acc(&mut grads, p, n).iter_mut().zip(&g[offset..offset + n]) {
                            *o += gv;
                        }
                        offset += n;
                    }
                }
                Op::Slice { x, start } => {
                    let n = self.value(*x).len();
                    for (o, gv) in acc(&mut grads, *x, n)[*start..*start + g.len()].iter_mut().zip(&g) {
                        *o += gv;
                    }
                }
                Op::Stack(rows) => {
                    let d = node.cols;
                    for (ri, &r) in rows.iter().enumerate() {
                        for (o, gv) in acc(&mut grads, r, d).iter_mut().zip(&g[ri * d..(ri + 1) * d]) {
                            *o += gv;
                        }
                    }
                }
                Op::Mean(items) => {
                    let k = items.len() as f64;
                    for &it in items {
                        for (o, gv) in acc(&mut grads, it, g.len()).iter_mut().zip(&g) {
                            *o += gv / k;
                        }
                    }
                }
                Op::Softmax(a) => {
                    let y = &node.value;
                    let dot: f64 = g.iter().zip(y).map(|(gv, yv)| gv * yv).sum();
                    for (o, (gv, yv)) in acc(&mut grads, *a, g.len()).iter_mut().zip(g.iter().zip(y)) {
                        *o += yv * (gv - dot);
                    }
                }
                Op::WeightedSum { weights, rows } => {
                    let (k, d) = self.dims(*rows);
                    let (wv, rv) = (self.value(*weights), self.value(*rows));
                    {
                        let gw = acc(&mut grads, *weights, k);
                        for (o, row) in gw.iter_mut().zip(rv.chunks_exact(d)) {
                            *o += row.iter().zip(&g).map(|(r, gv)| r * gv).sum::<f64>();
                        }
                    }
                    let gr = acc(&mut grads, *rows, k * d);
                    for (ki, w) in wv.iter().enumerate() {
                        for (o, gv) in gr[ki * d..(ki + 1) * d].iter_mut().zip(&g) {
                            *o += w * gv;
                        }
                    }
                }
                Op::AdditiveScores { query, keys, v } => {
                    let (k, a) = self.dims(*keys);
                    let (q, kv, vv) = (self.value(*query), self.value(*keys), self.value(*v));
                    let mut gq = vec![0.0; a];
                    let mut gv_acc = vec![0.0; a];
                    let mut gk = vec![0.0; k * a];
                    for ki in 0..k {
                        let gi = g[ki];
                        for ai in 0..a {
                            let t = (q[ai] + kv[ki * a + ai]).tanh();
                            gv_acc[ai] += gi * t;
                            let d = gi * vv[ai] * (1.0 - t * t);
                            gq[ai] += d;
                            gk[ki * a + ai] += d;
                        }
                    }
                    for (var, src) in [(*query, gq), (*keys, gk), (*v, gv_acc)] {
                        let n = src.len();
                        for (o, s) in acc(&mut grads, var, n).iter_mut().zip(&src) {
                            *o += s;
                        }
                    }
                }
                Op::Crf { emissions, transitions, start, end, grad } => {
                    let s = g[0];
                    let n = grad.emissions.len();
                    for (o, e) in acc(&mut grads, *emissions, n * NUM_LABELS).iter_mut().zip(grad.emissions.iter().flatten()) {
                        *o += s * e;
                    }
                    for (o, t) in acc(&mut grads, *transitions, NUM_LABELS * NUM_LABELS).iter_mut().zip(grad.transitions.iter().flatten()) {
                        *o += s * t;
                    }
                    for (o, t) in acc(&mut grads, *start, NUM_LABELS).iter_mut().zip(&grad.start) {
                        *o += s * t;
                    }
                    for (o, t) in acc(&mut grads, *end, NUM_LABELS).iter_mut().zip(&grad.end) {
                        *o += s * t;
                    }
                }
                Op::Bce { p, target } => {
                    let pv = self.scalar(*p);
                    let d = if pv > PROB_CLAMP && pv < 1.0 - PROB_CLAMP {
                        -target / pv + (1.0 - target) / (1.0 - pv)
                    } else {
                        0.0
                    };
                    acc(&mut grads, *p, 1)[0] += g[0] * d;
                }
            }
        }
    }
}
