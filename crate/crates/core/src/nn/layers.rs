//! Differentiable layers built on [`Graph`].

use rand::Rng;

use super::graph::{Graph, Var};
use super::tensor::{Init, ParamId, ParamStore};
use crate::error::{Error, Result};

fn check_width(g: &Graph, x: Var, expected: usize, what: &str) -> Result<()> {
    let got = g.value(x).len();
    if got != expected {
        return Err(Error::shape(format!("{what}: expected width {expected}, got {got}")));
    }
    Ok(())
}

/// Token lookup table.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub table: ParamId,
    pub rows: usize,
    pub dim: usize,
}

impl Embedding {
    pub fn new(store: &mut ParamStore, name: &str, rows: usize, dim: usize, rng: &mut impl Rng) -> Result<Self> {
        let table = store.add(name, vec![rows, dim], Init::Uniform(0.5), rng)?;
        Ok(Self { table, rows, dim })
    }

    pub fn lookup(&self, g: &mut Graph, index: usize) -> Result<Var> {
        if index >= self.rows {
            return Err(Error::shape(format!("embedding index {index} out of range ({} rows)", self.rows)));
        }
        Ok(g.row(self.table, index))
    }
}

/// Affine map `W x + b`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub input: usize,
    pub output: usize,
}

impl Linear {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        output: usize,
        bias: bool,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let weight = store.add(&format!("{name}.weight"), vec![output, input], Init::FanIn(input), rng)?;
        let bias = if bias {
            Some(store.add(&format!("{name}.bias"), vec![output], Init::Zeros, rng)?)
        } else {
            None
        };
        Ok(Self { weight, bias, input, output })
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        check_width(g, x, self.input, "linear")?;
        let w = g.param(self.weight);
        let y = g.matvec(w, x);
        Ok(match self.bias {
            Some(b) => {
                let b = g.param(b);
                g.add(y, b)
            }
            None => y,
        })
    }
}

/// One-hidden-layer perceptron with a tanh hidden activation.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub hidden: Linear,
    pub output: Linear,
}

impl Mlp {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize, output: usize, rng: &mut impl Rng) -> Result<Self> {
        Ok(Self {
            hidden: Linear::new(store, &format!("{name}.hidden"), input, hidden, true, rng)?,
            output: Linear::new(store, &format!("{name}.output"), hidden, output, true, rng)?,
        })
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let h = self.hidden.forward(g, x)?;
        let h = g.tanh(h);
        self.output.forward(g, h)
    }
}

/// LSTM cell with gates stacked as input, forget, candidate, output.
#[derive(Debug, Clone)]
pub struct LstmCell {
    pub weight: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl LstmCell {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut impl Rng) -> Result<Self> {
        let fan_in = input + hidden;
        let weight = store.add(&format!("{name}.weight"), vec![4 * hidden, fan_in], Init::FanIn(fan_in), rng)?;
        let bias = store.add(&format!("{name}.bias"), vec![4 * hidden], Init::Zeros, rng)?;
        store.value_mut(bias).data_mut()[hidden..2 * hidden].iter_mut().for_each(|b| *b = 1.0);
        Ok(Self { weight, bias, input, hidden })
    }

    pub fn zero_state(&self, g: &mut Graph) -> (Var, Var) {
        (g.input(vec![0.0; self.hidden]), g.input(vec![0.0; self.hidden]))
    }

    /// One time step: returns the new hidden and cell states.
    pub fn step(&self, g: &mut Graph, x: Var, h_prev: Var, c_prev: Var) -> Result<(Var, Var)> {
        check_width(g, x, self.input, "lstm input")?;
        check_width(g, h_prev, self.hidden, "lstm hidden state")?;
        check_width(g, c_prev, self.hidden, "lstm cell state")?;
        let hd = self.hidden;
        let xh = g.concat(&[x, h_prev]);
        let w = g.param(self.weight);
        let b = g.param(self.bias);
        let z = g.matvec(w, xh);
        let z = g.add(z, b);
        let i = g.slice(z, 0, hd);
        let i = g.sigmoid(i);
        let f = g.slice(z, hd, hd);
        let f = g.sigmoid(f);
        let cand = g.slice(z, 2 * hd, hd);
        let cand = g.tanh(cand);
        let o = g.slice(z, 3 * hd, hd);
        let o = g.sigmoid(o);
        let keep = g.mul(f, c_prev);
        let write = g.mul(i, cand);
        let c = g.add(keep, write);
        let tc = g.tanh(c);
        let h = g.mul(o, tc);
        Ok((h, c))
    }

    /// Run over a sequence, returning the hidden state at every position.
    pub fn run(&self, g: &mut Graph, xs: &[Var]) -> Result<Vec<Var>> {
        let (mut h, mut c) = self.zero_state(g);
        let mut out = Vec::with_capacity(xs.len());
        for &x in xs {
            (h, c) = self.step(g, x, h, c)?;
            out.push(h);
        }
        Ok(out)
    }
}

/// Forward and backward LSTMs with per-position concatenated states.
#[derive(Debug, Clone)]
pub struct BiLstm {
    pub forward: LstmCell,
    pub backward: LstmCell,
}

impl BiLstm {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut impl Rng) -> Result<Self> {
        Ok(Self {
            forward: LstmCell::new(store, &format!("{name}.fwd"), input, hidden, rng)?,
            backward: LstmCell::new(store, &format!("{name}.bwd"), input, hidden, rng)?,
        })
    }

    pub fn output_width(&self) -> usize {
        self.forward.hidden + self.backward.hidden
    }

    pub fn run(&self, g: &mut Graph, xs: &[Var]) -> Result<Vec<Var>> {
        if xs.is_empty() {
            return Err(Error::shape("bilstm over an empty sequence"));
        }
        let fwd = self.forward.run(g, xs)?;
        let rev: Vec<Var> = xs.iter().rev().copied().collect();
        let mut bwd = self.backward.run(g, &rev)?;
        bwd.reverse();
        Ok(fwd.into_iter().zip(bwd).map(|(f, b)| g.concat(&[f, b])).collect())
    }
}

/// Additive attention: `score_i = vᵀ tanh(W_q q + b + W_k k_i)`.
#[derive(Debug, Clone)]
pub struct AdditiveAttention {
    pub query_proj: ParamId,
    pub bias: ParamId,
    pub key_proj: ParamId,
    pub v: ParamId,
    pub query_dim: usize,
    pub key_dim: usize,
    pub attn_dim: usize,
}

/// Keys stacked and projected once, reusable across queries.
#[derive(Debug, Clone, Copy)]
pub struct AttentionKeys {
    pub keys: Var,
    pub projected: Var,
}

impl AdditiveAttention {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        query_dim: usize,
        key_dim: usize,
        attn_dim: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        Ok(Self {
            query_proj: store.add(&format!("{name}.query"), vec![attn_dim, query_dim], Init::FanIn(query_dim), rng)?,
            bias: store.add(&format!("{name}.bias"), vec![attn_dim], Init::Uniform(1.0), rng)?,
            key_proj: store.add(&format!("{name}.key"), vec![attn_dim, key_dim], Init::FanIn(key_dim), rng)?,
            v: store.add(&format!("{name}.v"), vec![attn_dim], Init::FanIn(attn_dim), rng)?,
            query_dim,
            key_dim,
            attn_dim,
        })
    }

    pub fn prepare(&self, g: &mut Graph, keys: &[Var]) -> Result<AttentionKeys> {
        if keys.is_empty() {
            return Err(Error::shape("attention over no keys"));
        }
        for &k in keys {
            check_width(g, k, self.key_dim, "attention key")?;
        }
        let keys = g.stack(keys);
        let wk = g.param(self.key_proj);
        let projected = g.matmul_t(keys, wk);
        Ok(AttentionKeys { keys, projected })
    }

    /// Context vector and attention weights for one query.
    pub fn attend(&self, g: &mut Graph, keys: &AttentionKeys, query: Var) -> Result<(Var, Var)> {
        check_width(g, query, self.query_dim, "attention query")?;
        let wq = g.param(self.query_proj);
        let q = g.matvec(wq, query);
        let b = g.param(self.bias);
        let q = g.add(q, b);
        let v = g.param(self.v);
        let scores = g.additive_scores(q, keys.projected, v);
        let weights = g.softmax(scores);
        let context = g.weighted_sum(weights, keys.keys);
        Ok((context, weights))
    }

    pub fn forward(&self, g: &mut Graph, query: Var, keys: &[Var]) -> Result<(Var, Var)> {
        let prepared = self.prepare(g, keys)?;
        self.attend(g, &prepared, query)
    }
}
