//! Linear-chain CRF over the five verification labels.
//!
//! All recursions run in log space. A [`Lattice`] restricts which labels may
//! appear at each position and which transitions are legal; the unconstrained
//! lattice admits every one of the 5^n sequences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::{is_well_formed, TagLabel, NUM_LABELS};

const L: usize = NUM_LABELS;

/// Trainable CRF scores.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CrfParams {
    /// `transitions[prev][next]`
    pub transitions: [[f64; L]; L],
    pub start: [f64; L],
    pub end: [f64; L],
}

impl CrfParams {
    pub fn from_slices(transitions: &[f64], start: &[f64], end: &[f64]) -> Self {
        let mut p = CrfParams::default();
        for (i, row) in p.transitions.iter_mut().enumerate() {
            row.copy_from_slice(&transitions[i * L..(i + 1) * L]);
        }
        p.start.copy_from_slice(start);
        p.end.copy_from_slice(end);
        p
    }
}

/// Per-token label scores, one row per summary token.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionMatrix {
    pub rows: Vec<[f64; L]>,
}

impl EmissionMatrix {
    pub fn new(rows: Vec<[f64; L]>) -> Self {
        Self { rows }
    }

    pub fn from_flat(values: &[f64]) -> Self {
        Self {
            rows: values
                .chunks_exact(L)
                .map(|c| c.try_into().unwrap())
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// BIO legality: `mask[prev][next]` and the labels allowed at the first position.
pub fn constraint_mask() -> ([[bool; L]; L], [bool; L]) {
    let mut trans = [[false; L]; L];
    let mut start = [false; L];
    for next in TagLabel::ALL {
        start[next.index()] = TagLabel::allows(None, next);
        for prev in TagLabel::ALL {
            trans[prev.index()][next.index()] = TagLabel::allows(Some(prev), next);
        }
    }
    (trans, start)
}

/// The set of label sequences a recursion sums or maximizes over.
#[derive(Debug, Clone)]
pub struct Lattice {
    transitions: [[bool; L]; L],
    start: [bool; L],
    /// Labels allowed at each position; `None` allows all.
    positions: Option<Vec<[bool; L]>>,
}

impl Lattice {
    pub fn unconstrained() -> Self {
        Self { transitions: [[true; L]; L], start: [true; L], positions: None }
    }

    pub fn bio() -> Self {
        let (transitions, start) = constraint_mask();
        Self { transitions, start, positions: None }
    }

    /// BIO legality plus the entity mask: `m_j = 0` forces `O`, `m_j = 1` forbids it.
    pub fn bio_with_mask(mask: &[u8]) -> Self {
        let o = TagLabel::Outside.index();
        let positions = mask
            .iter()
            .map(|&m| std::array::from_fn(|l| (l == o) == (m == 0)))
            .collect();
        Self { positions: Some(positions), ..Self::bio() }
    }

    fn with_clamp(&self, n: usize, pos: usize, label: usize) -> Self {
        let mut positions = self.positions.clone().unwrap_or_else(|| vec![[true; L]; n]);
        positions[pos] = std::array::from_fn(|l| l == label && positions[pos][l]);
        Self { positions: Some(positions), ..self.clone() }
    }

    fn label_ok(&self, j: usize, l: usize) -> bool {
        self.positions.as_ref().is_none_or(|p| p[j][l])
    }

    pub fn allows_sequence(&self, labels: &[usize]) -> bool {
        labels.iter().enumerate().all(|(j, &l)| {
            self.label_ok(j, l)
                && if j == 0 { self.start[l] } else { self.transitions[labels[j - 1]][l] }
        })
    }
}

fn log_sum_exp<I>(values: I) -> f64
where
    I: IntoIterator<Item = f64>,
    I::IntoIter: Clone,
{
    let values = values.into_iter();
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Score of one label sequence (no normalization).
pub fn sequence_score(emissions: &EmissionMatrix, params: &CrfParams, labels: &[usize]) -> f64 {
    let mut s = 0.0;
    for (j, &l) in labels.iter().enumerate() {
        s += emissions.rows[j][l];
        s += if j == 0 { params.start[l] } else { params.transitions[labels[j - 1]][l] };
    }
    if let Some(&last) = labels.last() {
        s += params.end[last];
    }
    s
}

fn forward_table(emissions: &EmissionMatrix, params: &CrfParams, lattice: &Lattice) -> Vec<[f64; L]> {
    let n = emissions.len();
    let mut alpha = vec![[f64::NEG_INFINITY; L]; n];
    for l in 0..L {
        if lattice.start[l] && lattice.label_ok(0, l) {
            alpha[0][l] = params.start[l] + emissions.rows[0][l];
        }
    }
    for j in 1..n {
        for l in 0..L {
            if !lattice.label_ok(j, l) {
                continue;
            }
            let prev = &alpha[j - 1];
            alpha[j][l] = log_sum_exp((0..L).filter(|&p| lattice.transitions[p][l]).map(|p| prev[p] + params.transitions[p][l]))
                + emissions.rows[j][l];
        }
    }
    alpha
}

fn backward_table(emissions: &EmissionMatrix, params: &CrfParams, lattice: &Lattice) -> Vec<[f64; L]> {
    let n = emissions.len();
    let mut beta = vec![[f64::NEG_INFINITY; L]; n];
    for l in 0..L {
        beta[n - 1][l] = params.end[l];
    }
    for j in (0..n - 1).rev() {
        for l in 0..L {
            let next = &beta[j + 1];
            beta[j][l] = log_sum_exp(
                (0..L)
                    .filter(|&q| lattice.transitions[l][q] && lattice.label_ok(j + 1, q))
                    .map(|q| params.transitions[l][q] + emissions.rows[j + 1][q] + next[q]),
            );
        }
    }
    beta
}

fn log_z_from_alpha(alpha: &[[f64; L]], params: &CrfParams) -> f64 {
    let last = alpha.last().expect("non-empty lattice");
    log_sum_exp((0..L).map(|l| last[l] + params.end[l]))
}

/// Log normalizer over all label sequences.
pub fn log_partition(emissions: &EmissionMatrix, params: &CrfParams) -> f64 {
    log_partition_in(emissions, params, &Lattice::unconstrained())
}

pub fn log_partition_in(emissions: &EmissionMatrix, params: &CrfParams, lattice: &Lattice) -> f64 {
    if emissions.is_empty() {
        return 0.0;
    }
    log_z_from_alpha(&forward_table(emissions, params, lattice), params)
}

/// Expected feature counts under the model, i.e. the gradient of log Z.
#[derive(Debug, Clone, PartialEq)]
pub struct Expectations {
    pub log_z: f64,
    /// Per-position label marginals.
    pub unary: Vec<[f64; L]>,
    /// Expected transition counts summed over positions.
    pub transitions: [[f64; L]; L],
    pub start: [f64; L],
    pub end: [f64; L],
}

pub fn expectations(emissions: &EmissionMatrix, params: &CrfParams, lattice: &Lattice) -> Expectations {
    let n = emissions.len();
    assert!(n > 0, "expectations need at least one position");
    let alpha = forward_table(emissions, params, lattice);
    let beta = backward_table(emissions, params, lattice);
    let log_z = log_z_from_alpha(&alpha, params);
    let unary: Vec<[f64; L]> = (0..n)
        .map(|j| {
            std::array::from_fn(|l| {
                let v = alpha[j][l] + beta[j][l] - log_z;
                if v == f64::NEG_INFINITY { 0.0 } else { v.exp() }
            })
        })
        .collect();
    let mut transitions = [[0.0; L]; L];
    for j in 1..n {
        for p in 0..L {
            if alpha[j - 1][p] == f64::NEG_INFINITY {
                continue;
            }
            for q in 0..L {
                if !lattice.transitions[p][q] || !lattice.label_ok(j, q) {
                    continue;
                }
                let v = alpha[j - 1][p] + params.transitions[p][q] + emissions.rows[j][q] + beta[j][q] - log_z;
                transitions[p][q] += v.exp();
            }
        }
    }
    Expectations { log_z, start: unary[0], end: unary[n - 1], unary, transitions }
}

/// Per-position label marginals over all sequences.
pub fn marginals(emissions: &EmissionMatrix, params: &CrfParams) -> Vec<[f64; L]> {
    expectations(emissions, params, &Lattice::unconstrained()).unary
}

/// Marginals restricted to the sequences admitted by `lattice`.
pub fn marginals_in(emissions: &EmissionMatrix, params: &CrfParams, lattice: &Lattice) -> Vec<[f64; L]> {
    expectations(emissions, params, lattice).unary
}

/// How the tag loss is computed from the CRF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TagLoss {
    /// `log Z − score(gold)`
    #[default]
    Sequence,
    /// `−Σ_j log p(y_j)` with token marginals.
    TokenMarginal,
}

fn gold_indices(emissions: &EmissionMatrix, gold: &[TagLabel]) -> Result<Vec<usize>> {
    if gold.len() != emissions.len() {
        return Err(Error::shape(format!(
            "gold length {} does not match {} emission rows",
            gold.len(),
            emissions.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::shape("empty sequence"));
    }
    if !is_well_formed(gold) {
        return Err(Error::data("gold labels are not valid BIO"));
    }
    Ok(gold.iter().map(|l| l.index()).collect())
}

/// Sequence negative log-likelihood of `gold` (unconstrained normalizer).
pub fn nll(emissions: &EmissionMatrix, gold: &[TagLabel], params: &CrfParams) -> Result<f64> {
    let idx = gold_indices(emissions, gold)?;
    Ok(log_partition(emissions, params) - sequence_score(emissions, params, &idx))
}

/// Gradient of a CRF loss with respect to its inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfGradient {
    pub loss: f64,
    pub emissions: Vec<[f64; L]>,
    pub transitions: [[f64; L]; L],
    pub start: [f64; L],
    pub end: [f64; L],
}

impl CrfGradient {
    fn zeros(n: usize) -> Self {
        Self {
            loss: 0.0,
            emissions: vec![[0.0; L]; n],
            transitions: [[0.0; L]; L],
            start: [0.0; L],
            end: [0.0; L],
        }
    }

    fn add_expectations(&mut self, e: &Expectations, sign: f64) {
        for (g, u) in self.emissions.iter_mut().zip(&e.unary) {
            for l in 0..L {
                g[l] += sign * u[l];
            }
        }
        for p in 0..L {
            for q in 0..L {
                self.transitions[p][q] += sign * e.transitions[p][q];
            }
            self.start[p] += sign * e.start[p];
            self.end[p] += sign * e.end[p];
        }
    }
}

/// Loss and gradient for one sequence.
pub fn loss_and_gradient(
    emissions: &EmissionMatrix,
    gold: &[TagLabel],
    params: &CrfParams,
    mode: TagLoss,
) -> Result<CrfGradient> {
    let idx = gold_indices(emissions, gold)?;
    let n = emissions.len();
    let lattice = Lattice::unconstrained();
    let full = expectations(emissions, params, &lattice);
    let mut grad = CrfGradient::zeros(n);
    match mode {
        TagLoss::Sequence => {
            grad.loss = full.log_z - sequence_score(emissions, params, &idx);
            grad.add_expectations(&full, 1.0);
            for (j, &l) in idx.iter().enumerate() {
                grad.emissions[j][l] -= 1.0;
                if j == 0 {
                    grad.start[l] -= 1.0;
                } else {
                    grad.transitions[idx[j - 1]][l] -= 1.0;
                }
            }
            grad.end[idx[n - 1]] -= 1.0;
        }
        TagLoss::TokenMarginal => {
            // −log p(y_j) = log Z − log Z(y_j clamped)
            for (j, &l) in idx.iter().enumerate() {
                let clamped = expectations(emissions, params, &lattice.with_clamp(n, j, l));
                grad.loss += full.log_z - clamped.log_z;
                grad.add_expectations(&full, 1.0);
                grad.add_expectations(&clamped, -1.0);
            }
        }
    }
    Ok(grad)
}

/// Highest-scoring sequence under BIO legality and the entity mask.
///
/// Ties resolve to the lowest label index, both for the final label and at every
/// back-pointer.
pub fn viterbi(emissions: &EmissionMatrix, params: &CrfParams, mask: &[u8]) -> Result<Vec<TagLabel>> {
    if mask.len() != emissions.len() {
        return Err(Error::shape(format!(
            "mask length {} does not match {} emission rows",
            mask.len(),
            emissions.len()
        )));
    }
    viterbi_in(emissions, params, &Lattice::bio_with_mask(mask))
}

pub fn viterbi_in(emissions: &EmissionMatrix, params: &CrfParams, lattice: &Lattice) -> Result<Vec<TagLabel>> {
    let n = emissions.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let neg = f64::NEG_INFINITY;
    let mut delta = vec![[neg; L]; n];
    let mut back = vec![[0usize; L]; n];
    for l in 0..L {
        if lattice.start[l] && lattice.label_ok(0, l) {
            delta[0][l] = params.start[l] + emissions.rows[0][l];
        }
    }
    for j in 1..n {
        for l in 0..L {
            if !lattice.label_ok(j, l) {
                continue;
            }
            let mut best = neg;
            let mut arg = 0;
            for p in 0..L {
                if !lattice.transitions[p][l] || delta[j - 1][p] == neg {
                    continue;
                }
                let v = delta[j - 1][p] + params.transitions[p][l];
                if v > best {
                    best = v;
                    arg = p;
                }
            }
            if best > neg {
                delta[j][l] = best + emissions.rows[j][l];
                back[j][l] = arg;
            }
        }
    }
    let mut best = neg;
    let mut last = None;
    for l in 0..L {
        let v = delta[n - 1][l] + params.end[l];
        if delta[n - 1][l] > neg && v > best {
            best = v;
            last = Some(l);
        }
    }
    let mut cur = last.ok_or_else(|| Error::numeric("no feasible label sequence"))?;
    let mut path = vec![cur; n];
    for j in (1..n).rev() {
        cur = back[j][cur];
        path[j - 1] = cur;
    }
    Ok(path.into_iter().map(TagLabel::from_index).collect())
}
