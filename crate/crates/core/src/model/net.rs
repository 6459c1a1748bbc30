//! Parameter layout and forward pass of the verification network.

use rand::Rng;

use super::config::{HermanConfig, Pooling};
use crate::crf::CrfParams;
use crate::error::{Error, Result};
use crate::nn::{AdditiveAttention, BiLstm, Embedding, Graph, Init, Linear, Mlp, ParamId, ParamStore, Var};
use crate::synth::{TagLabel, NUM_LABELS};

#[derive(Debug, Clone)]
enum EmissionHead {
    Linear(Linear),
    Mlp(Mlp),
}

impl EmissionHead {
    fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        match self {
            EmissionHead::Linear(l) => l.forward(g, x),
            EmissionHead::Mlp(m) => m.forward(g, x),
        }
    }
}

/// Graph handles produced by one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardVars {
    /// n×5 emission scores.
    pub emissions: Var,
    /// Scalar probability that the summary is verified.
    pub z_prob: Var,
    /// Attention weights over the article, one vector per summary position.
    pub attention: Vec<Var>,
}

/// Layer handles into a [`ParamStore`]; holds no weights itself.
#[derive(Debug, Clone)]
pub struct HermanNet {
    config: HermanConfig,
    vocab_size: usize,
    embedding: Embedding,
    mask_embedding: Option<Embedding>,
    article_encoder: BiLstm,
    summary_encoder: BiLstm,
    attention: AdditiveAttention,
    emission: EmissionHead,
    z_head: Mlp,
    pub transitions: ParamId,
    pub start: ParamId,
    pub end: ParamId,
}

impl HermanNet {
    /// Register every parameter in `store`. Names are stable, so a checkpoint
    /// can be matched against a freshly built network.
    pub fn build(config: &HermanConfig, vocab_size: usize, store: &mut ParamStore, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let h = config.hidden;
        let state = 2 * h;
        let embedding = Embedding::new(store, "embedding", vocab_size, config.embed, rng)?;
        let mask_embedding = if config.m_input {
            Some(Embedding::new(store, "mask_embedding", 2, config.m_embed, rng)?)
        } else {
            None
        };
        let summary_input = config.embed + if config.m_input { config.m_embed } else { 0 };
        let article_encoder = BiLstm::new(store, "article_encoder", config.embed, h, rng)?;
        let summary_encoder = BiLstm::new(store, "summary_encoder", summary_input, h, rng)?;
        let attention = AdditiveAttention::new(store, "attention", state, state, config.attention_width(), rng)?;
        let features = 2 * state + usize::from(config.m_emission);
        let emission = if config.emission_hidden == 0 {
            EmissionHead::Linear(Linear::new(store, "emission", features, NUM_LABELS, true, rng)?)
        } else {
            EmissionHead::Mlp(Mlp::new(store, "emission", features, config.emission_hidden, NUM_LABELS, rng)?)
        };
        let z_head = Mlp::new(store, "z_head", 2 * state, config.z_hidden, 1, rng)?;
        let transitions = store.add("crf.transitions", vec![NUM_LABELS, NUM_LABELS], Init::Zeros, rng)?;
        let start = store.add("crf.start", vec![NUM_LABELS], Init::Zeros, rng)?;
        let end = store.add("crf.end", vec![NUM_LABELS], Init::Zeros, rng)?;
        Ok(Self {
            config: config.clone(),
            vocab_size,
            embedding,
            mask_embedding,
            article_encoder,
            summary_encoder,
            attention,
            emission,
            z_head,
            transitions,
            start,
            end,
        })
    }

    pub fn config(&self) -> &HermanConfig {
        &self.config
    }

    pub fn embedding(&self) -> &Embedding {
        &self.embedding
    }

    pub fn crf_params(&self, store: &ParamStore) -> CrfParams {
        CrfParams::from_slices(
            store.value(self.transitions).data(),
            store.value(self.start).data(),
            store.value(self.end).data(),
        )
    }

    fn check_inputs(&self, article: &[usize], summary: &[usize], m: &[u8]) -> Result<()> {
        if article.is_empty() || summary.is_empty() {
            return Err(Error::shape("article and summary must both be non-empty"));
        }
        if m.len() != summary.len() {
            return Err(Error::shape(format!("mask length {} != summary length {}", m.len(), summary.len())));
        }
        if article.len() > self.config.max_article || summary.len() > self.config.max_summary {
            return Err(Error::shape(format!(
                "lengths {}/{} exceed limits {}/{}",
                article.len(),
                summary.len(),
                self.config.max_article,
                self.config.max_summary
            )));
        }
        if let Some(&bad) = article.iter().chain(summary).find(|&&id| id >= self.vocab_size) {
            return Err(Error::shape(format!("token id {bad} outside vocabulary of {}", self.vocab_size)));
        }
        if m.iter().any(|&b| b > 1) {
            return Err(Error::shape("mask entries must be 0 or 1"));
        }
        Ok(())
    }

    pub fn forward(&self, g: &mut Graph, article: &[usize], summary: &[usize], m: &[u8]) -> Result<ForwardVars> {
        self.check_inputs(article, summary, m)?;

        let article_in = article
            .iter()
            .map(|&id| self.embedding.lookup(g, id))
            .collect::<Result<Vec<_>>>()?;
        let article_states = self.article_encoder.run(g, &article_in)?;

        let mut summary_in = Vec::with_capacity(summary.len());
        for (&id, &bit) in summary.iter().zip(m) {
            let e = self.embedding.lookup(g, id)?;
            summary_in.push(match &self.mask_embedding {
                Some(table) => {
                    let me = table.lookup(g, usize::from(bit))?;
                    g.concat(&[e, me])
                }
                None => e,
            });
        }
        let summary_states = self.summary_encoder.run(g, &summary_in)?;

        let keys = self.attention.prepare(g, &article_states)?;
        let mut contexts = Vec::with_capacity(summary.len());
        let mut rows = Vec::with_capacity(summary.len());
        let mut attention = Vec::with_capacity(summary.len());
        for (&s, &bit) in summary_states.iter().zip(m) {
            let (c, w) = self.attention.attend(g, &keys, s)?;
            let ctx = g.concat(&[s, c]);
            let features = if self.config.m_emission {
                let mb = g.input(vec![f64::from(bit)]);
                g.concat(&[ctx, mb])
            } else {
                ctx
            };
            rows.push(self.emission.forward(g, features)?);
            contexts.push(ctx);
            attention.push(w);
        }
        let emissions = g.stack(&rows);

        let logit = match self.config.z_pooling {
            Pooling::Mean => {
                let pooled = g.mean(&contexts);
                self.z_head.forward(g, pooled)?
            }
            Pooling::HiddenMean => {
                let mut hidden = Vec::with_capacity(contexts.len());
                for &ctx in &contexts {
                    let h = self.z_head.hidden.forward(g, ctx)?;
                    hidden.push(g.tanh(h));
                }
                let pooled = g.mean(&hidden);
                self.z_head.output.forward(g, pooled)?
            }
        };
        let z_prob = g.sigmoid(logit);
        Ok(ForwardVars { emissions, z_prob, attention })
    }

    /// `α · L_Y + (1 − α) · L_z` on the graph.
    pub fn loss(&self, g: &mut Graph, out: &ForwardVars, gold_y: &[TagLabel], gold_z: f64) -> Result<Var> {
        let t = g.param(self.transitions);
        let s = g.param(self.start);
        let e = g.param(self.end);
        let tag = g.crf_loss(out.emissions, t, s, e, gold_y, self.config.loss_mode)?;
        let verdict = g.bce(out.z_prob, gold_z);
        let alpha = self.config.alpha;
        let a = g.scale(tag, alpha);
        let b = g.scale(verdict, 1.0 - alpha);
        Ok(g.add(a, b))
    }
}
