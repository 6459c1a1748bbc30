//! The verification model: encoders, attention, CRF tag head and global head.

mod checkpoint;
mod config;
mod net;
mod train;
mod vocab;

use std::io::BufRead;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{HermanConfig, Pooling};
pub use net::{ForwardVars, HermanNet};
pub use train::{evaluate_loss, train, train_restarts, EarlyStopping, EpochRecord, Progress, TrainOutcome};
pub use vocab::{Vocabulary, PAD, PAD_ID, UNK, UNK_ID};

use crate::crf::{self, EmissionMatrix, Lattice};
use crate::error::{Error, Result};
use crate::nn::embedding_file::read_embeddings;
use crate::nn::{Graph, ParamStore};
use crate::quant::tag_quantities;
use crate::synth::{mask_from_spans, LabeledInstance, TagLabel, NUM_LABELS};
use crate::text::TokenizedText;

/// Prediction for one (article, summary) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermanOutput {
    /// Constrained Viterbi path.
    pub tag_sequence: Vec<TagLabel>,
    /// Per-token label marginals under the BIO and mask constraints.
    pub tag_marginals: Vec<[f64; NUM_LABELS]>,
    pub z_prob: f64,
    /// Entity mask the prediction was made with.
    pub mask: Vec<u8>,
    /// Set when the summary was cut to the configured maximum.
    pub summary_truncated: bool,
}

/// A labeled instance mapped to vocabulary ids and cut to the model's limits.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedInstance {
    pub id: String,
    pub article: Vec<usize>,
    pub summary: Vec<usize>,
    pub m: Vec<u8>,
    pub y: Vec<TagLabel>,
    pub z: f64,
}

/// Binary cross-entropy with the probability clamped away from 0 and 1.
pub fn bce(p: f64, target: f64) -> f64 {
    let p = p.clamp(crate::nn::graph::PROB_CLAMP, 1.0 - crate::nn::graph::PROB_CLAMP);
    -(target * p.ln() + (1.0 - target) * (1.0 - p).ln())
}

/// Combined objective from already computed tag and verdict losses.
pub fn combine_losses(tag_loss: f64, verdict_loss: f64, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::config(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    Ok(alpha * tag_loss + (1.0 - alpha) * verdict_loss)
}

/// Trained (or freshly initialized) model with its vocabulary.
#[derive(Debug, Clone)]
pub struct Herman {
    pub config: HermanConfig,
    pub vocab: Vocabulary,
    pub net: HermanNet,
    pub store: ParamStore,
}

impl Herman {
    /// Randomly initialized model; initialization is seeded from `config.seed`.
    pub fn new(config: HermanConfig, vocab: Vocabulary) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let net = HermanNet::build(&config, vocab.len(), &mut store, &mut rng)?;
        Ok(Self { config, vocab, net, store })
    }

    /// Vocabulary from the article and summary words of `instances`.
    pub fn vocabulary_for(instances: &[LabeledInstance], max_size: usize) -> Vocabulary {
        let words = instances.iter().flat_map(|i| {
            i.record.article.tokens.iter().chain(&i.record.summary.tokens).map(|t| t.text.as_str())
        });
        Vocabulary::build(words, max_size)
    }

    pub fn encode(&self, instance: &LabeledInstance) -> EncodedInstance {
        let ma = self.config.max_article;
        let ms = self.config.max_summary;
        let article = &instance.record.article.tokens;
        let summary = &instance.record.summary.tokens;
        EncodedInstance {
            id: instance.record.id.clone(),
            article: self.vocab.encode(article.iter().take(ma).map(|t| t.text.as_str())),
            summary: self.vocab.encode(summary.iter().take(ms).map(|t| t.text.as_str())),
            m: instance.m.iter().take(ms).copied().collect(),
            y: instance.y.iter().take(ms).copied().collect(),
            z: instance.z.target(),
        }
    }

    /// Emission scores and verdict probability for encoded inputs.
    pub fn forward_ids(&self, article: &[usize], summary: &[usize], m: &[u8]) -> Result<(EmissionMatrix, f64)> {
        let mut g = Graph::new(&self.store);
        let out = self.net.forward(&mut g, article, summary, m)?;
        Ok((EmissionMatrix::from_flat(g.value(out.emissions)), g.scalar(out.z_prob)))
    }

    /// Emission scores and verdict probability for token words.
    pub fn forward(&self, article: &[&str], summary: &[&str], m: &[u8]) -> Result<(EmissionMatrix, f64)> {
        let a = self.vocab.encode(article.iter().copied());
        let s = self.vocab.encode(summary.iter().copied());
        self.forward_ids(&a, &s, m)
    }

    /// Combined loss of one instance, computed outside the graph.
    pub fn loss(&self, instance: &EncodedInstance) -> Result<f64> {
        let (em, z_prob) = self.forward_ids(&instance.article, &instance.summary, &instance.m)?;
        let params = self.net.crf_params(&self.store);
        let tag = crf::loss_and_gradient(&em, &instance.y, &params, self.config.loss_mode)?.loss;
        combine_losses(tag, bce(z_prob, instance.z), self.config.alpha)
    }

    /// Tag and score a summary against its article. The entity mask comes from
    /// the quantity tagger; over-long inputs are cut to the configured limits.
    pub fn verify(&self, article: &TokenizedText, summary: &TokenizedText) -> Result<HermanOutput> {
        let mut article = article.clone();
        article.truncate(self.config.max_article);
        let summary_truncated = summary.len() > self.config.max_summary;
        let mut summary = summary.clone();
        summary.truncate(self.config.max_summary);

        let mask = mask_from_spans(summary.len(), &tag_quantities(&summary.tokens));
        let (em, z_prob) = self.forward(&article.words(), &summary.words(), &mask)?;
        let params = self.net.crf_params(&self.store);
        let tag_sequence = crf::viterbi(&em, &params, &mask)?;
        let tag_marginals = crf::marginals_in(&em, &params, &Lattice::bio_with_mask(&mask));
        Ok(HermanOutput { tag_sequence, tag_marginals, z_prob, mask, summary_truncated })
    }

    /// Overwrite embedding rows with pretrained vectors; returns how many rows were set.
    pub fn load_embeddings<R: BufRead>(&mut self, reader: R) -> Result<usize> {
        let dim = self.config.embed;
        let vocab = &self.vocab;
        let vectors = read_embeddings(reader, dim, &|w| vocab.id(w) != UNK_ID)?;
        let table = self.store.value_mut(self.net.embedding().table);
        for (word, values) in &vectors {
            let row = self.vocab.id(word);
            table.data_mut()[row * dim..(row + 1) * dim].copy_from_slice(values);
        }
        Ok(vectors.len())
    }
}

#[cfg(test)]
mod tests;
