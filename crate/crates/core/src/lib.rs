//! Detection and verification of quantity entities in abstractive summaries.
//!
//! Train on the bundled toy corpus and re-rank a beam:
//!
//! ```no_run
//! use herman_core::model::{train_restarts, EncodedInstance, Herman};
//! use herman_core::rerank::{rerank, Scorer};
//! use herman_core::synth::{build_dataset, LabeledInstance};
//! use herman_core::toy;
//!
//! # fn main() -> herman_core::Result<()> {
//! let records = toy::corpus(toy::CORPUS_SIZE, toy::CORPUS_SEED);
//! let (train, val, _test) = toy::split(&records, |r| r.id.as_str(), 7);
//! let (train, val) = (build_dataset(&train, 1), build_dataset(&val, 1));
//!
//! let config = toy::model_config();
//! let vocab = Herman::vocabulary_for(&train, config.vocab);
//! let encoder = Herman::new(config.clone(), vocab.clone())?;
//! let encode = |set: &[LabeledInstance]| -> Vec<EncodedInstance> { set.iter().map(|i| encoder.encode(i)).collect() };
//! let (model, outcome) =
//!     train_restarts(&config, |c| Herman::new(c, vocab.clone()), &encode(&train), &encode(&val), |_| Ok(()))?;
//! println!("kept run {} epoch {}", outcome.best_run, outcome.best_epoch);
//!
//! let planted = &toy::beams(1, 5, 3)[0];
//! let ranked = rerank(&planted.beam, Scorer::Global, Some(&model))?;
//! println!("picked {}, faithful is {}", ranked.selected, planted.faithful);
//! # Ok(())
//! # }
//! ```

pub mod crf;
pub mod error;
pub mod eval;
mod lexicon;
pub mod model;
pub mod nn;
pub mod quant;
pub mod rerank;
pub mod synth;
pub mod text;
pub mod toy;

pub use error::{Error, Result};
pub use quant::{normalize, tag_quantities, QuantitySpan, QuantityType};
pub use text::{tokenize, truncate, CorpusRecord, Token, TokenizedText};
