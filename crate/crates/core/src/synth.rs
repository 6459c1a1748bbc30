//! Weakly supervised dataset generation.
//!
//! A gold summary yields a VERIFIED instance. Its UNVERIFIED sibling replaces every
//! summary quantity that has a same-type alternative in the article with a randomly
//! chosen alternative. Records without any replaceable quantity are dropped entirely
//! so the two classes stay balanced.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::quant::{tag_quantities, QuantitySpan, QuantityType};
use crate::text::{CorpusRecord, Token, TokenizedText};

/// Token-level verification label in BIO format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TagLabel {
    #[serde(rename = "B-V")]
    BeginVerified,
    #[serde(rename = "I-V")]
    InsideVerified,
    #[serde(rename = "B-U")]
    BeginUnverified,
    #[serde(rename = "I-U")]
    InsideUnverified,
    #[serde(rename = "O")]
    Outside,
}

pub const NUM_LABELS: usize = 5;

impl TagLabel {
    /// All labels in index order; the order doubles as the decoding tie-break.
    pub const ALL: [TagLabel; NUM_LABELS] = [
        TagLabel::BeginVerified,
        TagLabel::InsideVerified,
        TagLabel::BeginUnverified,
        TagLabel::InsideUnverified,
        TagLabel::Outside,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> TagLabel {
        Self::ALL[i]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TagLabel::BeginVerified => "B-V",
            TagLabel::InsideVerified => "I-V",
            TagLabel::BeginUnverified => "B-U",
            TagLabel::InsideUnverified => "I-U",
            TagLabel::Outside => "O",
        }
    }

    pub fn is_inside(self) -> bool {
        matches!(self, TagLabel::InsideVerified | TagLabel::InsideUnverified)
    }

    pub fn is_verified(self) -> bool {
        matches!(self, TagLabel::BeginVerified | TagLabel::InsideVerified)
    }

    pub fn is_unverified(self) -> bool {
        matches!(self, TagLabel::BeginUnverified | TagLabel::InsideUnverified)
    }

    /// Whether `next` may directly follow `self` (`None` = sequence start).
    pub fn allows(prev: Option<TagLabel>, next: TagLabel) -> bool {
        use TagLabel::*;
        match next {
            InsideVerified => matches!(prev, Some(BeginVerified | InsideVerified)),
            InsideUnverified => matches!(prev, Some(BeginUnverified | InsideUnverified)),
            _ => true,
        }
    }
}

impl fmt::Display for TagLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// BIO well-formedness of a label sequence.
pub fn is_well_formed(labels: &[TagLabel]) -> bool {
    let mut prev = None;
    for &l in labels {
        if !TagLabel::allows(prev, l) {
            return false;
        }
        prev = Some(l);
    }
    true
}

/// The entity mask implied by a label sequence: 0 on `O`, 1 elsewhere.
pub fn mask_from_labels(labels: &[TagLabel]) -> Vec<u8> {
    labels.iter().map(|&l| u8::from(l != TagLabel::Outside)).collect()
}

/// Entity mask of a token sequence according to the quantity tagger.
pub fn mask_from_spans(len: usize, spans: &[QuantitySpan]) -> Vec<u8> {
    let mut m = vec![0; len];
    for s in spans {
        m[s.start..s.end].iter_mut().for_each(|v| *v = 1);
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Verified,
    Unverified,
}

impl Verdict {
    /// 1.0 for VERIFIED, the positive class of the summary-level head.
    pub fn target(self) -> f64 {
        match self {
            Verdict::Verified => 1.0,
            Verdict::Unverified => 0.0,
        }
    }
}

/// One entity swap performed while building an UNVERIFIED summary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Replacement {
    pub qtype: QuantityType,
    /// The summary span that was removed.
    pub original: QuantitySpan,
    /// The article span whose tokens were inserted.
    pub source: QuantitySpan,
    /// Token range of the inserted tokens in the new summary.
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledInstance {
    pub record: CorpusRecord,
    pub y: Vec<TagLabel>,
    pub m: Vec<u8>,
    pub z: Verdict,
    pub replacements: Vec<Replacement>,
}

impl LabeledInstance {
    pub fn validate(&self) -> Result<()> {
        let n = self.record.summary.len();
        if self.y.len() != n || self.m.len() != n {
            return Err(Error::data(format!(
                "{}: label lengths y={} m={} differ from summary length {n}",
                self.record.id,
                self.y.len(),
                self.m.len()
            )));
        }
        if self.m != mask_from_labels(&self.y) {
            return Err(Error::data(format!("{}: mask disagrees with labels", self.record.id)));
        }
        if !is_well_formed(&self.y) {
            return Err(Error::data(format!("{}: labels are not valid BIO", self.record.id)));
        }
        let has_u = self.y.iter().any(|l| l.is_unverified());
        let has_bu = self.y.contains(&TagLabel::BeginUnverified);
        match self.z {
            Verdict::Verified if has_u => {
                Err(Error::data(format!("{}: VERIFIED instance carries U labels", self.record.id)))
            }
            Verdict::Unverified if !has_bu => {
                Err(Error::data(format!("{}: UNVERIFIED instance has no B-U", self.record.id)))
            }
            _ => Ok(()),
        }
    }

    pub fn variant(&self) -> &'static str {
        match self.z {
            Verdict::Verified => "verified",
            Verdict::Unverified => "unverified",
        }
    }
}

fn span_labels(begin: TagLabel, inside: TagLabel, len: usize) -> impl Iterator<Item = TagLabel> {
    std::iter::once(begin).chain(std::iter::repeat_n(inside, len.saturating_sub(1)))
}

/// Label a gold summary: every tagged quantity is verified.
pub fn label_verified(record: &CorpusRecord) -> LabeledInstance {
    let spans = tag_quantities(&record.summary.tokens);
    let mut y = vec![TagLabel::Outside; record.summary.len()];
    for s in &spans {
        for (slot, l) in y[s.start..s.end]
            .iter_mut()
            .zip(span_labels(TagLabel::BeginVerified, TagLabel::InsideVerified, s.len()))
        {
            *slot = l;
        }
    }
    LabeledInstance {
        record: record.clone(),
        m: mask_from_labels(&y),
        y,
        z: Verdict::Verified,
        replacements: Vec::new(),
    }
}

/// Deterministic generator for one (seed, record, span) triple.
fn span_rng(seed: u64, record_id: &str, span_index: usize) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((record_id.len() as u64).to_le_bytes());
    h.update(record_id.as_bytes());
    h.update((span_index as u64).to_le_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// Article spans of the same type whose value differs from `target`, one per distinct value.
pub fn replacement_pool<'a>(target: &QuantitySpan, article_spans: &'a [QuantitySpan]) -> Vec<&'a QuantitySpan> {
    let mut pool: Vec<&QuantitySpan> = Vec::new();
    for a in article_spans {
        if a.qtype == target.qtype
            && a.normalized != target.normalized
            && !pool.iter().any(|p| p.normalized == a.normalized)
        {
            pool.push(a);
        }
    }
    pool
}

/// Build the UNVERIFIED counterpart of a record, or `None` when no summary
/// quantity has a same-type alternative in the article (the record is discarded).
pub fn perturb(record: &CorpusRecord, seed: u64) -> Option<LabeledInstance> {
    let summary_spans = tag_quantities(&record.summary.tokens);
    let article_spans = tag_quantities(&record.article.tokens);
    let choices: Vec<Option<&QuantitySpan>> = summary_spans
        .iter()
        .enumerate()
        .map(|(idx, s)| {
            let pool = replacement_pool(s, &article_spans);
            (!pool.is_empty()).then(|| {
                let k = span_rng(seed, &record.id, idx).random_range(0..pool.len());
                pool[k]
            })
        })
        .collect();
    if choices.iter().all(Option::is_none) {
        return None;
    }

    let old = &record.summary;
    let mut source = String::with_capacity(old.source.len());
    let mut tokens: Vec<Token> = Vec::with_capacity(old.len());
    let mut y = Vec::with_capacity(old.len());
    let mut replacements = Vec::new();
    let mut cursor = 0;
    let mut j = 0;
    let mut spans = summary_spans.iter().zip(&choices).peekable();

    let push_tokens = |source: &mut String, tokens: &mut Vec<Token>, from: &TokenizedText, range: std::ops::Range<usize>| {
        let base = from.tokens[range.start].start;
        let end = from.tokens[range.end - 1].end;
        let shift = source.len();
        source.push_str(&from.source[base..end]);
        for t in &from.tokens[range] {
            tokens.push(Token { text: t.text.clone(), start: t.start - base + shift, end: t.end - base + shift });
        }
    };

    while j < old.len() {
        source.push_str(&old.source[cursor..old.tokens[j].start]);
        match spans.peek() {
            Some((s, choice)) if s.start == j => {
                let (s, choice) = spans.next().unwrap();
                match choice {
                    Some(a) => {
                        let new_start = tokens.len();
                        push_tokens(&mut source, &mut tokens, &record.article, a.start..a.end);
                        y.extend(span_labels(TagLabel::BeginUnverified, TagLabel::InsideUnverified, a.len()));
                        replacements.push(Replacement {
                            qtype: s.qtype,
                            original: s.clone(),
                            source: (*a).clone(),
                            start: new_start,
                            end: tokens.len(),
                        });
                    }
                    None => {
                        push_tokens(&mut source, &mut tokens, old, s.start..s.end);
                        y.extend(span_labels(TagLabel::BeginVerified, TagLabel::InsideVerified, s.len()));
                    }
                }
                cursor = old.tokens[s.end - 1].end;
                j = s.end;
            }
            _ => {
                push_tokens(&mut source, &mut tokens, old, j..j + 1);
                y.push(TagLabel::Outside);
                cursor = old.tokens[j].end;
                j += 1;
            }
        }
    }
    source.push_str(&old.source[cursor..]);

    Some(LabeledInstance {
        record: CorpusRecord {
            id: record.id.clone(),
            article: record.article.clone(),
            summary: TokenizedText { source, tokens },
        },
        m: mask_from_labels(&y),
        y,
        z: Verdict::Unverified,
        replacements,
    })
}

/// Emit VERIFIED/UNVERIFIED pairs for every record that can be perturbed,
/// ordered by record id.
pub fn build_dataset(corpus: &[CorpusRecord], seed: u64) -> Vec<LabeledInstance> {
    let mut order: Vec<&CorpusRecord> = corpus.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));
    let mut out = Vec::with_capacity(corpus.len() * 2);
    for record in order {
        if let Some(neg) = perturb(record, seed) {
            out.push(label_verified(record));
            out.push(neg);
        }
    }
    out
}

/// Serialized form of one instance in a dataset JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceLine {
    pub id: String,
    pub variant: String,
    pub article: String,
    pub summary: String,
    pub article_tokens: Vec<String>,
    pub summary_tokens: Vec<String>,
    pub y: Vec<TagLabel>,
    pub m: Vec<u8>,
    pub z: Verdict,
}

impl From<&LabeledInstance> for InstanceLine {
    fn from(inst: &LabeledInstance) -> Self {
        let words = |t: &TokenizedText| t.tokens.iter().map(|t| t.text.clone()).collect();
        Self {
            id: inst.record.id.clone(),
            variant: inst.variant().to_string(),
            article: inst.record.article.source.clone(),
            summary: inst.record.summary.source.clone(),
            article_tokens: words(&inst.record.article),
            summary_tokens: words(&inst.record.summary),
            y: inst.y.clone(),
            m: inst.m.clone(),
            z: inst.z,
        }
    }
}

impl InstanceLine {
    pub fn validate(&self) -> Result<()> {
        let n = self.summary_tokens.len();
        if self.y.len() != n || self.m.len() != n {
            return Err(Error::data(format!("{}: label lengths differ from summary length", self.id)));
        }
        if self.m != mask_from_labels(&self.y) || !is_well_formed(&self.y) {
            return Err(Error::data(format!("{}: inconsistent labels", self.id)));
        }
        Ok(())
    }

    /// Rebuilds the instance, checking that the stored tokens match the text.
    pub fn into_instance(self) -> Result<LabeledInstance> {
        self.validate()?;
        let record = CorpusRecord::new(self.id, &self.article, &self.summary);
        let same = |t: &TokenizedText, words: &[String]| t.tokens.iter().map(|t| &t.text).eq(words.iter());
        if !same(&record.article, &self.article_tokens) || !same(&record.summary, &self.summary_tokens) {
            return Err(Error::data(format!("{}: stored tokens do not match the text", record.id)));
        }
        let instance = LabeledInstance { record, y: self.y, m: self.m, z: self.z, replacements: Vec::new() };
        instance.validate()?;
        Ok(instance)
    }
}
