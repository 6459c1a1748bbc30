//! ROUGE, tagging and verdict metrics, and quantity statistics over summaries.
//!
//! ROUGE runs on this crate's lowercased tokens, with no stemming and no
//! stopword removal.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quant::{tag_quantities, QuantityType};
use crate::synth::{TagLabel, Verdict};
use crate::text::TokenizedText;

/// Recall, precision and F1 as fractions in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RougeScore {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

impl RougeScore {
    /// Builds a score from an overlap count and the two denominators; an
    /// empty denominator yields 0.
    pub fn from_counts(overlap: usize, candidate_total: usize, reference_total: usize) -> Self {
        let ratio = |den: usize| if den == 0 { 0.0 } else { overlap as f64 / den as f64 };
        Self::from_pr(ratio(candidate_total), ratio(reference_total))
    }

    pub fn from_pr(precision: f64, recall: f64) -> Self {
        Self { recall, precision, f1: harmonic(precision, recall) }
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for window in tokens.windows(n) {
        *counts.entry(window.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
    }
    counts
}

/// ROUGE-N with clipped n-gram counts. `n` must be at least 1.
pub fn rouge_n<S: AsRef<str>>(candidate: &[S], reference: &[S], n: usize) -> RougeScore {
    assert!(n >= 1, "ROUGE-N needs n >= 1");
    let cand = ngram_counts(candidate, n);
    let refs = ngram_counts(reference, n);
    let overlap = cand.iter().map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0))).sum();
    RougeScore::from_counts(overlap, cand.values().sum(), refs.values().sum())
}

/// Length of the longest common subsequence.
pub fn lcs_len<S: AsRef<str>>(a: &[S], b: &[S]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x.as_ref() == y.as_ref() { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// ROUGE-L over the whole token sequences.
pub fn rouge_l<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> RougeScore {
    RougeScore::from_counts(lcs_len(candidate, reference), candidate.len(), reference.len())
}

/// ROUGE-1, ROUGE-2 and ROUGE-L for one pair, or averaged over a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RougeSet {
    pub rouge1: RougeScore,
    pub rouge2: RougeScore,
    pub rouge_l: RougeScore,
}

impl RougeSet {
    pub fn score<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> Self {
        Self {
            rouge1: rouge_n(candidate, reference, 1),
            rouge2: rouge_n(candidate, reference, 2),
            rouge_l: rouge_l(candidate, reference),
        }
    }

    /// Macro average over pairs; F1 is averaged per pair, not recomputed.
    pub fn mean(sets: &[RougeSet]) -> Self {
        if sets.is_empty() {
            return Self::default();
        }
        let n = sets.len() as f64;
        let avg = |pick: fn(&RougeSet) -> RougeScore| {
            let (r, p, f) = sets.iter().map(pick).fold((0.0, 0.0, 0.0), |(r, p, f), s| (r + s.recall, p + s.precision, f + s.f1));
            RougeScore { recall: r / n, precision: p / n, f1: f / n }
        };
        Self { rouge1: avg(|s| s.rouge1), rouge2: avg(|s| s.rouge2), rouge_l: avg(|s| s.rouge_l) }
    }
}

/// Rounds a percentage to two decimals for reporting.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Precision, recall and F1 in percent, with the underlying counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold occurrences.
    pub support: usize,
    pub predicted: usize,
    pub correct: usize,
}

impl LabelScores {
    /// When a side has no occurrences at all, agreement is vacuous: a ratio
    /// with an empty denominator counts as 100 if the other side is empty too,
    /// and as 0 otherwise.
    pub fn from_counts(correct: usize, predicted: usize, support: usize) -> Self {
        let ratio = |den: usize, other: usize| match (den, other) {
            (0, 0) => 100.0,
            (0, _) => 0.0,
            _ => 100.0 * correct as f64 / den as f64,
        };
        let precision = ratio(predicted, support);
        let recall = ratio(support, predicted);
        Self {
            precision: round2(precision),
            recall: round2(recall),
            f1: round2(harmonic(precision, recall)),
            support,
            predicted,
            correct,
        }
    }
}

/// Token-level tagging scores per label plus summary-level verdict scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagReport {
    /// Keyed by label name (`B-V`, `I-V`, `B-U`, `I-U`, `O`).
    pub labels: BTreeMap<String, LabelScores>,
    pub z_accuracy: f64,
    /// F1 with VERIFIED as the positive class.
    pub z_f1: f64,
    pub sequences: usize,
    pub tokens: usize,
}

impl TagReport {
    pub fn label(&self, label: TagLabel) -> &LabelScores {
        &self.labels[label.as_str()]
    }
}

/// Scores predicted tag sequences and verdicts against gold ones.
pub fn tag_report(pred: &[Vec<TagLabel>], gold: &[Vec<TagLabel>], pred_z: &[Verdict], gold_z: &[Verdict]) -> Result<TagReport> {
    if pred.len() != gold.len() || pred_z.len() != gold_z.len() || pred.len() != pred_z.len() {
        return Err(Error::shape(format!(
            "tag report needs aligned inputs, got {} / {} sequences and {} / {} verdicts",
            pred.len(),
            gold.len(),
            pred_z.len(),
            gold_z.len()
        )));
    }
    let mut counts = [(0usize, 0usize, 0usize); 5];
    let mut tokens = 0;
    for (i, (p, g)) in pred.iter().zip(gold).enumerate() {
        if p.len() != g.len() {
            return Err(Error::shape(format!("sequence {i}: {} predicted tags for {} gold tags", p.len(), g.len())));
        }
        tokens += p.len();
        for (&pl, &gl) in p.iter().zip(g) {
            counts[pl.index()].1 += 1;
            counts[gl.index()].2 += 1;
            if pl == gl {
                counts[pl.index()].0 += 1;
            }
        }
    }
    let labels = TagLabel::ALL
        .iter()
        .map(|l| {
            let (c, p, s) = counts[l.index()];
            (l.as_str().to_string(), LabelScores::from_counts(c, p, s))
        })
        .collect();

    let positive = |v: &Verdict| *v == Verdict::Verified;
    let hits = pred_z.iter().zip(gold_z).filter(|(p, g)| p == g).count();
    let tp = pred_z.iter().zip(gold_z).filter(|(p, g)| positive(p) && positive(g)).count();
    let z = LabelScores::from_counts(tp, pred_z.iter().filter(|v| positive(v)).count(), gold_z.iter().filter(|v| positive(v)).count());
    let z_accuracy = if gold_z.is_empty() { 100.0 } else { round2(100.0 * hits as f64 / gold_z.len() as f64) };
    Ok(TagReport { labels, z_accuracy, z_f1: z.f1, sequences: pred.len(), tokens })
}

/// Mean number of quantity entities per summary; 0 for an empty list.
pub fn avg_q(summaries: &[TokenizedText]) -> f64 {
    if summaries.is_empty() {
        return 0.0;
    }
    let total: usize = summaries.iter().map(|s| tag_quantities(&s.tokens).len()).sum();
    total as f64 / summaries.len() as f64
}

/// Number of summaries containing at least one entity of each type.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TypeCounts(pub BTreeMap<QuantityType, usize>);

impl TypeCounts {
    pub fn get(&self, qtype: QuantityType) -> usize {
        self.0.get(&qtype).copied().unwrap_or(0)
    }
}

pub fn type_counts(summaries: &[TokenizedText]) -> TypeCounts {
    let mut counts: BTreeMap<QuantityType, usize> = QuantityType::ALL.iter().map(|&t| (t, 0)).collect();
    for summary in summaries {
        let mut seen: Vec<QuantityType> = tag_quantities(&summary.tokens).iter().map(|s| s.qtype).collect();
        seen.sort();
        seen.dedup();
        for t in seen {
            *counts.entry(t).or_insert(0) += 1;
        }
    }
    TypeCounts(counts)
}

/// Percentage change from `original` to `updated`, `None` when `original` is 0.
pub fn pct_diff(original: usize, updated: usize) -> Option<f64> {
    (original > 0).then(|| round2(100.0 * (updated as f64 - original as f64) / original as f64))
}
