//! Beam re-ranking by verification score.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Herman, HermanOutput};
use crate::quant::tag_quantities;
use crate::synth::TagLabel;
use crate::text::TokenizedText;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamCandidate {
    pub text: String,
    /// Position in the summarizer's beam, 0 = top.
    pub beam_rank: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_score: Option<f64>,
}

/// One line of a beam file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Beam {
    pub id: String,
    pub article: String,
    pub candidates: Vec<BeamCandidate>,
}

impl Beam {
    pub fn validate(&self) -> Result<()> {
        if self.candidates.is_empty() {
            return Err(Error::data(format!("beam {} has no candidates", self.id)));
        }
        let mut seen = HashSet::new();
        if let Some(c) = self.candidates.iter().find(|c| !seen.insert(c.beam_rank)) {
            return Err(Error::data(format!("beam {} repeats beam_rank {}", self.id, c.beam_rank)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    #[serde(flatten)]
    pub candidate: BeamCandidate,
    pub verification_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedBeam {
    pub id: String,
    pub candidates: Vec<ScoredCandidate>,
    /// Index into `candidates` of the chosen summary.
    pub selected: usize,
}

impl RankedBeam {
    pub fn selected_candidate(&self) -> &ScoredCandidate {
        &self.candidates[self.selected]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scorer {
    Global,
    Local,
    Shortest,
    MaxOverlap,
}

impl Scorer {
    pub const ALL: [Scorer; 4] = [Scorer::Global, Scorer::Local, Scorer::Shortest, Scorer::MaxOverlap];

    pub fn name(self) -> &'static str {
        match self {
            Scorer::Global => "global",
            Scorer::Local => "local",
            Scorer::Shortest => "shortest",
            Scorer::MaxOverlap => "max-overlap",
        }
    }

    pub fn needs_model(self) -> bool {
        matches!(self, Scorer::Global | Scorer::Local)
    }
}

impl fmt::Display for Scorer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scorer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scorer::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::config(format!("unknown scorer {s:?}; expected global, local, shortest or max-overlap")))
    }
}

/// What the local score reads per entity token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalSource {
    /// Constrained label marginals.
    #[default]
    Marginals,
    /// Indicators of the Viterbi labels.
    Viterbi,
}

pub fn score_global(output: &HermanOutput) -> f64 {
    output.z_prob
}

/// Mean over entity tokens of verified minus unverified label mass; 0 without entities.
pub fn score_local(output: &HermanOutput, m: &[u8]) -> Result<f64> {
    score_local_with(output, m, LocalSource::Marginals)
}

pub fn score_local_with(output: &HermanOutput, m: &[u8], source: LocalSource) -> Result<f64> {
    if m.len() != output.tag_marginals.len() || m.len() != output.tag_sequence.len() {
        return Err(Error::shape(format!(
            "mask length {} does not match output length {}",
            m.len(),
            output.tag_marginals.len()
        )));
    }
    let (mut total, mut count) = (0.0, 0usize);
    for (j, _) in m.iter().enumerate().filter(|(_, &b)| b == 1) {
        total += match source {
            LocalSource::Marginals => {
                let p = &output.tag_marginals[j];
                p[TagLabel::BeginVerified.index()] + p[TagLabel::InsideVerified.index()]
                    - p[TagLabel::BeginUnverified.index()]
                    - p[TagLabel::InsideUnverified.index()]
            }
            LocalSource::Viterbi => {
                let t = output.tag_sequence[j];
                if t.is_verified() {
                    1.0
                } else if t.is_unverified() {
                    -1.0
                } else {
                    0.0
                }
            }
        };
        count += 1;
    }
    Ok(if count == 0 { 0.0 } else { total / count as f64 })
}

/// Index of the highest score; ties go to the lower `beam_rank`.
pub fn select(candidates: &[BeamCandidate], scores: &[f64]) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::data("empty beam"));
    }
    if candidates.len() != scores.len() {
        return Err(Error::shape("one score per candidate required"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::numeric("NaN verification score"));
    }
    let mut best = 0;
    for i in 1..candidates.len() {
        let better = scores[i] > scores[best]
            || (scores[i] == scores[best] && candidates[i].beam_rank < candidates[best].beam_rank);
        if better {
            best = i;
        }
    }
    Ok(best)
}

fn length_scores(beam: &Beam) -> Vec<f64> {
    beam.candidates.iter().map(|c| -(TokenizedText::new(c.text.as_str()).len() as f64)).collect()
}

fn overlap_scores(beam: &Beam, article: &TokenizedText) -> Vec<f64> {
    let article_keys: HashSet<_> =
        tag_quantities(&article.tokens).into_iter().map(|s| (s.qtype, s.normalized)).collect();
    beam.candidates
        .iter()
        .map(|c| {
            let text = TokenizedText::new(c.text.as_str());
            tag_quantities(&text.tokens)
                .into_iter()
                .filter(|s| article_keys.contains(&(s.qtype, s.normalized.clone())))
                .count() as f64
        })
        .collect()
}

/// Candidate with the fewest tokens.
pub fn baseline_shortest(beam: &Beam) -> Result<usize> {
    select(&beam.candidates, &length_scores(beam))
}

/// Candidate with the most quantity spans whose (type, normalized value) occurs in the article.
pub fn baseline_max_overlap(beam: &Beam, article: &TokenizedText) -> Result<usize> {
    select(&beam.candidates, &overlap_scores(beam, article))
}

/// Score every candidate and pick the best. The model scorers need `model`.
pub fn rerank(beam: &Beam, scorer: Scorer, model: Option<&Herman>) -> Result<RankedBeam> {
    rerank_with(beam, scorer, model, LocalSource::default())
}

pub fn rerank_with(beam: &Beam, scorer: Scorer, model: Option<&Herman>, local: LocalSource) -> Result<RankedBeam> {
    beam.validate()?;
    let article = TokenizedText::new(beam.article.as_str());
    let scores = match scorer {
        Scorer::Shortest => length_scores(beam),
        Scorer::MaxOverlap => overlap_scores(beam, &article),
        Scorer::Global | Scorer::Local => {
            let model = model.ok_or_else(|| Error::config(format!("scorer {scorer} needs a checkpoint")))?;
            beam.candidates
                .iter()
                .map(|c| {
                    let out = model.verify(&article, &TokenizedText::new(c.text.as_str()))?;
                    match scorer {
                        Scorer::Global => Ok(score_global(&out)),
                        _ => score_local_with(&out, &out.mask, local),
                    }
                })
                .collect::<Result<Vec<f64>>>()?
        }
    };
    let selected = select(&beam.candidates, &scores)?;
    let candidates = beam
        .candidates
        .iter()
        .zip(scores)
        .map(|(c, s)| ScoredCandidate { candidate: c.clone(), verification_score: s })
        .collect();
    Ok(RankedBeam { id: beam.id.clone(), candidates, selected })
}
