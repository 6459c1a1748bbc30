//! Synthetic corpus with planted quantities, for tests and demos.
//!
//! Every article is a shuffled list of short fact sentences, each carrying one
//! quantity in a fixed context ("7 cars were damaged"), plus filler. Several
//! facts share a quantity type, so perturbation always has a same-type value
//! to swap in, and telling a swap apart needs the context.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{HermanConfig, Pooling};
use crate::quant::QuantityType;
use crate::rerank::{Beam, BeamCandidate};
use crate::text::CorpusRecord;

struct Template {
    qtype: QuantityType,
    /// `{}` marks the quantity.
    text: &'static str,
}

const TEMPLATES: &[Template] = &[
    Template { qtype: QuantityType::Cardinal, text: "{} people were injured" },
    Template { qtype: QuantityType::Cardinal, text: "{} cars were damaged" },
    Template { qtype: QuantityType::Cardinal, text: "{} homes lost power" },
    Template { qtype: QuantityType::Cardinal, text: "{} flights were cancelled" },
    Template { qtype: QuantityType::Cardinal, text: "{} schools were closed" },
    Template { qtype: QuantityType::Money, text: "{} pounds raised for charity" },
    Template { qtype: QuantityType::Money, text: "{} pounds spent on repairs" },
    Template { qtype: QuantityType::Money, text: "{} pounds paid in fines" },
    Template { qtype: QuantityType::Money, text: "{} pounds lost in the scam" },
    Template { qtype: QuantityType::Money, text: "{} pounds owed in rent" },
    Template { qtype: QuantityType::Percent, text: "{} per cent turnout was recorded" },
    Template { qtype: QuantityType::Percent, text: "{} per cent drop in prices followed" },
    Template { qtype: QuantityType::Percent, text: "{} per cent rise in rents was reported" },
    Template { qtype: QuantityType::Percent, text: "{} per cent of staff went on strike" },
    Template { qtype: QuantityType::Percent, text: "{} per cent growth was forecast" },
    Template { qtype: QuantityType::Date, text: "{} june storm caused flooding" },
    Template { qtype: QuantityType::Date, text: "{} june inquiry was delayed" },
    Template { qtype: QuantityType::Date, text: "{} june vote was postponed" },
    Template { qtype: QuantityType::Date, text: "{} june concert was sold out" },
    Template { qtype: QuantityType::Date, text: "{} june hearing was adjourned" },
    Template { qtype: QuantityType::Time, text: "{} pm kickoff was delayed" },
    Template { qtype: QuantityType::Time, text: "{} pm train was cancelled" },
    Template { qtype: QuantityType::Time, text: "{} pm meeting was moved" },
    Template { qtype: QuantityType::Time, text: "{} pm deadline was missed" },
    Template { qtype: QuantityType::Time, text: "{} pm curfew was lifted" },
    Template { qtype: QuantityType::Quantity, text: "{} metres of flooding were recorded" },
    Template { qtype: QuantityType::Quantity, text: "{} miles of road were closed" },
    Template { qtype: QuantityType::Quantity, text: "{} metres of wall collapsed" },
    Template { qtype: QuantityType::Quantity, text: "{} miles of track were repaired" },
    Template { qtype: QuantityType::Quantity, text: "{} metres of cable were stolen" },
    Template { qtype: QuantityType::Ordinal, text: "{} place went to the hosts" },
    Template { qtype: QuantityType::Ordinal, text: "{} round of talks began" },
    Template { qtype: QuantityType::Ordinal, text: "{} victim was named" },
    Template { qtype: QuantityType::Ordinal, text: "{} attempt at a deal failed" },
    Template { qtype: QuantityType::Ordinal, text: "{} edition of the festival opened" },
];

const FILLERS: &[&str] = &[
    "officials said the situation was under control",
    "residents were asked to stay indoors",
    "the council will publish a report",
    "local groups welcomed the news",
    "the police thanked the public for their help",
    "a spokesman declined to comment further",
];

/// Numerals shared by every type, so value comparisons transfer across types.
const NUMERALS: std::ops::RangeInclusive<u32> = 2..=9;

fn value(qtype: QuantityType, rng: &mut impl Rng) -> String {
    numeral(qtype, rng.random_range(NUMERALS))
}

fn numeral(qtype: QuantityType, n: u32) -> String {
    match qtype {
        QuantityType::Ordinal => format!("{n}{}", if n == 2 { "nd" } else if n == 3 { "rd" } else { "th" }),
        _ => n.to_string(),
    }
}

#[derive(Debug, Clone)]
struct Fact {
    qtype: QuantityType,
    headline: bool,
    template: &'static str,
    value: String,
}

impl Fact {
    fn render(&self) -> String {
        self.template.replace("{}", &self.value)
    }

    fn with_value(&self, value: &str) -> Fact {
        Fact { value: value.to_string(), ..self.clone() }
    }
}

fn sentence(facts: &[Fact]) -> String {
    let parts: Vec<String> = facts.iter().map(Fact::render).collect();
    format!("{} .", parts.join(" and "))
}

/// One planted article, the facts it contains, and which of them the summary restates.
struct Scene {
    article: String,
    facts: Vec<Fact>,
    summary: Vec<usize>,
}

/// Shape of generated articles and summaries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    /// Distinct quantity types per article.
    pub types: usize,
    /// Facts per type, inclusive range.
    pub per_type: (usize, usize),
    /// Filler sentences, inclusive range.
    pub fillers: (usize, usize),
    /// Facts restated by the summary, inclusive range.
    pub summary_facts: (usize, usize),
    /// Summaries restate only the first template of each type.
    pub headline: bool,
}

impl Default for Layout {
    fn default() -> Self {
        Self { types: 1, per_type: (2, 3), fillers: (0, 0), summary_facts: (1, 1), headline: true }
    }
}

fn scene(rng: &mut impl Rng, layout: &Layout) -> Scene {
    let mut types: Vec<QuantityType> = QuantityType::ALL.to_vec();
    types.shuffle(rng);
    let mut facts = Vec::new();
    for &qtype in &types[..layout.types.min(types.len())] {
        let mut templates: Vec<&Template> = TEMPLATES.iter().filter(|t| t.qtype == qtype).collect();
        if layout.headline {
            templates[1..].shuffle(rng);
        } else {
            templates.shuffle(rng);
        }
        let n = rng.random_range(layout.per_type.0..=layout.per_type.1).min(templates.len());
        let mut used: Vec<String> = Vec::new();
        for (k, t) in templates[..n].iter().enumerate() {
            let v = loop {
                let v = value(qtype, rng);
                if !used.contains(&v) {
                    break v;
                }
            };
            used.push(v.clone());
            facts.push(Fact { qtype, template: t.text, value: v, headline: layout.headline && k == 0 });
        }
    }
    facts.shuffle(rng);
    // Headline facts lead the article, like a news lede.
    facts.sort_by_key(|f| !f.headline);
    let lead = facts.iter().filter(|f| f.headline).count();

    let mut sentences: Vec<String> = facts.iter().map(|f| sentence(std::slice::from_ref(f))).collect();
    let fillers = rng.random_range(layout.fillers.0..=layout.fillers.1);
    for f in FILLERS.choose_multiple(rng, fillers) {
        sentences.push(format!("{f} ."));
    }
    sentences[lead..].shuffle(rng);

    let mut summary: Vec<usize> = (0..facts.len()).filter(|&i| !layout.headline || facts[i].headline).collect();
    summary.shuffle(rng);
    summary.truncate(rng.random_range(layout.summary_facts.0..=layout.summary_facts.1));
    Scene { article: sentences.join(" "), facts, summary }
}

/// Size and seed of the bundled corpus.
pub const CORPUS_SIZE: usize = 500;
pub const CORPUS_SEED: u64 = 7;
/// Count, size and seed of the bundled beams.
pub const BEAM_COUNT: usize = 200;
pub const BEAM_SIZE: usize = 5;
pub const BEAM_SEED: u64 = 99;

/// Small model that learns the bundled corpus within ten epochs.
///
/// Whether a single run picks up value matching through attention inside
/// that budget depends on the seed, so several restarts are trained and the
/// lowest validation loss is kept.
pub fn model_config() -> HermanConfig {
    HermanConfig {
        hidden: 32,
        embed: 16,
        vocab: 5000,
        lr: 0.003,
        batch_size: 1,
        max_epochs: 10,
        patience: 3,
        restarts: 6,
        attention_dim: 128,
        emission_hidden: 32,
        z_hidden: 32,
        z_pooling: Pooling::HiddenMean,
        seed: 1,
        ..HermanConfig::default()
    }
}

/// `n` planted records with ids `toy-0000`, `toy-0001`, ...
pub fn corpus(n: usize, seed: u64) -> Vec<CorpusRecord> {
    corpus_with(n, seed, &Layout::default())
}

pub fn corpus_with(n: usize, seed: u64, layout: &Layout) -> Vec<CorpusRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let s = scene(&mut rng, layout);
            let summary: Vec<Fact> = s.summary.iter().map(|&j| s.facts[j].clone()).collect();
            CorpusRecord::new(format!("toy-{i:04}"), &s.article, &sentence(&summary))
        })
        .collect()
}

/// A beam together with its faithful summary.
#[derive(Debug, Clone)]
pub struct PlantedBeam {
    pub beam: Beam,
    pub reference: String,
    /// Index into `beam.candidates` of the faithful candidate.
    pub faithful: usize,
}

/// `n` beams of `k` candidates, each restating the headline fact of an
/// article with `k` facts of one type. Exactly one candidate keeps the
/// article's value; the others swap in the values of the other facts.
pub fn beams(n: usize, k: usize, seed: u64) -> Vec<PlantedBeam> {
    let per_type = TEMPLATES.iter().filter(|t| t.qtype == QuantityType::Cardinal).count();
    assert!((1..=per_type).contains(&k), "beam size must be in 1..={per_type}");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = Layout { per_type: (k, k), ..Layout::default() };
    (0..n)
        .map(|i| {
            let s = scene(&mut rng, &layout);
            let fact = &s.facts[s.summary[0]];
            let mut wrong: Vec<&str> = s.facts.iter().filter(|o| o.qtype == fact.qtype && o.value != fact.value).map(|o| o.value.as_str()).collect();
            wrong.shuffle(&mut rng);
            let mut texts: Vec<String> = wrong.iter().map(|v| sentence(&[fact.with_value(v)])).collect();
            let reference = sentence(std::slice::from_ref(fact));
            let faithful = rng.random_range(0..k);
            texts.insert(faithful, reference.clone());
            let candidates = texts
                .into_iter()
                .enumerate()
                .map(|(rank, text)| BeamCandidate { text, beam_rank: rank, model_score: None })
                .collect();
            PlantedBeam { beam: Beam { id: format!("beam-{i:04}"), article: s.article, candidates }, reference, faithful }
        })
        .collect()
}

/// Deterministic 80/10/10 split of records by id hash order.
pub fn split<T: Clone>(items: &[T], id: impl Fn(&T) -> &str, seed: u64) -> (Vec<T>, Vec<T>, Vec<T>) {
    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n = items.len();
    let (a, b) = (n * 8 / 10, n * 9 / 10);
    let pick = |range: &[usize]| {
        let mut v: Vec<usize> = range.to_vec();
        v.sort_by(|&x, &y| id(&items[x]).cmp(id(&items[y])));
        v.into_iter().map(|i| items[i].clone()).collect::<Vec<T>>()
    };
    (pick(&order[..a]), pick(&order[a..b]), pick(&order[b..]))
}
