use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};

use herman_core::eval::{avg_q, pct_diff, round2, tag_report, type_counts, RougeScore, RougeSet};
use herman_core::model::{load_checkpoint, save_checkpoint, train_restarts, Herman, HermanConfig, HermanOutput};
use herman_core::quant::{self, QuantitySpan};
use herman_core::rerank::{rerank_with, Beam, LocalSource, RankedBeam, Scorer};
use herman_core::synth::{build_dataset, InstanceLine, LabeledInstance, TagLabel, Verdict};
use herman_core::text::{read_corpus, read_jsonl, CorpusLine, TokenizedText};
use herman_core::Error;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::Settings;
use crate::error::CliError;
use crate::output::{check_input, check_output, dump_config, open_input, write_json, write_jsonl, Provenance};

fn path(s: &Settings, key: &str) -> Result<PathBuf, CliError> {
    s.require(key).map(PathBuf::from)
}

fn read_lines<T: for<'de> Deserialize<'de>>(p: &Path) -> Result<Vec<T>, CliError> {
    Ok(read_jsonl(open_input(p)?)?)
}

#[derive(Debug, Serialize)]
struct TaggedLine {
    id: String,
    article_spans: Vec<QuantitySpan>,
    summary_spans: Vec<QuantitySpan>,
}

pub fn tag_quantities(s: Settings) -> Result<(), CliError> {
    s.restrict(&["corpus", "out"])?;
    let (corpus, out) = (path(&s, "corpus")?, path(&s, "out")?);
    check_input(&corpus)?;
    check_output(&out)?;
    let seed = s.parsed("seed")?.unwrap_or(0);
    let lines: Vec<CorpusLine> = read_lines(&corpus)?;
    let tagged: Vec<TaggedLine> = lines
        .into_iter()
        .map(|l| TaggedLine {
            article_spans: quant::tag_quantities(&TokenizedText::new(l.article).tokens),
            summary_spans: quant::tag_quantities(&TokenizedText::new(l.summary).tokens),
            id: l.id,
        })
        .collect();
    write_jsonl(&out, &Provenance::new(&s, seed), &tagged)?;
    dump_config(&out, &s)
}

pub fn gen_data(s: Settings) -> Result<(), CliError> {
    s.restrict(&["corpus", "out"])?;
    let config = s.model_config()?;
    let (corpus, out) = (path(&s, "corpus")?, path(&s, "out")?);
    check_input(&corpus)?;
    check_output(&out)?;
    let records = read_corpus(open_input(&corpus)?, config.max_article, config.max_summary)?;
    let data = build_dataset(&records, config.seed);
    if data.is_empty() && !records.is_empty() {
        eprintln!("warning: no record had a replaceable quantity; the dataset is empty");
    }
    let lines: Vec<InstanceLine> = data.iter().map(Into::into).collect();
    write_jsonl(&out, &Provenance::new(&s, config.seed), &lines)?;
    dump_config(&out, &s)
}

fn read_dataset(p: &Path) -> Result<Vec<LabeledInstance>, CliError> {
    let lines: Vec<InstanceLine> = read_lines(p)?;
    lines.into_iter().map(|l| l.into_instance().map_err(CliError::from)).collect()
}

/// Splits by record id, so both variants of a record land on the same side.
/// Ids are ordered by a seeded hash and the first `fraction` of them are held out.
fn holdout(data: Vec<LabeledInstance>, fraction: f64, seed: u64) -> Result<(Vec<LabeledInstance>, Vec<LabeledInstance>), CliError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CliError::Config(format!("val_fraction must lie strictly between 0 and 1, got {fraction}")));
    }
    let mut ids: Vec<&str> = data.iter().map(|i| i.record.id.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < 2 {
        return Err(CliError::data("need at least two records to hold out a validation split"));
    }
    let key = |id: &str| Sha256::new().chain_update(seed.to_le_bytes()).chain_update(id.as_bytes()).finalize();
    ids.sort_by_cached_key(|id| key(id));
    let n_val = ((ids.len() as f64 * fraction).round() as usize).clamp(1, ids.len() - 1);
    let held: std::collections::HashSet<String> = ids[..n_val].iter().map(|s| s.to_string()).collect();
    Ok(data.into_iter().partition(|i| !held.contains(&i.record.id)))
}

pub fn train(s: Settings) -> Result<(), CliError> {
    s.restrict(&["dataset", "val", "val_fraction", "out", "log", "embedding_file"])?;
    let config: HermanConfig = s.model_config()?;
    let val_fraction: f64 = s.parsed("val_fraction")?.unwrap_or(0.1);
    let dataset = path(&s, "dataset")?;
    let out = path(&s, "out")?;
    let log_path = s.get("log").map(PathBuf::from).unwrap_or_else(|| {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".log.jsonl");
        out.with_file_name(name)
    });
    let val_path = s.get("val").map(PathBuf::from);
    let embeddings = s.get("embedding_file").map(PathBuf::from);
    for p in [Some(&dataset), val_path.as_ref(), embeddings.as_ref()].into_iter().flatten() {
        check_input(p)?;
    }
    check_output(&out)?;
    check_output(&log_path)?;

    let data = read_dataset(&dataset)?;
    let (train_set, val_set) = match &val_path {
        Some(p) => (data, read_dataset(p)?),
        None => holdout(data, val_fraction, config.seed)?,
    };
    if train_set.is_empty() || val_set.is_empty() {
        return Err(CliError::data("training and validation splits must be non-empty"));
    }

    let vocab = Herman::vocabulary_for(&train_set, config.vocab);
    let init = |c: HermanConfig| -> Result<Herman, Error> {
        let mut model = Herman::new(c, vocab.clone())?;
        if let Some(p) = &embeddings {
            let reader = std::io::BufReader::new(std::fs::File::open(p)?);
            let n = model.load_embeddings(reader)?;
            eprintln!("loaded {n} pretrained vectors");
        }
        Ok(model)
    };
    let encoder = Herman::new(config.clone(), vocab.clone())?;
    let encode = |set: &[LabeledInstance]| set.iter().map(|i| encoder.encode(i)).collect::<Vec<_>>();
    let (train_enc, val_enc) = (encode(&train_set), encode(&val_set));

    let effective = s.clone().with_model(&config);
    let meta = Provenance::new(&effective, config.seed);
    let mut log = std::io::BufWriter::new(
        std::fs::File::create(&log_path).map_err(|e| CliError::data(format!("cannot create {}: {e}", log_path.display())))?,
    );
    serde_json::to_writer(&mut log, &meta.header()).map_err(Error::from)?;
    writeln!(log).map_err(Error::from)?;
    let (model, outcome) = train_restarts(&config, init, &train_enc, &val_enc, |r| {
        eprintln!("run {} epoch {} train {:.4} val {:.4}", r.run, r.epoch, r.train_loss, r.val_loss);
        serde_json::to_writer(&mut log, r)?;
        writeln!(log)?;
        log.flush()?;
        Ok(())
    })?;
    eprintln!("best run {} epoch {} val {:.4}", outcome.best_run, outcome.best_epoch, outcome.best_val_loss);
    save_checkpoint(&model, &out)?;
    dump_config(&out, &effective)
}

fn load_model(s: &Settings) -> Result<Herman, CliError> {
    let p = path(s, "checkpoint")?;
    check_input(&p)?;
    Ok(load_checkpoint(&p)?)
}

/// Any JSONL line with an id, article and summary; dataset lines also carry a variant.
#[derive(Debug, Deserialize)]
struct VerifyInput {
    id: String,
    article: String,
    summary: String,
    #[serde(default)]
    variant: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct VerifyLine {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    variant: Option<String>,
    verdict: Verdict,
    #[serde(flatten)]
    output: HermanOutput,
}

fn verdict_of(z_prob: f64) -> Verdict {
    if z_prob > 0.5 {
        Verdict::Verified
    } else {
        Verdict::Unverified
    }
}

pub fn verify(s: Settings) -> Result<(), CliError> {
    s.restrict(&["input", "checkpoint", "out"])?;
    let (input, out) = (path(&s, "input")?, path(&s, "out")?);
    check_input(&input)?;
    check_output(&out)?;
    let model = load_model(&s)?;
    let rows: Vec<VerifyInput> = read_lines(&input)?;
    let mut lines = Vec::with_capacity(rows.len());
    for r in rows {
        let output = model.verify(&TokenizedText::new(r.article), &TokenizedText::new(r.summary))?;
        if output.summary_truncated {
            eprintln!("warning: summary of {} truncated to {} tokens", r.id, model.config.max_summary);
        }
        lines.push(VerifyLine { id: r.id, variant: r.variant, verdict: verdict_of(output.z_prob), output });
    }
    write_jsonl(&out, &Provenance::new(&s, model.config.seed), &lines)?;
    dump_config(&out, &s)
}

pub fn rerank(s: Settings) -> Result<(), CliError> {
    s.restrict(&["beams", "checkpoint", "scorer", "local_source", "out"])?;
    let scorer: Scorer = s.require("scorer")?.parse()?;
    let local = match s.get("local_source") {
        None | Some("marginals") => LocalSource::Marginals,
        Some("viterbi") => LocalSource::Viterbi,
        Some(other) => return Err(CliError::Config(format!("unknown local_source {other:?}; expected marginals or viterbi"))),
    };
    let (beams_path, out) = (path(&s, "beams")?, path(&s, "out")?);
    check_input(&beams_path)?;
    check_output(&out)?;
    let model = match (scorer.needs_model(), s.get("checkpoint")) {
        (true, None) => return Err(CliError::Config(format!("scorer {scorer} needs --checkpoint"))),
        (true, Some(_)) => Some(load_model(&s)?),
        (false, _) => None,
    };
    let beams: Vec<Beam> = read_lines(&beams_path)?;
    let ranked = beams.iter().map(|b| rerank_with(b, scorer, model.as_ref(), local)).collect::<Result<Vec<RankedBeam>, _>>()?;
    let seed = model.as_ref().map_or(0, |m| m.config.seed);
    write_jsonl(&out, &Provenance::new(&s, seed), &ranked)?;
    dump_config(&out, &s)
}

fn percent(r: RougeScore) -> Value {
    json!({ "recall": round2(100.0 * r.recall), "precision": round2(100.0 * r.precision), "f1": round2(100.0 * r.f1) })
}

fn rouge_json(set: &RougeSet) -> Value {
    json!({ "rouge1": percent(set.rouge1), "rouge2": percent(set.rouge2), "rougeL": percent(set.rouge_l) })
}

fn evaluate_beams(pred: Vec<RankedBeam>, reference: &Path) -> Result<Value, CliError> {
    let refs: Vec<CorpusLine> = read_lines(reference)?;
    let refs: HashMap<&str, TokenizedText> = refs.iter().map(|r| (r.id.as_str(), TokenizedText::new(r.summary.clone()))).collect();
    let (mut original, mut selected) = (Vec::new(), Vec::new());
    let (mut orig_scores, mut sel_scores) = (Vec::new(), Vec::new());
    let mut changed = 0;
    for beam in &pred {
        let gold = refs.get(beam.id.as_str()).ok_or_else(|| CliError::data(format!("no reference summary for beam {}", beam.id)))?;
        let top = beam
            .candidates
            .iter()
            .min_by_key(|c| c.candidate.beam_rank)
            .ok_or_else(|| CliError::data(format!("beam {} has no candidates", beam.id)))?;
        let pick = beam.candidates.get(beam.selected).ok_or_else(|| CliError::data(format!("beam {} selects a missing candidate", beam.id)))?;
        changed += usize::from(pick.candidate.beam_rank != top.candidate.beam_rank);
        let (o, p) = (TokenizedText::new(top.candidate.text.clone()), TokenizedText::new(pick.candidate.text.clone()));
        orig_scores.push(RougeSet::score(&o.words(), &gold.words()));
        sel_scores.push(RougeSet::score(&p.words(), &gold.words()));
        original.push(o);
        selected.push(p);
    }
    let (oc, sc) = (type_counts(&original), type_counts(&selected));
    let types: BTreeMap<String, Value> = oc
        .0
        .iter()
        .map(|(t, &o)| {
            let u = sc.get(*t);
            (t.to_string(), json!({ "original": o, "reranked": u, "pct_diff": pct_diff(o, u) }))
        })
        .collect();
    Ok(json!({
        "kind": "rerank",
        "beams": pred.len(),
        "changed": changed,
        "rouge": { "original": rouge_json(&RougeSet::mean(&orig_scores)), "reranked": rouge_json(&RougeSet::mean(&sel_scores)) },
        "avg_q": { "original": round2(avg_q(&original)), "reranked": round2(avg_q(&selected)) },
        "type_counts": types,
    }))
}

fn evaluate_verify(pred: Vec<VerifyLine>, reference: &Path) -> Result<Value, CliError> {
    let gold: Vec<InstanceLine> = read_lines(reference)?;
    let gold: HashMap<(&str, &str), &InstanceLine> = gold.iter().map(|g| ((g.id.as_str(), g.variant.as_str()), g)).collect();
    let (mut py, mut gy, mut pz, mut gz) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for p in &pred {
        let variant = p.variant.as_deref().ok_or_else(|| CliError::data(format!("prediction {} has no variant", p.id)))?;
        let g = gold
            .get(&(p.id.as_str(), variant))
            .ok_or_else(|| CliError::data(format!("no gold instance for {} ({variant})", p.id)))?;
        let n = p.output.tag_sequence.len();
        if n > g.y.len() {
            return Err(CliError::data(format!("{}: {} predicted tags for {} gold tags", p.id, n, g.y.len())));
        }
        py.push(p.output.tag_sequence.clone());
        gy.push(g.y[..n].to_vec());
        pz.push(p.verdict);
        gz.push(g.z);
    }
    let report = tag_report(&py, &gy, &pz, &gz)?;
    let rows: BTreeMap<&str, Value> = TagLabel::ALL.iter().map(|l| (l.as_str(), json!(report.label(*l)))).collect();
    Ok(json!({
        "kind": "verify",
        "instances": report.sequences,
        "tokens": report.tokens,
        "labels": rows,
        "z": { "accuracy": report.z_accuracy, "f1": report.z_f1 },
    }))
}

pub fn evaluate(s: Settings) -> Result<(), CliError> {
    s.restrict(&["pred", "ref", "report"])?;
    let (pred, reference, report) = (path(&s, "pred")?, path(&s, "ref")?, path(&s, "report")?);
    check_input(&pred)?;
    check_input(&reference)?;
    check_output(&report)?;
    let rows: Vec<Value> = read_lines(&pred)?;
    let body = match rows.first() {
        None => return Err(CliError::data(format!("{} has no predictions", pred.display()))),
        Some(v) if v.get("candidates").is_some() => {
            let beams = rows.into_iter().map(serde_json::from_value).collect::<Result<Vec<RankedBeam>, _>>().map_err(Error::from)?;
            evaluate_beams(beams, &reference)?
        }
        Some(v) if v.get("tag_sequence").is_some() => {
            let lines = rows.into_iter().map(serde_json::from_value).collect::<Result<Vec<VerifyLine>, _>>().map_err(Error::from)?;
            evaluate_verify(lines, &reference)?
        }
        Some(_) => return Err(CliError::data("predictions are neither re-ranked beams nor verify output")),
    };
    write_json(&report, &Provenance::new(&s, 0), body)?;
    dump_config(&report, &s)
}
