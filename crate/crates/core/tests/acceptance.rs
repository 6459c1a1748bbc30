//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.
//!
//! ```text
//! cargo test -p herman-core --test acceptance
//! ```

use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use herman_core::crf::{self, CrfParams, EmissionMatrix, Lattice, TagLoss};
use herman_core::eval::{rouge_l, rouge_n, tag_report, RougeScore};
use herman_core::model::{
    read_checkpoint, train_restarts, write_checkpoint, EpochRecord, Herman, HermanConfig, Pooling, TrainOutcome,
    Vocabulary,
};
use herman_core::nn::gradcheck::{check_gradients, GradCheck};
use herman_core::nn::{AdditiveAttention, BiLstm, Embedding, Graph, Init, LstmCell, Mlp, ParamId, ParamStore, Var};
use herman_core::quant::tag_quantities;
use herman_core::rerank::{rerank, Beam, Scorer};
use herman_core::synth::{build_dataset, InstanceLine, LabeledInstance, TagLabel, Verdict, NUM_LABELS};
use herman_core::text::{read_corpus, read_jsonl, write_jsonl, MAX_ARTICLE_TOKENS, MAX_SUMMARY_TOKENS};
use herman_core::{toy, CorpusRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const L: usize = NUM_LABELS;
const SYNTH_SEED: u64 = 1;

struct Check {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Check {
    Check { pass, detail: detail.into() }
}

struct Report {
    failures: usize,
}

impl Report {
    fn record(&mut self, name: &str, budget: Duration, elapsed: Duration, v: Check) {
        let in_time = elapsed <= budget;
        let pass = v.pass && in_time;
        if !pass {
            self.failures += 1;
        }
        let late = if in_time { "" } else { " OVER BUDGET" };
        println!(
            "{} {name}: {} [{:.1}s of {}s{late}]",
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }

    fn run(&mut self, name: &str, budget: Duration, f: impl FnOnce() -> Check) {
        let t = Instant::now();
        let v = f();
        self.record(name, budget, t.elapsed(), v);
    }
}

fn data_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

// ---------------------------------------------------------------------------
// CRF against enumeration

fn all_sequences(n: usize) -> Vec<Vec<usize>> {
    (0..L.pow(n as u32))
        .map(|mut code| {
            (0..n)
                .map(|_| {
                    let l = code % L;
                    code /= L;
                    l
                })
                .collect()
        })
        .collect()
}

fn path_score(em: &EmissionMatrix, p: &CrfParams, ys: &[usize]) -> f64 {
    let mut s = p.start[ys[0]] + p.end[ys[ys.len() - 1]];
    for (j, &y) in ys.iter().enumerate() {
        s += em.rows[j][y];
        if j > 0 {
            s += p.transitions[ys[j - 1]][y];
        }
    }
    s
}

/// BIO order B-V, I-V, B-U, I-U, O; `m = 0` forces O and `m = 1` forbids it.
fn legal(ys: &[usize], mask: &[u8]) -> bool {
    ys.iter().enumerate().all(|(j, &y)| {
        let inside_ok = match y {
            1 => j > 0 && matches!(ys[j - 1], 0 | 1),
            3 => j > 0 && matches!(ys[j - 1], 2 | 3),
            _ => true,
        };
        inside_ok && ((y == 4) == (mask[j] == 0))
    })
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn enumerated_marginals(n: usize, paths: &[(&Vec<usize>, f64)]) -> Vec<[f64; L]> {
    let log_z = log_sum_exp(&paths.iter().map(|(_, s)| *s).collect::<Vec<_>>());
    let mut out = vec![[0.0; L]; n];
    for (ys, s) in paths {
        let p = (s - log_z).exp();
        for (j, &y) in ys.iter().enumerate() {
            out[j][y] += p;
        }
    }
    out
}

fn max_gap(a: &[[f64; L]], b: &[[f64; L]]) -> f64 {
    a.iter().zip(b).flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs())).fold(0.0, f64::max)
}

fn crf_oracle() -> Check {
    const INSTANCES: usize = 300;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut worst_z, mut worst_marg, mut worst_masked) = (0.0f64, 0.0f64, 0.0f64);
    let mut path_mismatches = 0;
    for i in 0..INSTANCES {
        let n = 1 + i % 5;
        let em = EmissionMatrix::new((0..n).map(|_| std::array::from_fn(|_| rng.random_range(-3.0..3.0))).collect());
        let params = CrfParams {
            transitions: std::array::from_fn(|_| std::array::from_fn(|_| rng.random_range(-2.0..2.0))),
            start: std::array::from_fn(|_| rng.random_range(-2.0..2.0)),
            end: std::array::from_fn(|_| rng.random_range(-2.0..2.0)),
        };
        let mask: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let seqs = all_sequences(n);
        let scored: Vec<(&Vec<usize>, f64)> = seqs.iter().map(|ys| (ys, path_score(&em, &params, ys))).collect();

        let all: Vec<f64> = scored.iter().map(|(_, s)| *s).collect();
        worst_z = worst_z.max((crf::log_partition(&em, &params) - log_sum_exp(&all)).abs());
        worst_marg = worst_marg.max(max_gap(&crf::marginals(&em, &params), &enumerated_marginals(n, &scored)));

        let allowed: Vec<(&Vec<usize>, f64)> = scored.iter().filter(|(ys, _)| legal(ys, &mask)).cloned().collect();
        let lattice = Lattice::bio_with_mask(&mask);
        let masked_z = log_sum_exp(&allowed.iter().map(|(_, s)| *s).collect::<Vec<_>>());
        worst_masked = worst_masked.max((crf::log_partition_in(&em, &params, &lattice) - masked_z).abs());
        worst_masked = worst_masked.max(max_gap(&crf::marginals_in(&em, &params, &lattice), &enumerated_marginals(n, &allowed)));

        let best = allowed.iter().max_by(|a, b| a.1.total_cmp(&b.1)).expect("every mask admits a legal path").0;
        let path: Vec<usize> = crf::viterbi(&em, &params, &mask).expect("viterbi runs").iter().map(|l| l.index()).collect();
        if &path != best {
            path_mismatches += 1;
        }
    }
    let tol = 1e-8;
    check(
        worst_z <= tol && worst_marg <= tol && worst_masked <= tol && path_mismatches == 0,
        format!(
            "{INSTANCES} instances, max |logZ gap| {worst_z:.1e}, max marginal gap {worst_marg:.1e}, masked gap {worst_masked:.1e}, viterbi mismatches {path_mismatches}"
        ),
    )
}

// ---------------------------------------------------------------------------
// Gradients

/// Step and floor for single layers.
const LAYER_STEP: f64 = 1e-5;
const LAYER_FLOOR: f64 = 1e-6;
/// The full loss sums over many more terms, so a coarser step keeps rounding
/// noise below truncation error.
const MODEL_STEP: f64 = 1e-4;
const MODEL_FLOOR: f64 = 1e-5;

fn readout(g: &mut Graph, x: Var, seed: u64) -> Var {
    let n = g.value(x).len();
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let w = g.input((0..n).map(|_| r.random_range(-1.0..1.0)).collect());
    let row = g.stack(&[w]);
    g.matvec(row, x)
}

fn inputs(store: &mut ParamStore, prefix: &str, count: usize, width: usize, rng: &mut ChaCha8Rng) -> Vec<ParamId> {
    (0..count).map(|i| store.add(&format!("{prefix}{i}"), vec![width], Init::Uniform(1.0), rng).unwrap()).collect()
}

fn layer_checks(rng: &mut ChaCha8Rng) -> Vec<(String, GradCheck)> {
    let mut out = Vec::new();
    let (hidden, embed, vocab, len) = (8, 6, 30, 7);

    let mut store = ParamStore::new();
    let cell = LstmCell::new(&mut store, "cell", embed, hidden, rng).unwrap();
    let xs = inputs(&mut store, "x", 2, embed, rng);
    let report = check_gradients(&mut store, LAYER_STEP, LAYER_FLOOR, |g| {
        let (h0, c0) = cell.zero_state(g);
        let x0 = g.param(xs[0]);
        let (h1, c1) = cell.step(g, x0, h0, c0)?;
        let x1 = g.param(xs[1]);
        let (h2, c2) = cell.step(g, x1, h1, c1)?;
        let both = g.concat(&[h2, c2]);
        Ok(readout(g, both, 1))
    });
    out.push(("lstm step".to_string(), report.unwrap()));

    let mut store = ParamStore::new();
    let bi = BiLstm::new(&mut store, "bi", embed, hidden, rng).unwrap();
    let xs = inputs(&mut store, "x", len, embed, rng);
    let report = check_gradients(&mut store, LAYER_STEP, LAYER_FLOOR, |g| {
        let vars: Vec<Var> = xs.iter().map(|&x| g.param(x)).collect();
        let states = bi.run(g, &vars)?;
        let all = g.concat(&states);
        Ok(readout(g, all, 2))
    });
    out.push(("bilstm".to_string(), report.unwrap()));

    let mut store = ParamStore::new();
    let att = AdditiveAttention::new(&mut store, "att", 2 * hidden, 2 * hidden, hidden, rng).unwrap();
    let q = inputs(&mut store, "q", 1, 2 * hidden, rng);
    let ks = inputs(&mut store, "k", len, 2 * hidden, rng);
    let report = check_gradients(&mut store, LAYER_STEP, LAYER_FLOOR, |g| {
        let q = g.param(q[0]);
        let keys: Vec<Var> = ks.iter().map(|&k| g.param(k)).collect();
        let (ctx, w) = att.forward(g, q, &keys)?;
        let both = g.concat(&[ctx, w]);
        Ok(readout(g, both, 3))
    });
    out.push(("attention".to_string(), report.unwrap()));

    let mut store = ParamStore::new();
    let mlp = Mlp::new(&mut store, "mlp", 4 * hidden, hidden, 1, rng).unwrap();
    let x = inputs(&mut store, "x", 1, 4 * hidden, rng);
    let report = check_gradients(&mut store, LAYER_STEP, LAYER_FLOOR, |g| {
        let x = g.param(x[0]);
        let y = mlp.forward(g, x)?;
        let p = g.sigmoid(y);
        Ok(g.bce(p, 1.0))
    });
    out.push(("mlp".to_string(), report.unwrap()));

    let mut store = ParamStore::new();
    let emb = Embedding::new(&mut store, "emb", vocab, embed, rng).unwrap();
    let ids = [3, 17, 3, 29, 0];
    let report = check_gradients(&mut store, LAYER_STEP, LAYER_FLOOR, |g| {
        let rows = ids.iter().map(|&i| emb.lookup(g, i)).collect::<herman_core::Result<Vec<_>>>()?;
        let all = g.concat(&rows);
        let t = g.tanh(all);
        Ok(readout(g, t, 4))
    });
    out.push(("embedding".to_string(), report.unwrap()));

    let mut store = ParamStore::new();
    let em = inputs(&mut store, "e", len, L, rng);
    let trans = store.add("trans", vec![L, L], Init::Uniform(1.0), rng).unwrap();
    let start = store.add("start", vec![L], Init::Uniform(1.0), rng).unwrap();
    let end = store.add("end", vec![L], Init::Uniform(1.0), rng).unwrap();
    use TagLabel::*;
    let gold = [Outside, BeginUnverified, InsideUnverified, Outside, BeginVerified, InsideVerified, Outside];
    for mode in [TagLoss::Sequence, TagLoss::TokenMarginal] {
        let report = check_gradients(&mut store, LAYER_STEP, LAYER_FLOOR, |g| {
            let rows: Vec<Var> = em.iter().map(|&e| g.param(e)).collect();
            let m = g.stack(&rows);
            let (t, s, e) = (g.param(trans), g.param(start), g.param(end));
            g.crf_loss(m, t, s, e, &gold, mode)
        });
        out.push((format!("crf nll ({mode:?})"), report.unwrap()));
    }
    out
}

fn random_labels(rng: &mut ChaCha8Rng, n: usize) -> Vec<TagLabel> {
    let mut ys: Vec<TagLabel> = Vec::with_capacity(n);
    while ys.len() < n {
        let options: Vec<TagLabel> = TagLabel::ALL.into_iter().filter(|&l| TagLabel::allows(ys.last().copied(), l)).collect();
        ys.push(options[rng.random_range(0..options.len())]);
    }
    ys
}

fn model_checks(rng: &mut ChaCha8Rng) -> Vec<(String, GradCheck)> {
    let words: Vec<String> = (0..28).map(|i| format!("w{i}")).collect();
    let vocab = Vocabulary::build(words.iter().map(String::as_str), 30);
    assert_eq!(vocab.len(), 30);
    let variants = [
        ("sequence loss, mean pooling", TagLoss::Sequence, Pooling::Mean, 0),
        ("token-marginal loss, hidden-mean pooling", TagLoss::TokenMarginal, Pooling::HiddenMean, 5),
    ];
    let mut out = Vec::new();
    for (name, loss_mode, z_pooling, emission_hidden) in variants {
        let config = HermanConfig {
            hidden: 8,
            embed: 6,
            vocab: 30,
            m_embed: 3,
            z_hidden: 5,
            loss_mode,
            z_pooling,
            emission_hidden,
            seed: 3,
            ..HermanConfig::default()
        };
        let mut model = Herman::new(config, vocab.clone()).unwrap();
        let net = model.net.clone();
        for k in 0..3 {
            let article: Vec<usize> = (0..rng.random_range(1..=7)).map(|_| rng.random_range(0..30)).collect();
            let summary: Vec<usize> = (0..rng.random_range(1..=7)).map(|_| rng.random_range(0..30)).collect();
            let y = random_labels(rng, summary.len());
            let m: Vec<u8> = y.iter().map(|&l| u8::from(l != TagLabel::Outside)).collect();
            let z = if k % 2 == 0 { 1.0 } else { 0.0 };
            let report = check_gradients(&mut model.store, MODEL_STEP, MODEL_FLOOR, |g| {
                let fwd = net.forward(g, &article, &summary, &m)?;
                net.loss(g, &fwd, &y, z)
            });
            out.push((format!("full loss, {name}, input {k}"), report.unwrap()));
        }
    }
    out
}

fn gradient_suite() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut checks = layer_checks(&mut rng);
    checks.extend(model_checks(&mut rng));
    let entries: usize = checks.iter().map(|(_, c)| c.entries).sum();
    let (worst_name, worst) = checks.iter().max_by(|a, b| a.1.max_rel_err.total_cmp(&b.1.max_rel_err)).unwrap();
    check(
        checks.iter().all(|(_, c)| c.max_rel_err <= 1e-4 && c.entries > 0),
        format!(
            "{} checks over {entries} weights, worst rel err {:.2e} ({worst_name}, {})",
            checks.len(),
            worst.max_rel_err,
            worst.worst_param
        ),
    )
}

// ---------------------------------------------------------------------------
// Data synthesis

fn fuzzed_corpus(n: usize, seed: u64) -> Vec<CorpusRecord> {
    const WORDS: &[&str] = &[
        "the", "council", "said", "police", "reported", "a", "new", "plan", "was", "announced", "in", "on", "and", "by",
        "rose", "fell", "after", "of", "were", "for",
    ];
    const QUANTITIES: &[&str] = &[
        "5", "12", "three", "seven", "2,000", "£40", "£25", "$3 million", "$10", "20%", "15 per cent", "monday",
        "friday", "2019", "2015", "june", "first", "third", "10th", "3 pm", "7.30am", "10 km", "40 miles", "5 kg",
        "two hours", "half",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phrase = |rng: &mut ChaCha8Rng, len: usize, quantities: &[&str]| {
        let mut parts: Vec<String> = Vec::new();
        for _ in 0..len {
            if !quantities.is_empty() && rng.random_bool(0.3) {
                parts.push(quantities[rng.random_range(0..quantities.len())].to_string());
            } else {
                parts.push(WORDS[rng.random_range(0..WORDS.len())].to_string());
            }
        }
        parts.push(".".to_string());
        parts.join(" ")
    };
    (0..n)
        .map(|i| {
            let pool: Vec<&str> = (0..rng.random_range(0..5)).map(|_| QUANTITIES[rng.random_range(0..QUANTITIES.len())]).collect();
            let len = rng.random_range(3..40);
            let article = phrase(&mut rng, len, &pool);
            // Summaries mostly restate article quantities, occasionally invent one.
            let mut summary_pool = pool.clone();
            if rng.random_bool(0.2) {
                summary_pool.push(QUANTITIES[rng.random_range(0..QUANTITIES.len())]);
            }
            let len = rng.random_range(1..12);
            let summary = phrase(&mut rng, len, &summary_pool);
            CorpusRecord::new(format!("fuzz-{i:04}"), &article, &summary)
        })
        .collect()
}

/// Entities in summary order; a swap of two values counts as a difference.
fn entity_keys(text: &herman_core::TokenizedText) -> Vec<(String, String)> {
    tag_quantities(&text.tokens).iter().map(|s| (s.qtype.name().to_string(), s.normalized.clone())).collect()
}

fn dataset_bytes(corpus: &[CorpusRecord], seed: u64) -> Vec<u8> {
    let lines: Vec<InstanceLine> = build_dataset(corpus, seed).iter().map(Into::into).collect();
    let mut buf = Vec::new();
    write_jsonl(&mut buf, &lines).unwrap();
    buf
}

/// Problems found in one corpus, empty when every property holds.
fn synthesis_problems(corpus: &[CorpusRecord]) -> (usize, Vec<String>) {
    let mut problems = Vec::new();
    let data = build_dataset(corpus, SYNTH_SEED);
    let verified = data.iter().filter(|i| i.z == Verdict::Verified).count();
    if verified * 2 != data.len() {
        problems.push(format!("{verified} VERIFIED of {}", data.len()));
    }
    let mut kept = BTreeSet::new();
    for pair in data.chunks(2) {
        let [v, u] = pair else {
            problems.push("odd instance count".into());
            continue;
        };
        if v.z != Verdict::Verified || u.z != Verdict::Unverified || v.record.id != u.record.id {
            problems.push(format!("{} / {}: not a VERIFIED/UNVERIFIED pair", v.record.id, u.record.id));
        }
        kept.insert(v.record.id.clone());
        for inst in [v, u] {
            if let Err(e) = inst.validate() {
                problems.push(e.to_string());
            }
        }
        if entity_keys(&v.record.summary) == entity_keys(&u.record.summary) {
            problems.push(format!("{}: UNVERIFIED summary has the same entities", u.record.id));
        }
        for r in &u.replacements {
            let inserted: Vec<&str> = u.record.summary.tokens[r.start..r.end].iter().map(|t| t.text.as_str()).collect();
            let source: Vec<&str> = u.record.article.tokens[r.source.start..r.source.end].iter().map(|t| t.text.as_str()).collect();
            if r.source.qtype != r.original.qtype || r.qtype != r.original.qtype {
                problems.push(format!("{}: replacement changed type", u.record.id));
            }
            if r.source.normalized == r.original.normalized || inserted != source {
                problems.push(format!("{}: replacement does not swap in a different article value", u.record.id));
            }
        }
        if u.replacements.is_empty() {
            problems.push(format!("{}: UNVERIFIED without replacements", u.record.id));
        }
    }
    for record in corpus {
        let article = tag_quantities(&record.article.tokens);
        let replaceable = tag_quantities(&record.summary.tokens)
            .iter()
            .any(|s| article.iter().any(|a| a.qtype == s.qtype && a.normalized != s.normalized));
        if replaceable != kept.contains(&record.id) {
            problems.push(format!("{}: replaceable={replaceable} but kept={}", record.id, !replaceable));
        }
    }
    if dataset_bytes(corpus, SYNTH_SEED) != dataset_bytes(corpus, SYNTH_SEED) {
        problems.push("re-run is not byte-identical".into());
    }
    (data.len(), problems)
}

fn synthesis_properties(toy_corpus: &[CorpusRecord]) -> Check {
    let fuzz = fuzzed_corpus(400, 5);
    let (toy_n, toy_problems) = synthesis_problems(toy_corpus);
    let (fuzz_n, fuzz_problems) = synthesis_problems(&fuzz);
    let discarded = fuzz.len() - fuzz_n / 2;
    let problems: Vec<&String> = toy_problems.iter().chain(&fuzz_problems).collect();
    let first = problems.first().map(|p| format!(", first: {p}")).unwrap_or_default();
    check(
        problems.is_empty() && toy_n > 0 && fuzz_n > 0 && discarded > 0,
        format!(
            "toy {toy_n} instances, fuzz {fuzz_n} instances ({discarded} records discarded), {} violations{first}",
            problems.len()
        ),
    )
}

// ---------------------------------------------------------------------------
// ROUGE

fn words(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

fn rouge_cases() -> Check {
    #[derive(Clone, Copy)]
    enum Kind {
        N(usize),
        Lcs,
    }
    // (candidate, reference, kind, recall, precision, f1), counted by hand.
    let cases: [(&str, &str, Kind, f64, f64, f64); 10] = [
        ("the cat sat", "the cat sat", Kind::N(1), 1.0, 1.0, 1.0),
        ("the cat", "the cat sat on the mat", Kind::N(1), 2.0 / 6.0, 1.0, 0.5),
        ("the the the", "the cat", Kind::N(1), 0.5, 1.0 / 3.0, 0.4),
        ("", "a b", Kind::N(1), 0.0, 0.0, 0.0),
        ("the cat sat", "the cat ran", Kind::N(2), 0.5, 0.5, 0.5),
        ("a", "a b", Kind::N(2), 0.0, 0.0, 0.0),
        ("a b a b", "a b", Kind::N(2), 1.0, 1.0 / 3.0, 0.5),
        ("a b c d", "a c b d", Kind::Lcs, 0.75, 0.75, 0.75),
        ("x y", "a b c", Kind::Lcs, 0.0, 0.0, 0.0),
        ("a b", "b a b c", Kind::Lcs, 0.5, 1.0, 2.0 / 3.0),
    ];
    let mut worst = 0.0f64;
    for (cand, reference, kind, r, p, f) in cases {
        let (c, rf) = (words(cand), words(reference));
        let got = match kind {
            Kind::N(n) => rouge_n(&c, &rf, n),
            Kind::Lcs => rouge_l(&c, &rf),
        };
        for (a, b) in [(got.recall, r), (got.precision, p), (got.f1, f)] {
            worst = worst.max((a - b).abs());
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let vocab = ["a", "b", "c", "d", "e", "f"];
    let sentence = |rng: &mut ChaCha8Rng| -> Vec<&str> {
        (0..rng.random_range(0..12)).map(|_| vocab[rng.random_range(0..vocab.len())]).collect()
    };
    let mut duality_gap = 0.0f64;
    for _ in 0..1000 {
        let (a, b) = (sentence(&mut rng), sentence(&mut rng));
        let pairs: [(RougeScore, RougeScore); 3] =
            [(rouge_n(&a, &b, 1), rouge_n(&b, &a, 1)), (rouge_n(&a, &b, 2), rouge_n(&b, &a, 2)), (rouge_l(&a, &b), rouge_l(&b, &a))];
        for (ab, ba) in pairs {
            duality_gap = duality_gap.max((ab.precision - ba.recall).abs()).max((ab.f1 - ba.f1).abs());
        }
    }
    check(
        worst <= 1e-12 && duality_gap <= 1e-12,
        format!("10 hand cases, max gap {worst:.1e}; 1000 fuzzed pairs, max duality gap {duality_gap:.1e}"),
    )
}

// ---------------------------------------------------------------------------
// Toy training and what depends on it

struct Trained {
    model: Herman,
    test: Vec<LabeledInstance>,
    all: Vec<LabeledInstance>,
}

fn load_toy_corpus() -> Vec<CorpusRecord> {
    let file = File::open(data_file("toy_corpus.jsonl")).expect("bundled toy corpus");
    read_corpus(BufReader::new(file), MAX_ARTICLE_TOKENS, MAX_SUMMARY_TOKENS).expect("toy corpus parses")
}

fn fit(config: &HermanConfig, train: &[LabeledInstance], val: &[LabeledInstance]) -> (Herman, TrainOutcome) {
    let vocab = Herman::vocabulary_for(train, config.vocab);
    let encoder = Herman::new(config.clone(), vocab.clone()).unwrap();
    let encode = |set: &[LabeledInstance]| set.iter().map(|i| encoder.encode(i)).collect::<Vec<_>>();
    let (train_enc, val_enc) = (encode(train), encode(val));
    train_restarts(config, |c| Herman::new(c, vocab.clone()), &train_enc, &val_enc, |_| Ok(())).expect("training runs")
}

fn predict(model: &Herman, set: &[LabeledInstance]) -> (Vec<Vec<TagLabel>>, Vec<Verdict>, Vec<f64>) {
    let mut tags = Vec::new();
    let mut verdicts = Vec::new();
    let mut probs = Vec::new();
    for inst in set {
        let out = model.verify(&inst.record.article, &inst.record.summary).expect("verify runs");
        verdicts.push(if out.z_prob > 0.5 { Verdict::Verified } else { Verdict::Unverified });
        probs.push(out.z_prob);
        tags.push(out.tag_sequence);
    }
    (tags, verdicts, probs)
}

fn toy_training(records: &[CorpusRecord]) -> (Check, Trained) {
    let (train, val, test) = toy::split(records, |r| r.id.as_str(), 7);
    let (train, val, test) = (build_dataset(&train, SYNTH_SEED), build_dataset(&val, SYNTH_SEED), build_dataset(&test, SYNTH_SEED));
    let config = toy::model_config();
    let (model, outcome) = fit(&config, &train, &val);

    let (tags, verdicts, probs) = predict(&model, &test);
    let gold_tags: Vec<Vec<TagLabel>> = test.iter().map(|i| i.y.clone()).collect();
    let gold_z: Vec<Verdict> = test.iter().map(|i| i.z).collect();
    let report = tag_report(&tags, &gold_tags, &verdicts, &gold_z).unwrap();
    let z_acc = verdicts.iter().zip(&gold_z).filter(|(p, g)| p == g).count() as f64 / test.len() as f64;
    let bu = report.label(TagLabel::BeginUnverified);
    let bu_f1 = 2.0 * bu.correct as f64 / (bu.predicted + bu.support) as f64;

    let run: Vec<&EpochRecord> = outcome.log.iter().filter(|r| r.run == outcome.best_run).collect();
    let decreasing = run.len() >= 2 && run[1].val_loss < run[0].val_loss;
    let first_verified = test.iter().position(|i| i.z == Verdict::Verified).unwrap();
    let verified_ok = probs[first_verified] > 0.5;
    let epochs = outcome.log.iter().map(|r| r.epoch).max().unwrap_or(0);

    let detail = format!(
        "{}/{}/{} instances, best of {} runs is run {} epoch {} (val {:.4}); test z acc {z_acc:.3}, B-U F1 {bu_f1:.3}; \
         val loss falls over epochs 1-2: {decreasing}; first VERIFIED test input z_prob {:.3}",
        train.len(),
        val.len(),
        test.len(),
        config.restarts,
        outcome.best_run,
        outcome.best_epoch,
        outcome.best_val_loss,
        probs[first_verified],
    );
    let pass = z_acc >= 0.90 && bu_f1 >= 0.80 && epochs <= 10 && decreasing && verified_ok;
    let mut all = train;
    all.extend(val);
    all.extend(test.iter().cloned());
    (check(pass, detail), Trained { model, test, all })
}

fn bundled_beams() -> Vec<Beam> {
    read_jsonl(BufReader::new(File::open(data_file("toy_beams.jsonl")).expect("bundled beams"))).expect("beams parse")
}

fn reranking(model: &Herman) -> Check {
    let planted = toy::beams(toy::BEAM_COUNT, toy::BEAM_SIZE, toy::BEAM_SEED);
    let bundled = bundled_beams();
    let same = planted.len() == bundled.len() && planted.iter().zip(&bundled).all(|(p, b)| &p.beam == b);
    let hits = |scorer| planted.iter().filter(|b| rerank(&b.beam, scorer, Some(model)).unwrap().selected == b.faithful).count();
    let (global, local) = (hits(Scorer::Global), hits(Scorer::Local));
    let shortest = hits(Scorer::Shortest);
    let n = planted.len() as f64;
    let (g, l) = (global as f64 / n, local as f64 / n);
    check(
        same && g >= 0.85 && l >= 0.75,
        format!(
            "{} beams of {} (bundled file matches: {same}); Global {g:.3}, Local {l:.3}, shortest baseline {:.3}",
            planted.len(),
            toy::BEAM_SIZE,
            shortest as f64 / n
        ),
    )
}

fn o_row(trained: &Trained) -> Check {
    let mut rows = Vec::new();
    let untrained_config = HermanConfig { hidden: 4, embed: 4, z_hidden: 4, m_embed: 2, vocab: 200, seed: 9, ..HermanConfig::default() };
    let fuzz = build_dataset(&fuzzed_corpus(200, 13), SYNTH_SEED);
    let untrained = Herman::new(untrained_config.clone(), Herman::vocabulary_for(&fuzz, untrained_config.vocab)).unwrap();
    for (name, model, set) in [("toy dataset, trained", &trained.model, &trained.all), ("fuzzed dataset, untrained", &untrained, &fuzz)] {
        let (tags, verdicts, _) = predict(model, set);
        let gold: Vec<Vec<TagLabel>> = set.iter().map(|i| i.y.clone()).collect();
        let gold_z: Vec<Verdict> = set.iter().map(|i| i.z).collect();
        let o = *tag_report(&tags, &gold, &verdicts, &gold_z).unwrap().label(TagLabel::Outside);
        rows.push((name, set.len(), o));
    }
    let pass = rows.iter().all(|(_, _, o)| o.precision == 100.0 && o.recall == 100.0 && o.f1 == 100.0);
    let detail = rows
        .iter()
        .map(|(name, n, o)| format!("{name} ({n}): O {} {} {}", o.precision, o.recall, o.f1))
        .collect::<Vec<_>>()
        .join("; ");
    check(pass, detail)
}

fn log_fingerprint(outcome: &TrainOutcome) -> Vec<(usize, usize, u64, u64)> {
    outcome.log.iter().map(|r| (r.run, r.epoch, r.train_loss.to_bits(), r.val_loss.to_bits())).collect()
}

fn determinism(trained: &Trained) -> Check {
    let config = HermanConfig {
        hidden: 6,
        embed: 5,
        z_hidden: 6,
        m_embed: 2,
        vocab: 500,
        batch_size: 4,
        max_epochs: 2,
        restarts: 2,
        seed: 17,
        ..HermanConfig::default()
    };
    let (train, val) = (&trained.all[..60], &trained.test[..20]);
    let (a, log_a) = fit(&config, train, val);
    let (b, log_b) = fit(&config, train, val);
    let (mut bytes_a, mut bytes_b) = (Vec::new(), Vec::new());
    write_checkpoint(&a, &mut bytes_a).unwrap();
    write_checkpoint(&b, &mut bytes_b).unwrap();
    let logs_equal = log_fingerprint(&log_a) == log_fingerprint(&log_b) && log_a.log.len() == 4;
    let checkpoints_equal = bytes_a == bytes_b;

    let model = &trained.model;
    let mut saved = Vec::new();
    write_checkpoint(model, &mut saved).unwrap();
    let loaded = read_checkpoint(saved.as_slice()).unwrap();
    let mut resaved = Vec::new();
    write_checkpoint(&loaded, &mut resaved).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let vocab = model.vocab.len();
    let mut identical = 0;
    for _ in 0..50 {
        let article: Vec<usize> = (0..rng.random_range(1..60)).map(|_| rng.random_range(0..vocab)).collect();
        let summary: Vec<usize> = (0..rng.random_range(1..20)).map(|_| rng.random_range(0..vocab)).collect();
        let m: Vec<u8> = summary.iter().map(|_| rng.random_range(0..2)).collect();
        let (e1, z1) = model.forward_ids(&article, &summary, &m).unwrap();
        let (e2, z2) = loaded.forward_ids(&article, &summary, &m).unwrap();
        let bits = |e: &EmissionMatrix| e.rows.iter().flatten().map(|v| v.to_bits()).collect::<Vec<_>>();
        if bits(&e1) == bits(&e2) && z1.to_bits() == z2.to_bits() {
            identical += 1;
        }
    }
    check(
        logs_equal && checkpoints_equal && identical == 50 && saved == resaved,
        format!(
            "repeat training: logs equal {logs_equal}, checkpoints equal {checkpoints_equal}; \
             round trip: {identical}/50 forward outputs bit-identical, re-saved bytes equal {}",
            saved == resaved
        ),
    )
}

fn main() -> ExitCode {
    let mut report = Report { failures: 0 };
    let secs = Duration::from_secs;
    report.run("AC1 CRF matches enumeration", secs(30), crf_oracle);
    report.run("AC2 gradient suite", secs(120), gradient_suite);
    let toy_corpus = load_toy_corpus();
    report.run("AC3 data synthesis properties", secs(10), || synthesis_properties(&toy_corpus));

    let t = Instant::now();
    let (v, trained) = toy_training(&toy_corpus);
    report.record("AC4 toy training", secs(600), t.elapsed(), v);
    report.run("AC5 re-ranking on planted beams", secs(60), || reranking(&trained.model));
    report.run("AC6 O row is exact", secs(60), || o_row(&trained));
    report.run("AC7 ROUGE", secs(10), rouge_cases);
    report.run("AC8 determinism and checkpoint round trip", secs(120), || determinism(&trained));

    if report.failures == 0 {
        println!("all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("{} criteria fail", report.failures);
        ExitCode::FAILURE
    }
}
