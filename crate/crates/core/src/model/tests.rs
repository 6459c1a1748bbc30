use super::*;
use crate::crf::{nll, TagLoss};
use crate::nn::gradcheck::check_gradients;
use crate::synth::{label_verified, perturb, TagLabel::*};
use crate::text::CorpusRecord;

fn tiny_config(hidden: usize) -> HermanConfig {
    HermanConfig {
        hidden,
        embed: 6,
        vocab: 30,
        m_embed: 3,
        z_hidden: 5,
        batch_size: 4,
        seed: 42,
        ..Default::default()
    }
}

fn records() -> Vec<CorpusRecord> {
    vec![
        CorpusRecord::new("a", "5 people were hurt and 7 cars burned on monday .", "5 people were hurt on monday ."),
        CorpusRecord::new("b", "it rained on friday and on sunday in 2015 .", "it rained on friday ."),
        CorpusRecord::new("c", "prices rose 4% in may and fell 2% later .", "prices rose 4% ."),
    ]
}

fn instances() -> Vec<LabeledInstance> {
    let mut out = Vec::new();
    for r in records() {
        out.push(label_verified(&r));
        out.extend(perturb(&r, 3));
    }
    out
}

fn tiny_model(config: HermanConfig) -> Herman {
    let vocab = Herman::vocabulary_for(&instances(), config.vocab);
    Herman::new(config, vocab).unwrap()
}

#[test]
fn degenerate_lengths() {
    let model = tiny_model(tiny_config(4));
    let mut g = Graph::new(&model.store);
    let out = model.net.forward(&mut g, &[3], &[4], &[0]).unwrap();
    assert_eq!(g.value(out.attention[0]), &[1.0]);
    assert_eq!(g.dims(out.emissions), (1, 5));
    assert_eq!(g.value(out.z_prob).len(), 1);
}

#[test]
fn empty_inputs_rejected() {
    let model = tiny_model(tiny_config(4));
    assert!(model.forward_ids(&[], &[2], &[0]).is_err());
    assert!(model.forward_ids(&[2], &[], &[]).is_err());
    assert!(model.forward_ids(&[2], &[2, 3], &[0]).is_err());
}

#[test]
fn forward_is_reproducible() {
    let a = tiny_model(tiny_config(4));
    let b = tiny_model(tiny_config(4));
    let (ea, za) = a.forward_ids(&[2, 3, 4], &[5, 6], &[1, 0]).unwrap();
    let (eb, zb) = b.forward_ids(&[2, 3, 4], &[5, 6], &[1, 0]).unwrap();
    let (ec, zc) = a.forward_ids(&[2, 3, 4], &[5, 6], &[1, 0]).unwrap();
    assert_eq!(ea, eb);
    assert_eq!(ea, ec);
    assert_eq!(za.to_bits(), zb.to_bits());
    assert_eq!(za.to_bits(), zc.to_bits());
}

/// Finite-difference step. Smaller steps drown the token-marginal loss in
/// rounding noise; larger ones start to show curvature.
const GRAD_STEP: f64 = 1e-4;

/// Relative-error denominator floor. Central differences on a loss of order
/// ten carry roughly 1e-10 of rounding noise, so gradients smaller than this
/// are compared on an absolute scale.
const GRAD_FLOOR: f64 = 1e-5;

fn full_gradient_check(config: HermanConfig) {
    let mut model = tiny_model(HermanConfig { max_article: 7, max_summary: 7, ..config });
    assert!(model.vocab.len() <= 30);
    for inst in instances() {
        let enc = model.encode(&inst);
        assert!(enc.article.len() <= 7 && enc.summary.len() <= 7);
        let net = model.net.clone();
        let report = check_gradients(&mut model.store, GRAD_STEP, GRAD_FLOOR, |g| {
            let out = net.forward(g, &enc.article, &enc.summary, &enc.m)?;
            net.loss(g, &out, &enc.y, enc.z)
        })
        .unwrap();
        assert!(report.max_rel_err <= 1e-4, "{}: {report:?}", enc.id);
    }
}

#[test]
fn full_model_gradients() {
    full_gradient_check(tiny_config(8));
}

#[test]
fn full_model_gradients_variants() {
    full_gradient_check(HermanConfig {
        emission_hidden: 4,
        z_pooling: Pooling::HiddenMean,
        loss_mode: TagLoss::TokenMarginal,
        m_input: false,
        ..tiny_config(8)
    });
}

#[test]
fn loss_endpoints_and_combination() {
    let inst = instances().remove(1);
    for alpha in [0.0, 0.33, 0.5, 0.66, 1.0] {
        let model = tiny_model(HermanConfig { alpha, ..tiny_config(4) });
        let enc = model.encode(&inst);
        let (em, z) = model.forward_ids(&enc.article, &enc.summary, &enc.m).unwrap();
        let l_y = nll(&em, &enc.y, &model.net.crf_params(&model.store)).unwrap();
        let l_z = -(enc.z * z.ln() + (1.0 - enc.z) * (1.0 - z).ln());
        let got = model.loss(&enc).unwrap();
        if alpha == 1.0 {
            assert_eq!(got, l_y);
        }
        if alpha == 0.0 {
            assert_eq!(got, l_z);
        }
        assert!((got - (alpha * l_y + (1.0 - alpha) * l_z)).abs() < 1e-12);

        let mut g = Graph::new(&model.store);
        let out = model.net.forward(&mut g, &enc.article, &enc.summary, &enc.m).unwrap();
        let lv = model.net.loss(&mut g, &out, &enc.y, enc.z).unwrap();
        assert_eq!(g.scalar(lv), got);
    }
}

#[test]
fn bce_at_half_is_ln2() {
    assert!((bce(0.5, 1.0) - std::f64::consts::LN_2).abs() < 1e-15);
    assert!((bce(0.5, 0.0) - std::f64::consts::LN_2).abs() < 1e-15);
    assert_eq!(combine_losses(3.0, bce(0.5, 1.0), 0.0).unwrap(), bce(0.5, 1.0));
    assert!(bce(0.0, 1.0).is_finite() && bce(1.0, 0.0).is_finite());
    assert!(combine_losses(1.0, 1.0, 1.5).is_err());
}

#[test]
fn verify_respects_mask() {
    let model = tiny_model(tiny_config(4));
    let r = &records()[0];
    let out = model.verify(&r.article, &r.summary).unwrap();
    assert_eq!(out.mask, vec![1, 0, 0, 0, 0, 1, 0]);
    for (t, &m) in out.tag_sequence.iter().zip(&out.mask) {
        assert_eq!(*t == Outside, m == 0);
    }
    for (row, &m) in out.tag_marginals.iter().zip(&out.mask) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        if m == 0 {
            assert!((row[Outside.index()] - 1.0).abs() < 1e-12);
        }
    }
    assert!((0.0..=1.0).contains(&out.z_prob));
    assert!(!out.summary_truncated);
    assert_eq!(model.verify(&r.article, &r.summary).unwrap(), out);
}

#[test]
fn verify_without_quantities_is_all_outside() {
    let model = tiny_model(tiny_config(4));
    let r = CorpusRecord::new("x", "people were hurt .", "people were hurt .");
    let out = model.verify(&r.article, &r.summary).unwrap();
    assert!(out.tag_sequence.iter().all(|&t| t == Outside));
    assert!((0.0..=1.0).contains(&out.z_prob));
}

#[test]
fn verify_truncates_long_summaries() {
    let model = tiny_model(HermanConfig { max_summary: 3, ..tiny_config(4) });
    let r = &records()[0];
    let out = model.verify(&r.article, &r.summary).unwrap();
    assert!(out.summary_truncated);
    assert_eq!(out.tag_sequence.len(), 3);
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let model = tiny_model(tiny_config(4));
    let mut bytes = Vec::new();
    write_checkpoint(&model, &mut bytes).unwrap();
    assert_eq!(&bytes[..4], b"HRMN");
    let loaded = read_checkpoint(bytes.as_slice()).unwrap();
    assert_eq!(loaded.config, model.config);
    assert_eq!(loaded.vocab, model.vocab);
    for inst in instances() {
        let enc = model.encode(&inst);
        let (ea, za) = model.forward_ids(&enc.article, &enc.summary, &enc.m).unwrap();
        let (eb, zb) = loaded.forward_ids(&enc.article, &enc.summary, &enc.m).unwrap();
        assert_eq!(ea, eb);
        assert_eq!(za.to_bits(), zb.to_bits());
    }
    let mut again = Vec::new();
    write_checkpoint(&loaded, &mut again).unwrap();
    assert_eq!(bytes, again);
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let model = tiny_model(tiny_config(4));
    let mut bytes = Vec::new();
    write_checkpoint(&model, &mut bytes).unwrap();

    let mut wrong_magic = bytes.clone();
    wrong_magic[0] = b'X';
    assert!(matches!(read_checkpoint(wrong_magic.as_slice()), Err(Error::Checkpoint(_))));

    let mut wrong_version = bytes.clone();
    wrong_version[4] = 9;
    assert!(matches!(read_checkpoint(wrong_version.as_slice()), Err(Error::Checkpoint(_))));

    let truncated = &bytes[..bytes.len() - 3];
    assert!(matches!(read_checkpoint(truncated), Err(Error::Checkpoint(_))));

    let mut trailing = bytes.clone();
    trailing.push(0);
    assert!(matches!(read_checkpoint(trailing.as_slice()), Err(Error::Checkpoint(_))));
}

#[test]
fn early_stopping_patience() {
    let mut s = EarlyStopping::new(0);
    assert_eq!(s.observe(2.0), Progress::Improved);
    assert_eq!(s.observe(1.0), Progress::Improved);
    assert_eq!(s.observe(1.0), Progress::Stop);

    let mut s = EarlyStopping::new(3);
    assert_eq!(s.observe(2.0), Progress::Improved);
    assert_eq!(s.observe(2.5), Progress::Stale);
    assert_eq!(s.observe(2.0), Progress::Stale);
    assert_eq!(s.observe(1.5), Progress::Improved);
    assert_eq!(s.observe(1.6), Progress::Stale);
    assert_eq!(s.observe(1.7), Progress::Stale);
    assert_eq!(s.observe(1.8), Progress::Stop);
}

#[test]
fn training_is_deterministic_and_restores_best() {
    let config = HermanConfig { max_epochs: 3, lr: 0.01, ..tiny_config(4) };
    let data = instances();
    let run = || {
        let mut model = tiny_model(config.clone());
        let enc: Vec<_> = data.iter().map(|i| model.encode(i)).collect();
        let outcome = train(&mut model, &enc, &enc, |_| Ok(())).unwrap();
        let val = evaluate_loss(&model, &enc).unwrap();
        (outcome, val, model)
    };
    let (a, val_a, model_a) = run();
    let (b, _, model_b) = run();
    let strip = |o: &TrainOutcome| o.log.iter().map(|r| (r.epoch, r.train_loss.to_bits(), r.val_loss.to_bits())).collect::<Vec<_>>();
    assert_eq!(strip(&a), strip(&b));
    assert_eq!(model_a.store, model_b.store);
    assert_eq!(val_a, a.best_val_loss);
    assert!(a.log.len() <= 3);
}

#[test]
fn restarts_keep_the_lowest_validation_loss() {
    let config = HermanConfig { max_epochs: 2, lr: 0.01, restarts: 3, seed: 10, ..tiny_config(4) };
    let data = instances();
    let vocab = tiny_model(config.clone()).vocab;
    let enc: Vec<_> = data.iter().map(|i| tiny_model(config.clone()).encode(i)).collect();
    let mut seen = Vec::new();
    let (model, outcome) = train_restarts(&config, |c| Herman::new(c, vocab.clone()), &enc, &enc, |r| {
        seen.push(r.run);
        Ok(())
    })
    .unwrap();
    assert_eq!(seen.first(), Some(&1));
    assert_eq!(seen.last(), Some(&3));
    assert_eq!(outcome.log.len(), seen.len());
    let best_per_run = |run| outcome.log.iter().filter(|r| r.run == run).map(|r| r.val_loss).fold(f64::INFINITY, f64::min);
    for run in 1..=3 {
        assert!(outcome.best_val_loss <= best_per_run(run));
    }
    assert_eq!(outcome.best_val_loss, best_per_run(outcome.best_run));
    assert_eq!(model.config.seed, 10 + outcome.best_run as u64 - 1);
    assert_eq!(evaluate_loss(&model, &enc).unwrap(), outcome.best_val_loss);

    // A single restart is plain training.
    let single = HermanConfig { restarts: 1, ..config };
    let (_, one) = train_restarts(&single, |c| Herman::new(c, vocab.clone()), &enc, &enc, |_| Ok(())).unwrap();
    let mut plain = Herman::new(single.clone(), vocab.clone()).unwrap();
    let direct = train(&mut plain, &enc, &enc, |_| Ok(())).unwrap();
    let strip = |o: &TrainOutcome| o.log.iter().map(|r| (r.run, r.epoch, r.val_loss.to_bits())).collect::<Vec<_>>();
    assert_eq!(strip(&one), strip(&direct));
}

#[test]
fn nan_parameters_abort_training() {
    let mut model = tiny_model(tiny_config(4));
    let id = model.net.start;
    model.store.value_mut(id).data_mut()[0] = f64::NAN;
    let enc: Vec<_> = instances().iter().map(|i| model.encode(i)).collect();
    let err = train(&mut model, &enc, &enc, |_| Ok(())).unwrap_err();
    assert!(matches!(err, Error::Numeric(_)), "{err}");
}

#[test]
fn empty_splits_rejected() {
    let mut model = tiny_model(tiny_config(4));
    let enc: Vec<_> = instances().iter().map(|i| model.encode(i)).collect();
    assert!(matches!(train(&mut model, &[], &enc, |_| Ok(())), Err(Error::Data(_))));
    assert!(matches!(train(&mut model, &enc, &[], |_| Ok(())), Err(Error::Data(_))));
}

#[test]
fn pretrained_embeddings_fill_known_rows() {
    let mut model = tiny_model(tiny_config(4));
    let text = "people 1 2 3 4 5 6\nunseenword 1 1 1 1 1 1\n";
    assert_eq!(model.load_embeddings(text.as_bytes()).unwrap(), 1);
    let row = model.vocab.id("people");
    let table = model.store.value(model.net.embedding().table).data();
    assert_eq!(&table[row * 6..row * 6 + 6], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
}

#[test]
fn labels_in_fixture_are_unverified_where_replaced() {
    let data = instances();
    assert!(data.iter().any(|i| i.y.contains(&BeginUnverified)));
}
