//! End-to-end acceptance checks. Runs as a plain binary so every criterion
//! prints its verdict even when the others pass; exits non-zero if any fails.

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::Rng as _;

use bitext_core::baseline::{train_ibm1, BaselineConfig, BaselineModel};
use bitext_core::dataset::{resample_each_epoch, sample_negatives, synthesize_noisy_testset, Batch, PaddedSide};
use bitext_core::evaluation::{self, average_by_ratio, noise_sweep, precision_recall_f1, NeuralSystem, PairScorer};
use bitext_core::extraction::{extract, ScoreOptions, ScoredPair, Scorer};
use bitext_core::model::{LossGraph, Mode, ModelConfig, ModelParams, SentenceRepresentation, Side, TrainConfig};
use bitext_core::nn::{clip_global_norm, AdamConfig, CellKind};
use bitext_core::persistence::{decode_model, encode_model, SaveMode};
use bitext_core::rng;
use bitext_core::synthetic::{ToyLanguage, ToyTestbed};
use bitext_core::text::{encode_parallel, tokenize, ParallelCorpus, Vocabulary, MAX_LEN};

type Verdict = (bool, String);

/// Learning rate for the toy runs. The default suits paper-scale data; ten short
/// epochs on 5000 pairs need a larger step.
const TOY_LR: f64 = 0.002;
const TOY_SEEDS: [u64; 3] = [1, 2, 3];

// ---------------------------------------------------------------------------
// shared toy experiment

struct ToyResult {
    seed: u64,
    neural: Vec<(f64, f64)>,
    baseline: Vec<(f64, f64)>,
    train_seconds: f64,
    total_seconds: f64,
}

fn f1_at(rows: &[(f64, f64)], r: f64) -> f64 {
    rows.iter().find(|(x, _)| *x == r).map(|x| x.1).expect("ratio evaluated")
}

fn vocabularies(pairs: &[(String, String)]) -> (Vocabulary, Vocabulary) {
    let s = Vocabulary::build(pairs.iter().map(|p| tokenize(&p.0)), None).unwrap();
    let t = Vocabulary::build(pairs.iter().map(|p| tokenize(&p.1)), None).unwrap();
    (s, t)
}

fn toy_neural(
    bed: &ToyTestbed,
    pairs: usize,
    dims: (usize, usize, usize),
    m: usize,
    epochs: usize,
    seed: u64,
) -> NeuralSystem {
    let train = &bed.train[..pairs];
    let (sv, tv) = vocabularies(train);
    let (s, t): (Vec<String>, Vec<String>) = train.iter().cloned().unzip();
    let enc = encode_parallel(&ParallelCorpus::new(s, t).unwrap(), &sv, &tv, MAX_LEN);
    let cfg = ModelConfig::new(sv.len(), tv.len()).with_dims(dims.0, dims.1, dims.2);
    let tc = TrainConfig {
        m,
        epochs,
        batch_size: 64,
        adam: AdamConfig {
            lr: TOY_LR,
            ..Default::default()
        },
        seed,
        ..Default::default()
    };
    let (params, _) = ModelParams::train(cfg, &enc.pairs, &tc).unwrap();
    NeuralSystem {
        params,
        source_vocab: sv,
        target_vocab: tv,
    }
}

fn run_toy(seed: u64) -> ToyResult {
    let t0 = Instant::now();
    let bed = ToyTestbed::standard(seed);
    let neural = toy_neural(&bed, 5000, (32, 32, 16), 6, 10, seed);
    let train_seconds = t0.elapsed().as_secs_f64();
    let baseline = BaselineModel::train(&bed.train, &BaselineConfig { seed, ..Default::default() }).unwrap();
    let ratios = [0.0, 0.5, 0.9];
    let eval = |sys: &dyn PairScorer| -> Vec<(f64, f64)> {
        let rows = noise_sweep(sys, &bed.test_pool, &bed.heldout_targets, 300, &ratios, &[seed]).unwrap();
        average_by_ratio(&rows).into_iter().map(|(r, m)| (r, m.f1)).collect()
    };
    let n = eval(&neural);
    let b = eval(&baseline);
    println!(
        "    toy seed {seed}: BiRNN F1 {:?}  baseline F1 {:?}  ({:.0}s)",
        n.iter().map(|x| format!("r={}:{:.4}", x.0, x.1)).collect::<Vec<_>>(),
        b.iter().map(|x| format!("r={}:{:.4}", x.0, x.1)).collect::<Vec<_>>(),
        t0.elapsed().as_secs_f64()
    );
    ToyResult {
        seed,
        neural: n,
        baseline: b,
        train_seconds,
        total_seconds: t0.elapsed().as_secs_f64(),
    }
}

// ---------------------------------------------------------------------------
// criteria

fn c1_gradients() -> Verdict {
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    for cell in [CellKind::Lstm, CellKind::Gru] {
        let cfg = ModelConfig::new(20, 20).with_dims(8, 8, 4).with_cell(cell);
        let mut m = ModelParams::<f64>::init(cfg, 5).unwrap();
        let mut r = rng::seeded(11);
        // larger weights than the init so no parameter sits in a flat region
        for p in m.store.iter_mut() {
            p.value.data_mut().iter_mut().for_each(|v| *v = r.gen_range(-0.6..0.6));
        }
        let seqs = |r: &mut rng::Rng| -> Vec<Vec<u32>> {
            (0..6).map(|_| (0..r.gen_range(1..7)).map(|_| r.gen_range(0..20)).collect()).collect()
        };
        let (src, tgt) = (seqs(&mut r), seqs(&mut r));
        let batch = Batch {
            source: PaddedSide::from_sequences(src.iter().map(Vec::as_slice)),
            target: PaddedSide::from_sequences(tgt.iter().map(Vec::as_slice)),
            labels: vec![true, false, false, true, false, true],
        };
        for mode in [Mode::Inference, Mode::Training { seed: 77 }] {
            LossGraph::loss_and_gradients(&mut m, &batch, mode).unwrap();
            let analytic = m.store.clone();
            let eps = 1e-5;
            for id in 0..m.store.len() {
                for k in 0..m.store.get(id).value.len() {
                    let base = m.store.get(id).value.data()[k];
                    m.store.get_mut(id).value.data_mut()[k] = base + eps;
                    let up = m.batch_loss(&batch, mode).unwrap();
                    m.store.get_mut(id).value.data_mut()[k] = base - eps;
                    let dn = m.batch_loss(&batch, mode).unwrap();
                    m.store.get_mut(id).value.data_mut()[k] = base;
                    let fd = (up - dn) / (2.0 * eps);
                    let a = analytic.get(id).grad.data()[k];
                    worst = worst.max((a - fd).abs() / a.abs().max(1.0));
                }
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    (
        worst <= 1e-4 && secs < 60.0,
        format!("worst relative error {worst:.2e} (limit 1e-4), LSTM+GRU, both modes, {secs:.1}s"),
    )
}

fn c2_toy_end_to_end(first: &ToyResult) -> Verdict {
    let f1 = f1_at(&first.neural, 0.5);
    (
        f1 >= 0.90 && first.total_seconds < 600.0,
        format!(
            "seed {}: F1 {f1:.4} at r=0.5 (need >= 0.90); training {:.0}s, with evaluation {:.0}s (limit 600s)",
            first.seed, first.train_seconds, first.total_seconds
        ),
    )
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn c3_ordering(results: &[ToyResult]) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for r in [0.5, 0.9] {
        let n = mean(results.iter().map(|x| f1_at(&x.neural, r)));
        let b = mean(results.iter().map(|x| f1_at(&x.baseline, r)));
        ok &= n > b;
        parts.push(format!("r={r}: BiRNN {n:.4} vs baseline {b:.4}"));
    }
    (ok, format!("{} (mean over {} seeds, need BiRNN > baseline)", parts.join("; "), results.len()))
}

fn c4_degradation(results: &[ToyResult]) -> Verdict {
    let n0 = mean(results.iter().map(|x| f1_at(&x.neural, 0.0)));
    let n9 = mean(results.iter().map(|x| f1_at(&x.neural, 0.9)));
    let b0 = mean(results.iter().map(|x| f1_at(&x.baseline, 0.0)));
    let b9 = mean(results.iter().map(|x| f1_at(&x.baseline, 0.9)));
    let (dn, db) = (n0 - n9, b0 - b9);
    (
        n0 > n9 && dn < db,
        format!("BiRNN F1 {n0:.4} -> {n9:.4} (drop {dn:.4}); baseline {b0:.4} -> {b9:.4} (drop {db:.4}); need BiRNN drop > 0 and < baseline drop"),
    )
}

fn c5_m_sweep() -> Verdict {
    // reduced size: the harness, not the curve, is under test
    let seeds = [1u64, 2];
    let ms: Vec<usize> = (1..=10).collect();
    let bed = ToyTestbed::generate(1000, 300, 300, 7).unwrap();
    let sample = evaluation::sample_parallel(&bed.test_pool, 100, 7).unwrap();
    let set = synthesize_noisy_testset(&sample, &bed.heldout_targets, 0.5, 7).unwrap();
    let rows = evaluation::m_sweep(&ms, &seeds, std::slice::from_ref(&set), |m, seed| {
        Ok(Box::new(toy_neural(&bed, 1000, (16, 16, 8), m, 2, seed)) as Box<dyn PairScorer>)
    })
    .unwrap();
    let csv = evaluation::sweep_csv(&rows);
    let lines: Vec<&str> = csv.lines().collect();
    let per_seed_ok = seeds.iter().all(|&s| {
        let got: Vec<usize> = rows.iter().filter(|r| r.seed == s).map(|r| r.m).collect();
        got == ms
    });
    let f1_ok = rows.iter().all(|r| (0.0..=1.0).contains(&r.report.best.f1));
    let csv_ok = lines.len() == 1 + 20 && lines[1..].iter().all(|l| l.split(',').count() == 8);
    let f1s: Vec<String> = rows.iter().filter(|r| r.seed == 1).map(|r| format!("{:.3}", r.report.best.f1)).collect();
    (
        per_seed_ok && f1_ok && csv_ok,
        format!("{} CSV rows for 2 seeds x m=1..10, F1 in [0,1]; seed 1 F1 by m: {}", lines.len() - 1, f1s.join(" ")),
    )
}

fn c6_dataset_arithmetic() -> Verdict {
    let mut r = rng::seeded(0);
    let mut ok = true;
    for (n, m) in [(1000, 6), (500_000, 1), (37, 10), (2, 3)] {
        ok &= sample_negatives(n, m, &mut r).unwrap().len() == n * (1 + m);
    }
    ok &= resample_each_epoch(100, 6, 3, 9).unwrap().len() == 700;
    let bed = ToyTestbed::generate(0, 1000, 1500, 3).unwrap();
    let set = synthesize_noisy_testset(&bed.test_pool, &bed.heldout_targets, 0.6, 3).unwrap();
    let candidates = set.candidate_count();
    let gold = set.gold.len();
    let prevalence = gold as f64 / candidates as f64;
    ok &= candidates == 1_000_000 && gold == 400 && (prevalence * 100.0 - 0.04).abs() < 1e-12;
    (
        ok,
        format!("n(1+m) counts exact; p=1000 gives {candidates} candidates, r=0.6 leaves {gold} gold = {:.2}%", prevalence * 100.0),
    )
}

fn c7_metrics() -> Verdict {
    let mut exact = true;
    let mut instances = 0;
    for seed in 0..10u64 {
        let mut r = rng::seeded(seed);
        for _ in 0..10 {
            let side = r.gen_range(1..=100usize);
            let universe = side * side;
            let pick = |r: &mut rng::Rng, k: usize| -> Vec<(usize, usize)> {
                (0..k).map(|_| (r.gen_range(0..side), r.gen_range(0..side))).collect()
            };
            let gold_k = r.gen_range(1..=universe.min(2000));
            let gold: HashSet<_> = pick(&mut r, gold_k).into_iter().collect();
            let ext_k = r.gen_range(0..=universe.min(10_000));
            let ext = pick(&mut r, ext_k);
            let got = precision_recall_f1(&ext, &gold).unwrap();
            // oracle: plain set intersection
            let ext_set: HashSet<_> = ext.iter().copied().collect();
            let hits = ext_set.intersection(&gold).count() as f64;
            let p = if ext_set.is_empty() { 0.0 } else { hits / ext_set.len() as f64 };
            let rc = hits / gold.len() as f64;
            let f = if p + rc == 0.0 { 0.0 } else { 2.0 * p * rc / (p + rc) };
            exact &= got.precision == p && got.recall == rc && got.f1 == f;
            instances += 1;
        }
    }
    let (p, r): (f64, f64) = (0.8372, 0.6890);
    let f1 = 2.0 * p * r / (p + r);
    let printed: f64 = 0.7579;
    let reproduces = (f1 * 100.0 * 100.0).round() == (printed * 100.0 * 100.0).round();
    (
        exact && reproduces,
        format!(
            "oracle agreement on {instances} instances: {exact}; F1 from P=83.72, R=68.90 is {:.2}, expected {:.2}",
            f1 * 100.0,
            printed * 100.0
        ),
    )
}

fn c8_invariants() -> Verdict {
    let mut notes = Vec::new();
    let mut ok = true;
    let cfg = ModelConfig::new(30, 30).with_dims(8, 8, 6);
    let m = ModelParams::<f32>::init(cfg, 2).unwrap();
    let mut r = rng::seeded(4);

    // pair symmetry
    let mut sym = true;
    for _ in 0..1000 {
        let a: Vec<f32> = (0..16).map(|_| r.gen_range(-1.0..1.0)).collect();
        let b: Vec<f32> = (0..16).map(|_| r.gen_range(-1.0..1.0)).collect();
        let (a, b) = (SentenceRepresentation::from_vec(a), SentenceRepresentation::from_vec(b));
        let ab = m.match_probability(&a, &b, None).unwrap();
        let ba = m.match_probability(&b, &a, None).unwrap();
        sym &= ab.to_bits() == ba.to_bits();
    }
    ok &= sym;
    notes.push(format!("symmetry {sym}"));

    // threshold monotonicity
    let scored: Vec<ScoredPair> = (0..500).map(|k| ScoredPair { i: k % 23, j: k / 23, p: r.gen() }).collect();
    let mut mono = true;
    let mut prev = usize::MAX;
    for step in 0..=100 {
        let n = extract(scored.iter().copied(), step as f64 / 100.0).len();
        mono &= n <= prev;
        prev = n;
    }
    ok &= mono;
    notes.push(format!("extract monotone {mono}"));

    // clipping
    let mut clip_ok = true;
    for trial in 0..20 {
        let mut mm = m.clone();
        for p in mm.store.iter_mut() {
            p.grad.data_mut().iter_mut().for_each(|g| *g = r.gen_range(-3.0..3.0));
        }
        let max = [0.5, 5.0, 1e3][trial % 3];
        let before = mm.store.grad_norm();
        clip_global_norm(&mut mm.store, max);
        let after = mm.store.grad_norm();
        let snapshot = mm.store.clone();
        clip_global_norm(&mut mm.store, max);
        let idem = mm.store.iter().zip(snapshot.iter()).all(|(a, b)| a.grad == b.grad);
        let target = before.min(max);
        clip_ok &= idem && (after - target).abs() <= 1e-5 * target.max(1.0);
    }
    ok &= clip_ok;
    notes.push(format!("clip exact+idempotent {clip_ok}"));

    // padding independence
    let seqs: Vec<Vec<u32>> = (0..12).map(|k| (0..1 + k % 7).map(|_| r.gen_range(0..30)).collect()).collect();
    let tgts: Vec<Vec<u32>> = (0..12).map(|k| (0..1 + (k * 5) % 9).map(|_| r.gen_range(0..30)).collect()).collect();
    let batch = Batch {
        source: PaddedSide::from_sequences(seqs.iter().map(Vec::as_slice)),
        target: PaddedSide::from_sequences(tgts.iter().map(Vec::as_slice)),
        labels: vec![true; 12],
    };
    let mut g = LossGraph::new();
    g.forward(&m, &batch, Mode::Inference).unwrap();
    let mut worst = 0.0f32;
    for (k, tr) in g.record().unwrap().traces.iter().enumerate() {
        let hs = m.encode(&seqs[k], Side::Source, None).unwrap();
        let ht = m.encode(&tgts[k], Side::Target, None).unwrap();
        let (bs, bt) = tr.representations();
        for (x, y) in bs.iter().zip(hs.as_slice()).chain(bt.iter().zip(ht.as_slice())) {
            worst = worst.max((x - y).abs());
        }
        let p = m.match_probability(&hs, &ht, None).unwrap();
        worst = worst.max((p - tr.p).abs());
    }
    ok &= worst <= 1e-5;
    notes.push(format!("padding max diff {worst:.1e}"));

    // IBM1 likelihood
    let mut ll_ok = true;
    for k in 0..50u64 {
        let lang = ToyLanguage::new(25, 2, 7, 1.0, k).unwrap();
        let corpus: Vec<_> = lang
            .generate(20 + (k as usize * 7) % 80, k, 9)
            .iter()
            .map(|(s, t)| (tokenize(s), tokenize(t)))
            .collect();
        let fit = train_ibm1(&corpus, 5).unwrap();
        ll_ok &= fit.log_likelihood.len() == 5 && fit.log_likelihood.windows(2).all(|w| w[1] >= w[0] - 1e-9);
    }
    ok &= ll_ok;
    notes.push(format!("IBM1 monotone on 50 corpora {ll_ok}"));

    // persistence
    let mut pm = m.clone();
    for p in pm.store.iter_mut() {
        p.m.data_mut().iter_mut().for_each(|x| *x = r.gen());
        p.v.data_mut().iter_mut().for_each(|x| *x = r.gen());
    }
    let bytes = encode_model(&pm, SaveMode::Checkpoint { epoch: 1, step: 2 }).unwrap();
    let back = decode_model(&bytes, std::path::Path::new("mem")).unwrap().params;
    let bits = |t: &bitext_core::nn::Tensor<f32>| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let persist = pm
        .store
        .iter()
        .zip(back.store.iter())
        .all(|(a, b)| bits(&a.value) == bits(&b.value) && bits(&a.m) == bits(&b.m) && bits(&a.v) == bits(&b.v));
    ok &= persist;
    notes.push(format!("persistence bit-identical {persist}"));
    (ok, notes.join("; "))
}

fn c9_extraction_contract() -> Verdict {
    let lang = ToyLanguage::new(200, 4, 12, 0.5, 8).unwrap();
    let pairs = lang.generate(1000, 8, 1);
    let (sv, tv) = vocabularies(&pairs);
    let params = ModelParams::<f32>::init(ModelConfig::new(sv.len(), tv.len()).with_dims(32, 32, 16), 8).unwrap();
    let budget = 1 << 16;
    let scorer = Scorer::new(&params).with_options(ScoreOptions {
        max_buffered: budget,
        ..Default::default()
    });
    let (src, tgt): (Vec<String>, Vec<String>) = pairs.into_iter().unzip();
    let a = scorer.encode_collection(&src, Side::Source, &sv).unwrap();
    let b = scorer.encode_collection(&tgt, Side::Target, &tv).unwrap();
    let mut r = rng::seeded(9);
    let sampled: HashSet<(usize, usize)> = (0..100).map(|_| (r.gen_range(0..1000), r.gen_range(0..1000))).collect();
    let mut seen = Vec::new();
    let mut count = 0usize;
    let stats = scorer.score_cartesian(&a, &b, |s| {
        count += 1;
        if sampled.contains(&(s.i, s.j)) {
            seen.push(s);
        }
    });
    let passes = scorer.encoder_passes();
    let bitwise = seen.len() == sampled.len()
        && seen.iter().all(|s| {
            let hs = SentenceRepresentation::from_vec(a.rep(s.i).to_vec());
            let ht = SentenceRepresentation::from_vec(b.rep(s.j).to_vec());
            params.match_probability(&hs, &ht, None).unwrap().to_bits() == s.p.to_bits()
        });
    (
        passes == 2000 && count == 1_000_000 && stats.peak_buffered <= budget && bitwise,
        format!(
            "{passes} encoder passes for {count} pairs, peak buffered {} of budget {budget}, {} sampled pairs bitwise equal: {bitwise}",
            stats.peak_buffered,
            seen.len()
        ),
    )
}

fn guarded(f: impl FnOnce() -> Verdict) -> Verdict {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(v) => v,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        }
    }
}

fn main() {
    let start = Instant::now();
    let mut verdicts: Vec<(u32, &str, Verdict)> = Vec::new();
    verdicts.push((1, "gradient integrity", guarded(c1_gradients)));
    println!("    running toy experiments ({} seeds)", TOY_SEEDS.len());
    let toy = catch_unwind(|| TOY_SEEDS.iter().map(|&s| run_toy(s)).collect::<Vec<_>>());
    match &toy {
        Ok(results) => {
            verdicts.push((2, "toy end-to-end", guarded(|| c2_toy_end_to_end(&results[0]))));
            verdicts.push((3, "system ordering", guarded(|| c3_ordering(results))));
            verdicts.push((4, "noise degradation", guarded(|| c4_degradation(results))));
        }
        Err(_) => {
            for (k, name) in [(2, "toy end-to-end"), (3, "system ordering"), (4, "noise degradation")] {
                verdicts.push((k, name, (false, "toy experiment panicked".into())));
            }
        }
    }
    verdicts.push((5, "m-sweep harness", guarded(c5_m_sweep)));
    verdicts.push((6, "dataset arithmetic", guarded(c6_dataset_arithmetic)));
    verdicts.push((7, "metric oracle", guarded(c7_metrics)));
    verdicts.push((8, "invariant suites", guarded(c8_invariants)));
    verdicts.push((9, "extraction contract", guarded(c9_extraction_contract)));

    println!();
    let mut failed = 0;
    for (k, name, (pass, detail)) in &verdicts {
        println!("criterion {k} {name}: {} - {detail}", if *pass { "PASS" } else { "FAIL" });
        failed += !pass as usize;
    }
    println!(
        "\n{} of {} criteria passed in {:.0}s",
        verdicts.len() - failed,
        verdicts.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
