use std::path::{Path, PathBuf};

use anyhow::Result;

use bitext_core::baseline::{BaselineConfig, BaselineModel, FilterConfig};
use bitext_core::dataset::{synthesize_noisy_testset, NoisyTestSet};
use bitext_core::evaluation::{self, NeuralSystem, PairScorer};
use bitext_core::extraction::{self, ScoredPair, Scorer};
use bitext_core::model::{ModelConfig, ModelParams, Side, TrainConfig, Trainer};
use bitext_core::nn::{AdamConfig, CellKind};
use bitext_core::persistence::{self, SaveMode};
use bitext_core::synthetic::ToyTestbed;
use bitext_core::text::{self, encode_parallel, tokenize, ParallelCorpus, Vocabulary};
use bitext_core::{fsio, Error};

use crate::{
    BaselineArgs, Cli, Command, CorpusArgs, ModelArgs, Selection, SystemArgs, TrainArgs, VocabPaths,
};

/// Raised for command-line problems the parser cannot see.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

/// 2 for usage and configuration problems (including missing inputs), 1 otherwise.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<Usage>() {
            return 2;
        }
        if let Some(err) = cause.downcast_ref::<Error>() {
            return match err {
                Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 2,
                Error::InvalidArgument(_)
                | Error::VocabMismatch { .. }
                | Error::TooFewPairs(_)
                | Error::MisalignedCorpus { .. } => 2,
                _ => 1,
            };
        }
    }
    1
}

fn require(path: &Path) -> Result<()> {
    if !path.exists() {
        return Err(usage(format!("no such file: {}", path.display())));
    }
    Ok(())
}

fn load_vocab(path: &Path) -> Result<Vocabulary> {
    require(path)?;
    Ok(Vocabulary::load(path)?)
}

fn load_lines(path: &Path) -> Result<Vec<String>> {
    require(path)?;
    Ok(fsio::read_lines(path)?)
}

fn model_config(vs: usize, vt: usize, a: &ModelArgs) -> Result<ModelConfig> {
    let cell: CellKind = a.cell.parse().map_err(|e: Error| usage(e.to_string()))?;
    let c = ModelConfig::new(vs, vt)
        .with_dims(a.d_e, a.d_h, a.d_f)
        .with_cell(cell)
        .with_dropout(a.dropout_in, a.dropout_out);
    c.validate().map_err(|e| usage(e.to_string()))?;
    Ok(c)
}

fn train_config(a: &TrainArgs) -> Result<TrainConfig> {
    if a.batch == 0 || a.epochs == 0 {
        return Err(usage("--batch and --epochs must be positive"));
    }
    if !(a.lr > 0.0) || !(a.clip > 0.0) {
        return Err(usage("--lr and --clip must be positive"));
    }
    Ok(TrainConfig {
        m: a.m,
        epochs: a.epochs,
        batch_size: a.batch,
        adam: AdamConfig {
            lr: a.lr,
            ..Default::default()
        },
        clip: a.clip,
        seed: a.seed,
    })
}

struct Loaded {
    source: Vocabulary,
    target: Vocabulary,
    pairs: Vec<(Vec<u32>, Vec<u32>)>,
}

fn load_training(c: &CorpusArgs) -> Result<Loaded> {
    require(&c.src)?;
    require(&c.tgt)?;
    let source = load_vocab(&c.src_vocab)?;
    let target = load_vocab(&c.tgt_vocab)?;
    let corpus = ParallelCorpus::load(&c.src, &c.tgt)?;
    let enc = encode_parallel(&corpus, &source, &target, text::MAX_LEN);
    println!(
        "corpus: {} pairs, {} dropped (empty or longer than {} tokens)",
        enc.pairs.len(),
        enc.dropped,
        text::MAX_LEN
    );
    Ok(Loaded {
        source,
        target,
        pairs: enc.pairs,
    })
}

fn train_model(
    data: &Loaded,
    mc: ModelConfig,
    tc: TrainConfig,
    resume: Option<&Path>,
) -> Result<(ModelParams<f32>, bitext_core::model::TrainingLog, u64)> {
    let mut trainer = match resume {
        Some(path) => {
            require(path)?;
            let loaded = persistence::load_model(path)?;
            let Some((epoch, step)) = loaded.position else {
                return Err(usage(format!("{} is a release model, not a checkpoint", path.display())));
            };
            if loaded.params.config != mc {
                return Err(usage("checkpoint was trained with a different model configuration"));
            }
            println!("resuming after epoch {epoch}, step {step}");
            Trainer::resume(loaded.params, &data.pairs, tc, epoch as usize, step)?
        }
        None => Trainer::new(ModelParams::init(mc, tc.seed)?, &data.pairs, tc)?,
    };
    trainer.run(|s| {
        println!(
            "epoch {:>3}  loss {:.6}  {} triples  {:.1}s",
            s.epoch + 1,
            s.mean_loss,
            s.triples,
            s.wall_seconds
        )
    })?;
    let step = trainer.step();
    let (params, log) = trainer.finish();
    Ok((params, log, step))
}

fn select(scored: impl Iterator<Item = ScoredPair>, s: &Selection) -> Vec<ScoredPair> {
    match (s.rho, s.top_k) {
        (_, Some(k)) => extraction::top_k(scored, k),
        (Some(rho), None) => extraction::extract(scored, rho),
        (None, None) => unreachable!("clap requires one selection flag"),
    }
}

fn neural_system(model: &Path, v: &VocabPaths) -> Result<NeuralSystem> {
    let (Some(sv), Some(tv)) = (&v.src_vocab, &v.tgt_vocab) else {
        return Err(usage("--model needs --src-vocab and --tgt-vocab"));
    };
    require(model)?;
    let params = persistence::load_model(model)?.params;
    let (source_vocab, target_vocab) = (load_vocab(sv)?, load_vocab(tv)?);
    persistence::check_vocabularies(&params, &source_vocab, &target_vocab)?;
    Ok(NeuralSystem {
        params,
        source_vocab,
        target_vocab,
    })
}

fn load_baseline(dir: &Path) -> Result<BaselineModel> {
    require(dir)?;
    Ok(BaselineModel::load(dir)?)
}

fn system(s: &SystemArgs, v: &VocabPaths) -> Result<Box<dyn PairScorer>> {
    match (&s.model, &s.baseline) {
        (Some(m), _) => Ok(Box::new(neural_system(m, v)?)),
        (None, Some(b)) => Ok(Box::new(load_baseline(b)?)),
        (None, None) => unreachable!("clap requires one system flag"),
    }
}

fn load_pairs(src: &Path, tgt: &Path) -> Result<Vec<(String, String)>> {
    let c = ParallelCorpus::new(load_lines(src)?, load_lines(tgt)?)?;
    Ok(c.source.into_iter().zip(c.target).collect())
}

fn configure_threads(threads: Option<usize>) -> Result<()> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(usage("--threads must be at least 1"));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| anyhow::anyhow!("cannot configure thread pool: {e}"))?;
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    configure_threads(cli.threads)?;
    eprintln!("resolved config: {:?}", cli.command);
    match cli.command {
        Command::BuildVocab {
            input,
            output,
            max_size,
        } => {
            let lines = load_lines(&input)?;
            let v = Vocabulary::build(lines.iter().map(|l| tokenize(l)), max_size)
                .map_err(|e| match e {
                    Error::InvalidArgument(m) => usage(m),
                    other => other.into(),
                })?;
            if v.len() <= 2 {
                eprintln!("warning: vocabulary holds only <pad> and <unk>");
            }
            v.save(&output)?;
            println!("vocabulary: {} entries -> {}", v.len(), output.display());
        }
        Command::Train {
            corpus,
            model,
            train,
            out,
            log,
            checkpoint,
            resume,
        } => {
            let tc = train_config(&train)?;
            let data = load_training(&corpus)?;
            let mc = model_config(data.source.len(), data.target.len(), &model)?;
            if tc.m > 0 && data.pairs.len() < 2 {
                return Err(Error::TooFewPairs(data.pairs.len()).into());
            }
            println!("parameters: {}", ModelParams::<f32>::shapes(&mc).iter().map(|s| s.iter().product::<usize>()).sum::<usize>());
            let (params, train_log, step) = train_model(&data, mc, tc, resume.as_deref())?;
            persistence::save_model(&params, &out, SaveMode::Release)?;
            if let Some(ck) = checkpoint {
                let epoch = train_log.epochs.last().map_or(0, |e| e.epoch + 1) as u64;
                persistence::save_model(&params, &ck, SaveMode::Checkpoint { epoch, step })?;
                println!("checkpoint -> {}", ck.display());
            }
            let log_path = log.unwrap_or_else(|| PathBuf::from(format!("{}.log.csv", out.display())));
            train_log.save(&log_path)?;
            println!("model -> {}\nlog -> {}", out.display(), log_path.display());
        }
        Command::Extract {
            model,
            corpus,
            select: sel,
            out_dir,
        } => {
            let vp = VocabPaths {
                src_vocab: Some(corpus.src_vocab.clone()),
                tgt_vocab: Some(corpus.tgt_vocab.clone()),
            };
            let sys = neural_system(&model, &vp)?;
            let source = load_lines(&corpus.src)?;
            let target = load_lines(&corpus.tgt)?;
            let scorer = Scorer::new(&sys.params);
            let a = scorer.encode_collection(&source, Side::Source, &sys.source_vocab)?;
            let b = scorer.encode_collection(&target, Side::Target, &sys.target_vocab)?;
            println!(
                "skipped {} source and {} target sentences (empty or longer than {} tokens)",
                a.skipped.len(),
                b.skipped.len(),
                text::MAX_LEN
            );
            let mut kept = Vec::new();
            let mut heap = sel.top_k.map(extraction::TopK::new);
            let stats = scorer.score_cartesian(&a, &b, |s| match (&mut heap, sel.rho) {
                (Some(h), _) => h.push(s),
                (None, Some(rho)) => {
                    if s.p as f64 >= rho {
                        kept.push(s)
                    }
                }
                (None, None) => {}
            });
            let pairs = match heap {
                Some(h) => h.into_sorted(),
                None => extraction::extract(kept, f64::NEG_INFINITY),
            };
            extraction::write_extracted(&out_dir, &source, &target, &pairs)?;
            println!(
                "scored {} pairs with {} encoder passes, extracted {} -> {}",
                stats.pairs,
                scorer.encoder_passes(),
                pairs.len(),
                out_dir.display()
            );
        }
        Command::SynthNoise {
            parallel_src,
            parallel_tgt,
            heldout_tgt,
            r,
            p,
            seed,
            out_dir,
        } => {
            let pool = load_pairs(&parallel_src, &parallel_tgt)?;
            let held = load_lines(&heldout_tgt)?;
            let sample = evaluation::sample_parallel(&pool, p, seed)?;
            let set = synthesize_noisy_testset(&sample, &held, r, seed)?;
            set.save(&out_dir)?;
            println!(
                "test set: {} x {} candidates, {} gold -> {}",
                set.source.len(),
                set.target.len(),
                set.gold.len(),
                out_dir.display()
            );
        }
        Command::Evaluate {
            system: s,
            vocab,
            testset_dir,
            curve_out,
        } => {
            let sys = system(&s, &vocab)?;
            require(&testset_dir.join("gold.tsv"))?;
            let set = NoisyTestSet::load(&testset_dir)?;
            let (report, curve) = evaluation::evaluate(sys.as_ref(), &set)?;
            let b = report.best;
            println!(
                "P={:.4} R={:.4} F1={:.4} rho={:.6} extracted={} gold={} auc={:.4}",
                b.precision, b.recall, b.f1, b.rho, b.extracted, report.gold, report.auc
            );
            if let Some(path) = curve_out {
                evaluation::write_curve(&path, &curve)?;
                println!("curve -> {}", path.display());
            }
        }
        Command::NoiseSweep {
            system: s,
            vocab,
            parallel_src,
            parallel_tgt,
            heldout_tgt,
            p,
            ratios,
            seeds,
            out,
        } => {
            let sys = system(&s, &vocab)?;
            let pool = load_pairs(&parallel_src, &parallel_tgt)?;
            let held = load_lines(&heldout_tgt)?;
            let rows = evaluation::noise_sweep(sys.as_ref(), &pool, &held, p, &ratios, &seeds)?;
            fsio::write_atomic(&out, evaluation::sweep_csv(&rows).as_bytes())?;
            for (r, m) in evaluation::average_by_ratio(&rows) {
                println!("r={r:.2}  P={:.4} R={:.4} F1={:.4}", m.precision, m.recall, m.f1);
            }
            println!("sweep -> {}", out.display());
        }
        Command::MSweep {
            corpus,
            model,
            train,
            ms,
            seeds,
            testset_dirs,
            out,
        } => {
            let base = train_config(&train)?;
            let data = load_training(&corpus)?;
            let mc = model_config(data.source.len(), data.target.len(), &model)?;
            let sets = testset_dirs
                .iter()
                .map(|d| {
                    require(&d.join("gold.tsv"))?;
                    Ok(NoisyTestSet::load(d)?)
                })
                .collect::<Result<Vec<_>>>()?;
            let rows = evaluation::m_sweep(&ms, &seeds, &sets, |m, seed| {
                println!("training m={m} seed={seed}");
                let tc = TrainConfig { m, seed, ..base };
                let (params, _, _) = train_model(&data, mc, tc, None).map_err(|e| match e.downcast::<Error>() {
                    Ok(err) => err,
                    Err(other) => Error::InvalidArgument(other.to_string()),
                })?;
                Ok(Box::new(NeuralSystem {
                    params,
                    source_vocab: data.source.clone(),
                    target_vocab: data.target.clone(),
                }) as Box<dyn PairScorer>)
            })?;
            fsio::write_atomic(&out, evaluation::sweep_csv(&rows).as_bytes())?;
            println!("sweep -> {}", out.display());
        }
        Command::BaselineTrain {
            src,
            tgt,
            args,
            out_dir,
        } => {
            let cfg = baseline_config(&args)?;
            let pairs = load_pairs(&src, &tgt)?;
            let m = BaselineModel::train(&pairs, &cfg)?;
            m.save(&out_dir)?;
            println!("baseline -> {}", out_dir.display());
        }
        Command::BaselineExtract {
            baseline,
            src,
            tgt,
            select: sel,
            out_dir,
        } => {
            let m = load_baseline(&baseline)?;
            let set = NoisyTestSet {
                source: load_lines(&src)?,
                target: load_lines(&tgt)?,
                gold: Vec::new(),
                noise_ratio: 0.0,
                seed: 0,
            };
            let scored = m.score_testset(&set)?;
            let survivors = scored.len();
            let pairs = select(scored.into_iter(), &sel);
            extraction::write_extracted(&out_dir, &set.source, &set.target, &pairs)?;
            println!(
                "{} of {} pairs passed the candidate filter, extracted {} -> {}",
                survivors,
                set.candidate_count(),
                pairs.len(),
                out_dir.display()
            );
        }
        Command::GenToy {
            train,
            test,
            heldout,
            seed,
            out_dir,
        } => {
            let bed = ToyTestbed::generate(train, test, heldout, seed)?;
            fsio::ensure_dir(&out_dir)?;
            let write = |name: &str, lines: Vec<&str>| -> Result<()> {
                Ok(fsio::write_atomic(&out_dir.join(name), fsio::join_lines(&lines).as_bytes())?)
            };
            write("train.src", bed.train.iter().map(|p| p.0.as_str()).collect())?;
            write("train.tgt", bed.train.iter().map(|p| p.1.as_str()).collect())?;
            write("test.src", bed.test_pool.iter().map(|p| p.0.as_str()).collect())?;
            write("test.tgt", bed.test_pool.iter().map(|p| p.1.as_str()).collect())?;
            write("heldout.tgt", bed.heldout_targets.iter().map(String::as_str).collect())?;
            println!("toy corpus -> {}", out_dir.display());
        }
    }
    Ok(())
}

fn baseline_config(a: &BaselineArgs) -> Result<BaselineConfig> {
    if a.iterations == 0 {
        return Err(usage("--iterations must be at least 1"));
    }
    if !(0.0..=1.0).contains(&a.tau_lex) {
        return Err(usage("--tau-lex must lie in [0, 1]"));
    }
    Ok(BaselineConfig {
        ibm1_iterations: a.iterations,
        filter: FilterConfig {
            tau: a.tau_lex,
            ..Default::default()
        },
        negatives: a.negatives,
        seed: a.seed,
        ..Default::default()
    })
}
