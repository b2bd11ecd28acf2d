use std::path::Path;
use std::time::Instant;

use super::forward::{LossGraph, Mode};
use super::params::ModelParams;
use super::Side;
use crate::dataset::{self, Batch};
use crate::error::{Error, Result};
use crate::fsio;
use crate::nn::{clip_global_norm, AdamConfig, Scalar};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    /// Negatives per positive pair.
    pub m: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Global gradient-norm cap.
    pub clip: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            m: 6,
            epochs: 15,
            batch_size: 128,
            adam: AdamConfig::default(),
            clip: 5.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub wall_seconds: f64,
    pub negatives_seed: u64,
    pub triples: usize,
    pub batches: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochStats>,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,mean_loss,wall_seconds,negatives_seed\n");
        for e in &self.epochs {
            s.push_str(&format!(
                "{},{:.6},{:.3},{}\n",
                e.epoch, e.mean_loss, e.wall_seconds, e.negatives_seed
            ));
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsio::write_atomic(path, self.to_csv().as_bytes())
    }
}

/// Minibatch trainer. Each epoch redraws negatives, reshuffles, and for every
/// batch runs forward/backward, clips the global gradient norm and takes an
/// Adam step. Fully determined by `TrainConfig::seed`.
pub struct Trainer<'a, S> {
    params: ModelParams<S>,
    corpus: &'a [(Vec<u32>, Vec<u32>)],
    cfg: TrainConfig,
    epoch: usize,
    step: u64,
    log: TrainingLog,
}

impl<'a, S: Scalar> Trainer<'a, S> {
    pub fn new(
        params: ModelParams<S>,
        corpus: &'a [(Vec<u32>, Vec<u32>)],
        cfg: TrainConfig,
    ) -> Result<Self> {
        Self::resume(params, corpus, cfg, 0, 0)
    }

    /// Continues from a checkpoint taken after `epoch` epochs and `step` updates.
    pub fn resume(
        params: ModelParams<S>,
        corpus: &'a [(Vec<u32>, Vec<u32>)],
        cfg: TrainConfig,
        epoch: usize,
        step: u64,
    ) -> Result<Self> {
        if cfg.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus("no encodable training pairs".into()));
        }
        if cfg.m > 0 && corpus.len() < 2 {
            return Err(Error::TooFewPairs(corpus.len()));
        }
        if !(cfg.clip > 0.0) {
            return Err(Error::InvalidArgument("clip norm must be positive".into()));
        }
        let (vs, vt) = (params.vocab_size(Side::Source), params.vocab_size(Side::Target));
        for (s, t) in corpus {
            if s.is_empty() || t.is_empty() {
                return Err(Error::InvalidArgument("training corpus has an empty sentence".into()));
            }
            if s.iter().any(|&i| i as usize >= vs) || t.iter().any(|&i| i as usize >= vt) {
                return Err(Error::InvalidArgument(
                    "training corpus ids exceed the model vocabulary".into(),
                ));
            }
        }
        Ok(Trainer {
            params,
            corpus,
            cfg,
            epoch,
            step,
            log: TrainingLog::default(),
        })
    }

    pub fn params(&self) -> &ModelParams<S> {
        &self.params
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn log(&self) -> &TrainingLog {
        &self.log
    }

    pub fn run_epoch(&mut self) -> Result<EpochStats> {
        let start = Instant::now();
        let (epoch, seed) = (self.epoch, self.cfg.seed);
        let negatives_seed = dataset::epoch_negatives_seed(seed, epoch);
        let triples = dataset::resample_each_epoch(self.corpus.len(), self.cfg.m, epoch, seed)?;
        let mut shuffle = rng::derived(seed, &[rng::stream::SHUFFLE, epoch as u64]);
        let plan = dataset::batch_plan(triples.len(), self.cfg.batch_size, &mut shuffle)?;
        let mut total = 0.0;
        for (b, order) in plan.iter().enumerate() {
            let batch = Batch::assemble(self.corpus, &triples, order);
            let drop_seed =
                rng::derive_seed(seed, &[rng::stream::DROPOUT, epoch as u64, b as u64]);
            let loss =
                LossGraph::loss_and_gradients(&mut self.params, &batch, Mode::Training { seed: drop_seed })?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            total += loss * batch.len() as f64;
            clip_global_norm(&mut self.params.store, self.cfg.clip);
            self.step += 1;
            self.params
                .store
                .adam_update(&self.cfg.adam, self.step)
                .map_err(|e| match e {
                    Error::NonFiniteGradient(name) => Error::TrainingDiverged { name, epoch, batch: b },
                    other => other,
                })?;
        }
        let stats = EpochStats {
            epoch,
            mean_loss: total / triples.len() as f64,
            wall_seconds: start.elapsed().as_secs_f64(),
            negatives_seed,
            triples: triples.len(),
            batches: plan.len(),
        };
        self.epoch += 1;
        self.log.epochs.push(stats.clone());
        Ok(stats)
    }

    /// Runs the remaining epochs up to `cfg.epochs`, reporting each one.
    pub fn run(&mut self, mut on_epoch: impl FnMut(&EpochStats)) -> Result<()> {
        while self.epoch < self.cfg.epochs {
            let s = self.run_epoch()?;
            on_epoch(&s);
        }
        Ok(())
    }

    pub fn finish(self) -> (ModelParams<S>, TrainingLog) {
        (self.params, self.log)
    }
}

impl ModelParams<f32> {
    /// Initializes from `cfg.seed` and trains for `cfg.epochs` epochs.
    pub fn train(
        config: super::ModelConfig,
        corpus: &[(Vec<u32>, Vec<u32>)],
        cfg: &TrainConfig,
    ) -> Result<(Self, TrainingLog)> {
        let params = ModelParams::init(config, cfg.seed)?;
        let mut t = Trainer::new(params, corpus, *cfg)?;
        t.run(|_| {})?;
        Ok(t.finish())
    }
}
