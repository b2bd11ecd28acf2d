//! Exhaustive Cartesian-product scoring of two sentence collections.
//!
//! Every sentence is encoded exactly once; only the matching head runs per
//! pair. The `(i, j)` grid is cut into tiles which are scored in parallel and
//! handed to the caller's sink in a fixed order, a wave of tiles at a time, so
//! memory stays bounded by the configured budget.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};

use crate::error::{Error, Result};
use crate::fsio;
use crate::model::{ModelParams, Side};
use crate::nn::sigmoid;
use crate::par;
use crate::text::{self, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredPair {
    pub i: usize,
    pub j: usize,
    pub p: f32,
}

/// Higher probability first; equal probabilities by `(i, j)` ascending.
pub fn rank_order(a: &ScoredPair, b: &ScoredPair) -> Ordering {
    b.p.total_cmp(&a.p).then_with(|| (a.i, a.j).cmp(&(b.i, b.j)))
}

/// Encoded sentences of one side with their positions in the input.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedCollection {
    pub d_enc: usize,
    /// `len × d_enc` representations.
    pub reps: Vec<f32>,
    /// Original index of each encoded sentence.
    pub index: Vec<usize>,
    /// Original indices of sentences that were empty or too long.
    pub skipped: Vec<usize>,
}

impl EncodedCollection {
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn rep(&self, k: usize) -> &[f32] {
        &self.reps[k * self.d_enc..(k + 1) * self.d_enc]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScoreOptions {
    pub tile_rows: usize,
    pub tile_cols: usize,
    /// Upper bound on scores held in memory before they reach the sink.
    pub max_buffered: usize,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        ScoreOptions {
            tile_rows: 32,
            tile_cols: 1024,
            max_buffered: 1 << 20,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScoreStats {
    pub pairs: usize,
    pub tiles: usize,
    pub peak_buffered: usize,
}

/// Scores pairs with a frozen model and counts encoder invocations.
pub struct Scorer<'a> {
    params: &'a ModelParams<f32>,
    encoder_passes: AtomicUsize,
    pub options: ScoreOptions,
}

impl<'a> Scorer<'a> {
    pub fn new(params: &'a ModelParams<f32>) -> Self {
        Scorer {
            params,
            encoder_passes: AtomicUsize::new(0),
            options: ScoreOptions::default(),
        }
    }

    pub fn with_options(mut self, options: ScoreOptions) -> Self {
        self.options = options;
        self
    }

    pub fn params(&self) -> &ModelParams<f32> {
        self.params
    }

    pub fn encoder_passes(&self) -> usize {
        self.encoder_passes.load(AtomicOrdering::Relaxed)
    }

    fn encode_one(&self, ids: &[u32], side: Side) -> Result<Vec<f32>> {
        self.encoder_passes.fetch_add(1, AtomicOrdering::Relaxed);
        Ok(self.params.encode(ids, side, None)?.into_vec())
    }

    /// Encodes already-tokenized id sequences; empty or over-length ones are skipped.
    pub fn encode_ids(&self, sentences: &[Vec<u32>], side: Side, max_len: usize) -> Result<EncodedCollection> {
        let d_enc = self.params.config.d_enc();
        let results = par::map_range(sentences.len(), |k| {
            let s = &sentences[k];
            if s.is_empty() || s.len() > max_len {
                Ok(None)
            } else {
                self.encode_one(s, side).map(Some)
            }
        });
        let mut out = EncodedCollection {
            d_enc,
            reps: Vec::new(),
            index: Vec::new(),
            skipped: Vec::new(),
        };
        for (k, r) in results.into_iter().enumerate() {
            match r? {
                Some(rep) => {
                    out.reps.extend(rep);
                    out.index.push(k);
                }
                None => out.skipped.push(k),
            }
        }
        Ok(out)
    }

    /// Tokenizes, encodes with `vocab`, and encodes each sentence once.
    pub fn encode_collection(
        &self,
        sentences: &[String],
        side: Side,
        vocab: &Vocabulary,
    ) -> Result<EncodedCollection> {
        let want = self.params.vocab_size(side);
        if vocab.len() != want {
            return Err(Error::VocabMismatch {
                side: match side {
                    Side::Source => "source",
                    Side::Target => "target",
                },
                vocab: vocab.len(),
                model: want,
            });
        }
        // rejected lines become empty sequences, which encode_ids skips
        let ids: Vec<Vec<u32>> = par::map_slice(sentences, |s| {
            text::encode_line(s, vocab, text::MAX_LEN).unwrap_or_default()
        });
        self.encode_ids(&ids, side, text::MAX_LEN)
    }

    /// Direct evaluation of one pair of stored representations.
    pub fn score_pair(&self, src: &EncodedCollection, a: usize, tgt: &EncodedCollection, b: usize) -> f32 {
        let mut scratch = crate::model::forward_scratch(&self.params.config);
        sigmoid(self.params.match_logit(src.rep(a), tgt.rep(b), &mut scratch))
    }

    /// Streams every `(i, j)` score to `sink`. Emission order: tiles in
    /// row-block-major order, rows then columns inside a tile (plain row-major
    /// whenever the target side fits in one tile).
    pub fn score_cartesian(
        &self,
        src: &EncodedCollection,
        tgt: &EncodedCollection,
        mut sink: impl FnMut(ScoredPair),
    ) -> ScoreStats {
        let o = self.options;
        let (tr, tc) = (o.tile_rows.max(1), o.tile_cols.max(1));
        let mut tiles = Vec::new();
        for r0 in (0..src.len()).step_by(tr) {
            for c0 in (0..tgt.len()).step_by(tc) {
                tiles.push((r0..(r0 + tr).min(src.len()), c0..(c0 + tc).min(tgt.len())));
            }
        }
        let per_wave = (o.max_buffered / (tr * tc)).max(1);
        let mut stats = ScoreStats {
            tiles: tiles.len(),
            ..Default::default()
        };
        for wave in tiles.chunks(per_wave) {
            let scored = par::map_slice(wave, |(rows, cols)| {
                let mut scratch = crate::model::forward_scratch(&self.params.config);
                let mut out = Vec::with_capacity(rows.len() * cols.len());
                for a in rows.clone() {
                    let hs = src.rep(a);
                    for b in cols.clone() {
                        let logit = self.params.match_logit(hs, tgt.rep(b), &mut scratch);
                        out.push(ScoredPair {
                            i: src.index[a],
                            j: tgt.index[b],
                            p: sigmoid(logit),
                        });
                    }
                }
                out
            });
            let buffered: usize = scored.iter().map(Vec::len).sum();
            stats.peak_buffered = stats.peak_buffered.max(buffered);
            for tile in scored {
                stats.pairs += tile.len();
                tile.into_iter().for_each(&mut sink);
            }
        }
        stats
    }
}

/// Pairs with `p >= rho`, best first.
pub fn extract(scored: impl IntoIterator<Item = ScoredPair>, rho: f64) -> Vec<ScoredPair> {
    let mut kept: Vec<ScoredPair> = scored
        .into_iter()
        .filter(|s| crate::model::predict(s.p as f64, rho))
        .collect();
    kept.sort_by(rank_order);
    kept
}

#[derive(Debug, Clone, Copy)]
struct Ranked(ScoredPair);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        rank_order(&self.0, &other.0) == Ordering::Equal
    }
}

impl Eq for Ranked {}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked {
    // better-ranked compares smaller, so the max-heap top is the worst kept pair
    fn cmp(&self, other: &Self) -> Ordering {
        rank_order(&self.0, &other.0)
    }
}

/// Streaming exact top-k in `O(k)` memory.
#[derive(Debug, Clone)]
pub struct TopK {
    k: usize,
    heap: BinaryHeap<Ranked>,
}

impl TopK {
    pub fn new(k: usize) -> Self {
        TopK {
            k,
            heap: BinaryHeap::with_capacity(k.min(1 << 20) + 1),
        }
    }

    pub fn push(&mut self, s: ScoredPair) {
        if self.k == 0 {
            return;
        }
        if self.heap.len() < self.k {
            self.heap.push(Ranked(s));
        } else if let Some(worst) = self.heap.peek() {
            if Ranked(s) < *worst {
                self.heap.pop();
                self.heap.push(Ranked(s));
            }
        }
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Kept pairs, best first.
    pub fn into_sorted(self) -> Vec<ScoredPair> {
        self.heap.into_sorted_vec().into_iter().map(|r| r.0).collect()
    }
}

pub fn top_k(scored: impl IntoIterator<Item = ScoredPair>, k: usize) -> Vec<ScoredPair> {
    let mut t = TopK::new(k);
    scored.into_iter().for_each(|s| t.push(s));
    t.into_sorted()
}

pub fn scored_tsv_line(s: &ScoredPair) -> String {
    format!("{}\t{}\t{:.6}", s.i, s.j, s.p)
}

pub fn write_scored_tsv(path: &Path, pairs: &[ScoredPair]) -> Result<()> {
    let lines: Vec<String> = pairs.iter().map(scored_tsv_line).collect();
    fsio::write_atomic(path, fsio::join_lines(&lines).as_bytes())
}

/// Writes `source.txt`/`target.txt` (aligned) and `pairs.tsv` (provenance) into `dir`.
pub fn write_extracted(dir: &Path, source: &[String], target: &[String], pairs: &[ScoredPair]) -> Result<()> {
    fsio::ensure_dir(dir)?;
    let src: Vec<&str> = pairs.iter().map(|s| source[s.i].as_str()).collect();
    let tgt: Vec<&str> = pairs.iter().map(|s| target[s.j].as_str()).collect();
    fsio::write_atomic(&dir.join("source.txt"), fsio::join_lines(&src).as_bytes())?;
    fsio::write_atomic(&dir.join("target.txt"), fsio::join_lines(&tgt).as_bytes())?;
    write_scored_tsv(&dir.join("pairs.tsv"), pairs)
}
