//! Negative sampling, minibatching and synthetic noisy test sets.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::fsio;
use crate::rng::{self, Rng};
use crate::text::PAD;

/// Index pair into the encoded training corpus plus its label.
///
/// Triples reference sentences by corpus index instead of copying id
/// sequences; `n(1+m)` copies of the corpus per epoch are avoided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LabeledTriple {
    pub source: usize,
    pub target: usize,
    pub label: bool,
}

impl LabeledTriple {
    pub fn sequences<'a>(&self, corpus: &'a [(Vec<u32>, Vec<u32>)]) -> (&'a [u32], &'a [u32]) {
        (&corpus[self.source].0, &corpus[self.target].1)
    }
}

/// Each pair `k` yields its positive followed by `m` negatives `(k, j)` with
/// `j != k` drawn uniformly with replacement.
pub fn sample_negatives(n: usize, m: usize, rng: &mut Rng) -> Result<Vec<LabeledTriple>> {
    if m > 0 && n < 2 {
        return Err(Error::TooFewPairs(n));
    }
    let mut out = Vec::with_capacity(n * (1 + m));
    for k in 0..n {
        out.push(LabeledTriple {
            source: k,
            target: k,
            label: true,
        });
        for _ in 0..m {
            let mut j = rng.gen_range(0..n - 1);
            if j >= k {
                j += 1;
            }
            out.push(LabeledTriple {
                source: k,
                target: j,
                label: false,
            });
        }
    }
    Ok(out)
}

pub fn epoch_negatives_seed(base_seed: u64, epoch: usize) -> u64 {
    rng::derive_seed(base_seed, &[rng::stream::NEGATIVES, epoch as u64])
}

/// Fresh negatives for one epoch, seeded by `(base_seed, epoch)`.
pub fn resample_each_epoch(
    n: usize,
    m: usize,
    epoch: usize,
    base_seed: u64,
) -> Result<Vec<LabeledTriple>> {
    let mut r = rng::seeded(epoch_negatives_seed(base_seed, epoch));
    sample_negatives(n, m, &mut r)
}

/// One side of a minibatch, right-padded with `PAD` to the widest sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaddedSide {
    pub ids: Vec<u32>,
    pub width: usize,
    pub lengths: Vec<usize>,
}

impl PaddedSide {
    pub fn from_sequences<'a>(seqs: impl IntoIterator<Item = &'a [u32]>) -> Self {
        let seqs: Vec<&[u32]> = seqs.into_iter().collect();
        let width = seqs.iter().map(|s| s.len()).max().unwrap_or(0);
        let mut ids = vec![PAD; width * seqs.len()];
        let mut lengths = Vec::with_capacity(seqs.len());
        for (r, s) in seqs.iter().enumerate() {
            ids[r * width..r * width + s.len()].copy_from_slice(s);
            lengths.push(s.len());
        }
        PaddedSide {
            ids,
            width,
            lengths,
        }
    }

    pub fn rows(&self) -> usize {
        self.lengths.len()
    }

    /// The true-length content of row `r`.
    pub fn row(&self, r: usize) -> &[u32] {
        let start = r * self.width;
        &self.ids[start..start + self.lengths[r]]
    }

    /// The full padded row `r`.
    pub fn padded_row(&self, r: usize) -> &[u32] {
        &self.ids[r * self.width..(r + 1) * self.width]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub source: PaddedSide,
    pub target: PaddedSide,
    pub labels: Vec<bool>,
}

impl Batch {
    pub fn assemble(
        corpus: &[(Vec<u32>, Vec<u32>)],
        triples: &[LabeledTriple],
        order: &[usize],
    ) -> Self {
        let picked: Vec<&LabeledTriple> = order.iter().map(|&i| &triples[i]).collect();
        Batch {
            source: PaddedSide::from_sequences(picked.iter().map(|t| corpus[t.source].0.as_slice())),
            target: PaddedSide::from_sequences(picked.iter().map(|t| corpus[t.target].1.as_slice())),
            labels: picked.iter().map(|t| t.label).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Shuffled index groups of at most `batch_size`; the last may be short.
pub fn batch_plan(n: usize, batch_size: usize, rng: &mut Rng) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

pub fn make_batches(
    corpus: &[(Vec<u32>, Vec<u32>)],
    triples: &[LabeledTriple],
    batch_size: usize,
    rng: &mut Rng,
) -> Result<Vec<Batch>> {
    Ok(batch_plan(triples.len(), batch_size, rng)?
        .iter()
        .map(|order| Batch::assemble(corpus, triples, order))
        .collect())
}

/// Number of target positions replaced at noise ratio `r` over `p` pairs.
///
/// A small epsilon keeps e.g. `0.29 * 100` from flooring to 28.
pub fn replaced_count(p: usize, r: f64) -> usize {
    ((r * p as f64) + 1e-9).floor() as usize
}

/// A parallel sample with some targets swapped for unrelated sentences.
/// Candidates are every `(i, j)` in `0..p × 0..p`; only surviving diagonal
/// entries are gold.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyTestSet {
    pub source: Vec<String>,
    pub target: Vec<String>,
    pub gold: Vec<(usize, usize)>,
    pub noise_ratio: f64,
    pub seed: u64,
}

impl NoisyTestSet {
    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    pub fn candidate_count(&self) -> usize {
        self.source.len() * self.target.len()
    }

    pub fn gold_set(&self) -> HashSet<(usize, usize)> {
        self.gold.iter().copied().collect()
    }

    /// Writes `source.txt`, `target.txt`, `gold.tsv` and `meta.txt` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fsio::ensure_dir(dir)?;
        fsio::write_atomic(&dir.join("source.txt"), fsio::join_lines(&self.source).as_bytes())?;
        fsio::write_atomic(&dir.join("target.txt"), fsio::join_lines(&self.target).as_bytes())?;
        let gold: Vec<String> = self.gold.iter().map(|(i, j)| format!("{i}\t{j}")).collect();
        fsio::write_atomic(&dir.join("gold.tsv"), fsio::join_lines(&gold).as_bytes())?;
        let meta = format!(
            "p={}\nr={}\nseed={}\n",
            self.source.len(),
            self.noise_ratio,
            self.seed
        );
        fsio::write_atomic(&dir.join("meta.txt"), meta.as_bytes())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let source = fsio::read_lines(&dir.join("source.txt"))?;
        let target = fsio::read_lines(&dir.join("target.txt"))?;
        let gold_path = dir.join("gold.tsv");
        let mut gold = Vec::new();
        for (n, line) in fsio::read_lines(&gold_path)?.iter().enumerate() {
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::Parse {
                path: gold_path.clone(),
                line: n + 1,
                msg: msg.to_string(),
            };
            let (i, j) = line.split_once('\t').ok_or_else(|| bad("expected i<TAB>j"))?;
            let i: usize = i.parse().map_err(|_| bad("bad source index"))?;
            let j: usize = j.parse().map_err(|_| bad("bad target index"))?;
            if i >= source.len() || j >= target.len() {
                return Err(bad("index out of range"));
            }
            gold.push((i, j));
        }
        let meta_path = dir.join("meta.txt");
        let (mut r, mut seed) = (0.0, 0);
        for (n, line) in fsio::read_lines(&meta_path)?.iter().enumerate() {
            let bad = |msg: &str| Error::Parse {
                path: meta_path.clone(),
                line: n + 1,
                msg: msg.to_string(),
            };
            match line.split_once('=') {
                Some(("r", v)) => r = v.trim().parse().map_err(|_| bad("bad ratio"))?,
                Some(("seed", v)) => seed = v.trim().parse().map_err(|_| bad("bad seed"))?,
                Some(("p", _)) | None => {}
                Some(_) => {}
            }
        }
        Ok(NoisyTestSet {
            source,
            target,
            gold,
            noise_ratio: r,
            seed,
        })
    }
}

/// Replaces `floor(r·p)` target positions, chosen uniformly without
/// replacement, by distinct held-out sentences. Held-out sentences that
/// duplicate one of the parallel targets are ignored.
pub fn synthesize_noisy_testset(
    parallel: &[(String, String)],
    heldout_targets: &[String],
    r: f64,
    seed: u64,
) -> Result<NoisyTestSet> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::InvalidArgument(format!("noise ratio {r} outside [0, 1]")));
    }
    let p = parallel.len();
    let k = replaced_count(p, r);
    let originals: HashSet<&str> = parallel.iter().map(|(_, t)| t.as_str()).collect();
    let mut seen = HashSet::new();
    let pool: Vec<&String> = heldout_targets
        .iter()
        .filter(|t| !originals.contains(t.as_str()) && seen.insert(t.as_str()))
        .collect();
    if pool.len() < k {
        return Err(Error::InsufficientHeldout {
            needed: k,
            available: pool.len(),
        });
    }
    let mut rng = rng::derived(seed, &[rng::stream::NOISE]);
    let positions = rand::seq::index::sample(&mut rng, p, k).into_vec();
    let fillers = rand::seq::index::sample(&mut rng, pool.len(), k).into_vec();
    let source: Vec<String> = parallel.iter().map(|(s, _)| s.clone()).collect();
    let mut target: Vec<String> = parallel.iter().map(|(_, t)| t.clone()).collect();
    let mut replaced = vec![false; p];
    for (&pos, &fill) in positions.iter().zip(&fillers) {
        target[pos] = pool[fill].clone();
        replaced[pos] = true;
    }
    let gold = (0..p).filter(|&i| !replaced[i]).map(|i| (i, i)).collect();
    Ok(NoisyTestSet {
        source,
        target,
        gold,
        noise_ratio: r,
        seed,
    })
}
