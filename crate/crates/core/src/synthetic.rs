//! A small synthetic language pair for end-to-end checks.
//!
//! Source words `s0..s{V-1}` follow a Zipf law. The target side replaces each
//! word through a fixed random permutation (`s7` becomes, say, `t113`) and
//! swaps every "modifier" word with the word after it, a crude stand-in for
//! adjective/noun order differences.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng;

/// Sizes of the standard testbed language.
pub const TOY_VOCAB: usize = 200;
pub const TOY_MIN_LEN: usize = 4;
pub const TOY_MAX_LEN: usize = 12;
/// A flatter law than natural text: at exponent 1 short sentences built from
/// the few most frequent words dominate, and they are nearly impossible to
/// tell apart.
pub const TOY_ZIPF: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct ToyLanguage {
    substitution: Vec<usize>,
    modifier: Vec<bool>,
    weights: WeightedIndex<f64>,
    min_len: usize,
    max_len: usize,
}

impl ToyLanguage {
    /// `vocab` words per side, sentence lengths uniform in `min_len..=max_len`.
    /// Roughly every fourth word is a modifier.
    pub fn new(vocab: usize, min_len: usize, max_len: usize, zipf: f64, seed: u64) -> Result<Self> {
        if vocab < 2 || min_len == 0 || min_len > max_len {
            return Err(Error::InvalidArgument(format!(
                "toy language needs vocab >= 2 and 1 <= min_len <= max_len, got {vocab}, {min_len}..={max_len}"
            )));
        }
        let mut r = rng::derived(seed, &[0x70A]);
        let mut substitution: Vec<usize> = (0..vocab).collect();
        substitution.shuffle(&mut r);
        let modifier = (0..vocab).map(|_| r.gen_bool(0.25)).collect();
        let weights = WeightedIndex::new((0..vocab).map(|k| ((k + 1) as f64).powf(-zipf)))
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(ToyLanguage {
            substitution,
            modifier,
            weights,
            min_len,
            max_len,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.substitution.len()
    }

    pub fn sample_words(&self, r: &mut rng::Rng) -> Vec<usize> {
        let n = r.gen_range(self.min_len..=self.max_len);
        (0..n).map(|_| self.weights.sample(r)).collect()
    }

    pub fn translate_words(&self, words: &[usize]) -> Vec<usize> {
        let mut out = Vec::with_capacity(words.len());
        let mut k = 0;
        while k < words.len() {
            if self.modifier[words[k]] && k + 1 < words.len() {
                out.push(self.substitution[words[k + 1]]);
                out.push(self.substitution[words[k]]);
                k += 2;
            } else {
                out.push(self.substitution[words[k]]);
                k += 1;
            }
        }
        out
    }

    fn render(prefix: char, words: &[usize]) -> String {
        words
            .iter()
            .map(|w| format!("{prefix}{w}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// `n` parallel pairs drawn from the stream `stream` of `seed`.
    pub fn generate(&self, n: usize, seed: u64, stream: u64) -> Vec<(String, String)> {
        let mut r = rng::derived(seed, &[0x70A, stream]);
        (0..n)
            .map(|_| {
                let w = self.sample_words(&mut r);
                (Self::render('s', &w), Self::render('t', &self.translate_words(&w)))
            })
            .collect()
    }
}

/// Training corpus, a disjoint parallel pool for test sets and target-side
/// filler sentences, all from one language instance.
#[derive(Debug, Clone)]
pub struct ToyTestbed {
    pub language: ToyLanguage,
    pub train: Vec<(String, String)>,
    pub test_pool: Vec<(String, String)>,
    pub heldout_targets: Vec<String>,
}

impl ToyTestbed {
    pub fn generate(train: usize, test: usize, heldout: usize, seed: u64) -> Result<Self> {
        let language = ToyLanguage::new(TOY_VOCAB, TOY_MIN_LEN, TOY_MAX_LEN, TOY_ZIPF, seed)?;
        let train_pairs = language.generate(train, seed, 1);
        let test_pool = language.generate(test, seed, 2);
        let heldout_targets = language
            .generate(heldout, seed, 3)
            .into_iter()
            .map(|(_, t)| t)
            .collect();
        Ok(ToyTestbed {
            language,
            train: train_pairs,
            test_pool,
            heldout_targets,
        })
    }

    /// The default size used throughout the test suite: 5000 training pairs.
    pub fn standard(seed: u64) -> Self {
        Self::generate(5000, 1000, 2000, seed).expect("fixed toy sizes are valid")
    }
}
