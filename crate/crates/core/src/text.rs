//! Tokenization, vocabularies and integer encoding of sentences.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fsio;

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Longest sentence the encoder accepts.
pub const MAX_LEN: usize = 80;

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '«' | '»' | '“' | '”' | '„' | '‘' | '’' | '¿' | '¡' | '…' | '–' | '—'
        )
}

/// Splits on whitespace, then peels punctuation characters off both ends of
/// every word. Case is preserved and inner punctuation (`don't`) stays put.
pub fn tokenize(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in line.split_whitespace() {
        let chars: Vec<char> = word.chars().collect();
        let mut start = 0;
        while start < chars.len() && is_punct(chars[start]) {
            start += 1;
        }
        let mut end = chars.len();
        while end > start && is_punct(chars[end - 1]) {
            end -= 1;
        }
        out.extend(chars[..start].iter().map(|c| c.to_string()));
        if start < end {
            out.push(chars[start..end].iter().collect());
        }
        out.extend(chars[end..].iter().map(|c| c.to_string()));
    }
    out
}

/// Token ↔ id map. Ids 0 and 1 are reserved for padding and unknown words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    fn with_tokens(words: impl IntoIterator<Item = String>) -> Self {
        let mut tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        tokens.extend(words);
        let index = tokens
            .iter()
            .enumerate()
            .skip(2)
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary { tokens, index }
    }

    /// Keeps the `max_size - 2` most frequent tokens (all of them when
    /// `max_size` is `None`). Equal counts are ordered by first occurrence.
    pub fn build<I, S>(sentences: I, max_size: Option<usize>) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[String]>,
    {
        if let Some(m) = max_size {
            if m < 2 {
                return Err(Error::InvalidArgument(format!(
                    "vocabulary max size must be at least 2, got {m}"
                )));
            }
        }
        // (count, first occurrence) per token
        let mut counts: HashMap<String, (u64, usize)> = HashMap::new();
        let mut seen = 0usize;
        for sent in sentences {
            for tok in sent.as_ref() {
                if tok == PAD_TOKEN || tok == UNK_TOKEN {
                    continue;
                }
                let next = counts.len();
                counts.entry(tok.clone()).or_insert((0, next)).0 += 1;
                seen += 1;
            }
        }
        if seen == 0 {
            return Err(Error::EmptyCorpus("no tokens to build a vocabulary from".into()));
        }
        let mut ranked: Vec<(String, u64, usize)> =
            counts.into_iter().map(|(t, (c, f))| (t, c, f)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
        if let Some(m) = max_size {
            ranked.truncate(m - 2);
        }
        Ok(Self::with_tokens(ranked.into_iter().map(|(t, _, _)| t)))
    }

    /// Only the two reserved entries.
    pub fn reserved_only() -> Self {
        Self::with_tokens(std::iter::empty())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// True when the vocabulary holds nothing beyond the reserved ids.
    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 2
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn decode(&self, ids: &[u32]) -> Vec<String> {
        ids.iter()
            .map(|&i| self.token(i).unwrap_or(UNK_TOKEN).to_string())
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsio::write_atomic(path, fsio::join_lines(&self.tokens).as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let lines = fsio::read_lines(path)?;
        let bad = |line: usize, msg: &str| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: msg.to_string(),
        };
        if lines.first().map(String::as_str) != Some(PAD_TOKEN) {
            return Err(bad(1, "first line must be <pad>"));
        }
        if lines.get(1).map(String::as_str) != Some(UNK_TOKEN) {
            return Err(bad(2, "second line must be <unk>"));
        }
        let mut seen = std::collections::HashSet::new();
        for (i, t) in lines.iter().enumerate().skip(2) {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(bad(i + 1, "tokens must be non-empty and contain no whitespace"));
            }
            if !seen.insert(t.as_str()) || t == PAD_TOKEN || t == UNK_TOKEN {
                return Err(bad(i + 1, "duplicate token"));
            }
        }
        Ok(Self::with_tokens(lines.into_iter().skip(2)))
    }
}

/// Why a sentence was not encoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    Empty,
    TooLong(usize),
}

/// Maps tokens to ids. Sentences longer than `max_len` are rejected, never truncated.
pub fn encode_sentence(
    tokens: &[String],
    vocab: &Vocabulary,
    max_len: usize,
) -> std::result::Result<Vec<u32>, Rejection> {
    if tokens.is_empty() {
        return Err(Rejection::Empty);
    }
    if tokens.len() > max_len {
        return Err(Rejection::TooLong(tokens.len()));
    }
    Ok(tokens.iter().map(|t| vocab.id(t)).collect())
}

/// Tokenize + encode in one go.
pub fn encode_line(
    line: &str,
    vocab: &Vocabulary,
    max_len: usize,
) -> std::result::Result<Vec<u32>, Rejection> {
    encode_sentence(&tokenize(line), vocab, max_len)
}

/// Sentence-aligned source/target lines.
#[derive(Debug, Clone, Default)]
pub struct ParallelCorpus {
    pub source: Vec<String>,
    pub target: Vec<String>,
}

impl ParallelCorpus {
    pub fn new(source: Vec<String>, target: Vec<String>) -> Result<Self> {
        if source.len() != target.len() {
            return Err(Error::MisalignedCorpus {
                source_lines: source.len(),
                target_lines: target.len(),
            });
        }
        Ok(ParallelCorpus { source, target })
    }

    pub fn load(source: &Path, target: &Path) -> Result<Self> {
        Self::new(fsio::read_lines(source)?, fsio::read_lines(target)?)
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.source
            .iter()
            .zip(&self.target)
            .map(|(s, t)| (s.as_str(), t.as_str()))
    }
}

/// Encoded parallel pairs plus how many raw pairs were dropped.
#[derive(Debug, Clone, Default)]
pub struct EncodedCorpus {
    pub pairs: Vec<(Vec<u32>, Vec<u32>)>,
    pub dropped: usize,
}

/// Encodes both sides; a pair is dropped when either side is rejected.
pub fn encode_parallel(
    corpus: &ParallelCorpus,
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
    max_len: usize,
) -> EncodedCorpus {
    let mut out = EncodedCorpus::default();
    for (s, t) in corpus.pairs() {
        match (
            encode_line(s, src_vocab, max_len),
            encode_line(t, tgt_vocab, max_len),
        ) {
            (Ok(s), Ok(t)) => out.pairs.push((s, t)),
            _ => out.dropped += 1,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn tokenize_detaches_punctuation() {
        assert_eq!(tokenize("Hello, world."), vec!["Hello", ",", "world", "."]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("a  b"), vec!["a", "b"]);
        assert_eq!(tokenize("(don't)"), vec!["(", "don't", ")"]);
        assert_eq!(tokenize("«oui»"), vec!["«", "oui", "»"]);
        assert_eq!(tokenize("..."), vec![".", ".", "."]);
    }

    #[test]
    fn vocab_top_frequency_with_first_occurrence_ties() {
        let corpus = vec![toks("a b"), toks("a c")];
        let v = Vocabulary::build(&corpus, Some(4)).unwrap();
        assert_eq!(v.tokens(), &["<pad>", "<unk>", "a", "b"]);
        let v = Vocabulary::build(&corpus, Some(2)).unwrap();
        assert_eq!(v.len(), 2);
        let v = Vocabulary::build(&corpus, None).unwrap();
        assert_eq!(v.len(), 5);
    }

    #[test]
    fn vocab_rejects_empty_and_tiny() {
        let empty: Vec<Vec<String>> = vec![vec![]];
        assert!(matches!(
            Vocabulary::build(&empty, None),
            Err(Error::EmptyCorpus(_))
        ));
        assert!(Vocabulary::build(&[toks("a")], Some(1)).is_err());
    }

    #[test]
    fn unlimited_vocab_counts_every_distinct_token() {
        let n = 69_381;
        let sent: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        let v = Vocabulary::build([sent], None).unwrap();
        assert_eq!(v.len(), n + 2);
    }

    #[test]
    fn encode_maps_unknowns_and_rejects() {
        let v = Vocabulary::build([toks("a")], None).unwrap();
        assert_eq!(encode_sentence(&toks("a zzz"), &v, MAX_LEN), Ok(vec![2, 1]));
        let long: Vec<String> = (0..81).map(|_| "a".to_string()).collect();
        assert_eq!(encode_sentence(&long, &v, MAX_LEN), Err(Rejection::TooLong(81)));
        assert_eq!(encode_sentence(&long[..80], &v, MAX_LEN).unwrap().len(), 80);
        assert_eq!(encode_sentence(&[], &v, MAX_LEN), Err(Rejection::Empty));
    }

    #[test]
    fn vocab_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.txt");
        let v = Vocabulary::build([toks("x y x z")], None).unwrap();
        v.save(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("<pad>\n<unk>\nx\n"));
        assert_eq!(Vocabulary::load(&p).unwrap(), v);
        std::fs::write(&p, "<unk>\n<pad>\n").unwrap();
        assert!(Vocabulary::load(&p).is_err());
    }

    #[test]
    fn misaligned_corpus_is_rejected() {
        assert!(ParallelCorpus::new(vec!["a".into()], vec![]).is_err());
    }

    #[test]
    fn encode_parallel_drops_rejected_pairs() {
        let c = ParallelCorpus::new(
            vec!["a b".into(), "".into(), "a".into()],
            vec!["x".into(), "y".into(), "".into()],
        )
        .unwrap();
        let v = Vocabulary::build([toks("a b x y")], None).unwrap();
        let e = encode_parallel(&c, &v, &v, MAX_LEN);
        assert_eq!(e.pairs.len(), 1);
        assert_eq!(e.dropped, 2);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn sentence() -> impl Strategy<Value = Vec<String>> {
            prop::collection::vec("[a-f]{1,2}", 0..12)
        }

        proptest! {
            #[test]
            fn decode_encode_replaces_oov_with_unk(
                train in prop::collection::vec(sentence(), 1..6),
                s in sentence(),
                cap in 2usize..10,
            ) {
                prop_assume!(train.iter().any(|t| !t.is_empty()));
                let v = Vocabulary::build(&train, Some(cap)).unwrap();
                match encode_sentence(&s, &v, MAX_LEN) {
                    Ok(ids) => {
                        prop_assert!(ids.iter().all(|&i| (i as usize) < v.len() && i != PAD));
                        let back = v.decode(&ids);
                        for (orig, dec) in s.iter().zip(&back) {
                            if v.id(orig) == UNK {
                                prop_assert_eq!(dec.as_str(), UNK_TOKEN);
                            } else {
                                prop_assert_eq!(dec, orig);
                            }
                        }
                    }
                    Err(r) => prop_assert_eq!(r, Rejection::Empty),
                }
            }

            #[test]
            fn vocab_is_order_invariant_for_distinct_counts(
                counts in prop::collection::vec(1usize..6, 1..6),
                seed in any::<u64>(),
            ) {
                use rand::seq::SliceRandom;
                use rand::SeedableRng;
                // give every token a distinct count so ties cannot occur
                let mut lines = Vec::new();
                for (i, _) in counts.iter().enumerate() {
                    for _ in 0..=i {
                        lines.push(vec![format!("t{i}")]);
                    }
                }
                let a = Vocabulary::build(&lines, None).unwrap();
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                lines.shuffle(&mut rng);
                let b = Vocabulary::build(&lines, None).unwrap();
                prop_assert_eq!(a, b);
            }
        }
    }
}
