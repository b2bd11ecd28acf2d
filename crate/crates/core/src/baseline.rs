//! Feature-based comparison system: IBM Model 1 lexical tables, a two-step
//! candidate filter, alignment-derived features and a logistic
//! (maximum-entropy) classifier.

use std::collections::HashMap;
use std::path::Path;

use rand::Rng as _;

use crate::dataset::NoisyTestSet;
use crate::error::{Error, Result};
use crate::evaluation::PairScorer;
use crate::extraction::ScoredPair;
use crate::fsio;
use crate::par;
use crate::rng;
use crate::text::tokenize;

pub const NULL_TOKEN: &str = "<null>";
/// Smallest probability written to a table file.
pub const MIN_SAVED_PROB: f64 = 1e-6;
/// Value of the mean log-probability feature when nothing is linked.
pub const LOG_PROB_FLOOR: f64 = -13.815510557964274; // ln(1e-6)

/// `t(f|e)`: probability of target word `f` given source word `e`. Row 0 is
/// the NULL source word.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LexicalTable {
    source_words: Vec<String>,
    source_index: HashMap<String, u32>,
    target_words: Vec<String>,
    target_index: HashMap<String, u32>,
    rows: Vec<HashMap<u32, f64>>,
}

fn intern(words: &mut Vec<String>, index: &mut HashMap<String, u32>, w: &str) -> u32 {
    if let Some(&id) = index.get(w) {
        return id;
    }
    let id = words.len() as u32;
    words.push(w.to_string());
    index.insert(w.to_string(), id);
    id
}

impl LexicalTable {
    fn empty() -> Self {
        let mut t = LexicalTable::default();
        intern(&mut t.source_words, &mut t.source_index, NULL_TOKEN);
        t.rows.push(HashMap::new());
        t
    }

    fn source_id(&mut self, w: &str) -> u32 {
        let id = intern(&mut self.source_words, &mut self.source_index, w);
        if id as usize == self.rows.len() {
            self.rows.push(HashMap::new());
        }
        id
    }

    /// Builds a table from explicit `(e, f, t(f|e))` entries, unnormalized.
    pub fn from_entries<'a>(entries: impl IntoIterator<Item = (&'a str, &'a str, f64)>) -> Self {
        let mut t = LexicalTable::empty();
        for (e, f, p) in entries {
            let e = t.source_id(e);
            let f = intern(&mut t.target_words, &mut t.target_index, f);
            t.rows[e as usize].insert(f, p);
        }
        t
    }

    /// `t(f|e)`, 0 for unseen combinations.
    pub fn prob(&self, e: &str, f: &str) -> f64 {
        match (self.source_index.get(e), self.target_index.get(f)) {
            (Some(&e), Some(&f)) => self.rows[e as usize].get(&f).copied().unwrap_or(0.0),
            _ => 0.0,
        }
    }

    pub fn null_prob(&self, f: &str) -> f64 {
        self.prob(NULL_TOKEN, f)
    }

    /// `Σ_f t(f|e)` for a source word present in the table.
    pub fn row_sum(&self, e: &str) -> Option<f64> {
        self.source_index
            .get(e)
            .map(|&e| self.rows[e as usize].values().sum())
    }

    pub fn source_vocab_len(&self) -> usize {
        self.source_words.len()
    }

    /// TSV `e<TAB>f<TAB>t(f|e)`, entries below [`MIN_SAVED_PROB`] omitted,
    /// sorted by `e` then `f`.
    pub fn to_tsv(&self) -> String {
        let mut lines = Vec::new();
        for (e, row) in self.rows.iter().enumerate() {
            for (&f, &p) in row {
                if p >= MIN_SAVED_PROB {
                    lines.push((
                        self.source_words[e].as_str(),
                        self.target_words[f as usize].as_str(),
                        p,
                    ));
                }
            }
        }
        lines.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        lines
            .iter()
            .map(|(e, f, p)| format!("{e}\t{f}\t{p:e}\n"))
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsio::write_atomic(path, self.to_tsv().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut t = LexicalTable::empty();
        for (n, line) in fsio::read_lines(path)?.iter().enumerate() {
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                msg: msg.to_string(),
            };
            let mut parts = line.split('\t');
            let (Some(e), Some(f), Some(p), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
                return Err(bad("expected e<TAB>f<TAB>prob"));
            };
            let p: f64 = p.parse().map_err(|_| bad("bad probability"))?;
            if !(0.0..=1.0 + 1e-9).contains(&p) {
                return Err(bad("probability outside [0, 1]"));
            }
            let e = t.source_id(e);
            let f = intern(&mut t.target_words, &mut t.target_index, f);
            t.rows[e as usize].insert(f, p);
        }
        Ok(t)
    }
}

/// Output of EM: the table plus the corpus log-likelihood after each iteration.
#[derive(Debug, Clone)]
pub struct Ibm1Fit {
    pub table: LexicalTable,
    pub log_likelihood: Vec<f64>,
}

/// `Σ_pairs Σ_j ln( Σ_{i∈{NULL}∪s} t(f_j|e_i) / (|s|+1) )`.
pub fn ibm1_log_likelihood(table: &LexicalTable, corpus: &[(Vec<String>, Vec<String>)]) -> f64 {
    let mut ll = 0.0;
    for (s, t) in corpus {
        let norm = (s.len() + 1) as f64;
        for f in t {
            let sum: f64 = table.null_prob(f) + s.iter().map(|e| table.prob(e, f)).sum::<f64>();
            ll += (sum / norm).max(f64::MIN_POSITIVE).ln();
        }
    }
    ll
}

/// IBM Model 1 EM with a NULL source word. Initialization is uniform over
/// co-occurring target words, which the first E-step sees as a constant.
pub fn train_ibm1(corpus: &[(Vec<String>, Vec<String>)], iterations: usize) -> Result<Ibm1Fit> {
    if corpus.iter().all(|(s, t)| s.is_empty() || t.is_empty()) {
        return Err(Error::EmptyCorpus("no non-empty pair to align".into()));
    }
    let mut table = LexicalTable::empty();
    let mut encoded = Vec::with_capacity(corpus.len());
    for (s, t) in corpus {
        let mut es = vec![0u32];
        es.extend(s.iter().map(|w| table.source_id(w)));
        let ft: Vec<u32> = t
            .iter()
            .map(|w| intern(&mut table.target_words, &mut table.target_index, w))
            .collect();
        encoded.push((es, ft));
    }
    for (es, ft) in &encoded {
        for &e in es {
            for &f in ft {
                table.rows[e as usize].insert(f, 1.0);
            }
        }
    }
    // per-row uniform start
    for row in &mut table.rows {
        let n = row.len() as f64;
        row.values_mut().for_each(|v| *v = 1.0 / n);
    }

    let mut log_likelihood = Vec::with_capacity(iterations);
    let mut counts: Vec<HashMap<u32, f64>> = table.rows.iter().map(|r| r.keys().map(|&k| (k, 0.0)).collect()).collect();
    for _ in 0..iterations {
        counts.iter_mut().for_each(|r| r.values_mut().for_each(|v| *v = 0.0));
        for (es, ft) in &encoded {
            for &f in ft {
                let denom: f64 = es.iter().map(|&e| table.rows[e as usize][&f]).sum();
                for &e in es {
                    *counts[e as usize].get_mut(&f).expect("co-occurrence") +=
                        table.rows[e as usize][&f] / denom;
                }
            }
        }
        for (row, c) in table.rows.iter_mut().zip(&counts) {
            let total: f64 = c.values().sum();
            if total > 0.0 {
                for (f, v) in row.iter_mut() {
                    *v = c[f] / total;
                }
            }
        }
        log_likelihood.push(ibm1_log_likelihood(&table, corpus));
    }
    Ok(Ibm1Fit {
        table,
        log_likelihood,
    })
}

/// Tables in both directions: `forward` is `t(f|e)`, `reverse` is `t(e|f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LexicalTables {
    pub forward: LexicalTable,
    pub reverse: LexicalTable,
}

impl LexicalTables {
    pub fn train(corpus: &[(Vec<String>, Vec<String>)], iterations: usize) -> Result<Self> {
        let flipped: Vec<_> = corpus.iter().map(|(s, t)| (t.clone(), s.clone())).collect();
        Ok(LexicalTables {
            forward: train_ibm1(corpus, iterations)?.table,
            reverse: train_ibm1(&flipped, iterations)?.table,
        })
    }
}

/// `max/min ≤ 2`, lengths as token counts.
pub fn length_ratio_filter(src: &[String], tgt: &[String]) -> bool {
    let (a, b) = (src.len(), tgt.len());
    if a == 0 || b == 0 {
        return false;
    }
    a.max(b) <= 2 * a.min(b)
}

/// Fraction of `words` having some partner `w` with `table.prob(word, w) ≥ tau`.
fn coverage(words: &[String], partners: &[String], table: &LexicalTable, tau: f64) -> f64 {
    if words.is_empty() {
        return 0.0;
    }
    let covered = words
        .iter()
        .filter(|e| partners.iter().any(|f| table.prob(e, f) >= tau))
        .count();
    covered as f64 / words.len() as f64
}

pub fn word_overlap_filter(
    src: &[String],
    tgt: &[String],
    tables: &LexicalTables,
    min_coverage: f64,
    tau: f64,
) -> bool {
    coverage(src, tgt, &tables.forward, tau) >= min_coverage
        && coverage(tgt, src, &tables.reverse, tau) >= min_coverage
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    /// Lexical threshold for "has a translation".
    pub tau: f64,
    pub min_coverage: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            tau: 0.1,
            min_coverage: 0.5,
        }
    }
}

pub fn candidate_filter(src: &[String], tgt: &[String], tables: &LexicalTables, cfg: &FilterConfig) -> bool {
    length_ratio_filter(src, tgt) && word_overlap_filter(src, tgt, tables, cfg.min_coverage, cfg.tau)
}

pub const FEATURE_NAMES: [&str; 17] = [
    "src_len",
    "tgt_len",
    "len_diff",
    "len_ratio",
    "connected",
    "coverage_src",
    "coverage_tgt",
    "fert1_src",
    "fert2_src",
    "fert3_src",
    "fert1_tgt",
    "fert2_tgt",
    "fert3_tgt",
    "run_src",
    "run_tgt",
    "logprob_src",
    "logprob_tgt",
];
pub const FEATURE_DIM: usize = FEATURE_NAMES.len();

/// One direction of greedy linking: each word of `words` links to its most
/// probable partner when that probability reaches `tau`.
struct Links {
    linked: Vec<bool>,
    /// How many words link to each partner position.
    fertility: Vec<usize>,
    log_probs: Vec<f64>,
}

fn greedy_links(words: &[String], partners: &[String], table: &LexicalTable, tau: f64) -> Links {
    let mut l = Links {
        linked: vec![false; words.len()],
        fertility: vec![0; partners.len()],
        log_probs: Vec::new(),
    };
    for (k, e) in words.iter().enumerate() {
        // first maximum wins, so the result does not depend on hashing
        let mut best: Option<(usize, f64)> = None;
        for (j, f) in partners.iter().enumerate() {
            let p = table.prob(e, f);
            if best.is_none_or(|(_, b)| p > b) {
                best = Some((j, p));
            }
        }
        if let Some((j, p)) = best {
            if p >= tau && p > 0.0 {
                l.linked[k] = true;
                l.fertility[j] += 1;
                l.log_probs.push(p.ln());
            }
        }
    }
    l
}

fn top3(fertility: &[usize]) -> [f64; 3] {
    let mut f = fertility.to_vec();
    f.sort_unstable_by(|a, b| b.cmp(a));
    let at = |k: usize| f.get(k).copied().unwrap_or(0) as f64;
    [at(0), at(1), at(2)]
}

fn longest_run(linked: &[bool]) -> f64 {
    let (mut best, mut cur) = (0, 0);
    for &x in linked {
        cur = if x { cur + 1 } else { 0 };
        best = best.max(cur);
    }
    best as f64
}

fn mean_log(lp: &[f64]) -> f64 {
    if lp.is_empty() {
        LOG_PROB_FLOOR
    } else {
        lp.iter().sum::<f64>() / lp.len() as f64
    }
}

/// Features in [`FEATURE_NAMES`] order. `_src` fertilities count how many
/// source words link to each target word, and vice versa.
pub fn compute_features(src: &[String], tgt: &[String], tables: &LexicalTables, tau: f64) -> [f64; FEATURE_DIM] {
    let fw = greedy_links(src, tgt, &tables.forward, tau);
    let bw = greedy_links(tgt, src, &tables.reverse, tau);
    let (ls, lt) = (src.len() as f64, tgt.len() as f64);
    let cs = fw.linked.iter().filter(|&&x| x).count() as f64;
    let ct = bw.linked.iter().filter(|&&x| x).count() as f64;
    let fs = top3(&fw.fertility);
    let ft = top3(&bw.fertility);
    [
        ls,
        lt,
        (ls - lt).abs(),
        if lt > 0.0 { ls / lt } else { 0.0 },
        cs + ct,
        if ls > 0.0 { cs / ls } else { 0.0 },
        if lt > 0.0 { ct / lt } else { 0.0 },
        fs[0],
        fs[1],
        fs[2],
        ft[0],
        ft[1],
        ft[2],
        longest_run(&fw.linked),
        longest_run(&bw.linked),
        mean_log(&fw.log_probs),
        mean_log(&bw.log_probs),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxentConfig {
    pub l2: f64,
    pub epochs: usize,
    pub lr: f64,
}

impl Default for MaxentConfig {
    fn default() -> Self {
        MaxentConfig {
            l2: 1e-4,
            epochs: 500,
            lr: 0.5,
        }
    }
}

/// Logistic regression over standardized features.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxentClassifier {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean cross entropy plus `l2/2 · ‖w‖²` (bias unpenalized), and its gradient
/// `(∂w, ∂b)`, over already-standardized rows.
pub fn maxent_objective(x: &[Vec<f64>], y: &[bool], w: &[f64], b: f64, l2: f64) -> (f64, Vec<f64>, f64) {
    let n = x.len() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for (row, &label) in x.iter().zip(y) {
        let z = b + row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
        let t = if label { 1.0 } else { 0.0 };
        // log(1 + e^z) − t·z, computed without overflow
        loss += z.max(0.0) + (-z.abs()).exp().ln_1p() - t * z;
        let d = (sigmoid(z) - t) / n;
        for (g, a) in gw.iter_mut().zip(row) {
            *g += d * a;
        }
        gb += d;
    }
    loss /= n;
    loss += 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>();
    for (g, v) in gw.iter_mut().zip(w) {
        *g += l2 * v;
    }
    (loss, gw, gb)
}

/// Full-batch gradient descent. Zero-variance features get unit scale.
pub fn train_maxent(features: &[Vec<f64>], labels: &[bool], cfg: &MaxentConfig) -> Result<MaxentClassifier> {
    if features.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} feature rows, {} labels",
            features.len(),
            labels.len()
        )));
    }
    if !labels.iter().any(|&y| y) || labels.iter().all(|&y| y) {
        return Err(Error::SingleClass);
    }
    let d = features[0].len();
    if features.iter().any(|r| r.len() != d) {
        return Err(Error::ShapeMismatch("ragged feature rows".into()));
    }
    let n = features.len() as f64;
    let mean: Vec<f64> = (0..d).map(|k| features.iter().map(|r| r[k]).sum::<f64>() / n).collect();
    let std: Vec<f64> = (0..d)
        .map(|k| {
            let var = features.iter().map(|r| (r[k] - mean[k]).powi(2)).sum::<f64>() / n;
            if var > 1e-12 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let x: Vec<Vec<f64>> = features
        .iter()
        .map(|r| (0..d).map(|k| (r[k] - mean[k]) / std[k]).collect())
        .collect();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    for _ in 0..cfg.epochs {
        let (_, gw, gb) = maxent_objective(&x, labels, &w, b, cfg.l2);
        for (v, g) in w.iter_mut().zip(&gw) {
            *v -= cfg.lr * g;
        }
        b -= cfg.lr * gb;
    }
    let names = if d == FEATURE_DIM {
        FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        (0..d).map(|k| format!("f{k}")).collect()
    };
    Ok(MaxentClassifier {
        names,
        mean,
        std,
        weights: w,
        bias: b,
    })
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",")
}

impl MaxentClassifier {
    pub fn probability(&self, features: &[f64]) -> f64 {
        let z = self.bias
            + features
                .iter()
                .zip(&self.mean)
                .zip(&self.std)
                .zip(&self.weights)
                .map(|(((x, m), s), w)| (x - m) / s * w)
                .sum::<f64>();
        sigmoid(z)
    }

    /// `key=value` lines: `names`, `mean`, `std`, `weights` (comma separated)
    /// and `bias`.
    pub fn to_text(&self) -> String {
        format!(
            "names={}\nmean={}\nstd={}\nweights={}\nbias={:e}\n",
            self.names.join(","),
            join(&self.mean),
            join(&self.std),
            join(&self.weights),
            self.bias
        )
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let mut kv = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                msg: "expected key=value".into(),
            })?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| {
            kv.get(k).cloned().ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                msg: format!("missing key {k}"),
            })
        };
        let nums = |k: &str| -> Result<Vec<f64>> {
            get(k)?
                .split(',')
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse().map_err(|_| Error::Parse {
                        path: path.to_path_buf(),
                        line: 0,
                        msg: format!("bad number in {k}"),
                    })
                })
                .collect()
        };
        let c = MaxentClassifier {
            names: get("names")?.split(',').map(String::from).collect(),
            mean: nums("mean")?,
            std: nums("std")?,
            weights: nums("weights")?,
            bias: nums("bias")?.first().copied().unwrap_or(0.0),
        };
        let d = c.names.len();
        if c.mean.len() != d || c.std.len() != d || c.weights.len() != d {
            return Err(Error::Corrupt(format!("classifier {}: inconsistent lengths", path.display())));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsio::write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub ibm1_iterations: usize,
    pub filter: FilterConfig,
    /// Filter-passing negatives sought per positive.
    pub negatives: usize,
    pub maxent: MaxentConfig,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            ibm1_iterations: 5,
            filter: FilterConfig::default(),
            negatives: 6,
            maxent: MaxentConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    pub tables: LexicalTables,
    pub filter: FilterConfig,
    pub classifier: MaxentClassifier,
}

/// Positives are all training pairs; negatives are random mismatched pairs
/// that pass the candidate filter. Gives up on a positive's negatives after
/// `50·m` draws, so a very selective filter yields fewer negatives.
pub fn build_training_set(
    corpus: &[(Vec<String>, Vec<String>)],
    tables: &LexicalTables,
    cfg: &BaselineConfig,
) -> Result<(Vec<Vec<f64>>, Vec<bool>)> {
    let n = corpus.len();
    if n < 2 {
        return Err(Error::TooFewPairs(n));
    }
    let tau = cfg.filter.tau;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut r = rng::derived(cfg.seed, &[rng::stream::BASELINE]);
    for (i, (s, t)) in corpus.iter().enumerate() {
        rows.push(compute_features(s, t, tables, tau).to_vec());
        labels.push(true);
        let (mut found, mut tries) = (0, 0);
        while found < cfg.negatives && tries < 50 * cfg.negatives.max(1) {
            tries += 1;
            let j = r.gen_range(0..n - 1);
            let j = if j >= i { j + 1 } else { j };
            let tj = &corpus[j].1;
            if tj == t || !candidate_filter(s, tj, tables, &cfg.filter) {
                continue;
            }
            rows.push(compute_features(s, tj, tables, tau).to_vec());
            labels.push(false);
            found += 1;
        }
    }
    Ok((rows, labels))
}

impl BaselineModel {
    pub fn train(corpus: &[(String, String)], cfg: &BaselineConfig) -> Result<Self> {
        let tok: Vec<(Vec<String>, Vec<String>)> = corpus.iter().map(|(s, t)| (tokenize(s), tokenize(t))).collect();
        let tables = LexicalTables::train(&tok, cfg.ibm1_iterations)?;
        let (x, y) = build_training_set(&tok, &tables, cfg)?;
        let classifier = train_maxent(&x, &y, &cfg.maxent)?;
        Ok(BaselineModel {
            tables,
            filter: cfg.filter,
            classifier,
        })
    }

    /// `None` for pairs the candidate filter discards.
    pub fn probability(&self, src: &[String], tgt: &[String]) -> Option<f64> {
        if !candidate_filter(src, tgt, &self.tables, &self.filter) {
            return None;
        }
        Some(self.classifier.probability(&compute_features(src, tgt, &self.tables, self.filter.tau)))
    }

    /// Probability and decision at threshold `rho`; discarded pairs get `(0, false)`.
    pub fn classify(&self, src: &[String], tgt: &[String], rho: f64) -> (f64, bool) {
        match self.probability(src, tgt) {
            Some(p) => (p, p >= rho),
            None => (0.0, false),
        }
    }

    /// Writes `forward.tsv`, `reverse.tsv` and `classifier.txt` into `dir`.
    /// The filter settings go into the classifier file.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fsio::ensure_dir(dir)?;
        self.tables.forward.save(&dir.join("forward.tsv"))?;
        self.tables.reverse.save(&dir.join("reverse.tsv"))?;
        let text = format!(
            "{}tau={:e}\nmin_coverage={:e}\n",
            self.classifier.to_text(),
            self.filter.tau,
            self.filter.min_coverage
        );
        fsio::write_atomic(&dir.join("classifier.txt"), text.as_bytes())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("classifier.txt");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let classifier = MaxentClassifier::from_text(&text, &path)?;
        let mut filter = FilterConfig::default();
        for line in text.lines() {
            let parse = |v: &str| {
                v.trim().parse::<f64>().map_err(|_| Error::Parse {
                    path: path.clone(),
                    line: 0,
                    msg: format!("bad filter value {v}"),
                })
            };
            match line.split_once('=') {
                Some(("tau", v)) => filter.tau = parse(v)?,
                Some(("min_coverage", v)) => filter.min_coverage = parse(v)?,
                _ => {}
            }
        }
        Ok(BaselineModel {
            tables: LexicalTables {
                forward: LexicalTable::load(&dir.join("forward.tsv"))?,
                reverse: LexicalTable::load(&dir.join("reverse.tsv"))?,
            },
            filter,
            classifier,
        })
    }
}

impl PairScorer for BaselineModel {
    fn score_testset(&self, set: &NoisyTestSet) -> Result<Vec<ScoredPair>> {
        let src: Vec<Vec<String>> = set.source.iter().map(|s| tokenize(s)).collect();
        let tgt: Vec<Vec<String>> = set.target.iter().map(|s| tokenize(s)).collect();
        let rows = par::map_range(src.len(), |i| {
            tgt.iter()
                .enumerate()
                .filter_map(|(j, t)| {
                    self.probability(&src[i], t).map(|p| ScoredPair { i, j, p: p as f32 })
                })
                .collect::<Vec<_>>()
        });
        Ok(rows.into_iter().flatten().collect())
    }
}
